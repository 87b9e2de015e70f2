use std::path::{Path, PathBuf};

use stefan_core::config::{ConfigError, RunConfig, Scheme};
use stefan_core::enthalpy::{self, Phase};
use stefan_core::oracles::decp::{decp_run, DecpVariant};
use stefan_core::stepper::{histogram, StepStats};
use stefan_core::studies::{compare_study, convergence_study, stress_study};
use stefan_core::{run, StepperConfig};

use crate::error::CliError;
use crate::output::{num, prepare_dir, Table};

/// Options shared by every subcommand.
#[derive(Debug, Clone)]
pub struct Common {
    pub config: PathBuf,
    pub out: PathBuf,
    pub seed: Option<u64>,
    pub workers: usize,
    pub scheme: Option<String>,
    pub tol_abs: Option<f64>,
    pub tol_rel: Option<f64>,
    pub enthalpy_scale: Option<f64>,
}

struct Loaded {
    cfg: RunConfig,
    scheme: Option<Scheme>,
    stepper: StepperConfig,
}

fn load(common: &Common) -> Result<Loaded, CliError> {
    let cfg = RunConfig::load(&common.config)?;
    let scheme = match &common.scheme {
        Some(name) => Some(Scheme::parse(name).ok_or_else(|| {
            let known: Vec<&str> = Scheme::ALL.iter().map(|s| s.name()).collect();
            CliError::Usage(format!(
                "unknown scheme `{name}` (expected one of {})",
                known.join(", ")
            ))
        })?),
        None => cfg.scheme,
    };
    let mut stepper = cfg.solver.stepper_config();
    if let Some(seed) = common.seed {
        stepper.solver.rng_seed = seed;
    }
    if let Some(t) = common.tol_abs {
        stepper.solver.tol_abs = t;
    }
    if let Some(t) = common.tol_rel {
        stepper.solver.tol_rel = t;
    }
    if let Some(s) = common.enthalpy_scale {
        stepper.solver.enthalpy_scale = s;
    }
    stepper.solver.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    if common.workers == 0 {
        return Err(CliError::Usage("--workers must be at least 1".into()));
    }
    Ok(Loaded { cfg, scheme, stepper })
}

fn write_histogram(dir: &Path, name: &str, stats: &[StepStats]) -> Result<(), CliError> {
    let mut table = Table::create(dir, name, &["linear_solves", "steps"])?;
    for (solves, steps) in histogram(stats) {
        table.row([solves.to_string(), steps.to_string()])?;
    }
    table.finish()
}

pub fn cmd_run(common: &Common) -> Result<String, CliError> {
    let Loaded { cfg, scheme, stepper } = load(common)?;
    let scheme = scheme.unwrap_or(Scheme::BackwardEuler);
    let scenario = cfg.scenario(scheme)?;
    let column = &scenario.column;
    prepare_dir(&common.out)?;

    // (time, temperatures, nodal enthalpies) per output time
    let mut frames: Vec<(f64, Vec<f64>, Vec<f64>)> = Vec::new();
    let stats: Vec<StepStats> = if scheme.is_decp() {
        let variant = match scheme {
            Scheme::DecpImplicit => DecpVariant::Implicit { theta: 0.5 },
            _ => DecpVariant::Explicit,
        };
        let traj = decp_run(&scenario, variant)?;
        for s in &traj.states {
            frames.push((s.time, s.temperature.clone(), s.enthalpy(column)));
        }
        let solves = usize::from(scheme == Scheme::DecpImplicit);
        vec![
            StepStats {
                linear_solves: solves,
                ..StepStats::default()
            };
            traj.states.len() - 1
        ]
    } else {
        let traj = run(&scenario, &stepper)?;
        for s in &traj.states {
            frames.push((s.time, s.gamma.clone(), s.eta.clone()));
        }
        traj.stats
    };

    let mut trajectory = Table::create(
        &common.out,
        "trajectory.csv",
        &["time", "node", "depth", "temperature", "enthalpy", "phase"],
    )?;
    for (time, temps, eta) in &frames {
        for (node, (&x, &u)) in column.nodes().iter().zip(temps).enumerate() {
            let (enthalpy, phase) = if node == 0 {
                (String::new(), Phase::of_temperature(u))
            } else {
                let e = eta[node - 1];
                (num(e), enthalpy::phase_of(column, e, node))
            };
            trajectory.row([
                num(*time),
                node.to_string(),
                num(x),
                num(u),
                enthalpy,
                phase.label().to_string(),
            ])?;
        }
    }
    trajectory.finish()?;

    let mut table = Table::create(
        &common.out,
        "stats.csv",
        &["step", "linear_solves", "fast_path", "corner_events"],
    )?;
    for (i, s) in stats.iter().enumerate() {
        table.row([
            (i + 1).to_string(),
            s.linear_solves.to_string(),
            u8::from(s.fast_path_taken).to_string(),
            s.corner_events.to_string(),
        ])?;
    }
    table.finish()?;
    write_histogram(&common.out, "histogram.csv", &stats)?;

    let mean = if stats.is_empty() {
        0.0
    } else {
        stats.iter().map(|s| s.linear_solves).sum::<usize>() as f64 / stats.len() as f64
    };
    Ok(format!(
        "{}: {} steps, mean {:.3} linear solves per step, {} fast-path steps",
        scheme.name(),
        stats.len(),
        mean,
        stats.iter().filter(|s| s.fast_path_taken).count()
    ))
}

pub fn cmd_convergence(common: &Common) -> Result<String, CliError> {
    let Loaded { cfg, scheme, stepper } = load(common)?;
    let thetas = match scheme {
        Some(s) if s.is_decp() => {
            return Err(ConfigError::SchemeStudy {
                scheme: s.name(),
                study: "the convergence study",
            }
            .into())
        }
        Some(s) => vec![s.theta()],
        None => cfg.convergence.thetas.clone(),
    };
    let ladder = &cfg.convergence.ladder;
    if ladder.is_empty() || ladder.windows(2).any(|w| w[1] <= w[0]) {
        return Err(CliError::Usage(
            "convergence ladder must be a non-empty increasing list".into(),
        ));
    }
    let bench = cfg.benchmark()?;
    let rows = convergence_study(
        &bench,
        ladder,
        cfg.convergence.base_dt,
        &thetas,
        &stepper,
        common.workers,
    )?;
    prepare_dir(&common.out)?;

    let mut table = Table::create(
        &common.out,
        "convergence.csv",
        &[
            "theta",
            "kappa",
            "h_min",
            "dt",
            "max_error",
            "error_profile_day",
            "profile_day",
        ],
    )?;
    for r in &rows {
        table.row([
            num(r.theta),
            r.kappa.to_string(),
            num(r.h_min),
            num(r.dt),
            num(r.max_error),
            num(r.error_profile_day),
            bench.profile_day.to_string(),
        ])?;
    }
    table.finish()?;

    let mut profiles = Table::create(
        &common.out,
        "convergence_profiles.csv",
        &["theta", "kappa", "depth", "numerical", "analytical"],
    )?;
    for r in &rows {
        for &(x, u, a) in &r.profile {
            profiles.row([num(r.theta), r.kappa.to_string(), num(x), num(u), num(a)])?;
        }
    }
    profiles.finish()?;

    let summary: Vec<String> = rows
        .iter()
        .map(|r| format!("theta={} kappa={} max_error={:.4}", r.theta, r.kappa, r.max_error))
        .collect();
    Ok(summary.join("\n"))
}

pub fn cmd_compare(common: &Common) -> Result<String, CliError> {
    let Loaded { cfg, scheme, stepper } = load(common)?;
    let theta = match scheme {
        Some(s) if !s.is_decp() => s.theta(),
        _ => cfg.compare.theta,
    };
    let bench = cfg.benchmark()?;
    let report = compare_study(&bench, cfg.compare.elements, cfg.compare.dt, theta, &stepper)?;
    prepare_dir(&common.out)?;

    let mut profile = Table::create(
        &common.out,
        "compare_profile.csv",
        &["depth", "analytical", "enthalpy", "decp_implicit", "decp_explicit"],
    )?;
    for r in &report.profile {
        profile.row([
            num(r.depth),
            num(r.analytical),
            num(r.enthalpy),
            num(r.decp_implicit),
            num(r.decp_explicit),
        ])?;
    }
    profile.finish()?;

    let mut summary = Table::create(&common.out, "compare_summary.csv", &["method", "mae", "plateau_nodes"])?;
    let methods = [
        ("enthalpy", report.mae_enthalpy, report.plateau_enthalpy),
        ("decp_implicit", report.mae_decp_implicit, report.plateau_decp_implicit),
        ("decp_explicit", report.mae_decp_explicit, report.plateau_decp_explicit),
    ];
    for (name, mae, plateau) in methods {
        summary.row([name.to_string(), num(mae), plateau.to_string()])?;
    }
    summary.row([
        "analytical_interface".to_string(),
        num(0.0),
        report.plateau_analytical.to_string(),
    ])?;
    summary.finish()?;

    Ok(format!(
        "mean absolute error: enthalpy {:.4}, implicit DECP {:.4}, explicit DECP {:.4}; \
         zero plateau at day {}: {} / {} / {} nodes",
        report.mae_enthalpy,
        report.mae_decp_implicit,
        report.mae_decp_explicit,
        bench.profile_day,
        report.plateau_enthalpy,
        report.plateau_decp_implicit,
        report.plateau_decp_explicit
    ))
}

pub fn cmd_stress(common: &Common) -> Result<String, CliError> {
    let seed = common
        .seed
        .ok_or_else(|| CliError::Usage("the stress study requires an explicit --seed".into()))?;
    let Loaded { cfg, scheme, stepper } = load(common)?;
    if let Some(s) = scheme.filter(|s| s.is_decp() || s.theta() == 0.0) {
        return Err(ConfigError::SchemeStudy {
            scheme: s.name(),
            study: "the stress study",
        }
        .into());
    }
    let report = stress_study(&cfg.stress, &stepper, seed, common.workers)?;
    prepare_dir(&common.out)?;

    let mut table = Table::create(
        &common.out,
        "stress.csv",
        &[
            "problem",
            "kappa",
            "converged",
            "linear_solves",
            "corner_events",
            "root_spread",
            "collinearity_violations",
            "error",
        ],
    )?;
    for o in &report.outcomes {
        let solves: Vec<String> = o.linear_solves.iter().map(|s| s.to_string()).collect();
        table.row([
            o.problem.to_string(),
            o.kappa.to_string(),
            u8::from(o.converged).to_string(),
            solves.join(" "),
            o.corner_events.to_string(),
            num(o.root_spread),
            o.collinearity_violations.to_string(),
            o.error.clone().unwrap_or_default(),
        ])?;
    }
    table.finish()?;

    let mut hist = Table::create(&common.out, "stress_histogram.csv", &["linear_solves", "count"])?;
    for (solves, count) in &report.histogram {
        hist.row([solves.to_string(), count.to_string()])?;
    }
    hist.finish()?;

    let mode = report.histogram_mode().map_or(String::new(), |m| m.to_string());
    let spread = report.outcomes.iter().map(|o| o.root_spread).fold(0.0, f64::max);
    let mut summary = Table::create(
        &common.out,
        "stress_summary.csv",
        &[
            "problems",
            "failures",
            "corner_events",
            "histogram_mode",
            "max_root_spread",
        ],
    )?;
    summary.row([
        report.outcomes.len().to_string(),
        report.failures.to_string(),
        report.corner_events.to_string(),
        mode.clone(),
        num(spread),
    ])?;
    summary.finish()?;

    if report.failures > 0 {
        return Err(CliError::StressFailures(report.failures));
    }
    Ok(format!(
        "{} problems, 0 failures, {} corner events, histogram mode {}",
        report.outcomes.len(),
        report.corner_events,
        mode
    ))
}
