//! Benchmark drivers: Neumann convergence ladder, DECP comparison and the
//! randomized solver stress sweep.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::assembly::{mass_matrix, StepContext};
use crate::column::{build_column, Layer, Material, MeshSpec, SoilColumn};
use crate::enthalpy::{Phase, PhaseSignature};
use crate::error::ModelError;
use crate::katzenelson::{self, SolveError, SolverConfig};
use crate::oracles::decp::{decp_run, plateau_width, DecpVariant};
use crate::oracles::neumann::{neumann_solve, NeumannError, NeumannParams, NeumannSolution};
use crate::scenario::{InitialCondition, Scenario, SurfaceBc};
use crate::state::State;
use crate::stepper::{run, RunError, Stepper, StepperConfig};

pub const DAY: f64 = 86400.0;

/// Tolerance under which a temperature counts as sitting on the 0 °C plateau.
pub const PLATEAU_TOL: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum StudyError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Run(#[from] RunError),
    #[error(transparent)]
    Neumann(#[from] NeumannError),
    #[error("scenario is not a constant-surface freezing problem on a homogeneous column: {0}")]
    NotNeumann(&'static str),
    #[error("worker pool: {0}")]
    Pool(String),
}

/// Freezing of a homogeneous column at `u₀ > 0` by a constant surface `s < 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeumannBenchmark {
    pub material: Material,
    /// m; chosen large enough that the zero-flux bottom does not feel the front.
    pub depth: f64,
    pub surface_temp: f64,
    pub initial_temp: f64,
    /// Simulated days; errors are sampled once per day.
    pub days: usize,
    /// Day at which profiles are reported.
    pub profile_day: usize,
    /// Age of the analytical solution at the start of the run, days. With 0
    /// the run starts from the uniform field and the step at the surface;
    /// otherwise it starts from the analytical field at that age.
    #[serde(default)]
    pub start_day: f64,
}

impl Default for NeumannBenchmark {
    fn default() -> Self {
        NeumannBenchmark {
            material: Material::PERMAFROST_BENCHMARK,
            depth: 5.0,
            surface_temp: -5.0,
            initial_temp: 2.0,
            days: 20,
            profile_day: 15,
            start_day: 0.0,
        }
    }
}

impl NeumannBenchmark {
    /// Recognizes a scenario as a benchmark instance.
    pub fn from_scenario(sc: &Scenario, material: Material) -> Result<Self, StudyError> {
        let surface_temp = match sc.surface {
            SurfaceBc::Constant { value } => value,
            _ => return Err(StudyError::NotNeumann("surface must be constant")),
        };
        let initial_temp = match sc.initial {
            InitialCondition::Uniform { temperature, .. } => temperature,
            _ => return Err(StudyError::NotNeumann("initial temperature must be uniform")),
        };
        let days = (sc.duration / DAY).round() as usize;
        Ok(NeumannBenchmark {
            material,
            depth: sc.column.depth(),
            surface_temp,
            initial_temp,
            days: days.max(1),
            profile_day: days.clamp(1, 15),
            start_day: 0.0,
        })
    }

    /// Analytical time at the start of the run, s.
    pub fn start_time(&self) -> f64 {
        self.start_day * DAY
    }

    pub fn solution(&self) -> Result<NeumannSolution, StudyError> {
        Ok(neumann_solve(NeumannParams::from_material(
            &self.material,
            self.surface_temp,
            self.initial_temp,
        ))?)
    }

    pub fn scenario(&self, elements: usize, dt: f64, theta: f64) -> Result<Scenario, StudyError> {
        let column = SoilColumn::homogeneous(self.material, self.depth, MeshSpec::Uniform { elements })?;
        let initial = if self.start_day > 0.0 {
            let eta = self.solution()?.control_volume_enthalpy(&column, self.start_time());
            let (temperatures, liquid_fractions) =
                State::from_enthalpy(&column, eta, self.surface_temp, 0.0)?.to_initial_data(&column);
            InitialCondition::Nodal {
                temperatures,
                liquid_fractions,
            }
        } else {
            InitialCondition::Uniform {
                temperature: self.initial_temp,
                liquid_fraction: 0.0,
            }
        };
        Ok(Scenario {
            column,
            surface: SurfaceBc::Constant {
                value: self.surface_temp,
            },
            initial,
            theta,
            dt,
            duration: self.days as f64 * DAY,
        })
    }
}

/// Largest error against the analytical solution over all nodes.
fn profile_error(sol: &NeumannSolution, nodes: &[f64], temps: &[f64], t: f64) -> (f64, f64) {
    let mut max = 0.0f64;
    let mut sum = 0.0;
    for (x, u) in nodes.iter().zip(temps) {
        let d = (u - sol.temperature(*x, t)).abs();
        max = max.max(d);
        sum += d;
    }
    (max, sum / nodes.len() as f64)
}

/// Runs a scenario, sub-stepping θ = 0 runs to the explicit stability limit,
/// and returns the temperatures at every output time.
pub fn sampled_temperatures(sc: &Scenario, config: &StepperConfig) -> Result<Vec<Vec<f64>>, StudyError> {
    let substeps = if sc.theta == 0.0 {
        let limit = Stepper::new(&sc.column, config.clone()).explicit_dt_limit();
        (sc.dt / limit).ceil().max(1.0) as usize
    } else {
        1
    };
    let fine = Scenario {
        dt: sc.dt / substeps as f64,
        duration: sc.steps() as f64 * sc.dt,
        ..sc.clone()
    };
    let traj = run(&fine, config)?;
    Ok(traj.states.iter().step_by(substeps).map(|s| s.gamma.clone()).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub theta: f64,
    pub kappa: usize,
    pub h_min: f64,
    pub dt: f64,
    /// Largest |numerical − analytical| over nodes and sampled days.
    pub max_error: f64,
    pub error_profile_day: f64,
    /// `(depth, numerical, analytical)` at the profile day.
    #[serde(skip)]
    pub profile: Vec<(f64, f64, f64)>,
}

/// One ladder rung per entry of `ladder`; the time step shrinks in proportion
/// to the element size, starting from `base_dt` on the first rung.
pub fn convergence_study(
    bench: &NeumannBenchmark,
    ladder: &[usize],
    base_dt: f64,
    thetas: &[f64],
    config: &StepperConfig,
    workers: usize,
) -> Result<Vec<ConvergenceRow>, StudyError> {
    let sol = bench.solution()?;
    let kappa0 = *ladder.first().unwrap_or(&1) as f64;
    let jobs: Vec<(f64, usize)> = thetas
        .iter()
        .flat_map(|&t| ladder.iter().map(move |&k| (t, k)))
        .collect();
    let mut rows = pool(workers)?.install(|| {
        jobs.par_iter()
            .map(|&(theta, kappa)| {
                let dt = base_dt * kappa0 / kappa as f64;
                let dt = DAY / (DAY / dt).round().max(1.0);
                let sc = bench.scenario(kappa, dt, theta)?;
                let per_day = (DAY / dt).round() as usize;
                let temps = sampled_temperatures(&sc, config)?;
                let mut max_error = 0.0f64;
                let mut error_profile_day = 0.0;
                let mut profile = Vec::new();
                for day in 1..=bench.days {
                    let t = bench.start_time() + day as f64 * DAY;
                    let row = &temps[day * per_day];
                    let (e, _) = profile_error(&sol, sc.column.nodes(), row, t);
                    max_error = max_error.max(e);
                    if day == bench.profile_day {
                        error_profile_day = e;
                        profile = sc
                            .column
                            .nodes()
                            .iter()
                            .zip(row)
                            .map(|(&x, &u)| (x, u, sol.temperature(x, t)))
                            .collect();
                    }
                }
                Ok(ConvergenceRow {
                    theta,
                    kappa,
                    h_min: sc.column.min_element_size(),
                    dt,
                    max_error,
                    error_profile_day,
                    profile,
                })
            })
            .collect::<Result<Vec<_>, StudyError>>()
    })?;
    rows.sort_by(|a, b| a.theta.total_cmp(&b.theta).then(a.kappa.cmp(&b.kappa)));
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProfileRow {
    pub depth: f64,
    pub analytical: f64,
    pub enthalpy: f64,
    pub decp_implicit: f64,
    pub decp_explicit: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompareReport {
    pub profile: Vec<ProfileRow>,
    /// Mean absolute error over nodes and days `1..=days`.
    pub mae_enthalpy: f64,
    pub mae_decp_implicit: f64,
    pub mae_decp_explicit: f64,
    /// Nodes with |u| < 1e−6 in the reported profile.
    pub plateau_enthalpy: usize,
    pub plateau_decp_implicit: usize,
    pub plateau_decp_explicit: usize,
    /// Mesh nodes within one element of the analytical interface.
    pub plateau_analytical: usize,
}

/// Enthalpy method versus both DECP variants at time step `dt` and `theta`.
pub fn compare_study(
    bench: &NeumannBenchmark,
    elements: usize,
    dt: f64,
    theta: f64,
    config: &StepperConfig,
) -> Result<CompareReport, StudyError> {
    let sol = bench.solution()?;
    let sc = bench.scenario(elements, dt, theta)?;
    let per_day = (DAY / dt).round().max(1.0) as usize;
    let nodes = sc.column.nodes();

    let enthalpy_run = sampled_temperatures(&sc, config)?;
    let implicit = decp_run(&sc, DecpVariant::Implicit { theta })?;
    let explicit = decp_run(&sc, DecpVariant::Explicit)?;
    let decp_implicit: Vec<&Vec<f64>> = implicit.states.iter().map(|s| &s.temperature).collect();
    let decp_explicit: Vec<&Vec<f64>> = explicit.states.iter().map(|s| &s.temperature).collect();

    let mae = |series: &dyn Fn(usize) -> Vec<f64>| {
        let total: f64 = (1..=bench.days)
            .map(|d| profile_error(&sol, nodes, &series(d * per_day), bench.start_time() + d as f64 * DAY).1)
            .sum();
        total / bench.days as f64
    };
    let at = bench.profile_day * per_day;
    let t = bench.start_time() + bench.profile_day as f64 * DAY;
    let front = sol.interface(t);
    let h = sc.column.min_element_size();
    let profile = nodes
        .iter()
        .enumerate()
        .map(|(i, &x)| ProfileRow {
            depth: x,
            analytical: sol.temperature(x, t),
            enthalpy: enthalpy_run[at][i],
            decp_implicit: decp_implicit[at][i],
            decp_explicit: decp_explicit[at][i],
        })
        .collect();
    Ok(CompareReport {
        profile,
        mae_enthalpy: mae(&|n| enthalpy_run[n].clone()),
        mae_decp_implicit: mae(&|n| decp_implicit[n].clone()),
        mae_decp_explicit: mae(&|n| decp_explicit[n].clone()),
        plateau_enthalpy: plateau_width(&enthalpy_run[at], PLATEAU_TOL),
        plateau_decp_implicit: plateau_width(decp_implicit[at], PLATEAU_TOL),
        plateau_decp_explicit: plateau_width(decp_explicit[at], PLATEAU_TOL),
        plateau_analytical: nodes[1..].iter().filter(|&&x| (x - front).abs() < h).count(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StressConfig {
    pub problems: usize,
    pub max_elements: usize,
    /// Random initial guesses per problem, each in a different polyhedron.
    pub guesses: usize,
    /// Mild seasonal forcing with daily steps instead of random single steps.
    pub mild: bool,
    /// Steps per problem in mild mode.
    pub steps: usize,
}

impl Default for StressConfig {
    fn default() -> Self {
        StressConfig {
            problems: 1000,
            max_elements: 32,
            guesses: 3,
            mild: false,
            steps: 30,
        }
    }
}

/// One implicit step drawn at random.
#[derive(Debug, Clone)]
pub struct StressProblem {
    pub column: SoilColumn,
    pub prev: State,
    pub dt: f64,
    pub theta: f64,
    pub surface_next: f64,
}

fn log_uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    (rng.gen_range(lo.ln()..hi.ln())).exp()
}

pub fn random_material(rng: &mut ChaCha8Rng) -> Material {
    Material {
        k_frozen: log_uniform(rng, 0.1, 5.0),
        k_mushy: log_uniform(rng, 0.1, 5.0),
        k_unfrozen: log_uniform(rng, 0.1, 5.0),
        c_frozen: log_uniform(rng, 5.0e5, 4.0e6),
        c_unfrozen: log_uniform(rng, 5.0e5, 4.0e6),
        latent_heat: log_uniform(rng, 1.0e6, 3.0e8),
    }
}

/// Stacked random layers (1 to 8) on a uniform or graded mesh.
pub fn random_column(rng: &mut ChaCha8Rng, max_elements: usize) -> SoilColumn {
    let layers: Vec<Layer> = (0..rng.gen_range(1..=8))
        .map(|_| Layer {
            thickness: log_uniform(rng, 0.05, 3.0),
            material: random_material(rng),
        })
        .collect();
    let elements = rng.gen_range(1..=max_elements.max(1));
    let mesh = if rng.gen_bool(0.5) {
        MeshSpec::Uniform { elements }
    } else {
        MeshSpec::Graded {
            elements,
            ratio: rng.gen_range(1.0..1.15),
        }
    };
    build_column(&layers, mesh).expect("random layers are valid")
}

/// Enthalpy strictly inside the polyhedron of `phase` at `node`.
pub fn random_enthalpy(rng: &mut ChaCha8Rng, column: &SoilColumn, node: usize, phase: Phase) -> f64 {
    let latent = column.latent_heat()[node];
    match phase {
        Phase::Frozen => -column.c_frozen()[node] * rng.gen_range(0.001..25.0),
        Phase::Mushy => latent * rng.gen_range(0.001..0.999),
        Phase::Unfrozen => latent + column.c_unfrozen()[node] * rng.gen_range(0.001..25.0),
    }
}

pub fn random_signature(rng: &mut ChaCha8Rng, kappa: usize) -> PhaseSignature {
    PhaseSignature((0..kappa).map(|_| Phase::from_sign(rng.gen_range(-1..=1))).collect())
}

pub fn random_point(rng: &mut ChaCha8Rng, column: &SoilColumn, z: &PhaseSignature) -> Vec<f64> {
    z.phases()
        .iter()
        .enumerate()
        .map(|(i, &p)| random_enthalpy(rng, column, i + 1, p))
        .collect()
}

pub fn random_problem(rng: &mut ChaCha8Rng, max_elements: usize) -> StressProblem {
    let column = random_column(rng, max_elements);
    let kappa = column.elements();
    let z = random_signature(rng, kappa);
    let eta = random_point(rng, &column, &z);
    let surface = rng.gen_range(-30.0..30.0);
    let prev = State::from_enthalpy(&column, eta, surface, 0.0).expect("lengths match");
    let theta = match rng.gen_range(0..3) {
        0 => 0.5,
        1 => 1.0,
        _ => rng.gen_range(0.05..=1.0),
    };
    StressProblem {
        column,
        prev,
        dt: log_uniform(rng, 600.0, 3.0e6),
        theta,
        surface_next: rng.gen_range(-30.0..30.0),
    }
}

/// Draws `count` initial guesses with pairwise different phase signatures
/// (as far as κ allows).
pub fn distinct_guesses(rng: &mut ChaCha8Rng, column: &SoilColumn, count: usize) -> Vec<Vec<f64>> {
    let kappa = column.elements();
    let available = 3usize.saturating_pow(kappa.min(20) as u32);
    let mut seen: Vec<PhaseSignature> = Vec::new();
    let mut out = Vec::new();
    while out.len() < count {
        let z = random_signature(rng, kappa);
        if seen.contains(&z) && seen.len() < available {
            continue;
        }
        out.push(random_point(rng, column, &z));
        seen.push(z);
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StressOutcome {
    pub problem: usize,
    pub kappa: usize,
    pub converged: bool,
    pub linear_solves: Vec<usize>,
    pub corner_events: usize,
    /// Largest distance between roots from different guesses, J/m³.
    pub root_spread: f64,
    pub collinearity_violations: usize,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StressReport {
    pub outcomes: Vec<StressOutcome>,
    /// Problems (or steps, in mild mode) per linear-solve count.
    pub histogram: BTreeMap<usize, usize>,
    pub failures: usize,
    pub corner_events: usize,
}

impl StressReport {
    pub fn histogram_mode(&self) -> Option<usize> {
        self.histogram
            .iter()
            .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0)))
            .map(|(k, _)| *k)
    }
}

/// Checks that each traced residual is a shrinking multiple of the first one.
/// Residuals following a corner perturbation start a new segment.
pub fn collinearity_violations(trace: &[katzenelson::TracePoint], tol: f64) -> usize {
    let mut violations = 0;
    let mut origin: Option<&[f64]> = None;
    let mut last_mu = 1.0;
    for point in trace {
        if point.perturbed || origin.is_none() {
            origin = Some(&point.residual);
            last_mu = 1.0;
            continue;
        }
        let r0 = origin.expect("set above");
        let n0 = katzenelson::norm(r0);
        if n0 == 0.0 {
            continue;
        }
        let mu = point.residual.iter().zip(r0).map(|(a, b)| a * b).sum::<f64>() / (n0 * n0);
        let off = point
            .residual
            .iter()
            .zip(r0)
            .map(|(a, b)| (a - mu * b).powi(2))
            .sum::<f64>()
            .sqrt();
        if off > tol * n0 || mu.is_nan() || mu >= last_mu || mu < -tol {
            violations += 1;
        }
        last_mu = mu;
    }
    violations
}

fn solve_problem(index: usize, problem: &StressProblem, guesses: &[Vec<f64>], solver: &SolverConfig) -> StressOutcome {
    let mass = mass_matrix(&problem.column);
    let mut outcome = StressOutcome {
        problem: index,
        kappa: problem.column.elements(),
        converged: true,
        linear_solves: Vec::new(),
        corner_events: 0,
        root_spread: 0.0,
        collinearity_violations: 0,
        error: None,
    };
    let ctx = match StepContext::new(
        &problem.column,
        &mass,
        &problem.prev,
        problem.dt,
        problem.theta,
        problem.surface_next,
    ) {
        Ok(c) => c,
        Err(e) => {
            outcome.converged = false;
            outcome.error = Some(e.to_string());
            return outcome;
        }
    };
    let config = SolverConfig {
        record_trace: true,
        ..solver.clone()
    };
    let mut roots: Vec<Vec<f64>> = Vec::new();
    for guess in guesses {
        match katzenelson::solve_phi(&ctx, guess, &config) {
            Ok(rep) => {
                outcome.linear_solves.push(rep.linear_solves);
                outcome.corner_events += rep.corner_perturbations;
                outcome.collinearity_violations += collinearity_violations(&rep.trace, 1e-8);
                roots.push(rep.root);
            }
            Err(e) => {
                outcome.converged = false;
                outcome.error = Some(match e {
                    SolveError::IterationCap { .. } => format!("iteration cap: {e}"),
                    other => other.to_string(),
                });
            }
        }
    }
    for a in &roots {
        for b in &roots {
            let d = a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
            outcome.root_spread = outcome.root_spread.max(d);
        }
    }
    outcome
}

fn mild_problem(
    index: usize,
    rng: &mut ChaCha8Rng,
    cfg: &StressConfig,
    stepper: &StepperConfig,
) -> (StressOutcome, Vec<usize>) {
    let column = random_column(rng, cfg.max_elements);
    let mean = rng.gen_range(-8.0..2.0);
    let amplitude = rng.gen_range(5.0..20.0);
    let start = rng.gen_range(-3.0..1.0);
    let sc = Scenario {
        column,
        surface: SurfaceBc::Sinusoid {
            mean,
            amplitude,
            period: 365.0 * DAY,
            phase: rng.gen_range(0.0..365.0) * DAY,
        },
        initial: InitialCondition::Uniform {
            temperature: start,
            liquid_fraction: 0.0,
        },
        theta: 0.5,
        dt: DAY,
        duration: cfg.steps as f64 * DAY,
    };
    let mut outcome = StressOutcome {
        problem: index,
        kappa: sc.column.elements(),
        converged: true,
        linear_solves: Vec::new(),
        corner_events: 0,
        root_spread: 0.0,
        collinearity_violations: 0,
        error: None,
    };
    match run(&sc, stepper) {
        Ok(traj) => {
            let solves: Vec<usize> = traj.stats.iter().map(|s| s.linear_solves).collect();
            outcome.corner_events = traj.corner_events();
            outcome.linear_solves = solves.clone();
            (outcome, solves)
        }
        Err(e) => {
            outcome.converged = false;
            outcome.error = Some(e.to_string());
            (outcome, Vec::new())
        }
    }
}

/// Randomized sweep. Problem `i` is drawn from its own generator seeded by
/// `(seed, i)`, so the report does not depend on the worker count.
pub fn stress_study(
    cfg: &StressConfig,
    stepper: &StepperConfig,
    seed: u64,
    workers: usize,
) -> Result<StressReport, StudyError> {
    let mut outcomes: Vec<(StressOutcome, Vec<usize>)> = pool(workers)?.install(|| {
        (0..cfg.problems)
            .into_par_iter()
            .map(|i| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(i as u64 + 1);
                if cfg.mild {
                    mild_problem(i, &mut rng, cfg, stepper)
                } else {
                    let problem = random_problem(&mut rng, cfg.max_elements);
                    let guesses = distinct_guesses(&mut rng, &problem.column, cfg.guesses);
                    let outcome = solve_problem(i, &problem, &guesses, &stepper.solver);
                    let counts = outcome.linear_solves.clone();
                    (outcome, counts)
                }
            })
            .collect()
    });
    outcomes.sort_by_key(|o| o.0.problem);
    let mut histogram = BTreeMap::new();
    for (_, counts) in &outcomes {
        for c in counts {
            *histogram.entry(*c).or_insert(0) += 1;
        }
    }
    let outcomes: Vec<StressOutcome> = outcomes.into_iter().map(|o| o.0).collect();
    Ok(StressReport {
        failures: outcomes.iter().filter(|o| !o.converged).count(),
        corner_events: outcomes.iter().map(|o| o.corner_events).sum(),
        histogram,
        outcomes,
    })
}

fn pool(workers: usize) -> Result<rayon::ThreadPool, StudyError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| StudyError::Pool(e.to_string()))
}
