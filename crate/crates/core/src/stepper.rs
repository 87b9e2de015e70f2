//! θ-scheme time integration of the fully discrete problem.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::assembly::{flux_q, mass_matrix, rhs_f, MassMatrix, StepContext};
use crate::column::SoilColumn;
use crate::enthalpy::{self, Phase, PhaseSignature};
use crate::error::ModelError;
use crate::katzenelson::{self, SolveError, SolverConfig};
use crate::scenario::Scenario;
use crate::state::{initial_state, State};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct StepStats {
    pub linear_solves: usize,
    pub fast_path_taken: bool,
    pub corner_events: usize,
}

/// What to do when an explicit step exceeds the stability limit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GuardPolicy {
    #[default]
    Fail,
    Warn,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepperConfig {
    pub solver: SolverConfig,
    /// Try the single-solve linear step when every temperature has one sign.
    pub fast_path: bool,
    /// Start the implicit solve from the explicit step instead of ηⁿ.
    pub predictor: bool,
    /// Fraction of the explicit stability limit that is accepted.
    pub explicit_safety: f64,
    pub guard: GuardPolicy,
}

impl Default for StepperConfig {
    fn default() -> Self {
        StepperConfig {
            solver: SolverConfig::default(),
            fast_path: true,
            predictor: false,
            explicit_safety: 1.0,
            guard: GuardPolicy::Fail,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StepError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error("explicit step dt = {dt} s exceeds the stability limit {limit} s")]
    Unstable { dt: f64, limit: f64 },
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("step {step} (t = {time} s) failed: {source}")]
pub struct RunError {
    pub step: usize,
    pub time: f64,
    #[source]
    pub source: StepError,
}

/// Time stepper bound to one soil column.
#[derive(Debug, Clone)]
pub struct Stepper<'a> {
    column: &'a SoilColumn,
    mass: MassMatrix,
    config: StepperConfig,
}

impl<'a> Stepper<'a> {
    pub fn new(column: &'a SoilColumn, config: StepperConfig) -> Self {
        Stepper {
            column,
            mass: mass_matrix(column),
            config,
        }
    }

    pub fn column(&self) -> &SoilColumn {
        self.column
    }

    pub fn mass(&self) -> &MassMatrix {
        &self.mass
    }

    pub fn config(&self) -> &StepperConfig {
        &self.config
    }

    /// Largest Δt for which forward Euler keeps every nodal update monotone:
    /// `min_i M_ii·c_min / (k_max,i/h_i + k_max,i+1/h_{i+1})`, scaled by the safety factor.
    pub fn explicit_dt_limit(&self) -> f64 {
        explicit_dt_limit(self.column, &self.mass) * self.config.explicit_safety
    }

    /// One θ-step, choosing the explicit update for θ = 0 and the linear
    /// fast path where it applies.
    pub fn step(&self, prev: &State, dt: f64, theta: f64, s_next: f64) -> Result<(State, StepStats), StepError> {
        if theta == 0.0 {
            return self.step_explicit(prev, dt, s_next);
        }
        if self.config.fast_path {
            if let Some(out) = self.step_fast_linear(prev, dt, theta, s_next)? {
                return Ok(out);
            }
        }
        self.step_implicit(prev, dt, theta, s_next)
    }

    pub fn step_implicit(
        &self,
        prev: &State,
        dt: f64,
        theta: f64,
        s_next: f64,
    ) -> Result<(State, StepStats), StepError> {
        let ctx = StepContext::new(self.column, &self.mass, prev, dt, theta, s_next)?;
        let guess = if self.config.predictor {
            self.explicit_enthalpy(prev, dt)?
        } else {
            prev.eta.clone()
        };
        let report = katzenelson::solve_phi(&ctx, &guess, &self.config.solver)?;
        let next = State::from_enthalpy(self.column, report.root, s_next, prev.time + dt)?;
        Ok((
            next,
            StepStats {
                linear_solves: report.linear_solves,
                fast_path_taken: false,
                corner_events: report.corner_perturbations,
            },
        ))
    }

    /// Forward Euler `η − Δt M⁻¹ F(γⁿ)`; no linear system is solved.
    pub fn step_explicit(&self, prev: &State, dt: f64, s_next: f64) -> Result<(State, StepStats), StepError> {
        let limit = self.explicit_dt_limit();
        if dt > limit {
            match self.config.guard {
                GuardPolicy::Fail => return Err(StepError::Unstable { dt, limit }),
                GuardPolicy::Warn => log::warn!("explicit step dt = {dt} s exceeds stability limit {limit} s"),
            }
        }
        let eta = self.explicit_enthalpy(prev, dt)?;
        let next = State::from_enthalpy(self.column, eta, s_next, prev.time + dt)?;
        Ok((next, StepStats::default()))
    }

    fn explicit_enthalpy(&self, prev: &State, dt: f64) -> Result<Vec<f64>, StepError> {
        let f = rhs_f(self.column, &prev.gamma)?;
        let inv_dt = 1.0 / dt;
        Ok(prev
            .eta
            .iter()
            .zip(&f)
            .zip(&self.mass.diag)
            .map(|((e, fi), m)| e - fi / (m * inv_dt))
            .collect())
    }

    /// Linear θ-step with single-phase coefficients, taken only when every
    /// temperature (boundary values included) is strictly of one sign. The
    /// result is rejected (`None`) if it leaves that phase.
    pub fn step_fast_linear(
        &self,
        prev: &State,
        dt: f64,
        theta: f64,
        s_next: f64,
    ) -> Result<Option<(State, StepStats)>, StepError> {
        let phase = match common_phase(prev.gamma.iter().copied().chain([s_next])) {
            Some(p) => p,
            None => return Ok(None),
        };
        let ctx = StepContext::new(self.column, &self.mass, prev, dt, theta, s_next)?;
        let z = PhaseSignature::uniform(phase, ctx.kappa());
        let r0 = ctx.phi(&prev.eta);
        let mut eta = ctx.jacobian(&z).solve(&r0).map_err(SolveError::from)?;
        for (x, e) in eta.iter_mut().zip(&prev.eta) {
            *x = e - *x;
        }
        let stays = eta
            .iter()
            .enumerate()
            .all(|(i, &e)| Phase::of_temperature(enthalpy::beta(self.column, e, i + 1)) == phase);
        if !stays {
            return Ok(None);
        }
        let threshold = katzenelson::norm(&r0) * self.config.solver.tol_rel + self.config.solver.tol_abs;
        if katzenelson::norm(&ctx.phi(&eta)) > threshold {
            return Ok(None);
        }
        let next = State::from_enthalpy(self.column, eta, s_next, prev.time + dt)?;
        Ok(Some((
            next,
            StepStats {
                linear_solves: 1,
                fast_path_taken: true,
                corner_events: 0,
            },
        )))
    }
}

fn common_phase(values: impl Iterator<Item = f64>) -> Option<Phase> {
    let mut common = None;
    for u in values {
        let p = Phase::of_temperature(u);
        if p == Phase::Mushy || common.is_some_and(|c| c != p) {
            return None;
        }
        common = Some(p);
    }
    common
}

pub fn explicit_dt_limit(column: &SoilColumn, mass: &MassMatrix) -> f64 {
    let kappa = column.elements();
    let k_max = |e: usize| column.k_frozen()[e].max(column.k_unfrozen()[e]);
    let c_min = |node: usize| column.c_frozen()[node].min(column.c_unfrozen()[node]);
    (0..kappa)
        .map(|i| {
            let node = i + 1;
            let mut stiffness = k_max(i) / column.element_size(i);
            let mut c = c_min(node);
            if node > 1 {
                c = c.min(c_min(node - 1));
            }
            if i + 1 < kappa {
                stiffness += k_max(i + 1) / column.element_size(i + 1);
                c = c.min(c_min(node + 1));
            }
            mass.diag[i] * c / stiffness
        })
        .fold(f64::INFINITY, f64::min)
}

/// Both sides of the discrete energy identity for one step:
/// `Σ M_ii (η_i^{n+1} − η_iⁿ)` and `−Δt [θ Q₁(γ^{n+1}) + (1 − θ) Q₁(γⁿ)]`.
pub fn energy_balance(
    column: &SoilColumn,
    mass: &MassMatrix,
    prev: &State,
    next: &State,
    dt: f64,
    theta: f64,
) -> (f64, f64) {
    let change = next.total_enthalpy(&mass.diag) - prev.total_enthalpy(&mass.diag);
    let flux = theta * flux_q(column, &next.gamma, 0) + (1.0 - theta) * flux_q(column, &prev.gamma, 0);
    (change, -dt * flux)
}

/// Scale against which an energy-balance defect is judged relative: the
/// largest single contribution to the sum.
pub fn energy_scale(column: &SoilColumn, mass: &MassMatrix, prev: &State, next: &State, dt: f64, theta: f64) -> f64 {
    let nodal = next
        .eta
        .iter()
        .zip(&prev.eta)
        .zip(&mass.diag)
        .map(|((a, b), m)| (m * a).abs().max((m * b).abs()))
        .fold(0.0, f64::max);
    let (_, flux) = energy_balance(column, mass, prev, next, dt, theta);
    nodal.max(flux.abs())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub states: Vec<State>,
    pub stats: Vec<StepStats>,
    /// Number of steps per linear-solve count.
    pub histogram: BTreeMap<usize, usize>,
}

impl Trajectory {
    pub fn mean_linear_solves(&self) -> f64 {
        if self.stats.is_empty() {
            return 0.0;
        }
        self.stats.iter().map(|s| s.linear_solves).sum::<usize>() as f64 / self.stats.len() as f64
    }

    pub fn corner_events(&self) -> usize {
        self.stats.iter().map(|s| s.corner_events).sum()
    }

    pub fn fast_path_steps(&self) -> usize {
        self.stats.iter().filter(|s| s.fast_path_taken).count()
    }

    pub fn last(&self) -> &State {
        self.states.last().expect("trajectory holds the initial state")
    }
}

pub fn histogram(stats: &[StepStats]) -> BTreeMap<usize, usize> {
    let mut out = BTreeMap::new();
    for s in stats {
        *out.entry(s.linear_solves).or_insert(0) += 1;
    }
    out
}

/// Integrates a scenario over `steps()` uniform steps.
pub fn run(scenario: &Scenario, config: &StepperConfig) -> Result<Trajectory, RunError> {
    let start = initial_state(scenario).map_err(|e| RunError {
        step: 0,
        time: 0.0,
        source: e.into(),
    })?;
    run_from(scenario, config, start)
}

/// As [`run`], starting from a given state instead of the scenario's initial data.
pub fn run_from(scenario: &Scenario, config: &StepperConfig, start: State) -> Result<Trajectory, RunError> {
    let stepper = Stepper::new(&scenario.column, config.clone());
    let n = scenario.steps();
    let mut states = Vec::with_capacity(n + 1);
    let mut stats = Vec::with_capacity(n);
    states.push(start);
    for step in 1..=n {
        let prev = states.last().expect("non-empty");
        let t_next = step as f64 * scenario.dt;
        let s_next = scenario.surface.value(t_next);
        let (mut next, st) = stepper
            .step(prev, scenario.dt, scenario.theta, s_next)
            .map_err(|source| RunError {
                step,
                time: t_next,
                source,
            })?;
        next.time = t_next;
        states.push(next);
        stats.push(st);
    }
    let histogram = histogram(&stats);
    Ok(Trajectory {
        states,
        stats,
        histogram,
    })
}
