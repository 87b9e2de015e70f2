//! Decoupled energy-conservation baseline.
//!
//! Each step first diffuses temperature with a linear θ-scheme whose
//! capacities and conductivities are taken from the pre-step state and which
//! has no latent term. A per-node correction then moves the sensible-heat
//! change into the nodal enthalpy: energy that carries a node across 0 °C fills
//! or drains its latent pool, the temperature stays at 0 °C while the pool is
//! partially filled, and any excess becomes sensible heat again.

use crate::assembly::MassMatrix;
use crate::column::SoilColumn;
use crate::enthalpy;
use crate::error::ModelError;
use crate::linalg::TridiagonalMatrix;
use crate::scenario::Scenario;
use crate::state::{initial_state, State};
use crate::stepper::explicit_dt_limit;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DecpVariant {
    /// One linear θ-step per output step.
    Implicit { theta: f64 },
    /// Forward-Euler sub-steps within the explicit stability limit.
    Explicit,
}

/// Nodal temperatures and liquid fractions, surface node first.
#[derive(Debug, Clone, PartialEq)]
pub struct DecpState {
    pub temperature: Vec<f64>,
    pub liquid: Vec<f64>,
    pub time: f64,
}

impl DecpState {
    pub fn from_state(column: &SoilColumn, state: &State) -> DecpState {
        let (temperature, liquid) = state.to_initial_data(column);
        DecpState {
            temperature,
            liquid,
            time: state.time,
        }
    }

    /// Nodal enthalpies of the unknown nodes.
    pub fn enthalpy(&self, column: &SoilColumn) -> Vec<f64> {
        (1..self.temperature.len())
            .map(|n| enthalpy::enthalpy_of(column, self.temperature[n], self.liquid[n], n))
            .collect()
    }

    /// Lumped total of sensible and latent heat, J/m².
    pub fn energy(&self, column: &SoilColumn, mass: &MassMatrix) -> f64 {
        self.enthalpy(column).iter().zip(&mass.diag).map(|(e, m)| e * m).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecpStepReport {
    pub state: DecpState,
    /// Heat entering through the surface during the diffusion stage, J/m².
    pub boundary_energy: f64,
    /// Change of the lumped total energy over the whole step, J/m².
    pub energy_change: f64,
}

fn node_conductivity(column: &SoilColumn, element: usize, u: f64, f: f64) -> f64 {
    if u < 0.0 {
        column.k_frozen()[element]
    } else if u > 0.0 {
        column.k_unfrozen()[element]
    } else {
        (1.0 - f) * column.k_frozen()[element] + f * column.k_unfrozen()[element]
    }
}

fn node_capacity(column: &SoilColumn, node: usize, u: f64, f: f64) -> f64 {
    if u < 0.0 {
        column.c_frozen()[node]
    } else if u > 0.0 {
        column.c_unfrozen()[node]
    } else {
        (1.0 - f) * column.c_frozen()[node] + f * column.c_unfrozen()[node]
    }
}

/// One diffusion stage plus phase correction.
pub fn decp_step(
    column: &SoilColumn,
    mass: &MassMatrix,
    prev: &DecpState,
    dt: f64,
    theta: f64,
    s_next: f64,
) -> Result<DecpStepReport, ModelError> {
    if !(0.0..=1.0).contains(&theta) {
        return Err(ModelError::InvalidParameter {
            name: "theta",
            value: theta,
            reason: "must lie in [0, 1]",
        });
    }
    let kappa = column.elements();
    let u = &prev.temperature;
    let f = &prev.liquid;
    // element weights K_e / h_e from the pre-step state
    let w: Vec<f64> = (0..kappa)
        .map(|e| {
            let k = 0.5 * (node_conductivity(column, e, u[e], f[e]) + node_conductivity(column, e, u[e + 1], f[e + 1]));
            k / column.element_size(e)
        })
        .collect();
    let cap: Vec<f64> = (1..=kappa).map(|n| node_capacity(column, n, u[n], f[n])).collect();
    let q = |temps: &[f64], e: usize| w[e] * (temps[e + 1] - temps[e]);
    let balance_old: Vec<f64> = (0..kappa)
        .map(|j| if j + 1 < kappa { q(u, j) - q(u, j + 1) } else { q(u, j) })
        .collect();

    let mut sub = vec![0.0; kappa.saturating_sub(1)];
    let mut diag = vec![0.0; kappa];
    let mut sup = vec![0.0; kappa.saturating_sub(1)];
    let mut rhs = vec![0.0; kappa];
    for j in 0..kappa {
        let inertia = cap[j] * mass.diag[j] / dt;
        diag[j] = inertia + theta * (w[j] + if j + 1 < kappa { w[j + 1] } else { 0.0 });
        if j + 1 < kappa {
            sup[j] = -theta * w[j + 1];
            sub[j] = -theta * w[j + 1];
        }
        rhs[j] = inertia * u[j + 1] - (1.0 - theta) * balance_old[j];
    }
    rhs[0] += theta * w[0] * s_next;
    let star = TridiagonalMatrix::new(sub, diag, sup)
        .and_then(|m| m.solve(&rhs))
        .map_err(|e| ModelError::Scenario(format!("diffusion stage failed: {e}")))?;

    let q1_new = w[0] * (star[0] - s_next);
    let boundary_energy = -dt * (theta * q1_new + (1.0 - theta) * q(u, 0));

    let old_energy = prev.enthalpy(column);
    let mut temperature = Vec::with_capacity(kappa + 1);
    let mut liquid = Vec::with_capacity(kappa + 1);
    temperature.push(s_next);
    liquid.push(0.0);
    let mut energy_change = 0.0;
    for j in 0..kappa {
        let node = j + 1;
        let delta = cap[j] * (star[j] - u[node]);
        let e = old_energy[j] + delta;
        temperature.push(enthalpy::beta(column, e, node));
        liquid.push(enthalpy::liquid_fraction(column, e, node));
        energy_change += mass.diag[j] * delta;
    }
    Ok(DecpStepReport {
        state: DecpState {
            temperature,
            liquid,
            time: prev.time + dt,
        },
        boundary_energy,
        energy_change,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecpTrajectory {
    /// States at the scenario's output times.
    pub states: Vec<DecpState>,
    /// `(energy_change, boundary_energy)` for every diffusion stage taken.
    pub audits: Vec<(f64, f64)>,
}

pub fn decp_run(scenario: &Scenario, variant: DecpVariant) -> Result<DecpTrajectory, ModelError> {
    let column = &scenario.column;
    let mass = crate::assembly::mass_matrix(column);
    let start = DecpState::from_state(column, &initial_state(scenario)?);
    let (theta, substeps) = match variant {
        DecpVariant::Implicit { theta } => (theta, 1),
        DecpVariant::Explicit => (
            0.0,
            (scenario.dt / explicit_dt_limit(column, &mass)).ceil().max(1.0) as usize,
        ),
    };
    let h = scenario.dt / substeps as f64;
    let mut states = vec![start];
    let mut audits = Vec::new();
    for step in 1..=scenario.steps() {
        let mut current = states.last().expect("non-empty").clone();
        let t0 = (step - 1) as f64 * scenario.dt;
        for k in 1..=substeps {
            let t = t0 + k as f64 * h;
            let report = decp_step(column, &mass, &current, h, theta, scenario.surface.value(t))?;
            audits.push((report.energy_change, report.boundary_energy));
            current = report.state;
            current.time = t;
        }
        current.time = step as f64 * scenario.dt;
        states.push(current);
    }
    Ok(DecpTrajectory { states, audits })
}

/// Count of unknown nodes whose temperature is within `tol` of 0 °C.
pub fn plateau_width(temperature: &[f64], tol: f64) -> usize {
    temperature[1..].iter().filter(|u| u.abs() < tol).count()
}
