use crate::column::SoilColumn;
use crate::enthalpy::{self, Phase, PhaseSignature};
use crate::error::ModelError;
use crate::scenario::Scenario;

/// Enthalpy and temperature coordinates at one time level.
///
/// `eta` holds the κ unknowns (nodes `1..=κ`); the surface enthalpy is not
/// determined by the boundary temperature and is never stored. `gamma` holds
/// all κ + 1 nodal temperatures with `gamma[0]` the boundary value.
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub eta: Vec<f64>,
    pub gamma: Vec<f64>,
    /// s
    pub time: f64,
}

impl State {
    /// Builds the state whose temperatures are `[surface; 𝓑(eta)]`.
    pub fn from_enthalpy(column: &SoilColumn, eta: Vec<f64>, surface: f64, time: f64) -> Result<State, ModelError> {
        let interior = enthalpy::big_b(column, &eta)?;
        let mut gamma = Vec::with_capacity(eta.len() + 1);
        gamma.push(surface);
        gamma.extend(interior);
        Ok(State { eta, gamma, time })
    }

    pub fn surface(&self) -> f64 {
        self.gamma[0]
    }

    pub fn phases(&self, column: &SoilColumn) -> PhaseSignature {
        enthalpy::classify(column, &self.eta)
    }

    /// Nodal temperatures and liquid fractions (surface entry: fraction 0),
    /// i.e. the data that `initial_state` consumes.
    pub fn to_initial_data(&self, column: &SoilColumn) -> (Vec<f64>, Vec<f64>) {
        let mut fractions = vec![0.0];
        fractions.extend(
            self.eta
                .iter()
                .enumerate()
                .map(|(i, &e)| enthalpy::liquid_fraction(column, e, i + 1)),
        );
        (self.gamma.clone(), fractions)
    }

    /// Mass-weighted total enthalpy `Σ M_ii η_i`, J/m².
    pub fn total_enthalpy(&self, mass: &[f64]) -> f64 {
        self.eta.iter().zip(mass).map(|(e, m)| e * m).sum()
    }

    /// Checks `gamma[1..] == 𝓑(eta)` exactly.
    pub fn is_consistent(&self, column: &SoilColumn) -> bool {
        self.eta.len() == column.elements()
            && self.gamma.len() == column.elements() + 1
            && self
                .eta
                .iter()
                .enumerate()
                .all(|(i, &e)| enthalpy::beta(column, e, i + 1) == self.gamma[i + 1])
    }
}

/// Inverts the constitutive relation on the initial temperature field.
pub fn initial_state(scenario: &Scenario) -> Result<State, ModelError> {
    scenario.validate()?;
    let column = &scenario.column;
    let (u0, fractions) = scenario.initial.sample(column)?;
    let eta = (1..=column.elements())
        .map(|node| enthalpy::enthalpy_of(column, u0[node], fractions[node], node))
        .collect();
    State::from_enthalpy(column, eta, scenario.surface.value(0.0), 0.0)
}

/// Label of each unknown, for reporting.
pub fn phase_labels(column: &SoilColumn, state: &State) -> Vec<Phase> {
    state.phases(column).0
}
