//! Constitutive relation between enthalpy and temperature.

use crate::column::SoilColumn;
use crate::error::ModelError;

/// Phase of a node, ordered frozen < mushy < unfrozen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Phase {
    Frozen,
    Mushy,
    Unfrozen,
}

impl Phase {
    /// The label in {-1, 0, 1}.
    pub fn sign(self) -> i8 {
        match self {
            Phase::Frozen => -1,
            Phase::Mushy => 0,
            Phase::Unfrozen => 1,
        }
    }

    pub fn from_sign(sign: i8) -> Phase {
        match sign.signum() {
            -1 => Phase::Frozen,
            0 => Phase::Mushy,
            _ => Phase::Unfrozen,
        }
    }

    /// Phase suggested by a temperature sign; 0 °C maps to mushy.
    pub fn of_temperature(u: f64) -> Phase {
        if u < 0.0 {
            Phase::Frozen
        } else if u > 0.0 {
            Phase::Unfrozen
        } else {
            Phase::Mushy
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Phase::Frozen => "frozen",
            Phase::Mushy => "mushy",
            Phase::Unfrozen => "unfrozen",
        }
    }
}

/// Per-node phase labels of the unknowns (nodes `1..=κ`). Identifies the box
/// polyhedron of enthalpy space on which the discrete system is affine.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PhaseSignature(pub Vec<Phase>);

impl PhaseSignature {
    pub fn uniform(phase: Phase, len: usize) -> Self {
        PhaseSignature(vec![phase; len])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn phases(&self) -> &[Phase] {
        &self.0
    }

    pub fn signs(&self) -> Vec<i8> {
        self.0.iter().map(|p| p.sign()).collect()
    }
}

/// Mushy interval `[lower, upper]` of a node, J/m³.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseCut {
    pub lower: f64,
    pub upper: f64,
}

impl PhaseCut {
    pub fn at(column: &SoilColumn, node: usize) -> PhaseCut {
        PhaseCut {
            lower: 0.0,
            upper: column.latent_heat()[node],
        }
    }

    /// Closed-interval classification: both bounds belong to the mushy phase.
    pub fn classify(&self, e: f64) -> Phase {
        if e < self.lower {
            Phase::Frozen
        } else if e > self.upper {
            Phase::Unfrozen
        } else {
            Phase::Mushy
        }
    }
}

/// Temperature (°C) of enthalpy `e` (J/m³) at mesh node `node`.
pub fn beta(column: &SoilColumn, e: f64, node: usize) -> f64 {
    let latent = column.latent_heat()[node];
    if e <= 0.0 {
        e / column.c_frozen()[node]
    } else if e < latent {
        0.0
    } else {
        (e - latent) / column.c_unfrozen()[node]
    }
}

/// Vectorized `beta` over the unknowns; `eta[i]` belongs to node `i + 1`.
pub fn big_b(column: &SoilColumn, eta: &[f64]) -> Result<Vec<f64>, ModelError> {
    check_len(column, eta)?;
    Ok(eta.iter().enumerate().map(|(i, &e)| beta(column, e, i + 1)).collect())
}

/// Phase of enthalpy `e` at mesh node `node`.
pub fn phase_of(column: &SoilColumn, e: f64, node: usize) -> Phase {
    PhaseCut::at(column, node).classify(e)
}

/// Signature of the polyhedron containing `eta`.
pub fn classify(column: &SoilColumn, eta: &[f64]) -> PhaseSignature {
    PhaseSignature(
        eta.iter()
            .enumerate()
            .map(|(i, &e)| phase_of(column, e, i + 1))
            .collect(),
    )
}

/// Element conductivity switched on the sign of temperature `u`.
pub fn conductivity(column: &SoilColumn, u: f64, element: usize) -> f64 {
    conductivity_of_phase(column, Phase::of_temperature(u), element)
}

pub fn conductivity_of_phase(column: &SoilColumn, phase: Phase, element: usize) -> f64 {
    match phase {
        Phase::Frozen => column.k_frozen()[element],
        Phase::Mushy => column.k_mushy()[element],
        Phase::Unfrozen => column.k_unfrozen()[element],
    }
}

/// Slope of `beta` on the given phase at `node`: 1/c_f, 0 or 1/c_u.
pub fn slope(column: &SoilColumn, phase: Phase, node: usize) -> f64 {
    match phase {
        Phase::Frozen => 1.0 / column.c_frozen()[node],
        Phase::Mushy => 0.0,
        Phase::Unfrozen => 1.0 / column.c_unfrozen()[node],
    }
}

/// Enthalpy offset of the phase at `node`: `L` when unfrozen, else 0.
pub fn offset(column: &SoilColumn, phase: Phase, node: usize) -> f64 {
    match phase {
        Phase::Unfrozen => column.latent_heat()[node],
        _ => 0.0,
    }
}

/// Inverse of `beta`. At exactly 0 °C the preimage is `[0, L]`, so the liquid
/// fraction picks the point `liquid_fraction · L`.
pub fn enthalpy_of(column: &SoilColumn, u: f64, liquid_fraction: f64, node: usize) -> f64 {
    if u < 0.0 {
        column.c_frozen()[node] * u
    } else if u > 0.0 {
        column.latent_heat()[node] + column.c_unfrozen()[node] * u
    } else {
        liquid_fraction * column.latent_heat()[node]
    }
}

/// Liquid fraction implied by enthalpy `e`, clamped to `[0, 1]`.
pub fn liquid_fraction(column: &SoilColumn, e: f64, node: usize) -> f64 {
    (e / column.latent_heat()[node]).clamp(0.0, 1.0)
}

fn check_len(column: &SoilColumn, eta: &[f64]) -> Result<(), ModelError> {
    if eta.len() != column.elements() {
        return Err(ModelError::LengthMismatch {
            name: "eta",
            got: eta.len(),
            expected: column.elements(),
        });
    }
    Ok(())
}
