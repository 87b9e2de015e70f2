//! Boundary forcing, initial data and run parameters for one soil column.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::column::SoilColumn;
use crate::error::ModelError;

/// Surface temperature s(t), °C, with t in seconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SurfaceBc {
    Constant {
        value: f64,
    },
    /// `mean + amplitude · sin(2π (t − phase) / period)`
    Sinusoid {
        mean: f64,
        amplitude: f64,
        period: f64,
        #[serde(default)]
        phase: f64,
    },
    /// Linear interpolation between samples, held constant outside the range.
    Series {
        times: Vec<f64>,
        values: Vec<f64>,
    },
}

impl SurfaceBc {
    pub fn value(&self, t: f64) -> f64 {
        match self {
            SurfaceBc::Constant { value } => *value,
            SurfaceBc::Sinusoid {
                mean,
                amplitude,
                period,
                phase,
            } => mean + amplitude * (2.0 * PI * (t - phase) / period).sin(),
            SurfaceBc::Series { times, values } => {
                let idx = times.partition_point(|&s| s <= t);
                if idx == 0 {
                    values[0]
                } else if idx == times.len() {
                    values[times.len() - 1]
                } else {
                    let (t0, t1) = (times[idx - 1], times[idx]);
                    let w = (t - t0) / (t1 - t0);
                    values[idx - 1] + w * (values[idx] - values[idx - 1])
                }
            }
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        match self {
            SurfaceBc::Constant { value } if !value.is_finite() => {
                Err(ModelError::Scenario("surface value must be finite".into()))
            }
            SurfaceBc::Sinusoid { period, .. } if period.is_nan() || *period <= 0.0 => {
                Err(ModelError::Scenario("sinusoid period must be positive".into()))
            }
            SurfaceBc::Series { times, values } => {
                if times.is_empty() || times.len() != values.len() {
                    return Err(ModelError::Scenario(
                        "series needs matching, non-empty times and values".into(),
                    ));
                }
                if times.iter().any(|t| t.is_nan()) || times.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(ModelError::Scenario("series times must increase".into()));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

/// Initial temperature field u₀ plus liquid fraction for nodes at exactly 0 °C.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialCondition {
    Uniform {
        temperature: f64,
        #[serde(default)]
        liquid_fraction: f64,
    },
    /// Piecewise-linear profile through `(depths, temperatures)`.
    Profile {
        depths: Vec<f64>,
        temperatures: Vec<f64>,
        #[serde(default)]
        liquid_fraction: f64,
    },
    /// One value per mesh node, `κ + 1` entries each.
    Nodal {
        temperatures: Vec<f64>,
        liquid_fractions: Vec<f64>,
    },
}

impl InitialCondition {
    /// Nodal temperatures and liquid fractions on `column`.
    pub fn sample(&self, column: &SoilColumn) -> Result<(Vec<f64>, Vec<f64>), ModelError> {
        let n = column.nodes().len();
        match self {
            InitialCondition::Uniform {
                temperature,
                liquid_fraction,
            } => Ok((vec![*temperature; n], vec![*liquid_fraction; n])),
            InitialCondition::Profile {
                depths,
                temperatures,
                liquid_fraction,
            } => {
                let series = SurfaceBc::Series {
                    times: depths.clone(),
                    values: temperatures.clone(),
                };
                series.validate()?;
                let u = column.nodes().iter().map(|&x| series.value(x)).collect();
                Ok((u, vec![*liquid_fraction; n]))
            }
            InitialCondition::Nodal {
                temperatures,
                liquid_fractions,
            } => {
                if temperatures.len() != n || liquid_fractions.len() != n {
                    return Err(ModelError::LengthMismatch {
                        name: "initial nodal values",
                        got: temperatures.len().min(liquid_fractions.len()),
                        expected: n,
                    });
                }
                Ok((temperatures.clone(), liquid_fractions.clone()))
            }
        }
    }

    fn validate(&self) -> Result<(), ModelError> {
        let fractions: Vec<f64> = match self {
            InitialCondition::Uniform { liquid_fraction, .. } | InitialCondition::Profile { liquid_fraction, .. } => {
                vec![*liquid_fraction]
            }
            InitialCondition::Nodal { liquid_fractions, .. } => liquid_fractions.clone(),
        };
        if fractions.iter().any(|f| !(0.0..=1.0).contains(f)) {
            return Err(ModelError::Scenario("liquid fractions must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

/// The unit of work of a run: a column, its forcing and the time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub column: SoilColumn,
    pub surface: SurfaceBc,
    pub initial: InitialCondition,
    /// θ ∈ [0, 1]: 0 forward Euler, ½ Crank–Nicolson, 1 backward Euler.
    pub theta: f64,
    /// s
    pub dt: f64,
    /// s
    pub duration: f64,
}

impl Scenario {
    pub fn validate(&self) -> Result<(), ModelError> {
        if !(0.0..=1.0).contains(&self.theta) {
            return Err(ModelError::InvalidParameter {
                name: "theta",
                value: self.theta,
                reason: "must lie in [0, 1]",
            });
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(ModelError::InvalidParameter {
                name: "dt",
                value: self.dt,
                reason: "must be positive",
            });
        }
        if !(self.duration >= 0.0 && self.duration.is_finite()) {
            return Err(ModelError::InvalidParameter {
                name: "duration",
                value: self.duration,
                reason: "must be non-negative",
            });
        }
        self.surface.validate()?;
        self.initial.validate()?;
        self.initial.sample(&self.column)?;
        Ok(())
    }

    /// Number of uniform steps covering the duration.
    pub fn steps(&self) -> usize {
        (self.duration / self.dt + 1e-9).floor() as usize
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::column::{Material, MeshSpec};

    #[test]
    fn series_interpolates_and_clamps() {
        let s = SurfaceBc::Series {
            times: vec![0.0, 10.0, 20.0],
            values: vec![0.0, 10.0, -10.0],
        };
        assert_eq!(s.value(-5.0), 0.0);
        assert_eq!(s.value(5.0), 5.0);
        assert_eq!(s.value(15.0), 0.0);
        assert_eq!(s.value(30.0), -10.0);
    }

    #[test]
    fn sinusoid_quarter_period() {
        let s = SurfaceBc::Sinusoid {
            mean: -2.0,
            amplitude: 10.0,
            period: 4.0,
            phase: 0.0,
        };
        assert!((s.value(1.0) - 8.0).abs() < 1e-12);
    }

    #[test]
    fn validation() {
        let column =
            SoilColumn::homogeneous(Material::PERMAFROST_BENCHMARK, 1.0, MeshSpec::Uniform { elements: 4 }).unwrap();
        let mut sc = Scenario {
            column,
            surface: SurfaceBc::Constant { value: -1.0 },
            initial: InitialCondition::Uniform {
                temperature: 1.0,
                liquid_fraction: 0.0,
            },
            theta: 0.5,
            dt: 3600.0,
            duration: 86400.0,
        };
        assert!(sc.validate().is_ok());
        assert_eq!(sc.steps(), 24);
        sc.theta = 1.5;
        assert!(sc.validate().is_err());
        sc.theta = 1.0;
        sc.initial = InitialCondition::Uniform {
            temperature: 0.0,
            liquid_fraction: 1.2,
        };
        assert!(sc.validate().is_err());
        sc.initial = InitialCondition::Nodal {
            temperatures: vec![0.0; 3],
            liquid_fractions: vec![0.0; 3],
        };
        assert!(sc.validate().is_err());
    }
}
