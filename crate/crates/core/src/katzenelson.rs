//! Katzenelson root finder for the piecewise-affine step map `Φ`.
//!
//! Starting from `x₀`, the iteration follows the preimage of the straight
//! segment from `Φ(x₀)` to 0. Inside a polyhedron `P_z` the map is affine, so
//! the Newton direction `v = −J_z⁻¹ Φ(x)` traces that segment exactly until
//! the first face of the box is reached; there the Jacobian of the adjacent
//! polyhedron is taken and the trace continues. A full Newton step that stays
//! inside the current polyhedron lands on the exact root. When two faces are
//! hit at once (a corner) the iterate is pulled back half-way and perturbed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::assembly::StepContext;
use crate::column::SoilColumn;
use crate::enthalpy;
use crate::linalg::LinalgError;

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    /// Relative residual tolerance t_r; also the minimum admissible crossing fraction.
    pub tol_rel: f64,
    /// Absolute residual tolerance t_a, in residual units (W/m²).
    pub tol_abs: f64,
    /// Characteristic enthalpy s_x, J/m³.
    pub enthalpy_scale: f64,
    /// Cap on loop passes; `None` means 50·κ.
    pub max_iterations: Option<usize>,
    pub rng_seed: u64,
    /// Keep every residual vector of the iteration in the report.
    pub record_trace: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            tol_rel: 1e-12,
            tol_abs: 1e-6,
            enthalpy_scale: 1e6,
            max_iterations: None,
            rng_seed: 0,
            record_trace: false,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), SolveError> {
        let positive = |v: f64| v > 0.0 && v.is_finite();
        if !positive(self.tol_rel) || !positive(self.tol_abs) || !positive(self.enthalpy_scale) {
            return Err(SolveError::InvalidConfig(
                "tolerances and enthalpy scale must be positive",
            ));
        }
        if self.max_iterations == Some(0) {
            return Err(SolveError::InvalidConfig("iteration cap must be at least 1"));
        }
        Ok(())
    }

    pub fn iteration_cap(&self, kappa: usize) -> usize {
        self.max_iterations.unwrap_or(50 * kappa).max(1)
    }

    /// Magnitude of the random corner perturbation.
    pub fn perturbation(&self) -> f64 {
        self.enthalpy_scale * 1e-8
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolveError {
    #[error("iteration cap of {iterations} reached (best residual {best_residual:e})")]
    IterationCap {
        iterations: usize,
        best: Vec<f64>,
        best_residual: f64,
    },
    #[error("residual became non-finite after {iterations} iterations")]
    NonFinite { iterations: usize },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(&'static str),
}

/// Which face of a node's mushy interval a crossing reaches.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Face {
    /// η = 0
    Lower,
    /// η = L
    Upper,
}

/// Fraction `λ` of the Newton step at which unknown `unknown` reaches `face`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Crossing {
    pub fraction: f64,
    pub unknown: usize,
    pub face: Face,
}

/// Admissible face crossings along `x + λ v`, ascending in `λ`.
///
/// Candidates `λ ≤ t_r` are dropped, as are upper faces of nodes whose latent
/// heat is below `s_x · t_r`. Components with `v_i = 0` never cross.
pub fn crossing_fractions(x: &[f64], v: &[f64], column: &SoilColumn, config: &SolverConfig) -> Vec<Crossing> {
    let latent_floor = config.enthalpy_scale * config.tol_rel;
    let mut out = Vec::new();
    for (i, (&xi, &vi)) in x.iter().zip(v).enumerate() {
        if vi == 0.0 {
            continue;
        }
        let lower = -xi / vi;
        if lower > config.tol_rel {
            out.push(Crossing {
                fraction: lower,
                unknown: i,
                face: Face::Lower,
            });
        }
        let latent = column.latent_heat()[i + 1];
        if latent > latent_floor {
            let upper = (latent - xi) / vi;
            if upper > config.tol_rel {
                out.push(Crossing {
                    fraction: upper,
                    unknown: i,
                    face: Face::Upper,
                });
            }
        }
    }
    out.sort_by(|a, b| a.fraction.total_cmp(&b.fraction));
    out
}

/// One recorded iterate.
#[derive(Debug, Clone, PartialEq)]
pub struct TracePoint {
    pub residual: Vec<f64>,
    /// The iterate was produced by a corner perturbation.
    pub perturbed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub root: Vec<f64>,
    pub linear_solves: usize,
    pub corner_perturbations: usize,
    /// Euclidean norm of `Φ(root)`.
    pub residual_norm: f64,
    /// Euclidean norm of `Φ(x₀)`.
    pub initial_residual_norm: f64,
    /// Residual vectors from `x₀` on; empty unless `record_trace` is set.
    pub trace: Vec<TracePoint>,
}

impl SolveReport {
    /// Stopping threshold `‖Φ(x₀)‖·t_r + t_a` the root satisfies.
    pub fn threshold(&self, config: &SolverConfig) -> f64 {
        self.initial_residual_norm * config.tol_rel + config.tol_abs
    }
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Finds the root of `Φ` for the step described by `ctx`, starting at `initial`.
pub fn solve_phi(ctx: &StepContext<'_>, initial: &[f64], config: &SolverConfig) -> Result<SolveReport, SolveError> {
    config.validate()?;
    let column = ctx.column;
    let kappa = ctx.kappa();
    assert_eq!(initial.len(), kappa, "initial guess must have κ entries");

    let mut x = initial.to_vec();
    let mut r = ctx.phi(&x);
    let initial_residual_norm = norm(&r);
    let threshold = initial_residual_norm * config.tol_rel + config.tol_abs;
    let mut trace = Vec::new();
    let mut linear_solves = 0;
    let mut corner_perturbations = 0;

    // with θ = 0 every polyhedron shares the Jacobian M/Δt, so faces are irrelevant
    let piecewise = ctx.theta > 0.0;
    if piecewise && initial_residual_norm > threshold && move_off_faces(&mut x, column, config) {
        r = ctx.phi(&x);
    }
    if config.record_trace {
        trace.push(TracePoint {
            residual: r.clone(),
            perturbed: false,
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
    let mut jacobian = ctx.jacobian(&enthalpy::classify(column, &x));
    let cap = config.iteration_cap(kappa);
    let mut iterations = 0;
    let mut residual_norm = norm(&r);
    let mut best = (residual_norm, x.clone());

    while residual_norm > threshold {
        if iterations >= cap {
            return Err(SolveError::IterationCap {
                iterations,
                best: best.1,
                best_residual: best.0,
            });
        }
        iterations += 1;

        let mut v = jacobian.solve(&r)?;
        v.iter_mut().for_each(|vi| *vi = -*vi);
        linear_solves += 1;

        let crossings = if piecewise {
            crossing_fractions(&x, &v, column, config)
        } else {
            Vec::new()
        };
        let lambda1 = crossings.first().map_or(1.0, |c| c.fraction.min(1.0));
        let lambda2 = crossings.get(1).map_or(1.0, |c| c.fraction.min(1.0));

        let perturbed = if (lambda1 - lambda2).abs() > config.tol_rel || lambda1 > 1.0 - config.tol_rel {
            // Jacobian of the polyhedron the path enters after the first crossing
            let mid = 0.5 * (lambda1 + lambda2);
            let probe: Vec<f64> = x.iter().zip(&v).map(|(xi, vi)| xi + mid * vi).collect();
            jacobian = ctx.jacobian(&enthalpy::classify(column, &probe));
            for (xi, vi) in x.iter_mut().zip(&v) {
                *xi += lambda1 * vi;
            }
            if let Some(first) = crossings.first().filter(|c| c.fraction == lambda1) {
                x[first.unknown] = match first.face {
                    Face::Lower => 0.0,
                    Face::Upper => column.latent_heat()[first.unknown + 1],
                };
            }
            false
        } else {
            let jitter = config.perturbation();
            for (xi, vi) in x.iter_mut().zip(&v) {
                *xi += 0.5 * lambda1 * vi + rng.gen_range(-1.0..=1.0) * jitter;
            }
            corner_perturbations += 1;
            jacobian = ctx.jacobian(&enthalpy::classify(column, &x));
            true
        };

        r = ctx.phi(&x);
        residual_norm = norm(&r);
        if !residual_norm.is_finite() {
            return Err(SolveError::NonFinite { iterations });
        }
        if residual_norm < best.0 {
            best = (residual_norm, x.clone());
        }
        if config.record_trace {
            trace.push(TracePoint {
                residual: r.clone(),
                perturbed,
            });
        }
    }

    Ok(SolveReport {
        root: x,
        linear_solves,
        corner_perturbations,
        residual_norm,
        initial_residual_norm,
        trace,
    })
}

/// Shifts components lying exactly on a face into the mushy interior so the
/// start point has a well-defined polyhedron. Temperatures are unchanged.
fn move_off_faces(x: &mut [f64], column: &SoilColumn, config: &SolverConfig) -> bool {
    let mut moved = false;
    for (i, xi) in x.iter_mut().enumerate() {
        let latent = column.latent_heat()[i + 1];
        let shift = config.perturbation().min(0.5 * latent);
        if *xi == 0.0 {
            *xi = shift;
            moved = true;
        } else if *xi == latent {
            *xi = latent - shift;
            moved = true;
        }
    }
    moved
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::mass_matrix;
    use crate::column::{Material, MeshSpec};
    use crate::state::State;

    fn column(kappa: usize) -> SoilColumn {
        SoilColumn::homogeneous(
            Material::PERMAFROST_BENCHMARK,
            0.1 * kappa as f64,
            MeshSpec::Uniform { elements: kappa },
        )
        .unwrap()
    }

    #[test]
    fn crossing_candidates_single_node() {
        let col = SoilColumn::new(
            vec![0.0, 1.0],
            vec![1.0],
            vec![1.0],
            vec![1.0],
            vec![1.0; 2],
            vec![1.0; 2],
            vec![10.0; 2],
        )
        .unwrap();
        // raw fractions are −x/v = 0.5 and (L − x)/v = −4.5; only the first is admissible
        let c = crossing_fractions(&[1.0], &[-2.0], &col, &SolverConfig::default());
        assert_eq!(c.len(), 1);
        assert_eq!(c[0].fraction, 0.5);
        assert_eq!(c[0].face, Face::Lower);
        let up = crossing_fractions(&[1.0], &[2.0], &col, &SolverConfig::default());
        assert_eq!(up.len(), 1);
        assert_eq!(up[0].fraction, 4.5);
        assert_eq!(up[0].face, Face::Upper);
    }

    #[test]
    fn zero_direction_has_no_candidates() {
        let col = column(2);
        let c = crossing_fractions(&[5.0, -1.0], &[0.0, -3.0], &col, &SolverConfig::default());
        assert!(c.iter().all(|c| c.unknown == 1));
        assert!(c.is_empty());
    }

    #[test]
    fn deep_interior_direction_takes_full_step() {
        let col = column(2);
        let c = crossing_fractions(&[-1.0e6, -2.0e6], &[-1.0e5, -1.0e5], &col, &SolverConfig::default());
        assert!(c.is_empty() || c[0].fraction > 1.0);
    }

    #[test]
    fn tiny_latent_heat_skips_upper_faces() {
        let col = SoilColumn::new(
            vec![0.0, 1.0],
            vec![1.0],
            vec![1.0],
            vec![1.0],
            vec![1.0; 2],
            vec![1.0; 2],
            vec![1e-7; 2],
        )
        .unwrap();
        let c = crossing_fractions(&[-1.0], &[1.0], &col, &SolverConfig::default());
        assert_eq!(c.len(), 1);
        assert_eq!(c[0].face, Face::Lower);
    }

    #[test]
    fn steady_state_needs_no_solve() {
        let col = column(4);
        let mass = mass_matrix(&col);
        let eta = vec![-4.0e6; 4];
        let prev = State::from_enthalpy(&col, eta.clone(), -2.0, 0.0).unwrap();
        let ctx = StepContext::new(&col, &mass, &prev, 86400.0, 1.0, -2.0).unwrap();
        let rep = solve_phi(&ctx, &eta, &SolverConfig::default()).unwrap();
        assert_eq!(rep.linear_solves, 0);
        assert_eq!(rep.root, eta);
    }

    #[test]
    fn same_polyhedron_root_in_one_solve() {
        let col = column(5);
        let mass = mass_matrix(&col);
        let prev = State::from_enthalpy(&col, vec![-6.0e6; 5], -3.0, 0.0).unwrap();
        let ctx = StepContext::new(&col, &mass, &prev, 86400.0, 1.0, -4.0).unwrap();
        let rep = solve_phi(&ctx, &prev.eta, &SolverConfig::default()).unwrap();
        assert_eq!(rep.linear_solves, 1);
        assert_eq!(rep.corner_perturbations, 0);
        assert!(rep.residual_norm <= rep.threshold(&SolverConfig::default()));
    }

    #[test]
    fn one_face_crossing_takes_two_solves() {
        // κ = 2, frozen just below 0 °C, warm boundary: node 1 thaws into the
        // mushy band while node 2 stays frozen
        let col = column(2);
        let mass = mass_matrix(&col);
        let prev = State::from_enthalpy(&col, vec![-2.0e5, -4.0e6], -0.1, 0.0).unwrap();
        let ctx = StepContext::new(&col, &mass, &prev, 86400.0, 1.0, 5.0).unwrap();
        let config = SolverConfig {
            record_trace: true,
            ..SolverConfig::default()
        };
        let rep = solve_phi(&ctx, &prev.eta, &config).unwrap();
        assert_eq!(rep.linear_solves, 2);
        assert!(rep.root[0] > 0.0 && rep.root[0] < col.latent_heat()[1]);
        assert!(rep.root[1] < 0.0);
        assert!(rep.residual_norm <= rep.threshold(&config));

        // re-trace the first leg by hand: it must end on the face η₁ = 0
        let j0 = ctx.jacobian(&enthalpy::classify(&col, &prev.eta));
        let v: Vec<f64> = j0.solve(&ctx.phi(&prev.eta)).unwrap().iter().map(|x| -x).collect();
        let lambda = -prev.eta[0] / v[0];
        assert!(lambda > 0.0 && lambda < 1.0);
        let face_point: Vec<f64> = prev.eta.iter().zip(&v).map(|(e, d)| e + lambda * d).collect();
        assert!(face_point[0].abs() <= 1e-12 * 1e6);
        let r_face = ctx.phi(&face_point);
        let r0 = &rep.trace[0].residual;
        let mu = r_face[0] / r0[0];
        assert!((r_face[1] - mu * r0[1]).abs() <= 1e-8 * norm(r0));
        assert_eq!(rep.trace.len(), 3);
    }

    #[test]
    fn deterministic_for_fixed_seed() {
        let col = column(6);
        let mass = mass_matrix(&col);
        let prev =
            State::from_enthalpy(&col, vec![-1.0e5, 5.0e7, 1.0e8 + 1.0e5, -3.0e6, 0.0, 1.0e8], 3.0, 0.0).unwrap();
        let ctx = StepContext::new(&col, &mass, &prev, 5.0e5, 0.5, -8.0).unwrap();
        let a = solve_phi(&ctx, &prev.eta, &SolverConfig::default()).unwrap();
        let b = solve_phi(&ctx, &prev.eta, &SolverConfig::default()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn iteration_cap_reports_best() {
        let col = column(3);
        let mass = mass_matrix(&col);
        let prev = State::from_enthalpy(&col, vec![-2.0e5, 2.0e5, 1.0e8 + 2.0e5], 1.0, 0.0).unwrap();
        let ctx = StepContext::new(&col, &mass, &prev, 1.0e6, 1.0, -20.0).unwrap();
        let config = SolverConfig {
            max_iterations: Some(1),
            ..SolverConfig::default()
        };
        match solve_phi(&ctx, &prev.eta, &config) {
            Err(SolveError::IterationCap { iterations, best, .. }) => {
                assert_eq!(iterations, 1);
                assert_eq!(best.len(), 3);
            }
            other => panic!("expected cap failure, got {other:?}"),
        }
    }

    #[test]
    fn rejects_bad_config() {
        let bad = SolverConfig {
            tol_abs: 0.0,
            ..SolverConfig::default()
        };
        assert!(bad.validate().is_err());
    }
}
