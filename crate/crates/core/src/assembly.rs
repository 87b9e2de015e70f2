//! Algebraic form of the fully discrete problem.
//!
//! With the lumped mass matrix `M`, the discrete heat flux `Q_j` per element and
//! the nodal balance `F_i = Q_i − Q_{i+1}` (`F_κ = Q_κ`), one θ-step reads
//!
//! ```text
//! Φ(x) = M (x − ηⁿ) / Δt + θ F([sⁿ⁺¹; 𝓑(x)]) + (1 − θ) F(γⁿ) = 0.
//! ```
//!
//! On every phase polyhedron `P_z` the map `x ↦ F([s; 𝓑(x)])` is affine,
//! `A(z)(x − b(z)) + c`, so `Φ` is piecewise affine with tridiagonal
//! Jacobians `J_z = M / Δt + θ A(z)`.

use crate::column::SoilColumn;
use crate::enthalpy::{self, Phase, PhaseSignature};
use crate::error::ModelError;
use crate::linalg::TridiagonalMatrix;
use crate::state::State;

/// Lumped (diagonal) mass matrix with the surface column removed, m.
#[derive(Debug, Clone, PartialEq)]
pub struct MassMatrix {
    pub diag: Vec<f64>,
}

impl MassMatrix {
    pub fn as_matrix(&self) -> TridiagonalMatrix {
        TridiagonalMatrix::from_diagonal(self.diag.clone())
    }
}

pub fn mass_matrix(column: &SoilColumn) -> MassMatrix {
    let h = column.element_sizes();
    let kappa = h.len();
    let diag = (0..kappa)
        .map(|i| {
            if i + 1 < kappa {
                0.5 * (h[i] + h[i + 1])
            } else {
                0.5 * h[i]
            }
        })
        .collect();
    MassMatrix { diag }
}

/// Discrete flux term of element `element` (spanning nodes `element` and
/// `element + 1`): `(k(γ_right)·γ_right − k(γ_left)·γ_left) / h`.
pub fn flux_q(column: &SoilColumn, gamma: &[f64], element: usize) -> f64 {
    let left = gamma[element];
    let right = gamma[element + 1];
    let k_left = enthalpy::conductivity(column, left, element);
    let k_right = enthalpy::conductivity(column, right, element);
    (k_right * right - k_left * left) / column.element_size(element)
}

pub fn fluxes(column: &SoilColumn, gamma: &[f64]) -> Vec<f64> {
    (0..column.elements()).map(|e| flux_q(column, gamma, e)).collect()
}

/// Nodal balance `F(γ)`; `gamma` has κ + 1 entries with the boundary first.
pub fn rhs_f(column: &SoilColumn, gamma: &[f64]) -> Result<Vec<f64>, ModelError> {
    let kappa = column.elements();
    if gamma.len() != kappa + 1 {
        return Err(ModelError::LengthMismatch {
            name: "gamma",
            got: gamma.len(),
            expected: kappa + 1,
        });
    }
    let q = fluxes(column, gamma);
    Ok(balance_from_fluxes(&q))
}

fn balance_from_fluxes(q: &[f64]) -> Vec<f64> {
    let kappa = q.len();
    (0..kappa)
        .map(|i| if i + 1 < kappa { q[i] - q[i + 1] } else { q[i] })
        .collect()
}

/// Phase selected by the sign of a temperature; `sgn(0) = 0`.
pub fn sign_phase(u: f64) -> Phase {
    Phase::of_temperature(u)
}

/// Affine representation `F([s; 𝓑(η)]) = A(η − b) + c` valid on `P_z`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffinePiece {
    pub a: TridiagonalMatrix,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
}

impl AffinePiece {
    pub fn eval(&self, eta: &[f64]) -> Vec<f64> {
        let shifted: Vec<f64> = eta.iter().zip(&self.b).map(|(e, b)| e - b).collect();
        self.a
            .mul_vec(&shifted)
            .into_iter()
            .zip(&self.c)
            .map(|(v, c)| v + c)
            .collect()
    }
}

/// `r_e^z = k_e(z) / h_e`
fn r(column: &SoilColumn, element: usize, phase: Phase) -> f64 {
    enthalpy::conductivity_of_phase(column, phase, element) / column.element_size(element)
}

/// `A(z)` alone; column `i` scales with the slope `g_i` of its own phase, so a
/// mushy node contributes an all-zero column.
pub fn affine_matrix(column: &SoilColumn, z: &PhaseSignature) -> TridiagonalMatrix {
    let kappa = column.elements();
    assert_eq!(z.len(), kappa, "signature length must equal κ");
    let mut m = TridiagonalMatrix::zeros(kappa);
    let (sub, diag, sup) = m.bands_mut();
    for (i, &phase) in z.phases().iter().enumerate() {
        let g = enthalpy::slope(column, phase, i + 1);
        if g == 0.0 {
            continue;
        }
        // unknown i is node i + 1: elements i (above) and i + 1 (below)
        let above = r(column, i, phase) * g;
        diag[i] = above;
        if i > 0 {
            sup[i - 1] = -above;
        }
        if i + 1 < kappa {
            let below = r(column, i + 1, phase) * g;
            diag[i] += below;
            sub[i] = -below;
        }
    }
    m
}

pub fn affine_piece(column: &SoilColumn, z: &PhaseSignature, surface: f64) -> AffinePiece {
    let kappa = column.elements();
    let b = z
        .phases()
        .iter()
        .enumerate()
        .map(|(i, &p)| enthalpy::offset(column, p, i + 1))
        .collect();
    let mut c = vec![0.0; kappa];
    // The boundary enters F_1 through Q_1 = (k γ_1 − k(s) s)/h_1, with a minus sign.
    c[0] = -r(column, 0, sign_phase(surface)) * surface;
    AffinePiece {
        a: affine_matrix(column, z),
        b,
        c,
    }
}

/// Everything needed to evaluate `Φ` and `J_z` for one time step.
#[derive(Debug, Clone)]
pub struct StepContext<'a> {
    pub column: &'a SoilColumn,
    pub mass: &'a MassMatrix,
    pub prev: &'a State,
    pub dt: f64,
    pub theta: f64,
    pub surface_next: f64,
    /// `(1 − θ) F(γⁿ)`, fixed over the step.
    explicit_term: Vec<f64>,
}

impl<'a> StepContext<'a> {
    pub fn new(
        column: &'a SoilColumn,
        mass: &'a MassMatrix,
        prev: &'a State,
        dt: f64,
        theta: f64,
        surface_next: f64,
    ) -> Result<Self, ModelError> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(ModelError::InvalidParameter {
                name: "dt",
                value: dt,
                reason: "must be positive",
            });
        }
        if !(0.0..=1.0).contains(&theta) {
            return Err(ModelError::InvalidParameter {
                name: "theta",
                value: theta,
                reason: "must lie in [0, 1]",
            });
        }
        if prev.eta.len() != column.elements() {
            return Err(ModelError::LengthMismatch {
                name: "prev.eta",
                got: prev.eta.len(),
                expected: column.elements(),
            });
        }
        let explicit_term = if theta < 1.0 {
            rhs_f(column, &prev.gamma)?
                .into_iter()
                .map(|f| (1.0 - theta) * f)
                .collect()
        } else {
            vec![0.0; column.elements()]
        };
        Ok(StepContext {
            column,
            mass,
            prev,
            dt,
            theta,
            surface_next,
            explicit_term,
        })
    }

    pub fn kappa(&self) -> usize {
        self.column.elements()
    }

    /// Residual `Φ(x)`.
    pub fn phi(&self, x: &[f64]) -> Vec<f64> {
        let mut out: Vec<f64> = x
            .iter()
            .zip(&self.prev.eta)
            .zip(&self.mass.diag)
            .zip(&self.explicit_term)
            .map(|(((xi, ei), m), ex)| m * (xi - ei) / self.dt + ex)
            .collect();
        if self.theta > 0.0 {
            let mut gamma = Vec::with_capacity(x.len() + 1);
            gamma.push(self.surface_next);
            gamma.extend(
                x.iter()
                    .enumerate()
                    .map(|(i, &e)| enthalpy::beta(self.column, e, i + 1)),
            );
            let f = balance_from_fluxes(&fluxes(self.column, &gamma));
            for (o, fi) in out.iter_mut().zip(f) {
                *o += self.theta * fi;
            }
        }
        out
    }

    /// `Φ` evaluated through the affine piece of `z` (valid on `P_z` only).
    pub fn phi_affine(&self, x: &[f64], z: &PhaseSignature) -> Vec<f64> {
        let piece = affine_piece(self.column, z, self.surface_next);
        let f = piece.eval(x);
        x.iter()
            .zip(&self.prev.eta)
            .zip(&self.mass.diag)
            .zip(&self.explicit_term)
            .zip(f)
            .map(|((((xi, ei), m), ex), fi)| m * (xi - ei) / self.dt + ex + self.theta * fi)
            .collect()
    }

    /// `J_z = M / Δt + θ A(z)`
    pub fn jacobian(&self, z: &PhaseSignature) -> TridiagonalMatrix {
        self.mass
            .as_matrix()
            .scaled_add(1.0 / self.dt, &affine_matrix(self.column, z), self.theta)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Sign;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn column_from_sizes(h: &[f64], k_f: f64, k_u: f64) -> SoilColumn {
        let mut nodes = vec![0.0];
        for s in h {
            nodes.push(nodes.last().unwrap() + s);
        }
        let n = h.len();
        SoilColumn::new(
            nodes,
            vec![k_f; n],
            vec![2.0; n],
            vec![k_u; n],
            vec![2.0e6; n + 1],
            vec![3.0e6; n + 1],
            vec![1.0e8; n + 1],
        )
        .unwrap()
    }

    fn random_column(rng: &mut ChaCha8Rng, kappa: usize) -> SoilColumn {
        let mut nodes = vec![0.0];
        for _ in 0..kappa {
            let h = 10f64.powf(rng.gen_range(-2.0..0.0));
            nodes.push(nodes.last().unwrap() + h);
        }
        let logu = |rng: &mut ChaCha8Rng, lo: f64, hi: f64| 10f64.powf(rng.gen_range(lo..hi));
        let k_f = (0..kappa).map(|_| logu(rng, -1.0, 0.7)).collect();
        let k_m = (0..kappa).map(|_| logu(rng, -1.0, 0.7)).collect();
        let k_u = (0..kappa).map(|_| logu(rng, -1.0, 0.7)).collect();
        let c_f = (0..=kappa).map(|_| logu(rng, 5.7, 6.6)).collect();
        let c_u = (0..=kappa).map(|_| logu(rng, 5.7, 6.6)).collect();
        let lat = (0..=kappa).map(|_| logu(rng, 6.0, 8.5)).collect();
        SoilColumn::new(nodes, k_f, k_m, k_u, c_f, c_u, lat).unwrap()
    }

    #[test]
    fn mass_matrix_cases() {
        let uniform = column_from_sizes(&[0.5, 0.5, 0.5], 1.0, 1.0);
        assert_eq!(mass_matrix(&uniform).diag, vec![0.5, 0.5, 0.25]);
        let graded = column_from_sizes(&[1.0, 2.0, 4.0], 1.0, 1.0);
        assert_eq!(mass_matrix(&graded).diag, vec![1.5, 3.0, 2.0]);
        let single = column_from_sizes(&[0.3], 1.0, 1.0);
        assert_eq!(mass_matrix(&single).diag, vec![0.15]);
    }

    #[test]
    fn flux_examples() {
        let col = column_from_sizes(&[1.0], 2.0, 3.0);
        assert_eq!(flux_q(&col, &[1.0, 1.0], 0), 0.0);
        assert_eq!(flux_q(&col, &[-1.0, 1.0], 0), 5.0);
    }

    /// Adaptive bisection quadrature of a piecewise-constant integrand.
    fn integrate_piecewise(f: &dyn Fn(f64) -> f64, a: f64, b: f64, depth: u32) -> f64 {
        let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
        if (fa == fm && fm == fb) || depth == 0 {
            return fm * (b - a);
        }
        let m = 0.5 * (a + b);
        integrate_piecewise(f, a, m, depth - 1) + integrate_piecewise(f, m, b, depth - 1)
    }

    #[test]
    fn flux_matches_integrated_average_conductivity() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let h = 0.7;
        let col = column_from_sizes(&[h], 2.5, 1.5);
        for _ in 0..200 {
            let left: f64 = rng.gen_range(-5.0..5.0);
            let right: f64 = rng.gen_range(-5.0..5.0);
            let u = |x: f64| left + (right - left) * x / h;
            let k_of_x = |x: f64| enthalpy::conductivity(&col, u(x), 0);
            let k_avg = integrate_piecewise(&k_of_x, 0.0, h, 60) / h;
            let via_average = (right - left) / h * k_avg;
            assert_relative_eq!(
                flux_q(&col, &[left, right], 0),
                via_average,
                max_relative = 1e-12,
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn rhs_examples() {
        let col = column_from_sizes(&[0.5, 0.5, 0.5], 2.0, 3.0);
        assert_eq!(rhs_f(&col, &[4.0; 4]).unwrap(), vec![0.0; 3]);
        // κ = 2 with Q = (5, 2): unit element sizes, k_u = 1, γ = (0, 5, 7)
        let col2 = SoilColumn::new(
            vec![0.0, 1.0, 2.0],
            vec![1.0; 2],
            vec![1.0; 2],
            vec![1.0; 2],
            vec![1.0; 3],
            vec![1.0; 3],
            vec![1.0; 3],
        )
        .unwrap();
        assert_eq!(fluxes(&col2, &[0.0, 5.0, 7.0]), vec![5.0, 2.0]);
        assert_eq!(rhs_f(&col2, &[0.0, 5.0, 7.0]).unwrap(), vec![3.0, 2.0]);
        assert!(rhs_f(&col2, &[0.0, 5.0]).is_err());
    }

    #[test]
    fn rhs_telescopes_to_surface_flux() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let col = random_column(&mut rng, 9);
        for _ in 0..50 {
            let gamma: Vec<f64> = (0..10).map(|_| rng.gen_range(-10.0..10.0)).collect();
            let total: f64 = rhs_f(&col, &gamma).unwrap().iter().sum();
            let q1 = flux_q(&col, &gamma, 0);
            assert!((total - q1).abs() <= 1e-12 * fluxes(&col, &gamma).iter().fold(1.0f64, |a, q| a.max(q.abs())));
        }
    }

    #[test]
    fn all_mushy_piece_is_zero() {
        let col = column_from_sizes(&[0.5, 0.5, 0.5], 2.0, 3.0);
        let z = PhaseSignature::uniform(Phase::Mushy, 3);
        let piece = affine_piece(&col, &z, 0.0);
        assert_eq!(piece.a, TridiagonalMatrix::zeros(3));
        assert_eq!(piece.b, vec![0.0; 3]);
        assert_eq!(piece.c, vec![0.0; 3]);
    }

    #[test]
    fn affine_piece_structure() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let col = random_column(&mut rng, 6);
        let z = PhaseSignature([1, 0, -1, -1, 1, 0].iter().map(|&s| Phase::from_sign(s)).collect());
        let piece = affine_piece(&col, &z, 3.0);
        for (i, p) in z.phases().iter().enumerate() {
            let expected_b = if *p == Phase::Unfrozen {
                col.latent_heat()[i + 1]
            } else {
                0.0
            };
            assert_eq!(piece.b[i], expected_b);
            let above = if i > 0 { piece.a.sup()[i - 1] } else { -1.0 };
            let below = if i + 1 < 6 { piece.a.sub()[i] } else { -1.0 };
            match p {
                Phase::Mushy => {
                    assert_eq!(piece.a.diag()[i], 0.0);
                    if i > 0 {
                        assert_eq!(above, 0.0);
                    }
                    if i + 1 < 6 {
                        assert_eq!(below, 0.0);
                    }
                }
                _ => {
                    assert!(above < 0.0 && below < 0.0);
                }
            }
        }
        assert_eq!(piece.c[1..], [0.0; 5]);
        assert_relative_eq!(piece.c[0], -col.k_unfrozen()[0] / col.element_size(0) * 3.0);
    }

    fn interior_point(rng: &mut ChaCha8Rng, col: &SoilColumn, z: &PhaseSignature) -> Vec<f64> {
        z.phases()
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let l = col.latent_heat()[i + 1];
                match p {
                    Phase::Frozen => -rng.gen_range(0.01..1.0) * 2.0e7,
                    Phase::Mushy => rng.gen_range(0.01..0.99) * l,
                    Phase::Unfrozen => l + rng.gen_range(0.01..1.0) * 2.0e7,
                }
            })
            .collect()
    }

    fn random_signature(rng: &mut ChaCha8Rng, kappa: usize) -> PhaseSignature {
        PhaseSignature((0..kappa).map(|_| Phase::from_sign(rng.gen_range(-1..=1))).collect())
    }

    #[test]
    fn affine_piece_reproduces_composed_balance() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..100 {
            let kappa = rng.gen_range(1..20);
            let col = random_column(&mut rng, kappa);
            let z = random_signature(&mut rng, kappa);
            let eta = interior_point(&mut rng, &col, &z);
            let s = if rng.gen_bool(0.1) {
                0.0
            } else {
                rng.gen_range(-20.0..20.0)
            };
            let piece = affine_piece(&col, &z, s);
            let mut gamma = vec![s];
            gamma.extend(enthalpy::big_b(&col, &eta).unwrap());
            let oracle = rhs_f(&col, &gamma).unwrap();
            let scale = oracle.iter().fold(f64::MIN_POSITIVE, |a, v| a.max(v.abs()));
            for (a, b) in piece.eval(&eta).iter().zip(&oracle) {
                assert!((a - b).abs() <= 1e-12 * scale, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn phi_continuous_across_faces() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..50 {
            let kappa = rng.gen_range(2..12);
            let col = random_column(&mut rng, kappa);
            let mass = mass_matrix(&col);
            let z = random_signature(&mut rng, kappa);
            let mut x = interior_point(&mut rng, &col, &z);
            // put node j on a face and evaluate both neighbouring pieces
            let j = rng.gen_range(0..kappa);
            let on_upper = rng.gen_bool(0.5);
            x[j] = if on_upper { col.latent_heat()[j + 1] } else { 0.0 };
            let prev = State::from_enthalpy(&col, interior_point(&mut rng, &col, &z), 1.0, 0.0).unwrap();
            let ctx = StepContext::new(&col, &mass, &prev, 3600.0, 0.5, -2.0).unwrap();
            let mut z_a = z.clone();
            let mut z_b = z.clone();
            z_a.0[j] = Phase::Mushy;
            z_b.0[j] = if on_upper { Phase::Unfrozen } else { Phase::Frozen };
            let pa = ctx.phi_affine(&x, &z_a);
            let pb = ctx.phi_affine(&x, &z_b);
            let direct = ctx.phi(&x);
            let scale = direct.iter().fold(1e-300f64, |a, v| a.max(v.abs()));
            for i in 0..kappa {
                assert!((pa[i] - pb[i]).abs() <= 1e-9 * scale);
                assert!((pa[i] - direct[i]).abs() <= 1e-9 * scale);
            }
        }
    }

    #[test]
    fn jacobian_special_cases() {
        let col = column_from_sizes(&[0.5, 0.5, 0.5], 2.0, 3.0);
        let mass = mass_matrix(&col);
        let prev = State::from_enthalpy(&col, vec![-1.0e6; 3], -1.0, 0.0).unwrap();
        let explicit = StepContext::new(&col, &mass, &prev, 100.0, 0.0, -1.0).unwrap();
        let frozen = PhaseSignature::uniform(Phase::Frozen, 3);
        let expected = TridiagonalMatrix::from_diagonal(mass.diag.iter().map(|m| m / 100.0).collect());
        assert_eq!(explicit.jacobian(&frozen), expected);
        let implicit = StepContext::new(&col, &mass, &prev, 100.0, 1.0, -1.0).unwrap();
        assert_eq!(implicit.jacobian(&PhaseSignature::uniform(Phase::Mushy, 3)), expected);
    }

    #[test]
    fn jacobian_pivots_positive_and_dominant() {
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        for _ in 0..100 {
            let kappa = rng.gen_range(1..40);
            let col = random_column(&mut rng, kappa);
            let mass = mass_matrix(&col);
            let prev = State::from_enthalpy(&col, vec![0.0; kappa], 0.0, 0.0).unwrap();
            let dt = 10f64.powf(rng.gen_range(1.0..7.0));
            let theta = rng.gen_range(0.0..=1.0);
            let ctx = StepContext::new(&col, &mass, &prev, dt, theta, 1.0).unwrap();
            let j = ctx.jacobian(&random_signature(&mut rng, kappa));
            assert!(j.pivot_signs().iter().all(|&s| s == Sign::Positive));
            assert!(j.is_column_dominant());
        }
    }

    #[test]
    fn steady_state_residual_vanishes() {
        let col = column_from_sizes(&[0.5, 0.5, 0.5], 2.0, 3.0);
        let mass = mass_matrix(&col);
        let eta = vec![1.0e8 + 3.0e6; 3];
        let prev = State::from_enthalpy(&col, eta.clone(), 1.0, 0.0).unwrap();
        let ctx = StepContext::new(&col, &mass, &prev, 86400.0, 0.5, 1.0).unwrap();
        assert!(ctx.phi(&eta).iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn explicit_root_is_forward_update() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let col = random_column(&mut rng, 8);
        let mass = mass_matrix(&col);
        let z = random_signature(&mut rng, 8);
        let prev = State::from_enthalpy(&col, interior_point(&mut rng, &col, &z), 4.0, 0.0).unwrap();
        let dt = 600.0;
        let ctx = StepContext::new(&col, &mass, &prev, dt, 0.0, -3.0).unwrap();
        // Φ is affine with matrix M/Δt; its root solves one diagonal system
        let j = ctx.jacobian(&z);
        let r0 = ctx.phi(&prev.eta);
        let step = j.solve(&r0).unwrap();
        let root: Vec<f64> = prev.eta.iter().zip(&step).map(|(e, s)| e - s).collect();
        let f = rhs_f(&col, &prev.gamma).unwrap();
        for i in 0..8 {
            let forward = prev.eta[i] - dt * f[i] / mass.diag[i];
            assert_relative_eq!(root[i], forward, max_relative = 1e-14, epsilon = 1e-6);
        }
    }
}
