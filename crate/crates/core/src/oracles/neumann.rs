//! Classical two-phase solution for a semi-infinite column at `u₀ > 0`
//! frozen from the surface by a constant `s < 0`.

use std::f64::consts::PI;

use libm::{erf, erfc};
use thiserror::Error;

use crate::column::{Material, SoilColumn};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NeumannParams {
    /// s, °C (< 0)
    pub surface_temp: f64,
    /// u₀, °C (> 0)
    pub initial_temp: f64,
    pub k_frozen: f64,
    pub k_unfrozen: f64,
    pub c_frozen: f64,
    pub c_unfrozen: f64,
    pub latent: f64,
}

impl NeumannParams {
    pub fn from_material(material: &Material, surface_temp: f64, initial_temp: f64) -> Self {
        NeumannParams {
            surface_temp,
            initial_temp,
            k_frozen: material.k_frozen,
            k_unfrozen: material.k_unfrozen,
            c_frozen: material.c_frozen,
            c_unfrozen: material.c_unfrozen,
            latent: material.latent_heat,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NeumannError {
    #[error("need surface < 0 < initial temperature, got s = {surface}, u0 = {initial}")]
    Temperatures { surface: f64, initial: f64 },
    #[error("material constants must be positive and finite")]
    Material,
    #[error("could not bracket the interface constant")]
    Bracket,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NeumannSolution {
    pub lambda: f64,
    pub params: NeumannParams,
    pub alpha_f: f64,
    pub alpha_u: f64,
}

/// Mismatch of the interface heat balance at `λ`, divided by `L√α_f`:
/// `λ − [k_f(−s)e^{−λ²}/(erf λ √(πα_f)) − k_u u₀ e^{−λ²ν²}/(erfc(λν) √(πα_u))] / (L√α_f)`.
fn stefan_mismatch(p: &NeumannParams, lambda: f64) -> f64 {
    let alpha_f = p.k_frozen / p.c_frozen;
    let alpha_u = p.k_unfrozen / p.c_unfrozen;
    let nu = (alpha_f / alpha_u).sqrt();
    let frozen = p.k_frozen * -p.surface_temp * (-lambda * lambda).exp() / (erf(lambda) * (PI * alpha_f).sqrt());
    let unfrozen = p.k_unfrozen * p.initial_temp * (-lambda * lambda * nu * nu).exp()
        / (erfc(lambda * nu) * (PI * alpha_u).sqrt());
    lambda - (frozen - unfrozen) / (p.latent * alpha_f.sqrt())
}

pub fn neumann_solve(params: NeumannParams) -> Result<NeumannSolution, NeumannError> {
    let p = params;
    if !(p.surface_temp < 0.0 && p.initial_temp > 0.0) {
        return Err(NeumannError::Temperatures {
            surface: p.surface_temp,
            initial: p.initial_temp,
        });
    }
    let constants = [p.k_frozen, p.k_unfrozen, p.c_frozen, p.c_unfrozen, p.latent];
    if constants.iter().any(|v| !(*v > 0.0 && v.is_finite()))
        || !p.surface_temp.is_finite()
        || !p.initial_temp.is_finite()
    {
        return Err(NeumannError::Material);
    }
    let f = |l: f64| stefan_mismatch(&p, l);
    let mut lo = 1e-12;
    if f(lo) >= 0.0 {
        return Err(NeumannError::Bracket);
    }
    let mut hi = 1.0;
    while f(hi) <= 0.0 {
        hi *= 2.0;
        if hi > 64.0 {
            return Err(NeumannError::Bracket);
        }
    }
    // bisect down to adjacent floats
    loop {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi || hi - lo <= 1e-15 * hi {
            break;
        }
        if f(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let lambda = if f(hi).abs() < f(lo).abs() { hi } else { lo };
    Ok(NeumannSolution {
        lambda,
        params: p,
        alpha_f: p.k_frozen / p.c_frozen,
        alpha_u: p.k_unfrozen / p.c_unfrozen,
    })
}

pub fn neumann_profile(sol: &NeumannSolution, x: f64, t: f64) -> f64 {
    sol.temperature(x, t)
}

impl NeumannSolution {
    fn nu(&self) -> f64 {
        (self.alpha_f / self.alpha_u).sqrt()
    }

    /// Interface depth `X(t) = 2λ√(α_f t)`, m.
    pub fn interface(&self, t: f64) -> f64 {
        2.0 * self.lambda * (self.alpha_f * t).sqrt()
    }

    /// `dX/dt`, m/s.
    pub fn interface_speed(&self, t: f64) -> f64 {
        self.lambda * (self.alpha_f / t).sqrt()
    }

    /// Relative mismatch of the interface condition at the stored `λ`.
    pub fn residual(&self) -> f64 {
        stefan_mismatch(&self.params, self.lambda)
    }

    /// u(x, t), °C; t > 0.
    pub fn temperature(&self, x: f64, t: f64) -> f64 {
        let (s, u0) = (self.params.surface_temp, self.params.initial_temp);
        if x < self.interface(t) {
            s - s * erf(x / (2.0 * (self.alpha_f * t).sqrt())) / erf(self.lambda)
        } else {
            u0 - u0 * erfc(x / (2.0 * (self.alpha_u * t).sqrt())) / erfc(self.lambda * self.nu())
        }
    }

    /// Volumetric enthalpy of the analytical field, J/m³ (0 at the frozen state 0 °C).
    pub fn enthalpy(&self, x: f64, t: f64) -> f64 {
        let u = self.temperature(x, t);
        if x < self.interface(t) {
            self.params.c_frozen * u
        } else {
            self.params.latent + self.params.c_unfrozen * u
        }
    }

    /// Nodal enthalpies of the unknown nodes of `column` as averages of the
    /// analytical enthalpy over each node's lumped control volume.
    pub fn control_volume_enthalpy(&self, column: &SoilColumn, t: f64) -> Vec<f64> {
        const PANELS: usize = 256;
        let nodes = column.nodes();
        let kappa = column.elements();
        let front = self.interface(t);
        (1..=kappa)
            .map(|i| {
                let a = 0.5 * (nodes[i - 1] + nodes[i]);
                let b = if i < kappa {
                    0.5 * (nodes[i] + nodes[i + 1])
                } else {
                    nodes[kappa]
                };
                let mut cuts = vec![a];
                if front > a && front < b {
                    cuts.push(front);
                }
                cuts.push(b);
                let total: f64 = cuts
                    .windows(2)
                    .map(|w| {
                        let h = (w[1] - w[0]) / PANELS as f64;
                        (0..PANELS)
                            .map(|j| self.enthalpy(w[0] + (j as f64 + 0.5) * h, t))
                            .sum::<f64>()
                            * h
                    })
                    .sum();
                total / (b - a)
            })
            .collect()
    }

    /// ∂u/∂x from the frozen and unfrozen branch formulas at `x`.
    pub fn gradients(&self, x: f64, t: f64) -> (f64, f64) {
        let (s, u0) = (self.params.surface_temp, self.params.initial_temp);
        let zf = x / (2.0 * (self.alpha_f * t).sqrt());
        let zu = x / (2.0 * (self.alpha_u * t).sqrt());
        let frozen = -s * (-zf * zf).exp() / (erf(self.lambda) * (PI * self.alpha_f * t).sqrt());
        let unfrozen = u0 * (-zu * zu).exp() / (erfc(self.lambda * self.nu()) * (PI * self.alpha_u * t).sqrt());
        (frozen, unfrozen)
    }

    /// Latent heat released per unit time at the front and the net heat
    /// conducted away from it, W/m².
    pub fn interface_balance(&self, t: f64) -> (f64, f64) {
        let (gf, gu) = self.gradients(self.interface(t), t);
        (
            self.params.latent * self.interface_speed(t),
            self.params.k_frozen * gf - self.params.k_unfrozen * gu,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn benchmark() -> NeumannSolution {
        neumann_solve(NeumannParams::from_material(&Material::PERMAFROST_BENCHMARK, -5.0, 2.0)).unwrap()
    }

    #[test]
    fn root_satisfies_interface_equation() {
        let sol = benchmark();
        assert!(sol.lambda > 0.0);
        assert!(sol.residual().abs() <= 1e-10);
    }

    #[test]
    fn boundary_interface_and_far_field() {
        let sol = benchmark();
        let day = 86400.0;
        for d in [1.0, 7.0, 15.0, 20.0] {
            let t = d * day;
            assert_eq!(sol.temperature(0.0, t), -5.0);
            assert!(sol.temperature(sol.interface(t), t).abs() <= 1e-12);
            let below = sol.temperature(sol.interface(t) * (1.0 - 1e-9), t);
            assert!(below.abs() <= 1e-8);
            assert!((sol.temperature(50.0, t) - 2.0).abs() <= 1e-6);
        }
        assert!(sol.interface(2.0 * day) > sol.interface(day));
    }

    #[test]
    fn interface_heat_balance() {
        let sol = benchmark();
        for i in 1..=10 {
            let t = i as f64 * 2.0 * 86400.0;
            let (latent, conducted) = sol.interface_balance(t);
            assert!((latent - conducted).abs() <= 1e-8 * latent.abs());
        }
    }

    #[test]
    fn gradient_matches_finite_difference() {
        let sol = benchmark();
        let t = 10.0 * 86400.0;
        let x = 0.5 * sol.interface(t);
        let h = 1e-6;
        let fd = (sol.temperature(x + h, t) - sol.temperature(x - h, t)) / (2.0 * h);
        assert!((fd - sol.gradients(x, t).0).abs() <= 1e-6 * fd.abs());
    }

    #[test]
    fn control_volume_average_of_uniform_region() {
        let sol = benchmark();
        let col = SoilColumn::homogeneous(
            Material::PERMAFROST_BENCHMARK,
            40.0,
            crate::column::MeshSpec::Uniform { elements: 400 },
        )
        .unwrap();
        let t = 86400.0;
        let eta = sol.control_volume_enthalpy(&col, t);
        // far below the front the field is u₀ to within roundoff
        assert!((eta[399] - (1.0e8 + 3.0e6 * 2.0)).abs() < 1e-6 * eta[399]);
        // the first control volume [0.05, 0.15] straddles the front
        let front = sol.interface(t);
        assert!(front > 0.05 && front < 0.15);
        assert!(eta[0] > sol.enthalpy(0.05, t) && eta[0] < sol.enthalpy(0.15, t));
    }

    #[test]
    fn huge_latent_heat_freezes_interface() {
        let mut p = NeumannParams::from_material(&Material::PERMAFROST_BENCHMARK, -5.0, 2.0);
        p.latent = 1e14;
        let sol = neumann_solve(p).unwrap();
        assert!(sol.lambda < 1e-3);
        assert!(sol.interface(86400.0 * 20.0) < 1e-3);
    }

    #[test]
    fn rejects_wrong_signs() {
        let p = NeumannParams::from_material(&Material::PERMAFROST_BENCHMARK, 5.0, 2.0);
        assert!(matches!(neumann_solve(p), Err(NeumannError::Temperatures { .. })));
    }
}
