//! Gevrey–Sobolev norms `‖⟨D⟩_h^m e^{ρ⟨D⟩_h^{1/θ}} u‖_{L²}`.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{PevoError, Result};
use crate::grid::{Grid, StateVector};

/// Largest admissible exponent `ρ⟨ξ⟩_h^{1/θ}` before `exp` nears overflow.
pub const EXPONENT_GUARD: f64 = 690.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GevreyNormSpec {
    pub m: f64,
    pub rho: f64,
    pub theta: f64,
    pub h: f64,
}

impl GevreyNormSpec {
    pub fn l2() -> Self {
        Self { m: 0.0, rho: 0.0, theta: 2.0, h: 1.0 }
    }

    pub fn check(&self, grid: &Grid) -> Result<()> {
        if !(self.theta > 1.0) {
            return Err(PevoError::InvalidConfig(format!("theta must exceed 1, got {}", self.theta)));
        }
        let e = self.rho * crate::grid::bracket_h(grid.xi_max(), self.h).powf(1.0 / self.theta);
        if e.abs() >= EXPONENT_GUARD {
            return Err(PevoError::WeightOverflow { exponent: e });
        }
        Ok(())
    }

    /// `⟨ξ⟩_h^m e^{ρ⟨ξ⟩_h^{1/θ}}`.
    pub fn weight(&self, xi: f64) -> f64 {
        let b = crate::grid::bracket_h(xi, self.h);
        b.powf(self.m) * (self.rho * b.powf(1.0 / self.theta)).exp()
    }

    pub fn weights(&self, grid: &Grid) -> Vec<f64> {
        grid.xi_nodes().iter().map(|&xi| self.weight(xi)).collect()
    }
}

/// Weighted norm via one multiplier pass and Parseval.
pub fn gs_norm(u: &StateVector, spec: &GevreyNormSpec) -> Result<f64> {
    spec.check(u.grid())?;
    gs_norm_unchecked(u.grid(), u.spectrum(), spec)
}

/// Same as [`gs_norm`] from a precomputed spectrum.
pub fn gs_norm_unchecked(grid: &Grid, spectrum: &[C64], spec: &GevreyNormSpec) -> Result<f64> {
    let s: f64 = spectrum
        .iter()
        .zip(grid.xi_nodes())
        .map(|(z, &xi)| (z * spec.weight(xi)).norm_sqr())
        .sum();
    Ok((s / (2.0 * grid.half_width())).sqrt())
}

/// Apply the weight (`direction = +1`) or its inverse (`-1`).
pub fn gs_weight_apply(u: &StateVector, spec: &GevreyNormSpec, direction: i32) -> Result<StateVector> {
    spec.check(u.grid())?;
    let e = if direction >= 0 { 1.0 } else { -1.0 };
    crate::quantizer::fourier_multiplier(|xi| C64::new(spec.weight(xi).powf(e), 0.0), u)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn examples() {
        let g = Grid::new(std::f64::consts::PI, 32, 1.0).unwrap();
        let u = StateVector::from_fn(&g, |x| C64::new(x.sin(), 0.2 * (2.0 * x).cos()));
        assert!((gs_norm(&u, &GevreyNormSpec::l2()).unwrap() - u.l2_norm()).abs() < 1e-12);
        let xi0 = 3.0;
        let mode = StateVector::from_fn(&g, |x| C64::from_polar(1.0, xi0 * x));
        let spec = GevreyNormSpec { m: 1.5, rho: 0.7, theta: 2.0, h: 1.0 };
        let want = spec.weight(xi0) * mode.l2_norm();
        assert!((gs_norm(&mode, &spec).unwrap() - want).abs() < 1e-11 * want);
        let w = gs_weight_apply(&u, &spec, 1).unwrap();
        assert!((w.l2_norm() - gs_norm(&u, &spec).unwrap()).abs() < 1e-12 * w.l2_norm());
        let back = gs_weight_apply(&w, &spec, -1).unwrap();
        for (a, b) in back.values().iter().zip(u.values()) {
            assert!((a - b).norm() < 1e-10);
        }
    }

    #[test]
    fn overflow_guard() {
        let g = Grid::new(1.0, 512, 1.0).unwrap();
        let spec = GevreyNormSpec { m: 0.0, rho: 100.0, theta: 1.1, h: 1.0 };
        assert!(matches!(spec.check(&g), Err(PevoError::WeightOverflow { .. })));
    }
}
