//! From a problem to constants, a conjugated generator, a trajectory and an
//! energy report.

pub mod assembly;
pub mod conjugate;
pub mod constants;
pub mod energy;
pub mod evolve;
pub mod scan;
pub mod sweep;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::config::BoundaryConfig;
use crate::cutoffs::plateau;
use crate::grid::Grid;
use crate::linalg::CMat;

pub use assembly::{assemble_conjugated_generator, Assembly, ConjugatedPieces};
pub use conjugate::{conjugation_report, ConjugationReport};
pub use constants::{select_constants, ConstantsSelection, FixedConstants, LevelAudit};
pub use energy::{energy_report, EnergyReport};
pub use evolve::{evolve, Forcing, Scheme, Trajectory};
pub use scan::{positivity_scan, ScanReport, Witness};
pub use sweep::{sigma_sweep, SweepRow, SweepSettings};

/// Radii of the boundary layers on a given box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Layout {
    pub half_width: f64,
    /// Edge of the physical region.
    pub l1: f64,
    /// Coefficients vanish beyond this radius; Λ starts fading here.
    pub l2: f64,
}

impl Layout {
    pub fn new(boundary: &BoundaryConfig, half_width: f64) -> Self {
        Self { half_width, l1: boundary.inner * half_width, l2: boundary.outer * half_width }
    }

    /// 1 on the physical region, 0 beyond `l2`.
    pub fn coefficient_taper(&self, x: f64) -> f64 {
        plateau(x, self.l1, self.l2)
    }

    pub fn lambda_taper(&self) -> Option<(f64, f64)> {
        (self.l2 < self.half_width).then_some((self.l2, self.half_width))
    }

    /// Shape of the sponge coefficient, `1 - τ₁`.
    pub fn sponge_profile(&self, x: f64) -> f64 {
        1.0 - self.coefficient_taper(x)
    }

    pub fn physical(&self, x: f64) -> bool {
        x.abs() <= self.l1
    }
}

/// `F A F⁻¹` with `F_{ji} = e^{-iξ_j x_i}`.
pub fn to_spectral(grid: &Grid, a: &CMat) -> CMat {
    let n = grid.n();
    let inv_n = 1.0 / n as f64;
    let mut b = CMat::zeros(n, n);
    for i in 0..n {
        let row: Vec<C64> = (0..n).map(|k| a[(i, k)]).collect();
        for (l, z) in grid.kernel_fwd_conj(&row).into_iter().enumerate() {
            b[(i, l)] = z * inv_n;
        }
    }
    let mut out = CMat::zeros(n, n);
    for l in 0..n {
        let col: Vec<C64> = b.column(l).iter().copied().collect();
        for (j, z) in grid.kernel_fwd(&col).into_iter().enumerate() {
            out[(j, l)] = z;
        }
    }
    out
}

/// Inverse of [`to_spectral`].
pub fn from_spectral(grid: &Grid, a_hat: &CMat) -> CMat {
    let n = grid.n();
    let inv_n = 1.0 / n as f64;
    let mut c = CMat::zeros(n, n);
    for j in 0..n {
        let row: Vec<C64> = (0..n).map(|l| a_hat[(j, l)]).collect();
        for (i, z) in grid.kernel_inv_conj(&row).into_iter().enumerate() {
            c[(j, i)] = z;
        }
    }
    let mut out = CMat::zeros(n, n);
    for i in 0..n {
        let col: Vec<C64> = c.column(i).iter().copied().collect();
        for (k, z) in grid.kernel_inv(&col).into_iter().enumerate() {
            out[(k, i)] = z * inv_n;
        }
    }
    out
}

/// Symbol table of an operator given in spectral coordinates:
/// `σ(x_i, ξ_l) = e^{-ix_iξ_l} (F⁻¹ Â e_l)(x_i) · N`.
pub fn spectral_symbol(grid: &Grid, a_hat: &CMat) -> CMat {
    let n = grid.n();
    let (x, xi) = (grid.x_nodes(), grid.xi_nodes());
    let mut t = CMat::zeros(n, n);
    for l in 0..n {
        let col: Vec<C64> = a_hat.column(l).iter().copied().collect();
        for (i, z) in grid.kernel_inv(&col).into_iter().enumerate() {
            t[(i, l)] = z * C64::from_polar(1.0, -x[i] * xi[l]);
        }
    }
    t
}

/// `‖u‖_{L²}` from unnormalized spectral coordinates `ũ = F u`.
pub fn spectral_l2(grid: &Grid, v: &[C64]) -> f64 {
    (grid.dx() / grid.n() as f64 * v.iter().map(|z| z.norm_sqr()).sum::<f64>()).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::probes;
    use crate::quantizer::{extract_symbol, OperatorMatrix};

    #[test]
    fn spectral_roundtrip_and_symbol() {
        let g = Grid::new(3.0, 16, 1.0).unwrap();
        let a = probes(16, 16, 3);
        let ah = to_spectral(&g, &a);
        let back = from_spectral(&g, &ah);
        assert!(crate::linalg::fro(&(back - &a)) < 1e-12 * crate::linalg::fro(&a));
        let s1 = spectral_symbol(&g, &ah);
        let s2 = extract_symbol(&OperatorMatrix { entries: a, grid: g.clone(), label: String::new() }).table;
        assert!(crate::linalg::fro(&(s1 - s2)) < 1e-11);
    }

    #[test]
    fn layout_none_is_flat() {
        let l = Layout::new(&BoundaryConfig::none(), 5.0);
        assert_eq!(l.coefficient_taper(4.99), 1.0);
        assert!(l.lambda_taper().is_none());
        assert_eq!(l.sponge_profile(-3.0), 0.0);
    }
}
