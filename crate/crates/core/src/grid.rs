//! Periodic lattice on [-L, L) with the centered frequency lattice and the
//! transform conventions every other module relies on.
//!
//! Forward: `û_j = Δx Σ_i e^{-i ξ_j x_i} u_i`, inverse: `u_i = (2L)^{-1} Σ_j e^{i ξ_j x_i} û_j`.
//! Both are computed with one FFT after a checkerboard sign flip.

use std::fmt;
use std::sync::{Arc, OnceLock};

use num_complex::Complex64 as C64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{PevoError, Result};

/// `⟨ξ⟩_h = (h² + ξ²)^{1/2}`.
#[inline]
pub fn bracket_h(xi: f64, h: f64) -> f64 {
    h.hypot(xi)
}

/// `⟨x⟩ = (1 + x²)^{1/2}`.
#[inline]
pub fn bracket(x: f64) -> f64 {
    1f64.hypot(x)
}

#[derive(Clone)]
struct Plans {
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

/// Immutable spatial/frequency lattice.
#[derive(Clone)]
pub struct Grid {
    half_width: f64,
    n: usize,
    h: f64,
    x: Vec<f64>,
    xi: Vec<f64>,
    plans: Plans,
}

impl fmt::Debug for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid")
            .field("L", &self.half_width)
            .field("N", &self.n)
            .field("h", &self.h)
            .finish()
    }
}

impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n && self.half_width == other.half_width && self.h == other.h
    }
}

/// Serializable summary of a grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    #[serde(rename = "L")]
    pub half_width: f64,
    #[serde(rename = "N")]
    pub n: usize,
    pub h: f64,
}

impl Grid {
    /// Build the lattice. `n` must be a power of two ≥ 8 and `h ≥ 1`.
    pub fn new(half_width: f64, n: usize, h: f64) -> Result<Self> {
        if !(half_width > 0.0 && half_width.is_finite()) {
            return Err(PevoError::InvalidGrid(format!("L must be positive, got {half_width}")));
        }
        if n < 8 || !n.is_power_of_two() {
            return Err(PevoError::InvalidGrid(format!("N must be a power of two >= 8, got {n}")));
        }
        if !(h >= 1.0 && h.is_finite()) {
            return Err(PevoError::InvalidGrid(format!("h must be >= 1, got {h}")));
        }
        let dx = 2.0 * half_width / n as f64;
        let dxi = std::f64::consts::PI / half_width;
        let x = (0..n).map(|i| -half_width + dx * i as f64).collect();
        let xi = (0..n).map(|j| dxi * (j as f64 - (n / 2) as f64)).collect();
        let mut planner = FftPlanner::new();
        let plans = Plans { fwd: planner.plan_fft_forward(n), inv: planner.plan_fft_inverse(n) };
        Ok(Self { half_width, n, h, x, xi, plans })
    }

    pub fn from_spec(spec: GridSpec) -> Result<Self> {
        Self::new(spec.half_width, spec.n, spec.h)
    }

    pub fn spec(&self) -> GridSpec {
        GridSpec { half_width: self.half_width, n: self.n, h: self.h }
    }

    /// Same lattice with a different bracket parameter.
    pub fn with_h(&self, h: f64) -> Result<Self> {
        Self::new(self.half_width, self.n, h)
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }
    pub fn n(&self) -> usize {
        self.n
    }
    pub fn h(&self) -> f64 {
        self.h
    }
    pub fn x_nodes(&self) -> &[f64] {
        &self.x
    }
    pub fn xi_nodes(&self) -> &[f64] {
        &self.xi
    }
    pub fn dx(&self) -> f64 {
        2.0 * self.half_width / self.n as f64
    }
    pub fn dxi(&self) -> f64 {
        std::f64::consts::PI / self.half_width
    }
    /// Largest representable |ξ| (the Nyquist node ξ_0 = -ξ_max).
    pub fn xi_max(&self) -> f64 {
        self.dxi() * (self.n / 2) as f64
    }
    pub fn bracket(&self, xi: f64) -> f64 {
        bracket_h(xi, self.h)
    }

    /// `Σ_i e^{-i ξ_j x_i} v_i` for every j.
    pub fn kernel_fwd(&self, v: &[C64]) -> Vec<C64> {
        let mut buf: Vec<C64> =
            v.iter().enumerate().map(|(i, &z)| if i % 2 == 0 { z } else { -z }).collect();
        self.plans.fwd.process(&mut buf);
        for (j, z) in buf.iter_mut().enumerate() {
            if j % 2 == 1 {
                *z = -*z;
            }
        }
        buf
    }

    /// `Σ_j e^{i ξ_j x_i} w_j` for every i.
    pub fn kernel_inv(&self, w: &[C64]) -> Vec<C64> {
        let mut buf: Vec<C64> =
            w.iter().enumerate().map(|(j, &z)| if j % 2 == 0 { z } else { -z }).collect();
        self.plans.inv.process(&mut buf);
        for (i, z) in buf.iter_mut().enumerate() {
            if i % 2 == 1 {
                *z = -*z;
            }
        }
        buf
    }

    /// `Σ_i e^{+i ξ_j x_i} v_i` for every j.
    pub fn kernel_fwd_conj(&self, v: &[C64]) -> Vec<C64> {
        let c: Vec<C64> = v.iter().map(|z| z.conj()).collect();
        self.kernel_fwd(&c).into_iter().map(|z| z.conj()).collect()
    }

    /// `Σ_j e^{-i ξ_j x_i} w_j` for every i.
    pub fn kernel_inv_conj(&self, w: &[C64]) -> Vec<C64> {
        let c: Vec<C64> = w.iter().map(|z| z.conj()).collect();
        self.kernel_inv(&c).into_iter().map(|z| z.conj()).collect()
    }

    /// Forward transform `û_j = Δx Σ_i e^{-iξ_j x_i} u_i`.
    pub fn forward(&self, u: &[C64]) -> Vec<C64> {
        let dx = self.dx();
        self.kernel_fwd(u).into_iter().map(|z| z * dx).collect()
    }

    /// Inverse transform `u_i = (2L)^{-1} Σ_j e^{iξ_j x_i} û_j`.
    pub fn inverse(&self, spec: &[C64]) -> Vec<C64> {
        let s = 1.0 / (2.0 * self.half_width);
        self.kernel_inv(spec).into_iter().map(|z| z * s).collect()
    }

    /// Apply a Fourier multiplier given by its values on the ξ lattice.
    pub fn apply_multiplier(&self, m: &[C64], u: &[C64]) -> Vec<C64> {
        let mut s = self.forward(u);
        for (z, &w) in s.iter_mut().zip(m) {
            *z *= w;
        }
        self.inverse(&s)
    }

    /// Discrete L² norm `(Δx Σ|u_i|²)^{1/2}`.
    pub fn l2_norm(&self, u: &[C64]) -> f64 {
        (self.dx() * u.iter().map(|z| z.norm_sqr()).sum::<f64>()).sqrt()
    }

    /// L² norm computed from spectral coefficients, `(Σ|û_j|²/(2L))^{1/2}`.
    pub fn l2_norm_spectral(&self, spec: &[C64]) -> f64 {
        (spec.iter().map(|z| z.norm_sqr()).sum::<f64>() / (2.0 * self.half_width)).sqrt()
    }

    /// Indices of the dealiased band `|ξ_j| ≤ (2/3) ξ_max`.
    pub fn band_indices(&self) -> Vec<usize> {
        let cut = 2.0 / 3.0 * self.xi_max() + 1e-12;
        (0..self.n).filter(|&j| self.xi[j].abs() <= cut).collect()
    }

    /// Largest |ξ| in the dealiased band.
    pub fn band_edge(&self) -> f64 {
        self.band_indices().iter().map(|&j| self.xi[j].abs()).fold(0.0, f64::max)
    }
}

/// Sampled function on a grid with lazily cached spectrum.
#[derive(Clone, Debug)]
pub struct StateVector {
    grid: Grid,
    values: Vec<C64>,
    spectrum: OnceLock<Vec<C64>>,
}

impl StateVector {
    pub fn new(grid: &Grid, values: Vec<C64>) -> Result<Self> {
        if values.len() != grid.n() {
            return Err(PevoError::GridMismatch);
        }
        Ok(Self { grid: grid.clone(), values, spectrum: OnceLock::new() })
    }

    pub fn from_fn(grid: &Grid, f: impl Fn(f64) -> C64) -> Self {
        let values = grid.x_nodes().iter().map(|&x| f(x)).collect();
        Self { grid: grid.clone(), values, spectrum: OnceLock::new() }
    }

    pub fn from_spectrum(grid: &Grid, spectrum: Vec<C64>) -> Result<Self> {
        if spectrum.len() != grid.n() {
            return Err(PevoError::GridMismatch);
        }
        let values = grid.inverse(&spectrum);
        let cell = OnceLock::new();
        let _ = cell.set(spectrum);
        Ok(Self { grid: grid.clone(), values, spectrum: cell })
    }

    pub fn zeros(grid: &Grid) -> Self {
        Self::from_fn(grid, |_| C64::new(0.0, 0.0))
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }
    pub fn values(&self) -> &[C64] {
        &self.values
    }
    pub fn spectrum(&self) -> &[C64] {
        self.spectrum.get_or_init(|| self.grid.forward(&self.values))
    }

    /// Mutable access to samples; drops the cached spectrum.
    pub fn values_mut(&mut self) -> &mut [C64] {
        self.spectrum = OnceLock::new();
        &mut self.values
    }

    pub fn into_values(self) -> Vec<C64> {
        self.values
    }

    pub fn l2_norm(&self) -> f64 {
        self.grid.l2_norm(&self.values)
    }

    pub fn same_grid(&self, other: &StateVector) -> bool {
        self.grid == other.grid
    }
}

/// `D_x^order u` as the multiplier `ξ^order` (with `D = -i∂_x`).
pub fn spectral_derivative(u: &StateVector, order: u32) -> StateVector {
    let grid = u.grid();
    let spec: Vec<C64> = u
        .spectrum()
        .iter()
        .zip(grid.xi_nodes())
        .map(|(&z, &xi)| z * xi.powi(order as i32))
        .collect();
    StateVector::from_spectrum(grid, spec).expect("same grid")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn direct_forward(g: &Grid, u: &[C64]) -> Vec<C64> {
        g.xi_nodes()
            .iter()
            .map(|&xi| {
                g.x_nodes()
                    .iter()
                    .zip(u)
                    .map(|(&x, &v)| C64::from_polar(1.0, -xi * x) * v)
                    .sum::<C64>()
                    * g.dx()
            })
            .collect()
    }

    #[test]
    fn lattice_examples() {
        let g = Grid::new(std::f64::consts::PI, 8, 1.0).unwrap();
        assert!((g.dx() - std::f64::consts::PI / 4.0).abs() < 1e-15);
        let xi: Vec<f64> = g.xi_nodes().to_vec();
        assert_eq!(xi, vec![-4.0, -3.0, -2.0, -1.0, 0.0, 1.0, 2.0, 3.0]);
        let g = Grid::new(40.0, 512, 10.0).unwrap();
        assert!((g.dxi() - 0.0785398).abs() < 1e-6);
        assert!(Grid::new(std::f64::consts::PI, 7, 1.0).is_err());
        assert!(Grid::new(1.0, 16, 0.5).is_err());
        assert!((g.xi_max() - std::f64::consts::PI / 40.0 * 256.0).abs() < 1e-12);
    }

    #[test]
    fn bracket_examples() {
        assert_eq!(bracket_h(0.0, 5.0), 5.0);
        assert_eq!(bracket_h(3.0, 4.0), 5.0);
        assert!((bracket_h(1.0, 1.0) - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn fft_matches_direct_sum() {
        let g = Grid::new(3.0, 32, 1.0).unwrap();
        let u: Vec<C64> =
            (0..32).map(|i| C64::new((i as f64 * 0.37).sin(), (i as f64 * 0.11).cos())).collect();
        let a = g.forward(&u);
        let b = direct_forward(&g, &u);
        for (p, q) in a.iter().zip(&b) {
            assert!((p - q).norm() < 1e-12);
        }
        let back = g.inverse(&a);
        for (p, q) in back.iter().zip(&u) {
            assert!((p - q).norm() < 1e-13);
        }
    }

    #[test]
    fn derivative_examples() {
        let g = Grid::new(std::f64::consts::PI, 16, 1.0).unwrap();
        let xi0 = g.xi_nodes()[11];
        let u = StateVector::from_fn(&g, |x| C64::from_polar(1.0, xi0 * x));
        let du = spectral_derivative(&u, 1);
        for (a, b) in du.values().iter().zip(u.values()) {
            assert!((a - b * xi0).norm() < 1e-12);
        }
        let c = StateVector::from_fn(&g, |_| C64::new(2.0, 0.0));
        assert!(spectral_derivative(&c, 2).values().iter().all(|z| z.norm() < 1e-12));
        let s = StateVector::from_fn(&g, |x| C64::new(x.sin(), 0.0));
        let d2 = spectral_derivative(&s, 2);
        for (a, b) in d2.values().iter().zip(s.values()) {
            assert!((a - b).norm() < 1e-12);
        }
    }
}
