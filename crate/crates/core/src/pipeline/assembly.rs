//! The conjugated generator `M(t) = W E G(t) E⁻¹ W⁻¹ + K⟨D⟩^{(p-1)(1-σ)} + S`.
//!
//! Everything is stored in unnormalized spectral coordinates `ũ = F u`, where
//! `W(t)` is diagonal and the time dependence reduces to scalar factors and a
//! diagonal similarity.

use num_complex::Complex64 as C64;

use super::{from_spectral, to_spectral, Layout};
use crate::calculus::{invert_e_lambda, time_weight, InversionOptions, InversionResult, LambdaField};
use crate::config::BoundaryConfig;
use crate::error::{PevoError, Result};
use crate::grid::Grid;
use crate::linalg::{hermitian_part, matmul, min_eig_hermitian, CMat};
use crate::problems::{Problem, TimeProfile};
use crate::quantizer::{operator_matrix, OperatorMatrix, Side};
use crate::symbols::SymbolGrid;

/// `E G_piece E⁻¹` for the leading term and each lower-order term, in spectral coordinates.
#[derive(Clone, Debug)]
pub struct ConjugatedPieces {
    pub leading: CMat,
    /// `(j, amplitude, time profile, conjugated op_left(τ₁⟨x⟩^{-decay} ξ^{p-j}))`.
    pub lower: Vec<(u32, C64, TimeProfile, CMat)>,
}

impl ConjugatedPieces {
    /// Conjugate every piece of `G` by `E` (value-space matrices).
    pub fn build(prob: &Problem, grid: &Grid, layout: &Layout, e_left: &CMat, e_inv: &CMat) -> Result<Self> {
        let p = prob.p as i32;
        let conj = |m: &CMat| to_spectral(grid, &matmul(&matmul(e_left, m), e_inv));
        let lead_sym = SymbolGrid::from_fn(grid, p as f64, 0.0, |_, xi| C64::new(xi.powi(p), 0.0))?;
        let leading = conj(&operator_matrix(&lead_sym, Side::Left).entries);
        let mut lower = Vec::new();
        for c in &prob.lower {
            let order = p - c.j as i32;
            let sym = SymbolGrid::from_fn(grid, order as f64, -c.decay, |x, xi| {
                C64::new(layout.coefficient_taper(x) * crate::grid::bracket(x).powf(-c.decay) * xi.powi(order), 0.0)
            })?;
            lower.push((c.j, c.amplitude, c.time.clone(), conj(&operator_matrix(&sym, Side::Left).entries)));
        }
        Ok(Self { leading, lower })
    }

    /// `E (iA(t)) E⁻¹` in spectral coordinates.
    pub fn combine(&self, prob: &Problem, t: f64) -> CMat {
        let i = C64::new(0.0, 1.0);
        let mut out = &self.leading * (i * prob.leading(t));
        for (_, amp, time, m) in &self.lower {
            out += m * (i * amp * time.value(t, prob.cfg.t_final));
        }
        out
    }
}

/// Everything needed to evaluate `M(t)` quickly.
#[derive(Clone, Debug)]
pub struct Assembly {
    pub prob: Problem,
    pub grid: Grid,
    pub layout: Layout,
    pub boundary: BoundaryConfig,
    /// Sponge strength `γ₀`.
    pub sponge: f64,
    pub inversion: InversionResult,
    /// `F E F⁻¹` and `F E⁻¹ F⁻¹`.
    pub e_hat: CMat,
    pub e_inv_hat: CMat,
    pub pieces: ConjugatedPieces,
    /// Sponge with `γ₀ = 1`.
    pub sponge_unit: CMat,
    /// `⟨ξ_j⟩_h^{(p-1)(1-σ)}`.
    pub k_symbol: Vec<f64>,
    /// Indices evolved (the dealiased band, or everything).
    pub band: Vec<usize>,
}

impl Assembly {
    /// `prob.cfg` carries the constants; its `h` must match `grid`.
    pub fn build(prob: &Problem, grid: &Grid, boundary: &BoundaryConfig, sponge: f64) -> Result<Self> {
        if (prob.cfg.h - grid.h()).abs() > 1e-12 {
            return Err(PevoError::InvalidConfig(format!("cfg.h = {} but grid.h = {}", prob.cfg.h, grid.h())));
        }
        let layout = Layout::new(boundary, grid.half_width());
        let field = LambdaField::new(&prob.cfg, prob.sign_ap(), grid, layout.lambda_taper(), 0)?;
        let inversion = invert_e_lambda(&field.table(), InversionOptions::default())?;
        Self::from_inversion(prob, grid, boundary, sponge, inversion)
    }

    pub fn from_inversion(
        prob: &Problem,
        grid: &Grid,
        boundary: &BoundaryConfig,
        sponge: f64,
        inversion: InversionResult,
    ) -> Result<Self> {
        let layout = Layout::new(boundary, grid.half_width());
        let e = &inversion.e_left.entries;
        let e_inv = &inversion.inverse_matrix.entries;
        let pieces = ConjugatedPieces::build(prob, grid, &layout, e, e_inv)?;
        let e_hat = to_spectral(grid, e);
        let e_inv_hat = to_spectral(grid, e_inv);
        let p = prob.p as i32;
        let n = grid.n();
        let root = CMat::from_diagonal(&nalgebra::DVector::from_iterator(
            n,
            grid.x_nodes().iter().map(|&x| C64::new(layout.sponge_profile(x).sqrt(), 0.0)),
        ));
        let g_hat = to_spectral(grid, &root);
        let b = nalgebra::DVector::from_iterator(n, grid.xi_nodes().iter().map(|&xi| C64::new(grid.bracket(xi).powi(p - 1), 0.0)));
        let sponge_unit = &g_hat * CMat::from_diagonal(&b) * &g_hat;
        let ord = prob.cfg.time_weight_order();
        let k_symbol = grid.xi_nodes().iter().map(|&xi| grid.bracket(xi).powf(ord)).collect();
        let band = if boundary.dealias { grid.band_indices() } else { (0..n).collect() };
        Ok(Self {
            prob: prob.clone(),
            grid: grid.clone(),
            layout,
            boundary: boundary.clone(),
            sponge,
            inversion,
            e_hat,
            e_inv_hat,
            pieces,
            sponge_unit,
            k_symbol,
            band,
        })
    }

    pub fn cfg(&self) -> &crate::config::GevreyConfig {
        &self.prob.cfg
    }

    /// `e^{Λ_{K,ρ'}(t, ξ_j)}`.
    pub fn weights(&self, t: f64) -> Result<Vec<f64>> {
        Ok(time_weight(t, &self.prob.cfg, &self.grid, 1.0)?.into_iter().map(|z| z.re).collect())
    }

    /// `W E (iA) E⁻¹ W⁻¹`, spectral.
    pub fn conjugated_spectral(&self, t: f64) -> Result<CMat> {
        let w = self.weights(t)?;
        let mut m = self.pieces.combine(&self.prob, t);
        let n = self.grid.n();
        for l in 0..n {
            for j in 0..n {
                m[(j, l)] *= w[j] / w[l];
            }
        }
        Ok(m)
    }

    /// Full `M(t)`, spectral.
    pub fn generator_spectral(&self, t: f64) -> Result<CMat> {
        let mut m = self.conjugated_spectral(t)?;
        m += &self.sponge_unit * C64::new(self.sponge, 0.0);
        let k = self.prob.cfg.k;
        for (j, s) in self.k_symbol.iter().enumerate() {
            m[(j, j)] += k * s;
        }
        Ok(m)
    }

    /// `Π M(t) Π` restricted to the evolved indices.
    pub fn band_generator(&self, t: f64) -> Result<CMat> {
        let m = self.generator_spectral(t)?;
        Ok(restrict(&m, &self.band))
    }

    /// `C₀ = max(0, -min_t λ_min(Herm ΠMΠ))` over `ts`, plus the per-t minima.
    pub fn hermitian_floor(&self, ts: &[f64]) -> Result<(f64, Vec<f64>)> {
        let mut mins = Vec::with_capacity(ts.len());
        for &t in ts {
            mins.push(min_eig_hermitian(&hermitian_part(&self.band_generator(t)?)));
        }
        let c0 = mins.iter().fold(0.0f64, |a, &m| a.max(-m));
        Ok((c0, mins))
    }
}

/// Submatrix on `idx × idx`.
pub fn restrict(m: &CMat, idx: &[usize]) -> CMat {
    CMat::from_fn(idx.len(), idx.len(), |a, b| m[(idx[a], idx[b])])
}

/// `M(t)` as a value-space matrix on the full grid.
pub fn assemble_conjugated_generator(asm: &Assembly, t: f64) -> Result<OperatorMatrix> {
    let m = asm.generator_spectral(t)?;
    OperatorMatrix::new(from_spectral(&asm.grid, &m), &asm.grid, format!("M(t={t})"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::GevreyConfig;
    use crate::problems::{make_preset, PresetOverrides};

    fn trivial_cfg() -> GevreyConfig {
        GevreyConfig { m: vec![0.0, 0.0], k: 0.0, rho_prime: 0.0, ..GevreyConfig::kdv3() }
    }

    #[test]
    fn identity_conjugation_gives_g() {
        let cfg = trivial_cfg();
        let prob = make_preset("kdv3", &cfg, &PresetOverrides::default()).unwrap();
        let grid = Grid::new(6.0, 32, cfg.h).unwrap();
        let asm = Assembly::build(&prob, &grid, &BoundaryConfig::none(), 0.0).unwrap();
        let m = assemble_conjugated_generator(&asm, 0.03).unwrap();
        // G = i(ξ^3 + Σ op_left(a_{p-j} ξ^{p-j}))
        let i = C64::new(0.0, 1.0);
        let mut g = operator_matrix(
            &SymbolGrid::from_fn(&grid, 3.0, 0.0, |_, xi| i * xi.powi(3)).unwrap(),
            Side::Left,
        )
        .entries;
        for c in &prob.lower {
            let s = SymbolGrid::from_fn(&grid, 0.0, 0.0, |x, xi| i * c.value(0.03, x, cfg.t_final) * xi.powi(3 - c.j as i32))
                .unwrap();
            g += operator_matrix(&s, Side::Left).entries;
        }
        let err = crate::linalg::fro(&(m.entries - &g)) / crate::linalg::fro(&g);
        assert!(err < 1e-12, "{err}");
    }

    #[test]
    fn end_time_weight_is_rho_prime_only() {
        let cfg = GevreyConfig { k: 3.0, ..GevreyConfig::kdv3() };
        let prob = make_preset("kdv3", &cfg, &PresetOverrides::default()).unwrap();
        let grid = Grid::new(6.0, 32, cfg.h).unwrap();
        let asm = Assembly::build(&prob, &grid, &BoundaryConfig::default(), 0.0).unwrap();
        let w = asm.weights(cfg.t_final).unwrap();
        for (j, &xi) in grid.xi_nodes().iter().enumerate() {
            assert_eq!(w[j], (cfg.rho_prime * grid.bracket(xi).powf(1.0 / cfg.theta)).exp());
        }
    }

    #[test]
    fn sponge_is_positive_semidefinite() {
        let cfg = GevreyConfig::kdv3();
        let prob = make_preset("kdv3", &cfg, &PresetOverrides::default()).unwrap();
        let grid = Grid::new(6.0, 32, cfg.h).unwrap();
        let asm = Assembly::build(&prob, &grid, &BoundaryConfig::default(), 1.0).unwrap();
        let s = crate::linalg::hermitian_part(&asm.sponge_unit);
        assert!(min_eig_hermitian(&s) > -1e-9);
        assert!(crate::linalg::fro(&(s - &asm.sponge_unit)) < 1e-9 * crate::linalg::fro(&asm.sponge_unit));
    }
}
