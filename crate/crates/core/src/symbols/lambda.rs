//! The corrector symbols `λ_{p-k}`, their sum `Λ`, and the time weight.

use num_complex::Complex64 as C64;

use crate::config::GevreyConfig;
use crate::cutoffs::{omega_derivs, plateau_derivs, psi, psi_derivs};
use crate::error::{PevoError, Result};
use crate::grid::{bracket, bracket_h};
use crate::jet::Jet;
use crate::quad::{adaptive_simpson, gauss_legendre};

use super::ScalarSymbol;

const QUAD_TOL: f64 = 1e-10;
/// Panel width for Gauss–Legendre integration of ξ-Taylor coefficients.
const PANEL: f64 = 0.0625;

fn c(v: f64) -> C64 {
    C64::new(v, 0.0)
}

/// `⟨y⟩^{-s} ψ(⟨y⟩ / ⟨ξ⟩_h^{p-1})`, the integrand defining `λ_{p-k}`.
fn integrand(y: f64, xi: f64, cfg: &GevreyConfig, s: f64) -> f64 {
    let by = bracket(y);
    let cap = bracket_h(xi, cfg.h).powi(cfg.p as i32 - 1);
    by.powf(-s) * psi(by / cap)
}

/// True when ψ equals 1 on the whole integration range `[0, x_abs]`.
fn psi_flat_to(x_abs: f64, xi: f64, cfg: &GevreyConfig) -> bool {
    bracket(x_abs) < 0.5 * bracket_h(xi, cfg.h).powi(cfg.p as i32 - 1)
}

/// Jet of the integrand at `(y, ξ)`.
fn integrand_jet(y: f64, xi: f64, cfg: &GevreyConfig, s: f64, deg: usize, x_free: bool) -> Jet {
    let yj = if x_free { Jet::var_x(y, deg) } else { Jet::constant(c(y), deg) };
    let xj = Jet::var_xi(xi, deg);
    let one = Jet::constant(c(1.0), deg);
    let by = (yj * yj + one).sqrt();
    let cap = (xj * xj + Jet::constant(c(cfg.h * cfg.h), deg)).powf(0.5 * (cfg.p as f64 - 1.0));
    let arg = by * cap.recip();
    let pd: Vec<C64> = psi_derivs(arg.value().re, deg).into_iter().map(c).collect();
    by.powf(-s) * arg.compose(&pd)
}

/// `M ω(ξ/h) ⟨ξ⟩_h^{1-k}` as a jet in ξ.
fn prefactor_jet(k: u32, xi: f64, cfg: &GevreyConfig, sign_ap: f64, deg: usize) -> Jet {
    let xj = Jet::var_xi(xi, deg);
    let scaled = xj * (1.0 / cfg.h);
    let od: Vec<C64> = omega_derivs(xi / cfg.h, cfg.r_ap, sign_ap, cfg.p, deg).into_iter().map(c).collect();
    let om = scaled.compose(&od);
    let br = (xj * xj + Jet::constant(c(cfg.h * cfg.h), deg)).powf(0.5 * (1.0 - k as f64));
    om * br * cfg.m_for(k)
}

fn prefactor(k: u32, xi: f64, cfg: &GevreyConfig, sign_ap: f64) -> f64 {
    let om = omega_derivs(xi / cfg.h, cfg.r_ap, sign_ap, cfg.p, 0)[0];
    cfg.m_for(k) * om * bracket_h(xi, cfg.h).powf(1.0 - k as f64)
}

/// `∫_0^x ⟨y⟩^{-s} ψ(⟨y⟩/⟨ξ⟩_h^{p-1}) dy` by adaptive Simpson.
pub fn lambda_integral(k: u32, x: f64, xi: f64, cfg: &GevreyConfig) -> Result<f64> {
    let s = cfg.decay(k);
    // The integrand vanishes once ⟨y⟩ ≥ ⟨ξ⟩_h^{p-1}.
    let cap = bracket_h(xi, cfg.h).powi(cfg.p as i32 - 1);
    let ymax = (cap * cap - 1.0).max(0.0).sqrt();
    let xa = x.abs().min(ymax);
    let v = adaptive_simpson(&|y| integrand(y, xi, cfg, s), 0.0, xa, QUAD_TOL)?;
    Ok(if x < 0.0 { -v } else { v })
}

/// `λ_{p-k}(x, ξ)`.
pub fn lambda_pk(k: u32, x: f64, xi: f64, cfg: &GevreyConfig, sign_ap: f64) -> Result<f64> {
    check_k(k, cfg)?;
    let pre = prefactor(k, xi, cfg, sign_ap);
    if pre == 0.0 || x == 0.0 {
        return Ok(0.0);
    }
    Ok(pre * lambda_integral(k, x, xi, cfg)?)
}

/// `Λ = Σ_k λ_{p-k}`.
pub fn lambda_total(x: f64, xi: f64, cfg: &GevreyConfig, sign_ap: f64) -> Result<f64> {
    (1..cfg.p).map(|k| lambda_pk(k, x, xi, cfg, sign_ap)).sum()
}

/// `Λ_{K,ρ'}(t, ξ) = K(T-t)⟨ξ⟩_h^{(p-1)(1-σ)} + ρ'⟨ξ⟩_h^{1/θ}`.
pub fn lambda_time(t: f64, xi: f64, cfg: &GevreyConfig) -> Result<f64> {
    if !(0.0..=cfg.t_final).contains(&t) {
        return Err(PevoError::InvalidConfig(format!("t = {t} outside [0, {}]", cfg.t_final)));
    }
    let b = bracket_h(xi, cfg.h);
    Ok(cfg.k * (cfg.t_final - t) * b.powf(cfg.time_weight_order()) + cfg.rho_prime * b.powf(1.0 / cfg.theta))
}

fn check_k(k: u32, cfg: &GevreyConfig) -> Result<()> {
    if k == 0 || k >= cfg.p {
        return Err(PevoError::InvalidConfig(format!("k = {k} outside 1..{}", cfg.p - 1)));
    }
    Ok(())
}

/// ξ-Taylor coefficients (orders `0..ncoef`) of the defining integral at each
/// `|x|` of an ascending list, accumulated segment by segment.
fn integral_column(k: u32, xi: f64, cfg: &GevreyConfig, abs_x: &[f64], ncoef: usize, shared: Option<&[f64]>) -> Result<Vec<Vec<f64>>> {
    let s = cfg.decay(k);
    let last = abs_x.last().copied().unwrap_or(0.0);
    if psi_flat_to(last, xi, cfg) {
        if let Some(sh) = shared {
            return Ok(sh.iter().map(|&v| {
                let mut r = vec![0.0; ncoef];
                r[0] = v;
                r
            }).collect());
        }
    }
    let rule = gauss_legendre(16);
    let mut out = Vec::with_capacity(abs_x.len());
    let mut acc = vec![0.0; ncoef];
    let mut prev = 0.0;
    for &xa in abs_x {
        if xa > prev {
            acc[0] += adaptive_simpson(&|y| integrand(y, xi, cfg, s), prev, xa, QUAD_TOL / abs_x.len() as f64)?;
            if ncoef > 1 && !psi_flat_to(xa, xi, cfg) {
                let panels = ((xa - prev) / PANEL).ceil().max(1.0) as usize;
                let width = (xa - prev) / panels as f64;
                for q in 0..panels {
                    let half = 0.5 * width;
                    let mid = prev + width * q as f64 + half;
                    if psi_flat_to(mid + half, xi, cfg) {
                        continue;
                    }
                    for (z, w) in rule.0.iter().zip(&rule.1) {
                        let g = integrand_jet(mid + half * z, xi, cfg, s, ncoef - 1, false);
                        for (a, slot) in acc.iter_mut().enumerate().skip(1) {
                            *slot += w * half * g.coeff(a, 0).re;
                        }
                    }
                }
            }
            prev = xa;
        }
        out.push(acc.clone());
    }
    Ok(out)
}

/// `λ_{p-k}` and its Taylor jets on a rectangular lattice, with the defining
/// integral memoized per ξ column.
pub struct LambdaLattice {
    cfg: GevreyConfig,
    sign_ap: f64,
    xs: Vec<f64>,
    xis: Vec<f64>,
    ncoef: usize,
    /// `[k-1][j][i]` → ξ-Taylor coefficients of the integral at `(|x_i|, ξ_j)`.
    cols: Vec<Vec<Vec<Vec<f64>>>>,
}

impl LambdaLattice {
    /// `deg` is the highest total derivative order later requested.
    pub fn new(cfg: &GevreyConfig, sign_ap: f64, xs: &[f64], xis: &[f64], deg: usize) -> Result<Self> {
        let mut abs_sorted: Vec<f64> = xs.iter().map(|v| v.abs()).collect();
        abs_sorted.sort_by(f64::total_cmp);
        abs_sorted.dedup();
        let pos: Vec<usize> = xs
            .iter()
            .map(|v| abs_sorted.binary_search_by(|p| p.total_cmp(&v.abs())).unwrap())
            .collect();
        let ncoef = deg + 1;
        let mut cols = Vec::new();
        for k in 1..cfg.p {
            let s = cfg.decay(k);
            let shared = {
                let mut acc = 0.0;
                let mut prev = 0.0;
                let mut v = Vec::with_capacity(abs_sorted.len());
                for &xa in &abs_sorted {
                    acc += adaptive_simpson(&|y: f64| bracket(y).powf(-s), prev, xa, QUAD_TOL / abs_sorted.len() as f64)?;
                    prev = xa;
                    v.push(acc);
                }
                v
            };
            let mut per_xi = Vec::with_capacity(xis.len());
            for &xi in xis {
                if prefactor(k, xi, cfg, sign_ap) == 0.0 {
                    per_xi.push(vec![vec![0.0; ncoef]; xs.len()]);
                    continue;
                }
                let col = integral_column(k, xi, cfg, &abs_sorted, ncoef, Some(&shared))?;
                per_xi.push(pos.iter().map(|&q| col[q].clone()).collect());
            }
            cols.push(per_xi);
        }
        Ok(Self { cfg: cfg.clone(), sign_ap, xs: xs.to_vec(), xis: xis.to_vec(), ncoef, cols })
    }

    pub fn xs(&self) -> &[f64] {
        &self.xs
    }
    pub fn xis(&self) -> &[f64] {
        &self.xis
    }

    /// `λ_{p-k}(x_i, ξ_j)`.
    pub fn value(&self, k: u32, i: usize, j: usize) -> f64 {
        let x = self.xs[i];
        let v = self.cols[(k - 1) as usize][j][i][0];
        prefactor(k, self.xis[j], &self.cfg, self.sign_ap) * if x < 0.0 { -v } else { v }
    }

    /// `Λ(x_i, ξ_j)`.
    pub fn total(&self, i: usize, j: usize) -> f64 {
        (1..self.cfg.p).map(|k| self.value(k, i, j)).sum()
    }

    /// Jet of `λ_{p-k}` at `(x_i, ξ_j)`, `deg` at most the lattice degree.
    pub fn jet(&self, k: u32, i: usize, j: usize, deg: usize) -> Jet {
        assert!(deg < self.ncoef, "lattice built for lower degree");
        let (x, xi) = (self.xs[i], self.xis[j]);
        let sgn = if x < 0.0 { -1.0 } else { 1.0 };
        let col = &self.cols[(k - 1) as usize][j][i];
        let ij = integral_jet(k, x, xi, &self.cfg, deg, |a| sgn * col[a]);
        prefactor_jet(k, xi, &self.cfg, self.sign_ap, deg) * ij
    }

    /// Jet of `Λ` at `(x_i, ξ_j)`.
    pub fn total_jet(&self, i: usize, j: usize, deg: usize) -> Jet {
        let mut acc = Jet::zero(deg);
        for k in 1..self.cfg.p {
            acc = acc + self.jet(k, i, j, deg);
        }
        acc
    }
}

/// Jet of the defining integral: x-derivatives come from the integrand,
/// pure ξ-coefficients from `xi_coef(a)`.
fn integral_jet(k: u32, x: f64, xi: f64, cfg: &GevreyConfig, deg: usize, xi_coef: impl Fn(usize) -> f64) -> Jet {
    let mut ij = Jet::zero(deg);
    for a in 0..=deg {
        ij.set_coeff(a, 0, c(xi_coef(a)));
    }
    if deg >= 1 {
        let g = integrand_jet(x, xi, cfg, cfg.decay(k), deg - 1, true);
        for a in 0..deg {
            for b in 1..=deg - a {
                ij.set_coeff(a, b, g.coeff(a, b - 1) / b as f64);
            }
        }
    }
    ij
}

/// Pointwise jet of `λ_{p-k}` (quadrature from 0 to x for the ξ-coefficients).
pub fn lambda_jet(k: u32, x: f64, xi: f64, cfg: &GevreyConfig, sign_ap: f64, deg: usize) -> Result<Jet> {
    check_k(k, cfg)?;
    let col = integral_column(k, xi, cfg, &[x.abs()], deg + 1, None)?;
    let sgn = if x < 0.0 { -1.0 } else { 1.0 };
    let ij = integral_jet(k, x, xi, cfg, deg, |a| sgn * col[0][a]);
    Ok(prefactor_jet(k, xi, cfg, sign_ap, deg) * ij)
}

/// `λ_{p-k}` (or `Λ` when `k` is `None`) as a [`ScalarSymbol`].
#[derive(Clone, Debug)]
pub struct LambdaSymbol {
    pub cfg: GevreyConfig,
    pub sign_ap: f64,
    pub k: Option<u32>,
}

impl LambdaSymbol {
    pub fn total(cfg: &GevreyConfig, sign_ap: f64) -> Self {
        Self { cfg: cfg.clone(), sign_ap, k: None }
    }
    pub fn level(cfg: &GevreyConfig, sign_ap: f64, k: u32) -> Self {
        Self { cfg: cfg.clone(), sign_ap, k: Some(k) }
    }
    fn ks(&self) -> Vec<u32> {
        match self.k {
            Some(k) => vec![k],
            None => (1..self.cfg.p).collect(),
        }
    }
}

impl ScalarSymbol for LambdaSymbol {
    fn eval(&self, x: f64, xi: f64) -> C64 {
        let v: f64 = self
            .ks()
            .into_iter()
            .map(|k| lambda_pk(k, x, xi, &self.cfg, self.sign_ap).expect("smooth bounded integrand"))
            .sum();
        c(v)
    }
    fn jet(&self, x: f64, xi: f64, deg: usize) -> Option<Jet> {
        let mut acc = Jet::zero(deg);
        for k in self.ks() {
            acc = acc + lambda_jet(k, x, xi, &self.cfg, self.sign_ap, deg).ok()?;
        }
        Some(acc)
    }
    fn xi_order(&self) -> f64 {
        let k = self.k.unwrap_or(1);
        (self.cfg.p - k) as f64 * (1.0 - self.cfg.sigma)
    }
    fn x_order(&self) -> f64 {
        let k = self.k.unwrap_or(1);
        1.0 - self.cfg.decay(k)
    }
    fn label(&self) -> String {
        match self.k {
            Some(k) => format!("lambda_{}", self.cfg.p - k),
            None => "Lambda".into(),
        }
    }
}

/// Multiply a jet in x by the plateau `τ` with the given flat/edge radii.
pub fn taper_jet(j: Jet, x: f64, flat: f64, edge: f64) -> Jet {
    let deg = j.deg();
    let d: Vec<C64> = plateau_derivs(x, flat, edge, deg).into_iter().map(c).collect();
    let tau = Jet::var_x(x, deg).compose(&d);
    j * tau
}

/// `j · plateau(ξ; flat, edge)` as a jet in ξ.
pub fn xi_taper_jet(j: Jet, xi: f64, flat: f64, edge: f64) -> Jet {
    let deg = j.deg();
    let d: Vec<C64> = plateau_derivs(xi, flat, edge, deg).into_iter().map(c).collect();
    let tau = Jet::var_xi(xi, deg).compose(&d);
    j * tau
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> GevreyConfig {
        GevreyConfig { h: 10.0, m: vec![1.0, 1.0], ..GevreyConfig::kdv3() }
    }

    #[test]
    fn vanishes_at_origin_and_low_frequency() {
        let c = cfg();
        for k in 1..3 {
            assert_eq!(lambda_pk(k, 0.0, 50.0, &c, 1.0).unwrap(), 0.0);
            assert_eq!(lambda_pk(k, 3.0, 9.5, &c, 1.0).unwrap(), 0.0);
        }
        assert_eq!(lambda_total(0.0, 40.0, &c, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn reference_point_positive_and_bounded() {
        let c = cfg();
        let xi = 10.0 * c.r_ap + 1e-9;
        let v = lambda_pk(1, 5.0, xi, &c, -1.0).unwrap();
        let bound = 1.0 / (1.0 - c.sigma) * bracket_h(xi, c.h).powf(2.0 * (1.0 - c.sigma));
        assert!(v > 0.0 && v <= bound);
        // Independent oracle: plain adaptive quadrature of ⟨y⟩^{-0.9}, ψ ≡ 1 here.
        let i = adaptive_simpson(&|y: f64| (1.0 + y * y).powf(-0.45), 0.0, 5.0, 1e-12).unwrap();
        assert!((v - i).abs() < 1e-9);
    }

    #[test]
    fn time_weight_examples() {
        let c = GevreyConfig { k: 2.0, ..cfg() };
        let at_t = lambda_time(c.t_final, 3.0, &c).unwrap();
        assert!((at_t - c.rho_prime * bracket_h(3.0, c.h).powf(0.5)).abs() < 1e-15);
        let at0 = lambda_time(0.0, 0.0, &c).unwrap();
        let want = 2.0 * c.t_final * c.h.powf(0.2) + c.rho_prime * c.h.sqrt();
        assert!((at0 - want).abs() < 1e-13);
        assert!(lambda_time(-0.1, 0.0, &c).is_err());
        let z = GevreyConfig { k: 0.0, rho_prime: 0.0, ..c };
        assert_eq!(lambda_time(0.05, 7.0, &z).unwrap(), 0.0);
    }

    #[test]
    fn jet_matches_lattice_and_values() {
        let c = GevreyConfig { p: 2, h: 2.0, m: vec![0.7], ..GevreyConfig::kdv3() };
        let xs = [-3.0, -0.5, 0.0, 1.2, 6.0];
        let xis = [-9.0, 3.3, 5.0];
        let lat = LambdaLattice::new(&c, -1.0, &xs, &xis, 3).unwrap();
        for (i, &x) in xs.iter().enumerate() {
            for (j, &xi) in xis.iter().enumerate() {
                let v = lambda_pk(1, x, xi, &c, -1.0).unwrap();
                assert!((lat.value(1, i, j) - v).abs() < 1e-9);
                let a = lat.jet(1, i, j, 3);
                let b = lambda_jet(1, x, xi, &c, -1.0, 3).unwrap();
                for (al, be) in [(1, 0), (0, 1), (2, 1), (3, 0)] {
                    let (p, q) = (a.derivative(al, be).unwrap(), b.derivative(al, be).unwrap());
                    assert!((p - q).norm() < 1e-8 * q.norm().max(1.0), "{x} {xi} {al} {be} {p} {q}");
                }
            }
        }
    }

    #[test]
    fn xi_derivative_matches_finite_difference_in_transition() {
        // p = 2 with small h puts the ψ transition inside the x range.
        let c = GevreyConfig { p: 2, h: 2.0, m: vec![1.0], ..GevreyConfig::kdv3() };
        let (x, xi) = (7.0, 6.0);
        let e = 1e-4;
        let fd = (lambda_pk(1, x, xi + e, &c, -1.0).unwrap() - lambda_pk(1, x, xi - e, &c, -1.0).unwrap()) / (2.0 * e);
        let j = lambda_jet(1, x, xi, &c, -1.0, 2).unwrap();
        assert!((j.derivative(1, 0).unwrap().re - fd).abs() < 1e-6);
    }
}
