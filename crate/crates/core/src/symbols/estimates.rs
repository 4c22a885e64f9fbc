//! Numerical checks of the estimate family satisfied by `λ_{p-k}`, and
//! fitted Gevrey constants of coefficients.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::config::GevreyConfig;
use crate::error::{PevoError, Result};
use crate::grid::{bracket, bracket_h, Grid};

use super::lambda::LambdaLattice;

/// Largest `α + β` covered by the fitted estimates.
pub const MAX_ORDER: usize = 4;
/// Allowed relative drift of a fitted constant under 2× lattice refinement.
pub const REFINEMENT_TOL: f64 = 0.05;
/// Sample lattice ξ nodes per unit `h`.
const XI_RESOLUTION: f64 = 32.0;

fn fact(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// Sample lattice: nonnegative x and ξ nodes (the estimates are invariant
/// under `x ↦ -x` and `ξ ↦ -ξ`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleLattice {
    pub xs: Vec<f64>,
    pub xis: Vec<f64>,
}

impl SampleLattice {
    /// Nonnegative grid nodes: `x ∈ [0, L]`, `ξ ∈ [0, ξ_max]`.
    ///
    /// The ξ nodes are subdivided until the step is at most `h/32`; the
    /// cutoff transitions have width of order `h` and the grid spacing `π/L`
    /// does not shrink with `N`.
    pub fn from_grid(grid: &Grid) -> Self {
        let n = grid.n() / 2;
        let xs = (0..=n).map(|i| grid.dx() * i as f64).collect();
        let split = (grid.dxi() / (grid.h() / XI_RESOLUTION)).ceil().max(1.0) as usize;
        let step = grid.dxi() / split as f64;
        let xis = (0..=n * split).map(|j| step * j as f64).collect();
        Self { xs, xis }
    }

    /// Insert midpoints between consecutive nodes (same ranges).
    pub fn refined(&self) -> Self {
        let mid = |v: &[f64]| {
            let mut out = Vec::with_capacity(2 * v.len());
            for w in v.windows(2) {
                out.push(w[0]);
                out.push(0.5 * (w[0] + w[1]));
            }
            out.extend(v.last());
            out
        };
        Self { xs: mid(&self.xs), xis: mid(&self.xis) }
    }
}

/// Fitted constants of the five estimate shapes on one lattice.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimateConstants {
    /// Sup of `|λ| / ⟨ξ⟩_h^{(p-k)(1-σ)}`.
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub c4: f64,
    pub c5: f64,
}

impl EstimateConstants {
    fn fitted(&self) -> [f64; 4] {
        [self.c2, self.c3, self.c4, self.c5]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub k: u32,
    pub analytic_bound: f64,
    pub bound_holds: bool,
    pub coarse: EstimateConstants,
    pub fine: EstimateConstants,
    /// Relative change of the constants (ii)–(v) under refinement.
    pub refinement_change: [f64; 4],
    pub stable: bool,
    pub pass: bool,
    /// Ratio of the fitted first-x-derivative constant to `M_{p-k}`.
    pub dx_constant_over_m: f64,
}

fn constants_on(k: u32, cfg: &GevreyConfig, sign_ap: f64, lat: &SampleLattice) -> Result<(EstimateConstants, f64)> {
    let ll = LambdaLattice::new(cfg, sign_ap, &lat.xs, &lat.xis, MAX_ORDER)?;
    let s = cfg.decay(k);
    let order = (cfg.p - k) as f64 * (1.0 - cfg.sigma);
    let mu = cfg.mu;
    let mut c = EstimateConstants { c1: 0.0, c2: 0.0, c3: 0.0, c4: 0.0, c5: 0.0 };
    let mut dx1: f64 = 0.0;
    let kk = k as f64;
    for (j, &xi) in lat.xis.iter().enumerate() {
        let bxi = bracket_h(xi, cfg.h);
        for (i, &x) in lat.xs.iter().enumerate() {
            let bx = bracket(x);
            c.c1 = c.c1.max(ll.value(k, i, j).abs() / bxi.powf(order));
            let jet = ll.jet(k, i, j, MAX_ORDER);
            for a in 0..=MAX_ORDER {
                let da = jet.derivative(a, 0).unwrap().norm();
                let root = |ratio: f64, n: usize| ratio.powf(1.0 / (n as f64 + 1.0));
                let fa = fact(a).powf(mu);
                if a >= 1 {
                    c.c2 = c.c2.max(root(da / (fa * bxi.powf(order - a as f64)), a));
                }
                c.c3 = c.c3.max(root(da / (fa * bxi.powf(1.0 - kk - a as f64) * bx.powf(1.0 - s)), a));
                c.c4 = c.c4.max(root(
                    da / (fa * bxi.powf(-(a as f64)) * bx.powf(order / (cfg.p as f64 - 1.0))),
                    a,
                ));
                for b in 1..=MAX_ORDER - a {
                    let d = jet.derivative(a, b).unwrap().norm();
                    let w = (fact(a) * fact(b)).powf(mu)
                        * bxi.powf(1.0 - kk - a as f64)
                        * bx.powf(-s - (b as f64 - 1.0));
                    c.c5 = c.c5.max(root(d / w, a + b));
                    if a == 0 && b == 1 {
                        dx1 = dx1.max(d / (bxi.powf(1.0 - kk) * bx.powf(-s)));
                    }
                }
            }
        }
    }
    Ok((c, dx1))
}

/// Check the estimate family of `λ_{p-k}` on `lattice` and its 2× refinement.
pub fn verify_lambda_estimates(k: u32, cfg: &GevreyConfig, sign_ap: f64, lattice: &SampleLattice) -> Result<EstimateReport> {
    let (coarse, dx1) = constants_on(k, cfg, sign_ap, lattice)?;
    let (fine, _) = constants_on(k, cfg, sign_ap, &lattice.refined())?;
    let m = cfg.m_for(k);
    let analytic_bound = m / (1.0 - cfg.decay(k));
    let bound_holds = coarse.c1 <= analytic_bound && fine.c1 <= analytic_bound;
    let mut change = [0.0; 4];
    for (slot, (a, b)) in change.iter_mut().zip(coarse.fitted().iter().zip(fine.fitted())) {
        *slot = if *a == 0.0 && b == 0.0 { 0.0 } else { (b - a).abs() / a.abs().max(b.abs()) };
    }
    let finite = coarse.fitted().iter().chain(fine.fitted().iter()).all(|v| v.is_finite());
    let stable = finite && change.iter().all(|&d| d < REFINEMENT_TOL);
    Ok(EstimateReport {
        k,
        analytic_bound,
        bound_holds,
        coarse,
        fine,
        refinement_change: change,
        stable,
        pass: bound_holds && stable,
        dx_constant_over_m: if m > 0.0 { dx1 / m } else { 0.0 },
    })
}

/// `∂_x^β a(t, x)` for `β = 0..=beta_max`.
pub type CoefficientDerivs<'a> = dyn Fn(f64, f64, usize) -> Vec<C64> + 'a;

/// Fitted constant of a coefficient's Gevrey/decay hypothesis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GevreyFit {
    pub constant: f64,
    /// Sup ratio over `x ≤ x_max/10` and over the last decade of the lattice.
    pub inner_sup: f64,
    pub tail_sup: f64,
}

/// Log-spaced x samples on `[0, 1e4]`, symmetric.
pub fn decay_x_samples() -> Vec<f64> {
    let mut v = vec![0.0];
    let n = 240;
    for i in 0..=n {
        let x = 10f64.powf(-2.0 + 6.0 * i as f64 / n as f64);
        v.push(x);
        v.push(-x);
    }
    v
}

/// Smallest `C` with `|∂_x^β a| ≤ C^{β+1} β!^{θ0} ⟨x⟩^{-s-β}` over the samples.
///
/// Errors when the ratio still grows over the last decade of x, i.e. the
/// coefficient decays slower than required.
pub fn gevrey_constant_estimate(
    derivs: &CoefficientDerivs<'_>,
    decay: f64,
    theta0: f64,
    t_samples: &[f64],
    x_samples: &[f64],
    beta_max: usize,
) -> Result<GevreyFit> {
    let xmax = x_samples.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let mut inner: f64 = 0.0;
    let mut tail: f64 = 0.0;
    for &t in t_samples {
        for &x in x_samples {
            let d = derivs(t, x, beta_max);
            let bx = bracket(x);
            let mut r: f64 = 0.0;
            for (b, v) in d.iter().enumerate().take(beta_max + 1) {
                let ratio = v.norm() / (fact(b).powf(theta0) * bx.powf(-decay - b as f64));
                r = r.max(ratio.powf(1.0 / (b as f64 + 1.0)));
            }
            if !r.is_finite() {
                return Err(PevoError::NonFinite { context: "coefficient derivative".into() });
            }
            if x.abs() > xmax / 10.0 {
                tail = tail.max(r);
            } else {
                inner = inner.max(r);
            }
        }
    }
    if tail > inner * 1.01 && tail > 1e-300 {
        return Err(PevoError::Assumption(format!(
            "coefficient decays too slowly for exponent {decay}: sup ratio {inner:.4} grows to {tail:.4} on the last decade"
        )));
    }
    Ok(GevreyFit { constant: inner.max(tail), inner_sup: inner, tail_sup: tail })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jet::Jet1;

    fn bracket_power(c: f64, s: f64) -> impl Fn(f64, f64, usize) -> Vec<C64> {
        move |_t, x, n| {
            let v = Jet1::var(x, n);
            let b = v.mul(&v).add(&Jet1::constant(1.0, n)).powf(-0.5 * s).scale(c);
            b.derivatives().into_iter().map(|d| C64::new(d, 0.0)).collect()
        }
    }

    #[test]
    fn zero_coefficient_has_zero_constant() {
        let z = |_: f64, _: f64, n: usize| vec![C64::new(0.0, 0.0); n + 1];
        let f = gevrey_constant_estimate(&z, 0.9, 1.5, &[0.0], &decay_x_samples(), 4).unwrap();
        assert_eq!(f.constant, 0.0);
    }

    #[test]
    fn matching_decay_is_finite() {
        let f = gevrey_constant_estimate(&bracket_power(0.7, 0.9), 0.9, 1.5, &[0.0], &decay_x_samples(), 4).unwrap();
        assert!(f.constant >= 0.7 && f.constant.is_finite());
    }

    #[test]
    fn weak_decay_is_flagged() {
        let r = gevrey_constant_estimate(&bracket_power(1.0, 0.45), 0.9, 1.5, &[0.0], &decay_x_samples(), 4);
        assert!(matches!(r, Err(PevoError::Assumption(_))));
    }

    #[test]
    fn lattice_refinement_keeps_range() {
        let g = Grid::new(8.0, 16, 4.0).unwrap();
        let l = SampleLattice::from_grid(&g);
        let r = l.refined();
        assert_eq!(r.xs.len(), 2 * l.xs.len() - 1);
        assert_eq!(r.xs.last(), l.xs.last());
        assert_eq!(r.xis.last(), l.xis.last());
    }
}
