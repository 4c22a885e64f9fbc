//! Scalar symbols `p(x, ξ)`: evaluation, derivatives and tabulation.

pub mod estimates;
pub mod lambda;

use std::path::Path;
use std::sync::Arc;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{PevoError, Result};
use crate::grid::Grid;
use crate::jet::Jet;
use crate::linalg::CMat;

/// A symbol with declared orders in ξ and in x.
pub trait ScalarSymbol: Send + Sync {
    fn eval(&self, x: f64, xi: f64) -> C64;

    /// Bivariate Taylor jet at `(x, ξ)`, when derivatives are known in closed form.
    fn jet(&self, _x: f64, _xi: f64, _deg: usize) -> Option<Jet> {
        None
    }

    fn xi_order(&self) -> f64;
    fn x_order(&self) -> f64;

    fn label(&self) -> String {
        "symbol".into()
    }
}

type EvalFn = dyn Fn(f64, f64) -> C64 + Send + Sync;
type JetFn = dyn Fn(f64, f64, usize) -> Jet + Send + Sync;

/// Symbol assembled from closures.
#[derive(Clone)]
pub struct FnSymbol {
    eval: Arc<EvalFn>,
    jet: Option<Arc<JetFn>>,
    xi_order: f64,
    x_order: f64,
    label: String,
}

impl FnSymbol {
    pub fn new(
        label: impl Into<String>,
        xi_order: f64,
        x_order: f64,
        eval: impl Fn(f64, f64) -> C64 + Send + Sync + 'static,
    ) -> Self {
        Self { eval: Arc::new(eval), jet: None, xi_order, x_order, label: label.into() }
    }

    /// Symbol defined by its jet; the value is the jet's constant term.
    pub fn from_jet(
        label: impl Into<String>,
        xi_order: f64,
        x_order: f64,
        jet: impl Fn(f64, f64, usize) -> Jet + Send + Sync + 'static,
    ) -> Self {
        let jet: Arc<JetFn> = Arc::new(jet);
        let j2 = jet.clone();
        Self {
            eval: Arc::new(move |x, xi| j2(x, xi, 0).value()),
            jet: Some(jet),
            xi_order,
            x_order,
            label: label.into(),
        }
    }

    pub fn constant(v: C64) -> Self {
        Self::from_jet("constant", 0.0, 0.0, move |_, _, d| Jet::constant(v, d))
    }

    /// `ξ^n`.
    pub fn xi_power(n: u32) -> Self {
        Self::from_jet(format!("xi^{n}"), n as f64, 0.0, move |_, xi, d| {
            let v = Jet::var_xi(xi, d);
            let mut r = Jet::constant(C64::new(1.0, 0.0), d);
            for _ in 0..n {
                r = r * v;
            }
            r
        })
    }

    /// `⟨ξ⟩_h^m`.
    pub fn bracket_xi_power(h: f64, m: f64) -> Self {
        Self::from_jet(format!("<xi>_h^{m}"), m, 0.0, move |_, xi, d| {
            let v = Jet::var_xi(xi, d);
            (v * v + Jet::constant(C64::new(h * h, 0.0), d)).powf(0.5 * m)
        })
    }

    /// `⟨x⟩^m`.
    pub fn bracket_x_power(m: f64) -> Self {
        Self::from_jet(format!("<x>^{m}"), 0.0, m, move |x, _, d| {
            let v = Jet::var_x(x, d);
            (v * v + Jet::constant(C64::new(1.0, 0.0), d)).powf(0.5 * m)
        })
    }
}

impl ScalarSymbol for FnSymbol {
    fn eval(&self, x: f64, xi: f64) -> C64 {
        (self.eval)(x, xi)
    }
    fn jet(&self, x: f64, xi: f64, deg: usize) -> Option<Jet> {
        self.jet.as_ref().map(|j| j(x, xi, deg))
    }
    fn xi_order(&self) -> f64 {
        self.xi_order
    }
    fn x_order(&self) -> f64 {
        self.x_order
    }
    fn label(&self) -> String {
        self.label.clone()
    }
}

fn binom(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Central difference `δ^α_ξ δ^β_x f / (s^{α+β})` with step `s`.
fn central_mixed(s: &dyn ScalarSymbol, alpha: usize, beta: usize, x: f64, xi: f64, step: f64) -> C64 {
    let mut acc = C64::new(0.0, 0.0);
    for a in 0..=alpha {
        let wa = binom(alpha, a) * if a % 2 == 0 { 1.0 } else { -1.0 };
        let dxi = (alpha as f64 / 2.0 - a as f64) * step;
        for b in 0..=beta {
            let wb = binom(beta, b) * if b % 2 == 0 { 1.0 } else { -1.0 };
            let dx = (beta as f64 / 2.0 - b as f64) * step;
            acc += s.eval(x + dx, xi + dxi) * (wa * wb);
        }
    }
    acc / step.powi((alpha + beta) as i32)
}

/// Finite-difference `∂_ξ^α ∂_x^β s` with Richardson extrapolation.
pub fn fd_derivative(s: &dyn ScalarSymbol, alpha: usize, beta: usize, x: f64, xi: f64, base: f64) -> Result<C64> {
    if alpha + beta == 0 {
        return Ok(s.eval(x, xi));
    }
    const LEVELS: usize = 4;
    if base * 0.5f64.powi(LEVELS as i32 - 1) < 1e-8 {
        return Err(PevoError::Derivative(format!("finite-difference step {base:e} underflows")));
    }
    let mut t: Vec<C64> =
        (0..LEVELS).map(|l| central_mixed(s, alpha, beta, x, xi, base * 0.5f64.powi(l as i32))).collect();
    // Central stencils have even error expansions in the step.
    for m in 1..LEVELS {
        let f = 4f64.powi(m as i32);
        for l in (m..LEVELS).rev() {
            t[l] = (t[l] * f - t[l - 1]) / (f - 1.0);
        }
    }
    let v = t[LEVELS - 1];
    if !v.is_finite() {
        return Err(PevoError::NonFinite { context: "finite-difference derivative".into() });
    }
    Ok(v)
}

/// `∂_ξ^α ∂_x^β s(x, ξ)`: exact for `α = β = 0`, from the jet when one exists,
/// otherwise by finite differences.
pub fn symbol_derivative(s: &dyn ScalarSymbol, alpha: usize, beta: usize, x: f64, xi: f64) -> Result<C64> {
    if alpha + beta == 0 {
        return Ok(s.eval(x, xi));
    }
    if alpha + beta > 6 {
        return Err(PevoError::Derivative(format!("order {} exceeds cap 6", alpha + beta)));
    }
    if let Some(j) = s.jet(x, xi, alpha + beta) {
        if let Some(d) = j.derivative(alpha, beta) {
            return Ok(d);
        }
    }
    fd_derivative(s, alpha, beta, x, xi, 0.25)
}

/// Symbol sampled on every `(x_i, ξ_j)` node; row `i`, column `j`.
#[derive(Clone, Debug)]
pub struct SymbolGrid {
    pub table: CMat,
    pub grid: Grid,
    pub xi_order: f64,
    pub x_order: f64,
}

impl SymbolGrid {
    pub fn from_table(grid: &Grid, table: CMat, xi_order: f64, x_order: f64) -> Result<Self> {
        if table.nrows() != grid.n() || table.ncols() != grid.n() {
            return Err(PevoError::GridMismatch);
        }
        if table.iter().any(|z| !z.is_finite()) {
            return Err(PevoError::NonFinite { context: "symbol table".into() });
        }
        Ok(Self { table, grid: grid.clone(), xi_order, x_order })
    }

    pub fn from_fn(grid: &Grid, xi_order: f64, x_order: f64, f: impl Fn(f64, f64) -> C64) -> Result<Self> {
        let (x, xi) = (grid.x_nodes(), grid.xi_nodes());
        let table = CMat::from_fn(grid.n(), grid.n(), |i, j| f(x[i], xi[j]));
        Self::from_table(grid, table, xi_order, x_order)
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.table[(i, j)]
    }

    pub fn map(&self, f: impl Fn(C64) -> C64) -> Self {
        Self { table: self.table.map(f), ..self.clone() }
    }

    /// Writes `x_idx,xi_idx,re,im`, one row per node.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
        w.write_record(["x_idx", "xi_idx", "re", "im"]).map_err(csv_err)?;
        let n = self.grid.n();
        for i in 0..n {
            for j in 0..n {
                let z = self.table[(i, j)];
                w.write_record(&[i.to_string(), j.to_string(), format!("{:e}", z.re), format!("{:e}", z.im)])
                    .map_err(csv_err)?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

fn csv_err(e: csv::Error) -> PevoError {
    PevoError::Io(std::io::Error::other(e.to_string()))
}

/// Evaluate a symbol on every node.
pub fn tabulate(s: &dyn ScalarSymbol, grid: &Grid) -> Result<SymbolGrid> {
    SymbolGrid::from_fn(grid, s.xi_order(), s.x_order(), |x, xi| s.eval(x, xi))
}

/// Result of the log-log slope fits.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct DecayFit {
    pub xi_slope: f64,
    pub x_slope: f64,
    pub expected_xi_order: f64,
    pub expected_x_order: f64,
    pub pass: bool,
    pub inconclusive: bool,
}

fn ls_slope(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

/// Fit decay slopes on `|ξ| ∈ [4h, ξ_max/2]`, `|x| ∈ [1, L/2]`.
///
/// The ξ-slope is taken against `log⟨ξ⟩_h` along the largest such x, the
/// x-slope against `log⟨x⟩` along the largest such ξ.
pub fn verify_decay_orders(sg: &SymbolGrid, expected_xi_order: f64, expected_x_order: f64) -> DecayFit {
    let g = &sg.grid;
    let (x, xi) = (g.x_nodes(), g.xi_nodes());
    let xi_lo = 4.0 * g.h();
    let xi_hi = g.xi_max() / 2.0;
    let cols: Vec<usize> = (0..g.n()).filter(|&j| xi[j] >= xi_lo && xi[j] <= xi_hi).collect();
    let rows: Vec<usize> =
        (0..g.n()).filter(|&i| x[i] >= 1.0 && x[i] <= g.half_width() / 2.0).collect();
    let mut fit = DecayFit {
        xi_slope: f64::NAN,
        x_slope: f64::NAN,
        expected_xi_order,
        expected_x_order,
        pass: false,
        inconclusive: true,
    };
    if cols.len() < 2 || rows.len() < 2 {
        return fit;
    }
    let (i0, j0) = (*rows.last().unwrap(), *cols.last().unwrap());
    let along_xi: Vec<(f64, f64)> = cols
        .iter()
        .map(|&j| (g.bracket(xi[j]).ln(), sg.get(i0, j).norm()))
        .filter(|p| p.1 > 0.0)
        .map(|p| (p.0, p.1.ln()))
        .collect();
    let along_x: Vec<(f64, f64)> = rows
        .iter()
        .map(|&i| (crate::grid::bracket(x[i]).ln(), sg.get(i, j0).norm()))
        .filter(|p| p.1 > 0.0)
        .map(|p| (p.0, p.1.ln()))
        .collect();
    if along_xi.len() < 2 || along_x.len() < 2 {
        return fit;
    }
    fit.xi_slope = ls_slope(&along_xi);
    fit.x_slope = ls_slope(&along_x);
    fit.inconclusive = false;
    fit.pass = fit.xi_slope <= expected_xi_order + 0.15 && fit.x_slope <= expected_x_order + 0.15;
    fit
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derivative_examples() {
        let s = FnSymbol::bracket_xi_power(2.0, 1.0);
        let d = symbol_derivative(&s, 1, 0, 0.3, 1.7).unwrap();
        assert!((d.re - 1.7 / 2f64.hypot(1.7)).abs() < 1e-14);
        assert_eq!(symbol_derivative(&s, 0, 0, 0.3, 1.7).unwrap(), s.eval(0.3, 1.7));
    }

    #[test]
    fn fd_matches_jet() {
        let s = FnSymbol::from_jet("mix", 1.0, 0.0, |x, xi, d| {
            let xj = Jet::var_x(x, d);
            let k = Jet::var_xi(xi, d);
            (xj * k).exp() * k
        });
        let plain = FnSymbol::new("mix", 1.0, 0.0, |x, xi| C64::new((x * xi).exp() * xi, 0.0));
        for (a, b) in [(1, 0), (0, 2), (2, 1), (1, 2)] {
            let exact = symbol_derivative(&s, a, b, 0.4, 0.6).unwrap();
            let fd = symbol_derivative(&plain, a, b, 0.4, 0.6).unwrap();
            assert!((exact - fd).norm() < 1e-6 * exact.norm().max(1.0), "({a},{b})");
        }
    }

    #[test]
    fn tabulate_examples() {
        let g = Grid::new(4.0, 16, 1.0).unwrap();
        let one = tabulate(&FnSymbol::constant(C64::new(1.0, 0.0)), &g).unwrap();
        assert!(one.table.iter().all(|z| *z == C64::new(1.0, 0.0)));
        let xi = tabulate(&FnSymbol::xi_power(1), &g).unwrap();
        for i in 0..16 {
            for j in 0..16 {
                assert_eq!(xi.get(i, j).re, g.xi_nodes()[j]);
            }
        }
    }

    #[test]
    fn decay_fit_examples() {
        let g = Grid::new(16.0, 256, 1.0).unwrap();
        let sg = tabulate(&FnSymbol::bracket_xi_power(1.0, -2.0), &g).unwrap();
        let f = verify_decay_orders(&sg, -2.0, 0.0);
        assert!((f.xi_slope + 2.0).abs() < 0.05 && f.pass);
        let sg = tabulate(&FnSymbol::bracket_x_power(-0.9), &g).unwrap();
        let f = verify_decay_orders(&sg, 0.0, -0.9);
        assert!((f.x_slope + 0.9).abs() < 1e-9 && f.pass);
        let zero = tabulate(&FnSymbol::constant(C64::new(0.0, 0.0)), &g).unwrap();
        assert!(verify_decay_orders(&zero, 0.0, 0.0).inconclusive);
    }
}
