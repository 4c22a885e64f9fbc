//! Symbol calculus checked against dense matrix products: asymptotic
//! composition, conjugation by `e^Λ`, Neumann inversion and the change of
//! variable `Q(t)`.

use num_complex::Complex64 as C64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::config::GevreyConfig;
use crate::error::{PevoError, Result};
use crate::grid::Grid;
use crate::jet::Jet;
use crate::linalg::{matmul, spectral_norm, CMat, PROBE_SEED};
use crate::quantizer::{multiplier_matrix, operator_matrix, OperatorMatrix, Side};
use crate::symbols::lambda::{lambda_time, taper_jet, xi_taper_jet, LambdaLattice};
use crate::symbols::{ScalarSymbol, SymbolGrid};

/// Number of probe vectors used by every residual estimate.
pub const PROBE_COUNT: usize = 20;

/// Columns are value-space probes with complex Gaussian spectra, optionally
/// restricted to `|ξ| ≤ band`.
pub fn probe_matrix(grid: &Grid, count: usize, seed: u64, band: Option<f64>) -> CMat {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = CMat::zeros(grid.n(), count);
    for c in 0..count {
        let spec: Vec<C64> = grid
            .xi_nodes()
            .iter()
            .map(|&xi| {
                let z = C64::new(StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng));
                if band.is_some_and(|b| xi.abs() > b) {
                    C64::new(0.0, 0.0)
                } else {
                    z
                }
            })
            .collect();
        let v = grid.inverse(&spec);
        for (i, z) in v.into_iter().enumerate() {
            out[(i, c)] = z;
        }
    }
    out
}

fn col_norms(m: &CMat) -> Vec<f64> {
    m.column_iter().map(|c| c.norm()).collect()
}

/// `max_u ‖A u‖ / ‖u‖` over the probe columns.
pub fn probe_gain(a: &CMat, probes: &CMat) -> f64 {
    let ap = matmul(a, probes);
    col_norms(&ap).iter().zip(col_norms(probes)).map(|(x, y)| x / y).fold(0.0, f64::max)
}

/// `max_u ‖(A - B) u‖ / ‖A u‖` over the probe columns.
pub fn probe_relative_difference(a: &CMat, b: &CMat, probes: &CMat) -> f64 {
    let ap = matmul(a, probes);
    let d = ap.clone() - matmul(b, probes);
    col_norms(&d).iter().zip(col_norms(&ap)).map(|(x, y)| x / y.max(1e-300)).fold(0.0, f64::max)
}

/// Taylor jets of a symbol at the lattice nodes `(x_i, ξ_j)`.
pub trait NodeJets {
    fn grid(&self) -> &Grid;
    fn node_jet(&self, i: usize, j: usize, deg: usize) -> Result<Jet>;
}

/// Adapter evaluating a [`ScalarSymbol`]'s jet at grid nodes.
pub struct SymbolNodes<'a> {
    pub symbol: &'a dyn ScalarSymbol,
    pub grid: &'a Grid,
}

impl NodeJets for SymbolNodes<'_> {
    fn grid(&self) -> &Grid {
        self.grid
    }
    fn node_jet(&self, i: usize, j: usize, deg: usize) -> Result<Jet> {
        let (x, xi) = (self.grid.x_nodes()[i], self.grid.xi_nodes()[j]);
        self.symbol
            .jet(x, xi, deg)
            .ok_or_else(|| PevoError::Derivative(format!("{} has no closed-form jet", self.symbol.label())))
    }
}

/// `Λ` on the grid, optionally blended to zero near `|x| = L` and with a
/// subset of levels switched off.
///
/// Outside the dealias band `Λ` is also blended to zero before Nyquist, so
/// the ξ-periodic lattice never sees a jump where odd `ω` changes sign.
pub struct LambdaField {
    lattice: LambdaLattice,
    grid: Grid,
    taper: Option<(f64, f64)>,
    active: Vec<u32>,
    deg: usize,
}

impl LambdaField {
    /// `taper = Some((flat, edge))` multiplies by the plateau between those radii.
    pub fn new(cfg: &GevreyConfig, sign_ap: f64, grid: &Grid, taper: Option<(f64, f64)>, deg: usize) -> Result<Self> {
        let lattice = LambdaLattice::new(cfg, sign_ap, grid.x_nodes(), grid.xi_nodes(), deg)?;
        Ok(Self { lattice, grid: grid.clone(), taper, active: (1..cfg.p).collect(), deg })
    }

    /// Keep only the levels `k` in `active`.
    pub fn with_active(&self, active: &[u32]) -> LambdaFieldView<'_> {
        LambdaFieldView { field: self, active: active.to_vec() }
    }

    pub fn lattice(&self) -> &LambdaLattice {
        &self.lattice
    }

    fn taper_value(&self, x: f64) -> f64 {
        match self.taper {
            Some((f, e)) => crate::cutoffs::plateau(x, f, e),
            None => 1.0,
        }
    }

    fn value_for(&self, active: &[u32], i: usize, j: usize) -> f64 {
        let v: f64 = active.iter().map(|&k| self.lattice.value(k, i, j)).sum();
        let xi = self.grid.xi_nodes()[j];
        v * self.taper_value(self.grid.x_nodes()[i]) * crate::cutoffs::plateau(xi, self.grid.band_edge(), self.grid.xi_max())
    }

    fn jet_for(&self, active: &[u32], i: usize, j: usize, deg: usize) -> Result<Jet> {
        if deg > self.deg {
            return Err(PevoError::Derivative(format!("lattice built for degree {}, asked {deg}", self.deg)));
        }
        let mut acc = Jet::zero(deg);
        for &k in active {
            acc = acc + self.lattice.jet(k, i, j, deg);
        }
        let acc = xi_taper_jet(acc, self.grid.xi_nodes()[j], self.grid.band_edge(), self.grid.xi_max());
        Ok(match self.taper {
            Some((f, e)) => taper_jet(acc, self.grid.x_nodes()[i], f, e),
            None => acc,
        })
    }

    /// Table of `Λ(x_i, ξ_j)` over the active levels.
    pub fn table(&self) -> SymbolGrid {
        self.with_active(&self.active).table()
    }
}

impl NodeJets for LambdaField {
    fn grid(&self) -> &Grid {
        &self.grid
    }
    fn node_jet(&self, i: usize, j: usize, deg: usize) -> Result<Jet> {
        self.jet_for(&self.active, i, j, deg)
    }
}

/// A [`LambdaField`] restricted to some levels.
pub struct LambdaFieldView<'a> {
    field: &'a LambdaField,
    active: Vec<u32>,
}

impl LambdaFieldView<'_> {
    pub fn table(&self) -> SymbolGrid {
        let n = self.field.grid.n();
        let t = CMat::from_fn(n, n, |i, j| C64::new(self.field.value_for(&self.active, i, j), 0.0));
        SymbolGrid { table: t, grid: self.field.grid.clone(), xi_order: f64::NAN, x_order: f64::NAN }
    }
}

impl NodeJets for LambdaFieldView<'_> {
    fn grid(&self) -> &Grid {
        &self.field.grid
    }
    fn node_jet(&self, i: usize, j: usize, deg: usize) -> Result<Jet> {
        self.field.jet_for(&self.active, i, j, deg)
    }
}

/// Stratified partial sums and their residual against exact matrices.
#[derive(Clone, Debug)]
pub struct ExpansionResult {
    /// `terms[n]` collects `|α + β| = n`.
    pub terms: Vec<SymbolGrid>,
    pub n_terms: usize,
    /// `max_u ‖(exact − op(Σ terms)) u‖ / ‖u‖` on band-limited probes.
    pub residual_estimate: f64,
    /// Same difference relative to `‖exact u‖`.
    pub relative_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpansionSummary {
    pub n_terms: usize,
    pub residual_estimate: f64,
    pub relative_residual: f64,
    pub stratum_max_abs: Vec<f64>,
}

impl ExpansionResult {
    pub fn total(&self) -> SymbolGrid {
        let mut t = self.terms[0].clone();
        for s in &self.terms[1..] {
            t.table += &s.table;
        }
        t
    }

    pub fn summary(&self) -> ExpansionSummary {
        ExpansionSummary {
            n_terms: self.n_terms,
            residual_estimate: self.residual_estimate,
            relative_residual: self.relative_residual,
            stratum_max_abs: self.terms.iter().map(|t| crate::linalg::max_abs(&t.table)).collect(),
        }
    }
}

fn fact(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

fn minus_i_pow(n: usize) -> C64 {
    [C64::new(1.0, 0.0), C64::new(0.0, -1.0), C64::new(-1.0, 0.0), C64::new(0.0, 1.0)][n % 4]
}

fn nth_diff_xi(j: Jet, n: usize) -> Jet {
    (0..n).fold(j, |a, _| a.diff_xi())
}

fn nth_diff_x(j: Jet, n: usize) -> Jet {
    (0..n).fold(j, |a, _| a.diff_x())
}

fn band_probes(grid: &Grid) -> CMat {
    probe_matrix(grid, PROBE_COUNT, PROBE_SEED, Some(grid.band_edge()))
}

fn residuals(exact: &CMat, approx: &CMat, grid: &Grid) -> (f64, f64) {
    let pr = band_probes(grid);
    let d = exact - approx;
    (probe_gain(&d, &pr), probe_relative_difference(exact, approx, &pr))
}

/// `s = Σ_{α < N} (α!)^{-1} ∂_ξ^α p D_x^α q`, one stratum per α.
pub fn compose_asymptotic(p: &dyn ScalarSymbol, q: &dyn ScalarSymbol, n_terms: usize, grid: &Grid) -> Result<ExpansionResult> {
    if n_terms == 0 || n_terms > 4 {
        return Err(PevoError::InvalidConfig(format!("N_terms must be in 1..=4, got {n_terms}")));
    }
    let deg = n_terms - 1;
    let n = grid.n();
    let (x, xi) = (grid.x_nodes(), grid.xi_nodes());
    let mut terms = vec![CMat::zeros(n, n); n_terms];
    for i in 0..n {
        for j in 0..n {
            let pj = p.jet(x[i], xi[j], deg);
            let qj = q.jet(x[i], xi[j], deg);
            for (a, t) in terms.iter_mut().enumerate() {
                let dp = match &pj {
                    Some(jt) => jt.derivative(a, 0).unwrap(),
                    None => crate::symbols::symbol_derivative(p, a, 0, x[i], xi[j])?,
                };
                let dq = match &qj {
                    Some(jt) => jt.derivative(0, a).unwrap(),
                    None => crate::symbols::symbol_derivative(q, 0, a, x[i], xi[j])?,
                };
                t[(i, j)] = dp * dq * minus_i_pow(a) / fact(a);
            }
        }
    }
    let terms: Vec<SymbolGrid> = terms
        .into_iter()
        .enumerate()
        .map(|(a, t)| SymbolGrid {
            table: t,
            grid: grid.clone(),
            xi_order: p.xi_order() + q.xi_order() - a as f64,
            x_order: p.x_order() + q.x_order() - a as f64,
        })
        .collect();
    let pq = crate::symbols::tabulate(p, grid)?;
    let qq = crate::symbols::tabulate(q, grid)?;
    let exact = matmul(&operator_matrix(&pq, Side::Left).entries, &operator_matrix(&qq, Side::Left).entries);
    let mut res = ExpansionResult { terms, n_terms, residual_estimate: 0.0, relative_residual: 0.0 };
    let approx = operator_matrix(&res.total(), Side::Left).entries;
    let (a, r) = residuals(&exact, &approx, grid);
    res.residual_estimate = a;
    res.relative_residual = r;
    Ok(res)
}

/// Strata of `e^Λ p ^R(e^{-Λ})`:
/// `Σ_{α+β=n} (α!β!)^{-1} ∂_ξ^α{∂_ξ^β e^Λ · D_x^β p · D_x^α e^{-Λ}}`.
///
/// Residual measured against `op_left(e^Λ)·op_left(p)·op_reverse(e^{-Λ})`.
pub fn conjugation_expansion(p: &dyn NodeJets, lambda: &dyn NodeJets, n_terms: usize) -> Result<ExpansionResult> {
    if n_terms == 0 || n_terms > 4 {
        return Err(PevoError::InvalidConfig(format!("N_terms must be in 1..=4, got {n_terms}")));
    }
    let grid = lambda.grid().clone();
    let n = grid.n();
    let deg = 2 * (n_terms - 1);
    let mut terms = vec![CMat::zeros(n, n); n_terms];
    let mut p_tab = CMat::zeros(n, n);
    let mut e_tab = CMat::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let lj = lambda.node_jet(i, j, deg)?;
            let pj = p.node_jet(i, j, deg)?;
            p_tab[(i, j)] = pj.value();
            e_tab[(i, j)] = lj.value();
            let ep = lj.exp();
            let em = (-lj).exp();
            for (s, t) in terms.iter_mut().enumerate() {
                let mut acc = C64::new(0.0, 0.0);
                for alpha in 0..=s {
                    let beta = s - alpha;
                    let prod = nth_diff_xi(ep, beta)
                        * nth_diff_x(pj, beta).scale(minus_i_pow(beta))
                        * nth_diff_x(em, alpha).scale(minus_i_pow(alpha));
                    acc += prod.derivative(alpha, 0).unwrap() / (fact(alpha) * fact(beta));
                }
                t[(i, j)] = acc;
            }
        }
    }
    let mk = |t: CMat| SymbolGrid { table: t, grid: grid.clone(), xi_order: f64::NAN, x_order: f64::NAN };
    let terms: Vec<SymbolGrid> = terms.into_iter().map(mk).collect();
    let lam = mk(e_tab);
    let e_left = operator_matrix(&lam.map(|z| z.exp()), Side::Left).entries;
    let e_rev = operator_matrix(&lam.map(|z| (-z).exp()), Side::Reverse).entries;
    let p_op = operator_matrix(&mk(p_tab), Side::Left).entries;
    let exact = matmul(&matmul(&e_left, &p_op), &e_rev);
    let mut res = ExpansionResult { terms, n_terms, residual_estimate: 0.0, relative_residual: 0.0 };
    let approx = operator_matrix(&res.total(), Side::Left).entries;
    let (a, r) = residuals(&exact, &approx, &grid);
    res.residual_estimate = a;
    res.relative_residual = r;
    Ok(res)
}

/// `-∂_ξ D_x Λ = i ∂_ξ ∂_x Λ`, the leading part of `r = e^Λ ^R(e^{-Λ}) - I`.
pub fn r_symbol_leading(lambda: &dyn NodeJets) -> Result<SymbolGrid> {
    let grid = lambda.grid().clone();
    let n = grid.n();
    let mut t = CMat::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let d = lambda.node_jet(i, j, 2)?.derivative(1, 1).unwrap();
            t[(i, j)] = C64::new(0.0, 1.0) * d;
        }
    }
    Ok(SymbolGrid { table: t, grid, xi_order: -1.0, x_order: f64::NAN })
}

/// Inverse of `op_left(e^Λ)` by a Neumann series.
#[derive(Clone, Debug)]
pub struct InversionResult {
    pub e_left: OperatorMatrix,
    pub inverse_matrix: OperatorMatrix,
    pub neumann_terms_used: usize,
    /// `max` of the two residuals below.
    pub residual: f64,
    /// `max_u ‖(E E⁻¹ − I)u‖/‖u‖`.
    pub residual_left: f64,
    /// `max_u ‖(E⁻¹ E − I)u‖/‖u‖`.
    pub residual_right: f64,
    /// Spectral-norm estimate of `r = E_L E_R − I`.
    pub r_spectral_proxy: f64,
    /// Exact spectral radius of `r` (dense eigensolve), when requested.
    pub r_spectral_radius: Option<f64>,
    /// `power_norms[J] = max_u ‖(-r)^J u‖/‖u‖`; equals the left residual after `J` terms.
    pub power_norms: Vec<f64>,
    pub ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InversionSummary {
    pub h: f64,
    #[serde(rename = "J")]
    pub neumann_terms_used: usize,
    pub residual: f64,
    pub residual_left: f64,
    pub residual_right: f64,
    pub r_spectral_proxy: f64,
    pub r_spectral_radius: Option<f64>,
    pub ok: bool,
}

impl InversionResult {
    pub fn summary(&self) -> InversionSummary {
        InversionSummary {
            h: self.e_left.grid.h(),
            neumann_terms_used: self.neumann_terms_used,
            residual: self.residual,
            residual_left: self.residual_left,
            residual_right: self.residual_right,
            r_spectral_proxy: self.r_spectral_proxy,
            r_spectral_radius: self.r_spectral_radius,
            ok: self.ok,
        }
    }

    /// Left residual of the series truncated after `terms` terms.
    pub fn residual_with_terms(&self, terms: usize) -> Option<f64> {
        self.power_norms.get(terms).copied()
    }
}

/// Default inversion tolerance.
pub const INVERSION_TOL: f64 = 1e-6;

/// Options for [`invert_e_lambda`].
#[derive(Debug, Clone, Copy)]
pub struct InversionOptions {
    /// Acceptance threshold on the reported residual.
    pub tol: f64,
    /// Stop the series once the probe norm of `(-r)^J` drops below this.
    pub stop: f64,
    pub j_max: usize,
    /// Always accumulate at least this many powers (for fixed-J comparisons).
    pub min_terms: usize,
    pub exact_radius: bool,
}

impl Default for InversionOptions {
    fn default() -> Self {
        Self { tol: INVERSION_TOL, stop: 1e-12, j_max: 30, min_terms: 6, exact_radius: false }
    }
}

/// `E⁻¹ = ^R(e^{-Λ}) Σ_{j<J} (-r)^j` with `r = op_left(e^Λ) op_reverse(e^{-Λ}) − I`.
pub fn invert_e_lambda(lambda: &SymbolGrid, opts: InversionOptions) -> Result<InversionResult> {
    let grid = lambda.grid.clone();
    let n = grid.n();
    let e_left = operator_matrix(&lambda.map(|z| z.exp()), Side::Left);
    let e_rev = operator_matrix(&lambda.map(|z| (-z).exp()), Side::Reverse);
    let id = CMat::identity(n, n);
    let minus_r = &id - matmul(&e_left.entries, &e_rev.entries);
    let probes = probe_matrix(&grid, PROBE_COUNT, PROBE_SEED, None);
    let base = col_norms(&probes);
    let gain = |m: &CMat| col_norms(m).iter().zip(&base).map(|(a, b)| a / b).fold(0.0, f64::max);
    let mut powers = vec![1.0];
    let mut cur = probes.clone();
    let mut terms = 1;
    let mut growth_run = 0;
    loop {
        cur = matmul(&minus_r, &cur);
        let g = gain(&cur);
        powers.push(g);
        let last = powers[powers.len() - 2];
        growth_run = if g > last { growth_run + 1 } else { 0 };
        if growth_run >= 3 && g > 1.0 {
            return Err(PevoError::HTooSmall {
                detail: format!(
                    "Neumann series diverges at h = {}: probe norm of (-r)^J grows by {:.3} per term",
                    grid.h(),
                    g / last
                ),
            });
        }
        if !g.is_finite() {
            return Err(PevoError::HTooSmall { detail: format!("Neumann series overflow at h = {}", grid.h()) });
        }
        if (g < opts.stop && terms >= opts.min_terms) || terms >= opts.j_max {
            break;
        }
        terms += 1;
    }
    // Horner: S = I + (-r)(I + (-r)(…)).
    let mut s = id.clone();
    for _ in 1..terms {
        s = &id + matmul(&minus_r, &s);
    }
    let inv = matmul(&e_rev.entries, &s);
    let left = matmul(&e_left.entries, &inv) - &id;
    let right = matmul(&inv, &e_left.entries) - &id;
    let residual_left = probe_gain(&left, &probes);
    let residual_right = probe_gain(&right, &probes);
    let residual = residual_left.max(residual_right);
    let r_spectral_proxy = spectral_norm(&minus_r, 30);
    let r_spectral_radius = if opts.exact_radius && n <= 256 {
        Some(crate::linalg::eigenvalues(&minus_r).iter().map(|z| z.norm()).fold(0.0, f64::max))
    } else {
        None
    };
    Ok(InversionResult {
        e_left,
        inverse_matrix: OperatorMatrix { entries: inv, grid: grid.clone(), label: "e_lambda_inverse".into() },
        neumann_terms_used: terms,
        residual,
        residual_left,
        residual_right,
        r_spectral_proxy,
        r_spectral_radius,
        power_norms: powers,
        ok: residual < opts.tol,
    })
}

/// `e^{±Λ_{K,ρ'}(t, ξ_j)}` on the frequency lattice.
pub fn time_weight(t: f64, cfg: &GevreyConfig, grid: &Grid, sign: f64) -> Result<Vec<C64>> {
    grid.xi_nodes()
        .iter()
        .map(|&xi| {
            let e = sign * lambda_time(t, xi, cfg)?;
            if e > crate::norms::EXPONENT_GUARD {
                return Err(PevoError::WeightOverflow { exponent: e });
            }
            Ok(C64::new(e.exp(), 0.0))
        })
        .collect()
}

/// `Q(t) = e^{Λ_{K,ρ'}}(t, D) ∘ op_left(e^Λ)`.
pub fn build_q(t: f64, cfg: &GevreyConfig, inversion: &InversionResult) -> Result<OperatorMatrix> {
    let grid = &inversion.e_left.grid;
    let w = multiplier_matrix(grid, &time_weight(t, cfg, grid, 1.0)?);
    let mut q = w.compose(&inversion.e_left)?;
    q.label = format!("Q(t={t})");
    Ok(q)
}

/// `Q(t)⁻¹ = E⁻¹ ∘ e^{-Λ_{K,ρ'}}(t, D)`.
pub fn build_q_inverse(t: f64, cfg: &GevreyConfig, inversion: &InversionResult) -> Result<OperatorMatrix> {
    let grid = &inversion.e_left.grid;
    let w = multiplier_matrix(grid, &time_weight(t, cfg, grid, -1.0)?);
    let mut q = inversion.inverse_matrix.compose(&w)?;
    q.label = format!("Q(t={t})^-1");
    Ok(q)
}

/// `max_u ‖(Q Q⁻¹ − I) u‖/‖u‖` on the standard probes.
pub fn q_roundtrip_residual(q: &OperatorMatrix, q_inv: &OperatorMatrix) -> f64 {
    let n = q.grid.n();
    let d = matmul(&q.entries, &q_inv.entries) - CMat::identity(n, n);
    probe_gain(&d, &probe_matrix(&q.grid, PROBE_COUNT, PROBE_SEED, None))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symbols::FnSymbol;

    #[test]
    fn compose_with_one_is_exact() {
        let g = Grid::new(6.0, 32, 1.0).unwrap();
        let p = FnSymbol::from_jet("p", 1.0, 0.0, |x, xi, d| {
            Jet::var_xi(xi, d) * (Jet::var_x(x, d) * 0.3).exp()
        });
        let one = FnSymbol::constant(C64::new(1.0, 0.0));
        let r = compose_asymptotic(&p, &one, 3, &g).unwrap();
        assert!(r.residual_estimate <= 1e-10);
        assert!(crate::linalg::max_abs(&r.terms[1].table) == 0.0);
    }

    #[test]
    fn leibniz_rule_residual() {
        // p = ξ, q = a(x) band-limited on the periodic box.
        let l = 6.0;
        let g = Grid::new(l, 64, 1.0).unwrap();
        let k0 = std::f64::consts::PI / l * 2.0;
        let p = FnSymbol::xi_power(1);
        let q = FnSymbol::from_jet("a", 0.0, 0.0, move |x, _, d| {
            (Jet::var_x(x, d) * C64::new(0.0, k0)).exp() * 0.5 + Jet::constant(C64::new(1.0, 0.0), d)
        });
        let r = compose_asymptotic(&p, &q, 2, &g).unwrap();
        assert!(r.residual_estimate <= 1e-8, "{}", r.residual_estimate);
        let r1 = compose_asymptotic(&p, &q, 1, &g).unwrap();
        assert!(r1.residual_estimate > 1e-3);
    }

    #[test]
    fn multiplier_lambda_inverts_exactly() {
        let g = Grid::new(4.0, 32, 2.0).unwrap();
        let lam = SymbolGrid::from_fn(&g, 0.0, 0.0, |_, xi| C64::new(0.3 * g.bracket(xi).sqrt(), 0.0)).unwrap();
        let inv = invert_e_lambda(&lam, InversionOptions::default()).unwrap();
        assert!(inv.power_norms[1] < 1e-12);
        assert!(inv.residual < 1e-12);
        let zero = lam.map(|_| C64::new(0.0, 0.0));
        let inv0 = invert_e_lambda(&zero, InversionOptions::default()).unwrap();
        assert!(inv0.residual < 1e-13);
    }

    #[test]
    fn q_identity_and_weight_only() {
        let g = Grid::new(4.0, 32, 2.0).unwrap();
        let zero = SymbolGrid::from_fn(&g, 0.0, 0.0, |_, _| C64::new(0.0, 0.0)).unwrap();
        let inv = invert_e_lambda(&zero, InversionOptions::default()).unwrap();
        let cfg = GevreyConfig { k: 0.0, rho_prime: 0.0, h: 2.0, ..GevreyConfig::kdv3() };
        let q = build_q(0.05, &cfg, &inv).unwrap();
        assert!(crate::linalg::fro(&(q.entries.clone() - CMat::identity(32, 32))) < 1e-12);
        let cfg = GevreyConfig { rho_prime: 0.4, ..cfg };
        let q = build_q(0.05, &cfg, &inv).unwrap();
        let qi = build_q_inverse(0.05, &cfg, &inv).unwrap();
        assert!(q_roundtrip_residual(&qi, &q) < 1e-10);
    }
}
