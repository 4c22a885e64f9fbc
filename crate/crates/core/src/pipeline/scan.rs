//! Positivity-from-below checks on the lattice.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::assembly::ConjugatedPieces;
use super::{spectral_symbol, Layout};
use crate::calculus::{invert_e_lambda, time_weight, InversionOptions, LambdaField};
use crate::config::GevreyConfig;
use crate::cutoffs::{omega, psi};
use crate::error::Result;
use crate::grid::{bracket, Grid};
use crate::problems::Problem;

pub type RMat = DMatrix<f64>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub t: f64,
    pub x: f64,
    pub xi: f64,
    pub value: f64,
    pub target: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanReport {
    /// `level-j`, `layer` or `K`.
    pub name: String,
    /// `min (value − target)` over the scanned points.
    pub min_slack: f64,
    /// Same minimum, each point divided by its target.
    pub min_relative_slack: f64,
    pub points: usize,
    pub pass: bool,
    /// Worst point, reported when the scan fails.
    pub witness: Option<Witness>,
}

struct Tracker {
    name: String,
    min: f64,
    min_rel: f64,
    points: usize,
    worst: Option<Witness>,
}

impl Tracker {
    fn new(name: impl Into<String>) -> Self {
        Self { name: name.into(), min: f64::INFINITY, min_rel: f64::INFINITY, points: 0, worst: None }
    }
    fn push(&mut self, t: f64, x: f64, xi: f64, value: f64, target: f64) {
        self.points += 1;
        let s = value - target;
        if target > 0.0 {
            self.min_rel = self.min_rel.min(s / target);
        }
        if s < self.min || self.worst.is_none() {
            self.min = s;
            self.worst = Some(Witness { t, x, xi, value, target });
        }
    }
    fn finish(self) -> ScanReport {
        let pass = self.min >= 0.0 && self.min.is_finite();
        ScanReport {
            name: self.name,
            min_slack: self.min,
            min_relative_slack: if self.min_rel.is_finite() { self.min_rel } else { 0.0 },
            points: self.points,
            pass,
            witness: if pass { None } else { self.worst },
        }
    }
}

/// Frequency indices with `2h ≤ |ξ| ≤ band edge`.
pub fn scan_xi_indices(grid: &Grid) -> Vec<usize> {
    let edge = grid.band_edge() + 1e-12;
    (0..grid.n())
        .filter(|&j| {
            let a = grid.xi_nodes()[j].abs();
            a >= 2.0 * grid.h() && a <= edge
        })
        .collect()
}

/// `∂_ξ(ξ^p ∂_x Λ_k)` for the (tapered) level `k`, real.
pub fn explicit_table(field: &LambdaField, p: u32, k: u32) -> Result<RMat> {
    use crate::calculus::NodeJets;
    let grid = field.grid().clone();
    let view = field.with_active(&[k]);
    let n = grid.n();
    let mut t = RMat::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let xi = grid.xi_nodes()[j];
            let jt = view.node_jet(i, j, 2)?;
            let lx = jt.derivative(0, 1).unwrap().re;
            let lxx = jt.derivative(1, 1).unwrap().re;
            t[(i, j)] = p as f64 * xi.powi(p as i32 - 1) * lx + xi.powi(p as i32) * lxx;
        }
    }
    Ok(t)
}

/// `Re(i τ₁ a_{p-j}(t,x) ξ^{p-j}) = −Im(τ₁ a_{p-j}) ξ^{p-j}`.
fn coefficient_part(prob: &Problem, layout: &Layout, j: u32, t: f64, x: f64, xi: f64) -> f64 {
    -(prob.lower_value(j, t, x) * layout.coefficient_taper(x)).im * xi.powi(prob.p as i32 - j as i32)
}

/// Precomputed tables shared by the level scans.
pub struct ScanContext {
    pub prob: Problem,
    pub grid: Grid,
    pub layout: Layout,
    pub ts: Vec<f64>,
    /// `explicit[k-1] = ∂_ξ(ξ^p ∂_x Λ_k)`.
    pub explicit: Vec<RMat>,
    /// `partial[j-2]`: pieces conjugated by levels `< j`, for `j ≥ 2`.
    pub partial: Vec<ConjugatedPieces>,
}

impl ScanContext {
    /// Explicit tables for every level; partial conjugations are added with
    /// [`ScanContext::add_partial`] as the constants become known.
    pub fn new(prob: &Problem, grid: &Grid, layout: Layout, ts: Vec<f64>) -> Result<Self> {
        let field = LambdaField::new(&prob.cfg, prob.sign_ap(), grid, layout.lambda_taper(), 2)?;
        let explicit = (1..prob.p).map(|k| explicit_table(&field, prob.p, k)).collect::<Result<Vec<_>>>()?;
        Ok(Self { prob: prob.clone(), grid: grid.clone(), layout, ts, explicit, partial: Vec::new() })
    }

    /// Refresh the explicit table of level `k` after `M_{p-k}` changed.
    pub fn set_constants(&mut self, cfg: &GevreyConfig, k: u32) -> Result<()> {
        self.prob.cfg = cfg.clone();
        let field = LambdaField::new(cfg, self.prob.sign_ap(), &self.grid, self.layout.lambda_taper(), 2)?;
        self.explicit[k as usize - 1] = explicit_table(&field, self.prob.p, k)?;
        Ok(())
    }

    /// Conjugate by the levels `< j` (their `M` must already be in `prob.cfg`).
    pub fn add_partial(&mut self, j: u32) -> Result<f64> {
        let active: Vec<u32> = (1..j).collect();
        let field = LambdaField::new(&self.prob.cfg, self.prob.sign_ap(), &self.grid, self.layout.lambda_taper(), 0)?;
        let inv = invert_e_lambda(&field.with_active(&active).table(), InversionOptions::default())?;
        let pieces = ConjugatedPieces::build(
            &self.prob,
            &self.grid,
            &self.layout,
            &inv.e_left.entries,
            &inv.inverse_matrix.entries,
        )?;
        if self.partial.len() < (j - 1) as usize {
            self.partial.push(pieces);
        } else {
            self.partial[j as usize - 2] = pieces;
        }
        Ok(inv.residual)
    }

    /// `−a_p(t) ∂_ξ(ξ^p ∂_x λ_{p-k})` at a node.
    pub fn explicit(&self, k: u32, t: f64, i: usize, j: usize) -> f64 {
        -self.prob.leading(t) * self.explicit[k as usize - 1][(i, j)]
    }

    /// Real part of the symbol of `W E_{<j} (iA) E_{<j}⁻¹ W⁻¹` at time `t`.
    fn partial_symbol(&self, j: u32, t: f64) -> Result<RMat> {
        let pieces = &self.partial[j as usize - 2];
        let mut m = pieces.combine(&self.prob, t);
        let w = time_weight(t, &self.prob.cfg, &self.grid, 1.0)?;
        let n = self.grid.n();
        for l in 0..n {
            for r in 0..n {
                m[(r, l)] *= w[r] / w[l];
            }
        }
        Ok(spectral_symbol(&self.grid, &m).map(|z| z.re))
    }

    /// `R_j(t)`: the measured part of level `j` not written out explicitly.
    pub fn residual_table(&self, j: u32, t: f64) -> Result<RMat> {
        let mut r = self.partial_symbol(j, t)?;
        let (x, xi) = (self.grid.x_nodes(), self.grid.xi_nodes());
        let n = self.grid.n();
        for a in 0..n {
            for b in 0..n {
                let mut known = 0.0;
                for i in 1..=self.prob.p {
                    known += coefficient_part(&self.prob, &self.layout, i, t, x[a], xi[b]);
                }
                for k in 1..j {
                    known += self.explicit(k, t, a, b);
                }
                r[(a, b)] -= known;
            }
        }
        Ok(r)
    }

    /// `sup |R_j| ⟨ξ⟩_h^{-(p-j)} ⟨x⟩^{s_j}` over the physical scan region and `ts`.
    pub fn measured_constant(&self, j: u32) -> Result<f64> {
        let s = self.prob.cfg.decay(j);
        let ord = (self.prob.p - j) as i32;
        let cols = scan_xi_indices(&self.grid);
        let mut sup = 0.0f64;
        for &t in &self.ts {
            let r = self.residual_table(j, t)?;
            for (a, &x) in self.grid.x_nodes().iter().enumerate() {
                if !self.layout.physical(x) {
                    continue;
                }
                for &b in &cols {
                    let xi = self.grid.xi_nodes()[b];
                    sup = sup.max(r[(a, b)].abs() * self.grid.bracket(xi).powi(-ord) * bracket(x).powf(s));
                }
            }
        }
        Ok(sup)
    }
}

/// Level-`j` check: `Re ã_{p-j} ≥ ½⟨x⟩^{-s_j}|ξ|^{p-j}` on `|x| ≤ l1`, `|ξ| ≥ 2h`.
pub fn positivity_scan(ctx: &ScanContext, level: u32) -> Result<ScanReport> {
    let prob = &ctx.prob;
    let s = prob.cfg.decay(level);
    let ord = (prob.p - level) as i32;
    let cols = scan_xi_indices(&ctx.grid);
    let mut tr = Tracker::new(format!("level-{level}"));
    for &t in &ctx.ts {
        let r = if level >= 2 { Some(ctx.residual_table(level, t)?) } else { None };
        for (a, &x) in ctx.grid.x_nodes().iter().enumerate() {
            if !ctx.layout.physical(x) {
                continue;
            }
            for &b in &cols {
                let xi = ctx.grid.xi_nodes()[b];
                let mut v = coefficient_part(prob, &ctx.layout, level, t, x, xi) + ctx.explicit(level, t, a, b);
                if let Some(r) = &r {
                    v += r[(a, b)];
                }
                tr.push(t, x, xi, v, 0.5 * bracket(x).powf(-s) * xi.abs().powi(ord));
            }
        }
    }
    Ok(tr.finish())
}

/// Summed targets of every level.
fn summed_target(cfg: &GevreyConfig, x: f64, xi: f64) -> f64 {
    (1..cfg.p).map(|j| 0.5 * bracket(x).powf(-cfg.decay(j)) * xi.abs().powi((cfg.p - j) as i32)).sum()
}

/// Real part of the full conjugated symbol at each `t`, for the layer scan.
pub fn full_symbol_tables(asm: &super::Assembly, ts: &[f64]) -> Result<Vec<RMat>> {
    ts.iter()
        .map(|&t| Ok(spectral_symbol(&asm.grid, &asm.conjugated_spectral(t)?).map(|z| z.re)))
        .collect()
}

/// Outside the physical region: `Re σ + γ₀(1-τ₁)⟨ξ⟩_h^{p-1}` against the summed targets.
pub fn layer_scan(asm: &super::Assembly, tables: &[RMat], ts: &[f64], gamma: f64) -> ScanReport {
    let grid = &asm.grid;
    let p = asm.prob.p as i32;
    let cols = scan_xi_indices(grid);
    let mut tr = Tracker::new("layer");
    for (table, &t) in tables.iter().zip(ts) {
        for (a, &x) in grid.x_nodes().iter().enumerate() {
            if asm.layout.physical(x) {
                continue;
            }
            for &b in &cols {
                let xi = grid.xi_nodes()[b];
                let v = table[(a, b)] + gamma * asm.layout.sponge_profile(x) * grid.bracket(xi).powi(p - 1);
                tr.push(t, x, xi, v, summed_target(&asm.prob.cfg, x, xi));
            }
        }
    }
    tr.finish()
}

/// `B(t,x,ξ) = Σ_j p|a_p||ξ|^{p-1} M_{p-j} ⟨ξ⟩_h^{1-j} ⟨x⟩^{-s_j} |ω(ξ/h)| [1 − ψ(⟨x⟩/⟨ξ⟩_h^{p-1})]`.
pub fn b_symbol(prob: &Problem, t: f64, x: f64, xi: f64) -> f64 {
    let cfg = &prob.cfg;
    let p = cfg.p;
    let bx = bracket(x);
    let bxi = crate::grid::bracket_h(xi, cfg.h);
    let cut = 1.0 - psi(bx / bxi.powi(p as i32 - 1));
    if cut == 0.0 {
        return 0.0;
    }
    let w = omega(xi / cfg.h, cfg.r_ap, prob.sign_ap(), p).abs();
    let lead = p as f64 * prob.leading(t).abs() * xi.abs().powi(p as i32 - 1) * w * cut;
    (1..p).map(|j| lead * cfg.m_for(j) * bxi.powi(1 - j as i32) * bx.powf(-cfg.decay(j))).sum()
}

/// Frequencies of the extended lattice: the grid band plus a log tail to 10⁴.
pub fn extended_xis(grid: &Grid) -> Vec<f64> {
    let mut v: Vec<f64> = grid.band_indices().iter().map(|&j| grid.xi_nodes()[j].abs()).filter(|&a| a > 0.0).collect();
    let start = grid.band_edge().max(1.0);
    for i in 1..=48 {
        v.push(start * (1e4 / start).powf(i as f64 / 48.0));
    }
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    v.dedup();
    v
}

/// Positions where `1 − ψ` may be nonzero for `ξ`, plus a margin.
fn extended_xs(cfg: &GevreyConfig, xi: f64) -> Vec<f64> {
    let top = crate::grid::bracket_h(xi, cfg.h).powi(cfg.p as i32 - 1);
    let lo = (0.5 * top).max(1.0);
    (0..=64).map(|i| lo * (2.0 * top / lo).powf(i as f64 / 64.0)).collect()
}

/// `K₀ = sup B / ⟨ξ⟩_h^{(p-1)(1-σ)}` over the extended lattice and `ts`.
pub fn k_floor(prob: &Problem, grid: &Grid, ts: &[f64]) -> f64 {
    let ord = prob.cfg.time_weight_order();
    let mut sup = 0.0f64;
    for &t in ts {
        for xi in extended_xis(grid) {
            let den = crate::grid::bracket_h(xi, prob.cfg.h).powf(ord);
            for x in extended_xs(&prob.cfg, xi) {
                sup = sup.max(b_symbol(prob, t, x, xi) / den);
            }
        }
    }
    sup
}

/// `K⟨ξ⟩_h^{(p-1)(1-σ)} − B ≥ 0` on the extended lattice.
pub fn k_scan(prob: &Problem, grid: &Grid, ts: &[f64]) -> ScanReport {
    let ord = prob.cfg.time_weight_order();
    let mut tr = Tracker::new("K");
    for &t in ts {
        for xi in extended_xis(grid) {
            let v = prob.cfg.k * crate::grid::bracket_h(xi, prob.cfg.h).powf(ord);
            for x in extended_xs(&prob.cfg, xi) {
                tr.push(t, x, xi, v, b_symbol(prob, t, x, xi));
            }
        }
    }
    tr.finish()
}

