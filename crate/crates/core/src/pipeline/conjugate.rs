//! Conjugation of the principal part by `e^Λ`, checked stratum by stratum.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use super::constants::{leading_symbol, EXPANSION_TERMS, EXPANSION_TOL};
use super::Layout;
use crate::calculus::{conjugation_expansion, ExpansionSummary, LambdaField, NodeJets, SymbolNodes};
use crate::config::BoundaryConfig;
use crate::error::Result;
use crate::grid::Grid;
use crate::problems::Problem;
use crate::symbols::SymbolGrid;

/// Stratum-1 agreement required on `|ξ| ≥ 2h`.
pub const STRATUM_ONE_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConjugationReport {
    pub h: f64,
    pub expansion: ExpansionSummary,
    /// `max |stratum₁ − i a_p ∂_ξ(ξ^p ∂_xΛ)| / max |i a_p ∂_ξ(ξ^p ∂_xΛ)|` on `|ξ| ≥ 2h`.
    pub stratum_one_error: f64,
    pub stratum_one_pass: bool,
    pub residual_pass: bool,
}

/// Expand `e^Λ # a_p ξ^p # e^{-Λ}` with the problem's constants on `grid`.
///
/// Returns the report and the summed symbol.
pub fn conjugation_report(prob: &Problem, grid: &Grid, boundary: &BoundaryConfig) -> Result<(ConjugationReport, SymbolGrid)> {
    let layout = Layout::new(boundary, grid.half_width());
    let cfg = &prob.cfg;
    let field = LambdaField::new(cfg, prob.sign_ap(), grid, layout.lambda_taper(), 2 * (EXPANSION_TERMS - 1))?;
    let lead = leading_symbol(prob);
    let res = conjugation_expansion(&SymbolNodes { symbol: &lead, grid }, &field, EXPANSION_TERMS)?;
    let a = prob.leading(0.0);
    let p = prob.p as i32;
    let (mut diff, mut scale) = (0.0f64, 0.0f64);
    for (j, &xi) in grid.xi_nodes().iter().enumerate() {
        if xi.abs() < 2.0 * grid.h() {
            continue;
        }
        for i in 0..grid.n() {
            let jet = field.node_jet(i, j, 2)?;
            let dx = jet.derivative(0, 1).expect("degree 2");
            let dxi_dx = jet.derivative(1, 1).expect("degree 2");
            let direct = C64::new(0.0, a) * (dx * (p as f64 * xi.powi(p - 1)) + dxi_dx * xi.powi(p));
            diff = diff.max((res.terms[1].get(i, j) - direct).norm());
            scale = scale.max(direct.norm());
        }
    }
    let stratum_one_error = if scale > 0.0 { diff / scale } else { diff };
    let expansion = res.summary();
    let report = ConjugationReport {
        h: grid.h(),
        stratum_one_pass: stratum_one_error <= STRATUM_ONE_TOL,
        residual_pass: expansion.relative_residual < EXPANSION_TOL,
        expansion,
        stratum_one_error,
    };
    Ok((report, res.total()))
}
