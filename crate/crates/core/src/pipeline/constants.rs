//! Choosing `M_{p-1}, …, M_1`, then `K`, then `h`, with an audit trail.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use super::assembly::Assembly;
use super::scan::{full_symbol_tables, k_floor, k_scan, layer_scan, positivity_scan, ScanContext, ScanReport};
use super::Layout;
use crate::calculus::{
    conjugation_expansion, invert_e_lambda, ExpansionSummary, InversionOptions, InversionSummary, LambdaField,
    SymbolNodes, INVERSION_TOL,
};
use crate::config::{BoundaryConfig, GevreyConfig};
use crate::error::{PevoError, Result};
use crate::grid::Grid;
use crate::jet::Jet;
use crate::problems::{check_assumptions, Problem};
use crate::symbols::FnSymbol;

/// Headroom factor applied to every lower bound.
pub const HEADROOM: f64 = 1.1;
/// Strata kept in the expansion gate.
pub const EXPANSION_TERMS: usize = 4;
/// Tolerance of the expansion gate.
pub const EXPANSION_TOL: f64 = 1e-3;
/// Largest sponge tried, as a power of two.
const SPONGE_DOUBLINGS: u32 = 14;

/// Constants the caller pins instead of letting the pipeline choose.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FixedConstants {
    #[serde(rename = "M", default)]
    pub m: Option<Vec<f64>>,
    #[serde(rename = "K", default)]
    pub k: Option<f64>,
    #[serde(default)]
    pub h: Option<f64>,
    #[serde(default)]
    pub sponge: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionOptions {
    /// Require the leading-term conjugation expansion to match the matrix product.
    pub expansion_gate: bool,
    pub t_samples: usize,
}

impl Default for SelectionOptions {
    fn default() -> Self {
        Self { expansion_gate: false, t_samples: 5 }
    }
}

/// One row per level, in the order the constants are fixed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelAudit {
    /// `j` in `M_{p-j}`.
    pub level: u32,
    pub m_name: String,
    #[serde(rename = "C_a")]
    pub c_a: f64,
    /// Measured sup of the lower-stratum corrections; absent for the first level.
    #[serde(rename = "C_M")]
    pub c_m: Option<f64>,
    /// Names of the quantities the formula reads.
    pub depends_on: Vec<String>,
    /// Lower bound from the rule, before headroom.
    pub lower_bound: f64,
    pub value: f64,
    pub fixed: bool,
    /// Minimum slack of this level's scan at the final `h`.
    pub slack: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HAttempt {
    pub h: f64,
    pub outcome: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstantsSelection {
    #[serde(rename = "M")]
    pub m: Vec<f64>,
    #[serde(rename = "K")]
    pub k: f64,
    #[serde(rename = "K0")]
    pub k0: f64,
    pub h: f64,
    pub sponge: f64,
    #[serde(rename = "C_ap")]
    pub c_ap: f64,
    pub audit: Vec<LevelAudit>,
    pub scans: Vec<ScanReport>,
    pub layer_scan: ScanReport,
    pub k_scan: ScanReport,
    pub inversion: InversionSummary,
    pub expansion: Option<ExpansionSummary>,
    pub h_history: Vec<HAttempt>,
    /// Every scan and the inversion passed, plus the expansion gate when enabled.
    pub pass: bool,
}

impl ConstantsSelection {
    pub fn scans_pass(&self) -> bool {
        self.scans.iter().all(|s| s.pass) && self.layer_scan.pass && self.k_scan.pass
    }

    /// First failing scan, if any.
    pub fn first_failure(&self) -> Option<&ScanReport> {
        self.scans.iter().chain([&self.layer_scan, &self.k_scan]).find(|s| !s.pass)
    }

    /// The configuration with the selected constants written in.
    pub fn apply(&self, cfg: &GevreyConfig) -> GevreyConfig {
        GevreyConfig { m: self.m.clone(), k: self.k, h: self.h, ..cfg.clone() }
    }
}

/// The leading symbol `a_p(0) ξ^p` for the expansion gate.
pub(crate) fn leading_symbol(prob: &Problem) -> FnSymbol {
    let a = prob.leading(0.0);
    let p = prob.p;
    FnSymbol::from_jet("a_p xi^p", p as f64, 0.0, move |_, xi, d| {
        let v = Jet::var_xi(xi, d);
        (1..p).fold(v, |acc, _| acc * v) * C64::new(a, 0.0)
    })
}

struct Attempt {
    selection: ConstantsSelection,
    assembly: Option<Assembly>,
}

/// Run the level-by-level procedure at one `h`.
fn attempt(
    prob: &Problem,
    grid: &Grid,
    boundary: &BoundaryConfig,
    fixed: &FixedConstants,
    opts: &SelectionOptions,
    c_ap: f64,
    c_a: &[f64],
) -> Result<Attempt> {
    let p = prob.p;
    let h = grid.h();
    let layout = Layout::new(boundary, grid.half_width());
    let mut cfg = GevreyConfig { h, k: fixed.k.unwrap_or(0.0), ..prob.cfg.clone() };
    cfg.m = fixed.m.clone().unwrap_or_else(|| vec![0.0; (p - 1) as usize]);
    let mut work = Problem { cfg: cfg.clone(), ..prob.clone() };
    let ts = work.t_samples(opts.t_samples);
    let mut ctx = ScanContext::new(&work, grid, layout, ts.clone())?;
    let mut audit = Vec::new();
    for j in 1..p {
        let (c_m, depends_on) = if j == 1 {
            (None, vec![format!("C_a[p-1]"), "C_ap".to_string()])
        } else {
            ctx.add_partial(j)?;
            let mut deps = vec![format!("C_a[p-{j}]"), "C_ap".to_string()];
            deps.extend((1..j).map(|k| format!("M_{{p-{k}}}")));
            (Some(ctx.measured_constant(j)?), deps)
        };
        // The level-j explicit term carries p − (j−1)ξ²/⟨ξ⟩_h², never less than p+1−j.
        let lower_bound = (1.0 + c_a[j as usize - 1] + c_m.unwrap_or(0.0)) / ((p + 1 - j) as f64 * c_ap);
        let value = match &fixed.m {
            Some(m) => m[j as usize - 1],
            None => HEADROOM * lower_bound,
        };
        cfg.m[j as usize - 1] = value;
        work.cfg = cfg.clone();
        ctx.set_constants(&cfg, j)?;
        audit.push(LevelAudit {
            level: j,
            m_name: format!("M_{{p-{j}}}"),
            c_a: c_a[j as usize - 1],
            c_m,
            depends_on,
            lower_bound,
            value,
            fixed: fixed.m.is_some(),
            slack: f64::NAN,
        });
    }
    let k0 = k_floor(&work, grid, &ts);
    cfg.k = fixed.k.unwrap_or(HEADROOM * k0);
    work.cfg = cfg.clone();
    ctx.prob.cfg = cfg.clone();

    let field = LambdaField::new(&cfg, work.sign_ap(), grid, layout.lambda_taper(), 0)?;
    let inversion = match invert_e_lambda(&field.table(), InversionOptions::default()) {
        Ok(r) => r,
        Err(PevoError::HTooSmall { detail }) => {
            return Ok(Attempt { selection: failed(cfg, k0, c_ap, audit, detail), assembly: None });
        }
        Err(e) => return Err(e),
    };
    let inv_summary = inversion.summary();
    if inversion.residual >= INVERSION_TOL {
        let d = format!("inversion residual {:.3e} ≥ {INVERSION_TOL:e}", inversion.residual);
        return Ok(Attempt { selection: failed(cfg, k0, c_ap, audit, d), assembly: None });
    }
    // The partial conjugations must see the final K through W(t).
    for j in 2..p {
        ctx.add_partial(j)?;
    }
    let scans: Vec<ScanReport> = (1..p).map(|j| positivity_scan(&ctx, j)).collect::<Result<_>>()?;
    for (a, s) in audit.iter_mut().zip(&scans) {
        a.slack = s.min_slack;
    }
    let mut asm = Assembly::from_inversion(&work, grid, boundary, 0.0, inversion)?;
    let tables = full_symbol_tables(&asm, &ts)?;
    let (sponge, layer) = match fixed.sponge.or(boundary.sponge) {
        Some(g) => (g, layer_scan(&asm, &tables, &ts, g)),
        None => {
            let mut g = 1.0;
            let mut rep = layer_scan(&asm, &tables, &ts, g);
            for _ in 0..SPONGE_DOUBLINGS {
                if rep.pass {
                    break;
                }
                g *= 2.0;
                rep = layer_scan(&asm, &tables, &ts, g);
            }
            (g, rep)
        }
    };
    asm.sponge = sponge;
    let kscan = k_scan(&work, grid, &ts);
    let gate_field = LambdaField::new(&cfg, work.sign_ap(), grid, layout.lambda_taper(), 2 * (EXPANSION_TERMS - 1))?;
    let lead = leading_symbol(&work);
    let expansion = Some(conjugation_expansion(&SymbolNodes { symbol: &lead, grid }, &gate_field, EXPANSION_TERMS)?.summary());
    let gate_ok = gate_passes(opts, expansion.as_ref());
    let pass = scans.iter().all(|s| s.pass) && layer.pass && kscan.pass && gate_ok;
    let selection = ConstantsSelection {
        m: cfg.m.clone(),
        k: cfg.k,
        k0,
        h,
        sponge,
        c_ap,
        audit,
        scans,
        layer_scan: layer,
        k_scan: kscan,
        inversion: inv_summary,
        expansion,
        h_history: Vec::new(),
        pass,
    };
    Ok(Attempt { selection, assembly: Some(asm) })
}

fn failed(cfg: GevreyConfig, k0: f64, c_ap: f64, audit: Vec<LevelAudit>, detail: String) -> ConstantsSelection {
    let empty = |name: &str| ScanReport {
        name: name.into(),
        min_slack: f64::NAN,
        min_relative_slack: f64::NAN,
        points: 0,
        pass: false,
        witness: None,
    };
    ConstantsSelection {
        m: cfg.m.clone(),
        k: cfg.k,
        k0,
        h: cfg.h,
        sponge: 0.0,
        c_ap,
        audit,
        scans: Vec::new(),
        layer_scan: empty("layer"),
        k_scan: empty("K"),
        inversion: InversionSummary {
            h: cfg.h,
            neumann_terms_used: 0,
            residual: f64::INFINITY,
            residual_left: f64::INFINITY,
            residual_right: f64::INFINITY,
            r_spectral_proxy: f64::NAN,
            r_spectral_radius: None,
            ok: false,
        },
        expansion: None,
        h_history: vec![HAttempt { h: cfg.h, outcome: detail }],
        pass: false,
    }
}

fn gate_passes(opts: &SelectionOptions, e: Option<&ExpansionSummary>) -> bool {
    !opts.expansion_gate || e.is_none_or(|e| e.relative_residual < EXPANSION_TOL)
}

fn describe(sel: &ConstantsSelection, opts: &SelectionOptions) -> String {
    if sel.pass {
        return "pass".into();
    }
    if !sel.inversion.ok {
        return sel.h_history.last().map_or("inversion failed".into(), |a| a.outcome.clone());
    }
    let mut parts = Vec::new();
    for s in sel.scans.iter().chain([&sel.layer_scan, &sel.k_scan]) {
        if !s.pass {
            parts.push(format!("{} scan min slack {:.3e}", s.name, s.min_slack));
        }
    }
    if let Some(e) = sel.expansion.as_ref().filter(|_| opts.expansion_gate) {
        if e.relative_residual >= EXPANSION_TOL {
            parts.push(format!("expansion residual {:.3e}", e.relative_residual));
        }
    }
    parts.join("; ")
}

/// Choose `M_{p-1}, …, M_1`, `K`, `h` and the sponge for `prob` on `grid`'s box.
///
/// `h` doubles from `2R_{a_p}` until the inversion, every scan and (when
/// enabled) the expansion gate pass. With pinned `M` the scans are reported
/// but do not drive `h`. Returns the assembly built at the final `h`.
pub fn select_constants(
    prob: &Problem,
    grid: &Grid,
    boundary: &BoundaryConfig,
    fixed: &FixedConstants,
    opts: &SelectionOptions,
) -> Result<(ConstantsSelection, Assembly)> {
    boundary.validate()?;
    if let Some(m) = &fixed.m {
        if m.len() != (prob.p - 1) as usize {
            return Err(PevoError::InvalidConfig(format!("M needs {} entries, got {}", prob.p - 1, m.len())));
        }
    }
    let report = check_assumptions(prob);
    if !report.pass {
        return Err(PevoError::Assumption(format!("coefficient hypotheses fail: {report:?}")));
    }
    let c_a: Vec<f64> = (1..prob.p).map(|j| report.c_a(j)).collect();
    let limit = grid.xi_max() / 4.0;
    let mut h = fixed.h.unwrap_or(2.0 * prob.cfg.r_ap);
    let mut history = Vec::new();
    let mut last: Option<Attempt> = None;
    loop {
        if h >= limit {
            if fixed.h.is_some() {
                return Err(PevoError::GridTooSmall(format!(
                    "h = {h} needs 2h < ξ_max/2 = {:.3}; refine the grid or shrink L",
                    grid.xi_max() / 2.0
                )));
            }
            break;
        }
        let gh = grid.with_h(h)?;
        let at = attempt(prob, &gh, boundary, fixed, opts, report.c_ap, &c_a)?;
        history.push(HAttempt { h, outcome: describe(&at.selection, opts) });
        let inv_ok = at.selection.inversion.ok;
        let gate_ok = gate_passes(opts, at.selection.expansion.as_ref());
        let done = at.selection.pass || fixed.h.is_some() || (fixed.m.is_some() && inv_ok && gate_ok);
        last = Some(at);
        if done {
            break;
        }
        h *= 2.0;
    }
    match last {
        Some(Attempt { mut selection, assembly: Some(asm) }) if selection.pass || fixed.h.is_some() || fixed.m.is_some() => {
            selection.h_history = history;
            Ok((selection, asm))
        }
        Some(Attempt { assembly: None, .. }) if fixed.h.is_some() => Err(PevoError::HTooSmall {
            detail: history.pop().map(|a| a.outcome).unwrap_or_default(),
        }),
        _ => Err(PevoError::GridTooSmall(format!(
            "no admissible h below ξ_max/4 = {limit:.3}; attempts: {}",
            history.iter().map(|a| format!("h={} ({})", a.h, a.outcome)).collect::<Vec<_>>().join(", ")
        ))),
    }
}
