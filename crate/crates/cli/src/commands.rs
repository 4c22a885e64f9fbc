//! One function per subcommand.

use std::path::PathBuf;

use pevo_core::calculus::{invert_e_lambda, InversionOptions, InversionSummary, LambdaField, INVERSION_TOL};
use pevo_core::pipeline::constants::SelectionOptions;
use pevo_core::pipeline::evolve::EvolveOptions;
use pevo_core::pipeline::{
    conjugation_report, energy_report, evolve, select_constants, sigma_sweep, Assembly, ConstantsSelection, EnergyReport, Layout, Scheme,
    ScanReport, SweepRow,
};
use pevo_core::problems::{default_rho_grid, default_scan_x, necessary_condition_scan};
use pevo_core::symbols::estimates::{verify_lambda_estimates, EstimateReport, SampleLattice};
use pevo_core::{GevreyConfig, Grid, PevoError, Problem, RunConfig};
use serde::Serialize;

use crate::output::{write_csv, write_json, write_schema, Audit, PinnedConstants, Report};
use crate::{CliError, Command, CommonArgs};

/// What a command prints and whether it succeeded scientifically.
#[derive(Debug, Default)]
pub struct Outcome {
    pub pass: bool,
    /// Summary for stdout.
    pub lines: Vec<String>,
    /// Failure details for stderr.
    pub diagnostics: Vec<String>,
}

struct Ctx {
    cfg: RunConfig,
    dir: PathBuf,
    prob: Problem,
    grid: Grid,
}

impl Ctx {
    fn load(args: &CommonArgs) -> Result<Self, CliError> {
        let cfg = RunConfig::load(&args.config, &args.overrides)?;
        let dir = args.out.clone().unwrap_or_else(|| PathBuf::from(&cfg.outputs.dir));
        std::fs::create_dir_all(&dir)?;
        let prob = cfg.problem()?;
        let grid = cfg.grid()?;
        Ok(Self { cfg, dir, prob, grid })
    }

    fn report<'a, T: Serialize>(&'a self, command: &'a str, pass: bool, audit: Audit<'a>, result: T) -> Report<'a, T> {
        Report { command, config_hash: self.cfg.hash(), preset: &self.cfg.problem.preset, pass, constants_audit: audit, result }
    }

    /// Pinned constants when `M` and `h` are both given, otherwise a selection.
    fn resolve(&self) -> Result<Resolved, CliError> {
        let fixed = self.cfg.fixed();
        if let (Some(m), Some(h)) = (&fixed.m, fixed.h) {
            let g = GevreyConfig { m: m.clone(), h, k: fixed.k.unwrap_or(self.cfg.gevrey.k), ..self.cfg.gevrey.clone() };
            return Ok(Resolved::Pinned(g));
        }
        let (sel, _) = select_constants(&self.prob, &self.grid, &self.cfg.boundary, &fixed, &self.selection_options())?;
        Ok(Resolved::Selected(Box::new(sel)))
    }

    fn selection_options(&self) -> SelectionOptions {
        SelectionOptions { t_samples: self.cfg.run.t_samples, ..SelectionOptions::default() }
    }
}

enum Resolved {
    Pinned(GevreyConfig),
    Selected(Box<ConstantsSelection>),
}

impl Resolved {
    fn gevrey(&self, base: &GevreyConfig) -> GevreyConfig {
        match self {
            Self::Pinned(g) => g.clone(),
            Self::Selected(sel) => sel.apply(base),
        }
    }

    fn audit(&self) -> Audit<'_> {
        match self {
            Self::Pinned(g) => Audit::Pinned(PinnedConstants::from_config(g)),
            Self::Selected(sel) => Audit::Selected(sel),
        }
    }
}

pub fn execute(cmd: &Command) -> Result<Outcome, CliError> {
    let ctx = Ctx::load(cmd.args())?;
    match cmd {
        Command::CheckSymbols(_) => check_symbols(&ctx),
        Command::Invert(_) => invert(&ctx),
        Command::Conjugate(_) => conjugate(&ctx),
        Command::Constants(_) => constants(&ctx),
        Command::Solve(_) => solve(&ctx),
        Command::Energy(_) => energy(&ctx),
        Command::Cn2(_) => cn2(&ctx),
        Command::Sweep(_) => sweep(&ctx),
    }
}

fn describe_failure(s: &ScanReport) -> String {
    match &s.witness {
        Some(w) => format!(
            "{} scan fails at t = {}, x = {:.4}, xi = {:.4}: value {:.6e} < target {:.6e}",
            s.name, w.t, w.x, w.xi, w.value, w.target
        ),
        None => format!("{} scan fails (min slack {:.6e})", s.name, s.min_slack),
    }
}

fn check_symbols(ctx: &Ctx) -> Result<Outcome, CliError> {
    let cfg = GevreyConfig { h: ctx.grid.h(), ..ctx.cfg.gevrey.clone() };
    let sign = ctx.prob.sign_ap();
    let lattice = SampleLattice::from_grid(&ctx.grid);
    let reports: Vec<EstimateReport> =
        (1..cfg.p).map(|k| verify_lambda_estimates(k, &cfg, sign, &lattice)).collect::<Result<_, PevoError>>()?;
    let pass = reports.iter().all(|r| r.pass);
    LambdaField::new(&cfg, sign, &ctx.grid, None, 0)?.table().write_csv(&ctx.dir.join("lambda.csv"))?;
    let audit = Audit::Pinned(PinnedConstants::from_config(&cfg));
    write_json(&ctx.dir, "symbols_report.json", &ctx.report("check-symbols", pass, audit, &reports))?;
    let mut out = Outcome { pass, ..Default::default() };
    for r in &reports {
        out.lines.push(format!(
            "lambda_{{p-{}}}: bound {} (sup ratio {:.4e} <= {:.4e}), refinement change max {:.3e} -> {}",
            r.k,
            if r.bound_holds { "holds" } else { "VIOLATED" },
            r.coarse.c1.max(r.fine.c1),
            r.analytic_bound,
            r.refinement_change.iter().fold(0.0f64, |a, &b| a.max(b)),
            if r.pass { "pass" } else { "FAIL" }
        ));
        if !r.pass {
            out.diagnostics.push(format!("estimate family for lambda_{{p-{}}} failed: {:?}", r.k, r.refinement_change));
        }
    }
    Ok(out)
}

#[derive(Serialize)]
struct InversionReport {
    inversion: InversionSummary,
    /// Number of Neumann terms used for the h versus 2h comparison.
    fixed_terms: usize,
    residual_fixed_terms: Option<f64>,
    residual_fixed_terms_at_2h: Option<f64>,
    ratio_2h_over_h: Option<f64>,
}

fn invert(ctx: &Ctx) -> Result<Outcome, CliError> {
    let resolved = ctx.resolve()?;
    let cfg = resolved.gevrey(&ctx.cfg.gevrey);
    let grid = ctx.grid.with_h(cfg.h)?;
    let layout = Layout::new(&ctx.cfg.boundary, grid.half_width());
    let sign = ctx.prob.sign_ap();
    let opts = InversionOptions::default();
    let inv = invert_e_lambda(&LambdaField::new(&cfg, sign, &grid, layout.lambda_taper(), 0)?.table(), opts)?;
    let fixed_terms = opts.min_terms;
    let at_2h = GevreyConfig { h: 2.0 * cfg.h, ..cfg.clone() };
    let twice = grid
        .with_h(at_2h.h)
        .and_then(|g2| invert_e_lambda(&LambdaField::new(&at_2h, sign, &g2, layout.lambda_taper(), 0)?.table(), opts))
        .ok()
        .and_then(|r| r.residual_with_terms(fixed_terms));
    let here = inv.residual_with_terms(fixed_terms);
    let summary = inv.summary();
    let pass = summary.ok && summary.residual < INVERSION_TOL;
    inv.inverse_matrix.write_binary(&ctx.dir.join("e_lambda_inverse.bin"), &ctx.dir.join("e_lambda_inverse.json"))?;
    let body = InversionReport {
        inversion: summary.clone(),
        fixed_terms,
        residual_fixed_terms: here,
        residual_fixed_terms_at_2h: twice,
        ratio_2h_over_h: here.zip(twice).map(|(a, b)| if a > 0.0 { b / a } else { 0.0 }),
    };
    write_json(&ctx.dir, "inversion_report.json", &ctx.report("invert", pass, resolved.audit(), &body))?;
    let mut out = Outcome { pass, ..Default::default() };
    out.lines.push(format!("h = {}  J = {}  residual = {:.3e}", summary.h, summary.neumann_terms_used, summary.residual));
    if !pass {
        out.diagnostics.push(format!("residual {:.3e} is not below {INVERSION_TOL:e}; increase h", summary.residual));
    }
    Ok(out)
}

fn conjugate(ctx: &Ctx) -> Result<Outcome, CliError> {
    let resolved = ctx.resolve()?;
    let mut prob = ctx.prob.clone();
    prob.cfg = resolved.gevrey(&ctx.cfg.gevrey);
    let grid = ctx.grid.with_h(prob.cfg.h)?;
    let (report, total) = conjugation_report(&prob, &grid, &ctx.cfg.boundary)?;
    total.write_csv(&ctx.dir.join("conjugated_symbol.csv"))?;
    let pass = report.stratum_one_pass && report.residual_pass;
    write_json(&ctx.dir, "conjugation_report.json", &ctx.report("conjugate", pass, resolved.audit(), &report))?;
    let mut out = Outcome { pass, ..Default::default() };
    out.lines.push(format!(
        "h = {}  stratum-1 error = {:.3e}  expansion residual ({} terms) = {:.3e}",
        report.h, report.stratum_one_error, report.expansion.n_terms, report.expansion.relative_residual
    ));
    if !report.stratum_one_pass {
        out.diagnostics.push(format!("stratum-1 mismatch {:.3e}", report.stratum_one_error));
    }
    if !report.residual_pass {
        out.diagnostics.push(format!("expansion residual {:.3e} exceeds tolerance", report.expansion.relative_residual));
    }
    Ok(out)
}

#[derive(Serialize)]
struct ConstantsBody<'a> {
    scans_pass: bool,
    first_failure: Option<&'a ScanReport>,
}

fn selection_lines(sel: &ConstantsSelection, out: &mut Outcome) {
    out.lines.push(format!("h = {}  M = {:?}  K = {:.6}  sponge = {}", sel.h, sel.m, sel.k, sel.sponge));
    for s in sel.scans.iter().chain([&sel.layer_scan, &sel.k_scan]) {
        out.lines.push(format!("{:>8} scan: min slack {:.4e} -> {}", s.name, s.min_slack, if s.pass { "pass" } else { "FAIL" }));
    }
    if let Some(f) = sel.first_failure() {
        out.diagnostics.push(describe_failure(f));
    }
}

fn constants(ctx: &Ctx) -> Result<Outcome, CliError> {
    let (sel, _) = select_constants(&ctx.prob, &ctx.grid, &ctx.cfg.boundary, &ctx.cfg.fixed(), &ctx.selection_options())?;
    let body = ConstantsBody { scans_pass: sel.scans_pass(), first_failure: sel.first_failure() };
    write_json(&ctx.dir, "constants_audit.json", &ctx.report("constants", sel.pass, Audit::Selected(&sel), &body))?;
    let mut out = Outcome { pass: sel.pass, ..Default::default() };
    selection_lines(&sel, &mut out);
    Ok(out)
}

#[derive(Serialize)]
struct TrajectoryRow {
    t: f64,
    l2_v: f64,
    l2_u: f64,
    gs_u: f64,
    rhs_bound: f64,
}

fn solve(ctx: &Ctx) -> Result<Outcome, CliError> {
    let (sel, asm) = select_constants(&ctx.prob, &ctx.grid, &ctx.cfg.boundary, &ctx.cfg.fixed(), &ctx.selection_options())?;
    let run = &ctx.cfg.run;
    let g = ctx.cfg.initial_state(&asm.grid);
    let opts = EvolveOptions { steps: run.steps, scheme: run.scheme, t_end: None, m: run.m };
    let traj = evolve(&asm, &g, run.forcing.as_ref(), opts)?;
    let energy = energy_report(&traj, asm.cfg(), run.m, None)?;
    let bound = energy.rhs_bound();
    let rows: Vec<TrajectoryRow> = (0..traj.times.len())
        .map(|k| TrajectoryRow { t: traj.times[k], l2_v: traj.l2_v[k], l2_u: traj.l2_u[k], gs_u: traj.gs_u[k], rhs_bound: bound[k] })
        .collect();
    write_csv(&ctx.dir, "trajectory.csv", &rows)?;
    write_schema(&ctx.dir)?;
    let pass = sel.pass && energy.finite();
    let body = ConstantsBody { scans_pass: sel.scans_pass(), first_failure: sel.first_failure() };
    write_json(&ctx.dir, "constants_audit.json", &ctx.report("solve", sel.pass, Audit::Selected(&sel), &body))?;
    write_json(&ctx.dir, "energy_report.json", &ctx.report("solve", pass, Audit::Selected(&sel), &energy))?;
    let mut out = Outcome { pass, ..Default::default() };
    selection_lines(&sel, &mut out);
    out.lines.push(format!(
        "C' = {:.6}  C = {:.6}  C_rel = {:.6}  growth at rho = {:.4}  max roundtrip = {:.2e}",
        energy.c_prime, energy.c, energy.c_rel, energy.growth_at_rho, energy.max_roundtrip
    ));
    if !energy.finite() {
        out.diagnostics.push("energy constants are not finite".into());
    }
    Ok(out)
}

#[derive(Serialize)]
struct EnergyRow {
    n: usize,
    scheme: Scheme,
    steps: usize,
    #[serde(rename = "C_prime")]
    c_prime: f64,
    #[serde(rename = "C")]
    c: f64,
    #[serde(rename = "C_rel")]
    c_rel: f64,
    l2_v_end: f64,
}

#[derive(Serialize)]
struct EnergyStudy {
    rows: Vec<EnergyRow>,
    /// Largest relative deviation from the first row.
    c_prime_spread: f64,
    c_spread: f64,
    /// Largest relative gap in `‖v(t)‖` between the two schemes at equal N and S.
    scheme_gap: f64,
    spread_tol: f64,
    scheme_tol: f64,
}

const SPREAD_TOL: f64 = 0.25;
const SCHEME_TOL: f64 = 1e-4;

fn energy(ctx: &Ctx) -> Result<Outcome, CliError> {
    let (sel, asm) = select_constants(&ctx.prob, &ctx.grid, &ctx.cfg.boundary, &ctx.cfg.fixed(), &ctx.selection_options())?;
    let mut prob = ctx.prob.clone();
    prob.cfg = sel.apply(&ctx.cfg.gevrey);
    let coarse_grid = Grid::new(ctx.grid.half_width(), ctx.grid.n() / 2, sel.h)?;
    let coarse = Assembly::build(&prob, &coarse_grid, &ctx.cfg.boundary, sel.sponge)?;
    let run = &ctx.cfg.run;
    let mut rows = Vec::new();
    let mut scheme_gap: f64 = 0.0;
    for a in [&asm, &coarse] {
        let g = ctx.cfg.initial_state(&a.grid);
        for steps in [run.steps, 2 * run.steps] {
            let mut l2 = Vec::new();
            for scheme in [Scheme::CrankNicolson, Scheme::StrangRk4] {
                let traj = evolve(a, &g, run.forcing.as_ref(), EvolveOptions { steps, scheme, t_end: None, m: run.m })?;
                let e: EnergyReport = energy_report(&traj, a.cfg(), run.m, None)?;
                rows.push(EnergyRow {
                    n: a.grid.n(),
                    scheme,
                    steps,
                    c_prime: e.c_prime,
                    c: e.c,
                    c_rel: e.c_rel,
                    l2_v_end: *traj.l2_v.last().expect("nonempty"),
                });
                l2.push(traj.l2_v);
            }
            for (x, y) in l2[0].iter().zip(&l2[1]) {
                if *x > 0.0 {
                    scheme_gap = scheme_gap.max((x - y).abs() / x);
                }
            }
        }
    }
    let spread = |f: &dyn Fn(&EnergyRow) -> f64| {
        let r = f(&rows[0]);
        rows.iter().map(|row| if r != 0.0 { (f(row) - r).abs() / r.abs() } else { f(row).abs() }).fold(0.0, f64::max)
    };
    let study = EnergyStudy {
        c_prime_spread: spread(&|r| r.c_prime),
        c_spread: spread(&|r| r.c),
        scheme_gap,
        spread_tol: SPREAD_TOL,
        scheme_tol: SCHEME_TOL,
        rows,
    };
    let finite = study.rows.iter().all(|r| r.c.is_finite() && r.c_prime.is_finite());
    let pass = finite && study.c_prime_spread <= SPREAD_TOL && study.c_spread <= SPREAD_TOL && study.scheme_gap <= SCHEME_TOL;
    write_json(&ctx.dir, "energy_study.json", &ctx.report("energy", pass, Audit::Selected(&sel), &study))?;
    let mut out = Outcome { pass, ..Default::default() };
    for r in &study.rows {
        out.lines.push(format!(
            "N = {:>3}  {:?} S = {:>3}: C' = {:.6}  C = {:.6}  |v(T)| = {:.8e}",
            r.n, r.scheme, r.steps, r.c_prime, r.c, r.l2_v_end
        ));
    }
    out.lines.push(format!(
        "spread C' = {:.3e}  spread C = {:.3e}  scheme gap = {:.3e}",
        study.c_prime_spread, study.c_spread, study.scheme_gap
    ));
    if !pass {
        out.diagnostics.push("energy constants are unstable under refinement or the schemes disagree".into());
    }
    Ok(out)
}

fn cn2(ctx: &Ctx) -> Result<Outcome, CliError> {
    let ts = ctx.prob.t_samples(ctx.cfg.run.t_samples);
    let fit = necessary_condition_scan(&ctx.prob, &default_rho_grid(), &ts, &default_scan_x())?;
    let audit = Audit::Pinned(PinnedConstants::from_config(&ctx.cfg.gevrey));
    write_json(&ctx.dir, "cn2_fit.json", &ctx.report("cn2", true, audit, &fit))?;
    let mut out = Outcome { pass: true, ..Default::default() };
    out.lines.push(format!(
        "F(rho) ~ {:.6} log(1+rho) + {:.6}; relative residual {:.3e}; super-logarithmic: {}",
        fit.m, fit.n, fit.relative_residual, fit.super_log
    ));
    Ok(out)
}

#[derive(Serialize)]
struct SweepCsvRow<'a> {
    sigma: f64,
    growth: Option<f64>,
    status: &'a str,
    inversion_residual: f64,
    detail: &'a str,
}

#[derive(Serialize)]
struct SweepBody<'a> {
    rows: &'a [SweepRow],
    /// Growth never rises by more than 20% from one σ to the next.
    monotone_within_noise: bool,
}

fn sweep(ctx: &Ctx) -> Result<Outcome, CliError> {
    let rows = sigma_sweep(&ctx.cfg.gevrey, &ctx.cfg.problem.preset, &ctx.cfg.problem.overrides, &ctx.cfg.sweep)?;
    let csv_rows: Vec<SweepCsvRow> = rows
        .iter()
        .map(|r| SweepCsvRow { sigma: r.sigma, growth: r.growth, status: &r.status, inversion_residual: r.inversion_residual, detail: &r.detail })
        .collect();
    write_csv(&ctx.dir, "sweep.csv", &csv_rows)?;
    write_schema(&ctx.dir)?;
    let growth: Vec<f64> = rows.iter().filter_map(|r| r.growth).collect();
    let monotone = growth.windows(2).all(|w| w[1] <= 1.2 * w[0]);
    let s = &ctx.cfg.sweep;
    let audit = Audit::Pinned(PinnedConstants { source: "sweep", m: s.m.clone(), k: s.k, h: s.h });
    write_json(&ctx.dir, "sweep_report.json", &ctx.report("sweep", true, audit, &SweepBody { rows: &rows, monotone_within_noise: monotone }))?;
    let mut out = Outcome { pass: true, ..Default::default() };
    for r in &rows {
        out.lines.push(match r.growth {
            Some(g) => format!("sigma = {:.3}: growth {:.6}", r.sigma, g),
            None => format!("sigma = {:.3}: {} ({})", r.sigma, r.status, r.detail),
        });
    }
    Ok(out)
}

