//! Linear p-evolution operators `D_t + a_p(t)D_x^p + Σ_j a_{p-j}(t,x)D_x^{p-j}`.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::config::GevreyConfig;
use crate::error::{PevoError, Result};
use crate::jet::Jet1;
use crate::quad::{gauss_legendre, gl_integrate};
use crate::symbols::estimates::{decay_x_samples, gevrey_constant_estimate};

/// Time modulation of a coefficient.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TimeProfile {
    Constant,
    /// `1 + depth·sin(2πt/T)`.
    Oscillating { depth: f64 },
    /// `offset + slope·t`.
    Affine { offset: f64, slope: f64 },
}

impl TimeProfile {
    pub fn value(&self, t: f64, t_final: f64) -> f64 {
        match *self {
            TimeProfile::Constant => 1.0,
            TimeProfile::Oscillating { depth } => {
                1.0 + depth * (2.0 * std::f64::consts::PI * t / t_final).sin()
            }
            TimeProfile::Affine { offset, slope } => offset + slope * t,
        }
    }
}

/// `a_{p-j}(t, x) = amplitude · time(t) · ⟨x⟩^{-decay}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LowerCoefficient {
    pub j: u32,
    pub amplitude: C64,
    pub decay: f64,
    #[serde(default = "constant_time")]
    pub time: TimeProfile,
}

fn constant_time() -> TimeProfile {
    TimeProfile::Constant
}

impl LowerCoefficient {
    pub fn value(&self, t: f64, x: f64, t_final: f64) -> C64 {
        self.amplitude * self.time.value(t, t_final) * crate::grid::bracket(x).powf(-self.decay)
    }

    /// Real x-profile jet `⟨x⟩^{-decay}` of degree `n`.
    pub fn profile_jet(&self, x: f64, n: usize) -> Jet1 {
        let v = Jet1::var(x, n);
        v.mul(&v).add(&Jet1::constant(1.0, n)).powf(-0.5 * self.decay)
    }

    /// `∂_x^β a(t, x)` for `β = 0..=n`.
    pub fn derivs(&self, t: f64, x: f64, n: usize, t_final: f64) -> Vec<C64> {
        let amp = self.amplitude * self.time.value(t, t_final);
        self.profile_jet(x, n).derivatives().into_iter().map(|d| amp * d).collect()
    }
}

/// A p-evolution operator with its constants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Problem {
    pub name: String,
    pub p: u32,
    pub a_p: f64,
    #[serde(default = "constant_time")]
    pub a_p_time: TimeProfile,
    /// Lower-order terms; at most one entry per `j ∈ 1..=p`.
    pub lower: Vec<LowerCoefficient>,
    pub cfg: GevreyConfig,
}

/// Overrides accepted by [`make_preset`].
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PresetOverrides {
    /// Per-j amplitudes `c_j` (j = 1..p-1); default 0.5.
    #[serde(default)]
    pub c: Option<Vec<f64>>,
    /// Amplitude of the order-zero term; default 0.1.
    #[serde(default)]
    pub c0: Option<f64>,
    /// Drop imaginary parts of every lower-order coefficient.
    #[serde(default)]
    pub real_only: bool,
    /// Zero every lower-order coefficient.
    #[serde(default)]
    pub zero_lower: bool,
    /// Modulate `a_{p-1}` by `1 + 0.5 sin(2πt/T)`.
    #[serde(default)]
    pub oscillating: bool,
}

pub const PRESETS: [&str; 3] = ["schrodinger2", "kdv3", "kawahara5"];

/// Build a named preset at the given configuration.
pub fn make_preset(name: &str, cfg: &GevreyConfig, ov: &PresetOverrides) -> Result<Problem> {
    let (p, a_p) = match name {
        "schrodinger2" => (2, -0.5),
        "kdv3" => (3, 1.0),
        "kawahara5" => (5, 1.0),
        other => return Err(PevoError::InvalidConfig(format!("unknown preset '{other}'"))),
    };
    if cfg.p != p {
        return Err(PevoError::InvalidConfig(format!("preset {name} needs p = {p}, cfg has p = {}", cfg.p)));
    }
    let unit = if ov.real_only { C64::new(1.0, 0.0) } else { C64::new(1.0, 1.0) };
    let mut lower = Vec::new();
    if !ov.zero_lower {
        for j in 1..p {
            let c = ov.c.as_ref().and_then(|c| c.get((j - 1) as usize).copied()).unwrap_or(0.5);
            let time = if ov.oscillating && j == 1 {
                TimeProfile::Oscillating { depth: 0.5 }
            } else {
                TimeProfile::Constant
            };
            lower.push(LowerCoefficient { j, amplitude: unit * c, decay: cfg.decay(j), time });
        }
        let c0 = ov.c0.unwrap_or(0.1);
        lower.push(LowerCoefficient {
            j: p,
            amplitude: unit * c0,
            decay: cfg.sigma / (p as f64 - 1.0),
            time: TimeProfile::Constant,
        });
    }
    Ok(Problem { name: name.into(), p, a_p, a_p_time: TimeProfile::Constant, lower, cfg: cfg.clone() })
}

impl Problem {
    pub fn leading(&self, t: f64) -> f64 {
        self.a_p * self.a_p_time.value(t, self.cfg.t_final)
    }

    /// Sign of `a_p(0)`.
    pub fn sign_ap(&self) -> f64 {
        if self.leading(0.0) < 0.0 {
            -1.0
        } else {
            1.0
        }
    }

    pub fn coefficient(&self, j: u32) -> Option<&LowerCoefficient> {
        self.lower.iter().find(|c| c.j == j)
    }

    /// `a_{p-j}(t, x)`; zero when absent.
    pub fn lower_value(&self, j: u32, t: f64, x: f64) -> C64 {
        self.coefficient(j).map_or(C64::new(0.0, 0.0), |c| c.value(t, x, self.cfg.t_final))
    }

    pub fn lower_derivs(&self, j: u32, t: f64, x: f64, n: usize) -> Vec<C64> {
        self.coefficient(j)
            .map_or_else(|| vec![C64::new(0.0, 0.0); n + 1], |c| c.derivs(t, x, n, self.cfg.t_final))
    }

    /// Decay exponents `σ_{p-j}` implied by the coefficient profiles.
    pub fn sigma_list(&self) -> Vec<f64> {
        (1..self.p)
            .map(|j| match self.coefficient(j) {
                Some(c) => (c.decay * (self.p as f64 - 1.0) / (self.p - j) as f64).min(1.0),
                None => 1.0,
            })
            .collect()
    }

    /// Same problem with every lower-order coefficient made real.
    pub fn real_part(&self) -> Self {
        let mut q = self.clone();
        for c in &mut q.lower {
            c.amplitude = C64::new(c.amplitude.re, 0.0);
        }
        q
    }

    pub fn t_samples(&self, n: usize) -> Vec<f64> {
        (0..n).map(|i| self.cfg.t_final * i as f64 / (n - 1) as f64).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientCheck {
    pub j: u32,
    pub required_decay: f64,
    pub constant: Option<f64>,
    pub error: Option<String>,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssumptionReport {
    pub c_ap: f64,
    pub sign_constant: bool,
    pub leading_pass: bool,
    pub coefficients: Vec<CoefficientCheck>,
    pub pass: bool,
}

impl AssumptionReport {
    /// `C_{a_{p-j}}`, zero when absent or failing.
    pub fn c_a(&self, j: u32) -> f64 {
        self.coefficients.iter().find(|c| c.j == j).and_then(|c| c.constant).unwrap_or(0.0)
    }
}

/// Check the leading-coefficient and coefficient-decay hypotheses.
pub fn check_assumptions(prob: &Problem) -> AssumptionReport {
    let ts = prob.t_samples(33);
    let vals: Vec<f64> = ts.iter().map(|&t| prob.leading(t)).collect();
    let c_ap = vals.iter().fold(f64::INFINITY, |m, v| m.min(v.abs()));
    let sign_constant = vals.iter().all(|v| v.signum() == vals[0].signum());
    let leading_pass = c_ap > 0.0 && sign_constant;
    let xs = decay_x_samples();
    let mut coefficients = Vec::new();
    for j in 1..=prob.p {
        let required = prob.cfg.decay(j);
        let f = |t: f64, x: f64, n: usize| prob.lower_derivs(j, t, x, n);
        let ts_c: Vec<f64> = prob.t_samples(9);
        match gevrey_constant_estimate(&f, required, prob.cfg.theta0, &ts_c, &xs, 4) {
            Ok(fit) => coefficients.push(CoefficientCheck {
                j,
                required_decay: required,
                constant: Some(fit.constant),
                error: None,
                pass: true,
            }),
            Err(e) => coefficients.push(CoefficientCheck {
                j,
                required_decay: required,
                constant: None,
                error: Some(e.to_string()),
                pass: false,
            }),
        }
    }
    let pass = leading_pass && coefficients.iter().all(|c| c.pass);
    AssumptionReport { c_ap, sign_constant, leading_pass, coefficients, pass }
}

/// `Ξ = max_j {(p-1)(1-σ_{p-j}) - j + 1}`; `sigma_list[j-1] = σ_{p-j}`.
pub fn xi_index(sigma_list: &[f64], p: u32) -> f64 {
    sigma_list
        .iter()
        .enumerate()
        .map(|(i, &s)| (p as f64 - 1.0) * (1.0 - s) - i as f64)
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Admissible `θ ∈ [θ0, 1/((p-1)(1-σ)))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThetaRange {
    pub lo: f64,
    /// Exclusive; infinite when `σ = 1`.
    pub hi: f64,
    pub empty: bool,
}

pub fn theta_range(theta0: f64, sigma: f64, p: u32) -> ThetaRange {
    let denom = (p as f64 - 1.0) * (1.0 - sigma);
    let hi = if denom <= 0.0 { f64::INFINITY } else { 1.0 / denom };
    ThetaRange { lo: theta0, hi, empty: !(theta0 < hi) }
}

/// Least-squares fit of the growth `F(ϱ)` by `M log(1+ϱ) + N`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cn2Fit {
    pub rho_grid: Vec<f64>,
    pub f_values: Vec<f64>,
    #[serde(rename = "M")]
    pub m: f64,
    #[serde(rename = "N")]
    pub n: f64,
    pub max_residual: f64,
    pub relative_residual: f64,
    pub super_log: bool,
}

/// Relative residual at or above which growth is flagged super-logarithmic.
pub const SUPER_LOG_THRESHOLD: f64 = 0.1;

/// Default `ϱ` grid: 33 log-spaced points on `[1, 1e8]`.
pub fn default_rho_grid() -> Vec<f64> {
    (0..33).map(|i| 10f64.powf(8.0 * i as f64 / 32.0)).collect()
}

/// Default spatial samples: 64 points on `[-16, 16)` including 0.
pub fn default_scan_x() -> Vec<f64> {
    (0..64).map(|i| -16.0 + 0.5 * i as f64).collect()
}

/// `∫_a^b f` with panels split at 0 and at powers of ten, for slowly
/// decaying integrands over very long ranges.
fn long_range_integral(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    let rule = gauss_legendre(20);
    let mut cuts = vec![a, b];
    for k in -2..=10 {
        let v = 10f64.powi(k);
        for c in [v, -v, 2.0 * v, -2.0 * v, 5.0 * v, -5.0 * v] {
            if c > a && c < b {
                cuts.push(c);
            }
        }
    }
    if 0.0 > a && 0.0 < b {
        cuts.push(0.0);
    }
    cuts.sort_by(f64::total_cmp);
    cuts.windows(2).map(|w| gl_integrate(f, w[0], w[1], &rule)).sum()
}

/// Necessary-condition growth scan on `Im a_{p-1}` along characteristics.
///
/// `F(ϱ) = sup_x min_{τ ≤ t} ∫_{-ϱ}^{ϱ} Im a_{p-1}(t, x + p a_p(τ) s) ds`.
pub fn necessary_condition_scan(prob: &Problem, rho_grid: &[f64], t_samples: &[f64], x_samples: &[f64]) -> Result<Cn2Fit> {
    if rho_grid.len() < 5 || rho_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(PevoError::InvalidConfig("rho grid must be increasing with >= 5 points".into()));
    }
    let p = prob.p as f64;
    let mut f_values = Vec::with_capacity(rho_grid.len());
    for &r in rho_grid {
        let mut sup = f64::NEG_INFINITY;
        for &x in x_samples {
            let mut min = f64::INFINITY;
            for (ti, &t) in t_samples.iter().enumerate() {
                for &tau in &t_samples[..=ti] {
                    let speed = p * prob.leading(tau);
                    // Substitute y = x + speed·s.
                    let g = |y: f64| prob.lower_value(1, t, y).im;
                    let (lo, hi) = (x - speed.abs() * r, x + speed.abs() * r);
                    let v = long_range_integral(&g, lo, hi) / speed.abs();
                    min = min.min(v);
                }
            }
            sup = sup.max(min);
        }
        if !sup.is_finite() {
            return Err(PevoError::Quadrature("non-finite characteristic integral".into()));
        }
        f_values.push(sup);
    }
    let (m, n) = fit_log(rho_grid, &f_values);
    let max_residual = rho_grid
        .iter()
        .zip(&f_values)
        .map(|(&r, &f)| (f - m * r.ln_1p() - n).abs())
        .fold(0.0, f64::max);
    let scale = f_values.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let relative_residual = if scale > 0.0 { max_residual / scale } else { 0.0 };
    Ok(Cn2Fit {
        rho_grid: rho_grid.to_vec(),
        f_values,
        m,
        n,
        max_residual,
        relative_residual,
        super_log: relative_residual >= SUPER_LOG_THRESHOLD,
    })
}

fn fit_log(r: &[f64], f: &[f64]) -> (f64, f64) {
    let k = r.len() as f64;
    let xs: Vec<f64> = r.iter().map(|v| v.ln_1p()).collect();
    let mx = xs.iter().sum::<f64>() / k;
    let my = f.iter().sum::<f64>() / k;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(f).map(|(x, y)| (x - mx) * (y - my)).sum();
    let m = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    (m, my - m * mx)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kdv3_preset_shape() {
        let p = make_preset("kdv3", &GevreyConfig::kdv3(), &PresetOverrides::default()).unwrap();
        assert_eq!(p.p, 3);
        assert_eq!(p.a_p, 1.0);
        assert!((p.coefficient(1).unwrap().decay - 0.9).abs() < 1e-15);
        assert!((p.coefficient(2).unwrap().decay - 0.45).abs() < 1e-15);
        assert!(check_assumptions(&p).pass);
        let s = make_preset("schrodinger2", &GevreyConfig::schrodinger2(), &PresetOverrides::default()).unwrap();
        assert_eq!(s.lower.iter().filter(|c| c.j < 2).count(), 1);
        assert!(check_assumptions(&s).pass);
        assert!(make_preset("kdv3", &GevreyConfig::schrodinger2(), &PresetOverrides::default()).is_err());
    }

    #[test]
    fn assumption_failures() {
        let mut p = make_preset("kdv3", &GevreyConfig::kdv3(), &PresetOverrides::default()).unwrap();
        p.a_p_time = TimeProfile::Affine { offset: -p.cfg.t_final / 2.0, slope: 1.0 };
        assert!(!check_assumptions(&p).leading_pass);
        let mut q = make_preset("kdv3", &GevreyConfig::kdv3(), &PresetOverrides::default()).unwrap();
        q.lower[0].decay = 0.45;
        let r = check_assumptions(&q);
        assert!(!r.pass && !r.coefficients[0].pass);
    }

    #[test]
    fn xi_index_examples() {
        assert!((xi_index(&[0.9, 0.9], 3) - 0.2).abs() < 1e-12);
        assert_eq!(xi_index(&[1.0], 2), 0.0);
        assert!((xi_index(&[0.8, 0.8, 0.8, 0.8], 5) - 4.0 * 0.2).abs() < 1e-12);
    }

    #[test]
    fn theta_range_examples() {
        let r = theta_range(1.5, 0.9, 3);
        assert!(!r.empty && r.lo == 1.5 && (r.hi - 5.0).abs() < 1e-9);
        assert!(theta_range(2.0, 0.5, 3).empty);
        assert!(theta_range(1.5, 1.0, 3).hi.is_infinite());
    }

    fn with_decay(decay: f64, amp: C64) -> Problem {
        let mut p = make_preset("kdv3", &GevreyConfig::kdv3(), &PresetOverrides::default()).unwrap();
        p.lower[0].decay = decay;
        p.lower[0].amplitude = amp;
        p
    }

    #[test]
    fn cn2_scan_examples() {
        let ts = [0.0, 0.1];
        let xs = default_scan_x();
        let rg = default_rho_grid();
        let zero = necessary_condition_scan(&with_decay(0.9, C64::new(0.5, 0.0)), &rg, &ts, &xs).unwrap();
        assert_eq!(zero.m, 0.0);
        assert_eq!(zero.n, 0.0);
        let log = necessary_condition_scan(&with_decay(1.0, C64::new(0.0, 0.5)), &rg, &ts, &xs).unwrap();
        assert!(!log.super_log, "{}", log.relative_residual);
        let pow = necessary_condition_scan(&with_decay(0.6, C64::new(0.0, 0.5)), &rg, &ts, &xs).unwrap();
        assert!(pow.super_log);
    }
}
