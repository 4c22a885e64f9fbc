//! Smooth cutoffs built from the bump `b(s) = exp(-1/(1-s²))`.
//!
//! The step `S(t)` rises from 0 at `t ≤ 0` to 1 at `t ≥ 1` and is the
//! normalized primitive of the rescaled bump. Values come from a cell table
//! refined by Gauss–Legendre, derivatives from Taylor jets of the bump.

use std::sync::OnceLock;

use crate::jet::Jet1;
use crate::quad::{gauss_legendre, gl_integrate};

const CELLS: usize = 2048;

struct StepTable {
    cum: Vec<f64>,
    z: f64,
    rule: (Vec<f64>, Vec<f64>),
}

fn bump(s: f64) -> f64 {
    if s.abs() >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - s * s)).exp()
    }
}

fn table() -> &'static StepTable {
    static T: OnceLock<StepTable> = OnceLock::new();
    T.get_or_init(|| {
        let rule = gauss_legendre(10);
        let mut cum = Vec::with_capacity(CELLS + 1);
        cum.push(0.0);
        let w = 2.0 / CELLS as f64;
        let mut acc = 0.0;
        for c in 0..CELLS {
            let a = -1.0 + w * c as f64;
            acc += gl_integrate(bump, a, a + w, &rule);
            cum.push(acc);
        }
        let z = acc;
        StepTable { cum, z, rule }
    })
}

/// Normalizing constant `∫_{-1}^{1} b`.
pub fn bump_mass() -> f64 {
    table().z
}

/// Smooth monotone step: 0 for `t ≤ 0`, 1 for `t ≥ 1`.
pub fn smooth_step(t: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    if t >= 1.0 {
        return 1.0;
    }
    let tb = table();
    let s = 2.0 * t - 1.0;
    let pos = (s + 1.0) * 0.5 * CELLS as f64;
    let c = (pos.floor() as usize).min(CELLS - 1);
    let a = -1.0 + 2.0 * c as f64 / CELLS as f64;
    let partial = gl_integrate(bump, a, s, &tb.rule);
    ((tb.cum[c] + partial) / tb.z).clamp(0.0, 1.0)
}

/// Taylor jet of the bump at `s`, degree `deg`.
fn bump_jet(s: f64, deg: usize) -> Jet1 {
    if s.abs() >= 1.0 {
        return Jet1::constant(0.0, deg);
    }
    let v = Jet1::var(s, deg);
    let one_minus = Jet1::constant(1.0, deg).add(&v.mul(&v).scale(-1.0));
    one_minus.recip().scale(-1.0).exp()
}

/// `S^{(n)}(t)` for `n = 0..=deg`.
pub fn smooth_step_derivs(t: f64, deg: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(deg + 1);
    out.push(smooth_step(t));
    if deg == 0 {
        return out;
    }
    let z = bump_mass();
    let bj = bump_jet(2.0 * t - 1.0, deg - 1);
    let mut scale = 2.0 / z;
    for n in 1..=deg {
        out.push(scale * bj.derivative(n - 1));
        scale *= 2.0;
    }
    out
}

/// Frequency cutoff: 0 for `|ξ| ≤ 1`, `-sign_ap·sgn(ξ)^{p-1}` for `|ξ| ≥ r_ap`.
pub fn omega(xi: f64, r_ap: f64, sign_ap: f64, p: u32) -> f64 {
    omega_derivs(xi, r_ap, sign_ap, p, 0)[0]
}

/// `ω^{(n)}(ξ)` for `n = 0..=deg`.
pub fn omega_derivs(xi: f64, r_ap: f64, sign_ap: f64, p: u32, deg: usize) -> Vec<f64> {
    let sg = if xi < 0.0 && p.is_multiple_of(2) { -1.0 } else { 1.0 };
    let dir = if xi < 0.0 { -1.0 } else { 1.0 };
    let w = r_ap - 1.0;
    let d = smooth_step_derivs((xi.abs() - 1.0) / w, deg);
    let mut out = Vec::with_capacity(deg + 1);
    let mut chain = 1.0;
    for v in d {
        out.push(-sign_ap * sg * chain * v);
        chain *= dir / w;
    }
    out
}

/// Spatial cutoff: 1 on `|y| ≤ 1/2`, 0 for `|y| ≥ 1`.
pub fn psi(y: f64) -> f64 {
    smooth_step(2.0 * (1.0 - y.abs()))
}

/// `ψ^{(n)}(y)` for `n = 0..=deg`.
pub fn psi_derivs(y: f64, deg: usize) -> Vec<f64> {
    let dir = if y < 0.0 { -1.0 } else { 1.0 };
    let d = smooth_step_derivs(2.0 * (1.0 - y.abs()), deg);
    let mut chain = 1.0;
    d.into_iter()
        .map(|v| {
            let r = chain * v;
            chain *= -2.0 * dir;
            r
        })
        .collect()
}

/// Plateau `τ(x)`: 1 on `|x| ≤ flat`, 0 on `|x| ≥ edge`, derivatives `n = 0..=deg`.
///
/// With `edge ≤ flat` the plateau is identically 1.
pub fn plateau_derivs(x: f64, flat: f64, edge: f64, deg: usize) -> Vec<f64> {
    if edge <= flat {
        let mut v = vec![0.0; deg + 1];
        v[0] = 1.0;
        return v;
    }
    let w = edge - flat;
    let dir = if x < 0.0 { 1.0 } else { -1.0 };
    let d = smooth_step_derivs((edge - x.abs()) / w, deg);
    let mut chain = 1.0;
    d.into_iter()
        .map(|v| {
            let r = chain * v;
            chain *= dir / w;
            r
        })
        .collect()
}

pub fn plateau(x: f64, flat: f64, edge: f64) -> f64 {
    plateau_derivs(x, flat, edge, 0)[0]
}

/// Fitted Gevrey constant: smallest `C` with `|f^{(α)}| ≤ C^{α+1} α!^μ` on the samples, α ≤ 4.
pub fn fit_gevrey_constant(derivs: impl Fn(f64) -> Vec<f64>, samples: &[f64], mu: f64) -> f64 {
    let mut c: f64 = 0.0;
    for &s in samples {
        let d = derivs(s);
        let mut fact = 1.0f64;
        for (a, v) in d.iter().enumerate().take(5) {
            if a > 0 {
                fact *= a as f64;
            }
            let r = (v.abs() / fact.powf(mu)).powf(1.0 / (a as f64 + 1.0));
            c = c.max(r);
        }
    }
    c
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::adaptive_simpson;

    #[test]
    fn step_matches_quadrature() {
        let z = adaptive_simpson(&bump, -1.0, 1.0, 1e-14).unwrap();
        assert!((z - bump_mass()).abs() < 1e-12);
        for &t in &[0.1, 0.37, 0.5, 0.81, 0.999] {
            let v = adaptive_simpson(&bump, -1.0, 2.0 * t - 1.0, 1e-14).unwrap() / z;
            assert!((v - smooth_step(t)).abs() < 1e-12, "t={t}");
        }
        assert!((smooth_step(0.5) - 0.5).abs() < 1e-14);
    }

    #[test]
    fn omega_examples() {
        assert_eq!(omega(0.5, 2.0, 1.0, 3), 0.0);
        assert_eq!(omega(3.0, 2.0, 1.0, 3), -1.0);
        let a = omega(1.4, 2.0, 1.0, 3);
        let b = omega(1.6, 2.0, 1.0, 3);
        assert!(a < 0.0 && a > -1.0 && b < a);
    }

    #[test]
    fn psi_examples() {
        assert_eq!(psi(0.3), 1.0);
        assert_eq!(psi(1.2), 0.0);
        let v = psi(0.75);
        assert!(v > 0.0 && v < 1.0);
    }

    #[test]
    fn step_derivatives_match_fd() {
        for &t in &[0.2, 0.45, 0.7] {
            let d = smooth_step_derivs(t, 3);
            let e = 1e-5;
            let fd1 = (smooth_step(t + e) - smooth_step(t - e)) / (2.0 * e);
            assert!((d[1] - fd1).abs() < 1e-8);
            let g = |s: f64| smooth_step_derivs(s, 2)[2];
            let fd3 = (g(t + e) - g(t - e)) / (2.0 * e);
            assert!((d[3] - fd3).abs() < 1e-5 * d[3].abs().max(1.0));
        }
    }

    #[test]
    fn cutoff_gevrey_constants_finite() {
        let xs: Vec<f64> = (0..200).map(|i| 1.0 + i as f64 / 200.0).collect();
        let c = fit_gevrey_constant(|s| omega_derivs(s, 2.0, 1.0, 3, 4), &xs, 1.125);
        assert!(c.is_finite() && c > 0.0);
    }
}
