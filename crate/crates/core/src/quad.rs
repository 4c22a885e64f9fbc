//! One-dimensional quadrature.

use crate::error::{PevoError, Result};

/// Adaptive Simpson on `[a, b]` with absolute tolerance `tol`.
///
/// Reversed limits give the negated integral.
pub fn adaptive_simpson(f: &impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    let (fa, fb) = (f(a), f(b));
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    let mut budget = 200_000usize;
    let r = simpson_rec(f, a, b, fa, fm, fb, whole, tol, 50, &mut budget)?;
    if !r.is_finite() {
        return Err(PevoError::Quadrature(format!("non-finite integral on [{a}, {b}]")));
    }
    Ok(r)
}

#[allow(clippy::too_many_arguments)]
fn simpson_rec(
    f: &impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
    budget: &mut usize,
) -> Result<f64> {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if delta.abs() <= 15.0 * tol {
        return Ok(left + right + delta / 15.0);
    }
    if depth == 0 || *budget == 0 {
        return Err(PevoError::Quadrature(format!(
            "adaptive Simpson did not reach tol {tol:e} near [{a}, {b}]"
        )));
    }
    *budget -= 1;
    Ok(simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1, budget)?
        + simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1, budget)?)
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            if n == 1 {
                p1 = z;
                p0 = 1.0;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = -z;
        nodes[n - 1 - i] = z;
        let w = 2.0 / ((1.0 - z * z) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// Fixed-order Gauss–Legendre rule on `[a, b]`.
pub fn gl_integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, rule: &(Vec<f64>, Vec<f64>)) -> f64 {
    let (c, r) = (0.5 * (a + b), 0.5 * (b - a));
    rule.0.iter().zip(&rule.1).map(|(&z, &w)| w * f(c + r * z)).sum::<f64>() * r
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simpson_polynomial_and_exp() {
        let v = adaptive_simpson(&|x: f64| x * x, 0.0, 3.0, 1e-12).unwrap();
        assert!((v - 9.0).abs() < 1e-12);
        let v = adaptive_simpson(&|x: f64| x.exp(), 1.0, 0.0, 1e-12).unwrap();
        assert!((v + (1f64.exp() - 1.0)).abs() < 1e-11);
    }

    #[test]
    fn gl_exact_for_degree() {
        let rule = gauss_legendre(8);
        let v = gl_integrate(|x| x.powi(15) + x.powi(14), -1.0, 1.0, &rule);
        assert!((v - 2.0 / 15.0).abs() < 1e-14);
        let s: f64 = rule.1.iter().sum();
        assert!((s - 2.0).abs() < 1e-14);
    }
}
