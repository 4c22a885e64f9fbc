//! Truncated Taylor arithmetic.
//!
//! [`Jet`] carries the bivariate expansion of a symbol around `(x, ξ)`;
//! coefficient `c[a][b]` multiplies `dξ^a dx^b`. [`Jet1`] is the real
//! univariate version used for profiles and cutoffs.

use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64 as C64;

/// Highest total degree a [`Jet`] can carry.
pub const MAX_DEG: usize = 8;
const W: usize = MAX_DEG + 1;

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// Bivariate Taylor jet, total degree `deg ≤ MAX_DEG`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Jet {
    c: [[C64; W]; W],
    deg: usize,
}

impl Jet {
    pub fn zero(deg: usize) -> Self {
        assert!(deg <= MAX_DEG);
        Self { c: [[C64::new(0.0, 0.0); W]; W], deg }
    }

    pub fn constant(v: C64, deg: usize) -> Self {
        let mut j = Self::zero(deg);
        j.c[0][0] = v;
        j
    }

    /// The coordinate `x` expanded at `x0`.
    pub fn var_x(x0: f64, deg: usize) -> Self {
        let mut j = Self::constant(C64::new(x0, 0.0), deg);
        if deg >= 1 {
            j.c[0][1] = C64::new(1.0, 0.0);
        }
        j
    }

    /// The coordinate `ξ` expanded at `xi0`.
    pub fn var_xi(xi0: f64, deg: usize) -> Self {
        let mut j = Self::constant(C64::new(xi0, 0.0), deg);
        if deg >= 1 {
            j.c[1][0] = C64::new(1.0, 0.0);
        }
        j
    }

    /// Lift a univariate jet in `x` (e.g. a coefficient profile).
    pub fn from_x_jet(f: &Jet1, deg: usize) -> Self {
        let mut j = Self::zero(deg.min(f.deg()));
        for b in 0..=j.deg {
            j.c[0][b] = C64::new(f.c[b], 0.0);
        }
        j
    }

    /// Lift a univariate jet in `ξ`.
    pub fn from_xi_jet(f: &Jet1, deg: usize) -> Self {
        let mut j = Self::zero(deg.min(f.deg()));
        for a in 0..=j.deg {
            j.c[a][0] = C64::new(f.c[a], 0.0);
        }
        j
    }

    pub fn deg(&self) -> usize {
        self.deg
    }

    pub fn value(&self) -> C64 {
        self.c[0][0]
    }

    /// Raw Taylor coefficient of `dξ^a dx^b`.
    pub fn coeff(&self, a: usize, b: usize) -> C64 {
        if a + b <= self.deg {
            self.c[a][b]
        } else {
            C64::new(0.0, 0.0)
        }
    }

    pub fn set_coeff(&mut self, a: usize, b: usize, v: C64) {
        assert!(a + b <= self.deg);
        self.c[a][b] = v;
    }

    /// `∂_ξ^α ∂_x^β` at the expansion point, if within degree.
    pub fn derivative(&self, alpha: usize, beta: usize) -> Option<C64> {
        (alpha + beta <= self.deg).then(|| self.c[alpha][beta] * (factorial(alpha) * factorial(beta)))
    }

    pub fn truncate(&self, deg: usize) -> Self {
        let mut j = Self::zero(deg.min(self.deg));
        for a in 0..=j.deg {
            for b in 0..=j.deg - a {
                j.c[a][b] = self.c[a][b];
            }
        }
        j
    }

    pub fn scale(&self, s: C64) -> Self {
        let mut j = *self;
        for a in 0..=self.deg {
            for b in 0..=self.deg - a {
                j.c[a][b] *= s;
            }
        }
        j
    }

    /// Substitute into a univariate function given `f^{(n)}(value)`, n = 0..=deg.
    pub fn compose(&self, derivs: &[C64]) -> Self {
        let deg = self.deg.min(derivs.len().saturating_sub(1));
        let mut delta = self.truncate(deg);
        delta.c[0][0] = C64::new(0.0, 0.0);
        let mut r = Self::constant(derivs[deg] / factorial(deg), deg);
        for n in (0..deg).rev() {
            r = r * delta;
            r.c[0][0] += derivs[n] / factorial(n);
        }
        r
    }

    pub fn exp(&self) -> Self {
        let e = self.value().exp();
        self.compose(&vec![e; self.deg + 1])
    }

    /// `self^p` for a real exponent; the value must be away from the branch cut.
    pub fn powf(&self, p: f64) -> Self {
        let v = self.value();
        let mut d = Vec::with_capacity(self.deg + 1);
        let mut coef = 1.0;
        for n in 0..=self.deg {
            d.push(v.powf(p - n as f64) * coef);
            coef *= p - n as f64;
        }
        self.compose(&d)
    }

    pub fn recip(&self) -> Self {
        self.powf(-1.0)
    }

    pub fn sqrt(&self) -> Self {
        self.powf(0.5)
    }

    pub fn diff_xi(&self) -> Self {
        let mut j = Self::zero(self.deg.saturating_sub(1));
        if self.deg == 0 {
            return j;
        }
        for a in 0..=j.deg {
            for b in 0..=j.deg - a {
                j.c[a][b] = self.c[a + 1][b] * (a + 1) as f64;
            }
        }
        j
    }

    pub fn diff_x(&self) -> Self {
        let mut j = Self::zero(self.deg.saturating_sub(1));
        if self.deg == 0 {
            return j;
        }
        for a in 0..=j.deg {
            for b in 0..=j.deg - a {
                j.c[a][b] = self.c[a][b + 1] * (b + 1) as f64;
            }
        }
        j
    }
}

impl Add for Jet {
    type Output = Jet;
    fn add(self, o: Jet) -> Jet {
        let deg = self.deg.min(o.deg);
        let mut j = Jet::zero(deg);
        for a in 0..=deg {
            for b in 0..=deg - a {
                j.c[a][b] = self.c[a][b] + o.c[a][b];
            }
        }
        j
    }
}

impl Sub for Jet {
    type Output = Jet;
    fn sub(self, o: Jet) -> Jet {
        self + (-o)
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(C64::new(-1.0, 0.0))
    }
}

impl Mul for Jet {
    type Output = Jet;
    fn mul(self, o: Jet) -> Jet {
        let deg = self.deg.min(o.deg);
        let mut j = Jet::zero(deg);
        for a1 in 0..=deg {
            for b1 in 0..=deg - a1 {
                let l = self.c[a1][b1];
                if l == C64::new(0.0, 0.0) {
                    continue;
                }
                let rest = deg - a1 - b1;
                for a2 in 0..=rest {
                    for b2 in 0..=rest - a2 {
                        j.c[a1 + a2][b1 + b2] += l * o.c[a2][b2];
                    }
                }
            }
        }
        j
    }
}

impl Mul<C64> for Jet {
    type Output = Jet;
    fn mul(self, s: C64) -> Jet {
        self.scale(s)
    }
}

impl Mul<f64> for Jet {
    type Output = Jet;
    fn mul(self, s: f64) -> Jet {
        self.scale(C64::new(s, 0.0))
    }
}

/// Real univariate Taylor jet; `c[n]` multiplies `dt^n`.
#[derive(Clone, Debug, PartialEq)]
pub struct Jet1 {
    c: Vec<f64>,
}

impl Jet1 {
    pub fn constant(v: f64, deg: usize) -> Self {
        let mut c = vec![0.0; deg + 1];
        c[0] = v;
        Self { c }
    }

    pub fn var(t0: f64, deg: usize) -> Self {
        let mut j = Self::constant(t0, deg);
        if deg >= 1 {
            j.c[1] = 1.0;
        }
        j
    }

    pub fn from_coeffs(c: Vec<f64>) -> Self {
        assert!(!c.is_empty());
        Self { c }
    }

    pub fn deg(&self) -> usize {
        self.c.len() - 1
    }

    pub fn value(&self) -> f64 {
        self.c[0]
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.c
    }

    /// n-th derivative at the expansion point.
    pub fn derivative(&self, n: usize) -> f64 {
        self.c.get(n).map_or(0.0, |v| v * factorial(n))
    }

    pub fn derivatives(&self) -> Vec<f64> {
        (0..=self.deg()).map(|n| self.derivative(n)).collect()
    }

    pub fn scale(&self, s: f64) -> Self {
        Self { c: self.c.iter().map(|v| v * s).collect() }
    }

    pub fn add(&self, o: &Self) -> Self {
        let d = self.deg().min(o.deg());
        Self { c: (0..=d).map(|n| self.c[n] + o.c[n]).collect() }
    }

    pub fn mul(&self, o: &Self) -> Self {
        let d = self.deg().min(o.deg());
        let mut c = vec![0.0; d + 1];
        for i in 0..=d {
            for k in 0..=d - i {
                c[i + k] += self.c[i] * o.c[k];
            }
        }
        Self { c }
    }

    pub fn compose(&self, derivs: &[f64]) -> Self {
        let d = self.deg().min(derivs.len() - 1);
        let mut delta = Self { c: self.c[..=d].to_vec() };
        delta.c[0] = 0.0;
        let mut r = Self::constant(derivs[d] / factorial(d), d);
        for n in (0..d).rev() {
            r = r.mul(&delta);
            r.c[0] += derivs[n] / factorial(n);
        }
        r
    }

    pub fn exp(&self) -> Self {
        self.compose(&vec![self.value().exp(); self.deg() + 1])
    }

    pub fn powf(&self, p: f64) -> Self {
        let v = self.value();
        let mut d = Vec::with_capacity(self.deg() + 1);
        let mut coef = 1.0;
        for n in 0..=self.deg() {
            d.push(coef * v.powf(p - n as f64));
            coef *= p - n as f64;
        }
        self.compose(&d)
    }

    pub fn recip(&self) -> Self {
        self.powf(-1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bracket_derivatives() {
        // <x>^{-1} at x = 0.5: first derivative -x <x>^{-3}
        let x = Jet1::var(0.5, 4);
        let br = x.mul(&x).add(&Jet1::constant(1.0, 4)).powf(-0.5);
        let q = 1.25f64;
        assert!((br.derivative(1) + 0.5 * q.powf(-1.5)).abs() < 1e-14);
        // second: (2x^2 - 1) <x>^{-5}
        assert!((br.derivative(2) - (2.0 * 0.25 - 1.0) * q.powf(-2.5)).abs() < 1e-13);
    }

    #[test]
    fn bivariate_product_rule() {
        let x = Jet::var_x(0.3, 6);
        let xi = Jet::var_xi(2.0, 6);
        // f = x^2 xi^3 e^{x xi}
        let f = x * x * xi * xi * xi * (x * xi).exp();
        let fx = |xv: f64, k: f64| xv * xv * k.powi(3) * (xv * k).exp();
        let e = 1e-4;
        let num = (fx(0.3 + e, 2.0 + e) - fx(0.3 + e, 2.0 - e) - fx(0.3 - e, 2.0 + e)
            + fx(0.3 - e, 2.0 - e))
            / (4.0 * e * e);
        let d = f.derivative(1, 1).unwrap().re;
        assert!((d - num).abs() / num.abs() < 1e-6);
        assert!(f.derivative(4, 3).is_none());
    }

    #[test]
    fn diff_matches_derivative() {
        let x = Jet::var_x(-0.7, 5);
        let xi = Jet::var_xi(1.5, 5);
        let f = (x * xi + Jet::constant(C64::new(3.0, 0.0), 5)).powf(0.5);
        let g = f.diff_xi().diff_x();
        assert!((g.value() - f.derivative(1, 1).unwrap()).norm() < 1e-13);
    }
}
