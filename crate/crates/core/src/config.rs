//! Parameter records shared by every stage.

use serde::{Deserialize, Serialize};

use crate::error::{PevoError, Result};

/// All constants of the well-posedness construction in one record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GevreyConfig {
    pub p: u32,
    pub sigma: f64,
    pub theta0: f64,
    pub theta: f64,
    #[serde(default = "default_mu")]
    pub mu: f64,
    #[serde(rename = "T")]
    pub t_final: f64,
    pub rho: f64,
    pub rho_prime: f64,
    #[serde(default = "default_h")]
    pub h: f64,
    #[serde(rename = "K", default)]
    pub k: f64,
    /// `M_{p-1}, …, M_1`, in that order.
    #[serde(rename = "M", default)]
    pub m: Vec<f64>,
    #[serde(default = "default_r_ap")]
    pub r_ap: f64,
}

fn default_mu() -> f64 {
    1.125
}
fn default_h() -> f64 {
    4.0
}
fn default_r_ap() -> f64 {
    2.0
}

impl GevreyConfig {
    /// Defaults used by the third-order preset.
    pub fn kdv3() -> Self {
        Self {
            p: 3,
            sigma: 0.9,
            theta0: 1.5,
            theta: 2.0,
            mu: 1.125,
            t_final: 0.1,
            rho: 1.0,
            rho_prime: 0.5,
            h: 4.0,
            k: 0.0,
            m: vec![1.0, 1.0],
            r_ap: 2.0,
        }
    }

    pub fn schrodinger2() -> Self {
        Self { p: 2, m: vec![1.0], ..Self::kdv3() }
    }

    pub fn kawahara5() -> Self {
        Self { p: 5, sigma: 0.95, theta: 3.0, m: vec![1.0; 4], ..Self::kdv3() }
    }

    /// `1/((p-1)(1-σ))`, the exclusive upper end of the admissible θ range.
    pub fn theta_max(&self) -> f64 {
        1.0 / ((self.p as f64 - 1.0) * (1.0 - self.sigma))
    }

    /// Decay exponent `(p-k)σ/(p-1)` attached to `λ_{p-k}` and `a_{p-k}`.
    pub fn decay(&self, k: u32) -> f64 {
        (self.p - k) as f64 * self.sigma / (self.p as f64 - 1.0)
    }

    /// `M_{p-k}`.
    pub fn m_for(&self, k: u32) -> f64 {
        self.m[(k - 1) as usize]
    }

    /// Order of the time weight, `(p-1)(1-σ)`.
    pub fn time_weight_order(&self) -> f64 {
        (self.p as f64 - 1.0) * (1.0 - self.sigma)
    }

    /// Checks every run needs, including sweeps below the σ threshold.
    pub fn validate_structure(&self) -> Result<()> {
        let bad = |m: String| Err(PevoError::InvalidConfig(m));
        if self.p < 2 {
            return bad(format!("p must be >= 2, got {}", self.p));
        }
        if !(self.sigma > 0.0 && self.sigma < 1.0) {
            return bad(format!("sigma must lie in (0,1), got {}", self.sigma));
        }
        if !(self.mu > 1.0) {
            return bad(format!("mu must exceed 1, got {}", self.mu));
        }
        if !(self.t_final > 0.0 && self.t_final.is_finite()) {
            return bad(format!("T must be positive, got {}", self.t_final));
        }
        if !(self.rho_prime >= 0.0 && self.rho_prime < self.rho) {
            return bad(format!(
                "need 0 <= rho_prime < rho, got rho_prime={} rho={}",
                self.rho_prime, self.rho
            ));
        }
        if !(self.h >= 1.0) {
            return bad(format!("h must be >= 1, got {}", self.h));
        }
        if !(self.k >= 0.0) {
            return bad(format!("K must be >= 0, got {}", self.k));
        }
        if self.m.len() != (self.p - 1) as usize {
            return bad(format!("M needs p-1 = {} entries, got {}", self.p - 1, self.m.len()));
        }
        if self.m.iter().any(|&v| !(v >= 0.0 && v.is_finite())) {
            return bad("M entries must be finite and >= 0".into());
        }
        if !(self.r_ap > 1.0) {
            return bad(format!("R_ap must exceed 1, got {}", self.r_ap));
        }
        Ok(())
    }

    /// Structure plus the σ, θ and decay conditions of the well-posed regime.
    pub fn validate(&self) -> Result<()> {
        self.validate_structure()?;
        let bad = |m: String| Err(PevoError::InvalidConfig(m));
        let lo = (self.p as f64 - 2.0) / (self.p as f64 - 1.0);
        if !(self.sigma > lo) {
            return bad(format!("sigma must exceed (p-2)/(p-1) = {lo}, got {}", self.sigma));
        }
        if !(self.theta0 > 1.0) {
            return bad(format!("theta0 must exceed 1, got {}", self.theta0));
        }
        if !(self.theta >= self.theta0 && self.theta < self.theta_max() * (1.0 - 1e-12)) {
            return bad(format!(
                "theta must lie in [theta0, {:.4}), got {}",
                self.theta_max(),
                self.theta
            ));
        }
        if self.m.iter().any(|&v| v <= 0.0) {
            return bad("M entries must be > 0".into());
        }
        Ok(())
    }
}

/// Treatment of the artificial boundary of the periodic box.
///
/// The physical region is `|x| ≤ inner·L`. Coefficients are blended to zero
/// between `inner·L` and `outer·L`, the change of variable is blended to zero
/// between `outer·L` and `L`, and a nonnegative sponge switches on across the
/// first layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryConfig {
    #[serde(default = "default_inner")]
    pub inner: f64,
    #[serde(default = "default_outer")]
    pub outer: f64,
    /// Sponge strength; `None` lets the pipeline pick it.
    #[serde(default)]
    pub sponge: Option<f64>,
    /// Restrict evolution to `|ξ| ≤ (2/3)ξ_max`.
    #[serde(default = "default_true")]
    pub dealias: bool,
}

fn default_inner() -> f64 {
    0.5625
}
fn default_outer() -> f64 {
    0.75
}
fn default_true() -> bool {
    true
}

impl Default for BoundaryConfig {
    fn default() -> Self {
        Self { inner: default_inner(), outer: default_outer(), sponge: None, dealias: true }
    }
}

impl BoundaryConfig {
    /// No blending at all: coefficients and Λ live on the whole box.
    pub fn none() -> Self {
        Self { inner: 1.0, outer: 1.0, sponge: Some(0.0), dealias: false }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.inner > 0.0 && self.inner <= self.outer && self.outer <= 1.0) {
            return Err(PevoError::InvalidConfig(format!(
                "boundary layers need 0 < inner <= outer <= 1, got {} / {}",
                self.inner, self.outer
            )));
        }
        if let Some(g) = self.sponge {
            if !(g >= 0.0 && g.is_finite()) {
                return Err(PevoError::InvalidConfig(format!("sponge must be >= 0, got {g}")));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_validate() {
        GevreyConfig::kdv3().validate().unwrap();
        GevreyConfig::schrodinger2().validate().unwrap();
        GevreyConfig::kawahara5().validate().unwrap();
    }

    #[test]
    fn rejects_low_sigma_and_theta() {
        let c = GevreyConfig { sigma: 0.5, ..GevreyConfig::kdv3() };
        assert!(c.validate().is_err());
        assert!(c.validate_structure().is_ok());
        let c = GevreyConfig { theta: 5.0, ..GevreyConfig::kdv3() };
        assert!(c.validate().is_err());
        let c = GevreyConfig { rho_prime: 1.0, ..GevreyConfig::kdv3() };
        assert!(c.validate_structure().is_err());
    }
}
