//! Both sides of the energy inequality along a trajectory.

use serde::{Deserialize, Serialize};

use super::evolve::{report_spec, Trajectory};
use crate::config::GevreyConfig;
use crate::error::Result;
use crate::norms::gs_norm;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    pub m: f64,
    pub rho: f64,
    pub rho_tilde: f64,
    /// Gronwall rate: `max_k ln(‖v_k‖ / (‖v_0‖ + ∫‖Qf‖)) / t_k`.
    #[serde(rename = "C_prime")]
    pub c_prime: f64,
    /// `max_k ‖u_k‖²_{ρ̃} / (‖g‖²_ρ + ∫‖f‖²_ρ)`.
    #[serde(rename = "C")]
    pub c: f64,
    /// `max_k ‖u_k‖²_{ρ̃} / ‖u_0‖²_{ρ̃}`: same radius on both sides.
    #[serde(rename = "C_rel")]
    pub c_rel: f64,
    /// `max_k ‖u_k‖_ρ / ‖u_0‖_ρ`; allowed to exceed 1.
    pub growth_at_rho: f64,
    pub finite_at_rho_tilde: bool,
    pub max_roundtrip: f64,
    /// Left side `‖u_k‖²_{ρ̃}` at each time.
    pub lhs: Vec<f64>,
    /// `‖g‖²_ρ + ∫_0^{t_k}‖f‖²_ρ`.
    pub rhs: Vec<f64>,
    /// Both sides vanish identically.
    pub trivial: bool,
}

impl EnergyReport {
    /// `C · rhs`, the bound plotted against the left side.
    pub fn rhs_bound(&self) -> Vec<f64> {
        self.rhs.iter().map(|r| self.c * r).collect()
    }

    pub fn finite(&self) -> bool {
        self.c.is_finite() && self.c_prime.is_finite() && self.finite_at_rho_tilde
    }
}

/// Evaluate the estimate with `ρ̃ = rho_tilde` (default `0.95ρ'`).
pub fn energy_report(traj: &Trajectory, cfg: &GevreyConfig, m: f64, rho_tilde: Option<f64>) -> Result<EnergyReport> {
    let rt = rho_tilde.unwrap_or(0.95 * cfg.rho_prime);
    let spec_t = report_spec(m, rt, cfg.theta);
    let spec_r = report_spec(m, cfg.rho, cfg.theta);
    let lhs: Vec<f64> = traj.u_states.iter().map(|u| gs_norm(u, &spec_t).map(|v| v * v)).collect::<Result<_>>()?;
    let at_rho: Vec<f64> = traj.u_states.iter().map(|u| gs_norm(u, &spec_r)).collect::<Result<_>>()?;
    let trivial = lhs.iter().all(|&v| v == 0.0) && traj.rhs_raw.iter().all(|&v| v == 0.0);
    let ratio_max = |num: &[f64], den: &dyn Fn(usize) -> f64| {
        num.iter().enumerate().map(|(k, &a)| if den(k) > 0.0 { a / den(k) } else { 0.0 }).fold(0.0, f64::max)
    };
    let c = ratio_max(&lhs, &|k| traj.rhs_raw[k]);
    let c_rel = ratio_max(&lhs, &|_| lhs[0]);
    let growth_at_rho = ratio_max(&at_rho, &|_| at_rho[0]);
    let mut c_prime = f64::NEG_INFINITY;
    for k in 1..traj.times.len() {
        let base = traj.l2_v[0] + traj.qf_integral[k];
        if base > 0.0 && traj.l2_v[k] > 0.0 {
            c_prime = c_prime.max((traj.l2_v[k] / base).ln() / traj.times[k]);
        }
    }
    if !c_prime.is_finite() {
        c_prime = 0.0;
    }
    Ok(EnergyReport {
        m,
        rho: cfg.rho,
        rho_tilde: rt,
        c_prime,
        c,
        c_rel,
        growth_at_rho,
        finite_at_rho_tilde: lhs.iter().all(|v| v.is_finite()),
        max_roundtrip: traj.roundtrip.iter().copied().fold(0.0, f64::max),
        lhs,
        rhs: traj.rhs_raw.clone(),
        trivial,
    })
}
