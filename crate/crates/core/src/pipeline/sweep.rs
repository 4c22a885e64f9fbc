//! Growth of a wave packet across σ with frozen constants.

use serde::{Deserialize, Serialize};

use super::assembly::Assembly;
use super::evolve::{evolve, report_spec, EvolveOptions, Packet, Scheme};
use crate::config::{BoundaryConfig, GevreyConfig};
use crate::error::{PevoError, Result};
use crate::grid::Grid;
use crate::norms::gs_norm;
use crate::problems::{make_preset, PresetOverrides};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSettings {
    pub sigmas: Vec<f64>,
    pub half_width: f64,
    pub n: usize,
    pub h: f64,
    #[serde(rename = "M")]
    pub m: Vec<f64>,
    #[serde(rename = "K", default)]
    pub k: f64,
    pub horizon: f64,
    pub steps: usize,
    pub scheme: Scheme,
    /// Packet; `None` places it at `0.1·l1` with carrier ≈ 7.3 and width 1.5,
    /// so a KdV packet drifts right through `x ∈ [2, 18]` by `T' = 0.1`.
    #[serde(default)]
    pub packet: Option<Packet>,
    #[serde(default)]
    pub boundary: BoundaryConfig,
}

impl Default for SweepSettings {
    fn default() -> Self {
        Self {
            sigmas: vec![0.4, 0.6, 0.8, 0.95],
            half_width: 32.0,
            n: 512,
            h: 4.0,
            m: vec![0.5, 0.5],
            k: 0.0,
            horizon: 0.1,
            steps: 64,
            scheme: Scheme::CrankNicolson,
            packet: None,
            boundary: BoundaryConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub sigma: f64,
    /// `‖u(T')‖/‖u(0)‖` at the reporting radius; absent on blowup.
    pub growth: Option<f64>,
    /// `ok` or `blowup`.
    pub status: String,
    pub detail: String,
    pub inversion_residual: f64,
}

impl SweepSettings {
    pub fn packet_for(&self, grid: &Grid) -> Packet {
        self.packet.clone().unwrap_or_else(|| {
            let l1 = self.boundary.inner * self.half_width;
            let step = grid.dxi();
            Packet { amplitude: 1.0, center: 0.1 * l1, width: 1.5, carrier: (7.3 / step).round() * step }
        })
    }
}

/// One row per σ for the named preset, each on its own worker thread.
/// Overflow or a failed inversion is recorded as `blowup`.
pub fn sigma_sweep(base: &GevreyConfig, preset: &str, overrides: &PresetOverrides, settings: &SweepSettings) -> Result<Vec<SweepRow>> {
    std::thread::scope(|scope| {
        let handles: Vec<_> = settings
            .sigmas
            .iter()
            .map(|&sigma| scope.spawn(move || sweep_row(base, preset, overrides, settings, sigma)))
            .collect();
        handles.into_iter().map(|h| h.join().expect("sweep worker panicked")).collect()
    })
}

fn sweep_row(base: &GevreyConfig, preset: &str, overrides: &PresetOverrides, settings: &SweepSettings, sigma: f64) -> Result<SweepRow> {
    let cfg = GevreyConfig { sigma, m: settings.m.clone(), k: settings.k, h: settings.h, ..base.clone() };
    cfg.validate_structure()?;
    let prob = make_preset(preset, &cfg, overrides)?;
    let grid = Grid::new(settings.half_width, settings.n, settings.h)?;
    let packet = settings.packet_for(&grid);
    let run = || -> Result<(f64, f64)> {
        let asm = Assembly::build(&prob, &grid, &settings.boundary, settings.boundary.sponge.unwrap_or(8.0))?;
        let res = asm.inversion.residual;
        let opts = EvolveOptions { steps: settings.steps, scheme: settings.scheme, t_end: Some(settings.horizon), m: 0.0 };
        let tr = evolve(&asm, &packet.state(&grid), None, opts)?;
        let spec = report_spec(0.0, 0.95 * cfg.rho_prime, cfg.theta);
        let a = gs_norm(&tr.u_states[0], &spec)?;
        let b = gs_norm(tr.u_states.last().unwrap(), &spec)?;
        Ok((b / a, res))
    };
    Ok(match run() {
        Ok((g, res)) => SweepRow { sigma, growth: Some(g), status: "ok".into(), detail: String::new(), inversion_residual: res },
        Err(e @ (PevoError::Overflow { .. } | PevoError::HTooSmall { .. } | PevoError::WeightOverflow { .. } | PevoError::SolveBreakdown { .. })) => {
            SweepRow { sigma, growth: None, status: "blowup".into(), detail: e.to_string(), inversion_residual: f64::NAN }
        }
        Err(e) => return Err(e),
    })
}
