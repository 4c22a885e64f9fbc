//! Time stepping of `∂_t v = −M(t)v + iQ(t)f` on the evolved band.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use super::assembly::{restrict, Assembly};
use super::spectral_l2;
use crate::error::{PevoError, Result};
use crate::grid::{Grid, StateVector};
use crate::linalg::{hermitian_function, hermitian_part, CMat, CVec, Lu};
use crate::norms::{gs_norm_unchecked, GevreyNormSpec};
use crate::problems::TimeProfile;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    CrankNicolson,
    /// Exact half-steps of `a_p D^p`, RK4 on the remainder.
    StrangRk4,
}

impl std::str::FromStr for Scheme {
    type Err = PevoError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "crank_nicolson" => Ok(Self::CrankNicolson),
            "strang_rk4" => Ok(Self::StrangRk4),
            o => Err(PevoError::InvalidConfig(format!("unknown scheme '{o}'"))),
        }
    }
}

/// Gaussian wave packet `amplitude · e^{-(x-center)²/(2 width²)} e^{i carrier x}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Packet {
    pub amplitude: f64,
    pub center: f64,
    pub width: f64,
    pub carrier: f64,
}

impl Packet {
    pub fn state(&self, grid: &Grid) -> StateVector {
        StateVector::from_fn(grid, |x| {
            let d = (x - self.center) / self.width;
            C64::from_polar(self.amplitude * (-0.5 * d * d).exp(), self.carrier * x)
        })
    }
}

/// Source term `f(t, x) = time(t) · packet(x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forcing {
    pub packet: Packet,
    #[serde(default = "constant")]
    pub time: TimeProfile,
}

fn constant() -> TimeProfile {
    TimeProfile::Constant
}

impl Forcing {
    pub fn state(&self, grid: &Grid, t: f64, t_final: f64) -> StateVector {
        let s = self.time.value(t, t_final);
        let base = self.packet.state(grid);
        StateVector::new(grid, base.values().iter().map(|z| z * s).collect()).expect("same grid")
    }
}

/// Norm channels and states along a run.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub v_states: Vec<StateVector>,
    pub u_states: Vec<StateVector>,
    pub l2_v: Vec<f64>,
    pub l2_u: Vec<f64>,
    /// `‖u‖` at the reduced radius `0.95ρ'` (h = 1).
    pub gs_u: Vec<f64>,
    /// `‖g‖²_ρ + ∫_0^t ‖f‖²_ρ`.
    pub rhs_raw: Vec<f64>,
    /// `∫_0^t ‖Q f‖_{L²}`.
    pub qf_integral: Vec<f64>,
    /// `d/dt ‖v‖²` by differences.
    pub energy_series: Vec<f64>,
    /// `‖Q u_k − v_k‖ / ‖v_k‖`.
    pub roundtrip: Vec<f64>,
    pub scheme: Scheme,
    pub steps: usize,
    pub m: f64,
}

/// Norm spec used for reporting: h = 1.
pub fn report_spec(m: f64, rho: f64, theta: f64) -> GevreyNormSpec {
    GevreyNormSpec { m, rho, theta, h: 1.0 }
}

/// Run options.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvolveOptions {
    pub steps: usize,
    pub scheme: Scheme,
    /// Final time; defaults to `T` of the configuration.
    pub t_end: Option<f64>,
    /// Sobolev index of the reported norms.
    pub m: f64,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        Self { steps: 64, scheme: Scheme::CrankNicolson, t_end: None, m: 0.0 }
    }
}

struct Stepper<'a> {
    asm: &'a Assembly,
    f: Option<&'a Forcing>,
    f_hat: Option<Vec<C64>>,
}

impl Stepper<'_> {
    /// `i Π W(t) E f̂(t)` on the band.
    fn source(&self, t: f64) -> Result<Option<CVec>> {
        let (Some(f), Some(fh)) = (self.f, &self.f_hat) else { return Ok(None) };
        let cfg = self.asm.cfg();
        let s = f.time.value(t, cfg.t_final);
        let w = self.asm.weights(t)?;
        let band = &self.asm.band;
        let v = CVec::from_iterator(
            band.len(),
            band.iter().map(|&r| {
                let e: C64 = (0..fh.len()).map(|l| self.asm.e_hat[(r, l)] * fh[l]).sum();
                C64::new(0.0, 1.0) * e * w[r] * s
            }),
        );
        Ok(Some(v))
    }
}

fn check(v: f64, channel: &str, t: f64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(PevoError::Overflow { channel: channel.into(), t })
    }
}

fn embed(n: usize, band: &[usize], v: &CVec) -> Vec<C64> {
    let mut out = vec![C64::new(0.0, 0.0); n];
    for (a, &r) in band.iter().enumerate() {
        out[r] = v[a];
    }
    out
}

/// Solve the auxiliary problem from `v(0) = Q(0)g` and recover `u = Q⁻¹v` at every step.
pub fn evolve(asm: &Assembly, g: &StateVector, f: Option<&Forcing>, opts: EvolveOptions) -> Result<Trajectory> {
    let grid = &asm.grid;
    if g.grid().n() != grid.n() || g.grid().half_width() != grid.half_width() {
        return Err(PevoError::GridMismatch);
    }
    if opts.steps < 16 {
        return Err(PevoError::InvalidConfig(format!("need at least 16 steps, got {}", opts.steps)));
    }
    let cfg = asm.cfg().clone();
    let t_end = opts.t_end.unwrap_or(cfg.t_final);
    let n = grid.n();
    let band = &asm.band;
    let nb = band.len();
    let dt = t_end / opts.steps as f64;
    let f_hat = f.map(|f| grid.kernel_fwd(f.packet.state(grid).values()));
    let stepper = Stepper { asm, f, f_hat };

    let g_hat = grid.kernel_fwd(g.values());
    let w0 = asm.weights(0.0)?;
    let mut v = CVec::from_iterator(
        nb,
        band.iter().map(|&r| (0..n).map(|l| asm.e_hat[(r, l)] * g_hat[l]).sum::<C64>() * w0[r]),
    );
    let e_inv_band = CMat::from_fn(n, nb, |r, a| asm.e_inv_hat[(r, band[a])]);
    let spec_t = report_spec(opts.m, 0.95 * cfg.rho_prime, cfg.theta);
    let spec_rho = report_spec(opts.m, cfg.rho, cfg.theta);
    let dx = grid.dx();
    let g_rho = gs_norm_unchecked(grid, &g_hat.iter().map(|z| z * dx).collect::<Vec<_>>(), &spec_rho)?;

    let mut tr = Trajectory {
        times: Vec::new(),
        v_states: Vec::new(),
        u_states: Vec::new(),
        l2_v: Vec::new(),
        l2_u: Vec::new(),
        gs_u: Vec::new(),
        rhs_raw: Vec::new(),
        qf_integral: Vec::new(),
        energy_series: Vec::new(),
        roundtrip: Vec::new(),
        scheme: opts.scheme,
        steps: opts.steps,
        m: opts.m,
    };
    let f_norm_rho = |t: f64| -> Result<f64> {
        match f {
            None => Ok(0.0),
            Some(f) => {
                let s = f.state(grid, t, cfg.t_final);
                gs_norm_unchecked(grid, s.spectrum(), &spec_rho)
            }
        }
    };
    let qf_norm = |t: f64| -> Result<f64> {
        Ok(match stepper.source(t)? {
            Some(q) => spectral_l2(grid, q.as_slice()),
            None => 0.0,
        })
    };
    let record = |tr: &mut Trajectory, t: f64, v: &CVec, rhs: f64, qf: f64| -> Result<()> {
        let w = asm.weights(t)?;
        let scaled = CVec::from_iterator(nb, band.iter().enumerate().map(|(a, &r)| v[a] / w[r]));
        let u_hat = &e_inv_band * scaled;
        let u_vals: Vec<C64> = grid.kernel_inv(u_hat.as_slice()).into_iter().map(|z| z / n as f64).collect();
        // Q u − v, with Q = W E.
        let qu = &asm.e_hat * &u_hat;
        let v_full = embed(n, band, v);
        let diff: Vec<C64> = (0..n).map(|r| qu[r] * w[r] - v_full[r]).collect();
        let lv = check(spectral_l2(grid, v.as_slice()), "l2_v", t)?;
        let lu = check(spectral_l2(grid, u_hat.as_slice()), "l2_u", t)?;
        let u_spec: Vec<C64> = u_hat.iter().map(|z| z * dx).collect();
        let gs = check(gs_norm_unchecked(grid, &u_spec, &spec_t)?, "gs_u", t)?;
        tr.times.push(t);
        tr.v_states.push(StateVector::new(grid, grid.kernel_inv(&v_full).into_iter().map(|z| z / n as f64).collect())?);
        tr.u_states.push(StateVector::new(grid, u_vals)?);
        tr.l2_v.push(lv);
        tr.l2_u.push(lu);
        tr.gs_u.push(gs);
        tr.rhs_raw.push(rhs);
        tr.qf_integral.push(qf);
        tr.roundtrip.push(if lv > 0.0 { spectral_l2(grid, &diff) / lv } else { spectral_l2(grid, &diff) });
        Ok(())
    };

    let mut rhs = g_rho * g_rho;
    let mut qf_int = 0.0;
    let mut f_prev = f_norm_rho(0.0)?;
    let mut q_prev = qf_norm(0.0)?;
    record(&mut tr, 0.0, &v, rhs, qf_int)?;
    match opts.scheme {
        Scheme::CrankNicolson => {
            let id = CMat::identity(nb, nb);
            let mut m_prev = asm.band_generator(0.0)?;
            for k in 0..opts.steps {
                let t0 = k as f64 * dt;
                let t1 = t0 + dt;
                let m_next = asm.band_generator(t1)?;
                let mut b = (&id - &m_prev * C64::new(0.5 * dt, 0.0)) * &v;
                if let Some(q) = stepper.source(t0 + 0.5 * dt)? {
                    b += q * C64::new(dt, 0.0);
                }
                let lu = Lu::new(&id + &m_next * C64::new(0.5 * dt, 0.0)).ok_or_else(|| PevoError::SolveBreakdown {
                    t: t1,
                    detail: "Crank–Nicolson matrix is numerically singular".into(),
                })?;
                v = lu.solve(&b).ok_or_else(|| PevoError::SolveBreakdown { t: t1, detail: "solve failed".into() })?;
                m_prev = m_next;
                let (fa, qa) = (f_norm_rho(t1)?, qf_norm(t1)?);
                rhs += 0.5 * dt * (f_prev * f_prev + fa * fa);
                qf_int += 0.5 * dt * (q_prev + qa);
                (f_prev, q_prev) = (fa, qa);
                record(&mut tr, t1, &v, rhs, qf_int)?;
            }
        }
        Scheme::StrangRk4 => {
            let p = asm.prob.p as i32;
            let xi: Vec<f64> = band.iter().map(|&r| grid.xi_nodes()[r]).collect();
            let cap = 0.5 * dx.powf(p as f64 / 2.0);
            let sub = (dt / cap).ceil().max(1.0) as usize;
            let tau = dt / sub as f64;
            // The sponge and the K term are constant and Hermitian: stepped exactly.
            let mut damp = restrict(&asm.sponge_unit, &asm.band) * C64::new(asm.sponge, 0.0);
            for (k, &r) in asm.band.iter().enumerate() {
                damp[(k, k)] += asm.prob.cfg.k * asm.k_symbol[r];
            }
            let damp = hermitian_part(&damp);
            let damp_half = hermitian_function(&damp, |l| (-0.5 * tau * l).exp());
            // Remainder R(t) = M(t) − diag(i a_p(t) ξ^p) − damping.
            let rem = |t: f64| -> Result<CMat> {
                let mut m = asm.band_generator(t)? - &damp;
                let a = asm.prob.leading(t);
                for (k, &x) in xi.iter().enumerate() {
                    m[(k, k)] -= C64::new(0.0, a * x.powi(p));
                }
                Ok(m)
            };
            let half = |v: &mut CVec, t: f64, h: f64| {
                let a = asm.prob.leading(t);
                for (k, &x) in xi.iter().enumerate() {
                    v[k] *= C64::from_polar(1.0, -a * x.powi(p) * h);
                }
            };
            let rhs_fn = |r: &CMat, t: f64, v: &CVec| -> Result<CVec> {
                let mut out = -(r * v);
                if let Some(q) = stepper.source(t)? {
                    out += q;
                }
                Ok(out)
            };
            for k in 0..opts.steps {
                for s in 0..sub {
                    let t0 = k as f64 * dt + s as f64 * tau;
                    v = &damp_half * &v;
                    half(&mut v, t0 + 0.25 * tau, 0.5 * tau);
                    let r0 = rem(t0)?;
                    let norm_inf = (0..nb).map(|a| r0.row(a).iter().map(|z| z.norm()).sum::<f64>()).fold(0.0, f64::max);
                    let inner = ((tau * norm_inf) / 2.0).ceil().max(1.0) as usize;
                    let h = tau / inner as f64;
                    for q in 0..inner {
                        let ta = t0 + q as f64 * h;
                        let ra = if q == 0 { r0.clone() } else { rem(ta)? };
                        let rm = rem(ta + 0.5 * h)?;
                        let rb = rem(ta + h)?;
                        let k1 = rhs_fn(&ra, ta, &v)?;
                        let k2 = rhs_fn(&rm, ta + 0.5 * h, &(&v + &k1 * C64::new(0.5 * h, 0.0)))?;
                        let k3 = rhs_fn(&rm, ta + 0.5 * h, &(&v + &k2 * C64::new(0.5 * h, 0.0)))?;
                        let k4 = rhs_fn(&rb, ta + h, &(&v + &k3 * C64::new(h, 0.0)))?;
                        v += (k1 + k2 * C64::new(2.0, 0.0) + k3 * C64::new(2.0, 0.0) + k4) * C64::new(h / 6.0, 0.0);
                    }
                    half(&mut v, t0 + 0.75 * tau, 0.5 * tau);
                    v = &damp_half * &v;
                }
                let t1 = (k + 1) as f64 * dt;
                let (fa, qa) = (f_norm_rho(t1)?, qf_norm(t1)?);
                rhs += 0.5 * dt * (f_prev * f_prev + fa * fa);
                qf_int += 0.5 * dt * (q_prev + qa);
                (f_prev, q_prev) = (fa, qa);
                record(&mut tr, t1, &v, rhs, qf_int)?;
            }
        }
    }
    let e: Vec<f64> = tr.l2_v.iter().map(|x| x * x).collect();
    let s = e.len();
    tr.energy_series = (0..s)
        .map(|k| match k {
            0 => (e[1] - e[0]) / dt,
            k if k == s - 1 => (e[k] - e[k - 1]) / dt,
            k => (e[k + 1] - e[k - 1]) / (2.0 * dt),
        })
        .collect();
    Ok(tr)
}

/// Restrict to the evolved band (exposed for diagnostics).
pub fn band_matrix(asm: &Assembly, m: &CMat) -> CMat {
    restrict(m, &asm.band)
}
