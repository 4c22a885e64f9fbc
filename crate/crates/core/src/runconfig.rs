//! Run configuration: a preset document, user JSON merged on top, then
//! dotted `key=value` overrides.

use std::path::Path;

use num_complex::Complex64 as C64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

use crate::config::{BoundaryConfig, GevreyConfig};
use crate::error::{PevoError, Result};
use crate::grid::{Grid, StateVector};
use crate::pipeline::constants::FixedConstants;
use crate::pipeline::evolve::{Forcing, Packet, Scheme};
use crate::pipeline::sweep::SweepSettings;
use crate::problems::{make_preset, PresetOverrides, Problem};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSection {
    pub preset: String,
    #[serde(default)]
    pub overrides: PresetOverrides,
    /// Replaces the spatial decay exponent of each lower coefficient, `j = 1, 2, …`.
    #[serde(default)]
    pub lower_decay: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    #[serde(rename = "L")]
    pub half_width: f64,
    #[serde(rename = "N")]
    pub n: usize,
    /// Pins `h`; otherwise the pipeline picks it.
    #[serde(default)]
    pub h: Option<f64>,
}

/// Initial datum `g`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialData {
    Packet(Packet),
    /// Gaussian spectrum with weight `e^{-(ρ+1/4)⟨ξ⟩^{1/θ}}` on the dealias band, drawn from `run.seed`.
    Random { amplitude: f64 },
    Zero,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    #[serde(default = "default_steps")]
    pub steps: usize,
    #[serde(default = "default_scheme")]
    pub scheme: Scheme,
    #[serde(default)]
    pub seed: u64,
    /// Sobolev index of the reporting norms.
    #[serde(default)]
    pub m: f64,
    #[serde(default = "default_initial")]
    pub initial: InitialData,
    #[serde(default)]
    pub forcing: Option<Forcing>,
    #[serde(default = "default_t_samples")]
    pub t_samples: usize,
}

fn default_steps() -> usize {
    64
}
fn default_scheme() -> Scheme {
    Scheme::CrankNicolson
}
fn default_initial() -> InitialData {
    InitialData::Packet(Packet { amplitude: 1.0, center: 0.0, width: 2.0, carrier: 1.0 })
}
fn default_t_samples() -> usize {
    5
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            steps: default_steps(),
            scheme: default_scheme(),
            seed: 0,
            m: 0.0,
            initial: default_initial(),
            forcing: None,
            t_samples: default_t_samples(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: String,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { dir: "out".into() }
    }
}

/// Fully resolved configuration of one invocation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub problem: ProblemSection,
    pub grid: GridSection,
    pub gevrey: GevreyConfig,
    #[serde(default)]
    pub boundary: BoundaryConfig,
    #[serde(default)]
    pub constants: FixedConstants,
    #[serde(default)]
    pub run: RunSection,
    #[serde(default)]
    pub sweep: SweepSettings,
    #[serde(default)]
    pub outputs: OutputSection,
}

/// Defaults a config starts from before its own keys are merged in.
pub fn preset_document(name: &str) -> Result<Value> {
    let (gevrey, boundary) = match name {
        "kdv3" => (GevreyConfig::kdv3(), BoundaryConfig { inner: 0.375, outer: 0.5, ..Default::default() }),
        "schrodinger2" => (GevreyConfig::schrodinger2(), BoundaryConfig { inner: 0.375, outer: 0.5, ..Default::default() }),
        "kawahara5" => (GevreyConfig::kawahara5(), BoundaryConfig::default()),
        other => return Err(PevoError::InvalidConfig(format!("unknown preset '{other}'"))),
    };
    let sweep = SweepSettings { m: vec![0.5; gevrey.p as usize - 1], ..SweepSettings::default() };
    let doc = RunConfig {
        problem: ProblemSection { preset: name.into(), overrides: PresetOverrides::default(), lower_decay: None },
        grid: GridSection { half_width: 12.0, n: 256, h: None },
        gevrey,
        boundary,
        constants: FixedConstants::default(),
        run: RunSection::default(),
        sweep,
        outputs: OutputSection::default(),
    };
    Ok(serde_json::to_value(doc)?)
}

/// Recursive object merge; tagged objects of a different `kind` replace wholesale.
fn merge(base: &mut Value, top: Value) {
    match (base, top) {
        (Value::Object(b), Value::Object(t)) => {
            for (k, v) in t {
                match b.get_mut(&k) {
                    Some(slot) if slot.is_object() && v.is_object() && slot.get("kind") == v.get("kind") => merge(slot, v),
                    _ => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

/// Apply `a.b.c=value`; `value` is parsed as JSON and kept as a string otherwise.
pub fn apply_override(doc: &mut Value, spec: &str) -> Result<()> {
    let (key, raw) = spec
        .split_once('=')
        .ok_or_else(|| PevoError::InvalidConfig(format!("override '{spec}' is not key=value")))?;
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(PevoError::InvalidConfig(format!("malformed key '{key}'")));
    }
    let mut cur = doc;
    for (n, part) in parts.iter().enumerate() {
        let last = n + 1 == parts.len();
        cur = match cur {
            Value::Array(items) => {
                let i: usize = part
                    .parse()
                    .map_err(|_| PevoError::InvalidConfig(format!("'{part}' in '{key}' must index an array")))?;
                let len = items.len();
                items.get_mut(i).ok_or_else(|| PevoError::InvalidConfig(format!("index {i} out of range ({len}) in '{key}'")))?
            }
            Value::Object(map) => map.entry(part.to_string()).or_insert_with(|| Value::Object(Map::new())),
            other => {
                *other = Value::Object(Map::new());
                other.as_object_mut().expect("just set").entry(part.to_string()).or_insert(Value::Null)
            }
        };
        if last {
            *cur = value;
            return Ok(());
        }
    }
    Ok(())
}

impl RunConfig {
    /// Resolve a user document against its preset and validate it.
    pub fn from_value(user: Value, overrides: &[String]) -> Result<Self> {
        if !user.is_object() {
            return Err(PevoError::InvalidConfig("config must be a JSON object".into()));
        }
        // The preset may itself be overridden, so resolve it on a scratch copy.
        let mut probe = user.clone();
        for o in overrides {
            apply_override(&mut probe, o)?;
        }
        let preset = probe
            .pointer("/problem/preset")
            .and_then(Value::as_str)
            .ok_or_else(|| PevoError::InvalidConfig("problem.preset is required".into()))?
            .to_string();
        let mut doc = preset_document(&preset)?;
        merge(&mut doc, user);
        for o in overrides {
            apply_override(&mut doc, o)?;
        }
        let cfg: RunConfig = serde_json::from_value(doc).map_err(|e| PevoError::InvalidConfig(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| PevoError::InvalidConfig(format!("cannot read {}: {e}", path.display())))?;
        let v: Value = serde_json::from_str(&text).map_err(|e| PevoError::InvalidConfig(format!("{}: {e}", path.display())))?;
        Self::from_value(v, overrides)
    }

    pub fn validate(&self) -> Result<()> {
        self.gevrey.validate()?;
        self.boundary.validate()?;
        self.grid()?;
        self.problem()?;
        if self.run.steps == 0 {
            return Err(PevoError::InvalidConfig("run.steps must be positive".into()));
        }
        if self.run.t_samples < 2 {
            return Err(PevoError::InvalidConfig("run.t_samples must be at least 2".into()));
        }
        if let Some(m) = &self.constants.m {
            if m.len() != (self.gevrey.p - 1) as usize {
                return Err(PevoError::InvalidConfig(format!("constants.M needs {} entries", self.gevrey.p - 1)));
            }
        }
        Ok(())
    }

    /// SHA-256 of the resolved document, output location excluded.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.outputs = OutputSection::default();
        let bytes = serde_json::to_vec(&c).expect("config serializes");
        hex::encode(Sha256::digest(&bytes))
    }

    pub fn grid(&self) -> Result<Grid> {
        Grid::new(self.grid.half_width, self.grid.n, self.grid.h.unwrap_or(self.gevrey.h))
    }

    pub fn problem(&self) -> Result<Problem> {
        let mut prob = make_preset(&self.problem.preset, &self.gevrey, &self.problem.overrides)?;
        if let Some(d) = &self.problem.lower_decay {
            for c in prob.lower.iter_mut() {
                if let Some(&v) = d.get(c.j as usize - 1) {
                    c.decay = v;
                }
            }
        }
        Ok(prob)
    }

    /// Pinned constants, with `grid.h` taking precedence for `h`.
    pub fn fixed(&self) -> FixedConstants {
        FixedConstants { h: self.grid.h.or(self.constants.h), ..self.constants.clone() }
    }

    pub fn initial_state(&self, grid: &Grid) -> StateVector {
        match &self.run.initial {
            InitialData::Packet(p) => p.state(grid),
            InitialData::Zero => StateVector::zeros(grid),
            InitialData::Random { amplitude } => {
                let mut rng = ChaCha8Rng::seed_from_u64(self.run.seed);
                let edge = grid.band_edge();
                let rate = self.gevrey.rho + 0.25;
                let spec: Vec<C64> = grid
                    .xi_nodes()
                    .iter()
                    .map(|&xi| {
                        let (a, b): (f64, f64) = (StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng));
                        if xi.abs() > edge {
                            return C64::new(0.0, 0.0);
                        }
                        C64::new(a, b) * (amplitude * (-rate * grid.bracket(xi).powf(1.0 / self.gevrey.theta)).exp())
                    })
                    .collect();
                StateVector::from_spectrum(grid, spec).expect("grid-sized spectrum")
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn preset_defaults_and_overrides() {
        let c = RunConfig::from_value(json!({"problem": {"preset": "kdv3"}}), &[]).unwrap();
        assert_eq!(c.gevrey, GevreyConfig::kdv3());
        assert_eq!(c.grid.n, 256);
        let c = RunConfig::from_value(
            json!({"problem": {"preset": "kdv3"}, "grid": {"N": 128}}),
            &["gevrey.sigma=0.8".into(), "constants.M=[0,1]".into(), "run.scheme=strang_rk4".into()],
        )
        .unwrap();
        assert_eq!(c.grid.n, 128);
        assert_eq!(c.grid.half_width, 12.0);
        assert_eq!(c.gevrey.sigma, 0.8);
        assert_eq!(c.constants.m, Some(vec![0.0, 1.0]));
        assert_eq!(c.run.scheme, Scheme::StrangRk4);
        let c2 = RunConfig::from_value(json!({"problem": {"preset": "kdv3"}, "grid": {"N": 128}}), &["gevrey.M.1=3".into()]).unwrap();
        assert_eq!(c2.gevrey.m, vec![1.0, 3.0]);
    }

    #[test]
    fn rejects_bad_documents() {
        for (doc, ov) in [
            (json!({"grid": {"N": 128}}), vec![]),
            (json!({"problem": {"preset": "heat"}}), vec![]),
            (json!({"problem": {"preset": "kdv3"}, "bogus": 1}), vec![]),
            (json!({"problem": {"preset": "kdv3"}}), vec!["gevrey.sigma=0.4".to_string()]),
            (json!({"problem": {"preset": "kdv3"}}), vec!["grid.N=100".to_string()]),
            (json!({"problem": {"preset": "kdv3"}}), vec!["novalue".to_string()]),
            (json!({"problem": {"preset": "kdv3"}}), vec!["constants.M=[1]".to_string()]),
        ] {
            assert!(matches!(RunConfig::from_value(doc, &ov), Err(PevoError::InvalidConfig(_)) | Err(PevoError::InvalidGrid(_))));
        }
    }

    #[test]
    fn hash_ignores_output_dir_only() {
        let a = RunConfig::from_value(json!({"problem": {"preset": "kdv3"}}), &[]).unwrap();
        let b = RunConfig::from_value(json!({"problem": {"preset": "kdv3"}, "outputs": {"dir": "elsewhere"}}), &[]).unwrap();
        let c = RunConfig::from_value(json!({"problem": {"preset": "kdv3"}}), &["run.seed=3".into()]).unwrap();
        assert_eq!(a.hash(), b.hash());
        assert_ne!(a.hash(), c.hash());
        assert_eq!(a.hash().len(), 64);
    }

    #[test]
    fn random_data_follows_seed() {
        let a = RunConfig::from_value(json!({"problem": {"preset": "kdv3"}, "run": {"initial": {"kind": "random", "amplitude": 1.0}}}), &[]).unwrap();
        let g = a.grid().unwrap();
        let mut b = a.clone();
        assert_eq!(a.initial_state(&g).values(), b.initial_state(&g).values());
        b.run.seed = 1;
        assert_ne!(a.initial_state(&g).values(), b.initial_state(&g).values());
    }
}
