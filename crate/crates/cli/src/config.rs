//! Run configuration, read from a TOML file. Unknown keys are errors.
//!
//! ```toml
//! seed = 7
//! horizon = 1.0
//! output = "out"
//!
//! [model]
//! name = "ou_modulated_cox"
//! params = { lambda0 = 0.5, lambda_bump = 1.5, lambda_bar = 2.0, kappa = 1.0, theta = 0.0, sigma = 0.5 }
//!
//! [initial]
//! t0 = 0.0
//! z0 = [0.0]
//! l0 = 0.0
//!
//! [simulation]
//! dt_max = 0.01
//! n_paths = 100000
//! trajectories = 3
//!
//! [grid]
//! time_steps = 1000
//! axes = [{ lo = -4.0, hi = 4.0, nodes = 161 }]
//! l_lo = 0.0
//! l_hi = 4.0
//! dl = 1.0
//!
//! [solver]
//! mode = "fixed_point"   # or "imex"
//! tol = 1e-8
//! max_iter = 60
//! theta = 0.5
//!
//! [[probes]]
//! t = 0.0
//! z = [0.0]
//! l = 0.0
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use markov_pide::model::catalog::{build_catalog_model, ModelParams, ParamValue};
use markov_pide::model::validate::SamplingBox;
use markov_pide::model::{ModelSpec, State};
use markov_pide::pide::{Axis, GridSpec};
use markov_pide::verify::Probe;

use crate::Failure;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    pub horizon: f64,
    #[serde(default = "default_output")]
    pub output: PathBuf,
    pub model: ModelSection,
    #[serde(default)]
    pub initial: Initial,
    #[serde(default)]
    pub simulation: Simulation,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridSection>,
    #[serde(default)]
    pub solver: Solver,
    #[serde(default)]
    pub compare: Compare,
    #[serde(default)]
    pub validate: Validate,
    #[serde(default)]
    pub probes: Vec<ProbePoint>,
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub name: String,
    #[serde(default)]
    pub params: BTreeMap<String, Param>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Param {
    Number(f64),
    List(Vec<f64>),
    Text(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Initial {
    #[serde(default)]
    pub t0: f64,
    #[serde(default = "default_z0")]
    pub z0: Vec<f64>,
    #[serde(default)]
    pub l0: f64,
}

fn default_z0() -> Vec<f64> {
    vec![0.0]
}

impl Default for Initial {
    fn default() -> Self {
        Self {
            t0: 0.0,
            z0: default_z0(),
            l0: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Simulation {
    pub dt_max: f64,
    pub n_paths: usize,
    /// Paths written per measure by `simulate`.
    pub trajectories: usize,
}

impl Default for Simulation {
    fn default() -> Self {
        Self {
            dt_max: 0.01,
            n_paths: 100_000,
            trajectories: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub time_steps: usize,
    pub axes: Vec<AxisSection>,
    pub l_lo: f64,
    pub l_hi: f64,
    pub dl: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub jump_cap: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub interior_fraction: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxisSection {
    pub lo: f64,
    pub hi: f64,
    pub nodes: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    FixedPoint,
    Imex,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Solver {
    pub mode: Mode,
    pub tol: f64,
    pub max_iter: usize,
    pub theta: f64,
}

impl Default for Solver {
    fn default() -> Self {
        Self {
            mode: Mode::FixedPoint,
            tol: 1e-8,
            max_iter: 60,
            theta: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Compare {
    /// Absolute grid error budget; the solver's residual-based default when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub budget: Option<f64>,
    /// Also run the 3-grid regularity ladder (grid refined ×2 and ×4).
    pub regularity: bool,
}

impl Default for Compare {
    fn default() -> Self {
        Self {
            budget: None,
            regularity: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Validate {
    pub samples: usize,
    /// One `[lo, hi]` per z-coordinate; `[-5, 5]` each by default.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub z_box: Option<Vec<[f64; 2]>>,
    /// Defaults to `[l0, l0 + 5]`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub l_box: Option<[f64; 2]>,
}

impl Default for Validate {
    fn default() -> Self {
        Self {
            samples: 2000,
            z_box: None,
            l_box: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbePoint {
    pub t: f64,
    pub z: Vec<f64>,
    pub l: f64,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, Failure> {
        let cfg: Self = toml::from_str(text).map_err(|e| Failure::Config(format!("invalid config: {e}")))?;
        cfg.check()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, Failure> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|f| match f {
            Failure::Config(m) => Failure::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always representable as TOML")
    }

    /// SHA-256 of the canonical serialisation (after command-line overrides).
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_toml().as_bytes()))
    }

    fn check(&self) -> Result<(), Failure> {
        let bad = |field: &str, why: &str| Err(Failure::Config(format!("field `{field}`: {why}")));
        if !(self.horizon > self.initial.t0) || !self.horizon.is_finite() {
            return bad("horizon", "must be finite and greater than initial.t0");
        }
        if self.initial.z0.is_empty() {
            return bad("initial.z0", "needs at least one coordinate");
        }
        if !(self.simulation.dt_max > 0.0) {
            return bad("simulation.dt_max", "must be positive");
        }
        if self.simulation.n_paths < 2 {
            return bad("simulation.n_paths", "must be at least 2");
        }
        if !(self.solver.theta >= 0.5 && self.solver.theta <= 1.0) {
            return bad("solver.theta", "must lie in [0.5, 1]");
        }
        if !(self.solver.tol > 0.0) {
            return bad("solver.tol", "must be positive");
        }
        if let Some(g) = &self.grid {
            if g.axes.len() != self.initial.z0.len() {
                return bad("grid.axes", "needs one axis per z-coordinate");
            }
            if !(g.dl > 0.0) || !(g.l_hi >= g.l_lo) {
                return bad("grid.dl", "needs dl > 0 and l_hi >= l_lo");
            }
        }
        for (i, p) in self.probes.iter().enumerate() {
            if p.z.len() != self.initial.z0.len() {
                return bad(&format!("probes[{i}].z"), "wrong number of z-coordinates");
            }
        }
        Ok(())
    }

    pub fn model(&self) -> Result<ModelSpec<f64>, Failure> {
        let mut p = ModelParams::new();
        for (k, v) in &self.model.params {
            let v = match v {
                Param::Number(x) => ParamValue::Number(*x),
                Param::List(x) => ParamValue::List(x.clone()),
                Param::Text(s) => ParamValue::Text(s.clone()),
            };
            p.set(k, v);
        }
        let m = build_catalog_model(&self.model.name, &p).map_err(|e| Failure::Config(format!("[model]: {e}")))?;
        if m.dim_z() != self.initial.z0.len() {
            return Err(Failure::Config(format!(
                "field `initial.z0`: model `{}` has {} z-coordinate(s)",
                self.model.name,
                m.dim_z()
            )));
        }
        Ok(m)
    }

    pub fn initial_state(&self) -> State<f64> {
        State::new(self.initial.z0.clone(), self.initial.l0)
    }

    pub fn grid_spec(&self) -> Result<GridSpec<f64>, Failure> {
        let g = self
            .grid
            .as_ref()
            .ok_or_else(|| Failure::Config("missing [grid] section".into()))?;
        let axes = g.axes.iter().map(|a| Axis::new(a.lo, a.hi, a.nodes)).collect();
        let mut spec = GridSpec::new(self.horizon, g.time_steps, axes, (g.l_lo, g.l_hi), g.dl);
        if let Some(cap) = g.jump_cap {
            spec = spec.with_jump_cap(cap);
        }
        if let Some(f) = g.interior_fraction {
            spec = spec.with_interior_fraction(f);
        }
        Ok(spec)
    }

    /// Configured probes, or the initial state when none are given.
    pub fn probes(&self) -> Vec<Probe<f64>> {
        if self.probes.is_empty() {
            return vec![Probe::new(self.initial.t0, self.initial.z0.clone(), self.initial.l0)];
        }
        self.probes.iter().map(|p| Probe::new(p.t, p.z.clone(), p.l)).collect()
    }

    pub fn sampling_box(&self) -> SamplingBox<f64> {
        let z = match &self.validate.z_box {
            Some(b) => b.iter().map(|r| (r[0], r[1])).collect(),
            None => vec![(-5.0, 5.0); self.initial.z0.len()],
        };
        let l = self
            .validate
            .l_box
            .map_or((self.initial.l0, self.initial.l0 + 5.0), |b| (b[0], b[1]));
        SamplingBox::new((self.initial.t0, self.horizon), z, l)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const FULL: &str = r#"
seed = 7
horizon = 1
output = "results"

[model]
name = "compound_cox"
params = { lambda0 = 1, lambda_bar = 2.5, jump_sizes = [0.5, 1.0], payoff = "abs_level", strike = 1.5 }

[initial]
z0 = [0.25]
l0 = 1.0

[simulation]
dt_max = 0.005
n_paths = 5000

[grid]
time_steps = 200
axes = [{ lo = -3.0, hi = 3.0, nodes = 61 }]
l_lo = 0.0
l_hi = 4.0
dl = 0.5
jump_cap = 10

[solver]
mode = "imex"
theta = 1.0

[compare]
budget = 0.01

[[probes]]
t = 0.0
z = [0.0]
l = 1.0
"#;

    #[test]
    fn round_trip() {
        let cfg = RunConfig::parse(FULL).unwrap();
        assert_eq!(cfg.solver.mode, Mode::Imex);
        assert_eq!(cfg.model.params["lambda0"], Param::Number(1.0));
        assert_eq!(cfg.model.params["payoff"], Param::Text("abs_level".into()));
        let again = RunConfig::parse(&cfg.to_toml()).unwrap();
        assert_eq!(cfg, again);
        assert_eq!(cfg.hash(), again.hash());
        cfg.model().unwrap();
        cfg.grid_spec().unwrap();
    }

    #[test]
    fn minimal_config_gets_defaults() {
        let cfg =
            RunConfig::parse("horizon = 2.0\n[model]\nname = \"cox\"\nparams = { lambda0 = 1.0, lambda_bar = 1.0 }\n")
                .unwrap();
        assert_eq!(cfg.simulation, Simulation::default());
        assert_eq!(cfg.output, PathBuf::from("out"));
        assert!(cfg.grid.is_none());
        assert_eq!(RunConfig::parse(&cfg.to_toml()).unwrap(), cfg);
    }

    #[test]
    fn unknown_key_rejected_with_location() {
        let text = FULL.replace("dt_max = 0.005", "dt_maxx = 0.005");
        let Err(Failure::Config(msg)) = RunConfig::parse(&text) else {
            panic!("expected a config error")
        };
        assert!(msg.contains("dt_maxx"), "{msg}");
        assert!(msg.contains("line"), "{msg}");
    }

    #[test]
    fn field_checks() {
        let text = FULL.replace("theta = 1.0", "theta = 0.2");
        assert!(matches!(RunConfig::parse(&text), Err(Failure::Config(m)) if m.contains("solver.theta")));
        let text = FULL.replace("z = [0.0]", "z = [0.0, 1.0]");
        assert!(matches!(RunConfig::parse(&text), Err(Failure::Config(m)) if m.contains("probes[0].z")));
    }

    #[test]
    fn hash_tracks_content() {
        let a = RunConfig::parse(FULL).unwrap();
        let mut b = a.clone();
        b.seed = 8;
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
    }
}
