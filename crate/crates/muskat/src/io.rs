//! Persistence: curve snapshots, run configuration, and the diagnostics CSV.
//!
//! Snapshots are single JSON objects with full-precision (shortest
//! round-trip) floats. The diagnostics CSV uses a fixed 17-significant-digit
//! scientific format so identical runs produce byte-identical files.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::conformal::TildeState;
use crate::curve::PeriodicCurve;
use crate::diagnostics::DiagnosticsConfig;
use crate::dynamics::EvolutionOptions;
use crate::error::{Error, Result};
use crate::scenarios::Scenario;
use crate::vorticity::FluidParams;

pub const SNAPSHOT_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Snapshot {
    pub version: u32,
    pub t: f64,
    pub domain: String,
    pub n_points: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub branch_angle: Option<f64>,
    pub p1: Vec<f64>,
    pub p2: Vec<f64>,
}

impl Snapshot {
    pub fn physical(curve: &PeriodicCurve, t: f64) -> Self {
        Self {
            version: SNAPSHOT_VERSION,
            t,
            domain: "physical".into(),
            n_points: curve.n(),
            branch_angle: None,
            p1: curve.p1().to_vec(),
            p2: curve.p2().to_vec(),
        }
    }

    pub fn tilde(state: &TildeState, t: f64) -> Self {
        Self {
            version: SNAPSHOT_VERSION,
            t,
            domain: "tilde".into(),
            n_points: state.curve.n(),
            branch_angle: Some(state.branch_angle),
            p1: state.curve.p1().to_vec(),
            p2: state.curve.p2().to_vec(),
        }
    }

    pub fn is_tilde(&self) -> bool {
        self.domain == "tilde"
    }

    /// Reconstruct the curve; tilde snapshots yield closed image curves.
    pub fn to_curve(&self) -> Result<PeriodicCurve> {
        if self.p1.len() != self.n_points || self.p2.len() != self.n_points {
            return Err(Error::Snapshot(format!(
                "sample count {} does not match n_points {}",
                self.p1.len(),
                self.n_points
            )));
        }
        match self.domain.as_str() {
            "physical" => PeriodicCurve::open(self.p1.clone(), self.p2.clone()),
            "tilde" => PeriodicCurve::closed(self.p1.clone(), self.p2.clone()),
            other => Err(Error::Snapshot(format!("unknown domain tag {other:?}"))),
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut file = fs::File::create(path)?;
        serde_json::to_writer_pretty(&mut file, self)?;
        file.write_all(b"\n")?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let snap: Snapshot = serde_json::from_str(&text)
            .map_err(|e| Error::Snapshot(format!("{}: {e}", path.display())))?;
        if snap.version != SNAPSHOT_VERSION {
            return Err(Error::Snapshot(format!(
                "unsupported snapshot version {} (expected {})",
                snap.version, SNAPSHOT_VERSION
            )));
        }
        Ok(snap)
    }
}

/// Conformal-probe settings attached to a run.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ProbeConfig {
    pub enabled: bool,
    /// Branch for the frame map; `None` takes the scenario's recommendation.
    pub branch_angle: Option<f64>,
    /// Arc-chord level at which the runner emits an image-frame snapshot.
    pub trigger_arc_chord: f64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self { enabled: false, branch_angle: None, trigger_arc_chord: 1e4 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub scenario: Scenario,
    pub n_points: usize,
    pub fluid: FluidParams,
    pub evolution: EvolutionOptions,
    pub diagnostics: DiagnosticsConfig,
    pub probe: ProbeConfig,
    pub out_dir: PathBuf,
    /// Seed recorded when the scenario was generated from one.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            scenario: Scenario::graph_simple(0.1),
            n_points: 64,
            fluid: FluidParams::unit(),
            evolution: EvolutionOptions::default(),
            diagnostics: DiagnosticsConfig::default(),
            probe: ProbeConfig::default(),
            out_dir: PathBuf::from("out"),
            seed: None,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let cfg: RunConfig = serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Ok(cfg)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut file = fs::File::create(path)?;
        serde_json::to_writer_pretty(&mut file, self)?;
        file.write_all(b"\n")?;
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        if self.n_points < 16 || self.n_points % 2 != 0 {
            return Err(Error::Config(format!(
                "n_points must be even and at least 16, got {}",
                self.n_points
            )));
        }
        self.evolution.validate(self.n_points)?;
        if !(self.probe.trigger_arc_chord > 0.0) {
            return Err(Error::Config("probe trigger must be positive".into()));
        }
        if self.diagnostics.every == 0 {
            return Err(Error::Config("diagnostics cadence must be at least 1".into()));
        }
        Ok(())
    }

    pub fn branch_angle(&self) -> f64 {
        self.probe
            .branch_angle
            .unwrap_or_else(|| self.scenario.recommended_branch_angle())
    }

    /// Environment overrides, prefix MUSKAT_ (applied between the config
    /// file and command-line flags).
    pub fn apply_env_overrides(&mut self) -> Result<()> {
        fn parse<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
            v.parse()
                .map_err(|_| Error::Config(format!("cannot parse {key}={v:?}")))
        }
        if let Ok(v) = std::env::var("MUSKAT_N") {
            self.n_points = parse("MUSKAT_N", &v)?;
        }
        if let Ok(v) = std::env::var("MUSKAT_DT") {
            self.evolution.dt = Some(parse("MUSKAT_DT", &v)?);
        }
        if let Ok(v) = std::env::var("MUSKAT_T_END") {
            self.evolution.t_end = parse("MUSKAT_T_END", &v)?;
        }
        if let Ok(v) = std::env::var("MUSKAT_OUT") {
            self.out_dir = PathBuf::from(v);
        }
        if let Ok(v) = std::env::var("MUSKAT_SEED") {
            let seed = parse("MUSKAT_SEED", &v)?;
            self.seed = Some(seed);
            self.scenario = reseed(&self.scenario, seed);
        }
        if let Ok(v) = std::env::var("MUSKAT_SCENARIO") {
            self.scenario = Scenario::parse_spec(&v, self.seed)?;
        }
        if let Ok(v) = std::env::var("MUSKAT_BRANCH_ANGLE") {
            self.probe.branch_angle = Some(parse("MUSKAT_BRANCH_ANGLE", &v)?);
        }
        if let Ok(v) = std::env::var("MUSKAT_PROBE") {
            self.probe.enabled = matches!(v.as_str(), "1" | "true" | "on");
        }
        Ok(())
    }
}

fn reseed(scenario: &Scenario, seed: u64) -> Scenario {
    match scenario {
        Scenario::Graph { modes } if !modes.is_empty() => {
            let amp = modes[0].amplitude;
            Scenario::graph_seeded(amp, modes.len().max(1), seed)
        }
        other => other.clone(),
    }
}

impl Scenario {
    /// Parse a compact scenario spec: "flat", "graph", "graph:a1=0.2",
    /// "graph:a=0.1,modes=4" (random phases from `seed`),
    /// "neck:d=0.05,l=0.5".
    pub fn parse_spec(spec: &str, seed: Option<u64>) -> Result<Self> {
        let (name, args) = match spec.split_once(':') {
            Some((n, a)) => (n, a),
            None => (spec, ""),
        };
        let mut kv = std::collections::BTreeMap::new();
        for part in args.split(',').filter(|s| !s.is_empty()) {
            let (k, v) = part
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("bad scenario argument {part:?}")))?;
            let v: f64 = v
                .parse()
                .map_err(|_| Error::Config(format!("bad scenario value {part:?}")))?;
            kv.insert(k.trim().to_string(), v);
        }
        let scenario = match name.trim() {
            "flat" => Scenario::Flat,
            "graph" => {
                if let Some(&m) = kv.get("modes") {
                    let amp = kv.get("a").copied().unwrap_or(0.1);
                    Scenario::graph_seeded(amp, m as usize, seed.unwrap_or(0))
                } else {
                    Scenario::graph_simple(kv.get("a1").copied().unwrap_or(0.1))
                }
            }
            "neck" => Scenario::Neck {
                d: kv.get("d").copied().unwrap_or(0.05),
                l: kv.get("l").copied().unwrap_or(0.5),
            },
            other => return Err(Error::Config(format!("unknown scenario {other:?}"))),
        };
        scenario.validate()?;
        Ok(scenario)
    }
}
