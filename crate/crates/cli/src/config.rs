//! Per-command config snapshots, the run manifest, and flag parsing helpers.
//!
//! Precedence is flags > config file > built-in defaults: each command
//! starts from its default snapshot, overlays `--config <file>` (the file
//! holds the same JSON object the manifest embeds), then applies explicit
//! flags.

use clothoid_arm::beam::{BeamParams, FixedPointOptions};
use clothoid_arm::dataset::GridConfig;
use clothoid_arm::learn::Hyperparams;
use clothoid_arm::quadrature::QuadratureConfig;
use clothoid_arm::{Error, Result};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use std::time::Instant;

pub const MANIFEST_SCHEMA: &str = "clothoid-arm-manifest/1";
pub const DEFAULT_SEED: u64 = 42;

/// Run provenance written next to each command's primary output.
#[derive(Serialize)]
struct RunManifest<'a, C: Serialize> {
    schema: &'static str,
    command: &'a str,
    version: &'static str,
    seed: u64,
    config: &'a C,
    inputs: &'a [String],
    outputs: &'a [String],
    duration_seconds: f64,
}

/// Write `<primary output>.manifest.json` (extension replaced).
pub fn write_manifest<C: Serialize>(
    primary_output: &Path,
    command: &str,
    seed: u64,
    config: &C,
    inputs: &[String],
    outputs: &[String],
    started: Instant,
) -> Result<PathBuf> {
    let manifest = RunManifest {
        schema: MANIFEST_SCHEMA,
        command,
        version: env!("CARGO_PKG_VERSION"),
        seed,
        config,
        inputs,
        outputs,
        duration_seconds: started.elapsed().as_secs_f64(),
    };
    let path = primary_output.with_extension("manifest.json");
    std::fs::write(&path, serde_json::to_string_pretty(&manifest)?)?;
    Ok(path)
}

/// Load a command config snapshot from JSON.
pub fn load_config<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text)
        .map_err(|e| Error::invalid_config(format!("config file {}: {e}", path.display())))
}

/// Serializable quadrature settings (the runtime config carries the
/// precomputed rule, so it is rebuilt from these).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QuadratureSettings {
    pub nodes_per_panel: usize,
    pub panels_per_length: usize,
}

impl Default for QuadratureSettings {
    fn default() -> Self {
        Self {
            nodes_per_panel: 8,
            panels_per_length: 64,
        }
    }
}

impl QuadratureSettings {
    pub fn build(&self) -> Result<QuadratureConfig> {
        QuadratureConfig::new(self.nodes_per_panel, self.panels_per_length)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimulateConfig {
    pub beam: BeamParams,
    pub fixed_point: FixedPointOptions,
    pub pressure_kpa: f64,
    pub payload_g: f64,
    /// When set, the tip load is a contact force (N) instead of the payload.
    pub contact_force_n: Option<f64>,
    pub contact_direction: [f64; 2],
}

impl Default for SimulateConfig {
    fn default() -> Self {
        Self {
            beam: BeamParams::default(),
            fixed_point: FixedPointOptions::default(),
            pressure_kpa: 0.0,
            payload_g: 0.0,
            contact_force_n: None,
            contact_direction: [-1.0, 0.0],
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StudyConfig {
    pub beam: BeamParams,
    pub fixed_point: FixedPointOptions,
    pub pressures_kpa: Vec<f64>,
    pub loads_n: Vec<f64>,
    pub kinds: Vec<String>,
    pub contact_direction: [f64; 2],
}

impl Default for StudyConfig {
    fn default() -> Self {
        Self {
            beam: BeamParams::default(),
            fixed_point: FixedPointOptions::default(),
            pressures_kpa: parse_range("0:100:25").expect("static range"),
            loads_n: parse_range("0.1:0.5:0.1").expect("static range"),
            kinds: vec!["payload".into()],
            contact_direction: [-1.0, 0.0],
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct GenerateConfig {
    pub beam: BeamParams,
    pub grid: GridConfig,
    pub quadrature: QuadratureSettings,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainConfig {
    pub role: String,
    pub val_count: usize,
    pub split_seed: u64,
    pub hyper: Hyperparams,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            role: "forward".into(),
            val_count: 40,
            split_seed: DEFAULT_SEED,
            hyper: Hyperparams::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalConfig {
    pub val_count: usize,
    pub split_seed: u64,
    pub quadrature: QuadratureSettings,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            val_count: 40,
            split_seed: DEFAULT_SEED,
            quadrature: QuadratureSettings::default(),
        }
    }
}

/// Parse `start:stop:step` into the inclusive grid `start + i*step`.
pub fn parse_range(text: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = text.split(':').collect();
    if parts.len() != 3 {
        return Err(Error::invalid_config(format!(
            "range must be start:stop:step, got {text:?}"
        )));
    }
    let nums: Vec<f64> = parts
        .iter()
        .map(|p| {
            p.parse::<f64>()
                .map_err(|e| Error::invalid_config(format!("range component {p:?}: {e}")))
        })
        .collect::<Result<_>>()?;
    let (start, stop, step) = (nums[0], nums[1], nums[2]);
    if !(step > 0.0 && stop >= start) || !start.is_finite() || !stop.is_finite() {
        return Err(Error::invalid_config(format!(
            "range {text:?} must have step > 0 and stop >= start"
        )));
    }
    let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
    Ok((0..count).map(|i| start + step * i as f64).collect())
}

/// Parse `dx,dy` into a 2-vector.
pub fn parse_pair(text: &str) -> Result<[f64; 2]> {
    let parts: Vec<&str> = text.split(',').collect();
    if parts.len() != 2 {
        return Err(Error::invalid_config(format!(
            "expected dx,dy, got {text:?}"
        )));
    }
    let x = parts[0]
        .trim()
        .parse::<f64>()
        .map_err(|e| Error::invalid_config(format!("component {:?}: {e}", parts[0])))?;
    let y = parts[1]
        .trim()
        .parse::<f64>()
        .map_err(|e| Error::invalid_config(format!("component {:?}: {e}", parts[1])))?;
    Ok([x, y])
}

/// Optional beam-parameter overrides shared by simulate/study/generate.
#[derive(Debug, Clone, clap::Args)]
pub struct BeamFlags {
    /// Actuator arc length in meters.
    #[arg(long)]
    pub length: Option<f64>,
    /// Flexural rigidity EI in N m^2.
    #[arg(long)]
    pub flexural_rigidity: Option<f64>,
    /// Actuation moment per unit pressure in N m / kPa.
    #[arg(long)]
    pub pressure_gain: Option<f64>,
    /// Distributed self-weight in N/m.
    #[arg(long)]
    pub self_weight: Option<f64>,
    /// Stations in the beam discretization.
    #[arg(long)]
    pub nodes: Option<usize>,
}

impl BeamFlags {
    pub fn apply(&self, params: &mut BeamParams) {
        if let Some(v) = self.length {
            params.length = v;
        }
        if let Some(v) = self.flexural_rigidity {
            params.flexural_rigidity = v;
        }
        if let Some(v) = self.pressure_gain {
            params.pressure_gain = v;
        }
        if let Some(v) = self.self_weight {
            params.self_weight = v;
        }
        if let Some(v) = self.nodes {
            params.nodes = v;
        }
    }
}
