//! Run configuration: one JSON file plus repeatable `--set key=value`
//! overrides addressed by dotted paths.

use std::path::{Path, PathBuf};

use eit_core::error::{Error, Result};
use eit_core::fem::BasisKind;
use eit_core::monotonicity::{AlgorithmId, BetaSchedule, ReconstructionConfig};
use eit_core::synthdata::InclusionSign;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MeshSection {
    /// Reconstruction mesh scale.
    pub target_h: f64,
    /// Simulation meshes are finer by this factor (node count grows with
    /// its square); ignored in inverse-crime mode.
    #[serde(default = "default_sim_refine")]
    pub sim_refine: f64,
    /// Simulate on the reconstruction mesh (property-test mode).
    #[serde(default)]
    pub inverse_crime: bool,
    /// Optional mesh file to load instead of generating.
    #[serde(default)]
    pub file: Option<PathBuf>,
}

fn default_sim_refine() -> f64 {
    1.9
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ElectrodeSection {
    pub k: usize,
    #[serde(default = "default_coverage")]
    pub coverage: f64,
}

fn default_coverage() -> f64 {
    0.5
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CellSection {
    pub diam: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BetaValue {
    Single(f64),
    List(Vec<f64>),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReconstructionSection {
    pub algorithm: u8,
    pub beta: BetaValue,
    pub mu: f64,
    #[serde(default = "default_sign")]
    pub sign: InclusionSign,
    /// Bypasses the data-driven regularization rule when set.
    #[serde(default)]
    pub fixed_alpha: Option<f64>,
}

fn default_sign() -> InclusionSign {
    InclusionSign::Conductive
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NoiseSection {
    #[serde(default)]
    pub sigma: f64,
    #[serde(default = "default_seed")]
    pub seed: u64,
}

fn default_seed() -> u64 {
    1
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SandwichSection {
    #[serde(default = "default_sandwich_beta")]
    pub beta: f64,
    #[serde(default = "default_sandwich_sigmas")]
    pub noise_sigmas: Vec<f64>,
    #[serde(default = "default_sandwich_diam")]
    pub cell_diam: f64,
    #[serde(default = "default_reference_p")]
    pub reference_p: usize,
    #[serde(default = "default_sandwich_h")]
    pub target_h: f64,
}

fn default_sandwich_beta() -> f64 {
    0.5
}

fn default_sandwich_sigmas() -> Vec<f64> {
    vec![0.0, 5e-3]
}

fn default_sandwich_diam() -> f64 {
    0.3
}

fn default_reference_p() -> usize {
    64
}

fn default_sandwich_h() -> f64 {
    0.035
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConvergenceSection {
    pub ks: Vec<usize>,
    #[serde(default = "default_cm_h")]
    pub cm_target_h: f64,
    #[serde(default = "default_grid_n")]
    pub grid_n: usize,
    #[serde(default)]
    pub sandwich: Option<SandwichSection>,
}

fn default_cm_h() -> f64 {
    0.025
}

fn default_grid_n() -> usize {
    4096
}

/// Full configuration of one command-line run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    pub mesh: MeshSection,
    pub electrodes: ElectrodeSection,
    #[serde(default = "default_z")]
    pub contact_impedance: f64,
    #[serde(default = "default_basis")]
    pub basis: String,
    /// Background conductivity assumed known by the reconstruction.
    #[serde(default = "default_gamma0")]
    pub background: f64,
    #[serde(default)]
    pub phantom_file: Option<PathBuf>,
    /// Voltage data file (written by `simulate`, read by `reconstruct`).
    #[serde(default = "default_data_file")]
    pub data_file: PathBuf,
    pub cells: Option<CellSection>,
    pub reconstruction: Option<ReconstructionSection>,
    #[serde(default = "default_noise")]
    pub noise: NoiseSection,
    #[serde(default)]
    pub convergence: Option<ConvergenceSection>,
}

fn default_z() -> f64 {
    0.1
}

fn default_basis() -> String {
    "gram_schmidt".into()
}

fn default_gamma0() -> f64 {
    1.0
}

fn default_data_file() -> PathBuf {
    PathBuf::from("voltages.csv")
}

fn default_noise() -> NoiseSection {
    NoiseSection { sigma: 0.0, seed: 1 }
}

impl RunConfig {
    /// Loads the JSON file and applies dotted-path overrides, then checks
    /// cross-field consistency.
    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        let mut value: serde_json::Value =
            serde_json::from_str(&text).map_err(|e| Error::Config(format!("bad config JSON: {e}")))?;
        for item in overrides {
            apply_override(&mut value, item)?;
        }
        let config: RunConfig =
            serde_json::from_value(value).map_err(|e| Error::Config(format!("bad config: {e}")))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(recon) = &self.reconstruction {
            let _ = self.reconstruction_config()?;
            if recon.algorithm != 1 && recon.algorithm != 2 {
                return Err(Error::Config(format!("algorithm must be 1 or 2, got {}", recon.algorithm)));
            }
        }
        BasisKind::parse(&self.basis)?;
        if !(self.background > 0.0) {
            return Err(Error::Config("background conductivity must be positive".into()));
        }
        Ok(())
    }

    pub fn basis_kind(&self) -> Result<BasisKind> {
        BasisKind::parse(&self.basis)
    }

    /// Translates the reconstruction section into the solver configuration.
    pub fn reconstruction_config(&self) -> Result<ReconstructionConfig> {
        let recon = self
            .reconstruction
            .as_ref()
            .ok_or_else(|| Error::Config("missing 'reconstruction' section".into()))?;
        let algorithm = match recon.algorithm {
            1 => AlgorithmId::One,
            2 => AlgorithmId::Two,
            other => return Err(Error::Config(format!("algorithm must be 1 or 2, got {other}"))),
        };
        let beta = match (&recon.beta, algorithm) {
            (BetaValue::Single(b), _) => BetaSchedule::Single(*b),
            (BetaValue::List(l), AlgorithmId::Two) => BetaSchedule::List(l.clone()),
            (BetaValue::List(l), AlgorithmId::One) if l.len() == 1 => BetaSchedule::Single(l[0]),
            (BetaValue::List(_), AlgorithmId::One) => {
                return Err(Error::Config("algorithm 1 takes a single beta, got a list".into()))
            }
        };
        let config = ReconstructionConfig {
            beta,
            mu: recon.mu,
            sign: recon.sign,
            algorithm,
            fixed_alpha: recon.fixed_alpha,
        };
        config.validate()?;
        Ok(config)
    }
}

/// Applies one `key.path=value` override; the value is parsed as JSON when
/// possible, otherwise kept as a string.
fn apply_override(root: &mut serde_json::Value, item: &str) -> Result<()> {
    let (path, raw) = item
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override '{item}' is not of the form key=value")))?;
    let value = serde_json::from_str(raw).unwrap_or_else(|_| serde_json::Value::String(raw.to_string()));
    let mut cursor = root;
    let parts: Vec<&str> = path.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        if i + 1 == parts.len() {
            match cursor {
                serde_json::Value::Object(map) => {
                    map.insert(part.to_string(), value);
                    return Ok(());
                }
                _ => return Err(Error::Config(format!("override path '{path}' does not address an object"))),
            }
        }
        cursor = match cursor {
            serde_json::Value::Object(map) => map
                .entry(part.to_string())
                .or_insert_with(|| serde_json::Value::Object(serde_json::Map::new())),
            _ => return Err(Error::Config(format!("override path '{path}' does not address an object"))),
        };
    }
    unreachable!("split always yields at least one part")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overrides_replace_nested_values() {
        let mut v: serde_json::Value = serde_json::json!({"electrodes": {"k": 16}});
        apply_override(&mut v, "electrodes.k=32").unwrap();
        apply_override(&mut v, "noise.sigma=5e-3").unwrap();
        assert_eq!(v["electrodes"]["k"], 32);
        assert_eq!(v["noise"]["sigma"], 5e-3);
        assert!(apply_override(&mut v, "nonsense").is_err());
    }

    #[test]
    fn algorithm_two_requires_a_schedule() {
        let json = serde_json::json!({
            "mesh": {"target_h": 0.05},
            "electrodes": {"k": 16},
            "reconstruction": {"algorithm": 2, "beta": [0.6, 1.1], "mu": 1.01},
            "cells": {"diam": 0.2}
        });
        let cfg: RunConfig = serde_json::from_value(json).unwrap();
        assert!(cfg.reconstruction_config().is_ok());
        let bad = serde_json::json!({
            "mesh": {"target_h": 0.05},
            "electrodes": {"k": 16},
            "reconstruction": {"algorithm": 2, "beta": 0.6, "mu": 1.01},
            "cells": {"diam": 0.2}
        });
        let cfg: RunConfig = serde_json::from_value(bad).unwrap();
        // A single value is a one-stage schedule, which fails validation
        // only if non-tightening; a singleton is allowed.
        assert!(cfg.reconstruction_config().is_ok());
    }

    #[test]
    fn resistive_sign_consistency_is_enforced() {
        let json = serde_json::json!({
            "mesh": {"target_h": 0.05},
            "electrodes": {"k": 16},
            "reconstruction": {"algorithm": 1, "beta": 0.5, "mu": 1.0, "sign": "resistive"},
            "cells": {"diam": 0.2}
        });
        let cfg: RunConfig = serde_json::from_value(json).unwrap();
        assert!(cfg.reconstruction_config().is_err());
    }
}
