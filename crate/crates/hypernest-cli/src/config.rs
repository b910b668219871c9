//! TOML run configuration; every field has a default so partial files work,
//! and values round-trip losslessly through serialization.

use std::path::Path;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

use hypernest::data::EmbedConfig;
use hypernest::opt::OptimizerConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    /// Hyperboloid validation tolerance for points read from files.
    pub tol: f64,
    pub opt: OptSettings,
    pub gcn: GcnSettings,
    pub embed: EmbedSettings,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            tol: 1e-9,
            opt: OptSettings::default(),
            gcn: GcnSettings::default(),
            embed: EmbedSettings::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        toml::from_str(&text).context("invalid run configuration")
    }

    #[allow(dead_code)] // exercised by the round-trip test
    pub fn save(&self, path: &Path) -> Result<()> {
        let text = toml::to_string_pretty(self).context("serializing run configuration")?;
        std::fs::write(path, text)?;
        Ok(())
    }
}

/// Line-search optimizer settings for the reduction fits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptSettings {
    pub step: f64,
    pub max_iters: usize,
    pub grad_tol: f64,
    pub contraction: f64,
    pub sufficient_decrease: f64,
    pub restarts: usize,
    pub joint: bool,
}

impl Default for OptSettings {
    fn default() -> Self {
        OptSettings {
            step: 1.0,
            max_iters: 300,
            grad_tol: 1e-9,
            contraction: 0.5,
            sufficient_decrease: 1e-4,
            restarts: 3,
            joint: false,
        }
    }
}

impl OptSettings {
    pub fn to_config(&self) -> OptimizerConfig {
        OptimizerConfig {
            step: self.step,
            max_iters: self.max_iters,
            grad_tol: self.grad_tol,
            contraction: self.contraction,
            sufficient_decrease: self.sufficient_decrease,
            restarts: self.restarts,
            joint: self.joint,
            ..Default::default()
        }
    }
}

/// Network training settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GcnSettings {
    pub steps: usize,
    pub step: f64,
    pub grad_tol: f64,
}

impl Default for GcnSettings {
    fn default() -> Self {
        GcnSettings {
            steps: 150,
            step: 1.0,
            grad_tol: 1e-7,
        }
    }
}

impl GcnSettings {
    pub fn to_opt_config(&self) -> OptimizerConfig {
        OptimizerConfig {
            step: self.step,
            grad_tol: self.grad_tol,
            max_iters: 1,
            restarts: 1,
            ..Default::default()
        }
    }
}

/// Tree stress-embedding settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmbedSettings {
    pub sweeps: usize,
    pub step: f64,
    pub edge_scale: f64,
}

impl Default for EmbedSettings {
    fn default() -> Self {
        EmbedSettings {
            sweeps: 300,
            step: 0.1,
            edge_scale: 1.0,
        }
    }
}

impl EmbedSettings {
    pub fn to_config(&self) -> EmbedConfig {
        EmbedConfig {
            sweeps: self.sweeps,
            step: self.step,
            edge_scale: self.edge_scale,
            seed: 0,
        }
    }
}
