// SPDX-License-Identifier: Apache-2.0
//! YAML flow configuration.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::clustering::DEFAULT_CLUSTER_CAP;
use crate::dse::{DseConfig, Strategy};
use crate::fabric::{AreaModel, FabricParams, DEFAULT_CUT_LIMIT, DEFAULT_IO_PER_TILE};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowConfig {
    /// Verilog files (read in order and concatenated) or one JSON netlist.
    /// Relative paths are resolved against the config file's directory.
    #[serde(default)]
    pub inputs: Vec<PathBuf>,
    #[serde(default)]
    pub top: Option<String>,
    pub selected_outputs: Vec<String>,
    pub max_io: u32,
    pub max_efpgas: usize,
    pub n_range: (u32, u32),
    pub k_range: (u32, u32),
    pub max_grid_side: u32,
    #[serde(default = "default_io")]
    pub io_per_boundary_tile: u32,
    #[serde(default)]
    pub area: AreaModel,
    #[serde(default = "default_strategy")]
    pub strategy: Strategy,
    #[serde(default = "default_cap")]
    pub cluster_cap: usize,
    #[serde(default = "default_threshold")]
    pub score_threshold: u32,
    #[serde(default)]
    pub top_k: Option<usize>,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
    #[serde(default)]
    pub seed: u64,
    /// Worker threads; defaults to the available parallelism.
    #[serde(default)]
    pub workers: Option<usize>,
    /// Chosen fabrics with a smaller grid side trigger a warning.
    #[serde(default)]
    pub secure_min_side: Option<u32>,
    #[serde(default = "default_cut_limit")]
    pub cut_limit: usize,
    /// Check the configured redacted design against the original.
    #[serde(default = "default_true")]
    pub verify: bool,
}

fn default_io() -> u32 {
    DEFAULT_IO_PER_TILE
}
fn default_strategy() -> Strategy {
    Strategy::Nk
}
fn default_cap() -> usize {
    DEFAULT_CLUSTER_CAP
}
fn default_threshold() -> u32 {
    1
}
fn default_cut_limit() -> usize {
    DEFAULT_CUT_LIMIT
}
fn default_true() -> bool {
    true
}

impl FlowConfig {
    /// Preset with the given I/O bound and eFPGA limit over the default
    /// secure range n in 1..=10, k in 2..=6, grids up to 8x8.
    pub fn preset(max_io: u32, max_efpgas: usize, selected_outputs: Vec<String>) -> Self {
        Self {
            inputs: Vec::new(),
            top: None,
            selected_outputs,
            max_io,
            max_efpgas,
            n_range: (1, 10),
            k_range: (2, 6),
            max_grid_side: 8,
            io_per_boundary_tile: DEFAULT_IO_PER_TILE,
            area: AreaModel::default(),
            strategy: Strategy::Nk,
            cluster_cap: DEFAULT_CLUSTER_CAP,
            score_threshold: 1,
            top_k: None,
            out_dir: None,
            seed: 0,
            workers: None,
            secure_min_side: Some(6),
            cut_limit: DEFAULT_CUT_LIMIT,
            verify: true,
        }
    }

    pub fn cfg1(selected_outputs: Vec<String>) -> Self {
        Self::preset(64, 2, selected_outputs)
    }

    pub fn cfg2(selected_outputs: Vec<String>) -> Self {
        Self::preset(96, 1, selected_outputs)
    }

    pub fn from_yaml(text: &str) -> Result<Self, String> {
        let cfg: Self = serde_yaml::from_str(text).map_err(|e| e.to_string())?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Loads and validates a config file, resolving relative paths against
    /// its directory.
    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        let mut cfg = Self::from_yaml(&text).map_err(|e| format!("{}: {e}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in &mut cfg.inputs {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        if let Some(o) = &mut cfg.out_dir {
            if o.is_relative() {
                *o = base.join(&*o);
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.max_io < 1 {
            return Err("max_io must be at least 1".into());
        }
        if self.max_efpgas < 1 {
            return Err("max_efpgas must be at least 1".into());
        }
        if self.selected_outputs.is_empty() {
            return Err("selected_outputs must not be empty".into());
        }
        if self.cluster_cap < 1 {
            return Err("cluster_cap must be at least 1".into());
        }
        if self.cut_limit < 1 {
            return Err("cut_limit must be at least 1".into());
        }
        if self.workers == Some(0) {
            return Err("workers must be at least 1".into());
        }
        self.dse().validate().map_err(|e| e.to_string())?;
        self.base_params().validate().map_err(|e| e.to_string())?;
        Ok(())
    }

    pub fn dse(&self) -> DseConfig {
        DseConfig {
            n_range: self.n_range,
            k_range: self.k_range,
            max_grid_side: self.max_grid_side,
            strategy: self.strategy,
        }
    }

    /// Fabric parameters with the config's pads and area model at the top
    /// of the range.
    pub fn base_params(&self) -> FabricParams {
        FabricParams::new(self.n_range.1, self.k_range.1)
            .with_io(self.io_per_boundary_tile)
            .with_area(self.area)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn yaml_round_trip_and_defaults() {
        let text = "
inputs: [a.v]
selected_outputs: [out]
max_io: 64
max_efpgas: 2
n_range: [1, 10]
k_range: [2, 6]
max_grid_side: 8
strategy: kn
";
        let cfg = FlowConfig::from_yaml(text).unwrap();
        assert_eq!(cfg.strategy, Strategy::Kn);
        assert_eq!(cfg.io_per_boundary_tile, 4);
        assert_eq!(cfg.cluster_cap, 100_000);
        let back = FlowConfig::from_yaml(&serde_yaml::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn rejects_bad_values() {
        let base = "selected_outputs: [o]\nmax_io: 64\nmax_efpgas: 1\nk_range: [2, 6]\nmax_grid_side: 8\n";
        assert!(FlowConfig::from_yaml(&format!("{base}n_range: [3, 2]\n")).is_err());
        assert!(FlowConfig::from_yaml(&format!("{base}n_range: [1, 2]\nbogus: 1\n")).is_err());
        assert!(FlowConfig::from_yaml(&format!("{base}n_range: [1, 2]\n")).is_ok());
    }
}
