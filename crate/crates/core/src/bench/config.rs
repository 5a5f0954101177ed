use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::data::SyntheticConfig;
use super::train::PretrainConfig;
use crate::amp::AmpConfig;
use crate::codec::short_hash;
use crate::error::{Error, Result};
use crate::smsp::SmspConfig;

/// Everything a scenario run depends on. Loaded from TOML; every field has
/// a default, so an empty file is a valid config.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    /// Read samples from this file instead of generating them.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dataset_file: Option<PathBuf>,
    pub data: SyntheticConfig,
    pub backbone: PretrainConfig,
    pub amp: AmpSection,
    pub pool: PoolSection,
    pub smsp: SmspSection,
    pub eval: EvalSection,
    pub size_transfer: SizeTransferSection,
    pub ratio_transfer: RatioTransferSection,
    pub unseen_distribution: UnseenSection,
    pub neighbor_ablation: NeighborAblationSection,
    pub similarity_ablation: SimilarityAblationSection,
    pub overlap_analysis: OverlapSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 7,
            dataset_file: None,
            data: SyntheticConfig::default(),
            backbone: PretrainConfig::default(),
            amp: AmpSection::default(),
            pool: PoolSection::default(),
            smsp: SmspSection::default(),
            eval: EvalSection::default(),
            size_transfer: SizeTransferSection::default(),
            ratio_transfer: RatioTransferSection::default(),
            unseen_distribution: UnseenSection::default(),
            neighbor_ablation: NeighborAblationSection::default(),
            similarity_ablation: SimilarityAblationSection::default(),
            overlap_analysis: OverlapSection::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AmpSection {
    pub iterations: usize,
    pub threshold: f64,
    /// Fixed `λ`; when absent it is picked by grid search.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub l1_weight: Option<f64>,
    pub l1_grid: Vec<f64>,
    pub grid_tasks: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub min_lr: f64,
    /// Iterations of the free-weight AMP baseline in `main-comparison`.
    pub baseline_iterations: usize,
    pub baseline_lr: f64,
}

impl Default for AmpSection {
    fn default() -> Self {
        Self {
            iterations: 300,
            threshold: 0.01,
            l1_weight: None,
            l1_grid: vec![0.05, 0.1, 0.15, 0.2, 0.3],
            grid_tasks: 8,
            batch_size: 32,
            lr: 0.2,
            min_lr: 0.0,
            baseline_iterations: 1000,
            baseline_lr: 0.05,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PoolSection {
    pub tasks_per_size: usize,
    pub task_size: usize,
    pub ratio: f64,
}

impl Default for PoolSection {
    fn default() -> Self {
        Self {
            tasks_per_size: 60,
            task_size: 3,
            ratio: 0.9,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SmspSection {
    pub neighbor_count: usize,
    pub fine_tune_iterations: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub min_lr: f64,
    pub class_disjoint: bool,
}

impl Default for SmspSection {
    fn default() -> Self {
        let d = SmspConfig::default();
        Self {
            neighbor_count: d.neighbor_count,
            fine_tune_iterations: d.fine_tune_iterations,
            batch_size: d.batch_size,
            lr: d.lr,
            min_lr: d.min_lr,
            class_disjoint: d.class_disjoint_neighbors,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    pub test_tasks: usize,
    pub task_size: usize,
    pub ratio: f64,
}

impl Default for EvalSection {
    fn default() -> Self {
        Self {
            test_tasks: 20,
            task_size: 3,
            ratio: 0.9,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SizeTransferSection {
    pub sizes: Vec<usize>,
}

impl Default for SizeTransferSection {
    fn default() -> Self {
        Self { sizes: vec![3, 5, 10] }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RatioTransferSection {
    pub ratios: Vec<f64>,
}

impl Default for RatioTransferSection {
    fn default() -> Self {
        Self {
            ratios: vec![0.85, 0.95],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UnseenSection {
    /// Classes per task drawn from the shifted dataset.
    pub task_size: usize,
}

impl Default for UnseenSection {
    fn default() -> Self {
        Self { task_size: 5 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NeighborAblationSection {
    pub counts: Vec<usize>,
}

impl Default for NeighborAblationSection {
    fn default() -> Self {
        Self {
            counts: vec![1, 2, 4, 8, 16],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimilarityAblationSection {
    pub iterations: Vec<usize>,
}

impl Default for SimilarityAblationSection {
    fn default() -> Self {
        Self {
            iterations: vec![20, 60, 100],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OverlapSection {
    /// Ratio of the pool analysed; it must retain at least the largest `k`.
    pub pool_ratio: f64,
    pub k_fractions: Vec<f64>,
    pub permutation_rounds: usize,
}

impl Default for OverlapSection {
    fn default() -> Self {
        Self {
            pool_ratio: 0.5,
            k_fractions: vec![0.1, 0.3],
            permutation_rounds: 2000,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always serialisable")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if self.pool.tasks_per_size == 0 || self.eval.test_tasks == 0 {
            return bad("pool.tasks_per_size and eval.test_tasks must be positive");
        }
        if self.smsp.neighbor_count == 0 {
            return bad("smsp.neighbor_count must be positive");
        }
        if self.amp.l1_weight.is_none() && self.amp.l1_grid.is_empty() {
            return bad("set amp.l1_weight or a non-empty amp.l1_grid");
        }
        if self.amp.grid_tasks == 0 {
            return bad("amp.grid_tasks must be positive");
        }
        self.amp_config(self.pool.ratio, 0.1, 0).validate()?;
        Ok(())
    }

    /// Frozen-weight AMP settings for pool records.
    pub fn amp_config(&self, ratio: f64, l1_weight: f64, seed: u64) -> AmpConfig {
        AmpConfig {
            iterations: self.amp.iterations,
            target_ratio: ratio,
            threshold: self.amp.threshold,
            l1_weight,
            batch_size: self.amp.batch_size,
            lr: self.amp.lr,
            min_lr: self.amp.min_lr,
            frozen_weights: true,
            seed,
        }
    }

    pub fn smsp_config(&self, ratio: f64, seed: u64) -> SmspConfig {
        SmspConfig {
            pruning_ratio: ratio,
            neighbor_count: self.smsp.neighbor_count,
            fine_tune_iterations: self.smsp.fine_tune_iterations,
            batch_size: self.smsp.batch_size,
            lr: self.smsp.lr,
            min_lr: self.smsp.min_lr,
            class_disjoint_neighbors: self.smsp.class_disjoint,
            seed,
        }
    }

    /// Hash of the full config plus the identifying row fields.
    pub fn row_hash(&self, scenario: &str, method: &str, variant: &str) -> String {
        short_hash(&format!("{}\n{scenario}\n{method}\n{variant}", self.to_toml()))
    }

    pub fn hash(&self) -> String {
        short_hash(&self.to_toml())
    }
}
