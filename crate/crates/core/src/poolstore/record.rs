use crate::error::{Error, Result};

/// Reproducibility metadata stored with every record.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct RecordMetadata {
    pub threshold: f64,
    pub l1_weight: f64,
    pub iterations: u32,
    pub seed: u64,
    pub achieved_ratio: f64,
    /// Seconds since the Unix epoch.
    pub created_at: u64,
}

/// One pool entry: the class labels of a task and its full-length mask
/// score vector over the shared backbone (zeros where pruned).
#[derive(Clone, Debug, PartialEq)]
pub struct PrunedRecord {
    /// Assigned by the pool on save; 0 until then.
    pub record_id: u64,
    pub arch_id: String,
    pub task_id: String,
    /// Base-dataset class indices, strictly increasing.
    pub class_labels: Vec<usize>,
    pub scores: Vec<f32>,
    /// Target pruning ratio the record was produced for.
    pub pruning_ratio: f64,
    pub metadata: RecordMetadata,
}

impl PrunedRecord {
    pub fn num_units(&self) -> usize {
        self.scores.len()
    }

    pub fn task_size(&self) -> usize {
        self.class_labels.len()
    }

    /// Units with a non-zero score.
    pub fn retained_count(&self) -> usize {
        self.scores.iter().filter(|&&s| s != 0.0).count()
    }

    pub fn retained(&self) -> Vec<bool> {
        self.scores.iter().map(|&s| s != 0.0).collect()
    }

    pub fn scores_f64(&self) -> Vec<f64> {
        self.scores.iter().map(|&s| f64::from(s)).collect()
    }

    /// Checks the record invariants; `units` is the architecture's `n` when
    /// known.
    pub fn validate(&self, units: Option<usize>) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidRecord(msg));
        let n = self.scores.len();
        if n == 0 {
            return bad("empty score vector".into());
        }
        if let Some(expected) = units {
            if expected != n {
                return Err(Error::ArchMismatch(format!(
                    "record has {n} scores, architecture `{}` has {expected} units",
                    self.arch_id
                )));
            }
        }
        if self.arch_id.is_empty() {
            return bad("empty arch id".into());
        }
        if self.class_labels.is_empty() {
            return bad("no class labels".into());
        }
        if self.class_labels.windows(2).any(|w| w[0] >= w[1]) {
            return bad("class labels must be strictly increasing".into());
        }
        if self.class_labels.iter().any(|&c| c > u32::MAX as usize) {
            return bad("class label exceeds u32".into());
        }
        if self.scores.iter().any(|s| !s.is_finite()) {
            return bad("non-finite score".into());
        }
        if !(0.0..1.0).contains(&self.pruning_ratio) {
            return bad(format!("pruning ratio {} outside [0, 1)", self.pruning_ratio));
        }
        let zeros = self.scores.iter().filter(|&&s| s == 0.0).count();
        let achieved = self.metadata.achieved_ratio;
        if (zeros as f64) / (n as f64) < achieved - 1.0 / n as f64 {
            return bad(format!(
                "{zeros} zero scores of {n} contradict achieved ratio {achieved}"
            ));
        }
        Ok(())
    }
}
