use rayon::prelude::*;

use super::leep::{leep_score, LeepScore};
use crate::error::{Error, Result};
use crate::maskednet::MaskedNetwork;
use crate::poolstore::PrunedRecord;
use crate::task::TaskData;

pub const NUM_GROUPS: usize = 3;

#[derive(Clone, Debug, PartialEq)]
pub struct SimilarityRow {
    pub record_id: u64,
    pub class_labels: Vec<usize>,
    pub leep: LeepScore,
    /// 1 (most similar) to 3.
    pub group: u8,
}

/// LEEP of every pool record against one target, best first.
#[derive(Clone, Debug, PartialEq)]
pub struct SimilarityTable {
    pub target_task_id: String,
    pub rows: Vec<SimilarityRow>,
}

impl SimilarityTable {
    /// Record ids in similarity group `group` (1..=3), best first.
    pub fn group(&self, group: u8) -> Vec<u64> {
        self.rows
            .iter()
            .filter(|r| r.group == group)
            .map(|r| r.record_id)
            .collect()
    }

    pub fn groups(&self) -> [Vec<u64>; NUM_GROUPS] {
        [self.group(1), self.group(2), self.group(3)]
    }
}

/// Buckets values into three equal-width intervals of `[min, max]` over the
/// finite values: 1 holds the top third, 3 the bottom. A value on an inner
/// boundary joins the less similar group. Non-finite values go to group 3,
/// and a zero-width range puts every finite value in group 1.
pub fn assign_groups(values: &[f64]) -> Vec<u8> {
    let finite = values.iter().copied().filter(|v| v.is_finite());
    let (lo, hi) = finite.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    let width = (hi - lo) / NUM_GROUPS as f64;
    values
        .iter()
        .map(|&v| {
            if !v.is_finite() {
                NUM_GROUPS as u8
            } else if width <= 0.0 {
                1
            } else {
                let idx = ((hi - v) / width).floor() as usize;
                idx.min(NUM_GROUPS - 1) as u8 + 1
            }
        })
        .collect()
}

/// Scores every record in `pool` whose architecture matches `pretrained`
/// on the target's training split, sorts by LEEP (ties by record id) and
/// assigns similarity groups.
pub fn build_similarity_table(
    pretrained: &MaskedNetwork,
    pool: &[PrunedRecord],
    target: &TaskData,
) -> Result<SimilarityTable> {
    let candidates: Vec<&PrunedRecord> = pool
        .iter()
        .filter(|r| r.arch_id == pretrained.arch_id())
        .collect();
    if candidates.is_empty() {
        return Err(Error::EmptyInput("pool has no records for this architecture"));
    }
    let scores: Vec<LeepScore> = candidates
        .par_iter()
        .map(|r| leep_score(pretrained, r, &target.task_id, &target.train_x, &target.train_y))
        .collect::<Result<_>>()?;
    let mut rows: Vec<SimilarityRow> = candidates
        .iter()
        .zip(scores)
        .map(|(r, leep)| SimilarityRow {
            record_id: r.record_id,
            class_labels: r.class_labels.clone(),
            leep,
            group: 0,
        })
        .collect();
    rows.sort_by(|a, b| {
        b.leep
            .value
            .total_cmp(&a.leep.value)
            .then(a.record_id.cmp(&b.record_id))
    });
    let values: Vec<f64> = rows.iter().map(|r| r.leep.value).collect();
    for (row, g) in rows.iter_mut().zip(assign_groups(&values)) {
        row.group = g;
    }
    Ok(SimilarityTable {
        target_task_id: target.task_id.clone(),
        rows,
    })
}
