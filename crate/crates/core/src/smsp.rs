//! Scalable mask selection pruning.
//!
//! A new task borrows the masks of its most LEEP-similar pool records: their
//! scores are summed, the network is pruned once at the summed-score
//! threshold, and the extracted sub-network is briefly fine-tuned.

use crate::error::{Error, Result};
use crate::gradcore::{sgd_step, LrSchedule};
use crate::maskednet::{FlopsLedger, MaskState, MaskedNetwork};
use crate::poolstore::PrunedRecord;
use crate::rng::derive_seed;
use crate::task::{BatchSampler, HeadSource, TaskData};
use crate::tasksim::{build_similarity_table, SimilarityTable};

#[derive(Clone, Debug, PartialEq)]
pub struct SmspConfig {
    pub pruning_ratio: f64,
    pub neighbor_count: usize,
    pub fine_tune_iterations: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub min_lr: f64,
    pub class_disjoint_neighbors: bool,
    pub seed: u64,
}

impl Default for SmspConfig {
    fn default() -> Self {
        Self {
            pruning_ratio: 0.9,
            neighbor_count: 8,
            fine_tune_iterations: 100,
            batch_size: 32,
            lr: 0.05,
            min_lr: 0.0,
            class_disjoint_neighbors: true,
            seed: 0,
        }
    }
}

impl SmspConfig {
    pub fn fine_tune(&self) -> FineTuneConfig {
        FineTuneConfig {
            iterations: self.fine_tune_iterations,
            batch_size: self.batch_size,
            lr: self.lr,
            min_lr: self.min_lr,
            seed: self.seed,
        }
    }
}

/// Summed neighbour scores and the retained set chosen from them.
#[derive(Clone, Debug, PartialEq)]
pub struct SmspMask {
    pub summed_scores: Vec<f64>,
    pub neighbor_ids: Vec<u64>,
    pub retained: Vec<bool>,
}

/// The `m` most similar records, skipping any that share a class with
/// `target_classes` when `class_disjoint` is set.
pub fn select_neighbors(
    table: &SimilarityTable,
    m: usize,
    class_disjoint: bool,
    target_classes: &[usize],
) -> Result<Vec<u64>> {
    if m == 0 {
        return Err(Error::InvalidConfig("neighbor_count must be positive".into()));
    }
    let eligible: Vec<u64> = table
        .rows
        .iter()
        .filter(|row| !class_disjoint || !row.class_labels.iter().any(|c| target_classes.contains(c)))
        .map(|row| row.record_id)
        .collect();
    if eligible.len() < m {
        return Err(Error::NotEnoughNeighbors {
            needed: m,
            found: eligible.len(),
        });
    }
    Ok(eligible[..m].to_vec())
}

/// Elementwise sum of the records' scores.
///
/// Each unit's values are added in ascending order, so the result is
/// bit-identical under any permutation of `records`.
pub fn sum_masks(records: &[&PrunedRecord]) -> Result<Vec<f64>> {
    let first = records.first().ok_or(Error::EmptyInput("sum_masks records"))?;
    let n = first.scores.len();
    if let Some(bad) = records.iter().find(|r| r.arch_id != first.arch_id || r.scores.len() != n) {
        return Err(Error::ArchMismatch(format!(
            "cannot sum `{}` ({} units) with `{}` ({} units)",
            first.arch_id,
            n,
            bad.arch_id,
            bad.scores.len()
        )));
    }
    let mut column = Vec::with_capacity(records.len());
    Ok((0..n)
        .map(|i| {
            column.clear();
            column.extend(records.iter().map(|r| f64::from(r.scores[i])));
            column.sort_by(f64::total_cmp);
            column.iter().sum()
        })
        .collect())
}

/// Retained set after pruning `k = ⌈n·r⌉` units by ascending score (ties
/// by ascending index). A unit that is the last one left in its layer is
/// skipped and the next-lowest score is pruned instead.
///
/// Because the walk order does not depend on `r`, a larger ratio always
/// retains a subset of what a smaller ratio retains.
pub fn select_retained(arch: &crate::maskednet::Architecture, scores: &[f64], ratio: f64) -> Result<Vec<bool>> {
    let n = arch.num_units();
    if scores.len() != n {
        return Err(Error::ArchMismatch(format!("{} scores for {n} units", scores.len())));
    }
    if let Some(i) = scores.iter().position(|s| !s.is_finite()) {
        return Err(Error::InvalidRecord(format!("non-finite summed score at unit {i}")));
    }
    let k = arch.prune_count(ratio)?;
    let offsets = arch.layer_offsets();
    let layer_of = |u: usize| offsets.partition_point(|&o| o <= u) - 1;
    let mut left: Vec<usize> = offsets.windows(2).map(|w| w[1] - w[0]).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]).then(a.cmp(&b)));
    let mut retained = vec![true; n];
    let mut pruned = 0;
    for u in order {
        if pruned == k {
            break;
        }
        let l = layer_of(u);
        if left[l] > 1 {
            left[l] -= 1;
            retained[u] = false;
            pruned += 1;
        }
    }
    Ok(retained)
}

/// Prunes `net` to ratio `r` using `summed_scores` and extracts the
/// sub-network, whose weights are copied from `net`.
pub fn one_shot_prune(net: &MaskedNetwork, summed_scores: &[f64], ratio: f64) -> Result<MaskedNetwork> {
    let retained = select_retained(net.arch(), summed_scores, ratio)?;
    let mut masked = net.clone();
    masked.set_mask(Some(MaskState::binary(net.arch(), &retained)?))?;
    masked.extract_subnetwork()
}

/// The pre-trained backbone restricted to `retained`, with a classifier for
/// `task` (sliced rows, or a nearest-class-mean head on the pruned features
/// for unseen classes), extracted as a plain sub-network.
pub fn task_subnetwork(pretrained: &MaskedNetwork, task: &TaskData, retained: &[bool]) -> Result<MaskedNetwork> {
    let mut masked = pretrained.clone();
    masked.set_mask(Some(MaskState::binary(pretrained.arch(), retained)?))?;
    let with_head = match task.head {
        HeadSource::Backbone => masked.with_head_rows(&task.classes)?,
        HeadSource::Unseen => masked.with_imprinted_head(&task.train_x, &task.train_y, task.num_classes())?,
    };
    with_head.extract_subnetwork()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FineTuneConfig {
    pub iterations: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub min_lr: f64,
    pub seed: u64,
}

#[derive(Clone, Debug)]
pub struct FineTuned {
    pub net: MaskedNetwork,
    pub accuracy: f64,
    pub flops_ledger: FlopsLedger,
}

/// Plain cross-entropy SGD on every remaining weight for `cfg.iterations`
/// steps with a cosine schedule, then test accuracy.
pub fn fine_tune(subnet: &MaskedNetwork, task: &TaskData, cfg: &FineTuneConfig) -> Result<FineTuned> {
    task.validate()?;
    let mut net = subnet.clone();
    net.set_mask(None)?;
    net.set_weights_trainable(true);
    let mut ledger = FlopsLedger::new();
    if cfg.iterations > 0 {
        let schedule = LrSchedule::new(cfg.lr, cfg.min_lr, cfg.iterations)?;
        let mut sampler = BatchSampler::new(task.train_y.len(), cfg.batch_size, derive_seed(cfg.seed, "fine-tune", 0))?;
        for step in 0..cfg.iterations {
            let (x, y) = sampler.next_from(&task.train_x, &task.train_y);
            let loss = net.loss_and_grad(&x, &y, 0.0)?;
            if !loss.is_finite() {
                return Err(Error::Diverged { step, loss });
            }
            ledger.track_training_flops(&net, x.rows())?;
            sgd_step(net.parameters_mut(), schedule.cosine_lr(step)?)?;
        }
    }
    let accuracy = net.accuracy(&task.test_x, &task.test_y)?;
    Ok(FineTuned {
        net,
        accuracy,
        flops_ledger: ledger,
    })
}

#[derive(Clone, Debug)]
pub struct SmspOutcome {
    pub task_id: String,
    pub mask: SmspMask,
    pub achieved_ratio: f64,
    pub accuracy: f64,
    pub fine_tune_iterations: usize,
    pub flops_ledger: FlopsLedger,
    pub subnet: MaskedNetwork,
}

/// Sum → one-shot prune → fine-tune, for an explicit neighbour list.
pub fn smsp_with_neighbors(
    pretrained: &MaskedNetwork,
    neighbors: &[&PrunedRecord],
    task: &TaskData,
    cfg: &SmspConfig,
) -> Result<SmspOutcome> {
    let summed_scores = sum_masks(neighbors)?;
    let retained = select_retained(pretrained.arch(), &summed_scores, cfg.pruning_ratio)?;
    let subnet = task_subnetwork(pretrained, task, &retained)?;
    let tuned = fine_tune(&subnet, task, &cfg.fine_tune())?;
    let kept = retained.iter().filter(|&&r| r).count();
    Ok(SmspOutcome {
        task_id: task.task_id.clone(),
        achieved_ratio: 1.0 - kept as f64 / retained.len() as f64,
        mask: SmspMask {
            summed_scores,
            neighbor_ids: neighbors.iter().map(|r| r.record_id).collect(),
            retained,
        },
        accuracy: tuned.accuracy,
        fine_tune_iterations: cfg.fine_tune_iterations,
        flops_ledger: tuned.flops_ledger,
        subnet: tuned.net,
    })
}

/// The full pipeline: similarity table, neighbour selection, then
/// [`smsp_with_neighbors`].
pub fn smsp_pipeline(
    pretrained: &MaskedNetwork,
    pool: &[PrunedRecord],
    task: &TaskData,
    cfg: &SmspConfig,
) -> Result<SmspOutcome> {
    if pool.is_empty() {
        return Err(Error::EmptyInput("pool"));
    }
    pretrained.arch().prune_count(cfg.pruning_ratio)?;
    let table = build_similarity_table(pretrained, pool, task)?;
    let ids = select_neighbors(&table, cfg.neighbor_count, cfg.class_disjoint_neighbors, &task.classes)?;
    let neighbors: Vec<&PrunedRecord> = ids
        .iter()
        .map(|id| {
            pool.iter()
                .find(|r| r.record_id == *id)
                .ok_or(Error::MissingRecord(*id))
        })
        .collect::<Result<_>>()?;
    smsp_with_neighbors(pretrained, &neighbors, task, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::maskednet::Architecture;

    #[test]
    fn ties_prune_lowest_indices() {
        let arch = Architecture::parse_descriptor("in=1x2x2;dense=10;out=2").unwrap();
        let kept = select_retained(&arch, &[1.0; 10], 0.9).unwrap();
        assert_eq!(kept.iter().position(|&r| r), Some(9));
        assert_eq!(kept.iter().filter(|&&r| r).count(), 1);
    }

    #[test]
    fn floor_spills_to_next_layer() {
        let arch = Architecture::parse_descriptor("in=1x2x2;dense=2;dense=3;out=2").unwrap();
        let kept = select_retained(&arch, &[0.0, 0.1, 0.5, 0.6, 0.7], 0.6).unwrap();
        assert_eq!(kept, vec![false, true, false, false, true]);
    }

    #[test]
    fn zero_ratio_keeps_everything() {
        let arch = Architecture::parse_descriptor("in=1x2x2;dense=4;out=2").unwrap();
        assert!(select_retained(&arch, &[0.3, 0.1, 0.2, 0.4], 0.0).unwrap().iter().all(|&r| r));
    }
}
