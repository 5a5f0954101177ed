//! Automatic mask pruning.
//!
//! Every iteration first removes retained units whose score fell below the
//! threshold `τ` (until the target ratio is reached), then takes one SGD step
//! on cross-entropy plus `λ·Σ_{i∈Ω}|S_i|`. In frozen mode only the mask
//! scores move.

use std::time::{SystemTime, UNIX_EPOCH};

use crate::error::{Error, Result};
use crate::gradcore::{sgd_step, Graph, LrSchedule};
use crate::maskednet::{FlopsLedger, MaskState, MaskedNetwork};
use crate::poolstore::{PrunedRecord, RecordMetadata};
use crate::rng::derive_seed;
use crate::task::{BatchSampler, HeadSource, TaskData};

#[derive(Clone, Debug, PartialEq)]
pub struct AmpConfig {
    pub iterations: usize,
    pub target_ratio: f64,
    pub threshold: f64,
    pub l1_weight: f64,
    pub batch_size: usize,
    pub lr: f64,
    pub min_lr: f64,
    pub frozen_weights: bool,
    pub seed: u64,
}

impl Default for AmpConfig {
    fn default() -> Self {
        Self {
            iterations: 300,
            target_ratio: 0.9,
            threshold: 0.01,
            l1_weight: 0.1,
            batch_size: 32,
            lr: 0.1,
            min_lr: 0.0,
            frozen_weights: true,
            seed: 0,
        }
    }
}

impl AmpConfig {
    pub fn schedule(&self) -> Result<LrSchedule> {
        LrSchedule::new(self.lr, self.min_lr, self.iterations)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.iterations == 0 {
            return bad("amp iterations must be positive".into());
        }
        if !(self.threshold > 0.0) || !self.threshold.is_finite() {
            return bad(format!("threshold must be positive, got {}", self.threshold));
        }
        if !(self.l1_weight >= 0.0) || !self.l1_weight.is_finite() {
            return bad(format!("l1_weight must be non-negative, got {}", self.l1_weight));
        }
        if self.batch_size == 0 {
            return bad("batch_size must be positive".into());
        }
        self.schedule().map(|_| ())
    }
}

/// How an AMP run ended.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct AmpStatus {
    /// Achieved ratio reached the target.
    pub converged: bool,
    /// The per-layer floor kept at least one unit that was below `τ`.
    pub floor_bound: bool,
    /// The floor already bound on the very first pruning pass.
    pub degenerate: bool,
}

#[derive(Clone, Debug)]
pub struct AmpResult {
    /// The task network with its final mask (not structurally extracted).
    pub pruned_net: MaskedNetwork,
    pub record: PrunedRecord,
    pub iterations_used: usize,
    /// Iteration at which the ratio was reached and pruning stopped.
    pub pruning_stopped_at: Option<usize>,
    pub achieved_ratio: f64,
    pub final_accuracy: f64,
    pub flops_ledger: FlopsLedger,
    pub status: AmpStatus,
    /// `|Ω|` after each iteration's pruning pass.
    pub retained_history: Vec<usize>,
    /// Mean `|S_i|` over `Ω` after each optimizer step.
    pub mean_abs_score_history: Vec<f64>,
}

/// `CE(y, F(x; Θ⊙S)) + λ·Σ_{i∈Ω}|S_i|` for one batch.
pub fn amp_objective(net: &MaskedNetwork, batch: &crate::gradcore::Tensor, labels: &[usize], l1_weight: f64) -> Result<f64> {
    if !(l1_weight >= 0.0) {
        return Err(Error::InvalidConfig(format!("l1_weight must be non-negative, got {l1_weight}")));
    }
    let mut g = Graph::new();
    let (loss, _) = net.record_loss(&mut g, batch, labels, l1_weight)?;
    Ok(g.value(loss).item())
}

/// Prunes every retained unit with `S_i < τ`, keeping each layer's
/// highest-score unit when all of its units fall below. Returns whether that
/// floor had to intervene.
pub fn prune_below_threshold(mask: &mut MaskState, threshold: f64) -> bool {
    let mut floor_bound = false;
    for layer in 0..mask.num_layers() {
        let range = mask.layer_range(layer);
        let retained: Vec<usize> = range.filter(|&u| mask.is_retained(u)).collect();
        let below: Vec<usize> = retained
            .iter()
            .copied()
            .filter(|&u| mask.scores()[u] < threshold)
            .collect();
        let keep = if below.len() == retained.len() {
            floor_bound = true;
            let scores = mask.scores();
            retained
                .iter()
                .copied()
                .reduce(|best, u| if scores[u] > scores[best] { u } else { best })
        } else {
            None
        };
        for u in below {
            if Some(u) != keep {
                mask.prune(u);
            }
        }
    }
    floor_bound
}

/// Runs AMP on `net`, whose classifier must already match `task`.
///
/// `net` must carry no mask or an untouched all-ones mask.
pub fn amp_prune(net: &MaskedNetwork, task: &TaskData, cfg: &AmpConfig) -> Result<AmpResult> {
    cfg.validate()?;
    task.validate()?;
    if net.arch().num_classes != task.num_classes() {
        return Err(Error::ArchMismatch(format!(
            "network has {} outputs, task has {} classes",
            net.arch().num_classes,
            task.num_classes()
        )));
    }
    net.arch().prune_count(cfg.target_ratio)?;
    let mut net = match net.mask() {
        None => net.with_fresh_mask(),
        Some(m) if m.retained_count() == m.len() && m.scores().iter().all(|&s| s == 1.0) => net.clone(),
        Some(_) => {
            return Err(Error::InvalidConfig(
                "amp_prune needs mask scores initialised to 1".into(),
            ))
        }
    };
    net.set_weights_trainable(!cfg.frozen_weights);

    let schedule = cfg.schedule()?;
    let mut sampler = BatchSampler::new(task.train_y.len(), cfg.batch_size, derive_seed(cfg.seed, "amp-batches", 0))?;
    let mut ledger = FlopsLedger::new();
    let mut status = AmpStatus::default();
    let mut stopped_at = None;
    let mut retained_history = Vec::with_capacity(cfg.iterations);
    let mut mean_abs_score_history = Vec::with_capacity(cfg.iterations);
    let reached = |m: &MaskState| m.pruning_ratio() >= cfg.target_ratio - 1e-12;

    for it in 0..cfg.iterations {
        let mask = net.mask_mut().expect("mask attached above");
        if stopped_at.is_none() {
            if prune_below_threshold(mask, cfg.threshold) {
                status.floor_bound = true;
                if it == 0 {
                    status.degenerate = true;
                }
            }
            if reached(mask) {
                stopped_at = Some(it);
            }
        }
        retained_history.push(mask.retained_count());

        let (x, y) = sampler.next_from(&task.train_x, &task.train_y);
        let loss = net.loss_and_grad(&x, &y, cfg.l1_weight)?;
        if !loss.is_finite() {
            return Err(Error::Diverged { step: it, loss });
        }
        ledger.track_training_flops(&net, x.rows())?;
        sgd_step(net.parameters_mut(), schedule.cosine_lr(it)?)?;
        let mask = net.mask_mut().expect("mask attached above");
        mask.enforce_zeroes();
        mean_abs_score_history.push(mean_abs_retained(mask));
    }

    let mask = net.mask().expect("mask attached above");
    let achieved_ratio = mask.pruning_ratio();
    status.converged = reached(mask);
    let final_accuracy = net.accuracy(&task.test_x, &task.test_y)?;
    let record = PrunedRecord {
        record_id: 0,
        arch_id: net.arch_id().to_string(),
        task_id: task.task_id.clone(),
        class_labels: task.classes.clone(),
        scores: mask.scores().iter().map(|&s| s as f32).collect(),
        pruning_ratio: cfg.target_ratio,
        metadata: RecordMetadata {
            threshold: cfg.threshold,
            l1_weight: cfg.l1_weight,
            iterations: cfg.iterations as u32,
            seed: cfg.seed,
            achieved_ratio,
            created_at: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
        },
    };
    Ok(AmpResult {
        pruned_net: net,
        record,
        iterations_used: cfg.iterations,
        pruning_stopped_at: stopped_at,
        achieved_ratio,
        final_accuracy,
        flops_ledger: ledger,
        status,
        retained_history,
        mean_abs_score_history,
    })
}

/// Frozen-weight AMP on a base-class task, returning the pool record.
///
/// The backbone's own classifier rows for the task classes serve as the
/// head, so the record depends only on the mask.
pub fn build_pool_entry(pretrained: &MaskedNetwork, task: &TaskData, cfg: &AmpConfig) -> Result<PrunedRecord> {
    if !cfg.frozen_weights {
        return Err(Error::InvalidConfig("pool entries require frozen_weights = true".into()));
    }
    if task.head != HeadSource::Backbone {
        return Err(Error::InvalidConfig(format!(
            "pool task {} uses classes the backbone never saw",
            task.task_id
        )));
    }
    let net = task.task_network(pretrained)?;
    Ok(amp_prune(&net, task, cfg)?.record)
}

fn mean_abs_retained(mask: &MaskState) -> f64 {
    let (sum, count) = mask
        .scores()
        .iter()
        .zip(mask.retained())
        .filter(|(_, &r)| r)
        .fold((0.0, 0usize), |(s, c), (v, _)| (s + v.abs(), c + 1));
    sum / count.max(1) as f64
}
