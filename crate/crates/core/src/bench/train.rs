use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::data::Dataset;
use crate::amp::{amp_prune, AmpConfig};
use crate::error::{Error, Result};
use crate::gradcore::{Graph, LrSchedule, Parameter, Sgd, SgdConfig, Tensor};
use crate::maskednet::{Architecture, Checkpoint, FlopsLedger, MaskedNetwork};
use crate::rng::{self, derive_seed};
use crate::smsp::{fine_tune, select_retained, task_subnetwork, FineTuneConfig};
use crate::task::{BatchSampler, TaskData};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PretrainConfig {
    pub arch: String,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub min_lr: f64,
    pub momentum: f64,
    pub weight_decay: f64,
}

impl Default for PretrainConfig {
    fn default() -> Self {
        Self {
            arch: crate::maskednet::DESK_MLP_ID.to_string(),
            epochs: 15,
            batch_size: 32,
            lr: 0.02,
            min_lr: 0.0,
            momentum: 0.9,
            weight_decay: 0.0,
        }
    }
}

/// Trains an all-class classifier on the training split and reports its
/// test accuracy. Zero epochs return the seeded initialisation.
pub fn pretrain_backbone(ds: &Dataset, cfg: &PretrainConfig, seed: u64, config_hash: &str) -> Result<Checkpoint> {
    let arch = Architecture::preset(&cfg.arch, ds.input_shape(), ds.num_classes)?;
    let mut net = MaskedNetwork::new(cfg.arch.clone(), arch, derive_seed(seed, "backbone-init", 0))?;
    let (train, test) = ds.full_split();
    if train.is_empty() || test.is_empty() {
        return Err(Error::EmptyInput("dataset split"));
    }
    let steps_per_epoch = train.len().div_ceil(cfg.batch_size.max(1));
    let total = cfg.epochs * steps_per_epoch;
    if total > 0 {
        let schedule = LrSchedule::new(cfg.lr, cfg.min_lr, total)?;
        let mut opt = Sgd::new(SgdConfig {
            momentum: cfg.momentum,
            weight_decay: cfg.weight_decay,
        });
        let mut sampler = BatchSampler::new(train.len(), cfg.batch_size, derive_seed(seed, "backbone-batches", 0))?;
        for step in 0..total {
            let batch: Vec<usize> = sampler.next_batch().into_iter().map(|i| train[i]).collect();
            let x = ds.to_tensor(&batch)?;
            let y = ds.labels_of(&batch);
            let loss = net.loss_and_grad(&x, &y, 0.0)?;
            if !loss.is_finite() {
                return Err(Error::Diverged { step, loss });
            }
            opt.step(net.parameters_mut(), schedule.cosine_lr(step)?)?;
        }
    }
    let test_accuracy = net.accuracy(&ds.to_tensor(&test)?, &ds.labels_of(&test))?;
    Ok(Checkpoint {
        net,
        config_hash: config_hash.to_string(),
        test_accuracy,
    })
}

/// Softmax regression on raw normalised pixels; returns test accuracy.
/// A learnability check for generated datasets.
pub fn linear_probe(ds: &Dataset, epochs: usize, lr: f64, seed: u64) -> Result<f64> {
    let (train, test) = ds.full_split();
    let d = ds.sample_len();
    let k = ds.num_classes;
    let mut w = Parameter::new(Tensor::zeros(&[k, d]), true);
    let mut b = Parameter::new(Tensor::zeros(&[k]), true);
    let batch = 64;
    let total = epochs * train.len().div_ceil(batch);
    let logits_of = |g: &mut Graph, x: Tensor, w: &Parameter, b: &Parameter| -> Result<_> {
        let x = g.input(x);
        let x = g.flatten(x)?;
        let wv = g.param(w);
        let bv = g.param(b);
        let z = g.matmul_t(x, wv)?;
        Ok((g.add_bias(z, bv)?, wv, bv))
    };
    if total > 0 {
        let schedule = LrSchedule::new(lr, 0.0, total)?;
        let mut sampler = BatchSampler::new(train.len(), batch, seed)?;
        for step in 0..total {
            let idx: Vec<usize> = sampler.next_batch().into_iter().map(|i| train[i]).collect();
            let mut g = Graph::new();
            let (z, wv, bv) = logits_of(&mut g, ds.to_tensor(&idx)?, &w, &b)?;
            let loss = g.cross_entropy(z, &ds.labels_of(&idx))?;
            g.backward(loss)?;
            g.accumulate_into(wv, &mut w)?;
            g.accumulate_into(bv, &mut b)?;
            crate::gradcore::sgd_step([&mut w, &mut b], schedule.cosine_lr(step)?)?;
        }
    }
    let mut g = Graph::new();
    let (z, _, _) = logits_of(&mut g, ds.to_tensor(&test)?, &w, &b)?;
    let z = g.value(z);
    let labels = ds.labels_of(&test);
    let hits = (0..z.rows())
        .filter(|&r| crate::maskednet::argmax(z.row(r)) == labels[r])
        .count();
    Ok(hits as f64 / labels.len() as f64)
}

/// A uniformly random retained set of the size SMSP would keep at `ratio`,
/// respecting the per-layer floor.
pub fn random_retained(arch: &Architecture, ratio: f64, seed: u64) -> Result<Vec<bool>> {
    let mut rng = rng::seeded(seed);
    let scores: Vec<f64> = (0..arch.num_units()).map(|_| rng.random::<f64>()).collect();
    select_retained(arch, &scores, ratio)
}

#[derive(Clone, Debug)]
pub struct BaselineOutcome {
    pub task_id: String,
    pub retained: Vec<bool>,
    pub achieved_ratio: f64,
    pub accuracy: f64,
    pub fine_tune_iterations: usize,
    pub flops_ledger: FlopsLedger,
}

/// Random mask at `ratio`, then the same fine-tuning SMSP uses.
pub fn run_random_mask_baseline(
    pretrained: &MaskedNetwork,
    task: &TaskData,
    ratio: f64,
    ft: &FineTuneConfig,
) -> Result<BaselineOutcome> {
    let retained = random_retained(pretrained.arch(), ratio, derive_seed(ft.seed, "random-mask", 0))?;
    let subnet = task_subnetwork(pretrained, task, &retained)?;
    let tuned = fine_tune(&subnet, task, ft)?;
    let kept = retained.iter().filter(|&&r| r).count();
    Ok(BaselineOutcome {
        task_id: task.task_id.clone(),
        achieved_ratio: 1.0 - kept as f64 / retained.len() as f64,
        retained,
        accuracy: tuned.accuracy,
        fine_tune_iterations: ft.iterations,
        flops_ledger: tuned.flops_ledger,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct GridPoint {
    pub l1_weight: f64,
    pub mean_accuracy: f64,
    pub accuracy_std: f64,
    pub mean_ratio: f64,
    pub converged: usize,
    pub tasks: usize,
}

/// Runs AMP with every `λ` in `grid` on `tasks` and picks the one with the
/// best mean accuracy among those that reach the target ratio on every
/// task. Falls back to the largest `λ` if none does.
pub fn grid_search_l1(
    pretrained: &MaskedNetwork,
    tasks: &[TaskData],
    base: &AmpConfig,
    grid: &[f64],
) -> Result<(f64, Vec<GridPoint>)> {
    if grid.is_empty() || tasks.is_empty() {
        return Err(Error::EmptyInput("l1 grid search"));
    }
    let jobs: Vec<(usize, usize)> = (0..grid.len())
        .flat_map(|g| (0..tasks.len()).map(move |t| (g, t)))
        .collect();
    let results: Vec<(usize, f64, f64, bool)> = jobs
        .par_iter()
        .map(|&(g, t)| {
            let cfg = AmpConfig {
                l1_weight: grid[g],
                seed: derive_seed(base.seed, "grid", t as u64),
                ..base.clone()
            };
            let net = tasks[t].task_network(pretrained)?;
            let r = amp_prune(&net, &tasks[t], &cfg)?;
            Ok((g, r.final_accuracy, r.achieved_ratio, r.status.converged))
        })
        .collect::<Result<_>>()?;
    let points: Vec<GridPoint> = grid
        .iter()
        .enumerate()
        .map(|(g, &l1_weight)| {
            let mine: Vec<_> = results.iter().filter(|r| r.0 == g).collect();
            let acc: Vec<f64> = mine.iter().map(|r| r.1).collect();
            GridPoint {
                l1_weight,
                mean_accuracy: super::stats::mean(&acc),
                accuracy_std: super::stats::std_dev(&acc),
                mean_ratio: mine.iter().map(|r| r.2).sum::<f64>() / mine.len() as f64,
                converged: mine.iter().filter(|r| r.3).count(),
                tasks: mine.len(),
            }
        })
        .collect();
    let best = points
        .iter()
        .filter(|p| p.converged == p.tasks)
        .max_by(|a, b| a.mean_accuracy.total_cmp(&b.mean_accuracy).then(b.l1_weight.total_cmp(&a.l1_weight)))
        .map(|p| p.l1_weight)
        .unwrap_or_else(|| grid.iter().copied().fold(f64::NEG_INFINITY, f64::max));
    Ok((best, points))
}
