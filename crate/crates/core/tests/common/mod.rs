#![allow(dead_code)]

use maskpool::bench::ExperimentConfig;
use maskpool::gradcore::Tensor;
use maskpool::maskednet::{Architecture, MaskState, MaskedNetwork};
use maskpool::poolstore::{PrunedRecord, RecordMetadata};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub const TINY_MLP: &str = "in=1x4x4;dense=12;dense=10;out=3";
pub const TINY_CNN: &str = "in=2x6x6;conv=3/3/1/1/pool;conv=4/3/1/1/nopool;dense=6;out=3";

pub fn arch(desc: &str) -> Architecture {
    Architecture::parse_descriptor(desc).unwrap()
}

pub fn net(desc: &str, seed: u64) -> MaskedNetwork {
    MaskedNetwork::new("test", arch(desc), seed).unwrap()
}

pub fn batch(arch: &Architecture, rows: usize, seed: u64) -> Tensor {
    let mut r = rng(seed);
    let i = arch.input;
    Tensor::from_fn(&[rows, i.channels, i.height, i.width], |_| r.random_range(-1.5..1.5))
}

pub fn labels(rows: usize, classes: usize, seed: u64) -> Vec<usize> {
    let mut r = rng(seed);
    (0..rows).map(|_| r.random_range(0..classes)).collect()
}

/// A random retained set honouring the one-unit-per-layer floor.
pub fn random_retained(arch: &Architecture, keep_prob: f64, seed: u64) -> Vec<bool> {
    let mut r = rng(seed);
    let mut out = Vec::new();
    for layer in &arch.hidden {
        let n = layer.units();
        let mut kept: Vec<bool> = (0..n).map(|_| r.random_bool(keep_prob)).collect();
        if !kept.iter().any(|&k| k) {
            kept[r.random_range(0..n)] = true;
        }
        out.extend(kept);
    }
    out
}

/// Random non-binary scores on `retained`, zero elsewhere.
pub fn random_mask(arch: &Architecture, retained: &[bool], seed: u64) -> MaskState {
    let mut r = rng(seed);
    let scores: Vec<f64> = retained
        .iter()
        .map(|&k| if k { r.random_range(0.2..1.8) } else { 0.0 })
        .collect();
    MaskState::from_parts(arch, &scores, retained).unwrap()
}

pub fn record(arch_id: &str, scores: Vec<f32>, classes: Vec<usize>) -> PrunedRecord {
    let retained = scores.iter().filter(|&&s| s != 0.0).count();
    PrunedRecord {
        record_id: 0,
        arch_id: arch_id.into(),
        task_id: "t".into(),
        class_labels: classes,
        pruning_ratio: 0.5,
        metadata: RecordMetadata {
            threshold: 0.01,
            l1_weight: 0.1,
            iterations: 10,
            seed: 1,
            achieved_ratio: 1.0 - retained as f64 / scores.len() as f64,
            created_at: 0,
        },
        scores,
    }
}

/// Random record: about half the units retained with positive scores.
pub fn random_record(arch_id: &str, n: usize, seed: u64) -> PrunedRecord {
    let mut r = rng(seed);
    let mut scores: Vec<f32> = (0..n)
        .map(|_| if r.random_bool(0.5) { r.random_range(0.01f32..2.0) } else { 0.0 })
        .collect();
    if scores.iter().all(|&s| s == 0.0) {
        scores[0] = 1.0;
    }
    record(arch_id, scores, vec![0, 1, 2])
}

/// A configuration small enough for every scenario to finish in seconds.
pub fn tiny_config() -> ExperimentConfig {
    let mut cfg = ExperimentConfig::default();
    cfg.seed = 3;
    cfg.data.num_classes = 6;
    cfg.data.samples_per_class = 40;
    cfg.data.height = 6;
    cfg.data.width = 6;
    cfg.data.superclasses = 2;
    cfg.data.parts = 6;
    cfg.data.parts_per_class = 2;
    cfg.backbone.epochs = 2;
    cfg.backbone.batch_size = 16;
    cfg.amp.iterations = 30;
    cfg.amp.l1_grid = vec![0.05, 0.15];
    cfg.amp.grid_tasks = 2;
    cfg.amp.batch_size = 8;
    cfg.amp.baseline_iterations = 30;
    cfg.pool.tasks_per_size = 6;
    cfg.pool.task_size = 2;
    cfg.pool.ratio = 0.7;
    cfg.smsp.neighbor_count = 2;
    cfg.smsp.fine_tune_iterations = 10;
    cfg.smsp.batch_size = 8;
    cfg.smsp.class_disjoint = false;
    cfg.eval.test_tasks = 3;
    cfg.eval.task_size = 2;
    cfg.eval.ratio = 0.7;
    cfg.size_transfer.sizes = vec![2, 3];
    cfg.ratio_transfer.ratios = vec![0.6, 0.8];
    cfg.unseen_distribution.task_size = 2;
    cfg.neighbor_ablation.counts = vec![1, 2];
    cfg.similarity_ablation.iterations = vec![5, 10];
    cfg.overlap_analysis.pool_ratio = 0.5;
    cfg.overlap_analysis.k_fractions = vec![0.05, 0.1];
    cfg.overlap_analysis.permutation_rounds = 50;
    cfg
}

/// Largest relative gap between autodiff gradients and central finite
/// differences of the full objective over every parameter (weights, biases
/// and mask scores). Returns `(worst, checked)`.
pub fn gradient_check(net: &MaskedNetwork, x: &Tensor, y: &[usize], l1: f64) -> (f64, usize) {
    let h = 1e-5;
    let mut analytic = net.clone();
    for p in analytic.parameters_mut() {
        p.zero_grad();
    }
    analytic.loss_and_grad(x, y, l1).unwrap();
    let grads: Vec<Vec<f64>> = analytic
        .parameters_mut()
        .into_iter()
        .map(|p| p.grad().data().to_vec())
        .collect();
    let mut probe = net.clone();
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    for (pi, g) in grads.iter().enumerate() {
        for j in 0..g.len() {
            let orig = probe.parameters_mut()[pi].values_mut()[j];
            probe.parameters_mut()[pi].values_mut()[j] = orig + h;
            let up = maskpool::amp::amp_objective(&probe, x, y, l1).unwrap();
            probe.parameters_mut()[pi].values_mut()[j] = orig - h;
            let down = maskpool::amp::amp_objective(&probe, x, y, l1).unwrap();
            probe.parameters_mut()[pi].values_mut()[j] = orig;
            let numeric = (up - down) / (2.0 * h);
            let rel = (g[j] - numeric).abs() / g[j].abs().max(numeric.abs()).max(1e-6);
            worst = worst.max(rel);
            checked += 1;
        }
    }
    (worst, checked)
}

/// LEEP evaluated straight from its definition with explicit loops.
pub fn brute_leep(theta: &[Vec<f64>], y: &[usize], num_target: usize) -> f64 {
    let n = theta.len() as f64;
    let z = theta[0].len();
    let mut joint = vec![vec![0.0; z]; num_target];
    for (t, &label) in theta.iter().zip(y) {
        for k in 0..z {
            joint[label][k] += t[k] / n;
        }
    }
    let mut marginal = vec![0.0; z];
    for row in &joint {
        for k in 0..z {
            marginal[k] += row[k];
        }
    }
    let mut total = 0.0;
    for (t, &label) in theta.iter().zip(y) {
        let mut eep = 0.0;
        for k in 0..z {
            if marginal[k] > 0.0 {
                eep += joint[label][k] / marginal[k] * t[k];
            }
        }
        total += eep.ln();
    }
    total / n
}

/// Dense-only forward written with plain loops: each hidden unit's ReLU
/// output is multiplied by its score (zero when pruned).
pub fn naive_mlp_forward(net: &MaskedNetwork, x: &Tensor) -> Vec<Vec<f64>> {
    let scores: Vec<f64> = match net.mask() {
        Some(m) => m
            .scores()
            .iter()
            .zip(m.retained())
            .map(|(&s, &r)| if r { s } else { 0.0 })
            .collect(),
        None => vec![1.0; net.num_units()],
    };
    let mut out = Vec::new();
    for i in 0..x.rows() {
        let mut act: Vec<f64> = x.row(i).to_vec();
        let mut offset = 0;
        for layer in net.hidden_params() {
            let w = layer.weight.value();
            let b = layer.bias.value();
            let (units, fan_in) = (w.shape()[0], w.shape()[1]);
            let mut next = vec![0.0; units];
            for u in 0..units {
                let mut s = b.data()[u];
                for k in 0..fan_in {
                    s += w.data()[u * fan_in + k] * act[k];
                }
                next[u] = s.max(0.0) * scores[offset + u];
            }
            offset += units;
            act = next;
        }
        let w = net.head_params().weight.value();
        let b = net.head_params().bias.value();
        let (classes, fan_in) = (w.shape()[0], w.shape()[1]);
        out.push(
            (0..classes)
                .map(|c| b.data()[c] + (0..fan_in).map(|k| w.data()[c * fan_in + k] * act[k]).sum::<f64>())
                .collect(),
        );
    }
    out
}

/// A separable toy task: each local class gets its own random mean image.
pub fn toy_task(arch: &Architecture, classes: Vec<usize>, per_class: usize, seed: u64) -> maskpool::task::TaskData {
    let mut r = rng(seed);
    let i = arch.input;
    let numel = i.channels * i.height * i.width;
    let means: Vec<Vec<f64>> = classes
        .iter()
        .map(|_| (0..numel).map(|_| r.random_range(-1.0..1.0)).collect())
        .collect();
    let mut make = |count: usize| {
        let mut data = Vec::new();
        let mut y = Vec::new();
        for (c, mean) in means.iter().enumerate() {
            for _ in 0..count {
                data.extend(mean.iter().map(|m| m + r.random_range(-0.3..0.3)));
                y.push(c);
            }
        }
        let rows = y.len();
        (Tensor::new(vec![rows, i.channels, i.height, i.width], data).unwrap(), y)
    };
    let (train_x, train_y) = make(per_class);
    let (test_x, test_y) = make(per_class / 2 + 1);
    maskpool::task::TaskData {
        task_id: format!("toy-{seed}"),
        classes,
        train_x,
        train_y,
        test_x,
        test_y,
        head: maskpool::task::HeadSource::Backbone,
    }
}

/// Source probabilities for LEEP computed without the library's LEEP code:
/// forward with the record's scores as the mask, keep the logits of the
/// record's classes, softmax by hand.
pub fn independent_theta(backbone: &MaskedNetwork, rec: &PrunedRecord, x: &Tensor) -> Vec<Vec<f64>> {
    let a = backbone.arch();
    let mut masked = backbone.clone();
    let mask = MaskState::from_parts(a, &rec.scores_f64(), &rec.retained()).unwrap();
    masked.set_mask(Some(mask)).unwrap();
    let logits = masked.masked_forward(x).unwrap();
    (0..x.rows())
        .map(|i| {
            let row = logits.row(i);
            let picked: Vec<f64> = rec.class_labels.iter().map(|&c| row[c]).collect();
            let m = picked.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let e: Vec<f64> = picked.iter().map(|v| (v - m).exp()).collect();
            let s: f64 = e.iter().sum();
            e.iter().map(|v| v / s).collect()
        })
        .collect()
}

/// Random record shaped for `arch`, with every layer keeping a unit.
pub fn arch_record(arch_id: &str, arch: &Architecture, seed: u64) -> PrunedRecord {
    let kept = random_retained(arch, 0.5, seed);
    let mut r = rng(seed ^ 0x9e37);
    let scores = kept
        .iter()
        .map(|&k| if k { r.random_range(0.01f32..2.0) } else { 0.0 })
        .collect();
    record(arch_id, scores, vec![0, 1, 2])
}
