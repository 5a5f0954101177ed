//! End-to-end acceptance run. Prints one line per criterion and exits
//! non-zero if any fails. Pass criterion numbers as arguments to run a subset.

mod common;

use std::process::ExitCode;
use std::time::{Duration, Instant};

use common::*;
use maskpool::amp::amp_prune;
use maskpool::bench::stats::{mean, spearman, std_err};
use maskpool::bench::{ExperimentConfig, ExperimentReport, Workbench, SCENARIOS};
use maskpool::maskednet::{MaskState, MaskedNetwork, DESK_CNN_ID};
use maskpool::poolstore::{Pool, PrunedRecord};
use maskpool::tasksim::{leep_from_probabilities, leep_score};
use maskpool::{Error, Result};

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Result<Outcome> {
    Ok(Outcome {
        passed,
        detail: detail.into(),
    })
}

/// Shared default-config workbench plus the reports already produced.
struct Suite {
    wb: Workbench,
    reports: Vec<ExperimentReport>,
}

impl Suite {
    fn report(&mut self, scenario: &str) -> Result<&ExperimentReport> {
        if let Some(i) = self.reports.iter().position(|r| r.scenario == scenario) {
            return Ok(&self.reports[i]);
        }
        let r = self.wb.run(scenario)?;
        self.reports.push(r);
        Ok(self.reports.last().expect("just pushed"))
    }
}

fn acc(report: &ExperimentReport, method: &str, variant: &str) -> Result<f64> {
    report
        .row(method, variant)
        .map(|r| r.accuracy_mean)
        .ok_or_else(|| Error::InvalidConfig(format!("{}: no row {method}/{variant}", report.scenario)))
}

fn pct(x: f64) -> String {
    format!("{:.2}", 100.0 * x)
}

fn c1_extraction() -> Result<Outcome> {
    let mut worst: f64 = 0.0;
    for seed in 0..100u64 {
        let desc = if seed % 2 == 0 { TINY_MLP } else { TINY_CNN };
        let mut n = net(desc, seed);
        let a = n.arch().clone();
        let kept = random_retained(&a, 0.15 + 0.008 * seed as f64, seed ^ 0x51);
        n.set_mask(Some(random_mask(&a, &kept, seed ^ 0x52)))?;
        let x = batch(&a, 4, seed ^ 0x53);
        let sub = n.extract_subnetwork()?;
        let mut binary = n.clone();
        binary.set_mask(Some(MaskState::binary(&a, &kept)?))?;
        worst = worst.max(sub.forward_unmasked(&x)?.max_abs_diff(&binary.masked_forward(&x)?));
    }
    outcome(worst <= 1e-6, format!("100 pairs, max abs diff {worst:.2e}"))
}

fn c2_gradients() -> Result<Outcome> {
    let fixtures = [
        ("in=1x6x6;dense=24;dense=16;out=4", 4usize),
        ("in=2x6x6;conv=4/3/1/1/pool;conv=6/3/1/1/nopool;dense=12;out=3", 3),
        (TINY_MLP, 3),
        (TINY_CNN, 3),
    ];
    let mut worst: f64 = 0.0;
    let mut max_params = 0;
    let mut checked_total = 0;
    for (i, (desc, classes)) in fixtures.iter().enumerate() {
        for s in 0..2u64 {
            let seed = 100 * i as u64 + s;
            let mut n = net(desc, seed);
            let a = n.arch().clone();
            let kept = random_retained(&a, 0.8, seed ^ 1);
            // scores in 0.2..1.8 keep the L1 term away from its kink at 0
            n.set_mask(Some(random_mask(&a, &kept, seed ^ 2)))?;
            let (w, checked) = gradient_check(&n, &batch(&a, 4, seed ^ 3), &labels(4, *classes, seed ^ 4), 0.3);
            worst = worst.max(w);
            max_params = max_params.max(checked);
            checked_total += checked;
        }
    }
    outcome(
        worst <= 1e-3 && max_params <= 2000,
        format!("{checked_total} partials on nets of <= {max_params} params, worst relative error {worst:.2e}"),
    )
}

fn c3_leep() -> Result<Outcome> {
    let mut worst: f64 = 0.0;
    let mut max_leep = f64::NEG_INFINITY;
    for seed in 0..50u64 {
        let desc = if seed % 2 == 0 { TINY_MLP } else { TINY_CNN };
        let backbone = net(desc, seed);
        let a = backbone.arch().clone();
        let mut rec = arch_record(backbone.arch_id(), &a, seed + 1000);
        rec.class_labels = if seed % 3 == 0 { vec![0, 1, 2] } else { vec![seed as usize % 3, 2 - seed as usize % 2] };
        rec.class_labels.sort_unstable();
        rec.class_labels.dedup();
        let rows = 10 + seed as usize % 20;
        let targets = 2 + seed as usize % 3;
        let x = batch(&a, rows, seed + 2000);
        let mut y = labels(rows, targets, seed + 3000);
        y[0] = targets - 1;
        let expected = brute_leep(&independent_theta(&backbone, &rec, &x), &y, targets);
        let got = leep_score(&backbone, &rec, "fixture", &x, &y)?.value;
        worst = worst.max((got - expected).abs());
        max_leep = max_leep.max(got);
    }
    let one_hot = vec![vec![0.0, 1.0], vec![1.0, 0.0], vec![0.0, 1.0]];
    let perfect = leep_from_probabilities(&one_hot, &[1, 0, 1], 2)?;
    outcome(
        worst <= 1e-9 && max_leep <= 0.0 && perfect == 0.0,
        format!("50 fixtures, max |diff| {worst:.2e}, max LEEP {max_leep:.4}, perfect predictor {perfect}"),
    )
}

fn weights_of(net: &MaskedNetwork) -> Vec<u64> {
    net.hidden_params()
        .iter()
        .flat_map(|l| l.weight.value().data().iter().chain(l.bias.value().data()).map(|v| v.to_bits()).collect::<Vec<_>>())
        .collect()
}

fn c4_amp() -> Result<Outcome> {
    let mut cfg = ExperimentConfig::default();
    cfg.backbone.arch = DESK_CNN_ID.to_string();
    let ratio = 0.9;
    let mut wb = Workbench::new(cfg.clone())?;
    let backbone = wb.backbone()?.net.clone();
    let l1 = wb.l1_weight_at(ratio)?;
    let tasks = wb.test_tasks(cfg.eval.task_size)?;
    let before = weights_of(&backbone);
    let (mut reached, mut identical, mut floor_bound) = (0, 0, 0);
    let mut ratios = Vec::new();
    for (i, task) in tasks.iter().take(10).enumerate() {
        let amp = cfg.amp_config(ratio, l1, maskpool::rng::derive_seed(cfg.seed, "acceptance-amp", i as u64));
        let start = task.task_network(&backbone)?;
        let head_before = start.head_params().clone();
        let out = amp_prune(&start, task, &amp)?;
        reached += usize::from(out.achieved_ratio >= ratio - 1e-12);
        floor_bound += usize::from(out.status.floor_bound);
        let head = out.pruned_net.head_params();
        if weights_of(&out.pruned_net) == before
            && head.weight.value() == head_before.weight.value()
            && head.bias.value() == head_before.bias.value()
        {
            identical += 1;
        }
        ratios.push(out.achieved_ratio);
    }
    let shortfall = ratios.iter().map(|r| (ratio - r).max(0.0)).fold(0.0, f64::max);
    outcome(
        reached == 10 && identical == 10,
        format!(
            "{DESK_CNN_ID}, l1 {l1}: {reached}/10 at ratio >= {ratio} (min {:.3}, floor slack {shortfall:.3}, floor bound on {floor_bound}), weights bit-identical on {identical}/10",
            ratios.iter().copied().fold(1.0, f64::min)
        ),
    )
}

fn c5_overlap(s: &mut Suite) -> Result<Outcome> {
    let records = s.wb.pool(s.wb.config().pool.task_size, s.wb.config().overlap_analysis.pool_ratio)?.records.len();
    let r = s.report("overlap-analysis")?;
    let mut parts = Vec::new();
    let mut ok = records == 60 && r.checks.len() == 2;
    for c in &r.checks {
        ok &= c.passed;
        parts.push(format!("{}: {}", c.name, c.detail));
    }
    for k in r.overlap.iter().filter(|o| o.group != 2) {
        parts.push(format!("k={} g{} {:.3}", k.k, k.group, k.mean_overlap));
    }
    outcome(ok, format!("{records} records; {}", parts.join("; ")))
}

fn c6_vs_random(s: &mut Suite) -> Result<Outcome> {
    let cfg = s.wb.config().clone();
    let r = s.report("main-comparison")?;
    let (smsp, random) = (acc(r, "smsp", "default")?, acc(r, "random", "default")?);
    let shape_ok = cfg.eval.test_tasks == 20 && cfg.eval.task_size == 3 && cfg.eval.ratio == 0.9 && cfg.smsp.fine_tune_iterations == 100;
    outcome(
        shape_ok && smsp - random >= 0.10,
        format!("smsp {} vs random {} (gap {} points)", pct(smsp), pct(random), pct(smsp - random)),
    )
}

fn c7_vs_amp(s: &mut Suite) -> Result<Outcome> {
    let r = s.report("main-comparison")?;
    let (smsp, amp) = (r.row("smsp", "default").unwrap().clone(), r.row("amp", "default").unwrap().clone());
    let flops = amp.training_flops_mean / smsp.training_flops_mean;
    outcome(
        amp.accuracy_mean - smsp.accuracy_mean <= 0.03 && flops >= 5.0 && amp.prune_iterations == 1000 && smsp.fine_tune_iterations == 100,
        format!(
            "smsp {} @J={} vs amp {} @{} iters; FLOPs ratio {flops:.1}x",
            pct(smsp.accuracy_mean),
            smsp.fine_tune_iterations,
            pct(amp.accuracy_mean),
            amp.prune_iterations
        ),
    )
}

fn c8_neighbors(s: &mut Suite) -> Result<Outcome> {
    let r = s.report("neighbor-ablation")?;
    let per_m = |m: usize| -> Vec<(String, f64)> {
        let mut v: Vec<_> = r.task_rows("smsp", &format!("m{m}")).iter().map(|t| (t.task_id.clone(), t.accuracy)).collect();
        v.sort_by(|a, b| a.0.cmp(&b.0));
        v
    };
    let ms = [1usize, 2, 4, 8];
    let means: Vec<f64> = ms.iter().map(|&m| mean(&per_m(m).iter().map(|t| t.1).collect::<Vec<_>>())).collect();
    let rho = spearman(&ms.map(|m| m as f64), &means);
    let (m8, m16) = (per_m(8), per_m(16));
    let diffs: Vec<f64> = m8.iter().zip(&m16).map(|(a, b)| b.1 - a.1).collect();
    let gap = mean(&diffs);
    let noise = (2.0 * std_err(&diffs)).max(0.01);
    outcome(
        m8.len() == 20 && rho > 0.0 && means[3] >= means[0] && gap.abs() <= noise,
        format!(
            "means M=1,2,4,8: {}; spearman {rho:.2}; M16-M8 {} points (noise band {})",
            means.iter().map(|&m| pct(m)).collect::<Vec<_>>().join("/"),
            pct(gap),
            pct(noise)
        ),
    )
}

fn c9_groups(s: &mut Suite) -> Result<Outcome> {
    let r = s.report("similarity-ablation")?;
    let mut ok = r.checks.iter().all(|c| c.passed);
    let mut parts = Vec::new();
    for j in [20, 60, 100] {
        let (g1, g3) = (acc(r, "smsp", &format!("group1-j{j}"))?, acc(r, "smsp", &format!("group3-j{j}"))?);
        ok &= g1 > g3;
        parts.push(format!("J={j}: {} vs {}", pct(g1), pct(g3)));
    }
    outcome(ok, parts.join("; "))
}

fn c10_ratios(s: &mut Suite) -> Result<Outcome> {
    let pool_ratio = s.wb.config().pool.ratio;
    let r = s.report("ratio-transfer")?;
    let mut ok = pool_ratio == 0.9;
    let mut parts = Vec::new();
    for ratio in ["0.85", "0.95"] {
        let v = format!("r{ratio}");
        let (smsp, random) = (acc(r, "smsp", &v)?, acc(r, "random", &v)?);
        ok &= smsp > random;
        parts.push(format!("r={ratio}: {} vs {}", pct(smsp), pct(random)));
    }
    let nested = r.check("nested-retention").map_or(false, |c| c.passed);
    parts.push(format!("nested retention {}", if nested { "holds" } else { "violated" }));
    outcome(ok && nested, parts.join("; "))
}

fn c11_unseen(s: &mut Suite) -> Result<Outcome> {
    let r = s.report("unseen-distribution")?;
    let smsp = r.row("smsp", "shifted").unwrap().clone();
    let random = r.row("random", "shifted").unwrap().clone();
    outcome(
        smsp.accuracy_mean - random.accuracy_mean >= 0.10 && smsp.fine_tune_iterations == random.fine_tune_iterations,
        format!(
            "smsp {} vs random {} at J={} (gap {} points)",
            pct(smsp.accuracy_mean),
            pct(random.accuracy_mean),
            smsp.fine_tune_iterations,
            pct(smsp.accuracy_mean - random.accuracy_mean)
        ),
    )
}

fn c12_determinism() -> Result<Outcome> {
    let mut first = Workbench::new(tiny_config())?;
    let mut second = Workbench::new(tiny_config())?;
    let mut same = 0;
    for scenario in SCENARIOS {
        let (a, b) = (first.run(scenario)?, second.run(scenario)?);
        let csv = |r: &ExperimentReport| [r.summary_csv(), r.tasks_csv(), r.overlap_csv(), r.checks_csv()].concat();
        same += usize::from(csv(&a) == csv(&b));
    }

    let dir = tempfile::tempdir()?;
    let records: Vec<PrunedRecord> = first.pool(2, 0.7)?.records.clone();
    let net = first.backbone()?.net.clone();
    let mut pool = Pool::create(dir.path())?;
    pool.register_architecture(net.arch_id(), net.arch())?;
    for r in &records {
        let mut copy = r.clone();
        pool.save_record(&mut copy)?;
    }
    let reopened = Pool::open(dir.path())?;
    let round_trip = records
        .iter()
        .zip(reopened.query(&Default::default()))
        .all(|(r, id)| reopened.load_record(id).is_ok_and(|back| back.scores == r.scores && back.class_labels == r.class_labels));
    let entry = reopened.index().entries.values().next().expect("pool is not empty");
    let path = dir.path().join(&entry.file_name);
    let mut bytes = std::fs::read(&path)?;
    let mid = bytes.len() / 2;
    bytes[mid] ^= 0x10;
    std::fs::write(&path, &bytes)?;
    let corruption = matches!(reopened.load_record(entry.record_id), Err(Error::ChecksumMismatch(_)));
    outcome(
        same == SCENARIOS.len() && round_trip && corruption,
        format!(
            "{same}/{} scenarios byte-identical; {} records round-trip {}; corrupted byte {}",
            SCENARIOS.len(),
            records.len(),
            if round_trip { "ok" } else { "FAILED" },
            if corruption { "detected" } else { "missed" }
        ),
    )
}

fn suite_of(suite: &mut Option<Suite>) -> Result<&mut Suite> {
    if suite.is_none() {
        *suite = Some(Suite {
            wb: Workbench::new(ExperimentConfig::default())?,
            reports: Vec::new(),
        });
    }
    Ok(suite.as_mut().expect("just set"))
}

fn main() -> ExitCode {
    let only: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let wanted = |n: usize| only.is_empty() || only.contains(&n);
    let mut suite = None;
    let mut failures = 0;
    let limits = [(1, 60), (2, 120), (5, 600), (6, 900)];
    for n in 1..=12usize {
        if !wanted(n) {
            continue;
        }
        let start = Instant::now();
        let (name, result) = match n {
            1 => ("mask-structural equivalence", c1_extraction()),
            2 => ("gradient correctness", c2_gradients()),
            3 => ("LEEP oracle equivalence", c3_leep()),
            4 => ("AMP contract", c4_amp()),
            5 => ("overlap by similarity group", suite_of(&mut suite).and_then(c5_overlap)),
            6 => ("SMSP beats random masks", suite_of(&mut suite).and_then(c6_vs_random)),
            7 => ("SMSP efficiency vs AMP", suite_of(&mut suite).and_then(c7_vs_amp)),
            8 => ("neighbour-count trend", suite_of(&mut suite).and_then(c8_neighbors)),
            9 => ("group-1 beats group-3 neighbours", suite_of(&mut suite).and_then(c9_groups)),
            10 => ("ratio transfer", suite_of(&mut suite).and_then(c10_ratios)),
            11 => ("unseen distribution", suite_of(&mut suite).and_then(c11_unseen)),
            _ => ("determinism and persistence", c12_determinism()),
        };
        let elapsed = start.elapsed();
        let limit = limits.iter().find(|l| l.0 == n).map(|l| Duration::from_secs(l.1));
        let (passed, detail) = match result {
            Ok(o) => match limit {
                Some(l) if elapsed > l => (false, format!("{} (over the {}s limit)", o.detail, l.as_secs())),
                _ => (o.passed, o.detail),
            },
            Err(e) => (false, format!("error: {e}")),
        };
        failures += usize::from(!passed);
        println!(
            "{} {n:>2} {name}: {detail} [{:.1}s]",
            if passed { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64()
        );
    }
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failures} criteria failed");
        ExitCode::FAILURE
    }
}
