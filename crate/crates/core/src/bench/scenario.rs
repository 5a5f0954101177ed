use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;

use super::config::ExperimentConfig;
use super::data::{generate_synthetic_dataset, load_dataset, Dataset, SyntheticConfig};
use super::report::{Check, ExperimentReport, OverlapRow, ReportRow, TaskRow};
use super::stats::{mean, permutation_test, std_dev};
use super::tasks::{sample_tasks, TaskSpec};
use super::train::{grid_search_l1, pretrain_backbone, run_random_mask_baseline, GridPoint};
use crate::amp::{amp_prune, AmpConfig};
use crate::error::{Error, Result};
use crate::maskednet::{Checkpoint, MaskState, MaskedNetwork};
use crate::poolstore::{Pool, PrunedRecord, RecordFilter};
use crate::rng::derive_seed;
use crate::smsp::{select_neighbors, smsp_with_neighbors, SmspConfig};
use crate::task::{HeadSource, TaskData};
use crate::tasksim::{build_similarity_table, overlap_ratio, SimilarityTable};

pub const SCENARIOS: [&str; 8] = [
    "pool-build",
    "main-comparison",
    "size-transfer",
    "ratio-transfer",
    "unseen-distribution",
    "neighbor-ablation",
    "similarity-ablation",
    "overlap-analysis",
];

/// Pool records together with the tasks that produced them.
#[derive(Clone, Debug)]
pub struct PoolSet {
    pub task_size: usize,
    pub ratio: f64,
    pub specs: Vec<TaskSpec>,
    pub records: Vec<PrunedRecord>,
}

impl PoolSet {
    pub fn record(&self, id: u64) -> Result<&PrunedRecord> {
        self.records
            .iter()
            .find(|r| r.record_id == id)
            .ok_or(Error::MissingRecord(id))
    }
}

/// Lazily built shared state (dataset, backbone, pools) for scenario runs.
///
/// Everything is derived from the config and its seed; with a pool
/// directory set, pools are read from and written to disk.
pub struct Workbench {
    cfg: ExperimentConfig,
    pool_dir: Option<PathBuf>,
    dataset: Option<Arc<Dataset>>,
    shifted: Option<Arc<Dataset>>,
    backbone: Option<Arc<Checkpoint>>,
    l1: BTreeMap<u64, (f64, Vec<GridPoint>)>,
    pools: BTreeMap<(usize, u64), Arc<PoolSet>>,
}

impl Workbench {
    pub fn new(cfg: ExperimentConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            cfg,
            pool_dir: None,
            dataset: None,
            shifted: None,
            backbone: None,
            l1: BTreeMap::new(),
            pools: BTreeMap::new(),
        })
    }

    pub fn with_pool_dir(mut self, dir: &Path) -> Self {
        self.pool_dir = Some(dir.to_path_buf());
        self
    }

    /// Uses an existing backbone instead of pre-training one.
    pub fn with_backbone(mut self, ckpt: Checkpoint) -> Self {
        self.backbone = Some(Arc::new(ckpt));
        self
    }

    pub fn config(&self) -> &ExperimentConfig {
        &self.cfg
    }

    pub fn dataset(&mut self) -> Result<Arc<Dataset>> {
        if self.dataset.is_none() {
            let ds = match &self.cfg.dataset_file {
                Some(path) => load_dataset(path)?,
                None => generate_synthetic_dataset(&self.cfg.data, self.cfg.seed)?,
            };
            ds.check_batch_size(self.cfg.smsp.batch_size.min(self.cfg.amp.batch_size))?;
            self.dataset = Some(Arc::new(ds));
        }
        Ok(Arc::clone(self.dataset.as_ref().expect("set above")))
    }

    /// The shifted variant: classes the backbone and pool never saw.
    pub fn shifted_dataset(&mut self) -> Result<Arc<Dataset>> {
        if self.shifted.is_none() {
            let cfg = SyntheticConfig {
                shifted: true,
                ..self.cfg.data.clone()
            };
            self.shifted = Some(Arc::new(generate_synthetic_dataset(&cfg, self.cfg.seed)?));
        }
        Ok(Arc::clone(self.shifted.as_ref().expect("set above")))
    }

    pub fn backbone(&mut self) -> Result<Arc<Checkpoint>> {
        if self.backbone.is_none() {
            let ds = self.dataset()?;
            let ckpt = pretrain_backbone(&ds, &self.cfg.backbone, self.cfg.seed, &self.cfg.hash())?;
            self.backbone = Some(Arc::new(ckpt));
        }
        Ok(Arc::clone(self.backbone.as_ref().expect("set above")))
    }

    fn net(&mut self) -> Result<MaskedNetwork> {
        Ok(self.backbone()?.net.clone())
    }

    /// `λ` for pool records at the configured pool ratio.
    pub fn l1_weight(&mut self) -> Result<f64> {
        self.l1_weight_at(self.cfg.pool.ratio)
    }

    /// `λ` for AMP at `ratio`: the configured value, or the grid-search
    /// winner on a few held-out tasks pruned to that ratio.
    pub fn l1_weight_at(&mut self, ratio: f64) -> Result<f64> {
        if let Some(l) = self.cfg.amp.l1_weight {
            return Ok(l);
        }
        if let Some((l, _)) = self.l1.get(&ratio.to_bits()) {
            return Ok(*l);
        }
        let net = self.net()?;
        let ds = self.dataset()?;
        let specs = sample_tasks(
            &ds,
            self.cfg.pool.task_size,
            self.cfg.amp.grid_tasks,
            derive_seed(self.cfg.seed, "grid-tasks", 0),
            None,
            "grid",
        )?;
        let tasks = materialize_all(&specs, &ds, HeadSource::Backbone)?;
        let base = self.cfg.amp_config(ratio, 0.0, derive_seed(self.cfg.seed, "grid", 0));
        let found = grid_search_l1(&net, &tasks, &base, &self.cfg.amp.l1_grid)?;
        let l = found.0;
        self.l1.insert(ratio.to_bits(), found);
        Ok(l)
    }

    /// Grid-search results at the pool ratio, empty until searched.
    pub fn grid_points(&self) -> &[GridPoint] {
        self.l1.get(&self.cfg.pool.ratio.to_bits()).map_or(&[], |l| &l.1)
    }

    /// Pool tasks of `task_size` classes pruned to `ratio`, built on first
    /// use (or read from the pool directory when it already holds them).
    pub fn pool(&mut self, task_size: usize, ratio: f64) -> Result<Arc<PoolSet>> {
        let key = (task_size, ratio.to_bits());
        if let Some(p) = self.pools.get(&key) {
            return Ok(Arc::clone(p));
        }
        let ds = self.dataset()?;
        let net = self.net()?;
        let specs = sample_tasks(
            &ds,
            task_size,
            self.cfg.pool.tasks_per_size,
            derive_seed(self.cfg.seed, "pool-tasks", task_size as u64),
            None,
            &format!("pool-r{:03}", (ratio * 100.0).round() as u32),
        )?;
        let mut disk = match &self.pool_dir {
            Some(dir) => {
                let mut pool = Pool::create(dir)?;
                pool.register_architecture(net.arch_id(), net.arch())?;
                Some(pool)
            }
            None => None,
        };
        let filter = RecordFilter {
            arch_id: Some(net.arch_id().to_string()),
            task_size: Some(task_size),
            pruning_ratio: Some(ratio),
        };
        let existing = match &disk {
            Some(pool) => pool.load_matching(&filter)?,
            None => Vec::new(),
        };
        let records = if existing.is_empty() {
            let l1 = self.l1_weight_at(ratio)?;
            let mut records: Vec<PrunedRecord> = specs
                .par_iter()
                .map(|spec| {
                    let task = spec.materialize(&ds, HeadSource::Backbone)?;
                    let cfg = self.cfg.amp_config(ratio, l1, derive_seed(spec.seed, "amp", 0));
                    crate::amp::build_pool_entry(&net, &task, &cfg)
                })
                .collect::<Result<_>>()?;
            let first_id = self.pools.values().map(|p| p.records.len() as u64).sum::<u64>() + 1;
            for (i, r) in records.iter_mut().enumerate() {
                match &mut disk {
                    Some(pool) => {
                        pool.save_record(r)?;
                    }
                    None => r.record_id = first_id + i as u64,
                }
            }
            records
        } else {
            let ids: Vec<&str> = existing.iter().map(|r| r.task_id.as_str()).collect();
            let want: Vec<&str> = specs.iter().map(|s| s.task_id.as_str()).collect();
            if ids != want {
                return Err(Error::InvalidConfig(format!(
                    "pool directory holds {} records for {task_size}-class tasks at ratio {ratio} that do not match this config",
                    existing.len()
                )));
            }
            existing
        };
        let set = Arc::new(PoolSet {
            task_size,
            ratio,
            specs,
            records,
        });
        self.pools.insert(key, Arc::clone(&set));
        Ok(set)
    }

    /// Held-out evaluation tasks from the base dataset.
    pub fn test_tasks(&mut self, task_size: usize) -> Result<Vec<TaskData>> {
        let ds = self.dataset()?;
        let specs = sample_tasks(
            &ds,
            task_size,
            self.cfg.eval.test_tasks,
            derive_seed(self.cfg.seed, "test-tasks", task_size as u64),
            None,
            "test",
        )?;
        materialize_all(&specs, &ds, HeadSource::Backbone)
    }

    /// Evaluation tasks from the shifted dataset.
    pub fn unseen_tasks(&mut self, task_size: usize) -> Result<Vec<TaskData>> {
        let ds = self.shifted_dataset()?;
        let specs = sample_tasks(
            &ds,
            task_size,
            self.cfg.eval.test_tasks,
            derive_seed(self.cfg.seed, "unseen-tasks", task_size as u64),
            None,
            "unseen",
        )?;
        materialize_all(&specs, &ds, HeadSource::Unseen)
    }

    pub fn run(&mut self, scenario: &str) -> Result<ExperimentReport> {
        let mut report = match scenario {
            "pool-build" => self.pool_build()?,
            "main-comparison" => self.main_comparison()?,
            "size-transfer" => self.size_transfer()?,
            "ratio-transfer" => self.ratio_transfer()?,
            "unseen-distribution" => self.unseen_distribution()?,
            "neighbor-ablation" => self.neighbor_ablation()?,
            "similarity-ablation" => self.similarity_ablation()?,
            "overlap-analysis" => self.overlap_analysis()?,
            other => return Err(Error::UnknownScenario(other.to_string())),
        };
        let cfg = &self.cfg;
        report.aggregate(|m, v| cfg.row_hash(scenario, m, v));
        if scenario == "pool-build" {
            for p in self.grid_points() {
                report.rows.push(ReportRow {
                    method: "l1-grid".into(),
                    variant: format!("l1={}", p.l1_weight),
                    tasks: p.tasks,
                    accuracy_mean: p.mean_accuracy,
                    accuracy_std: p.accuracy_std,
                    training_flops_mean: 0.0,
                    achieved_ratio_mean: p.mean_ratio,
                    prune_iterations: cfg.amp.iterations,
                    fine_tune_iterations: 0,
                    config_hash: cfg.row_hash(scenario, "l1-grid", &p.l1_weight.to_string()),
                });
            }
        }
        Ok(report)
    }

    fn new_report(&self, scenario: &str) -> ExperimentReport {
        ExperimentReport::new(scenario, self.cfg.row_hash(scenario, "", ""))
    }

    fn pool_build(&mut self) -> Result<ExperimentReport> {
        let mut report = self.new_report("pool-build");
        let (size, ratio) = (self.cfg.pool.task_size, self.cfg.pool.ratio);
        let pool = self.pool(size, ratio)?;
        let ds = self.dataset()?;
        let net = self.net()?;
        let rows: Vec<TaskRow> = pool
            .specs
            .par_iter()
            .zip(&pool.records)
            .map(|(spec, record)| {
                let task = spec.materialize(&ds, HeadSource::Backbone)?;
                let mut masked = task.task_network(&net)?;
                let mask = MaskState::from_parts(net.arch(), &record.scores_f64(), &record.retained())?;
                masked.set_mask(Some(mask))?;
                Ok(TaskRow {
                    method: "amp-pool".into(),
                    variant: format!("c{size}-r{ratio}"),
                    task_id: record.task_id.clone(),
                    accuracy: masked.accuracy(&task.test_x, &task.test_y)?,
                    achieved_ratio: record.metadata.achieved_ratio,
                    training_flops: 0,
                    prune_iterations: record.metadata.iterations as usize,
                    fine_tune_iterations: 0,
                    neighbors: String::new(),
                })
            })
            .collect::<Result<_>>()?;
        let reached = pool
            .records
            .iter()
            .filter(|r| r.metadata.achieved_ratio >= ratio - 1e-12)
            .count();
        report.checks.push(Check {
            name: "records-reach-ratio".into(),
            passed: reached == pool.records.len(),
            detail: format!("{reached}/{} records at ratio >= {ratio}", pool.records.len()),
        });
        let l1 = self.l1_weight()?;
        let chosen = self.grid_points().iter().find(|p| p.l1_weight == l1);
        report.checks.push(Check {
            name: "l1-selected".into(),
            passed: chosen.is_some_and(|p| p.converged == p.tasks),
            detail: match chosen {
                Some(p) => format!("l1 = {l1}, {}/{} grid tasks reached the ratio", p.converged, p.tasks),
                None => format!("l1 = {l1} (fixed)"),
            },
        });
        report.checks.push(Check {
            name: "backbone-accuracy".into(),
            passed: true,
            detail: format!("{:.4}", self.backbone()?.test_accuracy),
        });
        report.tasks = rows;
        Ok(report)
    }

    fn main_comparison(&mut self) -> Result<ExperimentReport> {
        let mut report = self.new_report("main-comparison");
        let ratio = self.cfg.eval.ratio;
        let pool = self.pool(self.cfg.pool.task_size, self.cfg.pool.ratio)?;
        let tasks = self.test_tasks(self.cfg.eval.task_size)?;
        let net = self.net()?;
        let l1 = self.l1_weight()?;
        let cfg = &self.cfg;
        let rows: Vec<Vec<TaskRow>> = tasks
            .par_iter()
            .map(|task| {
                let seed = task_seed(cfg.seed, "main", &task.task_id);
                let smsp_cfg = cfg.smsp_config(ratio, seed);
                let table = build_similarity_table(&net, &pool.records, task)?;
                let ids = select_neighbors(&table, smsp_cfg.neighbor_count, smsp_cfg.class_disjoint_neighbors, &task.classes)?;
                let smsp = run_smsp(&net, &pool, &ids, task, &smsp_cfg, "smsp", "default")?;
                let amp_row = baseline_amp_row(&net, task, ratio, l1, cfg, seed, "default")?;
                let random = random_row(&net, task, ratio, &smsp_cfg, "default")?;
                Ok(vec![smsp, amp_row, random])
            })
            .collect::<Result<_>>()?;
        report.tasks = rows.into_iter().flatten().collect();
        Ok(report)
    }

    fn size_transfer(&mut self) -> Result<ExperimentReport> {
        let mut report = self.new_report("size-transfer");
        let sizes = self.cfg.size_transfer.sizes.clone();
        let ratio = self.cfg.eval.ratio;
        let net = self.net()?;
        for &p in &sizes {
            let pool = self.pool(p, self.cfg.pool.ratio)?;
            for &t in &sizes {
                let tasks = self.test_tasks(t)?;
                let cfg = &self.cfg;
                let rows: Vec<TaskRow> = tasks
                    .par_iter()
                    .map(|task| {
                        let smsp_cfg = cfg.smsp_config(ratio, task_seed(cfg.seed, "size", &task.task_id));
                        let table = build_similarity_table(&net, &pool.records, task)?;
                        let ids = disjoint_first(&table, smsp_cfg.neighbor_count, smsp_cfg.class_disjoint_neighbors, &task.classes);
                        run_smsp(&net, &pool, &ids, task, &smsp_cfg, "smsp", &format!("pool{p}-target{t}"))
                    })
                    .collect::<Result<_>>()?;
                report.tasks.extend(rows);
            }
        }
        Ok(report)
    }

    fn ratio_transfer(&mut self) -> Result<ExperimentReport> {
        let mut report = self.new_report("ratio-transfer");
        let mut ratios = self.cfg.ratio_transfer.ratios.clone();
        ratios.sort_by(f64::total_cmp);
        let pool = self.pool(self.cfg.pool.task_size, self.cfg.pool.ratio)?;
        let tasks = self.test_tasks(self.cfg.eval.task_size)?;
        let net = self.net()?;
        let cfg = &self.cfg;
        let results: Vec<(Vec<TaskRow>, bool)> = tasks
            .par_iter()
            .map(|task| {
                let seed = task_seed(cfg.seed, "ratio", &task.task_id);
                let base = cfg.smsp_config(cfg.pool.ratio, seed);
                let table = build_similarity_table(&net, &pool.records, task)?;
                let ids = select_neighbors(&table, base.neighbor_count, base.class_disjoint_neighbors, &task.classes)?;
                let mut rows = Vec::new();
                let mut retained_sets: Vec<Vec<bool>> = Vec::new();
                for &r in &ratios {
                    let smsp_cfg = SmspConfig {
                        pruning_ratio: r,
                        ..base.clone()
                    };
                    let variant = format!("r{r}");
                    let neighbors = lookup(&pool, &ids)?;
                    let out = smsp_with_neighbors(&net, &neighbors, task, &smsp_cfg)?;
                    retained_sets.push(out.mask.retained.clone());
                    rows.push(smsp_row(&out, "smsp", &variant));
                    rows.push(random_row(&net, task, r, &smsp_cfg, &variant)?);
                }
                let nested = retained_sets
                    .windows(2)
                    .all(|w| w[1].iter().zip(&w[0]).all(|(&hi, &lo)| !hi || lo));
                Ok((rows, nested))
            })
            .collect::<Result<_>>()?;
        let nested = results.iter().filter(|r| r.1).count();
        report.checks.push(Check {
            name: "nested-retention".into(),
            passed: nested == results.len(),
            detail: format!("{nested}/{} tasks nested across ratios {ratios:?}", results.len()),
        });
        report.tasks = results.into_iter().flat_map(|r| r.0).collect();
        Ok(report)
    }

    fn unseen_distribution(&mut self) -> Result<ExperimentReport> {
        let mut report = self.new_report("unseen-distribution");
        let ratio = self.cfg.eval.ratio;
        let pool = self.pool(self.cfg.pool.task_size, self.cfg.pool.ratio)?;
        let tasks = self.unseen_tasks(self.cfg.unseen_distribution.task_size)?;
        let net = self.net()?;
        let l1 = self.l1_weight()?;
        let cfg = &self.cfg;
        let rows: Vec<Vec<TaskRow>> = tasks
            .par_iter()
            .map(|task| {
                // Shifted classes share no identity with base classes.
                let seed = task_seed(cfg.seed, "unseen", &task.task_id);
                let smsp_cfg = SmspConfig {
                    class_disjoint_neighbors: false,
                    ..cfg.smsp_config(ratio, seed)
                };
                let table = build_similarity_table(&net, &pool.records, task)?;
                let ids = select_neighbors(&table, smsp_cfg.neighbor_count, false, &task.classes)?;
                Ok(vec![
                    run_smsp(&net, &pool, &ids, task, &smsp_cfg, "smsp", "shifted")?,
                    baseline_amp_row(&net, task, ratio, l1, cfg, seed, "shifted")?,
                    random_row(&net, task, ratio, &smsp_cfg, "shifted")?,
                ])
            })
            .collect::<Result<_>>()?;
        report.tasks = rows.into_iter().flatten().collect();
        Ok(report)
    }

    fn neighbor_ablation(&mut self) -> Result<ExperimentReport> {
        let mut report = self.new_report("neighbor-ablation");
        let counts = self.cfg.neighbor_ablation.counts.clone();
        let ratio = self.cfg.eval.ratio;
        let pool = self.pool(self.cfg.pool.task_size, self.cfg.pool.ratio)?;
        let tasks = self.test_tasks(self.cfg.eval.task_size)?;
        let net = self.net()?;
        let cfg = &self.cfg;
        let rows: Vec<Vec<TaskRow>> = tasks
            .par_iter()
            .map(|task| {
                let base = cfg.smsp_config(ratio, task_seed(cfg.seed, "neighbors", &task.task_id));
                let table = build_similarity_table(&net, &pool.records, task)?;
                counts
                    .iter()
                    .map(|&m| {
                        let ids = select_neighbors(&table, m, base.class_disjoint_neighbors, &task.classes)?;
                        let smsp_cfg = SmspConfig {
                            neighbor_count: m,
                            ..base.clone()
                        };
                        run_smsp(&net, &pool, &ids, task, &smsp_cfg, "smsp", &format!("m{m}"))
                    })
                    .collect()
            })
            .collect::<Result<_>>()?;
        report.tasks = rows.into_iter().flatten().collect();
        Ok(report)
    }

    fn similarity_ablation(&mut self) -> Result<ExperimentReport> {
        let mut report = self.new_report("similarity-ablation");
        let iterations = self.cfg.similarity_ablation.iterations.clone();
        let ratio = self.cfg.eval.ratio;
        let pool = self.pool(self.cfg.pool.task_size, self.cfg.pool.ratio)?;
        let tasks = self.test_tasks(self.cfg.eval.task_size)?;
        let net = self.net()?;
        let cfg = &self.cfg;
        let rows: Vec<Vec<TaskRow>> = tasks
            .par_iter()
            .map(|task| {
                let base = cfg.smsp_config(ratio, task_seed(cfg.seed, "similarity", &task.task_id));
                let candidates: Vec<PrunedRecord> = pool
                    .records
                    .iter()
                    .filter(|r| !base.class_disjoint_neighbors || !shares_class(r, &task.classes))
                    .cloned()
                    .collect();
                if candidates.is_empty() {
                    return Err(Error::NotEnoughNeighbors { needed: 1, found: 0 });
                }
                let table = build_similarity_table(&net, &candidates, task)?;
                let mut rows = Vec::new();
                for group in [1u8, 3] {
                    let ids = group_neighbors(&table, group, base.neighbor_count, derive_seed(base.seed, "group", group.into()));
                    if ids.is_empty() {
                        continue;
                    }
                    for &j in &iterations {
                        let smsp_cfg = SmspConfig {
                            fine_tune_iterations: j,
                            neighbor_count: ids.len(),
                            ..base.clone()
                        };
                        rows.push(run_smsp(&net, &pool, &ids, task, &smsp_cfg, "smsp", &format!("group{group}-j{j}"))?);
                    }
                }
                Ok(rows)
            })
            .collect::<Result<_>>()?;
        report.tasks = rows.into_iter().flatten().collect();
        for group in [1, 3] {
            let variant = format!("group{group}-j{}", iterations.first().copied().unwrap_or(0));
            let used = report.tasks.iter().filter(|t| t.variant == variant).count();
            report.checks.push(Check {
                name: format!("group{group}-coverage"),
                passed: used == tasks.len(),
                detail: format!("{used}/{} tasks had eligible group-{group} neighbours", tasks.len()),
            });
        }
        Ok(report)
    }

    fn overlap_analysis(&mut self) -> Result<ExperimentReport> {
        let mut report = self.new_report("overlap-analysis");
        let oa = self.cfg.overlap_analysis.clone();
        let pool = self.pool(self.cfg.pool.task_size, oa.pool_ratio)?;
        let ds = self.dataset()?;
        let net = self.net()?;
        let n = net.num_units();
        let ks: Vec<(f64, usize)> = oa
            .k_fractions
            .iter()
            .map(|&f| (f, ((n as f64) * f).round().max(1.0) as usize))
            .collect();
        // For every record as the target: (group, overlap per k) with each other record.
        let per_target: Vec<Vec<(u8, Vec<f64>)>> = pool
            .specs
            .par_iter()
            .zip(&pool.records)
            .map(|(spec, target)| {
                let task = spec.materialize(&ds, HeadSource::Backbone)?;
                let others: Vec<PrunedRecord> = pool
                    .records
                    .iter()
                    .filter(|r| r.record_id != target.record_id)
                    .cloned()
                    .collect();
                let table = build_similarity_table(&net, &others, &task)?;
                table
                    .rows
                    .iter()
                    .map(|row| {
                        let other = pool.record(row.record_id)?;
                        let overlaps = ks
                            .iter()
                            .map(|&(_, k)| overlap_ratio(target, other, k))
                            .collect::<Result<_>>()?;
                        Ok((row.group, overlaps))
                    })
                    .collect()
            })
            .collect::<Result<_>>()?;
        let pairs: Vec<&(u8, Vec<f64>)> = per_target.iter().flatten().collect();
        for (ki, &(f, k)) in ks.iter().enumerate() {
            let mut by_group: [Vec<f64>; 3] = Default::default();
            for (g, o) in &pairs {
                by_group[usize::from(*g) - 1].push(o[ki]);
            }
            for (gi, vals) in by_group.iter().enumerate() {
                report.overlap.push(OverlapRow {
                    k_fraction: f,
                    k,
                    group: gi as u8 + 1,
                    pairs: vals.len(),
                    mean_overlap: mean(vals),
                    std_overlap: std_dev(vals),
                });
            }
            let (diff, p) = permutation_test(
                &by_group[0],
                &by_group[2],
                oa.permutation_rounds,
                derive_seed(self.cfg.seed, "overlap-permutation", ki as u64),
            );
            report.checks.push(Check {
                name: format!("group1-exceeds-group3-k{k}"),
                passed: diff > 0.0 && p < 0.05,
                detail: format!("difference {diff:.4}, permutation p = {p:.4}"),
            });
        }
        Ok(report)
    }
}

fn materialize_all(specs: &[TaskSpec], ds: &Dataset, head: HeadSource) -> Result<Vec<TaskData>> {
    specs.par_iter().map(|s| s.materialize(ds, head)).collect()
}

fn task_seed(seed: u64, stream: &str, task_id: &str) -> u64 {
    derive_seed(seed, &format!("{stream}/{task_id}"), 0)
}

fn lookup<'a>(pool: &'a PoolSet, ids: &[u64]) -> Result<Vec<&'a PrunedRecord>> {
    ids.iter().map(|&id| pool.record(id)).collect()
}

/// Up to `m` records drawn uniformly from one similarity group, listed in
/// table order. The whole group is returned when it has at most `m` rows.
pub fn group_neighbors(table: &SimilarityTable, group: u8, m: usize, seed: u64) -> Vec<u64> {
    let members = table.group(group);
    if members.len() <= m {
        return members;
    }
    let mut picked = rand::seq::index::sample(&mut crate::rng::seeded(seed), members.len(), m).into_vec();
    picked.sort_unstable();
    picked.into_iter().map(|i| members[i]).collect()
}

fn shares_class(record: &PrunedRecord, classes: &[usize]) -> bool {
    record.class_labels.iter().any(|c| classes.contains(c))
}

/// The `m` best records, class-disjoint ones first. Large targets in a small
/// class universe rarely have `m` disjoint records, so the rest of the list
/// is filled in similarity order.
fn disjoint_first(table: &SimilarityTable, m: usize, class_disjoint: bool, target_classes: &[usize]) -> Vec<u64> {
    let disjoint = |r: &&crate::tasksim::SimilarityRow| !r.class_labels.iter().any(|c| target_classes.contains(c));
    let (mut first, rest): (Vec<_>, Vec<_>) = table.rows.iter().partition(|r| !class_disjoint || disjoint(r));
    first.extend(rest);
    first.into_iter().take(m).map(|r| r.record_id).collect()
}

fn run_smsp(
    net: &MaskedNetwork,
    pool: &PoolSet,
    ids: &[u64],
    task: &TaskData,
    cfg: &SmspConfig,
    method: &str,
    variant: &str,
) -> Result<TaskRow> {
    let neighbors = lookup(pool, ids)?;
    let out = smsp_with_neighbors(net, &neighbors, task, cfg)?;
    Ok(smsp_row(&out, method, variant))
}

fn smsp_row(out: &crate::smsp::SmspOutcome, method: &str, variant: &str) -> TaskRow {
    TaskRow {
        method: method.into(),
        variant: variant.into(),
        task_id: out.task_id.clone(),
        accuracy: out.accuracy,
        achieved_ratio: out.achieved_ratio,
        training_flops: out.flops_ledger.cumulative_training_flops,
        prune_iterations: 0,
        fine_tune_iterations: out.fine_tune_iterations,
        neighbors: out
            .mask
            .neighbor_ids
            .iter()
            .map(u64::to_string)
            .collect::<Vec<_>>()
            .join(";"),
    }
}

/// Free-weight AMP run for the baseline iteration budget.
fn baseline_amp_row(
    net: &MaskedNetwork,
    task: &TaskData,
    ratio: f64,
    l1: f64,
    cfg: &ExperimentConfig,
    seed: u64,
    variant: &str,
) -> Result<TaskRow> {
    let amp_cfg = AmpConfig {
        iterations: cfg.amp.baseline_iterations,
        target_ratio: ratio,
        threshold: cfg.amp.threshold,
        l1_weight: l1,
        batch_size: cfg.amp.batch_size,
        lr: cfg.amp.baseline_lr,
        min_lr: cfg.amp.min_lr,
        frozen_weights: false,
        seed,
    };
    let amp = amp_prune(&task.task_network(net)?, task, &amp_cfg)?;
    Ok(TaskRow {
        method: "amp".into(),
        variant: variant.into(),
        task_id: task.task_id.clone(),
        accuracy: amp.final_accuracy,
        achieved_ratio: amp.achieved_ratio,
        training_flops: amp.flops_ledger.cumulative_training_flops,
        prune_iterations: amp.iterations_used,
        fine_tune_iterations: 0,
        neighbors: String::new(),
    })
}

fn random_row(net: &MaskedNetwork, task: &TaskData, ratio: f64, cfg: &SmspConfig, variant: &str) -> Result<TaskRow> {
    let out = run_random_mask_baseline(net, task, ratio, &cfg.fine_tune())?;
    Ok(TaskRow {
        method: "random".into(),
        variant: variant.into(),
        task_id: task.task_id.clone(),
        accuracy: out.accuracy,
        achieved_ratio: out.achieved_ratio,
        training_flops: out.flops_ledger.cumulative_training_flops,
        prune_iterations: 0,
        fine_tune_iterations: out.fine_tune_iterations,
        neighbors: String::new(),
    })
}
