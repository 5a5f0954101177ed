use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::stats::{mean, std_dev};
use crate::codec::write_atomic;
use crate::error::Result;

/// One method on one task.
#[derive(Clone, Debug, PartialEq)]
pub struct TaskRow {
    pub method: String,
    pub variant: String,
    pub task_id: String,
    pub accuracy: f64,
    pub achieved_ratio: f64,
    pub training_flops: u64,
    /// AMP iterations (pruning and mask training).
    pub prune_iterations: usize,
    pub fine_tune_iterations: usize,
    /// `;`-separated neighbour record ids, empty when not applicable.
    pub neighbors: String,
}

/// Aggregate over tasks for one (method, variant).
#[derive(Clone, Debug, PartialEq)]
pub struct ReportRow {
    pub method: String,
    pub variant: String,
    pub tasks: usize,
    pub accuracy_mean: f64,
    pub accuracy_std: f64,
    pub training_flops_mean: f64,
    pub achieved_ratio_mean: f64,
    pub prune_iterations: usize,
    pub fine_tune_iterations: usize,
    pub config_hash: String,
}

/// Mean top-k overlap within one similarity group.
#[derive(Clone, Debug, PartialEq)]
pub struct OverlapRow {
    pub k_fraction: f64,
    pub k: usize,
    pub group: u8,
    pub pairs: usize,
    pub mean_overlap: f64,
    pub std_overlap: f64,
}

/// A named pass/fail property with supporting detail.
#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ExperimentReport {
    pub scenario: String,
    pub config_hash: String,
    pub rows: Vec<ReportRow>,
    pub tasks: Vec<TaskRow>,
    pub overlap: Vec<OverlapRow>,
    pub checks: Vec<Check>,
}

impl ExperimentReport {
    pub fn new(scenario: &str, config_hash: String) -> Self {
        Self {
            scenario: scenario.to_string(),
            config_hash,
            ..Default::default()
        }
    }

    pub fn row(&self, method: &str, variant: &str) -> Option<&ReportRow> {
        self.rows.iter().find(|r| r.method == method && r.variant == variant)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    /// Task rows of one (method, variant), ordered by task id.
    pub fn task_rows(&self, method: &str, variant: &str) -> Vec<&TaskRow> {
        self.tasks
            .iter()
            .filter(|t| t.method == method && t.variant == variant)
            .collect()
    }

    /// Sorts task rows and rebuilds `rows` in first-appearance order of
    /// (method, variant). `hash` maps a pair to its config hash.
    pub fn aggregate(&mut self, hash: impl Fn(&str, &str) -> String) {
        let mut keys: Vec<(String, String)> = Vec::new();
        for t in &self.tasks {
            let key = (t.method.clone(), t.variant.clone());
            if !keys.contains(&key) {
                keys.push(key);
            }
        }
        self.tasks.sort_by(|a, b| {
            let ka = keys.iter().position(|k| k.0 == a.method && k.1 == a.variant);
            let kb = keys.iter().position(|k| k.0 == b.method && k.1 == b.variant);
            ka.cmp(&kb).then_with(|| a.task_id.cmp(&b.task_id))
        });
        self.rows = keys
            .into_iter()
            .map(|(method, variant)| {
                let ts = self.task_rows(&method, &variant);
                let acc: Vec<f64> = ts.iter().map(|t| t.accuracy).collect();
                let flops: Vec<f64> = ts.iter().map(|t| t.training_flops as f64).collect();
                let ratio: Vec<f64> = ts.iter().map(|t| t.achieved_ratio).collect();
                ReportRow {
                    tasks: ts.len(),
                    accuracy_mean: mean(&acc),
                    accuracy_std: std_dev(&acc),
                    training_flops_mean: mean(&flops),
                    achieved_ratio_mean: mean(&ratio),
                    prune_iterations: ts.iter().map(|t| t.prune_iterations).max().unwrap_or(0),
                    fine_tune_iterations: ts.iter().map(|t| t.fine_tune_iterations).max().unwrap_or(0),
                    config_hash: hash(&method, &variant),
                    method,
                    variant,
                }
            })
            .collect();
    }

    pub fn summary_csv(&self) -> String {
        let mut s = String::from(
            "scenario,method,variant,tasks,accuracy_mean,accuracy_std,training_flops_mean,achieved_ratio_mean,prune_iterations,fine_tune_iterations,config_hash\n",
        );
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{},{},{},{:.6},{:.6},{:.1},{:.6},{},{},{}",
                self.scenario,
                r.method,
                r.variant,
                r.tasks,
                r.accuracy_mean,
                r.accuracy_std,
                r.training_flops_mean,
                r.achieved_ratio_mean,
                r.prune_iterations,
                r.fine_tune_iterations,
                r.config_hash
            );
        }
        s
    }

    pub fn tasks_csv(&self) -> String {
        let mut s = String::from(
            "scenario,method,variant,task_id,accuracy,achieved_ratio,training_flops,prune_iterations,fine_tune_iterations,neighbors\n",
        );
        for t in &self.tasks {
            let _ = writeln!(
                s,
                "{},{},{},{},{:.6},{:.6},{},{},{},{}",
                self.scenario,
                t.method,
                t.variant,
                t.task_id,
                t.accuracy,
                t.achieved_ratio,
                t.training_flops,
                t.prune_iterations,
                t.fine_tune_iterations,
                t.neighbors
            );
        }
        s
    }

    pub fn overlap_csv(&self) -> String {
        let mut s = String::from("scenario,k_fraction,k,group,pairs,mean_overlap,std_overlap\n");
        for o in &self.overlap {
            let _ = writeln!(
                s,
                "{},{:.3},{},{},{},{:.6},{:.6}",
                self.scenario, o.k_fraction, o.k, o.group, o.pairs, o.mean_overlap, o.std_overlap
            );
        }
        s
    }

    pub fn checks_csv(&self) -> String {
        let mut s = String::from("scenario,check,passed,detail\n");
        for c in &self.checks {
            let _ = writeln!(s, "{},{},{},\"{}\"", self.scenario, c.name, c.passed, c.detail.replace('"', "'"));
        }
        s
    }

    pub fn markdown(&self) -> String {
        let mut s = format!("# {}\n\nConfig hash `{}`.\n\n", self.scenario, self.config_hash);
        if !self.rows.is_empty() {
            s.push_str("| Method | Variant | Acc(%) | FLOPs(G) | Prune iters | Fine-tune iters | Ratio | Tasks |\n");
            s.push_str("|---|---|---|---|---|---|---|---|\n");
            for r in &self.rows {
                let _ = writeln!(
                    s,
                    "| {} | {} | {:.2} ± {:.2} | {:.3} | {} | {} | {:.3} | {} |",
                    r.method,
                    r.variant,
                    100.0 * r.accuracy_mean,
                    100.0 * r.accuracy_std,
                    r.training_flops_mean / 1e9,
                    r.prune_iterations,
                    r.fine_tune_iterations,
                    r.achieved_ratio_mean,
                    r.tasks
                );
            }
            s.push('\n');
        }
        if !self.overlap.is_empty() {
            s.push_str("| k | Group | Pairs | Mean overlap |\n|---|---|---|---|\n");
            for o in &self.overlap {
                let _ = writeln!(
                    s,
                    "| {} ({:.0}% of n) | {} | {} | {:.4} ± {:.4} |",
                    o.k,
                    100.0 * o.k_fraction,
                    o.group,
                    o.pairs,
                    o.mean_overlap,
                    o.std_overlap
                );
            }
            s.push('\n');
        }
        if !self.checks.is_empty() {
            s.push_str("| Check | Result | Detail |\n|---|---|---|\n");
            for c in &self.checks {
                let verdict = if c.passed { "pass" } else { "FAIL" };
                let _ = writeln!(s, "| {} | {} | {} |", c.name, verdict, c.detail);
            }
        }
        s
    }

    /// Writes `<scenario>.csv`, `<scenario>_tasks.csv`, `<scenario>.md`, and
    /// the overlap/check tables when present. Returns the paths written.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir)?;
        let mut files = vec![
            (format!("{}.csv", self.scenario), self.summary_csv()),
            (format!("{}_tasks.csv", self.scenario), self.tasks_csv()),
            (format!("{}.md", self.scenario), self.markdown()),
        ];
        if !self.overlap.is_empty() {
            files.push((format!("{}_overlap.csv", self.scenario), self.overlap_csv()));
        }
        if !self.checks.is_empty() {
            files.push((format!("{}_checks.csv", self.scenario), self.checks_csv()));
        }
        let mut written = Vec::with_capacity(files.len());
        for (name, body) in files {
            let path = dir.join(name);
            write_atomic(&path, body.as_bytes())?;
            written.push(path);
        }
        Ok(written)
    }
}
