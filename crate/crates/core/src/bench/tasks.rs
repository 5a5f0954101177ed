use std::collections::BTreeSet;

use rand::seq::index;

use super::data::Dataset;
use crate::error::{Error, Result};
use crate::rng::{self, derive_seed};
use crate::task::{HeadSource, TaskData};

/// A `c`-class task drawn from a dataset; sample handles are dataset indices.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TaskSpec {
    pub task_id: String,
    /// Strictly increasing dataset class ids.
    pub classes: Vec<usize>,
    pub train: Vec<usize>,
    pub test: Vec<usize>,
    pub seed: u64,
}

impl TaskSpec {
    /// A task over the given classes (any order, deduplicated) taking every
    /// train/test sample of each.
    pub fn from_classes(ds: &Dataset, task_id: &str, classes: &[usize], seed: u64) -> Result<Self> {
        let classes: Vec<usize> = classes.iter().copied().collect::<BTreeSet<_>>().into_iter().collect();
        if classes.is_empty() {
            return Err(Error::InfeasibleTasks("task needs at least one class".into()));
        }
        if let Some(&k) = classes.iter().find(|&&k| k >= ds.num_classes) {
            return Err(Error::LabelOutOfRange {
                label: k,
                num_classes: ds.num_classes,
            });
        }
        let splits: Vec<(Vec<usize>, Vec<usize>)> = classes.iter().map(|&k| ds.split_indices(k)).collect();
        Ok(Self {
            task_id: task_id.to_string(),
            train: splits.iter().flat_map(|s| s.0.iter().copied()).collect(),
            test: splits.iter().flat_map(|s| s.1.iter().copied()).collect(),
            classes,
            seed,
        })
    }

    /// Builds tensors with labels remapped to `0..c` (position in
    /// `classes`).
    pub fn materialize(&self, ds: &Dataset, head: HeadSource) -> Result<TaskData> {
        let local = |idx: &[usize]| -> Result<Vec<usize>> {
            ds.labels_of(idx)
                .into_iter()
                .map(|g| {
                    self.classes.binary_search(&g).map_err(|_| Error::LabelOutOfRange {
                        label: g,
                        num_classes: ds.num_classes,
                    })
                })
                .collect()
        };
        let task = TaskData {
            task_id: self.task_id.clone(),
            classes: self.classes.clone(),
            train_x: ds.to_tensor(&self.train)?,
            train_y: local(&self.train)?,
            test_x: ds.to_tensor(&self.test)?,
            test_y: local(&self.test)?,
            head,
        };
        task.validate()?;
        Ok(task)
    }
}

/// `count` tasks of `c` distinct classes each, sampled uniformly from the
/// classes not used by any set in `disjoint_from`. Each task takes every
/// train/test sample of its classes. Ids are `<prefix>-<c>c-<i>`.
pub fn sample_tasks(
    ds: &Dataset,
    c: usize,
    count: usize,
    seed: u64,
    disjoint_from: Option<&[Vec<usize>]>,
    prefix: &str,
) -> Result<Vec<TaskSpec>> {
    let excluded: BTreeSet<usize> = disjoint_from.into_iter().flatten().flatten().copied().collect();
    let allowed: Vec<usize> = (0..ds.num_classes).filter(|k| !excluded.contains(k)).collect();
    if c == 0 || allowed.len() < c {
        return Err(Error::InfeasibleTasks(format!(
            "{c}-class tasks from {} available classes",
            allowed.len()
        )));
    }
    let splits: Vec<(Vec<usize>, Vec<usize>)> = (0..ds.num_classes).map(|k| ds.split_indices(k)).collect();
    if let Some(k) = allowed.iter().find(|&&k| splits[k].0.is_empty() || splits[k].1.is_empty()) {
        return Err(Error::InfeasibleTasks(format!("class {k} lacks train or test samples")));
    }
    (0..count)
        .map(|i| {
            let task_seed = derive_seed(seed, prefix, i as u64);
            let mut rng = rng::seeded(task_seed);
            let mut classes: Vec<usize> = index::sample(&mut rng, allowed.len(), c)
                .into_iter()
                .map(|j| allowed[j])
                .collect();
            classes.sort_unstable();
            let train = classes.iter().flat_map(|&k| splits[k].0.iter().copied()).collect();
            let test = classes.iter().flat_map(|&k| splits[k].1.iter().copied()).collect();
            Ok(TaskSpec {
                task_id: format!("{prefix}-{c}c-{i:03}"),
                classes,
                train,
                test,
                seed: task_seed,
            })
        })
        .collect()
}
