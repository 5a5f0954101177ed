//! In-memory training/test data for one classification task.

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::gradcore::Tensor;
use crate::maskednet::MaskedNetwork;
use crate::rng::{self, Rng};

/// Where a task's classifier rows come from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HeadSource {
    /// Classes are rows of the backbone classifier (`TaskData::classes`).
    Backbone,
    /// Classes the backbone never saw; a fresh head is fitted to features.
    Unseen,
}

/// Samples of a `c`-class task with labels remapped to `0..c`.
///
/// Local label `i` corresponds to `classes[i]`; `classes` is strictly
/// increasing.
#[derive(Clone, Debug, PartialEq)]
pub struct TaskData {
    pub task_id: String,
    pub classes: Vec<usize>,
    pub train_x: Tensor,
    pub train_y: Vec<usize>,
    pub test_x: Tensor,
    pub test_y: Vec<usize>,
    pub head: HeadSource,
}

impl TaskData {
    pub fn num_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.train_y.is_empty() || self.test_y.is_empty() {
            return Err(Error::EmptyInput("task data"));
        }
        if self.classes.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidConfig(format!(
                "task {} classes not strictly increasing",
                self.task_id
            )));
        }
        let c = self.classes.len();
        for &y in self.train_y.iter().chain(&self.test_y) {
            if y >= c {
                return Err(Error::LabelOutOfRange {
                    label: y,
                    num_classes: c,
                });
            }
        }
        if self.train_x.rows() != self.train_y.len() || self.test_x.rows() != self.test_y.len() {
            return Err(Error::ShapeMismatch {
                op: "task data",
                expected: vec![self.train_y.len(), self.test_y.len()],
                actual: vec![self.train_x.rows(), self.test_x.rows()],
            });
        }
        Ok(())
    }

    /// The pre-trained backbone with a classifier for this task: sliced
    /// backbone rows for seen classes, a nearest-class-mean head fitted on
    /// the training split for unseen ones. Any mask is dropped.
    pub fn task_network(&self, pretrained: &MaskedNetwork) -> Result<MaskedNetwork> {
        let mut base = pretrained.clone();
        base.set_mask(None)?;
        match self.head {
            HeadSource::Backbone => base.with_head_rows(&self.classes),
            HeadSource::Unseen => base.with_imprinted_head(&self.train_x, &self.train_y, self.num_classes()),
        }
    }

    /// Training samples labelled with their original class ids.
    pub fn train_with_global_labels(&self) -> (Tensor, Vec<usize>) {
        let labels = self.train_y.iter().map(|&y| self.classes[y]).collect();
        (self.train_x.clone(), labels)
    }
}

/// Epoch-shuffled mini-batch indices.
#[derive(Clone, Debug)]
pub struct BatchSampler {
    order: Vec<usize>,
    pos: usize,
    batch_size: usize,
    rng: Rng,
}

impl BatchSampler {
    pub fn new(len: usize, batch_size: usize, seed: u64) -> Result<Self> {
        if len == 0 {
            return Err(Error::EmptyInput("batch sampler"));
        }
        if batch_size == 0 {
            return Err(Error::InvalidConfig("batch_size must be positive".into()));
        }
        let mut rng = rng::seeded(seed);
        let mut order: Vec<usize> = (0..len).collect();
        order.shuffle(&mut rng);
        Ok(Self {
            order,
            pos: 0,
            batch_size: batch_size.min(len),
            rng,
        })
    }

    pub fn next_batch(&mut self) -> Vec<usize> {
        if self.pos + self.batch_size > self.order.len() {
            self.order.shuffle(&mut self.rng);
            self.pos = 0;
        }
        let out = self.order[self.pos..self.pos + self.batch_size].to_vec();
        self.pos += self.batch_size;
        out
    }

    /// Gathers the next batch from `x`/`y`.
    pub fn next_from(&mut self, x: &Tensor, y: &[usize]) -> (Tensor, Vec<usize>) {
        let idx = self.next_batch();
        let labels = idx.iter().map(|&i| y[i]).collect();
        (x.select_rows(&idx), labels)
    }
}
