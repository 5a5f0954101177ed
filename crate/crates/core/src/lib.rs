//! Structured pruning with learnable mask scores and a reusable pool of
//! pruned task masks.
//!
//! The crate is organised bottom-up:
//!
//! - [`gradcore`]: tensors, reverse-mode autodiff, SGD and cosine schedules.
//! - [`maskednet`]: prunable CNN/MLP networks whose conv filters and hidden
//!   nodes carry a mask score, structural sub-network extraction, FLOPs.
//! - [`amp`]: automatic mask pruning under an L1-regularised objective.
//! - [`poolstore`]: the on-disk pool of pruned task records.
//! - [`tasksim`]: LEEP transferability, top-k overlap and similarity groups.
//! - [`smsp`]: one-shot pruning of a new task from its most similar pool
//!   records, followed by a short fine-tune.
//! - [`bench`]: synthetic data, backbone pre-training, baselines and the
//!   scenario runner that emits CSV/markdown reports.

pub mod amp;
pub mod bench;
mod codec;
pub mod error;
pub mod gradcore;
pub mod maskednet;
pub mod poolstore;
pub mod rng;
pub mod smsp;
pub mod task;
pub mod tasksim;

pub use error::{Error, Result};
