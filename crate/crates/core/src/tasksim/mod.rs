//! Task similarity: LEEP transferability, top-k mask overlap and
//! equal-width similarity groups.

mod leep;
mod overlap;
mod table;

pub use leep::{leep_from_probabilities, leep_score, source_probabilities, LeepScore};
pub use overlap::{overlap_ratio, top_k_units};
pub use table::{assign_groups, build_similarity_table, SimilarityRow, SimilarityTable, NUM_GROUPS};
