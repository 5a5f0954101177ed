//! Prunable CNN and MLP networks whose conv filters and hidden dense nodes
//! each carry a learnable mask score.

mod arch;
mod checkpoint;
mod flops;
mod network;

pub use arch::{Architecture, InputShape, LayerGeometry, LayerSpec, DESK_CNN_ID, DESK_MLP_ID};
pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint};
pub use flops::{count_flops, FlopsLedger};
pub use network::{Bindings, LayerParams, MaskState, MaskedNetwork, PrunableUnit, UnitKind};
pub(crate) use network::{argmax, chunk_indices};
