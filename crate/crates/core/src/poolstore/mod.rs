//! On-disk pool of pruned-mask records.

mod record;
mod store;

pub use record::{PrunedRecord, RecordMetadata};
pub use store::{
    decode_index, decode_record, encode_index, encode_record, load_record, query, save_record,
    IndexEntry, Pool, PoolIndex, RecordFilter, FORMAT_VERSION, INDEX_FILE,
};
