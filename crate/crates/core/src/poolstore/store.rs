use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use super::record::{PrunedRecord, RecordMetadata};
use crate::codec::{write_atomic, Reader, Writer};
use crate::error::{Error, Result};
use crate::maskednet::Architecture;

pub const INDEX_FILE: &str = "index.bin";
const INDEX_MAGIC: &[u8; 4] = b"MPIX";
const RECORD_MAGIC: &[u8; 4] = b"MPRC";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct IndexEntry {
    pub record_id: u64,
    pub arch_id: String,
    pub task_size: usize,
    pub pruning_ratio: f64,
    pub file_name: String,
    pub checksum: u64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct PoolIndex {
    pub next_id: u64,
    pub architectures: BTreeMap<String, Architecture>,
    pub entries: BTreeMap<u64, IndexEntry>,
}

/// Conjunctive filter; `None` fields match everything.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RecordFilter {
    pub arch_id: Option<String>,
    pub task_size: Option<usize>,
    pub pruning_ratio: Option<f64>,
}

impl RecordFilter {
    pub fn matches(&self, e: &IndexEntry) -> bool {
        self.arch_id.as_deref().is_none_or(|a| a == e.arch_id)
            && self.task_size.is_none_or(|s| s == e.task_size)
            && self
                .pruning_ratio
                .is_none_or(|r| (r - e.pruning_ratio).abs() < 1e-9)
    }
}

/// A pool directory: `index.bin` plus one file per record.
#[derive(Debug)]
pub struct Pool {
    dir: PathBuf,
    index: PoolIndex,
}

impl Pool {
    /// Opens the pool at `dir`, creating an empty one if none exists.
    pub fn create(dir: &Path) -> Result<Self> {
        if dir.join(INDEX_FILE).exists() {
            return Self::open(dir);
        }
        fs::create_dir_all(dir)?;
        let pool = Self {
            dir: dir.to_path_buf(),
            index: PoolIndex {
                next_id: 1,
                ..Default::default()
            },
        };
        pool.write_index()?;
        Ok(pool)
    }

    pub fn open(dir: &Path) -> Result<Self> {
        let path = dir.join(INDEX_FILE);
        if !path.exists() {
            return Err(Error::MissingPool(dir.to_path_buf()));
        }
        let bytes = fs::read(&path)?;
        let index = decode_index(&bytes, &path)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            index,
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn index(&self) -> &PoolIndex {
        &self.index
    }

    pub fn len(&self) -> usize {
        self.index.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.entries.is_empty()
    }

    pub fn architecture(&self, arch_id: &str) -> Option<&Architecture> {
        self.index.architectures.get(arch_id)
    }

    /// Makes `arch_id` known to the pool. Re-registering the same id with a
    /// different architecture is an error.
    pub fn register_architecture(&mut self, arch_id: &str, arch: &Architecture) -> Result<()> {
        match self.index.architectures.get(arch_id) {
            Some(existing) if existing == arch => Ok(()),
            Some(_) => Err(Error::ArchMismatch(format!(
                "architecture `{arch_id}` already registered with a different shape"
            ))),
            None => {
                self.index.architectures.insert(arch_id.to_string(), arch.clone());
                self.write_index()
            }
        }
    }

    /// Writes `record` under a fresh id, then atomically replaces the index.
    /// Sets and returns `record.record_id`.
    pub fn save_record(&mut self, record: &mut PrunedRecord) -> Result<u64> {
        let arch = self
            .index
            .architectures
            .get(&record.arch_id)
            .ok_or_else(|| Error::ArchMismatch(format!("unknown architecture `{}`", record.arch_id)))?;
        record.validate(Some(arch.num_units()))?;
        let id = self.index.next_id;
        let file_name = format!("rec-{id:010}.bin");
        let mut stored = record.clone();
        stored.record_id = id;
        let bytes = encode_record(&stored);
        let checksum = u64::from_le_bytes(bytes[bytes.len() - 8..].try_into().expect("8 bytes"));
        write_atomic(&self.dir.join(&file_name), &bytes)?;

        let mut next = self.index.clone();
        next.next_id = id + 1;
        next.entries.insert(
            id,
            IndexEntry {
                record_id: id,
                arch_id: stored.arch_id.clone(),
                task_size: stored.class_labels.len(),
                pruning_ratio: stored.pruning_ratio,
                file_name,
                checksum,
            },
        );
        write_atomic(&self.dir.join(INDEX_FILE), &encode_index(&next))?;
        self.index = next;
        record.record_id = id;
        Ok(id)
    }

    pub fn load_record(&self, record_id: u64) -> Result<PrunedRecord> {
        let entry = self
            .index
            .entries
            .get(&record_id)
            .ok_or(Error::MissingRecord(record_id))?;
        let path = self.dir.join(&entry.file_name);
        let bytes = fs::read(&path)?;
        if bytes.len() < 8 {
            return Err(crate::codec::format_err(&path, "truncated record"));
        }
        let stored = u64::from_le_bytes(bytes[bytes.len() - 8..].try_into().expect("8 bytes"));
        if stored != entry.checksum {
            return Err(Error::ChecksumMismatch(path));
        }
        let record = decode_record(&bytes, &path)?;
        if record.record_id != record_id || record.arch_id != entry.arch_id {
            return Err(crate::codec::format_err(&path, "record does not match its index entry"));
        }
        let units = self
            .index
            .architectures
            .get(&record.arch_id)
            .map(Architecture::num_units)
            .ok_or_else(|| Error::ArchMismatch(format!("unknown architecture `{}`", record.arch_id)))?;
        record.validate(Some(units))?;
        Ok(record)
    }

    /// Ids of records matching every field of `filter`, ascending.
    pub fn query(&self, filter: &RecordFilter) -> Vec<u64> {
        self.index
            .entries
            .values()
            .filter(|e| filter.matches(e))
            .map(|e| e.record_id)
            .collect()
    }

    pub fn load_matching(&self, filter: &RecordFilter) -> Result<Vec<PrunedRecord>> {
        self.query(filter).into_iter().map(|id| self.load_record(id)).collect()
    }

    fn write_index(&self) -> Result<()> {
        write_atomic(&self.dir.join(INDEX_FILE), &encode_index(&self.index))
    }
}

/// Opens (or creates) the pool at `pool_path` and saves `record`.
pub fn save_record(pool_path: &Path, record: &mut PrunedRecord) -> Result<u64> {
    Pool::create(pool_path)?.save_record(record)
}

pub fn load_record(pool_path: &Path, record_id: u64) -> Result<PrunedRecord> {
    Pool::open(pool_path)?.load_record(record_id)
}

pub fn query(pool_path: &Path, filter: &RecordFilter) -> Result<Vec<u64>> {
    Ok(Pool::open(pool_path)?.query(filter))
}

/// Record file layout (little-endian):
///
/// ```text
/// magic "MPRC" | version u32 | record_id u64 | arch_id str | task_id str
/// n u32 | |C| u32 | pruning_ratio f64
/// class labels u32 × |C| | scores f32 × n
/// threshold f64 | l1_weight f64 | iterations u32 | seed u64
/// achieved_ratio f64 | created_at u64
/// checksum u64
/// ```
///
/// `str` is a `u16` byte length followed by UTF-8; the checksum is the first
/// eight bytes of SHA-256 over everything before it.
pub fn encode_record(r: &PrunedRecord) -> Vec<u8> {
    let mut w = Writer::new();
    w.bytes(RECORD_MAGIC)
        .u32(FORMAT_VERSION)
        .u64(r.record_id)
        .str(&r.arch_id)
        .str(&r.task_id)
        .u32(r.scores.len() as u32)
        .u32(r.class_labels.len() as u32)
        .f64(r.pruning_ratio);
    for &c in &r.class_labels {
        w.u32(c as u32);
    }
    for &s in &r.scores {
        w.f32(s);
    }
    let m = &r.metadata;
    w.f64(m.threshold)
        .f64(m.l1_weight)
        .u32(m.iterations)
        .u64(m.seed)
        .f64(m.achieved_ratio)
        .u64(m.created_at);
    w.finish_with_checksum()
}

pub fn decode_record(bytes: &[u8], path: &Path) -> Result<PrunedRecord> {
    let mut r = Reader::with_checksum(bytes, path)?;
    r.expect_magic(RECORD_MAGIC)?;
    r.expect_version(FORMAT_VERSION)?;
    let record_id = r.u64()?;
    let arch_id = r.str()?;
    let task_id = r.str()?;
    let n = r.u32()? as usize;
    let c = r.u32()? as usize;
    if 4 * (n + c) > bytes.len() {
        return Err(r.err("declared lengths exceed file size"));
    }
    let pruning_ratio = r.f64()?;
    let class_labels = (0..c).map(|_| r.u32().map(|v| v as usize)).collect::<Result<_>>()?;
    let scores = (0..n).map(|_| r.f32()).collect::<Result<_>>()?;
    let metadata = RecordMetadata {
        threshold: r.f64()?,
        l1_weight: r.f64()?,
        iterations: r.u32()?,
        seed: r.u64()?,
        achieved_ratio: r.f64()?,
        created_at: r.u64()?,
    };
    r.finish()?;
    Ok(PrunedRecord {
        record_id,
        arch_id,
        task_id,
        class_labels,
        scores,
        pruning_ratio,
        metadata,
    })
}

/// Index layout (little-endian):
///
/// ```text
/// magic "MPIX" | version u32 | next_id u64
/// arch_count u32 | (arch_id str, descriptor str) × arch_count
/// entry_count u32 | (record_id u64, arch_id str, task_size u32,
///                    pruning_ratio f64, file_name str, checksum u64) × entry_count
/// checksum u64
/// ```
pub fn encode_index(index: &PoolIndex) -> Vec<u8> {
    let mut w = Writer::new();
    w.bytes(INDEX_MAGIC).u32(FORMAT_VERSION).u64(index.next_id);
    w.u32(index.architectures.len() as u32);
    for (id, arch) in &index.architectures {
        w.str(id).str(&arch.descriptor());
    }
    w.u32(index.entries.len() as u32);
    for e in index.entries.values() {
        w.u64(e.record_id)
            .str(&e.arch_id)
            .u32(e.task_size as u32)
            .f64(e.pruning_ratio)
            .str(&e.file_name)
            .u64(e.checksum);
    }
    w.finish_with_checksum()
}

pub fn decode_index(bytes: &[u8], path: &Path) -> Result<PoolIndex> {
    let mut r = Reader::with_checksum(bytes, path)?;
    r.expect_magic(INDEX_MAGIC)?;
    r.expect_version(FORMAT_VERSION)?;
    let next_id = r.u64()?;
    let mut architectures = BTreeMap::new();
    for _ in 0..r.u32()? {
        let id = r.str()?;
        let arch = Architecture::parse_descriptor(&r.str()?)?;
        architectures.insert(id, arch);
    }
    let mut entries = BTreeMap::new();
    for _ in 0..r.u32()? {
        let e = IndexEntry {
            record_id: r.u64()?,
            arch_id: r.str()?,
            task_size: r.u32()? as usize,
            pruning_ratio: r.f64()?,
            file_name: r.str()?,
            checksum: r.u64()?,
        };
        if e.file_name.contains(['/', '\\']) || e.file_name.starts_with('.') {
            return Err(r.err(format!("suspicious record file name `{}`", e.file_name)));
        }
        entries.insert(e.record_id, e);
    }
    r.finish()?;
    Ok(PoolIndex {
        next_id,
        architectures,
        entries,
    })
}
