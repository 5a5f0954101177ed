mod common;

use std::fs;

use common::*;
use maskpool::poolstore::{decode_record, encode_record, load_record, query, Pool, RecordFilter, INDEX_FILE};
use maskpool::Error;
use proptest::prelude::*;

fn pool_with(records: &mut [maskpool::poolstore::PrunedRecord]) -> (tempfile::TempDir, Pool) {
    let dir = tempfile::tempdir().unwrap();
    let mut pool = Pool::create(dir.path()).unwrap();
    pool.register_architecture("mlp", &arch(TINY_MLP)).unwrap();
    for r in records.iter_mut() {
        pool.save_record(r).unwrap();
    }
    (dir, pool)
}

fn record_file(pool: &Pool, id: u64) -> std::path::PathBuf {
    pool.dir().join(&pool.index().entries[&id].file_name)
}

#[test]
fn round_trip_survives_reopen() {
    let n = arch(TINY_MLP).num_units();
    let mut recs = vec![random_record("mlp", n, 1), random_record("mlp", n, 2)];
    let (dir, _) = pool_with(&mut recs);
    assert_eq!(recs[0].record_id, 1);
    assert_eq!(recs[1].record_id, 2);
    let reopened = Pool::open(dir.path()).unwrap();
    assert_eq!(reopened.len(), 2);
    for r in &recs {
        assert_eq!(&reopened.load_record(r.record_id).unwrap(), r);
        assert_eq!(&load_record(dir.path(), r.record_id).unwrap(), r);
    }
}

#[test]
fn flipped_byte_is_detected() {
    let n = arch(TINY_MLP).num_units();
    let mut recs = vec![random_record("mlp", n, 3)];
    let (_dir, pool) = pool_with(&mut recs);
    let path = record_file(&pool, 1);
    let mut bytes = fs::read(&path).unwrap();
    let mid = bytes.len() / 2;
    bytes[mid] ^= 0x40;
    fs::write(&path, &bytes).unwrap();
    assert!(matches!(pool.load_record(1), Err(Error::ChecksumMismatch(_))));
}

#[test]
fn truncated_record_is_rejected() {
    let n = arch(TINY_MLP).num_units();
    let mut recs = vec![random_record("mlp", n, 4)];
    let (_dir, pool) = pool_with(&mut recs);
    let path = record_file(&pool, 1);
    let bytes = fs::read(&path).unwrap();
    fs::write(&path, &bytes[..bytes.len() - 13]).unwrap();
    assert!(pool.load_record(1).is_err());
    fs::write(&path, &bytes[..3]).unwrap();
    assert!(pool.load_record(1).is_err());
}

#[test]
fn bad_magic_is_a_format_error() {
    let rec = random_record("mlp", 10, 5);
    let mut bytes = encode_record(&rec);
    bytes[0] = b'X';
    let err = decode_record(&bytes, std::path::Path::new("x.bin")).unwrap_err();
    assert!(matches!(err, Error::Format { .. } | Error::ChecksumMismatch(_)), "{err:?}");
}

#[test]
fn corrupt_index_is_rejected() {
    let n = arch(TINY_MLP).num_units();
    let mut recs = vec![random_record("mlp", n, 6)];
    let (dir, _) = pool_with(&mut recs);
    let path = dir.path().join(INDEX_FILE);
    let mut bytes = fs::read(&path).unwrap();
    bytes[6] ^= 1;
    fs::write(&path, &bytes).unwrap();
    assert!(Pool::open(dir.path()).is_err());
}

#[test]
fn missing_pool_and_record() {
    let dir = tempfile::tempdir().unwrap();
    let absent = dir.path().join("nothing");
    assert!(matches!(Pool::open(&absent), Err(Error::MissingPool(_))));
    assert!(matches!(query(&absent, &RecordFilter::default()), Err(Error::MissingPool(_))));
    let pool = Pool::create(dir.path()).unwrap();
    assert!(matches!(pool.load_record(9), Err(Error::MissingRecord(9))));
}

#[test]
fn save_validates_against_registered_architecture() {
    let n = arch(TINY_MLP).num_units();
    let (_dir, mut pool) = pool_with(&mut []);
    let mut unknown = random_record("cnn", n, 1);
    assert!(matches!(pool.save_record(&mut unknown), Err(Error::ArchMismatch(_))));
    let mut wrong_len = random_record("mlp", n + 1, 1);
    assert!(pool.save_record(&mut wrong_len).is_err());
    assert!(pool.is_empty());
}

#[test]
fn query_filters_are_conjunctive() {
    let n = arch(TINY_MLP).num_units();
    let mut recs: Vec<_> = (0..6)
        .map(|i| {
            let mut r = random_record("mlp", n, 10 + i);
            r.class_labels = (0..(2 + i as usize % 2)).collect();
            r.pruning_ratio = if i < 3 { 0.5 } else { 0.9 };
            r
        })
        .collect();
    let (dir, pool) = pool_with(&mut recs);
    assert_eq!(pool.query(&RecordFilter::default()), vec![1, 2, 3, 4, 5, 6]);
    let f = RecordFilter {
        task_size: Some(2),
        pruning_ratio: Some(0.9),
        ..Default::default()
    };
    // i = 4 is the only record with 2 classes at ratio 0.9
    assert_eq!(pool.query(&f), vec![5]);
    assert_eq!(query(dir.path(), &f).unwrap(), vec![5]);
    let other = RecordFilter {
        arch_id: Some("cnn".into()),
        ..Default::default()
    };
    assert!(pool.query(&other).is_empty());
    assert_eq!(pool.load_matching(&f).unwrap()[0], recs[4]);
}

proptest! {
    #[test]
    fn encode_decode_is_identity(seed in 0u64..10_000, n in 1usize..200, c in 1usize..8) {
        let mut rec = random_record("arch-x", n, seed);
        rec.class_labels = (0..c).map(|i| i * 3).collect();
        rec.record_id = seed;
        let back = decode_record(&encode_record(&rec), std::path::Path::new("p")).unwrap();
        prop_assert_eq!(back, rec);
    }
}
