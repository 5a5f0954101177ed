//! Stores a few pruned records in an on-disk pool, reopens it, filters by
//! task size and shows that a flipped byte is caught by the checksum.

use maskpool::bench::{ExperimentConfig, Workbench};
use maskpool::poolstore::{Pool, RecordFilter};

fn main() -> maskpool::Result<()> {
    let mut cfg = ExperimentConfig::default();
    cfg.pool.tasks_per_size = 6;
    cfg.amp.l1_weight = Some(0.15);
    let dir = std::env::temp_dir().join("maskpool-pool-example");
    let _ = std::fs::remove_dir_all(&dir);

    let mut wb = Workbench::new(cfg)?;
    let net = wb.backbone()?.net.clone();
    let mut pool = Pool::create(&dir)?;
    pool.register_architecture(net.arch_id(), net.arch())?;
    for size in [3, 5] {
        for record in &wb.pool(size, 0.9)?.records {
            let mut r = record.clone();
            pool.save_record(&mut r)?;
        }
    }

    let pool = Pool::open(&dir)?;
    let three = pool.query(&RecordFilter {
        task_size: Some(3),
        ..Default::default()
    });
    println!("{} records, {} with 3 classes: {three:?}", pool.len(), three.len());
    let first = pool.load_record(three[0])?;
    println!("record {}: classes {:?}, {} of {} units kept", first.record_id, first.class_labels, first.retained_count(), first.num_units());

    let path = dir.join(&pool.index().entries[&three[0]].file_name);
    let mut bytes = std::fs::read(&path)?;
    bytes[40] ^= 0xff;
    std::fs::write(&path, bytes)?;
    println!("after corruption: {}", pool.load_record(three[0]).unwrap_err());
    Ok(())
}
