//! Scores every pool record against a new target task with LEEP, groups the
//! records into three similarity bands and reports top-k unit overlap with
//! the best match.

use maskpool::bench::{ExperimentConfig, Workbench};
use maskpool::tasksim::{build_similarity_table, overlap_ratio};

fn main() -> maskpool::Result<()> {
    let mut cfg = ExperimentConfig::default();
    cfg.pool.tasks_per_size = 20;
    cfg.amp.l1_weight = Some(0.15);
    let mut wb = Workbench::new(cfg)?;
    let net = wb.backbone()?.net.clone();
    let pool = wb.pool(3, 0.9)?;
    let target = wb.test_tasks(3)?.remove(0);

    let table = build_similarity_table(&net, &pool.records, &target)?;
    println!("target {} classes {:?}", target.task_id, target.classes);
    for row in &table.rows {
        println!("  record {:>3} {:?}  LEEP {:>8.4}  group {}", row.record_id, row.class_labels, row.leep.value, row.group);
    }
    let best = pool.record(table.rows[0].record_id)?;
    // at r = 0.9 only ~10% of units keep a positive score, so stay below that
    let k = net.num_units() / 20;
    for row in table.rows.iter().skip(1).step_by(5) {
        let other = pool.record(row.record_id)?;
        println!("top-{k} overlap best vs {:>3} (group {}): {:.2}", row.record_id, row.group, overlap_ratio(best, other, k)?);
    }
    Ok(())
}
