//! Prunes a new task in one shot from the summed masks of its most similar
//! pool records, then fine-tunes briefly.

use maskpool::bench::{ExperimentConfig, Workbench};
use maskpool::smsp::smsp_pipeline;

fn main() -> maskpool::Result<()> {
    let mut cfg = ExperimentConfig::default();
    cfg.amp.l1_weight = Some(0.15);
    let mut wb = Workbench::new(cfg.clone())?;
    let net = wb.backbone()?.net.clone();
    let pool = wb.pool(3, 0.9)?;
    for (i, task) in wb.test_tasks(3)?.iter().take(5).enumerate() {
        let out = smsp_pipeline(&net, &pool.records, task, &cfg.smsp_config(0.9, i as u64))?;
        println!(
            "{} {:?}: accuracy {:.3} at ratio {:.3} after {} iterations, neighbours {:?}",
            out.task_id, task.classes, out.accuracy, out.achieved_ratio, out.fine_tune_iterations, out.mask.neighbor_ids
        );
    }
    Ok(())
}
