//! Compares SMSP with a random mask at the same ratio and the same
//! fine-tuning budget.

use maskpool::bench::{run_random_mask_baseline, ExperimentConfig, Workbench};
use maskpool::smsp::smsp_pipeline;

fn main() -> maskpool::Result<()> {
    let mut cfg = ExperimentConfig::default();
    cfg.amp.l1_weight = Some(0.15);
    let mut wb = Workbench::new(cfg.clone())?;
    let net = wb.backbone()?.net.clone();
    let pool = wb.pool(3, 0.9)?;
    let tasks = wb.test_tasks(3)?;
    let (mut smsp, mut random) = (0.0, 0.0);
    for (i, task) in tasks.iter().take(5).enumerate() {
        let sc = cfg.smsp_config(0.9, i as u64);
        let a = smsp_pipeline(&net, &pool.records, task, &sc)?.accuracy;
        let b = run_random_mask_baseline(&net, task, 0.9, &sc.fine_tune())?.accuracy;
        println!("{}: smsp {a:.3}  random {b:.3}", task.task_id);
        smsp += a / 5.0;
        random += b / 5.0;
    }
    println!("mean: smsp {smsp:.3}  random {random:.3}");
    Ok(())
}
