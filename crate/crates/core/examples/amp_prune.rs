//! Runs AMP on one 3-class task of a pre-trained backbone: frozen weights,
//! threshold pruning and an L1 penalty on the mask scores.

use maskpool::amp::amp_prune;
use maskpool::bench::{generate_synthetic_dataset, pretrain_backbone, ExperimentConfig, TaskSpec};
use maskpool::task::HeadSource;

fn main() -> maskpool::Result<()> {
    let cfg = ExperimentConfig::default();
    let ds = generate_synthetic_dataset(&cfg.data, cfg.seed)?;
    let backbone = pretrain_backbone(&ds, &cfg.backbone, cfg.seed, "example")?.net;
    let task = TaskSpec::from_classes(&ds, "amp-demo", &[2, 9, 14], 1)?.materialize(&ds, HeadSource::Backbone)?;

    let amp = cfg.amp_config(0.9, 0.15, 1);
    let out = amp_prune(&task.task_network(&backbone)?, &task, &amp)?;
    println!(
        "ratio {:.3} (target 0.9), pruning stopped at {:?}, accuracy {:.3}",
        out.achieved_ratio, out.pruning_stopped_at, out.final_accuracy
    );
    for it in (0..amp.iterations).step_by(50) {
        println!(
            "iter {it:>4}: {:>3} units kept, mean |S| {:.3}",
            out.retained_history[it], out.mean_abs_score_history[it]
        );
    }
    let kept: Vec<usize> = (0..out.record.scores.len()).filter(|&u| out.record.scores[u] > 0.0).collect();
    println!("retained units {kept:?}");
    Ok(())
}
