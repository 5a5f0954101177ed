//! Pre-trains the desk-scale backbone on the synthetic dataset and saves a
//! checkpoint. Pass `cnn` to train the convolutional preset instead.

use maskpool::bench::{generate_synthetic_dataset, pretrain_backbone, ExperimentConfig};
use maskpool::maskednet::{count_flops, load_checkpoint, save_checkpoint, DESK_CNN_ID};

fn main() -> maskpool::Result<()> {
    let mut cfg = ExperimentConfig::default();
    if std::env::args().nth(1).as_deref() == Some("cnn") {
        cfg.backbone.arch = DESK_CNN_ID.into();
        cfg.backbone.epochs = 5;
    }
    let ds = generate_synthetic_dataset(&cfg.data, cfg.seed)?;
    let ckpt = pretrain_backbone(&ds, &cfg.backbone, cfg.seed, &cfg.hash())?;
    println!(
        "{} ({} prunable units, {} forward FLOPs/sample): test accuracy {:.3}",
        ckpt.net.arch_id(),
        ckpt.net.num_units(),
        count_flops(&ckpt.net)?,
        ckpt.test_accuracy
    );
    let path = std::env::temp_dir().join("maskpool-backbone.ckpt");
    save_checkpoint(&path, &ckpt)?;
    assert_eq!(load_checkpoint(&path)?, ckpt);
    println!("saved {}", path.display());
    Ok(())
}
