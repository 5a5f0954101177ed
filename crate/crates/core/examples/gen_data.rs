//! Generates the synthetic base dataset and its shifted variant, writes
//! both in the raw format, and checks that a linear probe can separate the
//! classes.

use maskpool::bench::{generate_synthetic_dataset, linear_probe, load_dataset, write_dataset, SyntheticConfig};

fn main() -> maskpool::Result<()> {
    let dir = std::env::temp_dir().join("maskpool-gen-data");
    std::fs::create_dir_all(&dir)?;
    let cfg = SyntheticConfig::default();
    for shifted in [false, true] {
        let ds = generate_synthetic_dataset(&SyntheticConfig { shifted, ..cfg.clone() }, 0)?;
        let path = dir.join(if shifted { "dataset-shifted.mpds" } else { "dataset.mpds" });
        write_dataset(&path, &ds)?;
        let back = load_dataset(&path)?;
        assert_eq!(back, ds);
        println!(
            "{}: {} samples, {} classes, {}x{}x{}",
            path.display(),
            ds.len(),
            ds.num_classes,
            ds.channels,
            ds.height,
            ds.width
        );
    }
    let ds = generate_synthetic_dataset(&cfg, 0)?;
    println!("linear probe accuracy: {:.3}", linear_probe(&ds, 5, 0.05, 1)?);
    Ok(())
}
