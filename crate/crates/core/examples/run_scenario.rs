//! Runs one named scenario (default `neighbor-ablation`) with an optional
//! TOML config and prints its markdown report.
//!
//! ```text
//! cargo run --release --example run_scenario -- main-comparison my.toml
//! ```

use maskpool::bench::{ExperimentConfig, Workbench};

fn main() -> maskpool::Result<()> {
    let mut args = std::env::args().skip(1);
    let scenario = args.next().unwrap_or_else(|| "neighbor-ablation".into());
    let cfg = match args.next() {
        Some(path) => ExperimentConfig::load(path.as_ref())?,
        None => ExperimentConfig::default(),
    };
    let report = Workbench::new(cfg)?.run(&scenario)?;
    print!("{}", report.markdown());
    let dir = std::env::temp_dir().join("maskpool-reports");
    for file in report.write(&dir)? {
        println!("wrote {}", file.display());
    }
    Ok(())
}
