//! Command-line front end: data generation, backbone training, pool
//! construction, single-task runs and scenario reports.
//!
//! Results go to stdout as one JSON object per line. Failures print
//! `{"error":{"kind":..,"message":..}}` on stderr and exit non-zero.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::{json, Value};

use maskpool::amp::amp_prune;
use maskpool::bench::{
    run_random_mask_baseline, write_dataset, ExperimentConfig, SyntheticConfig, TaskSpec, Workbench, SCENARIOS,
};
use maskpool::maskednet::{load_checkpoint, save_checkpoint};
use maskpool::poolstore::{Pool, RecordFilter};
use maskpool::rng::derive_seed;
use maskpool::smsp::smsp_pipeline;
use maskpool::task::{HeadSource, TaskData};
use maskpool::tasksim::overlap_ratio;
use maskpool::{Error, Result};

#[derive(Parser)]
#[command(name = "maskpool", version, about = "Mask-pool structured pruning workbench")]
struct Cli {
    /// TOML experiment config; defaults apply to anything it omits.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Pool directory.
    #[arg(long, global = true)]
    pool: Option<PathBuf>,
    /// Output directory for datasets, checkpoints and reports.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Use this backbone checkpoint instead of pre-training one.
    #[arg(long, global = true)]
    backbone: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the synthetic dataset and write it in the raw format.
    GenData {
        /// Generate the shifted variant.
        #[arg(long)]
        shifted: bool,
    },
    /// Pre-train the backbone and save `backbone.ckpt`.
    Pretrain,
    /// Build (or reuse) the configured pool in `--pool` and report on it.
    BuildPool,
    /// Prune one task with AMP.
    Amp {
        #[command(flatten)]
        task: TaskArgs,
        /// L1 weight on the mask scores; grid-searched when omitted.
        #[arg(long)]
        l1: Option<f64>,
        /// AMP iterations (config default when omitted).
        #[arg(long)]
        iterations: Option<usize>,
        /// Train weights together with mask scores.
        #[arg(long)]
        free: bool,
        /// Store the result in `--pool`.
        #[arg(long)]
        save: bool,
    },
    /// Prune one task from its most similar pool records and fine-tune.
    Smsp {
        #[command(flatten)]
        task: TaskArgs,
        /// Number of pool records whose scores are summed.
        #[arg(long)]
        neighbors: Option<usize>,
        /// Fine-tuning iterations.
        #[arg(long)]
        iterations: Option<usize>,
    },
    /// Random mask at the same ratio, same fine-tuning.
    BaselineRandom {
        #[command(flatten)]
        task: TaskArgs,
        /// Fine-tuning iterations.
        #[arg(long)]
        iterations: Option<usize>,
    },
    /// Top-k overlap between two pool records.
    Overlap {
        /// First record id.
        #[arg(long)]
        a: u64,
        /// Second record id.
        #[arg(long)]
        b: u64,
        /// `k` as a fraction of the unit count.
        #[arg(long, default_value_t = 0.1)]
        k_fraction: f64,
    },
    /// Collect the markdown reports in `--out` into `REPORT.md`.
    Report,
    /// Run a scenario (or `all`) and write its reports to `--out`.
    Run { scenario: String },
}

#[derive(clap::Args)]
struct TaskArgs {
    /// Comma-separated dataset class ids.
    #[arg(long, value_delimiter = ',', required = true)]
    classes: Vec<usize>,
    /// Pruning ratio (fraction of units removed).
    #[arg(long)]
    ratio: Option<f64>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or("").trim_start_matches("error: ");
            eprintln!("{}", json!({"error": {"kind": "usage", "message": first}}));
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", json!({"error": {"kind": e.kind(), "message": e.to_string()}}));
            ExitCode::FAILURE
        }
    }
}

fn emit(v: Value) {
    println!("{v}");
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn workbench(cli: &Cli, cfg: ExperimentConfig) -> Result<Workbench> {
    let mut wb = Workbench::new(cfg)?;
    if let Some(p) = &cli.backbone {
        wb = wb.with_backbone(load_checkpoint(p)?);
    }
    if let Some(dir) = &cli.pool {
        wb = wb.with_pool_dir(dir);
    }
    Ok(wb)
}

fn require_pool(cli: &Cli) -> Result<&Path> {
    cli.pool
        .as_deref()
        .ok_or_else(|| Error::InvalidConfig("this command needs --pool".into()))
}

fn task(wb: &mut Workbench, args: &TaskArgs, seed: u64) -> Result<TaskData> {
    let ds = wb.dataset()?;
    let id = format!(
        "cli-{}",
        args.classes.iter().map(ToString::to_string).collect::<Vec<_>>().join("-")
    );
    TaskSpec::from_classes(&ds, &id, &args.classes, seed)?.materialize(&ds, HeadSource::Backbone)
}

fn run(cli: Cli) -> Result<()> {
    let cfg = load_config(&cli)?;
    let seed = cfg.seed;
    std::fs::create_dir_all(&cli.out)?;
    match &cli.command {
        Command::GenData { shifted } => {
            let data = SyntheticConfig {
                shifted: *shifted,
                ..cfg.data.clone()
            };
            let ds = maskpool::bench::generate_synthetic_dataset(&data, seed)?;
            let name = if *shifted { "dataset-shifted.mpds" } else { "dataset.mpds" };
            let path = cli.out.join(name);
            write_dataset(&path, &ds)?;
            emit(json!({"dataset": path, "samples": ds.len(), "classes": ds.num_classes}));
        }
        Command::Pretrain => {
            let mut wb = workbench(&cli, cfg)?;
            let ckpt = wb.backbone()?;
            let path = cli.out.join("backbone.ckpt");
            save_checkpoint(&path, &ckpt)?;
            emit(json!({
                "checkpoint": path,
                "arch": ckpt.net.arch_id(),
                "test_accuracy": ckpt.test_accuracy,
                "config_hash": ckpt.config_hash,
            }));
        }
        Command::BuildPool => {
            require_pool(&cli)?;
            let mut wb = workbench(&cli, cfg)?;
            let report = wb.run("pool-build")?;
            let files = report.write(&cli.out)?;
            emit(json!({"scenario": "pool-build", "files": files}));
        }
        Command::Amp {
            task: args,
            l1,
            iterations,
            free,
            save,
        } => {
            let mut wb = workbench(&cli, cfg.clone())?;
            let task = task(&mut wb, args, seed)?;
            let ratio = args.ratio.unwrap_or(cfg.pool.ratio);
            let l1 = match l1 {
                Some(l) => *l,
                None => wb.l1_weight()?,
            };
            let mut amp = cfg.amp_config(ratio, l1, derive_seed(seed, "cli-amp", 0));
            amp.frozen_weights = !free;
            if let Some(j) = iterations {
                amp.iterations = *j;
            }
            let net = wb.backbone()?.net.clone();
            let mut result = amp_prune(&task.task_network(&net)?, &task, &amp)?;
            let mut record_id = Value::Null;
            if *save {
                if *free {
                    return Err(Error::InvalidConfig("only frozen-weight runs can be saved to a pool".into()));
                }
                let mut pool = Pool::create(require_pool(&cli)?)?;
                pool.register_architecture(net.arch_id(), net.arch())?;
                record_id = json!(pool.save_record(&mut result.record)?);
            }
            emit(json!({
                "task_id": task.task_id,
                "accuracy": result.final_accuracy,
                "achieved_ratio": result.achieved_ratio,
                "iterations": result.iterations_used,
                "pruning_stopped_at": result.pruning_stopped_at,
                "training_flops": result.flops_ledger.cumulative_training_flops,
                "converged": result.status.converged,
                "floor_bound": result.status.floor_bound,
                "l1_weight": l1,
                "record_id": record_id,
            }));
        }
        Command::Smsp {
            task: args,
            neighbors,
            iterations,
        } => {
            let pool = Pool::open(require_pool(&cli)?)?;
            let mut wb = workbench(&cli, cfg.clone())?;
            let task = task(&mut wb, args, seed)?;
            let net = wb.backbone()?.net.clone();
            let records = pool.load_matching(&RecordFilter {
                arch_id: Some(net.arch_id().to_string()),
                ..Default::default()
            })?;
            let mut sc = cfg.smsp_config(args.ratio.unwrap_or(cfg.eval.ratio), derive_seed(seed, "cli-smsp", 0));
            if let Some(m) = neighbors {
                sc.neighbor_count = *m;
            }
            if let Some(j) = iterations {
                sc.fine_tune_iterations = *j;
            }
            let out = smsp_pipeline(&net, &records, &task, &sc)?;
            emit(json!({
                "task_id": out.task_id,
                "accuracy": out.accuracy,
                "achieved_ratio": out.achieved_ratio,
                "fine_tune_iterations": out.fine_tune_iterations,
                "training_flops": out.flops_ledger.cumulative_training_flops,
                "neighbors": out.mask.neighbor_ids,
            }));
        }
        Command::BaselineRandom { task: args, iterations } => {
            let mut wb = workbench(&cli, cfg.clone())?;
            let task = task(&mut wb, args, seed)?;
            let net = wb.backbone()?.net.clone();
            let mut ft = cfg
                .smsp_config(args.ratio.unwrap_or(cfg.eval.ratio), derive_seed(seed, "cli-random", 0))
                .fine_tune();
            if let Some(j) = iterations {
                ft.iterations = *j;
            }
            let ratio = args.ratio.unwrap_or(cfg.eval.ratio);
            let out = run_random_mask_baseline(&net, &task, ratio, &ft)?;
            emit(json!({
                "task_id": out.task_id,
                "accuracy": out.accuracy,
                "achieved_ratio": out.achieved_ratio,
                "fine_tune_iterations": out.fine_tune_iterations,
                "training_flops": out.flops_ledger.cumulative_training_flops,
            }));
        }
        Command::Overlap { a, b, k_fraction } => {
            let pool = Pool::open(require_pool(&cli)?)?;
            let (ra, rb) = (pool.load_record(*a)?, pool.load_record(*b)?);
            let k = ((ra.num_units() as f64) * k_fraction).round().max(1.0) as usize;
            emit(json!({"a": a, "b": b, "k": k, "overlap": overlap_ratio(&ra, &rb, k)?}));
        }
        Command::Report => {
            let mut body = String::new();
            for s in SCENARIOS {
                let p = cli.out.join(format!("{s}.md"));
                if p.exists() {
                    body.push_str(&std::fs::read_to_string(&p)?);
                    body.push('\n');
                }
            }
            if body.is_empty() {
                return Err(Error::InvalidConfig(format!(
                    "no scenario reports in {}",
                    cli.out.display()
                )));
            }
            let path = cli.out.join("REPORT.md");
            std::fs::write(&path, body)?;
            emit(json!({"report": path}));
        }
        Command::Run { scenario } => {
            let names: Vec<&str> = if scenario == "all" {
                SCENARIOS.to_vec()
            } else {
                vec![scenario.as_str()]
            };
            let mut wb = workbench(&cli, cfg)?;
            for name in names {
                let report = wb.run(name)?;
                let files = report.write(&cli.out)?;
                let failed: Vec<&str> = report.checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
                emit(json!({"scenario": name, "config_hash": report.config_hash, "files": files, "failed_checks": failed}));
            }
        }
    }
    Ok(())
}
