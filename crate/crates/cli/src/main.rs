use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use lrrlab::harness::{
    analyze_runs, load_task, run_matrix, save_task_file, write_report, ExperimentConfig,
};
use lrrlab::neuron::{run_quadrant_experiment, QuadrantConfig, SuccessCriteria, ToyScheme};
use lrrlab::pruning::RewindPolicy;
use lrrlab::{Error, Result};

#[derive(Parser)]
#[command(
    name = "lrrlab",
    version,
    about = "Learning-rate rewinding vs. iterative magnitude pruning"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Single-neuron quadrant experiment: success table of LRR and IMP.
    Neuron(NeuronArgs),
    /// Iterative pruning over a scheme-by-seed matrix.
    Prune(PruneArgs),
    /// Sign statistics of finished runs.
    Analyze(DirArgs),
    /// Generate a synthetic task and store it as a task file.
    GenData(GenDataArgs),
    /// Mean test accuracy with 95% intervals per scheme and level.
    Report(DirArgs),
}

#[derive(Args)]
struct NeuronArgs {
    #[arg(long, default_value_t = 10)]
    d: usize,
    #[arg(long, default_value_t = 3)]
    levels: usize,
    #[arg(long, default_value_t = 0.9)]
    target_sparsity: f64,
    /// Runs per quadrant.
    #[arg(long, default_value_t = 10)]
    seeds: usize,
    #[arg(long, default_value_t = 0)]
    base_seed: u64,
    /// Training samples.
    #[arg(long)]
    n: Option<usize>,
    /// Standard deviation of the label noise.
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    /// Also write per-run results as CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args)]
struct PruneArgs {
    /// Experiment configuration (TOML); defaults apply when absent.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Rewinding scheme, repeatable: lrr, imp, lrr-bn, imp-keep-signs.
    #[arg(long = "scheme", value_parser = parse_scheme)]
    schemes: Vec<RewindPolicy>,
    #[arg(long)]
    seeds: Option<usize>,
    #[arg(long)]
    base_seed: Option<u64>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    levels: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    /// Output root; takes precedence over the configured one.
    #[arg(long, env = "LRRLAB_OUTPUT_ROOT")]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct DirArgs {
    /// Output root of a prune invocation.
    #[arg(long)]
    runs: PathBuf,
    /// Directory for the generated files; defaults to `--runs`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct GenDataArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Data seed, used when the config sets none.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

fn parse_scheme(s: &str) -> std::result::Result<RewindPolicy, String> {
    RewindPolicy::from_label(s).ok_or_else(|| format!("unknown scheme {s:?}"))
}

fn load_config(path: Option<&Path>) -> Result<ExperimentConfig> {
    match path {
        Some(p) => ExperimentConfig::load(p),
        None => Ok(ExperimentConfig::default()),
    }
}

fn neuron(args: NeuronArgs) -> Result<()> {
    let mut cfg = QuadrantConfig {
        d: args.d,
        levels: args.levels,
        target_sparsity: args.target_sparsity,
        seeds: args.seeds,
        base_seed: args.base_seed,
        ..QuadrantConfig::default()
    };
    if let Some(n) = args.n {
        cfg.n = n;
    }
    if let Some(s) = args.sigma {
        cfg.sigma = s;
        cfg.criteria = SuccessCriteria::for_noise(s);
    }
    if let Some(lr) = args.lr {
        cfg.lr = lr;
    }
    if let Some(e) = args.epochs {
        cfg.epochs_per_level = e;
    }
    let report = run_quadrant_experiment(&cfg, &[ToyScheme::Imp, ToyScheme::Lrr])?;
    print!("{}", report.table());
    if let Some(p) = args.csv {
        lrrlab::fsio::write_atomic(&p, report.to_csv().as_bytes())?;
    }
    Ok(())
}

fn prune(args: PruneArgs) -> Result<()> {
    let mut cfg = load_config(args.config.as_deref())?;
    if !args.schemes.is_empty() {
        cfg.run.schemes = args.schemes;
    }
    if let Some(s) = args.seeds {
        cfg.run.seeds = s;
    }
    if let Some(s) = args.base_seed {
        cfg.run.base_seed = s;
    }
    if let Some(w) = args.workers {
        cfg.run.workers = w;
    }
    if let Some(l) = args.levels {
        cfg.pruning.levels = l;
    }
    if let Some(e) = args.epochs {
        cfg.schedule.total_epochs = e;
    }
    cfg.validate()?;
    let root = args.output.unwrap_or_else(|| cfg.output_root());
    let records = run_matrix(&cfg, &root)?;
    println!("scheme,seed,level,sparsity,test_acc");
    for r in &records {
        let m = r.final_metrics();
        println!(
            "{},{},{},{},{}",
            r.scheme.label(),
            r.seed,
            m.level,
            m.sparsity,
            m.test_acc
        );
    }
    Ok(())
}

fn analyze(args: DirArgs) -> Result<()> {
    let out = args.out.unwrap_or_else(|| args.runs.clone());
    println!("scheme,runs,survivors,median_settle,mean_settle,mean_flips");
    for s in analyze_runs(&args.runs, &out)? {
        let na = |v: Option<f64>| v.map_or("nan".to_string(), |v| v.to_string());
        println!(
            "{},{},{},{},{},{}",
            s.scheme,
            s.runs,
            s.settle.total(),
            na(s.settle.median()),
            na(s.settle.mean()),
            na(s.flips.mean())
        );
    }
    Ok(())
}

fn gen_data(args: GenDataArgs) -> Result<()> {
    let cfg = load_config(args.config.as_deref())?;
    let task = load_task(&cfg, args.seed)?;
    save_task_file(&args.out, &task)?;
    println!(
        "wrote {} training and {} test examples to {}",
        task.train.len(),
        task.test.len(),
        args.out.display()
    );
    Ok(())
}

fn report(args: DirArgs) -> Result<()> {
    let out = args.out.unwrap_or_else(|| args.runs.clone());
    let summary = write_report(&args.runs, &out)?;
    print!("{}", lrrlab::harness::summary_csv(&summary));
    Ok(())
}

/// One JSON object on stderr.
fn report_error(e: &Error) {
    let msg = serde_json::json!({ "error": e.kind(), "message": e.to_string() });
    eprintln!("{msg}");
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Neuron(a) => neuron(a),
        Command::Prune(a) => prune(a),
        Command::Analyze(a) => analyze(a),
        Command::GenData(a) => gen_data(a),
        Command::Report(a) => report(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            report_error(&e);
            ExitCode::FAILURE
        }
    }
}
