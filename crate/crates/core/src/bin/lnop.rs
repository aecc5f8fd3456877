//! `lnop` — dataset generation, training, evaluation, super-resolution
//! sweeps, benchmarking, and built-in verification from one binary.
//!
//! Config precedence everywhere: defaults < JSON config file < `--set`
//! overrides < dedicated flags. Unknown verbs, flags, and config keys are
//! rejected before any work starts. Exit codes: 0 success, 1 usage or
//! config error, 2 numerical failure, 3 I/O or format error.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use lnop_core::cli::{layered_config, parse_resolutions, resolve_threads, sha256_file};
use lnop_core::data::container::{dataset_read, dataset_write};
use lnop_core::data::{advection, burgers, darcy, navier_stokes, PdeDataset};
use lnop_core::model::OperatorModel;
use lnop_core::train::{
    bench, evaluate, train, write_resolution_csv, ResolutionError, RunReport, TrainConfig,
};
use lnop_core::verify::{run_suites, Fault};
use lnop_core::{Error, Result};

#[derive(Parser)]
#[command(name = "lnop", version, about = "Neural-operator toolkit", disable_help_subcommand = true)]
struct Cli {
    #[command(subcommand)]
    verb: Verb,
}

#[derive(Subcommand)]
enum Verb {
    /// Generate a PDE dataset and print its content digest
    Gen(GenArgs),
    /// Train a model and write its run report
    Train(TrainArgs),
    /// Evaluate a saved model on a dataset
    Eval(EvalArgs),
    /// Evaluate one model across several resolutions
    Superres(EvalArgs),
    /// Time architectures against each other on one dataset
    Bench(BenchArgs),
    /// Run the built-in oracle suites
    Verify(VerifyArgs),
    /// Validate and summarize an existing run report
    Report(ReportArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Family {
    Burgers,
    Advection,
    Darcy,
    Ns,
    Kolmogorov,
}

#[derive(Args)]
struct ConfigArgs {
    /// JSON config file merged over the defaults
    #[arg(long)]
    config: Option<PathBuf>,
    /// Dot-path override, e.g. `adam.beta1=0.95` (repeatable)
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

impl ConfigArgs {
    /// Overrides in precedence order; dedicated flags come last so they
    /// beat `--set` entries for the same key.
    fn overrides(&self, sugar: Vec<Option<String>>) -> Vec<String> {
        let mut out = self.set.clone();
        out.extend(sugar.into_iter().flatten());
        out
    }
}

fn flag<T: std::fmt::Display>(key: &str, v: &Option<T>) -> Option<String> {
    v.as_ref().map(|v| format!("{key}={v}"))
}

#[derive(Args)]
struct GenArgs {
    /// PDE family to sample
    #[arg(value_enum)]
    family: Family,
    #[command(flatten)]
    config: ConfigArgs,
    /// Output path (defaults to `<dataset-name>.lnop`)
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    threads: Option<usize>,
    /// Grid resolution per axis
    #[arg(long)]
    res: Option<usize>,
    /// Number of samples
    #[arg(long)]
    count: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Viscosity (burgers, ns, kolmogorov)
    #[arg(long)]
    nu: Option<f64>,
    /// Random-field spectral decay exponent
    #[arg(long)]
    alpha: Option<f64>,
    /// Random-field inverse length scale
    #[arg(long)]
    tau: Option<f64>,
    /// Final time (burgers)
    #[arg(long = "t-end")]
    t_end: Option<f64>,
    /// Evaluation time (advection)
    #[arg(long)]
    t: Option<f64>,
    /// Output snapshots (ns)
    #[arg(long = "t-out")]
    t_out: Option<usize>,
    /// Snapshot spacing in time (ns, kolmogorov)
    #[arg(long)]
    dt: Option<f64>,
    /// Forcing wavenumber (kolmogorov)
    #[arg(long = "forcing-n")]
    forcing_n: Option<usize>,
}

#[derive(Args)]
struct TrainArgs {
    /// Dataset container to train on
    #[arg(long)]
    data: Option<PathBuf>,
    #[command(flatten)]
    config: ConfigArgs,
    /// Architecture: learnable | fourier
    #[arg(long)]
    arch: Option<String>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Checkpoint prefix; writes `<prefix>.lnoc` when training ends
    #[arg(long = "out-prefix")]
    out_prefix: Option<String>,
    /// Run-report path
    #[arg(long, default_value = "run_report.json")]
    report: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    /// Saved model checkpoint
    #[arg(long)]
    model: PathBuf,
    /// Dataset container to evaluate on
    #[arg(long)]
    data: PathBuf,
    /// Comma-separated list, e.g. `64,128` or `32x32,64x64`
    /// (defaults to the dataset's native grid)
    #[arg(long)]
    resolutions: Option<String>,
    /// Write the per-resolution table as CSV
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Write the per-resolution table as JSON
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args)]
struct BenchArgs {
    /// Dataset container to time on
    #[arg(long)]
    data: PathBuf,
    #[command(flatten)]
    config: ConfigArgs,
    /// Timed epochs after the warm-up epoch
    #[arg(long, default_value_t = 5)]
    epochs: usize,
    /// Write the timing table as JSON
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    /// Test fixture: corrupt one backward result so the gradient suite
    /// must catch it
    #[arg(long, hide = true)]
    corrupt_gradient: bool,
}

#[derive(Args)]
struct ReportArgs {
    /// Run-report JSON to validate and summarize
    path: PathBuf,
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli.verb) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}

fn run(verb: Verb) -> Result<()> {
    match verb {
        Verb::Gen(args) => run_gen(args),
        Verb::Train(args) => run_train(args),
        Verb::Eval(args) => run_eval(args, false),
        Verb::Superres(args) => run_eval(args, true),
        Verb::Bench(args) => run_bench(args),
        Verb::Verify(args) => run_verify(args),
        Verb::Report(args) => run_report(args),
    }
}

fn run_gen(args: GenArgs) -> Result<()> {
    let threads = resolve_threads(args.threads)?;
    // Every dedicated flag becomes an override; a flag the chosen family
    // does not know is rejected by its strict config, so e.g. a burgers
    // run with an advection-only flag is a usage error, not a no-op.
    let sugar = vec![
        flag("resolution", &args.res),
        flag("count", &args.count),
        flag("seed", &args.seed),
        flag("alpha", &args.alpha),
        flag("tau", &args.tau),
        flag("nu", &args.nu),
        flag("t_end", &args.t_end),
        flag("t", &args.t),
        flag("t_out", &args.t_out),
        flag("dt", &args.dt),
        flag("forcing_n", &args.forcing_n),
    ];
    let file = args.config.config.as_deref();
    let overrides = args.config.overrides(sugar);
    let ds: PdeDataset = match args.family {
        Family::Burgers => burgers::generate(&layered_config(file, &overrides)?, threads)?,
        Family::Advection => advection::generate(&layered_config(file, &overrides)?, threads)?,
        Family::Darcy => darcy::generate(&layered_config(file, &overrides)?, threads)?,
        Family::Ns => navier_stokes::generate_ns(&layered_config(file, &overrides)?, threads)?,
        Family::Kolmogorov => {
            navier_stokes::generate_kolmogorov(&layered_config(file, &overrides)?, threads)?
        }
    };
    let path = args.out.unwrap_or_else(|| PathBuf::from(format!("{}.lnop", ds.name)));
    dataset_write(&path, &ds)?;
    println!(
        "wrote {} ({} samples, grid {})",
        path.display(),
        ds.len(),
        join_extents(ds.extents())
    );
    println!("sha256 {}", sha256_file(&path)?);
    Ok(())
}

fn run_train(args: TrainArgs) -> Result<()> {
    let sugar = vec![
        args.data
            .as_ref()
            .map(|p| format!("dataset={}", p.display())),
        flag("arch", &args.arch),
        flag("epochs", &args.epochs),
        flag("seed", &args.seed),
        flag("checkpoint", &args.out_prefix),
    ];
    let cfg: TrainConfig =
        layered_config(args.config.config.as_deref(), &args.config.overrides(sugar))?;
    if cfg.dataset.is_empty() {
        return Err(Error::Config(
            "no dataset: pass --data or set `dataset` in the config".into(),
        ));
    }
    let (_, report) = train(&cfg)?;
    report.write_json(&args.report)?;
    println!(
        "trained {} blocks={} params={} epochs={}",
        report.param_counts.arch, cfg.blocks, report.param_counts.total, cfg.epochs
    );
    println!(
        "train loss {:.6} -> {:.6}",
        report.train_loss.first().unwrap_or(&f64::NAN),
        report.train_loss.last().unwrap_or(&f64::NAN)
    );
    print_table(&report.test_rel_l2);
    if let Some(prefix) = &cfg.checkpoint {
        println!("model {prefix}.lnoc");
    }
    println!("report {}", args.report.display());
    Ok(())
}

fn run_eval(args: EvalArgs, multi_required: bool) -> Result<()> {
    let threads = resolve_threads(args.threads)?;
    let model = OperatorModel::load(&args.model)?;
    let ds = dataset_read(&args.data)?;
    let resolutions = match &args.resolutions {
        Some(text) => parse_resolutions(text, ds.extents().len())?,
        None if multi_required => {
            return Err(Error::Config(
                "superres needs --resolutions with at least two entries".into(),
            ));
        }
        None => vec![ds.extents().to_vec()],
    };
    if multi_required && resolutions.len() < 2 {
        return Err(Error::Config(
            "superres needs --resolutions with at least two entries".into(),
        ));
    }
    let table = evaluate(&model, &ds, &resolutions, threads)?;
    print_table(&table);
    if let Some(path) = &args.csv {
        write_resolution_csv(path, &table)?;
        println!("csv {}", path.display());
    }
    if let Some(path) = &args.report {
        let text = serde_json::to_string_pretty(&serde_json::json!({
            "model": args.model.display().to_string(),
            "dataset": ds.name,
            "table": table,
        }))
        .map_err(|e| Error::Format(format!("eval report: {e}")))?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))?;
        println!("report {}", path.display());
    }
    Ok(())
}

fn run_bench(args: BenchArgs) -> Result<()> {
    let ds = dataset_read(&args.data)?;
    let base: TrainConfig =
        layered_config(args.config.config.as_deref(), &args.config.overrides(vec![]))?;
    let learnable = TrainConfig {
        arch: lnop_core::blocks::Architecture::Learnable,
        ..base.clone()
    };
    let fourier = TrainConfig {
        arch: lnop_core::blocks::Architecture::Fourier,
        ..base
    };
    let report = bench(&[learnable, fourier], &ds, args.epochs)?;
    println!("dataset {} ({} measured epochs)", report.dataset, report.measured_epochs);
    for row in &report.rows {
        println!(
            "{:<10} transform-params/block {:>10}  median {:.3} s/epoch",
            row.arch.to_string(),
            row.param_counts.per_block.transform,
            row.median_epoch_seconds
        );
    }
    println!(
        "fourier - learnable transform params per block: {}",
        report.fourier_minus_learnable_per_block
    );
    if let Some(path) = &args.report {
        report.write_json(path)?;
        println!("report {}", path.display());
    }
    Ok(())
}

fn run_verify(args: VerifyArgs) -> Result<()> {
    let fault = if args.corrupt_gradient {
        Fault::GradientSign
    } else {
        Fault::None
    };
    let report = run_suites(fault);
    let mut failures = 0;
    for s in &report.suites {
        let verdict = if s.passed { "pass" } else { "FAIL" };
        println!("{:<12} {verdict}  {}", s.name, s.detail);
        if !s.passed {
            failures += 1;
        }
    }
    if failures > 0 {
        return Err(Error::Numerical(format!("{failures} suite(s) failed")));
    }
    println!("all suites passed");
    Ok(())
}

fn run_report(args: ReportArgs) -> Result<()> {
    let text = std::fs::read_to_string(&args.path).map_err(|e| Error::io(&args.path, e))?;
    let report: RunReport = serde_json::from_str(&text)
        .map_err(|e| Error::Format(format!("{}: {e}", args.path.display())))?;
    report.validate()?;
    println!(
        "{} v{} on {}",
        report.param_counts.arch, report.version, report.machine
    );
    println!(
        "epochs {}  final train loss {:.6}  total params {}",
        report.epochs,
        report.train_loss.last().unwrap_or(&f64::NAN),
        report.param_counts.total
    );
    print_table(&report.test_rel_l2);
    let total: f64 = report.per_epoch_seconds.iter().sum();
    println!("wall time {total:.1} s over {} epochs", report.epochs);
    Ok(())
}

fn print_table(table: &[ResolutionError]) {
    for row in table {
        println!(
            "resolution {:<12} rel L2 {:.4}%",
            join_extents(&row.resolution),
            row.rel_l2
        );
    }
}

fn join_extents(extents: &[usize]) -> String {
    extents
        .iter()
        .map(|d| d.to_string())
        .collect::<Vec<_>>()
        .join("x")
}
