use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ohash_core::eval::synthetic::{gaussian_blobs, BlobSpec};
use ohash_core::eval::{BoundMonitor, LabelPolicy, DEFAULT_PERCENTILE};
use ohash_core::format::{read_codes, read_dataset, read_model, write_codes, write_dataset, write_model};
use ohash_core::trainer::{DEFAULT_BETA, DEFAULT_BITS, DEFAULT_C, DEFAULT_WARMUP};
use ohash_core::workflow::{self, StepMetrics, TrainOptions};
use ohash_core::{Error, RngSeed, TrainerConfig};

#[derive(Parser)]
#[command(name = "ohash", version, about = "Online hashing: train, encode, query and evaluate binary codes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model on a dataset file from a stream of labeled pairs
    Train(TrainArgs),
    /// Encode every row of a dataset into a codes file
    Encode {
        model: PathBuf,
        dataset: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Print the top-k database items per query as TSV: query, rank, index, distance
    Query {
        model: PathBuf,
        codes: PathBuf,
        queries: PathBuf,
        #[arg(short, default_value_t = 10)]
        k: usize,
    },
    /// Mean average precision of queries against a database
    Eval {
        model: PathBuf,
        dataset: PathBuf,
        queries: PathBuf,
        #[command(flatten)]
        policy: PolicyArgs,
        /// Write per-query AP as CSV
        #[arg(long)]
        ap_out: Option<PathBuf>,
    },
    /// Print the labeled pair stream used for training as CSV: i, j, s
    Pairgen {
        dataset: PathBuf,
        #[command(flatten)]
        pairs: PairArgs,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Write a labeled Gaussian-blob dataset
    Synth {
        #[arg(long, default_value_t = 10)]
        classes: usize,
        #[arg(long, default_value_t = 2000)]
        points: usize,
        #[arg(long, default_value_t = 32)]
        dim: usize,
        #[arg(long, default_value_t = 1.0)]
        spread: f64,
        #[arg(long, default_value_t = 0.5)]
        noise: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(short, long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum PolicyKind {
    Class,
    Metric,
}

#[derive(Args)]
struct PolicyArgs {
    #[arg(long, value_enum, default_value_t = PolicyKind::Class)]
    policy: PolicyKind,
    /// Neighbor fraction for the metric policy
    #[arg(long, default_value_t = DEFAULT_PERCENTILE)]
    percentile: f64,
}

impl PolicyArgs {
    fn policy(&self) -> LabelPolicy {
        match self.policy {
            PolicyKind::Class => LabelPolicy::Class,
            PolicyKind::Metric => LabelPolicy::Metric { percentile: self.percentile },
        }
    }
}

#[derive(Args)]
struct PairArgs {
    #[arg(long, default_value_t = 10_000)]
    pairs: usize,
    /// Fraction of similar pairs, enforced exactly
    #[arg(long)]
    balance: Option<f64>,
    #[command(flatten)]
    policy: PolicyArgs,
}

#[derive(Args)]
struct TrainArgs {
    dataset: PathBuf,
    #[arg(short, long)]
    out: PathBuf,
    #[arg(long, default_value_t = DEFAULT_BITS)]
    bits: usize,
    #[arg(long, default_value_t = 0)]
    alpha: u32,
    #[arg(long, default_value_t = DEFAULT_BETA)]
    beta: f64,
    #[arg(long = "C", default_value_t = DEFAULT_C)]
    c: f64,
    #[arg(long, default_value_t = 1)]
    models: usize,
    #[arg(long, default_value_t = DEFAULT_WARMUP)]
    warmup: usize,
    /// Map inputs through an RBF kernel on the warmup points
    #[arg(long)]
    kernel: bool,
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    pairs: PairArgs,
    /// Per-step CSV: step,R,ell,tau,cumR,updated
    #[arg(long)]
    metrics_out: Option<PathBuf>,
    /// Per-step CSV: step,cumulative_R,F2,slack,mAP
    #[arg(long)]
    monitor_out: Option<PathBuf>,
}

enum Failure {
    Data(Error),
    Invariant(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::ContractViolation(_) => Failure::Invariant(e),
            _ => Failure::Data(e),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Data(e.into())
    }
}

fn train(args: TrainArgs) -> Result<(), Failure> {
    let config = TrainerConfig {
        alpha: args.alpha,
        beta: args.beta,
        c: args.c,
        bits: args.bits,
        seed: RngSeed(args.seed),
        warmup: args.warmup,
        kernel: args.kernel,
        sigma: args.sigma,
    };
    config.validate().map_err(Failure::Invariant)?;
    if args.models == 0 || args.models > u16::MAX as usize {
        return Err(Failure::Invariant(Error::InvalidArgument(format!("--models must lie in 1..=65535, got {}", args.models))));
    }
    if let Some(b) = args.pairs.balance {
        if !(0.0..=1.0).contains(&b) {
            return Err(Failure::Invariant(Error::InvalidArgument(format!("--balance must lie in [0, 1], got {b}"))));
        }
    }
    let data = read_dataset(&args.dataset)?;
    let opts = TrainOptions {
        config,
        models: args.models,
        pairs: args.pairs.pairs,
        balance: args.pairs.balance,
        policy: args.pairs.policy.policy(),
    };
    let mut metrics = args.metrics_out.as_ref().map(File::create).transpose()?.map(BufWriter::new);
    let mut monitor = args.monitor_out.as_ref().map(File::create).transpose()?.map(BufWriter::new);
    if let Some(w) = metrics.as_mut() {
        writeln!(w, "{}", StepMetrics::CSV_HEADER)?;
    }
    if let Some(w) = monitor.as_mut() {
        writeln!(w, "{}", BoundMonitor::csv_header())?;
    }
    let (snapshot, mon) = workflow::train_with(&data, &opts, |row, mon| {
        if let Some(w) = metrics.as_mut() {
            writeln!(w, "{}", row.csv_row())?;
        }
        if let Some(w) = monitor.as_mut() {
            writeln!(w, "{}", mon.csv_row(None))?;
        }
        Ok(())
    })?;
    for w in metrics.iter_mut().chain(monitor.iter_mut()) {
        w.flush()?;
    }
    write_model(&args.out, &snapshot)?;
    log::info!(
        "trained {} model(s), r = {}, cumulative R = {}, C floor = {:.4}",
        snapshot.model_count(),
        snapshot.bits(),
        mon.total_r_star(),
        mon.c_floor()
    );
    Ok(())
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Train(args) => train(args)?,
        Command::Encode { model, dataset, out } => {
            let snapshot = read_model(model)?;
            let data = read_dataset(dataset)?;
            write_codes(out, &workflow::encode_dataset(&snapshot, &data)?)?;
        }
        Command::Query { model, codes, queries, k } => {
            let snapshot = read_model(model)?;
            let table = read_codes(codes)?;
            let queries = read_dataset(queries)?;
            let results = workflow::query(&snapshot, &table, &queries, k)?;
            std::io::stdout().write_all(workflow::query_tsv(&results).as_bytes())?;
        }
        Command::Eval { model, dataset, queries, policy, ap_out } => {
            let snapshot = read_model(model)?;
            let database = read_dataset(dataset)?;
            let queries = read_dataset(queries)?;
            let report = workflow::evaluate(&snapshot, &database, &queries, policy.policy())?;
            println!("mAP\t{}\t{} queries", report.map, report.evaluated);
            if let Some(path) = ap_out {
                std::fs::write(path, workflow::ap_csv(&report))?;
            }
        }
        Command::Pairgen { dataset, pairs, seed } => {
            let data = read_dataset(dataset)?;
            let stream = workflow::pairgen(&data, pairs.pairs, RngSeed(seed), pairs.balance, pairs.policy.policy())?;
            let mut out = BufWriter::new(std::io::stdout().lock());
            writeln!(out, "i,j,s")?;
            for p in stream {
                writeln!(out, "{},{},{}", p.i, p.j, p.label.sign())?;
            }
            out.flush()?;
        }
        Command::Synth { classes, points, dim, spread, noise, seed, out } => {
            let spec = BlobSpec { classes, points, dim, spread, noise };
            write_dataset(out, &gaussian_blobs(&spec, RngSeed(seed)).map_err(Failure::Invariant)?)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Data(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(Failure::Invariant(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(3)
        }
    }
}
