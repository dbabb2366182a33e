use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use rmvc::config::ExperimentSpec;
use rmvc::data::{parse_labels, save_dataset, synth_blobs, SynthSpec};
use rmvc::eval::{evaluate, Metrics};
use rmvc::experiment::{ablate, run, sweep, BatchOutcome, Failure};
use rmvc::Error;

#[derive(Parser)]
#[command(name = "rmvc", version, about = "Noise-robust deep multi-view clustering")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train and evaluate one configuration over several seeds.
    Run(ExperimentArgs),
    /// Repeat `run` for each noise ratio.
    Sweep(ExperimentArgs),
    /// Compare full training with the three ablated variants.
    Ablate(ExperimentArgs),
    /// Write a synthetic Gaussian-blob dataset directory.
    GenSynth(SynthArgs),
    /// Score a saved assignment file against labels.
    Eval(EvalArgs),
}

#[derive(Args)]
struct ExperimentArgs {
    /// Flat `key = value` config file; flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Dataset directory (view_1.csv, view_2.csv, ..., labels.csv).
    #[arg(long)]
    dataset: Option<String>,
    #[arg(long)]
    noise_ratio: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    repeats: Option<String>,
    /// full, no_dr, no_con or no_dr_con.
    #[arg(long)]
    ablation: Option<String>,
    #[arg(long)]
    out: Option<String>,
    #[arg(long)]
    tau: Option<String>,
    #[arg(long)]
    alpha: Option<String>,
    #[arg(long)]
    beta: Option<String>,
    #[arg(long)]
    lr: Option<String>,
    /// Training epochs after pretraining.
    #[arg(long)]
    epochs: Option<String>,
    #[arg(long)]
    pretrain_epochs: Option<String>,
    #[arg(long)]
    batch_size: Option<String>,
    /// Comma-separated noise ratios for `sweep`.
    #[arg(long)]
    ratios: Option<String>,
    /// Any other config key, as `key=value`; may be repeated.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 300)]
    samples: usize,
    #[arg(long, default_value_t = 3)]
    clusters: usize,
    #[arg(long, default_value_t = 3)]
    views: usize,
    #[arg(long, default_value_t = 64)]
    dim: usize,
    #[arg(long, default_value_t = 8.0)]
    separation: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct EvalArgs {
    /// One predicted cluster id per line.
    #[arg(long)]
    assignments: PathBuf,
    /// One true label per line.
    #[arg(long)]
    labels: PathBuf,
}

fn build_spec(args: &ExperimentArgs) -> Result<ExperimentSpec, Error> {
    let mut spec = ExperimentSpec::default();
    if let Some(path) = &args.config {
        spec.apply_file(path)?;
    }
    let flags = [
        ("dataset", &args.dataset),
        ("noise_ratio", &args.noise_ratio),
        ("seed", &args.seed),
        ("repeats", &args.repeats),
        ("ablation", &args.ablation),
        ("out", &args.out),
        ("tau", &args.tau),
        ("alpha", &args.alpha),
        ("beta", &args.beta),
        ("lr", &args.lr),
        ("epochs", &args.epochs),
        ("pretrain_epochs", &args.pretrain_epochs),
        ("batch_size", &args.batch_size),
        ("ratios", &args.ratios),
    ];
    for (key, value) in flags {
        if let Some(v) = value {
            spec.set(key, v)?;
        }
    }
    for kv in &args.set {
        let (k, v) = kv.split_once('=').ok_or_else(|| Error::InvalidValue {
            key: kv.clone(),
            msg: "expected KEY=VALUE".into(),
        })?;
        spec.set(k.trim(), v)?;
    }
    spec.validate()?;
    Ok(spec)
}

fn print_metrics(label: &str, m: &Metrics) {
    println!("{label}: ACC {:.4}  NMI {:.4}  PUR {:.4}", m.acc, m.nmi, m.pur);
}

fn report<'a>(batches: impl Iterator<Item = (String, &'a BatchOutcome)>) -> ExitCode {
    let mut failures: Vec<&Failure> = Vec::new();
    for (label, b) in batches {
        if let Some(s) = &b.summary {
            println!(
                "{label}: {} run(s)  ACC {}  NMI {}  PUR {}",
                s.runs,
                s.acc.percent(),
                s.nmi.percent(),
                s.pur.percent()
            );
        }
        failures.extend(&b.failures);
    }
    if failures.is_empty() {
        return ExitCode::SUCCESS;
    }
    eprintln!("{} run(s) failed:", failures.len());
    for f in failures {
        eprintln!("  noise ratio {}, seed {}: {}", f.noise_ratio, f.seed, f.message);
    }
    ExitCode::FAILURE
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(args) => build_spec(args).and_then(|spec| {
            let outcome = run(&spec)?;
            Ok(report(std::iter::once((format!("noise {}", spec.noise.ratio), &outcome))))
        }),
        Command::Sweep(args) => build_spec(args).and_then(|spec| {
            let outcomes = sweep(&spec)?;
            Ok(report(outcomes.iter().map(|(r, b)| (format!("noise {r}"), b))))
        }),
        Command::Ablate(args) => build_spec(args).and_then(|spec| {
            let outcomes = ablate(&spec)?;
            Ok(report(outcomes.iter().map(|(a, b)| (a.to_string(), b))))
        }),
        Command::GenSynth(a) => {
            let spec = SynthSpec::new(a.samples, a.clusters, a.views, a.dim, a.separation, a.seed);
            synth_blobs(&spec)
                .and_then(|d| save_dataset(&d, &a.out))
                .map(|()| {
                    println!("wrote {}", a.out.display());
                    ExitCode::SUCCESS
                })
        }
        Command::Eval(a) => (|| {
            let pred = parse_labels(&a.assignments)?;
            let truth = parse_labels(&a.labels)?;
            let m = evaluate(&pred, &truth, 0)?;
            print_metrics(&a.assignments.display().to_string(), &m);
            Ok(ExitCode::SUCCESS)
        })(),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
