use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use sqfn_cli::config::{ExperimentConfig, ExperimentKind};
use sqfn_cli::experiments::{emit_to, run};
use sqfn_cli::report::OutputFormat;

/// Square-function experiment runner.
#[derive(Parser)]
#[command(name = "sqfn", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and emit its report.
    Run(RunArgs),
    /// List the available experiments.
    List,
    /// Describe one experiment and its defaults.
    Describe { experiment: String },
}

#[derive(Args)]
struct RunArgs {
    /// identity | compare | counterexample | weighted | semigroup-squarefn |
    /// offdiag | caccioppoli | converse-lowerbound
    experiment: String,
    /// Flat key = value config file; flags override its entries.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Grid override: nx=..,nt=..,l=..,tmin=..,tmax=..[,n=..]
    #[arg(long)]
    grid: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated p list.
    #[arg(long)]
    p: Option<String>,
    /// Comma-separated N list (counterexample scales).
    #[arg(long = "N")]
    n_list: Option<String>,
    /// Operator preset: identity | smooth-scalar | checkerboard | complex-perturbed
    #[arg(long)]
    operator: Option<String>,
    /// Weight preset: unit | power(a) | plateau(c)
    #[arg(long)]
    weight: Option<String>,
    /// Corpus size where applicable.
    #[arg(long)]
    fields: Option<usize>,
    /// Also run the grid-doubling convergence checks.
    #[arg(long)]
    refine: bool,
    #[arg(long)]
    out: Option<PathBuf>,
    /// csv | json
    #[arg(long)]
    format: Option<String>,
    /// Worker threads (0 = library default pool).
    #[arg(long)]
    threads: Option<usize>,
    /// Include wall-clock timings in the report (breaks byte-for-byte
    /// reproducibility of the emitted file).
    #[arg(long)]
    timings: bool,
}

fn build_config(args: &RunArgs) -> Result<ExperimentConfig, String> {
    let kind = ExperimentKind::parse(&args.experiment)
        .ok_or_else(|| format!("unknown experiment: {}", args.experiment))?;
    let mut cfg = ExperimentConfig::defaults(kind);
    if let Some(path) = &args.config {
        cfg.apply_file(path).map_err(|e| e.to_string())?;
        cfg.experiment = kind; // the positional argument wins
    }
    if let Some(g) = &args.grid {
        cfg.apply_grid_flag(g).map_err(|e| e.to_string())?;
    }
    let flag_pairs: Vec<(&str, Option<String>)> = vec![
        ("seed", args.seed.map(|v| v.to_string())),
        ("p", args.p.clone()),
        ("N", args.n_list.clone()),
        ("operator", args.operator.clone()),
        ("weight", args.weight.clone()),
        ("fields", args.fields.map(|v| v.to_string())),
        ("format", args.format.clone()),
        ("threads", args.threads.map(|v| v.to_string())),
    ];
    for (key, value) in flag_pairs {
        if let Some(v) = value {
            cfg.apply(key, &v).map_err(|e| e.to_string())?;
        }
    }
    if args.refine {
        cfg.refine = true;
    }
    if args.timings {
        cfg.timings = true;
    }
    if let Some(out) = &args.out {
        cfg.out = Some(out.clone());
    }
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::List => {
            for kind in ExperimentKind::ALL {
                println!("{}", kind.name());
            }
            ExitCode::SUCCESS
        }
        Command::Describe { experiment } => match ExperimentKind::parse(&experiment) {
            Some(kind) => {
                println!("{}: {}", kind.name(), kind.describe());
                let defaults = ExperimentConfig::defaults(kind);
                println!("defaults:");
                for (k, v) in defaults.echo() {
                    println!("  {k} = {v}");
                }
                ExitCode::SUCCESS
            }
            None => {
                eprintln!("unknown experiment: {experiment}");
                ExitCode::from(2)
            }
        },
        Command::Run(args) => {
            let cfg = match build_config(&args) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("{e}");
                    return ExitCode::from(2);
                }
            };
            let report = match run(&cfg) {
                Ok(r) => r,
                Err(e) => {
                    eprintln!("{e}");
                    return ExitCode::from(2);
                }
            };
            let format = if cfg.out.as_ref().is_some_and(|p| {
                p.extension().is_some_and(|e| e == "json")
            }) && args.format.is_none()
            {
                OutputFormat::Json
            } else {
                cfg.format
            };
            if let Err(e) = emit_to(&report, format, cfg.out.as_deref()) {
                eprintln!("{e}");
                return ExitCode::from(2);
            }
            for v in &report.verdicts {
                eprintln!(
                    "[{}] {}: observed {}, threshold {}",
                    match v.status {
                        sqfn_cli::report::Status::Pass => "pass",
                        sqfn_cli::report::Status::Fail => "FAIL",
                        sqfn_cli::report::Status::Info => "info",
                    },
                    v.name,
                    v.observed,
                    v.threshold
                );
            }
            if report.any_fail() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            }
        }
    }
}
