//! `creff` command-line driver.
//!
//! Exit status: 0 on success, 1 on configuration or usage errors, 2 on
//! runtime failures (the failing stage is printed on standard error).

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use creff::harness::{
    self, compare, eval_checkpoint, gen_data, parse_config, parse_override, run_experiment, sweep_m,
    ExperimentConfig, Method, RunOptions, StageError,
};
use creff::Error;

#[derive(Parser)]
#[command(name = "creff", version, about = "Federated classifier re-training simulator")]
struct Cli {
    /// Worker threads for client-parallel work (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct ConfigArgs {
    /// Flat `key = value` config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override a config key; repeatable, applied after the file.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Output directory; takes precedence over the environment and config.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured method and write rounds.csv, summary.json and checkpoints.
    Run {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Continue from a checkpoint written by an earlier run of the same config.
        #[arg(long)]
        resume: Option<PathBuf>,
        /// Stop once this many rounds have completed.
        #[arg(long)]
        stop_after: Option<usize>,
    },
    /// Run several methods on identical seeds and tabulate accuracy deltas.
    Compare {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Comma-separated methods; deltas are against the first.
        #[arg(long, value_delimiter = ',', required = true)]
        methods: Vec<String>,
    },
    /// One CReFF run per number of federated features per class.
    SweepM {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Comma-separated values of m.
        #[arg(long = "m", value_delimiter = ',', required = true)]
        values: Vec<usize>,
    },
    /// Write the configured synthetic mixture as IDX files.
    GenData {
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Evaluate both models stored in a checkpoint on an IDX test set.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        images: PathBuf,
        #[arg(long)]
        labels: PathBuf,
    },
}

enum Failure {
    Config(String),
    Runtime(StageError),
}

impl From<StageError> for Failure {
    fn from(e: StageError) -> Self {
        if matches!(e.error, Error::Config(_)) {
            Failure::Config(e.error.to_string())
        } else {
            Failure::Runtime(e)
        }
    }
}

fn load_config(args: &ConfigArgs) -> Result<(ExperimentConfig, PathBuf), Failure> {
    let overrides = args
        .overrides
        .iter()
        .map(|o| parse_override(o))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| Failure::Config(e.to_string()))?;
    let mut cfg = parse_config(args.config.as_deref(), &overrides).map_err(|e| Failure::Config(e.to_string()))?;
    if let Some(dir) = resolve_output(args.output.as_deref(), std::env::var_os(harness::OUTPUT_DIR_ENV)) {
        cfg.output_dir = dir;
    }
    let out = cfg.output_dir.clone();
    Ok((cfg, out))
}

fn resolve_output(flag: Option<&Path>, env: Option<std::ffi::OsString>) -> Option<PathBuf> {
    flag.map(Path::to_path_buf).or_else(|| env.filter(|v| !v.is_empty()).map(PathBuf::from))
}

fn runtime(stage: &str, error: Error) -> Failure {
    Failure::Runtime(StageError {
        stage: stage.to_string(),
        error,
    })
}

fn execute(command: Command) -> Result<(), Failure> {
    match command {
        Command::Run { cfg, resume, stop_after } => {
            let (cfg, out) = load_config(&cfg)?;
            let opts = RunOptions {
                output_dir: Some(out.clone()),
                resume,
                stop_after,
            };
            let run = run_experiment(cfg, &opts)?;
            println!(
                "{} rounds done; output accuracy {:.4}; results in {}",
                run.state.next_round,
                run.summary.final_output.overall_acc,
                out.display()
            );
        }
        Command::Compare { cfg, methods } => {
            let methods = methods
                .iter()
                .map(|m| m.trim().parse::<Method>().map_err(|()| Failure::Config(format!("unknown method `{m}`"))))
                .collect::<Result<Vec<_>, _>>()?;
            if methods.len() < 2 {
                return Err(Failure::Config("compare needs at least two methods".into()));
            }
            let (cfg, out) = load_config(&cfg)?;
            print!("{}", compare(&cfg, &methods, Some(&out))?.table);
        }
        Command::SweepM { cfg, values } => {
            let (cfg, out) = load_config(&cfg)?;
            print!("{}", sweep_m(&cfg, &values, Some(&out))?.table);
        }
        Command::GenData { cfg } => {
            let (cfg, out) = load_config(&cfg)?;
            let paths = gen_data(&cfg, &out).map_err(|e| match e {
                Error::Config(c) => Failure::Config(c.to_string()),
                e => runtime("gen-data", e),
            })?;
            for p in [&paths.train_images, &paths.train_labels, &paths.test_images, &paths.test_labels] {
                println!("{}", p.display());
            }
        }
        Command::Eval { checkpoint, images, labels } => {
            let report = eval_checkpoint(&checkpoint, &images, &labels)?;
            let json = serde_json::to_string_pretty(&report).map_err(|e| runtime("output", Error::InvalidArgument(e.to_string())))?;
            println!("{json}");
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
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: config: cannot set thread count: {e}");
            return ExitCode::from(1);
        }
    }
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("error: config: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: stage `{}`: {}", e.stage, e.error);
            ExitCode::from(2)
        }
    }
}
