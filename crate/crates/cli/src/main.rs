//! `sewerbench` command-line runner.
//!
//! Exit status is 0 on success, 1 for user errors (bad config, missing
//! input, invalid arguments) and 2 for internal failures. Failures are also
//! reported on stderr as one JSON object.

mod config;
mod report;
mod stages;
mod svg;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use sewerbench::errgen::{ErrorKind, ErrorSpec, DEFAULT_CLUSTER_MEAN_LEN};
use sewerbench::Error;

use config::RunConfig;
use stages::{PerturbArgs, Run};

/// Environment variable naming the default output directory.
const OUTPUT_ENV: &str = "SEWERBENCH_OUTPUT";
const DEFAULT_OUTPUT: &str = "sewerbench-out";

#[derive(Parser, Debug)]
#[command(
    name = "sewerbench",
    version,
    about = "Robustness and trade-off evaluation for sewer-level forecasters"
)]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct GlobalArgs {
    /// Run configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads for training and the sweep (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Override the config's seed_base.
    #[arg(long, global = true)]
    seed_base: Option<u64>,
    /// Output directory (default: $SEWERBENCH_OUTPUT, the config's
    /// output_dir, or ./sewerbench-out).
    #[arg(long, global = true)]
    output: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate the synthetic dataset of the config.
    Synth,
    /// Corrupt one channel of a CSV frame.
    Perturb(PerturbCmd),
    /// Train every configured model for every seed.
    Train,
    /// Run the robustness sweep over the trained models.
    Evaluate,
    /// Compute consistency, CCI and RI from a record file.
    Indices {
        /// Record file (default: <output>/records.jsonl).
        #[arg(long)]
        records: Option<PathBuf>,
        /// Complexity measurements (default: <output>/complexity.json if present).
        #[arg(long)]
        complexity: Option<PathBuf>,
    },
    /// Render figures and tables.
    Report {
        #[arg(long)]
        records: Option<PathBuf>,
        #[arg(long)]
        indices: Option<PathBuf>,
    },
    /// synth, train, evaluate, indices and report in one go.
    Run,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum KindArg {
    Outlier,
    Missing,
    Clip,
}

#[derive(Args, Debug)]
struct PerturbCmd {
    /// Input CSV.
    #[arg(long)]
    data: PathBuf,
    /// Role sidecar (default: <data stem>.schema.toml when present).
    #[arg(long)]
    schema: Option<PathBuf>,
    #[arg(long)]
    channel: String,
    #[arg(long, value_enum)]
    kind: KindArg,
    #[arg(long)]
    rate: f64,
    #[arg(long, default_value_t = 1.1)]
    alpha: f64,
    #[arg(long, default_value_t = 0.1)]
    beta: f64,
    #[arg(long, default_value_t = 0.2)]
    q_lower: f64,
    #[arg(long, default_value_t = 0.8)]
    q_upper: f64,
    #[arg(long, default_value_t = DEFAULT_CLUSTER_MEAN_LEN)]
    cluster_mean_len: f64,
    /// Placement and noise seed (default: --seed-base, else 0).
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug)]
enum Failure {
    User(String),
    Internal(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::User(_) => 1,
            Failure::Internal(_) => 2,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match &e {
            Error::Io(io)
                if !matches!(
                    io.kind(),
                    std::io::ErrorKind::NotFound | std::io::ErrorKind::PermissionDenied
                ) =>
            {
                Failure::Internal(e.to_string())
            }
            Error::Plugin(_) => Failure::Internal(e.to_string()),
            _ => Failure::User(e.to_string()),
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind as K;
            if matches!(e.kind(), K::DisplayHelp | K::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            emit_failure("args", &Failure::User(e.to_string()));
            return ExitCode::from(1);
        }
    };
    let stage = stage_name(&cli.command);
    let outcome = std::panic::catch_unwind(|| execute(&cli));
    match outcome {
        Ok(Ok(written)) => {
            let files: Vec<String> = written.iter().map(|p| p.display().to_string()).collect();
            println!(
                "{}",
                json!({"status": "ok", "stage": stage, "artifacts": files})
            );
            ExitCode::SUCCESS
        }
        Ok(Err(f)) => {
            emit_failure(stage, &f);
            ExitCode::from(f.code())
        }
        Err(panic) => {
            let msg = panic
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            let f = Failure::Internal(msg);
            emit_failure(stage, &f);
            ExitCode::from(f.code())
        }
    }
}

fn emit_failure(stage: &str, f: &Failure) {
    let (kind, message) = match f {
        Failure::User(m) => ("user", m),
        Failure::Internal(m) => ("internal", m),
    };
    eprintln!(
        "{}",
        json!({"status": "error", "stage": stage, "kind": kind, "message": message})
    );
}

fn stage_name(c: &Command) -> &'static str {
    match c {
        Command::Synth => "synth",
        Command::Perturb(_) => "perturb",
        Command::Train => "train",
        Command::Evaluate => "evaluate",
        Command::Indices { .. } => "indices",
        Command::Report { .. } => "report",
        Command::Run => "run",
    }
}

fn execute(cli: &Cli) -> Result<Vec<PathBuf>, Failure> {
    if let Some(jobs) = cli.global.jobs {
        if jobs == 0 {
            return Err(Failure::User("--jobs must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| Failure::Internal(e.to_string()))?;
    }
    match &cli.command {
        Command::Synth => Ok(stages::synth(&load_run(&cli.global)?)?),
        Command::Train => Ok(stages::train(&load_run(&cli.global)?)?),
        Command::Evaluate => Ok(stages::evaluate(&load_run(&cli.global)?)?),
        Command::Run => Ok(stages::run_all(&load_run(&cli.global)?)?),
        Command::Perturb(p) => {
            let kind = match p.kind {
                KindArg::Outlier => ErrorKind::Outlier {
                    alpha: p.alpha,
                    beta: p.beta,
                },
                KindArg::Missing => ErrorKind::Missing,
                KindArg::Clip => ErrorKind::Clip {
                    q_lower: p.q_lower,
                    q_upper: p.q_upper,
                },
            };
            let seed = p.seed.or(cli.global.seed_base).unwrap_or(0);
            let args = PerturbArgs {
                data: p.data.clone(),
                schema: p.schema.clone(),
                channel: p.channel.clone(),
                spec: ErrorSpec::new(kind, p.rate, seed).with_cluster_mean_len(p.cluster_mean_len),
                out: output_dir(&cli.global, None),
            };
            Ok(stages::perturb_file(&args)?)
        }
        Command::Indices {
            records,
            complexity,
        } => {
            let run = optional_run(&cli.global)?;
            let out = run
                .as_ref()
                .map_or_else(|| output_dir(&cli.global, None), |r| r.out.clone());
            let records = records.clone().unwrap_or_else(|| out.join(stages::RECORDS));
            let complexity = complexity.clone().or_else(|| {
                let p = out.join(stages::COMPLEXITY);
                p.exists().then_some(p)
            });
            let stamp = run.as_ref().map(|r| report::Stamp {
                config_hash: r.hash.clone(),
                seed_base: r.cfg.seed_base,
            });
            Ok(stages::indices(
                &records,
                complexity.as_deref(),
                &out,
                stamp,
            )?)
        }
        Command::Report { records, indices } => {
            let run = optional_run(&cli.global)?;
            let out = run
                .as_ref()
                .map_or_else(|| output_dir(&cli.global, None), |r| r.out.clone());
            let records = records.clone().unwrap_or_else(|| out.join(stages::RECORDS));
            let indices = indices.clone().unwrap_or_else(|| out.join(stages::INDICES));
            Ok(stages::report(&records, &indices, &out)?)
        }
    }
}

fn output_dir(global: &GlobalArgs, cfg: Option<(&RunConfig, &Path)>) -> PathBuf {
    if let Some(o) = &global.output {
        return o.clone();
    }
    if let Some(env) = std::env::var_os(OUTPUT_ENV).filter(|v| !v.is_empty()) {
        return PathBuf::from(env);
    }
    if let Some((cfg, base)) = cfg {
        if let Some(o) = &cfg.output_dir {
            return base.join(o);
        }
    }
    PathBuf::from(DEFAULT_OUTPUT)
}

fn load_run(global: &GlobalArgs) -> Result<Run, Failure> {
    optional_run(global)?
        .ok_or_else(|| Failure::User("--config is required for this command".into()))
}

fn optional_run(global: &GlobalArgs) -> Result<Option<Run>, Failure> {
    let Some(path) = &global.config else {
        return Ok(None);
    };
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::User(format!("{}: {e}", path.display())))?;
    let mut cfg = RunConfig::from_toml(&text)?;
    if let Some(s) = global.seed_base {
        cfg.seed_base = s;
    }
    let base = path
        .parent()
        .map(Path::to_path_buf)
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or_else(|| PathBuf::from("."));
    let out = output_dir(global, Some((&cfg, &base)));
    Ok(Some(Run::new(cfg, base, out)))
}
