use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand};
use gme_core::pipeline::{self, ExperimentConfig, RunReport};
use gme_core::error::at_path;
use gme_core::Error;

/// Detect genuine multipartite entanglement of three-qubit states with
/// SVM and safe semi-supervised classifiers.
#[derive(Parser)]
#[command(name = "gme", version)]
struct Cli {
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// More logging; repeat for debug output.
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment config (JSON); missing fields take the defaults listed
    /// below.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed, overriding the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct Experiment {
    #[command(flatten)]
    common: Common,
    /// Dataset file (default: <out>/dataset.jsonl).
    #[arg(long)]
    dataset: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Draw random states, label them by their certified GMN and write
    /// dataset.jsonl.
    Generate {
        #[command(flatten)]
        common: Common,
        /// Fraction of records re-solved by the audit, overriding the config.
        #[arg(long)]
        audit_fraction: Option<f64>,
    },
    /// SVM with grid search and feature screening on a 4:1 split.
    Supervised(Experiment),
    /// The three semi-supervised protocols.
    Semisup(Experiment),
    /// Trace-distance selection of the labeled set versus random selection.
    Active(Experiment),
    /// Merge run files into report.csv and summary.json.
    Report {
        /// Output directory.
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Run files written by supervised, semisup or active.
        #[arg(required = true)]
        runs: Vec<PathBuf>,
    },
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Schema(_) => 4,
        Error::Quota(_) | Error::Solver(_) => 3,
        Error::InvalidParameter(_)
        | Error::UnknownName(_)
        | Error::Json(_)
        | Error::Io(_)
        | Error::DegenerateFolds(_)
        | Error::SingleClass => 2,
        _ => 3,
    }
}

fn load_config(common: &Common) -> gme_core::Result<ExperimentConfig> {
    let mut cfg = match &common.config {
        Some(path) => ExperimentConfig::from_json(&fs::read_to_string(path).map_err(at_path(path))?)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> gme_core::Result<()> {
    fs::write(path, serde_json::to_string_pretty(value)? + "\n").map_err(at_path(path))?;
    Ok(())
}

fn write_timing(out: &Path, command: &str, start: Instant) -> gme_core::Result<()> {
    let timing = serde_json::json!({ "command": command, "seconds": start.elapsed().as_secs_f64() });
    write_json(&out.join(format!("timing-{command}.json")), &timing)
}

fn generate(common: &Common, audit_fraction: Option<f64>) -> gme_core::Result<()> {
    let mut cfg = load_config(common)?;
    if let Some(f) = audit_fraction {
        cfg.generation.audit_fraction = f;
        cfg.validate()?;
    }
    fs::create_dir_all(&common.out).map_err(at_path(&common.out))?;
    let start = Instant::now();
    let outcome = pipeline::generate(&cfg)?;
    let audit = pipeline::audit(&outcome.records, cfg.generation.audit_fraction, cfg.seed, &cfg.solver)?;
    pipeline::write_records(&common.out.join("dataset.jsonl"), &outcome.records)?;
    let summary = serde_json::json!({
        "config_hash": cfg.hash(),
        "seed": cfg.seed,
        "records": outcome.records.len(),
        "attempts": outcome.attempts,
        "generators": outcome.stats,
        "audit": audit,
    });
    write_json(&common.out.join("generation.json"), &summary)?;
    write_timing(&common.out, "generate", start)?;
    if !audit.passed() {
        return Err(Error::Solver(format!("dataset audit failed: {audit:?}")));
    }
    log::info!("wrote {} records after {} attempts", outcome.records.len(), outcome.attempts);
    Ok(())
}

fn experiment(
    name: &str,
    args: &Experiment,
    run: fn(&ExperimentConfig, &[pipeline::StateRecord]) -> gme_core::Result<RunReport>,
) -> gme_core::Result<()> {
    let cfg = load_config(&args.common)?;
    let out = &args.common.out;
    let dataset = args.dataset.clone().unwrap_or_else(|| out.join("dataset.jsonl"));
    let records = pipeline::read_records(&dataset)?;
    fs::create_dir_all(out).map_err(at_path(out))?;
    let start = Instant::now();
    let report = run(&cfg, &records)?;
    report.write(&out.join(format!("{name}.json")))?;
    if let pipeline::Details::Supervised { curve, .. } = &report.details {
        let mut csv = String::from("retained,mean,std\n");
        for p in curve {
            csv += &format!("{},{},{}\n", p.retained, p.mean, p.std);
        }
        let path = out.join("supervised_curve.csv");
        fs::write(&path, csv).map_err(at_path(&path))?;
    }
    write_timing(out, name, start)?;
    for s in &report.summary {
        log::info!("{} {} l={} m={}: {:.4} +- {:.4}", s.selection, s.protocol, s.labeled, s.groups, s.mean, s.std);
    }
    Ok(())
}

fn report(out: &Path, runs: &[PathBuf]) -> gme_core::Result<()> {
    let paths: Vec<&Path> = runs.iter().map(PathBuf::as_path).collect();
    let (csv, summary) = pipeline::combine(&paths)?;
    fs::create_dir_all(out).map_err(at_path(out))?;
    let path = out.join("report.csv");
    fs::write(&path, csv).map_err(at_path(&path))?;
    write_json(&out.join("summary.json"), &summary)
}

fn main() -> ExitCode {
    let defaults = format!("Default config:\n{}", ExperimentConfig::default().to_json());
    let matches = Cli::command().after_long_help(defaults).get_matches();
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(cli) => cli,
        Err(e) => e.exit(),
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    if let Some(jobs) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global() {
            eprintln!("error: cannot start {jobs} worker threads: {e}");
            return ExitCode::from(2);
        }
    }
    let result = match &cli.command {
        Command::Generate { common, audit_fraction } => generate(common, *audit_fraction),
        Command::Supervised(args) => experiment("supervised", args, pipeline::run_supervised),
        Command::Semisup(args) => experiment("semisup", args, pipeline::run_semisup),
        Command::Active(args) => experiment("active", args, pipeline::run_active),
        Command::Report { out, runs } => report(out, runs),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
