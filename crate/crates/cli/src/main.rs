//! `aqc`: experiment runner for the adiabatic quantum computation toolkit.

mod commands;
mod config;
mod record;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::config::{Command, ExperimentConfig};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Schema(String),
    #[error(transparent)]
    Core(#[from] aqc::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Replay(String),
}

fn numeric(e: &aqc::Error) -> bool {
    use aqc::Error::*;
    match e {
        NoConvergence(_) | NormDrift { .. } | VanishingGap { .. } => true,
        AtParameter { source, .. } => numeric(source),
        _ => false,
    }
}

impl CliError {
    /// 2 for schema and input errors, 3 for numeric failures, 4 for I/O.
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(e) if numeric(e) => 3,
            CliError::Core(aqc::Error::Io(_)) | CliError::Io(_) => 4,
            CliError::Schema(_) | CliError::Core(_) | CliError::Replay(_) => 2,
        }
    }

    fn kind(&self) -> &'static str {
        match self.exit_code() {
            3 => "numeric",
            4 => "io",
            _ => match self {
                CliError::Replay(_) => "replay",
                _ => "schema",
            },
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "aqc", version, about = "Adiabatic quantum computation experiments")]
struct Cli {
    /// Worker threads for parallel sections.
    #[arg(long, global = true, env = "AQC_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Sub,
}

#[derive(Args, Debug)]
struct RunArgs {
    /// TOML experiment config.
    #[arg(long)]
    config: PathBuf,
    /// Master seed; overrides the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; overrides the config.
    #[arg(long, env = "AQC_OUT")]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Sub {
    /// Gap profile along the path.
    Gap(RunArgs),
    /// Schrödinger evolution over a t_f grid.
    Evolve(RunArgs),
    /// Tabulate an annealing schedule.
    Schedule(RunArgs),
    /// Rigorous adiabatic error bound.
    Bounds(RunArgs),
    /// History-state compilation of a gate circuit.
    Compile(RunArgs),
    /// Perturbative gadget assembly and error-order fit.
    Gadget(RunArgs),
    /// Gap amplification and de-stoquastization.
    Transform(RunArgs),
    /// Adiabatic PageRank against the power method.
    Pagerank(RunArgs),
    /// TTS benchmark across sizes and solvers.
    Bench(RunArgs),
    /// Rerun a recorded experiment and byte-compare its CSV payloads.
    Replay {
        /// Path to a run_record.json.
        #[arg(long)]
        record: PathBuf,
        /// Config to rerun in place of the recorded one.
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

fn run_command(command: Command, args: &RunArgs) -> Result<(), CliError> {
    let mut cfg = ExperimentConfig::load(&args.config)?;
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(o) = &args.out {
        cfg.out = Some(o.clone());
    }
    let dir = cfg.out.clone().unwrap_or_else(|| PathBuf::from("aqc-out"));
    let rec = record::execute(command, &cfg, &dir)?;
    for w in &rec.warnings {
        eprintln!("warning: {w}");
    }
    println!("{}", dir.join(record::RECORD_FILE).display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(t) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            eprintln!("warning: thread budget not applied: {e}");
        }
    }
    let command = match &cli.command {
        Sub::Gap(a) => Some((Command::Gap, a)),
        Sub::Evolve(a) => Some((Command::Evolve, a)),
        Sub::Schedule(a) => Some((Command::Schedule, a)),
        Sub::Bounds(a) => Some((Command::Bounds, a)),
        Sub::Compile(a) => Some((Command::Compile, a)),
        Sub::Gadget(a) => Some((Command::Gadget, a)),
        Sub::Transform(a) => Some((Command::Transform, a)),
        Sub::Pagerank(a) => Some((Command::Pagerank, a)),
        Sub::Bench(a) => Some((Command::Bench, a)),
        Sub::Replay { .. } => None,
    };
    let result = match (command, &cli.command) {
        (Some((c, a)), _) => run_command(c, a).map(|_| true),
        (None, Sub::Replay { record, config }) => (|| {
            let cfg = config.as_deref().map(ExperimentConfig::load).transpose()?;
            let report = record::replay(record, cfg.as_ref())?;
            println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
            Ok(report.is_empty())
        })(),
        (None, _) => unreachable!("every other subcommand carries run arguments"),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("{}", serde_json::json!({ "error": e.kind(), "message": e.to_string(), "exit_code": e.exit_code() }));
            ExitCode::from(e.exit_code())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_by_category() {
        let numeric = CliError::Core(aqc::Error::NoConvergence("lanczos".into()).at(0.5));
        assert_eq!(numeric.exit_code(), 3);
        assert_eq!(CliError::Core(aqc::Error::NormDrift { drift: 1.0, limit: 1e-6, s: 0.1 }).exit_code(), 3);
        assert_eq!(CliError::Core(aqc::Error::InvalidParameter("n".into())).exit_code(), 2);
        assert_eq!(CliError::Schema("x".into()).exit_code(), 2);
        assert_eq!(CliError::Io(std::io::Error::other("disk")).exit_code(), 4);
    }
}
