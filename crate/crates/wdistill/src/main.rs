//! Command-line front end: configuration-driven runs of the amplitude,
//! assembly, distillation, analysis, and sweep stages.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use wdistill::config::RunConfig;
use wdistill::pipeline::{
    emit_outputs, emit_sweep, run_pipeline, run_sweep, EmitStage, TOOL_VERSION,
};
use wdistill::WdError;

#[derive(Parser)]
#[command(name = "wdistill", version, about = "W-state distillation from vacuum correlations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// Path to the TOML run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides the config's `output.directory`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the Svetlichny optimizer seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Compute and emit the two-point amplitude table.
    Amplitudes(CommonArgs),
    /// Amplitudes plus the assembled (unfiltered) density matrix.
    Assemble(CommonArgs),
    /// Full distillation: filter, normalize, diagnostics.
    Distill(CommonArgs),
    /// Distillation plus the configured analyses.
    Analyze(CommonArgs),
    /// Run the configured sweep grid and emit the table.
    Sweep(CommonArgs),
}

impl Command {
    fn common(&self) -> &CommonArgs {
        match self {
            Command::Amplitudes(a)
            | Command::Assemble(a)
            | Command::Distill(a)
            | Command::Analyze(a)
            | Command::Sweep(a) => a,
        }
    }
}

fn out_dir(args: &CommonArgs, config: &RunConfig) -> PathBuf {
    args.out
        .clone()
        .or_else(|| config.output.directory.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"))
}

fn run(cli: Cli) -> Result<Vec<PathBuf>, WdError> {
    let args = cli.command.common();
    let config = RunConfig::load(&args.config)?;
    let dir = out_dir(args, &config);
    match &cli.command {
        Command::Sweep(_) => {
            let grid = config.sweep.clone().ok_or_else(|| {
                WdError::Config("sweep subcommand needs a [sweep] section".into())
            })?;
            let mut c = config;
            if let (Some(seed), Some(sv)) = (args.seed, c.analysis.svetlichny.as_mut()) {
                sv.seed = seed;
            }
            let table = run_sweep(&c, &grid)?;
            let duration = c
                .detectors
                .iter()
                .map(|d| d.window.duration)
                .fold(f64::NAN, f64::max);
            emit_sweep(&table, &dir, duration.is_finite().then_some(duration))
        }
        other => {
            let stage = match other {
                Command::Amplitudes(_) => EmitStage::Amplitudes,
                Command::Assemble(_) => EmitStage::Assemble,
                Command::Distill(_) => EmitStage::Distill,
                _ => EmitStage::Analyze,
            };
            let bundle = run_pipeline(&config, args.seed)?;
            emit_outputs(&bundle, &dir, stage)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            // Machine-readable error report on stderr.
            let report = serde_json::json!({
                "tool_version": TOOL_VERSION,
                "error": e.to_string(),
                "kind": match &e {
                    WdError::Validation { .. } => "validation",
                    WdError::Numerical { .. } => "numerical",
                    WdError::Domain(_) => "domain",
                    WdError::MissingAmplitude { .. } => "missing_amplitude",
                    WdError::Causality { .. } => "causality",
                    WdError::Config(_) => "config",
                    WdError::Io { .. } => "io",
                },
            });
            eprintln!("{report}");
            ExitCode::FAILURE
        }
    }
}
