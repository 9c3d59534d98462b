//! `rehab`: train probabilistic exercise models from demonstration
//! recordings, regenerate the ideal movement, assess patient sequences,
//! and synthesize labeled test data.
//!
//! Exit codes: 0 success, 2 usage error, 3 data error, 4 numeric
//! failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use rehab_cli::commands::{
    cmd_assess, cmd_generate, cmd_report, cmd_synth, cmd_train, cmd_train_errors, AssessOptions,
    CmdError, CmdResult,
};
use rehab_cli::config::ToolConfig;
use rehab_cli::synth::{Archetype, ErrorInjection, SynthSpec};

#[derive(Parser)]
#[command(
    name = "rehab",
    version,
    about = "Movement assessment for rehabilitation exercises"
)]
struct Cli {
    /// Seed for all randomness (synthetic data generation).
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// JSON file overriding the built-in defaults (K, window, thresholds,
    /// margins, ...).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Train a movement model from demonstration recordings.
    Train(TrainArgs),
    /// Write a trained model's ideal movement as a sequence file.
    Generate(GenerateArgs),
    /// Score a recording against a trained model.
    Assess(AssessArgs),
    /// Generate a synthetic exercise recording.
    Synth(SynthArgs),
    /// Train the error classifier from labeled example sequences.
    TrainErrors(TrainErrorsArgs),
    /// Print a stored assessment report in human-readable form.
    Report(ReportArgs),
}

#[derive(Args)]
struct TrainArgs {
    /// Demonstration sequence files (at least two).
    #[arg(required = true)]
    demos: Vec<PathBuf>,
    /// Number of mixture components (default from config).
    #[arg(short, long)]
    k: Option<usize>,
    /// Output model file.
    #[arg(short, long)]
    out: PathBuf,
}

#[derive(Args)]
struct GenerateArgs {
    /// Trained model file.
    #[arg(short, long)]
    model: PathBuf,
    /// Output sequence file.
    #[arg(short, long)]
    out: PathBuf,
}

#[derive(Args)]
struct AssessArgs {
    /// Trained model file.
    #[arg(short, long)]
    model: PathBuf,
    /// Recording to assess.
    input: PathBuf,
    /// Output report JSON.
    #[arg(short, long)]
    out: PathBuf,
    /// Segmentation strategy: transition_hold or transition_only.
    #[arg(long)]
    strategy: Option<rehab_core::assessment::Strategy>,
    /// Motion-profile window in frames.
    #[arg(long)]
    window: Option<usize>,
    /// Fixed transition threshold (otherwise derived from the ideal
    /// movement).
    #[arg(long)]
    threshold: Option<f64>,
    /// Also write an SVG score timeline.
    #[arg(long)]
    svg: Option<PathBuf>,
    /// Also write a per-frame log-likelihood/motion CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Error classifier file; enables error findings in the report.
    #[arg(long)]
    classifier: Option<PathBuf>,
    /// Advice dictionary JSON (templates per exercise/part/label).
    #[arg(long)]
    advice: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    /// Exercise archetype: arm_raise_rotate, arm_up_lean or
    /// arms_front_spread.
    #[arg(long)]
    exercise: Archetype,
    /// Output sequence file (a .meta.json sidecar is written next to
    /// it).
    #[arg(short, long)]
    out: PathBuf,
    /// Duration in seconds.
    #[arg(long, default_value_t = 10.0)]
    duration: f64,
    /// Frames per second (10 to 120).
    #[arg(long, default_value_t = 20.0)]
    fps: f64,
    /// Sensor noise standard deviation in normalized units.
    #[arg(long, default_value_t = 0.01)]
    noise: f64,
    /// Injected mistake: none, no_lean, arms_too_low:<delta>, or
    /// arm_offset:<joint>:<delta>.
    #[arg(long, default_value = "none")]
    error: ErrorInjection,
    /// Amplitude multiplier on all motion targets.
    #[arg(long, default_value_t = 1.0)]
    amplitude: f64,
    /// Tempo multiplier on the duration.
    #[arg(long, default_value_t = 1.0)]
    tempo: f64,
    /// Subject name stored in the file.
    #[arg(long)]
    subject: Option<String>,
}

#[derive(Args)]
struct TrainErrorsArgs {
    /// Trained model file.
    #[arg(short, long)]
    model: PathBuf,
    /// Labeled examples JSON: {"examples": [{"sequence", "part",
    /// "segment", "label"}, ...]}.
    #[arg(short, long)]
    labeled: PathBuf,
    /// Output classifier file.
    #[arg(short, long)]
    out: PathBuf,
}

#[derive(Args)]
struct ReportArgs {
    /// Stored report JSON.
    input: PathBuf,
}

fn load_config(cli: &Cli) -> CmdResult<ToolConfig> {
    match &cli.config {
        Some(path) => ToolConfig::load(path)
            .map_err(|e| CmdError::Usage(format!("{}: {e}", path.display()))),
        None => Ok(ToolConfig::default()),
    }
}

fn run(cli: Cli) -> CmdResult<String> {
    let mut config = load_config(&cli)?;
    match &cli.cmd {
        Cmd::Train(a) => cmd_train(&config, &a.demos, a.k, &a.out),
        Cmd::Generate(a) => cmd_generate(&a.model, &a.out),
        Cmd::Assess(a) => {
            if let Some(s) = a.strategy {
                config.strategy = s;
            }
            if let Some(w) = a.window {
                config.window = w;
            }
            if let Some(t) = a.threshold {
                config.tau = Some(t);
            }
            let opts = AssessOptions {
                svg: a.svg.clone(),
                csv: a.csv.clone(),
                classifier: a.classifier.clone(),
                advice: a.advice.clone(),
            };
            cmd_assess(&config, &a.model, &a.input, &a.out, &opts)
        }
        Cmd::Synth(a) => {
            let spec = SynthSpec {
                exercise: a.exercise,
                duration: a.duration,
                fps: a.fps,
                noise: a.noise,
                error: a.error.clone(),
                seed: cli.seed,
                subject: a
                    .subject
                    .clone()
                    .unwrap_or_else(|| format!("synth-{}", cli.seed)),
                amplitude: a.amplitude,
                tempo: a.tempo,
            };
            cmd_synth(&spec, &a.out)
        }
        Cmd::TrainErrors(a) => cmd_train_errors(&config, &a.model, &a.labeled, &a.out),
        Cmd::Report(a) => cmd_report(&a.input),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(summary) => {
            // Tolerate a closed pipe (e.g. `rehab report x.json | head`).
            use std::io::Write;
            let _ = writeln!(std::io::stdout(), "{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
