//! Command implementations behind the `keybench` binary.

mod commands;
mod output;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

pub use commands::run;
pub use output::{roll_csv, sweep_csv_header, ROLL_CSV_HEADER, SWEEP_CSV_HEADER};

#[derive(Debug, Parser)]
#[command(name = "keybench", version, about = "Simulated bimanual piano-playing benchmark")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Discretize a score into a piano roll and print it as CSV.
    Roll(RollArgs),
    /// Play a song with the sampling-based MPC planner.
    Play(PlayArgs),
    /// Sweep the control step or lookahead and record F1 per cell.
    Sweep(SweepArgs),
    /// Log episodes of a fixed policy to a trajectory file.
    Log(LogArgs),
    /// Recompute F1 from a trajectory file.
    Eval(EvalArgs),
    /// Serve environments over the line-delimited protocol.
    Serve(ServeArgs),
}

/// Where the score comes from: a built-in song or a MIDI file.
#[derive(Debug, Clone, Args)]
pub struct SongArgs {
    /// Built-in song name.
    #[arg(long, conflicts_with = "midi")]
    pub song: Option<String>,
    /// Standard MIDI File to load.
    #[arg(long)]
    pub midi: Option<PathBuf>,
    /// Fingering annotation file for --midi.
    #[arg(long, requires = "midi")]
    pub fingering: Option<PathBuf>,
}

/// Environment and planner settings shared by several commands. Explicit
/// flags override the config file.
#[derive(Debug, Clone, Default, Args)]
pub struct SettingsArgs {
    /// TOML file with [env] and [planner] tables.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Control timestep, seconds.
    #[arg(long, value_parser = positive_f64)]
    pub dt: Option<f64>,
    /// Future goal frames in the observation.
    #[arg(long)]
    pub lookahead: Option<usize>,
    /// Planner iterations per control step.
    #[arg(long)]
    pub iters: Option<usize>,
    /// Planner wall-clock budget per control step, seconds.
    #[arg(long, value_parser = positive_f64)]
    pub budget: Option<f64>,
    /// Planner rollout threads (0 = all cores).
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Debug, Args)]
pub struct RollArgs {
    #[command(flatten)]
    pub source: SongArgs,
    /// Frame length, seconds.
    #[arg(long, value_parser = positive_f64, default_value_t = 0.05)]
    pub dt: f64,
    /// Write roll.csv and roll_summary.txt here instead of printing.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PlayArgs {
    #[command(flatten)]
    pub source: SongArgs,
    #[command(flatten)]
    pub settings: SettingsArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Directory for report.txt, frames.csv and trajectory.jsonl.
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SweepAxis {
    Dt,
    Lookahead,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub source: SongArgs,
    #[command(flatten)]
    pub settings: SettingsArgs,
    #[arg(long, value_enum)]
    pub axis: SweepAxis,
    /// Comma-separated axis values.
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    pub values: Vec<f64>,
    /// Comma-separated seeds, one run per value and seed.
    #[arg(long, value_delimiter = ',', default_value = "0")]
    pub seeds: Vec<u64>,
    /// Directory for sweep.csv.
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PolicyKind {
    /// Home pose, fingers lifted.
    Zero,
    /// Uniform random actions.
    Random,
    /// Open-loop press schedule from the fingering labels.
    Scripted,
    /// The MPC planner.
    Mpc,
}

#[derive(Debug, Args)]
pub struct LogArgs {
    #[command(flatten)]
    pub source: SongArgs,
    #[command(flatten)]
    pub settings: SettingsArgs,
    #[arg(long, value_enum, default_value_t = PolicyKind::Random)]
    pub policy: PolicyKind,
    /// Number of episodes; episode i uses seed + i.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    pub episodes: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Trajectory file to write.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Trajectory file to score.
    pub trajectories: PathBuf,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    /// Address to listen on.
    #[arg(long, default_value = "127.0.0.1:7777", conflicts_with = "stdio")]
    pub addr: String,
    /// Serve a single session over stdin/stdout instead of TCP.
    #[arg(long)]
    pub stdio: bool,
    /// Also offer every MIDI file in this directory as a song.
    #[arg(long)]
    pub midi_dir: Option<PathBuf>,
    /// Write one trajectory file per session here.
    #[arg(long)]
    pub log_dir: Option<PathBuf>,
    #[command(flatten)]
    pub settings: SettingsArgs,
}

fn positive_f64(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(format!("must be a positive number, got {s}"))
    }
}
