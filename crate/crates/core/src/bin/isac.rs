use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use isac_radar::commands::{self, EvalPaths, GlobalOptions};

#[derive(Parser)]
#[command(name = "isac", version, about = "Multi-static ISAC radar simulator and processing chain")]
struct Cli {
    /// Override the scenario rng seed (clutter placement and noise).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores). Outputs do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Repeat for more log output.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize a CFR dataset container from a scenario JSON.
    Synth {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Detect targets in a dataset container.
    Process {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Write every residual map as CSV and PGM.
        #[arg(long)]
        export_maps: bool,
    },
    /// Track detections per link.
    Track {
        #[arg(long)]
        detections: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fuse confirmed tracks into position fixes.
    Localize {
        #[arg(long)]
        tracks: PathBuf,
        #[arg(long)]
        geometry: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score outputs against the dataset ground truth.
    Eval {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        dsp_config: Option<PathBuf>,
        #[arg(long)]
        detections: PathBuf,
        #[arg(long)]
        tracks: Option<PathBuf>,
        #[arg(long)]
        fixes: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn run(cli: Cli) -> isac_radar::Result<()> {
    let opts = GlobalOptions { seed: cli.seed, threads: cli.threads };
    match cli.command {
        Command::Synth { scenario, out } => {
            commands::synth(&scenario, &out, &opts)?;
        }
        Command::Process { input, config, out, export_maps } => {
            commands::process(&input, config.as_deref(), &out, export_maps, &opts)?;
        }
        Command::Track { detections, config, out } => {
            commands::track(&detections, config.as_deref(), &out, &opts)?;
        }
        Command::Localize { tracks, geometry, config, out } => {
            commands::localize_cmd(&tracks, &geometry, config.as_deref(), &out, &opts)?;
        }
        Command::Eval { dataset, dsp_config, detections, tracks, fixes, config, out } => {
            let paths = EvalPaths {
                dataset: &dataset,
                dsp_config: dsp_config.as_deref(),
                detections: &detections,
                tracks: tracks.as_deref(),
                fixes: fixes.as_deref(),
            };
            let (report, _) = commands::eval_cmd(&paths, config.as_deref(), &out, &opts)?;
            println!("{report}");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
