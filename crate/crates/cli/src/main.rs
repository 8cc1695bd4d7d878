use std::io;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use layerprobe::synth::FIXTURE_CHANCE;
use layerprobe_cli::{
    cmd_diff, cmd_fixtures, cmd_run, cmd_segment, cmd_synth, cmd_validate, exit_code_for,
    RunOptions,
};

/// Layer-wise linear probing of hidden-state dumps.
///
/// Exit codes: 0 success, 1 invalid input, 2 I/O failure, 3 degenerate
/// segmentation.
#[derive(Debug, Parser)]
#[command(name = "layerprobe", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check a dump file against the format contract.
    Validate { dump: PathBuf },
    /// Generate a synthetic dump with planted stage boundaries.
    Synth {
        /// JSON generator config; defaults are used for missing fields.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, env = "LWP_SEED")]
        seed: Option<u64>,
    },
    /// Train per-layer probes, evaluate all conditions and segment.
    Run {
        dump: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// JSON training config.
        #[arg(long)]
        train_config: Option<PathBuf>,
        /// JSON segmentation params.
        #[arg(long)]
        params: Option<PathBuf>,
        #[arg(long, env = "LWP_SEED")]
        seed: Option<u64>,
    },
    /// Segment an existing curves file (.csv or .json).
    Segment {
        curves: PathBuf,
        /// Chance level for CSV input, which does not record it.
        #[arg(long, default_value_t = FIXTURE_CHANCE)]
        chance: f64,
        #[arg(long)]
        params: Option<PathBuf>,
        /// Directory for stages.json and stages.txt.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare two stages.json files.
    Diff { a: PathBuf, b: PathBuf },
    /// Write the bundled reference curves as CSV.
    Fixtures {
        #[arg(long)]
        out: PathBuf,
    },
}

fn run(cli: Cli) -> anyhow::Result<u8> {
    let mut stdout = io::stdout().lock();
    match cli.command {
        Command::Validate { dump } => cmd_validate(&dump, &mut stdout),
        Command::Synth { config, out, seed } => cmd_synth(config.as_deref(), &out, seed),
        Command::Run {
            dump,
            out,
            train_config,
            params,
            seed,
        } => {
            let opts = RunOptions {
                train_config,
                params,
                seed,
            };
            let (code, map) = cmd_run(&dump, &out, &opts)?;
            print!("{}", map.render_strip());
            for d in &map.diagnostics {
                println!("{d}");
            }
            Ok(code)
        }
        Command::Segment {
            curves,
            chance,
            params,
            out,
        } => cmd_segment(
            &curves,
            chance,
            params.as_deref(),
            out.as_deref(),
            &mut stdout,
        ),
        Command::Diff { a, b } => cmd_diff(&a, &b, &mut stdout),
        Command::Fixtures { out } => cmd_fixtures(&out),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code_for(&err))
        }
    }
}
