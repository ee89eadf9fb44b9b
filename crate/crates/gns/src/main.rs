use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use gns::commands::{self, SimulateOptions, TwinOptions, VerifyOptions, EXIT_USAGE};

#[derive(Parser)]
#[command(name = "gns", version, about = "Spectral Galerkin Navier-Stokes solver with estimate verification")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate a scenario and write trajectory.csv, states.csv and manifest.json.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
        /// Skip the full-state dump.
        #[arg(long)]
        no_states: bool,
        /// Also export the final velocity on an M³ grid.
        #[arg(long, value_name = "M")]
        export_grid: Option<usize>,
    },
    /// Check a recorded trajectory against the energy and interpolation estimates.
    Verify {
        #[arg(long)]
        trajectory: PathBuf,
        #[arg(long)]
        config: PathBuf,
        /// State dump; defaults to states.csv next to the trajectory.
        #[arg(long)]
        states: Option<PathBuf>,
        /// Where report.json goes; defaults to the trajectory's directory.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Run two solutions from nearby data and check the uniqueness envelope.
    Twin {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        delta: f64,
        /// Perturbation seed; defaults to the config's `seed`.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
    /// Repeat a scenario at increasing cutoffs and tabulate low-mode differences.
    Refine {
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated, strictly increasing.
        #[arg(long)]
        cutoffs: String,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
    /// Print the mode table as CSV.
    BasisInfo {
        #[arg(long)]
        cutoff: u32,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the nonzero triad coefficients as CSV.
    TensorDump {
        #[arg(long)]
        cutoff: u32,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write the closed-form Stokes trajectory of a scenario.
    Oracle {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
        #[arg(long)]
        no_states: bool,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE as u8 } else { 0 });
        }
    };
    let result = match &cli.command {
        Command::Simulate {
            config,
            out_dir,
            no_states,
            export_grid,
        } => commands::simulate(
            config,
            out_dir,
            &SimulateOptions {
                states: !no_states,
                export_grid: *export_grid,
            },
        ),
        Command::Verify {
            trajectory,
            config,
            states,
            out_dir,
        } => commands::verify(
            trajectory,
            config,
            &VerifyOptions {
                states: states.clone(),
                out_dir: out_dir.clone(),
            },
        ),
        Command::Twin {
            config,
            delta,
            seed,
            out_dir,
        } => commands::twin(config, out_dir, &TwinOptions { delta: *delta, seed: *seed }),
        Command::Refine { config, cutoffs, out_dir } => {
            commands::parse_cutoffs(cutoffs).and_then(|c| commands::refine(config, out_dir, &c))
        }
        Command::BasisInfo { cutoff, out } => commands::basis_info(*cutoff, out.as_deref()),
        Command::TensorDump { cutoff, out } => commands::tensor_dump(*cutoff, out.as_deref()),
        Command::Oracle {
            config,
            out_dir,
            no_states,
        } => commands::oracle(config, out_dir, !no_states),
    };
    match result {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code as u8)
        }
    }
}
