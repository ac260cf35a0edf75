use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use cqi_beam::harness::{
    convergence_trace, empirical_beta_check, run_experiment, ExperimentConfig, SphereField,
};
use cqi_beam::Error;

#[derive(Parser)]
#[command(name = "cqi-beam", version, about = "Beamforming estimation from PMI/CQI feedback")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a Monte-Carlo precision experiment and write the averaged curves as CSV.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Override the master seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the output path.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check the sphere statistics of the matching error empirically.
    Betacheck {
        #[arg(long)]
        antennas: usize,
        #[arg(long)]
        samples: usize,
        #[arg(long, default_value_t = 8)]
        ports: usize,
        #[arg(long, default_value_t = 16)]
        codebook_size: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Draw complex instead of real vectors.
        #[arg(long)]
        complex: bool,
    },
    /// Print the per-iteration objective of one estimator run.
    Convergence {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Simulate { config, seed, out } => {
            let mut cfg = ExperimentConfig::from_file(&config).map_err(config_error)?;
            if let Some(s) = seed {
                cfg.master_seed = s;
            }
            if let Some(o) = out {
                cfg.output_path = o.to_string_lossy().into_owned();
            }
            let summary = run_experiment(&cfg)?;
            for c in &summary.curves {
                if let (Some(last), Some(se)) = (c.precision.last(), c.stderr.last()) {
                    eprintln!("{:<9} round {:>4}: precision {last:.4} ± {se:.4}", c.method, c.precision.len());
                }
            }
            eprintln!("wrote {}", cfg.output_path);
        }
        Command::Betacheck { antennas, samples, ports, codebook_size, seed, complex } => {
            if samples < 1000 {
                return Err(Error::Config(format!("--samples must be at least 1000, got {samples}")));
            }
            let field = if complex { SphereField::Complex } else { SphereField::Real };
            let r = empirical_beta_check(antennas, ports, codebook_size, samples, seed, field)
                .map_err(|e| Error::Config(e.to_string()))?;
            println!("{}", r.summary());
            println!("mean_z={:.3} variance_z={:.3}", r.mean_z(r.theoretical_mean), r.variance_z(r.theoretical_variance));
        }
        Command::Convergence { config, out } => {
            let cfg = ExperimentConfig::from_file(&config).map_err(config_error)?;
            let trace = convergence_trace(&cfg)?.trace_csv();
            match out {
                Some(p) => std::fs::write(p, trace)?,
                None => print!("{trace}"),
            }
        }
    }
    Ok(())
}

/// Unreadable config files are I/O failures; everything else about them is a
/// configuration error.
fn config_error(e: Error) -> Error {
    match e {
        Error::Io(_) | Error::Config(_) => e,
        other => Error::Config(other.to_string()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
