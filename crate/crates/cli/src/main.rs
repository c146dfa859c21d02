//! `clusterfit`: simulate, fit and compare radial emissivity estimates from
//! Poisson count images.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use clusterfit_core::Error;

#[derive(Debug, Parser)]
#[command(name = "clusterfit", version, about = "Sparse Poisson deprojection of cluster emission profiles")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
pub struct Global {
    /// TOML run configuration; every key is optional.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Seed for every random stream (overrides the config seeds).
    #[arg(long, global = true, value_name = "U64")]
    seed: Option<u64>,
    /// Worker threads; defaults to the number of cores.
    #[arg(long, global = true, env = "CLUSTERFIT_THREADS", value_name = "N")]
    threads: Option<usize>,
    /// Output directory, created when missing.
    #[arg(long, global = true, value_name = "DIR", default_value = ".")]
    out: PathBuf,
}

#[derive(Debug, Args)]
pub struct Penalties {
    /// Dictionary penalty; QUT when absent.
    #[arg(long, requires = "lambda2")]
    lambda1: Option<f64>,
    /// Point-source penalty; QUT when absent.
    #[arg(long, requires = "lambda1")]
    lambda2: Option<f64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Draw a Poisson image of the configured scenario.
    Simulate {
        /// Replicate index whose image is drawn.
        #[arg(long, default_value_t = 0)]
        replicate: u64,
        /// Write the image as CSV instead of the binary format.
        #[arg(long)]
        csv: bool,
    },
    /// Penalty levels by the quantile universal threshold.
    Qut {
        #[arg(long, value_name = "PATH")]
        image: PathBuf,
    },
    /// Penalized fit of the emissivity profile and point sources.
    Fit {
        #[arg(long, value_name = "PATH")]
        image: PathBuf,
        #[command(flatten)]
        penalties: Penalties,
    },
    /// Onion-peeling profile.
    Baseline {
        #[arg(long, value_name = "PATH")]
        image: PathBuf,
        /// Image whose non-zero pixels are excluded.
        #[arg(long, value_name = "PATH")]
        mask: Option<PathBuf>,
        /// Source list whose neighbourhoods are excluded.
        #[arg(long, value_name = "PATH")]
        sources: Option<PathBuf>,
        /// Radius of the source masks; the scenario setting when absent.
        #[arg(long)]
        mask_radius: Option<f64>,
    },
    /// Monte Carlo comparison of both estimators.
    Compare,
    /// Block-bootstrap bands of the log-profile.
    Bootstrap {
        #[arg(long, value_name = "PATH")]
        image: PathBuf,
        #[command(flatten)]
        penalties: Penalties,
    },
    /// Render CSV outputs as SVG.
    Plot {
        /// Profile, bands or comparison CSV files.
        #[arg(required = true, value_name = "CSV")]
        inputs: Vec<PathBuf>,
        /// File name of the profile plot.
        #[arg(long, default_value = "profile.svg")]
        name: String,
    },
}

fn fail(class: &str, code: u8, message: &str) -> ExitCode {
    let line = message.lines().map(str::trim).filter(|l| !l.is_empty()).collect::<Vec<_>>().join(" ");
    eprintln!("error[{class}]: {line}");
    ExitCode::from(code)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            let text = e.to_string();
            let first = text.lines().next().unwrap_or("").trim_start_matches("error: ");
            return fail("usage", 1, first);
        }
    };
    match commands::run(&cli.global, cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let (class, code) = classify(&e);
            fail(class, code, &e.to_string())
        }
    }
}

/// Error class and exit code: 2 for bad inputs, 3 for numerical failures.
fn classify(e: &Error) -> (&'static str, u8) {
    if e.is_numerical() {
        ("numerical", 3)
    } else {
        ("validation", 2)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        assert_eq!(classify(&Error::Singular(3)), ("numerical", 3));
        assert_eq!(classify(&Error::DegenerateNull { dropped: 30, total: 100 }), ("numerical", 3));
        assert_eq!(classify(&Error::Config("x".into())), ("validation", 2));
        assert_eq!(classify(&Error::NotInDomain), ("validation", 2));
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
