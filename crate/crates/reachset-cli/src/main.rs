//! Command-line front end: builds boundary samples and oracle clouds,
//! checks Pontryagin conditions on stored paths, and sweeps support
//! directions for the equivalence re-tagging.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use reachset_core::reach::Mode;

mod config;
mod emit;
mod run;

use config::{parse_config, RunConfig};
use run::Failure;

#[derive(Parser)]
#[command(
    name = "reachset",
    version,
    about = "Sampled boundaries of exact-time reachability sets for curvature-bounded paths"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

/// Options shared by every subcommand; flags override the config file.
#[derive(Args)]
struct Common {
    /// JSON run configuration (bare, or a metadata sidecar from a
    /// previous run).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Arrival time override.
    #[arg(long = "t-f", value_name = "SECONDS")]
    t_f: Option<f64>,
    /// Oracle seed override.
    #[arg(long)]
    seed: Option<u64>,
    /// Mode override: 2d-dir, 2d-nodir, 3d-dir or 3d-nodir.
    #[arg(long)]
    mode: Option<String>,
    /// Primary output file override.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Construct a sampled boundary and write it as CSV plus metadata.
    Boundary(Common),
    /// Sample random admissible endpoints and write them as CSV.
    Oracle(Common),
    /// Check the Pontryagin conditions on a stored planar path.
    PmpCheck(Common),
    /// Sweep support directions and verify the equivalence re-tagging.
    Equiv(Common),
    /// Print the tool version.
    Version,
}

fn materialize(common: &Common) -> Result<RunConfig, Failure> {
    let mut cfg = match &common.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
            parse_config(&text).map_err(Failure::Config)?
        }
        None => {
            let (Some(mode), Some(t_f)) = (&common.mode, common.t_f) else {
                return Err(Failure::Config(
                    "pass --config, or both --mode and --t-f".into(),
                ));
            };
            RunConfig::new(parse_mode(mode)?, t_f)
        }
    };
    if let Some(t_f) = common.t_f {
        cfg.t_f = t_f;
    }
    if let Some(seed) = common.seed {
        cfg.oracle.seed = seed;
    }
    if let Some(mode) = &common.mode {
        cfg.mode = parse_mode(mode)?;
    }
    if let Some(out) = &common.out {
        cfg.out = Some(out.display().to_string());
    }
    Ok(cfg)
}

fn parse_mode(s: &str) -> Result<Mode, Failure> {
    s.parse()
        .map_err(|_| Failure::Config(format!("unknown mode `{s}`")))
}

fn dispatch(cmd: &Cmd) -> Result<(), Failure> {
    match cmd {
        Cmd::Boundary(c) => run::cmd_boundary(&materialize(c)?, c.out.as_deref()),
        Cmd::Oracle(c) => run::cmd_oracle(&materialize(c)?, c.out.as_deref()),
        Cmd::PmpCheck(c) => run::cmd_pmp_check(&materialize(c)?, c.out.as_deref()),
        Cmd::Equiv(c) => run::cmd_equiv(&materialize(c)?, c.out.as_deref()),
        Cmd::Version => {
            println!("reachset {}", emit::VERSION);
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli.cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("reachset: {}", f.message());
            ExitCode::from(f.exit_code())
        }
    }
}
