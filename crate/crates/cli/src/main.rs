//! `vfcam`: design, simulate and reconstruct Voronoi-Fresnel lensless
//! cameras from a JSON config.

// `!(x > 0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod bundle;
mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{BoundaryArg, Global, Layout};
use error::CliError;

#[derive(Parser)]
#[command(
    name = "vfcam",
    version,
    about = "Voronoi-Fresnel lensless camera toolkit"
)]
struct Cli {
    /// Worker threads (defaults to all cores)
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Seed for layouts and noise
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Suppress progress messages
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Optimize (or lay out) K cells and write a design bundle
    Design {
        config: PathBuf,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        maxiter: Option<usize>,
        #[arg(long, value_enum, default_value_t = Layout::Optimized)]
        layout: Layout,
        #[arg(long)]
        out: PathBuf,
    },
    /// Sweep K, fit the MTF volume curve and keep the best design
    Sweep {
        config: PathBuf,
        /// Comma-separated K values; defaults to `sweep.k_values`
        #[arg(long, value_delimiter = ',')]
        k_list: Option<Vec<usize>>,
        #[arg(long)]
        restarts: Option<usize>,
        #[arg(long)]
        maxiter: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// PSFs and MTF volume of a design bundle
    Mtf {
        design: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Simulate a sensor capture of a scene
    Simulate {
        design: PathBuf,
        scene: PathBuf,
        /// Target SNR in dB; noise-free when omitted
        #[arg(long)]
        noise_db: Option<f64>,
        /// Gamma to undo when reading PNG scenes
        #[arg(long, default_value_t = 2.2)]
        gamma: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// ADMM total-variation reconstruction of a capture
    Reconstruct {
        design: PathBuf,
        raw: PathBuf,
        #[arg(long)]
        mu: Option<f64>,
        #[arg(long)]
        rho: Option<f64>,
        #[arg(long)]
        rho2: Option<f64>,
        #[arg(long)]
        iters: Option<usize>,
        #[arg(long, value_enum)]
        boundary: Option<BoundaryArg>,
        /// Edge padding in pixels for circular boundaries
        #[arg(long)]
        taper: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Field of view, resolution and fabrication figures of a design
    Analyze {
        design: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::config("`--threads` must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::other(format!("thread pool: {e}")))?;
    }
    let g = Global {
        seed: cli.seed,
        quiet: cli.quiet,
    };
    match cli.command {
        Command::Design {
            config,
            k,
            maxiter,
            layout,
            out,
        } => commands::design(
            &commands::DesignArgs {
                config,
                k,
                maxiter,
                layout,
                out,
            },
            g,
        ),
        Command::Sweep {
            config,
            k_list,
            restarts,
            maxiter,
            out,
        } => commands::sweep(
            &commands::SweepArgs {
                config,
                k_list,
                restarts,
                maxiter,
                out,
            },
            g,
        ),
        Command::Mtf { design, out } => commands::mtf_cmd(&design, &out, g),
        Command::Simulate {
            design,
            scene,
            noise_db,
            gamma,
            out,
        } => commands::simulate(
            &commands::SimulateArgs {
                design,
                scene,
                noise_db,
                gamma,
                out,
            },
            g,
        ),
        Command::Reconstruct {
            design,
            raw,
            mu,
            rho,
            rho2,
            iters,
            boundary,
            taper,
            out,
        } => commands::reconstruct(
            &commands::ReconstructArgs {
                design,
                raw,
                mu,
                rho,
                rho2,
                iters,
                boundary,
                taper,
                out,
            },
            g,
        ),
        Command::Analyze { design, out } => commands::analyze(&design, &out, g),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(2)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code)
        }
    }
}
