use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use cornerflow_cli::{commands, failures, Check, CliError, Overrides, RunConfig};

#[derive(Parser)]
#[command(
    name = "cornerflow",
    version,
    about = "Green-function, kernel and vortex-transport experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Subcommand)]
enum Command {
    /// Compare the image-series Green function with the eigenfunction oracle.
    GreenValidate,
    /// Shell-increment decay of the combined velocity kernel.
    KernelDecay,
    /// Velocity ratios |u_j / x_j| on the cone fan near the corner.
    RatioSweep,
    /// Particle simulation and the single-exponential growth bound.
    SimulateGrowth,
}

#[derive(Args)]
struct Common {
    /// `key = value` configuration file; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// zero, sinpatch or ramppatch.
    #[arg(long, global = true)]
    preset: Option<String>,
    /// Particle mesh spacing, a power of two.
    #[arg(long, global = true)]
    h: Option<f64>,
    #[arg(long, global = true)]
    dt: Option<f64>,
    /// Final time.
    #[arg(long = "T", global = true)]
    t_end: Option<f64>,
    /// Cone slope, greater than 1.
    #[arg(long, global = true)]
    a: Option<f64>,
}

fn run(cli: &Cli) -> Result<Vec<Check>, CliError> {
    let c = &cli.common;
    let overrides = Overrides {
        out_dir: c.out_dir.clone(),
        seed: c.seed,
        preset: c.preset.clone(),
        h: c.h,
        dt: c.dt,
        t_end: c.t_end,
        a: c.a,
    };
    let cfg = RunConfig::load(c.config.as_deref(), &overrides)?;
    let checks = match cli.command {
        Command::GreenValidate => {
            let o = commands::green_validate(&cfg)?;
            println!("wrote {}", o.csv.display());
            o.checks
        }
        Command::KernelDecay => {
            let o = commands::kernel_decay(&cfg)?;
            println!("wrote {}", o.csv.display());
            o.checks
        }
        Command::RatioSweep => {
            let o = commands::ratio_sweep(&cfg)?;
            o.files
                .iter()
                .for_each(|f| println!("wrote {}", f.display()));
            o.checks
        }
        Command::SimulateGrowth => {
            let o = commands::simulate_growth(&cfg)?;
            o.files
                .iter()
                .for_each(|f| println!("wrote {}", f.display()));
            o.checks
        }
    };
    Ok(checks)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(checks) => {
            for c in &checks {
                println!(
                    "{} {}: {}",
                    c.criterion,
                    if c.passed { "ok" } else { "FAILED" },
                    c.detail
                );
            }
            let failed = failures(&checks);
            if failed.is_empty() {
                ExitCode::SUCCESS
            } else {
                for c in failed {
                    eprintln!("criterion {} violated: {}", c.criterion, c.detail);
                }
                ExitCode::from(2)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
