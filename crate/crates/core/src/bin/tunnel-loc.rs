use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use tunnel_loc::bounds::{bounds_sweep, write_sweep_csv, SweepGrid};
use tunnel_loc::harness::{run_scenario, write_results, MetricsReport, Mode, RunConfig};
use tunnel_loc::{selftest, Error, Result};

#[derive(Parser)]
#[command(name = "tunnel-loc", version, about = "Single-anchor near-field tunnel localisation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Monte Carlo simulation.
    Sim {
        #[command(subcommand)]
        action: SimAction,
    },
    /// Array-size bound tables.
    Bounds {
        #[command(subcommand)]
        action: BoundsAction,
    },
    /// Run the acceptance checks.
    Selftest {
        /// Comma-separated criterion numbers; all when omitted.
        #[arg(long, value_delimiter = ',')]
        only: Vec<u32>,
    },
}

#[derive(Subcommand)]
enum SimAction {
    Run(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// TOML run configuration; built-in defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// L, N@<q> or N.
    #[arg(long)]
    mode: Option<Mode>,
    #[arg(long)]
    no_rrm: bool,
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    #[arg(long)]
    epochs: Option<usize>,
    /// Directory for CSV and JSON results.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum BoundsAction {
    Sweep(SweepArgs),
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long, value_delimiter = ',')]
    ranges: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    walls: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    laterals: Option<Vec<f64>>,
    /// Maximum phase errors in radians.
    #[arg(long, value_delimiter = ',')]
    eps: Option<Vec<f64>>,
    /// CSV file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn print_metrics(label: &str, m: &MetricsReport) {
    println!(
        "{label:<10} rmse {:>7.3} m  mae {:>7.3} m  y-mae {:>7.3} m  availability {:.2}",
        m.rmse_2d, m.mae_2d, m.y_mae, m.availability
    );
}

fn sim_run(args: RunArgs) -> Result<()> {
    let mut cfg = match &args.config {
        Some(path) => RunConfig::from_file(path)?,
        None => RunConfig::default(),
    };
    if let Some(mode) = args.mode {
        cfg.mode = mode;
    }
    if args.no_rrm {
        cfg.rrm_enabled = false;
    }
    if let Some(seeds) = args.seeds {
        cfg.seeds = seeds;
    }
    if args.epochs.is_some() {
        cfg.epochs = args.epochs;
    }
    if args.out.is_some() {
        cfg.out = args.out;
    }
    let out = run_scenario(&cfg)?;
    println!("mode {} markings {} seeds {}", cfg.mode, if cfg.rrm_enabled { "on" } else { "off" }, cfg.seeds.len());
    for s in &out.seeds {
        println!("seed {:>4}  tracker rmse {:>7.3} m  baseline rmse {:>7.3} m", s.seed, s.javelin.rmse_2d, s.baseline.rmse_2d);
    }
    print_metrics("tracker", &out.javelin);
    print_metrics("baseline", &out.baseline);
    if let Some(dir) = &cfg.out {
        write_results(&cfg, &out, dir)?;
        println!("results written to {}", dir.display());
    }
    Ok(())
}

fn sweep(args: SweepArgs) -> Result<()> {
    let mut grid = SweepGrid::default();
    if let Some(v) = args.ranges {
        grid.ranges = v;
    }
    if let Some(v) = args.walls {
        grid.wall_distances = v;
    }
    if let Some(v) = args.laterals {
        grid.ue_laterals = v;
    }
    if let Some(v) = args.eps {
        grid.max_phase_errors = v;
    }
    let rows = bounds_sweep(&grid)?;
    match args.out {
        Some(path) => write_sweep_csv(&rows, std::fs::File::create(path)?),
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            write_sweep_csv(&rows, &mut lock)?;
            lock.flush().map_err(Error::from)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Sim { action: SimAction::Run(args) } => sim_run(args),
        Command::Bounds { action: BoundsAction::Sweep(args) } => sweep(args),
        Command::Selftest { only } => {
            let checks = selftest::run(&only);
            let failed = checks.iter().filter(|c| !c.pass).count();
            println!("{} of {} criteria passed", checks.len() - failed, checks.len());
            return if failed == 0 { ExitCode::SUCCESS } else { ExitCode::FAILURE };
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
