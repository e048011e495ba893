//! Argument parsing and dispatch for the `ddf` binary.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ddf_core::mixture::{Execution, DEFAULT_SEED};

use crate::checks::{oracle_check, CheckSettings};
use crate::commands::{self, FuseMode, FuseRequest, McSettings, SimRequest, SweepRequest};
use crate::error::{Error, Result, EXIT_USAGE};

#[derive(Debug, Parser)]
#[command(name = "ddf", version, about = "Decentralized Bayesian data fusion: fusion demos, search simulation and oracle checks")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Master seed [default: a fixed constant; scenario files carry their own]
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// Disable the thread pool
    #[arg(long, global = true)]
    pub sequential: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fuse two pdf files with a GM approximation and compare against a grid oracle
    FuseDemo(FuseArgs),
    /// Fuse two pdf files with a GM approximation only
    GmFuse(FuseArgs),
    /// Run a search scenario and write its report directory
    SearchSim(SimArgs),
    /// Sweep the region weight of factorized and whole-joint WEP fusion
    OmegaSweep(SweepArgs),
    /// Run every invariant suite against a fixture directory
    OracleCheck(CheckArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Wep,
    Exact,
}

#[derive(Debug, Args)]
pub struct FuseArgs {
    pub p_i: PathBuf,
    pub p_j: PathBuf,
    #[arg(long, value_enum, default_value_t = ModeArg::Wep)]
    pub mode: ModeArg,
    /// Common-information pdf (exact mode)
    #[arg(long)]
    pub common: Option<PathBuf>,
    /// WEP weight [default: minimax on the oracle grid]
    #[arg(long)]
    pub omega: Option<f64>,
    /// Importance samples per component
    #[arg(long, default_value_t = 2000)]
    pub samples: usize,
    /// Proposal variance [default: (width / 4)^2 of the covering box]
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Oracle cells per axis
    #[arg(long, default_value_t = 200)]
    pub grid: usize,
}

#[derive(Debug, Args)]
pub struct SimArgs {
    pub scenario: PathBuf,
    /// Cells per axis of each region grid [default: from the scenario]
    #[arg(long)]
    pub grid: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    pub scenario: PathBuf,
    /// Evenly spaced region weights in [0, 1]
    #[arg(long, default_value_t = 11)]
    pub points: usize,
    /// Cells per axis of each region grid [default: from the scenario]
    #[arg(long)]
    pub grid: Option<usize>,
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    #[arg(default_value = "fixtures")]
    pub fixtures: PathBuf,
    /// Importance samples per component
    #[arg(long, default_value_t = 2000)]
    pub samples: usize,
    /// Oracle cells per axis
    #[arg(long, default_value_t = 200)]
    pub grid: usize,
}

fn execution(g: &GlobalArgs) -> Execution {
    if g.sequential {
        Execution::Sequential
    } else {
        Execution::Parallel
    }
}

fn fuse_request(g: &GlobalArgs, a: FuseArgs) -> FuseRequest {
    FuseRequest {
        p_i: a.p_i,
        p_j: a.p_j,
        common: a.common,
        mode: match a.mode {
            ModeArg::Wep => FuseMode::Wep,
            ModeArg::Exact => FuseMode::Exact,
        },
        omega: a.omega,
        grid: a.grid,
        mc: McSettings { samples: a.samples, alpha: a.alpha, seed: g.seed.unwrap_or(DEFAULT_SEED), execution: execution(g) },
    }
}

pub fn dispatch(cli: Cli) -> Result<()> {
    let g = cli.global;
    match cli.command {
        Command::FuseDemo(a) => {
            let r = commands::fuse_demo(&fuse_request(&g, a), &g.out)?;
            println!("kld {:.6e} nats ({} components, omega {:?})", r.kld, r.stats.components, r.stats.omega);
        }
        Command::GmFuse(a) => {
            let r = commands::gm_fuse(&fuse_request(&g, a), &g.out)?;
            println!("{} components, {} pruned, {} low-ESS", r.stats.components, r.stats.pruned, r.stats.low_ess);
        }
        Command::SearchSim(a) => {
            let req = SimRequest { scenario: a.scenario, seed: g.seed, grid: a.grid, execution: execution(&g) };
            let s = commands::search_sim(&req, &g.out)?;
            println!("{} steps, {} messages, {} of {} whole-joint cells sent", s.steps, s.messages, s.payload_cells, s.whole_joint_cells);
            if let Some(k) = &s.final_kld_to_oracle {
                println!("final KLD to oracle: {k:?}");
            }
        }
        Command::OmegaSweep(a) => {
            let req = SweepRequest { scenario: a.scenario, points: a.points, seed: g.seed, grid: a.grid, execution: execution(&g) };
            let s = commands::omega_sweep(&req, &g.out)?;
            println!("minimax: omega_R {:.3}, loss {:.6}", s.minimax.omega_r, s.minimax.kld_total);
            for (label, best) in [("factorized", s.best_factorized), ("whole-joint", s.best_whole_joint)] {
                if let Some(b) = best {
                    println!("best {label}: omega_R {:.3}, loss {:.6}", b.omega_r, b.kld_total);
                }
            }
        }
        Command::OracleCheck(a) => {
            let settings = CheckSettings {
                seed: g.seed.unwrap_or(DEFAULT_SEED),
                samples: a.samples,
                grid: a.grid,
                execution: execution(&g),
            };
            let report = oracle_check(&a.fixtures, &settings, &g.out)?;
            for s in &report.suites {
                println!("{} {}: {}", if s.passed { "PASS" } else { "FAIL" }, s.name, s.detail);
            }
            let failed: Vec<&str> = report.failures().map(|s| s.name.as_str()).collect();
            if !failed.is_empty() {
                return Err(Error::Check(failed.join(", ")));
            }
        }
    }
    Ok(())
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { 0 };
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
