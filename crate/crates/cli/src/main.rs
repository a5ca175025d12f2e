//! `impsched` command-line front end.

mod commands;
mod config;

use std::ffi::OsString;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand, ValueEnum};
use impsched::sched::PolicyKind;

/// Imprecise real-time scheduling on intermittently powered devices.
///
/// Every flag may also come from `--config FILE` (TOML or JSON); flags given
/// on the command line win. Exit status: 0 ok, 2 invalid input, 1 internal
/// error.
#[derive(Debug, Parser)]
#[command(name = "impsched", version)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Measure how predictable a harvesting trace is.
    Analyze(AnalyzeArgs),
    /// Generate a synthetic harvesting trace CSV.
    GenTrace(GenTraceArgs),
    /// Generate a synthetic workload JSON.
    GenWorkload(GenWorkloadArgs),
    /// Run one policy and write the schedule log and report.
    Simulate(SimulateArgs),
    /// Run several policies on the same inputs and tabulate the results.
    Compare(CompareArgs),
    /// Check the contrastive-loss gradient against finite differences.
    LossCheck(LossCheckArgs),
    /// Check cluster assignment and chi-squared scores against brute force.
    ClusterCheck(ClusterCheckArgs),
}

#[derive(Debug, Clone, Args)]
pub struct EventArgs {
    /// Harvest (J) within the window that counts as an event.
    #[arg(long, default_value_t = 1.0)]
    pub k: f64,
    /// Event window length in slots.
    #[arg(long, default_value_t = 1)]
    pub t: usize,
    /// Longest run length considered.
    #[arg(long, default_value_t = 20)]
    pub nmax: usize,
    /// Occurrences a run length needs before its estimate is trusted.
    #[arg(long, default_value_t = 30)]
    pub min_support: u64,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// Trace CSV with header `slot,joules`.
    #[arg(long)]
    pub trace: PathBuf,
    #[command(flatten)]
    pub event: EventArgs,
    /// Slot length in seconds.
    #[arg(long, default_value_t = 1.0)]
    pub slot_duration: f64,
    /// Print the profile as JSON.
    #[arg(long)]
    pub json: bool,
    /// Also write the profile JSON here.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Config file supplying defaults for any flag.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TraceKind {
    Bernoulli,
    Markov,
    Periodic,
    Constant,
}

#[derive(Debug, Args)]
pub struct GenTraceArgs {
    #[arg(long, value_enum)]
    pub model: TraceKind,
    #[arg(long, default_value_t = 1000)]
    pub slots: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Bernoulli on-probability.
    #[arg(long, default_value_t = 0.5)]
    pub p: f64,
    /// Markov probability of staying on.
    #[arg(long, default_value_t = 0.95)]
    pub stay_on: f64,
    /// Markov probability of staying off.
    #[arg(long, default_value_t = 0.95)]
    pub stay_off: f64,
    /// Periodic cycle length in slots.
    #[arg(long, default_value_t = 10)]
    pub period: usize,
    /// Periodic on-slots per cycle.
    #[arg(long, default_value_t = 5)]
    pub on_len: usize,
    /// Joules harvested in an on slot (every slot for `constant`).
    #[arg(long, default_value_t = 1.0)]
    pub joules: f64,
    #[arg(long, default_value_t = 1.0)]
    pub slot_duration: f64,
    /// Output CSV; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum UtilityKind {
    CrossAt,
    Increments,
    AllMandatory,
}

#[derive(Debug, Args)]
pub struct GenWorkloadArgs {
    #[arg(long, default_value_t = 10)]
    pub tasks: usize,
    /// Minimum inter-arrival time in slots.
    #[arg(long, default_value_t = 10)]
    pub period: u64,
    /// Relative deadline as a multiple of the period.
    #[arg(long, default_value_t = 1.5)]
    pub deadline_factor: f64,
    /// Extra random delay added to each arrival, in slots.
    #[arg(long, default_value_t = 0)]
    pub jitter: u64,
    #[arg(long, default_value_t = 4)]
    pub layers: usize,
    #[arg(long, default_value_t = 1)]
    pub units: usize,
    /// Slots per unit.
    #[arg(long, default_value_t = 1)]
    pub unit_cost: u32,
    /// Joules per slot of a unit.
    #[arg(long, default_value_t = 1.0)]
    pub unit_energy: f64,
    /// Utility threshold of every task.
    #[arg(long, default_value_t = 1.0)]
    pub ut: f64,
    #[arg(long, value_enum, default_value_t = UtilityKind::CrossAt)]
    pub utility: UtilityKind,
    /// Layer (1-based) at which `cross-at` reaches the threshold; random when omitted.
    #[arg(long)]
    pub cross_layer: Option<usize>,
    /// Largest per-layer gain for `increments`.
    #[arg(long, default_value_t = 0.5)]
    pub max_gain: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output JSON; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

/// Inputs and device parameters shared by `simulate` and `compare`.
#[derive(Debug, Clone, Args)]
pub struct SimArgs {
    /// Trace CSV with header `slot,joules`.
    #[arg(long)]
    pub trace: PathBuf,
    /// Workload JSON.
    #[arg(long)]
    pub workload: PathBuf,
    /// Cluster model JSON (one object, or one per layer) for feature payloads.
    #[arg(long)]
    pub models: Option<PathBuf>,
    /// ζ slack weight; 1 / longest relative deadline when omitted.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// ζ utility weight; 1 / largest threshold when omitted.
    #[arg(long)]
    pub beta: Option<f64>,
    /// Replace every task's utility threshold.
    #[arg(long)]
    pub ut: Option<f64>,
    /// Energy needed to run mandatory work (J).
    #[arg(long, default_value_t = 1.0)]
    pub eman: f64,
    /// Energy needed before optional work is allowed (J).
    #[arg(long, default_value_t = 3.0)]
    pub eopt: f64,
    /// Predictability factor; measured from the trace when omitted.
    #[arg(long, allow_negative_numbers = true)]
    pub eta: Option<f64>,
    /// Power (W) of units whose workload entry has no energy.
    #[arg(long, default_value_t = 1.0)]
    pub run_power: f64,
    /// Power (W) drawn every slot.
    #[arg(long, default_value_t = 0.0)]
    pub idle_power: f64,
    /// Storage capacity (J).
    #[arg(long, default_value_t = 10.0)]
    pub capacity: f64,
    #[arg(long, default_value_t = 0.0)]
    pub initial_charge: f64,
    /// Slots to simulate; the trace length when omitted.
    #[arg(long)]
    pub horizon: Option<u64>,
    /// Repeat the trace when it is shorter than the horizon.
    #[arg(long)]
    pub cycle: bool,
    #[arg(long, default_value_t = 1.0)]
    pub slot_duration: f64,
    /// Use the last N slots of harvest instead of stored charge for the gating test.
    #[arg(long)]
    pub harvest_window: Option<usize>,
    /// Energy-task period in slots (energy-edf, energy-zeta).
    #[arg(long)]
    pub energy_period: Option<u64>,
    /// Energy-task off-window length in slots.
    #[arg(long)]
    pub energy_off: Option<u64>,
    /// First off-window start slot.
    #[arg(long, default_value_t = 0)]
    pub energy_offset: u64,
    /// Event parameters used when η is measured from the trace.
    #[command(flatten)]
    pub event: EventArgs,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub sim: SimArgs,
    /// edf, edf-m, zeta, zeta-i, energy-edf or energy-zeta.
    #[arg(long, default_value = "zeta-i")]
    pub policy: PolicyKind,
    /// Report JSON path.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Schedule log CSV path.
    #[arg(long)]
    pub log: Option<PathBuf>,
    /// Print the report JSON instead of a summary.
    #[arg(long)]
    pub json: bool,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[command(flatten)]
    pub sim: SimArgs,
    /// Comma-separated policies.
    #[arg(long, value_delimiter = ',', default_value = "edf,edf-m,zeta,zeta-i")]
    pub policies: Vec<PolicyKind>,
    /// Worker threads; one per policy when omitted.
    #[arg(long)]
    pub threads: Option<usize>,
    /// Write the table as JSON rows.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Print JSON rows instead of a table.
    #[arg(long)]
    pub json: bool,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct LossCheckArgs {
    #[arg(long, default_value_t = 100)]
    pub batches: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Contrastive margin.
    #[arg(long, default_value_t = 1.0)]
    pub delta: f64,
    /// Largest acceptable relative error.
    #[arg(long, default_value_t = 1e-4)]
    pub tolerance: f64,
    #[arg(long)]
    pub json: bool,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ClusterCheckArgs {
    #[arg(long, default_value_t = 500)]
    pub instances: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Largest acceptable chi-squared error.
    #[arg(long, default_value_t = 1e-9)]
    pub tolerance: f64,
    #[arg(long)]
    pub json: bool,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

fn parse(args: Vec<OsString>) -> Result<Cli, ExitCode> {
    let cmd = Cli::command();
    let args = match config::expand(&cmd, args) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e:#}");
            return Err(ExitCode::from(2));
        }
    };
    let matches = cmd.try_get_matches_from(args).map_err(|e| {
        let _ = e.print();
        ExitCode::from(e.exit_code() as u8)
    })?;
    Cli::from_arg_matches(&matches).map_err(|e| {
        let _ = e.print();
        ExitCode::from(2)
    })
}

fn main() -> ExitCode {
    let cli = match parse(std::env::args_os().collect()) {
        Ok(c) => c,
        Err(code) => return code,
    };
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(commands::exit_code(&e))
        }
    }
}
