//! Command-line interface: allocation, simulation, comparison, sweeps, and
//! trace generation.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::alloc::{AllocError, AllocationConfig, AllocationPlan};
use crate::forecast::ForecasterSpec;
use crate::graph::{GraphError, ServiceGraph};
use crate::llp::LlpProfile;
use crate::mode::OctModel;
use crate::scaling::HpaConfig;
use crate::sim::{
    run_simulation, synthesize_trace, Policy, SimConfig, SimError, SimReport, TraceKind,
    TraceParams, WorkloadTrace,
};
use crate::update::{UpdateError, UpdatePolicy};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("UsageError: {0}")]
    Usage(String),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Alloc(#[from] AllocError),
    #[error(transparent)]
    Update(#[from] UpdateError),
    #[error("IoError: {0}")]
    Io(#[from] std::io::Error),
    #[error("JsonError: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Parser)]
#[command(
    name = "lsram",
    version,
    about = "End-to-end SLO resource allocation and cluster simulation"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compute an allocation plan for a service graph
    Allocate(AllocateArgs),
    /// Simulate one scaling policy over a workload trace
    Simulate(SimulateArgs),
    /// Run several policies over the same trace and compare them
    Compare(CompareArgs),
    /// Sweep one configuration parameter across values, in parallel
    Sweep(SweepArgs),
    /// Generate a synthetic workload trace CSV
    GenTrace(GenTraceArgs),
}

#[derive(Debug, Args)]
pub struct AllocateArgs {
    /// Service graph JSON
    #[arg(long)]
    pub graph: PathBuf,
    /// Profile overrides JSON (array of service profiles)
    #[arg(long)]
    pub profiles: Option<PathBuf>,
    /// Blocks the SLO is divided into
    #[arg(long, default_value_t = 1000)]
    pub blocks: u32,
    /// Blocks preallocated to every service before the descent
    #[arg(long, default_value_t = 10)]
    pub prealloc: u32,
    /// Write the plan here instead of stdout
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Flags shared by every simulating subcommand.
#[derive(Debug, Clone, Args)]
pub struct SimFlags {
    /// Service graph JSON
    #[arg(long)]
    pub graph: PathBuf,
    /// Profile overrides JSON (array of service profiles)
    #[arg(long)]
    pub profiles: Option<PathBuf>,
    /// Workload trace CSV
    #[arg(long)]
    pub trace: PathBuf,
    /// Forecaster: naive | ma:<window> | des | des:<alpha>,<beta>
    #[arg(long, default_value = "des:0.5,0.3")]
    pub forecaster: String,
    /// Blocks the SLO is divided into
    #[arg(long, default_value_t = 1000)]
    pub blocks: u32,
    /// Seed recorded in reports and used by anything stochastic
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Scale-up delay in control intervals
    #[arg(long, default_value_t = 2)]
    pub startup_delay: u32,
    /// Scale-down stabilization window, seconds
    #[arg(long, default_value_t = 60.0)]
    pub stabilization: f64,
    /// Disable scale-down entirely
    #[arg(long)]
    pub no_scale_down: bool,
    /// Oscillation window length, samples
    #[arg(long, default_value_t = 60)]
    pub osc_window: usize,
    /// Quiet seconds required to leave HighVolatility
    #[arg(long, default_value_t = 30.0)]
    pub cooldown: f64,
    /// Oscillation tolerance scale factor
    #[arg(long, default_value_t = 4.0)]
    pub oct_kappa: f64,
    /// Lower clamp on the oscillation threshold
    #[arg(long, default_value_t = 0.05)]
    pub oct_min: f64,
    /// Upper clamp on the oscillation threshold
    #[arg(long, default_value_t = 0.8)]
    pub oct_max: f64,
    /// Reallocation period, seconds
    #[arg(long, default_value_t = 300.0)]
    pub realloc_period: f64,
    /// Extra capacity fraction above the window peak in HighVolatility
    #[arg(long, default_value_t = 0.2)]
    pub headroom: f64,
    /// Latency penalty multiple reported by saturated services
    #[arg(long, default_value_t = 10.0)]
    pub penalty: f64,
    /// Inject an environment change at this time (repeatable)
    #[arg(long = "env-change-at", value_name = "SECONDS")]
    pub env_change_at: Vec<f64>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub flags: SimFlags,
    /// Scaling policy: lsram | prop | hpa | hpa:<low>,<high>
    #[arg(long, default_value = "lsram")]
    pub policy: String,
    /// Write the report JSON here instead of stdout
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Write per-tick records as CSV
    #[arg(long)]
    pub ticks_csv: Option<PathBuf>,
    /// Write the latency CDF as CSV
    #[arg(long)]
    pub cdf_csv: Option<PathBuf>,
    /// Write scaling decisions as JSON lines
    #[arg(long)]
    pub decision_log: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[command(flatten)]
    pub flags: SimFlags,
    /// Policy to run (repeat at least twice)
    #[arg(long = "policy")]
    pub policies: Vec<String>,
    /// Write the comparison JSON here as well
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub flags: SimFlags,
    /// Scaling policy: lsram | prop | hpa | hpa:<low>,<high>
    #[arg(long, default_value = "lsram")]
    pub policy: String,
    /// Parameter sweep, e.g. blocks=500,1000,2000 or oct-kappa=2,4,8
    #[arg(long)]
    pub param: String,
    /// Directory for per-run reports and the index
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Worker threads (default: one per value, capped at 8)
    #[arg(long)]
    pub workers: Option<usize>,
}

#[derive(Debug, Args)]
pub struct GenTraceArgs {
    /// Trace shape: steady | diurnal | bursty | high-volatility
    #[arg(long)]
    pub kind: String,
    /// Trace length in one-second ticks
    #[arg(long)]
    pub duration: u64,
    /// Comma-separated entry-point ids
    #[arg(long)]
    pub entries: Option<String>,
    /// Take entry-point ids from this graph JSON instead
    #[arg(long)]
    pub graph: Option<PathBuf>,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Mean load level, rps
    #[arg(long)]
    pub base: Option<f64>,
    /// Diurnal wave amplitude, rps
    #[arg(long)]
    pub amplitude: Option<f64>,
    /// Pattern period, seconds
    #[arg(long)]
    pub period: Option<f64>,
    /// Multiplicative noise fraction
    #[arg(long)]
    pub noise: Option<f64>,
    /// Guaranteed peak-to-trough swing for high-volatility traces, rps
    #[arg(long)]
    pub swing: Option<f64>,
    /// Write the CSV here instead of stdout
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// One policy's row in a comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicySummary {
    pub policy: String,
    pub total_cost: f64,
    pub violations: u64,
    pub violation_rate: f64,
    pub latency_p50_ms: f64,
    pub latency_p99_ms: f64,
    pub latency_max_ms: f64,
    pub saturation_events: u64,
    pub mode_transitions: usize,
    pub reallocations: u64,
}

impl PolicySummary {
    fn from_report(r: &SimReport) -> Self {
        PolicySummary {
            policy: r.policy.clone(),
            total_cost: r.total_cost,
            violations: r.violations,
            violation_rate: r.violation_rate,
            latency_p50_ms: r.latency_p50_ms,
            latency_p99_ms: r.latency_p99_ms,
            latency_max_ms: r.latency_max_ms,
            saturation_events: r.saturation_events,
            mode_transitions: r.mode_transitions.len(),
            reallocations: r.reallocations,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareReport {
    pub seed: u64,
    pub ticks: u64,
    pub policies: Vec<PolicySummary>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepIndexRun {
    pub value: String,
    pub file: String,
    pub total_cost: f64,
    pub violation_rate: f64,
    pub latency_p99_ms: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepIndex {
    pub param: String,
    pub policy: String,
    pub runs: Vec<SweepIndexRun>,
}

pub fn parse_policy(s: &str) -> Result<Policy, CliError> {
    match s {
        "lsram" => Ok(Policy::Lsram),
        "prop" => Ok(Policy::Proportional),
        "hpa" => Ok(Policy::Hpa {
            config: HpaConfig::default(),
        }),
        other => {
            if let Some(rest) = other.strip_prefix("hpa:") {
                let parts: Vec<&str> = rest.split(',').collect();
                if parts.len() == 2 {
                    if let (Ok(low), Ok(high)) = (parts[0].parse(), parts[1].parse()) {
                        return Ok(Policy::Hpa {
                            config: HpaConfig {
                                low,
                                high,
                                ..HpaConfig::default()
                            },
                        });
                    }
                }
                return Err(CliError::Usage(format!(
                    "hpa policy takes `hpa:<low>,<high>`, got `{other}`"
                )));
            }
            Err(CliError::Usage(format!(
                "policy must be lsram, prop, hpa or hpa:<low>,<high>, got `{other}`"
            )))
        }
    }
}

pub fn parse_forecaster(s: &str) -> Result<ForecasterSpec, CliError> {
    match s {
        "naive" => Ok(ForecasterSpec::Naive),
        "des" => Ok(ForecasterSpec::default()),
        other => {
            if let Some(rest) = other.strip_prefix("ma:") {
                if let Ok(window) = rest.parse() {
                    return Ok(ForecasterSpec::MovingAverage { window });
                }
            } else if let Some(rest) = other.strip_prefix("des:") {
                let parts: Vec<&str> = rest.split(',').collect();
                if parts.len() == 2 {
                    if let (Ok(alpha), Ok(beta)) = (parts[0].parse(), parts[1].parse()) {
                        return Ok(ForecasterSpec::DoubleExponential { alpha, beta });
                    }
                }
            }
            Err(CliError::Usage(format!(
                "forecaster must be naive, ma:<window>, des or des:<alpha>,<beta>, got `{other}`"
            )))
        }
    }
}

pub fn parse_kind(s: &str) -> Result<TraceKind, CliError> {
    match s {
        "steady" => Ok(TraceKind::Steady),
        "diurnal" => Ok(TraceKind::Diurnal),
        "bursty" => Ok(TraceKind::Bursty),
        "high-volatility" => Ok(TraceKind::HighVolatility),
        other => Err(CliError::Usage(format!(
            "kind must be steady, diurnal, bursty or high-volatility, got `{other}`"
        ))),
    }
}

fn load_graph(path: &Path, profiles: Option<&Path>) -> Result<ServiceGraph, CliError> {
    let raw = fs::read_to_string(path)?;
    let mut graph: ServiceGraph = serde_json::from_str(&raw)?;
    if let Some(p) = profiles {
        let raw = fs::read_to_string(p)?;
        let overrides: Vec<LlpProfile> = serde_json::from_str(&raw)?;
        graph.apply_profile_overrides(overrides)?;
    }
    Ok(graph)
}

fn load_trace(path: &Path) -> Result<WorkloadTrace, CliError> {
    let file = fs::File::open(path)?;
    Ok(WorkloadTrace::read_csv(file)?)
}

fn build_config(flags: &SimFlags, policy: Policy) -> Result<SimConfig, CliError> {
    Ok(SimConfig {
        policy,
        forecaster: parse_forecaster(&flags.forecaster)?,
        alloc: AllocationConfig {
            blocks: flags.blocks,
            ..AllocationConfig::default()
        },
        update: UpdatePolicy {
            period_s: flags.realloc_period,
            ..UpdatePolicy::default()
        },
        startup_delay_ticks: flags.startup_delay,
        scale_down_stabilization_s: flags.stabilization,
        scale_down_enabled: !flags.no_scale_down,
        osc_window: flags.osc_window,
        cooldown_s: flags.cooldown,
        oct: OctModel {
            kappa: flags.oct_kappa,
            oct_min: flags.oct_min,
            oct_max: flags.oct_max,
        },
        hv_headroom: flags.headroom,
        saturation_penalty: flags.penalty,
        env_change_at: flags.env_change_at.clone(),
        seed: flags.seed,
    })
}

fn write_out(path: Option<&Path>, content: &str) -> Result<(), CliError> {
    match path {
        Some(p) => {
            fs::write(p, content)?;
            Ok(())
        }
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(content.as_bytes())?;
            stdout.write_all(b"\n")?;
            Ok(())
        }
    }
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Allocate(args) => cmd_allocate(args),
        Command::Simulate(args) => cmd_simulate(args),
        Command::Compare(args) => cmd_compare(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::GenTrace(args) => cmd_gen_trace(args),
    }
}

fn cmd_allocate(args: AllocateArgs) -> Result<(), CliError> {
    let graph = load_graph(&args.graph, args.profiles.as_deref())?;
    let chains = graph.extract_chains()?;
    let cfg = AllocationConfig {
        blocks: args.blocks,
        preallocated_blocks: args.prealloc,
        ..AllocationConfig::default()
    };
    let plan = AllocationPlan::build(&graph, &chains, &cfg)?;
    log::info!(
        "allocated {} chains over {} services",
        plan.chains.len(),
        graph.profiles().len()
    );
    write_out(args.out.as_deref(), &serde_json::to_string_pretty(&plan)?)
}

fn cmd_simulate(args: SimulateArgs) -> Result<(), CliError> {
    let graph = load_graph(&args.flags.graph, args.flags.profiles.as_deref())?;
    let trace = load_trace(&args.flags.trace)?;
    let cfg = build_config(&args.flags, parse_policy(&args.policy)?)?;
    let out = run_simulation(&graph, &trace, &cfg)?;
    log::info!(
        "simulated {} ticks: cost {:.1}, violation rate {:.4}",
        out.report.ticks,
        out.report.total_cost,
        out.report.violation_rate
    );

    if let Some(p) = &args.ticks_csv {
        let file = fs::File::create(p)?;
        out.write_ticks_csv(file)?;
    }
    if let Some(p) = &args.cdf_csv {
        let file = fs::File::create(p)?;
        out.write_cdf_csv(file)?;
    }
    if let Some(p) = &args.decision_log {
        let file = fs::File::create(p)?;
        out.write_decision_log(file)?;
    }
    write_out(
        args.out.as_deref(),
        &serde_json::to_string_pretty(&out.report)?,
    )
}

fn cmd_compare(args: CompareArgs) -> Result<(), CliError> {
    if args.policies.len() < 2 {
        return Err(CliError::Usage(format!(
            "compare needs at least two --policy flags, got {}",
            args.policies.len()
        )));
    }
    let graph = load_graph(&args.flags.graph, args.flags.profiles.as_deref())?;
    let trace = load_trace(&args.flags.trace)?;

    let mut summaries = Vec::new();
    let mut ticks = 0;
    for spec in &args.policies {
        let cfg = build_config(&args.flags, parse_policy(spec)?)?;
        let out = run_simulation(&graph, &trace, &cfg)?;
        ticks = out.report.ticks;
        summaries.push(PolicySummary::from_report(&out.report));
    }
    let report = CompareReport {
        seed: args.flags.seed,
        ticks,
        policies: summaries,
    };

    let mut table = String::new();
    table.push_str(&format!(
        "{:<12} {:>14} {:>11} {:>10} {:>10} {:>10} {:>10}\n",
        "policy", "total_cost", "violations", "viol_rate", "p50_ms", "p99_ms", "max_ms"
    ));
    for s in &report.policies {
        table.push_str(&format!(
            "{:<12} {:>14.2} {:>11} {:>10.4} {:>10.2} {:>10.2} {:>10.2}\n",
            s.policy,
            s.total_cost,
            s.violations,
            s.violation_rate,
            s.latency_p50_ms,
            s.latency_p99_ms,
            s.latency_max_ms
        ));
    }
    print!("{table}");

    if let Some(p) = &args.out {
        fs::write(p, serde_json::to_string_pretty(&report)?)?;
    }
    Ok(())
}

/// Apply one swept value onto a base configuration.
fn apply_param(cfg: &mut SimConfig, key: &str, value: &str) -> Result<(), CliError> {
    let bad = |what: &str| CliError::Usage(format!("bad {what} value `{value}`"));
    match key {
        "blocks" => cfg.alloc.blocks = value.parse().map_err(|_| bad("blocks"))?,
        "seed" => cfg.seed = value.parse().map_err(|_| bad("seed"))?,
        "startup-delay" => {
            cfg.startup_delay_ticks = value.parse().map_err(|_| bad("startup-delay"))?
        }
        "stabilization" => {
            cfg.scale_down_stabilization_s = value.parse().map_err(|_| bad("stabilization"))?
        }
        "osc-window" => cfg.osc_window = value.parse().map_err(|_| bad("osc-window"))?,
        "cooldown" => cfg.cooldown_s = value.parse().map_err(|_| bad("cooldown"))?,
        "oct-kappa" => cfg.oct.kappa = value.parse().map_err(|_| bad("oct-kappa"))?,
        "oct-min" => cfg.oct.oct_min = value.parse().map_err(|_| bad("oct-min"))?,
        "oct-max" => cfg.oct.oct_max = value.parse().map_err(|_| bad("oct-max"))?,
        "realloc-period" => {
            cfg.update.period_s = value.parse().map_err(|_| bad("realloc-period"))?
        }
        "headroom" => cfg.hv_headroom = value.parse().map_err(|_| bad("headroom"))?,
        "penalty" => cfg.saturation_penalty = value.parse().map_err(|_| bad("penalty"))?,
        other => {
            return Err(CliError::Usage(format!(
                "unknown sweep parameter `{other}`"
            )))
        }
    }
    Ok(())
}

fn cmd_sweep(args: SweepArgs) -> Result<(), CliError> {
    let (key, values) = args
        .param
        .split_once('=')
        .ok_or_else(|| CliError::Usage("--param takes name=v1,v2,...".into()))?;
    let values: Vec<String> = values.split(',').map(str::to_owned).collect();
    if values.is_empty() || values.iter().any(|v| v.is_empty()) {
        return Err(CliError::Usage("--param needs at least one value".into()));
    }

    let graph = load_graph(&args.flags.graph, args.flags.profiles.as_deref())?;
    let trace = load_trace(&args.flags.trace)?;
    let base = build_config(&args.flags, parse_policy(&args.policy)?)?;
    let mut configs = Vec::new();
    for v in &values {
        let mut cfg = base.clone();
        apply_param(&mut cfg, key, v)?;
        configs.push(cfg);
    }

    let workers = args.workers.unwrap_or(values.len().min(8)).max(1);
    let mut reports: Vec<Option<Result<SimReport, SimError>>> =
        (0..values.len()).map(|_| None).collect();
    std::thread::scope(|scope| {
        let mut handles = Vec::new();
        for chunk_start in (0..configs.len()).step_by(workers) {
            // Launch up to `workers` runs, then join before the next wave.
            for (offset, cfg) in configs[chunk_start..(chunk_start + workers).min(configs.len())]
                .iter()
                .enumerate()
            {
                let graph = &graph;
                let trace = &trace;
                handles.push((
                    chunk_start + offset,
                    scope.spawn(move || run_simulation(graph, trace, cfg).map(|o| o.report)),
                ));
            }
            for (idx, handle) in handles.drain(..) {
                reports[idx] = Some(handle.join().expect("sweep worker panicked"));
            }
        }
    });

    fs::create_dir_all(&args.out_dir)?;
    let mut runs = Vec::new();
    for (v, slot) in values.iter().zip(reports) {
        let report = slot.expect("all slots filled")?;
        let file = format!("{key}_{v}.json");
        fs::write(
            args.out_dir.join(&file),
            serde_json::to_string_pretty(&report)?,
        )?;
        runs.push(SweepIndexRun {
            value: v.clone(),
            file,
            total_cost: report.total_cost,
            violation_rate: report.violation_rate,
            latency_p99_ms: report.latency_p99_ms,
        });
    }
    let index = SweepIndex {
        param: key.to_owned(),
        policy: args.policy.clone(),
        runs,
    };
    // Write-then-rename so a watcher never sees a torn index.
    let tmp = args.out_dir.join(".index.json.tmp");
    fs::write(&tmp, serde_json::to_string_pretty(&index)?)?;
    fs::rename(&tmp, args.out_dir.join("index.json"))?;
    println!(
        "swept {} over {} values into {}",
        key,
        index.runs.len(),
        args.out_dir.display()
    );
    Ok(())
}

fn cmd_gen_trace(args: GenTraceArgs) -> Result<(), CliError> {
    let entries: Vec<String> = match (&args.entries, &args.graph) {
        (Some(list), _) => list.split(',').map(str::to_owned).collect(),
        (None, Some(path)) => {
            let graph = load_graph(path, None)?;
            graph.entries().iter().map(|e| e.id.clone()).collect()
        }
        (None, None) => {
            return Err(CliError::Usage(
                "gen-trace needs --entries or --graph".into(),
            ))
        }
    };
    let kind = parse_kind(&args.kind)?;
    let mut params = TraceParams {
        period_s: args.period,
        noise_frac: args.noise,
        ..TraceParams::default()
    };
    if let Some(v) = args.base {
        params.base_rps = v;
    }
    if let Some(v) = args.amplitude {
        params.amplitude_rps = v;
    }
    if let Some(v) = args.swing {
        params.swing_rps = v;
    }

    let trace = synthesize_trace(kind, &entries, args.duration, args.seed, &params)?;
    match &args.out {
        Some(p) => {
            let file = fs::File::create(p)?;
            trace.write_csv(file)?;
        }
        None => {
            let stdout = std::io::stdout().lock();
            trace.write_csv(stdout)?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn policy_strings_parse() {
        assert_eq!(parse_policy("lsram").unwrap(), Policy::Lsram);
        assert_eq!(parse_policy("prop").unwrap(), Policy::Proportional);
        assert_eq!(
            parse_policy("hpa").unwrap(),
            Policy::Hpa {
                config: HpaConfig::default()
            }
        );
        match parse_policy("hpa:0.4,0.7").unwrap() {
            Policy::Hpa { config } => {
                assert_eq!(config.low, 0.4);
                assert_eq!(config.high, 0.7);
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(parse_policy("k8s").is_err());
        assert!(parse_policy("hpa:0.4").is_err());
    }

    #[test]
    fn forecaster_strings_parse() {
        assert_eq!(parse_forecaster("naive").unwrap(), ForecasterSpec::Naive);
        assert_eq!(
            parse_forecaster("ma:7").unwrap(),
            ForecasterSpec::MovingAverage { window: 7 }
        );
        assert_eq!(
            parse_forecaster("des:0.6,0.2").unwrap(),
            ForecasterSpec::DoubleExponential {
                alpha: 0.6,
                beta: 0.2
            }
        );
        assert_eq!(parse_forecaster("des").unwrap(), ForecasterSpec::default());
        assert!(parse_forecaster("lstm").is_err());
        assert!(parse_forecaster("ma:x").is_err());
    }

    #[test]
    fn kinds_parse() {
        assert_eq!(parse_kind("steady").unwrap(), TraceKind::Steady);
        assert_eq!(
            parse_kind("high-volatility").unwrap(),
            TraceKind::HighVolatility
        );
        assert!(parse_kind("calm").is_err());
    }

    #[test]
    fn cli_parses_a_full_simulate_invocation() {
        let cli = Cli::try_parse_from([
            "lsram",
            "simulate",
            "--graph",
            "g.json",
            "--trace",
            "t.csv",
            "--policy",
            "hpa:0.3,0.5",
            "--forecaster",
            "ma:5",
            "--seed",
            "7",
            "--startup-delay",
            "3",
            "--no-scale-down",
            "--env-change-at",
            "120",
            "--env-change-at",
            "480",
            "--out",
            "report.json",
        ])
        .unwrap();
        match cli.command {
            Command::Simulate(args) => {
                assert_eq!(args.flags.seed, 7);
                assert_eq!(args.flags.startup_delay, 3);
                assert!(args.flags.no_scale_down);
                assert_eq!(args.flags.env_change_at, vec![120.0, 480.0]);
                let cfg =
                    build_config(&args.flags, parse_policy(&args.policy).unwrap()).unwrap();
                assert!(!cfg.scale_down_enabled);
                assert_eq!(
                    cfg.forecaster,
                    ForecasterSpec::MovingAverage { window: 5 }
                );
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn sweep_param_application() {
        let mut cfg = SimConfig::default();
        apply_param(&mut cfg, "oct-kappa", "8.5").unwrap();
        assert_eq!(cfg.oct.kappa, 8.5);
        apply_param(&mut cfg, "blocks", "500").unwrap();
        assert_eq!(cfg.alloc.blocks, 500);
        assert!(apply_param(&mut cfg, "nope", "1").is_err());
        assert!(apply_param(&mut cfg, "blocks", "x").is_err());
    }
}
