//! Deterministic discrete-time cluster simulator.
//!
//! Each trace row is one control interval. The tick pipeline is fixed:
//! deliver load, feed forecasters and windows, run the plan updater, evaluate
//! modes, decide scaling, apply matured decisions, evaluate latency, record.
//! Same graph, trace and config always produce byte-identical reports.

mod report;
mod trace;

pub use report::{
    ChainStats, ChainTick, CdfPoint, ModeEvent, ServiceStats, ServiceTick, SimOutput, SimReport,
    TickRecord,
};
pub use trace::{synthesize_trace, TraceKind, TraceParams, TraceStep, WorkloadTrace};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::alloc::{proportional_split, AllocError, AllocationConfig};
use crate::forecast::{ForecastError, Forecaster, ForecasterSpec};
use crate::graph::{Chain, ChainNode, CompositeKind, GraphError, ServiceGraph};
use crate::llp::LlpError;
use crate::mode::{Mode, ModeError, ModeState, OctModel, OscillationWindow};
use crate::scaling::{
    apply_decisions, decide_hpa, decide_lsram, push_decision, HpaConfig, ScaleError, ScaleReason,
    ScalingDecision,
};
use crate::update::{PlanController, TrafficShares, UpdateError, UpdatePolicy};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("ConfigError: {0}")]
    Config(String),
    #[error("TraceError: {0}")]
    Trace(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Alloc(#[from] AllocError),
    #[error(transparent)]
    Update(#[from] UpdateError),
    #[error(transparent)]
    Forecast(#[from] ForecastError),
    #[error(transparent)]
    Scale(#[from] ScaleError),
    #[error(transparent)]
    Mode(#[from] ModeError),
    #[error(transparent)]
    Llp(#[from] LlpError),
    #[error("IoError: {0}")]
    Io(#[from] std::io::Error),
    #[error("CsvError: {0}")]
    Csv(#[from] csv::Error),
    #[error("JsonError: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Policy {
    /// End-to-end allocation: thresholds from the per-service latency
    /// targets, forecast-driven scaling, volatility modes, plan updates.
    Lsram,
    /// Reactive utilization band, no latency model.
    Hpa { config: HpaConfig },
    /// Ablation: thresholds from a proportional SLO split, forecast-driven,
    /// Normal mode only.
    Proportional,
}

impl Policy {
    pub fn label(&self) -> &'static str {
        match self {
            Policy::Lsram => "lsram",
            Policy::Hpa { .. } => "hpa",
            Policy::Proportional => "prop",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub policy: Policy,
    pub forecaster: ForecasterSpec,
    pub alloc: AllocationConfig,
    pub update: UpdatePolicy,
    /// Scale-ups mature this many control intervals after the decision;
    /// scale-downs are immediate.
    pub startup_delay_ticks: u32,
    pub scale_down_stabilization_s: f64,
    pub scale_down_enabled: bool,
    /// Oscillation window length in samples (one per tick).
    pub osc_window: usize,
    /// Quiet time required before leaving HighVolatility.
    pub cooldown_s: f64,
    pub oct: OctModel,
    /// Extra fraction above the window peak provisioned in HighVolatility.
    pub hv_headroom: f64,
    /// A saturated service reports this multiple of the largest SLO among
    /// its chains as its latency.
    pub saturation_penalty: f64,
    /// Environment-change events injected at these times, in addition to any
    /// flags carried by the trace.
    pub env_change_at: Vec<f64>,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            policy: Policy::Lsram,
            forecaster: ForecasterSpec::default(),
            alloc: AllocationConfig::default(),
            update: UpdatePolicy::default(),
            startup_delay_ticks: 2,
            scale_down_stabilization_s: 60.0,
            scale_down_enabled: true,
            osc_window: 60,
            cooldown_s: 30.0,
            oct: OctModel::default(),
            hv_headroom: 0.2,
            saturation_penalty: 10.0,
            env_change_at: Vec::new(),
            seed: 42,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        if self.osc_window < 2 {
            return Err(SimError::Config(
                "oscillation window must hold at least 2 samples".into(),
            ));
        }
        if self.cooldown_s < 0.0 || self.scale_down_stabilization_s < 0.0 {
            return Err(SimError::Config(
                "cooldown and stabilization must be non-negative".into(),
            ));
        }
        if self.hv_headroom < 0.0 {
            return Err(SimError::Config("headroom must be non-negative".into()));
        }
        if !(self.saturation_penalty >= 1.0) {
            return Err(SimError::Config(
                "saturation penalty must be at least 1".into(),
            ));
        }
        if self.env_change_at.iter().any(|e| !e.is_finite()) {
            return Err(SimError::Config("environment-change times must be finite".into()));
        }
        self.oct.validate()?;
        self.forecaster.build()?;
        if let Policy::Hpa { config } = &self.policy {
            config.validate()?;
        }
        Ok(())
    }
}

/// Accumulate one chain's offered load into per-service totals. Fan-out
/// duplicates the full load onto every branch; dynamic branching splits it
/// by the routing shares (uniform when the trace gives none).
fn route_load(
    members: &[ChainNode],
    graph: &ServiceGraph,
    load: f64,
    shares: &BTreeMap<String, Vec<f64>>,
    acc: &mut BTreeMap<String, f64>,
) {
    let mut last_atomic: Option<&str> = None;
    for node in members {
        match node {
            ChainNode::Atomic(id) => {
                let name = graph.name(*id);
                *acc.entry(name.to_owned()).or_insert(0.0) += load;
                last_atomic = Some(name);
            }
            ChainNode::Abstract(ab) => {
                if ab.kind == CompositeKind::DynamicBranch {
                    let fork = last_atomic.unwrap_or_default();
                    let uniform = vec![1.0 / ab.branches.len() as f64; ab.branches.len()];
                    let sh = shares.get(fork).unwrap_or(&uniform);
                    for (branch, &s) in ab.branches.iter().zip(sh) {
                        if s > 0.0 {
                            route_load(branch, graph, load * s, shares, acc);
                        }
                    }
                } else {
                    for branch in &ab.branches {
                        route_load(branch, graph, load, shares, acc);
                    }
                }
            }
        }
    }
}

/// End-to-end latency of one chain: sequential sums, parallel sections take
/// the slowest active branch.
fn chain_latency(
    members: &[ChainNode],
    graph: &ServiceGraph,
    lat: &BTreeMap<String, f64>,
    shares: &BTreeMap<String, Vec<f64>>,
) -> f64 {
    let mut total = 0.0;
    let mut last_atomic: Option<&str> = None;
    for node in members {
        match node {
            ChainNode::Atomic(id) => {
                let name = graph.name(*id);
                total += lat.get(name).copied().unwrap_or(0.0);
                last_atomic = Some(name);
            }
            ChainNode::Abstract(ab) => {
                let dynamic = ab.kind == CompositeKind::DynamicBranch;
                let fork = last_atomic.unwrap_or_default();
                let uniform = vec![1.0 / ab.branches.len() as f64; ab.branches.len()];
                let sh = if dynamic {
                    shares.get(fork).unwrap_or(&uniform).clone()
                } else {
                    uniform
                };
                let mut worst = 0.0f64;
                for (branch, &s) in ab.branches.iter().zip(&sh) {
                    if !dynamic || s > 0.0 {
                        worst = worst.max(chain_latency(branch, graph, lat, shares));
                    }
                }
                total += worst;
            }
        }
    }
    total
}

/// Branching-node names with their kinds and arities, for trace validation.
fn collect_forks(
    members: &[ChainNode],
    graph: &ServiceGraph,
    out: &mut BTreeMap<String, (CompositeKind, usize)>,
) {
    let mut last_atomic: Option<&str> = None;
    for node in members {
        match node {
            ChainNode::Atomic(id) => last_atomic = Some(graph.name(*id)),
            ChainNode::Abstract(ab) => {
                if let Some(fork) = last_atomic {
                    out.insert(fork.to_owned(), (ab.kind, ab.branches.len()));
                }
                for branch in &ab.branches {
                    collect_forks(branch, graph, out);
                }
            }
        }
    }
}

/// Per-instance capacity for every service under the end-to-end plan.
/// Shared services run at the blended target; private ones at their chain's.
fn lsram_thresholds(controller: &PlanController) -> Result<BTreeMap<String, f64>, SimError> {
    let plan = controller.plan();
    let graph = controller.graph();
    let mut out = BTreeMap::new();
    for cp in &plan.chains {
        for m in &cp.members {
            if let Some(&pslo) = plan.shared_pslo.get(&m.name) {
                let id = graph.index_of(&m.name).expect("planned services exist");
                out.insert(m.name.clone(), graph.profile(id).capacity_at(pslo)?);
            } else {
                out.insert(m.name.clone(), m.capacity_rps);
            }
        }
    }
    Ok(out)
}

/// Per-instance capacity when every member's latency target is its
/// proportional slice of the SLO. Shared services take the mean slice.
fn prop_thresholds(
    graph: &ServiceGraph,
    chains: &[Chain],
) -> Result<BTreeMap<String, f64>, SimError> {
    let mut targets: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for chain in chains {
        let ids = chain.atomic_members();
        let taus: Vec<f64> = ids.iter().map(|&id| graph.profile(id).tau_ms).collect();
        let split = proportional_split(&taus, chain.slo_ms)?;
        for (&id, &target) in ids.iter().zip(&split) {
            targets
                .entry(graph.name(id).to_owned())
                .or_default()
                .push(target);
        }
    }
    let mut out = BTreeMap::new();
    for (name, ts) in targets {
        let mean = ts.iter().sum::<f64>() / ts.len() as f64;
        let id = graph.index_of(&name).expect("chain members exist");
        out.insert(name, graph.profile(id).capacity_at(mean)?);
    }
    Ok(out)
}

/// A chain reacts at the sensitivity of its most volatile-sensitive member.
fn chain_octs(
    controller: &PlanController,
    oct: &OctModel,
) -> Result<BTreeMap<String, f64>, SimError> {
    let graph = controller.graph();
    let mut out = BTreeMap::new();
    for cp in &controller.plan().chains {
        let mut min_oct = oct.oct_max;
        for m in &cp.members {
            let id = graph.index_of(&m.name).expect("planned services exist");
            min_oct = min_oct.min(oct.oct_for(m.pslo_ms, graph.profile(id))?);
        }
        out.insert(cp.chain_id.clone(), min_oct);
    }
    Ok(out)
}

pub fn run_simulation(
    graph: &ServiceGraph,
    trace: &WorkloadTrace,
    cfg: &SimConfig,
) -> Result<SimOutput, SimError> {
    cfg.validate()?;
    let mut controller =
        PlanController::new(graph.clone(), cfg.alloc.clone(), cfg.update.clone())?;
    let chains: Vec<Chain> = controller.chains().to_vec();
    let graph = controller.graph().clone();

    let mut report = SimReport {
        policy: cfg.policy.label().to_owned(),
        seed: cfg.seed,
        ..SimReport::default()
    };
    if trace.is_empty() {
        return Ok(SimOutput {
            report,
            ticks: Vec::new(),
            decisions: Vec::new(),
        });
    }

    // ---- pre-flight validation: fail before tick 0, not mid-run.
    let chain_ids: Vec<&str> = chains.iter().map(|c| c.id.as_str()).collect();
    for id in trace.entry_ids() {
        if !chain_ids.contains(&id.as_str()) {
            return Err(SimError::Config(format!(
                "trace refers to unknown entry point `{id}`"
            )));
        }
    }
    let mut forks: BTreeMap<String, (CompositeKind, usize)> = BTreeMap::new();
    for chain in &chains {
        collect_forks(&chain.members, &graph, &mut forks);
    }
    for step in trace.steps() {
        for (node, shares) in &step.branch_shares {
            match forks.get(node) {
                None => {
                    return Err(SimError::Config(format!(
                        "trace routes shares at `{node}`, which is not a branching node"
                    )))
                }
                Some((kind, arity)) => {
                    if *kind != CompositeKind::DynamicBranch {
                        return Err(SimError::Config(format!(
                            "node `{node}` fans out to all branches; it takes no shares"
                        )));
                    }
                    if *arity != shares.len() {
                        return Err(SimError::Config(format!(
                            "node `{node}` has {arity} branches but the trace gives {} shares",
                            shares.len()
                        )));
                    }
                }
            }
        }
    }

    // ---- static lookups.
    let mut svc_chains: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for chain in &chains {
        for id in chain.atomic_members() {
            svc_chains
                .entry(graph.name(id).to_owned())
                .or_default()
                .push(chain.id.clone());
        }
    }
    let service_names: Vec<String> = svc_chains.keys().cloned().collect();
    let max_slo: BTreeMap<String, f64> = svc_chains
        .iter()
        .map(|(name, ids)| {
            let worst = ids
                .iter()
                .map(|id| chains.iter().find(|c| &c.id == id).expect("own id").slo_ms)
                .fold(0.0f64, f64::max);
            (name.clone(), worst)
        })
        .collect();

    // ---- policy machinery.
    let is_lsram = matches!(cfg.policy, Policy::Lsram);
    let mut thresholds = match &cfg.policy {
        Policy::Lsram => lsram_thresholds(&controller)?,
        Policy::Proportional => prop_thresholds(&graph, &chains)?,
        Policy::Hpa { .. } => BTreeMap::new(),
    };
    let mut chain_oct = if is_lsram {
        chain_octs(&controller, &cfg.oct)?
    } else {
        BTreeMap::new()
    };

    // ---- mutable state.
    let mut instances: BTreeMap<String, u32> =
        service_names.iter().map(|n| (n.clone(), 1)).collect();
    let mut forecasters: BTreeMap<String, Forecaster> = chains
        .iter()
        .map(|c| Ok((c.id.clone(), cfg.forecaster.build()?)))
        .collect::<Result<_, ForecastError>>()?;
    let mut entry_windows: BTreeMap<String, OscillationWindow> = chains
        .iter()
        .map(|c| (c.id.clone(), OscillationWindow::new(cfg.osc_window)))
        .collect();
    let mut svc_windows: BTreeMap<String, OscillationWindow> = service_names
        .iter()
        .map(|n| (n.clone(), OscillationWindow::new(cfg.osc_window)))
        .collect();
    let mut modes: BTreeMap<String, ModeState> = chains
        .iter()
        .map(|c| (c.id.clone(), ModeState::new(cfg.cooldown_s)))
        .collect();
    let mut below_since: BTreeMap<String, f64> = BTreeMap::new();
    let mut pending: Vec<ScalingDecision> = Vec::new();
    let mut share_acc: BTreeMap<String, f64> =
        chains.iter().map(|c| (c.id.clone(), 0.0)).collect();
    let mut acc_since = trace.steps()[0].t_s;

    let mut ticks: Vec<TickRecord> = Vec::with_capacity(trace.len());
    let mut decisions_log: Vec<ScalingDecision> = Vec::new();
    let mut latencies: Vec<f64> = Vec::new();
    let mut per_chain_lat: BTreeMap<String, Vec<f64>> =
        chains.iter().map(|c| (c.id.clone(), Vec::new())).collect();
    let mut util_sum: BTreeMap<String, f64> =
        service_names.iter().map(|n| (n.clone(), 0.0)).collect();

    let ts: Vec<f64> = trace.steps().iter().map(|s| s.t_s).collect();
    let n = ts.len();
    let dts: Vec<f64> = (0..n)
        .map(|i| {
            if i + 1 < n {
                ts[i + 1] - ts[i]
            } else if n >= 2 {
                ts[n - 1] - ts[n - 2]
            } else {
                1.0
            }
        })
        .collect();
    let effective_time = |tick: usize| -> f64 {
        if tick < n {
            ts[tick]
        } else {
            ts[n - 1] + (tick - (n - 1)) as f64 * dts[n - 1]
        }
    };

    let mut prev_t = f64::NEG_INFINITY;
    for (i, step) in trace.steps().iter().enumerate() {
        let now = step.t_s;
        let dt = dts[i];

        // 1. Deliver load and route it through every chain.
        let chain_load: BTreeMap<String, f64> = chains
            .iter()
            .map(|c| (c.id.clone(), step.rps.get(&c.id).copied().unwrap_or(0.0)))
            .collect();
        let mut svc_load: BTreeMap<String, f64> =
            service_names.iter().map(|n| (n.clone(), 0.0)).collect();
        for chain in &chains {
            route_load(
                &chain.members,
                &graph,
                chain_load[&chain.id],
                &step.branch_shares,
                &mut svc_load,
            );
        }

        // 2. Feed forecasters and windows.
        for chain in &chains {
            let load = chain_load[&chain.id];
            forecasters
                .get_mut(&chain.id)
                .expect("built per chain")
                .observe(load)?;
            entry_windows.get_mut(&chain.id).expect("per chain").push(load);
            *share_acc.get_mut(&chain.id).expect("per chain") += load * dt;
        }
        for name in &service_names {
            svc_windows.get_mut(name).expect("per service").push(svc_load[name]);
        }

        // 3. Plan updater (end-to-end policy only).
        let env_changed = step.env_change
            || cfg
                .env_change_at
                .iter()
                .any(|&e| e > prev_t && e <= now);
        if is_lsram {
            let window = (now - acc_since).max(dt);
            if let Ok(shares) = TrafficShares::from_loads(window, &share_acc) {
                controller.set_shares(shares);
            }
            if controller.maybe_reallocate(now, env_changed)? {
                report.reallocations += 1;
                thresholds = lsram_thresholds(&controller)?;
                chain_oct = chain_octs(&controller, &cfg.oct)?;
                for v in share_acc.values_mut() {
                    *v = 0.0;
                }
                acc_since = now;
            }
        }

        // 4. Mode evaluation per chain.
        if is_lsram {
            for chain in &chains {
                let o = entry_windows[&chain.id]
                    .oscillation_factor()
                    .unwrap_or(0.0);
                let state = modes.get_mut(&chain.id).expect("per chain");
                if let Some(tr) = state.evaluate(o, chain_oct[&chain.id], env_changed, now) {
                    report.mode_transitions.push(ModeEvent {
                        t_s: tr.at_s,
                        chain: chain.id.clone(),
                        to: tr.to,
                    });
                }
            }
        }

        // 5. Scaling decisions from routed forecasts.
        let mut fl: BTreeMap<String, f64> =
            service_names.iter().map(|n| (n.clone(), 0.0)).collect();
        for chain in &chains {
            let predicted = forecasters[&chain.id].predict_next().rps;
            route_load(
                &chain.members,
                &graph,
                predicted,
                &step.branch_shares,
                &mut fl,
            );
        }
        for name in &service_names {
            let current = instances[name];
            let mu = graph.profile(graph.index_of(name).expect("known")).mu_rps;
            let (desired, reason) = match &cfg.policy {
                Policy::Hpa { config } => {
                    let util = svc_load[name] / (current as f64 * mu);
                    let below_for = if util < config.low {
                        let since = *below_since.entry(name.clone()).or_insert(now);
                        now - since
                    } else {
                        below_since.remove(name);
                        0.0
                    };
                    (
                        decide_hpa(util, current, config, below_for)?,
                        ScaleReason::Baseline,
                    )
                }
                Policy::Lsram | Policy::Proportional => {
                    let svc_mode = if is_lsram
                        && svc_chains[name]
                            .iter()
                            .any(|c| modes[c].mode == Mode::HighVolatility)
                    {
                        Mode::HighVolatility
                    } else {
                        Mode::Normal
                    };
                    let threshold = thresholds.get(name).copied().ok_or_else(|| {
                        SimError::Config(format!("no capacity threshold for `{name}`"))
                    })?;
                    let wmax = svc_windows[name].max().unwrap_or(0.0);
                    let desired = decide_lsram(
                        fl[name],
                        threshold,
                        svc_mode,
                        wmax,
                        current,
                        cfg.hv_headroom,
                    )?;
                    let reason = match (&cfg.policy, svc_mode) {
                        (Policy::Proportional, _) => ScaleReason::Baseline,
                        (_, Mode::HighVolatility) => ScaleReason::HighVolatility,
                        _ => ScaleReason::Forecast,
                    };
                    // Scale-down damping lives here, not in the decision
                    // function: suppressed entirely or stabilized.
                    if desired < current {
                        if !cfg.scale_down_enabled {
                            below_since.remove(name);
                            (current, reason)
                        } else {
                            let since = *below_since.entry(name.clone()).or_insert(now);
                            if now - since >= cfg.scale_down_stabilization_s {
                                below_since.remove(name);
                                (desired, reason)
                            } else {
                                (current, reason)
                            }
                        }
                    } else {
                        below_since.remove(name);
                        (desired, reason)
                    }
                }
            };
            // Supersession is by intent: a changed target replaces the
            // pending decision, an unchanged one keeps its startup timer
            // running, and a return to the current count cancels it.
            let pending_target = pending
                .iter()
                .find(|d| d.service == *name)
                .map(|d| d.target_instances);
            if desired != current {
                if pending_target != Some(desired) {
                    let effective_at_s = if desired > current {
                        effective_time(i + cfg.startup_delay_ticks as usize)
                    } else {
                        now
                    };
                    let d = ScalingDecision {
                        service: name.clone(),
                        current_instances: current,
                        target_instances: desired,
                        reason,
                        decided_at_s: now,
                        effective_at_s,
                    };
                    decisions_log.push(d.clone());
                    push_decision(&mut pending, d);
                }
            } else if pending_target.is_some() {
                pending.retain(|d| d.service != *name);
            }
        }

        // 6. Apply matured decisions.
        apply_decisions(&mut pending, now, &mut instances);

        // 7. Latency under the new instance counts.
        let mut svc_lat: BTreeMap<String, f64> = BTreeMap::new();
        let mut svc_ticks: BTreeMap<String, ServiceTick> = BTreeMap::new();
        for name in &service_names {
            let id = graph.index_of(name).expect("known");
            let profile = graph.profile(id);
            let count = instances[name];
            let load = svc_load[name];
            let rho = load / (count as f64 * profile.mu_rps);
            let saturated = rho >= 1.0;
            let latency = if saturated {
                report.saturation_events += 1;
                cfg.saturation_penalty * max_slo[name]
            } else {
                profile.latency_at(rho)?
            };
            svc_lat.insert(name.clone(), latency);
            *util_sum.get_mut(name).expect("known") += rho;
            svc_ticks.insert(
                name.clone(),
                ServiceTick {
                    instances: count,
                    load_rps: load,
                    utilization: rho,
                    latency_ms: latency,
                    saturated,
                },
            );
        }
        let mut chain_ticks: BTreeMap<String, ChainTick> = BTreeMap::new();
        for chain in &chains {
            let latency = chain_latency(&chain.members, &graph, &svc_lat, &step.branch_shares);
            let violated = latency > chain.slo_ms;
            if violated {
                report.violations += 1;
            }
            latencies.push(latency);
            per_chain_lat.get_mut(&chain.id).expect("per chain").push(latency);
            chain_ticks.insert(
                chain.id.clone(),
                ChainTick {
                    latency_ms: latency,
                    violated,
                    mode: if is_lsram {
                        modes[&chain.id].mode
                    } else {
                        Mode::Normal
                    },
                },
            );
        }

        // 8. Record the tick.
        for name in &service_names {
            let id = graph.index_of(name).expect("known");
            let sigma = graph.profile(id).sigma;
            let count = instances[name] as f64;
            report.total_cost += count * sigma * dt;
            let stats = report.per_service.entry(name.clone()).or_default();
            stats.instance_seconds += count * dt;
            stats.cost += count * sigma * dt;
            stats.max_instances = stats.max_instances.max(instances[name]);
            if svc_ticks[name].saturated {
                stats.saturation_events += 1;
            }
        }
        ticks.push(TickRecord {
            t_s: now,
            services: svc_ticks,
            chains: chain_ticks,
        });
        prev_t = now;
    }

    // ---- aggregates.
    report.ticks = n as u64;
    report.duration_s = dts.iter().sum();
    report.chain_samples = (n * chains.len()) as u64;
    report.violation_rate = report.violations as f64 / report.chain_samples as f64;
    latencies.sort_by(f64::total_cmp);
    report.latency_p50_ms = report::percentile(&latencies, 0.50);
    report.latency_p99_ms = report::percentile(&latencies, 0.99);
    report.latency_max_ms = latencies.last().copied().unwrap_or(0.0);
    report.latency_cdf = report::build_cdf(&latencies, 100);
    for (id, mut lat) in per_chain_lat {
        lat.sort_by(f64::total_cmp);
        let violations = ticks
            .iter()
            .filter(|t| t.chains[&id].violated)
            .count() as u64;
        report.per_chain.insert(
            id,
            ChainStats {
                samples: lat.len() as u64,
                violations,
                violation_rate: violations as f64 / lat.len() as f64,
                latency_p50_ms: report::percentile(&lat, 0.50),
                latency_p99_ms: report::percentile(&lat, 0.99),
                latency_max_ms: lat.last().copied().unwrap_or(0.0),
            },
        );
    }
    for name in &service_names {
        let stats = report.per_service.get_mut(name).expect("filled above");
        stats.mean_utilization = util_sum[name] / n as f64;
    }

    Ok(SimOutput {
        report,
        ticks,
        decisions: decisions_log,
    })
}
