//! Workload traces: the CSV wire format and synthetic generators.

use std::collections::BTreeMap;
use std::io;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use super::SimError;

/// One simulated control interval of offered load.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TraceStep {
    pub t_s: f64,
    /// Entry-point id -> offered load.
    pub rps: BTreeMap<String, f64>,
    /// Branching-node name -> per-branch routing fractions (sum to 1).
    pub branch_shares: BTreeMap<String, Vec<f64>>,
    pub env_change: bool,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct WorkloadTrace {
    steps: Vec<TraceStep>,
}

impl WorkloadTrace {
    /// Steps must be strictly increasing in time, loads finite and
    /// non-negative, and every share vector normalized.
    pub fn new(steps: Vec<TraceStep>) -> Result<Self, SimError> {
        let mut prev = f64::NEG_INFINITY;
        for step in &steps {
            if !step.t_s.is_finite() || step.t_s <= prev {
                return Err(SimError::Trace(format!(
                    "timestamps must be finite and strictly increasing (at t={})",
                    step.t_s
                )));
            }
            prev = step.t_s;
            for (entry, &rps) in &step.rps {
                if !rps.is_finite() || rps < 0.0 {
                    return Err(SimError::Trace(format!(
                        "load for `{entry}` at t={} must be finite and non-negative, got {rps}",
                        step.t_s
                    )));
                }
            }
            for (node, shares) in &step.branch_shares {
                if shares.is_empty() || shares.iter().any(|&s| !(0.0..=1.0).contains(&s)) {
                    return Err(SimError::Trace(format!(
                        "branch shares for `{node}` at t={} must lie in [0, 1]",
                        step.t_s
                    )));
                }
                let sum: f64 = shares.iter().sum();
                if (sum - 1.0).abs() > 1e-9 {
                    return Err(SimError::Trace(format!(
                        "branch shares for `{node}` at t={} must sum to 1, got {sum}",
                        step.t_s
                    )));
                }
            }
        }
        Ok(WorkloadTrace { steps })
    }

    pub fn steps(&self) -> &[TraceStep] {
        &self.steps
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn entry_ids(&self) -> Vec<String> {
        let mut ids: Vec<String> = self
            .steps
            .iter()
            .flat_map(|s| s.rps.keys().cloned())
            .collect();
        ids.sort();
        ids.dedup();
        ids
    }

    /// Rows are `(t, entry)` pairs; rows sharing a timestamp form one step.
    /// The two trailing columns are optional in the header.
    pub fn read_csv<R: io::Read>(reader: R) -> Result<Self, SimError> {
        let mut rdr = csv::ReaderBuilder::new()
            .flexible(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let headers = rdr.headers()?.clone();
        let col = |name: &str| headers.iter().position(|h| h == name);
        let (Some(c_t), Some(c_entry), Some(c_rps)) = (col("t"), col("entry_id"), col("rps"))
        else {
            return Err(SimError::Trace(
                "header must contain t, entry_id and rps columns".into(),
            ));
        };
        let c_shares = col("branch_shares_json");
        let c_env = col("env_change");
        for h in headers.iter() {
            if !["t", "entry_id", "rps", "branch_shares_json", "env_change"].contains(&h) {
                return Err(SimError::Trace(format!("unknown trace column `{h}`")));
            }
        }

        let mut steps: Vec<TraceStep> = Vec::new();
        for record in rdr.records() {
            let record = record?;
            let cell = |i: usize| record.get(i).unwrap_or("");
            let t: f64 = cell(c_t)
                .parse()
                .map_err(|_| SimError::Trace(format!("bad timestamp `{}`", cell(c_t))))?;
            let entry = cell(c_entry).to_string();
            if entry.is_empty() {
                return Err(SimError::Trace(format!("missing entry_id at t={t}")));
            }
            let rps: f64 = cell(c_rps)
                .parse()
                .map_err(|_| SimError::Trace(format!("bad rps `{}` at t={t}", cell(c_rps))))?;

            let same_step = steps.last().map(|s| s.t_s == t).unwrap_or(false);
            if !same_step {
                steps.push(TraceStep {
                    t_s: t,
                    ..TraceStep::default()
                });
            }
            let step = steps.last_mut().expect("just ensured");
            if step.rps.insert(entry.clone(), rps).is_some() {
                return Err(SimError::Trace(format!(
                    "duplicate entry `{entry}` at t={t}"
                )));
            }
            if let Some(ci) = c_shares {
                let raw = cell(ci);
                if !raw.is_empty() {
                    let parsed: BTreeMap<String, Vec<f64>> = serde_json::from_str(raw)
                        .map_err(|e| {
                            SimError::Trace(format!("bad branch_shares_json at t={t}: {e}"))
                        })?;
                    step.branch_shares.extend(parsed);
                }
            }
            if let Some(ci) = c_env {
                match cell(ci) {
                    "" | "0" | "false" => {}
                    "1" | "true" => step.env_change = true,
                    other => {
                        return Err(SimError::Trace(format!(
                            "bad env_change flag `{other}` at t={t}"
                        )))
                    }
                }
            }
        }
        WorkloadTrace::new(steps)
    }

    /// Canonical writer: always emits all five columns; the shares and
    /// env-change cells ride on the first row of their step.
    pub fn write_csv<W: io::Write>(&self, writer: W) -> Result<(), SimError> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(["t", "entry_id", "rps", "branch_shares_json", "env_change"])?;
        for step in &self.steps {
            let mut first = true;
            for (entry, rps) in &step.rps {
                let shares = if first && !step.branch_shares.is_empty() {
                    serde_json::to_string(&step.branch_shares)?
                } else {
                    String::new()
                };
                let env = if first && step.env_change { "1" } else { "" };
                wtr.write_record([
                    step.t_s.to_string().as_str(),
                    entry,
                    rps.to_string().as_str(),
                    shares.as_str(),
                    env,
                ])?;
                first = false;
            }
        }
        wtr.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceKind {
    Steady,
    Diurnal,
    Bursty,
    HighVolatility,
}

/// Generator knobs. `None` fields take per-kind defaults.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceParams {
    pub base_rps: f64,
    pub amplitude_rps: f64,
    pub period_s: Option<f64>,
    pub noise_frac: Option<f64>,
    /// Guaranteed peak-to-trough swing inside every period of a
    /// high-volatility trace.
    pub swing_rps: f64,
}

impl Default for TraceParams {
    fn default() -> Self {
        TraceParams {
            base_rps: 300.0,
            amplitude_rps: 200.0,
            period_s: None,
            noise_frac: None,
            swing_rps: 700.0,
        }
    }
}

impl TraceParams {
    fn period(&self, kind: TraceKind) -> f64 {
        self.period_s.unwrap_or(match kind {
            TraceKind::Steady => 600.0,
            TraceKind::Diurnal => 600.0,
            TraceKind::Bursty => 60.0,
            TraceKind::HighVolatility => 240.0,
        })
    }

    fn noise(&self, kind: TraceKind) -> f64 {
        self.noise_frac.unwrap_or(match kind {
            TraceKind::Steady => 0.0,
            TraceKind::Diurnal => 0.02,
            TraceKind::Bursty => 0.05,
            TraceKind::HighVolatility => 0.08,
        })
    }
}

/// Deterministic synthetic workload at one-second ticks: same kind, seed and
/// parameters, same bytes.
pub fn synthesize_trace(
    kind: TraceKind,
    entries: &[String],
    duration_s: u64,
    seed: u64,
    params: &TraceParams,
) -> Result<WorkloadTrace, SimError> {
    if entries.is_empty() {
        return Err(SimError::Config("trace needs at least one entry point".into()));
    }
    if duration_s == 0 {
        return Err(SimError::Config("trace duration must be positive".into()));
    }
    if !(params.base_rps > 0.0) {
        return Err(SimError::Config(format!(
            "base rps must be positive, got {}",
            params.base_rps
        )));
    }
    let period = params.period(kind);
    let noise = params.noise(kind);
    if !(period > 0.0) || noise < 0.0 || noise >= 1.0 {
        return Err(SimError::Config(format!(
            "need period > 0 and noise in [0, 1), got period={period} noise={noise}"
        )));
    }
    match kind {
        TraceKind::Diurnal if params.amplitude_rps < 0.0 || params.amplitude_rps > params.base_rps => {
            return Err(SimError::Config(
                "diurnal amplitude must lie in [0, base]".into(),
            ));
        }
        TraceKind::HighVolatility if !(params.swing_rps > 0.0) => {
            return Err(SimError::Config("swing must be positive".into()));
        }
        TraceKind::HighVolatility if period < 30.0 => {
            return Err(SimError::Config(
                "high-volatility period must be at least 30 s".into(),
            ));
        }
        _ => {}
    }

    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    // Burst levels chosen so the guaranteed swing survives worst-case noise.
    let hv_low = (params.base_rps - params.swing_rps / 2.0)
        .max(params.base_rps * 0.2)
        .max(10.0);
    let hv_high = (params.swing_rps + hv_low * (1.0 + noise)) / (1.0 - noise) * 1.001;

    // Bursty spikes: per-entry countdowns.
    let mut spike_left = vec![0u32; entries.len()];
    let mut spike_height = vec![0.0f64; entries.len()];

    let mut steps = Vec::with_capacity(duration_s as usize);
    for t in 0..duration_s {
        let mut rps = BTreeMap::new();
        for (i, entry) in entries.iter().enumerate() {
            let level = match kind {
                TraceKind::Steady => params.base_rps,
                TraceKind::Diurnal => {
                    let phase = 2.0 * std::f64::consts::PI
                        * (t as f64 / period + i as f64 / entries.len() as f64)
                        - std::f64::consts::FRAC_PI_2;
                    params.base_rps + params.amplitude_rps * phase.sin()
                }
                TraceKind::Bursty => {
                    if spike_left[i] == 0 && rng.gen_range(0.0..1.0) < 1.0 / period {
                        spike_left[i] = rng.gen_range(3..10);
                        spike_height[i] = params.base_rps * rng.gen_range(1.0..3.0);
                    }
                    let level = if spike_left[i] > 0 {
                        spike_left[i] -= 1;
                        params.base_rps + spike_height[i]
                    } else {
                        params.base_rps
                    };
                    level
                }
                TraceKind::HighVolatility => {
                    let phase = t as f64 % period;
                    if phase < period / 3.0 {
                        // 5-second alternation between the burst extremes.
                        if (phase / 5.0) as u64 % 2 == 0 {
                            hv_high
                        } else {
                            hv_low
                        }
                    } else {
                        params.base_rps
                    }
                }
            };
            let jitter = if noise > 0.0 {
                1.0 + noise * rng.gen_range(-1.0..1.0)
            } else {
                1.0
            };
            rps.insert(entry.clone(), (level * jitter).max(0.0));
        }
        steps.push(TraceStep {
            t_s: t as f64,
            rps,
            branch_shares: BTreeMap::new(),
            env_change: false,
        });
    }
    WorkloadTrace::new(steps)
}
