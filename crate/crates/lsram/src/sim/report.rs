//! Simulation outputs: per-tick records, aggregates, and plot-ready curves.

use std::collections::BTreeMap;
use std::io;

use serde::{Deserialize, Serialize};

use super::SimError;
use crate::mode::Mode;
use crate::scaling::ScalingDecision;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ServiceTick {
    pub instances: u32,
    pub load_rps: f64,
    pub utilization: f64,
    pub latency_ms: f64,
    pub saturated: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChainTick {
    pub latency_ms: f64,
    pub violated: bool,
    pub mode: Mode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TickRecord {
    pub t_s: f64,
    pub services: BTreeMap<String, ServiceTick>,
    pub chains: BTreeMap<String, ChainTick>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeEvent {
    pub t_s: f64,
    pub chain: String,
    pub to: Mode,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CdfPoint {
    pub latency_ms: f64,
    pub fraction: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ChainStats {
    pub samples: u64,
    pub violations: u64,
    pub violation_rate: f64,
    pub latency_p50_ms: f64,
    pub latency_p99_ms: f64,
    pub latency_max_ms: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ServiceStats {
    pub instance_seconds: f64,
    pub cost: f64,
    pub max_instances: u32,
    pub mean_utilization: f64,
    pub saturation_events: u64,
}

/// Aggregate view of one run; everything a comparison or a plot needs.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub policy: String,
    pub seed: u64,
    pub ticks: u64,
    pub duration_s: f64,
    /// Sum over ticks of instances x unit cost x dt, all services.
    pub total_cost: f64,
    pub violations: u64,
    pub chain_samples: u64,
    pub violation_rate: f64,
    pub latency_p50_ms: f64,
    pub latency_p99_ms: f64,
    pub latency_max_ms: f64,
    pub saturation_events: u64,
    pub reallocations: u64,
    pub mode_transitions: Vec<ModeEvent>,
    pub per_chain: BTreeMap<String, ChainStats>,
    pub per_service: BTreeMap<String, ServiceStats>,
    pub latency_cdf: Vec<CdfPoint>,
}

/// Full output of a run. The report aggregates; the tick records and the
/// decision log are the raw material for CSV artifacts.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SimOutput {
    pub report: SimReport,
    pub ticks: Vec<TickRecord>,
    pub decisions: Vec<ScalingDecision>,
}

/// Nearest-rank percentile of an ascending-sorted slice.
pub(crate) fn percentile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return 0.0;
    }
    let rank = (q * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

/// Evenly spaced quantile curve; non-decreasing by construction.
pub(crate) fn build_cdf(sorted: &[f64], points: usize) -> Vec<CdfPoint> {
    if sorted.is_empty() {
        return Vec::new();
    }
    (0..=points)
        .map(|i| {
            let fraction = i as f64 / points as f64;
            let idx = ((fraction * sorted.len() as f64).ceil() as usize)
                .clamp(1, sorted.len())
                - 1;
            CdfPoint {
                latency_ms: sorted[idx],
                fraction,
            }
        })
        .collect()
}

impl SimOutput {
    /// One row per service and per chain at every tick.
    pub fn write_ticks_csv<W: io::Write>(&self, writer: W) -> Result<(), SimError> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record([
            "t",
            "kind",
            "name",
            "instances",
            "load_rps",
            "utilization",
            "latency_ms",
            "violated",
            "mode",
        ])?;
        for tick in &self.ticks {
            let t = tick.t_s.to_string();
            for (name, s) in &tick.services {
                wtr.write_record([
                    t.as_str(),
                    "service",
                    name,
                    &s.instances.to_string(),
                    &s.load_rps.to_string(),
                    &s.utilization.to_string(),
                    &s.latency_ms.to_string(),
                    if s.saturated { "1" } else { "0" },
                    "",
                ])?;
            }
            for (name, c) in &tick.chains {
                wtr.write_record([
                    t.as_str(),
                    "chain",
                    name,
                    "",
                    "",
                    "",
                    &c.latency_ms.to_string(),
                    if c.violated { "1" } else { "0" },
                    match c.mode {
                        Mode::Normal => "normal",
                        Mode::HighVolatility => "high_volatility",
                    },
                ])?;
            }
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn write_cdf_csv<W: io::Write>(&self, writer: W) -> Result<(), SimError> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(["latency_ms", "fraction"])?;
        for p in &self.report.latency_cdf {
            wtr.write_record([p.latency_ms.to_string(), p.fraction.to_string()])?;
        }
        wtr.flush()?;
        Ok(())
    }

    /// JSON-lines decision log, one scaling decision per line.
    pub fn write_decision_log<W: io::Write>(&self, mut writer: W) -> Result<(), SimError> {
        for d in &self.decisions {
            serde_json::to_writer(&mut writer, d)?;
            writer.write_all(b"\n")?;
        }
        Ok(())
    }
}
