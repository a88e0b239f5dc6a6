//! Per-service scaling decisions and their delayed application.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mode::Mode;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScaleError {
    #[error("DomainError: {0}")]
    Domain(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScaleReason {
    Forecast,
    HighVolatility,
    Baseline,
}

/// One decided instance-count change. Scale-ups sit in a pending queue until
/// `effective_at_s` (modeling container startup); scale-downs apply at once.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingDecision {
    pub service: String,
    pub current_instances: u32,
    pub target_instances: u32,
    pub reason: ScaleReason,
    pub decided_at_s: f64,
    pub effective_at_s: f64,
}

/// HPA-style utilization band. Above `high`: scale up now. Below `low` for
/// `stabilization_s`: scale down. In between: hold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HpaConfig {
    pub low: f64,
    pub high: f64,
    pub stabilization_s: f64,
}

impl Default for HpaConfig {
    fn default() -> Self {
        HpaConfig {
            low: 0.3,
            high: 0.5,
            stabilization_s: 60.0,
        }
    }
}

impl HpaConfig {
    pub fn validate(&self) -> Result<(), ScaleError> {
        if !(self.low > 0.0 && self.low < self.high && self.high < 1.0) {
            return Err(ScaleError::Domain(format!(
                "need 0 < low < high < 1, got low={} high={}",
                self.low, self.high
            )));
        }
        if self.stabilization_s < 0.0 {
            return Err(ScaleError::Domain(
                "stabilization must be non-negative".into(),
            ));
        }
        Ok(())
    }
}

/// Forecast-driven target at a fixed per-instance capacity threshold.
/// Normal mode sizes for the forecast; HighVolatility sizes for the window
/// peak plus headroom and never shrinks.
pub fn decide_lsram(
    forecast_rps: f64,
    capacity_rps: f64,
    mode: Mode,
    window_max_rps: f64,
    current: u32,
    headroom: f64,
) -> Result<u32, ScaleError> {
    if !(capacity_rps > 0.0) || !capacity_rps.is_finite() {
        return Err(ScaleError::Domain(format!(
            "per-instance capacity must be positive, got {capacity_rps}"
        )));
    }
    if forecast_rps < 0.0 || window_max_rps < 0.0 || headroom < 0.0 {
        return Err(ScaleError::Domain(
            "loads and headroom must be non-negative".into(),
        ));
    }
    let target = match mode {
        Mode::Normal => instances_for(forecast_rps, capacity_rps),
        Mode::HighVolatility => {
            instances_for(window_max_rps * (1.0 + headroom), capacity_rps).max(current)
        }
    };
    Ok(target)
}

/// Ceiling with a hair of slack so that ratios that are integers up to
/// floating-point noise (0.3/0.3 = 1.0000000000000002) do not buy an extra
/// instance.
fn ceil_instances(ratio: f64) -> f64 {
    (ratio - 1e-9).ceil()
}

fn instances_for(load_rps: f64, capacity_rps: f64) -> u32 {
    let raw = ceil_instances(load_rps / capacity_rps);
    // At least one instance stays up even at zero load.
    raw.max(1.0).min(u32::MAX as f64) as u32
}

/// Reactive utilization-band target. `below_low_for_s` is how long the
/// utilization has been continuously under `low` (caller-tracked).
pub fn decide_hpa(
    utilization: f64,
    current: u32,
    cfg: &HpaConfig,
    below_low_for_s: f64,
) -> Result<u32, ScaleError> {
    cfg.validate()?;
    if utilization < 0.0 || !utilization.is_finite() {
        return Err(ScaleError::Domain(format!(
            "utilization must be finite and non-negative, got {utilization}"
        )));
    }
    if utilization > cfg.high {
        let raw = ceil_instances(current as f64 * utilization / cfg.high);
        return Ok(raw.max(1.0).min(u32::MAX as f64) as u32);
    }
    if utilization < cfg.low && below_low_for_s >= cfg.stabilization_s {
        let raw = ceil_instances(current as f64 * utilization / cfg.low);
        return Ok(raw.max(1.0) as u32);
    }
    Ok(current)
}

/// Queue a decision, superseding any pending one for the same service: only
/// the newest intent survives.
pub fn push_decision(pending: &mut Vec<ScalingDecision>, decision: ScalingDecision) {
    pending.retain(|d| d.service != decision.service);
    pending.push(decision);
}

/// Apply everything that has matured by `now_s` to the instance table and
/// return the applied decisions in service order.
pub fn apply_decisions(
    pending: &mut Vec<ScalingDecision>,
    now_s: f64,
    instances: &mut BTreeMap<String, u32>,
) -> Vec<ScalingDecision> {
    let mut applied: Vec<ScalingDecision> = Vec::new();
    pending.retain(|d| {
        if d.effective_at_s <= now_s {
            applied.push(d.clone());
            false
        } else {
            true
        }
    });
    applied.sort_by(|a, b| a.service.cmp(&b.service));
    for d in &applied {
        instances.insert(d.service.clone(), d.target_instances);
    }
    applied
}

#[cfg(test)]
mod tests {
    use super::*;

    fn decision(service: &str, target: u32, decided: f64, effective: f64) -> ScalingDecision {
        ScalingDecision {
            service: service.into(),
            current_instances: 1,
            target_instances: target,
            reason: ScaleReason::Forecast,
            decided_at_s: decided,
            effective_at_s: effective,
        }
    }

    #[test]
    fn lsram_targets_ceil_of_forecast_over_capacity() {
        // 320 rps at 100 rps per instance: 4 instances.
        assert_eq!(
            decide_lsram(320.0, 100.0, Mode::Normal, 0.0, 1, 0.2).unwrap(),
            4
        );
        // Zero forecast still keeps one instance.
        assert_eq!(
            decide_lsram(0.0, 100.0, Mode::Normal, 0.0, 5, 0.2).unwrap(),
            1
        );
        // Exact multiples need no extra instance.
        assert_eq!(
            decide_lsram(300.0, 100.0, Mode::Normal, 0.0, 1, 0.2).unwrap(),
            3
        );
        assert!(decide_lsram(100.0, 0.0, Mode::Normal, 0.0, 1, 0.2).is_err());
        assert!(decide_lsram(-1.0, 100.0, Mode::Normal, 0.0, 1, 0.2).is_err());
    }

    #[test]
    fn high_volatility_sizes_for_the_window_peak_and_never_shrinks() {
        // Peak 250 with 20% headroom at 100/instance: ceil(3.0) = 3.
        assert_eq!(
            decide_lsram(10.0, 100.0, Mode::HighVolatility, 250.0, 1, 0.2).unwrap(),
            3
        );
        // Current above the peak requirement: hold, never scale down.
        assert_eq!(
            decide_lsram(10.0, 100.0, Mode::HighVolatility, 250.0, 7, 0.2).unwrap(),
            7
        );
    }

    #[test]
    fn hpa_band_behaviour() {
        let cfg = HpaConfig::default();
        // 0.8 utilization on 2 instances: ceil(2*0.8/0.5) = ceil(3.2) = 4.
        assert_eq!(decide_hpa(0.8, 2, &cfg, 0.0).unwrap(), 4);
        // Inside the band: unchanged regardless of how long.
        assert_eq!(decide_hpa(0.4, 3, &cfg, 600.0).unwrap(), 3);
        // Below low but not yet stabilized: unchanged.
        assert_eq!(decide_hpa(0.1, 3, &cfg, 30.0).unwrap(), 3);
        // Sustained below low: ceil(3*0.1/0.3) = 1.
        assert_eq!(decide_hpa(0.1, 3, &cfg, 60.0).unwrap(), 1);
        // Idle never goes to zero.
        assert_eq!(decide_hpa(0.0, 4, &cfg, 120.0).unwrap(), 1);
        assert!(decide_hpa(-0.1, 1, &cfg, 0.0).is_err());
        let bad = HpaConfig {
            low: 0.6,
            high: 0.5,
            ..HpaConfig::default()
        };
        assert!(decide_hpa(0.4, 1, &bad, 0.0).is_err());
    }

    #[test]
    fn startup_delay_holds_scale_ups_until_maturity() {
        let mut pending = vec![decision("a", 4, 10.0, 12.0)];
        let mut instances: BTreeMap<String, u32> = [("a".to_string(), 1)].into();

        assert!(apply_decisions(&mut pending, 10.0, &mut instances).is_empty());
        assert_eq!(instances["a"], 1);
        assert!(apply_decisions(&mut pending, 11.0, &mut instances).is_empty());
        let applied = apply_decisions(&mut pending, 12.0, &mut instances);
        assert_eq!(applied.len(), 1);
        assert_eq!(instances["a"], 4);
        assert!(pending.is_empty());
    }

    #[test]
    fn newer_decisions_supersede_pending_ones() {
        let mut pending = Vec::new();
        push_decision(&mut pending, decision("a", 4, 10.0, 12.0));
        push_decision(&mut pending, decision("b", 2, 10.0, 12.0));
        // At t=11 demand collapses: the scale-down replaces a's pending up.
        push_decision(&mut pending, decision("a", 1, 11.0, 11.0));
        assert_eq!(pending.len(), 2);

        let mut instances: BTreeMap<String, u32> =
            [("a".to_string(), 3), ("b".to_string(), 1)].into();
        let applied = apply_decisions(&mut pending, 11.0, &mut instances);
        assert_eq!(applied.len(), 1);
        assert_eq!(instances["a"], 1, "scale-down is immediate");
        assert_eq!(instances["b"], 1, "b's scale-up still pending");
        apply_decisions(&mut pending, 12.0, &mut instances);
        assert_eq!(instances["b"], 2);
    }
}
