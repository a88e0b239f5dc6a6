//! Oscillation measurement and the Normal / HighVolatility mode machine.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::llp::{LlpError, LlpProfile};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModeError {
    #[error("InsufficientSamplesError: need at least 2 load samples, have {0}")]
    InsufficientSamples(usize),
    #[error("ZeroMeanError: oscillation is undefined for zero mean load")]
    ZeroMean,
    #[error(transparent)]
    Llp(#[from] LlpError),
}

/// Bounded FIFO of recent load samples for one chain.
#[derive(Debug, Clone, PartialEq)]
pub struct OscillationWindow {
    capacity: usize,
    samples: VecDeque<f64>,
}

impl OscillationWindow {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity >= 2, "window must hold at least 2 samples");
        OscillationWindow {
            capacity,
            samples: VecDeque::with_capacity(capacity),
        }
    }

    pub fn push(&mut self, load_rps: f64) {
        if self.samples.len() == self.capacity {
            self.samples.pop_front();
        }
        self.samples.push_back(load_rps);
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn max(&self) -> Option<f64> {
        self.samples.iter().cloned().fold(None, |m, x| {
            Some(match m {
                None => x,
                Some(m) => m.max(x),
            })
        })
    }

    /// Coefficient of variation of the window: population standard deviation
    /// over the mean. Scale-free, so 50/150 oscillates exactly as hard as
    /// 200/600.
    pub fn oscillation_factor(&self) -> Result<f64, ModeError> {
        let n = self.samples.len();
        if n < 2 {
            return Err(ModeError::InsufficientSamples(n));
        }
        let mean = self.samples.iter().sum::<f64>() / n as f64;
        if !(mean > 0.0) {
            return Err(ModeError::ZeroMean);
        }
        let var = self
            .samples
            .iter()
            .map(|x| (x - mean) * (x - mean))
            .sum::<f64>()
            / n as f64;
        Ok(var.sqrt() / mean)
    }
}

/// Oscillation capacity threshold: volatility tolerance scales inversely with
/// how hard the latency target is to buy. A tight target (low capacity per
/// instance, high pslo pressure) tolerates less oscillation before switching.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OctModel {
    pub kappa: f64,
    pub oct_min: f64,
    pub oct_max: f64,
}

impl Default for OctModel {
    fn default() -> Self {
        OctModel {
            kappa: 4.0,
            oct_min: 0.05,
            oct_max: 0.8,
        }
    }
}

impl OctModel {
    pub fn validate(&self) -> Result<(), ModeError> {
        if !(self.kappa > 0.0 && self.oct_min > 0.0 && self.oct_min <= self.oct_max) {
            return Err(ModeError::Llp(LlpError::Domain(format!(
                "need kappa > 0 and 0 < oct_min <= oct_max, got kappa={} min={} max={}",
                self.kappa, self.oct_min, self.oct_max
            ))));
        }
        Ok(())
    }

    /// OCT for a service holding latency target `pslo_ms`:
    /// clamp(kappa / g, [oct_min, oct_max]) with g = pslo^2 / capacity(pslo).
    pub fn oct_for(&self, pslo_ms: f64, profile: &LlpProfile) -> Result<f64, ModeError> {
        self.validate()?;
        let capacity = profile.capacity_at(pslo_ms)?;
        let g = pslo_ms * pslo_ms / capacity;
        Ok((self.kappa / g).clamp(self.oct_min, self.oct_max))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Normal,
    HighVolatility,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModeTransition {
    pub at_s: f64,
    pub to: Mode,
}

/// Hysteresis state machine. Entry into HighVolatility is immediate (on
/// oscillation crossing the threshold or on an environment change); exit
/// requires the oscillation to stay strictly under the threshold for the
/// whole cooldown.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeState {
    pub mode: Mode,
    pub entered_at_s: f64,
    pub cooldown_s: f64,
    below_since_s: Option<f64>,
}

impl ModeState {
    pub fn new(cooldown_s: f64) -> Self {
        assert!(cooldown_s >= 0.0, "cooldown must be non-negative");
        ModeState {
            mode: Mode::Normal,
            entered_at_s: 0.0,
            cooldown_s,
            below_since_s: None,
        }
    }

    pub fn evaluate(
        &mut self,
        oscillation: f64,
        oct: f64,
        env_changed: bool,
        now_s: f64,
    ) -> Option<ModeTransition> {
        let hot = oscillation >= oct || env_changed;
        match self.mode {
            Mode::Normal => {
                if hot {
                    self.mode = Mode::HighVolatility;
                    self.entered_at_s = now_s;
                    self.below_since_s = None;
                    return Some(ModeTransition {
                        at_s: now_s,
                        to: Mode::HighVolatility,
                    });
                }
                None
            }
            Mode::HighVolatility => {
                if hot {
                    self.below_since_s = None;
                    return None;
                }
                let since = *self.below_since_s.get_or_insert(now_s);
                if now_s - since >= self.cooldown_s {
                    self.mode = Mode::Normal;
                    self.entered_at_s = now_s;
                    self.below_since_s = None;
                    return Some(ModeTransition {
                        at_s: now_s,
                        to: Mode::Normal,
                    });
                }
                None
            }
        }
    }
}
