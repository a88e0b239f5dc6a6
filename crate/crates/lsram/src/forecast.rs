//! One-step-ahead load forecasters feeding the scaling decisions.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ForecastError {
    #[error("DomainError: {0}")]
    Domain(String),
}

/// A next-tick load estimate. `cold_start` marks a forecaster that has seen
/// nothing yet; callers should treat the value as "no information", not zero
/// demand.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub rps: f64,
    pub cold_start: bool,
}

/// Which forecaster to build; the serializable half of the configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ForecasterSpec {
    Naive,
    MovingAverage { window: usize },
    DoubleExponential { alpha: f64, beta: f64 },
}

impl Default for ForecasterSpec {
    fn default() -> Self {
        ForecasterSpec::DoubleExponential {
            alpha: 0.5,
            beta: 0.3,
        }
    }
}

impl ForecasterSpec {
    pub fn build(&self) -> Result<Forecaster, ForecastError> {
        match *self {
            ForecasterSpec::Naive => Ok(Forecaster::naive()),
            ForecasterSpec::MovingAverage { window } => Forecaster::moving_average(window),
            ForecasterSpec::DoubleExponential { alpha, beta } => {
                Forecaster::double_exponential(alpha, beta)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Forecaster {
    /// Predicts the last observation.
    Naive { last: Option<f64> },
    /// Mean of the last `window` observations.
    MovingAverage {
        window: usize,
        samples: VecDeque<f64>,
    },
    /// Holt's linear method: level plus trend, so ramps are extrapolated
    /// rather than chased.
    DoubleExponential {
        alpha: f64,
        beta: f64,
        level: Option<f64>,
        trend: f64,
        seen: u64,
    },
}

impl Forecaster {
    pub fn naive() -> Self {
        Forecaster::Naive { last: None }
    }

    pub fn moving_average(window: usize) -> Result<Self, ForecastError> {
        if window == 0 {
            return Err(ForecastError::Domain(
                "moving-average window must be at least 1".into(),
            ));
        }
        Ok(Forecaster::MovingAverage {
            window,
            samples: VecDeque::with_capacity(window),
        })
    }

    pub fn double_exponential(alpha: f64, beta: f64) -> Result<Self, ForecastError> {
        for (name, v) in [("alpha", alpha), ("beta", beta)] {
            if !(v > 0.0 && v < 1.0) {
                return Err(ForecastError::Domain(format!(
                    "{name} must lie in (0, 1), got {v}"
                )));
            }
        }
        Ok(Forecaster::DoubleExponential {
            alpha,
            beta,
            level: None,
            trend: 0.0,
            seen: 0,
        })
    }

    pub fn observe(&mut self, load_rps: f64) -> Result<(), ForecastError> {
        if !load_rps.is_finite() || load_rps < 0.0 {
            return Err(ForecastError::Domain(format!(
                "observed load must be finite and non-negative, got {load_rps}"
            )));
        }
        match self {
            Forecaster::Naive { last } => *last = Some(load_rps),
            Forecaster::MovingAverage { window, samples } => {
                if samples.len() == *window {
                    samples.pop_front();
                }
                samples.push_back(load_rps);
            }
            Forecaster::DoubleExponential {
                alpha,
                beta,
                level,
                trend,
                seen,
            } => {
                match (*seen, *level) {
                    (0, _) | (_, None) => {
                        *level = Some(load_rps);
                        *trend = 0.0;
                    }
                    // Second observation seeds the trend from the first
                    // difference, so a ramp is recognized immediately.
                    (1, Some(prev)) => {
                        *trend = load_rps - prev;
                        *level = Some(load_rps);
                    }
                    (_, Some(prev)) => {
                        let new_level = *alpha * load_rps + (1.0 - *alpha) * (prev + *trend);
                        *trend = *beta * (new_level - prev) + (1.0 - *beta) * *trend;
                        *level = Some(new_level);
                    }
                }
                *seen += 1;
            }
        }
        Ok(())
    }

    /// Forecast for the next tick, clamped at zero. Before any observation
    /// the prediction is flagged `cold_start` with rps 0.
    pub fn predict_next(&self) -> Prediction {
        let (value, cold) = match self {
            Forecaster::Naive { last } => (last.unwrap_or(0.0), last.is_none()),
            Forecaster::MovingAverage { samples, .. } => {
                if samples.is_empty() {
                    (0.0, true)
                } else {
                    (samples.iter().sum::<f64>() / samples.len() as f64, false)
                }
            }
            Forecaster::DoubleExponential { level, trend, .. } => match level {
                None => (0.0, true),
                Some(l) => (l + trend, false),
            },
        };
        Prediction {
            rps: value.max(0.0),
            cold_start: cold,
        }
    }
}
