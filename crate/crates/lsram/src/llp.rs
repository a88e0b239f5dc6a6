//! Load-latency profiles.
//!
//! Each microservice is described by R = tau * phi(lambda / mu): a zero-load
//! latency floor `tau_ms` stretched by a dimensionless curve `phi` of the
//! per-instance utilization. The default parametric shape phi(x) = 1 / (1 - x)
//! matches an M/M/1-style queue; profiled services can supply an empirical
//! multiplier table instead.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Absolute tolerance, in utilization, for the numeric inverse of a table curve.
const INVERSE_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LlpError {
    #[error("SaturationError: utilization {rho} >= 1 for service `{service}`")]
    Saturation { service: String, rho: f64 },
    #[error("DomainError: {0}")]
    Domain(String),
    #[error(
        "InfeasibleTargetError: latency target {target_ms}ms is at or below the \
         zero-load floor {tau_ms}ms of service `{service}`"
    )]
    InfeasibleTarget {
        service: String,
        target_ms: f64,
        tau_ms: f64,
    },
}

/// Shape of the latency multiplier phi.
///
/// Invariants in either form: phi(0) = 1, phi strictly increasing on [0, 1),
/// phi(x) -> inf as x -> 1-.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum CurveShape {
    /// phi(x) = 1 / (1 - x).
    #[default]
    Parametric,
    /// Piecewise-linear (utilization, multiplier) knots, first knot (0, 1),
    /// both coordinates strictly increasing, utilizations below 1. Past the
    /// last knot the curve continues as m_k * (1 - u_k) / (1 - x), which keeps
    /// it strictly increasing and divergent at saturation.
    Table(Vec<(f64, f64)>),
}

/// Load-latency profile of one microservice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ProfileRepr", into = "ProfileRepr")]
pub struct LlpProfile {
    pub name: String,
    /// Zero-load latency floor, milliseconds.
    pub tau_ms: f64,
    /// Per-instance service rate, requests per second.
    pub mu_rps: f64,
    /// Relative cost weight of one instance.
    pub sigma: f64,
    pub shape: CurveShape,
}

/// Wire form: `shape` is "parametric" or "table"; `table` carries the knots.
#[derive(Serialize, Deserialize)]
struct ProfileRepr {
    name: String,
    tau_ms: f64,
    mu_rps: f64,
    sigma: f64,
    #[serde(default = "default_shape")]
    shape: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    table: Option<Vec<(f64, f64)>>,
}

fn default_shape() -> String {
    "parametric".to_owned()
}

impl TryFrom<ProfileRepr> for LlpProfile {
    type Error = LlpError;

    fn try_from(r: ProfileRepr) -> Result<Self, LlpError> {
        let shape = match (r.shape.as_str(), r.table) {
            ("parametric", None) => CurveShape::Parametric,
            ("parametric", Some(_)) => {
                return Err(LlpError::Domain(format!(
                    "service `{}`: shape \"parametric\" does not take a table",
                    r.name
                )))
            }
            ("table", Some(knots)) => CurveShape::Table(knots),
            ("table", None) => {
                return Err(LlpError::Domain(format!(
                    "service `{}`: shape \"table\" requires a table",
                    r.name
                )))
            }
            (other, _) => {
                return Err(LlpError::Domain(format!(
                    "service `{}`: unknown shape \"{other}\" (expected \"parametric\" or \"table\")",
                    r.name
                )))
            }
        };
        LlpProfile::new(r.name, r.tau_ms, r.mu_rps, r.sigma, shape)
    }
}

impl From<LlpProfile> for ProfileRepr {
    fn from(p: LlpProfile) -> Self {
        let (shape, table) = match p.shape {
            CurveShape::Parametric => ("parametric".to_owned(), None),
            CurveShape::Table(knots) => ("table".to_owned(), Some(knots)),
        };
        ProfileRepr {
            name: p.name,
            tau_ms: p.tau_ms,
            mu_rps: p.mu_rps,
            sigma: p.sigma,
            shape,
            table,
        }
    }
}

impl LlpProfile {
    pub fn new(
        name: impl Into<String>,
        tau_ms: f64,
        mu_rps: f64,
        sigma: f64,
        shape: CurveShape,
    ) -> Result<Self, LlpError> {
        let name = name.into();
        for (label, v) in [("tau_ms", tau_ms), ("mu_rps", mu_rps), ("sigma", sigma)] {
            if !v.is_finite() || v <= 0.0 {
                return Err(LlpError::Domain(format!(
                    "service `{name}`: {label} must be finite and positive, got {v}"
                )));
            }
        }
        if let CurveShape::Table(knots) = &shape {
            validate_table(&name, knots)?;
        }
        Ok(LlpProfile {
            name,
            tau_ms,
            mu_rps,
            sigma,
            shape,
        })
    }

    pub fn parametric(
        name: impl Into<String>,
        tau_ms: f64,
        mu_rps: f64,
        sigma: f64,
    ) -> Result<Self, LlpError> {
        Self::new(name, tau_ms, mu_rps, sigma, CurveShape::Parametric)
    }

    fn phi(&self, rho: f64) -> f64 {
        match &self.shape {
            CurveShape::Parametric => 1.0 / (1.0 - rho),
            CurveShape::Table(knots) => table_phi(knots, rho),
        }
    }

    /// Modeled latency (ms) at per-instance utilization `rho`.
    pub fn latency_at(&self, rho: f64) -> Result<f64, LlpError> {
        if rho < 0.0 || rho.is_nan() {
            return Err(LlpError::Domain(format!(
                "service `{}`: utilization must be in [0, 1), got {rho}",
                self.name
            )));
        }
        if rho >= 1.0 {
            return Err(LlpError::Saturation {
                service: self.name.clone(),
                rho,
            });
        }
        Ok(self.tau_ms * self.phi(rho))
    }

    /// Largest per-instance arrival rate (rps) whose modeled latency stays
    /// within `slo_ms`: f(s) = mu * phi^-1(s / tau).
    pub fn capacity_at(&self, slo_ms: f64) -> Result<f64, LlpError> {
        if !slo_ms.is_finite() || slo_ms <= self.tau_ms {
            return Err(LlpError::InfeasibleTarget {
                service: self.name.clone(),
                target_ms: slo_ms,
                tau_ms: self.tau_ms,
            });
        }
        let y = slo_ms / self.tau_ms;
        let rho = match &self.shape {
            CurveShape::Parametric => 1.0 - 1.0 / y,
            CurveShape::Table(knots) => {
                let &(u_last, m_last) = knots.last().expect("validated non-empty");
                if y > m_last {
                    1.0 - m_last * (1.0 - u_last) / y
                } else {
                    bisect_table(knots, y)
                }
            }
        };
        Ok(self.mu_rps * rho)
    }

    /// Relative cost of holding latency target `slo_ms`: sigma / f(slo_ms).
    pub fn relative_cost(&self, slo_ms: f64) -> Result<f64, LlpError> {
        Ok(self.sigma / self.capacity_at(slo_ms)?)
    }

    /// Drop in relative cost from relaxing the target by one block.
    pub fn marginal_saving(&self, s_ms: f64, block_ms: f64) -> Result<f64, LlpError> {
        if !block_ms.is_finite() || block_ms < 0.0 {
            return Err(LlpError::Domain(format!(
                "service `{}`: block must be non-negative, got {block_ms}",
                self.name
            )));
        }
        if block_ms == 0.0 {
            return Ok(0.0);
        }
        Ok(self.relative_cost(s_ms)? - self.relative_cost(s_ms + block_ms)?)
    }
}

fn validate_table(name: &str, knots: &[(f64, f64)]) -> Result<(), LlpError> {
    let fail = |msg: String| Err(LlpError::Domain(format!("service `{name}`: {msg}")));
    match knots.first() {
        None => return fail("table must have at least one knot".into()),
        Some(&(u0, m0)) => {
            if u0 != 0.0 || m0 != 1.0 {
                return fail(format!("table must start at (0, 1), got ({u0}, {m0})"));
            }
        }
    }
    for w in knots.windows(2) {
        let ((u0, m0), (u1, m1)) = (w[0], w[1]);
        if !(u1.is_finite() && m1.is_finite()) || u1 <= u0 || m1 <= m0 {
            return fail(format!(
                "table knots must strictly increase in both coordinates, got ({u0}, {m0}) then ({u1}, {m1})"
            ));
        }
    }
    let &(u_last, _) = knots.last().expect("non-empty");
    if u_last >= 1.0 {
        return fail(format!("table utilizations must stay below 1, got {u_last}"));
    }
    Ok(())
}

fn table_phi(knots: &[(f64, f64)], rho: f64) -> f64 {
    let &(u_last, m_last) = knots.last().expect("validated non-empty");
    if rho > u_last {
        return m_last * (1.0 - u_last) / (1.0 - rho);
    }
    let hi = knots.partition_point(|&(u, _)| u < rho);
    if hi == 0 {
        return knots[0].1;
    }
    let (u0, m0) = knots[hi - 1];
    let (u1, m1) = knots[hi];
    m0 + (m1 - m0) * (rho - u0) / (u1 - u0)
}

/// Bisection for the utilization where the table curve reaches multiplier `y`.
/// Pre: 1 < y <= last knot multiplier.
fn bisect_table(knots: &[(f64, f64)], y: f64) -> f64 {
    let (mut lo, mut hi) = (0.0, knots.last().expect("non-empty").0);
    while hi - lo > INVERSE_TOL {
        let mid = 0.5 * (lo + hi);
        if table_phi(knots, mid) < y {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}
