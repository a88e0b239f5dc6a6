//! Plan maintenance: periodic and event-triggered reallocation,
//! traffic-weighted shared-SLO updates, and admission of new services.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::alloc::{
    allocate_chain, blend_shared, init_shared_pslo, init_shared_slo, AllocError, AllocationConfig,
    AllocationPlan,
};
use crate::graph::{shared_services, Chain, ChainNode, GraphError, ServiceGraph, SharedIndex};
use crate::llp::LlpProfile;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum UpdateError {
    #[error(
        "ShareMismatchError: chain `{chain}` contains shared service `{service}` \
         but has no traffic share"
    )]
    ShareMismatch { chain: String, service: String },
    #[error("MissingAllocationError: shared service `{service}` has no allocation in chain `{chain}`")]
    MissingAllocation { service: String, chain: String },
    #[error("UnknownChainError: `{0}`")]
    UnknownChain(String),
    #[error("service `{0}` is not shared between chains")]
    NotShared(String),
    #[error("DomainError: {0}")]
    Domain(String),
    #[error(transparent)]
    Alloc(#[from] AllocError),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// Fraction of entry traffic flowing to each chain over a measurement window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrafficShares {
    pub window_s: f64,
    x: BTreeMap<String, f64>,
}

impl TrafficShares {
    /// Shares must already be normalized: sum to 1 within 1e-9.
    pub fn new(window_s: f64, x: BTreeMap<String, f64>) -> Result<Self, UpdateError> {
        if !(window_s > 0.0) {
            return Err(UpdateError::Domain(format!(
                "share window must be positive, got {window_s}"
            )));
        }
        for (chain, &v) in &x {
            if !(0.0..=1.0).contains(&v) || !v.is_finite() {
                return Err(UpdateError::Domain(format!(
                    "share of chain `{chain}` must lie in [0, 1], got {v}"
                )));
            }
        }
        let sum: f64 = x.values().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(UpdateError::Domain(format!(
                "shares must sum to 1 within 1e-9, got {sum}"
            )));
        }
        Ok(TrafficShares { window_s, x })
    }

    /// Normalize raw per-chain load totals into shares.
    pub fn from_loads(window_s: f64, loads: &BTreeMap<String, f64>) -> Result<Self, UpdateError> {
        let total: f64 = loads.values().sum();
        if !(total > 0.0) {
            return Err(UpdateError::Domain(
                "cannot derive shares from zero traffic".into(),
            ));
        }
        let x = loads.iter().map(|(k, &v)| (k.clone(), v / total)).collect();
        TrafficShares::new(window_s, x)
    }

    pub fn share(&self, chain: &str) -> Option<f64> {
        self.x.get(chain).copied()
    }

    pub fn as_map(&self) -> &BTreeMap<String, f64> {
        &self.x
    }
}

/// When reallocation runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UpdatePolicy {
    /// Reallocation period, simulated seconds.
    pub period_s: f64,
    pub on_period: bool,
    pub on_env_change: bool,
}

impl Default for UpdatePolicy {
    fn default() -> Self {
        UpdatePolicy {
            period_s: 300.0,
            on_period: true,
            on_env_change: true,
        }
    }
}

impl UpdatePolicy {
    fn validate(&self) -> Result<(), UpdateError> {
        if !(self.period_s > 0.0) {
            return Err(UpdateError::Domain(format!(
                "reallocation period must be positive, got {}",
                self.period_s
            )));
        }
        Ok(())
    }
}

/// Traffic-weighted blend of per-chain budgets for every shared service,
/// with weights renormalized over just the chains containing it. Falls back
/// to the unweighted mean for a service whose containing chains all carry
/// zero traffic.
pub fn update_shared_slo(
    graph: &ServiceGraph,
    plans: &[crate::alloc::ChainPlan],
    shared: &SharedIndex,
    shares: &TrafficShares,
) -> Result<BTreeMap<String, f64>, UpdateError> {
    validate_coverage(graph, plans, shared, shares)?;
    let mut out = blend_shared(graph, plans, shared, |a| a.s_ms, Some(shares.as_map()));
    let means = init_shared_slo(graph, plans, shared);
    for (name, mean) in means {
        out.entry(name).or_insert(mean);
    }
    Ok(out)
}

fn validate_coverage(
    graph: &ServiceGraph,
    plans: &[crate::alloc::ChainPlan],
    shared: &SharedIndex,
    shares: &TrafficShares,
) -> Result<(), UpdateError> {
    for (service, chains) in shared.iter() {
        let name = graph.name(service);
        for chain in chains {
            if shares.share(chain).is_none() {
                return Err(UpdateError::ShareMismatch {
                    chain: chain.clone(),
                    service: name.to_owned(),
                });
            }
            let has_alloc = plans
                .iter()
                .find(|p| &p.chain_id == chain)
                .and_then(|p| p.service(name))
                .is_some();
            if !has_alloc {
                return Err(UpdateError::MissingAllocation {
                    service: name.to_owned(),
                    chain: chain.clone(),
                });
            }
        }
    }
    Ok(())
}

/// Owns the graph, its chains, and the active plan; the single writer of the
/// allocation state. Readers take plan snapshots by reference between ticks.
#[derive(Debug, Clone)]
pub struct PlanController {
    graph: ServiceGraph,
    chains: Vec<Chain>,
    alloc_cfg: AllocationConfig,
    policy: UpdatePolicy,
    plan: AllocationPlan,
    last_realloc_s: f64,
    shares: Option<TrafficShares>,
}

impl PlanController {
    pub fn new(
        graph: ServiceGraph,
        alloc_cfg: AllocationConfig,
        policy: UpdatePolicy,
    ) -> Result<Self, UpdateError> {
        policy.validate()?;
        let chains = graph.extract_chains()?;
        let plan = AllocationPlan::build(&graph, &chains, &alloc_cfg)?;
        Ok(PlanController {
            graph,
            chains,
            alloc_cfg,
            policy,
            plan,
            last_realloc_s: 0.0,
            shares: None,
        })
    }

    pub fn graph(&self) -> &ServiceGraph {
        &self.graph
    }

    pub fn chains(&self) -> &[Chain] {
        &self.chains
    }

    pub fn plan(&self) -> &AllocationPlan {
        &self.plan
    }

    pub fn set_shares(&mut self, shares: TrafficShares) {
        self.shares = Some(shares);
    }

    /// Recompute the plan when the period elapsed or the environment changed.
    /// Returns whether a reallocation happened. On error the previous plan
    /// stays active.
    pub fn maybe_reallocate(
        &mut self,
        now_s: f64,
        env_changed: bool,
    ) -> Result<bool, UpdateError> {
        let period_hit = self.policy.on_period
            && now_s - self.last_realloc_s >= self.policy.period_s;
        let event_hit = self.policy.on_env_change && env_changed;
        if !(period_hit || event_hit) {
            return Ok(false);
        }

        let plans = self
            .chains
            .iter()
            .map(|c| allocate_chain(self.graph.profiles(), c, &self.alloc_cfg))
            .collect::<Result<Vec<_>, _>>()?;
        let shared_idx = shared_services(&self.chains);
        let (shared, shared_pslo) = match &self.shares {
            Some(shares) => {
                let s = update_shared_slo(&self.graph, &plans, &shared_idx, shares)?;
                let mut p =
                    blend_shared(&self.graph, &plans, &shared_idx, |a| a.pslo_ms, Some(shares.as_map()));
                for (name, mean) in init_shared_pslo(&self.graph, &plans, &shared_idx) {
                    p.entry(name).or_insert(mean);
                }
                (s, p)
            }
            None => (
                init_shared_slo(&self.graph, &plans, &shared_idx),
                init_shared_pslo(&self.graph, &plans, &shared_idx),
            ),
        };

        self.plan = AllocationPlan {
            chains: plans,
            shared,
            shared_pslo,
        };
        self.last_realloc_s = now_s;
        Ok(true)
    }

    /// Append a new service to a chain and reallocate it. When the new
    /// service hangs off a shared node, that node's blended SLO grows by
    /// SLO_new / k (k = number of chains through the node). Fails without
    /// touching state when the grown chain no longer fits its SLO.
    pub fn admit_new_service(
        &mut self,
        chain_id: &str,
        profile: LlpProfile,
        attaches_to_shared: Option<&str>,
    ) -> Result<(), UpdateError> {
        let pos = self
            .chains
            .iter()
            .position(|c| c.id == chain_id)
            .ok_or_else(|| UpdateError::UnknownChain(chain_id.to_owned()))?;
        if let Some(name) = attaches_to_shared {
            if !self.plan.shared.contains_key(name) {
                return Err(UpdateError::NotShared(name.to_owned()));
            }
        }
        if self.graph.index_of(&profile.name).is_some() {
            return Err(UpdateError::Domain(format!(
                "service `{}` already exists",
                profile.name
            )));
        }

        let mut profiles = self.graph.profiles().to_vec();
        profiles.push(profile.clone());
        let new_id = profiles.len() - 1;
        let mut grown = self.chains[pos].clone();
        grown.members.push(ChainNode::Atomic(new_id));

        let new_chain_plan = allocate_chain(&profiles, &grown, &self.alloc_cfg)?;
        let slo_new = new_chain_plan
            .service(&profile.name)
            .expect("new member allocated")
            .s_ms;

        // Past the fallible part; commit.
        let added = self.graph.add_service(profile)?;
        debug_assert_eq!(added, new_id);
        self.chains[pos] = grown;
        self.plan.chains[pos] = new_chain_plan;
        if let Some(name) = attaches_to_shared {
            let shared_idx = shared_services(&self.chains);
            let service = self
                .graph
                .index_of(name)
                .ok_or_else(|| UpdateError::NotShared(name.to_owned()))?;
            let k = shared_idx.degree(service);
            if k < 2 {
                return Err(UpdateError::NotShared(name.to_owned()));
            }
            // The blended scaling target is left to the next periodic
            // reallocation; the increment rule only defines the budget side.
            *self.plan.shared.get_mut(name).expect("checked above") += slo_new / k as f64;
        }
        Ok(())
    }
}
