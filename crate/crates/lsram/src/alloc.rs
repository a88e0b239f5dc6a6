//! Block-based SLO allocation.
//!
//! An end-to-end SLO is cut into `d` equal blocks. Every chain member is
//! preallocated enough blocks to clear the extremum of its relative-cost
//! curve, then the free blocks are handed out one at a time to the member
//! whose relative cost drops the most, tracked in a max-priority heap whose
//! only key update per iteration is the winner's. Budgets in milliseconds are
//! always `blocks * block_ms`; the sub-block remainder of the SLO goes to the
//! member that won the final iteration.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{Chain, ChainNode, CompositeKind, ServiceGraph, SharedIndex};
use crate::llp::{LlpError, LlpProfile};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AllocError {
    #[error("ConfigError: {0}")]
    Config(String),
    #[error(
        "InfeasiblePreallocationError: chain `{chain}` needs {needed} blocks \
         to preallocate every member past its cost extremum but only {available} exist"
    )]
    InfeasiblePreallocation {
        chain: String,
        needed: u64,
        available: u64,
    },
    #[error("DomainError: {0}")]
    Domain(String),
    #[error("chain `{0}` has no members")]
    EmptyChain(String),
    #[error(transparent)]
    Llp(#[from] LlpError),
}

/// What to do with the sub-block milliseconds left after integer block cuts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RemainderPolicy {
    /// Credit the member that received the final greedy block.
    #[default]
    FinalWinner,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllocationConfig {
    /// Number of SLO blocks `d`. The default keeps blocks around 4ms for
    /// typical SLOs; values from 800 to 1200 behave similarly.
    pub blocks: u32,
    /// Blocks granted to every member before gradient descent starts.
    pub preallocated_blocks: u32,
    /// Preallocation must push each budget above tau * (1 + epsilon) so the
    /// descent starts past the relative-cost extremum.
    pub extremum_epsilon: f64,
    pub remainder: RemainderPolicy,
}

impl Default for AllocationConfig {
    fn default() -> Self {
        AllocationConfig {
            blocks: 1000,
            preallocated_blocks: 10,
            extremum_epsilon: 0.05,
            remainder: RemainderPolicy::FinalWinner,
        }
    }
}

impl AllocationConfig {
    fn validate(&self) -> Result<(), AllocError> {
        if self.blocks == 0 {
            return Err(AllocError::Config("blocks must be at least 1".into()));
        }
        if self.preallocated_blocks == 0 {
            return Err(AllocError::Config(
                "preallocated_blocks must be at least 1".into(),
            ));
        }
        if !self.extremum_epsilon.is_finite() || self.extremum_epsilon < 0.0 {
            return Err(AllocError::Config(format!(
                "extremum_epsilon must be finite and non-negative, got {}",
                self.extremum_epsilon
            )));
        }
        Ok(())
    }
}

/// Final budget of one microservice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServiceAllocation {
    pub name: String,
    /// Latency budget inside the chain, ms.
    pub s_ms: f64,
    /// Scaling target sqrt(slo * s), ms.
    pub pslo_ms: f64,
    /// Per-instance admission threshold f(pslo), rps.
    pub capacity_rps: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainPlan {
    pub chain_id: String,
    pub slo_ms: f64,
    pub block_ms: f64,
    /// Budget of each top-level chain member, aligned with the chain's member
    /// list; these sum to slo_ms. Inside a fork-join member every branch's
    /// budgets sum to the member budget (branches overlap in time).
    pub member_budgets_ms: Vec<f64>,
    /// Every atomic service of the chain in deterministic chain order.
    pub members: Vec<ServiceAllocation>,
}

/// Allocations for a whole graph: one plan per chain plus the blended budgets
/// of services shared between chains.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllocationPlan {
    pub chains: Vec<ChainPlan>,
    /// Blended SLO resource per shared service, ms.
    pub shared: BTreeMap<String, f64>,
    /// Blended scaling target per shared service, ms (same weights as `shared`).
    pub shared_pslo: BTreeMap<String, f64>,
}

/// sqrt(slo * s): the tail-aware per-service latency target. Budgets live on
/// a right triangle against the end-to-end SLO, so targets may sum past the
/// SLO while their squares stay conserved.
pub fn pslo_transform(slo_ms: f64, s_ms: f64) -> Result<f64, AllocError> {
    if !(slo_ms.is_finite() && slo_ms > 0.0) {
        return Err(AllocError::Domain(format!(
            "pslo transform needs a positive SLO, got {slo_ms}"
        )));
    }
    if !(s_ms > 0.0) || s_ms > slo_ms {
        return Err(AllocError::Domain(format!(
            "pslo transform needs 0 < s <= slo, got s={s_ms} slo={slo_ms}"
        )));
    }
    Ok((slo_ms * s_ms).sqrt())
}

/// Baseline split: shares proportional to average service time.
pub fn proportional_split(service_times_ms: &[f64], slo_ms: f64) -> Result<Vec<f64>, AllocError> {
    if service_times_ms.is_empty() {
        return Err(AllocError::Domain("no service times given".into()));
    }
    if !(slo_ms.is_finite() && slo_ms > 0.0) {
        return Err(AllocError::Domain(format!(
            "proportional split needs a positive SLO, got {slo_ms}"
        )));
    }
    for &t in service_times_ms {
        if !(t.is_finite() && t > 0.0) {
            return Err(AllocError::Domain(format!(
                "service times must be finite and positive, got {t}"
            )));
        }
    }
    let total: f64 = service_times_ms.iter().sum();
    Ok(service_times_ms
        .iter()
        .map(|&t| slo_ms * (t / total))
        .collect())
}

/// Blocks a member needs up front: the configured floor, raised if necessary
/// to the smallest count whose budget exceeds tau * (1 + epsilon) so descent
/// starts past the relative-cost extremum.
pub fn required_blocks(tau_ms: f64, block_ms: f64, base_blocks: u32, epsilon: f64) -> u64 {
    let crossing = (tau_ms * (1.0 + epsilon) / block_ms).floor() as u64 + 1;
    crossing.max(base_blocks as u64)
}

/// Mean of the per-chain budgets for every service shared between chains.
pub fn init_shared_slo(
    graph: &ServiceGraph,
    plans: &[ChainPlan],
    shared: &SharedIndex,
) -> BTreeMap<String, f64> {
    blend_shared(graph, plans, shared, |a| a.s_ms, None)
}

/// Same blend over the pslo targets (used as the shared runtime threshold).
pub fn init_shared_pslo(
    graph: &ServiceGraph,
    plans: &[ChainPlan],
    shared: &SharedIndex,
) -> BTreeMap<String, f64> {
    blend_shared(graph, plans, shared, |a| a.pslo_ms, None)
}

/// Weighted blend of a per-chain allocation field. `weights` maps chain id to
/// traffic share; weights are renormalized over the chains that actually
/// contain each service. None means the unweighted mean.
pub(crate) fn blend_shared(
    graph: &ServiceGraph,
    plans: &[ChainPlan],
    shared: &SharedIndex,
    field: impl Fn(&ServiceAllocation) -> f64,
    weights: Option<&BTreeMap<String, f64>>,
) -> BTreeMap<String, f64> {
    let mut out = BTreeMap::new();
    for (service, chains) in shared.iter() {
        let name = graph.name(service);
        let mut acc = 0.0;
        let mut norm = 0.0;
        for chain_id in chains {
            let Some(plan) = plans.iter().find(|p| &p.chain_id == chain_id) else {
                continue;
            };
            let Some(alloc) = plan.members.iter().find(|m| m.name == name) else {
                continue;
            };
            let w = match weights {
                Some(map) => map.get(chain_id).copied().unwrap_or(0.0),
                None => 1.0,
            };
            acc += w * field(alloc);
            norm += w;
        }
        if norm > 0.0 {
            out.insert(name.to_owned(), acc / norm);
        }
    }
    out
}

impl AllocationPlan {
    /// Allocate every chain and blend the shared services (unweighted init).
    pub fn build(
        graph: &ServiceGraph,
        chains: &[Chain],
        cfg: &AllocationConfig,
    ) -> Result<AllocationPlan, AllocError> {
        let plans = chains
            .iter()
            .map(|c| allocate_chain(graph.profiles(), c, cfg))
            .collect::<Result<Vec<_>, _>>()?;
        let shared_idx = crate::graph::shared_services(chains);
        let shared = init_shared_slo(graph, &plans, &shared_idx);
        let shared_pslo = init_shared_pslo(graph, &plans, &shared_idx);
        Ok(AllocationPlan {
            chains: plans,
            shared,
            shared_pslo,
        })
    }

    pub fn chain(&self, chain_id: &str) -> Option<&ChainPlan> {
        self.chains.iter().find(|c| c.chain_id == chain_id)
    }
}

impl ChainPlan {
    pub fn service(&self, name: &str) -> Option<&ServiceAllocation> {
        self.members.iter().find(|m| m.name == name)
    }

    pub fn service_mut(&mut self, name: &str) -> Option<&mut ServiceAllocation> {
        self.members.iter_mut().find(|m| m.name == name)
    }

    /// Total relative cost of the chain's final budgets.
    pub fn total_relative_cost(&self, profiles: &[LlpProfile]) -> Result<f64, AllocError> {
        let by_name: BTreeMap<&str, &LlpProfile> =
            profiles.iter().map(|p| (p.name.as_str(), p)).collect();
        let mut total = 0.0;
        for m in &self.members {
            let p = by_name.get(m.name.as_str()).ok_or_else(|| {
                AllocError::Domain(format!("no profile for service `{}`", m.name))
            })?;
            total += p.relative_cost(m.s_ms)?;
        }
        Ok(total)
    }
}

/// Budget state of one chain member during descent.
enum BudgetNode {
    Atomic {
        service: usize,
        blocks: u64,
        extra_ms: f64,
    },
    Composite {
        kind: CompositeKind,
        blocks: u64,
        extra_ms: f64,
        branches: Vec<Vec<BudgetNode>>,
    },
}

impl BudgetNode {
    fn blocks(&self) -> u64 {
        match self {
            BudgetNode::Atomic { blocks, .. } | BudgetNode::Composite { blocks, .. } => *blocks,
        }
    }

    fn s_ms(&self, block_ms: f64) -> f64 {
        match self {
            BudgetNode::Atomic { blocks, extra_ms, .. }
            | BudgetNode::Composite { blocks, extra_ms, .. } => {
                *blocks as f64 * block_ms + *extra_ms
            }
        }
    }
}

/// Marginal saving of granting the node one more block.
///
/// A sequential region passes the block to its best internal member; a
/// fork-join region's deadline covers every branch at once, so branch savings
/// add and a commit credits each branch's best member.
fn node_saving(node: &BudgetNode, profiles: &[LlpProfile], block_ms: f64) -> f64 {
    match node {
        BudgetNode::Atomic { service, .. } => profiles[*service]
            .marginal_saving(node.s_ms(block_ms), block_ms)
            .expect("preallocation keeps budgets past tau"),
        BudgetNode::Composite { kind, branches, .. } => {
            let best = |branch: &[BudgetNode]| {
                branch
                    .iter()
                    .map(|n| node_saving(n, profiles, block_ms))
                    .fold(f64::NEG_INFINITY, f64::max)
            };
            match kind {
                CompositeKind::Sequential => branches
                    .iter()
                    .flat_map(|b| b.iter())
                    .map(|n| node_saving(n, profiles, block_ms))
                    .fold(0.0, f64::max),
                CompositeKind::ParallelFanout | CompositeKind::DynamicBranch => branches
                    .iter()
                    .filter(|b| !b.is_empty())
                    .map(|b| best(b))
                    .sum(),
            }
        }
    }
}

/// Index of the branch node with the best saving; first wins ties.
fn best_in(branch: &[BudgetNode], profiles: &[LlpProfile], block_ms: f64) -> usize {
    let mut best = 0;
    let mut best_saving = f64::NEG_INFINITY;
    for (i, n) in branch.iter().enumerate() {
        let s = node_saving(n, profiles, block_ms);
        if s > best_saving {
            best_saving = s;
            best = i;
        }
    }
    best
}

fn commit_block(node: &mut BudgetNode, profiles: &[LlpProfile], block_ms: f64) {
    match node {
        BudgetNode::Atomic { blocks, .. } => *blocks += 1,
        BudgetNode::Composite {
            kind,
            blocks,
            branches,
            ..
        } => {
            *blocks += 1;
            match kind {
                CompositeKind::Sequential => {
                    let all: Vec<&BudgetNode> = branches.iter().flat_map(|b| b.iter()).collect();
                    if all.is_empty() {
                        return;
                    }
                    let mut best = 0;
                    let mut best_saving = f64::NEG_INFINITY;
                    for (i, n) in all.iter().enumerate() {
                        let s = node_saving(n, profiles, block_ms);
                        if s > best_saving {
                            best_saving = s;
                            best = i;
                        }
                    }
                    let mut seen = 0;
                    for branch in branches.iter_mut() {
                        if best < seen + branch.len() {
                            commit_block(&mut branch[best - seen], profiles, block_ms);
                            return;
                        }
                        seen += branch.len();
                    }
                }
                CompositeKind::ParallelFanout | CompositeKind::DynamicBranch => {
                    for branch in branches.iter_mut() {
                        if branch.is_empty() {
                            continue;
                        }
                        let i = best_in(branch, profiles, block_ms);
                        commit_block(&mut branch[i], profiles, block_ms);
                    }
                }
            }
        }
    }
}

/// Route remainder milliseconds along the current best-saving path, keeping
/// branch budgets equal to their fork-join node budget.
fn add_extra_ms(node: &mut BudgetNode, r: f64, profiles: &[LlpProfile], block_ms: f64) {
    match node {
        BudgetNode::Atomic { extra_ms, .. } => *extra_ms += r,
        BudgetNode::Composite {
            kind,
            extra_ms,
            branches,
            ..
        } => {
            *extra_ms += r;
            match kind {
                CompositeKind::Sequential => {
                    let all: Vec<&BudgetNode> = branches.iter().flat_map(|b| b.iter()).collect();
                    if all.is_empty() {
                        return;
                    }
                    let mut best = 0;
                    let mut best_saving = f64::NEG_INFINITY;
                    for (i, n) in all.iter().enumerate() {
                        let s = node_saving(n, profiles, block_ms);
                        if s > best_saving {
                            best_saving = s;
                            best = i;
                        }
                    }
                    let mut seen = 0;
                    for branch in branches.iter_mut() {
                        if best < seen + branch.len() {
                            add_extra_ms(&mut branch[best - seen], r, profiles, block_ms);
                            return;
                        }
                        seen += branch.len();
                    }
                }
                CompositeKind::ParallelFanout | CompositeKind::DynamicBranch => {
                    for branch in branches.iter_mut() {
                        if branch.is_empty() {
                            continue;
                        }
                        let i = best_in(branch, profiles, block_ms);
                        add_extra_ms(&mut branch[i], r, profiles, block_ms);
                    }
                }
            }
        }
    }
}

/// Build the budget tree with preallocation already applied. Fork-join nodes
/// start at their most demanding branch's sum; lighter branches are topped up
/// so every non-empty branch matches the node budget.
fn build_budget(
    node: &ChainNode,
    profiles: &[LlpProfile],
    block_ms: f64,
    cfg: &AllocationConfig,
) -> BudgetNode {
    match node {
        ChainNode::Atomic(service) => BudgetNode::Atomic {
            service: *service,
            blocks: required_blocks(
                profiles[*service].tau_ms,
                block_ms,
                cfg.preallocated_blocks,
                cfg.extremum_epsilon,
            ),
            extra_ms: 0.0,
        },
        ChainNode::Abstract(a) => {
            let mut branches: Vec<Vec<BudgetNode>> = a
                .branches
                .iter()
                .map(|b| {
                    b.iter()
                        .map(|n| build_budget(n, profiles, block_ms, cfg))
                        .collect()
                })
                .collect();
            let branch_sum =
                |b: &[BudgetNode]| b.iter().map(BudgetNode::blocks).sum::<u64>();
            let blocks = branches
                .iter()
                .map(|b| branch_sum(b))
                .max()
                .unwrap_or(0)
                .max(1);
            for branch in branches.iter_mut() {
                if branch.is_empty() {
                    continue;
                }
                for _ in branch_sum(branch)..blocks {
                    let i = best_in(branch, profiles, block_ms);
                    commit_block(&mut branch[i], profiles, block_ms);
                }
            }
            BudgetNode::Composite {
                kind: a.kind,
                blocks,
                extra_ms: 0.0,
                branches,
            }
        }
    }
}

fn tree_cost(roots: &[BudgetNode], profiles: &[LlpProfile], block_ms: f64) -> f64 {
    fn walk(node: &BudgetNode, profiles: &[LlpProfile], block_ms: f64, acc: &mut f64) {
        match node {
            BudgetNode::Atomic { service, .. } => {
                *acc += profiles[*service]
                    .relative_cost(node.s_ms(block_ms))
                    .expect("budgets stay past tau");
            }
            BudgetNode::Composite { branches, .. } => {
                for b in branches {
                    for n in b {
                        walk(n, profiles, block_ms, acc);
                    }
                }
            }
        }
    }
    let mut acc = 0.0;
    for r in roots {
        walk(r, profiles, block_ms, &mut acc);
    }
    acc
}

/// Max-heap entry: highest saving first, lowest member index on ties.
struct HeapEntry {
    saving: f64,
    index: usize,
}

impl PartialEq for HeapEntry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for HeapEntry {}
impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        self.saving
            .total_cmp(&other.saving)
            .then_with(|| other.index.cmp(&self.index))
    }
}

/// Split a chain's SLO across its members by block gradient descent.
pub fn allocate_chain(
    profiles: &[LlpProfile],
    chain: &Chain,
    cfg: &AllocationConfig,
) -> Result<ChainPlan, AllocError> {
    allocate_chain_impl(profiles, chain, cfg, None)
}

/// Same as allocate_chain, also collecting the total relative cost after
/// every committed block.
#[allow(dead_code)]
pub(crate) fn allocate_chain_traced(
    profiles: &[LlpProfile],
    chain: &Chain,
    cfg: &AllocationConfig,
) -> Result<(ChainPlan, Vec<f64>), AllocError> {
    let mut trace = Vec::new();
    let plan = allocate_chain_impl(profiles, chain, cfg, Some(&mut trace))?;
    Ok((plan, trace))
}

fn allocate_chain_impl(
    profiles: &[LlpProfile],
    chain: &Chain,
    cfg: &AllocationConfig,
    mut trace: Option<&mut Vec<f64>>,
) -> Result<ChainPlan, AllocError> {
    cfg.validate()?;
    if chain.members.is_empty() {
        return Err(AllocError::EmptyChain(chain.id.clone()));
    }
    let d = cfg.blocks as u64;
    let n = chain.members.len() as u64;
    if d < n * cfg.preallocated_blocks as u64 {
        return Err(AllocError::Config(format!(
            "chain `{}`: {} blocks cannot preallocate {} members x {} blocks",
            chain.id, d, n, cfg.preallocated_blocks
        )));
    }
    let block_ms = chain.slo_ms / cfg.blocks as f64;

    let mut roots: Vec<BudgetNode> = chain
        .members
        .iter()
        .map(|m| build_budget(m, profiles, block_ms, cfg))
        .collect();
    let used: u64 = roots.iter().map(BudgetNode::blocks).sum();
    if used > d {
        return Err(AllocError::InfeasiblePreallocation {
            chain: chain.id.clone(),
            needed: used,
            available: d,
        });
    }

    let mut heap: BinaryHeap<HeapEntry> = roots
        .iter()
        .enumerate()
        .map(|(index, node)| HeapEntry {
            saving: node_saving(node, profiles, block_ms),
            index,
        })
        .collect();

    // With no free blocks the would-be winner still takes the remainder.
    let mut winner = heap.peek().expect("chain is non-empty").index;
    for _ in used..d {
        let top = heap.pop().expect("heap tracks every member");
        commit_block(&mut roots[top.index], profiles, block_ms);
        winner = top.index;
        if let Some(t) = trace.as_deref_mut() {
            t.push(tree_cost(&roots, profiles, block_ms));
        }
        heap.push(HeapEntry {
            saving: node_saving(&roots[top.index], profiles, block_ms),
            index: top.index,
        });
    }

    // Drive the member sum onto the SLO exactly (block arithmetic leaves a
    // sub-ulp residue); a couple of corrections reach a fixed point.
    for _ in 0..4 {
        let sum: f64 = roots.iter().map(|r| r.s_ms(block_ms)).sum();
        let r = chain.slo_ms - sum;
        if r == 0.0 {
            break;
        }
        add_extra_ms(&mut roots[winner], r, profiles, block_ms);
    }

    let member_budgets_ms: Vec<f64> = roots.iter().map(|r| r.s_ms(block_ms)).collect();
    let mut members = Vec::new();
    for root in &roots {
        flatten(root, profiles, block_ms, chain.slo_ms, &mut members)?;
    }

    Ok(ChainPlan {
        chain_id: chain.id.clone(),
        slo_ms: chain.slo_ms,
        block_ms,
        member_budgets_ms,
        members,
    })
}

fn flatten(
    node: &BudgetNode,
    profiles: &[LlpProfile],
    block_ms: f64,
    slo_ms: f64,
    out: &mut Vec<ServiceAllocation>,
) -> Result<(), AllocError> {
    match node {
        BudgetNode::Atomic { service, .. } => {
            let s_ms = node.s_ms(block_ms);
            let pslo_ms = pslo_transform(slo_ms, s_ms)?;
            let capacity_rps = profiles[*service].capacity_at(pslo_ms)?;
            out.push(ServiceAllocation {
                name: profiles[*service].name.clone(),
                s_ms,
                pslo_ms,
                capacity_rps,
            });
        }
        BudgetNode::Composite { branches, .. } => {
            for branch in branches {
                for n in branch {
                    flatten(n, profiles, block_ms, slo_ms, out)?;
                }
            }
        }
    }
    Ok(())
}
