//! Service graphs and chain extraction.
//!
//! The deployment is a DAG of microservices with one or more entry points,
//! each carrying an end-to-end SLO. Every entry point is reduced to a linear
//! chain whose members are either atomic services or abstract nodes: maximal
//! single-entry/single-exit fork-join regions collapsed into one member.
//! Only nested fork-join topologies can be covered this way; anything else is
//! rejected rather than silently mis-attributed.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::llp::LlpProfile;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GraphError {
    #[error("CyclicGraphError: cycle through service `{0}`")]
    Cyclic(String),
    #[error("MissingSloError: entry `{0}` needs a finite positive SLO, got {1}")]
    MissingSlo(String, f64),
    #[error(
        "InfeasibleSloError: chain `{chain}` SLO {slo_ms}ms does not exceed \
         its zero-load latency floor {floor_ms}ms"
    )]
    InfeasibleSlo {
        chain: String,
        slo_ms: f64,
        floor_ms: f64,
    },
    #[error("unknown service `{0}`")]
    UnknownService(String),
    #[error("duplicate service `{0}`")]
    DuplicateService(String),
    #[error("duplicate entry id `{0}`")]
    DuplicateEntry(String),
    #[error("duplicate edge {0} -> {1}")]
    DuplicateEdge(String, String),
    #[error("self edge on `{0}`")]
    SelfEdge(String),
    #[error(
        "service `{name}` fans out to {out} children but is `sequential`; \
         declare kind \"fanout\" or \"branch\""
    )]
    MissingCompositeKind { name: String, out: usize },
    #[error("entry `{entry}` is not nested fork-join: {detail}")]
    UnsupportedTopology { entry: String, detail: String },
    #[error("graph parse error: {0}")]
    Parse(String),
}

/// How a multi-child node combines its children.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CompositeKind {
    /// Children follow one another (only valid for single-child nodes).
    #[default]
    Sequential,
    /// All children are called concurrently; the slowest branch gates latency.
    #[serde(rename = "fanout")]
    ParallelFanout,
    /// Exactly one child is taken per request, split by traffic shares.
    #[serde(rename = "branch")]
    DynamicBranch,
}

/// One end-to-end service: a root node plus its latency SLO.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntryPoint {
    pub id: String,
    pub root: String,
    pub slo_ms: f64,
}

/// Fork-join region collapsed into a single chain member.
#[derive(Debug, Clone, PartialEq)]
pub struct AbstractNode {
    pub kind: CompositeKind,
    /// Each branch is a sequence of chain nodes; may be empty for a
    /// fork-to-join shortcut edge. Branch order is declared edge order.
    pub branches: Vec<Vec<ChainNode>>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ChainNode {
    /// Index into the graph's service list.
    Atomic(usize),
    Abstract(AbstractNode),
}

/// Linear view of one entry point.
#[derive(Debug, Clone, PartialEq)]
pub struct Chain {
    pub id: String,
    pub slo_ms: f64,
    pub members: Vec<ChainNode>,
}

/// Services appearing in two or more chains, with the chains that contain them.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SharedIndex {
    map: BTreeMap<usize, Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GraphRepr", into = "GraphRepr")]
pub struct ServiceGraph {
    profiles: Vec<LlpProfile>,
    kinds: Vec<CompositeKind>,
    adjacency: Vec<Vec<usize>>,
    edges: Vec<(usize, usize)>,
    entries: Vec<EntryPoint>,
    index: BTreeMap<String, usize>,
    topo_pos: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct ServiceRepr {
    #[serde(flatten)]
    profile: LlpProfile,
    #[serde(default, skip_serializing_if = "is_sequential")]
    kind: CompositeKind,
}

fn is_sequential(k: &CompositeKind) -> bool {
    *k == CompositeKind::Sequential
}

#[derive(Serialize, Deserialize)]
struct EntryRepr {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    id: Option<String>,
    root: String,
    slo_ms: f64,
}

#[derive(Serialize, Deserialize)]
struct GraphRepr {
    services: Vec<ServiceRepr>,
    edges: Vec<(String, String)>,
    entries: Vec<EntryRepr>,
}

impl TryFrom<GraphRepr> for ServiceGraph {
    type Error = GraphError;

    fn try_from(r: GraphRepr) -> Result<Self, GraphError> {
        let services = r
            .services
            .into_iter()
            .map(|s| (s.profile, s.kind))
            .collect();
        let entries = r
            .entries
            .into_iter()
            .map(|e| EntryPoint {
                id: e.id.unwrap_or_else(|| e.root.clone()),
                root: e.root,
                slo_ms: e.slo_ms,
            })
            .collect();
        ServiceGraph::new(services, r.edges, entries)
    }
}

impl From<ServiceGraph> for GraphRepr {
    fn from(g: ServiceGraph) -> Self {
        GraphRepr {
            edges: g
                .edges
                .iter()
                .map(|&(a, b)| (g.profiles[a].name.clone(), g.profiles[b].name.clone()))
                .collect(),
            entries: g
                .entries
                .iter()
                .map(|e| EntryRepr {
                    id: Some(e.id.clone()),
                    root: e.root.clone(),
                    slo_ms: e.slo_ms,
                })
                .collect(),
            services: g
                .profiles
                .into_iter()
                .zip(g.kinds)
                .map(|(profile, kind)| ServiceRepr { profile, kind })
                .collect(),
        }
    }
}

impl ServiceGraph {
    pub fn new(
        services: Vec<(LlpProfile, CompositeKind)>,
        edges: Vec<(String, String)>,
        entries: Vec<EntryPoint>,
    ) -> Result<Self, GraphError> {
        let mut index = BTreeMap::new();
        for (i, (p, _)) in services.iter().enumerate() {
            if index.insert(p.name.clone(), i).is_some() {
                return Err(GraphError::DuplicateService(p.name.clone()));
            }
        }
        let resolve = |name: &str| {
            index
                .get(name)
                .copied()
                .ok_or_else(|| GraphError::UnknownService(name.to_owned()))
        };

        let n = services.len();
        let mut adjacency = vec![Vec::new(); n];
        let mut edge_ids = Vec::with_capacity(edges.len());
        for (from, to) in &edges {
            let (a, b) = (resolve(from)?, resolve(to)?);
            if a == b {
                return Err(GraphError::SelfEdge(from.clone()));
            }
            if adjacency[a].contains(&b) {
                return Err(GraphError::DuplicateEdge(from.clone(), to.clone()));
            }
            adjacency[a].push(b);
            edge_ids.push((a, b));
        }

        let mut seen_ids = BTreeMap::new();
        for e in &entries {
            resolve(&e.root)?;
            if !e.slo_ms.is_finite() || e.slo_ms <= 0.0 {
                return Err(GraphError::MissingSlo(e.id.clone(), e.slo_ms));
            }
            if seen_ids.insert(e.id.clone(), ()).is_some() {
                return Err(GraphError::DuplicateEntry(e.id.clone()));
            }
        }

        let (profiles, kinds): (Vec<_>, Vec<_>) = services.into_iter().unzip();
        for (i, kind) in kinds.iter().enumerate() {
            if adjacency[i].len() > 1 && *kind == CompositeKind::Sequential {
                return Err(GraphError::MissingCompositeKind {
                    name: profiles[i].name.clone(),
                    out: adjacency[i].len(),
                });
            }
        }

        let topo_pos = topo_positions(&adjacency)
            .map_err(|i| GraphError::Cyclic(profiles[i].name.clone()))?;

        Ok(ServiceGraph {
            profiles,
            kinds,
            adjacency,
            edges: edge_ids,
            entries,
            index,
            topo_pos,
        })
    }

    pub fn from_json(text: &str) -> Result<Self, GraphError> {
        serde_json::from_str(text).map_err(|e| GraphError::Parse(e.to_string()))
    }

    pub fn len(&self) -> usize {
        self.profiles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.profiles.is_empty()
    }

    pub fn profiles(&self) -> &[LlpProfile] {
        &self.profiles
    }

    pub fn profile(&self, id: usize) -> &LlpProfile {
        &self.profiles[id]
    }

    pub fn name(&self, id: usize) -> &str {
        &self.profiles[id].name
    }

    pub fn kind(&self, id: usize) -> CompositeKind {
        self.kinds[id]
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn entries(&self) -> &[EntryPoint] {
        &self.entries
    }

    pub fn out_edges(&self, id: usize) -> &[usize] {
        &self.adjacency[id]
    }

    /// Register a service that exists only as a chain member (admitted after
    /// the graph was built). It gets no edges; the chain structures held by
    /// callers are the authority on where it sits.
    pub fn add_service(&mut self, profile: LlpProfile) -> Result<usize, GraphError> {
        if self.index.contains_key(&profile.name) {
            return Err(GraphError::DuplicateService(profile.name));
        }
        let id = self.profiles.len();
        self.index.insert(profile.name.clone(), id);
        self.profiles.push(profile);
        self.kinds.push(CompositeKind::Sequential);
        self.adjacency.push(Vec::new());
        self.topo_pos.push(id);
        Ok(id)
    }

    /// Replace profiles by name, e.g. from a separately profiled file.
    pub fn apply_profile_overrides(
        &mut self,
        overrides: Vec<LlpProfile>,
    ) -> Result<(), GraphError> {
        for p in overrides {
            let id = self
                .index_of(&p.name)
                .ok_or_else(|| GraphError::UnknownService(p.name.clone()))?;
            self.profiles[id] = p;
        }
        Ok(())
    }

    /// One chain per entry point, in entry order. Fails on anything that is
    /// not nested fork-join or whose SLO cannot clear the zero-load floor.
    pub fn extract_chains(&self) -> Result<Vec<Chain>, GraphError> {
        self.entries
            .iter()
            .map(|e| self.extract_chain(e))
            .collect()
    }

    fn extract_chain(&self, entry: &EntryPoint) -> Result<Chain, GraphError> {
        let root = self.index[&entry.root];
        let mut visited = vec![false; self.len()];
        let members = self.build_segment(entry, root, None, &mut visited)?;

        let reachable = self.reachable_from(root, None);
        let mut covered = vec![false; self.len()];
        collect_atoms_into(&members, &mut covered);
        for id in 0..self.len() {
            if reachable[id] != covered[id] {
                return Err(GraphError::UnsupportedTopology {
                    entry: entry.id.clone(),
                    detail: format!(
                        "service `{}` cannot be placed in exactly one chain position",
                        self.name(id)
                    ),
                });
            }
        }

        let chain = Chain {
            id: entry.id.clone(),
            slo_ms: entry.slo_ms,
            members,
        };
        let floor_ms = chain.floor_ms(&self.profiles);
        if chain.slo_ms <= floor_ms {
            return Err(GraphError::InfeasibleSlo {
                chain: chain.id,
                slo_ms: entry.slo_ms,
                floor_ms,
            });
        }
        Ok(chain)
    }

    /// Walk a sequential segment from `start` until `stop` (exclusive) or a leaf.
    fn build_segment(
        &self,
        entry: &EntryPoint,
        start: usize,
        stop: Option<usize>,
        visited: &mut [bool],
    ) -> Result<Vec<ChainNode>, GraphError> {
        let mut nodes = Vec::new();
        let mut cur = Some(start);
        while let Some(id) = cur {
            if Some(id) == stop {
                break;
            }
            if visited[id] {
                return Err(GraphError::UnsupportedTopology {
                    entry: entry.id.clone(),
                    detail: format!("service `{}` is reached on two paths", self.name(id)),
                });
            }
            visited[id] = true;
            nodes.push(ChainNode::Atomic(id));

            let outs = &self.adjacency[id];
            cur = match outs.len() {
                0 => None,
                1 => Some(outs[0]),
                _ => {
                    let join = self.join_point(id, stop);
                    let branch_stop = join.or(stop);
                    let branches = outs
                        .iter()
                        .map(|&c| self.build_segment(entry, c, branch_stop, visited))
                        .collect::<Result<Vec<_>, _>>()?;
                    nodes.push(ChainNode::Abstract(AbstractNode {
                        kind: self.kinds[id],
                        branches,
                    }));
                    join
                }
            };
        }
        Ok(nodes)
    }

    /// First node (in topological order) reachable from every child of `fork`,
    /// searching only up to `stop`. None when the branches never reconverge.
    fn join_point(&self, fork: usize, stop: Option<usize>) -> Option<usize> {
        let mut common: Option<Vec<bool>> = None;
        for &child in &self.adjacency[fork] {
            let r = self.reachable_from(child, stop);
            common = Some(match common {
                None => r,
                Some(c) => c.iter().zip(&r).map(|(a, b)| *a && *b).collect(),
            });
        }
        common?
            .iter()
            .enumerate()
            .filter(|(_, &in_all)| in_all)
            .min_by_key(|&(id, _)| self.topo_pos[id])
            .map(|(id, _)| id)
    }

    /// Reachability including `from`; traversal does not continue through `stop`.
    fn reachable_from(&self, from: usize, stop: Option<usize>) -> Vec<bool> {
        let mut seen = vec![false; self.len()];
        let mut stack = vec![from];
        while let Some(id) = stack.pop() {
            if seen[id] {
                continue;
            }
            seen[id] = true;
            if Some(id) == stop {
                continue;
            }
            stack.extend(self.adjacency[id].iter().copied());
        }
        seen
    }
}

/// Kahn's algorithm over node indices; Err carries a node on a cycle.
fn topo_positions(adjacency: &[Vec<usize>]) -> Result<Vec<usize>, usize> {
    let n = adjacency.len();
    let mut indegree = vec![0usize; n];
    for outs in adjacency {
        for &t in outs {
            indegree[t] += 1;
        }
    }
    let mut frontier: Vec<usize> = (0..n).filter(|&i| indegree[i] == 0).collect();
    frontier.sort_unstable();
    let mut pos = vec![usize::MAX; n];
    let mut next = 0;
    while let Some(id) = frontier.pop() {
        pos[id] = next;
        next += 1;
        for &t in &adjacency[id] {
            indegree[t] -= 1;
            if indegree[t] == 0 {
                frontier.push(t);
            }
        }
    }
    if next < n {
        return Err((0..n).find(|&i| pos[i] == usize::MAX).unwrap());
    }
    Ok(pos)
}

fn collect_atoms_into(nodes: &[ChainNode], out: &mut [bool]) {
    for node in nodes {
        match node {
            ChainNode::Atomic(id) => out[*id] = true,
            ChainNode::Abstract(a) => {
                for branch in &a.branches {
                    collect_atoms_into(branch, out);
                }
            }
        }
    }
}

impl ChainNode {
    /// Smallest latency budget (ms) under which the node stays feasible.
    pub fn floor_ms(&self, profiles: &[LlpProfile]) -> f64 {
        match self {
            ChainNode::Atomic(id) => profiles[*id].tau_ms,
            ChainNode::Abstract(a) => a.floor_ms(profiles),
        }
    }

    fn push_atoms(&self, out: &mut Vec<usize>) {
        match self {
            ChainNode::Atomic(id) => out.push(*id),
            ChainNode::Abstract(a) => {
                for branch in &a.branches {
                    for node in branch {
                        node.push_atoms(out);
                    }
                }
            }
        }
    }
}

impl AbstractNode {
    /// Budget given to the node reaches every branch whole, so the floor is
    /// the most demanding branch's summed floor.
    pub fn floor_ms(&self, profiles: &[LlpProfile]) -> f64 {
        self.branches
            .iter()
            .map(|b| b.iter().map(|n| n.floor_ms(profiles)).sum::<f64>())
            .fold(0.0, f64::max)
    }
}

impl Chain {
    /// Every atomic service in the chain, in deterministic order: sequence
    /// order, branches in declared edge order.
    pub fn atomic_members(&self) -> Vec<usize> {
        let mut out = Vec::new();
        for node in &self.members {
            node.push_atoms(&mut out);
        }
        out
    }

    pub fn floor_ms(&self, profiles: &[LlpProfile]) -> f64 {
        self.members.iter().map(|n| n.floor_ms(profiles)).sum()
    }
}

/// Services appearing in at least two of the given chains.
pub fn shared_services(chains: &[Chain]) -> SharedIndex {
    let mut map: BTreeMap<usize, Vec<String>> = BTreeMap::new();
    for chain in chains {
        let mut atoms = chain.atomic_members();
        atoms.sort_unstable();
        atoms.dedup();
        for id in atoms {
            map.entry(id).or_default().push(chain.id.clone());
        }
    }
    map.retain(|_, chains| chains.len() >= 2);
    SharedIndex { map }
}

impl SharedIndex {
    pub fn contains(&self, service: usize) -> bool {
        self.map.contains_key(&service)
    }

    /// Chains holding the service, in chain declaration order.
    pub fn chains_of(&self, service: usize) -> &[String] {
        self.map.get(&service).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Number of chains sharing the service (the `k` of the update rules).
    pub fn degree(&self, service: usize) -> usize {
        self.chains_of(service).len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, &[String])> {
        self.map.iter().map(|(&id, chains)| (id, chains.as_slice()))
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llp::CurveShape;

    fn profile(name: &str, tau: f64) -> LlpProfile {
        LlpProfile::new(name, tau, 100.0, 1.0, CurveShape::Parametric).unwrap()
    }

    fn entry(id: &str, root: &str, slo: f64) -> EntryPoint {
        EntryPoint {
            id: id.into(),
            root: root.into(),
            slo_ms: slo,
        }
    }

    fn graph(
        names: &[(&str, CompositeKind)],
        edges: &[(&str, &str)],
        entries: Vec<EntryPoint>,
    ) -> Result<ServiceGraph, GraphError> {
        ServiceGraph::new(
            names
                .iter()
                .map(|(n, k)| (profile(n, 10.0), *k))
                .collect(),
            edges
                .iter()
                .map(|(a, b)| (a.to_string(), b.to_string()))
                .collect(),
            entries,
        )
    }

    use CompositeKind::{DynamicBranch, ParallelFanout, Sequential};

    #[test]
    fn linear_graph_becomes_atomic_chain() {
        let g = graph(
            &[("a", Sequential), ("b", Sequential), ("c", Sequential)],
            &[("a", "b"), ("b", "c")],
            vec![entry("e", "a", 400.0)],
        )
        .unwrap();
        let chains = g.extract_chains().unwrap();
        assert_eq!(chains.len(), 1);
        assert_eq!(chains[0].id, "e");
        assert_eq!(
            chains[0].members,
            vec![
                ChainNode::Atomic(0),
                ChainNode::Atomic(1),
                ChainNode::Atomic(2)
            ]
        );
        assert_eq!(chains[0].atomic_members(), vec![0, 1, 2]);
        assert_eq!(chains[0].floor_ms(g.profiles()), 30.0);
    }

    #[test]
    fn diamond_collapses_to_abstract_fanout() {
        let g = graph(
            &[
                ("a", ParallelFanout),
                ("b", Sequential),
                ("c", Sequential),
                ("d", Sequential),
            ],
            &[("a", "b"), ("a", "c"), ("b", "d"), ("c", "d")],
            vec![entry("e", "a", 400.0)],
        )
        .unwrap();
        let chains = g.extract_chains().unwrap();
        let expect = vec![
            ChainNode::Atomic(0),
            ChainNode::Abstract(AbstractNode {
                kind: ParallelFanout,
                branches: vec![vec![ChainNode::Atomic(1)], vec![ChainNode::Atomic(2)]],
            }),
            ChainNode::Atomic(3),
        ];
        assert_eq!(chains[0].members, expect);
        // Fanout floor is the max branch floor: 10 + max(10, 10) + 10.
        assert_eq!(chains[0].floor_ms(g.profiles()), 30.0);
    }

    #[test]
    fn nested_forks_stay_nested_and_cover_all_nodes() {
        // a -> { b -> {c, d} -> e | f } -> g
        let g = graph(
            &[
                ("a", ParallelFanout),
                ("b", ParallelFanout),
                ("c", Sequential),
                ("d", Sequential),
                ("e", Sequential),
                ("f", Sequential),
                ("g", Sequential),
            ],
            &[
                ("a", "b"),
                ("a", "f"),
                ("b", "c"),
                ("b", "d"),
                ("c", "e"),
                ("d", "e"),
                ("e", "g"),
                ("f", "g"),
            ],
            vec![entry("e", "a", 500.0)],
        )
        .unwrap();
        let chains = g.extract_chains().unwrap();
        let inner = AbstractNode {
            kind: ParallelFanout,
            branches: vec![vec![ChainNode::Atomic(2)], vec![ChainNode::Atomic(3)]],
        };
        let outer = AbstractNode {
            kind: ParallelFanout,
            branches: vec![
                vec![
                    ChainNode::Atomic(1),
                    ChainNode::Abstract(inner),
                    ChainNode::Atomic(4),
                ],
                vec![ChainNode::Atomic(5)],
            ],
        };
        assert_eq!(
            chains[0].members,
            vec![
                ChainNode::Atomic(0),
                ChainNode::Abstract(outer),
                ChainNode::Atomic(6)
            ]
        );
        assert_eq!(chains[0].atomic_members(), vec![0, 1, 2, 3, 4, 5, 6]);
        // 10 + max(10 + 10 + 10, 10) + 10
        assert_eq!(chains[0].floor_ms(g.profiles()), 50.0);
    }

    #[test]
    fn shortcut_edge_yields_empty_branch() {
        let g = graph(
            &[("a", DynamicBranch), ("b", Sequential), ("d", Sequential)],
            &[("a", "b"), ("a", "d"), ("b", "d")],
            vec![entry("e", "a", 400.0)],
        )
        .unwrap();
        let chains = g.extract_chains().unwrap();
        let node = AbstractNode {
            kind: DynamicBranch,
            branches: vec![vec![ChainNode::Atomic(1)], vec![]],
        };
        assert_eq!(
            chains[0].members,
            vec![
                ChainNode::Atomic(0),
                ChainNode::Abstract(node),
                ChainNode::Atomic(2)
            ]
        );
    }

    #[test]
    fn forked_leaves_end_the_chain_without_a_join() {
        let g = graph(
            &[("a", ParallelFanout), ("b", Sequential), ("c", Sequential)],
            &[("a", "b"), ("a", "c")],
            vec![entry("e", "a", 400.0)],
        )
        .unwrap();
        let chains = g.extract_chains().unwrap();
        assert_eq!(
            chains[0].members,
            vec![
                ChainNode::Atomic(0),
                ChainNode::Abstract(AbstractNode {
                    kind: ParallelFanout,
                    branches: vec![vec![ChainNode::Atomic(1)], vec![ChainNode::Atomic(2)]],
                })
            ]
        );
    }

    #[test]
    fn two_entries_share_services() {
        let g = graph(
            &[
                ("a", Sequential),
                ("b", Sequential),
                ("s", Sequential),
                ("t", Sequential),
            ],
            &[("a", "s"), ("b", "s"), ("s", "t")],
            vec![entry("one", "a", 300.0), entry("two", "b", 400.0)],
        )
        .unwrap();
        let chains = g.extract_chains().unwrap();
        assert_eq!(chains[0].atomic_members(), vec![0, 2, 3]);
        assert_eq!(chains[1].atomic_members(), vec![1, 2, 3]);
        let shared = shared_services(&chains);
        assert!(shared.contains(2) && shared.contains(3));
        assert!(!shared.contains(0) && !shared.contains(1));
        assert_eq!(shared.chains_of(2), &["one".to_string(), "two".to_string()]);
        assert_eq!(shared.degree(2), 2);
    }

    #[test]
    fn extraction_is_deterministic() {
        let g = graph(
            &[
                ("a", ParallelFanout),
                ("b", Sequential),
                ("c", Sequential),
                ("d", Sequential),
            ],
            &[("a", "b"), ("a", "c"), ("b", "d"), ("c", "d")],
            vec![entry("e", "a", 400.0)],
        )
        .unwrap();
        assert_eq!(g.extract_chains().unwrap(), g.extract_chains().unwrap());
    }

    #[test]
    fn cyclic_graph_is_rejected() {
        let err = graph(
            &[("a", Sequential), ("b", Sequential), ("c", Sequential)],
            &[("a", "b"), ("b", "c"), ("c", "a")],
            vec![entry("e", "a", 400.0)],
        )
        .unwrap_err();
        assert!(matches!(err, GraphError::Cyclic(_)));
    }

    #[test]
    fn structural_validation_errors() {
        assert!(matches!(
            graph(&[("a", Sequential)], &[], vec![entry("e", "a", 0.0)]).unwrap_err(),
            GraphError::MissingSlo(_, _)
        ));
        assert!(matches!(
            graph(
                &[("a", Sequential), ("b", Sequential)],
                &[("a", "b"), ("a", "b")],
                vec![],
            )
            .unwrap_err(),
            GraphError::DuplicateEdge(_, _)
        ));
        assert!(matches!(
            graph(&[("a", Sequential)], &[("a", "a")], vec![]).unwrap_err(),
            GraphError::SelfEdge(_)
        ));
        assert!(matches!(
            graph(
                &[("a", Sequential), ("b", Sequential), ("c", Sequential)],
                &[("a", "b"), ("a", "c")],
                vec![],
            )
            .unwrap_err(),
            GraphError::MissingCompositeKind { out: 2, .. }
        ));
        assert!(matches!(
            graph(&[("a", Sequential)], &[("a", "zz")], vec![]).unwrap_err(),
            GraphError::UnknownService(_)
        ));
        assert!(matches!(
            graph(&[("a", Sequential), ("a", Sequential)], &[], vec![]).unwrap_err(),
            GraphError::DuplicateService(_)
        ));
    }

    #[test]
    fn infeasible_slo_is_rejected_at_extraction() {
        let g = graph(
            &[("a", Sequential), ("b", Sequential)],
            &[("a", "b")],
            vec![entry("e", "a", 20.0)],
        )
        .unwrap();
        let err = g.extract_chains().unwrap_err();
        assert!(
            matches!(err, GraphError::InfeasibleSlo { floor_ms, .. } if floor_ms == 20.0),
            "{err}"
        );
    }

    #[test]
    fn interleaved_branches_are_rejected() {
        // a -> {b, c}; b -> d (fanout to f and e); c -> e; e -> f.
        let g = graph(
            &[
                ("a", ParallelFanout),
                ("b", Sequential),
                ("c", Sequential),
                ("d", ParallelFanout),
                ("e", Sequential),
                ("f", Sequential),
            ],
            &[
                ("a", "b"),
                ("a", "c"),
                ("b", "d"),
                ("d", "f"),
                ("d", "e"),
                ("c", "e"),
                ("e", "f"),
            ],
            vec![entry("e", "a", 600.0)],
        )
        .unwrap();
        assert!(matches!(
            g.extract_chains().unwrap_err(),
            GraphError::UnsupportedTopology { .. }
        ));
    }

    #[test]
    fn graph_json_round_trip() {
        let text = r#"{
            "services": [
                {"name": "a", "tau_ms": 10, "mu_rps": 100, "sigma": 1, "kind": "fanout"},
                {"name": "b", "tau_ms": 5, "mu_rps": 200, "sigma": 1},
                {"name": "c", "tau_ms": 5, "mu_rps": 200, "sigma": 1,
                 "shape": "table", "table": [[0, 1], [0.8, 4]]},
                {"name": "d", "tau_ms": 10, "mu_rps": 100, "sigma": 2}
            ],
            "edges": [["a", "b"], ["a", "c"], ["b", "d"], ["c", "d"]],
            "entries": [{"root": "a", "slo_ms": 400}]
        }"#;
        let g = ServiceGraph::from_json(text).unwrap();
        assert_eq!(g.len(), 4);
        assert_eq!(g.kind(0), ParallelFanout);
        assert_eq!(g.entries()[0].id, "a");
        let chains = g.extract_chains().unwrap();
        assert_eq!(chains[0].atomic_members(), vec![0, 1, 2, 3]);

        let back = ServiceGraph::from_json(&serde_json::to_string(&g).unwrap()).unwrap();
        assert_eq!(g, back);
        assert_eq!(back.extract_chains().unwrap(), chains);
    }

    #[test]
    fn profile_overrides_replace_by_name() {
        let mut g = graph(
            &[("a", Sequential), ("b", Sequential)],
            &[("a", "b")],
            vec![entry("e", "a", 100.0)],
        )
        .unwrap();
        g.apply_profile_overrides(vec![profile("b", 3.0)]).unwrap();
        assert_eq!(g.profile(1).tau_ms, 3.0);
        assert!(g.apply_profile_overrides(vec![profile("zz", 3.0)]).is_err());
    }
}
