//! Query answering over acyclic networks in one topological pass: visit
//! the nodes in dependency order, materialize the head views of every rule
//! arriving at the node from the (already final) upstream answers, then
//! answer over the local theory plus views.

use std::collections::{BTreeMap, BTreeSet};
use std::time::Instant;

use crate::error::EngineError;
use crate::fixpoint::{certain_assignments, ground_head, merge_head};
use crate::model::{Constant, LocalTheory, NodeId, P2PSystem, Query};
use crate::nodekb::{self, NodeStatus};

/// Deterministic topological order of the dependency graph: repeatedly take
/// the smallest-id node with no remaining predecessor. Errs on cycles.
pub fn topological_order(system: &P2PSystem) -> Result<Vec<NodeId>, EngineError> {
    let graph = system.dependency_graph();
    let mut indegree: BTreeMap<&NodeId, usize> =
        system.nodes.keys().map(|n| (n, 0)).collect();
    for (_, to) in &graph.edges {
        if let Some(d) = indegree.get_mut(to) {
            *d += 1;
        }
    }
    let mut ready: BTreeSet<&NodeId> = indegree
        .iter()
        .filter(|(_, d)| **d == 0)
        .map(|(n, _)| *n)
        .collect();
    let mut order = Vec::with_capacity(indegree.len());
    while let Some(node) = ready.pop_first() {
        order.push(node.clone());
        for (from, to) in &graph.edges {
            if from == node {
                let d = indegree.get_mut(to).expect("edge endpoints are nodes");
                *d -= 1;
                if *d == 0 {
                    ready.insert(to);
                }
            }
        }
    }
    if order.len() == system.nodes.len() {
        Ok(order)
    } else {
        Err(EngineError::CyclicSystem)
    }
}

/// Final theories and statuses, keyed by node.
pub type NodeStates = (BTreeMap<NodeId, LocalTheory>, BTreeMap<NodeId, NodeStatus>);

/// Materializes every node's final theory and status in topological order.
pub fn materialize(system: &P2PSystem) -> Result<NodeStates, EngineError> {
    let violations = system.validate();
    if let Some(v) = violations.first() {
        return Err(EngineError::InvalidSystem(v.to_string()));
    }
    let order = topological_order(system)?;
    let domain = system.active_domain();
    let mut theories = system.nodes.clone();
    let mut statuses: BTreeMap<NodeId, NodeStatus> = BTreeMap::new();
    for node in &order {
        // Incoming views first: upstream statuses are final by the order.
        let mut incoming: Vec<&crate::model::CoordinationRule> =
            system.rules.iter().filter(|r| r.target == *node).collect();
        incoming.sort_by(|a, b| a.id.cmp(&b.id));
        for rule in incoming {
            let assignments = certain_assignments(&statuses, &domain, rule);
            let theory = theories.get_mut(node).expect("known node");
            for assignment in assignments {
                let head = ground_head(rule, &assignment);
                merge_head(theory, &head);
            }
        }
        statuses.insert(node.clone(), nodekb::minimal_models(&theories[node])?);
    }
    Ok((theories, statuses))
}

/// Certain answers of a positive query over an acyclic network.
pub fn answer_acyclic(
    system: &P2PSystem,
    query: &Query,
) -> Result<BTreeSet<Vec<Constant>>, EngineError> {
    let (_, statuses) = materialize(system)?;
    let status = statuses
        .get(&query.node)
        .ok_or_else(|| EngineError::UnknownQueryNode(query.node.clone()))?;
    let domain = system.active_domain();
    Ok(crate::fixpoint::constants_only(nodekb::certain_answers_local(status, query, &domain)))
}

/// Network shapes the probe generator understands.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Shape {
    Chain,
    Tree,
    RandomDag,
}

impl Shape {
    pub fn name(&self) -> &'static str {
        match self {
            Shape::Chain => "chain",
            Shape::Tree => "tree",
            Shape::RandomDag => "random-dag",
        }
    }
}

impl std::str::FromStr for Shape {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "chain" => Ok(Shape::Chain),
            "tree" => Ok(Shape::Tree),
            "random-dag" => Ok(Shape::RandomDag),
            other => Err(format!("unknown shape '{}' (chain, tree, random-dag)", other)),
        }
    }
}

/// One probe measurement.
#[derive(Clone, Debug)]
pub struct ProbeRow {
    pub shape: Shape,
    pub nodes: usize,
    pub millis: f64,
    pub messages: usize,
}

/// Times centralized acyclic evaluation and counts simulator messages on
/// generated networks of the given sizes, with the per-node data size
/// fixed. Rows are measurements for trend inspection, not a pass/fail
/// verdict.
pub fn complexity_probe(
    shape: Shape,
    node_counts: &[usize],
    data_size: usize,
) -> Result<Vec<ProbeRow>, EngineError> {
    let mut rows = Vec::new();
    for &n in node_counts {
        let system = match shape {
            Shape::Chain => crate::generate::chain(n, data_size),
            Shape::Tree => crate::generate::tree(n, data_size),
            Shape::RandomDag => crate::generate::random_dag(n, data_size, 7),
        };
        let query = crate::generate::sink_query(&system);
        let start = Instant::now();
        answer_acyclic(&system, &query)?;
        let millis = start.elapsed().as_secs_f64() * 1e3;
        let outcome =
            crate::distsim::run_simulation(&system, &crate::distsim::Schedule::synchronous())?;
        rows.push(ProbeRow { shape, nodes: n, millis, messages: outcome.stats.messages });
    }
    Ok(rows)
}

/// Renders probe rows as CSV.
pub fn probe_csv(rows: &[ProbeRow]) -> String {
    let mut out = String::from("shape,nodes,millis,messages\n");
    for row in rows {
        out.push_str(&format!(
            "{},{},{:.3},{}\n",
            row.shape.name(),
            row.nodes,
            row.millis,
            row.messages
        ));
    }
    out
}
