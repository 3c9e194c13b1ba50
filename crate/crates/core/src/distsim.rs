//! Decentralized evaluation by message passing.
//!
//! Every node runs autonomously: it evaluates the certainty of each rule
//! body conjunct it is the source of, ships newly certain tuples (deltas)
//! to the rule's target, and merges rule heads as per-conjunct relations
//! arrive from its own sources. A node that discovers itself inconsistent
//! notifies each outgoing rule edge exactly once; the receiver then treats
//! that conjunct as holding every tuple over the shared constants.
//!
//! Nodes see only their own state and their inboxes. The harness owns
//! delivery: synchronous rounds, or a seeded asynchronous schedule popping
//! one edge queue at a time (per-edge order is always preserved). Certainty
//! only grows as knowledge grows, so any fair schedule converges to the
//! same quiescent state, the one the fixpoint engine computes.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::EngineError;
use crate::eval::Binding;
use crate::fixpoint::{ground_head, merge_head};
use crate::model::{
    Constant, CoordinationRule, GroundTerm, HeadForm, LocalTheory, NodeId, P2PSystem, Query,
    RuleId,
};
use crate::nodekb::{self, NodeStatus};

/// What travels on an edge for one rule: newly certain tuples for the
/// sender's body conjunct, or the one-shot inconsistency notification.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Payload {
    Delta(BTreeSet<Vec<GroundTerm>>),
    Inconsistent,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Message {
    pub from: NodeId,
    pub to: NodeId,
    pub rule: RuleId,
    pub payload: Payload,
    /// Strictly increasing per (from, to) edge.
    pub seq: u64,
}

/// Delivery policy for a run.
#[derive(Clone, Debug)]
pub struct Schedule {
    pub mode: ScheduleMode,
    /// Abort guard: total messages a run may send.
    pub message_cap: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ScheduleMode {
    /// Deliver everything in flight each round, stepping nodes in id order.
    SynchronousRounds,
    /// Deliver one message at a time from a pseudo-randomly chosen edge.
    AsyncSeeded(u64),
}

impl Schedule {
    pub fn synchronous() -> Self {
        Schedule { mode: ScheduleMode::SynchronousRounds, message_cap: 1_000_000 }
    }

    pub fn seeded(seed: u64) -> Self {
        Schedule { mode: ScheduleMode::AsyncSeeded(seed), message_cap: 1_000_000 }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SimStats {
    pub messages: usize,
    pub rounds: usize,
    pub per_edge: BTreeMap<(NodeId, NodeId), usize>,
}

/// Renders the stats export: the totals line plus one sorted line per edge.
pub fn stats_text(stats: &SimStats) -> String {
    let mut out = format!("messages={} rounds={}\n", stats.messages, stats.rounds);
    for ((from, to), count) in &stats.per_edge {
        out.push_str(&format!("edge {}->{}: {}\n", from, to, count));
    }
    out
}

/// Final state of a run.
#[derive(Clone, Debug)]
pub struct SimOutcome {
    pub theories: BTreeMap<NodeId, LocalTheory>,
    pub statuses: BTreeMap<NodeId, NodeStatus>,
    pub domain: BTreeSet<Constant>,
    pub stats: SimStats,
    /// Every message sent, in send order.
    pub log: Vec<Message>,
}

impl SimOutcome {
    /// Certain answers of a positive query over the quiescent state.
    pub fn answer(&self, query: &Query) -> Result<BTreeSet<Vec<Constant>>, EngineError> {
        let status = self
            .statuses
            .get(&query.node)
            .ok_or_else(|| EngineError::UnknownQueryNode(query.node.clone()))?;
        Ok(crate::fixpoint::constants_only(nodekb::certain_answers_local(
            status,
            query,
            &self.domain,
        )))
    }
}

#[derive(Clone, Debug, Default)]
struct RemoteRelation {
    tuples: BTreeSet<Vec<GroundTerm>>,
    vacuous: bool,
}

/// One node's autonomous state. Its inputs are its own theory, the rules it
/// participates in, the shared constant set, and its inbox. It never
/// reads another node's state.
pub struct NodeRuntime {
    node: NodeId,
    theory: LocalTheory,
    status: NodeStatus,
    shared_constants: BTreeSet<Constant>,
    /// Rules targeting this node.
    rules_in: Vec<CoordinationRule>,
    /// Rules in which this node sources one body conjunct.
    rules_out: Vec<(CoordinationRule, usize)>,
    /// Received per-conjunct relations, keyed by (rule, source).
    remote: BTreeMap<(RuleId, NodeId), RemoteRelation>,
    /// Tuples already shipped per outgoing rule.
    sent: BTreeMap<RuleId, BTreeSet<Vec<GroundTerm>>>,
    notified: BTreeSet<RuleId>,
    seq: BTreeMap<NodeId, u64>,
}

impl NodeRuntime {
    fn new(
        node: NodeId,
        theory: LocalTheory,
        system: &P2PSystem,
        shared_constants: BTreeSet<Constant>,
    ) -> Result<Self, EngineError> {
        let rules_in = system.rules.iter().filter(|r| r.target == node).cloned().collect();
        let mut rules_out = Vec::new();
        for rule in &system.rules {
            for (i, conjunct) in rule.body.iter().enumerate() {
                if conjunct.source == node {
                    rules_out.push((rule.clone(), i));
                }
            }
        }
        let status = nodekb::minimal_models(&theory)?;
        Ok(NodeRuntime {
            node,
            theory,
            status,
            shared_constants,
            rules_in,
            rules_out,
            remote: BTreeMap::new(),
            sent: BTreeMap::new(),
            notified: BTreeSet::new(),
            seq: BTreeMap::new(),
        })
    }

    fn conjunct_relation(&self, rule: &CoordinationRule, conjunct_idx: usize) -> BTreeSet<Vec<GroundTerm>> {
        let conjunct = &rule.body[conjunct_idx];
        let vars = rule.conjunct_vars(conjunct);
        let key = (rule.id.clone(), conjunct.source.clone());
        match self.remote.get(&key) {
            Some(rel) if rel.vacuous => nodekb::all_tuples(&self.shared_constants, vars.len()),
            Some(rel) => rel.tuples.clone(),
            None => BTreeSet::new(),
        }
    }

    /// Joins the received per-conjunct relations of one incoming rule into
    /// assignments of its exported variables.
    fn incoming_assignments(&self, rule: &CoordinationRule) -> Vec<Binding> {
        let mut assignments: Vec<Binding> = vec![Binding::new()];
        for (i, conjunct) in rule.body.iter().enumerate() {
            let vars = rule.conjunct_vars(conjunct);
            let rows = self.conjunct_relation(rule, i);
            let mut joined = Vec::new();
            for assignment in &assignments {
                'rows: for row in &rows {
                    let mut merged = assignment.clone();
                    for (var, term) in vars.iter().zip(row) {
                        match merged.get(var) {
                            Some(existing) if existing != term => continue 'rows,
                            Some(_) => {}
                            None => {
                                merged.insert(var.clone(), term.clone());
                            }
                        }
                    }
                    joined.push(merged);
                }
            }
            assignments = joined;
            if assignments.is_empty() {
                break;
            }
        }
        assignments
    }

    fn send(&mut self, to: &NodeId, rule: &RuleId, payload: Payload) -> Message {
        let seq = self.seq.entry(to.clone()).or_insert(0);
        *seq += 1;
        Message { from: self.node.clone(), to: to.clone(), rule: rule.clone(), payload, seq: *seq }
    }
}

/// One autonomous step: merge the inbox, refresh local certainty, and emit
/// only what is new.
pub fn node_step(runtime: &mut NodeRuntime, inbox: &[Message]) -> Result<Vec<Message>, EngineError> {
    for message in inbox {
        assert_eq!(message.to, runtime.node, "message delivered to the wrong node");
        let key = (message.rule.clone(), message.from.clone());
        let relation = runtime.remote.entry(key).or_default();
        match &message.payload {
            Payload::Delta(tuples) => relation.tuples.extend(tuples.iter().cloned()),
            Payload::Inconsistent => relation.vacuous = true,
        }
    }

    // Merge every incoming rule instance currently certain. Re-deriving an
    // already-merged instance is a no-op, so no firing memory is needed.
    let mut changed = false;
    let rules_in = runtime.rules_in.clone();
    for rule in &rules_in {
        for assignment in runtime.incoming_assignments(rule) {
            let head = ground_head(rule, &assignment);
            changed |= merge_head(&mut runtime.theory, &head);
        }
    }
    if changed {
        runtime.status = nodekb::minimal_models(&runtime.theory)?;
    }

    let mut outbox = Vec::new();
    let rules_out = runtime.rules_out.clone();
    for (rule, conjunct_idx) in &rules_out {
        let conjunct = &rule.body[*conjunct_idx];
        if runtime.status.is_inconsistent() {
            if runtime.notified.insert(rule.id.clone()) {
                let target = rule.target.clone();
                let message = runtime.send(&target, &rule.id, Payload::Inconsistent);
                outbox.push(message);
            }
            continue;
        }
        let vars = rule.conjunct_vars(conjunct);
        let rows =
            nodekb::certain_conjunction(&runtime.status, &conjunct.atoms, &vars, &runtime.shared_constants);
        let already = runtime.sent.entry(rule.id.clone()).or_default();
        let delta: BTreeSet<Vec<GroundTerm>> = rows.difference(already).cloned().collect();
        if !delta.is_empty() {
            already.extend(delta.iter().cloned());
            let target = rule.target.clone();
            let message = runtime.send(&target, &rule.id, Payload::Delta(delta));
            outbox.push(message);
        }
    }
    Ok(outbox)
}

/// Runs the protocol under the schedule until quiescence: no message in
/// flight and no node with anything new to say.
pub fn run_simulation(system: &P2PSystem, schedule: &Schedule) -> Result<SimOutcome, EngineError> {
    let violations = system.validate();
    if let Some(v) = violations.first() {
        return Err(EngineError::InvalidSystem(v.to_string()));
    }
    if !system.dependency_graph().acyclic {
        if let Some(rule) = system.rules.iter().find(|r| r.head_form() == HeadForm::Existential) {
            return Err(EngineError::ExistentialOnCyclic { rule: rule.id.clone() });
        }
    }

    let shared = system.active_domain();
    let mut runtimes: BTreeMap<NodeId, NodeRuntime> = BTreeMap::new();
    for (id, theory) in &system.nodes {
        runtimes.insert(id.clone(), NodeRuntime::new(id.clone(), theory.clone(), system, shared.clone())?);
    }

    let mut stats = SimStats::default();
    let mut log: Vec<Message> = Vec::new();
    let mut record = |stats: &mut SimStats, messages: &[Message]| -> Result<(), EngineError> {
        stats.messages += messages.len();
        for m in messages {
            *stats.per_edge.entry((m.from.clone(), m.to.clone())).or_insert(0) += 1;
            log.push(m.clone());
        }
        if stats.messages > schedule.message_cap {
            return Err(EngineError::MessageCapExceeded { cap: schedule.message_cap });
        }
        Ok(())
    };

    // Bootstrap: every node speaks once before any delivery.
    let mut in_flight: Vec<Message> = Vec::new();
    for runtime in runtimes.values_mut() {
        let outbox = node_step(runtime, &[])?;
        record(&mut stats, &outbox)?;
        in_flight.extend(outbox);
    }

    match schedule.mode {
        ScheduleMode::SynchronousRounds => {
            while !in_flight.is_empty() {
                stats.rounds += 1;
                let mut inboxes: BTreeMap<NodeId, Vec<Message>> = BTreeMap::new();
                for message in in_flight.drain(..) {
                    inboxes.entry(message.to.clone()).or_default().push(message);
                }
                for (node, mut inbox) in inboxes {
                    inbox.sort_by(|a, b| a.from.cmp(&b.from).then(a.seq.cmp(&b.seq)));
                    let runtime = runtimes.get_mut(&node).expect("validated rules target known nodes");
                    let outbox = node_step(runtime, &inbox)?;
                    record(&mut stats, &outbox)?;
                    in_flight.extend(outbox);
                }
            }
        }
        ScheduleMode::AsyncSeeded(seed) => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut queues: BTreeMap<(NodeId, NodeId), VecDeque<Message>> = BTreeMap::new();
            for message in in_flight.drain(..) {
                queues.entry((message.from.clone(), message.to.clone())).or_default().push_back(message);
            }
            loop {
                let edges: Vec<(NodeId, NodeId)> =
                    queues.iter().filter(|(_, q)| !q.is_empty()).map(|(e, _)| e.clone()).collect();
                if edges.is_empty() {
                    break;
                }
                stats.rounds += 1;
                let edge = &edges[rng.gen_range(0..edges.len())];
                let message = queues.get_mut(edge).expect("chosen edge exists").pop_front().expect("nonempty");
                let runtime = runtimes.get_mut(&message.to).expect("validated rules target known nodes");
                let outbox = node_step(runtime, &[message])?;
                record(&mut stats, &outbox)?;
                for message in outbox {
                    queues
                        .entry((message.from.clone(), message.to.clone()))
                        .or_default()
                        .push_back(message);
                }
            }
        }
    }

    let theories: BTreeMap<NodeId, LocalTheory> =
        runtimes.iter().map(|(id, r)| (id.clone(), r.theory.clone())).collect();
    let statuses: BTreeMap<NodeId, NodeStatus> =
        runtimes.iter().map(|(id, r)| (id.clone(), r.status.clone())).collect();
    Ok(SimOutcome { theories, statuses, domain: shared, stats, log })
}
