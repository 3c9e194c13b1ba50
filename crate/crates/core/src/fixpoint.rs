//! System-wide certain-answer computation by iterated rule firing.
//!
//! Each iteration evaluates every coordination rule against a snapshot of
//! the previous state: a rule fires for an assignment of its exported
//! variables when each body conjunct is certain at its source node (an
//! inconsistent source makes every tuple over the active domain certain).
//! Fired heads are merged into the target theories in a fixed order, so the
//! run is deterministic; derived knowledge only ever grows, so a fixpoint
//! is reached and, once there, every rule is satisfied.

use std::collections::{BTreeMap, BTreeSet};

use crate::error::EngineError;
use crate::eval::{instantiate, Binding};
use crate::model::{
    Constant, CoordinationRule, GroundAtom, GroundTerm, HeadForm, LocalTheory, NodeId, NullId,
    P2PSystem, Query, RuleHead, RuleId, Variable,
};
use crate::nodekb::{self, NodeStatus};

/// A rule head made ground by one firing.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum GroundHead {
    Facts(Vec<GroundAtom>),
    Clause(Vec<GroundAtom>),
}

impl std::fmt::Display for GroundHead {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let (atoms, sep) = match self {
            GroundHead::Facts(atoms) => (atoms, " & "),
            GroundHead::Clause(atoms) => (atoms, " | "),
        };
        for (i, atom) in atoms.iter().enumerate() {
            if i > 0 {
                f.write_str(sep)?;
            }
            atom.fmt(f)?;
        }
        Ok(())
    }
}

/// One rule firing observed during an iteration. Every iteration records
/// all instances certain at that point, not only the new ones, so traces
/// exhibit persistence directly.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct TraceEntry {
    pub iteration: usize,
    pub rule: RuleId,
    pub head: GroundHead,
}

/// Evolving per-node knowledge under fixpoint iteration.
#[derive(Clone, Debug)]
pub struct SystemState {
    theories: BTreeMap<NodeId, LocalTheory>,
    statuses: BTreeMap<NodeId, NodeStatus>,
    domain: BTreeSet<Constant>,
    rules: Vec<CoordinationRule>,
    trace: Vec<TraceEntry>,
}

impl SystemState {
    /// Initial state: the system's own theories with their statuses
    /// computed, before any rule has fired.
    pub fn initial(system: &P2PSystem) -> Result<Self, EngineError> {
        let violations = system.validate();
        if let Some(v) = violations.first() {
            return Err(EngineError::InvalidSystem(v.to_string()));
        }
        let mut statuses = BTreeMap::new();
        for (id, theory) in &system.nodes {
            statuses.insert(id.clone(), nodekb::minimal_models(theory)?);
        }
        Ok(SystemState {
            theories: system.nodes.clone(),
            statuses,
            domain: system.active_domain(),
            rules: system.rules.clone(),
            trace: Vec::new(),
        })
    }

    pub fn theory(&self, node: &NodeId) -> Option<&LocalTheory> {
        self.theories.get(node)
    }

    pub fn theories(&self) -> &BTreeMap<NodeId, LocalTheory> {
        &self.theories
    }

    pub fn status(&self, node: &NodeId) -> Option<&NodeStatus> {
        self.statuses.get(node)
    }

    pub fn statuses(&self) -> &BTreeMap<NodeId, NodeStatus> {
        &self.statuses
    }

    pub fn domain(&self) -> &BTreeSet<Constant> {
        &self.domain
    }

    pub fn trace(&self) -> &[TraceEntry] {
        &self.trace
    }

    /// Renders the trace, one line per firing, sorted.
    pub fn trace_text(&self) -> String {
        let mut lines: Vec<String> = self
            .trace
            .iter()
            .map(|e| format!("iter={} rule={} head={}", e.iteration, e.rule, e.head))
            .collect();
        lines.sort();
        let mut out = lines.join("\n");
        if !out.is_empty() {
            out.push('\n');
        }
        out
    }
}

/// The assignments of a rule's exported variables for which every body
/// conjunct is certain at its source. Returned as bindings over the
/// exported variables.
pub fn certain_body(state: &SystemState, rule: &CoordinationRule) -> Vec<Binding> {
    certain_assignments(&state.statuses, &state.domain, rule)
}

/// `certain_body` against bare status maps, shared with the engines that
/// keep their own state layout.
pub fn certain_assignments(
    statuses: &BTreeMap<NodeId, NodeStatus>,
    domain: &BTreeSet<Constant>,
    rule: &CoordinationRule,
) -> Vec<Binding> {
    let exported: Vec<Variable> = rule.exported_vars().into_iter().collect();
    let mut assignments: Vec<Binding> = vec![Binding::new()];
    for conjunct in &rule.body {
        let vars = rule.conjunct_vars(conjunct);
        let status = statuses.get(&conjunct.source);
        let rows = match status {
            Some(status) => nodekb::certain_conjunction(status, &conjunct.atoms, &vars, domain),
            None => BTreeSet::new(),
        };
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
            return assignments;
        }
    }
    // Every exported variable occurs in some conjunct, so the join has
    // bound them all.
    debug_assert!(assignments.iter().all(|a| exported.iter().all(|v| a.contains_key(v))));
    assignments
}

/// Grounds a rule head for one assignment, minting one labeled null per
/// existential head variable. Null labels are derived from the rule id and
/// the assignment, so re-deriving the same instance yields the same null.
pub fn ground_head(rule: &CoordinationRule, assignment: &Binding) -> GroundHead {
    let mut binding = assignment.clone();
    for var in rule.existential_head_vars() {
        let exported: Vec<String> = assignment
            .iter()
            .map(|(v, t)| format!("{}={}", v, t))
            .collect();
        let label = format!("{}.{}[{}]", rule.id, var, exported.join(","));
        binding.insert(var, GroundTerm::Null(NullId::new(label)));
    }
    let atoms: Vec<GroundAtom> =
        rule.head.atoms().iter().map(|a| instantiate(a, &binding)).collect();
    match rule.head {
        RuleHead::Conjunctive(_) => GroundHead::Facts(atoms),
        RuleHead::Disjunctive(_) => GroundHead::Clause(atoms),
    }
}

/// Merges one ground head into a theory; true if anything new was recorded.
pub fn merge_head(theory: &mut LocalTheory, head: &GroundHead) -> bool {
    match head {
        GroundHead::Facts(atoms) => {
            let mut changed = false;
            for atom in atoms {
                changed |= theory.insert_fact(atom.clone());
            }
            changed
        }
        GroundHead::Clause(atoms) => theory.add_disjunction(atoms.clone()),
    }
}

/// Applies one fired head to the target node and recomputes its status.
pub fn apply_head(
    state: &mut SystemState,
    rule: &CoordinationRule,
    assignment: &Binding,
) -> Result<bool, EngineError> {
    let head = ground_head(rule, assignment);
    let theory = state
        .theories
        .get_mut(&rule.target)
        .expect("validated rule targets a known node");
    let changed = merge_head(theory, &head);
    if changed {
        let status = nodekb::minimal_models(theory)?;
        state.statuses.insert(rule.target.clone(), status);
    }
    Ok(changed)
}

/// Runs rule firing to fixpoint and returns the final state with its trace.
///
/// Rules with existential heads are only admitted on acyclic networks,
/// where the chase of fresh nulls must terminate.
pub fn saturate(system: &P2PSystem) -> Result<SystemState, EngineError> {
    if !system.dependency_graph().acyclic {
        if let Some(rule) =
            system.rules.iter().find(|r| r.head_form() == HeadForm::Existential)
        {
            return Err(EngineError::ExistentialOnCyclic { rule: rule.id.clone() });
        }
    }
    let mut state = SystemState::initial(system)?;
    let mut iteration = 0usize;
    loop {
        iteration += 1;
        let snapshot = state.clone();
        // (rule index, assignment) pairs certain against the snapshot,
        // ordered by rule id then ground head for a deterministic merge.
        let mut firings: Vec<(usize, Binding, GroundHead)> = Vec::new();
        for (i, rule) in snapshot.rules.iter().enumerate() {
            for assignment in certain_body(&snapshot, rule) {
                let head = ground_head(rule, &assignment);
                firings.push((i, assignment, head));
            }
        }
        firings.sort_by(|a, b| {
            let ra = &snapshot.rules[a.0].id;
            let rb = &snapshot.rules[b.0].id;
            ra.cmp(rb).then_with(|| a.2.cmp(&b.2))
        });

        let mut changed_nodes: BTreeSet<NodeId> = BTreeSet::new();
        for (i, _assignment, head) in &firings {
            let rule = &snapshot.rules[*i];
            state.trace.push(TraceEntry {
                iteration,
                rule: rule.id.clone(),
                head: head.clone(),
            });
            let theory = state
                .theories
                .get_mut(&rule.target)
                .expect("validated rule targets a known node");
            if merge_head(theory, head) {
                changed_nodes.insert(rule.target.clone());
            }
        }
        for node in &changed_nodes {
            let status = nodekb::minimal_models(&state.theories[node])?;
            state.statuses.insert(node.clone(), status);
        }
        if changed_nodes.is_empty() {
            return Ok(state);
        }
    }
}

/// Certain answers of a positive query over a fixpoint state. Tuples
/// containing labeled nulls are suppressed; answers are constants only.
pub fn certain_answer(state: &SystemState, query: &Query) -> Result<BTreeSet<Vec<Constant>>, EngineError> {
    let status = state
        .statuses
        .get(&query.node)
        .ok_or_else(|| EngineError::UnknownQueryNode(query.node.clone()))?;
    let tuples = nodekb::certain_answers_local(status, query, &state.domain);
    Ok(constants_only(tuples))
}

/// Drops tuples containing nulls and unwraps the rest to constants.
pub fn constants_only(tuples: BTreeSet<Vec<GroundTerm>>) -> BTreeSet<Vec<Constant>> {
    tuples
        .into_iter()
        .filter_map(|t| {
            t.into_iter()
                .map(|term| match term {
                    GroundTerm::Const(c) => Some(c),
                    GroundTerm::Null(_) => None,
                })
                .collect::<Option<Vec<Constant>>>()
        })
        .collect()
}

/// Convenience wrapper: run the fixpoint and answer one query.
pub fn answer(system: &P2PSystem, query: &Query) -> Result<BTreeSet<Vec<Constant>>, EngineError> {
    let state = saturate(system)?;
    certain_answer(&state, query)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parse::{parse_network, parse_query};

    fn citizen() -> P2PSystem {
        parse_network(include_str!("../examples/citizen.p2p")).expect("parses")
    }

    fn example1() -> P2PSystem {
        parse_network(include_str!("../examples/example1.p2p")).expect("parses")
    }

    fn consts(names: &[&str]) -> BTreeSet<Vec<Constant>> {
        names.iter().map(|n| vec![Constant::new(*n)]).collect()
    }

    #[test]
    fn disjunctive_view_is_never_certain() {
        let system = citizen();
        let state = saturate(&system).expect("runs");
        let male_edge = system.rules.iter().find(|r| r.id == RuleId::new("r2")).unwrap();
        assert!(certain_body(&state, male_edge).is_empty());
    }

    #[test]
    fn inconsistent_source_fires_over_the_whole_domain() {
        let mut system = example1();
        // Add a second constant so the vacuous firing has something to range
        // over beyond the fact's own constant.
        let n1 = NodeId::new("1");
        let b = GroundAtom::new(n1.clone(), "P", vec![GroundTerm::Const(Constant::new("b"))]);
        system.nodes.get_mut(&n1).unwrap().facts.insert(b);
        let state = SystemState::initial(&system).expect("initializes");
        let assignments = certain_body(&state, &system.rules[0]);
        assert_eq!(assignments.len(), 2);
    }

    #[test]
    fn body_conjuncts_join_on_shared_variables() {
        let text = "node 1 { fact R(a). fact R(b). }\n\
                    node 2 { fact S(b). fact S(c). }\n\
                    node 3 { }\n\
                    link 1:R(x) & 2:S(x) => 3:T(x).\n";
        let system = parse_network(text).expect("parses");
        let state = SystemState::initial(&system).expect("initializes");
        let assignments = certain_body(&state, &system.rules[0]);
        assert_eq!(assignments.len(), 1);
        assert_eq!(
            assignments[0][&Variable::new("x")],
            GroundTerm::Const(Constant::new("b"))
        );
    }

    #[test]
    fn disjunctive_head_lands_as_a_clause() {
        let system = citizen();
        let mut state = SystemState::initial(&system).expect("initializes");
        let rule = system.rules[0].clone();
        let mut assignment = Binding::new();
        assignment.insert(Variable::new("x"), GroundTerm::Const(Constant::new("ann")));
        apply_head(&mut state, &rule, &assignment).expect("applies");
        let theory = state.theory(&NodeId::new("2")).unwrap();
        assert_eq!(theory.clauses.len(), 1);
        assert!(theory.facts.is_empty());
    }

    #[test]
    fn datalog_head_lands_as_a_fact() {
        let system = citizen();
        let mut state = SystemState::initial(&system).expect("initializes");
        let rule = system.rules[1].clone();
        let mut assignment = Binding::new();
        assignment.insert(Variable::new("x"), GroundTerm::Const(Constant::new("ann")));
        apply_head(&mut state, &rule, &assignment).expect("applies");
        let theory = state.theory(&NodeId::new("3")).unwrap();
        assert!(theory
            .facts
            .contains(&GroundAtom::new(NodeId::new("3"), "Citizen-3", vec![GroundTerm::Const(Constant::new("ann"))])));
    }

    #[test]
    fn existential_head_mints_a_fresh_null() {
        let text = "node 1 { fact P(a). }\nnode 2 { }\nlink 1:P(x) => 2:R(x,z).\n";
        let system = parse_network(text).expect("parses");
        let state = saturate(&system).expect("runs");
        let theory = state.theory(&NodeId::new("2")).unwrap();
        assert_eq!(theory.facts.len(), 1);
        let fact = theory.facts.iter().next().unwrap();
        assert_eq!(fact.args[0], GroundTerm::Const(Constant::new("a")));
        assert!(matches!(fact.args[1], GroundTerm::Null(_)));
    }

    #[test]
    fn citizen_fixpoint_adds_clauses_but_no_facts_downstream() {
        let system = citizen();
        let state = saturate(&system).expect("runs");
        assert_eq!(state.theory(&NodeId::new("2")).unwrap().clauses.len(), 2);
        assert!(state.theory(&NodeId::new("3")).unwrap().facts.is_empty());
    }

    #[test]
    fn example1_floods_q_but_not_r() {
        let system = example1();
        let state = saturate(&system).expect("runs");
        let q = parse_query("2: Q(x)").expect("parses");
        let r = parse_query("2: R(x)").expect("parses");
        assert_eq!(certain_answer(&state, &q).expect("answers"), consts(&["a"]));
        assert!(certain_answer(&state, &r).expect("answers").is_empty());
    }

    #[test]
    fn ruleless_system_is_already_a_fixpoint() {
        let text = "node 1 { fact P(a). }\n";
        let system = parse_network(text).expect("parses");
        let state = saturate(&system).expect("runs");
        assert_eq!(state.theories(), &system.nodes);
        assert!(state.trace().is_empty());
    }

    #[test]
    fn citizen_query_downstream_is_empty() {
        let system = citizen();
        let query = parse_query("3: Citizen-3(x)").expect("parses");
        assert!(answer(&system, &query).expect("answers").is_empty());
    }

    #[test]
    fn query_at_inconsistent_node_yields_all_pairs() {
        let text = "node 1 { fact P(a). fact P(b). inconsistent. }\n";
        let system = parse_network(text).expect("parses");
        let query = parse_query("1: R(x,y)").expect("parses");
        let answers = answer(&system, &query).expect("answers");
        assert_eq!(answers.len(), 4);
    }

    #[test]
    fn existential_heads_on_cycles_are_refused() {
        let text = "node 1 { }\nnode 2 { }\nlink 1:P(x) => 2:Q(x,z).\nlink 2:Q(x,y) => 1:P(x).\n";
        let system = parse_network(text).expect("parses");
        assert!(matches!(
            saturate(&system),
            Err(EngineError::ExistentialOnCyclic { .. })
        ));
    }

    #[test]
    fn trace_lines_are_sorted_and_persistent() {
        let system = example1();
        let state = saturate(&system).expect("runs");
        let text = state.trace_text();
        assert!(text.contains("rule=r1"));
        let lines: Vec<&str> = text.lines().collect();
        let sorted = {
            let mut s = lines.clone();
            s.sort();
            s
        };
        assert_eq!(lines, sorted);
    }
}
