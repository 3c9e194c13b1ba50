//! One node's knowledge base: consistency, minimal-model enumeration, and
//! certain-answer evaluation over possibly-disjunctive ground knowledge.
//!
//! A node's knowledge is summarized by its set of subset-minimal Herbrand
//! models. For positive queries, truth in every minimal model coincides with
//! truth in every model, so the minimal set is all later stages ever need.
//! An unsatisfiable theory has no models at all; under the inconsistency-
//! tolerant semantics that makes everything vacuously certain at the node.

use std::collections::{BTreeSet, HashSet};

use crate::error::EngineError;
use crate::eval::{AtomStore, least_model};
use crate::model::{Constant, GroundAtom, GroundTerm, LocalTheory, NodeId, Query};

/// Ceiling on the number of ground clauses a single node may hold before
/// minimal-model enumeration refuses the instance.
pub const CLAUSE_BRANCH_CAP: usize = 20;

/// A Herbrand interpretation of one node's language: the set of atoms that
/// hold.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct Interpretation {
    pub node: NodeId,
    pub atoms: BTreeSet<GroundAtom>,
}

impl Interpretation {
    pub fn new(node: NodeId, atoms: BTreeSet<GroundAtom>) -> Self {
        debug_assert!(atoms.iter().all(|a| a.node == node));
        Interpretation { node, atoms }
    }

    pub fn store(&self) -> AtomStore {
        AtomStore::from_atoms(self.atoms.iter())
    }
}

/// Consistency verdict for one node, with its minimal models when
/// satisfiable.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum NodeStatus {
    Consistent(Vec<Interpretation>),
    Inconsistent,
}

impl NodeStatus {
    pub fn is_inconsistent(&self) -> bool {
        matches!(self, NodeStatus::Inconsistent)
    }

    pub fn models(&self) -> &[Interpretation] {
        match self {
            NodeStatus::Consistent(models) => models,
            NodeStatus::Inconsistent => &[],
        }
    }
}

fn violates_denial(store: &AtomStore, theory: &LocalTheory) -> bool {
    theory.denials.iter().any(|d| store.satisfies_conjunction(&d.body))
}

/// Enumerates the subset-minimal models of a local theory, or reports it
/// inconsistent.
///
/// Search: close the facts under the definite rules, then split on the
/// first unsatisfied clause, closing again after each choice. Every minimal
/// model is reachable this way because a clause true in a model M is true
/// through one of its own atoms, and closure never leaves M. Denial
/// violations are pruned as soon as they appear since they can only persist
/// along a branch.
pub fn minimal_models(theory: &LocalTheory) -> Result<NodeStatus, EngineError> {
    if theory.falsum {
        return Ok(NodeStatus::Inconsistent);
    }
    if theory.clauses.len() > CLAUSE_BRANCH_CAP {
        return Err(EngineError::BranchingCapExceeded {
            node: theory.node.clone(),
            clauses: theory.clauses.len(),
            cap: CLAUSE_BRANCH_CAP,
        });
    }

    let base = least_model(theory.facts.iter(), &theory.rules);
    let mut leaves: Vec<BTreeSet<GroundAtom>> = Vec::new();
    let mut visited: HashSet<BTreeSet<GroundAtom>> = HashSet::new();
    let mut stack: Vec<BTreeSet<GroundAtom>> = vec![base];

    while let Some(model) = stack.pop() {
        if !visited.insert(model.clone()) {
            continue;
        }
        let store = AtomStore::from_atoms(model.iter());
        if violates_denial(&store, theory) {
            continue;
        }
        let open = theory
            .clauses
            .iter()
            .find(|clause| !clause.atoms().iter().any(|a| model.contains(a)));
        match open {
            None => leaves.push(model),
            Some(clause) => {
                for atom in clause.atoms() {
                    let mut extended = model.clone();
                    extended.insert(atom.clone());
                    stack.push(least_model(extended.iter(), &theory.rules));
                }
            }
        }
    }

    leaves.sort();
    leaves.dedup();
    let minimal: Vec<BTreeSet<GroundAtom>> = leaves
        .iter()
        .filter(|m| !leaves.iter().any(|other| *other != **m && other.is_subset(m)))
        .cloned()
        .collect();

    if minimal.is_empty() {
        Ok(NodeStatus::Inconsistent)
    } else {
        Ok(NodeStatus::Consistent(
            minimal.into_iter().map(|atoms| Interpretation::new(theory.node.clone(), atoms)).collect(),
        ))
    }
}

/// Every tuple of the given arity over a constant domain.
pub fn all_tuples(domain: &BTreeSet<Constant>, arity: usize) -> BTreeSet<Vec<GroundTerm>> {
    let mut tuples: BTreeSet<Vec<GroundTerm>> = BTreeSet::new();
    tuples.insert(Vec::new());
    for _ in 0..arity {
        let mut next = BTreeSet::new();
        for tuple in &tuples {
            for c in domain {
                let mut t = tuple.clone();
                t.push(GroundTerm::Const(c.clone()));
                next.insert(t);
            }
        }
        tuples = next;
    }
    tuples
}

/// The query's answer set inside a single interpretation: the union over
/// disjuncts of the projections onto the answer variables.
pub fn answers_in_model(model: &Interpretation, query: &Query) -> BTreeSet<Vec<GroundTerm>> {
    let store = model.store();
    let mut answers = BTreeSet::new();
    for disjunct in &query.disjuncts {
        answers.extend(store.project_conjunction(disjunct, &query.answer_vars));
    }
    answers
}

/// Certain answers of a positive query at one node: the tuples true in
/// every minimal model. An inconsistent node answers every tuple over the
/// domain.
pub fn certain_answers_local(
    status: &NodeStatus,
    query: &Query,
    domain: &BTreeSet<Constant>,
) -> BTreeSet<Vec<GroundTerm>> {
    match status {
        NodeStatus::Inconsistent => all_tuples(domain, query.arity()),
        NodeStatus::Consistent(models) => {
            let mut certain: Option<BTreeSet<Vec<GroundTerm>>> = None;
            for model in models {
                let answers = answers_in_model(model, query);
                certain = Some(match certain {
                    None => answers,
                    Some(prev) => prev.intersection(&answers).cloned().collect(),
                });
                if certain.as_ref().is_some_and(|c| c.is_empty()) {
                    break;
                }
            }
            certain.unwrap_or_default()
        }
    }
}

/// Certain projection of one conjunction of atoms, used for rule-body
/// evaluation: the tuples over `vars` matched in every minimal model.
pub fn certain_conjunction(
    status: &NodeStatus,
    atoms: &[crate::model::Atom],
    vars: &[crate::model::Variable],
    domain: &BTreeSet<Constant>,
) -> BTreeSet<Vec<GroundTerm>> {
    match status {
        NodeStatus::Inconsistent => all_tuples(domain, vars.len()),
        NodeStatus::Consistent(models) => {
            let mut certain: Option<BTreeSet<Vec<GroundTerm>>> = None;
            for model in models {
                let rows = model.store().project_conjunction(atoms, vars);
                certain = Some(match certain {
                    None => rows,
                    Some(prev) => prev.intersection(&rows).cloned().collect(),
                });
                if certain.as_ref().is_some_and(|c| c.is_empty()) {
                    break;
                }
            }
            certain.unwrap_or_default()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Atom, DefiniteRule, Denial, LocalTheory, Term};

    fn node() -> NodeId {
        NodeId::new("1")
    }

    fn c(name: &str) -> GroundTerm {
        GroundTerm::Const(Constant::new(name))
    }

    fn fact(pred: &str, arg: &str) -> GroundAtom {
        GroundAtom::new(node(), pred, vec![c(arg)])
    }

    #[test]
    fn clause_splits_into_two_minimal_models() {
        let mut theory = LocalTheory::empty(node());
        theory.facts.insert(fact("Q", "a"));
        theory.add_disjunction(vec![fact("Male", "b"), fact("Female", "b")]);
        let status = minimal_models(&theory).expect("within caps");
        let models = status.models();
        assert_eq!(models.len(), 2);
        let expect_1: BTreeSet<GroundAtom> = [fact("Q", "a"), fact("Female", "b")].into();
        let expect_2: BTreeSet<GroundAtom> = [fact("Q", "a"), fact("Male", "b")].into();
        assert_eq!(models[0].atoms, expect_1);
        assert_eq!(models[1].atoms, expect_2);
    }

    #[test]
    fn falsum_is_inconsistent() {
        let mut theory = LocalTheory::empty(node());
        theory.falsum = true;
        assert_eq!(minimal_models(&theory).expect("within caps"), NodeStatus::Inconsistent);
    }

    /// Brute-force check over every interpretation of the two relevant
    /// ground atoms: none satisfies facts, rule closure, and the denial.
    #[test]
    fn denial_fired_by_a_rule_is_inconsistent() {
        let mut theory = LocalTheory::empty(node());
        theory.facts.insert(fact("P", "a"));
        theory.rules.push(DefiniteRule::new(
            Atom::new(node(), "Q", vec![Term::var("x")]),
            vec![Atom::new(node(), "P", vec![Term::var("x")])],
        ));
        theory.denials.push(Denial {
            body: vec![Atom::new(node(), "Q", vec![Term::constant("a")])],
        });
        assert_eq!(minimal_models(&theory).expect("within caps"), NodeStatus::Inconsistent);

        // Independent route: enumerate all subsets of {P(a), Q(a)}.
        let universe = [fact("P", "a"), fact("Q", "a")];
        let mut satisfying = 0usize;
        for mask in 0u32..4 {
            let model: BTreeSet<GroundAtom> = universe
                .iter()
                .enumerate()
                .filter(|(i, _)| mask & (1 << i) != 0)
                .map(|(_, a)| a.clone())
                .collect();
            let has_p = model.contains(&universe[0]);
            let has_q = model.contains(&universe[1]);
            let facts_ok = has_p;
            let rule_ok = !has_p || has_q;
            let denial_ok = !has_q;
            if facts_ok && rule_ok && denial_ok {
                satisfying += 1;
            }
        }
        assert_eq!(satisfying, 0);
    }

    #[test]
    fn clause_free_theory_has_exactly_the_least_model() {
        let mut theory = LocalTheory::empty(node());
        theory.facts.insert(fact("P", "a"));
        theory.rules.push(DefiniteRule::new(
            Atom::new(node(), "Q", vec![Term::var("x")]),
            vec![Atom::new(node(), "P", vec![Term::var("x")])],
        ));
        let status = minimal_models(&theory).expect("within caps");
        let models = status.models();
        assert_eq!(models.len(), 1);
        let expect: BTreeSet<GroundAtom> = [fact("P", "a"), fact("Q", "a")].into();
        assert_eq!(models[0].atoms, expect);
    }

    fn split_status() -> NodeStatus {
        let mut theory = LocalTheory::empty(node());
        theory.add_disjunction(vec![fact("Male", "a"), fact("Female", "a")]);
        minimal_models(&theory).expect("within caps")
    }

    #[test]
    fn neither_disjunct_is_certain() {
        let query = crate::parse::parse_query("1: Male(x)").expect("parses");
        let domain: BTreeSet<Constant> = [Constant::new("a")].into();
        assert!(certain_answers_local(&split_status(), &query, &domain).is_empty());
    }

    #[test]
    fn the_union_query_is_certain() {
        let query = crate::parse::parse_query("1: Male(x) | Female(x)").expect("parses");
        let domain: BTreeSet<Constant> = [Constant::new("a")].into();
        let answers = certain_answers_local(&split_status(), &query, &domain);
        assert_eq!(answers, [vec![c("a")]].into());
    }

    #[test]
    fn inconsistent_node_answers_the_whole_domain() {
        let query = crate::parse::parse_query("1: R(x)").expect("parses");
        let domain: BTreeSet<Constant> = [Constant::new("a"), Constant::new("b")].into();
        let answers = certain_answers_local(&NodeStatus::Inconsistent, &query, &domain);
        assert_eq!(answers, [vec![c("a")], vec![c("b")]].into());
    }

    #[test]
    fn clause_count_beyond_the_cap_is_refused() {
        let mut theory = LocalTheory::empty(node());
        for i in 0..=CLAUSE_BRANCH_CAP {
            theory.add_disjunction(vec![fact("P", &format!("a{}", i)), fact("Q", &format!("a{}", i))]);
        }
        let err = minimal_models(&theory).unwrap_err();
        assert!(matches!(
            err,
            crate::error::EngineError::BranchingCapExceeded { clauses: 21, cap: 20, .. }
        ));
    }

    #[test]
    fn subsumed_clause_leaves_a_single_model() {
        let mut theory = LocalTheory::empty(node());
        theory.facts.insert(fact("Male", "a"));
        theory.add_disjunction(vec![fact("Male", "a"), fact("Female", "a")]);
        let status = minimal_models(&theory).expect("within caps");
        assert_eq!(status.models().len(), 1);
    }
}
