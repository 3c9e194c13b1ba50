//! The centralized route for Datalog-only networks: compile the whole
//! system into a single Datalog program over node-qualified predicates and
//! evaluate it bottom-up.
//!
//! Only networks where every node is a plain Datalog database (no clauses,
//! no denials, no falsum) and every coordination rule has a conjunctive
//! head without existential variables are accepted; anything else is
//! refused by name rather than approximated.

use std::collections::BTreeSet;

use crate::error::EngineError;
use crate::eval::{least_model, AtomStore};
use crate::fixpoint::constants_only;
use crate::model::{
    Constant, DefiniteRule, GroundAtom, HeadForm, P2PSystem, Query, RuleHead,
};

/// A flat Datalog program: extensional facts plus definite rules, both over
/// node-qualified predicates.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DatalogProgram {
    pub edb: BTreeSet<GroundAtom>,
    pub rules: Vec<DefiniteRule>,
}

/// Compiles a Datalog-p2p system: the union of all local rules, every
/// coordination rule rewritten as one definite rule per head atom (its body
/// is the concatenation of all conjuncts), and the node facts as EDB.
pub fn compile_global_program(system: &P2PSystem) -> Result<DatalogProgram, EngineError> {
    let violations = system.validate();
    if let Some(v) = violations.first() {
        return Err(EngineError::InvalidSystem(v.to_string()));
    }
    for (id, theory) in &system.nodes {
        if theory.falsum {
            return Err(EngineError::FragmentViolation(format!(
                "node {} declares falsum",
                id
            )));
        }
        if let Some(clause) = theory.clauses.iter().next() {
            return Err(EngineError::FragmentViolation(format!(
                "node {} holds the disjunction {}",
                id, clause
            )));
        }
        if let Some(denial) = theory.denials.first() {
            return Err(EngineError::FragmentViolation(format!(
                "node {} holds the denial {}",
                id, denial
            )));
        }
    }
    for rule in &system.rules {
        match rule.head_form() {
            HeadForm::Datalog => {}
            HeadForm::Positive => {
                return Err(EngineError::FragmentViolation(format!(
                    "rule {} has a disjunctive head",
                    rule.id
                )));
            }
            HeadForm::Existential => {
                return Err(EngineError::FragmentViolation(format!(
                    "rule {} has an existential head variable",
                    rule.id
                )));
            }
        }
    }

    let mut program = DatalogProgram { edb: BTreeSet::new(), rules: Vec::new() };
    for theory in system.nodes.values() {
        program.edb.extend(theory.facts.iter().cloned());
        program.rules.extend(theory.rules.iter().cloned());
    }
    for rule in &system.rules {
        let body: Vec<_> = rule.body.iter().flat_map(|c| c.atoms.iter().cloned()).collect();
        if let RuleHead::Conjunctive(atoms) = &rule.head {
            for head in atoms {
                program.rules.push(DefiniteRule::new(head.clone(), body.clone()));
            }
        }
    }
    Ok(program)
}

/// Least-model evaluation, returning only the derived atoms.
pub fn seminaive_eval(program: &DatalogProgram) -> BTreeSet<GroundAtom> {
    let model = least_model(program.edb.iter(), &program.rules);
    model.difference(&program.edb).cloned().collect()
}

/// Answers a positive query at its node over EDB plus derived atoms.
pub fn answer_via_global(
    system: &P2PSystem,
    query: &Query,
) -> Result<BTreeSet<Vec<Constant>>, EngineError> {
    if !system.nodes.contains_key(&query.node) {
        return Err(EngineError::UnknownQueryNode(query.node.clone()));
    }
    let program = compile_global_program(system)?;
    let derived = seminaive_eval(&program);
    let store = AtomStore::from_atoms(program.edb.iter().chain(derived.iter()));
    let mut answers = BTreeSet::new();
    for disjunct in &query.disjuncts {
        answers.extend(store.project_conjunction(disjunct, &query.answer_vars));
    }
    Ok(constants_only(answers))
}

/// Renders the program as text: `n<node>.<pred>` qualified names, facts
/// first, then rules, each section sorted, one statement per line.
pub fn program_text(program: &DatalogProgram) -> String {
    fn qualified(atom_node: &crate::model::NodeId, pred: &str) -> String {
        format!("n{}.{}", atom_node, pred)
    }
    fn fact_line(atom: &GroundAtom) -> String {
        let args: Vec<String> = atom.args.iter().map(|t| t.to_string()).collect();
        format!("{}({}).", qualified(&atom.node, &atom.predicate), args.join(","))
    }
    fn atom_text(atom: &crate::model::Atom) -> String {
        let args: Vec<String> = atom.args.iter().map(|t| t.to_string()).collect();
        format!("{}({})", qualified(&atom.node, &atom.predicate), args.join(","))
    }

    let mut lines: Vec<String> = program.edb.iter().map(fact_line).collect();
    lines.sort();
    let mut rule_lines: Vec<String> = program
        .rules
        .iter()
        .map(|rule| {
            let body: Vec<String> = rule.body.iter().map(atom_text).collect();
            format!("{} :- {}.", atom_text(&rule.head), body.join(", "))
        })
        .collect();
    rule_lines.sort();
    lines.extend(rule_lines);
    let mut out = lines.join("\n");
    if !out.is_empty() {
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::NodeId;
    use crate::parse::{parse_network, parse_query};

    #[test]
    fn copy_rules_compile_to_one_datalog_rule_each() {
        let text = "node 2 { }\nnode 3 { }\n\
                    link 2:Male-2(x) => 3:Citizen-3(x).\n\
                    link 2:Female-2(x) => 3:Citizen-3(x).\n";
        let system = parse_network(text).expect("parses");
        let program = compile_global_program(&system).expect("compiles");
        assert_eq!(program.rules.len(), 2);
        assert!(program.edb.is_empty());
        let rendered = program_text(&program);
        assert!(rendered.contains("n3.Citizen-3(x) :- n2.Male-2(x)."));
        assert!(rendered.contains("n3.Citizen-3(x) :- n2.Female-2(x)."));
    }

    #[test]
    fn disjunctive_heads_are_refused() {
        let system =
            parse_network(include_str!("../examples/citizen.p2p")).expect("parses");
        let err = compile_global_program(&system).unwrap_err();
        assert!(matches!(err, EngineError::FragmentViolation(_)));
        assert!(err.to_string().contains("r1"));
    }

    #[test]
    fn empty_system_compiles_to_an_empty_program() {
        let program = compile_global_program(&P2PSystem::default()).expect("compiles");
        assert!(program.edb.is_empty());
        assert!(program.rules.is_empty());
        assert!(program_text(&program).is_empty());
    }

    // Reachability over a three-edge chain: all 6 ordered pairs, checked by
    // hand: (a,b),(b,c),(c,d),(a,c),(b,d),(a,d).
    #[test]
    fn transitive_closure_over_a_chain_derives_six_facts() {
        let text = "node 1 {\n\
                      fact E(a,b). fact E(b,c). fact E(c,d).\n\
                      rule T(x,y) :- E(x,y).\n\
                      rule T(x,z) :- T(x,y), E(y,z).\n\
                    }\n";
        let system = parse_network(text).expect("parses");
        let program = compile_global_program(&system).expect("compiles");
        let derived = seminaive_eval(&program);
        assert_eq!(derived.len(), 6);
        assert!(derived.iter().all(|a| a.predicate == "T"));
    }

    #[test]
    fn programs_without_rules_derive_nothing() {
        let system = parse_network("node 1 { fact P(a). }\n").expect("parses");
        let program = compile_global_program(&system).expect("compiles");
        assert!(seminaive_eval(&program).is_empty());
    }

    #[test]
    fn single_rule_single_fact() {
        let system = parse_network("node 1 { fact P(a). rule Q(x) :- P(x). }\n").expect("parses");
        let program = compile_global_program(&system).expect("compiles");
        let derived = seminaive_eval(&program);
        assert_eq!(derived.len(), 1);
        assert_eq!(
            derived.iter().next().unwrap(),
            &GroundAtom::new(
                NodeId::new("1"),
                "Q",
                vec![crate::model::GroundTerm::Const(Constant::new("a"))]
            )
        );
    }

    #[test]
    fn chain_of_copy_rules_moves_facts_to_the_sink() {
        let text = "node 1 { fact P-1(a). fact P-1(b). }\n\
                    node 2 { }\n\
                    node 3 { }\n\
                    link 1:P-1(x) => 2:P-2(x).\n\
                    link 2:P-2(x) => 3:P-3(x).\n";
        let system = parse_network(text).expect("parses");
        let query = parse_query("3: P-3(x)").expect("parses");
        let answers = answer_via_global(&system, &query).expect("answers");
        assert_eq!(answers.len(), 2);
    }

    #[test]
    fn global_answers_match_the_fixpoint_engine() {
        let text = "node 1 { fact E(a,b). fact E(b,c). }\n\
                    node 2 { rule R(x,y) :- C(x,y). }\n\
                    link 1:E(x,y) => 2:C(x,y).\n";
        let system = parse_network(text).expect("parses");
        let query = parse_query("2: R(x,y)").expect("parses");
        let via_global = answer_via_global(&system, &query).expect("answers");
        let via_fixpoint = crate::fixpoint::answer(&system, &query).expect("answers");
        assert_eq!(via_global, via_fixpoint);
    }
}
