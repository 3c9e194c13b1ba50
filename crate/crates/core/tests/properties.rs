//! Invariant checks across the engines, driven by seeded random corpora.
//! Where an engine computation has an independent route (naive closure,
//! full-powerset enumeration, topological recount), the route is
//! reimplemented here in test code rather than borrowed from the library.

use std::collections::{BTreeMap, BTreeSet};

use proptest::prelude::*;

use peerlog_core::eval;
use peerlog_core::fixpoint::{self, GroundHead};
use peerlog_core::generate;
use peerlog_core::model::{
    Atom, Constant, DefiniteRule, Denial, GroundAtom, GroundTerm, LocalTheory, NodeId, Term,
    Variable,
};
use peerlog_core::nodekb::{self, NodeStatus};
use peerlog_core::oracle::{self, OracleMode};
use peerlog_core::{acyclic, compiler, distsim, parse};

// ---------------------------------------------------------------------------
// Independent routes used as ground truth below.

/// Naive closure: ground every rule over all terms seen so far, repeat until
/// nothing new. Deliberately brute force.
fn naive_closure(facts: &BTreeSet<GroundAtom>, rules: &[DefiniteRule]) -> BTreeSet<GroundAtom> {
    let mut model = facts.clone();
    loop {
        let mut terms: BTreeSet<GroundTerm> = BTreeSet::new();
        for atom in &model {
            terms.extend(atom.args.iter().cloned());
        }
        for rule in rules {
            for atom in rule.body.iter().chain(std::iter::once(&rule.head)) {
                for t in &atom.args {
                    if let Term::Const(c) = t {
                        terms.insert(GroundTerm::Const(c.clone()));
                    }
                }
            }
        }
        let terms: Vec<GroundTerm> = terms.into_iter().collect();
        let mut added = false;
        for rule in rules {
            let mut vars: Vec<Variable> = Vec::new();
            for atom in rule.body.iter().chain(std::iter::once(&rule.head)) {
                for v in atom.variables() {
                    if !vars.contains(v) {
                        vars.push(v.clone());
                    }
                }
            }
            for assignment in all_assignments(&vars, &terms) {
                let body_holds = rule
                    .body
                    .iter()
                    .map(|a| substitute(a, &assignment))
                    .all(|a| model.contains(&a));
                if body_holds {
                    added |= model.insert(substitute(&rule.head, &assignment));
                }
            }
        }
        if !added {
            return model;
        }
    }
}

fn all_assignments(
    vars: &[Variable],
    terms: &[GroundTerm],
) -> Vec<BTreeMap<Variable, GroundTerm>> {
    let mut out = vec![BTreeMap::new()];
    for v in vars {
        let mut next = Vec::new();
        for assignment in &out {
            for t in terms {
                let mut a = assignment.clone();
                a.insert(v.clone(), t.clone());
                next.push(a);
            }
        }
        out = next;
    }
    out
}

fn substitute(atom: &Atom, assignment: &BTreeMap<Variable, GroundTerm>) -> GroundAtom {
    GroundAtom::new(
        atom.node.clone(),
        atom.predicate.clone(),
        atom.args
            .iter()
            .map(|t| match t {
                Term::Const(c) => GroundTerm::Const(c.clone()),
                Term::Var(v) => assignment[v].clone(),
            })
            .collect(),
    )
}

/// Model check written from the definitions: facts hold, groundings of the
/// rules and denials hold, every clause has a true disjunct.
fn satisfies_theory(model: &BTreeSet<GroundAtom>, theory: &LocalTheory) -> bool {
    if theory.falsum {
        return false;
    }
    if !theory.facts.is_subset(model) {
        return false;
    }
    let mut terms: BTreeSet<GroundTerm> = BTreeSet::new();
    for atom in model {
        terms.extend(atom.args.iter().cloned());
    }
    for clause in &theory.clauses {
        for atom in clause.atoms() {
            terms.extend(atom.args.iter().cloned());
        }
    }
    let terms: Vec<GroundTerm> = terms.into_iter().collect();
    for rule in &theory.rules {
        let mut vars: Vec<Variable> = Vec::new();
        for atom in rule.body.iter().chain(std::iter::once(&rule.head)) {
            for v in atom.variables() {
                if !vars.contains(v) {
                    vars.push(v.clone());
                }
            }
        }
        for assignment in all_assignments(&vars, &terms) {
            let body = rule.body.iter().map(|a| substitute(a, &assignment));
            if body.into_iter().all(|a| model.contains(&a))
                && !model.contains(&substitute(&rule.head, &assignment))
            {
                return false;
            }
        }
    }
    for clause in &theory.clauses {
        if !clause.atoms().iter().any(|a| model.contains(a)) {
            return false;
        }
    }
    for denial in &theory.denials {
        let mut vars: Vec<Variable> = Vec::new();
        for atom in &denial.body {
            for v in atom.variables() {
                if !vars.contains(v) {
                    vars.push(v.clone());
                }
            }
        }
        for assignment in all_assignments(&vars, &terms) {
            if denial.body.iter().all(|a| model.contains(&substitute(a, &assignment))) {
                return false;
            }
        }
    }
    true
}

/// A small random local theory whose ground universe stays enumerable.
fn random_theory(seed: u64) -> LocalTheory {
    use rand::Rng;
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let node = NodeId::new("1");
    let preds = ["P", "Q", "R"];
    let consts = ["a", "b"];
    let mut theory = LocalTheory::empty(node.clone());
    let ground = |rng: &mut rand_chacha::ChaCha8Rng| {
        GroundAtom::new(
            node.clone(),
            preds[rng.gen_range(0..preds.len())],
            vec![GroundTerm::Const(Constant::new(consts[rng.gen_range(0..consts.len())]))],
        )
    };
    for _ in 0..rng.gen_range(0..=3usize) {
        theory.facts.insert(ground(&mut rng));
    }
    for _ in 0..rng.gen_range(0..=2usize) {
        let head = preds[rng.gen_range(0..preds.len())];
        let body = preds[rng.gen_range(0..preds.len())];
        theory.rules.push(DefiniteRule::new(
            Atom::new(node.clone(), head, vec![Term::var("x")]),
            vec![Atom::new(node.clone(), body, vec![Term::var("x")])],
        ));
    }
    for _ in 0..rng.gen_range(0..=2usize) {
        let atoms: BTreeSet<GroundAtom> = [ground(&mut rng), ground(&mut rng)].into();
        if atoms.len() == 2 {
            theory.add_disjunction(atoms.into_iter().collect());
        }
    }
    if rng.gen_bool(0.4) {
        theory.denials.push(Denial {
            body: vec![Atom::new(node.clone(), preds[rng.gen_range(0..preds.len())], vec![Term::var("x")])],
        });
    }
    theory
}

/// The theory's full ground universe: every predicate it mentions over
/// every constant it mentions.
fn theory_universe(theory: &LocalTheory) -> Vec<GroundAtom> {
    let mut preds: BTreeSet<String> = BTreeSet::new();
    let mut consts: BTreeSet<Constant> = BTreeSet::new();
    fn see_atom(a: &Atom, preds: &mut BTreeSet<String>, consts: &mut BTreeSet<Constant>) {
        preds.insert(a.predicate.clone());
        for c in a.constants() {
            consts.insert(c.clone());
        }
    }
    for f in &theory.facts {
        preds.insert(f.predicate.clone());
        for t in &f.args {
            if let GroundTerm::Const(c) = t {
                consts.insert(c.clone());
            }
        }
    }
    for r in &theory.rules {
        see_atom(&r.head, &mut preds, &mut consts);
        for a in &r.body {
            see_atom(a, &mut preds, &mut consts);
        }
    }
    for c in &theory.clauses {
        for a in c.atoms() {
            preds.insert(a.predicate.clone());
            for t in &a.args {
                if let GroundTerm::Const(c) = t {
                    consts.insert(c.clone());
                }
            }
        }
    }
    for d in &theory.denials {
        for a in &d.body {
            see_atom(a, &mut preds, &mut consts);
        }
    }
    let mut universe = Vec::new();
    for p in &preds {
        for c in &consts {
            universe.push(GroundAtom::new(theory.node.clone(), p.clone(), vec![GroundTerm::Const(c.clone())]));
        }
    }
    universe
}

fn all_models(theory: &LocalTheory) -> Vec<BTreeSet<GroundAtom>> {
    let universe = theory_universe(theory);
    assert!(universe.len() <= 12, "brute-force enumeration stays under 2^12");
    let mut models = Vec::new();
    for mask in 0u32..(1 << universe.len()) {
        let model: BTreeSet<GroundAtom> = universe
            .iter()
            .enumerate()
            .filter(|(i, _)| mask & (1 << i) != 0)
            .map(|(_, a)| a.clone())
            .collect();
        if satisfies_theory(&model, theory) {
            models.push(model);
        }
    }
    models
}

// ---------------------------------------------------------------------------
// nodekb

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn minimal_models_satisfy_the_theory_and_are_incomparable(seed in any::<u64>()) {
        let theory = random_theory(seed);
        let status = nodekb::minimal_models(&theory).expect("within caps");
        let models = status.models();
        for m in models {
            prop_assert!(satisfies_theory(&m.atoms, &theory));
        }
        for a in models {
            for b in models {
                prop_assert!(a == b || !a.atoms.is_subset(&b.atoms));
            }
        }
    }

    #[test]
    fn minimal_models_are_the_minimal_satisfying_interpretations(seed in any::<u64>()) {
        let theory = random_theory(seed);
        let status = nodekb::minimal_models(&theory).expect("within caps");
        let every = all_models(&theory);
        let minimal: Vec<&BTreeSet<GroundAtom>> = every
            .iter()
            .filter(|m| !every.iter().any(|other| *other != **m && other.is_subset(m)))
            .collect();
        match status {
            NodeStatus::Inconsistent => prop_assert!(every.is_empty()),
            NodeStatus::Consistent(models) => {
                let got: BTreeSet<&BTreeSet<GroundAtom>> = models.iter().map(|m| &m.atoms).collect();
                let want: BTreeSet<&BTreeSet<GroundAtom>> = minimal.into_iter().collect();
                prop_assert_eq!(got, want);
            }
        }
    }

    #[test]
    fn ground_atom_certainty_agrees_with_full_enumeration(seed in any::<u64>()) {
        let theory = random_theory(seed);
        let status = nodekb::minimal_models(&theory).expect("within caps");
        let domain: BTreeSet<Constant> = [Constant::new("a"), Constant::new("b")].into();
        let every = all_models(&theory);
        for atom in theory_universe(&theory) {
            let query = peerlog_core::model::Query {
                node: theory.node.clone(),
                answer_vars: vec![],
                disjuncts: vec![vec![Atom::new(
                    atom.node.clone(),
                    atom.predicate.clone(),
                    atom.args
                        .iter()
                        .map(|t| match t {
                            GroundTerm::Const(c) => Term::Const(c.clone()),
                            GroundTerm::Null(_) => unreachable!(),
                        })
                        .collect(),
                )]],
            };
            let engine_says = !nodekb::certain_answers_local(&status, &query, &domain).is_empty();
            let enumeration_says = every.iter().all(|m| m.contains(&atom));
            prop_assert_eq!(engine_says, enumeration_says, "atom {}", atom);
        }
    }

    #[test]
    fn clause_free_status_is_the_naive_closure(seed in any::<u64>()) {
        let mut theory = random_theory(seed);
        theory.clauses.clear();
        theory.denials.clear();
        let status = nodekb::minimal_models(&theory).expect("within caps");
        let models = status.models();
        prop_assert_eq!(models.len(), 1);
        prop_assert_eq!(&models[0].atoms, &naive_closure(&theory.facts, &theory.rules));
    }

    #[test]
    fn adding_a_model_never_grows_the_answer_set(seed in any::<u64>()) {
        let theory = random_theory(seed);
        let status = nodekb::minimal_models(&theory).expect("within caps");
        let NodeStatus::Consistent(mut models) = status else { return Ok(()) };
        let query = parse::parse_query("1: P(x) | Q(x)").expect("parses");
        let domain: BTreeSet<Constant> = [Constant::new("a"), Constant::new("b")].into();
        let smaller = nodekb::certain_answers_local(&NodeStatus::Consistent(models.clone()), &query, &domain);
        models.push(nodekb::Interpretation::new(theory.node.clone(), BTreeSet::new()));
        let larger_set = nodekb::certain_answers_local(&NodeStatus::Consistent(models), &query, &domain);
        prop_assert!(larger_set.is_subset(&smaller));
    }
}

// ---------------------------------------------------------------------------
// model / parse

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn serialization_round_trips_on_random_systems(seed in any::<u64>(), extended in any::<bool>()) {
        let system = if extended {
            generate::random_extended_system(seed, true)
        } else {
            generate::random_datalog_system(seed, false)
        };
        let rendered = parse::serialize_network(&system);
        let reparsed = parse::parse_network(&rendered).expect("round-trip parses");
        prop_assert_eq!(system, reparsed);
    }

    #[test]
    fn validation_is_idempotent(seed in any::<u64>()) {
        let system = generate::random_extended_system(seed, true);
        let first = system.validate();
        let second = system.validate();
        prop_assert_eq!(first, second);
    }

    #[test]
    fn acyclicity_flag_matches_a_topological_recount(seed in any::<u64>(), acyclic_only in any::<bool>()) {
        let system = generate::random_datalog_system(seed, acyclic_only);
        let graph = system.dependency_graph();
        // Independent route: Kahn's algorithm orders all nodes iff no cycle.
        let order = acyclic::topological_order(&system);
        prop_assert_eq!(graph.acyclic, order.is_ok());
        let max_conjuncts = system.rules.iter().map(|r| r.body.len()).max().unwrap_or(0);
        prop_assert!(graph.edges.len() <= system.rules.len() * max_conjuncts);
    }

    #[test]
    fn active_domain_is_monotone_under_added_facts(seed in any::<u64>()) {
        let system = generate::random_datalog_system(seed, false);
        let bigger = generate::add_random_facts(&system, 3, seed.wrapping_add(1));
        prop_assert!(system.active_domain().is_subset(&bigger.active_domain()));
    }
}

// ---------------------------------------------------------------------------
// fixpoint

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn certain_answers_are_monotone_in_the_facts(seed in any::<u64>()) {
        let system = generate::random_extended_system(seed, false);
        let bigger = generate::add_random_facts(&system, 2, seed.wrapping_add(17));
        for query in generate::random_queries(&system, 2, seed.wrapping_add(5)) {
            let small = fixpoint::answer(&system, &query).expect("answers");
            let large = fixpoint::answer(&bigger, &query).expect("answers");
            prop_assert!(small.is_subset(&large), "query {} shrank", query);
        }
    }

    #[test]
    fn trace_firings_persist_across_iterations(seed in any::<u64>()) {
        let system = generate::random_extended_system(seed, false);
        let state = fixpoint::saturate(&system).expect("runs");
        let mut by_iteration: BTreeMap<usize, BTreeSet<(String, GroundHead)>> = BTreeMap::new();
        for entry in state.trace() {
            by_iteration
                .entry(entry.iteration)
                .or_default()
                .insert((entry.rule.to_string(), entry.head.clone()));
        }
        let iterations: Vec<usize> = by_iteration.keys().copied().collect();
        for pair in iterations.windows(2) {
            let earlier = &by_iteration[&pair[0]];
            let later = &by_iteration[&pair[1]];
            prop_assert!(earlier.is_subset(later));
        }
    }

    #[test]
    fn the_fixpoint_fires_nothing_new(seed in any::<u64>()) {
        let system = generate::random_extended_system(seed, false);
        let state = fixpoint::saturate(&system).expect("runs");
        for rule in &system.rules {
            for assignment in fixpoint::certain_body(&state, rule) {
                let head = fixpoint::ground_head(rule, &assignment);
                match head {
                    GroundHead::Facts(atoms) => {
                        for atom in atoms {
                            prop_assert!(state.theory(&rule.target).unwrap().facts.contains(&atom));
                        }
                    }
                    GroundHead::Clause(atoms) => {
                        let theory = state.theory(&rule.target).unwrap();
                        let mut probe = theory.clone();
                        prop_assert!(!probe.add_disjunction(atoms));
                    }
                }
            }
        }
    }

    #[test]
    fn rule_order_does_not_change_the_outcome(seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let system = generate::random_datalog_system(seed, false);
        let baseline = fixpoint::saturate(&system).expect("runs");
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed.wrapping_add(3));
        let mut shuffled = system.clone();
        shuffled.rules.shuffle(&mut rng);
        let other = fixpoint::saturate(&shuffled).expect("runs");
        prop_assert_eq!(baseline.theories(), other.theories());
    }

    #[test]
    fn inconsistency_stays_behind_the_dependency_frontier(seed in any::<u64>()) {
        let mut system = generate::random_extended_system(seed, false);
        let poisoned = NodeId::new("1");
        system.nodes.get_mut(&poisoned).unwrap().falsum = true;

        // Nodes with a directed path from any inconsistent node, where
        // inconsistency is judged on the final state: a node can also turn
        // inconsistent on its own (a denial tripped by arriving facts), and
        // reaches itself by the empty path.
        let saturated = fixpoint::saturate(&system).expect("runs");
        let graph = system.dependency_graph();
        let mut tainted: BTreeSet<NodeId> = saturated
            .statuses()
            .iter()
            .filter(|(_, s)| s.is_inconsistent())
            .map(|(n, _)| n.clone())
            .collect();
        loop {
            let mut grew = false;
            for (from, to) in &graph.edges {
                if tainted.contains(from) && tainted.insert(to.clone()) {
                    grew = true;
                }
            }
            if !grew {
                break;
            }
        }

        // The same system with the poisoned node emptied and every rule
        // touching it removed.
        let mut cleaned = system.clone();
        cleaned.nodes.insert(poisoned.clone(), LocalTheory::empty(poisoned.clone()));
        cleaned.rules.retain(|r| {
            r.target != poisoned && r.body.iter().all(|c| c.source != poisoned)
        });

        for query in generate::random_queries(&system, 3, seed.wrapping_add(9)) {
            if tainted.contains(&query.node) {
                continue;
            }
            let with = fixpoint::answer(&system, &query).expect("answers");
            let without = fixpoint::answer(&cleaned, &query).expect("answers");
            prop_assert_eq!(with, without, "query {}", query);
        }
    }
}

// ---------------------------------------------------------------------------
// oracle

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn oracle_steps_only_shrink(seed in any::<u64>()) {
        let system = generate::random_extended_system(seed, false);
        let domain = system.active_domain();
        let state = oracle::initial_state(&system, &domain, OracleMode::Extended, &BTreeMap::new())
            .expect("within caps");
        let stepped = oracle::consequence_step(&state, &system.rules);
        for (id, set) in state.sets() {
            let before: BTreeSet<_> = set.interpretations().into_iter().collect();
            let after: BTreeSet<_> = stepped.sets()[id].interpretations().into_iter().collect();
            prop_assert!(after.is_subset(&before));
        }
    }

    #[test]
    fn oracle_step_preserves_pointwise_inclusion(seed in any::<u64>()) {
        // An included state steps to an included state: the smaller state
        // certainly fires every rule instance the larger one does.
        use rand::Rng;
        use rand::SeedableRng;
        let system = generate::random_extended_system(seed, false);
        let domain = system.active_domain();
        let larger = oracle::initial_state(&system, &domain, OracleMode::Extended, &BTreeMap::new())
            .expect("within caps");
        let mut smaller = larger.clone();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed.wrapping_add(71));
        let nodes: Vec<NodeId> = system.nodes.keys().cloned().collect();
        for node in &nodes {
            smaller.set_mut(node).unwrap().retain(|_, _| rng.gen_bool(0.7));
        }
        let stepped_larger = oracle::consequence_step(&larger, &system.rules);
        let stepped_smaller = oracle::consequence_step(&smaller, &system.rules);
        for (id, set) in stepped_smaller.sets() {
            let small: BTreeSet<_> = set.interpretations().into_iter().collect();
            let large: BTreeSet<_> =
                stepped_larger.sets()[id].interpretations().into_iter().collect();
            prop_assert!(small.is_subset(&large));
        }
    }

    #[test]
    fn engines_agree_with_the_oracle_on_extended_corpora(seed in any::<u64>()) {
        let system = generate::random_extended_system(seed, false);
        let state = oracle::run(&system, OracleMode::Extended, 0).expect("within caps");
        for query in generate::random_queries(&system, 2, seed.wrapping_add(31)) {
            let oracle_answer = oracle::certain_answer(&state, &query).expect("answers");
            let engine_answer = fixpoint::answer(&system, &query).expect("answers");
            prop_assert_eq!(&oracle_answer.tuples, &engine_answer, "query {}", query);
            let via_acyclic = acyclic::answer_acyclic(&system, &query).expect("answers");
            prop_assert_eq!(&via_acyclic, &engine_answer, "query {}", query);
        }
    }

    #[test]
    fn local_and_extended_modes_agree_when_everything_is_satisfiable(seed in any::<u64>()) {
        let system = generate::random_extended_system(seed, false);
        let extended = oracle::run(&system, OracleMode::Extended, 0).expect("caps");
        if extended.sets().values().any(|s| s.is_empty()) {
            return Ok(());
        }
        let local = oracle::run(&system, OracleMode::Local, 0).expect("caps");
        prop_assert!(!local.no_model());
        for query in generate::random_queries(&system, 2, seed.wrapping_add(41)) {
            let a = oracle::certain_answer(&extended, &query).expect("answers");
            let b = oracle::certain_answer(&local, &query).expect("answers");
            prop_assert_eq!(a.tuples, b.tuples);
        }
    }

    #[test]
    fn a_fresh_constant_leaves_old_answers_alone(seed in any::<u64>()) {
        let system = generate::random_datalog_system(seed, false);
        let base = oracle::run(&system, OracleMode::Extended, 0).expect("caps");
        let probed = match oracle::run(&system, OracleMode::Extended, 1) {
            Ok(state) => state,
            // The extra constant may push a node over the enumeration cap.
            Err(_) => return Ok(()),
        };
        let own = system.active_domain();
        for query in generate::random_queries(&system, 2, seed.wrapping_add(53)) {
            let before = oracle::certain_answer(&base, &query).expect("answers");
            let after = oracle::certain_answer(&probed, &query).expect("answers");
            let after_restricted: BTreeSet<Vec<Constant>> = after
                .tuples
                .into_iter()
                .filter(|t| t.iter().all(|c| own.contains(c)))
                .collect();
            prop_assert_eq!(before.tuples, after_restricted);
        }
    }
}

// ---------------------------------------------------------------------------
// compiler

/// Naive bottom-up evaluation with its own substitution code.
fn naive_eval(program: &compiler::DatalogProgram) -> BTreeSet<GroundAtom> {
    let model = naive_closure(&program.edb, &program.rules);
    model.difference(&program.edb).cloned().collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn seminaive_matches_naive_evaluation(seed in any::<u64>()) {
        let system = generate::random_datalog_system(seed, false);
        let program = compiler::compile_global_program(&system).expect("compiles");
        prop_assert_eq!(compiler::seminaive_eval(&program), naive_eval(&program));
    }

    #[test]
    fn global_program_answers_match_the_fixpoint(seed in any::<u64>()) {
        let system = generate::random_datalog_system(seed, false);
        for query in generate::random_queries(&system, 2, seed.wrapping_add(61)) {
            let via_global = compiler::answer_via_global(&system, &query).expect("answers");
            let via_fixpoint = fixpoint::answer(&system, &query).expect("answers");
            prop_assert_eq!(via_global, via_fixpoint, "query {}", query);
        }
    }
}

// ---------------------------------------------------------------------------
// distsim

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn schedules_converge_to_the_fixpoint_state(seed in any::<u64>()) {
        let system = generate::random_extended_system(seed, false);
        let reference = fixpoint::saturate(&system).expect("runs");
        let sync = distsim::run_simulation(&system, &distsim::Schedule::synchronous()).expect("runs");
        prop_assert_eq!(&sync.theories, reference.theories());
        for sim_seed in 0..3u64 {
            let outcome =
                distsim::run_simulation(&system, &distsim::Schedule::seeded(sim_seed)).expect("runs");
            prop_assert_eq!(&outcome.theories, reference.theories());
        }
    }

    #[test]
    fn engines_agree_on_chased_nulls(seed in any::<u64>()) {
        // Existential heads mint labeled nulls; all three engines must
        // produce identical theories (null labels included) and answers.
        let system = generate::random_extended_system(seed, true);
        let reference = fixpoint::saturate(&system).expect("runs");
        let (theories, _) = acyclic::materialize(&system).expect("runs");
        prop_assert_eq!(&theories, reference.theories());
        let sim = distsim::run_simulation(&system, &distsim::Schedule::seeded(seed)).expect("runs");
        prop_assert_eq!(&sim.theories, reference.theories());
        for query in generate::random_queries(&system, 2, seed.wrapping_add(77)) {
            let a = fixpoint::certain_answer(&reference, &query).expect("answers");
            let b = acyclic::answer_acyclic(&system, &query).expect("answers");
            prop_assert_eq!(&a, &b, "query {}", query);
        }
    }

    #[test]
    fn every_sent_tuple_is_certain_in_the_end(seed in any::<u64>()) {
        let system = generate::random_extended_system(seed, false);
        let outcome = distsim::run_simulation(&system, &distsim::Schedule::synchronous()).expect("runs");
        for message in &outcome.log {
            let distsim::Payload::Delta(tuples) = &message.payload else { continue };
            let rule = system.rules.iter().find(|r| r.id == message.rule).expect("known rule");
            let conjunct = rule
                .body
                .iter()
                .find(|c| c.source == message.from)
                .expect("sender sources the conjunct");
            let vars = rule.conjunct_vars(conjunct);
            let rows = nodekb::certain_conjunction(
                &outcome.statuses[&message.from],
                &conjunct.atoms,
                &vars,
                &outcome.domain,
            );
            for tuple in tuples {
                prop_assert!(rows.contains(tuple), "retracted tuple on rule {}", rule.id);
            }
        }
    }

    #[test]
    fn deltas_never_repeat_and_seqs_increase(seed in any::<u64>()) {
        let system = generate::random_datalog_system(seed, true);
        let outcome = distsim::run_simulation(&system, &distsim::Schedule::seeded(seed)).expect("runs");
        let mut seen: BTreeMap<(NodeId, String), BTreeSet<Vec<GroundTerm>>> = BTreeMap::new();
        let mut seqs: BTreeMap<(NodeId, NodeId), u64> = BTreeMap::new();
        for message in &outcome.log {
            let edge = (message.from.clone(), message.to.clone());
            let last = seqs.entry(edge).or_insert(0);
            prop_assert!(message.seq > *last);
            *last = message.seq;
            if let distsim::Payload::Delta(tuples) = &message.payload {
                let sent = seen.entry((message.from.clone(), message.rule.to_string())).or_default();
                for t in tuples {
                    prop_assert!(sent.insert(t.clone()), "tuple sent twice");
                }
            }
        }
    }
}

// ---------------------------------------------------------------------------
// eval (support machinery)

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn seminaive_closure_equals_naive_closure(seed in any::<u64>()) {
        let theory = random_theory(seed);
        prop_assert_eq!(
            eval::least_model(theory.facts.iter(), &theory.rules),
            naive_closure(&theory.facts, &theory.rules)
        );
    }
}
