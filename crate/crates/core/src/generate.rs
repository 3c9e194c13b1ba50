//! Network generators: the regular shapes the benchmark harness measures,
//! and seeded random corpora the cross-engine checks run on. Everything is
//! deterministic in the seed.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::model::{
    Atom, BodyConjunct, Constant, CoordinationRule, Denial, GroundAtom, GroundTerm, LocalTheory,
    NodeId, P2PSystem, Query, RuleHead, RuleId, Term, Variable,
};

fn node_name(i: usize) -> NodeId {
    NodeId::new(format!("{:03}", i))
}

fn data_constants(k: usize) -> Vec<Constant> {
    (1..=k).map(|i| Constant::new(format!("c{}", i))).collect()
}

fn copy_rule(id: usize, from: usize, to: usize) -> CoordinationRule {
    CoordinationRule {
        id: RuleId::new(format!("r{}", id)),
        body: vec![BodyConjunct {
            source: node_name(from),
            atoms: vec![Atom::new(node_name(from), "P", vec![Term::var("x")])],
        }],
        target: node_name(to),
        head: RuleHead::Conjunctive(vec![Atom::new(node_name(to), "P", vec![Term::var("x")])]),
    }
}

fn seeded_node(i: usize, facts: usize) -> LocalTheory {
    let mut theory = LocalTheory::empty(node_name(i));
    for c in data_constants(facts) {
        theory.insert_fact(GroundAtom::new(node_name(i), "P", vec![GroundTerm::Const(c)]));
    }
    theory
}

/// A linear pipeline 1 -> 2 -> ... -> n copying one unary relation; the
/// data sits at node 1.
pub fn chain(nodes: usize, facts: usize) -> P2PSystem {
    let mut system = P2PSystem::default();
    for i in 1..=nodes {
        let theory = if i == 1 { seeded_node(1, facts) } else { LocalTheory::empty(node_name(i)) };
        system.nodes.insert(node_name(i), theory);
    }
    for i in 1..nodes {
        system.rules.push(copy_rule(i, i, i + 1));
    }
    system
}

/// A binary tree rooted at node 1 (children of i are 2i and 2i+1), copying
/// one unary relation away from the root.
pub fn tree(nodes: usize, facts: usize) -> P2PSystem {
    let mut system = P2PSystem::default();
    for i in 1..=nodes {
        let theory = if i == 1 { seeded_node(1, facts) } else { LocalTheory::empty(node_name(i)) };
        system.nodes.insert(node_name(i), theory);
    }
    for i in 2..=nodes {
        system.rules.push(copy_rule(i - 1, i / 2, i));
    }
    system
}

/// A random DAG: each node beyond the first copies from one or two earlier
/// nodes.
pub fn random_dag(nodes: usize, facts: usize, seed: u64) -> P2PSystem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut system = P2PSystem::default();
    for i in 1..=nodes {
        let theory = if i == 1 { seeded_node(1, facts) } else { LocalTheory::empty(node_name(i)) };
        system.nodes.insert(node_name(i), theory);
    }
    let mut id = 0usize;
    for i in 2..=nodes {
        let parents = 1 + rng.gen_range(0..2usize.min(i - 1));
        let mut chosen: BTreeSet<usize> = BTreeSet::new();
        while chosen.len() < parents {
            chosen.insert(rng.gen_range(1..i));
        }
        for p in chosen {
            id += 1;
            system.rules.push(copy_rule(id, p, i));
        }
    }
    system
}

/// The query the probes time: the copied relation at the highest node id.
pub fn sink_query(system: &P2PSystem) -> Query {
    let sink = system.nodes.keys().next_back().expect("generated systems are nonempty").clone();
    Query::conjunctive(sink.clone(), vec![Atom::new(sink, "P", vec![Term::var("x")])])
}

const CONST_POOL: [&str; 3] = ["a", "b", "c"];
const UNARY_PREDS: [&str; 3] = ["P", "Q", "R"];

/// Knobs for the random corpora.
struct CorpusShape {
    /// Restrict rule sources to lower-numbered nodes than the target.
    acyclic: bool,
    /// Allow disjunctive rule heads, node clauses, denials, and falsum.
    disjunctive: bool,
    /// Allow existential head variables (implies acyclic use downstream).
    existential: bool,
}

fn random_system(seed: u64, shape: &CorpusShape) -> P2PSystem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_nodes = rng.gen_range(2..=4usize);
    let n_consts = rng.gen_range(2..=3usize);
    let consts: Vec<Constant> = CONST_POOL[..n_consts].iter().map(|c| Constant::new(*c)).collect();

    let mut system = P2PSystem::default();
    let mut node_preds: Vec<Vec<(String, usize)>> = Vec::new();
    for i in 1..=n_nodes {
        let node = NodeId::new(i.to_string());
        let mut preds: Vec<(String, usize)> = Vec::new();
        let n_preds = rng.gen_range(1..=3usize);
        let mut names = UNARY_PREDS.to_vec();
        names.shuffle(&mut rng);
        for name in names.iter().take(n_preds) {
            preds.push((name.to_string(), 1));
        }
        // A binary predicate fits under the enumeration cap only with two
        // constants (3*2 + 4 = 10 atoms).
        if n_consts == 2 && !shape.disjunctive && rng.gen_bool(0.3) {
            preds.push(("B".to_string(), 2));
        }

        let mut theory = LocalTheory::empty(node.clone());
        for _ in 0..rng.gen_range(0..=3usize) {
            let (pred, arity) = preds[rng.gen_range(0..preds.len())].clone();
            let args: Vec<GroundTerm> = (0..arity)
                .map(|_| GroundTerm::Const(consts[rng.gen_range(0..consts.len())].clone()))
                .collect();
            theory.insert_fact(GroundAtom::new(node.clone(), pred, args));
        }
        if preds.len() >= 2 && rng.gen_bool(0.5) {
            let rule = random_local_rule(&mut rng, &node, &preds, &consts);
            theory.rules.push(rule);
        }
        if shape.disjunctive {
            for _ in 0..rng.gen_range(0..=2usize) {
                let mut atoms: BTreeSet<GroundAtom> = BTreeSet::new();
                for _ in 0..2 {
                    let (pred, _) = &preds[rng.gen_range(0..preds.len())];
                    atoms.insert(GroundAtom::new(
                        node.clone(),
                        pred.clone(),
                        vec![GroundTerm::Const(consts[rng.gen_range(0..consts.len())].clone())],
                    ));
                }
                if atoms.len() == 2 {
                    theory.add_disjunction(atoms.into_iter().collect());
                }
            }
            if rng.gen_bool(0.4) {
                let mut body = Vec::new();
                for _ in 0..rng.gen_range(1..=2usize) {
                    let (pred, _) = &preds[rng.gen_range(0..preds.len())];
                    body.push(Atom::new(node.clone(), pred.clone(), vec![Term::var("x")]));
                }
                theory.denials.push(Denial { body });
            }
            if rng.gen_bool(0.08) {
                theory.falsum = true;
            }
        }
        system.nodes.insert(node, theory);
        node_preds.push(preds);
    }

    let n_rules = rng.gen_range(1..=6usize);
    for r in 1..=n_rules {
        let target_idx = if shape.acyclic {
            rng.gen_range(2..=n_nodes)
        } else {
            rng.gen_range(1..=n_nodes)
        };
        let mut candidates: Vec<usize> =
            (1..=n_nodes).filter(|i| *i != target_idx && (!shape.acyclic || *i < target_idx)).collect();
        if candidates.is_empty() {
            continue;
        }
        candidates.shuffle(&mut rng);
        let n_sources = rng.gen_range(1..=2usize.min(candidates.len()));
        let sources = &candidates[..n_sources];

        let vars = [Variable::new("x"), Variable::new("y"), Variable::new("z")];
        let mut body = Vec::new();
        let mut body_vars: Vec<Variable> = Vec::new();
        for &s in sources {
            let node = NodeId::new(s.to_string());
            let preds = &node_preds[s - 1];
            let mut atoms = Vec::new();
            for _ in 0..rng.gen_range(1..=2usize) {
                let (pred, arity) = preds[rng.gen_range(0..preds.len())].clone();
                let args: Vec<Term> = (0..arity)
                    .map(|_| {
                        if rng.gen_bool(0.8) {
                            let v = vars[rng.gen_range(0..vars.len())].clone();
                            if !body_vars.contains(&v) {
                                body_vars.push(v.clone());
                            }
                            Term::Var(v)
                        } else {
                            Term::Const(consts[rng.gen_range(0..consts.len())].clone())
                        }
                    })
                    .collect();
                atoms.push(Atom::new(node.clone(), pred, args));
            }
            body.push(BodyConjunct { source: node, atoms });
        }
        if body_vars.is_empty() {
            // Keep at least one exported variable so heads have data flow.
            let conjunct = &mut body[0];
            let atom = &mut conjunct.atoms[0];
            if !atom.args.is_empty() {
                atom.args[0] = Term::var("x");
                body_vars.push(Variable::new("x"));
            }
        }

        let target = NodeId::new(target_idx.to_string());
        let target_preds = &node_preds[target_idx - 1];
        let unary_targets: Vec<&(String, usize)> =
            target_preds.iter().filter(|(_, a)| *a == 1).collect();
        if unary_targets.is_empty() {
            continue;
        }
        let head_arg = |rng: &mut ChaCha8Rng, body_vars: &[Variable]| -> Term {
            if rng.gen_bool(0.85) {
                Term::Var(body_vars[rng.gen_range(0..body_vars.len())].clone())
            } else {
                Term::Const(consts[rng.gen_range(0..consts.len())].clone())
            }
        };
        let disjunctive_head = shape.disjunctive && rng.gen_bool(0.35);
        let existential_head = shape.existential && !disjunctive_head && rng.gen_bool(0.25);
        let head = if disjunctive_head && unary_targets.len() >= 2 {
            let mut picks = unary_targets.clone();
            picks.shuffle(&mut rng);
            let arg = head_arg(&mut rng, &body_vars);
            RuleHead::Disjunctive(vec![
                Atom::new(target.clone(), picks[0].0.clone(), vec![arg.clone()]),
                Atom::new(target.clone(), picks[1].0.clone(), vec![arg]),
            ])
        } else {
            let mut atoms = Vec::new();
            for _ in 0..rng.gen_range(1..=2usize) {
                let (pred, arity) = unary_targets[rng.gen_range(0..unary_targets.len())].clone();
                let args: Vec<Term> = (0..arity)
                    .map(|_| {
                        if existential_head && rng.gen_bool(0.5) {
                            Term::var("w")
                        } else {
                            head_arg(&mut rng, &body_vars)
                        }
                    })
                    .collect();
                atoms.push(Atom::new(target.clone(), pred, args));
            }
            RuleHead::Conjunctive(atoms)
        };
        system.rules.push(CoordinationRule {
            id: RuleId::new(format!("r{}", r)),
            body,
            target,
            head,
        });
    }
    debug_assert!(system.validate().is_empty(), "generated system must validate");
    system
}

fn random_local_rule(
    rng: &mut ChaCha8Rng,
    node: &NodeId,
    preds: &[(String, usize)],
    consts: &[Constant],
) -> crate::model::DefiniteRule {
    let vars = [Variable::new("x"), Variable::new("y")];
    let mut body = Vec::new();
    let mut body_vars: Vec<Variable> = Vec::new();
    for _ in 0..rng.gen_range(1..=2usize) {
        let (pred, arity) = preds[rng.gen_range(0..preds.len())].clone();
        let args: Vec<Term> = (0..arity)
            .map(|_| {
                let v = vars[rng.gen_range(0..vars.len())].clone();
                if !body_vars.contains(&v) {
                    body_vars.push(v.clone());
                }
                Term::Var(v)
            })
            .collect();
        body.push(Atom::new(node.clone(), pred, args));
    }
    let (pred, arity) = preds[rng.gen_range(0..preds.len())].clone();
    let args: Vec<Term> = (0..arity)
        .map(|_| {
            if rng.gen_bool(0.9) {
                Term::Var(body_vars[rng.gen_range(0..body_vars.len())].clone())
            } else {
                Term::Const(consts[rng.gen_range(0..consts.len())].clone())
            }
        })
        .collect();
    crate::model::DefiniteRule::new(Atom::new(node.clone(), pred, args), body)
}

/// A random Datalog-only network: plain facts and definite rules at every
/// node, conjunctive heads without existential variables. May be cyclic
/// unless `acyclic` is set.
pub fn random_datalog_system(seed: u64, acyclic: bool) -> P2PSystem {
    random_system(seed, &CorpusShape { acyclic, disjunctive: false, existential: false })
}

/// A random acyclic network exercising the full feature set: disjunctive
/// heads, node clauses, denials, and the occasional inconsistent node.
/// Existential head variables appear only when requested.
pub fn random_extended_system(seed: u64, existential: bool) -> P2PSystem {
    random_system(seed, &CorpusShape { acyclic: true, disjunctive: true, existential })
}

/// Random positive queries over the node signatures of a system: unions of
/// one or two conjuncts sharing the answer variable.
pub fn random_queries(system: &P2PSystem, count: usize, seed: u64) -> Vec<Query> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nodes: Vec<NodeId> = system.nodes.keys().cloned().collect();
    let mut queries = Vec::new();
    for _ in 0..count {
        let node = nodes[rng.gen_range(0..nodes.len())].clone();
        let signature: Vec<(String, usize)> = system.node_signature(&node).into_iter().collect();
        if signature.is_empty() {
            queries.push(Query::conjunctive(
                node.clone(),
                vec![Atom::new(node, "P", vec![Term::var("x")])],
            ));
            continue;
        }
        let x = Variable::new("x");
        let mut disjuncts = Vec::new();
        for _ in 0..rng.gen_range(1..=2usize) {
            let mut atoms = Vec::new();
            for i in 0..rng.gen_range(1..=2usize) {
                let (pred, arity) = signature[rng.gen_range(0..signature.len())].clone();
                let args: Vec<Term> = (0..arity)
                    .map(|pos| {
                        // The answer variable anchors the first position of
                        // the first atom so every disjunct binds it.
                        if (pos == 0 && i == 0) || rng.gen_bool(0.5) {
                            Term::Var(x.clone())
                        } else {
                            Term::var("y")
                        }
                    })
                    .collect();
                atoms.push(Atom::new(node.clone(), pred, args));
            }
            disjuncts.push(atoms);
        }
        queries.push(Query { node, answer_vars: vec![x], disjuncts });
    }
    queries
}

/// Adds up to `count` random facts over existing predicates and the shared
/// constant pool; the result is a superset instance of the input.
pub fn add_random_facts(system: &P2PSystem, count: usize, seed: u64) -> P2PSystem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut bigger = system.clone();
    let nodes: Vec<NodeId> = bigger.nodes.keys().cloned().collect();
    let consts: Vec<Constant> = CONST_POOL.iter().map(|c| Constant::new(*c)).collect();
    for _ in 0..count {
        let node = nodes[rng.gen_range(0..nodes.len())].clone();
        let signature: Vec<(String, usize)> = system.node_signature(&node).into_iter().collect();
        if signature.is_empty() {
            continue;
        }
        let (pred, arity) = signature[rng.gen_range(0..signature.len())].clone();
        let args: Vec<GroundTerm> = (0..arity)
            .map(|_| GroundTerm::Const(consts[rng.gen_range(0..consts.len())].clone()))
            .collect();
        let theory = bigger.nodes.get_mut(&node).expect("known node");
        theory.insert_fact(GroundAtom::new(node.clone(), pred, args));
    }
    bigger
}

/// A fixed three-node pipeline whose data size scales: `facts` random pairs
/// at node 1 are copied to node 2, projected by a local rule, and copied on
/// to node 3. Used for the data-complexity trend.
pub fn data_scaling_system(facts: usize, seed: u64) -> P2PSystem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n1 = NodeId::new("1");
    let n2 = NodeId::new("2");
    let n3 = NodeId::new("3");
    let mut system = P2PSystem::default();

    let pool = (facts as f64).sqrt().ceil() as usize + 1;
    let mut t1 = LocalTheory::empty(n1.clone());
    while t1.facts.len() < facts {
        let a = rng.gen_range(0..pool);
        let b = rng.gen_range(0..pool);
        t1.insert_fact(GroundAtom::new(
            n1.clone(),
            "R",
            vec![
                GroundTerm::Const(Constant::new(format!("v{}", a))),
                GroundTerm::Const(Constant::new(format!("v{}", b))),
            ],
        ));
    }
    system.nodes.insert(n1.clone(), t1);

    let mut t2 = LocalTheory::empty(n2.clone());
    t2.rules.push(crate::model::DefiniteRule::new(
        Atom::new(n2.clone(), "T", vec![Term::var("x")]),
        vec![Atom::new(n2.clone(), "S", vec![Term::var("x"), Term::var("y")])],
    ));
    system.nodes.insert(n2.clone(), t2);
    system.nodes.insert(n3.clone(), LocalTheory::empty(n3.clone()));

    system.rules.push(CoordinationRule {
        id: RuleId::new("r1"),
        body: vec![BodyConjunct {
            source: n1.clone(),
            atoms: vec![Atom::new(n1.clone(), "R", vec![Term::var("x"), Term::var("y")])],
        }],
        target: n2.clone(),
        head: RuleHead::Conjunctive(vec![Atom::new(
            n2.clone(),
            "S",
            vec![Term::var("x"), Term::var("y")],
        )]),
    });
    system.rules.push(CoordinationRule {
        id: RuleId::new("r2"),
        body: vec![BodyConjunct {
            source: n2.clone(),
            atoms: vec![Atom::new(n2.clone(), "T", vec![Term::var("x")])],
        }],
        target: n3.clone(),
        head: RuleHead::Conjunctive(vec![Atom::new(n3.clone(), "U", vec![Term::var("x")])]),
    });
    system
}
