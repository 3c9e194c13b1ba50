//! Brute-force evaluator over explicitly enumerated interpretation sets.
//!
//! On tiny instances this module enumerates, per node, every Herbrand
//! interpretation over the node's grounded signature, then iterates the
//! definition of the consequence operator directly: whenever a rule body is
//! certain (true in every interpretation of each source set), the target
//! set is filtered to interpretations satisfying the instantiated head.
//! Interpretation sets only shrink, so a fixpoint is always reached.
//!
//! Everything here is written against bitmask interpretations and its own
//! grounding code, independent of the evaluation machinery the engines use;
//! this is the ground truth the engines are tested against.
//!
//! Two modes differ only in how an empty interpretation set is read. In
//! extended mode an empty set is a legitimate verdict for one node: that
//! node is inconsistent and everything is vacuously certain there, with
//! nothing else affected. In local mode a node's set may not be empty, so
//! an empty set anywhere means the system as a whole has no model and
//! every query answers with every tuple over the domain.

use std::collections::{BTreeMap, BTreeSet};

use crate::error::EngineError;
use crate::model::{
    Atom, Constant, CoordinationRule, GroundAtom, GroundTerm, LocalTheory, NodeId, P2PSystem,
    Query, RuleHead, Term, Variable,
};

/// Ceiling on ground atoms per node for full enumeration (2^14 = 16384
/// interpretations).
pub const UNIVERSE_CAP: usize = 14;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OracleMode {
    Local,
    Extended,
}

/// A ground quantifier-free formula, used to impose side axioms on a node
/// that the engine-tier theory syntax cannot express.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum GroundFormula {
    Atom(GroundAtom),
    Not(Box<GroundFormula>),
    And(Vec<GroundFormula>),
    Or(Vec<GroundFormula>),
}

impl GroundFormula {
    pub fn negate(f: GroundFormula) -> Self {
        GroundFormula::Not(Box::new(f))
    }
}

type Mask = u32;

/// All interpretations of one node that survive so far, over the node's
/// grounded atom universe.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InterpretationSet {
    pub node: NodeId,
    universe: Vec<GroundAtom>,
    index: BTreeMap<GroundAtom, usize>,
    interps: Vec<Mask>,
}

impl InterpretationSet {
    pub fn len(&self) -> usize {
        self.interps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.interps.is_empty()
    }

    pub fn universe(&self) -> &[GroundAtom] {
        &self.universe
    }

    /// Materializes the surviving interpretations as atom sets.
    pub fn interpretations(&self) -> Vec<BTreeSet<GroundAtom>> {
        self.interps
            .iter()
            .map(|mask| {
                self.universe
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| mask & (1 << i) != 0)
                    .map(|(_, a)| a.clone())
                    .collect()
            })
            .collect()
    }

    fn bit(&self, atom: &GroundAtom) -> Option<usize> {
        self.index.get(atom).copied()
    }

    /// Keeps only the interpretations accepted by the predicate, which sees
    /// the interpretation's position and its atoms.
    pub fn retain(&mut self, mut keep: impl FnMut(usize, &BTreeSet<GroundAtom>) -> bool) {
        let universe = self.universe.clone();
        let mut position = 0usize;
        self.interps.retain(|mask| {
            let atoms: BTreeSet<GroundAtom> = universe
                .iter()
                .enumerate()
                .filter(|(i, _)| mask & (1 << i) != 0)
                .map(|(_, a)| a.clone())
                .collect();
            let verdict = keep(position, &atoms);
            position += 1;
            verdict
        });
    }
}

/// Per-node interpretation sets evolving under the consequence operator.
#[derive(Clone, Debug)]
pub struct OracleState {
    pub mode: OracleMode,
    sets: BTreeMap<NodeId, InterpretationSet>,
    domain: BTreeSet<Constant>,
    no_model: bool,
}

impl OracleState {
    pub fn set(&self, node: &NodeId) -> Option<&InterpretationSet> {
        self.sets.get(node)
    }

    pub fn set_mut(&mut self, node: &NodeId) -> Option<&mut InterpretationSet> {
        self.sets.get_mut(node)
    }

    pub fn sets(&self) -> &BTreeMap<NodeId, InterpretationSet> {
        &self.sets
    }

    pub fn domain(&self) -> &BTreeSet<Constant> {
        &self.domain
    }

    /// Local mode only: true when some node's set was forced empty, i.e.
    /// the system has no model at all.
    pub fn no_model(&self) -> bool {
        self.no_model
    }
}

/// Answer of a query against an oracle state. `all` marks vacuous
/// certainty: the answer is every tuple over the domain, either because the
/// whole system has no model (local mode) or because the query node's set
/// is empty (extended mode).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OracleAnswer {
    pub tuples: BTreeSet<Vec<Constant>>,
    pub all: bool,
}

fn subst(atom: &Atom, assignment: &BTreeMap<Variable, Constant>) -> GroundAtom {
    let args = atom
        .args
        .iter()
        .map(|t| match t {
            Term::Const(c) => GroundTerm::Const(c.clone()),
            Term::Var(v) => GroundTerm::Const(
                assignment.get(v).expect("oracle assignments bind every variable").clone(),
            ),
        })
        .collect();
    GroundAtom::new(atom.node.clone(), atom.predicate.clone(), args)
}

/// Every assignment of `vars` to constants of `domain`.
fn assignments(
    vars: &[Variable],
    domain: &BTreeSet<Constant>,
) -> Vec<BTreeMap<Variable, Constant>> {
    let mut out = vec![BTreeMap::new()];
    for var in vars {
        let mut next = Vec::with_capacity(out.len() * domain.len());
        for assignment in &out {
            for c in domain {
                let mut a = assignment.clone();
                a.insert(var.clone(), c.clone());
                next.push(a);
            }
        }
        out = next;
    }
    out
}

fn atom_vars(atoms: &[Atom]) -> Vec<Variable> {
    let mut vars = Vec::new();
    for atom in atoms {
        for v in atom.variables() {
            if !vars.contains(v) {
                vars.push(v.clone());
            }
        }
    }
    vars
}

/// Grounds a conjunction of atoms into a mask over `set`'s universe, given
/// values for some variables; remaining variables are enumerated over the
/// domain. Returns one mask per grounding; a grounding touching an atom
/// outside the universe is unsatisfiable and dropped.
fn conjunction_masks(
    atoms: &[Atom],
    fixed: &BTreeMap<Variable, Constant>,
    set: &InterpretationSet,
    domain: &BTreeSet<Constant>,
) -> Vec<Mask> {
    let all_vars = atom_vars(atoms);
    let free: Vec<Variable> = all_vars.into_iter().filter(|v| !fixed.contains_key(v)).collect();
    let mut masks = Vec::new();
    'next: for extra in assignments(&free, domain) {
        let mut assignment = fixed.clone();
        assignment.extend(extra);
        let mut mask: Mask = 0;
        for atom in atoms {
            let ground = subst(atom, &assignment);
            match set.bit(&ground) {
                Some(bit) => mask |= 1 << bit,
                None => continue 'next,
            }
        }
        masks.push(mask);
    }
    masks
}

fn eval_formula(formula: &GroundFormula, set: &InterpretationSet, interp: Mask) -> bool {
    match formula {
        GroundFormula::Atom(a) => set.bit(a).is_some_and(|bit| interp & (1 << bit) != 0),
        GroundFormula::Not(f) => !eval_formula(f, set, interp),
        GroundFormula::And(fs) => fs.iter().all(|f| eval_formula(f, set, interp)),
        GroundFormula::Or(fs) => fs.iter().any(|f| eval_formula(f, set, interp)),
    }
}

/// Enumerates every interpretation over the node's grounded signature that
/// satisfies the theory and all extra formulas.
pub fn enumerate_interpretations(
    theory: &LocalTheory,
    signature: &BTreeSet<(String, usize)>,
    domain: &BTreeSet<Constant>,
    extra: &[GroundFormula],
) -> Result<InterpretationSet, EngineError> {
    let mut preds: BTreeSet<(String, usize)> = signature.clone();
    for f in extra {
        collect_formula_preds(f, &mut preds);
    }

    let mut universe: Vec<GroundAtom> = Vec::new();
    for (pred, arity) in &preds {
        let mut tuples: Vec<Vec<GroundTerm>> = vec![Vec::new()];
        for _ in 0..*arity {
            let mut next = Vec::new();
            for t in &tuples {
                for c in domain {
                    let mut t = t.clone();
                    t.push(GroundTerm::Const(c.clone()));
                    next.push(t);
                }
            }
            tuples = next;
        }
        for args in tuples {
            universe.push(GroundAtom::new(theory.node.clone(), pred.clone(), args));
        }
    }
    universe.sort();
    universe.dedup();
    if universe.len() > UNIVERSE_CAP {
        return Err(EngineError::UniverseTooLarge {
            node: theory.node.clone(),
            atoms: universe.len(),
            cap: UNIVERSE_CAP,
        });
    }
    let index: BTreeMap<GroundAtom, usize> =
        universe.iter().enumerate().map(|(i, a)| (a.clone(), i)).collect();
    let mut set = InterpretationSet {
        node: theory.node.clone(),
        universe,
        index,
        interps: Vec::new(),
    };

    if theory.falsum {
        return Ok(set);
    }

    // Compile the grounded theory once.
    let mut required: Mask = 0;
    let mut impossible = false;
    for fact in &theory.facts {
        match set.bit(fact) {
            Some(bit) => required |= 1 << bit,
            None => impossible = true,
        }
    }
    // body mask -> head mask (all head atoms) per grounded definite rule
    let mut rule_checks: Vec<(Mask, Mask)> = Vec::new();
    for rule in &theory.rules {
        let vars = {
            let mut vs = atom_vars(&rule.body);
            for v in rule.head.variables() {
                if !vs.contains(v) {
                    vs.push(v.clone());
                }
            }
            vs
        };
        for assignment in assignments(&vars, domain) {
            let mut body: Mask = 0;
            let mut body_possible = true;
            for atom in &rule.body {
                match set.bit(&subst(atom, &assignment)) {
                    Some(bit) => body |= 1 << bit,
                    None => {
                        body_possible = false;
                        break;
                    }
                }
            }
            if !body_possible {
                continue;
            }
            match set.bit(&subst(&rule.head, &assignment)) {
                Some(bit) => rule_checks.push((body, 1 << bit)),
                // A satisfiable body forcing a head outside the universe
                // cannot happen when the domain covers the active domain.
                None => rule_checks.push((body, Mask::MAX)),
            }
        }
    }
    let mut clause_checks: Vec<Mask> = Vec::new();
    for clause in &theory.clauses {
        let mut any: Mask = 0;
        for atom in clause.atoms() {
            if let Some(bit) = set.bit(atom) {
                any |= 1 << bit;
            }
        }
        clause_checks.push(any);
    }
    let mut denial_checks: Vec<Mask> = Vec::new();
    for denial in &theory.denials {
        let vars = atom_vars(&denial.body);
        for assignment in assignments(&vars, domain) {
            let mut body: Mask = 0;
            let mut possible = true;
            for atom in &denial.body {
                match set.bit(&subst(atom, &assignment)) {
                    Some(bit) => body |= 1 << bit,
                    None => {
                        possible = false;
                        break;
                    }
                }
            }
            if possible {
                denial_checks.push(body);
            }
        }
    }

    if impossible {
        return Ok(set);
    }
    let n = set.universe.len() as u32;
    for interp in 0..(1u64 << n) {
        let interp = interp as Mask;
        if interp & required != required {
            continue;
        }
        if !rule_checks.iter().all(|(body, head)| interp & body != *body || interp & head == *head) {
            continue;
        }
        if !clause_checks.iter().all(|any| interp & any != 0) {
            continue;
        }
        if !denial_checks.iter().all(|body| interp & body != *body) {
            continue;
        }
        if !extra.iter().all(|f| eval_formula(f, &set, interp)) {
            continue;
        }
        set.interps.push(interp);
    }
    Ok(set)
}

fn collect_formula_preds(f: &GroundFormula, preds: &mut BTreeSet<(String, usize)>) {
    match f {
        GroundFormula::Atom(a) => {
            preds.insert((a.predicate.clone(), a.arity()));
        }
        GroundFormula::Not(f) => collect_formula_preds(f, preds),
        GroundFormula::And(fs) | GroundFormula::Or(fs) => {
            for f in fs {
                collect_formula_preds(f, preds);
            }
        }
    }
}

/// Builds the starting state: per node, every interpretation satisfying the
/// local theory. In local mode an initially empty set already means the
/// system has no model.
pub fn initial_state(
    system: &P2PSystem,
    domain: &BTreeSet<Constant>,
    mode: OracleMode,
    extras: &BTreeMap<NodeId, Vec<GroundFormula>>,
) -> Result<OracleState, EngineError> {
    let mut sets = BTreeMap::new();
    let mut no_model = false;
    for (id, theory) in &system.nodes {
        let signature = system.node_signature(id);
        let empty = Vec::new();
        let extra = extras.get(id).unwrap_or(&empty);
        let set = enumerate_interpretations(theory, &signature, domain, extra)?;
        if set.is_empty() && mode == OracleMode::Local {
            no_model = true;
        }
        sets.insert(id.clone(), set);
    }
    Ok(OracleState { mode, sets, domain: domain.clone(), no_model })
}

/// True iff every interpretation in the source set satisfies the conjunct
/// under the assignment; an empty set is vacuously certain.
fn conjunct_certain(
    set: &InterpretationSet,
    atoms: &[Atom],
    fixed: &BTreeMap<Variable, Constant>,
    domain: &BTreeSet<Constant>,
) -> bool {
    let masks = conjunction_masks(atoms, fixed, set, domain);
    set.interps
        .iter()
        .all(|interp| masks.iter().any(|mask| interp & mask == *mask))
}

fn head_satisfied(
    set: &InterpretationSet,
    head: &RuleHead,
    fixed: &BTreeMap<Variable, Constant>,
    domain: &BTreeSet<Constant>,
    interp: Mask,
) -> bool {
    match head {
        RuleHead::Conjunctive(atoms) => {
            let masks = conjunction_masks(atoms, fixed, set, domain);
            masks.iter().any(|mask| interp & mask == *mask)
        }
        RuleHead::Disjunctive(atoms) => atoms.iter().any(|atom| {
            set.bit(&subst(atom, fixed)).is_some_and(|bit| interp & (1 << bit) != 0)
        }),
    }
}

/// One application of the consequence operator: for every rule instance
/// whose body is certain in the current state, filter the target set to the
/// interpretations satisfying the head.
pub fn consequence_step(state: &OracleState, rules: &[CoordinationRule]) -> OracleState {
    let mut next = state.clone();
    if state.no_model {
        return next;
    }
    for rule in rules {
        let exported: Vec<Variable> = rule.exported_vars().into_iter().collect();
        for assignment in assignments(&exported, &state.domain) {
            let certain = rule.body.iter().all(|conjunct| {
                state
                    .sets
                    .get(&conjunct.source)
                    .is_some_and(|set| conjunct_certain(set, &conjunct.atoms, &assignment, &state.domain))
            });
            if !certain {
                continue;
            }
            let target = next.sets.get(&rule.target).expect("rule targets a known node");
            let kept: Vec<Mask> = target
                .interps
                .iter()
                .copied()
                .filter(|interp| head_satisfied(target, &rule.head, &assignment, &state.domain, *interp))
                .collect();
            let empty = kept.is_empty();
            next.sets.get_mut(&rule.target).expect("rule targets a known node").interps = kept;
            if empty && state.mode == OracleMode::Local {
                next.no_model = true;
                return next;
            }
        }
    }
    next
}

/// Iterates the consequence operator from the initial state to its
/// fixpoint. Sets only shrink, so this terminates.
pub fn consequence_fixpoint(
    system: &P2PSystem,
    domain: &BTreeSet<Constant>,
    mode: OracleMode,
    extras: &BTreeMap<NodeId, Vec<GroundFormula>>,
) -> Result<OracleState, EngineError> {
    let mut state = initial_state(system, domain, mode, extras)?;
    loop {
        let next = consequence_step(&state, &system.rules);
        let same = next.no_model == state.no_model
            && next.sets.iter().all(|(id, set)| set.interps == state.sets[id].interps);
        state = next;
        if same {
            return Ok(state);
        }
    }
}

/// Runs the oracle end to end over the system's own constants plus
/// `extra_domain` fresh ones.
pub fn run(
    system: &P2PSystem,
    mode: OracleMode,
    extra_domain: usize,
) -> Result<OracleState, EngineError> {
    let mut domain = system.active_domain();
    for i in 1..=extra_domain {
        let mut name = format!("Aux{}", i);
        while domain.contains(&Constant::new(name.clone())) {
            name.push('x');
        }
        domain.insert(Constant::new(name));
    }
    consequence_fixpoint(system, &domain, mode, &BTreeMap::new())
}

/// Certain answers by definition: the tuples true in every surviving
/// interpretation of the query node.
pub fn certain_answer(
    state: &OracleState,
    query: &Query,
) -> Result<OracleAnswer, EngineError> {
    let all = |state: &OracleState| {
        let tuples = crate::nodekb::all_tuples(&state.domain, query.arity())
            .into_iter()
            .map(|t| {
                t.into_iter()
                    .map(|g| match g {
                        GroundTerm::Const(c) => c,
                        GroundTerm::Null(_) => unreachable!("domains hold constants only"),
                    })
                    .collect()
            })
            .collect();
        OracleAnswer { tuples, all: true }
    };
    if state.no_model {
        return Ok(all(state));
    }
    let set = state
        .sets
        .get(&query.node)
        .ok_or_else(|| EngineError::UnknownQueryNode(query.node.clone()))?;
    if set.is_empty() {
        return Ok(all(state));
    }
    let mut tuples = BTreeSet::new();
    'tuples: for assignment in assignments(&query.answer_vars, &state.domain) {
        for interp in &set.interps {
            let satisfied = query.disjuncts.iter().any(|atoms| {
                conjunction_masks(atoms, &assignment, set, &state.domain)
                    .iter()
                    .any(|mask| interp & mask == *mask)
            });
            if !satisfied {
                continue 'tuples;
            }
        }
        tuples.insert(query.answer_vars.iter().map(|v| assignment[v].clone()).collect());
    }
    Ok(OracleAnswer { tuples, all: false })
}

/// Checks that a state is a model of the system: every interpretation
/// satisfies its node's theory, and every rule's certainty condition holds
/// for every assignment.
pub fn check_global_model(state: &OracleState, system: &P2PSystem) -> bool {
    for (id, theory) in &system.nodes {
        let Some(set) = state.sets.get(id) else { return false };
        if theory.falsum && !set.is_empty() {
            return false;
        }
        for interps in &set.interps {
            if !interpretation_satisfies(theory, set, *interps, &state.domain) {
                return false;
            }
        }
    }
    for rule in &system.rules {
        let exported: Vec<Variable> = rule.exported_vars().into_iter().collect();
        for assignment in assignments(&exported, &state.domain) {
            let certain = rule.body.iter().all(|conjunct| {
                state
                    .sets
                    .get(&conjunct.source)
                    .is_some_and(|set| conjunct_certain(set, &conjunct.atoms, &assignment, &state.domain))
            });
            if !certain {
                continue;
            }
            let Some(target) = state.sets.get(&rule.target) else { return false };
            let forced = target
                .interps
                .iter()
                .all(|interp| head_satisfied(target, &rule.head, &assignment, &state.domain, *interp));
            if !forced {
                return false;
            }
        }
    }
    true
}

fn interpretation_satisfies(
    theory: &LocalTheory,
    set: &InterpretationSet,
    interp: Mask,
    domain: &BTreeSet<Constant>,
) -> bool {
    for fact in &theory.facts {
        if !set.bit(fact).is_some_and(|bit| interp & (1 << bit) != 0) {
            return false;
        }
    }
    for rule in &theory.rules {
        let mut vars = atom_vars(&rule.body);
        for v in rule.head.variables() {
            if !vars.contains(v) {
                vars.push(v.clone());
            }
        }
        for assignment in assignments(&vars, domain) {
            let body_holds = rule.body.iter().all(|atom| {
                set.bit(&subst(atom, &assignment)).is_some_and(|bit| interp & (1 << bit) != 0)
            });
            if body_holds {
                let head_holds = set
                    .bit(&subst(&rule.head, &assignment))
                    .is_some_and(|bit| interp & (1 << bit) != 0);
                if !head_holds {
                    return false;
                }
            }
        }
    }
    for clause in &theory.clauses {
        let holds = clause
            .atoms()
            .iter()
            .any(|a| set.bit(a).is_some_and(|bit| interp & (1 << bit) != 0));
        if !holds {
            return false;
        }
    }
    for denial in &theory.denials {
        let vars = atom_vars(&denial.body);
        for assignment in assignments(&vars, domain) {
            let fires = denial.body.iter().all(|atom| {
                set.bit(&subst(atom, &assignment)).is_some_and(|bit| interp & (1 << bit) != 0)
            });
            if fires {
                return false;
            }
        }
    }
    true
}
