//! Pattern matching and bottom-up evaluation over sets of ground atoms.
//!
//! `AtomStore` keeps one indexed relation per (node, predicate) pair and is
//! the substrate for conjunctive-query evaluation, definite-rule closure,
//! and denial checking.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use crate::model::{Atom, DefiniteRule, GroundAtom, GroundTerm, NodeId, Term, Variable};

/// An assignment of ground terms to variables.
pub type Binding = BTreeMap<Variable, GroundTerm>;

#[derive(Clone, Debug, Default)]
struct Relation {
    rows: Vec<Vec<GroundTerm>>,
    seen: HashSet<Vec<GroundTerm>>,
    /// Per-argument-position index into `rows`.
    index: Vec<HashMap<GroundTerm, Vec<usize>>>,
}

impl Relation {
    fn insert(&mut self, row: Vec<GroundTerm>) -> bool {
        if !self.seen.insert(row.clone()) {
            return false;
        }
        if self.index.len() < row.len() {
            self.index.resize_with(row.len(), HashMap::new);
        }
        let id = self.rows.len();
        for (pos, term) in row.iter().enumerate() {
            self.index[pos].entry(term.clone()).or_default().push(id);
        }
        self.rows.push(row);
        true
    }

    fn candidates(&self, bound: &[(usize, &GroundTerm)]) -> RelationCandidates<'_> {
        match bound.first() {
            None => RelationCandidates::All(0..self.rows.len()),
            Some((pos, term)) => match self.index.get(*pos).and_then(|ix| ix.get(term)) {
                Some(ids) => RelationCandidates::Ids(ids.iter()),
                None => RelationCandidates::All(0..0),
            },
        }
    }
}

enum RelationCandidates<'a> {
    All(std::ops::Range<usize>),
    Ids(std::slice::Iter<'a, usize>),
}

impl Iterator for RelationCandidates<'_> {
    type Item = usize;

    fn next(&mut self) -> Option<usize> {
        match self {
            RelationCandidates::All(range) => range.next(),
            RelationCandidates::Ids(ids) => ids.next().copied(),
        }
    }
}

/// An indexed set of ground atoms.
#[derive(Clone, Debug, Default)]
pub struct AtomStore {
    relations: HashMap<(NodeId, String, usize), Relation>,
    len: usize,
}

impl AtomStore {
    pub fn new() -> Self {
        AtomStore::default()
    }

    pub fn from_atoms<'a>(atoms: impl IntoIterator<Item = &'a GroundAtom>) -> Self {
        let mut store = AtomStore::new();
        for atom in atoms {
            store.insert(atom);
        }
        store
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn insert(&mut self, atom: &GroundAtom) -> bool {
        let key = (atom.node.clone(), atom.predicate.clone(), atom.arity());
        let new = self.relations.entry(key).or_default().insert(atom.args.clone());
        if new {
            self.len += 1;
        }
        new
    }

    pub fn contains(&self, atom: &GroundAtom) -> bool {
        let key = (atom.node.clone(), atom.predicate.clone(), atom.arity());
        self.relations.get(&key).is_some_and(|r| r.seen.contains(&atom.args))
    }

    pub fn atoms(&self) -> impl Iterator<Item = GroundAtom> + '_ {
        self.relations.iter().flat_map(|((node, pred, _), rel)| {
            rel.rows
                .iter()
                .map(move |row| GroundAtom::new(node.clone(), pred.clone(), row.clone()))
        })
    }

    /// Extends `binding` in every way that makes `pattern` match a stored
    /// atom, appending the results to `out`.
    pub fn match_atom(&self, pattern: &Atom, binding: &Binding, out: &mut Vec<Binding>) {
        let key = (pattern.node.clone(), pattern.predicate.clone(), pattern.arity());
        let Some(relation) = self.relations.get(&key) else { return };

        let mut bound_owned: Vec<(usize, GroundTerm)> = Vec::new();
        for (pos, term) in pattern.args.iter().enumerate() {
            match term {
                Term::Const(c) => bound_owned.push((pos, GroundTerm::Const(c.clone()))),
                Term::Var(v) => {
                    if let Some(t) = binding.get(v) {
                        bound_owned.push((pos, t.clone()));
                    }
                }
            }
        }
        let bound: Vec<(usize, &GroundTerm)> = bound_owned.iter().map(|(p, t)| (*p, t)).collect();

        'rows: for id in relation.candidates(&bound) {
            let row = &relation.rows[id];
            let mut extended = binding.clone();
            for (pos, term) in pattern.args.iter().enumerate() {
                match term {
                    Term::Const(c) => {
                        if row[pos] != GroundTerm::Const(c.clone()) {
                            continue 'rows;
                        }
                    }
                    Term::Var(v) => match extended.get(v) {
                        Some(t) => {
                            if *t != row[pos] {
                                continue 'rows;
                            }
                        }
                        None => {
                            extended.insert(v.clone(), row[pos].clone());
                        }
                    },
                }
            }
            out.push(extended);
        }
    }

    /// All bindings satisfying the conjunction, starting from `seed`.
    pub fn eval_conjunction(&self, atoms: &[Atom], seed: Binding) -> Vec<Binding> {
        let mut bindings = vec![seed];
        for atom in atoms {
            let mut next = Vec::new();
            for binding in &bindings {
                self.match_atom(atom, binding, &mut next);
            }
            if next.is_empty() {
                return Vec::new();
            }
            bindings = next;
        }
        bindings
    }

    /// True iff the conjunction has at least one match.
    pub fn satisfies_conjunction(&self, atoms: &[Atom]) -> bool {
        !self.eval_conjunction(atoms, Binding::new()).is_empty()
    }

    /// Projects the matches of a conjunction onto `vars`.
    pub fn project_conjunction(&self, atoms: &[Atom], vars: &[Variable]) -> BTreeSet<Vec<GroundTerm>> {
        self.eval_conjunction(atoms, Binding::new())
            .into_iter()
            .map(|b| project(&b, vars))
            .collect()
    }
}

/// Reads the values of `vars` out of a binding. Every variable must be
/// bound; range restriction guarantees that for rule and query projections.
pub fn project(binding: &Binding, vars: &[Variable]) -> Vec<GroundTerm> {
    vars.iter()
        .map(|v| binding.get(v).expect("projection variable is bound").clone())
        .collect()
}

pub fn instantiate(atom: &Atom, binding: &Binding) -> GroundAtom {
    let args = atom
        .args
        .iter()
        .map(|t| match t {
            Term::Const(c) => GroundTerm::Const(c.clone()),
            Term::Var(v) => binding.get(v).expect("instantiation variable is bound").clone(),
        })
        .collect();
    GroundAtom::new(atom.node.clone(), atom.predicate.clone(), args)
}

/// Closes `facts` under `rules` by semi-naive iteration: every round only
/// matches rule bodies against at least one atom derived in the previous
/// round.
pub fn least_model<'a>(
    facts: impl IntoIterator<Item = &'a GroundAtom>,
    rules: &[DefiniteRule],
) -> BTreeSet<GroundAtom> {
    let mut store = AtomStore::from_atoms(facts);
    let mut delta: Vec<GroundAtom> = store.atoms().collect();
    while !delta.is_empty() {
        let delta_store = AtomStore::from_atoms(delta.iter());
        let mut next: Vec<GroundAtom> = Vec::new();
        for rule in rules {
            for pivot in 0..rule.body.len() {
                // Seed bindings from the delta at the pivot position, then
                // match the remaining body atoms against the full store.
                let mut bindings = Vec::new();
                delta_store.match_atom(&rule.body[pivot], &Binding::new(), &mut bindings);
                for (i, atom) in rule.body.iter().enumerate() {
                    if i == pivot {
                        continue;
                    }
                    let mut extended = Vec::new();
                    for binding in &bindings {
                        store.match_atom(atom, binding, &mut extended);
                    }
                    bindings = extended;
                    if bindings.is_empty() {
                        break;
                    }
                }
                for binding in bindings {
                    let head = instantiate(&rule.head, &binding);
                    if !store.contains(&head) {
                        next.push(head);
                    }
                }
            }
        }
        delta.clear();
        for atom in next {
            if store.insert(&atom) {
                delta.push(atom);
            }
        }
    }
    store.atoms().collect()
}
