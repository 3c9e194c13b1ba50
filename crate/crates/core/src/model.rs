//! Logical syntax and the network description: nodes, local theories,
//! coordination rules, queries, and the structural checks over them.
//!
//! Every predicate is namespaced by the node it belongs to, so two nodes may
//! use the same predicate name without their signatures overlapping. Constants
//! are shared across the whole network and denote themselves.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

/// Identifier of a network node.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(String);

impl NodeId {
    pub fn new(name: impl Into<String>) -> Self {
        NodeId(name.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// A shared constant. Two constants denote the same object iff their names
/// are equal.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Constant(String);

impl Constant {
    pub fn new(name: impl Into<String>) -> Self {
        let name = name.into();
        debug_assert!(!name.is_empty(), "constant names are non-empty");
        Constant(name)
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Constant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// A rule or query variable. Lexically distinct from constants.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Variable(String);

impl Variable {
    pub fn new(name: impl Into<String>) -> Self {
        Variable(name.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Variable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// A labeled null: a fresh placeholder object introduced when a rule head
/// demands a value no constant is known for. The label is derived
/// deterministically from the rule instance that created it, so independent
/// evaluations mint identical nulls.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NullId(String);

impl NullId {
    pub fn new(label: impl Into<String>) -> Self {
        NullId(label.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for NullId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "~{}", self.0)
    }
}

/// A term as it appears in rule and query atoms.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Term {
    Const(Constant),
    Var(Variable),
}

impl Term {
    pub fn var(name: impl Into<String>) -> Self {
        Term::Var(Variable::new(name))
    }

    pub fn constant(name: impl Into<String>) -> Self {
        Term::Const(Constant::new(name))
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Const(c) => c.fmt(f),
            Term::Var(v) => v.fmt(f),
        }
    }
}

/// A ground term: a constant or a labeled null.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum GroundTerm {
    Const(Constant),
    Null(NullId),
}

impl GroundTerm {
    pub fn is_constant(&self) -> bool {
        matches!(self, GroundTerm::Const(_))
    }

    pub fn as_constant(&self) -> Option<&Constant> {
        match self {
            GroundTerm::Const(c) => Some(c),
            GroundTerm::Null(_) => None,
        }
    }
}

impl fmt::Display for GroundTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GroundTerm::Const(c) => c.fmt(f),
            GroundTerm::Null(n) => n.fmt(f),
        }
    }
}

impl From<Constant> for GroundTerm {
    fn from(c: Constant) -> Self {
        GroundTerm::Const(c)
    }
}

/// An atom over a node's language; arguments may contain variables.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Atom {
    pub node: NodeId,
    pub predicate: String,
    pub args: Vec<Term>,
}

impl Atom {
    pub fn new(node: NodeId, predicate: impl Into<String>, args: Vec<Term>) -> Self {
        Atom { node, predicate: predicate.into(), args }
    }

    pub fn arity(&self) -> usize {
        self.args.len()
    }

    pub fn variables(&self) -> impl Iterator<Item = &Variable> {
        self.args.iter().filter_map(|t| match t {
            Term::Var(v) => Some(v),
            Term::Const(_) => None,
        })
    }

    pub fn constants(&self) -> impl Iterator<Item = &Constant> {
        self.args.iter().filter_map(|t| match t {
            Term::Const(c) => Some(c),
            Term::Var(_) => None,
        })
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}(", self.node, self.predicate)?;
        for (i, arg) in self.args.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            arg.fmt(f)?;
        }
        f.write_str(")")
    }
}

/// A ground atom: every argument is a constant or a null.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct GroundAtom {
    pub node: NodeId,
    pub predicate: String,
    pub args: Vec<GroundTerm>,
}

impl GroundAtom {
    pub fn new(node: NodeId, predicate: impl Into<String>, args: Vec<GroundTerm>) -> Self {
        GroundAtom { node, predicate: predicate.into(), args }
    }

    pub fn arity(&self) -> usize {
        self.args.len()
    }
}

impl fmt::Display for GroundAtom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}(", self.node, self.predicate)?;
        for (i, arg) in self.args.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            arg.fmt(f)?;
        }
        f.write_str(")")
    }
}

/// A positive ground clause: a disjunction of at least two distinct ground
/// atoms at one node. Construction normalizes order and duplicates.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct GroundClause(Vec<GroundAtom>);

/// Result of normalizing a would-be clause.
pub enum ClauseForm {
    /// A single atom remains: the disjunction collapses to a fact.
    Fact(GroundAtom),
    Clause(GroundClause),
}

impl GroundClause {
    /// Normalizes a disjunction: sorts, deduplicates, and collapses a
    /// singleton to a fact.
    pub fn normalize(atoms: Vec<GroundAtom>) -> ClauseForm {
        let mut set: BTreeSet<GroundAtom> = atoms.into_iter().collect();
        if set.len() == 1 {
            ClauseForm::Fact(set.pop_first().expect("nonempty"))
        } else {
            ClauseForm::Clause(GroundClause(set.into_iter().collect()))
        }
    }

    pub fn atoms(&self) -> &[GroundAtom] {
        &self.0
    }
}

impl fmt::Display for GroundClause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, atom) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(" | ")?;
            }
            atom.fmt(f)?;
        }
        Ok(())
    }
}

/// A definite rule local to one node: `head :- body`, range-restricted.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct DefiniteRule {
    pub head: Atom,
    pub body: Vec<Atom>,
}

impl DefiniteRule {
    pub fn new(head: Atom, body: Vec<Atom>) -> Self {
        DefiniteRule { head, body }
    }

    /// True iff every head variable occurs in the body.
    pub fn is_range_restricted(&self) -> bool {
        let body_vars: BTreeSet<&Variable> = self.body.iter().flat_map(|a| a.variables()).collect();
        self.head.variables().all(|v| body_vars.contains(v))
    }
}

impl fmt::Display for DefiniteRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} :- ", self.head)?;
        for (i, atom) in self.body.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            atom.fmt(f)?;
        }
        Ok(())
    }
}

/// A denial constraint: the listed conjunction of atoms must have no match.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Denial {
    pub body: Vec<Atom>,
}

impl fmt::Display for Denial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(":- ")?;
        for (i, atom) in self.body.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            atom.fmt(f)?;
        }
        Ok(())
    }
}

/// One node's knowledge: facts, definite rules, positive ground clauses,
/// denial constraints, and an optional explicit falsum axiom.
///
/// Facts and clauses grow by plain set union, so a theory assembled from
/// the same knowledge in any order compares equal, and no constant ever
/// disappears from the theory's text. A clause with a disjunct among the
/// facts stays stored; it is simply satisfied wherever the facts hold.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LocalTheory {
    pub node: NodeId,
    pub facts: BTreeSet<GroundAtom>,
    pub rules: Vec<DefiniteRule>,
    pub clauses: BTreeSet<GroundClause>,
    pub denials: Vec<Denial>,
    pub falsum: bool,
}

impl LocalTheory {
    pub fn empty(node: NodeId) -> Self {
        LocalTheory {
            node,
            facts: BTreeSet::new(),
            rules: Vec::new(),
            clauses: BTreeSet::new(),
            denials: Vec::new(),
            falsum: false,
        }
    }

    pub fn insert_fact(&mut self, atom: GroundAtom) -> bool {
        self.facts.insert(atom)
    }

    /// Adds a disjunction, collapsing a singleton to a fact. Returns true
    /// if anything new was recorded.
    pub fn add_disjunction(&mut self, atoms: Vec<GroundAtom>) -> bool {
        match GroundClause::normalize(atoms) {
            ClauseForm::Fact(a) => self.insert_fact(a),
            ClauseForm::Clause(c) => self.clauses.insert(c),
        }
    }
}

/// Stable identifier of a coordination rule.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RuleId(String);

impl RuleId {
    pub fn new(id: impl Into<String>) -> Self {
        RuleId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for RuleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// One source-node conjunct of a coordination rule body.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BodyConjunct {
    pub source: NodeId,
    pub atoms: Vec<Atom>,
}

/// Head of a coordination rule.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum RuleHead {
    /// A conjunction of atoms. Variables absent from the rule body are
    /// existential: each firing introduces fresh labeled nulls for them.
    Conjunctive(Vec<Atom>),
    /// A disjunction of at least two atoms; all variables must be exported
    /// from the body.
    Disjunctive(Vec<Atom>),
}

impl RuleHead {
    pub fn atoms(&self) -> &[Atom] {
        match self {
            RuleHead::Conjunctive(a) | RuleHead::Disjunctive(a) => a,
        }
    }
}

/// Shape of a rule head, which decides which engines accept the rule.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HeadForm {
    /// Conjunction whose variables are all exported from the body.
    Datalog,
    /// Disjunction of atoms over exported variables.
    Positive,
    /// Conjunction with at least one variable seen nowhere in the body.
    Existential,
}

/// A directed rule fetching certain knowledge from source nodes into a
/// target node.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CoordinationRule {
    pub id: RuleId,
    pub body: Vec<BodyConjunct>,
    pub target: NodeId,
    pub head: RuleHead,
}

impl CoordinationRule {
    /// The exported variables of the rule body: those shared between body
    /// and head, plus those shared between two body conjuncts. Every other
    /// body variable is existentially quantified inside its own conjunct.
    pub fn exported_vars(&self) -> BTreeSet<Variable> {
        let head_vars: BTreeSet<Variable> =
            self.head.atoms().iter().flat_map(|a| a.variables().cloned()).collect();
        let mut seen: BTreeMap<Variable, usize> = BTreeMap::new();
        for conjunct in &self.body {
            let vars: BTreeSet<Variable> =
                conjunct.atoms.iter().flat_map(|a| a.variables().cloned()).collect();
            for v in vars {
                *seen.entry(v).or_insert(0) += 1;
            }
        }
        let mut exported: BTreeSet<Variable> = BTreeSet::new();
        for (v, count) in &seen {
            if *count >= 2 || head_vars.contains(v) {
                exported.insert(v.clone());
            }
        }
        exported
    }

    /// The exported variables visible in one body conjunct.
    pub fn conjunct_vars(&self, conjunct: &BodyConjunct) -> Vec<Variable> {
        let exported = self.exported_vars();
        let mut vars: Vec<Variable> = Vec::new();
        for atom in &conjunct.atoms {
            for v in atom.variables() {
                if exported.contains(v) && !vars.contains(v) {
                    vars.push(v.clone());
                }
            }
        }
        vars
    }

    /// Head variables with no occurrence in the body.
    pub fn existential_head_vars(&self) -> BTreeSet<Variable> {
        let body_vars: BTreeSet<Variable> = self
            .body
            .iter()
            .flat_map(|c| c.atoms.iter().flat_map(|a| a.variables().cloned()))
            .collect();
        self.head
            .atoms()
            .iter()
            .flat_map(|a| a.variables().cloned())
            .filter(|v| !body_vars.contains(v))
            .collect()
    }

    pub fn head_form(&self) -> HeadForm {
        match &self.head {
            RuleHead::Disjunctive(_) => HeadForm::Positive,
            RuleHead::Conjunctive(_) => {
                if self.existential_head_vars().is_empty() {
                    HeadForm::Datalog
                } else {
                    HeadForm::Existential
                }
            }
        }
    }
}

impl fmt::Display for CoordinationRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "link[{}] ", self.id)?;
        let mut first = true;
        for conjunct in &self.body {
            for atom in &conjunct.atoms {
                if !first {
                    f.write_str(" & ")?;
                }
                first = false;
                atom.fmt(f)?;
            }
        }
        f.write_str(" => ")?;
        let sep = match self.head {
            RuleHead::Conjunctive(_) => " & ",
            RuleHead::Disjunctive(_) => " | ",
        };
        for (i, atom) in self.head.atoms().iter().enumerate() {
            if i > 0 {
                f.write_str(sep)?;
            }
            atom.fmt(f)?;
        }
        Ok(())
    }
}

/// The whole network: node theories plus coordination rules.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct P2PSystem {
    pub nodes: BTreeMap<NodeId, LocalTheory>,
    pub rules: Vec<CoordinationRule>,
}

/// A query posed at one node: a union of conjunctive queries over that
/// node's language. All formulas are positive.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Query {
    pub node: NodeId,
    /// Answer variables in presentation order. A variable local to one
    /// disjunct is existentially quantified inside it.
    pub answer_vars: Vec<Variable>,
    pub disjuncts: Vec<Vec<Atom>>,
}

impl Query {
    /// A single-conjunct query whose answer variables are all its variables
    /// in order of first occurrence.
    pub fn conjunctive(node: NodeId, atoms: Vec<Atom>) -> Self {
        let mut vars: Vec<Variable> = Vec::new();
        for atom in &atoms {
            for v in atom.variables() {
                if !vars.contains(v) {
                    vars.push(v.clone());
                }
            }
        }
        Query { node, answer_vars: vars, disjuncts: vec![atoms] }
    }

    pub fn arity(&self) -> usize {
        self.answer_vars.len()
    }
}

impl fmt::Display for Query {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: ", self.node)?;
        for (i, disjunct) in self.disjuncts.iter().enumerate() {
            if i > 0 {
                f.write_str(" | ")?;
            }
            for (j, atom) in disjunct.iter().enumerate() {
                if j > 0 {
                    f.write_str(" & ")?;
                }
                // Queries are node-local; print without the node prefix.
                write!(f, "{}(", atom.predicate)?;
                for (k, arg) in atom.args.iter().enumerate() {
                    if k > 0 {
                        f.write_str(",")?;
                    }
                    arg.fmt(f)?;
                }
                f.write_str(")")?;
            }
        }
        Ok(())
    }
}

/// One well-formedness violation: which element breaks which invariant.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    pub element: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.element, self.message)
    }
}

/// The node-to-node dependency graph induced by the coordination rules.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DependencyGraph {
    /// Edge source -> target for every rule conjunct.
    pub edges: BTreeSet<(NodeId, NodeId)>,
    pub acyclic: bool,
}

impl P2PSystem {
    /// Checks every structural invariant and reports each breach. An empty
    /// report means the system is well-formed.
    pub fn validate(&self) -> Vec<Violation> {
        let mut violations = Vec::new();
        let mut arities: BTreeMap<(NodeId, String), (usize, String)> = BTreeMap::new();
        let mut check_arity =
            |violations: &mut Vec<Violation>, node: &NodeId, pred: &str, arity: usize, at: String| {
                match arities.entry((node.clone(), pred.to_string())) {
                    std::collections::btree_map::Entry::Vacant(e) => {
                        e.insert((arity, at));
                    }
                    std::collections::btree_map::Entry::Occupied(e) => {
                        let (declared, first) = e.get();
                        if *declared != arity {
                            violations.push(Violation {
                                element: at,
                                message: format!(
                                    "predicate {}:{} used with arity {} but declared with arity {} at {}",
                                    node, pred, arity, declared, first
                                ),
                            });
                        }
                    }
                }
            };

        for (id, theory) in &self.nodes {
            let name = format!("node {}", id);
            if theory.node != *id {
                violations.push(Violation {
                    element: name.clone(),
                    message: format!("theory is labeled {} but stored under {}", theory.node, id),
                });
            }
            for fact in &theory.facts {
                check_arity(&mut violations, &fact.node, &fact.predicate, fact.arity(), format!("{} fact {}", name, fact));
                if fact.node != *id {
                    violations.push(Violation {
                        element: format!("{} fact {}", name, fact),
                        message: "fact belongs to a different node's language".into(),
                    });
                }
            }
            for rule in &theory.rules {
                let at = format!("{} rule {}", name, rule);
                for atom in std::iter::once(&rule.head).chain(rule.body.iter()) {
                    check_arity(&mut violations, &atom.node, &atom.predicate, atom.arity(), at.clone());
                    if atom.node != *id {
                        violations.push(Violation {
                            element: at.clone(),
                            message: format!("atom {} belongs to a different node's language", atom),
                        });
                    }
                }
                if !rule.is_range_restricted() {
                    violations.push(Violation {
                        element: at,
                        message: "rule is not range-restricted: a head variable is missing from the body".into(),
                    });
                }
            }
            for clause in &theory.clauses {
                let at = format!("{} clause {}", name, clause);
                for atom in clause.atoms() {
                    check_arity(&mut violations, &atom.node, &atom.predicate, atom.arity(), at.clone());
                    if atom.node != *id {
                        violations.push(Violation {
                            element: at.clone(),
                            message: format!("atom {} belongs to a different node's language", atom),
                        });
                    }
                }
            }
            for denial in &theory.denials {
                let at = format!("{} denial {}", name, denial);
                for atom in &denial.body {
                    check_arity(&mut violations, &atom.node, &atom.predicate, atom.arity(), at.clone());
                    if atom.node != *id {
                        violations.push(Violation {
                            element: at.clone(),
                            message: format!("atom {} belongs to a different node's language", atom),
                        });
                    }
                }
            }
        }

        let mut seen_rule_ids: BTreeSet<&RuleId> = BTreeSet::new();
        for rule in &self.rules {
            let name = format!("link {}", rule.id);
            if !seen_rule_ids.insert(&rule.id) {
                violations.push(Violation {
                    element: name.clone(),
                    message: "duplicate rule id".into(),
                });
            }
            let mut indices: Vec<&NodeId> = rule.body.iter().map(|c| &c.source).collect();
            indices.push(&rule.target);
            for (i, a) in indices.iter().enumerate() {
                for b in indices.iter().skip(i + 1) {
                    if a == b {
                        violations.push(Violation {
                            element: name.clone(),
                            message: format!("source and target indices must be pairwise distinct ({} repeats)", a),
                        });
                    }
                }
            }
            for node in &indices {
                if !self.nodes.contains_key(*node) {
                    violations.push(Violation {
                        element: name.clone(),
                        message: format!("references unknown node {}", node),
                    });
                }
            }
            if rule.body.is_empty() {
                violations.push(Violation {
                    element: name.clone(),
                    message: "rule body has no conjuncts".into(),
                });
            }
            for conjunct in &rule.body {
                for atom in &conjunct.atoms {
                    check_arity(&mut violations, &atom.node, &atom.predicate, atom.arity(), name.clone());
                    if atom.node != conjunct.source {
                        violations.push(Violation {
                            element: name.clone(),
                            message: format!(
                                "body atom {} is not in the language of source node {}",
                                atom, conjunct.source
                            ),
                        });
                    }
                }
                if conjunct.atoms.is_empty() {
                    violations.push(Violation {
                        element: name.clone(),
                        message: format!("conjunct for source {} has no atoms", conjunct.source),
                    });
                }
            }
            for atom in rule.head.atoms() {
                check_arity(&mut violations, &atom.node, &atom.predicate, atom.arity(), name.clone());
                if atom.node != rule.target {
                    violations.push(Violation {
                        element: name.clone(),
                        message: format!("head atom {} is not in the language of target node {}", atom, rule.target),
                    });
                }
            }
            if rule.head.atoms().is_empty() {
                violations.push(Violation {
                    element: name.clone(),
                    message: "rule head has no atoms".into(),
                });
            }
            if matches!(rule.head, RuleHead::Disjunctive(_)) {
                if rule.head.atoms().len() < 2 {
                    violations.push(Violation {
                        element: name.clone(),
                        message: "disjunctive head needs at least two alternatives".into(),
                    });
                }
                if !rule.existential_head_vars().is_empty() {
                    violations.push(Violation {
                        element: name.clone(),
                        message: "disjunctive head may only use variables exported from the body".into(),
                    });
                }
            }
        }

        violations
    }

    /// The node dependency graph: one edge per (source, target) pair of a
    /// rule, plus a cycle check.
    pub fn dependency_graph(&self) -> DependencyGraph {
        let mut edges: BTreeSet<(NodeId, NodeId)> = BTreeSet::new();
        for rule in &self.rules {
            for conjunct in &rule.body {
                edges.insert((conjunct.source.clone(), rule.target.clone()));
            }
        }
        let acyclic = is_acyclic(self.nodes.keys(), &edges);
        DependencyGraph { edges, acyclic }
    }

    /// All constants mentioned anywhere in the system.
    pub fn active_domain(&self) -> BTreeSet<Constant> {
        let mut domain = BTreeSet::new();
        let add_atom = |domain: &mut BTreeSet<Constant>, atom: &Atom| {
            for c in atom.constants() {
                domain.insert(c.clone());
            }
        };
        for theory in self.nodes.values() {
            for fact in &theory.facts {
                for term in &fact.args {
                    if let GroundTerm::Const(c) = term {
                        domain.insert(c.clone());
                    }
                }
            }
            for rule in &theory.rules {
                add_atom(&mut domain, &rule.head);
                for atom in &rule.body {
                    add_atom(&mut domain, atom);
                }
            }
            for clause in &theory.clauses {
                for atom in clause.atoms() {
                    for term in &atom.args {
                        if let GroundTerm::Const(c) = term {
                            domain.insert(c.clone());
                        }
                    }
                }
            }
            for denial in &theory.denials {
                for atom in &denial.body {
                    add_atom(&mut domain, atom);
                }
            }
        }
        for rule in &self.rules {
            for conjunct in &rule.body {
                for atom in &conjunct.atoms {
                    add_atom(&mut domain, atom);
                }
            }
            for atom in rule.head.atoms() {
                add_atom(&mut domain, atom);
            }
        }
        domain
    }

    /// The predicates (with arity) of one node's language, as used anywhere
    /// in the system.
    pub fn node_signature(&self, node: &NodeId) -> BTreeSet<(String, usize)> {
        let mut sig = BTreeSet::new();
        if let Some(theory) = self.nodes.get(node) {
            for fact in &theory.facts {
                sig.insert((fact.predicate.clone(), fact.arity()));
            }
            for rule in &theory.rules {
                sig.insert((rule.head.predicate.clone(), rule.head.arity()));
                for atom in &rule.body {
                    sig.insert((atom.predicate.clone(), atom.arity()));
                }
            }
            for clause in &theory.clauses {
                for atom in clause.atoms() {
                    sig.insert((atom.predicate.clone(), atom.arity()));
                }
            }
            for denial in &theory.denials {
                for atom in &denial.body {
                    sig.insert((atom.predicate.clone(), atom.arity()));
                }
            }
        }
        for rule in &self.rules {
            for conjunct in &rule.body {
                if conjunct.source == *node {
                    for atom in &conjunct.atoms {
                        sig.insert((atom.predicate.clone(), atom.arity()));
                    }
                }
            }
            if rule.target == *node {
                for atom in rule.head.atoms() {
                    sig.insert((atom.predicate.clone(), atom.arity()));
                }
            }
        }
        sig
    }
}

/// Cycle check by iterated removal of sourceless nodes.
fn is_acyclic<'a>(
    nodes: impl Iterator<Item = &'a NodeId>,
    edges: &BTreeSet<(NodeId, NodeId)>,
) -> bool {
    let mut indegree: BTreeMap<&NodeId, usize> = nodes.map(|n| (n, 0)).collect();
    for (_, to) in edges {
        if let Some(d) = indegree.get_mut(to) {
            *d += 1;
        }
    }
    let mut queue: Vec<&NodeId> =
        indegree.iter().filter(|(_, d)| **d == 0).map(|(n, _)| *n).collect();
    let mut removed = 0usize;
    let total = indegree.len();
    while let Some(node) = queue.pop() {
        removed += 1;
        for (from, to) in edges {
            if from == node {
                if let Some(d) = indegree.get_mut(to) {
                    *d -= 1;
                    if *d == 0 {
                        queue.push(to);
                    }
                }
            }
        }
    }
    removed == total
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parse;

    fn citizen_system() -> P2PSystem {
        parse::parse_network(include_str!("../examples/citizen.p2p")).expect("parses")
    }

    #[test]
    fn citizen_system_is_well_formed() {
        assert!(citizen_system().validate().is_empty());
    }

    #[test]
    fn empty_system_is_well_formed() {
        assert!(P2PSystem::default().validate().is_empty());
    }

    #[test]
    fn head_node_equal_to_body_node_is_a_violation() {
        let mut system = P2PSystem::default();
        let n1 = NodeId::new("1");
        system.nodes.insert(n1.clone(), LocalTheory::empty(n1.clone()));
        system.rules.push(CoordinationRule {
            id: RuleId::new("r1"),
            body: vec![BodyConjunct {
                source: n1.clone(),
                atoms: vec![Atom::new(n1.clone(), "P", vec![Term::var("x")])],
            }],
            target: n1.clone(),
            head: RuleHead::Conjunctive(vec![Atom::new(n1.clone(), "Q", vec![Term::var("x")])]),
        });
        let report = system.validate();
        assert_eq!(report.len(), 1);
        assert!(report[0].message.contains("pairwise distinct"));
    }

    #[test]
    fn citizen_dependency_graph() {
        let graph = citizen_system().dependency_graph();
        let expect: BTreeSet<(NodeId, NodeId)> = [
            (NodeId::new("1"), NodeId::new("2")),
            (NodeId::new("2"), NodeId::new("3")),
        ]
        .into_iter()
        .collect();
        assert_eq!(graph.edges, expect);
        assert!(graph.acyclic);
    }

    #[test]
    fn two_cycle_is_detected() {
        let text = "node 1 { }\nnode 2 { }\nlink 1:P(x) => 2:P(x).\nlink 2:P(x) => 1:P(x).\n";
        let system = parse::parse_network(text).expect("parses");
        assert!(!system.dependency_graph().acyclic);
    }

    #[test]
    fn single_node_graph_is_trivially_acyclic() {
        let text = "node 1 { }\n";
        let system = parse::parse_network(text).expect("parses");
        let graph = system.dependency_graph();
        assert!(graph.edges.is_empty());
        assert!(graph.acyclic);
    }

    #[test]
    fn active_domain_collects_fact_constants() {
        let system =
            parse::parse_network("node 1 { fact P(\"a\"). }\nnode 2 { }\nlink 1:P(x) => 2:Q(x).\n")
                .expect("parses");
        let domain = system.active_domain();
        assert_eq!(domain, [Constant::new("a")].into_iter().collect());
    }

    #[test]
    fn active_domain_of_constant_free_system_is_empty() {
        let system = parse::parse_network("node 1 { }\nnode 2 { }\nlink 1:P(x) => 2:Q(x).\n")
            .expect("parses");
        assert!(system.active_domain().is_empty());
    }

    #[test]
    fn active_domain_unions_across_nodes() {
        let text = "node 1 { fact P(\"a\"). }\nnode 2 { fact Q(\"b\"). }\nnode 3 { fact R(\"c\"). }\n";
        let system = parse::parse_network(text).expect("parses");
        let domain = system.active_domain();
        let names: Vec<&str> = domain.iter().map(|c| c.as_str()).collect();
        assert_eq!(names, vec!["a", "b", "c"]);
    }

    #[test]
    fn exported_vars_cover_head_and_shared_vars() {
        let text = "node 1 { }\nnode 2 { }\nnode 3 { }\n\
                    link 1:P(x,y) & 2:Q(y,z) => 3:R(x).\n";
        let system = parse::parse_network(text).expect("parses");
        let rule = &system.rules[0];
        let exported = rule.exported_vars();
        // x reaches the head, y joins two conjuncts, z stays local.
        assert!(exported.contains(&Variable::new("x")));
        assert!(exported.contains(&Variable::new("y")));
        assert!(!exported.contains(&Variable::new("z")));
    }

    #[test]
    fn head_forms_are_classified() {
        let text = "node 1 { }\nnode 2 { }\n\
                    link 1:P(x) => 2:Q(x).\n\
                    link 1:P(x) => 2:Q(x) | 2:R(x).\n\
                    link 1:P(x) => 2:S(x,z).\n";
        let system = parse::parse_network(text).expect("parses");
        assert_eq!(system.rules[0].head_form(), HeadForm::Datalog);
        assert_eq!(system.rules[1].head_form(), HeadForm::Positive);
        assert_eq!(system.rules[2].head_form(), HeadForm::Existential);
    }
}
