//! Engine errors. Every engine refuses inputs outside its fragment with a
//! named reason instead of producing a wrong answer.

use crate::model::{NodeId, RuleId};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EngineError {
    #[error("node {node} holds {clauses} ground clauses, beyond the branching cap of {cap}")]
    BranchingCapExceeded { node: NodeId, clauses: usize, cap: usize },

    #[error("node {node} has {atoms} ground atoms over the domain, beyond the enumeration cap of {cap}")]
    UniverseTooLarge { node: NodeId, atoms: usize, cap: usize },

    #[error("system fails validation: {0}")]
    InvalidSystem(String),

    #[error("not a Datalog-p2p system: {0}")]
    FragmentViolation(String),

    #[error("rule {rule} has an existential head, which needs an acyclic dependency graph")]
    ExistentialOnCyclic { rule: RuleId },

    #[error("the dependency graph has a cycle; this engine needs an acyclic system")]
    CyclicSystem,

    #[error("query refers to unknown node {0}")]
    UnknownQueryNode(NodeId),

    #[error("query uses predicate {node}:{predicate} with arity {arity}, but it has arity {declared}")]
    QueryArityMismatch { node: NodeId, predicate: String, arity: usize, declared: usize },

    #[error("simulation exceeded the cap of {cap} messages")]
    MessageCapExceeded { cap: usize },
}
