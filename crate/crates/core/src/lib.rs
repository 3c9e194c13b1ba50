//! A peer-to-peer deductive database engine.
//!
//! A network is a set of autonomous nodes, each holding its own theory
//! (facts, definite rules, positive ground clauses, denial constraints),
//! connected by directed coordination rules. A rule fires only on knowledge
//! that is *certain* at its source nodes, true in every model there, so
//! disjunctive knowledge does not leak through rules, and an inconsistent
//! node floods only the views that depend on it instead of poisoning the
//! whole network.
//!
//! Query answering is offered by four engines plus a brute-force oracle:
//!
//! * [`fixpoint`]: iterated rule firing over per-node minimal-model sets;
//!   the reference engine, handles every supported head form.
//! * [`compiler`]: compiles Datalog-only networks into a single Datalog
//!   program and evaluates it semi-naively.
//! * [`distsim`]: a message-passing simulation in which each node runs
//!   autonomously; deterministic under seeded asynchronous schedules.
//! * [`acyclic`]: one topological pass over acyclic networks, populating
//!   the head views of incoming rules before answering.
//! * [`oracle`]: explicit enumeration of interpretation sets on tiny
//!   instances; the definition-level ground truth the engines are tested
//!   against.

pub mod acyclic;
pub mod compiler;
pub mod distsim;
pub mod error;
pub mod eval;
pub mod fixpoint;
pub mod generate;
pub mod model;
pub mod nodekb;
pub mod oracle;
pub mod parse;

pub use error::EngineError;
pub use model::{P2PSystem, Query};
pub use parse::{parse_network, parse_query, serialize_network, ParseError};
