//! Command-line front end: parse network files, answer queries with any
//! engine, cross-check against the oracle, simulate, and benchmark.
//!
//! Exit codes: 0 success, 1 usage or parse failure, 2 engine fragment
//! rejection, 3 oracle/engine disagreement.

use std::collections::BTreeSet;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand, ValueEnum};

use peerlog_core::acyclic::{self, Shape};
use peerlog_core::model::{Constant, P2PSystem, Query};
use peerlog_core::oracle::{self, OracleMode};
use peerlog_core::{compiler, distsim, fixpoint, EngineError};

#[derive(Parser)]
#[command(name = "peerlog", version, about = "Certain-answer queries over peer-to-peer deductive databases")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate a network file; exits 0 iff the report is clean.
    Check { file: String },
    /// Compute certain answers, one tuple per line, sorted.
    Answer {
        file: String,
        /// Query, e.g. "3: Citizen-3(x)" or "2: Male-2(x) | Female-2(x)".
        #[arg(short, long)]
        query: String,
        #[arg(long, value_enum, default_value_t = Engine::Fixpoint)]
        engine: Engine,
    },
    /// Answer by brute-force enumeration and cross-check the fixpoint
    /// engine; exits 3 on disagreement.
    Oracle {
        file: String,
        #[arg(short, long)]
        query: String,
        #[arg(long, value_enum, default_value_t = Mode::Extended)]
        mode: Mode,
        /// Fresh constants added to the enumeration domain.
        #[arg(long, default_value_t = 0)]
        extra_domain: usize,
    },
    /// Run the message-passing simulation to quiescence.
    Simulate {
        file: String,
        /// Asynchronous delivery with this seed (default: synchronous rounds).
        #[arg(long, conflicts_with = "sync")]
        seed: Option<u64>,
        /// Synchronous rounds (the default).
        #[arg(long)]
        sync: bool,
        /// Also answer this query over the final state.
        #[arg(short, long)]
        query: Option<String>,
    },
    /// Measure generated networks; CSV on standard output.
    Bench {
        #[arg(long, value_enum)]
        shape: BenchShape,
        /// Comma-separated node counts, e.g. 10,20,40.
        #[arg(long, value_delimiter = ',')]
        nodes: Vec<usize>,
        /// Facts seeded at the source node.
        #[arg(long, default_value_t = 8)]
        facts: usize,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Engine {
    Fixpoint,
    Global,
    Distributed,
    Acyclic,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Local,
    Extended,
}

#[derive(Clone, Copy, ValueEnum)]
enum BenchShape {
    Chain,
    Tree,
    #[value(name = "random-dag")]
    RandomDag,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(failure) => {
            eprintln!("error: {}", failure.message);
            ExitCode::from(failure.code)
        }
    }
}

struct Failure {
    code: u8,
    message: String,
}

impl From<peerlog_core::ParseError> for Failure {
    fn from(e: peerlog_core::ParseError) -> Self {
        Failure { code: 1, message: e.to_string() }
    }
}

impl From<EngineError> for Failure {
    fn from(e: EngineError) -> Self {
        let code = match &e {
            EngineError::UnknownQueryNode(_) | EngineError::QueryArityMismatch { .. } => 1,
            _ => 2,
        };
        Failure { code, message: e.to_string() }
    }
}

fn load(file: &str) -> Result<P2PSystem, Failure> {
    let text = std::fs::read_to_string(file)
        .map_err(|e| Failure { code: 1, message: format!("{}: {}", file, e) })?;
    Ok(peerlog_core::parse_network(&text)?)
}

fn parse_query(text: &str) -> Result<Query, Failure> {
    Ok(peerlog_core::parse_query(text)?)
}

fn print_tuples(tuples: &BTreeSet<Vec<Constant>>) {
    for tuple in tuples {
        if tuple.is_empty() {
            println!("()");
        } else {
            let fields: Vec<&str> = tuple.iter().map(|c| c.as_str()).collect();
            println!("{}", fields.join(","));
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode, Failure> {
    match cli.command {
        Command::Check { file } => {
            let system = load(&file)?;
            let report = system.validate();
            for violation in &report {
                println!("{}", violation);
            }
            Ok(if report.is_empty() { ExitCode::SUCCESS } else { ExitCode::from(1) })
        }
        Command::Answer { file, query, engine } => {
            let system = load(&file)?;
            let query = parse_query(&query)?;
            let answers = match engine {
                Engine::Fixpoint => fixpoint::answer(&system, &query)?,
                Engine::Global => compiler::answer_via_global(&system, &query)?,
                Engine::Distributed => {
                    let outcome =
                        distsim::run_simulation(&system, &distsim::Schedule::synchronous())?;
                    outcome.answer(&query)?
                }
                Engine::Acyclic => acyclic::answer_acyclic(&system, &query)?,
            };
            print_tuples(&answers);
            Ok(ExitCode::SUCCESS)
        }
        Command::Oracle { file, query, mode, extra_domain } => {
            let system = load(&file)?;
            let query = parse_query(&query)?;
            let mode = match mode {
                Mode::Local => OracleMode::Local,
                Mode::Extended => OracleMode::Extended,
            };
            let state = oracle::run(&system, mode, extra_domain)?;
            let answer = oracle::certain_answer(&state, &query)?;
            print_tuples(&answer.tuples);
            if answer.all {
                println!("ALL");
            }
            // Compare on the system's own constants: fresh probe constants
            // never appear in engine answers.
            let base = system.active_domain();
            let restricted: BTreeSet<Vec<Constant>> = answer
                .tuples
                .iter()
                .filter(|t| t.iter().all(|c| base.contains(c)))
                .cloned()
                .collect();
            let engine_answers = fixpoint::answer(&system, &query)?;
            if restricted == engine_answers {
                println!("AGREE");
                Ok(ExitCode::SUCCESS)
            } else {
                println!("DISAGREE");
                Ok(ExitCode::from(3))
            }
        }
        Command::Simulate { file, seed, sync: _, query } => {
            let system = load(&file)?;
            let schedule = match seed {
                Some(seed) => distsim::Schedule::seeded(seed),
                None => distsim::Schedule::synchronous(),
            };
            let outcome = distsim::run_simulation(&system, &schedule)?;
            if let Some(query) = query {
                let query = parse_query(&query)?;
                print_tuples(&outcome.answer(&query)?);
            }
            for (id, status) in &outcome.statuses {
                let theory = &outcome.theories[id];
                let verdict = if status.is_inconsistent() { "inconsistent" } else { "consistent" };
                println!(
                    "node {}: {} facts={} clauses={}",
                    id,
                    verdict,
                    theory.facts.len(),
                    theory.clauses.len()
                );
            }
            print!("{}", distsim::stats_text(&outcome.stats));
            Ok(ExitCode::SUCCESS)
        }
        Command::Bench { shape, nodes, facts } => {
            let shape = match shape {
                BenchShape::Chain => Shape::Chain,
                BenchShape::Tree => Shape::Tree,
                BenchShape::RandomDag => Shape::RandomDag,
            };
            let rows = acyclic::complexity_probe(shape, &nodes, facts)?;
            print!("{}", acyclic::probe_csv(&rows));
            Ok(ExitCode::SUCCESS)
        }
    }
}
