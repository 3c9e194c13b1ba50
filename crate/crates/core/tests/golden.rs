//! Frozen text exports: the compiled-program rendering, the fixpoint trace,
//! and the canonical serialization of the shipped examples.

use peerlog_core::{compiler, fixpoint, parse};

#[test]
fn compiled_program_text_is_stable() {
    let text = "node 1 { fact E(a,b). fact E(b,c). }\n\
                node 2 { rule R(x,y) :- C(x,y). rule R(x,z) :- R(x,y), R(y,z). }\n\
                link 1:E(x,y) => 2:C(x,y).\n";
    let system = parse::parse_network(text).expect("parses");
    let program = compiler::compile_global_program(&system).expect("compiles");
    assert_eq!(
        compiler::program_text(&program),
        "n1.E(a,b).\n\
         n1.E(b,c).\n\
         n2.C(x,y) :- n1.E(x,y).\n\
         n2.R(x,y) :- n2.C(x,y).\n\
         n2.R(x,z) :- n2.R(x,y), n2.R(y,z).\n"
    );
}

#[test]
fn example1_trace_is_stable() {
    let system = parse::parse_network(include_str!("../examples/example1.p2p")).expect("parses");
    let state = fixpoint::saturate(&system).expect("runs");
    // The flooded fact fires in iteration 1 and persists into the final,
    // quiescent iteration.
    assert_eq!(
        state.trace_text(),
        "iter=1 rule=r1 head=2:Q(a)\n\
         iter=2 rule=r1 head=2:Q(a)\n"
    );
}

#[test]
fn citizen_serialization_is_stable() {
    let system = parse::parse_network(include_str!("../examples/citizen.p2p")).expect("parses");
    assert_eq!(
        parse::serialize_network(&system),
        "node 1 {\n\
        \x20 fact Citizen-1(ann).\n\
        \x20 fact Citizen-1(bob).\n\
         }\n\
         node 2 {\n\
         }\n\
         node 3 {\n\
         }\n\
         link 1:Citizen-1(x) => 2:Male-2(x) | 2:Female-2(x).\n\
         link 2:Male-2(x) => 3:Citizen-3(x).\n\
         link 2:Female-2(x) => 3:Citizen-3(x).\n"
    );
}
