//! Time-reversal check: one step forward, one step backward with −h,
//! from randomized states near each built-in problem's initial state.
//! Both the LIM family and the Boris baseline are symmetric maps, so the
//! round trip recovers the starting state to solver tolerance.
//!
//! Run with:
//!   cargo run --example symmetry_roundtrip [seed]

use lim::experiments::{cmd_symmetry, MethodSpec, SymmetrySpec};
use lim::SolverConfig;

fn main() {
    let seed: u64 = std::env::args()
        .nth(1)
        .map(|a| a.parse().expect("seed"))
        .unwrap_or(42);

    let mut all_pass = true;
    for problem in ["ex1", "ex2", "ex3"] {
        let h = match problem {
            "ex1" => 0.01,
            "ex2" => 0.05,
            _ => std::f64::consts::PI / 10.0,
        };
        println!("{problem} (h = {h}):");
        for method in [
            MethodSpec::Boris,
            MethodSpec::Lim { s: 2, k: 4 },
            MethodSpec::Lim { s: 3, k: 6 },
        ] {
            let report = cmd_symmetry(&SymmetrySpec {
                problem: problem.into(),
                method,
                h,
                trials: 20,
                seed,
                solver: SolverConfig::default(),
            })
            .unwrap();
            print!("  ");
            report.print_console();
            all_pass &= report.pass;
        }
    }
    std::process::exit(if all_pass { 0 } else { 2 });
}
