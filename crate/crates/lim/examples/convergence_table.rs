//! Convergence-order study on `ex2` over [0, 25]: maximum trajectory and
//! energy errors for Boris, LIM(4,2) and LIM(6,3) at h = 0.05/n.
//!
//! Boris converges at order 2, LIM(2s, s) at order 2s with Hamiltonian
//! errors at round-off throughout. The reference trajectory is generated
//! internally by LIM(12,6) at an eighth of the finest step and
//! cross-checked against a halved step.
//!
//! Run with:
//!   cargo run --release --example convergence_table [max_n]

use lim::experiments::{cmd_converge, ConvergeSpec};

fn main() {
    let max_n: usize = std::env::args()
        .nth(1)
        .map(|a| a.parse().expect("max_n"))
        .unwrap_or(16);
    let mut n_list = Vec::new();
    let mut n = 1;
    while n <= max_n {
        n_list.push(n);
        n *= 2;
    }

    let spec = ConvergeSpec {
        n_list,
        ..ConvergeSpec::new("ex2", 0.05, 25.0)
    };
    match cmd_converge(&spec) {
        Ok(table) => table.print_console(),
        Err(e) => {
            eprintln!("convergence study failed: {e}");
            std::process::exit(2);
        }
    }
}
