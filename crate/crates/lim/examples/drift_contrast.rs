//! Long-time energy drift of the Boris method against the flat energy
//! error of LIM(4,2) on the same run.
//!
//! The Boris energy error on `ex1` is the sum of an O(h²) oscillation and a
//! linear O(t h²) drift; the drift only dominates clearly on horizons of
//! 10⁴ time units and more, which is what `--full` shows.
//!
//! Run with:
//!   cargo run --release --example drift_contrast [--full]

use lim::experiments::{cmd_drift, DriftSpec, MethodSpec};
use lim::SolverConfig;

fn main() {
    let full = std::env::args().any(|a| a == "--full");
    let t_final = if full { 30_000.0 } else { 1000.0 };
    let cfg = SolverConfig::default();

    println!("ex1, t in [0, {t_final}]\n");
    for (label, method, h, window) in [
        ("Boris  h", MethodSpec::Boris, 0.01, 100usize),
        ("Boris  h/2", MethodSpec::Boris, 0.005, 200),
        ("LIM(4,2)", MethodSpec::Lim { s: 2, k: 4 }, 0.01, 100),
    ] {
        let series = cmd_drift(&DriftSpec {
            problem: "ex1".into(),
            method,
            h,
            t_final,
            window,
            solver: cfg,
        })
        .unwrap();
        let last = series.rows.last().unwrap();
        let at10 = series.value_at(10.0);
        let secant = (last.1 - at10) / (last.0 - 10.0);
        println!(
            "{label:<11} |dH(10)| = {:.3e}   |dH(end)| = {:.3e}   drift/t = {:.3e}",
            at10.abs(),
            last.1.abs(),
            secant
        );
    }
    println!(
        "\nHalving h divides the Boris drift rate by ~4; the LIM drift rate is\n\
         indistinguishable from zero. Re-run with --full for the 3e4 horizon\n\
         where the drift dominates the oscillation by two orders of magnitude."
    );
}
