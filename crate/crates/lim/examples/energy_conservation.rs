//! Exact energy conservation on a polynomial potential.
//!
//! The quartic-potential problem `ex1` is integrated with LIM(2s, s) for
//! s = 2, 3 and with the Boris baseline at the same step size. Because
//! deg U = 4 = 2k/s, the line-integral methods conserve H up to round-off,
//! while Boris drifts.
//!
//! Run with:
//!   cargo run --release --example energy_conservation

use lim::{boris_integrate, builtin_problem, integrate_lim, SolverConfig};

fn main() {
    let prob = builtin_problem("ex1").unwrap();
    let state0 = prob.initial_state();
    let h = 0.01;
    let n_steps = 10_000;
    let cfg = SolverConfig::default();

    println!(
        "ex1, h = {h}, {n_steps} steps (T = {}), H0 = {:.6}\n",
        h * n_steps as f64,
        prob.hamiltonian(&state0)
    );
    println!(
        "{:<10} {:>12} {:>14} {:>10}",
        "method", "max|dH|", "iters/step", "wall"
    );

    for s in [2usize, 3] {
        let run = integrate_lim(2 * s, s, &prob, &state0, h, n_steps, &cfg, n_steps).unwrap();
        println!(
            "{:<10} {:>12.3e} {:>14.1} {:>10.1?}",
            format!("LIM({},{s})", 2 * s),
            run.summary.max_h_err,
            run.summary.total_iterations as f64 / n_steps as f64,
            run.summary.wall_time
        );
    }

    let boris = boris_integrate(&prob, &state0, h, n_steps, n_steps).unwrap();
    println!(
        "{:<10} {:>12.3e} {:>14} {:>10.1?}",
        "Boris", boris.summary.max_h_err, "-", boris.summary.wall_time
    );
}
