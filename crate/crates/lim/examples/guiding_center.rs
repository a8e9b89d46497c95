//! Planar guiding-center dynamics over a long horizon: trajectory,
//! Hamiltonian and angular-momentum errors of LIM(2s, s) for s = 2..5 and
//! of the Boris baseline, at the coarse step h = π/10 over [0, 10³π].
//!
//! All line-integral methods conserve H to round-off at nearly identical
//! cost, while the trajectory and angular-momentum errors drop by orders
//! of magnitude with each increase of s.
//!
//! Run with:
//!   cargo run --release --example guiding_center

use lim::experiments::{generate_reference, REFERENCE_K, REFERENCE_S};
use lim::harness::steps_for;
use lim::{boris_integrate, builtin_problem, integrate_lim, Run, SolverConfig};

fn main() {
    let pi = std::f64::consts::PI;
    let h = pi / 10.0;
    let t_final = 1000.0 * pi;
    let prob = builtin_problem("ex3").unwrap();
    let state0 = prob.initial_state();
    let n_steps = steps_for(t_final, h).unwrap();
    let cfg = SolverConfig::default();

    eprintln!("generating the reference trajectory...");
    let reference =
        generate_reference(&prob, &state0, t_final, h, REFERENCE_K, REFERENCE_S, &cfg).unwrap();

    let trajectory_error = |run: &Run| {
        run.records
            .iter()
            .zip(&reference)
            .map(|(rec, exact)| {
                rec.q
                    .iter()
                    .zip(exact.q.iter())
                    .chain(rec.p.iter().zip(exact.p.iter()))
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max)
    };

    println!(
        "ex3, h = pi/10, {n_steps} steps over [0, 1000*pi]\n\n{:<10} {:>12} {:>12} {:>12} {:>10}",
        "method", "e_y", "e_H", "e_M", "wall"
    );
    for s in 2..=5usize {
        let run = integrate_lim(2 * s, s, &prob, &state0, h, n_steps, &cfg, 1).unwrap();
        println!(
            "{:<10} {:>12.4e} {:>12.4e} {:>12.4e} {:>10.1?}",
            format!("LIM({},{s})", 2 * s),
            trajectory_error(&run),
            run.summary.max_h_err,
            run.summary.max_invariant_errs[0],
            run.summary.wall_time
        );
    }
    let boris = boris_integrate(&prob, &state0, h, n_steps, 1).unwrap();
    println!(
        "{:<10} {:>12.4e} {:>12.4e} {:>12.4e} {:>10.1?}",
        "Boris",
        trajectory_error(&boris),
        boris.summary.max_h_err,
        boris.summary.max_invariant_errs[0],
        boris.summary.wall_time
    );
}
