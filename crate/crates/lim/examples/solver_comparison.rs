//! The three stage solvers side by side: plain fixed point and the two
//! blended simplified-Newton iterations. All converge to the same stage
//! vector; they differ in iteration count and in the m×m matrix they
//! factor. With a uniform magnetic field the magnetic preconditioner is
//! factored once for the whole run.
//!
//! Run with:
//!   cargo run --release --example solver_comparison

use nalgebra::DVector;

use lim::{builtin_problem, integrate, Problem, SolverConfig, SolverKind, Tableau};

fn report(prob: &Problem, k: usize, s: usize, h: f64, n_steps: usize, cfg: SolverConfig) {
    let tab = Tableau::get(k, s).unwrap();
    let label = match (cfg.kind, cfg.constant_b) {
        (SolverKind::FixedPoint, false) => "fixed-point",
        (SolverKind::FixedPoint, true) => "fixed-point (constant B)",
        (SolverKind::BlendedMagnetic, false) => "blended-magnetic",
        (SolverKind::BlendedMagnetic, true) => "blended-magnetic (constant B)",
        (SolverKind::BlendedElectric, _) => "blended-electric",
    };
    match integrate(&tab, prob, &prob.initial_state(), h, n_steps, &cfg, n_steps) {
        Ok(run) => println!(
            "  {label:<30} iters/step = {:>5.2}   max|dH| = {:.2e}   wall = {:.1?}",
            run.summary.total_iterations as f64 / n_steps as f64,
            run.summary.max_h_err,
            run.summary.wall_time
        ),
        Err(e) => println!("  {label:<30} failed: {e}"),
    }
}

fn main() {
    let pi = std::f64::consts::PI;

    println!("ex3 (strong magnetic field), LIM(6,3), h = pi/10, 1000 steps:");
    let ex3 = builtin_problem("ex3").unwrap();
    for kind in [
        SolverKind::FixedPoint,
        SolverKind::BlendedMagnetic,
        SolverKind::BlendedElectric,
    ] {
        report(
            &ex3,
            6,
            3,
            pi / 10.0,
            1000,
            SolverConfig {
                kind,
                ..SolverConfig::default()
            },
        );
    }

    println!("\nex2 (electric field dominates), LIM(6,3), h = 0.05, 1000 steps:");
    let ex2 = builtin_problem("ex2").unwrap();
    for kind in [
        SolverKind::FixedPoint,
        SolverKind::BlendedMagnetic,
        SolverKind::BlendedElectric,
    ] {
        report(
            &ex2,
            6,
            3,
            0.05,
            1000,
            SolverConfig {
                kind,
                ..SolverConfig::default()
            },
        );
    }

    println!("\nuniform L = (0,0,1): the constant-field fast path");
    let uniform = Problem::builder(3)
        .label("uniform")
        .potential(|q| q.norm_squared())
        .grad_potential(|q| 2.0 * q)
        .hessian(|_| nalgebra::DMatrix::identity(3, 3) * 2.0)
        .cross_field(|_| DVector::from_vec(vec![0.0, 0.0, 1.0]))
        .initial(vec![1.0, 0.0, 0.0], vec![0.0, 0.5, 0.1])
        .build()
        .unwrap();
    for constant_b in [false, true] {
        report(
            &uniform,
            4,
            2,
            0.05,
            2000,
            SolverConfig {
                kind: SolverKind::BlendedMagnetic,
                constant_b,
                ..SolverConfig::default()
            },
        );
    }
}
