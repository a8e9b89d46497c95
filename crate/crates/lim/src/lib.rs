//! Energy-conserving line-integral integrators for charged-particle
//! dynamics.
//!
//! The system integrated is the Lorentz force system
//!
//! ```text
//! q̇ = p,    ṗ = p × L(q) − ∇U(q),
//! ```
//!
//! (or its general form ṗ = B(q)p − ∇U(q) with skew B) whose energy
//! H(q, p) = ½ pᵀp + U(q) is a first integral. The LIM(k, s) one-step map
//! drives the line integral of dH along a degree-s polynomial path to zero
//! with a k-point Gauss rule for the electric term, giving a symmetric
//! method of order 2s that conserves H exactly whenever U is a polynomial
//! of degree ≤ 2k/s, and to round-off otherwise once k is large enough.
//! The classic Boris pusher is included as the second-order, symmetric,
//! non-conserving baseline.
//!
//! Entry points:
//! - [`Tableau`]: per-(k, s) constants, memoized.
//! - [`Problem`] / [`builtin_problem`]: field definitions and the three
//!   built-in test problems.
//! - [`lim_step`] / [`integrate`]: the LIM one-step map and driver.
//! - [`boris_step`] / [`boris_integrate`]: the baseline.
//! - [`harness`] and [`experiments`]: CSV runs, convergence tables,
//!   drift series, symmetry checks (also exposed by the `lim` binary).
//!
//! See the crate examples for one runnable program per capability.

pub mod basis;
pub mod boris;
pub mod config;
pub mod error;
pub mod experiments;
pub mod harness;
pub mod problem;
pub mod run;
pub mod solver;
pub mod step;
pub mod tableau;

pub use basis::{gauss_rule, legendre_eval, legendre_integral, GaussRule};
pub use boris::{boris_integrate, boris_step};
pub use error::{Error, Result};
pub use problem::{builtin_problem, MagneticField, Problem, ProblemBuilder, State};
pub use run::{integrate, integrate_lim, Run, RunRecord, RunSummary};
pub use solver::{
    contraction_bound, psi_residual, solve_blended_electric, solve_blended_magnetic,
    solve_fixed_point, PsiBlocks, SolverConfig, SolverKind, StepReport,
};
pub use step::{lim_step, LimStepper};
pub use tableau::Tableau;

#[cfg(test)]
mod shared_state_tests {
    use std::sync::Arc;

    use super::*;

    #[test]
    fn problems_and_tableaux_are_shareable_across_threads() {
        fn assert_send_sync<T: Send + Sync>() {}
        assert_send_sync::<Problem>();
        assert_send_sync::<Tableau>();
        assert_send_sync::<State>();

        // Two concurrent runs over the same shared, immutable data give
        // identical results.
        let prob = Arc::new(builtin_problem("ex2").unwrap());
        let tab = Tableau::get(4, 2).unwrap();
        let handles: Vec<_> = (0..2)
            .map(|_| {
                let prob = Arc::clone(&prob);
                let tab = Arc::clone(&tab);
                std::thread::spawn(move || {
                    integrate(
                        &tab,
                        &prob,
                        &prob.initial_state(),
                        0.01,
                        100,
                        &SolverConfig::default(),
                        100,
                    )
                    .unwrap()
                    .final_state()
                })
            })
            .collect();
        let results: Vec<State> = handles.into_iter().map(|h| h.join().unwrap()).collect();
        assert_eq!(results[0], results[1]);
    }
}
