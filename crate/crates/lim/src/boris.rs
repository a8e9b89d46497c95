//! The Boris method: the standard second-order, symmetric, non-conserving
//! particle pusher, used as the baseline for every comparison.
//!
//! This is the synchronized (non-staggered) formulation with position and
//! velocity both at integer times. Writing the force as
//! f(q, p) = L(q) × p − ∇U(q), one step is
//!
//! ```text
//! p₊  = pₙ + (h/2) f(qₙ, pₙ)            explicit half push at qₙ
//! qₙ₊₁ = qₙ + h p₊                       drift
//! pₙ₊₁ : p = p₊ + (h/2) f(qₙ₊₁, p)       implicit half push at qₙ₊₁,
//! ```
//!
//! where the last relation is linear in p and solved in closed form with
//! the classic t-vector algebra: with t = (h/2) L(qₙ₊₁) and
//! r = p₊ − (h/2)∇U(qₙ₊₁), p = (r + (r·t)t + t×r)/(1 + ‖t‖²).
//!
//! Both electric kicks are evaluated at the integer positions qₙ and qₙ₊₁.
//! Composing the closing half push of one step with the opening half push
//! of the next reproduces the textbook sequence at each integer position:
//! half electric kick, norm-preserving t/s rotation through the magnetic
//! field, half electric kick. The two half pushes are exact inverses of
//! each other under h → −h, which makes the one-step map symmetric, and
//! with ∇U ≡ 0 and uniform L the momentum norm is preserved exactly.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::problem::{cross3, Problem, State};
use crate::run::{drive, Run};
use crate::solver::StepReport;

fn check_boris_problem(prob: &Problem) -> Result<()> {
    if prob.dim() != 3 {
        return Err(Error::DimensionMismatch(format!(
            "the Boris pusher needs dimension 3, problem `{}` has dimension {}",
            prob.label(),
            prob.dim()
        )));
    }
    Ok(())
}

/// Solve p = r + t × p in closed form.
fn rotate_implicit(r: &DVector<f64>, t: &DVector<f64>) -> DVector<f64> {
    (r + r.dot(t) * t + cross3(t, r)) / (1.0 + t.norm_squared())
}

/// One synchronized Boris step; supports negative h.
pub fn boris_step(prob: &Problem, state: &State, h: f64) -> Result<State> {
    check_boris_problem(prob)?;
    let l0 = prob.cross_field(&state.q)?;
    let half = 0.5 * h;

    let p_mid = &state.p + half * (cross3(&l0, &state.p) - prob.grad_potential(&state.q));
    let q1 = &state.q + h * &p_mid;
    let t = half * prob.cross_field(&q1)?;
    let r = &p_mid - half * prob.grad_potential(&q1);
    let p1 = rotate_implicit(&r, &t);

    Ok(State::new(state.t + h, q1, p1))
}

/// Integrate `n_steps` Boris steps, recording like [`crate::integrate`].
pub fn boris_integrate(
    prob: &Problem,
    state0: &State,
    h: f64,
    n_steps: usize,
    record_every: usize,
) -> Result<Run> {
    check_boris_problem(prob)?;
    let report = StepReport {
        iterations: 0,
        residual_norm: 0.0,
        converged: true,
    };
    drive(prob, state0, n_steps, record_every, |state| {
        Ok((boris_step(prob, state, h)?, report))
    })
}
