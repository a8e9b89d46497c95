//! The LIM(k, s) one-step map.
//!
//! Once the stage system is solved, only the first two blocks enter the
//! update:
//!
//! ```text
//! q₁ = q₀ + h p₀ + h²/2 (ψ₀ − ψ₁/√3),    p₁ = p₀ + h ψ₀,
//! ```
//!
//! which is the first block row of γ = e₁⊗p₀ + hX_s⊗I ψ and holds for every
//! s ≥ 2. The map is symmetric: stepping (q₁, p₁) with −h returns (q₀, p₀),
//! so negative step sizes are supported throughout.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::problem::{Problem, State};
use crate::solver::{solve_psi, ConstBCache, PsiBlocks, SolverConfig, StepReport};
use crate::tableau::Tableau;

/// Step increments (Δq, Δp) with q₁ = q₀ + Δq, p₁ = p₀ + Δp.
fn increments(state: &State, h: f64, psi: &PsiBlocks) -> (DVector<f64>, DVector<f64>) {
    let psi0 = psi.block(0);
    let psi1 = psi.block(1);
    let dq = h * &state.p + (h * h / 2.0) * (&psi0 - &psi1 / 3f64.sqrt());
    let dp = h * psi0;
    (dq, dp)
}

fn advance(state: &State, h: f64, psi: &PsiBlocks) -> State {
    let (dq, dp) = increments(state, h, psi);
    State::new(state.t + h, &state.q + dq, &state.p + dp)
}

/// One LIM(k, s) step from a cold start (zero initial stage guess).
pub fn lim_step(
    tab: &Tableau,
    prob: &Problem,
    state: &State,
    h: f64,
    cfg: &SolverConfig,
) -> Result<(State, StepReport)> {
    if state.dim() != prob.dim() {
        return Err(Error::DimensionMismatch(format!(
            "state dimension {} does not match problem dimension {}",
            state.dim(),
            prob.dim()
        )));
    }
    let (psi, report) = solve_psi(tab, prob, &state.q, &state.p, h, cfg, None, None)?;
    Ok((advance(state, h, &psi), report))
}

/// Stepper holding per-run context: the previous step's converged stages as
/// the next initial guess, and — when the field is flagged uniform — the
/// field matrix and the reusable blended preconditioner.
pub struct LimStepper<'a> {
    tab: &'a Tableau,
    prob: &'a Problem,
    cfg: SolverConfig,
    warm: Option<PsiBlocks>,
    const_b: Option<ConstBCache>,
}

impl<'a> LimStepper<'a> {
    pub fn new(tab: &'a Tableau, prob: &'a Problem, cfg: SolverConfig) -> LimStepper<'a> {
        LimStepper {
            tab,
            prob,
            cfg,
            warm: None,
            const_b: None,
        }
    }

    pub fn config(&self) -> &SolverConfig {
        &self.cfg
    }

    /// Drop the warm-start data (e.g. when jumping to an unrelated state).
    pub fn reset(&mut self) {
        self.warm = None;
    }

    pub fn step(&mut self, state: &State, h: f64) -> Result<(State, StepReport)> {
        let (dq, dp, report) = self.step_increments(state, h)?;
        Ok((
            State::new(state.t + h, &state.q + dq, &state.p + dp),
            report,
        ))
    }

    /// The step as increments (Δq, Δp), so long runs can accumulate them in
    /// compensated arithmetic.
    pub fn step_increments(
        &mut self,
        state: &State,
        h: f64,
    ) -> Result<(DVector<f64>, DVector<f64>, StepReport)> {
        if state.dim() != self.prob.dim() {
            return Err(Error::DimensionMismatch(format!(
                "state dimension {} does not match problem dimension {}",
                state.dim(),
                self.prob.dim()
            )));
        }
        if self.cfg.constant_b && self.const_b.is_none() {
            self.const_b = Some(ConstBCache::new(self.prob, &state.q));
        }
        let (psi, report) = solve_psi(
            self.tab,
            self.prob,
            &state.q,
            &state.p,
            h,
            &self.cfg,
            self.warm.as_ref(),
            self.const_b.as_mut(),
        )?;
        let (dq, dp) = increments(state, h, &psi);
        self.warm = Some(psi);
        Ok((dq, dp, report))
    }
}
