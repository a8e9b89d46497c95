//! Integration drivers and per-run records.
//!
//! A run applies a one-step map repeatedly from a fixed initial state,
//! tracking the Hamiltonian error against H(state₀) and every extra
//! invariant of the problem over *all* steps, while storing thinned
//! [`RunRecord`] rows for output. Runs abort on solver failure or the first
//! non-finite state, reporting the step index.

use std::time::{Duration, Instant};

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::problem::{Problem, State};
use crate::solver::{SolverConfig, StepReport};
use crate::step::LimStepper;
use crate::tableau::Tableau;

/// One recorded step.
#[derive(Debug, Clone)]
pub struct RunRecord {
    pub t: f64,
    pub q: Vec<f64>,
    pub p: Vec<f64>,
    /// H(q, p) − H(q₀, p₀), signed.
    pub h_err: f64,
    /// Signed deviations of the problem's extra invariants, in declaration
    /// order.
    pub invariant_errs: Vec<f64>,
    /// Nonlinear iterations spent on the step (0 for the initial row and
    /// for iteration-free methods).
    pub iterations: usize,
}

/// Whole-run aggregates, taken over every step regardless of thinning.
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub steps: usize,
    pub max_h_err: f64,
    pub max_invariant_errs: Vec<f64>,
    pub total_iterations: u64,
    pub max_iterations: usize,
    pub wall_time: Duration,
}

/// Output of an integration run.
#[derive(Debug, Clone)]
pub struct Run {
    pub invariant_names: Vec<String>,
    pub records: Vec<RunRecord>,
    pub summary: RunSummary,
}

impl Run {
    pub fn final_state(&self) -> State {
        let last = self
            .records
            .last()
            .expect("runs always record the final step");
        State::new(
            last.t,
            DVector::from_vec(last.q.clone()),
            DVector::from_vec(last.p.clone()),
        )
    }
}

pub(crate) struct RunAccumulator<'a> {
    prob: &'a Problem,
    h0: f64,
    inv0: Vec<f64>,
    record_every: usize,
    n_steps: usize,
    records: Vec<RunRecord>,
    max_h_err: f64,
    max_invariant_errs: Vec<f64>,
    total_iterations: u64,
    max_iterations: usize,
    started: Instant,
}

impl<'a> RunAccumulator<'a> {
    pub(crate) fn new(
        prob: &'a Problem,
        state0: &State,
        n_steps: usize,
        record_every: usize,
    ) -> Result<RunAccumulator<'a>> {
        if n_steps < 1 {
            return Err(Error::InvalidParameter(
                "a run needs at least one step".into(),
            ));
        }
        if record_every < 1 {
            return Err(Error::InvalidParameter("record_every must be >= 1".into()));
        }
        if !state0.is_finite() {
            return Err(Error::NonFinite("initial state".into()));
        }
        let h0 = prob.hamiltonian(state0);
        let inv0 = prob.eval_invariants(&state0.q, &state0.p);
        let n_inv = inv0.len();
        let mut acc = RunAccumulator {
            prob,
            h0,
            inv0,
            record_every,
            n_steps,
            records: Vec::with_capacity(n_steps / record_every + 2),
            max_h_err: 0.0,
            max_invariant_errs: vec![0.0; n_inv],
            total_iterations: 0,
            max_iterations: 0,
            started: Instant::now(),
        };
        acc.push_record(state0, 0, 0.0, &vec![0.0; n_inv]);
        Ok(acc)
    }

    fn push_record(&mut self, state: &State, iterations: usize, h_err: f64, inv_errs: &[f64]) {
        self.records.push(RunRecord {
            t: state.t,
            q: state.q.iter().copied().collect(),
            p: state.p.iter().copied().collect(),
            h_err,
            invariant_errs: inv_errs.to_vec(),
            iterations,
        });
    }

    /// Account for the state after step number `step` (1-based).
    pub(crate) fn observe(&mut self, step: usize, state: &State, iterations: usize) -> Result<()> {
        if !state.is_finite() {
            return Err(Error::StepFailed {
                step,
                source: Box::new(Error::NonFinite("state".into())),
            });
        }
        let h_err = self.prob.hamiltonian(state) - self.h0;
        let inv = self.prob.eval_invariants(&state.q, &state.p);
        let inv_errs: Vec<f64> = inv.iter().zip(&self.inv0).map(|(v, v0)| v - v0).collect();

        self.max_h_err = self.max_h_err.max(h_err.abs());
        for (acc, e) in self.max_invariant_errs.iter_mut().zip(&inv_errs) {
            *acc = acc.max(e.abs());
        }
        self.total_iterations += iterations as u64;
        self.max_iterations = self.max_iterations.max(iterations);

        if step.is_multiple_of(self.record_every) || step == self.n_steps {
            self.push_record(state, iterations, h_err, &inv_errs);
        }
        Ok(())
    }

    pub(crate) fn finish(self) -> Run {
        Run {
            invariant_names: self.prob.invariant_names(),
            records: self.records,
            summary: RunSummary {
                steps: self.n_steps,
                max_h_err: self.max_h_err,
                max_invariant_errs: self.max_invariant_errs,
                total_iterations: self.total_iterations,
                max_iterations: self.max_iterations,
                wall_time: self.started.elapsed(),
            },
        }
    }
}

/// One compensated (Kahan) accumulation step, keeping the low-order bits
/// that plain summation would drop on every state update.
#[inline]
fn kahan_add(sum: &mut f64, comp: &mut f64, term: f64) {
    let y = term - *comp;
    let t = *sum + y;
    *comp = (t - *sum) - y;
    *sum = t;
}

/// Integrate `n_steps` LIM(k, s) steps of size `h` from `state0`, warm
/// starting each stage solve from the previous one.
///
/// The state is advanced by compensated summation of the per-step
/// increments, which keeps the accumulated rounding bias of the energy over
/// 10⁵-step runs at the 1e-13 level instead of 1e-12.
#[allow(clippy::too_many_arguments)]
pub fn integrate(
    tab: &Tableau,
    prob: &Problem,
    state0: &State,
    h: f64,
    n_steps: usize,
    cfg: &SolverConfig,
    record_every: usize,
) -> Result<Run> {
    let dim = state0.dim();
    let mut acc = RunAccumulator::new(prob, state0, n_steps, record_every)?;
    let mut stepper = LimStepper::new(tab, prob, *cfg);
    let mut state = state0.clone();
    let mut comp_q = DVector::zeros(dim);
    let mut comp_p = DVector::zeros(dim);
    for step in 1..=n_steps {
        let (dq, dp, report) =
            stepper
                .step_increments(&state, h)
                .map_err(|e| Error::StepFailed {
                    step,
                    source: Box::new(e),
                })?;
        for i in 0..dim {
            kahan_add(&mut state.q[i], &mut comp_q[i], dq[i]);
            kahan_add(&mut state.p[i], &mut comp_p[i], dp[i]);
        }
        state.t = state0.t + step as f64 * h;
        acc.observe(step, &state, report.iterations)?;
    }
    Ok(acc.finish())
}

/// Drive an arbitrary one-step map through the same recording machinery.
pub(crate) fn drive<F>(
    prob: &Problem,
    state0: &State,
    n_steps: usize,
    record_every: usize,
    mut step_fn: F,
) -> Result<Run>
where
    F: FnMut(&State) -> Result<(State, StepReport)>,
{
    let mut acc = RunAccumulator::new(prob, state0, n_steps, record_every)?;
    let mut state = state0.clone();
    for step in 1..=n_steps {
        let (next, report) = step_fn(&state).map_err(|e| Error::StepFailed {
            step,
            source: Box::new(e),
        })?;
        state = next;
        acc.observe(step, &state, report.iterations)?;
    }
    Ok(acc.finish())
}

/// Convenience wrapper: integrate with the memoized tableau for (k, s).
#[allow(clippy::too_many_arguments)]
pub fn integrate_lim(
    k: usize,
    s: usize,
    prob: &Problem,
    state0: &State,
    h: f64,
    n_steps: usize,
    cfg: &SolverConfig,
    record_every: usize,
) -> Result<Run> {
    let tab = Tableau::get(k, s)?;
    integrate(&tab, prob, state0, h, n_steps, cfg, record_every)
}
