//! The stage system of one LIM(k, s) step and its nonlinear solvers.
//!
//! One step from (q₀, p₀) with size h solves F(ψ) = 0 for the block vector
//! ψ = (ψ₀, …, ψ_{s−1}), ψ_j ∈ R^m, where
//!
//! ```text
//! F(ψ) = ψ − P̂ᵀΩ̂ ⊗ I [ M(1_s⊗q₀ + hĉ⊗p₀ + h²ÎX_s⊗I ψ) · (1_s⊗p₀ + hÎ⊗I ψ) ]
//!          + Pᵀ Ω ⊗ I  ∇U(1_k⊗q₀ + hc⊗p₀ + h²I_sX_s⊗I ψ),
//! ```
//!
//! with M the magnetic force map. The magnetic term is sampled at the s
//! inner nodes and the electric term at the k outer nodes, so the system
//! size s·m is independent of k. Blocks are stored as the columns of an
//! m×s matrix, which turns every Kronecker product above into a plain
//! right-multiplication by a small matrix.
//!
//! Three solvers are provided: plain fixed point, and two blended
//! simplified-Newton iterations whose linear algebra reduces to one m×m
//! factorization per step — Θ = (I − hρ_s M(q₀))⁻¹ when the magnetic field
//! dominates, Θ₁ = (I + h²ρ_s² ∇²U(q₀))⁻¹ when the electric field does.

use nalgebra::{DMatrix, DVector, Dyn, LU};

use crate::error::{Error, Result};
use crate::problem::Problem;
use crate::tableau::Tableau;

/// The stage unknown ψ: s blocks of R^m, stored as matrix columns.
#[derive(Debug, Clone, PartialEq)]
pub struct PsiBlocks {
    cols: DMatrix<f64>,
}

impl PsiBlocks {
    pub fn zeros(dim: usize, stages: usize) -> PsiBlocks {
        PsiBlocks {
            cols: DMatrix::zeros(dim, stages),
        }
    }

    pub(crate) fn from_matrix(cols: DMatrix<f64>) -> PsiBlocks {
        PsiBlocks { cols }
    }

    pub fn dim(&self) -> usize {
        self.cols.nrows()
    }

    pub fn stages(&self) -> usize {
        self.cols.ncols()
    }

    /// ψ_j as an owned vector.
    pub fn block(&self, j: usize) -> DVector<f64> {
        self.cols.column(j).clone_owned()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.cols
    }

    /// Max-norm over all blocks and components.
    pub fn max_norm(&self) -> f64 {
        self.cols.amax()
    }

    pub fn is_finite(&self) -> bool {
        self.cols.iter().all(|v| v.is_finite())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverKind {
    FixedPoint,
    BlendedMagnetic,
    BlendedElectric,
}

impl std::str::FromStr for SolverKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<SolverKind> {
        match s.replace('_', "-").as_str() {
            "fixed-point" | "fixed" => Ok(SolverKind::FixedPoint),
            "blended-magnetic" | "magnetic" => Ok(SolverKind::BlendedMagnetic),
            "blended-electric" | "electric" => Ok(SolverKind::BlendedElectric),
            other => Err(Error::Config(format!(
                "unknown solver `{other}` (expected fixed-point, blended-magnetic or blended-electric)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SolverConfig {
    pub kind: SolverKind,
    /// Mixed absolute/relative increment tolerance.
    pub tol: f64,
    pub max_iter: usize,
    /// Treat the magnetic field as uniform: evaluate it once per step and
    /// use the simplified stage system; with the magnetic blended solver the
    /// preconditioner is then reused across a whole run.
    pub constant_b: bool,
}

impl Default for SolverConfig {
    fn default() -> SolverConfig {
        SolverConfig {
            kind: SolverKind::FixedPoint,
            tol: 1e-14,
            max_iter: 100,
            constant_b: false,
        }
    }
}

/// Outcome of one nonlinear solve.
#[derive(Debug, Clone, Copy)]
pub struct StepReport {
    pub iterations: usize,
    /// Max-norm of the last increment.
    pub residual_norm: f64,
    pub converged: bool,
}

/// Reusable pieces for uniform magnetic fields: the field matrix and, for
/// the magnetic blended solver, the preconditioner factorization keyed by h.
pub(crate) struct ConstBCache {
    pub(crate) bmat: DMatrix<f64>,
    theta: Option<(u64, LU<f64, Dyn, Dyn>)>,
}

impl ConstBCache {
    pub(crate) fn new(prob: &Problem, q0: &DVector<f64>) -> ConstBCache {
        ConstBCache {
            bmat: prob.magnetic_matrix(q0),
            theta: None,
        }
    }
}

/// Magnetic-stage projection P̂ᵀΩ̂ ⊗ I [M(u(ĉh)) v(ĉh)] as an m×s matrix.
fn magnetic_projection(
    tab: &Tableau,
    prob: &Problem,
    q0: &DVector<f64>,
    p0: &DVector<f64>,
    h: f64,
    psi: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    let s = tab.s;
    let m = q0.len();
    let mut u_in = (psi * tab.ihat_xs.transpose()) * (h * h);
    let mut v_in = (psi * tab.ihat.transpose()) * h;
    for l in 0..s {
        let c = tab.inner_rule.nodes()[l];
        let mut uc = u_in.column_mut(l);
        uc.axpy(1.0, q0, 1.0);
        uc.axpy(h * c, p0, 1.0);
        v_in.column_mut(l).axpy(1.0, p0, 1.0);
    }
    let mut forces = DMatrix::zeros(m, s);
    for l in 0..s {
        let f =
            prob.apply_magnetic(&u_in.column(l).clone_owned(), &v_in.column(l).clone_owned())?;
        if !f.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite(
                "magnetic field evaluation at an inner stage".into(),
            ));
        }
        forces.set_column(l, &f);
    }
    Ok(forces * &tab.proj_inner)
}

/// Electric-stage projection Pᵀ Ω ⊗ I ∇U(u(ch)) as an m×s matrix.
fn electric_projection(
    tab: &Tableau,
    prob: &Problem,
    q0: &DVector<f64>,
    p0: &DVector<f64>,
    h: f64,
    psi: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    let k = tab.k;
    let m = q0.len();
    let mut u_out = (psi * tab.imat_xs.transpose()) * (h * h);
    for l in 0..k {
        let c = tab.outer_rule.nodes()[l];
        let mut uc = u_out.column_mut(l);
        uc.axpy(1.0, q0, 1.0);
        uc.axpy(h * c, p0, 1.0);
    }
    let mut grads = DMatrix::zeros(m, k);
    for l in 0..k {
        let g = prob.grad_potential(&u_out.column(l).clone_owned());
        if !g.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite(
                "potential gradient evaluation at an outer stage".into(),
            ));
        }
        grads.set_column(l, &g);
    }
    Ok(grads * &tab.proj_outer)
}

/// Right-hand side of the fixed-point form ψ = RHS(ψ), so F(ψ) = ψ − RHS(ψ).
fn stage_rhs(
    tab: &Tableau,
    prob: &Problem,
    q0: &DVector<f64>,
    p0: &DVector<f64>,
    h: f64,
    psi: &DMatrix<f64>,
    const_b: Option<&DMatrix<f64>>,
) -> Result<DMatrix<f64>> {
    let electric = electric_projection(tab, prob, q0, p0, h, psi)?;
    match const_b {
        None => Ok(magnetic_projection(tab, prob, q0, p0, h, psi)? - electric),
        Some(b) => {
            // Uniform field: P̂ᵀΩ̂1 = e₁ and P̂ᵀΩ̂Î = X_s collapse the inner
            // projection to e₁ ⊗ Bp₀ + hX_s ⊗ B ψ.
            let mut rhs = (b * psi) * (tab.xs.transpose() * h);
            rhs.column_mut(0).axpy(1.0, &(b * p0), 1.0);
            rhs -= electric;
            Ok(rhs)
        }
    }
}

/// The stage residual F(ψ); the step's ψ is its root.
pub fn psi_residual(
    tab: &Tableau,
    prob: &Problem,
    q0: &DVector<f64>,
    p0: &DVector<f64>,
    h: f64,
    psi: &PsiBlocks,
) -> Result<PsiBlocks> {
    let rhs = stage_rhs(tab, prob, q0, p0, h, &psi.cols, None)?;
    Ok(PsiBlocks::from_matrix(&psi.cols - rhs))
}

fn initial_guess(guess: Option<&PsiBlocks>, m: usize, s: usize) -> DMatrix<f64> {
    match guess {
        Some(g) => g.cols.clone(),
        None => DMatrix::zeros(m, s),
    }
}

/// Plain fixed-point iteration ψ ← RHS(ψ).
///
/// Converges for h small enough that the right-hand side contracts (see
/// [`contraction_bound`]); stops when the increment satisfies
/// ‖Δψ‖_∞ ≤ tol (1 + ‖ψ‖_∞).
pub fn solve_fixed_point(
    tab: &Tableau,
    prob: &Problem,
    q0: &DVector<f64>,
    p0: &DVector<f64>,
    h: f64,
    cfg: &SolverConfig,
    guess: Option<&PsiBlocks>,
) -> Result<(PsiBlocks, StepReport)> {
    let local;
    let const_b = if cfg.constant_b {
        local = prob.magnetic_matrix(q0);
        Some(&local)
    } else {
        None
    };
    solve_fixed_point_inner(tab, prob, q0, p0, h, cfg, guess, const_b)
}

fn check_config(cfg: &SolverConfig) -> Result<()> {
    let tol_ok = cfg.tol.is_finite() && cfg.tol > 0.0;
    if !tol_ok || cfg.max_iter == 0 {
        return Err(Error::InvalidParameter(format!(
            "solver needs a finite tol > 0 and max_iter >= 1, got tol = {}, max_iter = {}",
            cfg.tol, cfg.max_iter
        )));
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn solve_fixed_point_inner(
    tab: &Tableau,
    prob: &Problem,
    q0: &DVector<f64>,
    p0: &DVector<f64>,
    h: f64,
    cfg: &SolverConfig,
    guess: Option<&PsiBlocks>,
    const_b: Option<&DMatrix<f64>>,
) -> Result<(PsiBlocks, StepReport)> {
    check_config(cfg)?;
    let mut psi = initial_guess(guess, q0.len(), tab.s);
    let mut increment = f64::INFINITY;
    for it in 1..=cfg.max_iter {
        let next = stage_rhs(tab, prob, q0, p0, h, &psi, const_b)?;
        increment = (&next - &psi).amax();
        psi = next;
        if increment <= cfg.tol * (1.0 + psi.amax()) {
            return Ok((
                PsiBlocks::from_matrix(psi),
                StepReport {
                    iterations: it,
                    residual_norm: increment,
                    converged: true,
                },
            ));
        }
    }
    Err(Error::NonConvergence {
        iterations: cfg.max_iter,
        residual: increment,
    })
}

enum Preconditioner<'a> {
    Owned(LU<f64, Dyn, Dyn>),
    Shared(&'a LU<f64, Dyn, Dyn>),
}

impl Preconditioner<'_> {
    fn solve(&self, rhs: &DMatrix<f64>, label: &str) -> Result<DMatrix<f64>> {
        let lu = match self {
            Preconditioner::Owned(lu) => lu,
            Preconditioner::Shared(lu) => lu,
        };
        lu.solve(rhs)
            .ok_or_else(|| Error::SingularPreconditioner(label.into()))
    }
}

#[allow(clippy::too_many_arguments)]
fn solve_blended(
    tab: &Tableau,
    prob: &Problem,
    q0: &DVector<f64>,
    p0: &DVector<f64>,
    h: f64,
    cfg: &SolverConfig,
    guess: Option<&PsiBlocks>,
    electric: bool,
    mut cache: Option<&mut ConstBCache>,
) -> Result<(PsiBlocks, StepReport)> {
    check_config(cfg)?;
    let m = q0.len();
    let rho = tab.rho_s;
    let eye = DMatrix::<f64>::identity(m, m);

    // For a uniform field with the magnetic preconditioner, refresh the
    // cached factorization only when h changes.
    if !electric && cfg.constant_b {
        if let Some(c) = cache.as_deref_mut() {
            let key = h.to_bits();
            if !matches!(&c.theta, Some((bits, _)) if *bits == key) {
                let mat = &eye - &c.bmat * (h * rho);
                c.theta = Some((key, mat.lu()));
            }
        }
    }
    let cache_ref: Option<&ConstBCache> = cache.as_deref();

    let local_b;
    let const_b: Option<&DMatrix<f64>> = if cfg.constant_b {
        Some(match cache_ref {
            Some(c) => &c.bmat,
            None => {
                local_b = prob.magnetic_matrix(q0);
                &local_b
            }
        })
    } else {
        None
    };

    // b₁ = ρ X⁻¹ ⊗ I b for the magnetic variant, ρ² X⁻² ⊗ I b for the
    // electric one; as columns this is a right-multiplication.
    let weight = if electric {
        (tab.xs_inv2.transpose()) * (rho * rho)
    } else {
        (tab.xs_inv.transpose()) * rho
    };

    let precond = if electric {
        // Indefinite Hessians can make Θ₁ singular; detected at solve time.
        let hess = prob.hessian_or_fd(q0);
        let mat = &eye + hess * (h * h * rho * rho);
        Preconditioner::Owned(mat.lu())
    } else {
        match cache_ref
            .filter(|_| cfg.constant_b)
            .and_then(|c| c.theta.as_ref())
        {
            Some((_, lu)) => Preconditioner::Shared(lu),
            None => {
                let bmat = match const_b {
                    Some(b) => b.clone(),
                    None => prob.magnetic_matrix(q0),
                };
                Preconditioner::Owned((&eye - bmat * (h * rho)).lu())
            }
        }
    };
    let label = if electric {
        "I + h²ρ²∇²U(q₀) is singular; the Hessian is indefinite here — use the fixed-point solver"
    } else {
        "I − hρB(q₀) is singular"
    };

    let mut psi = initial_guess(guess, m, tab.s);
    let mut increment = f64::INFINITY;
    for it in 1..=cfg.max_iter {
        let rhs = stage_rhs(tab, prob, q0, p0, h, &psi, const_b)?;
        let b = rhs - &psi; // −F(ψ)
        let b1 = &b * &weight;
        let inner = &b1 + precond.solve(&(&b - &b1), label)?;
        let delta = precond.solve(&inner, label)?;
        psi += &delta;
        increment = delta.amax();
        if increment <= cfg.tol * (1.0 + psi.amax()) {
            return Ok((
                PsiBlocks::from_matrix(psi),
                StepReport {
                    iterations: it,
                    residual_norm: increment,
                    converged: true,
                },
            ));
        }
    }
    Err(Error::NonConvergence {
        iterations: cfg.max_iter,
        residual: increment,
    })
}

/// Blended simplified-Newton iteration preconditioned with
/// Θ = (I − hρ_s M(q₀))⁻¹; one m×m factorization per step.
pub fn solve_blended_magnetic(
    tab: &Tableau,
    prob: &Problem,
    q0: &DVector<f64>,
    p0: &DVector<f64>,
    h: f64,
    cfg: &SolverConfig,
    guess: Option<&PsiBlocks>,
) -> Result<(PsiBlocks, StepReport)> {
    solve_blended(tab, prob, q0, p0, h, cfg, guess, false, None)
}

/// Blended simplified-Newton iteration preconditioned with
/// Θ₁ = (I + h²ρ_s²∇²U(q₀))⁻¹, for electric-dominated problems.
pub fn solve_blended_electric(
    tab: &Tableau,
    prob: &Problem,
    q0: &DVector<f64>,
    p0: &DVector<f64>,
    h: f64,
    cfg: &SolverConfig,
    guess: Option<&PsiBlocks>,
) -> Result<(PsiBlocks, StepReport)> {
    solve_blended(tab, prob, q0, p0, h, cfg, guess, true, None)
}

/// Kind dispatch used by the stepping layer.
#[allow(clippy::too_many_arguments)]
pub(crate) fn solve_psi(
    tab: &Tableau,
    prob: &Problem,
    q0: &DVector<f64>,
    p0: &DVector<f64>,
    h: f64,
    cfg: &SolverConfig,
    guess: Option<&PsiBlocks>,
    cache: Option<&mut ConstBCache>,
) -> Result<(PsiBlocks, StepReport)> {
    match cfg.kind {
        SolverKind::FixedPoint => {
            let const_b = cache.map(|c| &c.bmat);
            solve_fixed_point_inner(tab, prob, q0, p0, h, cfg, guess, const_b)
        }
        SolverKind::BlendedMagnetic => {
            solve_blended(tab, prob, q0, p0, h, cfg, guess, false, cache)
        }
        SolverKind::BlendedElectric => solve_blended(tab, prob, q0, p0, h, cfg, guess, true, cache),
    }
}

fn inf_norm(m: &DMatrix<f64>) -> f64 {
    (0..m.nrows())
        .map(|r| m.row(r).iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Diagnostic value of the fixed-point contraction bound
///
/// ```text
/// hμ [ ‖Î‖ ‖P̂ᵀΩ̂‖ + h‖X_s‖ ( ‖Î‖ ‖P̂ᵀΩ̂‖ + ‖I_s‖ ‖PᵀΩ‖ ) ]
/// ```
///
/// for a user-supplied Lipschitz estimate μ of the fields. A value below 1
/// is sufficient for the fixed-point iteration to converge, not necessary;
/// max norms are used throughout. Never enforced as a gate.
pub fn contraction_bound(tab: &Tableau, h: f64, mu: f64) -> f64 {
    let ihat = inf_norm(&tab.ihat);
    let imat = inf_norm(&tab.imat);
    let xs = inf_norm(&tab.xs);
    let phat_om = inf_norm(&tab.proj_inner.transpose());
    let pmat_om = inf_norm(&tab.proj_outer.transpose());
    let h = h.abs();
    h * mu * (ihat * phat_om + h * xs * (ihat * phat_om + imat * pmat_om))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::builtin_problem;
    use nalgebra::DVector;

    fn free_problem() -> Problem {
        Problem::builder(3)
            .label("free")
            .potential(|_| 1.5)
            .grad_potential(|_| DVector::zeros(3))
            .cross_field(|_| DVector::zeros(3))
            .initial(vec![0.1, 0.2, 0.3], vec![1.0, -1.0, 0.5])
            .build()
            .unwrap()
    }

    fn uniform_field_problem() -> Problem {
        // ex1's potential with a uniform L = (0, 0, 1).
        Problem::builder(3)
            .label("uniform")
            .potential(|q| {
                q[0].powi(3) - q[1].powi(3) + 0.2 * q[0].powi(4) + q[1].powi(4) + q[2].powi(4)
            })
            .grad_potential(|q| {
                DVector::from_vec(vec![
                    3.0 * q[0] * q[0] + 0.8 * q[0].powi(3),
                    -3.0 * q[1] * q[1] + 4.0 * q[1].powi(3),
                    4.0 * q[2].powi(3),
                ])
            })
            .cross_field(|_| DVector::from_vec(vec![0.0, 0.0, 1.0]))
            .initial(vec![0.0, 1.0, 0.1], vec![0.09, 0.55, 0.3])
            .build()
            .unwrap()
    }

    #[test]
    fn residual_is_identity_when_both_fields_vanish() {
        let tab = Tableau::build(4, 2).unwrap();
        let prob = free_problem();
        let s0 = prob.initial_state();
        let psi = PsiBlocks::from_matrix(DMatrix::from_fn(3, 2, |r, c| (r + 2 * c) as f64 - 1.3));
        let f = psi_residual(&tab, &prob, &s0.q, &s0.p, 0.1, &psi).unwrap();
        assert_eq!(f.as_matrix(), psi.as_matrix());
    }

    #[test]
    fn fixed_point_solves_the_free_problem_in_one_iteration() {
        let tab = Tableau::build(4, 2).unwrap();
        let prob = free_problem();
        let s0 = prob.initial_state();
        let cfg = SolverConfig::default();
        let (psi, report) = solve_fixed_point(&tab, &prob, &s0.q, &s0.p, 0.5, &cfg, None).unwrap();
        assert_eq!(report.iterations, 1);
        assert_eq!(psi.max_norm(), 0.0);
    }

    #[test]
    fn without_magnetic_field_the_residual_reduces_to_the_electric_form() {
        // Independent assembly of ψ + PᵀΩ ⊗ I ∇U(stages) from the raw
        // tableau matrices.
        let prob = Problem::builder(3)
            .potential(|q| q.norm_squared())
            .grad_potential(|q| 2.0 * q)
            .cross_field(|_| DVector::zeros(3))
            .initial(vec![0.2, -0.4, 0.9], vec![0.3, 0.1, -0.2])
            .build()
            .unwrap();
        let tab = Tableau::build(6, 3).unwrap();
        let s0 = prob.initial_state();
        let h = 0.07;
        let psi = PsiBlocks::from_matrix(DMatrix::from_fn(3, 3, |r, c| {
            0.1 * (r as f64) - 0.2 * (c as f64) + 0.05
        }));

        let f = psi_residual(&tab, &prob, &s0.q, &s0.p, h, &psi).unwrap();

        let mut expected = psi.as_matrix().clone();
        for i in 0..tab.s {
            let mut acc = DVector::zeros(3);
            for l in 0..tab.k {
                let c = tab.outer_rule.nodes()[l];
                let mut u = &s0.q + h * c * &s0.p;
                for j in 0..tab.s {
                    let coeff: f64 = (0..tab.s).map(|r| tab.imat[(l, r)] * tab.xs[(r, j)]).sum();
                    u += h * h * coeff * psi.block(j);
                }
                acc += tab.outer_rule.weights()[l] * tab.pmat[(l, i)] * prob.grad_potential(&u);
            }
            expected.column_mut(i).axpy(1.0, &acc, 1.0);
        }
        assert!((f.as_matrix() - expected).amax() < 1e-14);
    }

    #[test]
    fn converged_psi_has_negligible_residual_on_ex2() {
        let tab = Tableau::build(4, 2).unwrap();
        let prob = builtin_problem("ex2").unwrap();
        let s0 = prob.initial_state();
        let cfg = SolverConfig {
            tol: 1e-15,
            ..SolverConfig::default()
        };
        let (psi, report) = solve_fixed_point(&tab, &prob, &s0.q, &s0.p, 0.01, &cfg, None).unwrap();
        assert!(report.converged);
        let f = psi_residual(&tab, &prob, &s0.q, &s0.p, 0.01, &psi).unwrap();
        assert!(f.max_norm() <= 1e-13, "residual {}", f.max_norm());
    }

    #[test]
    fn fixed_point_increments_decay_geometrically_on_ex2() {
        let tab = Tableau::build(6, 3).unwrap();
        let prob = builtin_problem("ex2").unwrap();
        let s0 = prob.initial_state();
        let h = 0.05;
        let mut psi = PsiBlocks::zeros(3, 3);
        let mut increments = Vec::new();
        for _ in 0..12 {
            let f = psi_residual(&tab, &prob, &s0.q, &s0.p, h, &psi).unwrap();
            let next = PsiBlocks::from_matrix(psi.as_matrix() - f.as_matrix());
            increments.push((next.as_matrix() - psi.as_matrix()).amax());
            psi = next;
        }
        let usable: Vec<f64> = increments.into_iter().take_while(|&d| d > 1e-13).collect();
        assert!(usable.len() >= 4, "iteration converged suspiciously fast");
        let mean_log_ratio: f64 =
            usable.windows(2).map(|w| (w[1] / w[0]).ln()).sum::<f64>() / (usable.len() - 1) as f64;
        assert!(
            mean_log_ratio < 0.5f64.ln(),
            "mean log increment ratio {mean_log_ratio} not strongly contractive"
        );
    }

    #[test]
    fn blended_magnetic_on_the_free_problem_converges_immediately() {
        let tab = Tableau::build(4, 2).unwrap();
        let prob = free_problem();
        let s0 = prob.initial_state();
        let cfg = SolverConfig {
            kind: SolverKind::BlendedMagnetic,
            ..SolverConfig::default()
        };
        let (psi, report) =
            solve_blended_magnetic(&tab, &prob, &s0.q, &s0.p, 0.3, &cfg, None).unwrap();
        assert_eq!(report.iterations, 1);
        assert!(psi.max_norm() <= 1e-15);
    }

    #[test]
    fn blended_electric_with_flat_potential_converges_immediately() {
        let tab = Tableau::build(4, 2).unwrap();
        let prob = free_problem();
        let s0 = prob.initial_state();
        let cfg = SolverConfig {
            kind: SolverKind::BlendedElectric,
            ..SolverConfig::default()
        };
        let (psi, report) =
            solve_blended_electric(&tab, &prob, &s0.q, &s0.p, 0.3, &cfg, None).unwrap();
        assert_eq!(report.iterations, 1);
        assert!(psi.max_norm() <= 1e-15);
    }

    #[test]
    fn blended_magnetic_agrees_with_fixed_point_on_ex1() {
        let tab = Tableau::build(4, 2).unwrap();
        let prob = builtin_problem("ex1").unwrap();
        let s0 = prob.initial_state();
        let cfg = SolverConfig::default();
        let (fp, _) = solve_fixed_point(&tab, &prob, &s0.q, &s0.p, 1e-2, &cfg, None).unwrap();
        let (bl, _) = solve_blended_magnetic(&tab, &prob, &s0.q, &s0.p, 1e-2, &cfg, None).unwrap();
        let diff = (fp.as_matrix() - bl.as_matrix()).amax();
        assert!(diff <= 10.0 * cfg.tol, "solver disagreement {diff:e}");
    }

    #[test]
    fn blended_electric_agrees_with_fixed_point_on_ex2() {
        let tab = Tableau::build(6, 3).unwrap();
        let prob = builtin_problem("ex2").unwrap();
        let s0 = prob.initial_state();
        let cfg = SolverConfig::default();
        let (fp, _) = solve_fixed_point(&tab, &prob, &s0.q, &s0.p, 0.0125, &cfg, None).unwrap();
        let (bl, _) =
            solve_blended_electric(&tab, &prob, &s0.q, &s0.p, 0.0125, &cfg, None).unwrap();
        let diff = (fp.as_matrix() - bl.as_matrix()).amax();
        assert!(diff <= 10.0 * cfg.tol, "solver disagreement {diff:e}");
    }

    #[test]
    fn constant_b_path_matches_the_general_path() {
        let tab = Tableau::build(4, 2).unwrap();
        let prob = uniform_field_problem();
        let s0 = prob.initial_state();
        let general = SolverConfig::default();
        let fast = SolverConfig {
            constant_b: true,
            ..general
        };
        let (a, _) = solve_fixed_point(&tab, &prob, &s0.q, &s0.p, 0.02, &general, None).unwrap();
        let (b, _) = solve_fixed_point(&tab, &prob, &s0.q, &s0.p, 0.02, &fast, None).unwrap();
        let diff = (a.as_matrix() - b.as_matrix()).amax();
        assert!(diff <= 10.0 * general.tol, "paths disagree by {diff:e}");
    }

    #[test]
    fn singular_field_evaluation_is_reported() {
        let tab = Tableau::build(4, 2).unwrap();
        let prob = builtin_problem("ex3").unwrap();
        // Park the particle on the potential's singular axis.
        let q0 = DVector::from_vec(vec![0.0, 0.0, 0.0]);
        let p0 = DVector::from_vec(vec![0.0, 0.0, 0.0]);
        let cfg = SolverConfig::default();
        let err = solve_fixed_point(&tab, &prob, &q0, &p0, 0.1, &cfg, None);
        assert!(matches!(err, Err(Error::NonFinite(_))));
    }

    #[test]
    fn contraction_bound_is_positive_and_scales_with_h() {
        let tab = Tableau::build(4, 2).unwrap();
        let at_01 = contraction_bound(&tab, 0.1, 2.0);
        let at_001 = contraction_bound(&tab, 0.01, 2.0);
        assert!(at_01 > 0.0 && at_001 > 0.0);
        assert!(at_001 < at_01 / 9.0);
    }

    #[test]
    fn nonpositive_tolerance_is_rejected() {
        let tab = Tableau::build(4, 2).unwrap();
        let prob = free_problem();
        let s0 = prob.initial_state();
        let cfg = SolverConfig {
            tol: 0.0,
            ..SolverConfig::default()
        };
        assert!(solve_fixed_point(&tab, &prob, &s0.q, &s0.p, 0.1, &cfg, None).is_err());
        assert!(solve_blended_magnetic(&tab, &prob, &s0.q, &s0.p, 0.1, &cfg, None).is_err());
    }
}
