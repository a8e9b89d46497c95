//! Charged-particle problem definitions: electric potential, magnetic
//! field, optional Hessian, extra invariants, and the built-in test
//! problems `ex1`, `ex2`, `ex3`.
//!
//! The governing equations are q̇ = p, ṗ = B(q)p − ∇U(q) with B(q) skew.
//! A cross field supplies L(q), contributing B(q)p = L(q) × p; this
//! orientation is the one under which the guiding-center angular momentum
//! of `ex3` is a first integral. Skewness makes pᵀ(B(q)p) = 0, so the
//! energy H = ½pᵀp + U(q) is conserved along exact solutions.

use nalgebra::{DMatrix, DVector};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use crate::error::{Error, Result};

pub type ScalarFn = Box<dyn Fn(&DVector<f64>) -> f64 + Send + Sync>;
pub type VectorFn = Box<dyn Fn(&DVector<f64>) -> DVector<f64> + Send + Sync>;
pub type MatrixFn = Box<dyn Fn(&DVector<f64>) -> DMatrix<f64> + Send + Sync>;
pub type PhaseFn = Box<dyn Fn(&DVector<f64>, &DVector<f64>) -> f64 + Send + Sync>;

/// Magnetic part of the force.
pub enum MagneticField {
    /// L(q) with force L(q) × p; requires dimension 3.
    Cross(VectorFn),
    /// Skew matrix B(q) with force B(q) p; any dimension.
    Matrix(MatrixFn),
}

/// Phase-space point (t, q, p).
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub t: f64,
    pub q: DVector<f64>,
    pub p: DVector<f64>,
}

impl State {
    pub fn new(t: f64, q: DVector<f64>, p: DVector<f64>) -> State {
        State { t, q, p }
    }

    pub fn dim(&self) -> usize {
        self.q.len()
    }

    pub fn is_finite(&self) -> bool {
        self.q.iter().all(|v| v.is_finite()) && self.p.iter().all(|v| v.is_finite())
    }
}

/// v × w for length-3 vectors.
pub(crate) fn cross3(v: &DVector<f64>, w: &DVector<f64>) -> DVector<f64> {
    DVector::from_vec(vec![
        v[1] * w[2] - v[2] * w[1],
        v[2] * w[0] - v[0] * w[2],
        v[0] * w[1] - v[1] * w[0],
    ])
}

/// A time-independent charged-particle problem. Field closures must be pure;
/// the struct is immutable after construction so runs can share it freely.
pub struct Problem {
    dim: usize,
    label: String,
    potential: ScalarFn,
    grad: VectorFn,
    magnetic: MagneticField,
    hessian: Option<MatrixFn>,
    invariants: Vec<(String, PhaseFn)>,
    initial: State,
}

impl Problem {
    pub fn builder(dim: usize) -> ProblemBuilder {
        ProblemBuilder::new(dim)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn initial_state(&self) -> State {
        self.initial.clone()
    }

    /// H(q, p) = ½ pᵀp + U(q).
    pub fn hamiltonian(&self, state: &State) -> f64 {
        0.5 * state.p.norm_squared() + (self.potential)(&state.q)
    }

    pub fn potential(&self, q: &DVector<f64>) -> f64 {
        (self.potential)(q)
    }

    pub fn grad_potential(&self, q: &DVector<f64>) -> DVector<f64> {
        (self.grad)(q)
    }

    /// Magnetic force: L(q) × p for a cross field, B(q) p for a matrix
    /// field. The result is orthogonal to p in both cases.
    pub fn apply_magnetic(&self, q: &DVector<f64>, p: &DVector<f64>) -> Result<DVector<f64>> {
        if q.len() != self.dim || p.len() != self.dim {
            return Err(Error::DimensionMismatch(format!(
                "problem dimension is {}, got q in R^{} and p in R^{}",
                self.dim,
                q.len(),
                p.len()
            )));
        }
        let force = match &self.magnetic {
            MagneticField::Cross(l) => cross3(&l(q), p),
            MagneticField::Matrix(b) => b(q) * p,
        };
        // Non-finite evaluations are reported by the callers, not here.
        debug_assert!(
            !force.iter().all(|v| v.is_finite())
                || force.dot(p).abs() <= 1e-12 * p.norm() * force.norm() + f64::MIN_POSITIVE,
            "magnetic force must be orthogonal to p"
        );
        Ok(force)
    }

    /// The skew matrix M(q) with M(q) p equal to the magnetic force.
    pub fn magnetic_matrix(&self, q: &DVector<f64>) -> DMatrix<f64> {
        match &self.magnetic {
            MagneticField::Cross(l) => {
                let l = l(q);
                // L × p written as a matrix acting on p.
                DMatrix::from_row_slice(
                    3,
                    3,
                    &[0.0, -l[2], l[1], l[2], 0.0, -l[0], -l[1], l[0], 0.0],
                )
            }
            MagneticField::Matrix(b) => b(q),
        }
    }

    /// L(q) for cross-field problems (the Boris baseline needs it).
    pub fn cross_field(&self, q: &DVector<f64>) -> Result<DVector<f64>> {
        match &self.magnetic {
            MagneticField::Cross(l) => Ok(l(q)),
            MagneticField::Matrix(_) => Err(Error::InvalidParameter(format!(
                "problem `{}` defines its magnetic field as a matrix, not as L(q)",
                self.label
            ))),
        }
    }

    pub fn has_analytic_hessian(&self) -> bool {
        self.hessian.is_some()
    }

    /// ∇²U(q): analytic if supplied, otherwise central finite differences of
    /// the gradient with increment ∛ε (1 + |q_i|) per component. The
    /// fallback is only preconditioner-grade, which is all its callers need.
    pub fn hessian_or_fd(&self, q: &DVector<f64>) -> DMatrix<f64> {
        match &self.hessian {
            Some(h) => h(q),
            None => fd_jacobian(&self.grad, q),
        }
    }

    pub fn invariants(&self) -> &[(String, PhaseFn)] {
        &self.invariants
    }

    pub fn invariant_names(&self) -> Vec<String> {
        self.invariants.iter().map(|(n, _)| n.clone()).collect()
    }

    pub fn eval_invariants(&self, q: &DVector<f64>, p: &DVector<f64>) -> Vec<f64> {
        self.invariants.iter().map(|(_, f)| f(q, p)).collect()
    }

    /// Consistency checks at `samples` points drawn from the unit ball
    /// around the initial state: gradient vs. finite differences of the
    /// potential (1e-6 relative), Hessian symmetry (1e-10) and Hessian vs.
    /// finite differences of the gradient (1e-5 relative), and skewness of
    /// the magnetic term.
    pub fn validate(&self, samples: usize, seed: u64) -> Result<()> {
        let mut rng = StdRng::seed_from_u64(seed);
        for _ in 0..samples {
            let q = &self.initial.q + ball_sample(self.dim, &mut rng);
            let p = &self.initial.p + ball_sample(self.dim, &mut rng);

            let grad = (self.grad)(&q);
            let fd = fd_grad(&self.potential, &q);
            let scale = 1.0 + grad.amax().max(fd.amax());
            if (&grad - &fd).amax() > 1e-6 * scale {
                return Err(Error::Validation(format!(
                    "gradient of `{}` deviates from finite differences of the potential by {:.3e} at q = {:?}",
                    self.label,
                    (&grad - &fd).amax() / scale,
                    q.as_slice()
                )));
            }

            if let Some(h) = &self.hessian {
                let hess = h(&q);
                if (&hess - hess.transpose()).amax() > 1e-10 * (1.0 + hess.amax()) {
                    return Err(Error::Validation(format!(
                        "Hessian of `{}` is not symmetric at q = {:?}",
                        self.label,
                        q.as_slice()
                    )));
                }
                let fd_h = fd_jacobian(&self.grad, &q);
                let h_scale = 1.0 + hess.amax().max(fd_h.amax());
                if (&hess - &fd_h).amax() > 1e-5 * h_scale {
                    return Err(Error::Validation(format!(
                        "Hessian of `{}` deviates from finite differences of the gradient by {:.3e} at q = {:?}",
                        self.label,
                        (&hess - &fd_h).amax() / h_scale,
                        q.as_slice()
                    )));
                }
            }

            if let MagneticField::Matrix(b) = &self.magnetic {
                let bq = b(&q);
                if (&bq + bq.transpose()).amax() > 1e-12 * (1.0 + bq.amax()) {
                    return Err(Error::Validation(format!(
                        "matrix field of `{}` is not skew-symmetric at q = {:?}",
                        self.label,
                        q.as_slice()
                    )));
                }
            }
            let force = self.apply_magnetic(&q, &p)?;
            if force.dot(&p).abs() > 1e-12 * p.norm() * force.norm() + f64::MIN_POSITIVE {
                return Err(Error::Validation(format!(
                    "magnetic force of `{}` is not orthogonal to p at q = {:?}",
                    self.label,
                    q.as_slice()
                )));
            }
        }
        Ok(())
    }
}

fn ball_sample(dim: usize, rng: &mut StdRng) -> DVector<f64> {
    let v = DVector::from_fn(dim, |_, _| rng.random_range(-1.0..1.0));
    let norm = v.norm();
    if norm == 0.0 {
        return v;
    }
    let radius: f64 = rng.random_range(0.0..1.0);
    v * (radius / norm.max(1.0))
}

fn fd_grad(f: &ScalarFn, q: &DVector<f64>) -> DVector<f64> {
    let mut g = DVector::zeros(q.len());
    let mut probe = q.clone();
    for i in 0..q.len() {
        let delta = f64::EPSILON.cbrt() * (1.0 + q[i].abs());
        probe[i] = q[i] + delta;
        let hi = f(&probe);
        probe[i] = q[i] - delta;
        let lo = f(&probe);
        probe[i] = q[i];
        g[i] = (hi - lo) / (2.0 * delta);
    }
    g
}

fn fd_jacobian(g: &VectorFn, q: &DVector<f64>) -> DMatrix<f64> {
    let m = q.len();
    let mut jac = DMatrix::zeros(m, m);
    let mut probe = q.clone();
    for j in 0..m {
        let delta = f64::EPSILON.cbrt() * (1.0 + q[j].abs());
        probe[j] = q[j] + delta;
        let hi = g(&probe);
        probe[j] = q[j] - delta;
        let lo = g(&probe);
        probe[j] = q[j];
        jac.set_column(j, &((hi - lo) / (2.0 * delta)));
    }
    // Symmetrize: the Jacobian of a gradient is symmetric up to FD noise.
    0.5 * (&jac + jac.transpose())
}

pub struct ProblemBuilder {
    dim: usize,
    label: String,
    potential: Option<ScalarFn>,
    grad: Option<VectorFn>,
    magnetic: Option<MagneticField>,
    hessian: Option<MatrixFn>,
    invariants: Vec<(String, PhaseFn)>,
    initial: Option<(DVector<f64>, DVector<f64>)>,
}

impl ProblemBuilder {
    fn new(dim: usize) -> ProblemBuilder {
        ProblemBuilder {
            dim,
            label: String::from("custom"),
            potential: None,
            grad: None,
            magnetic: None,
            hessian: None,
            invariants: Vec::new(),
            initial: None,
        }
    }

    pub fn label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn potential(mut self, f: impl Fn(&DVector<f64>) -> f64 + Send + Sync + 'static) -> Self {
        self.potential = Some(Box::new(f));
        self
    }

    pub fn grad_potential(
        mut self,
        f: impl Fn(&DVector<f64>) -> DVector<f64> + Send + Sync + 'static,
    ) -> Self {
        self.grad = Some(Box::new(f));
        self
    }

    pub fn cross_field(
        mut self,
        l: impl Fn(&DVector<f64>) -> DVector<f64> + Send + Sync + 'static,
    ) -> Self {
        self.magnetic = Some(MagneticField::Cross(Box::new(l)));
        self
    }

    pub fn matrix_field(
        mut self,
        b: impl Fn(&DVector<f64>) -> DMatrix<f64> + Send + Sync + 'static,
    ) -> Self {
        self.magnetic = Some(MagneticField::Matrix(Box::new(b)));
        self
    }

    pub fn hessian(
        mut self,
        h: impl Fn(&DVector<f64>) -> DMatrix<f64> + Send + Sync + 'static,
    ) -> Self {
        self.hessian = Some(Box::new(h));
        self
    }

    pub fn invariant(
        mut self,
        name: impl Into<String>,
        f: impl Fn(&DVector<f64>, &DVector<f64>) -> f64 + Send + Sync + 'static,
    ) -> Self {
        self.invariants.push((name.into(), Box::new(f)));
        self
    }

    pub fn initial(mut self, q: Vec<f64>, p: Vec<f64>) -> Self {
        self.initial = Some((DVector::from_vec(q), DVector::from_vec(p)));
        self
    }

    pub fn build(self) -> Result<Problem> {
        if self.dim == 0 {
            return Err(Error::InvalidParameter("dimension must be positive".into()));
        }
        let magnetic = self
            .magnetic
            .ok_or_else(|| Error::InvalidParameter("missing magnetic field".into()))?;
        if matches!(magnetic, MagneticField::Cross(_)) && self.dim != 3 {
            return Err(Error::DimensionMismatch(format!(
                "a cross-product field requires dimension 3, got {}",
                self.dim
            )));
        }
        let potential = self
            .potential
            .ok_or_else(|| Error::InvalidParameter("missing potential".into()))?;
        let grad = self
            .grad
            .ok_or_else(|| Error::InvalidParameter("missing potential gradient".into()))?;
        let (q0, p0) = self
            .initial
            .ok_or_else(|| Error::InvalidParameter("missing initial state".into()))?;
        if q0.len() != self.dim || p0.len() != self.dim {
            return Err(Error::DimensionMismatch(format!(
                "initial state has q in R^{} and p in R^{}, expected R^{}",
                q0.len(),
                p0.len(),
                self.dim
            )));
        }
        Ok(Problem {
            dim: self.dim,
            label: self.label,
            potential,
            grad,
            magnetic,
            hessian: self.hessian,
            invariants: self.invariants,
            initial: State::new(0.0, q0, p0),
        })
    }
}

/// U(q) = q₁³ − q₂³ + q₁⁴/5 + q₂⁴ + q₃⁴ shared by `ex1` and `ex2`.
fn quartic_potential() -> (ScalarFn, VectorFn, MatrixFn) {
    let potential: ScalarFn = Box::new(|q: &DVector<f64>| {
        q[0].powi(3) - q[1].powi(3) + 0.2 * q[0].powi(4) + q[1].powi(4) + q[2].powi(4)
    });
    let grad: VectorFn = Box::new(|q: &DVector<f64>| {
        DVector::from_vec(vec![
            3.0 * q[0] * q[0] + 0.8 * q[0].powi(3),
            -3.0 * q[1] * q[1] + 4.0 * q[1].powi(3),
            4.0 * q[2].powi(3),
        ])
    });
    let hessian: MatrixFn = Box::new(|q: &DVector<f64>| {
        DMatrix::from_diagonal(&DVector::from_vec(vec![
            6.0 * q[0] + 2.4 * q[0] * q[0],
            -6.0 * q[1] + 12.0 * q[1] * q[1],
            12.0 * q[2] * q[2],
        ]))
    });
    (potential, grad, hessian)
}

fn quartic_initial() -> (Vec<f64>, Vec<f64>) {
    (vec![0.0, 1.0, 0.1], vec![0.09, 0.55, 0.3])
}

/// L(q) = (0, 0, √(q₁² + q₂²)).
fn vertical_field(q: &DVector<f64>) -> DVector<f64> {
    DVector::from_vec(vec![0.0, 0.0, (q[0] * q[0] + q[1] * q[1]).sqrt()])
}

fn ex1() -> Problem {
    let (potential, grad, hessian) = quartic_potential();
    let (q0, p0) = quartic_initial();
    Problem {
        dim: 3,
        label: "ex1".into(),
        potential,
        grad,
        magnetic: MagneticField::Cross(Box::new(vertical_field)),
        hessian: Some(hessian),
        invariants: Vec::new(),
        initial: State::new(0.0, DVector::from_vec(q0), DVector::from_vec(p0)),
    }
}

fn ex2() -> Problem {
    let (potential, grad, hessian) = quartic_potential();
    let (q0, p0) = quartic_initial();
    Problem {
        dim: 3,
        label: "ex2".into(),
        potential,
        grad,
        magnetic: MagneticField::Cross(Box::new(|q: &DVector<f64>| {
            0.5 * DVector::from_vec(vec![q[1] - q[2], q[0] + q[2], q[1] - q[0]])
        })),
        hessian: Some(hessian),
        invariants: Vec::new(),
        initial: State::new(0.0, DVector::from_vec(q0), DVector::from_vec(p0)),
    }
}

/// Planar guiding-center problem, kept in R³ with vanishing third
/// components; the angular momentum M is a second invariant.
fn ex3() -> Problem {
    let potential: ScalarFn = Box::new(|q: &DVector<f64>| 0.1 / (q[0] * q[0] + q[1] * q[1]));
    let grad: VectorFn = Box::new(|q: &DVector<f64>| {
        let r2 = q[0] * q[0] + q[1] * q[1];
        let r4 = r2 * r2;
        DVector::from_vec(vec![-0.2 * q[0] / r4, -0.2 * q[1] / r4, 0.0])
    });
    let hessian: MatrixFn = Box::new(|q: &DVector<f64>| {
        let r2 = q[0] * q[0] + q[1] * q[1];
        let r6 = r2 * r2 * r2;
        let mut h = DMatrix::zeros(3, 3);
        h[(0, 0)] = 0.2 * (4.0 * q[0] * q[0] - r2) / r6;
        h[(1, 1)] = 0.2 * (4.0 * q[1] * q[1] - r2) / r6;
        h[(0, 1)] = 0.8 * q[0] * q[1] / r6;
        h[(1, 0)] = h[(0, 1)];
        h
    });
    let angular_momentum: PhaseFn = Box::new(|q: &DVector<f64>, p: &DVector<f64>| {
        let r2 = q[0] * q[0] + q[1] * q[1];
        q[0] * p[1] - q[1] * p[0] - r2.powf(1.5) / 3.0
    });
    Problem {
        dim: 3,
        label: "ex3".into(),
        potential,
        grad,
        magnetic: MagneticField::Cross(Box::new(vertical_field)),
        hessian: Some(hessian),
        invariants: vec![(String::from("M"), angular_momentum)],
        initial: State::new(
            0.0,
            DVector::from_vec(vec![0.0, 1.0, 0.0]),
            DVector::from_vec(vec![0.1, 0.01, 0.0]),
        ),
    }
}

/// Built-in test problems: `ex1`, `ex2`, `ex3`.
pub fn builtin_problem(name: &str) -> Result<Problem> {
    match name {
        "ex1" => Ok(ex1()),
        "ex2" => Ok(ex2()),
        "ex3" => Ok(ex3()),
        other => Err(Error::UnknownProblem(other.into())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vec3(a: f64, b: f64, c: f64) -> DVector<f64> {
        DVector::from_vec(vec![a, b, c])
    }

    #[test]
    fn cross_product_of_unit_axes() {
        let p = vec3(1.0, 0.0, 0.0);
        let l = vec3(0.0, 0.0, 1.0);
        assert_eq!(cross3(&p, &l), vec3(0.0, -1.0, 0.0));
    }

    #[test]
    fn magnetic_force_vanishes_for_zero_momentum() {
        let prob = builtin_problem("ex1").unwrap();
        let f = prob
            .apply_magnetic(&vec3(0.3, -0.2, 1.1), &DVector::zeros(3))
            .unwrap();
        assert_eq!(f, DVector::zeros(3));
    }

    #[test]
    fn ex1_magnetic_force_at_the_initial_point() {
        // L(0, 1, 0.1) = (0, 0, 1), so L × p = (−p₂, p₁, 0).
        let prob = builtin_problem("ex1").unwrap();
        let state = prob.initial_state();
        let f = prob.apply_magnetic(&state.q, &state.p).unwrap();
        assert!((f[0] + 0.55).abs() < 1e-15);
        assert!((f[1] - 0.09).abs() < 1e-15);
        assert!(f[2].abs() < 1e-15);
    }

    #[test]
    fn magnetic_matrix_reproduces_the_cross_product() {
        let prob = builtin_problem("ex2").unwrap();
        let q = vec3(0.7, -0.3, 1.2);
        let p = vec3(-0.4, 0.9, 0.2);
        let by_matrix = prob.magnetic_matrix(&q) * &p;
        let direct = prob.apply_magnetic(&q, &p).unwrap();
        assert!((by_matrix - direct).amax() < 1e-15);
    }

    #[test]
    fn apply_magnetic_rejects_wrong_dimensions() {
        let prob = builtin_problem("ex1").unwrap();
        let err = prob.apply_magnetic(&DVector::zeros(2), &DVector::zeros(3));
        assert!(err.is_err());
    }

    #[test]
    fn hamiltonian_of_initial_states() {
        let ex1 = builtin_problem("ex1").unwrap();
        let h1 = ex1.hamiltonian(&ex1.initial_state());
        assert!((h1 - 0.2004).abs() < 1e-15, "ex1 H0 = {h1}");

        // ½(0.1² + 0.01²) + 1/10 = 0.00505 + 0.1.
        let ex3 = builtin_problem("ex3").unwrap();
        let h3 = ex3.hamiltonian(&ex3.initial_state());
        assert!((h3 - 0.10505).abs() < 1e-15, "ex3 H0 = {h3}");
    }

    #[test]
    fn hamiltonian_is_zero_for_rest_state_and_flat_potential() {
        let prob = Problem::builder(3)
            .potential(|_| 0.0)
            .grad_potential(|_| DVector::zeros(3))
            .cross_field(|_| DVector::zeros(3))
            .initial(vec![0.0; 3], vec![0.0; 3])
            .build()
            .unwrap();
        assert_eq!(prob.hamiltonian(&prob.initial_state()), 0.0);
    }

    #[test]
    fn ex1_gradient_matches_hand_differentiation() {
        let prob = builtin_problem("ex1").unwrap();
        let g = prob.grad_potential(&vec3(0.0, 1.0, 0.1));
        assert!((g[0] - 0.0).abs() < 1e-15);
        assert!((g[1] - 1.0).abs() < 1e-15);
        assert!((g[2] - 0.004).abs() < 1e-15);
    }

    #[test]
    fn ex2_field_matches_hand_substitution() {
        let prob = builtin_problem("ex2").unwrap();
        let l = prob.cross_field(&vec3(1.0, 2.0, 3.0)).unwrap();
        assert_eq!(l, vec3(-0.5, 2.0, 0.5));
    }

    #[test]
    fn ex3_angular_momentum_at_the_initial_state() {
        let prob = builtin_problem("ex3").unwrap();
        let s = prob.initial_state();
        let m = prob.eval_invariants(&s.q, &s.p)[0];
        assert!((m - (-0.1 - 1.0 / 3.0)).abs() < 1e-15, "M = {m}");
    }

    #[test]
    fn unknown_problem_name_is_an_error() {
        assert!(matches!(
            builtin_problem("ex9"),
            Err(Error::UnknownProblem(_))
        ));
    }

    #[test]
    fn builtins_pass_validation() {
        for name in ["ex1", "ex2", "ex3"] {
            builtin_problem(name)
                .unwrap()
                .validate(100, 7)
                .unwrap_or_else(|e| panic!("{name}: {e}"));
        }
    }

    #[test]
    fn magnetic_force_is_orthogonal_to_momentum() {
        let mut rng = StdRng::seed_from_u64(11);
        for name in ["ex1", "ex2", "ex3"] {
            let prob = builtin_problem(name).unwrap();
            let base = prob.initial_state();
            for _ in 0..1000 {
                let q = &base.q + DVector::from_fn(3, |_, _| rng.random_range(-1.0..1.0));
                let p = DVector::from_fn(3, |_, _| rng.random_range(-1.0..1.0));
                let f = prob.apply_magnetic(&q, &p).unwrap();
                assert!(
                    f.dot(&p).abs() <= 1e-12 * p.norm() * f.norm() + f64::MIN_POSITIVE,
                    "{name}: pᵀ(p×L) = {}",
                    f.dot(&p)
                );
            }
        }
    }

    #[test]
    fn energy_derivative_vanishes_along_the_flow() {
        // dH/dt = ∇U·q̇ + p·ṗ = ∇U·p + p·(force − ∇U) = p·force = 0.
        let mut rng = StdRng::seed_from_u64(23);
        for name in ["ex1", "ex2", "ex3"] {
            let prob = builtin_problem(name).unwrap();
            let base = prob.initial_state();
            for _ in 0..200 {
                let q = &base.q + DVector::from_fn(3, |_, _| rng.random_range(-0.5..0.5));
                let p = &base.p + DVector::from_fn(3, |_, _| rng.random_range(-0.5..0.5));
                let grad = prob.grad_potential(&q);
                let force = prob.apply_magnetic(&q, &p).unwrap();
                let dh = grad.dot(&p) + p.dot(&(&force - &grad));
                let scale = grad.norm() * p.norm() + p.norm() * force.norm() + 1.0;
                assert!(dh.abs() <= 1e-12 * scale, "{name}: dH/dt = {dh}");
            }
        }
    }

    #[test]
    fn ex3_angular_momentum_is_a_first_integral_of_the_flow() {
        // Directional derivative of M along (q̇, ṗ) vanishes.
        let prob = builtin_problem("ex3").unwrap();
        let mut rng = StdRng::seed_from_u64(5);
        let base = prob.initial_state();
        for _ in 0..200 {
            let q = &base.q + DVector::from_fn(3, |_, _| rng.random_range(-0.3..0.3));
            let p = &base.p + DVector::from_fn(3, |_, _| rng.random_range(-0.3..0.3));
            let qdot = p.clone();
            let pdot = prob.apply_magnetic(&q, &p).unwrap() - prob.grad_potential(&q);
            let m_at = |eps: f64| prob.eval_invariants(&(&q + eps * &qdot), &(&p + eps * &pdot))[0];
            let eps = 1e-6;
            let dm_dt = (m_at(eps) - m_at(-eps)) / (2.0 * eps);
            assert!(dm_dt.abs() < 1e-7, "dM/dt = {dm_dt}");
        }
    }

    #[test]
    fn matrix_field_skewness_is_enforced_by_validation() {
        let bad = Problem::builder(2)
            .potential(|_| 0.0)
            .grad_potential(|_| DVector::zeros(2))
            .matrix_field(|_| DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]))
            .initial(vec![0.0; 2], vec![0.0; 2])
            .build()
            .unwrap();
        assert!(bad.validate(10, 3).is_err());

        let good = Problem::builder(2)
            .potential(|_| 0.0)
            .grad_potential(|_| DVector::zeros(2))
            .matrix_field(|_| DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]))
            .initial(vec![0.0; 2], vec![0.0; 2])
            .build()
            .unwrap();
        good.validate(10, 3).unwrap();
    }

    #[test]
    fn cross_field_requires_dimension_three() {
        let err = Problem::builder(2)
            .potential(|_| 0.0)
            .grad_potential(|_| DVector::zeros(2))
            .cross_field(|_| DVector::zeros(3))
            .initial(vec![0.0; 2], vec![0.0; 2])
            .build();
        assert!(err.is_err());
    }

    #[test]
    fn fd_hessian_fallback_tracks_the_analytic_one() {
        let with = builtin_problem("ex1").unwrap();
        let without = Problem::builder(3)
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
            .cross_field(vertical_field)
            .initial(vec![0.0, 1.0, 0.1], vec![0.09, 0.55, 0.3])
            .build()
            .unwrap();
        let q = vec3(0.4, -0.7, 0.9);
        let exact = with.hessian_or_fd(&q);
        let fd = without.hessian_or_fd(&q);
        assert!((exact - fd).amax() < 1e-6);
    }
}
