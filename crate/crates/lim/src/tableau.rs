//! Per-(k, s) method constants: stage matrices over the Legendre basis and
//! both Gauss rules, built once and shared.
//!
//! With Ω̂ = diag(b̂) and Ω = diag(b), the matrices satisfy
//!
//!   P̂ᵀ Ω̂ P̂ = I,   P̂ᵀ Ω̂ 1 = e₁,   P̂ᵀ Ω̂ Î = X_s = Pᵀ Ω I_s,   Î e₁ = ĉ,
//!
//! where X_s is tridiagonal with X[0,0] = ξ₀, subdiagonal ξ_i, superdiagonal
//! −ξ_i and ξ_i = 1/(2√|4i²−1|). These identities are what the one-step map
//! and the blended preconditioners are built on, so construction cross-checks
//! the closed form against the matrix product before returning.

use std::collections::HashMap;
use std::sync::{Arc, LazyLock, Mutex};

use nalgebra::{Complex, DMatrix, DVector};

use crate::basis::{gauss_rule, legendre_eval, legendre_integral, GaussRule};
use crate::error::{Error, Result};

/// Entry ξ_i = 1/(2√|4i²−1|) of the closed-form X_s.
fn xi(i: usize) -> f64 {
    1.0 / (2.0 * ((4 * i * i) as f64 - 1.0).abs().sqrt())
}

/// Constants of the (k, s) method. Immutable after construction; share via
/// [`Tableau::get`], which memoizes by (k, s).
#[derive(Debug, Clone)]
pub struct Tableau {
    pub s: usize,
    pub k: usize,
    /// s-point rule (ĉ, b̂) at the zeros of P_s.
    pub inner_rule: GaussRule,
    /// k-point rule (c, b) at the zeros of P_k.
    pub outer_rule: GaussRule,
    /// P̂_s: s×s, entry (ℓ, j) = P_j(ĉ_ℓ).
    pub phat: DMatrix<f64>,
    /// Î_s: s×s, entry (ℓ, j) = ∫₀^{ĉ_ℓ} P_j.
    pub ihat: DMatrix<f64>,
    /// P_s: k×s, entry (ℓ, j) = P_j(c_ℓ).
    pub pmat: DMatrix<f64>,
    /// I_s: k×s, entry (ℓ, j) = ∫₀^{c_ℓ} P_j.
    pub imat: DMatrix<f64>,
    /// Closed-form X_s.
    pub xs: DMatrix<f64>,
    pub xs_inv: DMatrix<f64>,
    /// Minimum eigenvalue modulus of X_s, the blended-iteration weight.
    pub rho_s: f64,
    /// First coordinate vector in R^s.
    pub e1: DVector<f64>,

    // Products used by the stage evaluation on every iteration.
    pub(crate) proj_inner: DMatrix<f64>, // Ω̂ P̂  (s×s)
    pub(crate) proj_outer: DMatrix<f64>, // Ω P   (k×s)
    pub(crate) ihat_xs: DMatrix<f64>,    // Î X_s (s×s)
    pub(crate) imat_xs: DMatrix<f64>,    // I_s X_s (k×s)
    pub(crate) xs_inv2: DMatrix<f64>,    // X_s^{-2}
}

type TableauCache = Mutex<HashMap<(usize, usize), Arc<Tableau>>>;

static CACHE: LazyLock<TableauCache> = LazyLock::new(|| Mutex::new(HashMap::new()));

impl Tableau {
    /// Build the (k, s) tableau from scratch. Prefer [`Tableau::get`] in
    /// integration loops.
    pub fn build(k: usize, s: usize) -> Result<Tableau> {
        if s < 2 {
            return Err(Error::InvalidParameter(format!(
                "the position update involves the first two stage blocks, so s >= 2 is required (got s = {s})"
            )));
        }
        if k < s {
            return Err(Error::InvalidParameter(format!(
                "the outer rule must be at least as fine as the stage count: k >= s (got k = {k}, s = {s})"
            )));
        }

        let inner_rule = gauss_rule(s)?;
        let outer_rule = gauss_rule(k)?;

        let phat = DMatrix::from_fn(s, s, |l, j| legendre_eval(j, inner_rule.nodes()[l]));
        let ihat = DMatrix::from_fn(s, s, |l, j| legendre_integral(j, inner_rule.nodes()[l]));
        let pmat = DMatrix::from_fn(k, s, |l, j| legendre_eval(j, outer_rule.nodes()[l]));
        let imat = DMatrix::from_fn(k, s, |l, j| legendre_integral(j, outer_rule.nodes()[l]));

        let mut xs = DMatrix::zeros(s, s);
        xs[(0, 0)] = xi(0);
        for i in 1..s {
            xs[(i, i - 1)] = xi(i);
            xs[(i - 1, i)] = -xi(i);
        }

        let proj_inner = {
            let mut m = phat.clone();
            for l in 0..s {
                m.row_mut(l).scale_mut(inner_rule.weights()[l]);
            }
            m
        };
        let proj_outer = {
            let mut m = pmat.clone();
            for l in 0..k {
                m.row_mut(l).scale_mut(outer_rule.weights()[l]);
            }
            m
        };

        // Cross-check the closed form against both discrete products.
        let from_inner = proj_inner.transpose() * &ihat;
        let from_outer = proj_outer.transpose() * &imat;
        let check = |name: &str, m: &DMatrix<f64>| -> Result<()> {
            let dev = (m - &xs).amax();
            if dev > 1e-12 {
                return Err(Error::TableauCheck {
                    k,
                    s,
                    detail: format!("{name} deviates from the closed-form X_s by {dev:.3e}"),
                });
            }
            Ok(())
        };
        check("inner product P̂ᵀΩ̂Î", &from_inner)?;
        check("outer product PᵀΩI", &from_outer)?;

        let xs_inv = xs
            .clone()
            .lu()
            .try_inverse()
            .ok_or_else(|| Error::TableauCheck {
                k,
                s,
                detail: "X_s is singular".into(),
            })?;
        let xs_inv2 = &xs_inv * &xs_inv;

        let rho_s =
            min_modulus_eigenvalue(&xs).map_err(|detail| Error::TableauCheck { k, s, detail })?;

        let mut e1 = DVector::zeros(s);
        e1[0] = 1.0;

        let ihat_xs = &ihat * &xs;
        let imat_xs = &imat * &xs;

        Ok(Tableau {
            s,
            k,
            inner_rule,
            outer_rule,
            phat,
            ihat,
            pmat,
            imat,
            xs,
            xs_inv,
            rho_s,
            e1,
            proj_inner,
            proj_outer,
            ihat_xs,
            imat_xs,
            xs_inv2,
        })
    }

    /// Shared, memoized tableau for (k, s). Construction runs at most once
    /// per pair; the result is immutable and safe to use from many threads.
    pub fn get(k: usize, s: usize) -> Result<Arc<Tableau>> {
        let mut cache = CACHE.lock().expect("tableau cache poisoned");
        if let Some(t) = cache.get(&(k, s)) {
            return Ok(Arc::clone(t));
        }
        let built = Arc::new(Tableau::build(k, s)?);
        cache.insert((k, s), Arc::clone(&built));
        Ok(built)
    }
}

/// Smallest |λ| over the spectrum of `m`, with the chosen eigenvalue verified
/// by an inverse-iteration eigenvector residual.
fn min_modulus_eigenvalue(m: &DMatrix<f64>) -> std::result::Result<f64, String> {
    let eigs = m.complex_eigenvalues();
    let lambda = eigs
        .iter()
        .copied()
        .min_by(|a, b| a.norm().total_cmp(&b.norm()))
        .ok_or_else(|| "empty spectrum".to_string())?;

    let s = m.nrows();
    let mc = m.map(|v| Complex::new(v, 0.0));
    let shifted = &mc - DMatrix::<Complex<f64>>::identity(s, s) * lambda;
    let mut v = DVector::<Complex<f64>>::from_fn(s, |i, _| Complex::new(1.0, 0.3 + i as f64));
    v /= Complex::new(v.norm(), 0.0);
    for _ in 0..3 {
        // The computed λ is a rounded eigenvalue, so the shifted matrix is
        // invertible in floating point; fall back to a tiny diagonal nudge
        // if the factorization still breaks down.
        let solved = shifted
            .clone()
            .lu()
            .solve(&v)
            .or_else(|| {
                let nudged =
                    &shifted + DMatrix::<Complex<f64>>::identity(s, s) * Complex::new(1e-14, 0.0);
                nudged.lu().solve(&v)
            })
            .ok_or_else(|| "inverse iteration broke down".to_string())?;
        v = &solved / Complex::new(solved.norm(), 0.0);
    }
    let residual = (&mc * &v - &v * lambda).norm();
    if residual > 1e-10 * (1.0 + m.amax()) {
        return Err(format!(
            "eigenpair residual {residual:.3e} too large for λ = {lambda}"
        ));
    }
    Ok(lambda.norm())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn omega(rule: &GaussRule) -> DMatrix<f64> {
        DMatrix::from_diagonal(&DVector::from_column_slice(rule.weights()))
    }

    #[test]
    fn xs_closed_form_for_s2() {
        let t = Tableau::build(4, 2).unwrap();
        let r3 = 3f64.sqrt();
        assert!((t.xs[(0, 0)] - 0.5).abs() < 1e-15);
        assert!((t.xs[(0, 1)] + 1.0 / (2.0 * r3)).abs() < 1e-15);
        assert!((t.xs[(1, 0)] - 1.0 / (2.0 * r3)).abs() < 1e-15);
        assert!(t.xs[(1, 1)].abs() < 1e-15);
    }

    #[test]
    fn rho_for_s2_is_half_inverse_sqrt3() {
        // The 2×2 X_s has a complex-conjugate pair with |λ|² = det = 1/12,
        // by the characteristic-polynomial oracle.
        let t = Tableau::build(4, 2).unwrap();
        assert!((t.rho_s - 1.0 / (2.0 * 3f64.sqrt())).abs() < 1e-14);
    }

    #[test]
    fn discrete_product_matches_closed_form_for_6_3() {
        let t = Tableau::build(6, 3).unwrap();
        let prod = t.phat.transpose() * omega(&t.inner_rule) * &t.ihat;
        assert!((prod - &t.xs).amax() < 1e-12);
    }

    #[test]
    fn tableau_identities_hold_over_the_parameter_grid() {
        for s in 2..=8usize {
            for k in s..=(2 * s + 4) {
                let t = Tableau::build(k, s).unwrap();
                let omh = omega(&t.inner_rule);
                let om = omega(&t.outer_rule);
                let eye = DMatrix::<f64>::identity(s, s);

                let orth = t.phat.transpose() * &omh * &t.phat;
                assert!(
                    (orth - &eye).amax() < 1e-12,
                    "(k={k}, s={s}) orthonormality"
                );

                let ones = DVector::from_element(s, 1.0);
                let proj1 = t.phat.transpose() * &omh * ones;
                assert!((proj1 - &t.e1).amax() < 1e-12, "(k={k}, s={s}) e1 identity");

                let x_inner = t.phat.transpose() * &omh * &t.ihat;
                assert!((x_inner - &t.xs).amax() < 1e-12, "(k={k}, s={s}) inner X_s");
                let x_outer = t.pmat.transpose() * &om * &t.imat;
                assert!((x_outer - &t.xs).amax() < 1e-12, "(k={k}, s={s}) outer X_s");

                let chat = DVector::from_column_slice(t.inner_rule.nodes());
                assert!(
                    (&t.ihat * &t.e1 - chat).amax() < 1e-13,
                    "(k={k}, s={s}) Î e1 = ĉ"
                );
                let c = DVector::from_column_slice(t.outer_rule.nodes());
                assert!(
                    (&t.imat * &t.e1 - c).amax() < 1e-13,
                    "(k={k}, s={s}) I e1 = c"
                );

                let inv = &t.xs * &t.xs_inv;
                assert!((inv - &eye).amax() < 1e-12, "(k={k}, s={s}) X_s inverse");

                assert!(t.rho_s > 0.0);
            }
        }
    }

    #[test]
    fn rejects_s_below_two_and_k_below_s() {
        assert!(Tableau::build(4, 1).is_err());
        assert!(Tableau::build(2, 3).is_err());
    }

    #[test]
    fn cache_returns_the_same_instance() {
        let a = Tableau::get(6, 3).unwrap();
        let b = Tableau::get(6, 3).unwrap();
        assert!(Arc::ptr_eq(&a, &b));
    }

    #[test]
    fn gamma_reconstruction_is_exact_for_low_degree_polynomials() {
        // Σ_ℓ b̂_ℓ P_i(ĉ_ℓ) v(ĉ_ℓ) reproduces ∫₀¹ P_i v exactly for
        // deg v <= s and i < s; the 64-point rule is the oracle.
        let oracle = gauss_rule(64).unwrap();
        let mut seed = 0x9e3779b97f4a7c15u64;
        let mut next = move || {
            seed = seed
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            (seed >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
        };
        for s in 2..=6usize {
            let t = Tableau::build(s, s).unwrap();
            let coeffs: Vec<f64> = (0..=s).map(|_| next()).collect();
            let v = |x: f64| {
                coeffs
                    .iter()
                    .enumerate()
                    .map(|(d, &a)| a * x.powi(d as i32))
                    .sum::<f64>()
            };
            for i in 0..s {
                let discrete: f64 = t
                    .inner_rule
                    .nodes()
                    .iter()
                    .zip(t.inner_rule.weights())
                    .map(|(&x, &w)| w * legendre_eval(i, x) * v(x))
                    .sum();
                let exact = oracle.integrate(|x| legendre_eval(i, x) * v(x));
                assert!(
                    (discrete - exact).abs() < 1e-11,
                    "s={s}, i={i}: {discrete} vs {exact}"
                );
            }
        }
    }

    #[test]
    fn outer_rule_reproduces_gradient_projections_for_polynomial_potentials() {
        // For deg U <= 2k/s and u ∈ Π_s, the k-point rule reproduces
        // ∫₀¹ P_i(c) U'(u(c)) dc exactly for i < s.
        let oracle = gauss_rule(64).unwrap();
        for (k, s) in [(4usize, 2usize), (6, 3), (6, 2)] {
            let nu = 2 * k / s;
            // U(y) = y^nu, u(c) = c^s + 0.3 c - 0.1.
            let du = |y: f64| (nu as f64) * y.powi(nu as i32 - 1);
            let u = |c: f64| c.powi(s as i32) + 0.3 * c - 0.1;
            let t = Tableau::build(k, s).unwrap();
            for i in 0..s {
                let discrete: f64 = t
                    .outer_rule
                    .nodes()
                    .iter()
                    .zip(t.outer_rule.weights())
                    .map(|(&c, &w)| w * legendre_eval(i, c) * du(u(c)))
                    .sum();
                let exact = oracle.integrate(|c| legendre_eval(i, c) * du(u(c)));
                assert!(
                    (discrete - exact).abs() < 1e-11,
                    "k={k}, s={s}, i={i}: {discrete} vs {exact}"
                );
            }
        }
    }
}
