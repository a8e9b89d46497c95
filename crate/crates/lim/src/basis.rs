//! Shifted orthonormal Legendre polynomials on [0, 1] and Gauss–Legendre
//! quadrature rules built on their zeros.
//!
//! The basis {P_j} satisfies ∫₀¹ P_i(x) P_j(x) dx = δ_ij with positive
//! leading coefficients. It is obtained from the standard Legendre
//! polynomials L_j on [-1, 1] via P_j(x) = √(2j+1) · L_j(2x − 1).

use crate::error::{Error, Result};

/// Largest supported quadrature rule.
pub const MAX_RULE_SIZE: usize = 64;

/// Standard Legendre polynomial L_n(t) on [-1, 1] by three-term recurrence.
/// Returns (L_n, L_{n-1}); L_{-1} is reported as 0.
fn legendre_std_pair(n: usize, t: f64) -> (f64, f64) {
    if n == 0 {
        return (1.0, 0.0);
    }
    let mut prev = 1.0; // L_0
    let mut cur = t; // L_1
    for j in 1..n {
        let next = (((2 * j + 1) as f64) * t * cur - (j as f64) * prev) / ((j + 1) as f64);
        prev = cur;
        cur = next;
    }
    (cur, prev)
}

/// Derivative L_n'(t) for |t| < 1, from the pair (L_n, L_{n-1}).
fn legendre_std_deriv(n: usize, t: f64, ln: f64, ln_prev: f64) -> f64 {
    (n as f64) * (t * ln - ln_prev) / (t * t - 1.0)
}

/// Value of the shifted orthonormal polynomial P_j at x ∈ [0, 1].
pub fn legendre_eval(j: usize, x: f64) -> f64 {
    let t = 2.0 * x - 1.0;
    ((2 * j + 1) as f64).sqrt() * legendre_std_pair(j, t).0
}

/// ∫₀^c P_j(x) dx.
///
/// For j ≥ 1 this uses ∫ L_j = (L_{j+1} − L_{j−1}) / (2j+1), whose value at
/// the lower end t = −1 vanishes, so only the upper end contributes.
pub fn legendre_integral(j: usize, c: f64) -> f64 {
    if j == 0 {
        return c;
    }
    let t = 2.0 * c - 1.0;
    let (next, _) = legendre_std_pair(j + 1, t);
    let (prev, _) = legendre_std_pair(j - 1, t);
    (next - prev) / (2.0 * ((2 * j + 1) as f64).sqrt())
}

/// Gauss–Legendre rule on [0, 1]: ∫₀¹ f ≈ Σ_ℓ weights[ℓ] · f(nodes[ℓ]).
///
/// Nodes are the n zeros of P_n in strictly ascending order; they satisfy
/// nodes[ℓ] + nodes[n−1−ℓ] = 1 exactly by construction, and the matching
/// weights are equal.
#[derive(Debug, Clone)]
pub struct GaussRule {
    n: usize,
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussRule {
    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Apply the rule to a scalar function on [0, 1].
    pub fn integrate<F: FnMut(f64) -> f64>(&self, mut f: F) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }
}

/// Build the n-point Gauss–Legendre rule on [0, 1], 1 ≤ n ≤ 64.
///
/// Roots are refined by Newton iteration on L_n over [-1, 1], starting from
/// the classical interlacing guesses cos(π(i + 3/4)/(n + 1/2)). Only the
/// upper half is computed; the lower half is mirrored so the symmetry
/// ĉ_ℓ = 1 − ĉ_{n−ℓ+1} holds to the last bit.
pub fn gauss_rule(n: usize) -> Result<GaussRule> {
    if !(1..=MAX_RULE_SIZE).contains(&n) {
        return Err(Error::InvalidParameter(format!(
            "rule size must satisfy 1 <= n <= {MAX_RULE_SIZE}, got {n}"
        )));
    }

    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];

    for i in 0..n / 2 {
        // i-th largest root of L_n on (-1, 1).
        let mut t = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut converged = false;
        let mut pair = legendre_std_pair(n, t);
        for _ in 0..100 {
            let deriv = legendre_std_deriv(n, t, pair.0, pair.1);
            let dt = pair.0 / deriv;
            t -= dt;
            pair = legendre_std_pair(n, t);
            if dt.abs() <= 4.0 * f64::EPSILON * (1.0 + t.abs()) {
                converged = true;
                break;
            }
        }
        let deriv = legendre_std_deriv(n, t, pair.0, pair.1);
        // A correctly located root leaves |L_n(t)| at the |L_n'|·ulp level.
        if !converged || pair.0.abs() > 1e-13 * (1.0 + deriv.abs()) {
            return Err(Error::RootRefinement {
                n,
                detail: format!("residual {:e} at node index {i}", pair.0.abs()),
            });
        }
        let w = 1.0 / ((1.0 - t * t) * deriv * deriv);
        let c_hi = 0.5 * (1.0 + t);
        nodes[n - 1 - i] = c_hi;
        nodes[i] = 1.0 - c_hi;
        weights[n - 1 - i] = w;
        weights[i] = w;
    }

    if n % 2 == 1 {
        let mid = n / 2;
        let deriv = {
            let pair = legendre_std_pair(n, 0.0);
            legendre_std_deriv(n, 0.0, pair.0, pair.1)
        };
        nodes[mid] = 0.5;
        weights[mid] = 1.0 / (deriv * deriv);
    }

    Ok(GaussRule { n, nodes, weights })
}
