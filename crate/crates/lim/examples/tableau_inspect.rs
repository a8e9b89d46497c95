//! Inspect the constants behind a LIM(k, s) method: quadrature nodes and
//! weights, the X_s matrix, its inverse, and the blended-iteration weight
//! ρ_s, together with the residuals of the defining identities.
//!
//! Run with:
//!   cargo run --example tableau_inspect [k] [s]

use nalgebra::{DMatrix, DVector};

use lim::Tableau;

fn main() {
    let mut args = std::env::args().skip(1);
    let k: usize = args.next().map(|a| a.parse().expect("k")).unwrap_or(6);
    let s: usize = args.next().map(|a| a.parse().expect("s")).unwrap_or(3);

    let tab = match Tableau::build(k, s) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("cannot build tableau: {e}");
            std::process::exit(1);
        }
    };

    println!("LIM({k},{s}) constants\n");
    println!("inner rule ({} points at the zeros of P_{}):", s, s);
    for (c, b) in tab.inner_rule.nodes().iter().zip(tab.inner_rule.weights()) {
        println!("  c = {c:.16}   b = {b:.16}");
    }
    println!("\nouter rule ({} points at the zeros of P_{}):", k, k);
    for (c, b) in tab.outer_rule.nodes().iter().zip(tab.outer_rule.weights()) {
        println!("  c = {c:.16}   b = {b:.16}");
    }

    println!("\nX_s = {:.10}", tab.xs);
    println!("X_s^-1 = {:.10}", tab.xs_inv);
    println!("rho_s = min |eigenvalue(X_s)| = {:.16}", tab.rho_s);

    let omega = DMatrix::from_diagonal(&DVector::from_column_slice(tab.inner_rule.weights()));
    let eye = DMatrix::<f64>::identity(s, s);
    println!("\nidentity residuals (max entry):");
    println!(
        "  P'WP - I        : {:.3e}",
        (tab.phat.transpose() * &omega * &tab.phat - eye).amax()
    );
    println!(
        "  P'W1 - e1       : {:.3e}",
        (tab.phat.transpose() * &omega * DVector::from_element(s, 1.0) - &tab.e1).amax()
    );
    println!(
        "  P'WI - X_s      : {:.3e}",
        (tab.phat.transpose() * &omega * &tab.ihat - &tab.xs).amax()
    );
    println!(
        "  I e1 - nodes    : {:.3e}",
        (&tab.ihat * &tab.e1 - DVector::from_column_slice(tab.inner_rule.nodes())).amax()
    );
    println!(
        "  X_s X_s^-1 - I  : {:.3e}",
        (&tab.xs * &tab.xs_inv - DMatrix::<f64>::identity(s, s)).amax()
    );
}
