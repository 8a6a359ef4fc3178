//! Inverse-iteration oracle for the principal eigenvalue, independent of the
//! power iteration in the library.
//!
//! The shift `σ = 1/lower_bound` lies above the spectral radius `r`, and every
//! other eigenvalue has modulus below `r`, so `r` is the eigenvalue nearest
//! to `σ` and inverse iteration converges to it.

use fracbvp::eigen::{lambda1_bounds, principal_eigenpair, DEFAULT_MAXIT, DEFAULT_TOL};
use fracbvp::grid::{Grading, Mesh};
use fracbvp::kernel::Order;
use fracbvp::operator::{assemble, OperatorMatrix, WeightFamily};
use nalgebra::{DMatrix, DVector};

fn inverse_iteration(a: &OperatorMatrix, shift: f64) -> f64 {
    let n = a.dim();
    let m = a.entries() - DMatrix::<f64>::identity(n, n) * shift;
    let lu = m.lu();
    let mut x = DVector::from_element(n, 1.0);
    let mut mu = 0.0;
    for _ in 0..200 {
        let y = lu.solve(&x).expect("shifted operator is invertible");
        let k = y.iter().cloned().fold(0.0f64, |m, v| if v.abs() > m.abs() { v } else { m });
        let mu_new = shift + 1.0 / k;
        x = y / k;
        if (mu_new - mu).abs() < 1e-15 * mu_new.abs() {
            return 1.0 / mu_new;
        }
        mu = mu_new;
    }
    1.0 / mu
}

fn oracle_lambda1(alpha: f64, n: usize, grading: Grading) -> f64 {
    let ord = Order::new(alpha).unwrap();
    let h = WeightFamily::Constant(1.0);
    let a = assemble(&Mesh::new(n, grading).unwrap(), ord, &h).unwrap();
    let lower = lambda1_bounds(ord, &h).unwrap().lower;
    inverse_iteration(&a, 1.0 / lower)
}

/// `λ₁(1.5)` for `h ≡ 1` from the oracle at 2000 graded elements (q = 3).
const LAMBDA1_ALPHA_1_5: f64 = 5.075_429_880_462_301;

#[test]
#[ignore = "regenerates the frozen golden (slow)"]
fn print_golden() {
    for n in [500, 1000, 2000] {
        println!("n={n}: {:.16e}", oracle_lambda1(1.5, n, Grading::Graded(3.0)));
    }
}

#[test]
fn power_iteration_agrees_with_oracle_on_same_matrix() {
    for &alpha in &[1.25, 1.5, 2.0] {
        let ord = Order::new(alpha).unwrap();
        let a = assemble(&Mesh::new(300, Grading::Graded(2.0)).unwrap(), ord, &WeightFamily::Constant(1.0)).unwrap();
        let power = principal_eigenpair(&a, DEFAULT_TOL, DEFAULT_MAXIT).unwrap().lambda1;
        let oracle = oracle_lambda1(alpha, 300, Grading::Graded(2.0));
        assert!((power - oracle).abs() < 1e-9 * oracle, "alpha={alpha}: {power} vs {oracle}");
    }
}

#[test]
fn alpha_one_and_a_half_golden() {
    let ord = Order::new(1.5).unwrap();
    let a = assemble(&Mesh::new(800, Grading::Graded(3.0)).unwrap(), ord, &WeightFamily::Constant(1.0)).unwrap();
    let power = principal_eigenpair(&a, DEFAULT_TOL, DEFAULT_MAXIT).unwrap().lambda1;
    assert!((power - LAMBDA1_ALPHA_1_5).abs() < 1e-6 * LAMBDA1_ALPHA_1_5, "{power}");
}
