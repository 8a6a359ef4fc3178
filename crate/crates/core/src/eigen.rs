//! Principal eigenpair of `φ = λ T φ`, its a-priori bounds, and sweeps in `α`.
//!
//! `T` maps the positive cone into its interior and is compact, so its
//! spectral radius `r(T)` is a simple eigenvalue strictly dominating the
//! rest of the spectrum and `λ₁ = 1/r(T)`. Power iteration from a strictly
//! positive start therefore converges to the principal pair without
//! deflation.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::grid::{fmt_f64, GridFunction, Grading, Mesh};
use crate::kernel::Order;
use crate::operator::{assemble, OperatorMatrix, WeightFamily};

pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_MAXIT: usize = 10_000;

#[derive(Debug, Clone)]
pub struct EigenResult {
    pub lambda1: f64,
    /// Normalized so that `‖φ₁‖∞ = 1`, nonnegative.
    pub phi1: GridFunction,
    /// `‖λ₁ A φ₁ - φ₁‖∞`
    pub residual: f64,
    pub iterations: usize,
}

/// Power iteration from `e(t) = t^(α-1)(1-t)`.
///
/// Stops once successive `λ` estimates differ by less than `tol·λ` and the
/// eigen-residual is at most `100·tol`.
pub fn principal_eigenpair(a: &OperatorMatrix, tol: f64, maxit: usize) -> Result<EigenResult> {
    let ord = a.order();
    let mesh = a.mesh().clone();
    let mut x: Vec<f64> = mesh.nodes().iter().map(|&t| ord.e(t)).collect();
    normalize_sup(&mut x);
    let mut lambda_prev = f64::NAN;
    let mut last_change = f64::INFINITY;
    for it in 1..=maxit {
        let y = a.mul_slice(&x);
        let r = sup(&y);
        if !(r > 0.0) {
            return Err(Error::hypothesis("weight positivity", "operator annihilates the positive start vector"));
        }
        let lambda = 1.0 / r;
        let residual = y
            .iter()
            .zip(&x)
            .fold(0.0f64, |m, (yi, xi)| m.max((lambda * yi - xi).abs()));
        last_change = (lambda - lambda_prev).abs();
        if last_change < tol * lambda && residual <= 100.0 * tol {
            return Ok(EigenResult {
                lambda1: lambda,
                phi1: GridFunction::new(mesh, x)?,
                residual,
                iterations: it,
            });
        }
        lambda_prev = lambda;
        x = y.into_iter().map(|v| v * lambda).collect();
    }
    Err(Error::NonConvergence {
        iterations: maxit,
        last_change,
        last_iterate: x,
    })
}

fn sup(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

fn normalize_sup(v: &mut [f64]) {
    let s = sup(v);
    if s > 0.0 {
        v.iter_mut().for_each(|x| *x /= s);
    }
}

/// Two-sided a-priori bounds on `λ₁(α)`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct Lambda1Bounds {
    pub lower: f64,
    pub upper: f64,
}

/// ```text
/// α^α Γ(α+1) / ((α-1)^(α-1) ‖h‖∞)  ≤  λ₁(α)  ≤  4 Γ(α) / ((α-1)² ∫₀¹ s^α (1-s)^α h(s) ds)
/// ```
pub fn lambda1_bounds(ord: Order, h: &WeightFamily) -> Result<Lambda1Bounds> {
    h.validate()?;
    let a = ord.value();
    let gamma = statrs::function::gamma::gamma;
    let hsup = h.sup_norm();
    let moment = h.beta_moment(ord);
    if !(moment > 0.0) || !(hsup > 0.0) {
        return Err(Error::hypothesis("weight positivity", "weight has vanishing moment"));
    }
    let lower = a.powf(a) * gamma(a + 1.0) / ((a - 1.0).powf(a - 1.0) * hsup);
    let upper = 4.0 * gamma(a) / ((a - 1.0).powi(2) * moment);
    Ok(Lambda1Bounds { lower, upper })
}

/// Mesh density shared by all rows of a sweep. `grading: None` picks the
/// default grading for each `α`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct MeshSpec {
    pub elements: usize,
    pub grading: Option<Grading>,
}

impl Default for MeshSpec {
    fn default() -> Self {
        MeshSpec {
            elements: 400,
            grading: None,
        }
    }
}

impl MeshSpec {
    pub fn build(&self, ord: Order) -> Result<Mesh> {
        let grading = self
            .grading
            .unwrap_or_else(|| Grading::Graded(crate::grid::default_grading_exponent(ord)));
        Mesh::new(self.elements, grading)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct SweepRow {
    pub alpha: f64,
    pub lambda1: f64,
    pub lower_bound: f64,
    pub upper_bound: f64,
    pub residual: f64,
    pub iterations: usize,
}

pub fn eigen_at(ord: Order, h: &WeightFamily, mesh: &MeshSpec) -> Result<(OperatorMatrix, EigenResult)> {
    let a = assemble(&mesh.build(ord)?, ord, h)?;
    let e = principal_eigenpair(&a, DEFAULT_TOL, DEFAULT_MAXIT)?;
    Ok((a, e))
}

/// `λ₁(α)` for each `α`, sorted by `α`.
pub fn sweep_alpha(alphas: &[Order], h: &WeightFamily, mesh: &MeshSpec) -> Result<Vec<SweepRow>> {
    let mut alphas = alphas.to_vec();
    alphas.sort_by(|a, b| a.value().total_cmp(&b.value()));
    let row = |ord: &Order| -> Result<SweepRow> {
        let (_, e) = eigen_at(*ord, h, mesh)?;
        let b = lambda1_bounds(*ord, h)?;
        Ok(SweepRow {
            alpha: ord.value(),
            lambda1: e.lambda1,
            lower_bound: b.lower,
            upper_bound: b.upper,
            residual: e.residual,
            iterations: e.iterations,
        })
    };
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        alphas.par_iter().map(row).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        alphas.iter().map(row).collect()
    }
}

pub const SWEEP_CSV_HEADER: &str = "alpha,lambda1,lower_bound,upper_bound,residual,iterations";

pub fn sweep_to_csv(rows: &[SweepRow]) -> String {
    let mut out = format!("{SWEEP_CSV_HEADER}\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            fmt_f64(r.alpha),
            fmt_f64(r.lambda1),
            fmt_f64(r.lower_bound),
            fmt_f64(r.upper_bound),
            fmt_f64(r.residual),
            r.iterations
        );
    }
    out
}
