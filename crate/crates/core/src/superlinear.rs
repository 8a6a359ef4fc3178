//! Superlinear regime: Newton's method on `F(u) = u - T f(|u|)`,
//! nondegeneracy of a solution, and continuation of solutions in `α`.
//!
//! Existence in this regime comes from a degree argument that gives no
//! algorithm, so solutions are located from a deliberate initial guess: a
//! multiple of `φ₁` whose amplitude is picked by a coarse sweep so that the
//! start sits outside the basin of the trivial solution.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{fmt_f64, GridFunction};
use crate::kernel::Order;
use crate::operator::{KernelMatrix, NonlinearityFamily, OperatorMatrix, WeightFamily};

/// Jacobians whose LU pivot ratio exceeds this are treated as singular.
pub const CONDITION_LIMIT: f64 = 1e14;
pub const MAX_HALVINGS: usize = 30;
/// Relative nondegeneracy cutoff: `margin < REL_THRESHOLD·‖I - L_u‖₂`.
pub const REL_THRESHOLD: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct NewtonReport {
    pub solution: GridFunction,
    /// `‖F(u)‖∞`
    pub residual: f64,
    pub iterations: usize,
    /// Residual below tolerance and the limit is positive at interior nodes.
    pub converged: bool,
    /// Whether every interior value is positive; a small limit usually
    /// means Newton fell into the trivial solution.
    pub positive: bool,
}

fn sup(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

fn positive_interior(v: &[f64]) -> bool {
    let n = v.len();
    n > 2 && v[1..n - 1].iter().all(|x| *x > 0.0)
}

/// `F(u) = u - A f(|u|)`.
pub fn residual_vector(op: &OperatorMatrix, f: &NonlinearityFamily, u: &[f64]) -> Vec<f64> {
    let tu = op.nonlinear_slice(f, u);
    u.iter().zip(tu).map(|(a, b)| a - b).collect()
}

/// `J(u) = I - W·diag(h·f'(|u|)·sgn u)`.
pub fn jacobian(op: &OperatorMatrix, f: &NonlinearityFamily, u: &[f64]) -> DMatrix<f64> {
    let d: Vec<f64> = u
        .iter()
        .zip(op.weight_nodal())
        .map(|(&v, &h)| if v == 0.0 { h * f.derivative(0.0) } else { h * f.derivative(v.abs()) * v.signum() })
        .map(|x| if x.is_finite() { x } else { 0.0 })
        .collect();
    let mut j = -op.kernel().scaled_columns(&d);
    for i in 0..j.nrows() {
        j[(i, i)] += 1.0;
    }
    j
}

fn newton_step(j: DMatrix<f64>, rhs: &[f64]) -> Result<Vec<f64>> {
    let lu = j.lu();
    let diag = lu.u().diagonal();
    let (lo, hi) = diag
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), d| (lo.min(d.abs()), hi.max(d.abs())));
    let cond = if lo > 0.0 { hi / lo } else { f64::INFINITY };
    if !(cond <= CONDITION_LIMIT) {
        return Err(Error::Degenerate(format!("Jacobian condition estimate {cond:e}")));
    }
    let x = lu
        .solve(&DVector::from_column_slice(rhs))
        .ok_or_else(|| Error::Degenerate("singular Jacobian".into()))?;
    Ok(x.iter().copied().collect())
}

/// Damped Newton iteration from `u0`.
///
/// Each step is halved (at most [`MAX_HALVINGS`] times) until the residual
/// decreases. Reaching a non-positive limit is reported, not raised.
pub fn newton_solve(
    op: &OperatorMatrix,
    f: &NonlinearityFamily,
    u0: &GridFunction,
    tol: f64,
    maxit: usize,
) -> Result<NewtonReport> {
    f.validate()?;
    op.check_mesh(u0)?;
    if !(tol > 0.0) {
        return Err(Error::Config(format!("tolerance must be positive, got {tol}")));
    }
    let mut u = u0.values().to_vec();
    let mut r = residual_vector(op, f, &u);
    let mut rn = sup(&r);
    let mut it = 0;
    while rn >= tol {
        if it == maxit {
            return Err(Error::NonConvergence {
                iterations: maxit,
                last_change: rn,
                last_iterate: u,
            });
        }
        it += 1;
        let neg: Vec<f64> = r.iter().map(|x| -x).collect();
        let step = newton_step(jacobian(op, f, &u), &neg)?;
        let mut theta = 1.0;
        let mut accepted = None;
        for _ in 0..=MAX_HALVINGS {
            let cand: Vec<f64> = u.iter().zip(&step).map(|(a, s)| a + theta * s).collect();
            let rc = residual_vector(op, f, &cand);
            let rcn = sup(&rc);
            if rcn < rn {
                accepted = Some((cand, rc, rcn));
                break;
            }
            theta *= 0.5;
        }
        match accepted {
            Some((cand, rc, rcn)) => {
                u = cand;
                r = rc;
                rn = rcn;
            }
            None => {
                return Err(Error::NonConvergence {
                    iterations: it,
                    last_change: rn,
                    last_iterate: u,
                })
            }
        }
    }
    let positive = positive_interior(&u);
    Ok(NewtonReport {
        solution: GridFunction::new(op.mesh().clone(), u)?,
        residual: rn,
        iterations: it,
        converged: positive,
        positive,
    })
}

/// Amplitude `c` minimizing `‖cφ - T f(cφ)‖∞ / ‖cφ‖∞` over a log grid.
pub fn sweep_amplitude(op: &OperatorMatrix, f: &NonlinearityFamily, shape: &GridFunction, lo: f64, hi: f64, points: usize) -> Result<f64> {
    op.check_mesh(shape)?;
    let s = shape.sup_norm();
    if !(s > 0.0) || !(lo > 0.0 && hi > lo) || points < 2 {
        return Err(Error::Config("amplitude sweep needs a nonzero shape and 0 < lo < hi".into()));
    }
    let (a, b) = (lo.ln(), hi.ln());
    let mut best = (f64::INFINITY, lo);
    for k in 0..points {
        let c = (a + (b - a) * k as f64 / (points - 1) as f64).exp();
        let u: Vec<f64> = shape.values().iter().map(|v| c * v).collect();
        let rel = sup(&residual_vector(op, f, &u)) / (c * s);
        if rel < best.0 {
            best = (rel, c);
        }
    }
    Ok(best.1)
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct NondegeneracyReport {
    /// Smallest singular value of `I - L_u`.
    pub margin: f64,
    /// Largest singular value of `I - L_u`.
    pub norm: f64,
    pub threshold: f64,
    pub degenerate: bool,
}

/// `L_u = W·diag(h·f'(u))` on `u`'s mesh; `threshold` defaults to
/// `REL_THRESHOLD·‖I - L_u‖₂`.
pub fn nondegeneracy(
    op: &OperatorMatrix,
    f: &NonlinearityFamily,
    u: &GridFunction,
    threshold: Option<f64>,
) -> Result<NondegeneracyReport> {
    op.check_mesh(u)?;
    let j = jacobian(op, f, u.values());
    let sv = j.singular_values();
    let margin = sv.min();
    let norm = sv.max();
    let threshold = threshold.unwrap_or(REL_THRESHOLD * norm);
    Ok(NondegeneracyReport {
        margin,
        norm,
        threshold,
        degenerate: margin < threshold,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceStatus {
    Completed,
    HaltedDegenerate,
    HaltedDiverged,
}

#[derive(Debug, Clone, Serialize)]
pub struct TraceStep {
    pub alpha: f64,
    pub residual: f64,
    pub margin: f64,
    pub threshold: f64,
    pub newton_iterations: usize,
    pub sup_norm: f64,
    #[serde(skip)]
    pub solution: GridFunction,
}

#[derive(Debug, Clone)]
pub struct ContinuationTrace {
    pub steps: Vec<TraceStep>,
    pub status: TraceStatus,
    /// Why the trace stopped early, if it did.
    pub halt_reason: Option<String>,
}

#[derive(Serialize)]
struct StepLine<'a> {
    step: usize,
    #[serde(flatten)]
    data: &'a TraceStep,
    profile: &'a [f64],
}

impl ContinuationTrace {
    pub fn last(&self) -> &TraceStep {
        self.steps.last().expect("a trace holds at least its start")
    }

    /// One JSON record per accepted step, profile included.
    pub fn to_json_lines(&self) -> String {
        let mut out = String::new();
        for (k, s) in self.steps.iter().enumerate() {
            let line = StepLine {
                step: k,
                data: s,
                profile: s.solution.values(),
            };
            out.push_str(&serde_json::to_string(&line).expect("plain data serializes"));
            out.push('\n');
        }
        out
    }

    /// `max ‖u(α_{i+1}) - u(α_i)‖∞ / |α_{i+1} - α_i|` over the trace.
    pub fn lipschitz_estimate(&self) -> f64 {
        self.steps
            .windows(2)
            .map(|w| {
                let d = w[0].solution.sup_distance(&w[1].solution).unwrap_or(f64::INFINITY);
                d / (w[1].alpha - w[0].alpha).abs()
            })
            .fold(0.0, f64::max)
    }

    /// Final profile as CSV (`t,value`).
    pub fn final_profile_csv(&self) -> String {
        self.last().solution.to_csv()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ContinuationOptions {
    pub initial_step: f64,
    pub min_step: f64,
    pub tol: f64,
    pub maxit: usize,
    /// A corrected solution farther than `max_jump·‖u_prev‖∞` from the
    /// predictor counts as a failed corrector (likely a branch switch).
    pub max_jump: f64,
}

impl Default for ContinuationOptions {
    fn default() -> Self {
        ContinuationOptions {
            initial_step: 0.005,
            min_step: 1e-5,
            tol: 1e-10,
            maxit: 50,
            max_jump: 0.25,
        }
    }
}

fn operator_at(alpha: f64, mesh: &Arc<crate::grid::Mesh>, h: &WeightFamily) -> Result<OperatorMatrix> {
    let ord = Order::new(alpha)?;
    OperatorMatrix::from_kernel(Arc::new(KernelMatrix::assemble(mesh.clone(), ord)), h)
}

/// Order-0 predictor / Newton corrector continuation from `start` (a
/// solution at order `alpha0`) toward `target_alpha` on `start`'s mesh.
pub fn continue_alpha(
    start: &NewtonReport,
    alpha0: f64,
    h: &WeightFamily,
    f: &NonlinearityFamily,
    target_alpha: f64,
    opts: &ContinuationOptions,
) -> Result<ContinuationTrace> {
    if !start.converged {
        return Err(Error::Config("continuation needs a converged positive start".into()));
    }
    if !(opts.initial_step > 0.0 && opts.min_step > 0.0 && opts.min_step <= opts.initial_step) {
        return Err(Error::Config("need 0 < min_step <= initial_step".into()));
    }
    Order::new(target_alpha)?;
    let mesh = start.solution.mesh().clone();
    let op0 = operator_at(alpha0, &mesh, h)?;
    let nd = nondegeneracy(&op0, f, &start.solution, None)?;
    if nd.degenerate {
        return Err(Error::Degenerate(format!(
            "start at alpha = {alpha0} has margin {:e} below {:e}",
            nd.margin, nd.threshold
        )));
    }
    let mut steps = vec![TraceStep {
        alpha: alpha0,
        residual: start.residual,
        margin: nd.margin,
        threshold: nd.threshold,
        newton_iterations: start.iterations,
        sup_norm: start.solution.sup_norm(),
        solution: start.solution.clone(),
    }];
    let dir = (target_alpha - alpha0).signum();
    let mut step = opts.initial_step;
    let mut alpha = alpha0;

    while (target_alpha - alpha) * dir > 1e-14 {
        let next = if (target_alpha - alpha).abs() <= step * (1.0 + 1e-9) {
            target_alpha
        } else {
            alpha + dir * step
        };
        let prev = &steps.last().expect("nonempty").solution;
        let op = operator_at(next, &mesh, h)?;
        let attempt = newton_solve(&op, f, prev, opts.tol, opts.maxit);
        let ok = match &attempt {
            Ok(r) => {
                r.converged
                    && r.solution.sup_distance(prev)? <= opts.max_jump * prev.sup_norm()
            }
            Err(_) => false,
        };
        if !ok {
            step *= 0.5;
            if step < opts.min_step {
                let reason = match attempt {
                    Err(e) => e.to_string(),
                    Ok(r) if !r.positive => "corrector reached a non-positive limit".into(),
                    Ok(_) => "corrector jumped away from the predictor".into(),
                };
                return Ok(ContinuationTrace {
                    steps,
                    status: TraceStatus::HaltedDiverged,
                    halt_reason: Some(format!("step below {:e} near alpha = {next}: {reason}", opts.min_step)),
                });
            }
            continue;
        }
        let r = attempt.expect("checked above");
        let nd = nondegeneracy(&op, f, &r.solution, None)?;
        if nd.degenerate {
            return Ok(ContinuationTrace {
                steps,
                status: TraceStatus::HaltedDegenerate,
                halt_reason: Some(format!(
                    "margin {} below {} at alpha = {next}",
                    fmt_f64(nd.margin),
                    fmt_f64(nd.threshold)
                )),
            });
        }
        steps.push(TraceStep {
            alpha: next,
            residual: r.residual,
            margin: nd.margin,
            threshold: nd.threshold,
            newton_iterations: r.iterations,
            sup_norm: r.solution.sup_norm(),
            solution: r.solution,
        });
        alpha = next;
    }
    Ok(ContinuationTrace {
        steps,
        status: TraceStatus::Completed,
        halt_reason: None,
    })
}
