//! Sublinear regime: `lim f(s)/s` at `0⁺` above `λ₁`, at `∞` below it.
//!
//! The pair `δφ₁ ≤ Mφ₁` is a sub/super-solution bracket for the fixed-point
//! map `u ↦ T f(u)`. For nondecreasing `f` the map is order preserving, so
//! iterating from either end gives monotone sequences trapped in the bracket.
//! When both limits coincide the positive fixed point in the bracket is
//! unique up to the tolerance, which is the computational counterpart of
//! uniqueness for strictly increasing `f` with `f(s)/s` strictly decreasing.

use crate::eigen::EigenResult;
use crate::error::{Error, Result};
use crate::grid::GridFunction;
use crate::operator::{NonlinearityFamily, OperatorMatrix};

/// Largest `M` tried by the doubling search.
pub const M_CAP: f64 = (1u64 << 40) as f64;
pub const DELTA_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct Bracket {
    pub delta: f64,
    pub m_upper: f64,
    pub lower: GridFunction,
    pub upper: GridFunction,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Lower,
    Upper,
    BothAgree,
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    pub solution: GridFunction,
    pub iterations: usize,
    /// `‖u - T f(u)‖∞`
    pub residual: f64,
    pub from_side: Side,
    /// Sup distance between the limits from the lower and the upper start.
    pub side_gap: f64,
    pub lower_iterations: usize,
    pub upper_iterations: usize,
    /// Largest observed `u_n - u_{n+1}` (lower run) or `u_{n+1} - u_n` (upper run).
    pub max_monotone_violation: f64,
    /// Largest observed `lower_n - upper_n`.
    pub max_order_violation: f64,
}

/// Metadata part of a [`SolveReport`]; the profile goes to CSV.
#[derive(Debug, Clone, serde::Serialize)]
pub struct SolveSummary {
    pub iterations: usize,
    pub residual: f64,
    pub from_side: Side,
    pub side_gap: f64,
    pub lower_iterations: usize,
    pub upper_iterations: usize,
    pub max_monotone_violation: f64,
    pub max_order_violation: f64,
    pub sup_norm: f64,
}

impl SolveReport {
    pub fn summary(&self) -> SolveSummary {
        SolveSummary {
            iterations: self.iterations,
            residual: self.residual,
            from_side: self.from_side,
            side_gap: self.side_gap,
            lower_iterations: self.lower_iterations,
            upper_iterations: self.upper_iterations,
            max_monotone_violation: self.max_monotone_violation,
            max_order_violation: self.max_order_violation,
            sup_norm: self.solution.sup_norm(),
        }
    }
}

fn check_sublinear(f: &NonlinearityFamily, lambda1: f64) -> Result<()> {
    f.validate()?;
    let (at0, atinf) = (f.ratio_at_zero(), f.ratio_at_infinity());
    if !(at0 > lambda1 && lambda1 > atinf) {
        return Err(Error::hypothesis(
            "sublinear regime: liminf f(s)/s at 0 > lambda1 > limsup f(s)/s at infinity",
            format!("f(s)/s tends to {at0} at 0 and {atinf} at infinity, lambda1 = {lambda1}"),
        ));
    }
    if !f.is_nondecreasing() {
        return Err(Error::hypothesis("monotone iteration", "f must be nondecreasing"));
    }
    Ok(())
}

fn log_grid(lo: f64, hi: f64, n: usize) -> impl Iterator<Item = f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..n).map(move |i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
}

/// `f(s) ≥ λ₁ s` on a log grid of `(0, δ]`.
fn lower_condition(f: &NonlinearityFamily, lambda1: f64, delta: f64) -> bool {
    let lo = (delta * 1e-12).min(1e-14);
    log_grid(lo, delta, 400).all(|s| f.value(s) >= lambda1 * s)
}

/// Sub-solution `δφ₁` and super-solution `Mφ₁` for the discrete map.
pub fn find_bracket(eig: &EigenResult, f: &NonlinearityFamily, op: &OperatorMatrix) -> Result<Bracket> {
    let lambda1 = eig.lambda1;
    check_sublinear(f, lambda1)?;
    op.check_mesh(&eig.phi1)?;

    if !lower_condition(f, lambda1, DELTA_FLOOR) {
        return Err(Error::hypothesis(
            "sublinear regime",
            format!("f(s) >= lambda1 s fails already on (0, {DELTA_FLOOR:e}]"),
        ));
    }
    // bisection in log(δ) for the largest δ with f(s) ≥ λ₁ s on (0, δ]
    let mut delta_star = if lower_condition(f, lambda1, 0.5) {
        0.5
    } else {
        let (mut lo, mut hi) = (DELTA_FLOOR.ln(), 0.5f64.ln());
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if lower_condition(f, lambda1, mid.exp()) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo.exp()
    };

    let phi = &eig.phi1;
    let tol = 1e-9;
    // halve for a strict margin, then confirm the discrete sub-solution inequality
    let lower = loop {
        delta_star *= 0.5;
        if delta_star < DELTA_FLOOR {
            return Err(Error::hypothesis(
                "sublinear regime",
                "no delta gives a discrete sub-solution",
            ));
        }
        let cand = phi.scaled(delta_star);
        let image = op.apply_nonlinear(f, &cand)?;
        let ok = image
            .values()
            .iter()
            .zip(cand.values())
            .all(|(ti, li)| *ti >= li - tol * delta_star);
        if ok {
            break cand;
        }
    };
    let delta = delta_star;

    let mut m = 2.0;
    let upper = loop {
        let cand = phi.scaled(m);
        let image = op.apply_nonlinear(f, &cand)?;
        let ok = image
            .values()
            .iter()
            .zip(cand.values())
            .all(|(ti, ui)| *ti <= ui + tol * m);
        if ok {
            break cand;
        }
        m *= 2.0;
        if m > M_CAP {
            return Err(Error::hypothesis(
                "sublinear regime",
                format!("no super-solution M*phi1 with M <= 2^40; regime misclassified for {}", f.describe()),
            ));
        }
    };
    Ok(Bracket {
        delta,
        m_upper: m,
        lower,
        upper,
    })
}

/// Picard iteration `u ← T f(u)` from both ends of the bracket.
pub fn monotone_solve(
    bracket: &Bracket,
    f: &NonlinearityFamily,
    op: &OperatorMatrix,
    tol: f64,
    maxit: usize,
) -> Result<SolveReport> {
    if !f.is_nondecreasing() {
        return Err(Error::hypothesis("monotone iteration", "f must be nondecreasing"));
    }
    op.check_mesh(&bracket.lower)?;
    let mut lo = bracket.lower.values().to_vec();
    let mut up = bracket.upper.values().to_vec();
    let mut lo_done: Option<usize> = None;
    let mut up_done: Option<usize> = None;
    let mut mono: f64 = 0.0;
    let mut order: f64 = 0.0;
    let mut last_change = f64::INFINITY;

    for it in 1..=maxit {
        if lo_done.is_none() {
            let next = op.nonlinear_slice(f, &lo);
            let mut change: f64 = 0.0;
            for (n, o) in next.iter().zip(&lo) {
                mono = mono.max(o - n);
                change = change.max((n - o).abs());
            }
            lo = next;
            last_change = change;
            if change < tol {
                lo_done = Some(it);
            }
        }
        if up_done.is_none() {
            let next = op.nonlinear_slice(f, &up);
            let mut change: f64 = 0.0;
            for (n, o) in next.iter().zip(&up) {
                mono = mono.max(n - o);
                change = change.max((n - o).abs());
            }
            up = next;
            last_change = last_change.max(change);
            if change < tol {
                up_done = Some(it);
            }
        }
        for (l, u) in lo.iter().zip(&up) {
            order = order.max(l - u);
        }
        let scale = bracket.m_upper.max(1.0);
        if mono > 1e-9 * scale {
            return Err(Error::Monotonicity {
                iteration: it,
                violation: mono,
            });
        }
        if let (Some(li), Some(ui)) = (lo_done, up_done) {
            let gap = lo
                .iter()
                .zip(&up)
                .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            let residual = residual_of(op, f, &lo);
            let from_side = if gap <= 10.0 * tol { Side::BothAgree } else { Side::Lower };
            return Ok(SolveReport {
                solution: GridFunction::new(op.mesh().clone(), lo)?,
                iterations: li.max(ui),
                residual,
                from_side,
                side_gap: gap,
                lower_iterations: li,
                upper_iterations: ui,
                max_monotone_violation: mono,
                max_order_violation: order,
            });
        }
    }
    Err(Error::NonConvergence {
        iterations: maxit,
        last_change,
        last_iterate: lo,
    })
}

fn residual_of(op: &OperatorMatrix, f: &NonlinearityFamily, u: &[f64]) -> f64 {
    op.nonlinear_slice(f, u)
        .iter()
        .zip(u)
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()))
}

/// Which strict inequality between `f(s)/s` and `λ₁` holds on the probe grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbeRegime {
    /// `f(s)/s > λ₁` for every sampled `s`.
    Above,
    /// `f(s)/s < λ₁` for every sampled `s`.
    Below,
    /// Equality somewhere within relative `1e-12`.
    Borderline,
    /// Both strict inequalities occur.
    Mixed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TrialOutcome {
    Diverged,
    Decayed,
    Undecided,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct ProbeTrial {
    pub start_scale: f64,
    pub shape: &'static str,
    pub iterations: usize,
    pub final_sup: f64,
    pub outcome: TrialOutcome,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbeVerdict {
    /// Every trial behaved as the regime predicts.
    NoPositiveSolutionDetected,
    /// `f(s)/s` touches `λ₁`; neither nonexistence hypothesis applies.
    Borderline,
    /// Hypotheses do not hold or some trial neither diverged nor decayed.
    Inconclusive,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct ProbeReport {
    pub regime: ProbeRegime,
    pub lambda1: f64,
    pub verdict: ProbeVerdict,
    pub trials: Vec<ProbeTrial>,
}

pub const DIVERGENCE_LEVEL: f64 = 1e6;
pub const DECAY_LEVEL: f64 = 1e-10;

pub fn classify_ratio(f: &NonlinearityFamily, lambda1: f64) -> ProbeRegime {
    let mut above = false;
    let mut below = false;
    let mut touch = false;
    for s in log_grid(1e-8, 1e8, 1601) {
        let g = f.value(s) / s;
        let rel = (g - lambda1) / lambda1;
        if rel.abs() <= 1e-12 {
            touch = true;
        } else if rel > 0.0 {
            above = true;
        } else {
            below = true;
        }
    }
    match (above, below, touch) {
        (_, _, true) => ProbeRegime::Borderline,
        (true, false, false) => ProbeRegime::Above,
        (false, true, false) => ProbeRegime::Below,
        _ => ProbeRegime::Mixed,
    }
}

/// Falsification-style evidence for nonexistence: Picard iteration from a
/// spread of positive starts. With `f(s)/s > λ₁` iterates should blow up,
/// with `f(s)/s < λ₁` they should collapse to zero. This cannot prove that
/// no positive solution exists.
pub fn nonexistence_probe(
    f: &NonlinearityFamily,
    op: &OperatorMatrix,
    eig: &EigenResult,
    trials: usize,
    maxit: usize,
) -> Result<ProbeReport> {
    f.validate()?;
    let regime = classify_ratio(f, eig.lambda1);
    let ord = op.order();
    let nodes = op.mesh().nodes().to_vec();
    let phi = eig.phi1.values().to_vec();
    const SHAPES: [&str; 4] = ["e", "phi1", "parabola", "skewed"];
    let shape = |k: usize, i: usize| -> f64 {
        let t = nodes[i];
        match k {
            0 => ord.e(t),
            1 => phi[i],
            2 => 4.0 * t * (1.0 - t),
            _ => 9.0 * t * (1.0 - t).powi(3),
        }
    };

    let run = |k: usize| -> ProbeTrial {
        let scale = if trials > 1 {
            10f64.powf(-3.0 + 6.0 * k as f64 / (trials - 1) as f64)
        } else {
            1.0
        };
        let kind = k % SHAPES.len();
        let mut u: Vec<f64> = (0..nodes.len()).map(|i| scale * shape(kind, i)).collect();
        let mut outcome = TrialOutcome::Undecided;
        let mut iterations = maxit;
        for it in 1..=maxit {
            u = op.nonlinear_slice(f, &u);
            let s = u.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if s > DIVERGENCE_LEVEL || !s.is_finite() {
                outcome = TrialOutcome::Diverged;
                iterations = it;
                break;
            }
            if s < DECAY_LEVEL {
                outcome = TrialOutcome::Decayed;
                iterations = it;
                break;
            }
        }
        ProbeTrial {
            start_scale: scale,
            shape: SHAPES[kind],
            iterations,
            final_sup: u.iter().fold(0.0f64, |m, v| m.max(v.abs())),
            outcome,
        }
    };

    #[cfg(feature = "parallel")]
    let trials: Vec<ProbeTrial> = {
        use rayon::prelude::*;
        (0..trials).into_par_iter().map(run).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let trials: Vec<ProbeTrial> = (0..trials).map(run).collect();

    let expected = match regime {
        ProbeRegime::Above => Some(TrialOutcome::Diverged),
        ProbeRegime::Below => Some(TrialOutcome::Decayed),
        _ => None,
    };
    let verdict = match (regime, expected) {
        (ProbeRegime::Borderline, _) => ProbeVerdict::Borderline,
        (_, Some(e)) if trials.iter().all(|t| t.outcome == e) => ProbeVerdict::NoPositiveSolutionDetected,
        _ => ProbeVerdict::Inconclusive,
    };
    Ok(ProbeReport {
        regime,
        lambda1: eig.lambda1,
        verdict,
        trials,
    })
}
