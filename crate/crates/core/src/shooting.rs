//! Shooting for the one-dimensional Hénon problem at `α = 2`:
//!
//! ```text
//! u'' + |x|^l |u|^(p-1) u = 0,   u(-1) = 0,   u'(-1) = β.
//! ```
//!
//! `z(β)` is the first zero of `u(·,β)` after `-1`; each solution of
//! `z(β) = ζ` gives a positive solution of the Dirichlet problem on
//! `(-1, ζ)`. The derivative `w = ∂u/∂β` solves the linearized equation
//! with `w(-1) = 0, w'(-1) = 1`; its interior zeros count the Morse index
//! and `z'(β) = -w(z)/u'(z)`.

use std::fmt::Write as _;
use std::ops::ControlFlow;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{fmt_f64, GridFunction, Mesh};
use crate::ode::{segment_to, step, Dopri5, Segment};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HenonParams {
    pub l: f64,
    pub p: f64,
}

impl HenonParams {
    pub fn new(l: f64, p: f64) -> Result<Self> {
        if !(l > 1.0 && p > 1.0 && l.is_finite() && p.is_finite()) {
            return Err(Error::hypothesis("l > 1 and p > 1", format!("got l = {l}, p = {p}")));
        }
        Ok(HenonParams { l, p })
    }

    /// `(p-1)·l ≥ 4`, under which three positive solutions are expected.
    pub fn multiplicity_condition(&self) -> bool {
        (self.p - 1.0) * self.l >= 4.0
    }

    pub fn require_multiplicity(&self) -> Result<()> {
        if self.multiplicity_condition() {
            Ok(())
        } else {
            Err(Error::hypothesis(
                "(p-1) l >= 4",
                format!("(p-1) l = {}", (self.p - 1.0) * self.l),
            ))
        }
    }

    fn rhs(&self) -> impl Fn(f64, &[f64; 4]) -> [f64; 4] + '_ {
        move |x, y| {
            let wgt = x.abs().powf(self.l);
            let a = y[0].abs().powf(self.p - 1.0);
            [y[1], -wgt * a * y[0], y[3], -wgt * self.p * a * y[2]]
        }
    }
}

/// State `(u, u', w, w')` along an accepted trajectory.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub beta: f64,
    pub segments: Vec<Segment<4>>,
}

impl Trajectory {
    pub fn x_end(&self) -> f64 {
        self.segments.last().map_or(-1.0, |s| s.x1())
    }

    /// Dense state at `x`; `None` outside the integrated range.
    pub fn state(&self, x: f64) -> Option<[f64; 4]> {
        if x < -1.0 || x > self.x_end() {
            return None;
        }
        let k = self.segments.partition_point(|s| s.x1() < x).min(self.segments.len() - 1);
        Some(self.segments[k].eval(x))
    }

    /// `(x, u, u', w, w')` at step endpoints.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("x,u,du,w,dw\n");
        let first = [-1.0, 0.0, self.beta, 0.0, 1.0];
        let rows = std::iter::once(first).chain(self.segments.iter().map(|s| {
            let y = s.y1;
            [s.x1(), y[0], y[1], y[2], y[3]]
        }));
        for r in rows {
            let cells: Vec<String> = r.iter().map(|v| fmt_f64(*v)).collect();
            let _ = writeln!(out, "{}", cells.join(","));
        }
        out
    }
}

/// Integrate `(u, w)` from `-1` up to `x_max`; a forced step ends at `x = 0`.
pub fn ivp_integrate(beta: f64, params: &HenonParams, x_max: f64, solver: &Dopri5) -> Result<Trajectory> {
    check_beta(beta)?;
    let mut segments = Vec::new();
    solver.integrate(params.rhs(), -1.0, [0.0, beta, 0.0, 1.0], x_max, &[0.0], |s| {
        segments.push(s.clone());
        ControlFlow::Continue(())
    })?;
    Ok(Trajectory { beta, segments })
}

fn check_beta(beta: f64) -> Result<()> {
    if beta > 0.0 && beta.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("beta must be positive, got {beta}")))
    }
}

/// Everything known at the first zero of `u`.
#[derive(Debug, Clone)]
pub struct ZeroData {
    pub z: f64,
    /// `(u, u', w, w')` at `z`, from an exact Runge–Kutta step landing on `z`.
    pub state: [f64; 4],
    /// Trajectory truncated at `z`.
    pub trajectory: Trajectory,
}

/// Largest acceptable `|u(z)|` after polishing.
pub const ZERO_TOL: f64 = 1e-11;

/// Integrate until `u` changes sign, then polish the zero.
pub fn first_zero(beta: f64, params: &HenonParams, x_max: f64, solver: &Dopri5) -> Result<ZeroData> {
    check_beta(beta)?;
    let rhs = params.rhs();
    let mut segments: Vec<Segment<4>> = Vec::new();
    let mut found = false;
    solver.integrate(&rhs, -1.0, [0.0, beta, 0.0, 1.0], x_max, &[0.0], |s| {
        segments.push(s.clone());
        if s.y1[0] <= 0.0 {
            found = true;
            ControlFlow::Break(())
        } else {
            ControlFlow::Continue(())
        }
    })?;
    if !found {
        return Err(Error::Horizon { x_max });
    }
    let seg = segments.pop().expect("at least one segment");

    // bracketed secant/bisection on the dense output
    let (mut a, mut b) = (seg.x0, seg.x1());
    let (mut fa, mut fb) = (seg.y0[0], seg.y1[0]);
    let mut z = b;
    if fb != 0.0 {
        for _ in 0..200 {
            let sec = a - fa * (b - a) / (fb - fa);
            let mid = 0.5 * (a + b);
            let c = if sec > a && sec < b { sec } else { mid };
            let fc = seg.component(c, 0);
            z = c;
            if fc.abs() <= 0.1 * ZERO_TOL || b - a <= 4.0 * f64::EPSILON * b.abs().max(1.0) {
                break;
            }
            if fc > 0.0 {
                a = c;
                fa = fc;
            } else {
                b = c;
                fb = fc;
            }
            // keep bisection progress when secant stalls on one side
            let cm = 0.5 * (a + b);
            let fm = seg.component(cm, 0);
            if fm > 0.0 {
                a = cm;
                fa = fm;
            } else {
                b = cm;
                fb = fm;
            }
        }
    }

    // land exactly on z with one Runge–Kutta step from the segment start,
    // then Newton-correct z against that step
    let mut state = [0.0; 4];
    for _ in 0..3 {
        let k1 = rhs(seg.x0, &seg.y0);
        let h = z - seg.x0;
        state = if h > 0.0 { step(&rhs, seg.x0, &seg.y0, &k1, h).0 } else { seg.y0 };
        if state[0].abs() <= 0.1 * ZERO_TOL || state[1] == 0.0 {
            break;
        }
        z -= state[0] / state[1];
    }
    if state[0].abs() > ZERO_TOL {
        return Err(Error::Integration {
            x: z,
            reason: format!("zero polish stalled at |u| = {:e}", state[0].abs()),
        });
    }
    // truncated final segment
    if z > seg.x0 {
        segments.push(segment_to(&rhs, seg.x0, &seg.y0, z - seg.x0));
    }
    Ok(ZeroData {
        z,
        state,
        trajectory: Trajectory { beta, segments },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum WSign {
    Positive,
    Negative,
    ZeroIsh,
}

impl WSign {
    pub fn as_str(self) -> &'static str {
        match self {
            WSign::Positive => "positive",
            WSign::Negative => "negative",
            WSign::ZeroIsh => "zero_ish",
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Variational {
    pub zero_count: usize,
    pub w_at_z: f64,
    pub w_sign: WSign,
    /// `max |w|` on `[-1, z]`, the scale for the sign verdict.
    pub w_scale: f64,
}

/// Samples per segment when scanning `w` for sign changes.
const W_SAMPLES: usize = 8;

/// Zeros of `w` in `(-1, z)` and the sign of `w(z)`.
///
/// `w` comes from the same integration as `u`. Sign changes are counted on
/// step endpoints plus interior samples of the dense output, so a pair of
/// zeros inside one step is still seen unless they are closer than `h/8`.
pub fn variational_solve(data: &ZeroData) -> Variational {
    let mut prev = 0.0f64;
    let mut count = 0;
    let mut scale = 0.0f64;
    let mut first = true;
    for seg in &data.trajectory.segments {
        for k in 1..=W_SAMPLES {
            let x = seg.x0 + seg.h * k as f64 / W_SAMPLES as f64;
            let w = if k == W_SAMPLES { seg.y1[2] } else { seg.component(x, 2) };
            scale = scale.max(w.abs());
            if x >= data.z {
                continue;
            }
            if first {
                first = false;
            } else if w != 0.0 && prev != 0.0 && (w > 0.0) != (prev > 0.0) {
                count += 1;
            }
            if w != 0.0 {
                prev = w;
            }
        }
    }
    let wz = data.state[2];
    if prev != 0.0 && wz != 0.0 && (wz > 0.0) != (prev > 0.0) && wz.abs() > 1e-9 * scale {
        // w changed sign between the last sample and z itself: still interior
        count += 1;
    }
    let scale = scale.max(wz.abs());
    let w_sign = if wz.abs() <= 1e-9 * scale {
        WSign::ZeroIsh
    } else if wz > 0.0 {
        WSign::Positive
    } else {
        WSign::Negative
    };
    Variational {
        zero_count: count,
        w_at_z: wz,
        w_sign,
        w_scale: scale,
    }
}

/// `z'(β) = -w(z)/u'(z)`.
pub fn z_prime(data: &ZeroData) -> Result<f64> {
    let du = data.state[1];
    if du.abs() < 1e-10 {
        return Err(Error::Transversality(du.abs()));
    }
    Ok(-data.state[2] / du)
}

/// `|z'|` below this marks a crossing as degenerate.
pub const DEGENERATE_Z_PRIME: f64 = 1e-6;

#[derive(Debug, Clone, Serialize)]
pub struct ShootingRecord {
    pub beta: f64,
    pub z: f64,
    pub morse_index: usize,
    pub w_end_sign: WSign,
    pub z_prime: f64,
    pub w_end: f64,
    pub du_at_z: f64,
    /// `u'(0)`; zero for an even solution when `ζ = 1`.
    pub du_at_origin: f64,
    pub degenerate: bool,
    #[serde(skip)]
    pub trajectory: Trajectory,
}

pub const CROSSINGS_CSV_HEADER: &str = "beta,z,morse_index,w_end_sign,z_prime,w_end,du_at_z,du_at_origin,degenerate";

pub fn crossings_to_csv(records: &[ShootingRecord]) -> String {
    let mut out = String::from(CROSSINGS_CSV_HEADER);
    out.push('\n');
    for r in records {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            fmt_f64(r.beta),
            fmt_f64(r.z),
            r.morse_index,
            r.w_end_sign.as_str(),
            fmt_f64(r.z_prime),
            fmt_f64(r.w_end),
            fmt_f64(r.du_at_z),
            fmt_f64(r.du_at_origin),
            r.degenerate
        );
    }
    out
}

/// Full record for one shot.
pub fn shoot(beta: f64, params: &HenonParams, x_max: f64, solver: &Dopri5) -> Result<ShootingRecord> {
    let data = first_zero(beta, params, x_max, solver)?;
    let var = variational_solve(&data);
    let zp = z_prime(&data)?;
    let du_at_origin = if data.z > 0.0 {
        data.trajectory.state(0.0).map_or(f64::NAN, |s| s[1])
    } else {
        f64::NAN
    };
    Ok(ShootingRecord {
        beta,
        z: data.z,
        morse_index: var.zero_count,
        w_end_sign: var.w_sign,
        z_prime: zp,
        w_end: var.w_at_z,
        du_at_z: data.state[1],
        du_at_origin,
        degenerate: zp.abs() < DEGENERATE_Z_PRIME || var.w_sign == WSign::ZeroIsh,
        trajectory: data.trajectory,
    })
}

#[derive(Debug, Clone, Copy)]
pub struct ScanOptions {
    pub beta_min: f64,
    pub beta_max: f64,
    pub points: usize,
    /// `|z(β) - ζ|` target for polished crossings.
    pub z_tol: f64,
}

impl Default for ScanOptions {
    fn default() -> Self {
        ScanOptions {
            beta_min: 1e-3,
            beta_max: 1e3,
            points: 2000,
            z_tol: 1e-9,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CrossingReport {
    pub zeta: f64,
    pub records: Vec<ShootingRecord>,
    /// Sign changes seen in the scan; equals `records.len()` unless a
    /// polish failed.
    pub sign_changes: usize,
}

/// `sign(z(β) - ζ)`, with "no zero before `ζ + 1`" counted as above.
fn side(beta: f64, zeta: f64, params: &HenonParams, solver: &Dopri5) -> Result<(bool, f64)> {
    match first_zero(beta, params, zeta + 1.0, solver) {
        Ok(d) => Ok((d.z > zeta, d.z)),
        Err(Error::Horizon { .. }) => Ok((true, f64::INFINITY)),
        Err(e) => Err(e),
    }
}

/// Scan `z(β) - ζ` on a log grid, then polish every sign change.
pub fn find_crossings(zeta: f64, params: &HenonParams, opts: &ScanOptions, solver: &Dopri5) -> Result<CrossingReport> {
    if !(zeta > -1.0) {
        return Err(Error::Domain(format!("zeta must exceed -1, got {zeta}")));
    }
    if !(opts.beta_min > 0.0 && opts.beta_max > opts.beta_min && opts.points >= 2) {
        return Err(Error::Config("beta range must satisfy 0 < min < max with at least 2 points".into()));
    }
    let (a, b) = (opts.beta_min.ln(), opts.beta_max.ln());
    let betas: Vec<f64> = (0..opts.points)
        .map(|k| (a + (b - a) * k as f64 / (opts.points - 1) as f64).exp())
        .collect();
    let eval = |beta: &f64| side(*beta, zeta, params, solver);
    #[cfg(feature = "parallel")]
    let sides: Vec<Result<(bool, f64)>> = {
        use rayon::prelude::*;
        betas.par_iter().map(eval).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let sides: Vec<Result<(bool, f64)>> = betas.iter().map(eval).collect();
    let sides = sides.into_iter().collect::<Result<Vec<_>>>()?;

    let brackets: Vec<(f64, f64, bool)> = (1..betas.len())
        .filter(|&k| sides[k].0 != sides[k - 1].0)
        .map(|k| (betas[k - 1], betas[k], sides[k - 1].0))
        .collect();
    let polish = |&(lo, hi, lo_above): &(f64, f64, bool)| polish_crossing(lo, hi, lo_above, zeta, params, opts.z_tol, solver);
    #[cfg(feature = "parallel")]
    let polished: Vec<Result<ShootingRecord>> = {
        use rayon::prelude::*;
        brackets.par_iter().map(polish).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let polished: Vec<Result<ShootingRecord>> = brackets.iter().map(polish).collect();

    let records: Vec<ShootingRecord> = polished.into_iter().filter_map(|r| r.ok()).collect();
    Ok(CrossingReport {
        zeta,
        records,
        sign_changes: brackets.len(),
    })
}

fn polish_crossing(
    mut lo: f64,
    mut hi: f64,
    lo_above: bool,
    zeta: f64,
    params: &HenonParams,
    z_tol: f64,
    solver: &Dopri5,
) -> Result<ShootingRecord> {
    for _ in 0..200 {
        let mid = (lo * hi).sqrt();
        let (above, z) = side(mid, zeta, params, solver)?;
        if (z - zeta).abs() <= z_tol {
            return shoot(mid, params, zeta + 1.0, solver);
        }
        if above == lo_above {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    Err(Error::NonConvergence {
        iterations: 200,
        last_change: hi - lo,
        last_iterate: vec![lo, hi],
    })
}

/// The crossing with the smallest `|u'(0)|`: the even solution when `ζ = 1`.
pub fn even_candidate(records: &[ShootingRecord]) -> Option<&ShootingRecord> {
    records
        .iter()
        .filter(|r| r.du_at_origin.is_finite())
        .min_by(|a, b| a.du_at_origin.abs().total_cmp(&b.du_at_origin.abs()))
}

/// A shooting solution moved to `[0,1]`.
#[derive(Debug, Clone)]
pub struct UnitSolution {
    pub profile: GridFunction,
    /// Weight offset: the weight is `|t - 1/2 + δ|^l`.
    pub delta: f64,
    pub scale_exponent_used: f64,
    /// Relative pointwise residual of `v'' + |t - 1/2 + δ|^l |v|^(p-1) v`
    /// under the accepted exponent.
    pub residual: f64,
    /// `(exponent, residual)` for every exponent tried.
    pub tried: Vec<(f64, f64)>,
}

impl UnitSolution {
    /// Center `t₀ = 1/2 - δ` of the unit-interval weight `|t - t₀|^l`.
    pub fn weight_center(&self) -> f64 {
        0.5 - self.delta
    }
}

pub const RESCALE_TOL: f64 = 1e-6;

/// `v(t) = (1+ζ)^E u((1+ζ)t - 1)` sampled on `mesh`.
///
/// The exponent is chosen by substitution into the equation: both
/// `E = (l+2)/(p-1)` and `E = (l+2)/p` are checked, in that order, and the
/// first whose relative residual is at most [`RESCALE_TOL`] is kept. Both
/// residuals are reported in `tried`.
pub fn rescale_to_unit(record: &ShootingRecord, zeta: f64, params: &HenonParams, mesh: &Mesh) -> Result<UnitSolution> {
    let traj = &record.trajectory;
    if (record.z - zeta).abs() > 1e-6 || traj.x_end() < zeta - 1e-6 {
        return Err(Error::Domain(format!(
            "record ends at z = {} but zeta = {zeta}",
            record.z
        )));
    }
    let (l, p) = (params.l, params.p);
    let len = 1.0 + zeta;
    let delta = (zeta - 1.0) / (2.0 * len);
    let nodes = mesh.nodes();
    let last = nodes.len() - 1;
    let u_at: Vec<f64> = nodes
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            if i == 0 || i == last {
                0.0
            } else {
                let x = (len * t - 1.0).min(traj.x_end());
                traj.state(x).map_or(0.0, |s| s[0])
            }
        })
        .collect();

    let residual_for = |e: f64| -> f64 {
        let c = len.powf(e);
        let mut num = 0.0f64;
        let mut den = 0.0f64;
        for (&t, &u) in nodes.iter().zip(&u_at) {
            let x = len * t - 1.0;
            // v'' from the equation for u, chain rule
            let vpp = -c * len * len * x.abs().powf(l) * u.abs().powf(p - 1.0) * u;
            let v = c * u;
            let target = -(t - 0.5 + delta).abs().powf(l) * v.abs().powf(p - 1.0) * v;
            num = num.max((vpp - target).abs());
            den = den.max(vpp.abs()).max(target.abs());
        }
        if den > 0.0 {
            num / den
        } else {
            f64::INFINITY
        }
    };

    let tried: Vec<(f64, f64)> = [(l + 2.0) / (p - 1.0), (l + 2.0) / p]
        .into_iter()
        .map(|e| (e, residual_for(e)))
        .collect();
    if let Some(&(e, r)) = tried.iter().find(|(_, r)| *r <= RESCALE_TOL) {
        let c = len.powf(e);
        let profile = GridFunction::new(
            std::sync::Arc::new(mesh.clone()),
            u_at.iter().map(|u| c * u).collect(),
        )?;
        return Ok(UnitSolution {
            profile,
            delta,
            scale_exponent_used: e,
            residual: r,
            tried,
        });
    }
    Err(Error::Scaling { residuals: tried })
}
