use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};

use fracbvp::eigen::{eigen_at, lambda1_bounds, sweep_alpha, sweep_to_csv, MeshSpec};
use fracbvp::grid::{fmt_f64, Mesh};
use fracbvp::kernel::Order;
use fracbvp::ode::Dopri5;
use fracbvp::operator::{assemble, NonlinearityFamily, WeightFamily};
use fracbvp::shooting::{crossings_to_csv, even_candidate, find_crossings, rescale_to_unit, HenonParams, ScanOptions};
use fracbvp::sublinear::{find_bracket, monotone_solve, nonexistence_probe};
use fracbvp::superlinear::{continue_alpha, newton_solve, nondegeneracy, sweep_amplitude, ContinuationOptions};
use fracbvp::Error;

use crate::config::{Command, RunConfig};

/// Failure of a run, mapped onto the exit code.
#[derive(Debug)]
pub enum RunError {
    Solver(Error),
    Io(String),
}

impl From<Error> for RunError {
    fn from(e: Error) -> Self {
        RunError::Solver(e)
    }
}

impl From<std::io::Error> for RunError {
    fn from(e: std::io::Error) -> Self {
        RunError::Io(e.to_string())
    }
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Solver(e) if e.is_hypothesis_violation() => 2,
            RunError::Solver(_) => 3,
            RunError::Io(_) => 4,
        }
    }

    pub fn to_json(&self) -> Value {
        match self {
            RunError::Io(msg) => json!({ "kind": "io", "message": msg }),
            RunError::Solver(e) => {
                let mut v = json!({ "kind": error_kind(e), "message": e.to_string() });
                match e {
                    Error::Hypothesis { hypothesis, detail } => {
                        v["hypothesis"] = json!(hypothesis);
                        v["detail"] = json!(detail);
                    }
                    Error::NonConvergence { iterations, last_change, .. } => {
                        v["iterations"] = json!(iterations);
                        v["last_change"] = json!(last_change);
                    }
                    Error::Monotonicity { iteration, violation } => {
                        v["iteration"] = json!(iteration);
                        v["violation"] = json!(violation);
                    }
                    Error::Scaling { residuals } => {
                        v["residuals"] = json!(residuals);
                    }
                    _ => {}
                }
                v
            }
        }
    }
}

fn error_kind(e: &Error) -> &'static str {
    match e {
        Error::Domain(_) => "domain",
        Error::Config(_) => "config",
        Error::Hypothesis { .. } => "hypothesis",
        Error::MeshMismatch { .. } => "mesh_mismatch",
        Error::NonConvergence { .. } => "non_convergence",
        Error::Monotonicity { .. } => "monotonicity",
        Error::Degenerate(_) => "degenerate",
        Error::Integration { .. } => "integration",
        Error::Horizon { .. } => "horizon",
        Error::Transversality(_) => "transversality",
        Error::Scaling { .. } => "scaling",
    }
}

/// Files written by a run plus the command-specific result summary.
pub struct Artifacts {
    dir: PathBuf,
    pub files: Vec<String>,
    pub results: Value,
}

impl Artifacts {
    fn new(dir: &Path) -> Self {
        Artifacts {
            dir: dir.to_path_buf(),
            files: Vec::new(),
            results: json!({}),
        }
    }

    fn write(&mut self, name: &str, contents: &str) -> Result<(), RunError> {
        std::fs::write(self.dir.join(name), contents).map_err(|e| RunError::Io(format!("{name}: {e}")))?;
        self.files.push(name.to_string());
        Ok(())
    }

    fn set(&mut self, key: &str, value: impl Serialize) {
        self.results[key] = serde_json::to_value(value).expect("plain data serializes");
    }
}

fn mesh_spec(cfg: &RunConfig) -> Result<MeshSpec, Error> {
    Ok(MeshSpec {
        elements: cfg.mesh_n.unwrap_or(400),
        grading: cfg.grading()?,
    })
}

fn henon(cfg: &RunConfig) -> Result<HenonParams, Error> {
    HenonParams::new(cfg.l.unwrap_or(4.0), cfg.p.unwrap_or(2.0))
}

fn scan_options(cfg: &RunConfig) -> ScanOptions {
    let d = ScanOptions::default();
    ScanOptions {
        beta_min: cfg.beta_min.unwrap_or(d.beta_min),
        beta_max: cfg.beta_max.unwrap_or(d.beta_max),
        points: cfg.scan_points.unwrap_or(d.points),
        z_tol: d.z_tol,
    }
}

pub fn execute(cmd: Command, cfg: &RunConfig, dir: &Path) -> Result<Artifacts, RunError> {
    let mut out = Artifacts::new(dir);
    match cmd {
        Command::Eig => eig(cfg, &mut out)?,
        Command::Bounds => bounds(cfg, &mut out)?,
        Command::Sweep => sweep(cfg, &mut out)?,
        Command::SolveSub => solve_sub(cfg, &mut out)?,
        Command::SolveSuper => solve_super(cfg, &mut out)?,
        Command::Nonexist => nonexist(cfg, &mut out)?,
        Command::HenonShoot => henon_shoot(cfg, &mut out)?,
        Command::HenonContinue => henon_continue(cfg, &mut out)?,
    }
    Ok(out)
}

pub const EIG_CSV_HEADER: &str = "alpha,lambda1,lower_bound,upper_bound,residual,iterations,nodes";

fn eig(cfg: &RunConfig, out: &mut Artifacts) -> Result<(), RunError> {
    let ord = cfg.order(2.0)?;
    let h = cfg.weight()?;
    let mesh = mesh_spec(cfg)?;
    let bounds = lambda1_bounds(ord, &h)?;
    let (op, e) = eigen_at(ord, &h, &mesh)?;
    let csv = format!(
        "{EIG_CSV_HEADER}\n{},{},{},{},{},{},{}\n",
        fmt_f64(ord.value()),
        fmt_f64(e.lambda1),
        fmt_f64(bounds.lower),
        fmt_f64(bounds.upper),
        fmt_f64(e.residual),
        e.iterations,
        op.dim()
    );
    out.write("eig.csv", &csv)?;
    out.write("phi1.csv", &e.phi1.to_csv())?;
    out.set("lambda1", e.lambda1);
    out.set("within_bounds", bounds.lower <= e.lambda1 && e.lambda1 <= bounds.upper);
    Ok(())
}

pub const BOUNDS_CSV_HEADER: &str = "alpha,lower_bound,upper_bound";

fn bounds(cfg: &RunConfig, out: &mut Artifacts) -> Result<(), RunError> {
    let h = cfg.weight()?;
    let alphas = match (&cfg.alphas, cfg.alpha) {
        (None, Some(a)) => vec![Order::new(a)?],
        _ => cfg.alphas("1.1:2.0:0.1")?,
    };
    let mut csv = format!("{BOUNDS_CSV_HEADER}\n");
    for ord in alphas {
        let b = lambda1_bounds(ord, &h)?;
        let _ = writeln!(csv, "{},{},{}", fmt_f64(ord.value()), fmt_f64(b.lower), fmt_f64(b.upper));
    }
    out.write("bounds.csv", &csv)?;
    Ok(())
}

fn sweep(cfg: &RunConfig, out: &mut Artifacts) -> Result<(), RunError> {
    let h = cfg.weight()?;
    let alphas = cfg.alphas("1.1:2.0:0.05")?;
    let rows = sweep_alpha(&alphas, &h, &mesh_spec(cfg)?)?;
    let inside = rows.iter().all(|r| r.lower_bound <= r.lambda1 && r.lambda1 <= r.upper_bound);
    out.write("sweep.csv", &sweep_to_csv(&rows))?;
    out.set("rows", rows.len());
    out.set("all_within_bounds", inside);
    Ok(())
}

fn solve_sub(cfg: &RunConfig, out: &mut Artifacts) -> Result<(), RunError> {
    let ord = cfg.order(2.0)?;
    let h = cfg.weight()?;
    let f = cfg.nonlinearity("power:1:0.5")?;
    let (op, e) = eigen_at(ord, &h, &mesh_spec(cfg)?)?;
    let bracket = find_bracket(&e, &f, &op)?;
    let r = monotone_solve(&bracket, &f, &op, cfg.tol.unwrap_or(1e-11), cfg.maxit.unwrap_or(100_000))?;
    out.write("solution.csv", &r.solution.to_csv())?;
    out.set("lambda1", e.lambda1);
    out.set("delta", bracket.delta);
    out.set("m_upper", bracket.m_upper);
    out.set("solve", r.summary());
    Ok(())
}

fn check_superlinear(f: &NonlinearityFamily, lambda1: f64) -> Result<(), Error> {
    let (at0, atinf) = (f.ratio_at_zero(), f.ratio_at_infinity());
    if at0 < lambda1 && lambda1 < atinf {
        Ok(())
    } else {
        Err(Error::Hypothesis {
            hypothesis: "superlinear regime: limsup f(s)/s at 0 < lambda1 < liminf f(s)/s at infinity",
            detail: format!("f(s)/s tends to {at0} at 0 and {atinf} at infinity, lambda1 = {lambda1}"),
        })
    }
}

fn solve_super(cfg: &RunConfig, out: &mut Artifacts) -> Result<(), RunError> {
    let ord = cfg.order(2.0)?;
    let h = cfg.weight()?;
    let f = cfg.nonlinearity("power:1:2")?;
    let (op, e) = eigen_at(ord, &h, &mesh_spec(cfg)?)?;
    check_superlinear(&f, e.lambda1)?;
    let amp = sweep_amplitude(&op, &f, &e.phi1, 1e-3, 1e6, 181)?;
    let r = newton_solve(&op, &f, &e.phi1.scaled(amp), cfg.tol.unwrap_or(1e-10), cfg.maxit.unwrap_or(50))?;
    let nd = nondegeneracy(&op, &f, &r.solution, None)?;
    out.write("solution.csv", &r.solution.to_csv())?;
    out.set("lambda1", e.lambda1);
    out.set("start_amplitude", amp);
    out.set("residual", r.residual);
    out.set("iterations", r.iterations);
    out.set("converged", r.converged);
    out.set("positive", r.positive);
    out.set("sup_norm", r.solution.sup_norm());
    out.set("nondegeneracy", nd);
    Ok(())
}

pub const TRIALS_CSV_HEADER: &str = "trial,shape,start_scale,iterations,final_sup,outcome";

fn nonexist(cfg: &RunConfig, out: &mut Artifacts) -> Result<(), RunError> {
    let ord = cfg.order(2.0)?;
    let h = cfg.weight()?;
    let f = cfg.nonlinearity("power:1:1")?;
    let (op, e) = eigen_at(ord, &h, &mesh_spec(cfg)?)?;
    let rep = nonexistence_probe(&f, &op, &e, cfg.trials.unwrap_or(10), cfg.maxit.unwrap_or(10_000))?;
    let mut csv = format!("{TRIALS_CSV_HEADER}\n");
    for (k, t) in rep.trials.iter().enumerate() {
        let outcome = serde_json::to_value(t.outcome).expect("enum serializes");
        let _ = writeln!(
            csv,
            "{k},{},{},{},{},{}",
            t.shape,
            fmt_f64(t.start_scale),
            t.iterations,
            fmt_f64(t.final_sup),
            outcome.as_str().unwrap_or_default()
        );
    }
    out.write("trials.csv", &csv)?;
    out.set("lambda1", rep.lambda1);
    out.set("regime", rep.regime);
    out.set("verdict", rep.verdict);
    Ok(())
}

fn henon_shoot(cfg: &RunConfig, out: &mut Artifacts) -> Result<(), RunError> {
    let params = henon(cfg)?;
    let zeta = cfg.zeta.unwrap_or(1.0);
    let rep = find_crossings(zeta, &params, &scan_options(cfg), &Dopri5::default())?;
    out.write("crossings.csv", &crossings_to_csv(&rep.records))?;
    if cfg.dump_trajectories.unwrap_or(false) {
        for (k, r) in rep.records.iter().enumerate() {
            out.write(&format!("trajectory_{k}.csv"), &r.trajectory.to_csv())?;
        }
    }
    out.set("crossings", rep.records.len());
    out.set("sign_changes", rep.sign_changes);
    out.set("multiplicity_condition", params.multiplicity_condition());
    if let Some(even) = even_candidate(&rep.records) {
        out.set("even_beta", even.beta);
        out.set("even_morse_index", even.morse_index);
    }
    Ok(())
}

pub const TRACES_CSV_HEADER: &str = "trace,beta,step,alpha,residual,margin,threshold,newton_iterations,sup_norm";

fn henon_continue(cfg: &RunConfig, out: &mut Artifacts) -> Result<(), RunError> {
    let params = henon(cfg)?;
    params.require_multiplicity()?;
    let zeta = cfg.zeta.unwrap_or(1.0);
    let target = Order::new(cfg.target_alpha.unwrap_or(1.95))?.value();
    let opts = ContinuationOptions {
        initial_step: cfg.alpha_step.unwrap_or(0.005),
        min_step: cfg.min_step.unwrap_or(1e-5),
        tol: cfg.tol.unwrap_or(1e-10),
        maxit: cfg.maxit.unwrap_or(50),
        ..Default::default()
    };
    let rep = find_crossings(zeta, &params, &scan_options(cfg), &Dopri5::default())?;
    out.write("crossings.csv", &crossings_to_csv(&rep.records))?;

    let ord = Order::classical();
    let len = 1.0 + zeta;
    let h = WeightFamily::PowerOffset {
        l: params.l,
        t0: 0.5 - (zeta - 1.0) / (2.0 * len),
    };
    let spec = mesh_spec(cfg)?;
    let mesh: Mesh = h.adapt_mesh(&spec.build(ord)?);
    let op = assemble(&mesh, ord, &h)?;
    let f = NonlinearityFamily::Power { c: 1.0, p: params.p };

    let mut table = format!("{TRACES_CSV_HEADER}\n");
    let mut summaries = Vec::new();
    for (k, r) in rep.records.iter().enumerate() {
        if r.degenerate {
            summaries.push(json!({ "trace": k, "beta": r.beta, "skipped": "degenerate crossing" }));
            continue;
        }
        let unit = rescale_to_unit(r, zeta, &params, op.mesh())?;
        let start = newton_solve(&op, &f, &unit.profile, opts.tol, opts.maxit)?;
        let trace = continue_alpha(&start, 2.0, &h, &f, target, &opts)?;
        for (i, s) in trace.steps.iter().enumerate() {
            let _ = writeln!(
                table,
                "{k},{},{i},{},{},{},{},{},{}",
                fmt_f64(r.beta),
                fmt_f64(s.alpha),
                fmt_f64(s.residual),
                fmt_f64(s.margin),
                fmt_f64(s.threshold),
                s.newton_iterations,
                fmt_f64(s.sup_norm)
            );
        }
        out.write(&format!("trace_{k}.jsonl"), &trace.to_json_lines())?;
        out.write(&format!("profile_{k}.csv"), &trace.final_profile_csv())?;
        summaries.push(json!({
            "trace": k,
            "beta": r.beta,
            "scale_exponent_used": unit.scale_exponent_used,
            "scale_exponents_tried": unit.tried,
            "status": trace.status,
            "halt_reason": trace.halt_reason,
            "final_alpha": trace.last().alpha,
            "final_residual": trace.last().residual,
            "final_margin": trace.last().margin,
            "lipschitz_estimate": trace.lipschitz_estimate(),
        }));
    }
    out.write("traces.csv", &table)?;
    out.set("crossings", rep.records.len());
    out.set("traces", summaries);
    Ok(())
}
