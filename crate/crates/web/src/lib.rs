//! Browser bindings: each export takes plain numbers/strings and returns a
//! JSON document the page plots directly.

use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

use fracbvp::eigen::{eigen_at, lambda1_bounds, MeshSpec};
use fracbvp::kernel::Order;
use fracbvp::ode::Dopri5;
use fracbvp::operator::{NonlinearityFamily, WeightFamily};
use fracbvp::shooting::{first_zero, find_crossings, HenonParams, ScanOptions};
use fracbvp::sublinear::{find_bracket, monotone_solve};

fn weight(spec: &str) -> fracbvp::Result<WeightFamily> {
    let w: WeightFamily = spec.parse()?;
    w.validate()?;
    Ok(w)
}

fn mesh(n: usize) -> MeshSpec {
    MeshSpec { elements: n.clamp(8, 800), grading: None }
}

pub fn eigenpair_json(alpha: f64, weight_spec: &str, n: usize) -> fracbvp::Result<Value> {
    let ord = Order::new(alpha)?;
    let h = weight(weight_spec)?;
    let b = lambda1_bounds(ord, &h)?;
    let (_, e) = eigen_at(ord, &h, &mesh(n))?;
    Ok(json!({
        "lambda1": e.lambda1,
        "lower": b.lower,
        "upper": b.upper,
        "t": e.phi1.mesh().nodes(),
        "u": e.phi1.values(),
    }))
}

pub fn sublinear_json(alpha: f64, weight_spec: &str, f_spec: &str, n: usize) -> fracbvp::Result<Value> {
    let ord = Order::new(alpha)?;
    let h = weight(weight_spec)?;
    let f: NonlinearityFamily = f_spec.parse()?;
    f.validate()?;
    let (op, e) = eigen_at(ord, &h, &mesh(n))?;
    let bracket = find_bracket(&e, &f, &op)?;
    let r = monotone_solve(&bracket, &f, &op, 1e-10, 100_000)?;
    Ok(json!({
        "iterations": r.iterations,
        "residual": r.residual,
        "t": r.solution.mesh().nodes(),
        "u": r.solution.values(),
        "lower": bracket.lower.values(),
        "upper": bracket.upper.values(),
    }))
}

/// First zero z(beta) on a log grid; `null` where the solution stays
/// positive up to the horizon. Crossings of z = zeta are polished.
pub fn shooting_map_json(l: f64, p: f64, zeta: f64, beta_min: f64, beta_max: f64, points: usize) -> fracbvp::Result<Value> {
    let params = HenonParams::new(l, p)?;
    let solver = Dopri5::default();
    let points = points.clamp(2, 2000);
    let horizon = zeta + 2.0;
    let ratio = (beta_max / beta_min).ln();
    let betas: Vec<f64> = (0..points)
        .map(|k| beta_min * (ratio * k as f64 / (points - 1) as f64).exp())
        .collect();
    let z: Vec<Option<f64>> = betas
        .iter()
        .map(|&b| first_zero(b, &params, horizon, &solver).ok().map(|d| d.z))
        .collect();
    let opts = ScanOptions { beta_min, beta_max, points: points.max(200), ..ScanOptions::default() };
    let report = find_crossings(zeta, &params, &opts, &solver)?;
    let crossings: Vec<Value> = report
        .records
        .iter()
        .map(|r| json!({ "beta": r.beta, "morse_index": r.morse_index, "z_prime": r.z_prime }))
        .collect();
    Ok(json!({ "beta": betas, "z": z, "crossings": crossings }))
}

fn js(r: fracbvp::Result<Value>) -> Result<String, JsValue> {
    r.map(|v| v.to_string()).map_err(|e| JsValue::from_str(&e.to_string()))
}

#[wasm_bindgen]
pub fn eigenpair(alpha: f64, weight: &str, n: usize) -> Result<String, JsValue> {
    js(eigenpair_json(alpha, weight, n))
}

#[wasm_bindgen]
pub fn sublinear_solution(alpha: f64, weight: &str, nonlinearity: &str, n: usize) -> Result<String, JsValue> {
    js(sublinear_json(alpha, weight, nonlinearity, n))
}

#[wasm_bindgen]
pub fn shooting_map(l: f64, p: f64, zeta: f64, beta_min: f64, beta_max: f64, points: usize) -> Result<String, JsValue> {
    js(shooting_map_json(l, p, zeta, beta_min, beta_max, points))
}
