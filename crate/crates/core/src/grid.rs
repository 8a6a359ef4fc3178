//! Meshes of `[0, 1]`, nodal grid functions and the weighted norms used to
//! measure them.

use std::fmt::Write as _;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::kernel::Order;

/// Smallest admissible number of elements.
pub const MIN_ELEMENTS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub enum Grading {
    Uniform,
    /// Nodes `(i/n)^q`, clustered at `t = 0`.
    Graded(f64),
}

/// Strictly increasing nodes `0 = t₀ < … < t_n = 1`.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct Mesh {
    nodes: Vec<f64>,
    grading: Grading,
}

impl Mesh {
    /// Mesh with `n` elements (`n + 1` nodes).
    pub fn new(n: usize, grading: Grading) -> Result<Self> {
        if n < MIN_ELEMENTS {
            return Err(Error::Config(format!(
                "mesh needs at least {MIN_ELEMENTS} elements, got {n}"
            )));
        }
        let nf = n as f64;
        let nodes: Vec<f64> = match grading {
            Grading::Uniform => (0..=n).map(|i| i as f64 / nf).collect(),
            Grading::Graded(q) => {
                if !(q.is_finite() && q >= 1.0) {
                    return Err(Error::Config(format!("grading exponent must be >= 1, got {q}")));
                }
                (0..=n).map(|i| (i as f64 / nf).powf(q)).collect()
            }
        };
        Ok(Mesh { nodes, grading })
    }

    /// Production default for order `α`: graded with
    /// `q = clamp(2/(α-1), 1, 3)` and 400 elements.
    pub fn default_for(ord: Order) -> Self {
        Mesh::new(400, Grading::Graded(default_grading_exponent(ord)))
            .expect("default mesh parameters are valid")
    }

    /// Arbitrary node set; must start at 0, end at 1 and increase strictly.
    pub fn from_nodes(nodes: Vec<f64>) -> Result<Self> {
        if nodes.len() < MIN_ELEMENTS + 1 {
            return Err(Error::Config(format!(
                "mesh needs at least {} nodes, got {}",
                MIN_ELEMENTS + 1,
                nodes.len()
            )));
        }
        if nodes[0] != 0.0 || *nodes.last().unwrap() != 1.0 {
            return Err(Error::Config("mesh must start at 0 and end at 1".into()));
        }
        if nodes.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Config("mesh nodes must increase strictly".into()));
        }
        Ok(Mesh {
            nodes,
            grading: Grading::Uniform,
        })
    }

    /// Copy of the mesh with `t0` inserted as a node, unless a node already
    /// sits within `1e-14` of it.
    pub fn with_breakpoint(&self, t0: f64) -> Mesh {
        if !(t0 > 0.0 && t0 < 1.0) || self.nodes.iter().any(|x| (x - t0).abs() <= 1e-14) {
            return self.clone();
        }
        let pos = self.nodes.partition_point(|x| *x < t0);
        let mut nodes = self.nodes.clone();
        nodes.insert(pos, t0);
        Mesh {
            nodes,
            grading: self.grading,
        }
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn grading(&self) -> Grading {
        self.grading
    }

    /// Number of nodes.
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn elements(&self) -> usize {
        self.nodes.len() - 1
    }

    /// Index `k` of the element `[t_k, t_{k+1}]` containing `t`.
    pub fn locate(&self, t: f64) -> usize {
        let k = self.nodes.partition_point(|x| *x <= t);
        k.saturating_sub(1).min(self.elements() - 1)
    }
}

pub fn default_grading_exponent(ord: Order) -> f64 {
    (2.0 / (ord.value() - 1.0)).clamp(1.0, 3.0)
}

/// Nodal values of a function on a mesh; piecewise linear in between.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    mesh: Arc<Mesh>,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(mesh: Arc<Mesh>, values: Vec<f64>) -> Result<Self> {
        if values.len() != mesh.len() {
            return Err(Error::MeshMismatch {
                expected: mesh.len(),
                got: values.len(),
            });
        }
        Ok(GridFunction { mesh, values })
    }

    pub fn from_fn(mesh: Arc<Mesh>, f: impl Fn(f64) -> f64) -> Self {
        let values = mesh.nodes().iter().map(|&t| f(t)).collect();
        GridFunction { mesh, values }
    }

    pub fn zeros(mesh: Arc<Mesh>) -> Self {
        let values = vec![0.0; mesh.len()];
        GridFunction { mesh, values }
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        GridFunction::new(self.mesh.clone(), values)
    }

    pub fn scaled(&self, c: f64) -> Self {
        GridFunction {
            mesh: self.mesh.clone(),
            values: self.values.iter().map(|v| c * v).collect(),
        }
    }

    /// Piecewise-linear interpolant at `t ∈ [0,1]`.
    pub fn eval(&self, t: f64) -> f64 {
        let nodes = self.mesh.nodes();
        let k = self.mesh.locate(t);
        let (a, b) = (nodes[k], nodes[k + 1]);
        let lam = ((t - a) / (b - a)).clamp(0.0, 1.0);
        (1.0 - lam) * self.values[k] + lam * self.values[k + 1]
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `max |self - other|`; the meshes must match.
    pub fn sup_distance(&self, other: &GridFunction) -> Result<f64> {
        self.check_same_mesh(other)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs())))
    }

    pub(crate) fn check_same_mesh(&self, other: &GridFunction) -> Result<()> {
        if Arc::ptr_eq(&self.mesh, &other.mesh) || self.mesh == other.mesh {
            Ok(())
        } else {
            Err(Error::MeshMismatch {
                expected: self.mesh.len(),
                got: other.mesh.len(),
            })
        }
    }

    /// True when every interior nodal value is strictly positive.
    pub fn is_positive_interior(&self) -> bool {
        let n = self.values.len();
        self.values[1..n - 1].iter().all(|v| *v > 0.0)
    }

    /// Two-column CSV `t,value` with 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,value\n");
        for (t, v) in self.mesh.nodes().iter().zip(&self.values) {
            let _ = writeln!(out, "{},{}", fmt_f64(*t), fmt_f64(*v));
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut nodes = Vec::new();
        let mut values = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || (lineno == 0 && line.starts_with('t')) {
                continue;
            }
            let mut cols = line.split(',');
            let parse = |c: Option<&str>| -> Result<f64> {
                c.and_then(|s| s.trim().parse::<f64>().ok()).ok_or_else(|| {
                    Error::Config(format!("bad grid function CSV line {}: {line}", lineno + 1))
                })
            };
            nodes.push(parse(cols.next())?);
            values.push(parse(cols.next())?);
        }
        let mesh = Mesh::from_nodes(nodes)?;
        GridFunction::new(Arc::new(mesh), values)
    }
}

/// Format with 17 significant digits so values round-trip exactly.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// `‖u‖∞`, `‖u‖_{C_{2-α}} = max t^(2-α)|u(t)|`, and the e-norm
/// `inf{ρ : |u(t)| ≤ ρ t^(α-1)(1-t)}` taken over interior nodes.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct WeightedNorms {
    pub sup: f64,
    pub c2ma: f64,
    pub enorm: f64,
}

pub fn norms(u: &GridFunction, ord: Order) -> WeightedNorms {
    let alpha = ord.value();
    let nodes = u.mesh().nodes();
    let vals = u.values();
    let sup = u.sup_norm();
    let mut c2ma: f64 = 0.0;
    let mut enorm: f64 = 0.0;
    let last = nodes.len() - 1;
    for (i, (&t, &v)) in nodes.iter().zip(vals).enumerate() {
        if t > 0.0 {
            c2ma = c2ma.max(t.powf(2.0 - alpha) * v.abs());
        }
        if i > 0 && i < last {
            enorm = enorm.max(v.abs() / ord.e(t));
        }
    }
    WeightedNorms { sup, c2ma, enorm }
}

/// Largest violation of `t^(2-α) u(t) ≥ (α-1) t(1-t) ‖u‖_{C_{2-α}}` over
/// the nodes (zero or negative when the envelope holds).
pub fn envelope_violation(u: &GridFunction, ord: Order) -> f64 {
    let alpha = ord.value();
    let c = norms(u, ord).c2ma;
    u.mesh()
        .nodes()
        .iter()
        .zip(u.values())
        .map(|(&t, &v)| (alpha - 1.0) * t * (1.0 - t) * c - t.powf(2.0 - alpha) * v)
        .fold(f64::NEG_INFINITY, f64::max)
}
