//! Green's function of the fractional Dirichlet problem
//! `-D^α v = g` on `(0,1)`, `v(0) = v(1) = 0`, for `1 < α ≤ 2`:
//!
//! ```text
//!            ⎧ ((t(1-s))^(α-1) - (t-s)^(α-1)) / Γ(α),   0 ≤ s ≤ t ≤ 1
//! G(t,s,α) = ⎨
//!            ⎩ (t(1-s))^(α-1) / Γ(α),                   0 ≤ t ≤ s ≤ 1
//! ```
//!
//! The kernel is continuous but has a derivative kink along `s = t`, so every
//! integral of `G` against a piecewise-linear function is evaluated in closed
//! form on sub-intervals split at `s = t`.

use crate::error::{Error, Result};
use crate::grid::Mesh;

/// Fractional order `α ∈ (1, 2]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, serde::Serialize)]
pub struct Order(f64);

impl Order {
    pub fn new(alpha: f64) -> Result<Self> {
        if alpha.is_finite() && alpha > 1.0 && alpha <= 2.0 {
            Ok(Order(alpha))
        } else {
            Err(Error::Domain(format!("order alpha must lie in (1, 2], got {alpha}")))
        }
    }

    pub fn classical() -> Self {
        Order(2.0)
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.0
    }

    /// `Γ(α)`.
    pub fn gamma(self) -> f64 {
        statrs::function::gamma::gamma(self.0)
    }

    /// The boundary profile `e(t) = t^(α-1) (1-t)`.
    pub fn e(self, t: f64) -> f64 {
        t.powf(self.0 - 1.0) * (1.0 - t)
    }
}

/// A point `(t, s)` of the unit square.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelPoint {
    pub t: f64,
    pub s: f64,
}

impl KernelPoint {
    pub fn new(t: f64, s: f64) -> Result<Self> {
        let inside = |x: f64| (0.0..=1.0).contains(&x);
        if inside(t) && inside(s) {
            Ok(KernelPoint { t, s })
        } else {
            Err(Error::Domain(format!("kernel point ({t}, {s}) outside [0,1]^2")))
        }
    }
}

/// `Γ(x)` for `x > 0`.
pub fn gamma(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::Domain(format!("gamma requires a positive argument, got {x}")));
    }
    Ok(statrs::function::gamma::gamma(x))
}

/// `G(t, s, α)`.
pub fn green_eval(pt: KernelPoint, ord: Order) -> f64 {
    green_raw(pt.t, pt.s, ord.value(), ord.gamma())
}

#[inline]
pub(crate) fn green_raw(t: f64, s: f64, alpha: f64, gamma_alpha: f64) -> f64 {
    let a1 = alpha - 1.0;
    let head = (t * (1.0 - s)).powf(a1);
    if s <= t {
        (head - (t - s).powf(a1)) / gamma_alpha
    } else {
        head / gamma_alpha
    }
}

/// `G(s, s, α) = (s(1-s))^(α-1) / Γ(α)`, the maximum of `G(·, s, α)`.
pub fn green_diagonal(s: f64, ord: Order) -> f64 {
    (s * (1.0 - s)).powf(ord.value() - 1.0) / ord.gamma()
}

/// `∫₀¹ G(t, s, α) ds = t^(α-1)(1-t) / Γ(α+1)`.
pub fn green_row_integral(t: f64, ord: Order) -> f64 {
    ord.e(t) / statrs::function::gamma::gamma(ord.value() + 1.0)
}

/// Moments `(∫ₐᵇ k(s) ds, ∫ₐᵇ k(s) (s-a)/(b-a) ds)` of a kernel piece on one
/// element. Together they give the weights of the two hat functions living
/// on `[a, b]`: the left hat gets `m0 - m1`, the right hat gets `m1`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub(crate) struct ElementMoments {
    pub m0: f64,
    pub m1: f64,
}

impl ElementMoments {
    #[inline]
    pub fn left(self) -> f64 {
        self.m0 - self.m1
    }

    #[inline]
    pub fn right(self) -> f64 {
        self.m1
    }
}

/// Moments of `(c - s)^β` over `[a, b]` with `a ≤ b ≤ c`.
///
/// With `s = a + (b-a)x` and `ε = (b-a)/(c-a) ∈ (0, 1]` the moments are
/// `(b-a)(c-a)^β ∫₀¹ (1-εx)^β {1, x} dx`. Both integrals are elementary; for
/// narrow elements (small `ε`) the closed forms cancel, so the binomial
/// series of the same antiderivatives is summed instead.
#[inline]
pub(crate) fn reflected_power_moments(c: f64, a: f64, b: f64, beta: f64) -> ElementMoments {
    let width = b - a;
    if width <= 0.0 {
        return ElementMoments::default();
    }
    let ra = c - a;
    let eps = (width / ra).min(1.0);
    let (i0, i1) = unit_power_moments(eps, beta);
    let scale = width * ra.powf(beta);
    ElementMoments {
        m0: scale * i0,
        m1: scale * i1,
    }
}

/// `(∫₀¹ (1-εx)^β dx, ∫₀¹ (1-εx)^β x dx)` for `0 < ε ≤ 1`.
fn unit_power_moments(eps: f64, beta: f64) -> (f64, f64) {
    if eps < 0.25 {
        // (1-εx)^β = Σ_k binom(β,k) (-εx)^k
        let mut coeff = 1.0;
        let mut i0 = 0.0;
        let mut i1 = 0.0;
        for k in 0..200 {
            let kf = k as f64;
            let t0 = coeff / (kf + 1.0);
            let t1 = coeff / (kf + 2.0);
            i0 += t0;
            i1 += t1;
            if t0.abs() < 1e-18 * i0.abs() && k > 1 {
                break;
            }
            coeff *= -(beta - kf) * eps / (kf + 1.0);
        }
        (i0, i1)
    } else {
        let p1 = beta + 1.0;
        let p2 = beta + 2.0;
        let rest = 1.0 - eps;
        let i0 = (1.0 - rest.powf(p1)) / (p1 * eps);
        let j = (1.0 - rest.powf(p2)) / (p2 * eps);
        (i0, (i0 - j) / eps)
    }
}

/// `∫₀¹ G(t, s, α) hat_j(s) ds` in closed form.
///
/// `hat_j` is the piecewise-linear nodal basis function of node `j` on the
/// mesh. The element containing `s = t` is split at `t`.
pub fn green_hat_integral(t: f64, node_index: usize, mesh: &Mesh, ord: Order) -> Result<f64> {
    let nodes = mesh.nodes();
    if node_index >= nodes.len() {
        return Err(Error::Domain(format!(
            "node index {node_index} out of range for mesh with {} nodes",
            nodes.len()
        )));
    }
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::Domain(format!("t = {t} outside [0,1]")));
    }
    let alpha = ord.value();
    let g = ord.gamma();
    let mut total = 0.0;
    if node_index > 0 {
        let (a, b) = (nodes[node_index - 1], nodes[node_index]);
        total += element_weights(t, a, b, alpha).1;
    }
    if node_index + 1 < nodes.len() {
        let (a, b) = (nodes[node_index], nodes[node_index + 1]);
        total += element_weights(t, a, b, alpha).0;
    }
    // head and tail cancel near s = 0; the exact value is nonnegative
    Ok((total / g).max(0.0))
}

/// Weights (left, right) of `∫ₐᵇ Γ(α) G(t, s, α) · linear(s) ds` for the two
/// hat functions on the element `[a, b]`.
pub(crate) fn element_weights(t: f64, a: f64, b: f64, alpha: f64) -> (f64, f64) {
    if t <= 0.0 || t >= 1.0 {
        return (0.0, 0.0);
    }
    let a1 = alpha - 1.0;
    let head = reflected_power_moments(1.0, a, b, a1);
    let tf = t.powf(a1);
    let mut left = tf * head.left();
    let mut right = tf * head.right();
    if a < t {
        let width = b - a;
        let upper = b.min(t);
        let tail = reflected_power_moments(t, a, upper, a1);
        // Moments were taken relative to [a, upper]; rescale to the hat on [a, b].
        let frac = (upper - a) / width;
        let m1 = tail.m1 * frac;
        left -= tail.m0 - m1;
        right -= m1;
    }
    (left, right)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grading;
    use approx::assert_relative_eq;

    #[test]
    fn gamma_known_values() {
        assert_relative_eq!(gamma(1.0).unwrap(), 1.0, max_relative = 1e-14);
        assert_relative_eq!(gamma(2.0).unwrap(), 1.0, max_relative = 1e-14);
        assert_relative_eq!(
            gamma(0.5).unwrap(),
            std::f64::consts::PI.sqrt(),
            max_relative = 1e-13
        );
        assert_relative_eq!(gamma(5.0).unwrap(), 24.0, max_relative = 1e-13);
        assert!(gamma(0.0).is_err());
        assert!(gamma(-1.5).is_err());
    }

    #[test]
    fn order_range() {
        assert!(Order::new(1.0).is_err());
        assert!(Order::new(2.0).is_ok());
        assert!(Order::new(2.0001).is_err());
        assert!(Order::new(f64::NAN).is_err());
    }

    #[test]
    fn classical_kernel() {
        let g = green_eval(KernelPoint::new(0.5, 0.5).unwrap(), Order::classical());
        assert_relative_eq!(g, 0.25, max_relative = 1e-15);
        let g = green_eval(KernelPoint::new(0.7, 0.2).unwrap(), Order::classical());
        assert_relative_eq!(g, 0.2 * 0.3, max_relative = 1e-14);
        let g = green_eval(KernelPoint::new(0.2, 0.7).unwrap(), Order::classical());
        assert_relative_eq!(g, 0.2 * 0.3, max_relative = 1e-14);
    }

    #[test]
    fn vanishes_on_s_boundary() {
        for &a in &[1.1, 1.5, 2.0] {
            let ord = Order::new(a).unwrap();
            assert_eq!(green_eval(KernelPoint::new(0.3, 0.0).unwrap(), ord), 0.0);
            assert_eq!(green_eval(KernelPoint::new(0.3, 1.0).unwrap(), ord), 0.0);
        }
    }

    #[test]
    fn row_integral_closed_form() {
        let ord = Order::new(1.5).unwrap();
        let expected = 0.25f64.sqrt() * 0.75 / gamma(2.5).unwrap();
        assert_relative_eq!(green_row_integral(0.25, ord), expected, max_relative = 1e-14);
        assert_relative_eq!(expected, 0.282_094_791_773_878_1, max_relative = 1e-12);
    }

    #[test]
    fn hat_integrals_sum_to_row_integral() {
        for &(a, grading) in &[
            (1.1, Grading::Uniform),
            (1.5, Grading::Graded(3.0)),
            (2.0, Grading::Uniform),
        ] {
            let ord = Order::new(a).unwrap();
            let mesh = Mesh::new(37, grading).unwrap();
            for &t in &[0.013, 0.25, 0.5, 0.731, 0.999] {
                let sum: f64 = (0..mesh.len())
                    .map(|j| green_hat_integral(t, j, &mesh, ord).unwrap())
                    .sum();
                assert!((sum - green_row_integral(t, ord)).abs() < 1e-14, "alpha={a} t={t}");
            }
            // t on a node
            let t = mesh.nodes()[9];
            let sum: f64 = (0..mesh.len())
                .map(|j| green_hat_integral(t, j, &mesh, ord).unwrap())
                .sum();
            assert!((sum - green_row_integral(t, ord)).abs() < 1e-14);
        }
    }

    #[test]
    fn hat_integrals_vanish_at_boundary_rows() {
        let mesh = Mesh::new(16, Grading::Uniform).unwrap();
        let ord = Order::new(1.3).unwrap();
        for j in 0..mesh.len() {
            assert_eq!(green_hat_integral(0.0, j, &mesh, ord).unwrap(), 0.0);
            assert_eq!(green_hat_integral(1.0, j, &mesh, ord).unwrap(), 0.0);
        }
        assert!(green_hat_integral(0.5, mesh.len(), &mesh, ord).is_err());
    }

    /// Composite Gauss-Legendre on each half of the hat support, split at
    /// the kink, refined ten times per element.
    fn hat_oracle(t: f64, j: usize, mesh: &Mesh, ord: Order) -> f64 {
        let (x, w) = crate::quadrature::gauss_legendre(12);
        let nodes = mesh.nodes();
        let hat = |s: f64| {
            let tj = nodes[j];
            if s <= tj {
                if j == 0 { 0.0 } else { (s - nodes[j - 1]) / (tj - nodes[j - 1]) }
            } else if j + 1 < nodes.len() {
                (nodes[j + 1] - s) / (nodes[j + 1] - tj)
            } else {
                0.0
            }
        };
        let lo = if j == 0 { 0.0 } else { nodes[j - 1] };
        let hi = if j + 1 == nodes.len() { 1.0 } else { nodes[j + 1] };
        let mut breaks = vec![lo, nodes[j], hi];
        if t > lo && t < hi {
            breaks.push(t);
        }
        breaks.sort_by(f64::total_cmp);
        breaks.dedup();
        let mut total = 0.0;
        for win in breaks.windows(2) {
            let (a, b) = (win[0], win[1]);
            let pieces = 10;
            for k in 0..pieces {
                let pa = a + (b - a) * k as f64 / pieces as f64;
                let pb = a + (b - a) * (k + 1) as f64 / pieces as f64;
                for (xi, wi) in x.iter().zip(&w) {
                    let s = 0.5 * (pa + pb) + 0.5 * (pb - pa) * xi;
                    total += 0.5 * (pb - pa) * wi * green_eval(KernelPoint { t, s }, ord) * hat(s);
                }
            }
        }
        total
    }

    #[test]
    fn unit_moments_match_quadrature_on_both_branches() {
        let (x, w) = crate::quadrature::gauss_legendre(40);
        for &beta in &[0.1, 0.5, 0.9, 1.0] {
            for &eps in &[1e-9, 1e-4, 0.1, 0.2499, 0.25, 0.6] {
                let (i0, i1) = unit_power_moments(eps, beta);
                let q = |k: i32| -> f64 {
                    x.iter()
                        .zip(&w)
                        .map(|(xi, wi)| {
                            let y = 0.5 * (xi + 1.0);
                            0.5 * wi * (1.0 - eps * y).powf(beta) * y.powi(k)
                        })
                        .sum()
                };
                assert!((i0 - q(0)).abs() < 2e-15, "beta={beta} eps={eps}");
                assert!((i1 - q(1)).abs() < 2e-15, "beta={beta} eps={eps}");
            }
            let (i0, i1) = unit_power_moments(1.0, beta);
            assert!((i0 - 1.0 / (beta + 1.0)).abs() < 1e-15);
            assert!((i1 - 1.0 / ((beta + 1.0) * (beta + 2.0))).abs() < 1e-15);
        }
    }

    #[test]
    fn classical_hat_integrals_match_quadrature_oracle() {
        let mesh = Mesh::new(20, Grading::Uniform).unwrap();
        let ord = Order::classical();
        for &t in &[0.1, 0.33, 0.5, 0.87] {
            for j in 0..mesh.len() {
                let exact = green_hat_integral(t, j, &mesh, ord).unwrap();
                let oracle = hat_oracle(t, j, &mesh, ord);
                assert!((exact - oracle).abs() < 1e-14, "t={t} j={j}: {exact} vs {oracle}");
            }
        }
    }

    #[test]
    fn fractional_hat_integrals_match_quadrature_oracle() {
        // away from the (t - s)^(α-1) endpoint singularity the oracle is accurate
        let mesh = Mesh::new(12, Grading::Uniform).unwrap();
        let ord = Order::new(1.75).unwrap();
        let t = 0.5;
        for j in 0..mesh.len() {
            let exact = green_hat_integral(t, j, &mesh, ord).unwrap();
            let oracle = hat_oracle(t, j, &mesh, ord);
            assert!((exact - oracle).abs() < 1e-7, "j={j}: {exact} vs {oracle}");
        }
    }
}
