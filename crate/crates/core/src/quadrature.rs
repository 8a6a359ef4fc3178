//! Gauss-Legendre rules and a composite integrator that grades panels
//! geometrically toward both endpoints, for integrands with power-type
//! behavior at 0 and 1.

use std::f64::consts::PI;

/// Nodes and weights of the `n`-point Gauss-Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        // Tricomi initial guess, then Newton on P_n
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, z);
        dp = if d != 0.0 { d } else { dp };
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

fn legendre_with_derivative(n: usize, z: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = z;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let pn = if n == 0 { 1.0 } else { p1 };
    let pm = if n == 0 { 0.0 } else { p0 };
    let d = n as f64 * (z * pn - pm) / (z * z - 1.0);
    (pn, d)
}

/// `∫₀¹ g(s) ds` by composite Gauss-Legendre.
///
/// Panels shrink geometrically (factor 2, down to `2^-48`) toward 0 and 1 and
/// are uniform in the middle; `breakpoints` inside `(0,1)` are added as panel
/// boundaries.
pub fn integrate_unit<F: Fn(f64) -> f64>(g: F, breakpoints: &[f64]) -> f64 {
    let (x, w) = gauss_legendre(20);
    let mut edges = vec![0.0, 1.0];
    for k in 2..=48 {
        let d = 0.5f64.powi(k);
        edges.push(d);
        edges.push(1.0 - d);
    }
    for k in 1..64 {
        edges.push(0.25 + 0.5 * k as f64 / 64.0);
    }
    edges.extend(breakpoints.iter().copied().filter(|b| *b > 0.0 && *b < 1.0));
    edges.sort_by(f64::total_cmp);
    edges.dedup();
    let mut total = 0.0;
    for win in edges.windows(2) {
        let (a, b) = (win[0], win[1]);
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        let panel: f64 = x.iter().zip(&w).map(|(xi, wi)| wi * g(mid + half * xi)).sum();
        total += half * panel;
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn rule_integrates_polynomials_exactly() {
        let (x, w) = gauss_legendre(7);
        assert_relative_eq!(w.iter().sum::<f64>(), 2.0, max_relative = 1e-14);
        // degree 13 is exact for 7 points
        let q: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(12)).sum();
        assert_relative_eq!(q, 2.0 / 13.0, max_relative = 1e-13);
    }

    #[test]
    fn beta_moment() {
        for &a in &[1.1, 1.5, 2.0] {
            let q = integrate_unit(|s: f64| s.powf(a) * (1.0 - s).powf(a), &[]);
            let g = statrs::function::gamma::gamma;
            let exact = g(a + 1.0).powi(2) / g(2.0 * a + 2.0);
            assert_relative_eq!(q, exact, max_relative = 1e-12);
        }
        let q = integrate_unit(|s: f64| s * s * (1.0 - s) * (1.0 - s), &[]);
        assert_relative_eq!(q, 1.0 / 30.0, max_relative = 1e-13);
    }

    #[test]
    fn kinked_integrand_with_breakpoint() {
        let q = integrate_unit(|s: f64| (s - 0.3).abs().powf(1.5), &[0.3]);
        let exact = (0.3f64.powf(2.5) + 0.7f64.powf(2.5)) / 2.5;
        assert_relative_eq!(q, exact, max_relative = 1e-12);
    }
}
