//! Independent finite-difference reference for `u'' + g(u) = 0`, `u(0) = u(1) = 0`.

#![allow(dead_code)]

/// Uniform-grid Newton solve, second-order central differences.
pub fn fd_solve(n: usize, g: impl Fn(f64) -> f64, dg: impl Fn(f64) -> f64, guess: impl Fn(f64) -> f64) -> Vec<f64> {
    let h = 1.0 / n as f64;
    let h2 = h * h;
    let mut u: Vec<f64> = (0..=n).map(|i| guess(i as f64 * h)).collect();
    for _ in 0..100 {
        // F_i = (u_{i-1} - 2u_i + u_{i+1})/h² + g(u_i), interior i
        let m = n - 1;
        let mut rhs = vec![0.0; m];
        let mut diag = vec![0.0; m];
        for k in 0..m {
            let i = k + 1;
            rhs[k] = -((u[i - 1] - 2.0 * u[i] + u[i + 1]) / h2 + g(u[i]));
            diag[k] = -2.0 / h2 + dg(u[i]);
        }
        let off = 1.0 / h2;
        let du = thomas(off, &diag, &rhs);
        let mut theta = 1.0;
        let norm = |v: &[f64]| v.iter().fold(0.0f64, |a, x| a.max(x.abs()));
        let r0 = norm(&rhs);
        loop {
            let cand: Vec<f64> = (0..=n)
                .map(|i| if i == 0 || i == n { 0.0 } else { (u[i] + theta * du[i - 1]).max(0.0) })
                .collect();
            let r: Vec<f64> = (1..n)
                .map(|i| (cand[i - 1] - 2.0 * cand[i] + cand[i + 1]) / h2 + g(cand[i]))
                .collect();
            if norm(&r) < r0 || theta < 1e-6 {
                u = cand;
                break;
            }
            theta *= 0.5;
        }
        if norm(&du) * theta < 1e-14 * norm(&u).max(1.0) {
            break;
        }
    }
    u
}

fn thomas(off: f64, diag: &[f64], rhs: &[f64]) -> Vec<f64> {
    let m = diag.len();
    let mut c = vec![0.0; m];
    let mut d = vec![0.0; m];
    c[0] = off / diag[0];
    d[0] = rhs[0] / diag[0];
    for i in 1..m {
        let den = diag[i] - off * c[i - 1];
        c[i] = off / den;
        d[i] = (rhs[i] - off * d[i - 1]) / den;
    }
    let mut x = vec![0.0; m];
    x[m - 1] = d[m - 1];
    for i in (0..m - 1).rev() {
        x[i] = d[i] - c[i] * x[i + 1];
    }
    x
}

/// Richardson-extrapolated FD solution, evaluated anywhere by local cubic interpolation.
pub struct Reference {
    n: usize,
    values: Vec<f64>,
}

impl Reference {
    pub fn new(n: usize, g: impl Fn(f64) -> f64 + Copy, dg: impl Fn(f64) -> f64 + Copy, guess: impl Fn(f64) -> f64 + Copy) -> Self {
        let coarse = fd_solve(n, g, dg, guess);
        let fine = fd_solve(2 * n, g, dg, guess);
        let values = (0..=n).map(|i| (4.0 * fine[2 * i] - coarse[i]) / 3.0).collect();
        Reference { n, values }
    }

    pub fn eval(&self, t: f64) -> f64 {
        let x = t * self.n as f64;
        let k = (x.floor() as isize - 1).clamp(0, self.n as isize - 3) as usize;
        let mut out = 0.0;
        for a in 0..4 {
            let mut w = 1.0;
            for b in 0..4 {
                if a != b {
                    w *= (x - (k + b) as f64) / (a as f64 - b as f64);
                }
            }
            out += w * self.values[k + a];
        }
        out
    }

    pub fn sup(&self) -> f64 {
        self.values.iter().fold(0.0, |a: f64, x| a.max(x.abs()))
    }
}
