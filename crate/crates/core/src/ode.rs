//! Dormand–Prince 5(4) with step-size control and dense output.

use std::ops::ControlFlow;

use crate::error::{Error, Result};

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

/// One accepted step with its continuous extension.
#[derive(Debug, Clone)]
pub struct Segment<const N: usize> {
    pub x0: f64,
    pub h: f64,
    pub y0: [f64; N],
    pub y1: [f64; N],
    rcont: [[f64; N]; 5],
}

impl<const N: usize> Segment<N> {
    pub fn x1(&self) -> f64 {
        self.x0 + self.h
    }

    /// Dense output at `x ∈ [x0, x0 + h]`.
    pub fn eval(&self, x: f64) -> [f64; N] {
        let th = (x - self.x0) / self.h;
        let th1 = 1.0 - th;
        let r = &self.rcont;
        std::array::from_fn(|i| r[0][i] + th * (r[1][i] + th1 * (r[2][i] + th * (r[3][i] + th1 * r[4][i]))))
    }

    pub fn component(&self, x: f64, i: usize) -> f64 {
        self.eval(x)[i]
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Dopri5 {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
}

impl Default for Dopri5 {
    fn default() -> Self {
        Dopri5 {
            rtol: 1e-10,
            atol: 1e-12,
            max_steps: 1_000_000,
        }
    }
}

fn axpy<const N: usize>(y: &[f64; N], h: f64, terms: &[(f64, &[f64; N])]) -> [f64; N] {
    std::array::from_fn(|i| y[i] + h * terms.iter().map(|(c, k)| c * k[i]).sum::<f64>())
}

/// A single Dormand–Prince step; returns `(y1, k1..k7, error estimate)`.
pub fn step<const N: usize>(
    rhs: &impl Fn(f64, &[f64; N]) -> [f64; N],
    x: f64,
    y: &[f64; N],
    k1: &[f64; N],
    h: f64,
) -> ([f64; N], [[f64; N]; 7], [f64; N]) {
    let k2 = rhs(x + C2 * h, &axpy(y, h, &[(A21, k1)]));
    let k3 = rhs(x + C3 * h, &axpy(y, h, &[(A31, k1), (A32, &k2)]));
    let k4 = rhs(x + C4 * h, &axpy(y, h, &[(A41, k1), (A42, &k2), (A43, &k3)]));
    let k5 = rhs(x + C5 * h, &axpy(y, h, &[(A51, k1), (A52, &k2), (A53, &k3), (A54, &k4)]));
    let k6 = rhs(x + h, &axpy(y, h, &[(A61, k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]));
    let y1 = axpy(y, h, &[(A71, k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)]);
    let k7 = rhs(x + h, &y1);
    let err = std::array::from_fn(|i| {
        h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i])
    });
    (y1, [*k1, k2, k3, k4, k5, k6, k7], err)
}

fn dense<const N: usize>(x0: f64, h: f64, y0: &[f64; N], y1: &[f64; N], k: &[[f64; N]; 7]) -> Segment<N> {
    let mut r = [[0.0; N]; 5];
    for i in 0..N {
        let dy = y1[i] - y0[i];
        let bspl = h * k[0][i] - dy;
        r[0][i] = y0[i];
        r[1][i] = dy;
        r[2][i] = bspl;
        r[3][i] = dy - h * k[6][i] - bspl;
        r[4][i] = h * (D1 * k[0][i] + D3 * k[2][i] + D4 * k[3][i] + D5 * k[4][i] + D6 * k[5][i] + D7 * k[6][i]);
    }
    Segment {
        x0,
        h,
        y0: *y0,
        y1: *y1,
        rcont: r,
    }
}

/// One uncontrolled step of length `h` from `(x, y)`, with dense output.
pub fn segment_to<const N: usize>(
    rhs: &impl Fn(f64, &[f64; N]) -> [f64; N],
    x: f64,
    y: &[f64; N],
    h: f64,
) -> Segment<N> {
    let k1 = rhs(x, y);
    let (y1, k, _) = step(rhs, x, y, &k1, h);
    dense(x, h, y, &y1, &k)
}

impl Dopri5 {
    /// Integrate from `x0` toward `x_end`, landing exactly on every
    /// breakpoint in between. `on_step` sees each accepted segment and may
    /// stop the integration early.
    pub fn integrate<const N: usize>(
        &self,
        rhs: impl Fn(f64, &[f64; N]) -> [f64; N],
        x0: f64,
        y0: [f64; N],
        x_end: f64,
        breakpoints: &[f64],
        mut on_step: impl FnMut(&Segment<N>) -> ControlFlow<()>,
    ) -> Result<()> {
        if !(x_end > x0) {
            return Err(Error::Config(format!("integration needs x_end > x0, got {x0} -> {x_end}")));
        }
        let mut stops: Vec<f64> = breakpoints.iter().copied().filter(|b| *b > x0 && *b < x_end).collect();
        stops.sort_by(f64::total_cmp);
        stops.push(x_end);
        let mut next_stop = 0;

        let mut x = x0;
        let mut y = y0;
        let mut k1 = rhs(x, &y);
        let mut h = ((x_end - x0) * 1e-3).min(1e-2);
        let h_floor = 1e-14 * (1.0 + x0.abs().max(x_end.abs()));

        for _ in 0..self.max_steps {
            let stop = stops[next_stop];
            let mut hit = false;
            if x + h >= stop {
                h = stop - x;
                hit = true;
            }
            let (y1, k, e) = step(&rhs, x, &y, &k1, h);
            let err = (e
                .iter()
                .zip(&y)
                .zip(&y1)
                .map(|((e, a), b)| {
                    let sc = self.atol + self.rtol * a.abs().max(b.abs());
                    (e / sc).powi(2)
                })
                .sum::<f64>()
                / N as f64)
                .sqrt();
            if !err.is_finite() {
                h *= 0.1;
                if h < h_floor {
                    return Err(Error::Integration {
                        x,
                        reason: "non-finite state".into(),
                    });
                }
                continue;
            }
            let fac = (0.9 * err.powf(-0.2)).clamp(0.2, 10.0);
            if err <= 1.0 {
                let seg = dense(x, h, &y, &y1, &k);
                x = if hit { stop } else { x + h };
                y = y1;
                k1 = k[6];
                if on_step(&seg).is_break() {
                    return Ok(());
                }
                if hit {
                    next_stop += 1;
                    if next_stop == stops.len() {
                        return Ok(());
                    }
                }
                h *= fac;
            } else {
                h *= fac.min(1.0);
                if h < h_floor {
                    return Err(Error::Integration {
                        x,
                        reason: format!("step size {h:e} underflow"),
                    });
                }
            }
        }
        Err(Error::Integration {
            x,
            reason: format!("more than {} steps", self.max_steps),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn harmonic_oscillator_and_dense_output() {
        let rhs = |_x: f64, y: &[f64; 2]| [y[1], -y[0]];
        let mut segs = Vec::new();
        Dopri5::default()
            .integrate(rhs, 0.0, [0.0, 1.0], 10.0, &[3.0], |s| {
                segs.push(s.clone());
                ControlFlow::Continue(())
            })
            .unwrap();
        let last = segs.last().unwrap();
        assert_eq!(last.x1(), 10.0);
        assert!((last.y1[0] - 10f64.sin()).abs() < 1e-9);
        assert!(segs.iter().any(|s| s.x1() == 3.0));
        // the continuous extension is fourth order: error ~ rtol
        let mut worst: f64 = 0.0;
        for s in &segs {
            for k in 1..8 {
                let x = s.x0 + s.h * k as f64 / 8.0;
                let y = s.eval(x);
                worst = worst.max((y[0] - x.sin()).abs()).max((y[1] - x.cos()).abs());
            }
            assert_eq!(s.eval(s.x0), s.y0);
            let e = s.eval(s.x1());
            assert!((e[0] - s.y1[0]).abs() < 1e-15);
        }
        assert!(worst < 1e-8, "{worst:e}");
    }

    #[test]
    fn dense_output_is_exact_for_quartics() {
        // y' = 4x³ → y = x⁴, representable by the quartic interpolant
        let rhs = |x: f64, _y: &[f64; 1]| [4.0 * x.powi(3)];
        let k1 = rhs(0.0, &[0.0]);
        let (y1, k, _) = step(&rhs, 0.0, &[0.0], &k1, 1.0);
        let s = dense(0.0, 1.0, &[0.0], &y1, &k);
        for x in [0.1, 0.37, 0.5, 0.9] {
            assert!((s.eval(x)[0] - x.powi(4)).abs() < 1e-14, "{x}");
        }
    }

    #[test]
    fn early_stop() {
        let mut n = 0;
        Dopri5::default()
            .integrate(|_x, y: &[f64; 1]| [y[0]], 0.0, [1.0], 5.0, &[], |s| {
                n += 1;
                if s.y1[0] > 2.0 {
                    ControlFlow::Break(())
                } else {
                    ControlFlow::Continue(())
                }
            })
            .unwrap();
        assert!(n > 1);
    }
}
