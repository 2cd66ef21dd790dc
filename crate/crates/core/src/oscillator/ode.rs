//! Dormand–Prince 5(4) integrator with the standard 4th-order continuous
//! extension, specialized to the 4-component fundamental-solution state
//! `[zeta1, zeta1', zeta2, zeta2']`.

use crate::error::{Error, Result};

pub const DIM: usize = 4;
pub type State = [f64; DIM];

const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const B5: [f64; 7] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
    0.0,
];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];
// Coefficients of the 4th-order dense-output polynomial (Hairer & Wanner).
const D: [f64; 7] = [
    -12715105075.0 / 11282082432.0,
    0.0,
    87487479700.0 / 32700410799.0,
    -10690763975.0 / 1880347072.0,
    701980252875.0 / 199316789632.0,
    -1453857185.0 / 822651844.0,
    69997945.0 / 29380423.0,
];

/// One accepted step with its interpolation polynomial.
#[derive(Debug, Clone)]
struct DenseStep {
    t0: f64,
    h: f64,
    rcont: [[f64; DIM]; 5],
}

impl DenseStep {
    fn eval(&self, t: f64) -> State {
        let theta = (t - self.t0) / self.h;
        let theta1 = 1.0 - theta;
        let mut out = [0.0; DIM];
        for i in 0..DIM {
            out[i] = self.rcont[0][i]
                + theta
                    * (self.rcont[1][i]
                        + theta1
                            * (self.rcont[2][i]
                                + theta * (self.rcont[3][i] + theta1 * self.rcont[4][i])));
        }
        out
    }
}

/// Dense solution of `y' = f(t, y)` on a single directed interval.
#[derive(Debug, Clone)]
pub struct DenseSolution {
    t_start: f64,
    t_end: f64,
    steps: Vec<DenseStep>,
}

impl DenseSolution {
    pub fn t_start(&self) -> f64 {
        self.t_start
    }

    pub fn t_end(&self) -> f64 {
        self.t_end
    }

    pub fn end_state(&self) -> State {
        let last = self.steps.last().expect("nonempty solution");
        last.eval(self.t_end)
    }

    /// Evaluate the continuous extension; `t` is clamped to the interval.
    pub fn eval(&self, t: f64) -> State {
        let forward = self.t_end >= self.t_start;
        let t = if forward {
            t.clamp(self.t_start, self.t_end)
        } else {
            t.clamp(self.t_end, self.t_start)
        };
        // Binary search for the step containing t.
        let mut lo = 0usize;
        let mut hi = self.steps.len() - 1;
        while lo < hi {
            let mid = (lo + hi) / 2;
            let step = &self.steps[mid];
            let after = if forward {
                t > step.t0 + step.h
            } else {
                t < step.t0 + step.h
            };
            if after {
                lo = mid + 1;
            } else {
                hi = mid;
            }
        }
        self.steps[lo].eval(t)
    }
}

/// Integrate from `t0` to `t1` (either direction) with local error `tol`,
/// storing dense output for every accepted step.
pub fn integrate<F>(rhs: F, t0: f64, t1: f64, y0: State, tol: f64) -> Result<DenseSolution>
where
    F: Fn(f64, &State) -> State,
{
    assert!(tol > 0.0, "tolerance must be positive");
    if t0 == t1 {
        // Degenerate interval: a single zero-length "step" holding y0.
        let mut rcont = [[0.0; DIM]; 5];
        rcont[0] = y0;
        return Ok(DenseSolution {
            t_start: t0,
            t_end: t1,
            steps: vec![DenseStep { t0, h: 1.0, rcont }],
        });
    }
    let dir = (t1 - t0).signum();
    let span = (t1 - t0).abs();
    let mut t = t0;
    let mut y = y0;
    let mut f0 = rhs(t, &y);
    let mut h = dir * (span / 100.0).min(0.1).max(1e-8);
    let mut steps = Vec::new();
    let mut rejects_in_a_row = 0u32;
    let max_steps = 4_000_000usize;

    for _ in 0..max_steps {
        if (t - t1) * dir >= 0.0 {
            return Ok(DenseSolution {
                t_start: t0,
                t_end: t1,
                steps,
            });
        }
        if (t + h - t1) * dir > 0.0 {
            h = t1 - t;
        }
        let mut k = [[0.0; DIM]; 7];
        k[0] = f0;
        for stage in 1..7 {
            let mut ys = y;
            for i in 0..DIM {
                let mut acc = 0.0;
                for (j, kj) in k.iter().enumerate().take(stage) {
                    acc += A[stage][j] * kj[i];
                }
                ys[i] += h * acc;
            }
            k[stage] = rhs(t + C[stage] * h, &ys);
        }
        let mut y5 = y;
        let mut err = 0.0f64;
        for i in 0..DIM {
            let mut s5 = 0.0;
            let mut s4 = 0.0;
            for j in 0..7 {
                s5 += B5[j] * k[j][i];
                s4 += B4[j] * k[j][i];
            }
            y5[i] += h * s5;
            let scale = 1.0 + y[i].abs().max(y5[i].abs());
            let e = h * (s5 - s4) / scale;
            err += e * e;
        }
        err = (err / DIM as f64).sqrt();
        if err <= tol {
            // Accept; build the continuous extension.
            let f1 = k[6]; // FSAL: k7 = f(t + h, y5)
            let mut rcont = [[0.0; DIM]; 5];
            for i in 0..DIM {
                let ydiff = y5[i] - y[i];
                let bspl = h * k[0][i] - ydiff;
                rcont[0][i] = y[i];
                rcont[1][i] = ydiff;
                rcont[2][i] = bspl;
                rcont[3][i] = ydiff - h * f1[i] - bspl;
                let mut s = 0.0;
                for j in 0..7 {
                    s += D[j] * k[j][i];
                }
                rcont[4][i] = h * s;
            }
            steps.push(DenseStep { t0: t, h, rcont });
            t += h;
            y = y5;
            f0 = f1;
            rejects_in_a_row = 0;
            let fac = (0.9 * (tol / err.max(1e-300)).powf(0.2)).clamp(0.2, 5.0);
            h *= fac;
        } else {
            rejects_in_a_row += 1;
            if rejects_in_a_row > 60 || h.abs() < 1e-14 * (1.0 + t.abs()) {
                return Err(Error::IntegrationFailure { t, tol });
            }
            let fac = (0.9 * (tol / err).powf(0.2)).clamp(0.1, 0.9);
            h *= fac;
        }
    }
    Err(Error::IntegrationFailure { t, tol })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn harmonic(alpha: f64) -> impl Fn(f64, &State) -> State {
        move |_t, y| [y[1], -alpha * alpha * y[0], y[3], -alpha * alpha * y[2]]
    }

    #[test]
    fn reproduces_cosine_with_dense_output() {
        let alpha = 1.3;
        let sol = integrate(harmonic(alpha), 0.0, 20.0, [1.0, 0.0, 0.0, 1.0], 1e-11).unwrap();
        for i in 0..200 {
            let t = 0.1 * i as f64;
            let s = sol.eval(t);
            assert!((s[0] - (alpha * t).cos()).abs() < 1e-8, "t = {t}");
            assert!((s[2] - (alpha * t).sin() / alpha).abs() < 1e-8, "t = {t}");
        }
    }

    #[test]
    fn integrates_backward() {
        let alpha = 0.7;
        let sol = integrate(harmonic(alpha), 0.0, -15.0, [1.0, 0.0, 0.0, 1.0], 1e-11).unwrap();
        let s = sol.eval(-10.0);
        assert!((s[0] - (alpha * 10.0f64).cos()).abs() < 1e-8);
        assert!((s[2] + (alpha * 10.0f64).sin() / alpha).abs() < 1e-8);
    }
}
