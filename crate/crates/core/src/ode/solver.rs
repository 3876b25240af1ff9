//! Adaptive Dormand-Prince 5(4) solver with continuous (dense) output.
//!
//! The embedded pair controls the local error per step; the accepted steps
//! carry a quartic interpolation polynomial so the solution can be evaluated
//! anywhere inside the integration span at an accuracy consistent with the
//! step error.

use super::{IntegratorConfig, OdeError};

// Butcher tableau, Dormand & Prince order 5(4), FSAL.
const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A2: [f64; 1] = [0.2];
const A3: [f64; 2] = [3.0 / 40.0, 9.0 / 40.0];
const A4: [f64; 3] = [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0];
const A5: [f64; 4] = [
    19372.0 / 6561.0,
    -25360.0 / 2187.0,
    64448.0 / 6561.0,
    -212.0 / 729.0,
];
const A6: [f64; 5] = [
    9017.0 / 3168.0,
    -355.0 / 33.0,
    46732.0 / 5247.0,
    49.0 / 176.0,
    -5103.0 / 18656.0,
];
// Fifth-order weights; row 7 of A equals B (first-same-as-last).
const B: [f64; 7] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
    0.0,
];
// B minus the embedded fourth-order weights, used for the error estimate.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];
// Dense-output weights for the fifth interpolation coefficient.
const D: [f64; 7] = [
    -12715105075.0 / 11282082432.0,
    0.0,
    87487479700.0 / 32700410799.0,
    -10690763975.0 / 1880347072.0,
    701980252875.0 / 199316789632.0,
    -1453857185.0 / 822651844.0,
    69997945.0 / 29380423.0,
];

const SAFETY: f64 = 0.9;
const MIN_SCALE: f64 = 0.2;
const MAX_SCALE: f64 = 10.0;
const MAX_STEPS: usize = 5_000_000;

/// One accepted step's interpolation polynomial: for each component,
/// coefficients `c1..c5` of
/// `y(t0 + θh) = c1 + θ (c2 + (1 − θ)(c3 + θ (c4 + (1 − θ) c5)))`.
#[derive(Debug, Clone)]
struct DenseSegment {
    t_start: f64,
    h: f64,
    /// Row-major `[component][coefficient]`, 5 coefficients per component.
    cont: Vec<f64>,
}

impl DenseSegment {
    fn eval_into(&self, t: f64, out: &mut [f64]) {
        let theta = (t - self.t_start) / self.h;
        let theta1 = 1.0 - theta;
        for (i, slot) in out.iter_mut().enumerate() {
            let c = &self.cont[5 * i..5 * i + 5];
            *slot = c[0] + theta * (c[1] + theta1 * (c[2] + theta * (c[3] + theta1 * c[4])));
        }
    }
}

/// Counters from one integration run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SolveStats {
    pub steps_accepted: usize,
    pub steps_rejected: usize,
    pub rhs_evaluations: usize,
}

/// A continuously evaluable solution over `[t0, t_end]`.
#[derive(Debug, Clone)]
pub struct DenseSolution {
    t0: f64,
    t_end: f64,
    dim: usize,
    y_end: Vec<f64>,
    segments: Vec<DenseSegment>,
    pub stats: SolveStats,
}

impl DenseSolution {
    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn t_end(&self) -> f64 {
        self.t_end
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Final state at `t_end`.
    pub fn y_end(&self) -> &[f64] {
        &self.y_end
    }

    /// Evaluates the interpolant at `t`, which must lie in `[t0, t_end]`.
    pub fn eval_into(&self, t: f64, out: &mut [f64]) -> Result<(), OdeError> {
        let span_tol = 1e-9 * (1.0 + self.t_end.abs().max(self.t0.abs()));
        if t < self.t0 - span_tol || t > self.t_end + span_tol {
            return Err(OdeError::OutOfSpan {
                requested: t,
                t0: self.t0,
                t_end: self.t_end,
            });
        }
        let t = t.clamp(self.t0, self.t_end);
        // Find the segment containing t: last segment with t_start <= t.
        let idx = match self
            .segments
            .binary_search_by(|s| s.t_start.partial_cmp(&t).expect("finite times"))
        {
            Ok(i) => i,
            Err(0) => 0,
            Err(i) => i - 1,
        };
        self.segments[idx].eval_into(t, out);
        Ok(())
    }

    pub fn eval(&self, t: f64) -> Result<Vec<f64>, OdeError> {
        let mut out = vec![0.0; self.dim];
        self.eval_into(t, &mut out)?;
        Ok(out)
    }
}

/// Weighted RMS error norm of `err` against the tolerance scale built from
/// `y` and `y_new`.
fn error_norm(err: &[f64], y: &[f64], y_new: &[f64], config: &IntegratorConfig) -> f64 {
    let n = err.len() as f64;
    let sum: f64 = err
        .iter()
        .zip(y.iter().zip(y_new))
        .map(|(e, (a, b))| {
            let scale = config.abs_tol + config.rel_tol * a.abs().max(b.abs());
            (e / scale) * (e / scale)
        })
        .sum();
    (sum / n).sqrt()
}

/// Classic starting-step heuristic based on the size of the initial
/// derivative and a trial Euler step.
fn initial_step<F>(f: &F, t0: f64, y0: &[f64], f0: &[f64], t_end: f64, config: &IntegratorConfig) -> f64
where
    F: Fn(f64, &[f64], &mut [f64]),
{
    let dim = y0.len();
    let scale: Vec<f64> = y0
        .iter()
        .map(|y| config.abs_tol + config.rel_tol * y.abs())
        .collect();
    let d0 = (y0
        .iter()
        .zip(&scale)
        .map(|(y, s)| (y / s) * (y / s))
        .sum::<f64>()
        / dim as f64)
        .sqrt();
    let d1 = (f0
        .iter()
        .zip(&scale)
        .map(|(v, s)| (v / s) * (v / s))
        .sum::<f64>()
        / dim as f64)
        .sqrt();
    let h0 = if d0 < 1e-5 || d1 < 1e-5 {
        1e-6
    } else {
        0.01 * d0 / d1
    };
    let h0 = h0.min(t_end - t0).min(config.max_step);

    let y1: Vec<f64> = y0.iter().zip(f0).map(|(y, d)| y + h0 * d).collect();
    let mut f1 = vec![0.0; dim];
    f(t0 + h0, &y1, &mut f1);
    let d2 = (f1
        .iter()
        .zip(f0.iter().zip(&scale))
        .map(|(a, (b, s))| ((a - b) / s) * ((a - b) / s))
        .sum::<f64>()
        / dim as f64)
        .sqrt()
        / h0;

    let d_max = d1.max(d2);
    let h1 = if d_max <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d_max).powf(0.2)
    };
    (100.0 * h0).min(h1).min(t_end - t0).min(config.max_step)
}

/// Integrates `dy/dt = f(t, y)` from `(t0, y0)` to `t_end` and returns a
/// densely evaluable solution.
pub fn solve<F>(
    f: F,
    t0: f64,
    y0: &[f64],
    t_end: f64,
    config: &IntegratorConfig,
) -> Result<DenseSolution, OdeError>
where
    F: Fn(f64, &[f64], &mut [f64]),
{
    config.validate()?;
    if !t0.is_finite() || !t_end.is_finite() || t_end <= t0 {
        return Err(OdeError::InvalidInput(format!(
            "integration span must satisfy t_end > t0 with finite endpoints, got [{t0}, {t_end}]"
        )));
    }
    if y0.iter().any(|v| !v.is_finite()) {
        return Err(OdeError::InvalidInput(
            "initial state must be finite".into(),
        ));
    }

    let dim = y0.len();
    let mut stats = SolveStats::default();
    let mut t = t0;
    let mut y = y0.to_vec();
    let mut k: Vec<Vec<f64>> = vec![vec![0.0; dim]; 7];
    f(t, &y, &mut k[0]);
    stats.rhs_evaluations += 1;

    let mut h = initial_step(&f, t0, &y, &k[0], t_end, config);
    stats.rhs_evaluations += 1;
    let mut segments: Vec<DenseSegment> = Vec::new();
    let mut y_new = vec![0.0; dim];
    let mut y_stage = vec![0.0; dim];
    let mut err = vec![0.0; dim];
    let mut rejected_last = false;

    while t < t_end {
        if stats.steps_accepted + stats.steps_rejected >= MAX_STEPS {
            return Err(OdeError::TooManySteps { t_last: t });
        }
        // Underflow guard: the step must still move t in floating point.
        if h < f64::EPSILON * 16.0 * t.abs().max(1.0) {
            return Err(OdeError::StepSizeUnderflow { t_last: t });
        }
        if t + h > t_end {
            h = t_end - t;
        }

        // Stages 2..=6 (row 7 is the FSAL evaluation at the new point).
        let a_rows: [&[f64]; 5] = [&A2, &A3, &A4, &A5, &A6];
        for (stage, row) in a_rows.iter().enumerate() {
            for i in 0..dim {
                let mut acc = 0.0;
                for (j, a) in row.iter().enumerate() {
                    acc += a * k[j][i];
                }
                y_stage[i] = y[i] + h * acc;
            }
            let (done, rest) = k.split_at_mut(stage + 1);
            f(t + C[stage + 1] * h, &y_stage, &mut rest[0]);
            let _ = done;
        }
        stats.rhs_evaluations += 5;

        for i in 0..dim {
            let mut acc = 0.0;
            for j in 0..6 {
                acc += B[j] * k[j][i];
            }
            y_new[i] = y[i] + h * acc;
        }
        // FSAL stage: derivative at the candidate new point.
        {
            let (head, tail) = k.split_at_mut(6);
            f(t + h, &y_new, &mut tail[0]);
            let _ = head;
        }
        stats.rhs_evaluations += 1;

        for i in 0..dim {
            let mut acc = 0.0;
            for j in 0..7 {
                acc += E[j] * k[j][i];
            }
            err[i] = h * acc;
        }
        let err_norm = error_norm(&err, &y, &y_new, config);

        if !err_norm.is_finite() {
            // Non-finite proposal: shrink hard and retry.
            stats.steps_rejected += 1;
            rejected_last = true;
            h *= MIN_SCALE;
            continue;
        }

        if err_norm <= 1.0 {
            // Accept: record the dense-output polynomial for this step.
            let mut cont = Vec::with_capacity(5 * dim);
            for i in 0..dim {
                let ydiff = y_new[i] - y[i];
                let bspl = h * k[0][i] - ydiff;
                let mut dsum = 0.0;
                for j in 0..7 {
                    dsum += D[j] * k[j][i];
                }
                cont.push(y[i]);
                cont.push(ydiff);
                cont.push(bspl);
                cont.push(ydiff - h * k[6][i] - bspl);
                cont.push(h * dsum);
            }
            segments.push(DenseSegment {
                t_start: t,
                h,
                cont,
            });

            t += h;
            std::mem::swap(&mut y, &mut y_new);
            k.swap(0, 6); // first-same-as-last
            stats.steps_accepted += 1;

            let scale = if err_norm == 0.0 {
                MAX_SCALE
            } else {
                SAFETY * err_norm.powf(-0.2)
            };
            let cap = if rejected_last { 1.0 } else { MAX_SCALE };
            h = (h * scale.clamp(MIN_SCALE, cap)).min(config.max_step);
            rejected_last = false;
        } else {
            stats.steps_rejected += 1;
            rejected_last = true;
            h *= (SAFETY * err_norm.powf(-0.2)).clamp(MIN_SCALE, 1.0);
        }
    }

    Ok(DenseSolution {
        t0,
        t_end,
        dim,
        y_end: y,
        segments,
        stats,
    })
}
