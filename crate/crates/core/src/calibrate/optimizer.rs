//! Bounded local minimization: limited-memory quasi-Newton descent with
//! gradient projection onto box constraints, a weak-Wolfe line search, and
//! central finite-difference gradients.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::FitError;

/// History length of the quasi-Newton curvature pairs.
const MEMORY: usize = 10;
/// Armijo sufficient-decrease constant.
const ARMIJO_C1: f64 = 1e-4;
/// Weak-Wolfe curvature constant.
const WOLFE_C2: f64 = 0.9;
const MAX_LINE_SEARCH: usize = 60;

/// Convergence thresholds for [`local_optimize`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Infinity-norm threshold on the projected gradient.
    pub gradient: f64,
    /// Relative step-length threshold.
    pub step: f64,
    pub max_iterations: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            gradient: 1e-8,
            step: 1e-10,
            max_iterations: 500,
        }
    }
}

/// Why the local search stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    /// Projected gradient within tolerance.
    GradientTolerance,
    /// Step length (or attainable descent) fell below tolerance.
    StepTolerance,
    /// Iteration cap reached.
    MaxIterations,
}

/// Result of one bounded local minimization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalFit {
    pub theta: Vec<f64>,
    pub loss: f64,
    pub iterations: usize,
    pub termination: Termination,
    pub objective_evaluations: usize,
}

fn clamp_to_bounds(theta: &mut [f64], bounds: &[(f64, f64)]) {
    for (x, (lo, hi)) in theta.iter_mut().zip(bounds) {
        *x = x.clamp(*lo, *hi);
    }
}

/// Central finite-difference gradient with per-coordinate step
/// `h_i = max(1e-7, 1e-7 |theta_i|)`. Evaluation points may poke marginally
/// past a bound; objectives here remain defined there.
fn fd_gradient<F: Fn(&[f64]) -> f64>(f: &F, theta: &[f64], evals: &mut usize) -> Vec<f64> {
    let mut g = vec![0.0; theta.len()];
    let mut probe = theta.to_vec();
    for i in 0..theta.len() {
        let h = 1e-7f64.max(1e-7 * theta[i].abs());
        probe[i] = theta[i] + h;
        let up = f(&probe);
        probe[i] = theta[i] - h;
        let down = f(&probe);
        probe[i] = theta[i];
        *evals += 2;
        g[i] = (up - down) / (2.0 * h);
    }
    g
}

/// Infinity norm of the projected gradient: how far a unit gradient step can
/// actually move inside the box.
fn projected_gradient_norm(theta: &[f64], g: &[f64], bounds: &[(f64, f64)]) -> f64 {
    theta
        .iter()
        .zip(g)
        .zip(bounds)
        .map(|((&x, &gi), &(lo, hi))| (x - (x - gi).clamp(lo, hi)).abs())
        .fold(0.0, f64::max)
}

/// Two-loop recursion for the L-BFGS descent direction `-H g`.
fn lbfgs_direction(g: &[f64], history: &VecDeque<(Vec<f64>, Vec<f64>)>) -> Vec<f64> {
    let mut q = g.to_vec();
    let mut alphas = Vec::with_capacity(history.len());
    for (s, y) in history.iter().rev() {
        let rho = 1.0 / dot(y, s);
        let alpha = rho * dot(s, &q);
        for (qi, yi) in q.iter_mut().zip(y) {
            *qi -= alpha * yi;
        }
        alphas.push((alpha, rho));
    }
    if let Some((s, y)) = history.back() {
        let scale = dot(s, y) / dot(y, y);
        for qi in q.iter_mut() {
            *qi *= scale;
        }
    }
    for ((s, y), (alpha, rho)) in history.iter().zip(alphas.into_iter().rev()) {
        let beta = rho * dot(y, &q);
        for (qi, si) in q.iter_mut().zip(s) {
            *qi += (alpha - beta) * si;
        }
    }
    for qi in q.iter_mut() {
        *qi = -*qi;
    }
    q
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

struct LineSearchResult {
    x: Vec<f64>,
    f: f64,
    g: Vec<f64>,
}

/// Weak-Wolfe line search over the projected path `clamp(x + alpha d)`.
///
/// Brackets by doubling while the curvature condition fails and bisecting
/// while sufficient decrease fails. Once the trial point touches a bound the
/// path kinks, so acceptance there falls back to sufficient decrease alone.
fn wolfe_search<F: Fn(&[f64]) -> f64>(
    f: &F,
    x: &[f64],
    fx: f64,
    g: &[f64],
    direction: &[f64],
    bounds: &[(f64, f64)],
    evals: &mut usize,
) -> Option<LineSearchResult> {
    let mut lo = 0.0f64;
    let mut hi = f64::INFINITY;
    let mut alpha = 1.0f64;
    let mut fallback: Option<(Vec<f64>, f64)> = None; // best sufficient-decrease point

    for _ in 0..MAX_LINE_SEARCH {
        let mut trial: Vec<f64> = x
            .iter()
            .zip(direction)
            .map(|(xi, di)| xi + alpha * di)
            .collect();
        clamp_to_bounds(&mut trial, bounds);
        let disp: Vec<f64> = trial.iter().zip(x).map(|(t, xi)| t - xi).collect();
        if norm2(&disp) == 0.0 {
            // Entire step projected away; nothing feasible this direction.
            break;
        }
        let clamped = disp
            .iter()
            .zip(direction)
            .any(|(di, fi)| (di - alpha * fi).abs() > 1e-14 * fi.abs().max(1.0));
        // Directional derivative along the realized (possibly projected) path.
        let slope0 = dot(g, &disp) / alpha;

        let f_trial = f(&trial);
        *evals += 1;
        let armijo = f_trial.is_finite() && f_trial <= fx + ARMIJO_C1 * alpha * slope0;
        if !armijo {
            hi = alpha;
            alpha = 0.5 * (lo + hi);
            continue;
        }
        if fallback.as_ref().is_none_or(|(_, bf)| f_trial < *bf) {
            fallback = Some((trial.clone(), f_trial));
        }
        if clamped {
            // On the box boundary the smooth curvature test no longer
            // applies; sufficient decrease is enough.
            let g_trial = fd_gradient(f, &trial, evals);
            return Some(LineSearchResult {
                x: trial,
                f: f_trial,
                g: g_trial,
            });
        }

        let g_trial = fd_gradient(f, &trial, evals);
        if dot(&g_trial, &disp) / alpha < WOLFE_C2 * slope0 {
            // Still descending steeply: the step is too short.
            lo = alpha;
            alpha = if hi.is_finite() {
                0.5 * (lo + hi)
            } else {
                2.0 * alpha
            };
            if alpha > 1e12 {
                return Some(LineSearchResult {
                    x: trial,
                    f: f_trial,
                    g: g_trial,
                });
            }
            continue;
        }
        return Some(LineSearchResult {
            x: trial,
            f: f_trial,
            g: g_trial,
        });
    }

    // Bracketing exhausted; settle for the best sufficient-decrease point.
    fallback.map(|(trial, f_trial)| {
        let g_trial = fd_gradient(f, &trial, evals);
        LineSearchResult {
            x: trial,
            f: f_trial,
            g: g_trial,
        }
    })
}

/// Minimizes `f` inside the box `bounds` starting from `theta0`.
///
/// Returns a point within bounds where either the projected gradient
/// infinity norm is below `tol.gradient`, progress stalls below `tol.step`,
/// or the iteration cap is reached. A non-finite objective at the start
/// point fails immediately.
pub fn local_optimize<F: Fn(&[f64]) -> f64>(
    f: F,
    theta0: &[f64],
    bounds: &[(f64, f64)],
    tol: &Tolerances,
) -> Result<LocalFit, FitError> {
    assert_eq!(
        theta0.len(),
        bounds.len(),
        "one (lower, upper) pair per parameter"
    );
    let mut x = theta0.to_vec();
    clamp_to_bounds(&mut x, bounds);
    let mut evals = 0usize;
    let mut fx = f(&x);
    evals += 1;
    if !fx.is_finite() {
        return Err(FitError::NonFiniteObjective {
            theta: x,
            value: fx,
        });
    }

    let mut g = fd_gradient(&f, &x, &mut evals);
    let mut history: VecDeque<(Vec<f64>, Vec<f64>)> = VecDeque::with_capacity(MEMORY);

    let finish = |x: Vec<f64>, fx, iterations, termination, evals| {
        Ok(LocalFit {
            theta: x,
            loss: fx,
            iterations,
            termination,
            objective_evaluations: evals,
        })
    };

    for iter in 0..tol.max_iterations {
        if projected_gradient_norm(&x, &g, bounds) <= tol.gradient {
            return finish(x, fx, iter, Termination::GradientTolerance, evals);
        }

        let mut direction = lbfgs_direction(&g, &history);
        if !direction.iter().all(|d| d.is_finite()) || dot(&direction, &g) >= 0.0 {
            // Curvature information unusable; restart from steepest descent.
            history.clear();
            direction = g.iter().map(|gi| -gi).collect();
        }

        let accepted = match wolfe_search(&f, &x, fx, &g, &direction, bounds, &mut evals) {
            Some(r) => r,
            None if history.is_empty() => {
                // Even steepest descent finds no feasible decrease.
                return finish(x, fx, iter, Termination::StepTolerance, evals);
            }
            None => {
                // A stale quasi-Newton direction may be at fault; retry from
                // steepest descent next iteration.
                history.clear();
                continue;
            }
        };

        let step: Vec<f64> = accepted.x.iter().zip(&x).map(|(a, b)| a - b).collect();
        let step_norm = norm2(&step);
        let y: Vec<f64> = accepted.g.iter().zip(&g).map(|(a, b)| a - b).collect();
        if dot(&step, &y) > 1e-10 * step_norm * norm2(&y) {
            if history.len() == MEMORY {
                history.pop_front();
            }
            history.push_back((step, y));
        }

        x = accepted.x;
        fx = accepted.f;
        g = accepted.g;

        if step_norm <= tol.step * (1.0 + norm2(&x)) {
            return finish(x, fx, iter + 1, Termination::StepTolerance, evals);
        }
    }

    finish(x, fx, tol.max_iterations, Termination::MaxIterations, evals)
}
