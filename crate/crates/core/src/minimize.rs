//! Monotone nonlinear conjugate gradients for smooth convex objectives.
//!
//! Directions follow Polak–Ribière+ and every step length comes from a
//! bracketing secant search on the directional derivative that keeps the
//! accepted point on the descending side of the line minimum, so the
//! objective never increases.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::Error;
use crate::math;
use crate::Result;

pub trait Objective {
    fn dim(&self) -> usize;
    fn value(&self, x: &[f64]) -> f64;
    /// Gradient, scaled so its max-norm is the convergence measure.
    fn gradient(&self, x: &[f64], out: &mut [f64]);
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MinimizeOutcome {
    pub iterations: usize,
    /// Max-norm of the final gradient.
    pub residual: f64,
}

/// Minimizes over the subspace of zero-sum vectors, starting from `x`.
///
/// The objective must be invariant under adding constants, so its gradient
/// already has zero sum; directions are re-projected to stop drift.
pub fn minimize_zero_mean<O: Objective>(
    obj: &O,
    x: &mut [f64],
    tol: f64,
    max_iter: usize,
) -> Result<MinimizeOutcome> {
    let n = obj.dim();
    project(x);
    let mut g = vec![0.0; n];
    obj.gradient(x, &mut g);
    project(&mut g);
    let mut d: Vec<f64> = g.iter().map(|v| -v).collect();
    let mut g_trial = vec![0.0; n];
    let mut x_trial = vec![0.0; n];
    let mut alpha_prev = 0.0;
    let mut slope_prev = 0.0;
    for it in 0..max_iter {
        let res = math::max_abs(&g);
        if res <= tol {
            return Ok(MinimizeOutcome {
                iterations: it,
                residual: res,
            });
        }
        let mut slope0 = math::dot(&g, &d);
        if !(slope0 < 0.0) {
            for (di, gi) in d.iter_mut().zip(&g) {
                *di = -gi;
            }
            slope0 = -math::dot(&g, &g);
        }
        let dnorm = math::max_abs(&d);
        let mut alpha = if alpha_prev > 0.0 {
            alpha_prev * slope_prev / slope0
        } else {
            1.0 / dnorm.max(1.0)
        };
        if !(alpha.is_finite() && alpha > 0.0) {
            alpha = 1.0 / dnorm.max(1.0);
        }

        let slope_at = |a: f64, xt: &mut [f64], gt: &mut [f64]| {
            for i in 0..n {
                xt[i] = x[i] + a * d[i];
            }
            obj.gradient(xt, gt);
            project(gt);
            math::dot(gt, &d)
        };

        // bracket the line minimum: lo has negative slope, hi nonnegative
        let (mut lo, mut s_lo) = (0.0, slope0);
        let (mut hi, mut s_hi) = (f64::INFINITY, 0.0);
        for _ in 0..80 {
            let s = slope_at(alpha, &mut x_trial, &mut g_trial);
            if s < 0.0 {
                lo = alpha;
                s_lo = s;
                alpha *= 4.0;
            } else {
                hi = alpha;
                s_hi = s;
                break;
            }
        }
        if hi.is_infinite() {
            return Err(Error::NonConvergence {
                iterations: it,
                residual: res,
            });
        }
        let mut best_lo_is_fresh = lo > 0.0 && s_lo.abs() <= 0.1 * slope0.abs();
        let mut side_lo_streak = 0;
        let mut side_hi_streak = 0;
        for _ in 0..60 {
            if best_lo_is_fresh {
                break;
            }
            let mut a = lo - s_lo * (hi - lo) / (s_hi - s_lo);
            // Illinois-style guard against one-sided stagnation
            if side_lo_streak > 1 || side_hi_streak > 1 || !(a > lo && a < hi) {
                a = 0.5 * (lo + hi);
                side_lo_streak = 0;
                side_hi_streak = 0;
            }
            let s = slope_at(a, &mut x_trial, &mut g_trial);
            if s < 0.0 {
                lo = a;
                s_lo = s;
                side_lo_streak += 1;
                side_hi_streak = 0;
                best_lo_is_fresh = s.abs() <= 0.1 * slope0.abs();
            } else {
                hi = a;
                s_hi = s;
                side_hi_streak += 1;
                side_lo_streak = 0;
                if s == 0.0 {
                    lo = a;
                    s_lo = 0.0;
                    best_lo_is_fresh = true;
                }
            }
            if hi - lo <= 1e-15 * hi {
                break;
            }
        }
        if !(lo > 0.0) {
            return Err(Error::NonConvergence {
                iterations: it,
                residual: res,
            });
        }
        let _ = s_lo;
        // accept the descending-side point
        for i in 0..n {
            x[i] += lo * d[i];
        }
        project(x);
        obj.gradient(x, &mut g_trial);
        project(&mut g_trial);
        let gg = math::dot(&g, &g);
        let beta = (math::dot(&g_trial, &g_trial) - math::dot(&g_trial, &g)) / gg;
        let beta = if beta.is_finite() { beta.max(0.0) } else { 0.0 };
        for i in 0..n {
            d[i] = -g_trial[i] + beta * d[i];
        }
        project(&mut d);
        alpha_prev = lo;
        slope_prev = slope0;
        core::mem::swap(&mut g, &mut g_trial);
    }
    let res = math::max_abs(&g);
    if res <= tol {
        Ok(MinimizeOutcome {
            iterations: max_iter,
            residual: res,
        })
    } else {
        Err(Error::NonConvergence {
            iterations: max_iter,
            residual: res,
        })
    }
}

fn project(v: &mut [f64]) {
    if v.is_empty() {
        return;
    }
    let mean = math::sum(v.iter().copied()) / v.len() as f64;
    for x in v {
        *x -= mean;
    }
}
