//! BFGS quasi-Newton minimizer with backtracking line search.
//!
//! The likelihood estimators optimize smooth objectives in log-parameter
//! coordinates with closed-form gradients, so a dense inverse-Hessian BFGS
//! with an Armijo line search is all that is needed. Objectives signal an
//! infeasible point by returning a non-finite value.

use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone, Copy)]
pub struct OptimOptions {
    /// Stop when the gradient sup-norm drops below this.
    pub grad_tol: f64,
    /// Stop when the relative objective decrease drops below this.
    pub obj_tol: f64,
    pub max_iters: usize,
}

impl Default for OptimOptions {
    fn default() -> Self {
        Self {
            grad_tol: 1e-7,
            obj_tol: 1e-10,
            max_iters: 500,
        }
    }
}

#[derive(Debug, Clone)]
pub struct OptimOutcome {
    pub x: DVector<f64>,
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
    pub grad_sup_norm: f64,
}

/// Minimize `f`, which returns the objective value and gradient.
pub fn minimize_bfgs<F>(mut f: F, x0: DVector<f64>, opts: &OptimOptions) -> OptimOutcome
where
    F: FnMut(&DVector<f64>) -> (f64, DVector<f64>),
{
    let dim = x0.len();
    let mut x = x0;
    let (mut fx, mut gx) = f(&x);
    if !fx.is_finite() {
        return OptimOutcome {
            grad_sup_norm: f64::INFINITY,
            x,
            value: fx,
            iterations: 0,
            converged: false,
        };
    }
    let mut h = DMatrix::<f64>::identity(dim, dim);
    let mut iterations = 0;

    for _ in 0..opts.max_iters {
        iterations += 1;
        let mut dir = -(&h * &gx);
        if dir.dot(&gx) >= 0.0 {
            // Not a descent direction; restart from steepest descent.
            h = DMatrix::identity(dim, dim);
            dir = -gx.clone();
        }

        // Armijo backtracking.
        let slope = dir.dot(&gx);
        let mut alpha = 1.0f64;
        let mut accepted = None;
        for _ in 0..60 {
            let cand = &x + alpha * &dir;
            let (fc, gc) = f(&cand);
            if fc.is_finite() && fc <= fx + 1e-4 * alpha * slope {
                accepted = Some((cand, fc, gc, alpha));
                break;
            }
            alpha *= 0.5;
        }
        let Some((x_new, f_new, g_new, alpha)) = accepted else {
            // Line-search failure: no admissible decrease along the ray.
            return OptimOutcome {
                grad_sup_norm: gx.amax(),
                x,
                value: fx,
                iterations,
                converged: false,
            };
        };

        let s = &x_new - &x;
        let y = &g_new - &gx;
        let sy = s.dot(&y);
        if sy > 1e-12 * s.norm() * y.norm() {
            // H <- (I - rho s y') H (I - rho y s') + rho s s'
            let rho = 1.0 / sy;
            let hy = &h * &y;
            let yhy = y.dot(&hy);
            // Expanded update avoids forming the rank-one projectors.
            let hys = &hy * s.transpose();
            h = h - (&hys + hys.transpose()) * rho + (&s * s.transpose()) * (rho * rho * yhy + rho);
        }

        let obj_drop = fx - f_new;
        x = x_new;
        gx = g_new;
        fx = f_new;

        let gnorm = gx.amax();
        // The objective-change rule only counts on a full quasi-Newton step;
        // a heavily backtracked step that moved nowhere is a stall, not a
        // minimum.
        let stalled_at_minimum = alpha == 1.0 && obj_drop.abs() <= opts.obj_tol * fx.abs().max(1.0);
        if gnorm < opts.grad_tol || stalled_at_minimum {
            return OptimOutcome {
                grad_sup_norm: gnorm,
                x,
                value: fx,
                iterations,
                converged: true,
            };
        }
    }

    OptimOutcome {
        grad_sup_norm: gx.amax(),
        x,
        value: fx,
        iterations,
        converged: false,
    }
}
