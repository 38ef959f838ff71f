//! Small dense BFGS minimizer with backtracking line search.

use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BfgsOptions {
    pub max_iters: usize,
    /// Stop once `‖∇f‖∞` drops to this value.
    pub grad_tol: f64,
    /// Armijo sufficient-decrease constant.
    pub c1: f64,
    pub max_backtracks: usize,
}

impl Default for BfgsOptions {
    fn default() -> Self {
        Self {
            max_iters: 200,
            grad_tol: 1e-8,
            c1: 1e-4,
            max_backtracks: 60,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BfgsStatus {
    Converged,
    MaxIters,
    LineSearchFailed,
}

#[derive(Clone, Debug)]
pub struct BfgsOutcome {
    pub x: DVector<f64>,
    pub value: f64,
    pub grad: DVector<f64>,
    pub iters: usize,
    pub status: BfgsStatus,
}

impl BfgsOutcome {
    pub fn converged(&self) -> bool {
        self.status == BfgsStatus::Converged
    }
}

fn sup_norm(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Minimizes `f`, which returns the value and gradient at a point.
///
/// A step is accepted on the Armijo condition, or, once the decrease is
/// below what `f64` can resolve at the current value, when the value does
/// not rise beyond rounding and the gradient shrinks.
pub fn minimize<F>(mut f: F, x0: DVector<f64>, opts: &BfgsOptions) -> Result<BfgsOutcome>
where
    F: FnMut(&DVector<f64>) -> (f64, DVector<f64>),
{
    let n = x0.len();
    let (mut fx, mut g) = f(&x0);
    if !fx.is_finite() || g.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteObjective);
    }
    let mut x = x0;
    let mut h = DMatrix::<f64>::identity(n, n);
    let mut h_is_identity = true;
    let mut scaled = false;
    let mut iters = 0;

    let status = loop {
        let gnorm = sup_norm(&g);
        if gnorm <= opts.grad_tol {
            break BfgsStatus::Converged;
        }
        if iters >= opts.max_iters {
            break BfgsStatus::MaxIters;
        }

        let mut d = -(&h * &g);
        let mut slope = g.dot(&d);
        if slope.is_nan() || slope >= 0.0 {
            h.fill_with_identity();
            h_is_identity = true;
            d = -g.clone();
            slope = g.dot(&d);
        }

        let mut alpha = if h_is_identity && !scaled {
            (1.0 / gnorm).min(1.0)
        } else {
            1.0
        };
        let slack = 4.0 * f64::EPSILON * fx.abs().max(1.0);
        let mut accepted = None;
        for _ in 0..opts.max_backtracks {
            let trial = &x + &d * alpha;
            let (ft, gt) = f(&trial);
            if ft.is_finite() && gt.iter().all(|v| v.is_finite()) {
                let armijo = ft <= fx + opts.c1 * alpha * slope;
                let flat = ft <= fx + slack && sup_norm(&gt) < gnorm;
                if armijo || flat {
                    accepted = Some((trial, ft, gt));
                    break;
                }
            }
            alpha *= 0.5;
        }

        let Some((x_new, f_new, g_new)) = accepted else {
            if h_is_identity {
                break BfgsStatus::LineSearchFailed;
            }
            // retry along steepest descent before giving up
            h.fill_with_identity();
            h_is_identity = true;
            continue;
        };

        let s = &x_new - &x;
        let y = &g_new - &g;
        let sy = s.dot(&y);
        if sy > 1e-12 * s.norm() * y.norm() && sy > 0.0 {
            if !scaled {
                h *= sy / y.norm_squared();
                scaled = true;
            }
            let rho = 1.0 / sy;
            let hy = &h * &y;
            let yhy = y.dot(&hy);
            // H ← H - ρ(s yᵀH + H y sᵀ) + (ρ² yᵀHy + ρ) s sᵀ
            h.ger(-rho, &s, &hy, 1.0);
            h.ger(-rho, &hy, &s, 1.0);
            h.ger(rho * rho * yhy + rho, &s, &s, 1.0);
            h_is_identity = false;
        }

        x = x_new;
        fx = f_new;
        g = g_new;
        iters += 1;
    };

    Ok(BfgsOutcome {
        x,
        value: fx,
        grad: g,
        iters,
        status,
    })
}
