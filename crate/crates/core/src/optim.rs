//! Smooth unconstrained minimization.
//!
//! A damped Newton method: the Newton system is solved by Cholesky with a
//! growing diagonal shift until the factorization succeeds, and the step is
//! accepted by Armijo backtracking. Each accepted step strictly lowers the
//! objective. When backtracking along the Newton direction finds no
//! decrease, the steepest-descent direction is tried instead.

use crate::error::{Error, Result};

pub trait Objective {
    fn dim(&self) -> usize;
    fn value(&self, x: &[f64]) -> f64;
    fn gradient(&self, x: &[f64]) -> Vec<f64>;
    /// Dense Hessian, row-major `dim x dim`.
    fn hessian(&self, x: &[f64]) -> Vec<f64>;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonConfig {
    pub max_steps: usize,
    /// Stop once the gradient max-norm falls to this value, or once the
    /// predicted Newton decrease drops below the rounding level of the
    /// objective.
    pub grad_tol: f64,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        NewtonConfig {
            max_steps: 100,
            grad_tol: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub steps: usize,
    pub grad_norm: f64,
    pub converged: bool,
}

pub fn max_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Solves `a x = b` for symmetric positive definite `a` (row-major).
pub fn cholesky_solve(a: &[f64], b: &[f64]) -> Option<Vec<f64>> {
    let n = b.len();
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if !(s > 0.0) || !s.is_finite() {
                    return None;
                }
                l[i * n + i] = s.sqrt();
            } else {
                l[i * n + j] = s / l[j * n + j];
            }
        }
    }
    let mut y = vec![0.0; n];
    for i in 0..n {
        let s: f64 = (0..i).map(|k| l[i * n + k] * y[k]).sum();
        y[i] = (b[i] - s) / l[i * n + i];
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|k| l[k * n + i] * x[k]).sum();
        x[i] = (y[i] - s) / l[i * n + i];
    }
    Some(x)
}

fn newton_direction(hess: &[f64], grad: &[f64]) -> Vec<f64> {
    let n = grad.len();
    let neg: Vec<f64> = grad.iter().map(|g| -g).collect();
    let scale = (0..n).fold(1.0f64, |m, i| m.max(hess[i * n + i].abs()));
    let mut shift = 0.0;
    let mut shifted = hess.to_vec();
    while shift <= 1e12 * scale {
        for i in 0..n {
            shifted[i * n + i] = hess[i * n + i] + shift;
        }
        if let Some(p) = cholesky_solve(&shifted, &neg) {
            if dot(&p, grad) < 0.0 && p.iter().all(|v| v.is_finite()) {
                return p;
            }
        }
        shift = if shift == 0.0 { 1e-10 * scale } else { shift * 10.0 };
    }
    neg
}

/// Armijo backtracking from a unit step; `None` when no halving lowers `f`.
fn line_search<O: Objective + ?Sized>(obj: &O, x: &[f64], f: f64, g: &[f64], p: &[f64]) -> Option<(Vec<f64>, f64)> {
    let slope = dot(g, p);
    let mut step = 1.0;
    for _ in 0..60 {
        let trial: Vec<f64> = x.iter().zip(p).map(|(xi, pi)| xi + step * pi).collect();
        let ft = obj.value(&trial);
        if ft.is_finite() && ft <= f + 1e-4 * step * slope && ft < f {
            return Some((trial, ft));
        }
        step *= 0.5;
    }
    None
}

pub fn minimize<O: Objective + ?Sized>(obj: &O, x0: &[f64], config: &NewtonConfig) -> Result<Minimum> {
    let mut x = x0.to_vec();
    let mut f = obj.value(&x);
    if !f.is_finite() {
        return Err(Error::NonFiniteObjective);
    }
    let mut steps = 0;
    loop {
        let g = obj.gradient(&x);
        let gn = max_norm(&g);
        if !gn.is_finite() {
            return Err(Error::NonFiniteObjective);
        }
        if gn <= config.grad_tol {
            return Ok(Minimum { x, value: f, steps, grad_norm: gn, converged: true });
        }
        if steps >= config.max_steps {
            return Ok(Minimum { x, value: f, steps, grad_norm: gn, converged: false });
        }
        let newton = newton_direction(&obj.hessian(&x), &g);
        // Predicted decrease below rounding noise of `f`: nothing left to gain.
        if -dot(&g, &newton) <= 1e-13 * (1.0 + f.abs()) {
            return Ok(Minimum { x, value: f, steps, grad_norm: gn, converged: true });
        }
        let steepest: Vec<f64> = g.iter().map(|v| -v).collect();
        let accepted = line_search(obj, &x, f, &g, &newton).or_else(|| line_search(obj, &x, f, &g, &steepest));
        steps += 1;
        match accepted {
            Some((xn, fn_)) => {
                x = xn;
                f = fn_;
            }
            // No representable decrease along a descent direction: the
            // iterate is optimal to working precision.
            None => {
                return Ok(Minimum { x, value: f, steps, grad_norm: gn, converged: false });
            }
        }
    }
}
