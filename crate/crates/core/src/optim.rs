//! Box-constrained quasi-Newton minimisation.
//!
//! Projected BFGS: the curvature model starts from the analytic Hessian when it
//! is positive definite, takes BFGS updates along accepted steps, and searches
//! along the projected path `P(x + alpha p)` with an Armijo backtracking rule.
//! Bound-active coordinates (at a bound with the gradient pushing outward) are
//! held fixed for the step.

use nalgebra::{DMatrix, DVector};

use crate::contrast::{ContrastEval, Order};
use crate::error::Result;

const ARMIJO_C1: f64 = 1e-4;
const MAX_BACKTRACK: usize = 50;
const MAX_POLISH: usize = 3;

#[derive(Clone, Debug, PartialEq)]
pub struct OptimOptions {
    pub max_iter: usize,
    /// Convergence when `||projected gradient||_inf <= tol_rel * (1 + |f|)`.
    pub tol_rel: f64,
    /// Finish with up to three projected Newton steps on the analytic Hessian.
    pub polish: bool,
}

impl Default for OptimOptions {
    fn default() -> Self {
        Self {
            max_iter: 200,
            tol_rel: 1e-6,
            polish: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OptimResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub converged: bool,
}

pub struct BoxProblem<'a> {
    pub lower: &'a [f64],
    pub upper: &'a [f64],
    /// Coordinates kept at their starting value.
    pub frozen: Option<&'a [bool]>,
}

impl BoxProblem<'_> {
    fn is_frozen(&self, i: usize) -> bool {
        self.frozen.is_some_and(|f| f[i])
    }

    fn project(&self, x: &mut [f64]) {
        for (i, v) in x.iter_mut().enumerate() {
            *v = v.clamp(self.lower[i], self.upper[i]);
        }
    }

    fn projected_grad_norm(&self, x: &[f64], g: &DVector<f64>) -> f64 {
        (0..x.len())
            .filter(|&i| !self.is_frozen(i))
            .map(|i| (x[i] - (x[i] - g[i]).clamp(self.lower[i], self.upper[i])).abs())
            .fold(0.0, f64::max)
    }

    fn free_set(&self, x: &[f64], g: &DVector<f64>) -> Vec<usize> {
        (0..x.len())
            .filter(|&i| {
                !self.is_frozen(i)
                    && !(x[i] <= self.lower[i] && g[i] > 0.0)
                    && !(x[i] >= self.upper[i] && g[i] < 0.0)
            })
            .collect()
    }
}

fn submatrix(b: &DMatrix<f64>, idx: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(idx.len(), idx.len(), |r, c| b[(idx[r], idx[c])])
}

/// Newton-type direction `-B_ff^{-1} g_f` on the free coordinates, `None` if
/// `B_ff` is not positive definite.
fn direction(b: &DMatrix<f64>, g: &DVector<f64>, free: &[usize]) -> Option<DVector<f64>> {
    let bff = submatrix(b, free);
    let gf = DVector::from_iterator(free.len(), free.iter().map(|&i| g[i]));
    let chol = bff.cholesky()?;
    let pf = -chol.solve(&gf);
    let mut p = DVector::zeros(g.len());
    for (k, &i) in free.iter().enumerate() {
        p[i] = pf[k];
    }
    Some(p)
}

fn steepest(g: &DVector<f64>, free: &[usize]) -> DVector<f64> {
    let mut p = DVector::zeros(g.len());
    let scale = 1.0 / g.amax().max(1.0);
    for &i in free {
        p[i] = -g[i] * scale;
    }
    p
}

fn initial_curvature(e: &ContrastEval) -> DMatrix<f64> {
    let d = e.gradient.len();
    if e.hessian.clone().cholesky().is_some() {
        e.hessian.clone()
    } else {
        let scale = e.hessian.diagonal().amax().max(1.0);
        DMatrix::identity(d, d) * scale
    }
}

/// Minimises `f` over the box starting from the projection of `x0`.
/// `f` must populate derivatives up to the requested order.
pub fn minimize_box<F>(
    f: F,
    problem: &BoxProblem<'_>,
    x0: &[f64],
    opts: &OptimOptions,
) -> Result<OptimResult>
where
    F: Fn(&[f64], Order) -> Result<ContrastEval>,
{
    let mut x = x0.to_vec();
    problem.project(&mut x);
    let mut e = f(&x, Order::Hessian)?;
    let mut b = initial_curvature(&e);
    let tol = |fv: f64| opts.tol_rel * (1.0 + fv.abs());
    let mut pg = problem.projected_grad_norm(&x, &e.gradient);
    let mut iterations = 0;

    while pg > tol(e.value) && iterations < opts.max_iter {
        iterations += 1;
        let free = problem.free_set(&x, &e.gradient);
        let mut p =
            direction(&b, &e.gradient, &free).unwrap_or_else(|| steepest(&e.gradient, &free));
        if p.dot(&e.gradient) >= 0.0 {
            b = DMatrix::identity(x.len(), x.len()) * e.hessian.diagonal().amax().max(1.0);
            p = steepest(&e.gradient, &free);
        }
        let Some((x_new, e_new)) = line_search(&f, problem, &x, &e, &p)? else {
            // no decrease along the quasi-Newton path; one steepest-descent retry
            let p = steepest(&e.gradient, &free);
            match line_search(&f, problem, &x, &e, &p)? {
                Some((x_new, e_new)) => {
                    x = x_new;
                    e = e_new;
                    pg = problem.projected_grad_norm(&x, &e.gradient);
                    continue;
                }
                None => break,
            }
        };
        let s = DVector::from_iterator(x.len(), x_new.iter().zip(&x).map(|(a, b)| a - b));
        let y = &e_new.gradient - &e.gradient;
        let sy = s.dot(&y);
        if sy > 1e-12 * s.norm() * y.norm() {
            let bs = &b * &s;
            b += &y * y.transpose() / sy - &bs * bs.transpose() / s.dot(&bs);
        }
        x = x_new;
        e = e_new;
        pg = problem.projected_grad_norm(&x, &e.gradient);
    }

    if opts.polish {
        for _ in 0..MAX_POLISH {
            let eh = f(&x, Order::Hessian)?;
            let free = problem.free_set(&x, &eh.gradient);
            let Some(p) = direction(&eh.hessian, &eh.gradient, &free) else {
                break;
            };
            let mut x_new: Vec<f64> = x.iter().zip(p.iter()).map(|(a, b)| a + b).collect();
            problem.project(&mut x_new);
            if x_new == x {
                break;
            }
            let e_new = f(&x_new, Order::Gradient)?;
            let pg_new = problem.projected_grad_norm(&x_new, &e_new.gradient);
            let slack = 1e-12 * (1.0 + eh.value.abs());
            if e_new.value <= eh.value + slack && pg_new < pg {
                x = x_new;
                e = e_new;
                pg = pg_new;
            } else {
                break;
            }
        }
    }

    Ok(OptimResult {
        converged: pg <= tol(e.value),
        grad_norm: pg,
        f: e.value,
        x,
        iterations,
    })
}

type Step = Option<(Vec<f64>, ContrastEval)>;

fn line_search<F>(
    f: &F,
    problem: &BoxProblem<'_>,
    x: &[f64],
    e: &ContrastEval,
    p: &DVector<f64>,
) -> Result<Step>
where
    F: Fn(&[f64], Order) -> Result<ContrastEval>,
{
    let mut alpha = 1.0;
    for _ in 0..MAX_BACKTRACK {
        let mut x_new: Vec<f64> = x.iter().zip(p.iter()).map(|(a, b)| a + alpha * b).collect();
        problem.project(&mut x_new);
        let decrease: f64 = x_new
            .iter()
            .zip(x)
            .enumerate()
            .map(|(i, (a, b))| e.gradient[i] * (a - b))
            .sum();
        if decrease < 0.0 {
            let e_new = f(&x_new, Order::Gradient)?;
            if e_new.value.is_finite() && e_new.value <= e.value + ARMIJO_C1 * decrease {
                return Ok(Some((x_new, e_new)));
            }
        }
        alpha *= 0.5;
    }
    Ok(None)
}
