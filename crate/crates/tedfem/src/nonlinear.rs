//! Newton and semismooth Newton iteration for the damage and heat
//! sub-solves.

use crate::linalg::{self, LinearSolverKind, SystemMatrix};
use crate::{invalid, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LineSearch {
    Off,
    /// Backtracking with factor 1/2, sufficient decrease on the squared
    /// residual norm. Engages automatically when a full step increases the
    /// residual.
    Auto,
}

#[derive(Debug, Clone, Copy)]
pub struct NewtonConfig {
    /// Relative residual tolerance: stop once
    /// `||R(x)|| <= tol_rel * ||R(x0)||` (with an absolute floor of 1e-14
    /// when the initial residual vanishes).
    pub tol_rel: f64,
    pub max_iter: usize,
    pub line_search: LineSearch,
    pub linear: LinearSolverKind,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        NewtonConfig {
            tol_rel: 1e-8,
            max_iter: 50,
            line_search: LineSearch::Auto,
            linear: LinearSolverKind::Direct,
        }
    }
}

impl NewtonConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol_rel > 0.0) {
            return invalid(format!("tol_rel must be positive, got {}", self.tol_rel));
        }
        if self.max_iter == 0 {
            return invalid("max_iter must be at least 1");
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct NewtonReport {
    pub iterations: usize,
    pub residual_history: Vec<f64>,
    pub converged: bool,
}

impl NewtonReport {
    pub fn final_residual(&self) -> f64 {
        *self.residual_history.last().unwrap_or(&0.0)
    }
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

const ABS_FLOOR: f64 = 1e-14;

/// Solves `R(x) = 0` from `x0`. The callback returns the residual and the
/// Jacobian at the given iterate (already constrained where Dirichlet data
/// applies). Returns the best iterate with a report; `converged = false`
/// after `max_iter` is a report, not an error, while a singular Jacobian is.
pub fn newton_solve(
    mut residual_and_jacobian: impl FnMut(&[f64]) -> Result<(Vec<f64>, SystemMatrix)>,
    x0: Vec<f64>,
    cfg: &NewtonConfig,
) -> Result<(Vec<f64>, NewtonReport)> {
    cfg.validate()?;
    let mut x = x0;
    let (mut res, mut jac) = residual_and_jacobian(&x)?;
    let r0 = norm2(&res);
    let target = (cfg.tol_rel * r0).max(ABS_FLOOR);
    let mut history = vec![r0];
    if r0 <= ABS_FLOOR {
        return Ok((x, NewtonReport { iterations: 0, residual_history: history, converged: true }));
    }

    let mut r_cur = r0;
    for it in 1..=cfg.max_iter {
        let neg_res: Vec<f64> = res.iter().map(|r| -r).collect();
        let delta = match linalg::solve(cfg.linear, &jac, &neg_res) {
            Ok(d) => d,
            Err(Error::SolverBreakdown(msg)) => {
                return Err(Error::SolverBreakdown(format!(
                    "Newton iteration {it}: {msg}"
                )))
            }
            Err(e) => return Err(e),
        };

        let mut step = 1.0;
        loop {
            let trial: Vec<f64> =
                x.iter().zip(&delta).map(|(xi, di)| xi + step * di).collect();
            let (res_t, jac_t) = residual_and_jacobian(&trial)?;
            let r_t = norm2(&res_t);
            let accept = match cfg.line_search {
                LineSearch::Off => true,
                // sufficient decrease on ||R||^2; full steps pass untouched
                // unless the residual grows
                LineSearch::Auto => r_t * r_t <= (1.0 - 1e-4 * step) * r_cur * r_cur || step < 1e-4,
            };
            if accept {
                x = trial;
                res = res_t;
                jac = jac_t;
                r_cur = r_t;
                break;
            }
            step *= 0.5;
        }
        history.push(r_cur);
        if r_cur <= target {
            return Ok((
                x,
                NewtonReport { iterations: it, residual_history: history, converged: true },
            ));
        }
    }
    Ok((
        x,
        NewtonReport { iterations: cfg.max_iter, residual_history: history, converged: false },
    ))
}
