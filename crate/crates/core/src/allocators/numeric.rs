use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{check_a, AllocationResult, SolveMethod, SolverConfig};
use crate::error::{domain, Error, Result};
use crate::gmv_objectives::{cara_gradient_multi, cara_hessian_multi, cara_objective_multi, log_argument};
use crate::linalg::{quad_form, spd_solve};
use crate::market_model::ReturnModel;

/// Armijo sufficient-increase constant.
const ARMIJO: f64 = 1e-4;
const MIN_STEP: f64 = 1e-20;
/// Weights at or below this are treated as sitting on the `w ≥ 0` bound.
const BOUND_TOL: f64 = 1e-14;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Constraints {
    #[serde(default)]
    pub long_only: bool,
    #[serde(default)]
    pub sum_to_one: bool,
}

impl Constraints {
    pub const NONE: Constraints = Constraints {
        long_only: false,
        sum_to_one: false,
    };
    pub const SIMPLEX: Constraints = Constraints {
        long_only: true,
        sum_to_one: true,
    };

    fn any(&self) -> bool {
        self.long_only || self.sum_to_one
    }
}

/// First-order optimality residual for maximizing under `cons`: the gradient
/// norm when unconstrained, otherwise the largest violation of stationarity
/// (free weights) or dual feasibility (weights on the zero bound).
pub fn kkt_residual(g: &DVector<f64>, w: &DVector<f64>, cons: Constraints) -> f64 {
    if !cons.any() {
        return g.norm();
    }
    let at_bound = |i: usize| cons.long_only && w[i] <= BOUND_TOL;
    let nu = if cons.sum_to_one {
        let free: Vec<f64> = (0..w.len()).filter(|&i| !at_bound(i)).map(|i| g[i]).collect();
        if free.is_empty() {
            0.0
        } else {
            free.iter().sum::<f64>() / free.len() as f64
        }
    } else {
        0.0
    };
    (0..w.len())
        .map(|i| {
            let r = g[i] - nu;
            if at_bound(i) {
                r.max(0.0)
            } else {
                r.abs()
            }
        })
        .fold(0.0, f64::max)
}

/// Gradient on the free weights, less its mean under the budget constraint.
fn free_gradient(g: &DVector<f64>, free: &[usize], budget: bool) -> Vec<f64> {
    let nu = if budget && !free.is_empty() {
        free.iter().map(|&i| g[i]).sum::<f64>() / free.len() as f64
    } else {
        0.0
    };
    free.iter().map(|&i| g[i] - nu).collect()
}

/// Stationarity residual restricted to the free weights.
fn free_residual(g: &DVector<f64>, free: &[usize], budget: bool) -> f64 {
    free_gradient(g, free, budget).iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn free_norm(g: &DVector<f64>, free: &[usize], budget: bool) -> f64 {
    free_gradient(g, free, budget).iter().map(|x| x * x).sum::<f64>().sqrt()
}

struct Problem<'a> {
    model: &'a ReturnModel,
    a: f64,
    margin: f64,
}

impl Problem<'_> {
    /// Objective, or `None` outside the log domain (with margin).
    fn value(&self, w: &DVector<f64>) -> Option<f64> {
        if let Some(l) = log_argument(self.model, self.a, w) {
            if !(l >= self.margin) {
                return None;
            }
        }
        cara_objective_multi(self.model, self.a, w)
            .ok()
            .filter(|v| v.is_finite())
    }
}

fn start_point(p: &Problem, cons: Constraints) -> Result<DVector<f64>> {
    let n = p.model.n_assets();
    if !cons.sum_to_one {
        return Ok(DVector::zeros(n));
    }
    let uniform = DVector::from_element(n, 1.0 / n as f64);
    if p.value(&uniform).is_some() {
        return Ok(uniform);
    }
    // minimum-variance point of the budget constraint
    let ones = DVector::from_element(n, 1.0);
    let x = spd_solve(p.model.sigma(), &ones)?;
    let mv = &x / x.sum();
    if (!cons.long_only || mv.iter().all(|v| *v >= 0.0)) && p.value(&mv).is_some() {
        return Ok(mv);
    }
    let vertex = (0..n)
        .map(|i| {
            let mut e = DVector::zeros(n);
            e[i] = 1.0;
            e
        })
        .filter(|e| p.value(e).is_some())
        .min_by(|x, y| quad_form(p.model.sigma(), x).total_cmp(&quad_form(p.model.sigma(), y)));
    vertex.ok_or_else(|| {
        Error::Domain("no point of the constraint set lies inside the log domain at this risk aversion".into())
    })
}

/// Newton direction on the free coordinates, with the budget constraint
/// enforced through a bordered KKT system.
fn newton_direction(h: &DMatrix<f64>, g: &DVector<f64>, free: &[usize], budget: bool) -> Option<DVector<f64>> {
    let k = free.len();
    let size = if budget { k + 1 } else { k };
    let mut m = DMatrix::zeros(size, size);
    let mut rhs = DVector::zeros(size);
    for (r, &i) in free.iter().enumerate() {
        for (c, &j) in free.iter().enumerate() {
            m[(r, c)] = -h[(i, j)];
        }
        rhs[r] = g[i];
        if budget {
            m[(r, k)] = 1.0;
            m[(k, r)] = 1.0;
        }
    }
    let sol = if budget {
        m.lu().solve(&rhs)?
    } else {
        m.cholesky()?.solve(&rhs)
    };
    let mut d = DVector::zeros(g.len());
    for (r, &i) in free.iter().enumerate() {
        d[i] = sol[r];
    }
    Some(d)
}

/// Maximizes the CARA certainty equivalent for any family by damped Newton
/// with backtracking that keeps every iterate strictly inside the log domain.
/// Constraints are handled by a primal active-set loop: Newton on the free
/// weights (bordered by the budget row when `sum_to_one`), with weights
/// released from the zero bound while their multipliers are wrong-signed.
pub fn solve_numeric(model: &ReturnModel, a: f64, cfg: &SolverConfig, cons: Constraints) -> Result<AllocationResult> {
    check_a(a)?;
    cfg.validate()?;
    let p = Problem {
        model,
        a,
        margin: cfg.domain_margin,
    };
    let n = model.n_assets();
    let mut w = start_point(&p, cons)?;
    let mut fw = p
        .value(&w)
        .ok_or_else(|| Error::Domain("start point outside the log domain".into()))?;
    let g0 = cara_gradient_multi(model, a, &w)?;
    let mut free: Vec<bool> = (0..n)
        .map(|i| !cons.long_only || w[i] > BOUND_TOL || g0[i] > 0.0)
        .collect();
    if cons.sum_to_one && !free.iter().any(|f| *f) {
        free.iter_mut().for_each(|f| *f = true);
    }
    let method = if cons.any() {
        SolveMethod::ActiveSetNewton
    } else {
        SolveMethod::Newton
    };
    let mut iterations = 0;
    let mut residual;

    loop {
        // Newton on the current free set
        loop {
            let g = cara_gradient_multi(model, a, &w)?;
            residual = kkt_residual(&g, &w, cons);
            if residual <= cfg.grad_tol {
                break;
            }
            if iterations >= cfg.max_iter {
                return Err(Error::NotConverged {
                    iterations,
                    residual,
                    best: w.iter().copied().collect(),
                });
            }
            let idx: Vec<usize> = (0..n).filter(|&i| free[i]).collect();
            // same measure as kkt_residual, over the free set
            let sub_residual = if cons.any() {
                free_residual(&g, &idx, cons.sum_to_one)
            } else {
                residual
            };
            if idx.is_empty() || sub_residual <= cfg.grad_tol {
                break;
            }
            iterations += 1;
            let h = cara_hessian_multi(model, a, &w)?;
            let d = match newton_direction(&h, &g, &idx, cons.sum_to_one) {
                Some(d) if g.dot(&d) > 0.0 => d,
                // gradient fallback, projected on the budget direction
                _ => {
                    let mut d = DVector::zeros(n);
                    let mean = if cons.sum_to_one {
                        idx.iter().map(|&i| g[i]).sum::<f64>() / idx.len() as f64
                    } else {
                        0.0
                    };
                    for &i in &idx {
                        d[i] = g[i] - mean;
                    }
                    d
                }
            };
            // ratio test against the zero bound
            let mut t_max = f64::INFINITY;
            let mut blocking = None;
            if cons.long_only {
                for &i in &idx {
                    if d[i] < 0.0 {
                        let t = -w[i] / d[i];
                        if t < t_max {
                            t_max = t;
                            blocking = Some(i);
                        }
                    }
                }
            }
            let mut t = t_max.min(1.0);
            if t < 1.0 {
                // keep the blocking index only if the full ratio step is taken
            } else {
                blocking = None;
            }
            let slope = g.dot(&d);
            let sub_norm = free_norm(&g, &idx, cons.sum_to_one);
            let accepted = loop {
                let trial = &w + &d * t;
                if let Some(ft) = p.value(&trial) {
                    let sufficient = ft >= fw + ARMIJO * t * slope;
                    // rounding can hide a genuine increase near the optimum
                    let gradient_drop = t == 1.0
                        && cara_gradient_multi(model, a, &trial)
                            .is_ok_and(|gt| free_norm(&gt, &idx, cons.sum_to_one) < sub_norm);
                    if sufficient || gradient_drop {
                        break Some((trial, ft));
                    }
                }
                t *= cfg.backtrack_factor;
                blocking = None;
                if t < MIN_STEP {
                    break None;
                }
            };
            let Some((mut trial, ft)) = accepted else {
                break;
            };
            if let Some(j) = blocking {
                trial[j] = 0.0;
                free[j] = false;
            }
            if cons.long_only {
                trial.iter_mut().for_each(|v| {
                    if *v < 0.0 {
                        *v = 0.0
                    }
                });
            }
            w = trial;
            fw = p.value(&w).unwrap_or(ft);
        }

        if residual <= cfg.grad_tol {
            break;
        }
        // release the bound weight with the most wrong-signed multiplier
        let g = cara_gradient_multi(model, a, &w)?;
        let nu = if cons.sum_to_one {
            let f: Vec<f64> = (0..n).filter(|&i| free[i]).map(|i| g[i]).collect();
            f.iter().sum::<f64>() / f.len().max(1) as f64
        } else {
            0.0
        };
        let release = (0..n)
            .filter(|&i| !free[i] && g[i] - nu > cfg.grad_tol)
            .max_by(|&i, &j| (g[i] - nu).total_cmp(&(g[j] - nu)));
        match release {
            Some(i) => free[i] = true,
            None => {
                if iterations >= cfg.max_iter || !cons.any() {
                    return Err(Error::NotConverged {
                        iterations,
                        residual,
                        best: w.iter().copied().collect(),
                    });
                }
                // stalled on a consistent active set; nothing left to try
                if residual <= 1e-8 {
                    break;
                }
                return Err(Error::NotConverged {
                    iterations,
                    residual,
                    best: w.iter().copied().collect(),
                });
            }
        }
        if iterations >= cfg.max_iter {
            return Err(Error::NotConverged {
                iterations,
                residual,
                best: w.iter().copied().collect(),
            });
        }
    }
    if !w.iter().all(|v| v.is_finite()) {
        return domain("solver produced non-finite weights");
    }
    Ok(AllocationResult::for_model(model, &w, residual, iterations, method))
}
