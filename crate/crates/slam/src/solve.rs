use fgr_core::{IndexSet, SymMatrix};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Result, SlamError};
use crate::graph::{NonlinearGraph, Values};

/// Stopping rule for [`solve_gauss_newton`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Converged once the largest update component falls below this.
    pub step_tol: f64,
    pub max_iterations: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            step_tol: 1e-8,
            max_iterations: 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub values: Values,
    pub converged: bool,
    pub iterations: usize,
    /// `½ Σ ‖r_i‖²_{Γ_i}` over the solved subset at `values`.
    pub cost: f64,
}

/// Gauss–Newton over the factors in `subset`.
///
/// Variables not touched by the subset keep their initial values. Failing to
/// converge is reported through [`Solution::converged`]; a singular system is
/// an error.
pub fn solve_gauss_newton(graph: &NonlinearGraph, subset: &IndexSet, init: &Values) -> Result<Solution> {
    solve_gauss_newton_with(graph, subset, init, SolverOptions::default())
}

pub fn solve_gauss_newton_with(
    graph: &NonlinearGraph,
    subset: &IndexSet,
    init: &Values,
    options: SolverOptions,
) -> Result<Solution> {
    if !graph.base().is_subset(subset) {
        return Err(SlamError::InvalidSubset("subset must contain the base factors".into()));
    }
    if let Some(i) = subset.iter().find(|&i| i >= graph.factors().len()) {
        return Err(SlamError::InvalidSubset(format!("factor {i} out of range")));
    }
    let dim = graph.state_dim();
    let mut active = vec![false; dim];
    for i in subset.iter() {
        for c in graph.factor_columns(i) {
            active[c] = true;
        }
    }
    let cols: Vec<usize> = (0..dim).filter(|&c| active[c]).collect();

    let mut values = init.clone();
    let mut converged = false;
    let mut iterations = 0;
    while iterations < options.max_iterations {
        iterations += 1;
        let mut h = DMatrix::zeros(dim, dim);
        let mut g = DVector::zeros(dim);
        for i in subset.iter() {
            let e = graph.evaluate(i, &values)?;
            let jtw = e.jacobian.transpose() * &e.precision;
            h += &jtw * &e.jacobian;
            g += jtw * &e.residual;
        }
        let h_act = SymMatrix::symmetrize(h.select_rows(&cols).select_columns(&cols));
        let g_act = g.select_rows(&cols);
        let chol = h_act
            .cholesky()
            .map_err(|e| SlamError::SingularSystem(e.to_string()))?;
        let step_act = -chol.solve(&g_act);
        let mut step = DVector::zeros(dim);
        for (k, &c) in cols.iter().enumerate() {
            step[c] = step_act[k];
        }
        values = values.retract(&step);
        if step_act.amax() < options.step_tol {
            converged = true;
            break;
        }
    }
    let cost = graph.cost(subset, &values)?;
    Ok(Solution {
        values,
        converged,
        iterations,
        cost,
    })
}
