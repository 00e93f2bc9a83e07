//! S-AMA: closed-form group soft-threshold for the centers and a projected
//! gradient step on the edge duals. Slacks are not iterated; the returned
//! ones come from one extra dual step and are exactly zero on fused edges.

use crate::error::{Result, SccError};
use crate::matrix::ColMatrix;
use crate::model::{objective_raw, CenterEstimate, DataMatrix, Diagnostics, DualState, FusionGraph, PenaltyConfig};
use crate::prox::project_ball_in_place;
use crate::scalar::{norm2, Scalar};
use crate::solver::{
    check_problem, for_each_chunk, recenter_in_place, relative_change, FitOutput, SolverOptions, WarmStart,
};

/// `z_j = x_j + sum_l lambda_lj (e_i1 - e_i2)`.
pub fn z_aggregate<T: Scalar>(
    xj: &[T],
    lambdas: &DualState<T>,
    graph: &FusionGraph<T>,
    j: usize,
) -> Result<Vec<T>> {
    if j >= lambdas.p() {
        return Err(SccError::InvalidInput(format!("feature index {j} out of range {}", lambdas.p())));
    }
    if xj.len() != graph.n() || lambdas.num_edges() != graph.len() {
        return Err(SccError::ShapeMismatch {
            expected: format!("{} observations and {} edges", graph.n(), graph.len()),
            found: format!("{} and {}", xj.len(), lambdas.num_edges()),
        });
    }
    let mut z = xj.to_vec();
    scatter_duals(&mut z, &lambdas.lambdas, lambdas.p(), graph, j);
    Ok(z)
}

#[inline]
fn scatter_duals<T: Scalar>(z: &mut [T], lambdas: &[T], p: usize, graph: &FusionGraph<T>, j: usize) {
    for (l, e) in graph.edges().iter().enumerate() {
        let lam = lambdas[l * p + j];
        z[e.i1] += lam;
        z[e.i2] -= lam;
    }
}

/// `(1 - kappa / ||z||)_+ z`; exactly zero when `||z|| <= kappa`.
pub fn blockwise_soft_threshold<T: Scalar>(zj: &[T], kappa: T) -> Vec<T> {
    let mut out = zj.to_vec();
    soft_threshold_in_place(&mut out, kappa);
    out
}

#[inline]
pub(crate) fn soft_threshold_in_place<T: Scalar>(z: &mut [T], kappa: T) {
    if kappa <= T::zero() {
        return;
    }
    let nrm = norm2(z);
    if nrm <= kappa {
        z.iter_mut().for_each(|v| *v = T::zero());
    } else {
        let scale = T::one() - kappa / nrm;
        z.iter_mut().for_each(|v| *v *= scale);
    }
}

/// `lambda_l <- P_{C_l}[lambda_l - nu (A_i1 - A_i2)]` with
/// `C_l = {||lambda||_dual <= gamma1 w_l}`.
pub fn update_lambda_ama<T: Scalar>(
    state: &DualState<T>,
    a: &CenterEstimate<T>,
    graph: &FusionGraph<T>,
    cfg: &PenaltyConfig<T>,
) -> Result<DualState<T>> {
    if state.num_edges() != graph.len() || state.p() != a.p() || a.n() != graph.n() {
        return Err(SccError::ShapeMismatch {
            expected: format!("{} edges x {} features", graph.len(), a.p()),
            found: format!("{} x {}", state.num_edges(), state.p()),
        });
    }
    let mut next = state.clone();
    dual_step(&mut next.lambdas, &a.values, graph, cfg);
    Ok(next)
}

fn dual_step<T: Scalar>(lambdas: &mut [T], a: &ColMatrix<T>, graph: &FusionGraph<T>, cfg: &PenaltyConfig<T>) {
    let p = a.ncols();
    let dual = cfg.norm.dual();
    let edges = graph.edges();
    for_each_chunk(lambdas, p, |l, lam| {
        let e = edges[l];
        for (j, v) in lam.iter_mut().enumerate() {
            *v -= cfg.nu * (a.get(e.i1, j) - a.get(e.i2, j));
        }
        project_ball_in_place(lam, cfg.gamma1 * e.weight, dual);
    });
}

pub(crate) fn primal_step<T: Scalar>(
    a: &mut ColMatrix<T>,
    x: &ColMatrix<T>,
    lambdas: &[T],
    graph: &FusionGraph<T>,
    cfg: &PenaltyConfig<T>,
    recenter: bool,
) {
    let (n, p) = x.shape();
    for_each_chunk(a.as_mut_slice(), n, |j, aj| {
        aj.copy_from_slice(x.col(j));
        scatter_duals(aj, lambdas, p, graph, j);
        soft_threshold_in_place(aj, cfg.gamma2 * cfg.feature_factors[j]);
        if recenter {
            recenter_in_place(aj);
        }
    });
}

/// Dual objective `min_A f(A) - sum_l <lambda_l, A_i1 - A_i2>` at a feasible
/// `lambdas`, evaluated at its minimizer `a`.
pub(crate) fn dual_value<T: Scalar>(
    x: &ColMatrix<T>,
    a: &ColMatrix<T>,
    lambdas: &[T],
    graph: &FusionGraph<T>,
    cfg: &PenaltyConfig<T>,
) -> T {
    let p = x.ncols();
    let fit = T::lit(0.5) * x.distance(a).powi(2);
    let sparsity: T = (0..p).map(|j| cfg.feature_factors[j] * norm2(a.col(j))).sum();
    let mut coupling = T::zero();
    for (l, e) in graph.edges().iter().enumerate() {
        for j in 0..p {
            coupling += lambdas[l * p + j] * (a.get(e.i1, j) - a.get(e.i2, j));
        }
    }
    fit + cfg.gamma2 * sparsity - coupling
}

/// `v_l = (P_{C_l}[y_l] - y_l) / nu` with `y_l = lambda_l - nu (A_i1 - A_i2)`,
/// the proximal point of the fusion norm at `A_i1 - A_i2 - lambda_l / nu`.
/// It vanishes exactly when `y_l` lies inside the dual ball.
fn slacks_from_step<T: Scalar>(a: &ColMatrix<T>, lambdas: &[T], graph: &FusionGraph<T>, cfg: &PenaltyConfig<T>) -> Vec<T> {
    let p = a.ncols();
    let dual = cfg.norm.dual();
    let mut out = lambdas.to_vec();
    let edges = graph.edges();
    for_each_chunk(&mut out, p, |l, v| {
        let e = edges[l];
        for (j, y) in v.iter_mut().enumerate() {
            *y -= cfg.nu * (a.get(e.i1, j) - a.get(e.i2, j));
        }
        let mut proj = v.to_vec();
        project_ball_in_place(&mut proj, cfg.gamma1 * e.weight, dual);
        for (y, q) in v.iter_mut().zip(&proj) {
            *y = if *y == *q { T::zero() } else { (*q - *y) / cfg.nu };
        }
    });
    out
}

/// Runs S-AMA on centered data.
pub fn run_sama<T: Scalar>(
    x: &DataMatrix<T>,
    graph: &FusionGraph<T>,
    cfg: &PenaltyConfig<T>,
    opts: &SolverOptions<T>,
) -> Result<FitOutput<T>> {
    let warm = WarmStart::cold();
    check_problem(x.values(), graph, cfg, &warm)?;
    sama_core(x.values(), graph, cfg, opts, &warm)
}

pub(crate) fn sama_core<T: Scalar>(
    x: &ColMatrix<T>,
    graph: &FusionGraph<T>,
    cfg: &PenaltyConfig<T>,
    opts: &SolverOptions<T>,
    warm: &WarmStart<T>,
) -> Result<FitOutput<T>> {
    let (n, p) = x.shape();
    let dual = cfg.norm.dual();
    let mut lambdas = match &warm.duals {
        Some(d) => d.lambdas.clone(),
        None => vec![T::zero(); graph.len() * p],
    };
    // a warm start from a larger gamma1 may sit outside the new balls
    for (l, e) in graph.edges().iter().enumerate() {
        project_ball_in_place(&mut lambdas[l * p..(l + 1) * p], cfg.gamma1 * e.weight, dual);
    }

    let mut a = ColMatrix::zeros(n, p);
    let mut a_prev = a.clone();
    let mut lambdas_prev = lambdas.clone();
    let mut iterations = 0;
    let mut converged = false;
    let mut change = T::infinity();

    while iterations < opts.max_iter {
        iterations += 1;
        std::mem::swap(&mut a, &mut a_prev);
        lambdas_prev.copy_from_slice(&lambdas);

        primal_step(&mut a, x, &lambdas, graph, cfg, opts.recenter);
        dual_step(&mut lambdas, &a, graph, cfg);

        let da = relative_change(a.as_slice(), a_prev.as_slice());
        let dl = relative_change(&lambdas, &lambdas_prev);
        change = if iterations == 1 { T::infinity() } else { da.max(dl) };
        if change <= opts.tol {
            converged = true;
            break;
        }
    }

    // primal point of the final dual iterate
    primal_step(&mut a, x, &lambdas, graph, cfg, opts.recenter);
    let objective = objective_raw(x, &a, graph, cfg)?;
    let gap = objective - dual_value(x, &a, &lambdas, graph, cfg);
    let slacks = slacks_from_step(&a, &lambdas, graph, cfg);

    Ok(FitOutput {
        centers: CenterEstimate::new(a),
        duals: DualState::from_parts(p, lambdas, Some(slacks)),
        diagnostics: Diagnostics {
            iterations,
            converged,
            primal_residual: T::zero(),
            relative_change: change,
            objective,
            duality_gap: Some(gap),
        },
    })
}
