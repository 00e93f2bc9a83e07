//! S-ADMM: per-feature group-lasso A step, proximal V step and dual ascent
//! on the edge multipliers.
//!
//! The A step minimizes `1/2 a^T M a - z^T a + kappa ||a||_2` with
//! `M = I + nu L`, `L` the (unweighted) Laplacian of the edge set. On the
//! complete graph `M = (1 + n nu) I - nu 1 1^T` factors as `N N` with the
//! rank-one `N` of [`NTransform`]; on a pruned graph the A step works in the
//! eigenbasis of `L` instead ([`SpectralSubproblem`]). Both reduce the group
//! lasso to a scalar secular equation for `||a||_2`, which is solved exactly.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::ama;
use crate::error::{Result, SccError};
use crate::matrix::ColMatrix;
use crate::model::{objective_raw, CenterEstimate, DataMatrix, Diagnostics, DualState, FusionGraph, PenaltyConfig};
use crate::prox::prox_in_place;
use crate::scalar::{dot, norm2, Scalar};
use crate::solver::{
    check_problem, for_each_chunk, recenter_in_place, relative_change, FitOutput, SolverOptions, WarmStart,
};

/// `N = sqrt(1 + n nu) I - ((sqrt(1 + n nu) - 1) / n) 1 1^T`, applied in O(n).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NTransform<T> {
    n: usize,
    nu: T,
    root: T,
}

impl<T: Scalar> NTransform<T> {
    pub fn new(n: usize, nu: T) -> Result<Self> {
        if n == 0 {
            return Err(SccError::Size("N transform needs n >= 1".into()));
        }
        if !(nu >= T::zero()) || !nu.is_finite() {
            return Err(SccError::Config(format!("nu must be finite and >= 0, got {nu}")));
        }
        let root = (T::one() + T::from_usize_lossy(n) * nu).sqrt();
        Ok(Self { n, nu, root })
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn nu(&self) -> T {
        self.nu
    }

    /// Eigenvalue of `M` on the centered subspace, `1 + n nu`.
    #[inline]
    pub fn centered_eigenvalue(&self) -> T {
        self.root * self.root
    }

    fn mean(v: &[T]) -> T {
        v.iter().copied().sum::<T>() / T::from_usize_lossy(v.len())
    }

    pub fn apply(&self, a: &[T]) -> Vec<T> {
        // N a = root * a - (root - 1) * mean(a) * 1
        let shift = (self.root - T::one()) * Self::mean(a);
        a.iter().map(|&v| self.root * v - shift).collect()
    }

    pub fn apply_inverse(&self, a: &[T]) -> Vec<T> {
        // N^-1 a = (a + (root - 1) * mean(a) * 1) / root
        let shift = (self.root - T::one()) * Self::mean(a);
        a.iter().map(|&v| (v + shift) / self.root).collect()
    }

    /// `M a = (1 + n nu) a - nu (1^T a) 1`.
    pub fn apply_m(&self, a: &[T]) -> Vec<T> {
        let total: T = a.iter().copied().sum();
        a.iter().map(|&v| self.centered_eigenvalue() * v - self.nu * total).collect()
    }
}

/// `z_j = x_j + nu sum_l vtilde_l (e_i1 - e_i2)`, scattered without forming the incidence matrix.
fn scatter_response<T: Scalar>(z: &mut [T], vtilde: &[T], nu: T, graph: &FusionGraph<T>) {
    for (e, &v) in graph.edges().iter().zip(vtilde) {
        z[e.i1] += nu * v;
        z[e.i2] -= nu * v;
    }
}

/// Pseudo response `y_j = N^-1 [x_j + nu sum_l vtilde_jl (e_i1 - e_i2)]`.
pub fn pseudo_response<T: Scalar>(
    xj: &[T],
    vtilde: &[T],
    graph: &FusionGraph<T>,
    nt: &NTransform<T>,
) -> Result<Vec<T>> {
    if vtilde.len() != graph.len() {
        return Err(SccError::ShapeMismatch {
            expected: format!("{} edge values", graph.len()),
            found: format!("{}", vtilde.len()),
        });
    }
    if xj.len() != nt.n() || graph.n() != nt.n() {
        return Err(SccError::InvalidInput(format!(
            "edge indices or response length inconsistent with n = {}",
            nt.n()
        )));
    }
    let mut z = xj.to_vec();
    scatter_response(&mut z, vtilde, nt.nu(), graph);
    Ok(nt.apply_inverse(&z))
}

/// Root `t > 0` of `sum_k c2_k / (phi_k t + kappa)^2 = 1`, i.e. the norm of
/// the group-lasso solution. Requires `kappa > 0`, `sum c2 > kappa^2` and
/// every `phi_k > 0`.
fn secular_norm<T: Scalar>(c2: &[T], phi: &[T], kappa: T) -> T {
    let z_norm = c2.iter().copied().sum::<T>().sqrt();
    let phi_min = phi.iter().copied().fold(T::infinity(), T::min);
    let (mut lo, mut hi) = (T::zero(), z_norm / phi_min);
    let eval = |t: T| {
        let mut s = T::zero();
        let mut ds = T::zero();
        for (&c, &f) in c2.iter().zip(phi) {
            let d = f * t + kappa;
            s += c / (d * d);
            ds -= T::lit(2.0) * c * f / (d * d * d);
        }
        // g(t) = s^{-1/2} - 1 is increasing and concave in t
        let g = s.powf(T::lit(-0.5)) - T::one();
        let dg = T::lit(-0.5) * s.powf(T::lit(-1.5)) * ds;
        (g, dg)
    };
    let mut t = lo;
    for _ in 0..200 {
        let (g, dg) = eval(t);
        if g == T::zero() {
            return t;
        }
        if g < T::zero() {
            lo = t;
        } else {
            hi = t;
        }
        let mut next = t - g / dg;
        if !(next > lo && next < hi) {
            next = T::lit(0.5) * (lo + hi);
        }
        if (next - t).abs() <= T::epsilon() * T::lit(4.0) * next.abs() {
            return next;
        }
        t = next;
    }
    t
}

/// Exact minimizer of `1/2 ||y - N a||^2 + kappa ||a||_2`.
///
/// With `z = N y` the solution is zero iff `||z|| <= kappa`; otherwise it
/// follows `z` scaled by `t / (phi t + kappa)` in each eigenspace of `M`
/// (eigenvalue 1 along `1`, `1 + n nu` on the centered subspace). For a
/// centered `z` this is `(1 - kappa / ||z||)_+ z / (1 + n nu)`.
pub fn group_lasso_subproblem<T: Scalar>(yj: &[T], nt: &NTransform<T>, kappa: T) -> Vec<T> {
    let z = nt.apply(yj);
    solve_two_level(&z, nt.centered_eigenvalue(), kappa)
}

fn solve_two_level<T: Scalar>(z: &[T], phi: T, kappa: T) -> Vec<T> {
    let n = T::from_usize_lossy(z.len());
    let mean = z.iter().copied().sum::<T>() / n;
    let centered: Vec<T> = z.iter().map(|&v| v - mean).collect();
    if kappa <= T::zero() {
        return centered.iter().map(|&c| mean + c / phi).collect();
    }
    let z_norm = norm2(z);
    if z_norm <= kappa {
        return vec![T::zero(); z.len()];
    }
    let c_norm = norm2(&centered);
    if mean == T::zero() {
        let scale = (T::one() - kappa / c_norm) / phi;
        return centered.iter().map(|&c| scale * c).collect();
    }
    let t = secular_norm(&[n * mean * mean, c_norm * c_norm], &[T::one(), phi], kappa);
    let along = mean * t / (t + kappa);
    let scale = t / (phi * t + kappa);
    centered.iter().map(|&c| along + scale * c).collect()
}

/// A-step solver for an arbitrary edge set, using the eigendecomposition of
/// `M = I + nu L`. The factorization is computed once per solve in double
/// precision.
#[derive(Debug, Clone)]
pub struct SpectralSubproblem<T> {
    /// Eigenvectors of `L`, one per column.
    basis: ColMatrix<T>,
    /// Eigenvalues of `M`.
    phi: Vec<T>,
}

impl<T: Scalar> SpectralSubproblem<T> {
    pub fn new(graph: &FusionGraph<T>, nu: T) -> Self {
        let n = graph.n();
        let mut lap = DMatrix::<f64>::zeros(n, n);
        for e in graph.edges() {
            lap[(e.i1, e.i1)] += 1.0;
            lap[(e.i2, e.i2)] += 1.0;
            lap[(e.i1, e.i2)] -= 1.0;
            lap[(e.i2, e.i1)] -= 1.0;
        }
        let eig = SymmetricEigen::new(lap);
        let nu = nu.as_f64();
        let phi = eig.eigenvalues.iter().map(|&mu| T::lit(1.0 + nu * mu.max(0.0))).collect();
        let basis = ColMatrix::from_fn(n, n, |i, k| T::lit(eig.eigenvectors[(i, k)]));
        Self { basis, phi }
    }

    /// Minimizer of `1/2 a^T M a - z^T a + kappa ||a||_2`.
    pub fn solve(&self, z: &[T], kappa: T) -> Vec<T> {
        let n = z.len();
        if kappa > T::zero() && norm2(z) <= kappa {
            return vec![T::zero(); n];
        }
        let coords: Vec<T> = (0..n).map(|k| dot(self.basis.col(k), z)).collect();
        let scales: Vec<T> = if kappa <= T::zero() {
            self.phi.iter().map(|&f| T::one() / f).collect()
        } else {
            let c2: Vec<T> = coords.iter().map(|&c| c * c).collect();
            let t = secular_norm(&c2, &self.phi, kappa);
            self.phi.iter().map(|&f| t / (f * t + kappa)).collect()
        };
        let mut a = vec![T::zero(); n];
        for k in 0..n {
            let w = coords[k] * scales[k];
            if w != T::zero() {
                a.iter_mut().zip(self.basis.col(k)).for_each(|(ai, &q)| *ai += w * q);
            }
        }
        a
    }
}

enum AStep<T> {
    Complete(NTransform<T>),
    Spectral(SpectralSubproblem<T>),
}

/// `v_l = prox_{sigma_l ||.||_q}(A_i1 - A_i2 - lambda_l / nu)`, `sigma_l = gamma1 w_l / nu`.
pub fn update_v<T: Scalar>(
    a: &CenterEstimate<T>,
    lambdas: &DualState<T>,
    graph: &FusionGraph<T>,
    cfg: &PenaltyConfig<T>,
) -> Result<Vec<T>> {
    check_edge_state(lambdas, a, graph)?;
    let mut v = vec![T::zero(); lambdas.lambdas.len()];
    slack_step(&mut v, &a.values, &lambdas.lambdas, graph, cfg);
    Ok(v)
}

/// `lambda_l <- lambda_l + nu (v_l - A_i1 + A_i2)`.
pub fn update_lambda_admm<T: Scalar>(
    state: &DualState<T>,
    a: &CenterEstimate<T>,
    graph: &FusionGraph<T>,
    nu: T,
) -> Result<DualState<T>> {
    check_edge_state(state, a, graph)?;
    let slacks = state
        .slacks
        .as_ref()
        .ok_or_else(|| SccError::InvalidInput("ADMM dual update needs slack variables".into()))?;
    let mut next = state.clone();
    multiplier_step(&mut next.lambdas, slacks, &a.values, graph, nu);
    Ok(next)
}

fn check_edge_state<T: Scalar>(state: &DualState<T>, a: &CenterEstimate<T>, graph: &FusionGraph<T>) -> Result<()> {
    if state.num_edges() != graph.len() || state.p() != a.p() || a.n() != graph.n() {
        return Err(SccError::ShapeMismatch {
            expected: format!("{} edges x {} features", graph.len(), a.p()),
            found: format!("{} x {}", state.num_edges(), state.p()),
        });
    }
    Ok(())
}

fn slack_step<T: Scalar>(
    v: &mut [T],
    a: &ColMatrix<T>,
    lambdas: &[T],
    graph: &FusionGraph<T>,
    cfg: &PenaltyConfig<T>,
) {
    let p = a.ncols();
    let edges = graph.edges();
    for_each_chunk(v, p, |l, vl| {
        let e = edges[l];
        for (j, out) in vl.iter_mut().enumerate() {
            *out = a.get(e.i1, j) - a.get(e.i2, j) - lambdas[l * p + j] / cfg.nu;
        }
        prox_in_place(vl, cfg.gamma1 * e.weight / cfg.nu, cfg.norm);
    });
}

fn multiplier_step<T: Scalar>(lambdas: &mut [T], v: &[T], a: &ColMatrix<T>, graph: &FusionGraph<T>, nu: T) {
    let p = a.ncols();
    let edges = graph.edges();
    for_each_chunk(lambdas, p, |l, lam| {
        let e = edges[l];
        for (j, out) in lam.iter_mut().enumerate() {
            *out += nu * (v[l * p + j] - a.get(e.i1, j) + a.get(e.i2, j));
        }
    });
}

/// Runs S-ADMM on centered data from the default start `A = X`, `V = D X`, `Lambda = 0`.
pub fn run_sadmm<T: Scalar>(
    x: &DataMatrix<T>,
    graph: &FusionGraph<T>,
    cfg: &PenaltyConfig<T>,
    opts: &SolverOptions<T>,
) -> Result<FitOutput<T>> {
    let warm = WarmStart::cold();
    check_problem(x.values(), graph, cfg, &warm)?;
    sadmm_core(x.values(), graph, cfg, opts, &warm)
}

pub(crate) fn sadmm_core<T: Scalar>(
    x: &ColMatrix<T>,
    graph: &FusionGraph<T>,
    cfg: &PenaltyConfig<T>,
    opts: &SolverOptions<T>,
    warm: &WarmStart<T>,
) -> Result<FitOutput<T>> {
    let (n, p) = x.shape();
    let m = graph.len();
    let nu = cfg.nu;
    let step = if graph.is_complete() {
        AStep::Complete(NTransform::new(n, nu)?)
    } else {
        AStep::Spectral(SpectralSubproblem::new(graph, nu))
    };

    let mut a = warm.centers.as_ref().map_or_else(|| x.clone(), |c| c.values.clone());
    let (mut lambdas, mut v) = match &warm.duals {
        Some(d) if d.slacks.is_some() => (d.lambdas.clone(), d.slacks.clone().unwrap_or_default()),
        other => {
            let lam = other.as_ref().map_or_else(|| vec![T::zero(); m * p], |d| d.lambdas.clone());
            let mut v = vec![T::zero(); m * p];
            for (l, e) in graph.edges().iter().enumerate() {
                for j in 0..p {
                    v[l * p + j] = a.get(e.i1, j) - a.get(e.i2, j);
                }
            }
            (lam, v)
        }
    };

    let mut a_prev = a.clone();
    let mut iterations = 0;
    let mut converged = false;
    let mut change = T::infinity();
    let mut residual = T::infinity();
    let root_p = T::from_usize_lossy(p).sqrt();

    while iterations < opts.max_iter {
        iterations += 1;
        std::mem::swap(&mut a, &mut a_prev);

        // A step, one group-lasso problem per feature
        for_each_chunk(a.as_mut_slice(), n, |j, aj| {
            let kappa = cfg.gamma2 * cfg.feature_factors[j];
            aj.copy_from_slice(x.col(j));
            for (l, e) in graph.edges().iter().enumerate() {
                let s = nu * v[l * p + j] + lambdas[l * p + j];
                aj[e.i1] += s;
                aj[e.i2] -= s;
            }
            let sol = match &step {
                AStep::Complete(nt) => group_lasso_subproblem(&nt.apply_inverse(aj), nt, kappa),
                AStep::Spectral(sp) => sp.solve(aj, kappa),
            };
            aj.copy_from_slice(&sol);
            if opts.recenter {
                recenter_in_place(aj);
            }
        });

        slack_step(&mut v, &a, &lambdas, graph, cfg);
        multiplier_step(&mut lambdas, &v, &a, graph, nu);

        residual = T::zero();
        let mut r = vec![T::zero(); p];
        for (l, e) in graph.edges().iter().enumerate() {
            for (j, rj) in r.iter_mut().enumerate() {
                *rj = v[l * p + j] - a.get(e.i1, j) + a.get(e.i2, j);
            }
            residual = residual.max(norm2(&r) / root_p);
        }
        change = relative_change(a.as_slice(), a_prev.as_slice()).max(residual);
        if change <= opts.tol {
            converged = true;
            break;
        }
    }

    let objective = objective_raw(x, &a, graph, cfg)?;
    let duality_gap = dual_gap(x, &objective, &lambdas, graph, cfg, opts.recenter);

    Ok(FitOutput {
        centers: CenterEstimate::new(a),
        duals: DualState::from_parts(p, lambdas, Some(v)),
        diagnostics: Diagnostics {
            iterations,
            converged,
            primal_residual: residual,
            relative_change: change,
            objective,
            duality_gap,
        },
    })
}

/// Gap against the fusion dual; `None` when the multipliers are not (numerically) dual feasible.
fn dual_gap<T: Scalar>(
    x: &ColMatrix<T>,
    objective: &T,
    lambdas: &[T],
    graph: &FusionGraph<T>,
    cfg: &PenaltyConfig<T>,
    recenter: bool,
) -> Option<T> {
    let p = x.ncols();
    let dual = cfg.norm.dual();
    let slack = T::lit(1e-9) * (T::one() + cfg.gamma1);
    let feasible = graph
        .edges()
        .iter()
        .enumerate()
        .all(|(l, e)| dual.norm(&lambdas[l * p..(l + 1) * p]) <= cfg.gamma1 * e.weight + slack);
    if !feasible {
        return None;
    }
    let mut a = ColMatrix::zeros(x.nrows(), p);
    ama::primal_step(&mut a, x, lambdas, graph, cfg, recenter);
    Some(*objective - ama::dual_value(x, &a, lambdas, graph, cfg))
}
