//! Solver selection, options and the shared fit output.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SccError};
use crate::matrix::ColMatrix;
use crate::model::{CenterEstimate, DataMatrix, Diagnostics, DualState, FusionGraph, PenaltyConfig};
use crate::scalar::Scalar;
use crate::{admm, ama};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Algorithm {
    /// Sparse alternating minimization (closed-form A, projected dual step).
    Sama,
    /// Sparse ADMM (group-lasso A step, proximal V step, dual ascent).
    Sadmm,
}

impl Algorithm {
    /// `1.0` for S-ADMM, `1/n` for S-AMA.
    pub fn default_nu<T: Scalar>(self, n: usize) -> T {
        match self {
            Algorithm::Sadmm => T::one(),
            Algorithm::Sama => T::one() / T::from_usize_lossy(n.max(1)),
        }
    }
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Algorithm::Sama => "sama",
            Algorithm::Sadmm => "sadmm",
        })
    }
}

impl std::str::FromStr for Algorithm {
    type Err = SccError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "sama" | "s-ama" => Ok(Algorithm::Sama),
            "sadmm" | "s-admm" => Ok(Algorithm::Sadmm),
            other => Err(SccError::InvalidInput(format!("unknown algorithm '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions<T> {
    pub tol: T,
    pub max_iter: usize,
    /// Re-center every center column after the A step. Only disabled when
    /// solving on raw, uncentered data.
    pub recenter: bool,
}

impl<T: Scalar> Default for SolverOptions<T> {
    fn default() -> Self {
        Self { tol: T::lit(1e-6), max_iter: 10_000, recenter: true }
    }
}

impl<T: Scalar> SolverOptions<T> {
    pub fn with_tol(mut self, tol: T) -> Self {
        self.tol = tol;
        self
    }

    pub fn with_max_iter(mut self, max_iter: usize) -> Self {
        self.max_iter = max_iter;
        self
    }
}

/// Centers, final dual state and diagnostics of one solve.
#[derive(Debug, Clone, PartialEq)]
pub struct FitOutput<T> {
    pub centers: CenterEstimate<T>,
    pub duals: DualState<T>,
    pub diagnostics: Diagnostics<T>,
}

/// Initial iterate for continuation along a tuning grid. The graph must be
/// the one the state was produced on.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct WarmStart<T> {
    pub centers: Option<CenterEstimate<T>>,
    pub duals: Option<DualState<T>>,
}

impl<T: Scalar> WarmStart<T> {
    pub fn cold() -> Self {
        Self { centers: None, duals: None }
    }

    pub fn from_output(out: &FitOutput<T>) -> Self {
        Self { centers: Some(out.centers.clone()), duals: Some(out.duals.clone()) }
    }
}

/// Solves the sparse convex clustering problem on centered data.
pub fn solve<T: Scalar>(
    algorithm: Algorithm,
    x: &DataMatrix<T>,
    graph: &FusionGraph<T>,
    cfg: &PenaltyConfig<T>,
    opts: &SolverOptions<T>,
    warm: &WarmStart<T>,
) -> Result<FitOutput<T>> {
    solve_raw(algorithm, x.values(), graph, cfg, opts, warm)
}

/// Solves on an arbitrary data matrix. Pass `recenter: false` in `opts` to
/// minimize the objective exactly when the columns are not centered.
pub fn solve_raw<T: Scalar>(
    algorithm: Algorithm,
    x: &ColMatrix<T>,
    graph: &FusionGraph<T>,
    cfg: &PenaltyConfig<T>,
    opts: &SolverOptions<T>,
    warm: &WarmStart<T>,
) -> Result<FitOutput<T>> {
    check_problem(x, graph, cfg, warm)?;
    match algorithm {
        Algorithm::Sama => ama::sama_core(x, graph, cfg, opts, warm),
        Algorithm::Sadmm => admm::sadmm_core(x, graph, cfg, opts, warm),
    }
}

pub(crate) fn check_problem<T: Scalar>(
    x: &ColMatrix<T>,
    graph: &FusionGraph<T>,
    cfg: &PenaltyConfig<T>,
    warm: &WarmStart<T>,
) -> Result<()> {
    cfg.validate()?;
    cfg.check_shapes(x.ncols())?;
    if graph.n() != x.nrows() {
        return Err(SccError::ShapeMismatch {
            expected: format!("graph on {} observations", x.nrows()),
            found: format!("graph on {}", graph.n()),
        });
    }
    if let Some(c) = &warm.centers {
        if c.values.shape() != x.shape() {
            return Err(SccError::ShapeMismatch {
                expected: format!("{:?} warm-start centers", x.shape()),
                found: format!("{:?}", c.values.shape()),
            });
        }
    }
    if let Some(d) = &warm.duals {
        if d.lambdas.len() != graph.len() * x.ncols() {
            return Err(SccError::ShapeMismatch {
                expected: format!("{} dual entries", graph.len() * x.ncols()),
                found: format!("{}", d.lambdas.len()),
            });
        }
    }
    Ok(())
}

/// Below this many matrix entries the per-feature and per-edge maps run on
/// the calling thread.
const PAR_THRESHOLD: usize = 16_384;

/// Applies `f` to consecutive `chunk`-sized pieces of `data`, in parallel
/// for large inputs. Each call writes only its own chunk, so the result does
/// not depend on the worker count.
pub(crate) fn for_each_chunk<T, F>(data: &mut [T], chunk: usize, f: F)
where
    T: Send,
    F: Fn(usize, &mut [T]) + Sync + Send,
{
    if chunk == 0 {
        return;
    }
    if data.len() >= PAR_THRESHOLD && rayon::current_num_threads() > 1 {
        data.par_chunks_mut(chunk).enumerate().for_each(|(k, c)| f(k, c));
    } else {
        data.chunks_mut(chunk).enumerate().for_each(|(k, c)| f(k, c));
    }
}

/// `||new - old|| / ||old||`, zero when both vanish.
pub(crate) fn relative_change<T: Scalar>(new: &[T], old: &[T]) -> T {
    let num = crate::scalar::sq_dist(new, old).sqrt();
    let den = crate::scalar::norm2(old);
    if num == T::zero() {
        T::zero()
    } else if den == T::zero() {
        T::infinity()
    } else {
        num / den
    }
}

pub(crate) fn recenter_in_place<T: Scalar>(col: &mut [T]) {
    let mean = col.iter().copied().sum::<T>() / T::from_usize_lossy(col.len());
    if mean != T::zero() {
        col.iter_mut().for_each(|v| *v -= mean);
    }
}
