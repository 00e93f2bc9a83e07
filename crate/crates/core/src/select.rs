//! Tuning of `(gamma1, gamma2)`: bootstrap stability selection and, for
//! simulations with known labels, validation Rand index.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cluster::{check_ascending, cluster_means, extract_clusters, fusing_gamma1, nearest_center_labels};
use crate::error::{Result, SccError};
use crate::matrix::ColMatrix;
use crate::metrics::rand_index;
use crate::model::{center_features, ClusteringResult, DataMatrix, FusionGraph, PenaltyConfig};
use crate::prox::NormKind;
use crate::scalar::{norm2, Scalar};
use crate::solver::{solve, Algorithm, SolverOptions, WarmStart};
use crate::weights::{adaptive_feature_factors, build_fusion_weights, rescale_fusion_weights, WeightConfig};

/// Everything needed to go from a data matrix to a clustering at given
/// `(gamma1, gamma2)`: weights, factors, solver and merge tolerance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitRecipe<T> {
    pub algorithm: Algorithm,
    pub norm: NormKind,
    pub weights: WeightConfig<T>,
    /// `None` uses the solver default.
    pub nu: Option<T>,
    /// Adaptive factors from a `gamma2 = 0` pilot at the same `gamma1`;
    /// otherwise uniform factors.
    pub adaptive: bool,
    pub opts: SolverOptions<T>,
    pub merge_tol: T,
}

impl<T: Scalar> FitRecipe<T> {
    pub fn new(algorithm: Algorithm) -> Self {
        Self {
            algorithm,
            norm: NormKind::L2,
            weights: WeightConfig::default(),
            nu: None,
            adaptive: true,
            opts: SolverOptions::default(),
            merge_tol: T::lit(crate::cluster::DEFAULT_MERGE_TOL),
        }
    }

    pub fn nu_for(&self, n: usize) -> T {
        self.nu.unwrap_or_else(|| self.algorithm.default_nu(n))
    }

    /// k-NN Gaussian weights rescaled to sum to `1 / sqrt(p)`.
    pub fn graph(&self, x: &DataMatrix<T>) -> Result<FusionGraph<T>> {
        rescale_fusion_weights(&build_fusion_weights(x, &self.weights)?, x.p())
    }

    /// Feature factors for a fit at `gamma1`, summing to `1 / sqrt(n)`.
    pub fn factors(&self, x: &DataMatrix<T>, graph: &FusionGraph<T>, gamma1: T) -> Result<Vec<T>> {
        if self.adaptive {
            let opts = self.opts;
            adaptive_feature_factors(x, graph, gamma1, self.norm, self.algorithm, &opts)
        } else {
            let u = T::one() / (T::from_usize_lossy(x.p()) * T::from_usize_lossy(x.n()).sqrt());
            Ok(vec![u; x.p()])
        }
    }

    pub fn config(&self, n: usize, gamma1: T, gamma2: T, factors: Vec<T>) -> Result<PenaltyConfig<T>> {
        PenaltyConfig::new(gamma1, gamma2, self.norm, self.nu_for(n), factors)
    }

    /// One fit at `(gamma1, gamma2)` from scratch.
    pub fn fit(&self, x: &DataMatrix<T>, gamma1: T, gamma2: T) -> Result<ClusteringResult<T>> {
        let graph = self.graph(x)?;
        let factors = self.factors(x, &graph, gamma1)?;
        let cfg = self.config(x.n(), gamma1, gamma2, factors)?;
        let fit = solve(self.algorithm, x, &graph, &cfg, &self.opts, &WarmStart::cold())?;
        Ok(extract_clusters(&fit, &graph, self.merge_tol))
    }

    /// Fits every grid point on one data set. Rows follow `gamma1`; within a
    /// row `gamma2` ascends and each fit is warm-started from the previous one.
    pub fn fit_grid(&self, x: &DataMatrix<T>, gamma1: &[T], gamma2: &[T]) -> Result<Vec<Vec<ClusteringResult<T>>>> {
        check_ascending(gamma1, "gamma1")?;
        check_ascending(gamma2, "gamma2")?;
        let graph = self.graph(x)?;
        let mut rows = Vec::with_capacity(gamma1.len());
        let mut row_start = WarmStart::cold();
        for &g1 in gamma1 {
            let factors = self.factors(x, &graph, g1)?;
            let mut warm = row_start.clone();
            let mut row = Vec::with_capacity(gamma2.len());
            for (k, &g2) in gamma2.iter().enumerate() {
                let cfg = self.config(x.n(), g1, g2, factors.clone())?;
                let fit = solve(self.algorithm, x, &graph, &cfg, &self.opts, &warm)?;
                warm = WarmStart::from_output(&fit);
                if k == 0 {
                    row_start = warm.clone();
                }
                row.push(extract_clusters(&fit, &graph, self.merge_tol));
            }
            rows.push(row);
        }
        Ok(rows)
    }
}

/// Grid sizes and ranges for [`default_grids`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub gamma1_points: usize,
    /// Smallest `gamma1` as a fraction of the fusing value.
    pub gamma1_min_ratio: f64,
    pub gamma2_points: usize,
    /// Smallest `gamma2` as a fraction of the feature-kill value.
    pub gamma2_min_ratio: f64,
    /// Keep the fully fusing `gamma1` as the last grid point.
    pub include_fusing: bool,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self { gamma1_points: 8, gamma1_min_ratio: 1e-3, gamma2_points: 12, gamma2_min_ratio: 1e-3, include_fusing: true }
    }
}

fn geometric<T: Scalar>(hi: T, ratio: f64, points: usize) -> Vec<T> {
    if points <= 1 {
        return vec![hi];
    }
    (0..points)
        .map(|k| {
            let e = (points - 1 - k) as f64 / (points - 1) as f64;
            hi * T::lit(ratio.powf(e))
        })
        .collect()
}

/// `gamma2` at which every center column is zero: `max_j ||x_j||_2 / u_j`.
pub fn gamma2_kill<T: Scalar>(x: &DataMatrix<T>, factors: &[T]) -> T {
    (0..x.p())
        .filter(|&j| factors[j] > T::zero())
        .map(|j| norm2(x.values().col(j)) / factors[j])
        .fold(T::zero(), T::max)
}

/// Geometric grids anchored at data-driven endpoints: `gamma1` up to the
/// doubling-search fusing value (at `gamma2 = 0`), `gamma2` up to the
/// largest feature-kill value over the `gamma1` grid.
pub fn default_grids<T: Scalar>(recipe: &FitRecipe<T>, x: &DataMatrix<T>, spec: &GridSpec) -> Result<(Vec<T>, Vec<T>)> {
    if spec.gamma1_points == 0 || spec.gamma2_points == 0 {
        return Err(SccError::InvalidInput("grid sizes must be positive".into()));
    }
    let graph = recipe.graph(x)?;
    let base = recipe.config(x.n(), T::zero(), T::zero(), vec![T::one(); x.p()])?;
    let fuse = fusing_gamma1(x, &graph, &base, recipe.algorithm, &recipe.opts, recipe.merge_tol)?;
    let g1 = if spec.include_fusing {
        geometric(fuse, spec.gamma1_min_ratio, spec.gamma1_points)
    } else {
        let mut g = geometric(fuse, spec.gamma1_min_ratio, spec.gamma1_points + 1);
        g.pop();
        g
    };
    let mut kill = T::zero();
    for &g in &g1 {
        kill = kill.max(gamma2_kill(x, &recipe.factors(x, &graph, g)?));
    }
    let g2 = geometric(kill, spec.gamma2_min_ratio, spec.gamma2_points);
    Ok((g1, g2))
}

/// Labels every row of `points` (in the coordinates of `fit`) by the nearest
/// cluster-mean center of the fit.
pub fn label_by_nearest_center<T: Scalar>(fit: &ClusteringResult<T>, points: &ColMatrix<T>) -> Vec<usize> {
    let means = cluster_means(&fit.centers.values, &fit.assignment, fit.num_clusters);
    nearest_center_labels(points, &means)
}

/// Index of the best score; ties go to larger `gamma2` (later column), then
/// larger `gamma1` (later row). `None` entries are skipped.
fn argmax_prefer_late(scores: &[Vec<Option<f64>>]) -> Option<(usize, usize)> {
    let mut best: Option<(usize, usize, f64)> = None;
    for (i, row) in scores.iter().enumerate() {
        for (k, s) in row.iter().enumerate() {
            if let Some(s) = *s {
                let better = match best {
                    None => true,
                    Some((bi, bk, bs)) => s > bs || (s == bs && (k > bk || (k == bk && i > bi))),
                };
                if better {
                    best = Some((i, k, s));
                }
            }
        }
    }
    best.map(|(i, k, _)| (i, k))
}

/// Outcome of [`tune_validation_rand`].
#[derive(Debug, Clone, PartialEq)]
pub struct ValidationTuning<T> {
    pub gamma1: T,
    pub gamma2: T,
    /// Validation Rand index per `[gamma1][gamma2]` point.
    pub surface: Vec<Vec<f64>>,
    /// Training fit at the selected point.
    pub fit: ClusteringResult<T>,
}

/// Fits on `train` at every grid point, labels the validation observations
/// (given raw, centered with the training means) by nearest center and keeps
/// the point with the highest validation Rand index.
pub fn tune_validation_rand<T: Scalar>(
    recipe: &FitRecipe<T>,
    train: &DataMatrix<T>,
    validation: &ColMatrix<T>,
    validation_labels: &[usize],
    gamma1: &[T],
    gamma2: &[T],
) -> Result<ValidationTuning<T>> {
    let val = train.center_like(validation)?;
    if val.nrows() != validation_labels.len() {
        return Err(SccError::ShapeMismatch {
            expected: format!("{} validation labels", val.nrows()),
            found: format!("{}", validation_labels.len()),
        });
    }
    let grid = recipe.fit_grid(train, gamma1, gamma2)?;
    let mut surface = Vec::with_capacity(grid.len());
    for row in &grid {
        let mut out = Vec::with_capacity(row.len());
        for fit in row {
            out.push(rand_index(&label_by_nearest_center(fit, &val), validation_labels)?);
        }
        surface.push(out);
    }
    let wrapped: Vec<Vec<Option<f64>>> = surface.iter().map(|r| r.iter().map(|&s| Some(s)).collect()).collect();
    let (i, k) = argmax_prefer_late(&wrapped).expect("non-empty grid");
    let fit = grid.into_iter().nth(i).and_then(|r| r.into_iter().nth(k)).expect("in range");
    Ok(ValidationTuning { gamma1: gamma1[i], gamma2: gamma2[k], surface, fit })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityConfig<T> {
    pub repetitions: usize,
    pub gamma1_grid: Vec<T>,
    pub gamma2_grid: Vec<T>,
    pub rng_seed: u64,
}

impl<T: Scalar> StabilityConfig<T> {
    pub fn new(gamma1_grid: Vec<T>, gamma2_grid: Vec<T>, rng_seed: u64) -> Self {
        Self { repetitions: 50, gamma1_grid, gamma2_grid, rng_seed }
    }

    fn validate(&self) -> Result<()> {
        if self.repetitions < 2 {
            return Err(SccError::Config("stability tuning needs at least 2 repetitions".into()));
        }
        check_ascending(&self.gamma1_grid, "gamma1")?;
        check_ascending(&self.gamma2_grid, "gamma2")
    }
}

/// Stability surface and the selected point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityTuning<T> {
    pub gamma1: T,
    pub gamma2: T,
    /// Mean agreement per `[gamma1][gamma2]` point.
    pub mean: Vec<Vec<f64>>,
    /// Standard deviation over repetitions.
    pub sd: Vec<Vec<f64>>,
    /// Fraction of bootstrap fits that did not converge.
    pub nonconverged: Vec<Vec<f64>>,
}

fn bootstrap_sample<T: Scalar, R: Rng + ?Sized>(raw: &ColMatrix<T>, rng: &mut R) -> Result<DataMatrix<T>> {
    let n = raw.nrows();
    let idx: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
    center_features(&raw.select_rows(&idx))
}

/// Labels of the original observations from a fit on one bootstrap sample,
/// for every grid point, plus convergence flags.
fn bootstrap_labels<T: Scalar>(
    recipe: &FitRecipe<T>,
    raw: &ColMatrix<T>,
    boot: &DataMatrix<T>,
    gamma1: &[T],
    gamma2: &[T],
) -> Result<Vec<Vec<(Vec<usize>, bool)>>> {
    let originals = boot.center_like(raw)?;
    let grid = recipe.fit_grid(boot, gamma1, gamma2)?;
    Ok(grid
        .iter()
        .map(|row| {
            row.iter()
                .map(|fit| (label_by_nearest_center(fit, &originals), fit.diagnostics.converged))
                .collect()
        })
        .collect())
}

/// Agreement of two clusterings fitted at one `(gamma1, gamma2)` on two
/// bootstrap samples of `raw`: the Rand index between the nearest-center
/// labelings of the original observations.
pub fn stability_score<T: Scalar, R: Rng + ?Sized>(
    recipe: &FitRecipe<T>,
    raw: &ColMatrix<T>,
    gamma1: T,
    gamma2: T,
    rng: &mut R,
) -> Result<f64> {
    if raw.nrows() < 4 {
        return Err(SccError::InvalidInput("stability needs at least 4 observations".into()));
    }
    let b1 = bootstrap_sample(raw, rng)?;
    let b2 = bootstrap_sample(raw, rng)?;
    let l1 = bootstrap_labels(recipe, raw, &b1, &[gamma1], &[gamma2])?;
    let l2 = bootstrap_labels(recipe, raw, &b2, &[gamma1], &[gamma2])?;
    rand_index(&l1[0][0].0, &l2[0][0].0)
}

/// Averages the bootstrap agreement over `repetitions` paired draws at every
/// grid point and returns the most stable point. Ties go to larger `gamma2`,
/// then larger `gamma1`. Points where more than half of the bootstrap fits
/// failed to converge are never selected.
///
/// Repetition `r` draws its two bootstrap samples from ChaCha8 stream `r` of
/// `rng_seed`; the samples are shared by all grid points so that each
/// repetition can walk the grid with warm starts.
pub fn tune_stability<T: Scalar>(recipe: &FitRecipe<T>, raw: &ColMatrix<T>, sc: &StabilityConfig<T>) -> Result<StabilityTuning<T>> {
    sc.validate()?;
    if raw.nrows() < 4 {
        return Err(SccError::InvalidInput("stability needs at least 4 observations".into()));
    }
    let (g1, g2) = (&sc.gamma1_grid, &sc.gamma2_grid);
    let reps: Vec<Result<(Vec<Vec<f64>>, Vec<Vec<usize>>)>> = (0..sc.repetitions)
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(sc.rng_seed);
            rng.set_stream(r as u64);
            let b1 = bootstrap_sample(raw, &mut rng)?;
            let b2 = bootstrap_sample(raw, &mut rng)?;
            let l1 = bootstrap_labels(recipe, raw, &b1, g1, g2)?;
            let l2 = bootstrap_labels(recipe, raw, &b2, g1, g2)?;
            let mut scores = vec![vec![0.0; g2.len()]; g1.len()];
            let mut failures = vec![vec![0usize; g2.len()]; g1.len()];
            for i in 0..g1.len() {
                for k in 0..g2.len() {
                    let (a, ca) = &l1[i][k];
                    let (b, cb) = &l2[i][k];
                    scores[i][k] = rand_index(a, b)?;
                    failures[i][k] = usize::from(!ca) + usize::from(!cb);
                }
            }
            Ok((scores, failures))
        })
        .collect();
    let reps = reps.into_iter().collect::<Result<Vec<_>>>()?;

    let r = sc.repetitions as f64;
    let mut mean = vec![vec![0.0; g2.len()]; g1.len()];
    let mut sd = mean.clone();
    let mut nonconverged = mean.clone();
    for i in 0..g1.len() {
        for k in 0..g2.len() {
            let vals: Vec<f64> = reps.iter().map(|(s, _)| s[i][k]).collect();
            let m = vals.iter().sum::<f64>() / r;
            let var = vals.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (r - 1.0);
            mean[i][k] = m;
            sd[i][k] = var.sqrt();
            nonconverged[i][k] = reps.iter().map(|(_, f)| f[i][k]).sum::<usize>() as f64 / (2.0 * r);
        }
    }
    let eligible: Vec<Vec<Option<f64>>> = mean
        .iter()
        .zip(&nonconverged)
        .map(|(mr, nr)| mr.iter().zip(nr).map(|(&m, &f)| (f <= 0.5).then_some(m)).collect())
        .collect();
    let (i, k) = argmax_prefer_late(&eligible)
        .ok_or_else(|| SccError::SearchFailed("every grid point failed to converge on most bootstrap fits".into()))?;
    Ok(StabilityTuning { gamma1: g1[i], gamma2: g2[k], mean, sd, nonconverged })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn argmax_ties_prefer_sparser_then_more_fused() {
        let s = vec![vec![Some(0.5), Some(0.9)], vec![Some(0.9), Some(0.2)]];
        assert_eq!(argmax_prefer_late(&s), Some((0, 1)));
        let s = vec![vec![Some(0.9), Some(0.9)], vec![Some(0.9), Some(0.9)]];
        assert_eq!(argmax_prefer_late(&s), Some((1, 1)));
        let s = vec![vec![Some(0.3), None]];
        assert_eq!(argmax_prefer_late(&s), Some((0, 0)));
        assert_eq!(argmax_prefer_late(&[vec![None]]), None);
    }

    #[test]
    fn geometric_grid_endpoints() {
        let g: Vec<f64> = geometric(8.0, 1e-2, 3);
        assert!((g[0] - 0.08).abs() < 1e-15 && (g[1] - 0.8).abs() < 1e-14 && g[2] == 8.0);
        assert_eq!(geometric(3.0f64, 0.1, 1), vec![3.0]);
    }
}
