//! k-nearest-neighbor Gaussian fusion weights and adaptive group-lasso factors.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SccError};
use crate::model::{DataMatrix, Edge, FusionGraph, PenaltyConfig};
use crate::prox::NormKind;
use crate::scalar::{norm2, sq_dist, Scalar};
use crate::solver::{solve, Algorithm, SolverOptions, WarmStart};

/// Neighbor count `m` and kernel multiplier `phi` of `w = exp(-phi d^2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightConfig<T> {
    pub m: usize,
    pub phi: T,
    /// Use the mean squared coordinate difference `d^2 / p` in the kernel.
    /// With raw distances in hundreds of dimensions the weights span dozens
    /// of orders of magnitude.
    pub per_feature: bool,
}

impl<T: Scalar> Default for WeightConfig<T> {
    fn default() -> Self {
        Self { m: 5, phi: T::lit(0.5), per_feature: true }
    }
}

impl<T: Scalar> WeightConfig<T> {
    /// Kernel on raw squared distances.
    pub fn new(m: usize, phi: T) -> Self {
        Self { m, phi, per_feature: false }
    }

    pub fn per_feature(m: usize, phi: T) -> Self {
        Self { m, phi, per_feature: true }
    }

    fn validate(&self, n: usize) -> Result<()> {
        if self.m == 0 || self.m >= n {
            return Err(SccError::Config(format!("neighbor count m = {} must satisfy 1 <= m < n = {n}", self.m)));
        }
        if !(self.phi >= T::zero()) || !self.phi.is_finite() {
            return Err(SccError::Config(format!("phi must be finite and >= 0, got {}", self.phi)));
        }
        Ok(())
    }
}

/// Edge `(i1, i2)` with weight `exp(-phi ||X_i1 - X_i2||^2)` (divided by `p`
/// inside the exponent when `per_feature` is set) whenever either row is
/// among the other's `m` nearest neighbors. Neighbor ties go to the smaller
/// index. Edges whose weight underflows to zero are dropped.
pub fn build_fusion_weights<T: Scalar>(x: &DataMatrix<T>, cfg: &WeightConfig<T>) -> Result<FusionGraph<T>> {
    let n = x.n();
    cfg.validate(n)?;
    let rows = x.values().rows();
    let mut dist = vec![T::zero(); n * n];
    for i in 0..n {
        for k in i + 1..n {
            let d = sq_dist(&rows[i], &rows[k]);
            dist[i * n + k] = d;
            dist[k * n + i] = d;
        }
    }
    let mut linked = vec![false; n * n];
    let mut order: Vec<usize> = Vec::with_capacity(n);
    for i in 0..n {
        order.clear();
        order.extend((0..n).filter(|&k| k != i));
        order.sort_by(|&a, &b| dist[i * n + a].partial_cmp(&dist[i * n + b]).expect("finite").then(a.cmp(&b)));
        for &k in &order[..cfg.m] {
            let (lo, hi) = (i.min(k), i.max(k));
            linked[lo * n + hi] = true;
        }
    }
    let scale = if cfg.per_feature { cfg.phi / T::from_usize_lossy(x.p()) } else { cfg.phi };
    let mut edges = Vec::new();
    for i in 0..n {
        for k in i + 1..n {
            if linked[i * n + k] {
                edges.push(Edge { i1: i, i2: k, weight: (-scale * dist[i * n + k]).exp() });
            }
        }
    }
    FusionGraph::new(n, edges)
}

/// Rescales the weights to sum to `1 / sqrt(p)`.
pub fn rescale_fusion_weights<T: Scalar>(graph: &FusionGraph<T>, p: usize) -> Result<FusionGraph<T>> {
    let total = graph.total_weight();
    if !(total > T::zero()) {
        return Err(SccError::InvalidInput("cannot rescale a graph without positive weights".into()));
    }
    if p == 0 {
        return Err(SccError::InvalidInput("p must be positive".into()));
    }
    Ok(graph.scaled(T::one() / (T::from_usize_lossy(p).sqrt() * total)))
}

/// Adaptive factors `u_j = 1 / ||a_j||_2` from a `gamma2 = 0` pilot fit,
/// rescaled to sum to `1 / sqrt(n)`.
///
/// A column that is exactly zero in the pilot gets `1e6` times the smallest
/// positive reciprocal. If every pilot column is zero the factors are
/// uniform.
pub fn adaptive_feature_factors<T: Scalar>(
    x: &DataMatrix<T>,
    graph: &FusionGraph<T>,
    gamma1: T,
    norm: NormKind,
    algorithm: Algorithm,
    opts: &SolverOptions<T>,
) -> Result<Vec<T>> {
    let (n, p) = (x.n(), x.p());
    let cfg = PenaltyConfig::with_unit_factors(gamma1, T::zero(), norm, algorithm.default_nu(n), p)?;
    let pilot = solve(algorithm, x, graph, &cfg, opts, &WarmStart::cold())?;
    let norms: Vec<T> = (0..p).map(|j| norm2(pilot.centers.values.col(j))).collect();
    Ok(factors_from_norms(&norms, n))
}

/// Reciprocal norms with the zero-column cap, rescaled to sum to `1 / sqrt(n)`.
pub fn factors_from_norms<T: Scalar>(norms: &[T], n: usize) -> Vec<T> {
    let mut u: Vec<T> = norms.iter().map(|&v| if v > T::zero() { T::one() / v } else { T::zero() }).collect();
    let smallest = u.iter().copied().filter(|&v| v > T::zero()).fold(T::infinity(), T::min);
    if smallest.is_finite() {
        let cap = T::lit(1e6) * smallest;
        u.iter_mut().zip(norms).filter(|(_, &v)| !(v > T::zero())).for_each(|(ui, _)| *ui = cap);
    } else {
        u.iter_mut().for_each(|ui| *ui = T::one());
    }
    let total: T = u.iter().copied().sum();
    let target = T::one() / T::from_usize_lossy(n).sqrt();
    u.iter().map(|&v| v * target / total).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::ColMatrix;
    use crate::model::center_features;

    fn planar() -> DataMatrix<f64> {
        center_features(&ColMatrix::from_rows(&[[0.0, 0.0], [1.0, 0.0], [0.0, 3.0], [5.0, 5.0]]).unwrap()).unwrap()
    }

    #[test]
    fn identical_rows_get_unit_weight() {
        let x = center_features(&ColMatrix::from_rows(&[[1.0, 2.0], [1.0, 2.0], [4.0, 0.0]]).unwrap()).unwrap();
        let g = build_fusion_weights(&x, &WeightConfig::new(1, 0.5)).unwrap();
        let e = g.edges().iter().find(|e| e.i1 == 0 && e.i2 == 1).unwrap();
        assert_eq!(e.weight, 1.0);
    }

    #[test]
    fn zero_phi_full_neighborhood_is_complete() {
        let g = build_fusion_weights(&planar(), &WeightConfig::new(3, 0.0)).unwrap();
        assert!(g.is_complete());
        assert!(g.edges().iter().all(|e| e.weight == 1.0));
    }

    #[test]
    fn knn_union_matches_brute_force() {
        let x = planar();
        let g = build_fusion_weights(&x, &WeightConfig::new(1, 0.1)).unwrap();
        // nearest neighbors: 0->1, 1->0, 2->0 (d^2 9 vs 10), 3->2 (d^2 29 vs 41, 50)
        let pairs: Vec<(usize, usize)> = g.edges().iter().map(|e| (e.i1, e.i2)).collect();
        assert_eq!(pairs, vec![(0, 1), (0, 2), (2, 3)]);
        assert!((g.edges()[1].weight - (-0.1f64 * 9.0).exp()).abs() < 1e-15);
    }

    #[test]
    fn per_feature_kernel_divides_by_p() {
        let g = build_fusion_weights(&planar(), &WeightConfig::per_feature(1, 0.1)).unwrap();
        assert!((g.edges()[1].weight - (-0.1f64 * 9.0 / 2.0).exp()).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_neighbor_count() {
        assert!(build_fusion_weights(&planar(), &WeightConfig::new(4, 0.5)).is_err());
        assert!(build_fusion_weights(&planar(), &WeightConfig::new(0, 0.5)).is_err());
    }

    #[test]
    fn rescale_examples() {
        let g = FusionGraph::new(3, vec![Edge { i1: 0, i2: 1, weight: 5.0 }]).unwrap();
        assert_eq!(rescale_fusion_weights(&g, 4).unwrap().edges()[0].weight, 0.5);
        let g = FusionGraph::new(3, vec![Edge { i1: 0, i2: 1, weight: 1.0 }, Edge { i1: 1, i2: 2, weight: 1.0 }])
            .unwrap();
        let r = rescale_fusion_weights(&g, 1).unwrap();
        assert_eq!(r.edges().iter().map(|e| e.weight).collect::<Vec<_>>(), vec![0.5, 0.5]);
        assert!(rescale_fusion_weights(&FusionGraph::<f64>::new(3, vec![]).unwrap(), 2).is_err());
    }

    #[test]
    fn factors_without_fusion_follow_data_norms() {
        let x = center_features(&ColMatrix::from_rows(&[[2.0, 1.0], [-2.0, -1.0], [0.0, 0.0]]).unwrap()).unwrap();
        let g = FusionGraph::complete(3, 1.0).unwrap();
        let u: Vec<f64> = adaptive_feature_factors(&x, &g, 0.0, NormKind::L2, Algorithm::Sama, &SolverOptions::default())
            .unwrap();
        assert!((u[1] - 2.0 * u[0]).abs() < 1e-12);
        assert!((u.iter().sum::<f64>() - 1.0 / 3f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn zero_columns_are_capped() {
        let u = factors_from_norms(&[1.0f64, 0.0, 0.5], 4);
        assert!((u[1] / u[2] - 0.5e6).abs() < 1e-3);
        let uniform = factors_from_norms(&[0.0, 0.0], 4);
        assert_eq!(uniform, vec![0.25, 0.25]);
    }
}
