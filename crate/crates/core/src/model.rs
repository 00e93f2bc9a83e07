//! Shared data model: observations, center estimates, the fusion graph and
//! the penalty configuration.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SccError};
use crate::matrix::ColMatrix;
use crate::prox::NormKind;
use crate::scalar::{norm2, Scalar};

/// Feature-centered `n x p` observation matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix<T> {
    values: ColMatrix<T>,
    col_means: Vec<T>,
}

impl<T: Scalar> DataMatrix<T> {
    #[inline]
    pub fn values(&self) -> &ColMatrix<T> {
        &self.values
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    #[inline]
    pub fn p(&self) -> usize {
        self.values.ncols()
    }

    /// Column means that were subtracted from the raw input.
    pub fn column_means(&self) -> &[T] {
        &self.col_means
    }

    /// Maps raw rows (same feature layout) into this matrix's centered frame.
    pub fn center_like(&self, raw: &ColMatrix<T>) -> Result<ColMatrix<T>> {
        if raw.ncols() != self.p() {
            return Err(SccError::ShapeMismatch {
                expected: format!("{} columns", self.p()),
                found: format!("{} columns", raw.ncols()),
            });
        }
        Ok(ColMatrix::from_fn(raw.nrows(), raw.ncols(), |i, j| raw.get(i, j) - self.col_means[j]))
    }
}

/// Subtracts column means so every feature sums to zero.
pub fn center_features<T: Scalar>(raw: &ColMatrix<T>) -> Result<DataMatrix<T>> {
    let (n, p) = raw.shape();
    if n < 2 {
        return Err(SccError::Size(format!("need at least 2 observations, got {n}")));
    }
    if p < 1 {
        return Err(SccError::Size("need at least 1 feature".into()));
    }
    for j in 0..p {
        for (i, v) in raw.col(j).iter().enumerate() {
            if !v.is_finite() {
                return Err(SccError::NonFinite { row: i, col: j });
            }
        }
    }
    let mut values = raw.clone();
    let mut col_means = Vec::with_capacity(p);
    for j in 0..p {
        let col = values.col_mut(j);
        let mean = col.iter().copied().sum::<T>() / T::from_usize_lossy(n);
        col.iter_mut().for_each(|v| *v -= mean);
        // second pass removes the rounding residue of the first
        let resid = col.iter().copied().sum::<T>() / T::from_usize_lossy(n);
        col.iter_mut().for_each(|v| *v -= resid);
        col_means.push(mean + resid);
    }
    Ok(DataMatrix { values, col_means })
}

/// `n x p` matrix of cluster-center estimates, one row per observation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CenterEstimate<T> {
    pub values: ColMatrix<T>,
}

impl<T: Scalar> CenterEstimate<T> {
    pub fn new(values: ColMatrix<T>) -> Self {
        Self { values }
    }

    pub fn zeros(n: usize, p: usize) -> Self {
        Self { values: ColMatrix::zeros(n, p) }
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    #[inline]
    pub fn p(&self) -> usize {
        self.values.ncols()
    }
}

/// Fusion edge between observations `i1 < i2` (0-based).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edge<T> {
    pub i1: usize,
    pub i2: usize,
    pub weight: T,
}

/// Edge list of the fused-lasso penalty. Only positive-weight edges are kept.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FusionGraph<T> {
    n: usize,
    edges: Vec<Edge<T>>,
}

impl<T: Scalar> FusionGraph<T> {
    /// Validates and stores `edges`; zero-weight edges are pruned.
    pub fn new(n: usize, edges: Vec<Edge<T>>) -> Result<Self> {
        let mut seen = HashSet::with_capacity(edges.len());
        let mut kept = Vec::with_capacity(edges.len());
        for e in edges {
            if e.i1 >= e.i2 || e.i2 >= n {
                return Err(SccError::InvalidInput(format!(
                    "edge ({}, {}) violates i1 < i2 < n = {n}",
                    e.i1, e.i2
                )));
            }
            if !e.weight.is_finite() || e.weight < T::zero() {
                return Err(SccError::InvalidInput(format!(
                    "edge ({}, {}) has invalid weight {}",
                    e.i1, e.i2, e.weight
                )));
            }
            if !seen.insert((e.i1, e.i2)) {
                return Err(SccError::InvalidInput(format!("duplicate edge ({}, {})", e.i1, e.i2)));
            }
            if e.weight > T::zero() {
                kept.push(e);
            }
        }
        Ok(Self { n, edges: kept })
    }

    /// All `n(n-1)/2` pairs with a common weight.
    pub fn complete(n: usize, weight: T) -> Result<Self> {
        let mut edges = Vec::with_capacity(n * n.saturating_sub(1) / 2);
        for i1 in 0..n {
            for i2 in i1 + 1..n {
                edges.push(Edge { i1, i2, weight });
            }
        }
        Self::new(n, edges)
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn edges(&self) -> &[Edge<T>] {
        &self.edges
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.edges.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    /// True when every pair of observations carries an edge.
    pub fn is_complete(&self) -> bool {
        self.n >= 2 && self.edges.len() == self.n * (self.n - 1) / 2
    }

    pub fn total_weight(&self) -> T {
        self.edges.iter().map(|e| e.weight).sum()
    }

    /// Same topology with weights multiplied by `factor`.
    pub fn scaled(&self, factor: T) -> Self {
        Self {
            n: self.n,
            edges: self.edges.iter().map(|e| Edge { weight: e.weight * factor, ..*e }).collect(),
        }
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.n];
        for e in &self.edges {
            deg[e.i1] += 1;
            deg[e.i2] += 1;
        }
        deg
    }

    /// Number of connected components of the edge set.
    pub fn num_components(&self) -> usize {
        let mut uf = crate::cluster::UnionFind::new(self.n);
        for e in &self.edges {
            uf.union(e.i1, e.i2);
        }
        uf.num_sets()
    }
}

/// Penalty strengths, fusion norm, augmented-Lagrangian constant and
/// per-feature group-lasso factors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PenaltyConfig<T> {
    pub gamma1: T,
    pub gamma2: T,
    pub norm: NormKind,
    pub nu: T,
    pub feature_factors: Vec<T>,
}

impl<T: Scalar> PenaltyConfig<T> {
    pub fn new(gamma1: T, gamma2: T, norm: NormKind, nu: T, feature_factors: Vec<T>) -> Result<Self> {
        let cfg = Self { gamma1, gamma2, norm, nu, feature_factors };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Unit feature factors for `p` features.
    pub fn with_unit_factors(gamma1: T, gamma2: T, norm: NormKind, nu: T, p: usize) -> Result<Self> {
        Self::new(gamma1, gamma2, norm, nu, vec![T::one(); p])
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma1 >= T::zero()) || !self.gamma1.is_finite() {
            return Err(SccError::Config(format!("gamma1 must be finite and >= 0, got {}", self.gamma1)));
        }
        if !(self.gamma2 >= T::zero()) || !self.gamma2.is_finite() {
            return Err(SccError::Config(format!("gamma2 must be finite and >= 0, got {}", self.gamma2)));
        }
        if !(self.nu > T::zero()) || !self.nu.is_finite() {
            return Err(SccError::Config(format!("nu must be finite and > 0, got {}", self.nu)));
        }
        if let Some(u) = self.feature_factors.iter().find(|u| !u.is_finite() || **u < T::zero()) {
            return Err(SccError::Config(format!("feature factor {u} is not finite and >= 0")));
        }
        Ok(())
    }

    pub(crate) fn check_shapes(&self, p: usize) -> Result<()> {
        if self.feature_factors.len() != p {
            return Err(SccError::ShapeMismatch {
                expected: format!("{p} feature factors"),
                found: format!("{}", self.feature_factors.len()),
            });
        }
        Ok(())
    }
}

/// Dual variables (one length-`p` vector per edge), plus the ADMM slacks.
/// Both are stored edge-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualState<T> {
    p: usize,
    pub lambdas: Vec<T>,
    pub slacks: Option<Vec<T>>,
}

impl<T: Scalar> DualState<T> {
    pub fn zeros(num_edges: usize, p: usize, with_slacks: bool) -> Self {
        Self {
            p,
            lambdas: vec![T::zero(); num_edges * p],
            slacks: with_slacks.then(|| vec![T::zero(); num_edges * p]),
        }
    }

    pub fn from_parts(p: usize, lambdas: Vec<T>, slacks: Option<Vec<T>>) -> Self {
        Self { p, lambdas, slacks }
    }

    #[inline]
    pub fn p(&self) -> usize {
        self.p
    }

    #[inline]
    pub fn num_edges(&self) -> usize {
        if self.p == 0 {
            0
        } else {
            self.lambdas.len() / self.p
        }
    }

    #[inline]
    pub fn lambda(&self, l: usize) -> &[T] {
        &self.lambdas[l * self.p..(l + 1) * self.p]
    }

    #[inline]
    pub fn slack(&self, l: usize) -> Option<&[T]> {
        self.slacks.as_ref().map(|s| &s[l * self.p..(l + 1) * self.p])
    }
}

/// Solver bookkeeping reported with every fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics<T> {
    pub iterations: usize,
    pub converged: bool,
    /// `max_l ||A_i1 - A_i2 - v_l||_2 / sqrt(p)` (ADMM) or zero (AMA).
    pub primal_residual: T,
    /// Relative change of the last iterate used by the stopping rule.
    pub relative_change: T,
    pub objective: T,
    /// Primal minus dual objective, when the solver maintains a dual.
    pub duality_gap: Option<T>,
}

/// Partition, selected features and centers of one fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusteringResult<T> {
    /// Cluster id per observation, contiguous in `1..=num_clusters`.
    pub assignment: Vec<usize>,
    pub num_clusters: usize,
    /// 0-based indices of features with a nonzero center column.
    pub selected_features: Vec<usize>,
    pub centers: CenterEstimate<T>,
    pub diagnostics: Diagnostics<T>,
}

/// Sparse convex clustering objective:
/// `1/2 sum_j ||x_j - a_j||^2 + gamma1 sum_l w_l ||A_i1 - A_i2||_q + gamma2 sum_j u_j ||a_j||_2`.
pub fn objective_value<T: Scalar>(
    x: &DataMatrix<T>,
    a: &CenterEstimate<T>,
    graph: &FusionGraph<T>,
    cfg: &PenaltyConfig<T>,
) -> Result<T> {
    objective_raw(x.values(), &a.values, graph, cfg)
}

/// [`objective_value`] on an arbitrary (not necessarily centered) data matrix.
pub fn objective_raw<T: Scalar>(
    x: &ColMatrix<T>,
    a: &ColMatrix<T>,
    graph: &FusionGraph<T>,
    cfg: &PenaltyConfig<T>,
) -> Result<T> {
    if x.shape() != a.shape() {
        return Err(SccError::ShapeMismatch {
            expected: format!("{:?}", x.shape()),
            found: format!("{:?}", a.shape()),
        });
    }
    if graph.n() != x.nrows() {
        return Err(SccError::ShapeMismatch {
            expected: format!("graph on {} observations", x.nrows()),
            found: format!("graph on {}", graph.n()),
        });
    }
    cfg.check_shapes(x.ncols())?;
    let half = T::lit(0.5);
    let fit = half * x.distance(a).powi(2);
    let mut diff = vec![T::zero(); x.ncols()];
    let mut fusion = T::zero();
    for e in graph.edges() {
        for (j, d) in diff.iter_mut().enumerate() {
            *d = a.get(e.i1, j) - a.get(e.i2, j);
        }
        fusion += e.weight * cfg.norm.norm(&diff);
    }
    let sparsity: T = (0..a.ncols()).map(|j| cfg.feature_factors[j] * norm2(a.col(j))).sum();
    Ok(fit + cfg.gamma1 * fusion + cfg.gamma2 * sparsity)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: &[&[f64]]) -> ColMatrix<f64> {
        ColMatrix::from_rows(rows).unwrap()
    }

    #[test]
    fn centering_subtracts_column_means() {
        let x = center_features(&m(&[&[1.0, 2.0], &[3.0, 4.0]])).unwrap();
        assert_eq!(x.values().rows(), vec![vec![-1.0, -1.0], vec![1.0, 1.0]]);
        assert_eq!(x.column_means(), &[2.0, 3.0]);
    }

    #[test]
    fn centering_leaves_centered_input_alone() {
        let raw = m(&[&[-1.0, 0.5], &[0.0, -1.0], &[1.0, 0.5]]);
        let x = center_features(&raw).unwrap();
        assert_eq!(x.values(), &raw);
        let again = center_features(x.values()).unwrap();
        assert_eq!(again.values(), x.values());
    }

    #[test]
    fn centering_errors() {
        assert!(matches!(center_features(&m(&[&[1.0, 2.0]])), Err(SccError::Size(_))));
        assert!(matches!(
            center_features(&m(&[&[1.0, f64::NAN], &[0.0, 0.0]])),
            Err(SccError::NonFinite { row: 0, col: 1 })
        ));
    }

    #[test]
    fn random_matrix_columns_sum_to_zero() {
        let raw = ColMatrix::from_fn(5, 3, |i, j| ((i * 7 + j * 13) as f64).sin() * 3.0 + 10.0);
        let x = center_features(&raw).unwrap();
        for j in 0..3 {
            assert!(x.values().col(j).iter().sum::<f64>().abs() < 1e-12);
        }
    }

    #[test]
    fn graph_prunes_zero_weights_and_rejects_bad_edges() {
        let g = FusionGraph::new(
            3,
            vec![Edge { i1: 0, i2: 1, weight: 1.0 }, Edge { i1: 1, i2: 2, weight: 0.0 }],
        )
        .unwrap();
        assert_eq!(g.len(), 1);
        assert!(FusionGraph::new(3, vec![Edge { i1: 1, i2: 0, weight: 1.0 }]).is_err());
        assert!(FusionGraph::new(3, vec![Edge { i1: 0, i2: 3, weight: 1.0 }]).is_err());
        assert!(FusionGraph::new(3, vec![Edge { i1: 0, i2: 1, weight: -1.0 }]).is_err());
        let dup = vec![Edge { i1: 0, i2: 1, weight: 1.0 }, Edge { i1: 0, i2: 1, weight: 2.0 }];
        assert!(FusionGraph::new(3, dup).is_err());
        assert!(FusionGraph::<f64>::complete(4, 1.0).unwrap().is_complete());
    }

    #[test]
    fn penalty_config_validation() {
        assert!(PenaltyConfig::with_unit_factors(-1.0, 0.0, NormKind::L2, 1.0, 2).is_err());
        assert!(PenaltyConfig::with_unit_factors(0.0, 0.0, NormKind::L2, 0.0, 2).is_err());
        assert!(PenaltyConfig::new(0.0, 0.0, NormKind::L2, 1.0, vec![1.0, f64::INFINITY]).is_err());
    }

    #[test]
    fn objective_trivial_cases() {
        let x = center_features(&m(&[&[1.0, 2.0], &[3.0, 5.0], &[-1.0, 0.5]])).unwrap();
        let g = FusionGraph::complete(3, 1.0).unwrap();
        let cfg = PenaltyConfig::with_unit_factors(0.0, 0.0, NormKind::L2, 1.0, 2).unwrap();
        let a = CenterEstimate::new(x.values().clone());
        assert_eq!(objective_value(&x, &a, &g, &cfg).unwrap(), 0.0);
        let zero = CenterEstimate::zeros(3, 2);
        let expect = 0.5 * x.values().frobenius_norm().powi(2);
        assert!((objective_value(&x, &zero, &g, &cfg).unwrap() - expect).abs() < 1e-12);
    }

    #[test]
    fn objective_matches_scalar_loop() {
        let x = center_features(&m(&[&[1.0, 2.0], &[3.0, 5.0], &[-1.0, 0.5]])).unwrap();
        let a = CenterEstimate::new(m(&[&[0.5, -0.25], &[1.0, 1.5], &[-2.0, 0.0]]));
        let g = FusionGraph::new(
            3,
            vec![Edge { i1: 0, i2: 1, weight: 0.5 }, Edge { i1: 1, i2: 2, weight: 2.0 }],
        )
        .unwrap();
        let cfg = PenaltyConfig::new(1.0, 1.0, NormKind::L2, 1.0, vec![1.0, 1.0]).unwrap();
        // independent scalar evaluation
        let xv = x.values();
        let mut fit = 0.0;
        for i in 0..3 {
            for j in 0..2 {
                fit += (xv.get(i, j) - a.values.get(i, j)).powi(2);
            }
        }
        let f01 = ((0.5f64 - 1.0).powi(2) + (-0.25f64 - 1.5).powi(2)).sqrt();
        let f12 = ((1.0f64 + 2.0).powi(2) + (1.5f64 - 0.0).powi(2)).sqrt();
        let c0 = (0.25f64 + 1.0 + 4.0).sqrt();
        let c1 = (0.0625f64 + 2.25 + 0.0).sqrt();
        let expect = 0.5 * fit + (0.5 * f01 + 2.0 * f12) + (c0 + c1);
        assert!((objective_value(&x, &a, &g, &cfg).unwrap() - expect).abs() < 1e-12);
    }

    #[test]
    fn objective_shape_mismatch() {
        let x = center_features(&m(&[&[1.0, 2.0], &[3.0, 5.0]])).unwrap();
        let a = CenterEstimate::zeros(2, 3);
        let g = FusionGraph::complete(2, 1.0).unwrap();
        let cfg = PenaltyConfig::with_unit_factors(0.0, 0.0, NormKind::L2, 1.0, 2).unwrap();
        assert!(objective_value(&x, &a, &g, &cfg).is_err());
    }
}
