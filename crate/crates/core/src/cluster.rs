//! Partitions and feature sets from fitted centers, clustering paths and the
//! doubling search for a fully fusing `gamma1`.

use crate::error::{Result, SccError};
use crate::matrix::ColMatrix;
use crate::model::{CenterEstimate, ClusteringResult, DataMatrix, FusionGraph, PenaltyConfig};
use crate::scalar::{norm2, sq_dist, Scalar};
use crate::solver::{solve, Algorithm, FitOutput, SolverOptions, WarmStart};

/// Default relative tolerance for merging center rows.
pub const DEFAULT_MERGE_TOL: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct UnionFind {
    parent: Vec<usize>,
    rank: Vec<u8>,
    sets: usize,
}

impl UnionFind {
    pub fn new(n: usize) -> Self {
        Self { parent: (0..n).collect(), rank: vec![0; n], sets: n }
    }

    pub fn find(&mut self, mut i: usize) -> usize {
        while self.parent[i] != i {
            self.parent[i] = self.parent[self.parent[i]];
            i = self.parent[i];
        }
        i
    }

    /// Merges the sets of `a` and `b`; false if they were already joined.
    pub fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        match self.rank[ra].cmp(&self.rank[rb]) {
            std::cmp::Ordering::Less => self.parent[ra] = rb,
            std::cmp::Ordering::Greater => self.parent[rb] = ra,
            std::cmp::Ordering::Equal => {
                self.parent[rb] = ra;
                self.rank[ra] += 1;
            }
        }
        self.sets -= 1;
        true
    }

    pub fn num_sets(&self) -> usize {
        self.sets
    }

    /// Component ids in `1..=num_sets`, numbered by first occurrence.
    pub fn labels(&mut self) -> Vec<usize> {
        let n = self.parent.len();
        let mut id = vec![0usize; n];
        let mut next = 0;
        (0..n)
            .map(|i| {
                let r = self.find(i);
                if id[r] == 0 {
                    next += 1;
                    id[r] = next;
                }
                id[r]
            })
            .collect()
    }
}

/// Joins rows `i1, i2` when `||A_i1 - A_i2||_2 <= tol (1 + ||A||_F / sqrt(n))`,
/// checked over all pairs. Returns 1-based cluster ids and the cluster count.
pub fn partition_rows<T: Scalar>(a: &ColMatrix<T>, tol: T) -> (Vec<usize>, usize) {
    let mut uf = merge_close_rows(a, tol);
    let k = uf.num_sets();
    (uf.labels(), k)
}

fn merge_close_rows<T: Scalar>(a: &ColMatrix<T>, tol: T) -> UnionFind {
    let n = a.nrows();
    let scale = T::one() + a.frobenius_norm() / T::from_usize_lossy(n.max(1)).sqrt();
    let thresh2 = (tol * scale) * (tol * scale);
    let rows = a.rows();
    let mut uf = UnionFind::new(n);
    for i in 0..n {
        for k in i + 1..n {
            if sq_dist(&rows[i], &rows[k]) <= thresh2 {
                uf.union(i, k);
            }
        }
    }
    uf
}

/// Features whose center column has norm above `tol`, 0-based.
pub fn selected_features<T: Scalar>(a: &CenterEstimate<T>, tol: T) -> Vec<usize> {
    (0..a.p()).filter(|&j| norm2(a.values.col(j)) > tol).collect()
}

/// Partition and selected features of a fit. Rows are merged by the
/// relative `tol` rule of [`partition_rows`]; fusion edges whose ADMM slack
/// is exactly zero are merged as well.
pub fn extract_clusters<T: Scalar>(fit: &FitOutput<T>, graph: &FusionGraph<T>, tol: T) -> ClusteringResult<T> {
    let mut uf = merge_close_rows(&fit.centers.values, tol);
    if fit.duals.slacks.is_some() && fit.duals.num_edges() == graph.len() && fit.duals.p() > 0 {
        for (l, e) in graph.edges().iter().enumerate() {
            if fit.duals.slack(l).is_some_and(|v| v.iter().all(|x| *x == T::zero())) {
                uf.union(e.i1, e.i2);
            }
        }
    }
    let num_clusters = uf.num_sets();
    ClusteringResult {
        assignment: uf.labels(),
        num_clusters,
        selected_features: selected_features(&fit.centers, T::zero()),
        centers: fit.centers.clone(),
        diagnostics: fit.diagnostics.clone(),
    }
}

/// Fits every `gamma1` of an ascending grid in order, each warm-started from
/// the previous solution. Non-converged points are kept and flagged in their
/// diagnostics.
pub fn clustering_path<T: Scalar>(
    x: &DataMatrix<T>,
    graph: &FusionGraph<T>,
    gamma1_grid: &[T],
    base: &PenaltyConfig<T>,
    algorithm: Algorithm,
    opts: &SolverOptions<T>,
    tol: T,
) -> Result<Vec<ClusteringResult<T>>> {
    check_ascending(gamma1_grid, "gamma1")?;
    let mut warm = WarmStart::cold();
    let mut out = Vec::with_capacity(gamma1_grid.len());
    for &g1 in gamma1_grid {
        let cfg = PenaltyConfig { gamma1: g1, ..base.clone() };
        let fit = solve(algorithm, x, graph, &cfg, opts, &warm)?;
        out.push(extract_clusters(&fit, graph, tol));
        warm = WarmStart::from_output(&fit);
    }
    Ok(out)
}

pub(crate) fn check_ascending<T: Scalar>(grid: &[T], name: &str) -> Result<()> {
    if grid.is_empty() {
        return Err(SccError::InvalidInput(format!("{name} grid is empty")));
    }
    if grid.iter().any(|g| !g.is_finite() || *g < T::zero()) {
        return Err(SccError::InvalidInput(format!("{name} grid must hold finite values >= 0")));
    }
    if grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(SccError::InvalidInput(format!("{name} grid must be ascending")));
    }
    Ok(())
}

/// Smallest power-of-two multiple of a data-driven start that fuses all
/// observations into one cluster. Requires a connected graph.
pub fn fusing_gamma1<T: Scalar>(
    x: &DataMatrix<T>,
    graph: &FusionGraph<T>,
    base: &PenaltyConfig<T>,
    algorithm: Algorithm,
    opts: &SolverOptions<T>,
    tol: T,
) -> Result<T> {
    if graph.num_components() > 1 {
        return Err(SccError::SearchFailed("fusion graph is disconnected; observations can never fully fuse".into()));
    }
    let n = x.n();
    if n < 2 {
        return Ok(T::zero());
    }
    let weight = graph.total_weight();
    let mut g1 = x.values().frobenius_norm() / (weight * T::from_usize_lossy(n).sqrt());
    if !(g1 > T::zero()) || !g1.is_finite() {
        g1 = T::one();
    }
    let fuses = |g: T, warm: &WarmStart<T>| -> Result<(bool, FitOutput<T>)> {
        let cfg = PenaltyConfig { gamma1: g, ..base.clone() };
        let fit = solve(algorithm, x, graph, &cfg, opts, warm)?;
        Ok((extract_clusters(&fit, graph, tol).num_clusters == 1, fit))
    };
    let (mut ok, mut fit) = fuses(g1, &WarmStart::cold())?;
    if ok {
        for _ in 0..60 {
            let (smaller_ok, _) = fuses(g1 * T::lit(0.5), &WarmStart::cold())?;
            if !smaller_ok {
                return Ok(g1);
            }
            g1 *= T::lit(0.5);
        }
        return Ok(g1);
    }
    for _ in 0..60 {
        g1 *= T::lit(2.0);
        (ok, fit) = fuses(g1, &WarmStart::from_output(&fit))?;
        if ok {
            return Ok(g1);
        }
    }
    Err(SccError::SearchFailed("no gamma1 up to 2^60 times the start fused all observations".into()))
}

/// Means of the rows of `a` within each cluster (`k x p`).
pub fn cluster_means<T: Scalar>(a: &ColMatrix<T>, assignment: &[usize], k: usize) -> ColMatrix<T> {
    let (n, p) = a.shape();
    let mut counts = vec![0usize; k];
    for &c in assignment {
        counts[c - 1] += 1;
    }
    let mut means = ColMatrix::zeros(k, p);
    for j in 0..p {
        let col = a.col(j);
        for i in 0..n {
            let c = assignment[i] - 1;
            means.set(c, j, means.get(c, j) + col[i]);
        }
        for (c, &cnt) in counts.iter().enumerate() {
            if cnt > 0 {
                means.set(c, j, means.get(c, j) / T::from_usize_lossy(cnt));
            }
        }
    }
    means
}

/// 1-based index of the nearest row of `centers` for every row of `points`;
/// ties go to the smaller index.
pub fn nearest_center_labels<T: Scalar>(points: &ColMatrix<T>, centers: &ColMatrix<T>) -> Vec<usize> {
    let crow = centers.rows();
    points
        .rows()
        .iter()
        .map(|r| {
            let mut best = (T::infinity(), 0usize);
            for (c, cr) in crow.iter().enumerate() {
                let d = sq_dist(r, cr);
                if d < best.0 {
                    best = (d, c);
                }
            }
            best.1 + 1
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{center_features, Diagnostics, DualState};
    use crate::prox::NormKind;

    fn fit_of(a: ColMatrix<f64>) -> FitOutput<f64> {
        let p = a.ncols();
        FitOutput {
            centers: CenterEstimate::new(a),
            duals: DualState::zeros(0, p.max(1), false),
            diagnostics: Diagnostics {
                iterations: 0,
                converged: true,
                primal_residual: 0.0,
                relative_change: 0.0,
                objective: 0.0,
                duality_gap: None,
            },
        }
    }

    #[test]
    fn union_find_basics() {
        let mut uf = UnionFind::new(5);
        assert!(uf.union(0, 3));
        assert!(!uf.union(3, 0));
        assert!(uf.union(4, 3));
        assert_eq!(uf.num_sets(), 3);
        assert_eq!(uf.labels(), vec![1, 2, 3, 1, 1]);
    }

    #[test]
    fn extract_examples() {
        let g = FusionGraph::<f64>::complete(3, 1.0).unwrap();
        let same = ColMatrix::from_rows(&[[1.0, 2.0], [1.0, 2.0], [1.0, 2.0]]).unwrap();
        assert_eq!(extract_clusters(&fit_of(same), &g, 1e-6).num_clusters, 1);

        let a = ColMatrix::from_rows(&[[0.0, 0.0], [0.0, 0.0], [5.0, 5.0]]).unwrap();
        let r = extract_clusters(&fit_of(a), &g, 1e-6);
        assert_eq!(r.assignment, vec![1, 1, 2]);
        assert_eq!(r.selected_features, vec![0, 1]);
    }

    #[test]
    fn zero_slack_edges_merge() {
        let g = FusionGraph::new(3, vec![crate::model::Edge { i1: 0, i2: 2, weight: 1.0 }]).unwrap();
        let a = ColMatrix::from_rows(&[[0.0], [1.0], [0.5]]).unwrap();
        let mut fit = fit_of(a);
        fit.duals = DualState::zeros(1, 1, true);
        assert_eq!(extract_clusters(&fit, &g, 1e-9).assignment, vec![1, 2, 1]);
    }

    #[test]
    fn feature_selection_examples() {
        let zero = CenterEstimate::<f64>::zeros(3, 4);
        assert!(selected_features(&zero, 0.0).is_empty());
        let mut a = CenterEstimate::<f64>::zeros(3, 4);
        a.values.set(1, 2, 0.3);
        assert_eq!(selected_features(&a, 0.0), vec![2]);
        assert!(selected_features(&a, 0.5).is_empty());
    }

    #[test]
    fn nearest_center_and_means() {
        let a = ColMatrix::from_rows(&[[0.0], [2.0], [10.0]]).unwrap();
        let m = cluster_means(&a, &[1, 1, 2], 2);
        assert_eq!(m.col(0), &[1.0, 10.0]);
        let pts = ColMatrix::from_rows(&[[5.5], [-3.0], [6.0]]).unwrap();
        assert_eq!(nearest_center_labels(&pts, &m), vec![1, 1, 2]);
    }

    #[test]
    fn path_endpoints() {
        let raw = ColMatrix::from_rows(&[[0.0, 1.0], [0.2, 0.9], [3.0, -1.0], [3.1, -1.2], [1.5, 0.1]]).unwrap();
        let x = center_features(&raw).unwrap();
        let g = FusionGraph::complete(5, 0.1).unwrap();
        let base = PenaltyConfig::with_unit_factors(0.0, 0.0, NormKind::L2, 1.0 / 5.0, 2).unwrap();
        let opts = SolverOptions::default();
        let path = clustering_path(&x, &g, &[0.0], &base, Algorithm::Sama, &opts, 1e-6).unwrap();
        assert_eq!(path[0].num_clusters, 5);
        assert!(path[0].centers.values.distance(x.values()) < 1e-8);

        let big = fusing_gamma1(&x, &g, &base, Algorithm::Sama, &opts, 1e-6).unwrap();
        let path = clustering_path(&x, &g, &[0.0, big], &base, Algorithm::Sama, &opts, 1e-6).unwrap();
        assert_eq!(path[1].num_clusters, 1);
        assert!(clustering_path(&x, &g, &[1.0, 0.5], &base, Algorithm::Sama, &opts, 1e-6).is_err());
    }
}
