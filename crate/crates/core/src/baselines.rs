//! Comparators: k-means with k-means++ seeding and plain convex clustering
//! (`gamma2 = 0`).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::cluster::extract_clusters;
use crate::error::{Result, SccError};
use crate::matrix::ColMatrix;
use crate::model::{CenterEstimate, ClusteringResult, DataMatrix, Diagnostics, FusionGraph, PenaltyConfig};
use crate::prox::NormKind;
use crate::scalar::{sq_dist, Scalar};
use crate::solver::{solve, Algorithm, SolverOptions, WarmStart};

const LLOYD_MAX_ITER: usize = 300;

/// Best k-means run over the restarts.
#[derive(Debug, Clone, PartialEq)]
pub struct KMeansFit<T> {
    /// Partition with every observation's centroid as its center row; all
    /// features count as selected.
    pub result: ClusteringResult<T>,
    /// `k x p` centroids, row `c` belonging to cluster id `c + 1`.
    pub centroids: ColMatrix<T>,
    pub wcss: T,
    /// Within-cluster sum of squares after every Lloyd iteration of the best run.
    pub history: Vec<T>,
}

/// Lloyd's algorithm from k-means++ seeds, best of `restarts` by WCSS.
/// Each restart draws from its own ChaCha8 stream seeded from `rng`, so the
/// result does not depend on the worker count.
pub fn kmeans<T: Scalar, R: Rng + ?Sized>(
    x: &ColMatrix<T>,
    k: usize,
    restarts: usize,
    rng: &mut R,
) -> Result<KMeansFit<T>> {
    let (n, p) = x.shape();
    if k == 0 || k > n {
        return Err(SccError::InvalidInput(format!("k = {k} must satisfy 1 <= k <= n = {n}")));
    }
    if restarts == 0 {
        return Err(SccError::InvalidInput("restarts must be positive".into()));
    }
    let seeds: Vec<u64> = (0..restarts).map(|_| rng.next_u64()).collect();
    let rows = x.rows();
    let runs: Vec<(Vec<usize>, Vec<Vec<T>>, Vec<T>)> = seeds
        .par_iter()
        .map(|&s| lloyd(&rows, k, &mut ChaCha8Rng::seed_from_u64(s)))
        .collect();
    let best = runs
        .into_iter()
        .enumerate()
        .min_by(|(ia, a), (ib, b)| {
            let (wa, wb) = (*a.2.last().expect("one iteration"), *b.2.last().expect("one iteration"));
            wa.partial_cmp(&wb).expect("finite").then(ia.cmp(ib))
        })
        .map(|(_, r)| r)
        .expect("at least one restart");
    let (raw_assign, cents, history) = best;

    // relabel by first occurrence
    let mut map = vec![0usize; k];
    let mut next = 0;
    let mut assignment = Vec::with_capacity(n);
    for &c in &raw_assign {
        if map[c] == 0 {
            next += 1;
            map[c] = next;
        }
        assignment.push(map[c]);
    }
    let mut centroids = ColMatrix::zeros(k, p);
    for (c, cent) in cents.iter().enumerate() {
        let row = if map[c] == 0 { c } else { map[c] - 1 };
        for j in 0..p {
            centroids.set(row, j, cent[j]);
        }
    }
    let centers = ColMatrix::from_fn(n, p, |i, j| centroids.get(assignment[i] - 1, j));
    let wcss = *history.last().expect("one iteration");
    let result = ClusteringResult {
        num_clusters: next,
        assignment,
        selected_features: (0..p).collect(),
        centers: CenterEstimate::new(centers),
        diagnostics: Diagnostics {
            iterations: history.len(),
            converged: history.len() < LLOYD_MAX_ITER,
            primal_residual: T::zero(),
            relative_change: T::zero(),
            objective: wcss,
            duality_gap: None,
        },
    };
    Ok(KMeansFit { result, centroids, wcss, history })
}

fn seed_plus_plus<T: Scalar, R: Rng + ?Sized>(rows: &[Vec<T>], k: usize, rng: &mut R) -> Vec<Vec<T>> {
    let n = rows.len();
    let mut cents = vec![rows[rng.random_range(0..n)].clone()];
    let mut d2: Vec<f64> = rows.iter().map(|r| sq_dist(r, &cents[0]).as_f64()).collect();
    while cents.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut idx = n - 1;
            for (i, &d) in d2.iter().enumerate() {
                if target < d {
                    idx = i;
                    break;
                }
                target -= d;
            }
            idx
        } else {
            rng.random_range(0..n)
        };
        cents.push(rows[pick].clone());
        let c = cents.last().expect("just pushed");
        for (d, r) in d2.iter_mut().zip(rows) {
            *d = d.min(sq_dist(r, c).as_f64());
        }
    }
    cents
}

fn nearest<T: Scalar>(r: &[T], cents: &[Vec<T>]) -> (usize, T) {
    let mut best = (0, T::infinity());
    for (c, cent) in cents.iter().enumerate() {
        let d = sq_dist(r, cent);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

fn lloyd<T: Scalar, R: Rng + ?Sized>(rows: &[Vec<T>], k: usize, rng: &mut R) -> (Vec<usize>, Vec<Vec<T>>, Vec<T>) {
    let n = rows.len();
    let p = rows.first().map_or(0, Vec::len);
    let mut cents = seed_plus_plus(rows, k, rng);
    let mut assign: Vec<usize> = rows.iter().map(|r| nearest(r, &cents).0).collect();
    let mut history = Vec::new();
    for it in 0..LLOYD_MAX_ITER {
        // repair empty clusters with the point farthest from its centroid
        let mut counts = vec![0usize; k];
        assign.iter().for_each(|&c| counts[c] += 1);
        for c in 0..k {
            if counts[c] == 0 {
                let far = (0..n)
                    .filter(|&i| counts[assign[i]] > 1)
                    .max_by(|&a, &b| {
                        let da = sq_dist(&rows[a], &cents[assign[a]]);
                        let db = sq_dist(&rows[b], &cents[assign[b]]);
                        da.partial_cmp(&db).expect("finite").then(b.cmp(&a))
                    })
                    .expect("k <= n leaves a shared cluster");
                counts[assign[far]] -= 1;
                assign[far] = c;
                counts[c] = 1;
            }
        }
        for (c, cent) in cents.iter_mut().enumerate() {
            cent.iter_mut().for_each(|v| *v = T::zero());
            let inv = T::one() / T::from_usize_lossy(counts[c]);
            for (i, r) in rows.iter().enumerate() {
                if assign[i] == c {
                    cent.iter_mut().zip(r).for_each(|(v, &x)| *v += x * inv);
                }
            }
        }
        let wcss: T = rows.iter().zip(&assign).map(|(r, &c)| sq_dist(r, &cents[c])).sum();
        history.push(wcss);
        let next: Vec<usize> = rows
            .iter()
            .zip(&assign)
            .map(|(r, &c)| {
                let (b, d) = nearest(r, &cents);
                // keep the current cluster on ties so WCSS cannot increase
                if d < sq_dist(r, &cents[c]) { b } else { c }
            })
            .collect();
        if next == assign || it + 1 == LLOYD_MAX_ITER || p == 0 {
            break;
        }
        assign = next;
    }
    (assign, cents, history)
}

/// Convex clustering: the sparse problem with `gamma2 = 0` and unit factors.
/// All features are reported as selected.
pub fn convex_clustering<T: Scalar>(
    x: &DataMatrix<T>,
    graph: &FusionGraph<T>,
    gamma1: T,
    norm: NormKind,
    algorithm: Algorithm,
    opts: &SolverOptions<T>,
    merge_tol: T,
) -> Result<ClusteringResult<T>> {
    let cfg = PenaltyConfig::with_unit_factors(gamma1, T::zero(), norm, algorithm.default_nu(x.n()), x.p())?;
    let fit = solve(algorithm, x, graph, &cfg, opts, &WarmStart::cold())?;
    let mut res = extract_clusters(&fit, graph, merge_tol);
    res.selected_features = (0..x.p()).collect();
    Ok(res)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::rand_index;
    use crate::model::center_features;

    fn blobs() -> (ColMatrix<f64>, Vec<usize>) {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for i in 0..30 {
            let c = i % 2;
            let shift = if c == 0 { 5.0 } else { -5.0 };
            rows.push([shift + rng.random::<f64>() - 0.5, shift + rng.random::<f64>() - 0.5]);
            labels.push(c + 1);
        }
        (ColMatrix::from_rows(&rows).unwrap(), labels)
    }

    #[test]
    fn single_cluster_centers_on_means() {
        let (x, _) = blobs();
        let x = center_features(&x).unwrap();
        let fit = kmeans(x.values(), 1, 3, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert_eq!(fit.result.num_clusters, 1);
        assert!(fit.centroids.col(0)[0].abs() < 1e-12 && fit.centroids.col(1)[0].abs() < 1e-12);
    }

    #[test]
    fn one_cluster_per_point() {
        let (x, _) = blobs();
        let fit = kmeans(&x, 30, 2, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        assert_eq!(fit.result.num_clusters, 30);
        assert_eq!(fit.wcss, 0.0);
    }

    #[test]
    fn separated_blobs_are_recovered() {
        let (x, labels) = blobs();
        let fit = kmeans(&x, 2, 10, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        assert_eq!(rand_index(&fit.result.assignment, &labels).unwrap(), 1.0);
        assert!(fit.history.windows(2).all(|w| w[1] <= w[0]));
        assert!(kmeans(&x, 31, 1, &mut ChaCha8Rng::seed_from_u64(3)).is_err());
    }

    #[test]
    fn convex_clustering_without_fusion_keeps_points() {
        let (x, _) = blobs();
        let x = center_features(&x).unwrap();
        let g = FusionGraph::complete(30, 1.0).unwrap();
        let r = convex_clustering(&x, &g, 0.0, NormKind::L2, Algorithm::Sama, &SolverOptions::default(), 1e-6)
            .unwrap();
        assert_eq!(r.num_clusters, 30);
        assert_eq!(r.selected_features, vec![0, 1]);
    }
}
