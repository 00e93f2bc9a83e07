//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use rand::Rng;
use scc_core::{
    df_q1, df_q2, objective_raw, project_ball, prox, solve_raw, Algorithm, CenterEstimate, ColMatrix, Edge,
    FusionGraph, NormKind, PenaltyConfig, SolverOptions, WarmStart,
};

/// Small random problem on a complete graph with random weights.
pub struct Instance {
    pub x: ColMatrix<f64>,
    pub graph: FusionGraph<f64>,
    pub cfg: PenaltyConfig<f64>,
}

pub fn random_instance<R: Rng>(rng: &mut R, norm: NormKind) -> Instance {
    let n = rng.random_range(4..=8);
    let p = rng.random_range(2..=5);
    let raw = ColMatrix::from_fn(n, p, |_, _| rng.random::<f64>() * 4.0 - 2.0);
    let x = scc_core::center_features(&raw).unwrap().values().clone();
    let mut edges = Vec::new();
    for i in 0..n {
        for k in i + 1..n {
            edges.push(Edge { i1: i, i2: k, weight: rng.random_range(0.1..1.0) });
        }
    }
    let graph = FusionGraph::new(n, edges).unwrap();
    let factors: Vec<f64> = (0..p).map(|_| rng.random_range(0.2..1.0)).collect();
    let cfg = PenaltyConfig::new(rng.random_range(0.0..0.8), rng.random_range(0.0..2.0), norm, 1.0 / n as f64, factors)
        .unwrap();
    Instance { x, graph, cfg }
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Minimizer of the Lagrangian in `A` for fixed duals: group soft-threshold
/// of `X + sum_l lambda_l (e_i1 - e_i2)^T`, column by column.
fn primal_of(inst: &Instance, lambdas: &[f64]) -> ColMatrix<f64> {
    let p = inst.x.ncols();
    let mut z = inst.x.clone();
    for (l, e) in inst.graph.edges().iter().enumerate() {
        for j in 0..p {
            let v = lambdas[l * p + j];
            z.set(e.i1, j, z.get(e.i1, j) + v);
            z.set(e.i2, j, z.get(e.i2, j) - v);
        }
    }
    for j in 0..p {
        let kappa = inst.cfg.gamma2 * inst.cfg.feature_factors[j];
        let col = z.col_mut(j);
        let nrm = norm2(col);
        let scale = if nrm > kappa { 1.0 - kappa / nrm } else { 0.0 };
        col.iter_mut().for_each(|v| *v *= scale);
    }
    z
}

fn lagrangian(inst: &Instance, a: &ColMatrix<f64>, lambdas: &[f64]) -> f64 {
    let p = inst.x.ncols();
    let mut val = 0.5 * inst.x.distance(a).powi(2);
    val += inst.cfg.gamma2 * (0..p).map(|j| inst.cfg.feature_factors[j] * norm2(a.col(j))).sum::<f64>();
    for (l, e) in inst.graph.edges().iter().enumerate() {
        for j in 0..p {
            val -= lambdas[l * p + j] * (a.get(e.i1, j) - a.get(e.i2, j));
        }
    }
    val
}

/// High-precision optimum by accelerated projected gradient ascent on the
/// dual, stopped once the certified duality gap is below `1e-12` relative.
/// Returns the best primal objective seen.
pub fn dual_oracle(inst: &Instance, max_iter: usize) -> f64 {
    let (n, p) = inst.x.shape();
    let m = inst.graph.len();
    let dual = inst.cfg.norm.dual();
    // the Laplacian of the unweighted edge set is bounded by 2 * max degree
    let max_deg = inst.graph.degrees().into_iter().max().unwrap_or(1).max(1);
    let step = 1.0 / (2.0 * max_deg as f64).min(n as f64);
    let project = |lam: &mut [f64]| {
        for (l, e) in inst.graph.edges().iter().enumerate() {
            let r = inst.cfg.gamma1 * e.weight;
            let s = project_ball(&lam[l * p..(l + 1) * p], r, dual).unwrap();
            lam[l * p..(l + 1) * p].copy_from_slice(&s);
        }
    };
    let mut lam = vec![0.0; m * p];
    let mut y = lam.clone();
    let mut t = 1.0f64;
    let mut best = f64::INFINITY;
    for it in 0..max_iter {
        let a = primal_of(inst, &y);
        let mut next = y.clone();
        for (l, e) in inst.graph.edges().iter().enumerate() {
            for j in 0..p {
                next[l * p + j] -= step * (a.get(e.i1, j) - a.get(e.i2, j));
            }
        }
        project(&mut next);
        let t_next = (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0;
        let momentum = (t - 1.0) / t_next;
        // adaptive restart when the step moves against the momentum
        let restart = next.iter().zip(&lam).zip(&y).map(|((a, b), c)| (a - b) * (c - a)).sum::<f64>() > 0.0;
        y = if restart {
            t = 1.0;
            next.clone()
        } else {
            t = t_next;
            next.iter().zip(&lam).map(|(a, b)| a + momentum * (a - b)).collect()
        };
        lam = next;
        if it % 50 == 0 || it + 1 == max_iter {
            let a = primal_of(inst, &lam);
            let primal = objective_raw(&inst.x, &a, &inst.graph, &inst.cfg).unwrap();
            best = best.min(primal);
            let lower = lagrangian(inst, &a, &lam);
            if best - lower <= 1e-12 * (1.0 + best.abs()) {
                break;
            }
        }
    }
    best
}

/// Central finite-difference trace of the solution map `x -> a_hat(x)` on
/// uncentered data.
pub fn finite_difference_df(x: &ColMatrix<f64>, graph: &FusionGraph<f64>, cfg: &PenaltyConfig<f64>, h: f64) -> f64 {
    let (n, p) = x.shape();
    let mut tr = 0.0;
    for i in 0..n {
        for j in 0..p {
            let mut xp = x.clone();
            xp.set(i, j, x.get(i, j) + h);
            let mut xm = x.clone();
            xm.set(i, j, x.get(i, j) - h);
            tr += (tight_fit(&xp, graph, cfg).get(i, j) - tight_fit(&xm, graph, cfg).get(i, j)) / (2.0 * h);
        }
    }
    tr
}

/// Solution of the uncentered problem to near machine precision.
pub fn tight_fit(x: &ColMatrix<f64>, graph: &FusionGraph<f64>, cfg: &PenaltyConfig<f64>) -> ColMatrix<f64> {
    let opts = SolverOptions { tol: 1e-13, max_iter: 2_000_000, recenter: false };
    solve_raw(Algorithm::Sama, x, graph, cfg, &opts, &WarmStart::cold()).unwrap().centers.values
}

pub fn df_estimate(a: &ColMatrix<f64>, graph: &FusionGraph<f64>, cfg: &PenaltyConfig<f64>) -> f64 {
    let est = CenterEstimate::new(a.clone());
    match cfg.norm {
        NormKind::L1 => df_q1(&est, graph, cfg).unwrap().value,
        _ => df_q2(&est, graph, cfg).unwrap().value,
    }
}

/// Pair-enumeration Rand index.
pub fn brute_rand(a: &[usize], b: &[usize]) -> f64 {
    let n = a.len();
    let mut agree = 0usize;
    let mut total = 0usize;
    for i in 0..n {
        for k in i + 1..n {
            total += 1;
            if (a[i] == a[k]) == (b[i] == b[k]) {
                agree += 1;
            }
        }
    }
    agree as f64 / total as f64
}

/// Argmin of `sigma ||v|| + 0.5 ||u - v||^2` over a 2-D grid, refined
/// repeatedly around the incumbent.
pub fn grid_prox(u: [f64; 2], sigma: f64, norm: NormKind) -> [f64; 2] {
    let obj = |v: [f64; 2]| sigma * norm.norm(&v) + 0.5 * ((u[0] - v[0]).powi(2) + (u[1] - v[1]).powi(2));
    let mut center = [0.0, 0.0];
    let mut half = u[0].abs().max(u[1].abs()) + 1.0;
    for _ in 0..9 {
        let steps = 200;
        let mut best = (f64::INFINITY, center);
        for a in 0..=steps {
            for b in 0..=steps {
                let v = [
                    center[0] - half + 2.0 * half * a as f64 / steps as f64,
                    center[1] - half + 2.0 * half * b as f64 / steps as f64,
                ];
                let o = obj(v);
                if o < best.0 {
                    best = (o, v);
                }
            }
        }
        center = best.1;
        half *= 0.1;
    }
    center
}

/// Direct prox helper so callers need not unwrap.
pub fn prox2(u: [f64; 2], sigma: f64, norm: NormKind) -> [f64; 2] {
    let v = prox(&u, sigma, norm).unwrap();
    [v[0], v[1]]
}
