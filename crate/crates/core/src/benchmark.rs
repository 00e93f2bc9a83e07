//! Simulation benchmark: every method tuned by validation Rand index on an
//! independent draw, then scored on the training draw.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::kmeans;
use crate::error::{Result, SccError};
use crate::metrics::{fnr_fpr, rand_index};
use crate::model::center_features;
use crate::scalar::Scalar;
use crate::select::{default_grids, tune_validation_rand, FitRecipe, GridSpec};
use crate::simulate::{SimData, SimSpec};
use crate::solver::Algorithm;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    KMeans,
    /// Convex clustering (`gamma2 = 0`) solved by AMA.
    Ama,
    /// Convex clustering solved by ADMM.
    Admm,
    Sama,
    Sadmm,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::KMeans => "kmeans",
            Method::Ama => "ama",
            Method::Admm => "admm",
            Method::Sama => "sama",
            Method::Sadmm => "sadmm",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Method {
    type Err = SccError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "kmeans" | "k-means" => Ok(Method::KMeans),
            "ama" => Ok(Method::Ama),
            "admm" => Ok(Method::Admm),
            "sama" | "s-ama" => Ok(Method::Sama),
            "sadmm" | "s-admm" => Ok(Method::Sadmm),
            other => Err(SccError::InvalidInput(format!("unknown method '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkConfig {
    pub sim: SimSpec,
    pub repetitions: usize,
    pub seed: u64,
    pub methods: Vec<Method>,
    pub grid: GridSpec,
    /// k-means is tuned over `1..=max_k` clusters.
    pub max_k: usize,
    pub kmeans_restarts: usize,
}

impl BenchmarkConfig {
    pub fn new(sim: SimSpec, repetitions: usize, seed: u64, methods: Vec<Method>) -> Self {
        Self { sim, repetitions, seed, methods, grid: GridSpec::default(), max_k: 8, kmeans_restarts: 10 }
    }
}

/// Scores of one method on one repetition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RepOutcome {
    pub rand: f64,
    pub fnr: f64,
    pub fpr: f64,
    pub num_clusters: usize,
    pub gamma1: f64,
    pub gamma2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: Method,
    pub rand_mean: f64,
    pub rand_sd: f64,
    pub fnr_mean: f64,
    pub fnr_sd: f64,
    pub fpr_mean: f64,
    pub fpr_sd: f64,
    pub reps: Vec<RepOutcome>,
}

fn mean_sd(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let sd = if v.len() > 1 { (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt() } else { 0.0 };
    (m, sd)
}

/// Training and validation draws of repetition `rep`.
pub fn repetition_data<T: Scalar>(sim: &SimSpec, seed: u64, rep: usize) -> Result<(SimData<T>, SimData<T>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(rep as u64);
    let train = sim.with_seed(rng.next_u64()).generate()?;
    let val = sim.with_seed(rng.next_u64()).generate()?;
    Ok((train, val))
}

/// Runs one method on one repetition's data.
pub fn run_method<T: Scalar>(
    method: Method,
    train: &SimData<T>,
    val: &SimData<T>,
    cfg: &BenchmarkConfig,
    rep_seed: u64,
) -> Result<RepOutcome> {
    let x = center_features(&train.x)?;
    let p = x.p();
    match method {
        Method::KMeans => {
            let vx = x.center_like(&val.x)?;
            let mut rng = ChaCha8Rng::seed_from_u64(rep_seed);
            let mut best: Option<(f64, usize, Vec<usize>)> = None;
            for k in 1..=cfg.max_k.min(x.n()) {
                let fit = kmeans(x.values(), k, cfg.kmeans_restarts, &mut rng)?;
                let labels = crate::cluster::nearest_center_labels(&vx, &fit.centroids);
                let score = rand_index(&labels, &val.labels)?;
                if best.as_ref().is_none_or(|b| score > b.0) {
                    best = Some((score, k, fit.result.assignment));
                }
            }
            let (_, k, assignment) = best.expect("k = 1 always runs");
            Ok(RepOutcome {
                rand: rand_index(&assignment, &train.labels)?,
                fnr: 0.0,
                fpr: 1.0,
                num_clusters: k,
                gamma1: f64::NAN,
                gamma2: f64::NAN,
            })
        }
        Method::Ama | Method::Admm => {
            let alg = if method == Method::Ama { Algorithm::Sama } else { Algorithm::Sadmm };
            let mut recipe = FitRecipe::<T>::new(alg);
            recipe.adaptive = false;
            let (g1, _) = default_grids(&recipe, &x, &cfg.grid)?;
            let tuned = tune_validation_rand(&recipe, &x, &val.x, &val.labels, &g1, &[T::zero()])?;
            Ok(RepOutcome {
                rand: rand_index(&tuned.fit.assignment, &train.labels)?,
                fnr: 0.0,
                fpr: 1.0,
                num_clusters: tuned.fit.num_clusters,
                gamma1: tuned.gamma1.as_f64(),
                gamma2: 0.0,
            })
        }
        Method::Sama | Method::Sadmm => {
            let alg = if method == Method::Sama { Algorithm::Sama } else { Algorithm::Sadmm };
            let recipe = FitRecipe::<T>::new(alg);
            let (g1, g2) = default_grids(&recipe, &x, &cfg.grid)?;
            let tuned = tune_validation_rand(&recipe, &x, &val.x, &val.labels, &g1, &g2)?;
            let (fnr, fpr) = fnr_fpr(&tuned.fit.selected_features, &train.informative, p)?;
            Ok(RepOutcome {
                rand: rand_index(&tuned.fit.assignment, &train.labels)?,
                fnr,
                fpr,
                num_clusters: tuned.fit.num_clusters,
                gamma1: tuned.gamma1.as_f64(),
                gamma2: tuned.gamma2.as_f64(),
            })
        }
    }
}

/// Mean and standard deviation of Rand index, FNR and FPR per method.
/// Repetitions run in parallel; results are assembled in repetition order.
pub fn run_benchmark<T: Scalar>(cfg: &BenchmarkConfig) -> Result<Vec<MethodSummary>> {
    if cfg.repetitions == 0 || cfg.methods.is_empty() {
        return Err(SccError::InvalidInput("benchmark needs at least one repetition and one method".into()));
    }
    let per_rep: Vec<Result<Vec<RepOutcome>>> = (0..cfg.repetitions)
        .into_par_iter()
        .map(|r| {
            let (train, val) = repetition_data::<T>(&cfg.sim, cfg.seed, r)?;
            let rep_seed = cfg.seed ^ ((r as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
            cfg.methods.iter().map(|&m| run_method(m, &train, &val, cfg, rep_seed)).collect()
        })
        .collect();
    let per_rep = per_rep.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(cfg
        .methods
        .iter()
        .enumerate()
        .map(|(mi, &method)| {
            let reps: Vec<RepOutcome> = per_rep.iter().map(|r| r[mi]).collect();
            let col = |f: fn(&RepOutcome) -> f64| reps.iter().map(f).collect::<Vec<f64>>();
            let (rand_mean, rand_sd) = mean_sd(&col(|o| o.rand));
            let (fnr_mean, fnr_sd) = mean_sd(&col(|o| o.fnr));
            let (fpr_mean, fpr_sd) = mean_sd(&col(|o| o.fpr));
            MethodSummary { method, rand_mean, rand_sd, fnr_mean, fnr_sd, fpr_mean, fpr_sd, reps }
        })
        .collect())
}
