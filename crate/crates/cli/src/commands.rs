use std::path::Path;

use anyhow::Result;
use scc_core::cluster::DEFAULT_MERGE_TOL;
use scc_core::{
    center_features, clustering_path, fnr_fpr, fusing_gamma1, rand_index, run_benchmark, tune_stability, Algorithm,
    BenchmarkConfig, ClusteringResult, ColMatrix, DataMatrix, FitRecipe, GridSpec, Method, NormKind, SimSpec,
    SolverOptions, StabilityConfig, WeightConfig,
};
use serde::{Deserialize, Serialize};

use crate::io::{self, float, input_error};
use crate::{BenchmarkArgs, EvaluateArgs, FitArgs, ModelArgs, PathArgs, SimulateArgs, TuneArgs};

const NOT_CONVERGED: u8 = 3;

pub fn simulate(a: &SimulateArgs) -> Result<u8> {
    let mut spec = SimSpec::setting(a.setting, a.seed)?;
    spec = spec.with_size(a.n.unwrap_or(spec.n), a.p.unwrap_or(spec.p));
    let data = spec.generate::<f64>()?;
    io::ensure_dir(&a.out)?;
    io::write_matrix(&a.out.join("data.csv"), &data.x)?;
    io::write_integers(&a.out.join("labels.csv"), &data.labels)?;
    let informative: Vec<usize> = data.informative.iter().map(|j| j + 1).collect();
    io::write_integers(&a.out.join("informative.csv"), &informative)?;
    Ok(0)
}

fn recipe(m: &ModelArgs) -> Result<FitRecipe<f64>> {
    let algorithm: Algorithm = m.algorithm.parse()?;
    let mut r = FitRecipe::new(algorithm);
    r.norm = m.q.parse::<NormKind>()?;
    r.weights = WeightConfig { m: m.knn, phi: m.phi, per_feature: !m.raw_kernel };
    r.nu = match m.nu.trim() {
        "auto" => None,
        s => match s.parse::<f64>() {
            Ok(v) if v > 0.0 && v.is_finite() => Some(v),
            _ => return Err(input_error(format!("--nu must be 'auto' or a positive number, got '{s}'"))),
        },
    };
    r.adaptive = m.adaptive_factors;
    r.opts = SolverOptions::default().with_tol(m.tol).with_max_iter(m.max_iter);
    r.merge_tol = DEFAULT_MERGE_TOL;
    Ok(r)
}

fn load(path: &Path) -> Result<(ColMatrix<f64>, DataMatrix<f64>)> {
    let raw = io::read_matrix(path)?;
    let x = center_features(&raw)?;
    Ok((raw, x))
}

fn reported_centers(fit: &ClusteringResult<f64>, x: &DataMatrix<f64>, raw: bool) -> ColMatrix<f64> {
    let c = &fit.centers.values;
    if !raw {
        return c.clone();
    }
    let means = x.column_means();
    ColMatrix::from_fn(c.nrows(), c.ncols(), |i, j| c.get(i, j) + means[j])
}

#[derive(Serialize)]
struct FitReport {
    algorithm: String,
    gamma1: f64,
    gamma2: f64,
    nu: f64,
    iterations: usize,
    converged: bool,
    primal_residual: f64,
    relative_change: f64,
    objective: f64,
    duality_gap: Option<f64>,
    num_clusters: usize,
    num_selected: usize,
}

pub fn fit(a: &FitArgs) -> Result<u8> {
    let r = recipe(&a.model)?;
    let (_, x) = load(&a.input)?;
    let fit = r.fit(&x, a.gamma1, a.gamma2)?;
    io::ensure_dir(&a.out)?;
    io::write_matrix(&a.out.join("centers.csv"), &reported_centers(&fit, &x, a.emit_raw_centers))?;
    io::write_integers(&a.out.join("assignments.csv"), &fit.assignment)?;
    let features: Vec<usize> = fit.selected_features.iter().map(|j| j + 1).collect();
    io::write_integers(&a.out.join("features.csv"), &features)?;
    let d = &fit.diagnostics;
    let report = FitReport {
        algorithm: r.algorithm.to_string(),
        gamma1: a.gamma1,
        gamma2: a.gamma2,
        nu: r.nu_for(x.n()),
        iterations: d.iterations,
        converged: d.converged,
        primal_residual: d.primal_residual,
        relative_change: d.relative_change,
        objective: d.objective,
        duality_gap: d.duality_gap,
        num_clusters: fit.num_clusters,
        num_selected: fit.selected_features.len(),
    };
    io::write_json(&a.out.join("diagnostics.json"), &report)?;
    Ok(if d.converged { 0 } else { NOT_CONVERGED })
}

/// `0` followed by a geometric grid ending at the fusing value.
fn automatic_path_grid(r: &FitRecipe<f64>, x: &DataMatrix<f64>, points: usize) -> Result<Vec<f64>> {
    if points < 2 {
        return Err(input_error("--points must be at least 2"));
    }
    let graph = r.graph(x)?;
    let base = r.config(x.n(), 0.0, 0.0, vec![1.0; x.p()])?;
    let fuse = fusing_gamma1(x, &graph, &base, r.algorithm, &r.opts, r.merge_tol)?;
    let m = points - 1;
    let mut grid = vec![0.0];
    grid.extend((0..m).map(|k| fuse * 1e-3f64.powf((m - 1 - k) as f64 / (m.max(2) - 1) as f64)));
    Ok(grid)
}

pub fn path(a: &PathArgs) -> Result<u8> {
    let r = recipe(&a.model)?;
    let (_, x) = load(&a.input)?;
    let grid = if a.gamma1.is_empty() { automatic_path_grid(&r, &x, a.points)? } else { a.gamma1.clone() };
    let graph = r.graph(&x)?;
    let factors = r.factors(&x, &graph, 0.0)?;
    let base = r.config(x.n(), 0.0, a.gamma2, factors)?;
    let path = clustering_path(&x, &graph, &grid, &base, r.algorithm, &r.opts, r.merge_tol)?;

    let mut long = Vec::with_capacity(grid.len() * x.n() * x.p());
    let mut counts = Vec::with_capacity(grid.len());
    for (&g1, fit) in grid.iter().zip(&path) {
        let c = reported_centers(fit, &x, a.emit_raw_centers);
        for i in 0..x.n() {
            for j in 0..x.p() {
                long.push(vec![float(g1), (i + 1).to_string(), (j + 1).to_string(), float(c.get(i, j))]);
            }
        }
        counts.push(vec![
            float(g1),
            fit.num_clusters.to_string(),
            fit.selected_features.len().to_string(),
            fit.diagnostics.converged.to_string(),
        ]);
    }
    io::ensure_dir(&a.out)?;
    io::write_table(&a.out.join("path.csv"), &["gamma1", "observation", "feature", "value"], &long)?;
    io::write_table(&a.out.join("clusters.csv"), &["gamma1", "num_clusters", "num_selected", "converged"], &counts)?;
    Ok(if path.iter().all(|f| f.diagnostics.converged) { 0 } else { NOT_CONVERGED })
}

#[derive(Deserialize)]
struct GridFile {
    gamma1: Vec<f64>,
    gamma2: Vec<f64>,
}

#[derive(Serialize)]
struct Selected {
    gamma1: f64,
    gamma2: f64,
    stability: f64,
}

pub fn tune(a: &TuneArgs) -> Result<u8> {
    let r = recipe(&a.model)?;
    let text = std::fs::read_to_string(&a.grid).map_err(|e| input_error(format!("{}: {e}", a.grid.display())))?;
    let grid: GridFile = serde_json::from_str(&text).map_err(|e| input_error(format!("{}: {e}", a.grid.display())))?;
    let raw = io::read_matrix(&a.input)?;
    let mut sc = StabilityConfig::new(grid.gamma1.clone(), grid.gamma2.clone(), a.seed);
    sc.repetitions = a.bootstrap;
    let t = tune_stability(&r, &raw, &sc)?;

    let mut rows = Vec::new();
    let mut best = f64::NAN;
    for (i, &g1) in grid.gamma1.iter().enumerate() {
        for (k, &g2) in grid.gamma2.iter().enumerate() {
            rows.push(vec![float(g1), float(g2), float(t.mean[i][k]), float(t.sd[i][k])]);
            if g1 == t.gamma1 && g2 == t.gamma2 {
                best = t.mean[i][k];
            }
        }
    }
    io::ensure_dir(&a.out)?;
    io::write_table(&a.out.join("stability.csv"), &["gamma1", "gamma2", "mean", "sd"], &rows)?;
    io::write_json(&a.out.join("selected.json"), &Selected { gamma1: t.gamma1, gamma2: t.gamma2, stability: best })?;
    Ok(0)
}

#[derive(Serialize)]
struct Evaluation {
    rand: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    fnr: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    fpr: Option<f64>,
}

pub fn evaluate(a: &EvaluateArgs) -> Result<u8> {
    let predicted = io::read_integers(&a.predicted)?;
    let truth = io::read_integers(&a.truth)?;
    if predicted.len() != truth.len() {
        return Err(input_error(format!("{} predicted labels but {} true labels", predicted.len(), truth.len())));
    }
    let rand = rand_index(&predicted, &truth)?;
    let (fnr, fpr) = match (&a.selected, &a.informative, a.p) {
        (Some(s), Some(t), Some(p)) => {
            let (fnr, fpr) = fnr_fpr(&io::read_features(s)?, &io::read_features(t)?, p)?;
            (Some(fnr), Some(fpr))
        }
        _ => (None, None),
    };
    let json = serde_json::to_string_pretty(&Evaluation { rand, fnr, fpr })?;
    println!("{json}");
    if let Some(out) = &a.out {
        std::fs::write(out, format!("{json}\n"))?;
    }
    Ok(0)
}

pub fn benchmark(a: &BenchmarkArgs) -> Result<u8> {
    let methods = a.methods.iter().map(|m| m.parse::<Method>()).collect::<scc_core::Result<Vec<_>>>()?;
    let mut sim = SimSpec::setting(a.setting, 0)?;
    sim = sim.with_size(a.n.unwrap_or(sim.n), a.p.unwrap_or(sim.p));
    let mut cfg = BenchmarkConfig::new(sim, a.reps, a.seed, methods);
    cfg.grid = GridSpec { gamma1_points: a.gamma1_points, gamma2_points: a.gamma2_points, ..GridSpec::default() };
    let summaries = run_benchmark::<f64>(&cfg)?;
    let rows: Vec<Vec<String>> = summaries
        .iter()
        .map(|s| {
            vec![
                s.method.to_string(),
                s.reps.len().to_string(),
                float(s.rand_mean),
                float(s.rand_sd),
                float(s.fnr_mean),
                float(s.fnr_sd),
                float(s.fpr_mean),
                float(s.fpr_sd),
            ]
        })
        .collect();
    if let Some(dir) = a.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        io::ensure_dir(dir)?;
    }
    io::write_table(&a.out, &["method", "reps", "rand_mean", "rand_sd", "fnr_mean", "fnr_sd", "fpr_mean", "fpr_sd"], &rows)?;
    Ok(0)
}
