//! Degrees of freedom `tr(d a_hat / d x)` of small fits, for `q = 1` and `q = 2`.
//!
//! The penalty is written as `sum_s ||D_s a||` over fusion blocks
//! `D_l = w_l (I_p kron (e_i1 - e_i2)^T)` and feature blocks
//! `D_{|E|+j} = u_j (e_j^T kron I_n)`, acting on `vec(A)` (columns stacked).
//! Everything is dense and computed in `f64`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Result, SccError};
use crate::model::{CenterEstimate, FusionGraph, PenaltyConfig};
use crate::prox::NormKind;
use crate::scalar::Scalar;

/// Largest `n * p` accepted by the dense construction.
pub const DOF_SIZE_LIMIT: usize = 2000;
/// `|d^T a|` and `||D_s a||` at or below this count as inactive.
pub const ACTIVE_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DegreesOfFreedom {
    pub value: f64,
    /// The inner matrix was singular and a pseudo-inverse was used.
    pub pseudo_inverse_fallback: bool,
}

/// One penalty block: its rows as sparse `(column, coefficient)` lists and
/// the multiplier in front of its norm.
struct Block {
    rows: Vec<Vec<(usize, f64)>>,
    gamma: f64,
}

impl Block {
    fn apply_row(row: &[(usize, f64)], a: &DVector<f64>) -> f64 {
        row.iter().map(|&(c, v)| v * a[c]).sum()
    }

    fn apply(&self, a: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(self.rows.len(), self.rows.iter().map(|r| Self::apply_row(r, a)))
    }

    fn dense(&self, dim: usize) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.rows.len(), dim);
        for (k, r) in self.rows.iter().enumerate() {
            for &(c, v) in r {
                m[(k, c)] += v;
            }
        }
        m
    }
}

fn blocks<T: Scalar>(n: usize, p: usize, graph: &FusionGraph<T>, cfg: &PenaltyConfig<T>) -> (Vec<Block>, Vec<Block>) {
    let g1 = cfg.gamma1.as_f64();
    let g2 = cfg.gamma2.as_f64();
    let fusion = graph
        .edges()
        .iter()
        .map(|e| {
            let w = e.weight.as_f64();
            let rows = (0..p).map(|j| vec![(e.i1 + n * j, w), (e.i2 + n * j, -w)]).collect();
            Block { rows, gamma: g1 }
        })
        .collect();
    let features = (0..p)
        .map(|j| {
            let u = cfg.feature_factors[j].as_f64();
            let rows = (0..n).map(|i| vec![(i + n * j, u)]).collect();
            Block { rows, gamma: g2 }
        })
        .collect();
    (fusion, features)
}

fn check<T: Scalar>(a: &CenterEstimate<T>, graph: &FusionGraph<T>, cfg: &PenaltyConfig<T>, norm: NormKind) -> Result<()> {
    let (n, p) = (a.n(), a.p());
    if n * p > DOF_SIZE_LIMIT {
        return Err(SccError::SizeGuard { np: n * p, limit: DOF_SIZE_LIMIT });
    }
    if graph.n() != n || cfg.feature_factors.len() != p {
        return Err(SccError::ShapeMismatch {
            expected: format!("graph on {n} observations and {p} factors"),
            found: format!("graph on {} observations and {} factors", graph.n(), cfg.feature_factors.len()),
        });
    }
    if cfg.norm != norm {
        return Err(SccError::Config(format!("fit uses {:?}, this estimator needs {norm:?}", cfg.norm)));
    }
    Ok(())
}

fn vec_of<T: Scalar>(a: &CenterEstimate<T>) -> DVector<f64> {
    DVector::from_iterator(a.n() * a.p(), a.values.as_slice().iter().map(|v| v.as_f64()))
}

/// `I - V_r V_r^T` for the right singular vectors of `d` with nonzero
/// singular values: the projector onto the null space of `d`.
pub fn null_space_projector(d: &DMatrix<f64>, dim: usize) -> DMatrix<f64> {
    let mut proj = DMatrix::identity(dim, dim);
    if d.nrows() == 0 {
        return proj;
    }
    let svd = d.clone().svd(false, true);
    let v_t = svd.v_t.expect("requested");
    let smax = svd.singular_values.iter().copied().fold(0.0, f64::max);
    let cutoff = smax * (dim.max(d.nrows()) as f64) * f64::EPSILON;
    for (k, &s) in svd.singular_values.iter().enumerate() {
        if s > cutoff {
            let v = v_t.row(k).transpose();
            proj -= &v * v.transpose();
        }
    }
    proj
}

/// `gamma (D^T D / ||Da|| - D^T D a a^T D^T D / ||Da||^3)` added into `h`.
fn add_curvature(h: &mut DMatrix<f64>, block: &Block, a: &DVector<f64>, dim: usize) {
    let d = block.dense(dim);
    let da = &d * a;
    let nrm = da.norm();
    let dtd = d.transpose() * &d;
    let g = d.transpose() * da;
    *h += (dtd / nrm - &g * g.transpose() / nrm.powi(3)) * block.gamma;
}

fn trace_of_solution(p_mat: &DMatrix<f64>, h: &DMatrix<f64>, dim: usize) -> DegreesOfFreedom {
    let inner = DMatrix::identity(dim, dim) + p_mat * h;
    let (inv, fallback) = match inner.clone().try_inverse() {
        Some(inv) if inv.iter().all(|v| v.is_finite()) => (inv, false),
        _ => (inner.pseudo_inverse(1e-12).expect("non-negative epsilon"), true),
    };
    DegreesOfFreedom { value: (inv * p_mat).trace(), pseudo_inverse_fallback: fallback }
}

/// Degrees of freedom of a `q = 1` fit. Fusion coordinates and feature
/// columns with nonzero value are active; the inactive rows of `D` define
/// the projector and only the active feature blocks contribute curvature.
pub fn df_q1<T: Scalar>(a: &CenterEstimate<T>, graph: &FusionGraph<T>, cfg: &PenaltyConfig<T>) -> Result<DegreesOfFreedom> {
    check(a, graph, cfg, NormKind::L1)?;
    let (n, p) = (a.n(), a.p());
    let dim = n * p;
    let av = vec_of(a);
    let (fusion, features) = blocks(n, p, graph, cfg);

    let mut inactive: Vec<&[(usize, f64)]> = Vec::new();
    for b in &fusion {
        inactive.extend(b.rows.iter().filter(|r| Block::apply_row(r, &av).abs() <= ACTIVE_TOL).map(Vec::as_slice));
    }
    let mut h = DMatrix::zeros(dim, dim);
    for b in &features {
        if b.apply(&av).norm() > ACTIVE_TOL {
            add_curvature(&mut h, b, &av, dim);
        } else {
            inactive.extend(b.rows.iter().map(Vec::as_slice));
        }
    }
    let p_mat = null_space_projector(&stack(&inactive, dim), dim);
    Ok(trace_of_solution(&p_mat, &h, dim))
}

/// Degrees of freedom of a `q = 2` fit. Whole blocks are active or not, and
/// both fusion and feature blocks contribute curvature.
pub fn df_q2<T: Scalar>(a: &CenterEstimate<T>, graph: &FusionGraph<T>, cfg: &PenaltyConfig<T>) -> Result<DegreesOfFreedom> {
    check(a, graph, cfg, NormKind::L2)?;
    let (n, p) = (a.n(), a.p());
    let dim = n * p;
    let av = vec_of(a);
    let (fusion, features) = blocks(n, p, graph, cfg);

    let mut inactive: Vec<&[(usize, f64)]> = Vec::new();
    let mut h = DMatrix::zeros(dim, dim);
    for b in fusion.iter().chain(&features) {
        if b.apply(&av).norm() > ACTIVE_TOL {
            add_curvature(&mut h, b, &av, dim);
        } else {
            inactive.extend(b.rows.iter().map(Vec::as_slice));
        }
    }
    let p_mat = null_space_projector(&stack(&inactive, dim), dim);
    Ok(trace_of_solution(&p_mat, &h, dim))
}

fn stack(rows: &[&[(usize, f64)]], dim: usize) -> DMatrix<f64> {
    let mut d = DMatrix::zeros(rows.len(), dim);
    for (k, r) in rows.iter().enumerate() {
        for &(c, v) in r.iter() {
            d[(k, c)] += v;
        }
    }
    d
}
