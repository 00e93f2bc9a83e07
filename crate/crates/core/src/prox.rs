//! Proximal maps of the fusion norms and Euclidean projections onto their
//! dual-norm balls.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SccError};
use crate::scalar::{norm2, Scalar};

/// Fusion norm `q` in `{1, 2, inf}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum NormKind {
    L1,
    L2,
    Linf,
}

impl NormKind {
    pub fn dual(self) -> Self {
        match self {
            NormKind::L1 => NormKind::Linf,
            NormKind::L2 => NormKind::L2,
            NormKind::Linf => NormKind::L1,
        }
    }

    pub fn norm<T: Scalar>(self, v: &[T]) -> T {
        match self {
            NormKind::L1 => v.iter().map(|x| x.abs()).sum(),
            NormKind::L2 => norm2(v),
            NormKind::Linf => v.iter().fold(T::zero(), |m, x| m.max(x.abs())),
        }
    }

    pub fn all() -> [NormKind; 3] {
        [NormKind::L1, NormKind::L2, NormKind::Linf]
    }
}

impl std::fmt::Display for NormKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            NormKind::L1 => "1",
            NormKind::L2 => "2",
            NormKind::Linf => "inf",
        })
    }
}

impl std::str::FromStr for NormKind {
    type Err = SccError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "1" | "l1" => Ok(NormKind::L1),
            "2" | "l2" => Ok(NormKind::L2),
            "inf" | "linf" | "infinity" => Ok(NormKind::Linf),
            other => Err(SccError::InvalidInput(format!("unknown norm '{other}', expected 1, 2 or inf"))),
        }
    }
}

fn check_finite<T: Scalar>(v: &[T]) -> Result<()> {
    match v.iter().position(|x| !x.is_finite()) {
        Some(i) => Err(SccError::NonFinite { row: i, col: 0 }),
        None => Ok(()),
    }
}

/// `argmin_v sigma * ||v||_q + 1/2 ||u - v||^2`.
pub fn prox<T: Scalar>(u: &[T], sigma: T, norm: NormKind) -> Result<Vec<T>> {
    check_finite(u)?;
    if !(sigma >= T::zero()) {
        return Err(SccError::InvalidInput(format!("prox scale must be >= 0, got {sigma}")));
    }
    let mut out = u.to_vec();
    prox_in_place(&mut out, sigma, norm);
    Ok(out)
}

/// Euclidean projection onto `{y : ||y||_norm <= radius}`.
pub fn project_ball<T: Scalar>(z: &[T], radius: T, norm: NormKind) -> Result<Vec<T>> {
    check_finite(z)?;
    if !(radius >= T::zero()) {
        return Err(SccError::InvalidInput(format!("ball radius must be >= 0, got {radius}")));
    }
    let mut out = z.to_vec();
    project_ball_in_place(&mut out, radius, norm);
    Ok(out)
}

/// Unchecked in-place [`prox`] used inside the solver loops.
pub fn prox_in_place<T: Scalar>(u: &mut [T], sigma: T, norm: NormKind) {
    if sigma <= T::zero() {
        return;
    }
    match norm {
        NormKind::L2 => {
            let nrm = norm2(u);
            let scale = if nrm > sigma { T::one() - sigma / nrm } else { T::zero() };
            u.iter_mut().for_each(|x| *x *= scale);
        }
        NormKind::L1 => {
            for x in u.iter_mut() {
                let mag = (x.abs() - sigma).max(T::zero());
                *x = if *x < T::zero() { -mag } else { mag };
            }
        }
        NormKind::Linf => {
            // Moreau: prox of sigma*||.||_inf is u minus projection onto the sigma L1 ball.
            let mut proj = u.to_vec();
            project_l1_ball(&mut proj, sigma);
            u.iter_mut().zip(&proj).for_each(|(x, p)| *x -= *p);
        }
    }
}

/// Unchecked in-place [`project_ball`].
pub fn project_ball_in_place<T: Scalar>(z: &mut [T], radius: T, norm: NormKind) {
    let radius = radius.max(T::zero());
    match norm {
        NormKind::L2 => {
            let nrm = norm2(z);
            if nrm > radius {
                let scale = radius / nrm;
                z.iter_mut().for_each(|x| *x *= scale);
            }
        }
        NormKind::Linf => z.iter_mut().for_each(|x| *x = x.max(-radius).min(radius)),
        NormKind::L1 => project_l1_ball(z, radius),
    }
}

/// Sort-and-shift projection onto the L1 ball of radius `r`.
fn project_l1_ball<T: Scalar>(z: &mut [T], r: T) {
    let l1: T = z.iter().map(|x| x.abs()).sum();
    if l1 <= r {
        return;
    }
    if r <= T::zero() {
        z.iter_mut().for_each(|x| *x = T::zero());
        return;
    }
    let mut mags: Vec<T> = z.iter().map(|x| x.abs()).collect();
    mags.sort_unstable_by(|a, b| b.partial_cmp(a).expect("finite"));
    let mut cumsum = T::zero();
    let mut theta = T::zero();
    for (k, &m) in mags.iter().enumerate() {
        cumsum += m;
        let t = (cumsum - r) / T::from_usize_lossy(k + 1);
        if m > t {
            theta = t;
        } else {
            break;
        }
    }
    for x in z.iter_mut() {
        let mag = (x.abs() - theta).max(T::zero());
        *x = if *x < T::zero() { -mag } else { mag };
    }
}
