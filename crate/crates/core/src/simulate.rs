//! Synthetic benchmark data: spherical Gaussian clusters with 20 informative
//! features (settings 1-4) and two interlocking half moons (setting 5).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Result, SccError};
use crate::matrix::ColMatrix;
use crate::scalar::Scalar;

/// Number of informative features in settings 1-4.
pub const INFORMATIVE: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimSpec {
    pub setting: u8,
    pub n: usize,
    pub p: usize,
    pub k: usize,
    pub mu: f64,
    pub seed: u64,
    /// Coordinate noise sd on the half-moon arcs.
    pub moon_noise: f64,
    /// Variance of the half-moon noise features.
    pub noise_variance: f64,
}

impl SimSpec {
    /// Benchmark defaults of `setting` (1..=5).
    pub fn setting(setting: u8, seed: u64) -> Result<Self> {
        let (n, p, k, mu) = match setting {
            1 => (60, 150, 2, 0.6),
            2 => (60, 500, 2, 0.7),
            3 => (60, 150, 4, 0.9),
            4 => (60, 500, 4, 1.2),
            5 => (100, 40, 2, 0.0),
            other => return Err(SccError::InvalidInput(format!("unknown setting {other}, expected 1..=5"))),
        };
        Ok(Self { setting, n, p, k, mu, seed, moon_noise: 0.1, noise_variance: 0.5 })
    }

    pub fn with_size(mut self, n: usize, p: usize) -> Self {
        self.n = n;
        self.p = p;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// Draws the data set from a ChaCha8 stream seeded with `seed`.
    pub fn generate<T: Scalar>(&self) -> Result<SimData<T>> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        if self.setting == 5 {
            generate_half_moons(self, &mut rng)
        } else {
            generate_spherical(self, &mut rng)
        }
    }
}

/// Raw (uncentered) observations, 1-based labels and 0-based informative features.
#[derive(Debug, Clone, PartialEq)]
pub struct SimData<T> {
    pub x: ColMatrix<T>,
    pub labels: Vec<usize>,
    pub informative: Vec<usize>,
}

/// Mean of informative feature `j < 20` for cluster `c` in `1..=k`.
fn cluster_mean(k: usize, c: usize, j: usize, mu: f64) -> f64 {
    let first_half = j < INFORMATIVE / 2;
    let sign = match (k, c) {
        (2, 1) => 1.0,
        (2, _) => -1.0,
        (_, 1) => if first_half { 1.0 } else { -1.0 },
        (_, 2) => -1.0,
        (_, 3) => if first_half { -1.0 } else { 1.0 },
        _ => 1.0,
    };
    sign * mu
}

/// Settings 1-4: labels uniform on `1..=k`, the first 20 features normal
/// around the cluster mean pattern, the rest standard normal.
pub fn generate_spherical<T: Scalar, R: Rng + ?Sized>(spec: &SimSpec, rng: &mut R) -> Result<SimData<T>> {
    if !(1..=4).contains(&spec.setting) {
        return Err(SccError::InvalidInput(format!("setting {} is not spherical", spec.setting)));
    }
    if spec.p < INFORMATIVE {
        return Err(SccError::InvalidInput(format!("p = {} is below the {INFORMATIVE} informative features", spec.p)));
    }
    if spec.k != 2 && spec.k != 4 {
        return Err(SccError::InvalidInput(format!("cluster count must be 2 or 4, got {}", spec.k)));
    }
    if spec.n < 1 || !spec.mu.is_finite() {
        return Err(SccError::InvalidInput("n must be positive and mu finite".into()));
    }
    let (n, p) = (spec.n, spec.p);
    let mut x = ColMatrix::zeros(n, p);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let c = rng.random_range(1..=spec.k);
        labels.push(c);
        for j in 0..p {
            let z: f64 = StandardNormal.sample(rng);
            let mean = if j < INFORMATIVE { cluster_mean(spec.k, c, j, spec.mu) } else { 0.0 };
            x.set(i, j, T::lit(mean + z));
        }
    }
    Ok(SimData { x, labels, informative: (0..INFORMATIVE).collect() })
}

/// Setting 5: arcs `(cos t, sin t)` and `(1 - cos t, 0.5 - sin t)` with
/// `t ~ U[0, pi]`, normal coordinate noise, then `p - 2` normal noise features.
pub fn generate_half_moons<T: Scalar, R: Rng + ?Sized>(spec: &SimSpec, rng: &mut R) -> Result<SimData<T>> {
    if spec.setting != 5 {
        return Err(SccError::InvalidInput(format!("setting {} is not the half-moon setting", spec.setting)));
    }
    if spec.p < 2 || spec.n < 1 {
        return Err(SccError::InvalidInput("half moons need p >= 2 and n >= 1".into()));
    }
    if !(spec.moon_noise >= 0.0) || !(spec.noise_variance >= 0.0) {
        return Err(SccError::InvalidInput("noise scales must be >= 0".into()));
    }
    let coord = Normal::new(0.0, spec.moon_noise).map_err(|e| SccError::InvalidInput(e.to_string()))?;
    let noise = Normal::new(0.0, spec.noise_variance.sqrt()).map_err(|e| SccError::InvalidInput(e.to_string()))?;
    let (n, p) = (spec.n, spec.p);
    let mut x = ColMatrix::zeros(n, p);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let c = rng.random_range(1..=2usize);
        labels.push(c);
        let t = rng.random_range(0.0..=std::f64::consts::PI);
        let (a, b) = if c == 1 { (t.cos(), t.sin()) } else { (1.0 - t.cos(), 0.5 - t.sin()) };
        x.set(i, 0, T::lit(a + coord.sample(rng)));
        x.set(i, 1, T::lit(b + coord.sample(rng)));
        for j in 2..p {
            x.set(i, j, T::lit(noise.sample(rng)));
        }
    }
    Ok(SimData { x, labels, informative: vec![0, 1] })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_per_setting() {
        let s = SimSpec::setting(1, 0).unwrap();
        assert_eq!((s.n, s.p, s.k, s.mu), (60, 150, 2, 0.6));
        let s = SimSpec::setting(5, 0).unwrap();
        assert_eq!((s.n, s.p, s.k), (100, 40, 2));
        assert!(SimSpec::setting(6, 0).is_err());
    }

    #[test]
    fn four_cluster_sign_pattern() {
        let signs: Vec<f64> = (1..=4).map(|c| cluster_mean(4, c, 0, 1.0)).collect();
        assert_eq!(signs, vec![1.0, -1.0, -1.0, 1.0]);
        let signs: Vec<f64> = (1..=4).map(|c| cluster_mean(4, c, 10, 1.0)).collect();
        assert_eq!(signs, vec![-1.0, -1.0, 1.0, 1.0]);
    }

    #[test]
    fn seeded_draws_repeat() {
        let s = SimSpec::setting(3, 11).unwrap();
        let a: SimData<f64> = s.generate().unwrap();
        let b: SimData<f64> = s.generate().unwrap();
        assert_eq!(a, b);
        assert_eq!(a.x.shape(), (60, 150));
        assert!(a.labels.iter().all(|&c| (1..=4).contains(&c)));
    }

    #[test]
    fn noiseless_moons_lie_on_arcs() {
        let mut s = SimSpec::setting(5, 3).unwrap();
        s.moon_noise = 0.0;
        let d: SimData<f64> = s.generate().unwrap();
        for i in 0..s.n {
            let (a, b) = (d.x.get(i, 0), d.x.get(i, 1));
            let r = if d.labels[i] == 1 { a.hypot(b) } else { (1.0 - a).hypot(0.5 - b) };
            assert!((r - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_small_p() {
        let s = SimSpec::setting(1, 0).unwrap().with_size(10, 10);
        assert!(s.generate::<f64>().is_err());
    }
}
