//! Random matrix sampling with exact variance profiles.
//!
//! A sampling spec fixes a variance profile `S = (s_ik)`, an entry
//! distribution, a seed, and a trial count. Trial `t` draws the `p×n`
//! matrix `X` with independent entries `x_ik = √s_ik · ξ_ik`, where `ξ` is a
//! standardized variable with `E ξ = 0` and `E|ξ|² = 1`:
//!
//! * `gaussian-real`:     `ξ ~ N(0,1)` real;
//! * `gaussian-complex`:  `ξ = (g₁ + i g₂)/√2`, variance split evenly
//!   between the components;
//! * `rademacher`:        `ξ = ±1` with equal probability, so `|x_ik| = √s_ik`
//!   exactly.
//!
//! Entries with `s_ik = 0` are exactly zero (the multiplicative form
//! guarantees it, and the underlying draw is still consumed so that the
//! random stream does not depend on the sparsity pattern).
//!
//! Reproducibility: each trial derives its own ChaCha8 stream from
//! `(seed, trial)` through a SplitMix64 chain, so trials are independent,
//! order-insensitive, and identical across runs and thread counts.

use gramspec::linalg::splitmix64;
use gramspec::{Error, Result, VarianceProfile};
use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::defaults::SALT_TRIAL;

/// Entry distribution of the random matrix, standardized to unit variance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Distribution {
    GaussianReal,
    GaussianComplex,
    Rademacher,
}

impl std::fmt::Display for Distribution {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            Distribution::GaussianReal => "gaussian-real",
            Distribution::GaussianComplex => "gaussian-complex",
            Distribution::Rademacher => "rademacher",
        };
        f.write_str(name)
    }
}

impl std::str::FromStr for Distribution {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian-real" => Ok(Distribution::GaussianReal),
            "gaussian-complex" => Ok(Distribution::GaussianComplex),
            "rademacher" => Ok(Distribution::Rademacher),
            other => Err(Error::Parse(format!(
                "unknown distribution {other:?}; expected gaussian-real, \
                 gaussian-complex, or rademacher"
            ))),
        }
    }
}

/// A reproducible random-matrix ensemble: profile, distribution, seed, and
/// number of trials.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SampleSpec {
    pub profile: VarianceProfile,
    pub distribution: Distribution,
    pub seed: u64,
    pub trials: usize,
}

impl SampleSpec {
    pub fn new(
        profile: VarianceProfile,
        distribution: Distribution,
        seed: u64,
        trials: usize,
    ) -> Result<Self> {
        if trials == 0 {
            return Err(Error::precondition("trial count must be positive"));
        }
        Ok(SampleSpec {
            profile,
            distribution,
            seed,
            trials,
        })
    }
}

/// Derives the sub-seed of one logical stream of a run. `salt` separates
/// domains (trial matrices, test vectors, sweep instances) and `index`
/// separates items within a domain.
pub fn stream_seed(seed: u64, salt: u64, index: u64) -> u64 {
    let mut s = splitmix64(seed ^ salt);
    s = splitmix64(s ^ index.wrapping_mul(0x9e37_79b9_7f4a_7c15));
    splitmix64(s)
}

/// The random stream of one trial of a sampling spec.
pub fn trial_rng(seed: u64, trial: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(stream_seed(seed, SALT_TRIAL, trial as u64))
}

/// Draws the `p×n` data matrix of one trial. Entries are filled in row-major
/// order; complex Gaussians draw the real component first.
pub fn sample(spec: &SampleSpec, trial: usize) -> DMatrix<Complex64> {
    let (p, n) = (spec.profile.p(), spec.profile.n());
    let mut rng = trial_rng(spec.seed, trial);
    let mut x = DMatrix::from_element(p, n, Complex64::new(0.0, 0.0));
    let half = std::f64::consts::FRAC_1_SQRT_2;
    for i in 0..p {
        for k in 0..n {
            let scale = spec.profile.s()[(i, k)].sqrt();
            let xi = match spec.distribution {
                Distribution::GaussianReal => {
                    let g: f64 = rng.sample(StandardNormal);
                    Complex64::new(g, 0.0)
                }
                Distribution::GaussianComplex => {
                    let re: f64 = rng.sample(StandardNormal);
                    let im: f64 = rng.sample(StandardNormal);
                    Complex64::new(re * half, im * half)
                }
                Distribution::Rademacher => {
                    let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
                    Complex64::new(sign, 0.0)
                }
            };
            x[(i, k)] = xi * scale;
        }
    }
    x
}
