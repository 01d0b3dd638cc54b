//! Random stress test of the rotation-inversion singularity
//! characterization.
//!
//! Each instance draws independent Haar unitaries `U₁` (p×p) and `U₂` (n×n)
//! and a strictly positive contraction `A` with top singular value
//! `ρ ∈ [0.35, 0.95]`, then runs the characterization of
//! `K = [[U₁, A], [Aᵗ, U₂]]`: either `K` is invertible and
//! `‖K⁻¹‖ · rhs` stays finite, or `K` is singular and the right-hand side
//! vanishes. An instance where `K` is numerically singular while the
//! right-hand side is not is a counterexample; the library reports it as an
//! identity violation and the sweep records it instead of aborting, so one
//! bad instance fails the aggregate without hiding the rest of the sweep.
//!
//! Haar sampling uses the QR factorization of a complex Ginibre matrix with
//! the phase correction that makes `R`'s diagonal positive; without the
//! correction the QR convention would bias the distribution.

use gramspec::linalg::sym_eigen_sorted;
use gramspec::stability::{rotation_inversion_check, RotationInversionInstance};
use gramspec::{Error, Result};
use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::defaults::SALT_RI;
use crate::sample::stream_seed;

/// Outcome of one random instance. `lhs` and `ratio` are `None` for
/// singular instances (where `‖K⁻¹‖` is infinite) so that reports stay
/// within plain JSON numbers.
#[derive(Debug, Clone, Serialize)]
pub struct RiRecord {
    pub trial: usize,
    pub p: usize,
    pub n: usize,
    /// `‖K⁻¹‖₂` when `K` is invertible.
    pub lhs: Option<f64>,
    /// `Gap(AAᵗ) · |1 − min(λ₁, 1)·⟨v₁, U₁v₁⟩·⟨v₂, U₂v₂⟩|`.
    pub rhs_core: f64,
    /// `lhs · rhs_core` when finite.
    pub ratio: Option<f64>,
    pub singular: bool,
    /// False exactly when the instance contradicted the characterization.
    pub consistent: bool,
}

/// Aggregate of a sweep.
#[derive(Debug, Clone, Serialize)]
pub struct RiSweep {
    pub trials: usize,
    pub max_dim: usize,
    pub seed: u64,
    pub singular_count: usize,
    pub inconsistency_count: usize,
    pub all_consistent: bool,
    /// Largest finite `lhs · rhs_core` seen, with the trial that achieved it.
    pub max_ratio: f64,
    pub max_ratio_trial: Option<usize>,
    pub records: Vec<RiRecord>,
}

impl RiSweep {
    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)
            .map_err(|e| Error::Parse(format!("sweep serialization failed: {e}")))?;
        s.push('\n');
        Ok(s)
    }

    /// CSV long format: `trial,p,n,lhs,rhs_core,ratio,singular,consistent`;
    /// empty fields stand for non-finite values of singular instances.
    pub fn write_csv<W: std::io::Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["trial", "p", "n", "lhs", "rhs_core", "ratio", "singular", "consistent"])
            .map_err(|e| Error::Parse(format!("csv write failed: {e}")))?;
        for r in &self.records {
            w.write_record([
                r.trial.to_string(),
                r.p.to_string(),
                r.n.to_string(),
                r.lhs.map(|v| format!("{v}")).unwrap_or_default(),
                format!("{}", r.rhs_core),
                r.ratio.map(|v| format!("{v}")).unwrap_or_default(),
                r.singular.to_string(),
                r.consistent.to_string(),
            ])
            .map_err(|e| Error::Parse(format!("csv write failed: {e}")))?;
        }
        w.flush()?;
        Ok(())
    }
}

/// A Haar-distributed unitary of the given dimension.
fn haar_unitary(dim: usize, rng: &mut ChaCha8Rng) -> DMatrix<Complex64> {
    let half = std::f64::consts::FRAC_1_SQRT_2;
    let z = DMatrix::from_fn(dim, dim, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        Complex64::new(re * half, im * half)
    });
    let qr = z.qr();
    let r = qr.r();
    let mut u = qr.q();
    for j in 0..dim {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 {
            d / d.norm()
        } else {
            Complex64::new(1.0, 0.0)
        };
        for v in u.column_mut(j).iter_mut() {
            *v *= phase;
        }
    }
    u
}

/// Draws one random instance: dimensions up to `max_dim/2` per side, Haar
/// rotations, and a strictly positive `A` rescaled to `‖A‖₂ = ρ < 1`.
fn random_instance(seed: u64, trial: usize, max_dim: usize) -> RotationInversionInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(seed, SALT_RI, trial as u64));
    let half = max_dim / 2;
    let p = 1 + (rng.random::<u64>() as usize) % half;
    let n = 1 + (rng.random::<u64>() as usize) % half;
    let u1 = haar_unitary(p, &mut rng);
    let u2 = haar_unitary(n, &mut rng);
    let rho = 0.35 + 0.6 * rng.random::<f64>();
    let mut a = DMatrix::from_fn(p, n, |_, _| {
        let g: f64 = rng.sample(StandardNormal);
        0.05 + g.abs()
    });
    let aat = &a * a.transpose();
    let (vals, _) = sym_eigen_sorted(&aat);
    let top = vals[p - 1].max(f64::MIN_POSITIVE);
    a *= rho / top.sqrt();
    RotationInversionInstance::new(u1, u2, a)
        .expect("random instances satisfy the construction invariants")
}

/// Runs `trials` random instances with `p + n ≤ max_dim` and aggregates
/// singular counts, consistency violations, and the largest finite ratio.
pub fn ri_sweep(trials: usize, max_dim: usize, seed: u64) -> Result<RiSweep> {
    if trials == 0 {
        return Err(Error::precondition("trial count must be positive"));
    }
    if max_dim < 2 {
        return Err(Error::precondition(
            "the sweep needs max_dim ≥ 2 so that p + n ≥ 2 fits",
        ));
    }
    let records: Vec<RiRecord> = (0..trials)
        .into_par_iter()
        .map(|t| -> Result<RiRecord> {
            let instance = random_instance(seed, t, max_dim);
            let (p, n) = (instance.u1.nrows(), instance.u2.nrows());
            match rotation_inversion_check(&instance) {
                Ok(out) => Ok(RiRecord {
                    trial: t,
                    p,
                    n,
                    lhs: (!out.singular).then_some(out.lhs),
                    rhs_core: out.rhs_core,
                    ratio: (!out.singular).then_some(out.ratio),
                    singular: out.singular,
                    consistent: true,
                }),
                Err(Error::IdentityViolation { deviation, .. }) => Ok(RiRecord {
                    trial: t,
                    p,
                    n,
                    lhs: None,
                    rhs_core: deviation,
                    ratio: None,
                    singular: true,
                    consistent: false,
                }),
                Err(e) => Err(e),
            }
        })
        .collect::<Result<Vec<_>>>()?;

    let singular_count = records.iter().filter(|r| r.singular).count();
    let inconsistency_count = records.iter().filter(|r| !r.consistent).count();
    let mut max_ratio = 0.0f64;
    let mut max_ratio_trial = None;
    for r in &records {
        if let Some(ratio) = r.ratio {
            if ratio > max_ratio {
                max_ratio = ratio;
                max_ratio_trial = Some(r.trial);
            }
        }
    }
    Ok(RiSweep {
        trials,
        max_dim,
        seed,
        singular_count,
        inconsistency_count,
        all_consistent: inconsistency_count == 0,
        max_ratio,
        max_ratio_trial,
        records,
    })
}
