//! Empirical spectra and resolvents of sampled Gram matrices.
//!
//! The spectrum of `XX*` is computed on the smaller side: for `n < p` the
//! `n×n` companion `X*X` carries the nonzero eigenvalues and the remaining
//! `p − n` kernel eigenvalues are appended as exact zeros. Resolvents
//! `R(ζ) = (XX* − ζ)⁻¹` are assembled from one Hermitian eigendecomposition
//! per matrix, so that many spectral parameters can be evaluated per trial
//! at quadratic rather than cubic cost, and so that the trace identity
//! `Σ_i R_ii = Σ_a (λ_a − ζ)⁻¹` holds by construction up to rounding.

use gramspec::linalg::HermitianEigen;
use gramspec::{Error, Result};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::defaults::{KERNEL_THRESHOLD_FACTOR, NEGATIVE_EIG_SLACK, REAL_AXIS_GUARD};

/// Ordered spectrum of one sampled Gram matrix `XX*`.
#[derive(Debug, Clone)]
pub struct EmpiricalSpectrum {
    /// All `p` eigenvalues of `XX*`, ascending.
    pub eigenvalues: Vec<f64>,
    /// Number of eigenvalues below the kernel threshold.
    pub zero_count: usize,
    /// The threshold used: `1e-8 · (1 + λ_max)`.
    pub kernel_threshold: f64,
}

/// Computes the spectrum of `XX*` through the smaller of the two Gram
/// matrices. An eigenvalue below `-1e-10` is reported as an identity
/// violation: `XX*` is positive semidefinite and a symmetric eigensolver
/// should respect that to near machine precision.
pub fn spectrum(x: &DMatrix<Complex64>) -> Result<EmpiricalSpectrum> {
    let (p, n) = (x.nrows(), x.ncols());
    if p == 0 || n == 0 {
        return Err(Error::dimension("the data matrix must be nonempty"));
    }
    let eigenvalues = if n < p {
        let companion = x.adjoint() * x;
        let mut vals = HermitianEigen::new(&companion)?.eigenvalues();
        vals.extend(std::iter::repeat(0.0).take(p - n));
        vals
    } else {
        let gram = x * x.adjoint();
        HermitianEigen::new(&gram)?.eigenvalues()
    };
    empirical_from_values(eigenvalues)
}

/// Classifies an already-computed ascending spectrum (validation, kernel
/// threshold, zero count). Shared by [`spectrum`] and by verification passes
/// that reuse a resolvent eigendecomposition.
pub(crate) fn empirical_from_values(mut eigenvalues: Vec<f64>) -> Result<EmpiricalSpectrum> {
    eigenvalues.sort_by(|a, b| a.partial_cmp(b).expect("eigenvalues are finite"));
    let smallest = eigenvalues[0];
    if smallest < NEGATIVE_EIG_SLACK {
        return Err(Error::IdentityViolation {
            name: "empirical Gram spectrum nonnegativity",
            deviation: -smallest,
            tolerance: -NEGATIVE_EIG_SLACK,
        });
    }
    let largest = eigenvalues[eigenvalues.len() - 1].max(0.0);
    let kernel_threshold = KERNEL_THRESHOLD_FACTOR * (1.0 + largest);
    let zero_count = eigenvalues.iter().filter(|&&v| v < kernel_threshold).count();
    Ok(EmpiricalSpectrum {
        eigenvalues,
        zero_count,
        kernel_threshold,
    })
}

/// Eigendecomposition of one `p×p` Gram matrix `XX*`, reused across spectral
/// parameters. Resolvents are spectral sums over the realified frame, with
/// the frame factor 1/2 (each true eigenprojector appears twice).
pub struct GramEigen {
    eigen: HermitianEigen,
    dim: usize,
}

impl GramEigen {
    pub fn new(x: &DMatrix<Complex64>) -> Result<Self> {
        let p = x.nrows();
        if p == 0 || x.ncols() == 0 {
            return Err(Error::dimension("the data matrix must be nonempty"));
        }
        let gram = x * x.adjoint();
        Ok(GramEigen {
            eigen: HermitianEigen::new(&gram)?,
            dim: p,
        })
    }

    /// The `p` eigenvalues of `XX*`, ascending.
    pub fn eigenvalues(&self) -> Vec<f64> {
        self.eigen.eigenvalues()
    }

    /// A spectral parameter is admissible off the real axis, or on it at
    /// distance more than the guard from every eigenvalue.
    fn check_parameter(&self, zeta: Complex64) -> Result<()> {
        if zeta.im != 0.0 {
            return Ok(());
        }
        let dist = self
            .eigen
            .paired_values
            .iter()
            .map(|&l| (l - zeta.re).abs())
            .fold(f64::INFINITY, f64::min);
        if dist <= REAL_AXIS_GUARD {
            return Err(Error::precondition(format!(
                "real spectral parameter {} is within {REAL_AXIS_GUARD:.0e} of the spectrum",
                zeta.re
            )));
        }
        Ok(())
    }

    /// Full resolvent `R(ζ) = (XX* − ζ)⁻¹`.
    pub fn resolvent(&self, zeta: Complex64) -> Result<DMatrix<Complex64>> {
        self.check_parameter(zeta)?;
        let mut scaled = self.eigen.frame.clone();
        for (k, &lambda) in self.eigen.paired_values.iter().enumerate() {
            let weight = 0.5 / (Complex64::new(lambda, 0.0) - zeta);
            for v in scaled.column_mut(k).iter_mut() {
                *v *= weight;
            }
        }
        Ok(scaled * self.eigen.frame.adjoint())
    }

    /// Diagonal of the resolvent, `R_ii(ζ) = (1/2) Σ_k |w_k(i)|² / (λ_k − ζ)`.
    pub fn resolvent_diag(&self, zeta: Complex64) -> Result<DVector<Complex64>> {
        self.check_parameter(zeta)?;
        let mut diag = DVector::from_element(self.dim, Complex64::new(0.0, 0.0));
        for (k, &lambda) in self.eigen.paired_values.iter().enumerate() {
            let weight = 0.5 / (Complex64::new(lambda, 0.0) - zeta);
            for i in 0..self.dim {
                diag[i] += weight * self.eigen.frame[(i, k)].norm_sqr();
            }
        }
        Ok(diag)
    }
}

/// One-shot diagonal resolvent of `XX*` at a single spectral parameter.
pub fn resolvent_diag(x: &DMatrix<Complex64>, zeta: Complex64) -> Result<DVector<Complex64>> {
    GramEigen::new(x)?.resolvent_diag(zeta)
}
