//! Stability operators of the Dyson equation and the Rotation-Inversion bound.
//!
//! At a solved point `𝔐(z)` the *saturated* operator is
//! `𝔉(z)v = |𝔐| ∘ 𝔖(|𝔐| ∘ v)`; in block form it is `[[0, F],[Fᵗ, 0]]` with
//! `F = diag|M₁| · S · diag|M₂|`. Its operator norm obeys the exact identity
//! `‖𝔉‖₂ = 1 − Im z · ⟨𝔣, |𝔐|⟩ / ⟨𝔣, Im 𝔐 / |𝔐|⟩` where `𝔣` is the Perron
//! eigenvector, so `‖𝔉‖₂ < 1` strictly on the upper half-plane.
//!
//! The linearization of the Dyson map around a solution is controlled by
//! `𝔅(z)v = (|𝔐|²/𝔐²) ∘ v − 𝔉(z)v`; this module reports `‖𝔅⁻¹‖₂` and
//! `‖𝔅⁻¹‖_{∞→∞}`. Finally, `rotation_inversion_check` evaluates both sides
//! of the block-inverse bound
//! `‖[[U₁, A],[A*, U₂]]⁻¹‖₂ ≤ C / (Gap(AA*)·|1 − ‖A*A‖⟨v₁,U₁v₁⟩⟨v₂,U₂v₂⟩|)`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::Serialize;

use crate::avg::norm_2_to_inf;
use crate::defaults;
use crate::error::{Error, Result};
use crate::linalg::{
    bipartite_connected, power_iteration, sigma_extremes, smin_estimate, splitmix64,
    sym_eigen_sorted, top_two_eigenvalues,
};
use crate::profile::SymmetrizedProfile;
use crate::qve::{QveSolution, SpectralPoint};

/// The saturated stability operator `𝔉(z)` frozen at a solved point.
#[derive(Clone, Debug)]
pub struct SaturatedOperator {
    d1: DVector<f64>,
    d2: DVector<f64>,
    f_block: DMatrix<f64>,
    m_sym: DVector<Complex64>,
    point: SpectralPoint,
}

impl SaturatedOperator {
    pub fn p(&self) -> usize {
        self.d1.len()
    }

    pub fn n(&self) -> usize {
        self.d2.len()
    }

    pub fn dim(&self) -> usize {
        self.d1.len() + self.d2.len()
    }

    /// The rectangular block `F = diag|M₁| · S · diag|M₂|` (p×n).
    pub fn block(&self) -> &DMatrix<f64> {
        &self.f_block
    }

    /// The spectral point the operator was built at.
    pub fn point(&self) -> SpectralPoint {
        self.point
    }

    /// The solution vector `𝔐` the operator was built from.
    pub fn m_sym(&self) -> &DVector<Complex64> {
        &self.m_sym
    }

    /// Applies `𝔉v = (F v₂, Fᵗ v₁)` to a real vector of length p+n.
    pub fn apply(&self, v: &DVector<f64>) -> DVector<f64> {
        let (p, n) = (self.p(), self.n());
        debug_assert_eq!(v.len(), p + n);
        let v1 = v.rows(0, p).into_owned();
        let v2 = v.rows(p, n).into_owned();
        let top = &self.f_block * v2;
        let bottom = self.f_block.tr_mul(&v1);
        let mut out = DVector::zeros(p + n);
        out.rows_mut(0, p).copy_from(&top);
        out.rows_mut(p, n).copy_from(&bottom);
        out
    }

    /// Dense symmetric matrix `[[0, F],[Fᵗ, 0]]`.
    pub fn dense(&self) -> DMatrix<f64> {
        let (p, n) = (self.p(), self.n());
        let mut out = DMatrix::zeros(p + n, p + n);
        out.view_mut((0, p), (p, n)).copy_from(&self.f_block);
        out.view_mut((p, 0), (n, p))
            .copy_from(&self.f_block.transpose());
        out
    }
}

/// Builds `𝔉(z)` from a solved point: `F = diag|M₁| · S · diag|M₂|`.
pub fn build_f(sym: &SymmetrizedProfile, solution: &QveSolution) -> SaturatedOperator {
    let (p, n) = (sym.p(), sym.n());
    debug_assert_eq!(solution.m_sym.len(), p + n);
    let d1 = DVector::from_fn(p, |i, _| solution.m_sym[i].norm());
    let d2 = DVector::from_fn(n, |k, _| solution.m_sym[p + k].norm());
    let s = sym.s();
    let f_block = DMatrix::from_fn(p, n, |i, k| d1[i] * s[(i, k)] * d2[k]);
    SaturatedOperator {
        d1,
        d2,
        f_block,
        m_sym: solution.m_sym.clone(),
        point: solution.point,
    }
}

/// Computes `‖𝔉‖₂` and the positive Perron eigenvector `𝔣 = (f₁, f₂)/√2`
/// (unit standard ℓ² norm), then verifies the exact norm identity to 10⁻⁸.
///
/// `tol` is the relative Rayleigh-quotient tolerance of the power iteration.
pub fn perron(opr: &SaturatedOperator, tol: f64) -> Result<(f64, DVector<f64>)> {
    let (p, n) = (opr.p(), opr.n());
    let f = &opr.f_block;
    let apply = |x: &DVector<f64>| -> DVector<f64> { f * f.tr_mul(x) };
    let (lambda, mut f1) =
        power_iteration(apply, p, None, tol, defaults::POWER_ITER_CAP)?;
    if lambda <= 0.0 {
        return Err(Error::precondition(
            "saturated operator has zero norm (degenerate profile)",
        ));
    }
    let sigma = lambda.sqrt();
    if f1.sum() < 0.0 {
        f1.neg_mut();
    }
    let f2 = f.tr_mul(&f1) / sigma;
    let inv_sqrt2 = std::f64::consts::FRAC_1_SQRT_2;
    let mut fv = DVector::zeros(p + n);
    fv.rows_mut(0, p).copy_from(&(&f1 * inv_sqrt2));
    fv.rows_mut(p, n).copy_from(&(&f2 * inv_sqrt2));

    let deviation = norm_identity_deviation(opr, sigma, &fv);
    if deviation > defaults::NORM_IDENTITY_TOL {
        return Err(Error::IdentityViolation {
            name: "saturated-operator norm identity",
            deviation,
            tolerance: defaults::NORM_IDENTITY_TOL,
        });
    }
    Ok((sigma, fv))
}

/// Deviation `|‖𝔉‖ − (1 − Im z·⟨𝔣,|𝔐|⟩/⟨𝔣, Im 𝔐/|𝔐|⟩)|` of the exact norm
/// identity. The ratio of inner products is normalization-independent.
pub fn norm_identity_deviation(
    opr: &SaturatedOperator,
    norm_f: f64,
    f: &DVector<f64>,
) -> f64 {
    let z = opr.point.z_sym();
    let mut num = 0.0;
    let mut den = 0.0;
    for x in 0..opr.dim() {
        let a = opr.m_sym[x].norm();
        num += f[x] * a;
        den += f[x] * opr.m_sym[x].im / a;
    }
    (norm_f - (1.0 - z.im * num / den)).abs()
}

/// The antisymmetric partner `𝔣₋ = (f₁, −f₂)/√2` with `𝔉𝔣₋ = −‖𝔉‖𝔣₋`.
pub fn perron_antisymmetric(opr: &SaturatedOperator, f: &DVector<f64>) -> DVector<f64> {
    let (p, n) = (opr.p(), opr.n());
    let mut out = f.clone();
    out.rows_mut(p, n).neg_mut();
    out
}

/// Spectral gap `Gap(FFᵗ) = λ₁ − λ₂` of the p×p block product. Degenerate
/// top eigenvalues give gap 0; for p = 1 the convention `max ∅ = 0` gives
/// `Gap = λ₁`.
pub fn spectral_gap(opr: &SaturatedOperator) -> Result<f64> {
    let p = opr.p();
    let f = &opr.f_block;
    if p == 1 {
        let row = f.row(0);
        return Ok(row.iter().map(|v| v * v).sum());
    }
    if p <= defaults::DENSE_EIG_DIM_CAP {
        let ff_t = f * f.transpose();
        let (vals, _) = sym_eigen_sorted(&ff_t);
        Ok((vals[p - 1] - vals[p - 2]).max(0.0))
    } else {
        let apply = |x: &DVector<f64>| -> DVector<f64> { f * f.tr_mul(x) };
        let (l1, _, l2) = top_two_eigenvalues(apply, p, defaults::POWER_ITER_CAP)?;
        Ok((l1 - l2).max(0.0))
    }
}

/// Stability summary at a solved point.
#[derive(Clone, Debug, Serialize)]
pub struct StabilityReport {
    /// `‖𝔉(z)‖₂`, strictly below 1 for Im z > 0.
    pub norm_f: f64,
    /// Positive Perron eigenvector `𝔣` (standard ℓ²-unit, length p+n).
    pub f: Vec<f64>,
    /// `Gap(FFᵗ)` of the rectangular block.
    pub gap_fft: f64,
    /// `‖𝔅(z)⁻¹‖₂`.
    pub norm_b_inv_2: f64,
    /// `‖𝔅(z)⁻¹‖_{∞→∞}` (exact for p+n ≤ 1000, else a sign-vector estimate).
    pub norm_b_inv_inf: f64,
    /// The spectral point of the underlying solution.
    pub z: SpectralPoint,
}

/// Builds `𝔅(z) = diag(|𝔐|²/𝔐²) − 𝔉(z)` and reports its inverse's norms
/// together with the Perron data of `𝔉`.
///
/// For p+n ≤ 1000 the inverse is formed densely: `‖𝔅⁻¹‖_∞` is the exact
/// maximum row ℓ¹ norm and `‖𝔅⁻¹‖₂` comes from power iteration on
/// `𝔅⁻¹𝔅⁻ᴴ`. Beyond that cap both norms are lower-bound estimates (inverse
/// power iteration for σ_min, 20 deterministic sign vectors for the ∞-norm).
pub fn build_b_and_invert(
    opr: &SaturatedOperator,
    solution: &QveSolution,
) -> Result<StabilityReport> {
    let dim = opr.dim();
    if solution.m_sym.len() != dim {
        return Err(Error::dimension(format!(
            "solution has length {}, operator has dimension {dim}",
            solution.m_sym.len()
        )));
    }
    let (norm_f, f) = perron(opr, defaults::POWER_ITER_RTOL)?;
    let gap_fft = spectral_gap(opr)?;

    // 𝔅 = diag((conj m / |m|)²) − 𝔉, a complex symmetric matrix.
    let mut b = opr.dense().map(|v| Complex64::new(-v, 0.0));
    for x in 0..dim {
        let m = solution.m_sym[x];
        let u = m.conj() / m.norm();
        b[(x, x)] += u * u;
    }

    let (norm_b_inv_2, norm_b_inv_inf) = if dim <= defaults::B_INV_EXACT_DIM_CAP {
        let binv = b
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::Singular("𝔅 is singular at this point".into()))?;
        if binv.iter().any(|v| !v.is_finite()) {
            return Err(Error::Singular("𝔅 inverse overflowed".into()));
        }
        let inf = (0..dim)
            .map(|x| binv.row(x).iter().map(|v| v.norm()).sum::<f64>())
            .fold(0.0_f64, f64::max);
        let binv_h = binv.adjoint();
        let apply = |x: &DVector<Complex64>| -> DVector<Complex64> { &binv * (&binv_h * x) };
        let lambda = top_eig_hermitian(apply, dim)?;
        (lambda.max(0.0).sqrt(), inf)
    } else {
        let lu = b.clone().lu();
        let smin = smin_estimate(&b, &lu, 30);
        if smin <= 0.0 {
            return Err(Error::Singular("𝔅 is singular at this point".into()));
        }
        let mut inf = 0.0_f64;
        let mut state = 0x5eed_b0a7_u64;
        for _ in 0..defaults::B_INV_SIGN_VECTORS {
            let s = DVector::from_fn(dim, |_, _| {
                state = splitmix64(state);
                if state & 1 == 0 {
                    Complex64::new(1.0, 0.0)
                } else {
                    Complex64::new(-1.0, 0.0)
                }
            });
            if let Some(x) = lu.solve(&s) {
                inf = inf.max(x.iter().map(|v| v.norm()).fold(0.0_f64, f64::max));
            }
        }
        (1.0 / smin, inf)
    };

    Ok(StabilityReport {
        norm_f,
        f: f.iter().copied().collect(),
        gap_fft,
        norm_b_inv_2,
        norm_b_inv_inf,
        z: solution.point,
    })
}

/// Diagonal-lemma upper bound `(inf|D|)⁻¹(1 + ‖𝔉‖_{2→∞}·‖𝔅⁻¹‖₂)` on
/// `‖𝔅⁻¹‖_∞`; here `|D| = 1` identically, and the 2→∞ norm uses the
/// normalized ℓ² convention.
pub fn b_inv_inf_bound(opr: &SaturatedOperator, norm_b_inv_2: f64) -> f64 {
    1.0 + norm_2_to_inf(&opr.dense()) * norm_b_inv_2
}

/// Power iteration for the top eigenvalue of a Hermitian PSD complex
/// operator, with Rayleigh-quotient stagnation stopping.
fn top_eig_hermitian<F>(apply: F, dim: usize) -> Result<f64>
where
    F: Fn(&DVector<Complex64>) -> DVector<Complex64>,
{
    let mut state = 0x00c0_ffee_u64;
    let mut v = DVector::from_fn(dim, |_, _| {
        state = splitmix64(state);
        let re = 1.0 + (state >> 11) as f64 / (1u64 << 53) as f64;
        state = splitmix64(state);
        let im = (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5;
        Complex64::new(re, im)
    });
    v /= Complex64::new(v.norm(), 0.0);
    let mut lambda_prev = f64::INFINITY;
    for it in 1..=defaults::POWER_ITER_CAP {
        let w = apply(&v);
        let lambda = v.dotc(&w).re;
        let wn = w.norm();
        if wn == 0.0 {
            return Ok(0.0);
        }
        v = w / Complex64::new(wn, 0.0);
        let scale = lambda.abs().max(1e-300);
        if it > 2 && (lambda - lambda_prev).abs() <= defaults::POWER_ITER_RTOL * scale {
            return Ok(lambda);
        }
        lambda_prev = lambda;
    }
    Err(Error::NoConvergence {
        iterations: defaults::POWER_ITER_CAP,
        residual: f64::NAN,
    })
}

/// An instance of the Rotation-Inversion bound: unitary diagonal blocks
/// `U₁` (p×p), `U₂` (n×n) and a nonnegative coupling block `A` (p×n).
#[derive(Clone, Debug)]
pub struct RotationInversionInstance {
    pub u1: DMatrix<Complex64>,
    pub u2: DMatrix<Complex64>,
    pub a: DMatrix<f64>,
}

/// Both sides of the Rotation-Inversion bound for one instance.
#[derive(Clone, Debug, Serialize)]
pub struct RotationInversionOutcome {
    /// `‖[[U₁, A],[A*, U₂]]⁻¹‖₂`; infinite when the block matrix is singular.
    pub lhs: f64,
    /// `Gap(AA*) · |1 − ‖A*A‖·⟨v₁,U₁v₁⟩·⟨v₂,U₂v₂⟩|`.
    pub rhs_core: f64,
    /// `lhs · rhs_core`, the quantity bounded by a universal constant
    /// (0 by convention on singular instances, where `rhs_core = 0`).
    pub ratio: f64,
    /// Whether the block matrix was numerically singular
    /// (condition number above 10¹²).
    pub singular: bool,
}

impl RotationInversionInstance {
    pub fn new(
        u1: DMatrix<Complex64>,
        u2: DMatrix<Complex64>,
        a: DMatrix<f64>,
    ) -> Result<Self> {
        let (p, n) = a.shape();
        if u1.shape() != (p, p) || u2.shape() != (n, n) {
            return Err(Error::dimension(format!(
                "A is {p}×{n} but U₁ is {:?} and U₂ is {:?}",
                u1.shape(),
                u2.shape()
            )));
        }
        for block in [&u1, &u2] {
            let k = block.nrows();
            let gram = block.adjoint() * block;
            let dev = (0..k)
                .flat_map(|i| (0..k).map(move |j| (i, j)))
                .map(|(i, j)| {
                    let target = if i == j { 1.0 } else { 0.0 };
                    (gram[(i, j)] - Complex64::new(target, 0.0)).norm()
                })
                .fold(0.0_f64, f64::max);
            if dev > 1e-8 {
                return Err(Error::precondition(format!(
                    "diagonal block is not unitary (deviation {dev:.2e})"
                )));
            }
        }
        if a.iter().any(|&v| v < 0.0 || !v.is_finite()) {
            return Err(Error::precondition("A must be entrywise nonnegative"));
        }
        if !bipartite_connected(&a) {
            return Err(Error::precondition(
                "AA* and A*A must be irreducible (support graph is disconnected)",
            ));
        }
        Ok(RotationInversionInstance { u1, u2, a })
    }
}

/// Evaluates one Rotation-Inversion instance: the exact block-inverse norm
/// on the left and the gap/overlap expression on the right.
///
/// Errors with `IdentityViolation` if the block matrix is singular while
/// `rhs_core` stays above the zero threshold — that would contradict the
/// singularity characterization and must never occur.
pub fn rotation_inversion_check(
    instance: &RotationInversionInstance,
) -> Result<RotationInversionOutcome> {
    let a = &instance.a;
    let (p, n) = a.shape();

    // Perron data of AAᵗ: top two eigenvalues and the positive top vector.
    let aat = a * a.transpose();
    let (vals, vecs) = sym_eigen_sorted(&aat);
    let lambda1 = vals[p - 1];
    if lambda1 <= 0.0 {
        return Err(Error::precondition("A vanishes identically"));
    }
    if lambda1 > 1.0 + 1e-9 {
        return Err(Error::precondition(format!(
            "‖A*A‖ = {lambda1} exceeds 1"
        )));
    }
    let norm_a_star_a = lambda1.min(1.0);
    let gap = if p == 1 {
        lambda1
    } else {
        (lambda1 - vals[p - 2]).max(0.0)
    };
    let sigma1 = lambda1.sqrt();
    let mut v1 = vecs.column(p - 1).into_owned();
    if v1.sum() < 0.0 {
        v1.neg_mut();
    }
    let v2 = a.tr_mul(&v1) / sigma1;

    let overlap = |u: &DMatrix<Complex64>, v: &DVector<f64>| -> Complex64 {
        let vc = v.map(|x| Complex64::new(x, 0.0));
        vc.dotc(&(u * &vc))
    };
    let o1 = overlap(&instance.u1, &v1);
    let o2 = overlap(&instance.u2, &v2);
    let rhs_core = gap * (Complex64::new(1.0, 0.0) - norm_a_star_a * o1 * o2).norm();

    // Dense block matrix [[U₁, A],[Aᵗ, U₂]] and its extreme singular values.
    let dim = p + n;
    let mut k = DMatrix::from_element(dim, dim, Complex64::new(0.0, 0.0));
    k.view_mut((0, 0), (p, p)).copy_from(&instance.u1);
    k.view_mut((p, p), (n, n)).copy_from(&instance.u2);
    for i in 0..p {
        for j in 0..n {
            k[(i, p + j)] = Complex64::new(a[(i, j)], 0.0);
            k[(p + j, i)] = Complex64::new(a[(i, j)], 0.0);
        }
    }
    let (smax, smin) = sigma_extremes(&k);
    let singular = smin <= smax / defaults::RI_SINGULAR_COND;
    let rhs_zero = rhs_core < defaults::RI_RHS_ZERO;
    if singular && !rhs_zero {
        return Err(Error::IdentityViolation {
            name: "rotation-inversion singularity characterization",
            deviation: rhs_core,
            tolerance: defaults::RI_RHS_ZERO,
        });
    }
    let lhs = if singular { f64::INFINITY } else { 1.0 / smin };
    let ratio = if singular { 0.0 } else { lhs * rhs_core };
    Ok(RotationInversionOutcome {
        lhs,
        rhs_core,
        ratio,
        singular,
    })
}
