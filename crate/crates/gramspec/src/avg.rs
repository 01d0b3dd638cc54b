//! Normalized averaging and norm conventions.
//!
//! Vector norms and averages are *normalized by the vector length*:
//!
//! * `⟨w⟩ = N⁻¹ Σ_x w_x` (average),
//! * `⟨v, w⟩ = N⁻¹ Σ_x conj(v_x) w_x` (normalized inner product),
//! * `‖w‖₂ = sqrt(N⁻¹ Σ_x |w_x|²)` (normalized ℓ² norm),
//! * `‖w‖_∞ = max_x |w_x|` (unchanged by normalization).
//!
//! Operator norms follow from these: the induced 2-norm and the ∞→∞ norm of
//! a square operator are the same as the classical ones (the normalization
//! cancels), but the mixed 2→∞ norm picks up a factor:
//! `‖A‖_{2→∞} = max_x sqrt(N · Σ_y |A_xy|²)` where `N` is the *domain*
//! length. Helpers that depend on this convention live here so the factor is
//! written exactly once.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

/// Normalized average of a real vector: `⟨w⟩ = N⁻¹ Σ w_x`.
pub fn avg(v: &DVector<f64>) -> f64 {
    v.sum() / v.len() as f64
}

/// Normalized average of a complex vector.
pub fn avg_c(v: &DVector<Complex64>) -> Complex64 {
    v.sum() / Complex64::new(v.len() as f64, 0.0)
}

/// Normalized inner product `⟨v, w⟩ = N⁻¹ Σ conj(v_x) w_x`.
pub fn inner_c(v: &DVector<Complex64>, w: &DVector<Complex64>) -> Complex64 {
    debug_assert_eq!(v.len(), w.len());
    let mut s = Complex64::new(0.0, 0.0);
    for (a, b) in v.iter().zip(w.iter()) {
        s += a.conj() * b;
    }
    s / Complex64::new(v.len() as f64, 0.0)
}

/// Normalized ℓ² norm `sqrt(N⁻¹ Σ |w_x|²)` of a real vector.
pub fn norm2(v: &DVector<f64>) -> f64 {
    (v.iter().map(|x| x * x).sum::<f64>() / v.len() as f64).sqrt()
}

/// Normalized ℓ² norm of a complex vector.
pub fn norm2_c(v: &DVector<Complex64>) -> f64 {
    (v.iter().map(|x| x.norm_sqr()).sum::<f64>() / v.len() as f64).sqrt()
}

/// Sup norm of a real vector.
pub fn norm_inf(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

/// Sup norm of a complex vector.
pub fn norm_inf_c(v: &DVector<Complex64>) -> f64 {
    v.iter().fold(0.0_f64, |m, x| m.max(x.norm()))
}

/// Mixed 2→∞ norm of a real matrix under the normalized-domain convention:
/// `max_x sqrt(N · Σ_y A_xy²)` with `N = ncols` (the domain length).
pub fn norm_2_to_inf(a: &DMatrix<f64>) -> f64 {
    let n = a.ncols() as f64;
    let mut best = 0.0_f64;
    for r in 0..a.nrows() {
        let row_sq: f64 = a.row(r).iter().map(|x| x * x).sum();
        best = best.max((n * row_sq).sqrt());
    }
    best
}

/// ∞→∞ operator norm (maximal unnormalized absolute row sum).
pub fn norm_inf_op(a: &DMatrix<f64>) -> f64 {
    let mut best = 0.0_f64;
    for r in 0..a.nrows() {
        let s: f64 = a.row(r).iter().map(|x| x.abs()).sum();
        best = best.max(s);
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn averages_and_norms_use_length_normalization() {
        let v = DVector::from_vec(vec![1.0, 3.0]);
        assert_eq!(avg(&v), 2.0);
        assert!((norm2(&v) - (5.0_f64).sqrt()).abs() < 1e-15);
        assert_eq!(norm_inf(&v), 3.0);
    }

    #[test]
    fn mixed_norm_carries_domain_factor() {
        // A = [1 1] as a map ℂ² → ℂ¹: ‖A‖_{2→∞} = sqrt(2·(1+1)) = 2, which
        // is attained at w = (1,1) with ‖w‖₂ = 1 under the normalization.
        let a = DMatrix::from_row_slice(1, 2, &[1.0, 1.0]);
        assert!((norm_2_to_inf(&a) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn complex_inner_product_conjugates_left() {
        let v = DVector::from_vec(vec![Complex64::new(0.0, 1.0)]);
        let w = DVector::from_vec(vec![Complex64::new(0.0, 1.0)]);
        let ip = inner_c(&v, &w);
        assert!((ip.re - 1.0).abs() < 1e-15 && ip.im.abs() < 1e-15);
    }
}
