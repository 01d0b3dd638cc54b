//! Shared dense kernels: realified Hermitian eigendecompositions, power
//! iteration, singular-value estimates, and small deterministic utilities.
//!
//! Complex Hermitian problems are *realified*: `H = A + iB` (with `A`
//! symmetric, `B` antisymmetric) maps to the symmetric real matrix
//! `[[A, −B], [B, A]]` of twice the dimension. Its spectrum is that of `H`
//! with every eigenvalue doubled, and a real eigenvector `(x, y)` maps to the
//! complex eigenvector `w = x + iy`. The full realified eigenbasis gives an
//! overcomplete complex frame with `Σ w w* = 2·P` per eigenspace, so spectral
//! sums (resolvents) carry an overall factor 1/2 and never need degeneracy
//! bookkeeping.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::defaults;
use crate::error::{Error, Result};

/// SplitMix64 avalanche finalizer; the crate's only source of "randomness"
/// (deterministic sign-vector streams, seed derivation in downstream crates).
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// A real matrix times a complex vector, via two real products.
pub fn real_mul_complex(m: &DMatrix<f64>, v: &DVector<Complex64>) -> DVector<Complex64> {
    let re = m * v.map(|c| c.re);
    let im = m * v.map(|c| c.im);
    DVector::from_fn(re.len(), |i, _| Complex64::new(re[i], im[i]))
}

/// The transpose of a real matrix times a complex vector.
pub fn real_tr_mul_complex(m: &DMatrix<f64>, v: &DVector<Complex64>) -> DVector<Complex64> {
    let re = m.tr_mul(&v.map(|c| c.re));
    let im = m.tr_mul(&v.map(|c| c.im));
    DVector::from_fn(re.len(), |i, _| Complex64::new(re[i], im[i]))
}

/// Realifies a complex matrix `M = A + iB` into `[[A, −B], [B, A]]`.
pub fn realify(m: &DMatrix<Complex64>) -> DMatrix<f64> {
    let (r, c) = m.shape();
    let mut out = DMatrix::zeros(2 * r, 2 * c);
    for j in 0..c {
        for i in 0..r {
            let z = m[(i, j)];
            out[(i, j)] = z.re;
            out[(i, j + c)] = -z.im;
            out[(i + r, j)] = z.im;
            out[(i + r, j + c)] = z.re;
        }
    }
    out
}

/// Symmetric eigendecomposition with eigenvalues sorted ascending.
pub fn sym_eigen_sorted(m: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let eig = m.clone().symmetric_eigen();
    let dim = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = DMatrix::zeros(dim, dim);
    for (dst, &src) in order.iter().enumerate() {
        vectors.column_mut(dst).copy_from(&eig.eigenvectors.column(src));
    }
    (values, vectors)
}

/// Eigen-decomposition of a complex Hermitian matrix through realification.
///
/// Returns all `2p` realified eigenvalues ascending (each true eigenvalue
/// appears twice) together with the `p×2p` matrix of complex images
/// `w_k = x_k + i y_k` of the real eigenvectors. Spectral sums must use the
/// frame factor 1/2:  `f(H) = (1/2) Σ_k f(λ_k) w_k w_k*`.
pub struct HermitianEigen {
    /// 2p eigenvalues, ascending, in exact pairs.
    pub paired_values: Vec<f64>,
    /// p×2p complex frame vectors (unit ℓ² norm each).
    pub frame: DMatrix<Complex64>,
}

impl HermitianEigen {
    pub fn new(h: &DMatrix<Complex64>) -> Result<Self> {
        let p = h.nrows();
        if h.ncols() != p {
            return Err(Error::dimension("Hermitian eigensolve needs a square matrix"));
        }
        let real = realify(h);
        let (values, vectors) = sym_eigen_sorted(&real);
        let mut frame = DMatrix::from_element(p, 2 * p, Complex64::new(0.0, 0.0));
        for k in 0..2 * p {
            for i in 0..p {
                frame[(i, k)] = Complex64::new(vectors[(i, k)], vectors[(p + i, k)]);
            }
        }
        Ok(HermitianEigen {
            paired_values: values,
            frame,
        })
    }

    /// The p distinct-slot eigenvalues (every other entry of the pairing).
    pub fn eigenvalues(&self) -> Vec<f64> {
        self.paired_values.iter().step_by(2).copied().collect()
    }
}

/// Power iteration for a symmetric positive semidefinite operator given as a
/// matrix-free application. Returns the top eigenvalue and a unit
/// eigenvector. Deterministic: starts from the supplied vector (or from the
/// uniform positive vector, appropriate for Perron problems).
pub fn power_iteration<F>(
    apply: F,
    dim: usize,
    start: Option<DVector<f64>>,
    rtol: f64,
    cap: usize,
) -> Result<(f64, DVector<f64>)>
where
    F: Fn(&DVector<f64>) -> DVector<f64>,
{
    let mut v = start.unwrap_or_else(|| DVector::from_element(dim, 1.0));
    let norm = v.norm();
    if norm == 0.0 {
        return Err(Error::precondition("power iteration started from zero"));
    }
    v /= norm;
    let mut lambda_prev = f64::INFINITY;
    for it in 0..cap {
        let mut w = apply(&v);
        let lambda = v.dot(&w);
        let wn = w.norm();
        if wn == 0.0 {
            // The operator annihilates the iterate: eigenvalue 0.
            return Ok((0.0, v));
        }
        w /= wn;
        let stalled = (lambda - lambda_prev).abs() <= rtol * lambda.abs().max(1e-300);
        v = w;
        if stalled && it > 2 {
            return Ok((lambda, v));
        }
        lambda_prev = lambda;
    }
    Err(Error::NoConvergence {
        iterations: cap,
        residual: f64::NAN,
    })
}

/// Top two eigenvalues of a symmetric PSD operator: power iteration plus a
/// deflated second pass (projection against the first eigenvector). Falls
/// back to the caller for small dense problems.
pub fn top_two_eigenvalues<F>(apply: F, dim: usize, cap: usize) -> Result<(f64, DVector<f64>, f64)>
where
    F: Fn(&DVector<f64>) -> DVector<f64>,
{
    let (l1, v1) = power_iteration(&apply, dim, None, defaults::POWER_ITER_RTOL, cap)?;
    // Deterministic second start: alternating signs, deflated.
    let mut start = DVector::from_fn(dim, |i, _| if i % 2 == 0 { 1.0 } else { -1.0 });
    let overlap = v1.dot(&start);
    start -= &v1 * overlap;
    if start.norm() < 1e-8 {
        // Extremely unlikely deterministic collision; perturb reproducibly.
        start = DVector::from_fn(dim, |i, _| {
            (splitmix64(i as u64) % 1024) as f64 / 1024.0 - 0.5
        });
        let overlap = v1.dot(&start);
        start -= &v1 * overlap;
    }
    let deflated = |x: &DVector<f64>| {
        let mut y = x.clone();
        let c = v1.dot(&y);
        y -= &v1 * c;
        let mut z = apply(&y);
        let c = v1.dot(&z);
        z -= &v1 * c;
        z
    };
    let (l2, _) = power_iteration(deflated, dim, Some(start), defaults::POWER_ITER_RTOL, cap)?;
    Ok((l1, v1, l2.max(0.0)))
}

/// Singular-value extremes of a complex matrix via its realified form (the
/// real singular values coincide with the complex ones, doubled in
/// multiplicity).
pub fn sigma_extremes(m: &DMatrix<Complex64>) -> (f64, f64) {
    let sv = realify(m).singular_values();
    let mut smax = 0.0_f64;
    let mut smin = f64::INFINITY;
    for &s in sv.iter() {
        smax = smax.max(s);
        smin = smin.min(s);
    }
    (smax, smin)
}

/// Estimates the smallest singular value of a square complex matrix by
/// alternating inverse applications of `M` and `M*` (inverse power iteration
/// on `M*M`), given a precomputed LU of `M`. Builds one extra LU for the
/// adjoint. Returns 0 when either factorization is singular.
pub fn smin_estimate(m: &DMatrix<Complex64>, lu: &nalgebra::LU<Complex64, nalgebra::Dyn, nalgebra::Dyn>, iters: usize) -> f64 {
    let n = m.nrows();
    let lu_adj = m.adjoint().lu();
    let mut x = DVector::from_fn(n, |i, _| {
        Complex64::new(1.0 + (i as f64) / n as f64, ((i * 7) % 3) as f64 * 0.25)
    });
    x /= Complex64::new(x.norm(), 0.0);
    let mut sigma = 0.0_f64;
    for _ in 0..iters {
        let y = match lu.solve(&x) {
            Some(y) => y,
            None => return 0.0,
        };
        let z = match lu_adj.solve(&y) {
            Some(z) => z,
            None => return 0.0,
        };
        let zn = z.norm();
        if zn == 0.0 || !zn.is_finite() {
            return 0.0;
        }
        // z = (M*M)⁻¹ x up to the previous normalization; the growth rate
        // converges to 1/σ_min².
        sigma = (1.0 / zn).sqrt();
        x = z / Complex64::new(zn, 0.0);
    }
    sigma
}

/// Strong connectivity of the bipartite support graph of a nonnegative
/// matrix: nodes are the `p` rows and `n` columns, with an edge where
/// `a_ik > 0`. Connectivity of this graph is equivalent to the simultaneous
/// irreducibility of `AAᵗ` and `AᵗA` (given no zero rows or columns, which
/// disconnection also detects).
pub fn bipartite_connected(a: &DMatrix<f64>) -> bool {
    let (p, n) = a.shape();
    let total = p + n;
    if total == 0 {
        return false;
    }
    let mut seen = vec![false; total];
    let mut stack = vec![0usize];
    seen[0] = true;
    while let Some(node) = stack.pop() {
        if node < p {
            for k in 0..n {
                if a[(node, k)] > 0.0 && !seen[p + k] {
                    seen[p + k] = true;
                    stack.push(p + k);
                }
            }
        } else {
            let k = node - p;
            for i in 0..p {
                if a[(i, k)] > 0.0 && !seen[i] {
                    seen[i] = true;
                    stack.push(i);
                }
            }
        }
    }
    seen.into_iter().all(|b| b)
}

/// Trapezoid quadrature over an increasing grid.
pub fn trapezoid(grid: &[f64], values: &[f64]) -> f64 {
    debug_assert_eq!(grid.len(), values.len());
    let mut acc = 0.0;
    for i in 1..grid.len() {
        acc += 0.5 * (values[i] + values[i - 1]) * (grid[i] - grid[i - 1]);
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn realified_eigen_recovers_complex_spectrum() {
        // H = [[2, i], [-i, 2]] has eigenvalues 1 and 3.
        let h = DMatrix::from_row_slice(
            2,
            2,
            &[
                Complex64::new(2.0, 0.0),
                Complex64::new(0.0, 1.0),
                Complex64::new(0.0, -1.0),
                Complex64::new(2.0, 0.0),
            ],
        );
        let eig = HermitianEigen::new(&h).unwrap();
        let vals = eig.eigenvalues();
        assert!((vals[0] - 1.0).abs() < 1e-12);
        assert!((vals[1] - 3.0).abs() < 1e-12);
        // Frame reconstruction: H = (1/2) Σ λ_k w_k w_k*.
        let mut rec = DMatrix::from_element(2, 2, Complex64::new(0.0, 0.0));
        for k in 0..4 {
            let w = eig.frame.column(k);
            let lam = eig.paired_values[k];
            for i in 0..2 {
                for j in 0..2 {
                    rec[(i, j)] += Complex64::new(0.5 * lam, 0.0) * w[i] * w[j].conj();
                }
            }
        }
        for i in 0..2 {
            for j in 0..2 {
                assert!((rec[(i, j)] - h[(i, j)]).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn power_iteration_finds_top_pair() {
        let m = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        let apply = |v: &DVector<f64>| &m * v;
        let (l1, v1, l2) = top_two_eigenvalues(apply, 2, 10_000).unwrap();
        assert!((l1 - 3.0).abs() < 1e-9);
        assert!((l2 - 1.0).abs() < 1e-9);
        assert!((v1[0].abs() - v1[1].abs()).abs() < 1e-6);
    }

    #[test]
    fn sigma_extremes_on_diagonal() {
        let m = DMatrix::from_row_slice(
            2,
            2,
            &[
                Complex64::new(3.0, 0.0),
                Complex64::new(0.0, 0.0),
                Complex64::new(0.0, 0.0),
                Complex64::new(0.0, 0.5),
            ],
        );
        let (smax, smin) = sigma_extremes(&m);
        assert!((smax - 3.0).abs() < 1e-12);
        assert!((smin - 0.5).abs() < 1e-12);
    }

    #[test]
    fn smin_estimate_tracks_exact_value() {
        let m = DMatrix::from_row_slice(
            2,
            2,
            &[
                Complex64::new(1.0, 0.2),
                Complex64::new(0.3, 0.0),
                Complex64::new(0.0, -0.4),
                Complex64::new(2.0, 0.0),
            ],
        );
        let (_, smin_exact) = sigma_extremes(&m);
        let lu = m.clone().lu();
        let est = smin_estimate(&m, &lu, 30);
        assert!((est - smin_exact).abs() < 1e-8 * smin_exact.max(1.0));
    }

    #[test]
    fn bipartite_connectivity() {
        let connected = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 1.0]);
        assert!(bipartite_connected(&connected));
        let disconnected = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1.0]);
        assert!(!bipartite_connected(&disconnected));
        let zero_row = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 0.0]);
        assert!(!bipartite_connected(&zero_row));
    }

    #[test]
    fn trapezoid_integrates_linear_exactly() {
        let grid = [0.0, 0.5, 2.0];
        let vals = [0.0, 1.0, 4.0];
        assert!((trapezoid(&grid, &vals) - 4.0).abs() < 1e-14);
    }
}
