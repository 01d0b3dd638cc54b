//! The vector Dyson equation `−1/𝔐 = z + 𝔖𝔐` and Stieltjes inversion.
//!
//! For a profile `S`, the symmetrized equation on `ℂ^{p+n}` splits into
//! `−1/M₁ = z + S M₂` and `−1/M₂ = z + Sᵗ M₁`; `𝔐 = (M₁, M₂)` is the
//! Stieltjes transform (componentwise) of symmetric measures on `[−2√s*, 2√s*]`.
//! The Gram-plane solution is recovered through `ζ = z²` (branch `Im √ζ > 0`):
//! `m(ζ) = M₁(√ζ)/√ζ` solves `−1/m = ζ(1 + S m₂)` and its averaged imaginary
//! part recovers the eigenvalue density of `XX*`.
//!
//! The solver is a damped fixed point `𝔐 ← (1−α)𝔐 + α·(−1/(z+𝔖𝔐))` with an
//! adaptive damping factor; the map preserves the upper half-plane, so
//! positivity of `Im 𝔐` is structural, not enforced.

use nalgebra::DVector;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::defaults;
use crate::error::{Error, Result};
use crate::linalg::trapezoid;
use crate::profile::{SymScratch, SymmetrizedProfile, VarianceProfile};

/// Which spectral plane a point lives in: the symmetrized plane (`z`, where
/// the equation is solved) or the Gram plane (`ζ = z²`, where `XX*` lives).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Plane {
    Sym,
    Gram,
}

/// A spectral parameter in the open upper half-plane, tagged with its plane.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct SpectralPoint {
    pub value: Complex64,
    pub plane: Plane,
}

impl SpectralPoint {
    /// A point `z` in the symmetrized plane; `Im z > 0` required.
    pub fn sym(z: Complex64) -> Result<Self> {
        if z.im <= 0.0 || !z.is_finite() {
            return Err(Error::NotUpperHalfPlane(z));
        }
        Ok(SpectralPoint {
            value: z,
            plane: Plane::Sym,
        })
    }

    /// A point `ζ` in the Gram plane; `Im ζ > 0` required.
    pub fn gram(zeta: Complex64) -> Result<Self> {
        if zeta.im <= 0.0 || !zeta.is_finite() {
            return Err(Error::NotUpperHalfPlane(zeta));
        }
        Ok(SpectralPoint {
            value: zeta,
            plane: Plane::Gram,
        })
    }

    /// The symmetrized-plane parameter: `z` itself, or `√ζ` with the branch
    /// `Im √ζ > 0` (the principal square root, since `Im ζ > 0`).
    pub fn z_sym(&self) -> Complex64 {
        match self.plane {
            Plane::Sym => self.value,
            Plane::Gram => self.value.sqrt(),
        }
    }

    /// The Gram-plane parameter `ζ = z²`.
    pub fn zeta(&self) -> Complex64 {
        match self.plane {
            Plane::Sym => self.value * self.value,
            Plane::Gram => self.value,
        }
    }
}

/// A solved point of the vector Dyson equation.
#[derive(Clone, Debug)]
pub struct QveSolution {
    /// The solution vector `𝔐 = (M₁, M₂)` of length `p+n` at `z_sym`.
    pub m_sym: DVector<Complex64>,
    /// Fixed-point residual `‖𝔐 + 1/(z + 𝔖𝔐)‖_∞` at return.
    pub residual_inf: f64,
    /// Number of fixed-point map evaluations used.
    pub iterations: usize,
    /// The spectral point this was solved at (as requested by the caller).
    pub point: SpectralPoint,
    p: usize,
    n: usize,
}

impl QveSolution {
    /// First block `M₁` (length p).
    pub fn m1(&self) -> DVector<Complex64> {
        DVector::from_iterator(self.p, self.m_sym.iter().take(self.p).copied())
    }

    /// Second block `M₂` (length n).
    pub fn m2(&self) -> DVector<Complex64> {
        DVector::from_iterator(self.n, self.m_sym.iter().skip(self.p).copied())
    }

    /// Gram-plane solution `m(ζ) = M₁(z)/z`.
    pub fn gram_m(&self) -> DVector<Complex64> {
        let z = self.point.z_sym();
        self.m1().map(|v| v / z)
    }

    /// Gram-plane second block `m₂(ζ) = M₂(z)/z`.
    pub fn gram_m2(&self) -> DVector<Complex64> {
        let z = self.point.z_sym();
        self.m2().map(|v| v / z)
    }

    /// Normalized average `⟨m(ζ)⟩` over the first block.
    pub fn avg_gram_m(&self) -> Complex64 {
        let z = self.point.z_sym();
        let sum: Complex64 = self.m_sym.iter().take(self.p).sum();
        sum / (z * self.p as f64)
    }

    /// Residuals of the two split Gram-plane equations
    /// `−1/m = ζ(1 + S m₂)` and `−1/m₂ = ζ(1 + Sᵗ m)`, sup norm.
    pub fn gram_residual(&self, sym: &SymmetrizedProfile) -> f64 {
        let zeta = self.point.zeta();
        let m = self.gram_m();
        let m2 = self.gram_m2();
        let s_m2 = crate::linalg::real_mul_complex(sym.s(), &m2);
        let st_m = crate::linalg::real_mul_complex(sym.st(), &m);
        let mut worst = 0.0_f64;
        for i in 0..m.len() {
            let r = -1.0 / m[i] - zeta * (Complex64::new(1.0, 0.0) + s_m2[i]);
            worst = worst.max(r.norm());
        }
        for k in 0..m2.len() {
            let r = -1.0 / m2[k] - zeta * (Complex64::new(1.0, 0.0) + st_m[k]);
            worst = worst.max(r.norm());
        }
        worst
    }
}

/// Solves the symmetrized equation at `z` (upper half-plane) to the requested
/// fixed-point residual. Deterministic; an optional warm start reuses a
/// previous solution vector.
pub fn solve_at(
    sym: &SymmetrizedProfile,
    z: Complex64,
    tol: f64,
    warm_start: Option<&QveSolution>,
) -> Result<QveSolution> {
    let point = SpectralPoint::sym(z)?;
    let init = match warm_start {
        Some(sol) => sol.m_sym.clone(),
        None => cold_start(sym.dim(), z),
    };
    solve_from(sym, point, tol, init)
}

/// Solves in the Gram plane at `ζ` and returns the solution tagged with the
/// Gram point (accessors `gram_m`/`gram_m2` give `m(ζ)`, `m₂(ζ)`).
pub fn solve_gram_at(
    sym: &SymmetrizedProfile,
    zeta: Complex64,
    tol: f64,
) -> Result<QveSolution> {
    let point = SpectralPoint::gram(zeta)?;
    let init = cold_start(sym.dim(), point.z_sym());
    solve_from(sym, point, tol, init)
}

/// The leading Laurent behavior `𝔐 ≈ −1/z` of a Stieltjes transform.
fn cold_start(dim: usize, z: Complex64) -> DVector<Complex64> {
    DVector::from_element(dim, -1.0 / z)
}

/// Damped fixed-point iteration from an explicit initial vector.
fn solve_from(
    sym: &SymmetrizedProfile,
    point: SpectralPoint,
    tol: f64,
    init: DVector<Complex64>,
) -> Result<QveSolution> {
    if tol <= 0.0 {
        return Err(Error::precondition("tolerance must be positive"));
    }
    let dim = sym.dim();
    debug_assert_eq!(init.len(), dim);
    let z = point.z_sym();
    let mut m = init;
    let mut w = DVector::from_element(dim, Complex64::new(0.0, 0.0));
    let mut phi = DVector::from_element(dim, Complex64::new(0.0, 0.0));
    let mut scratch = SymScratch::new(sym.p(), sym.n());

    let mut alpha = defaults::ALPHA_INIT;
    let mut res_prev = f64::INFINITY;
    let mut res_best = f64::INFINITY;

    for it in 1..=defaults::QVE_MAX_ITERS {
        sym.apply_complex(&m, &mut w, &mut scratch);
        let mut res = 0.0_f64;
        for x in 0..dim {
            let px = -1.0 / (z + w[x]);
            phi[x] = px;
            res = res.max((m[x] - px).norm());
        }
        if res <= tol {
            return Ok(QveSolution {
                m_sym: m,
                residual_inf: res,
                iterations: it,
                point,
                p: sym.p(),
                n: sym.n(),
            });
        }
        if res > res_prev {
            alpha = (alpha * defaults::ALPHA_SHRINK).max(defaults::ALPHA_MIN);
        } else {
            alpha = (alpha * defaults::ALPHA_GROW).min(defaults::ALPHA_MAX);
        }
        res_prev = res;
        res_best = res_best.min(res);
        let one_minus = 1.0 - alpha;
        for x in 0..dim {
            m[x] = m[x] * one_minus + phi[x] * alpha;
        }
    }
    Err(Error::NoConvergence {
        iterations: defaults::QVE_MAX_ITERS,
        residual: res_best,
    })
}

/// Residual of the perturbed equation for an arbitrary candidate `𝔤`:
/// `‖−1/𝔤 − z − 𝔖𝔤‖_∞`. Errors on zero components.
pub fn residual(
    sym: &SymmetrizedProfile,
    candidate: &DVector<Complex64>,
    point: &SpectralPoint,
) -> Result<f64> {
    if candidate.len() != sym.dim() {
        return Err(Error::dimension(format!(
            "candidate has length {}, expected {}",
            candidate.len(),
            sym.dim()
        )));
    }
    for (i, c) in candidate.iter().enumerate() {
        if c.norm() == 0.0 {
            return Err(Error::ZeroComponent(i));
        }
    }
    let z = point.z_sym();
    let w = sym.apply_complex_alloc(candidate);
    let mut worst = 0.0_f64;
    for x in 0..candidate.len() {
        let d = -1.0 / candidate[x] - z - w[x];
        worst = worst.max(d.norm());
    }
    Ok(worst)
}

/// Solves the η-chain `ζ = ω + iη` for a decreasing ladder of η at fixed ω:
/// cold start at the top, warm starts (with linear extrapolation in η once
/// two rungs exist) below. Returns one solution per rung.
pub fn solve_eta_chain(
    sym: &SymmetrizedProfile,
    omega: f64,
    etas: &[f64],
    tol: f64,
) -> Result<Vec<QveSolution>> {
    if etas.is_empty() {
        return Err(Error::precondition("empty η ladder"));
    }
    if etas.windows(2).any(|w| w[1] >= w[0]) || etas[etas.len() - 1] <= 0.0 {
        return Err(Error::precondition("η ladder must be positive decreasing"));
    }
    let mut out: Vec<QveSolution> = Vec::with_capacity(etas.len());
    for (k, &eta) in etas.iter().enumerate() {
        let point = SpectralPoint::gram(Complex64::new(omega, eta))?;
        let init = match k {
            0 => cold_start(sym.dim(), point.z_sym()),
            1 => out[0].m_sym.clone(),
            _ => {
                // Linear extrapolation of 𝔐 in η from the previous two rungs.
                let (ea, eb) = (etas[k - 2], etas[k - 1]);
                let t = (eta - eb) / (eb - ea);
                let (ma, mb) = (&out[k - 2].m_sym, &out[k - 1].m_sym);
                DVector::from_fn(sym.dim(), |i, _| mb[i] + (mb[i] - ma[i]) * t)
            }
        };
        out.push(solve_from(sym, point, tol, init)?);
    }
    Ok(out)
}

/// The inverted measure: a point mass at zero plus a density on a grid.
#[derive(Clone, Debug, Serialize)]
pub struct DensityCurve {
    /// Increasing grid of ω > 0.
    pub grid: Vec<f64>,
    /// Extrapolated density values π(ω) ≥ 0.
    pub values: Vec<f64>,
    /// Mass of the atom at zero: 0 for p ≤ n, 1 − n/p for p > n.
    pub point_mass: f64,
    /// Closed intervals where π exceeds the support threshold.
    pub support_intervals: Vec<(f64, f64)>,
    /// Smallest η of the extrapolation ladder.
    pub eta_used: f64,
    /// Indices of grid points where the extrapolation failed or diverged
    /// (their `values` entry is a clamped best effort).
    pub flagged: Vec<usize>,
}

impl DensityCurve {
    /// Total mass `π* + ∫ π dω` by trapezoid quadrature on the grid.
    pub fn total_mass(&self) -> f64 {
        self.point_mass + trapezoid(&self.grid, &self.values)
    }

    /// CDF `F(τ) = π* + ∫_{ω ≤ τ} π dω` by cumulative trapezoid on the grid
    /// (the grid is assumed to start at the support's left end or below).
    pub fn cdf(&self, tau: f64) -> f64 {
        let mut acc = self.point_mass;
        for i in 1..self.grid.len() {
            if self.grid[i] <= tau {
                acc += 0.5 * (self.values[i] + self.values[i - 1])
                    * (self.grid[i] - self.grid[i - 1]);
            } else {
                // Partial last cell, linearly interpolated.
                if self.grid[i - 1] < tau {
                    let t = (tau - self.grid[i - 1]) / (self.grid[i] - self.grid[i - 1]);
                    let v_tau = self.values[i - 1] + (self.values[i] - self.values[i - 1]) * t;
                    acc += 0.5 * (self.values[i - 1] + v_tau) * (tau - self.grid[i - 1]);
                }
                break;
            }
        }
        acc
    }

    /// Density at ω by linear interpolation (0 outside the grid).
    pub fn interpolate(&self, omega: f64) -> f64 {
        let g = &self.grid;
        if g.is_empty() || omega < g[0] || omega > g[g.len() - 1] {
            return 0.0;
        }
        match g.binary_search_by(|x| x.total_cmp(&omega)) {
            Ok(i) => self.values[i],
            Err(i) => {
                let (a, b) = (g[i - 1], g[i]);
                let t = (omega - a) / (b - a);
                self.values[i - 1] * (1.0 - t) + self.values[i] * t
            }
        }
    }
}

/// Computes the density curve on a grid of ω > 0 by Richardson extrapolation
/// along the η-ladder (two smallest rungs):
/// `π(ω) ≈ (η₁·f(η₂) − η₂·f(η₁))/(η₁ − η₂)` with `f(η) = Im⟨m(ω+iη)⟩/π`.
///
/// `⟨m⟩` is the exact Stieltjes transform of the limit measure, so for
/// rectangular `p > n` the known atom `π* δ₀` contributes exactly
/// `π*·η/(ω² + η²)` to `Im⟨m⟩`. That term is nonlinear in η once ω is
/// comparable to the ladder, so it is subtracted in closed form before the
/// extrapolation; the curve reports the absolutely continuous part only,
/// and the atom is reported separately as `point_mass`.
///
/// Grid points are independent and solved in parallel; per-point failures are
/// flagged rather than failing the whole curve.
pub fn density(
    profile: &VarianceProfile,
    grid: &[f64],
    eta_ladder: &[f64],
    tol: f64,
) -> Result<DensityCurve> {
    if grid.is_empty() {
        return Err(Error::precondition("empty density grid"));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) || grid[0] <= 0.0 {
        return Err(Error::precondition("grid must be positive increasing"));
    }
    if eta_ladder.len() < 2 {
        return Err(Error::precondition("η ladder needs at least two rungs"));
    }
    let (p, n) = (profile.p(), profile.n());
    let point_mass = if p > n { 1.0 - n as f64 / p as f64 } else { 0.0 };

    let sym = profile.symmetrize();
    let ac_part = |sol: &QveSolution, omega: f64, eta: f64| {
        let atom = point_mass * eta / (omega * omega + eta * eta);
        (sol.avg_gram_m().im - atom) / std::f64::consts::PI
    };
    let results: Vec<(f64, bool)> = grid
        .par_iter()
        .map(|&omega| match solve_eta_chain(&sym, omega, eta_ladder, tol) {
            Ok(chain) => {
                let k = chain.len();
                let (eta1, eta2) = (eta_ladder[k - 2], eta_ladder[k - 1]);
                let f1 = ac_part(&chain[k - 2], omega, eta1);
                let f2 = ac_part(&chain[k - 1], omega, eta2);
                let est = (eta1 * f2 - eta2 * f1) / (eta1 - eta2);
                if !est.is_finite() || est < -10.0 * defaults::SUPPORT_THRESHOLD {
                    (f2.max(0.0), true)
                } else {
                    (est.max(0.0), false)
                }
            }
            Err(_) => (0.0, true),
        })
        .collect();

    let values: Vec<f64> = results.iter().map(|r| r.0).collect();
    let flagged: Vec<usize> = results
        .iter()
        .enumerate()
        .filter_map(|(i, r)| r.1.then_some(i))
        .collect();

    let support_intervals = support_intervals(
        grid,
        &values,
        defaults::SUPPORT_THRESHOLD,
        defaults::SUPPORT_MERGE_STEPS,
    );

    Ok(DensityCurve {
        grid: grid.to_vec(),
        values,
        point_mass,
        support_intervals,
        eta_used: eta_ladder[eta_ladder.len() - 1],
        flagged,
    })
}

/// Detects maximal runs with `π > threshold`, merging runs separated by
/// fewer than `merge_steps` grid points.
fn support_intervals(
    grid: &[f64],
    values: &[f64],
    threshold: f64,
    merge_steps: usize,
) -> Vec<(f64, f64)> {
    let mut runs: Vec<(usize, usize)> = Vec::new();
    let mut start: Option<usize> = None;
    for (i, &v) in values.iter().enumerate() {
        if v > threshold {
            if start.is_none() {
                start = Some(i);
            }
        } else if let Some(s) = start.take() {
            runs.push((s, i - 1));
        }
    }
    if let Some(s) = start {
        runs.push((s, values.len() - 1));
    }
    let mut merged: Vec<(usize, usize)> = Vec::new();
    for run in runs {
        match merged.last_mut() {
            Some(last) if run.0 - last.1 <= merge_steps => last.1 = run.1,
            _ => merged.push(run),
        }
    }
    merged.into_iter().map(|(a, b)| (grid[a], grid[b])).collect()
}

/// Channel capacity `∫ log(1 + ω/σ²) ν(dω)` by quadrature on the curve's
/// grid (the atom at zero contributes `log 1 = 0`).
pub fn capacity(curve: &DensityCurve, sigma2: f64) -> Result<f64> {
    if sigma2 <= 0.0 || !sigma2.is_finite() {
        return Err(Error::precondition("σ² must be positive"));
    }
    let integrand: Vec<f64> = curve
        .grid
        .iter()
        .zip(curve.values.iter())
        .map(|(&w, &v)| (1.0 + w / sigma2).ln() * v)
        .collect();
    Ok(trapezoid(&curve.grid, &integrand))
}

/// Cross-check for the point mass: quadratic extrapolation of
/// `η·Im⟨m(iη)⟩ → π*` (exact for gapped measures; for hard-edge profiles the
/// quantity decays like √η and the extrapolant tends to 0 accordingly).
pub fn point_mass_laurent(sym: &SymmetrizedProfile, etas: (f64, f64), tol: f64) -> Result<f64> {
    let (e1, e2) = etas;
    if e1 <= e2 || e2 <= 0.0 {
        return Err(Error::precondition("need η₁ > η₂ > 0"));
    }
    let v1 = e1 * solve_gram_at(sym, Complex64::new(0.0, e1), tol)?.avg_gram_m().im;
    let v2 = e2 * solve_gram_at(sym, Complex64::new(0.0, e2), tol)?.avg_gram_m().im;
    // v(η) = π* + c·η²: eliminate c.
    Ok((e1 * e1 * v2 - e2 * e2 * v1) / (e1 * e1 - e2 * e2))
}
