//! Structure of the solution at ζ = 0: hard edge (p = n) and soft edge
//! (rectangular) behavior.
//!
//! **Hard edge** (p = n): on the imaginary axis the solution is purely
//! imaginary, `𝔐(iη) = i𝔳(η)` with `1/𝔳 = η + 𝔖𝔳`, and `𝔳(0)` exists with
//! `1/𝔳(0) = 𝔖𝔳(0)`. The density diverges like `⟨v₁(0)⟩/(π√ω)` at zero.
//!
//! **Soft edge** (p > n): the solution near zero is
//! `M₁(z) = z·a(z) − u/z`, `M₂(z) = z·b(z)` where `u ∈ (0,1)^p` solves
//! `1/u = 1 + S(1/(Sᵗu))` (the minimizer of the functional J), and `b` is
//! the holomorphic solution of `−1/b = z² − Sᵗ(1/(1+Sb))` with
//! `b(0) = 1/(Sᵗu)`, obtained by integrating the ODE
//! `b′ = 2z·b∘((1−L(b))⁻¹b)` with `L(b)v = b∘Sᵗ((1+Sb)⁻²∘S(b∘v))`.
//! The measure has an atom of mass `π* = ⟨u⟩ = 1 − n/p` at zero and a gap
//! `δ_π ≥ δ*²` above it, where δ* is the analyticity radius of b.
//!
//! The case p < n is handled by transposing the profile (the nonzero
//! spectra of XX* and X*X coincide; XX* itself has no kernel).

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::defaults;
use crate::error::{Error, Result};
use crate::linalg::{smin_estimate, sym_eigen_sorted};
use crate::profile::{SymmetrizedProfile, VarianceProfile};
use crate::qve;

// ---------------------------------------------------------------------------
// Hard edge (p = n)
// ---------------------------------------------------------------------------

/// Limit data of a square profile at ζ = 0.
#[derive(Clone, Debug)]
pub struct HardEdgeStructure {
    /// The positive vector `𝔳(0)` of length 2p with `1/𝔳(0) = 𝔖𝔳(0)`.
    pub v0: DVector<f64>,
    /// `lim_{ω↓0} π(ω)·√ω = ⟨v₁(0)⟩/π`.
    pub singular_coefficient: f64,
}

/// Solves `1/𝔳 = η + 𝔖𝔳` down the geometric η-ladder and extrapolates the
/// last two rungs linearly to η = 0.
///
/// The iterates are re-balanced so that the block sums of 𝔳 agree — the true
/// solution satisfies `Σv₁ = Σv₂` at every η (the traces of the two Gram
/// resolvents coincide for p = n), and pinning this neutral direction keeps
/// the damped iteration contractive all the way down the ladder.
pub fn solve_hard_edge(sym: &SymmetrizedProfile, tol: f64) -> Result<HardEdgeStructure> {
    let (p, n) = (sym.p(), sym.n());
    if p != n {
        return Err(Error::precondition(format!(
            "hard edge requires a square profile; got p = {p}, n = {n}"
        )));
    }
    if tol <= 0.0 {
        return Err(Error::precondition("tolerance must be positive"));
    }
    let dim = 2 * p;
    let ladder = &defaults::HARD_EDGE_LADDER;
    let mut v = DVector::from_element(dim, 1.0);
    let mut previous: Option<(f64, DVector<f64>)> = None; // rung before the last
    let mut last: Option<(f64, DVector<f64>)> = None;
    let mut total_iterations = 0usize;

    for (ri, &eta) in ladder.iter().enumerate() {
        let rung_tol = (0.01 * eta).max(0.1 * tol);
        // Fixed half-step: the Jacobian spectrum at the hard edge is a
        // symmetric pair ±(1 − O(η)); α = 1/2 annihilates the negative
        // branch exactly, and the positive branch is pinned by balancing.
        let alpha = 0.5f64;
        let mut res_last = f64::INFINITY;
        let mut converged = false;
        for _ in 0..defaults::QVE_MAX_ITERS {
            total_iterations += 1;
            let sv = sym.apply_real(&v);
            let mut res = 0.0f64;
            for x in 0..dim {
                res = res.max((1.0 / v[x] - eta - sv[x]).abs());
            }
            if res <= rung_tol {
                converged = true;
                break;
            }
            res_last = res;
            for x in 0..dim {
                v[x] = (1.0 - alpha) * v[x] + alpha / (eta + sv[x]);
            }
            balance_halves(&mut v, p);
        }
        if !converged {
            return Err(Error::NoConvergence {
                iterations: total_iterations,
                residual: res_last,
            });
        }
        if ri + 2 >= ladder.len() {
            previous = last.take();
            last = Some((eta, v.clone()));
        }
    }

    let (eta1, v1) = previous.expect("ladder has at least two rungs");
    let (eta2, v2) = last.expect("ladder has at least two rungs");
    // v(η) = v(0) + η·c + O(η²): eliminate c from the last two rungs.
    let t = eta2 / (eta1 - eta2);
    let mut v0 = DVector::from_fn(dim, |x, _| v2[x] + (v2[x] - v1[x]) * t);
    balance_halves(&mut v0, p);

    let sv0 = sym.apply_real(&v0);
    let mut residual = 0.0f64;
    for x in 0..dim {
        if v0[x] <= 0.0 {
            return Err(Error::Singular("extrapolated 𝔳(0) left the positive cone".into()));
        }
        residual = residual.max((1.0 / v0[x] - sv0[x]).abs());
    }
    if residual > tol {
        return Err(Error::NoConvergence {
            iterations: total_iterations,
            residual,
        });
    }
    let singular_coefficient = v0.rows(0, p).sum() / (p as f64) / std::f64::consts::PI;
    Ok(HardEdgeStructure {
        v0,
        singular_coefficient,
    })
}

/// Shifts the two halves of `v` by a common constant so their sums agree.
fn balance_halves(v: &mut DVector<f64>, p: usize) {
    let d = (v.rows(0, p).sum() - v.rows(p, p).sum()) / (2.0 * p as f64);
    let floor = v.iter().fold(f64::INFINITY, |a, &b| a.min(b));
    if d.abs() >= floor {
        return; // correction would leave the positive cone; skip this round
    }
    for x in 0..p {
        v[x] -= d;
    }
    for x in p..2 * p {
        v[x] += d;
    }
}

/// The linear coefficient `w = 𝔳(0) ∘ ((1 + 𝔉(0))⁻¹ 𝔳(0))` of the expansion
/// `𝔐(z) = i𝔳(0) − z·w + O(|z|²)`.
///
/// `1 + 𝔉(0)` has the one-dimensional kernel spanned by `(1,…,1,−1,…,−1)`;
/// the right side is orthogonal to it (the halves of 𝔳(0) have equal sums),
/// so the pseudo-inverse (dropping eigenvalues below 10⁻¹⁰) is exact.
pub fn hard_edge_expansion(
    sym: &SymmetrizedProfile,
    hard: &HardEdgeStructure,
) -> Result<DVector<f64>> {
    let p = sym.p();
    let dim = 2 * p;
    let v0 = &hard.v0;
    let s = sym.s();
    let mut a = DMatrix::identity(dim, dim);
    for i in 0..p {
        for k in 0..p {
            let val = v0[i] * s[(i, k)] * v0[p + k];
            a[(i, p + k)] += val;
            a[(p + k, i)] += val;
        }
    }
    let (vals, vecs) = sym_eigen_sorted(&a);
    let scale = v0.norm();
    let mut x = DVector::zeros(dim);
    for j in 0..dim {
        let q = vecs.column(j);
        let coef = q.dot(v0);
        if vals[j] < 1e-10 {
            if coef.abs() > 1e-6 * scale {
                return Err(Error::IdentityViolation {
                    name: "hard-edge expansion solvability (kernel orthogonality)",
                    deviation: coef.abs() / scale,
                    tolerance: 1e-6,
                });
            }
            continue;
        }
        x.axpy(coef / vals[j], &q.into_owned(), 1.0);
    }
    Ok(DVector::from_fn(dim, |i, _| v0[i] * x[i]))
}

/// Sup-norm error of the first-order expansion `𝔐(z) ≈ i𝔳(0) − z·w` against
/// a fresh solve at `z` (upper half-plane).
pub fn hard_edge_expansion_error(
    sym: &SymmetrizedProfile,
    hard: &HardEdgeStructure,
    w: &DVector<f64>,
    z: Complex64,
    tol: f64,
) -> Result<f64> {
    let sol = qve::solve_at(sym, z, tol, None)?;
    let mut worst = 0.0f64;
    for x in 0..sol.m_sym.len() {
        let predicted = Complex64::new(0.0, hard.v0[x]) - z * w[x];
        worst = worst.max((sol.m_sym[x] - predicted).norm());
    }
    Ok(worst)
}

// ---------------------------------------------------------------------------
// Soft edge (p > n): the vector u and the functional J
// ---------------------------------------------------------------------------

/// Value and sup-norm gradient of
/// `J(u) = p⁻¹[Σ_k log((Sᵗu)_k) + Σ_i (u_i − log u_i)]`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct JFunctional {
    pub value: f64,
    pub gradient_norm: f64,
}

/// Evaluates J and its gradient at `u > 0`.
pub fn j_functional(profile: &VarianceProfile, u: &DVector<f64>) -> JFunctional {
    let p = profile.p() as f64;
    let s = profile.s();
    let st_u = s.tr_mul(u);
    let value = (st_u.iter().map(|&x| x.ln()).sum::<f64>()
        + u.iter().map(|&x| x - x.ln()).sum::<f64>())
        / p;
    let inv_st_u = st_u.map(|x| 1.0 / x);
    let s_inv = s * &inv_st_u;
    let mut gradient_norm = 0.0f64;
    for i in 0..u.len() {
        gradient_norm = gradient_norm.max((s_inv[i] + 1.0 - 1.0 / u[i]).abs() / p);
    }
    JFunctional {
        value,
        gradient_norm,
    }
}

/// Soft-edge data; `minimize_j` fills `u`, `b0` and the point mass, the
/// b-dependent fields are added by `soft_edge`.
#[derive(Clone, Debug, Serialize)]
pub struct SoftEdgeStructure {
    /// Minimizer of J: `1/u = 1 + S(1/(Sᵗu))`, `u ∈ (0,1)^p`, `Σu = p − n`.
    pub u: Vec<f64>,
    /// `b(0) = 1/(Sᵗu)`.
    pub b0: Vec<f64>,
    /// `π* = ⟨u⟩ = 1 − n/p`.
    pub point_mass: f64,
    /// Lower edge of the absolutely continuous part (from `estimate_gap`).
    pub delta_pi: Option<f64>,
    /// Taylor coefficients of b on a disk around zero (from `solve_b`).
    pub b_series: Option<BSeries>,
}

/// Finds the minimizer of J by the fixed point `u ← 1/(1 + S(1/(Sᵗu)))`
/// (a contraction in the metric `sup_i (u_i−v_i)²/(u_i v_i)`); J is
/// monitored as a Lyapunov value and must not increase after burn-in.
pub fn minimize_j(profile: &VarianceProfile, tol: f64) -> Result<SoftEdgeStructure> {
    let (p, n) = (profile.p(), profile.n());
    if p <= n {
        return Err(Error::precondition(format!(
            "soft edge requires p > n; got p = {p}, n = {n}"
        )));
    }
    if tol <= 0.0 {
        return Err(Error::precondition("tolerance must be positive"));
    }
    let s = profile.s();
    for k in 0..n {
        if s.column(k).sum() <= 0.0 {
            return Err(Error::precondition(format!(
                "column {k} of the variance profile vanishes"
            )));
        }
    }
    let mut u = DVector::from_element(p, 1.0);
    let mut j_prev = f64::INFINITY;
    let mut converged = false;
    for it in 0..defaults::QVE_MAX_ITERS {
        let st_u = s.tr_mul(&u);
        let s_inv = s * st_u.map(|x| 1.0 / x);
        let mut res = 0.0f64;
        for i in 0..p {
            res = res.max((1.0 / u[i] - 1.0 - s_inv[i]).abs());
        }
        if res <= tol {
            converged = true;
            break;
        }
        for i in 0..p {
            u[i] = 1.0 / (1.0 + s_inv[i]);
        }
        let j = j_functional(profile, &u).value;
        if it >= 5 && j > j_prev + 1e-9 * (1.0 + j_prev.abs()) {
            return Err(Error::IdentityViolation {
                name: "J must be non-increasing along the u-iteration",
                deviation: j - j_prev,
                tolerance: 1e-9,
            });
        }
        j_prev = j;
    }
    if !converged {
        let st_u = s.tr_mul(&u);
        let s_inv = s * st_u.map(|x| 1.0 / x);
        let res = (0..p)
            .map(|i| (1.0 / u[i] - 1.0 - s_inv[i]).abs())
            .fold(0.0f64, f64::max);
        return Err(Error::NoConvergence {
            iterations: defaults::QVE_MAX_ITERS,
            residual: res,
        });
    }
    let b0 = s.tr_mul(&u).map(|x| 1.0 / x);
    Ok(SoftEdgeStructure {
        u: u.iter().copied().collect(),
        b0: b0.iter().copied().collect(),
        point_mass: 1.0 - n as f64 / p as f64,
        delta_pi: None,
        b_series: None,
    })
}

// ---------------------------------------------------------------------------
// Soft edge: the holomorphic function b
// ---------------------------------------------------------------------------

/// Taylor coefficients of b around zero, reconstructed by a Cauchy (DFT)
/// integral over a circle well inside the analyticity disk.
#[derive(Clone, Debug, Serialize)]
pub struct BSeries {
    /// Radius of the reconstruction circle.
    pub radius: f64,
    /// `coeffs[k][j]` is the k-th Taylor coefficient of `b_j`; odd k vanish.
    pub coeffs: Vec<Vec<Complex64>>,
}

impl BSeries {
    /// Evaluates the truncated series at z (Horner).
    pub fn evaluate(&self, z: Complex64, n: usize) -> DVector<Complex64> {
        let mut acc = DVector::from_element(n, Complex64::new(0.0, 0.0));
        for coeff in self.coeffs.iter().rev() {
            for j in 0..n {
                acc[j] = acc[j] * z + coeff[j];
            }
        }
        acc
    }

    fn coeff(&self, k: usize, n: usize) -> DVector<Complex64> {
        DVector::from_fn(n, |j, _| self.coeffs[k][j])
    }
}

/// The integrated function b with its certified radius and series.
#[derive(Clone, Debug)]
pub struct BSolution {
    s: DMatrix<f64>,
    u: DVector<f64>,
    b0: DVector<Complex64>,
    tol: f64,
    /// Smallest radius at which a ray of the fan stopped (the empirical
    /// analyticity radius; equals the requested radius if nothing stopped).
    pub delta_star: f64,
    /// Radius reached by each of the fan rays at angles πj/B_RAYS.
    pub ray_reach: Vec<f64>,
    /// Taylor coefficients on the circle of radius `series.radius`.
    pub series: BSeries,
}

/// Integrates `b′ = 2z·b∘((1−L(b))⁻¹b)` from `b(0) = 1/(Sᵗu)` along a fan
/// of rays up to `radius`, estimating the analyticity radius δ* as the
/// smallest stopping radius, and reconstructs the Taylor series of b on the
/// circle of radius δ*/2.
///
/// Every accepted Runge–Kutta step validates the algebraic equation
/// `−1/b = z² − Sᵗ(1/(1+Sb))` to `tol` and requires
/// `σ_min(1 − L(b)) ≥ 10⁻⁸`; a breach halves the step, and a ray stops when
/// the step underflows. Holomorphy and evenness of b (in particular
/// `b′(0) = 0`) and the ODE value of `b″(0)/2` are cross-checked against the
/// reconstructed series.
pub fn solve_b(
    profile: &VarianceProfile,
    u: &DVector<f64>,
    radius: f64,
    tol: f64,
) -> Result<BSolution> {
    let (p, n) = (profile.p(), profile.n());
    if u.len() != p {
        return Err(Error::dimension(format!(
            "u has length {}, expected p = {p}",
            u.len()
        )));
    }
    if p <= n {
        return Err(Error::precondition("solve_b requires p > n"));
    }
    if !(radius > 0.0 && radius <= defaults::B_RADIUS_CAP) {
        return Err(Error::precondition(format!(
            "radius must lie in (0, {}]",
            defaults::B_RADIUS_CAP
        )));
    }
    if u.iter().any(|&x| !(x > 0.0 && x < 1.0)) {
        return Err(Error::precondition("u must lie in (0,1)^p"));
    }
    let s = profile.s().clone();
    let st_u = s.tr_mul(u);
    if st_u.iter().any(|&x| x <= 0.0) {
        return Err(Error::precondition("Sᵗu must be entrywise positive"));
    }
    let b0 = st_u.map(|x| Complex64::new(1.0 / x, 0.0));

    // Fan of rays for the analyticity radius.
    let runs: Vec<RayRun> = (0..defaults::B_RAYS)
        .into_par_iter()
        .map(|j| {
            let theta = std::f64::consts::PI * j as f64 / defaults::B_RAYS as f64;
            integrate_ray(&s, &b0, theta, radius, tol)
        })
        .collect();
    let ray_reach: Vec<f64> = runs.iter().map(|r| r.reached).collect();
    let delta_star = ray_reach.iter().fold(f64::INFINITY, |a, &b| a.min(b));
    if delta_star < 10.0 * defaults::B_H_MIN {
        return Err(Error::Singular(format!(
            "integration of b stalled at radius {delta_star:.2e}"
        )));
    }

    // Cauchy/DFT reconstruction of the Taylor coefficients on |z| = δ*/2.
    let r = defaults::B_SERIES_RADIUS_FRACTION * delta_star;
    let m = defaults::B_SERIES_POINTS;
    let circle: Vec<DVector<Complex64>> = (0..m)
        .into_par_iter()
        .map(|j| {
            let theta = 2.0 * std::f64::consts::PI * j as f64 / m as f64;
            let run = integrate_ray(&s, &b0, theta, r, tol);
            if run.reached < r * (1.0 - 1e-12) {
                None
            } else {
                Some(run.state)
            }
        })
        .collect::<Option<Vec<_>>>()
        .ok_or_else(|| {
            Error::Singular("a circle point inside the certified disk was unreachable".into())
        })?;
    let mut coeffs: Vec<Vec<Complex64>> = Vec::with_capacity(defaults::B_SERIES_COEFFS);
    for k in 0..defaults::B_SERIES_COEFFS {
        let mut ck = vec![Complex64::new(0.0, 0.0); n];
        for (j, bj) in circle.iter().enumerate() {
            let phase =
                Complex64::from_polar(1.0, -2.0 * std::f64::consts::PI * (j * k) as f64 / m as f64);
            for (c, b) in ck.iter_mut().zip(bj.iter()) {
                *c += phase * b;
            }
        }
        let scale = 1.0 / (m as f64 * r.powi(k as i32));
        for c in &mut ck {
            *c *= scale;
        }
        coeffs.push(ck);
    }
    let series = BSeries { radius: r, coeffs };

    // Consistency of the reconstruction: c₀ = b(0), odd coefficients vanish
    // (b is even since the equation depends on z only through z²)…
    let b0_scale = b0.iter().map(|c| c.norm()).fold(0.0f64, f64::max);
    let c0_dev = (0..n)
        .map(|j| (series.coeffs[0][j] - b0[j]).norm())
        .fold(0.0f64, f64::max);
    let odd_dev = series
        .coeffs
        .iter()
        .skip(1)
        .step_by(2)
        .enumerate()
        .map(|(i, ck)| {
            let k = 2 * i + 1;
            ck.iter().map(|c| c.norm()).fold(0.0f64, f64::max) * r.powi(k as i32)
        })
        .fold(0.0f64, f64::max);
    if c0_dev > 1e-5 * (1.0 + b0_scale) || odd_dev > 1e-5 * (1.0 + b0_scale) {
        return Err(Error::IdentityViolation {
            name: "b series consistency (holomorphy/evenness at zero)",
            deviation: c0_dev.max(odd_dev),
            tolerance: 1e-5 * (1.0 + b0_scale),
        });
    }
    // …and c₂ agrees with the ODE value b″(0)/2 = b₀∘((1−L(b₀))⁻¹b₀).
    let a0 = one_minus_l(&s, &b0).ok_or_else(|| Error::Singular("1 − L(b₀) degenerate".into()))?;
    let x0 = a0
        .lu()
        .solve(&b0)
        .ok_or_else(|| Error::Singular("1 − L(b₀) is singular".into()))?;
    let c2_dev = (0..n)
        .map(|j| (series.coeffs[2][j] - b0[j] * x0[j]).norm())
        .fold(0.0f64, f64::max);
    let c2_scale = (0..n).map(|j| (b0[j] * x0[j]).norm()).fold(0.0f64, f64::max);
    if c2_dev > 1e-3 * (1.0 + c2_scale) {
        return Err(Error::IdentityViolation {
            name: "b″(0)/2 from the series must match the ODE coefficient",
            deviation: c2_dev,
            tolerance: 1e-3 * (1.0 + c2_scale),
        });
    }

    Ok(BSolution {
        s,
        u: u.clone(),
        b0,
        tol,
        delta_star,
        ray_reach,
        series,
    })
}

impl BSolution {
    pub fn b0(&self) -> DVector<f64> {
        self.b0.map(|c| c.re)
    }

    /// Evaluates b at z (|z| ≤ δ*) by a fresh ray integration.
    pub fn evaluate(&self, z: Complex64) -> Result<DVector<Complex64>> {
        let r = z.norm();
        if r > self.delta_star * (1.0 + 1e-12) {
            return Err(Error::precondition(format!(
                "|z| = {r:.6} lies outside the certified disk of radius {:.6}",
                self.delta_star
            )));
        }
        if r < 1e-12 {
            return Ok(self.b0.clone());
        }
        let run = integrate_ray(&self.s, &self.b0, z.arg(), r, self.tol);
        if run.reached < r * (1.0 - 1e-12) {
            return Err(Error::Singular(format!(
                "integration toward z stalled at radius {:.6} inside the certified disk",
                run.reached
            )));
        }
        Ok(run.state)
    }

    /// Evaluates the truncated Taylor series at z.
    pub fn evaluate_series(&self, z: Complex64) -> DVector<Complex64> {
        self.series.evaluate(z, self.b0.len())
    }
}

struct RayRun {
    reached: f64,
    state: DVector<Complex64>,
}

/// Adaptive RK4 march along `z = t·e^{iθ}`, t ∈ [0, target].
fn integrate_ray(
    s: &DMatrix<f64>,
    b0: &DVector<Complex64>,
    theta: f64,
    target: f64,
    tol: f64,
) -> RayRun {
    let dir = Complex64::from_polar(1.0, theta);
    let h_cap = target / 8.0;
    let mut t = 0.0f64;
    let mut b = b0.clone();
    let mut h = target * defaults::B_H_INIT_FRACTION;
    loop {
        let remaining = target - t;
        if remaining <= 1e-15 {
            break;
        }
        let step = h.min(remaining);
        match rk4_attempt(s, &b, t, step, dir, tol) {
            Some(b_new) => {
                t += step;
                b = b_new;
                h = (h * defaults::B_H_GROW).min(h_cap);
            }
            None => {
                h = step * 0.5;
                if h < defaults::B_H_MIN {
                    break;
                }
            }
        }
    }
    RayRun { reached: t, state: b }
}

/// One guarded RK4 step; `None` requests a smaller step.
fn rk4_attempt(
    s: &DMatrix<f64>,
    b: &DVector<Complex64>,
    t: f64,
    h: f64,
    dir: Complex64,
    tol: f64,
) -> Option<DVector<Complex64>> {
    let rhs = |tau: f64, state: &DVector<Complex64>| -> Option<DVector<Complex64>> {
        let z = dir * tau;
        let f = ode_rhs(s, state, z)?;
        Some(f * dir)
    };
    let half = Complex64::new(0.5 * h, 0.0);
    let full = Complex64::new(h, 0.0);
    let k1 = rhs(t, b)?;
    let k2 = rhs(t + 0.5 * h, &(b + &k1 * half))?;
    let k3 = rhs(t + 0.5 * h, &(b + &k2 * half))?;
    let k4 = rhs(t + h, &(b + &k3 * full))?;
    let two = Complex64::new(2.0, 0.0);
    let sixth = Complex64::new(h / 6.0, 0.0);
    let mut b_new = b + (k1 + k2 * two + k3 * two + k4) * sixth;

    // Local-error guard: the raw prediction must already satisfy the
    // algebraic equation to `tol`.
    let z_new = dir * (t + h);
    if !(algebraic_residual(s, &b_new, z_new) <= tol) {
        return None;
    }
    // Project back onto the algebraic manifold so that drift cannot
    // accumulate along the ray: Newton steps for the residual F, whose
    // Jacobian is −diag(1/b)(1−L(b))diag(1/b), reusing the factorization
    // formed for the σ_min guard. δb = b∘((1−L)⁻¹(b∘F)).
    for _ in 0..2 {
        let a = one_minus_l(s, &b_new)?;
        let lu = a.clone().lu();
        if smin_estimate(&a, &lu, defaults::B_SMIN_ITERS) < defaults::B_SMIN_GUARD {
            return None;
        }
        let f = residual_vector(s, &b_new, z_new)?;
        let bf = DVector::from_fn(f.len(), |k, _| b_new[k] * f[k]);
        let x = lu.solve(&bf)?;
        let scale = 1.0 + b_new.camax();
        let mut worst = 0.0f64;
        for k in 0..b_new.len() {
            worst = worst.max((b_new[k] * x[k]).norm());
        }
        if worst > 0.1 * scale {
            return None; // correction too large: the step left the basin
        }
        for k in 0..b_new.len() {
            let d = b_new[k] * x[k];
            b_new[k] += d;
        }
    }
    if !(algebraic_residual(s, &b_new, z_new) <= 0.1 * tol) {
        return None;
    }
    Some(b_new)
}

use crate::linalg::{real_mul_complex as s_mul, real_tr_mul_complex as st_mul};

/// Builds `1 − L(b)` densely (`L(b) = diag(b)·Sᵗ·diag((1+Sb)⁻²)·S·diag(b)`);
/// `None` if a component of 1 + Sb is dangerously small.
fn one_minus_l(s: &DMatrix<f64>, b: &DVector<Complex64>) -> Option<DMatrix<Complex64>> {
    let (p, n) = s.shape();
    let sb = s_mul(s, b);
    let mut w_re = DVector::zeros(p);
    let mut w_im = DVector::zeros(p);
    for i in 0..p {
        let d = Complex64::new(1.0, 0.0) + sb[i];
        if d.norm() < defaults::B_DENOM_GUARD {
            return None;
        }
        let w = 1.0 / (d * d);
        w_re[i] = w.re;
        w_im[i] = w.im;
    }
    let mut ws_re = DMatrix::zeros(p, n);
    let mut ws_im = DMatrix::zeros(p, n);
    for k in 0..n {
        for i in 0..p {
            let sv = s[(i, k)];
            ws_re[(i, k)] = w_re[i] * sv;
            ws_im[(i, k)] = w_im[i] * sv;
        }
    }
    let k_re = s.tr_mul(&ws_re);
    let k_im = s.tr_mul(&ws_im);
    Some(DMatrix::from_fn(n, n, |r, c| {
        let kv = Complex64::new(k_re[(r, c)], k_im[(r, c)]);
        let v = -(b[r] * kv * b[c]);
        if r == c {
            v + 1.0
        } else {
            v
        }
    }))
}

/// Right side `2z·b∘((1−L(b))⁻¹b)` of the ODE for b.
fn ode_rhs(
    s: &DMatrix<f64>,
    b: &DVector<Complex64>,
    z: Complex64,
) -> Option<DVector<Complex64>> {
    let a = one_minus_l(s, b)?;
    let x = a.lu().solve(b)?;
    if x.iter().any(|c| !c.is_finite()) {
        return None;
    }
    let two_z = 2.0 * z;
    Some(DVector::from_fn(b.len(), |k, _| two_z * b[k] * x[k]))
}

/// The residual vector `1/b + z² − Sᵗ(1/(1+Sb))` of the algebraic equation;
/// `None` on a vanishing denominator.
fn residual_vector(
    s: &DMatrix<f64>,
    b: &DVector<Complex64>,
    z: Complex64,
) -> Option<DVector<Complex64>> {
    let (p, _) = s.shape();
    let sb = s_mul(s, b);
    let mut g = DVector::from_element(p, Complex64::new(0.0, 0.0));
    for i in 0..p {
        let d = Complex64::new(1.0, 0.0) + sb[i];
        if d.norm() == 0.0 {
            return None;
        }
        g[i] = 1.0 / d;
    }
    let st_g = st_mul(s, &g);
    let z2 = z * z;
    let mut f = DVector::from_element(b.len(), Complex64::new(0.0, 0.0));
    for k in 0..b.len() {
        if b[k].norm() == 0.0 {
            return None;
        }
        f[k] = 1.0 / b[k] + z2 - st_g[k];
    }
    Some(f)
}

/// `‖1/b + z² − Sᵗ(1/(1+Sb))‖_∞`, the residual of the algebraic equation.
fn algebraic_residual(s: &DMatrix<f64>, b: &DVector<Complex64>, z: Complex64) -> f64 {
    residual_vector(s, b, z)
        .map(|f| f.camax())
        .unwrap_or(f64::INFINITY)
}

// ---------------------------------------------------------------------------
// a(z), the gap, and the combined structure
// ---------------------------------------------------------------------------

/// Evaluates `a(z)` from `z²·a(z) = u − 1/(1+Sb(z))`, removing the double
/// zero at the origin: away from zero as the de-biased ratio
/// `(g(0) − g(z))/z²` with `g = 1/(1+Sb)`, near zero from the Taylor series
/// of b (`a(0) = u²∘S(c₂)`).
pub fn compute_a(bsol: &BSolution, z: Complex64) -> Result<DVector<Complex64>> {
    let r = z.norm();
    if r > bsol.delta_star * (1.0 + 1e-12) {
        return Err(Error::precondition(format!(
            "|z| = {r:.6} lies outside the certified disk of radius {:.6}",
            bsol.delta_star
        )));
    }
    let s = &bsol.s;
    let p = bsol.u.len();
    let n = bsol.b0.len();
    if r <= defaults::A_SERIES_SWITCH {
        // a(z) = u²∘Sc₂ + z²·(u²∘Sc₄ − u³∘(Sc₂)²) + O(z⁴).
        let sc2 = s_mul(s, &bsol.series.coeff(2, n));
        let sc4 = s_mul(s, &bsol.series.coeff(4, n));
        let z2 = z * z;
        Ok(DVector::from_fn(p, |i, _| {
            let ui = bsol.u[i];
            let u2 = ui * ui;
            u2 * sc2[i] + z2 * (u2 * sc4[i] - u2 * ui * sc2[i] * sc2[i])
        }))
    } else {
        let b = bsol.evaluate(z)?;
        let g = inverse_one_plus_sb(s, &b)?;
        let g0 = inverse_one_plus_sb(s, &bsol.b0)?;
        let z2 = z * z;
        Ok(DVector::from_fn(p, |i, _| (g0[i] - g[i]) / z2))
    }
}

fn inverse_one_plus_sb(
    s: &DMatrix<f64>,
    b: &DVector<Complex64>,
) -> Result<DVector<Complex64>> {
    let sb = s_mul(s, b);
    let mut g = DVector::from_element(sb.len(), Complex64::new(0.0, 0.0));
    for i in 0..sb.len() {
        let d = Complex64::new(1.0, 0.0) + sb[i];
        if d.norm() < defaults::B_DENOM_GUARD {
            return Err(Error::Singular("1 + Sb nearly vanishes".into()));
        }
        g[i] = 1.0 / d;
    }
    Ok(g)
}

/// Reconstructs `𝔐 = (z·a − u/z, z·b)` at z and returns its residual in the
/// symmetrized Dyson equation (diagnostic used by tests).
pub fn reconstruction_residual(
    profile: &VarianceProfile,
    bsol: &BSolution,
    z: Complex64,
) -> Result<f64> {
    let a = compute_a(bsol, z)?;
    let b = bsol.evaluate(z)?;
    let (p, n) = (profile.p(), profile.n());
    let mut m = DVector::from_element(p + n, Complex64::new(0.0, 0.0));
    for i in 0..p {
        m[i] = z * a[i] - bsol.u[i] / z;
    }
    for k in 0..n {
        m[p + k] = z * b[k];
    }
    let point = qve::SpectralPoint::sym(z)?;
    qve::residual(&profile.symmetrize(), &m, &point)
}

/// Lower edge `δ_π = inf{ω > 0 : π(ω) > threshold}` of the a.c. part for a
/// rectangular profile, from a zoomed density scan around δ*², cross-checked
/// against the analytic lower bound `δ_π ≥ δ*²`.
pub fn estimate_gap(profile: &VarianceProfile) -> Result<f64> {
    let (p, n) = (profile.p(), profile.n());
    if p == n {
        return Err(Error::precondition(
            "square profile has a hard edge at zero; there is no gap",
        ));
    }
    if p < n {
        return estimate_gap(&profile.transposed());
    }
    let partial = minimize_j(profile, defaults::QVE_TOL)?;
    let u = DVector::from_vec(partial.u);
    let bsol = solve_b(
        profile,
        &u,
        defaults::B_RADIUS_CAP,
        defaults::B_ALGEBRAIC_TOL,
    )?;
    estimate_gap_with(profile, &bsol)
}

fn estimate_gap_with(profile: &VarianceProfile, bsol: &BSolution) -> Result<f64> {
    let ds2 = bsol.delta_star * bsol.delta_star;
    let lo = (0.25 * ds2).max(1e-6);
    let hi = 4.0 * ds2;
    let npts = defaults::GAP_ZOOM_POINTS;
    let grid: Vec<f64> = (0..npts)
        .map(|i| lo + (hi - lo) * i as f64 / (npts - 1) as f64)
        .collect();
    let curve = qve::density(profile, &grid, &defaults::ETA_LADDER, defaults::QVE_TOL)?;
    let idx = curve
        .values
        .iter()
        .position(|&v| v > defaults::SUPPORT_THRESHOLD)
        .ok_or_else(|| {
            Error::precondition("no density above threshold inside the scan window")
        })?;
    let delta_pi = grid[idx];
    let step = grid[1] - grid[0];
    if delta_pi + 2.0 * step + 1e-3 * ds2 < ds2 {
        return Err(Error::IdentityViolation {
            name: "gap lower bound δ_π ≥ δ*²",
            deviation: ds2 - delta_pi,
            tolerance: 2.0 * step,
        });
    }
    Ok(delta_pi)
}

/// Full soft-edge pipeline: u, b (with series and δ*), and δ_π.
pub fn soft_edge(profile: &VarianceProfile, tol: f64) -> Result<(SoftEdgeStructure, BSolution)> {
    let mut structure = minimize_j(profile, tol)?;
    let u = DVector::from_vec(structure.u.clone());
    let bsol = solve_b(
        profile,
        &u,
        defaults::B_RADIUS_CAP,
        tol.max(defaults::B_ALGEBRAIC_TOL),
    )?;
    structure.delta_pi = Some(estimate_gap_with(profile, &bsol)?);
    structure.b_series = Some(bsol.series.clone());
    Ok((structure, bsol))
}

/// Zero-structure summary in the shape of the JSON interface.
#[derive(Clone, Debug, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ZeroStructure {
    /// Square profile: 1/√ω singularity, no gap, no atom.
    Hard {
        v0: Vec<f64>,
        point_mass: f64,
        delta_pi: f64,
        singular_coefficient: f64,
    },
    /// Rectangular profile: atom at zero, gap, analytic b.
    /// For p < n the vectors u and b0 describe the transposed profile
    /// (X*X); XX* itself has no kernel, so the point mass is zero.
    Soft {
        u: Vec<f64>,
        b0: Vec<f64>,
        point_mass: f64,
        delta_pi: f64,
        singular_coefficient: f64,
    },
}

/// Dispatches on the shape of the profile: hard edge for p = n, soft edge
/// for p > n, and the transposed soft edge for p < n.
pub fn zero_structure(profile: &VarianceProfile, tol: f64) -> Result<ZeroStructure> {
    let (p, n) = (profile.p(), profile.n());
    match p.cmp(&n) {
        std::cmp::Ordering::Equal => {
            let sym = profile.symmetrize();
            let hard = solve_hard_edge(&sym, tol)?;
            Ok(ZeroStructure::Hard {
                v0: hard.v0.iter().copied().collect(),
                point_mass: 0.0,
                delta_pi: 0.0,
                singular_coefficient: hard.singular_coefficient,
            })
        }
        std::cmp::Ordering::Greater => {
            let (structure, _) = soft_edge(profile, tol)?;
            Ok(ZeroStructure::Soft {
                u: structure.u,
                b0: structure.b0,
                point_mass: structure.point_mass,
                delta_pi: structure.delta_pi.expect("filled by soft_edge"),
                singular_coefficient: 0.0,
            })
        }
        std::cmp::Ordering::Less => {
            let (structure, _) = soft_edge(&profile.transposed(), tol)?;
            Ok(ZeroStructure::Soft {
                u: structure.u,
                b0: structure.b0,
                point_mass: 0.0,
                delta_pi: structure.delta_pi.expect("filled by soft_edge"),
                singular_coefficient: 0.0,
            })
        }
    }
}
