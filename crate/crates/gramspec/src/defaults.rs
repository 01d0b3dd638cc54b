//! Every tunable constant in one place.
//!
//! These are the frozen defaults documented in the README; the CLI echoes the
//! resolved values of all of them into its run manifest so no run depends on
//! a hidden constant.

/// Residual tolerance (∞-norm of the fixed-point residual) for the vector
/// Dyson equation solver.
pub const QVE_TOL: f64 = 1e-10;

/// Iteration cap per spectral point for the damped fixed-point solver.
pub const QVE_MAX_ITERS: usize = 100_000;

/// Damping factor bounds and adaptation rates: halve on residual increase,
/// grow by 1.2 on decrease, clamp to [ALPHA_MIN, ALPHA_MAX].
///
/// The cap stays strictly below 1: the symmetrized variance operator is
/// bipartite, so the fixed-point Jacobian spectrum is symmetric about zero
/// and every slow mode at +(1−ε) has a mirror image at −(1−ε). With
/// α = 3/4 the mirrored mode contracts by |1 − 2α| = 1/2 per step at the
/// cost of a ~33% slowdown of the positive mode; undamped iteration would
/// stall on the mirrored mode near the spectral edges.
pub const ALPHA_INIT: f64 = 0.75;
pub const ALPHA_MIN: f64 = 0.05;
pub const ALPHA_MAX: f64 = 0.75;
pub const ALPHA_GROW: f64 = 1.2;
pub const ALPHA_SHRINK: f64 = 0.5;

/// η-ladder (imaginary parts in the Gram plane) for Stieltjes inversion; the
/// density extrapolates from the last two rungs.
pub const ETA_LADDER: [f64; 3] = [1e-2, 1e-3, 1e-4];

/// A grid point belongs to the support when its extrapolated density exceeds
/// this threshold.
pub const SUPPORT_THRESHOLD: f64 = 1e-3;

/// Support intervals closer than this many grid steps are merged.
pub const SUPPORT_MERGE_STEPS: usize = 2;

/// Geometric η-ladder for the hard-edge equation 1/𝔳 = η + 𝔖𝔳; the limit
/// vector 𝔳(0) is a linear extrapolation from the last two rungs.
pub const HARD_EDGE_LADDER: [f64; 17] = [
    1.0, 0.3, 0.1, 0.03, 0.01, 3e-3, 1e-3, 3e-4, 1e-4, 3e-5, 1e-5, 3e-6, 1e-6, 3e-7, 1e-7, 3e-8,
    1e-8,
];

/// Number of rays in the fan used to integrate b(z) and to estimate its
/// analyticity radius δ*.
pub const B_RAYS: usize = 16;

/// Residual tolerance for the algebraic equation of b at every accepted
/// Runge–Kutta step (a 4th-order step of size h leaves a residual ~h⁵, so
/// this choice keeps steps near radius/40 on well-conditioned profiles).
pub const B_ALGEBRAIC_TOL: f64 = 1e-8;

/// Integration along a ray refuses to continue when the smallest singular
/// value of 1 − L(b) drops below this guard.
pub const B_SMIN_GUARD: f64 = 1e-8;

/// Largest radius the ray fan ever attempts (the analyticity radius of b is
/// of order one for well-conditioned profiles).
pub const B_RADIUS_CAP: f64 = 1.0;

/// Initial Runge–Kutta step as a fraction of the attempted radius, growth
/// factor after an accepted step, and the minimal step before a ray stops.
pub const B_H_INIT_FRACTION: f64 = 1.0 / 32.0;
pub const B_H_GROW: f64 = 1.4;
pub const B_H_MIN: f64 = 1e-6;

/// Components of 1 + Sb this close to zero abort an integration attempt.
pub const B_DENOM_GUARD: f64 = 1e-6;

/// Inverse-power iterations used for the σ_min guard of 1 − L(b).
pub const B_SMIN_ITERS: usize = 12;

/// Cauchy-integral (DFT) reconstruction of the Taylor coefficients of b:
/// number of circle points, circle radius as a fraction of δ*, and the
/// number of coefficients kept. 32 points at radius δ*/2 keep the aliasing
/// error of coefficient k at (1/2)³² ≈ 2·10⁻¹⁰ relative.
pub const B_SERIES_POINTS: usize = 32;
pub const B_SERIES_RADIUS_FRACTION: f64 = 0.5;
pub const B_SERIES_COEFFS: usize = 10;

/// Below this |z| the vector a(z) is evaluated from the Taylor series of b
/// instead of the ratio (u − 1/(1+Sb(z)))/z², which loses precision to
/// cancellation as z → 0.
pub const A_SERIES_SWITCH: f64 = 1e-3;

/// Number of grid points in the zoomed density scan of `zero::estimate_gap`.
pub const GAP_ZOOM_POINTS: usize = 400;

/// Exact norm identity for ‖𝔉‖₂ must hold to this tolerance at every solved
/// bulk point; violations signal a bad upstream solution.
pub const NORM_IDENTITY_TOL: f64 = 1e-8;

/// Relative Rayleigh-quotient stagnation threshold for power iteration.
pub const POWER_ITER_RTOL: f64 = 1e-12;

/// Power-iteration budget before falling back to a dense eigensolve.
pub const POWER_ITER_CAP: usize = 50_000;

/// Dense symmetric eigensolve fallback is allowed up to this dimension.
pub const DENSE_EIG_DIM_CAP: usize = 2000;

/// ‖𝔅⁻¹‖_{∞→∞} is computed exactly (via the dense inverse) up to this
/// dimension p+n; beyond it a randomized sign-vector estimate is reported.
pub const B_INV_EXACT_DIM_CAP: usize = 1000;

/// Number of sign vectors for the randomized ∞-norm lower bound.
pub const B_INV_SIGN_VECTORS: usize = 20;

/// Condition-number threshold above which a block matrix counts as
/// numerically singular in the Rotation-Inversion verifier.
pub const RI_SINGULAR_COND: f64 = 1e12;

/// rhs_core below this threshold counts as zero in the Rotation-Inversion
/// verifier.
pub const RI_RHS_ZERO: f64 = 1e-12;

/// Kernel threshold: an eigenvalue λ of XX* counts as zero when
/// λ < KERNEL_THRESHOLD_FACTOR · (1 + ‖XX*‖).
pub const KERNEL_THRESHOLD_FACTOR: f64 = 1e-8;

/// Default maximal power checked by the primitivity search in
/// `profile::validate`.
pub const MAX_L_DEFAULT: usize = 8;

/// Largest K tried by the block-structure auto-detection in
/// `profile::validate`.
pub const BLOCK_FID_MAX_K: usize = 12;
