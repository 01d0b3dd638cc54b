//! Deterministic spectral analysis of random Gram matrices `XX*` with a
//! general variance profile.
//!
//! Given a `p×n` variance profile `S` (entry `s_ik = E|x_ik|²`), the limiting
//! eigenvalue distribution `ν` of `XX*` is described by a quadratic vector
//! equation (the vector Dyson equation). This crate solves that equation on
//! the complex upper half-plane, inverts the Stieltjes transform into a
//! density with a possible point mass at zero, analyzes the behavior of the
//! solution at the spectral origin (hard edge for square profiles, spectral
//! gap and kernel mass for properly rectangular ones), and exposes the
//! stability operators that control the equation's linearization.
//!
//! Module map:
//!
//! * [`profile`] — variance profiles, model assumptions, the symmetrized
//!   operator `𝔖 = [[0,S],[Sᵗ,0]]`.
//! * [`qve`] — the vector Dyson equation `−1/𝔐 = z + 𝔖𝔐`, Stieltjes
//!   inversion into a [`qve::DensityCurve`], channel capacity.
//! * [`zero`] — hard-edge vector `𝔳(0)` and singular coefficient; the
//!   rectangular triple `(u, b(z), δ_π)` and the point mass `π*`.
//! * [`stability`] — saturated operator `𝔉`, Perron eigenpairs and the exact
//!   norm identity, the operator `𝔅`, spectral gaps, and the
//!   Rotation-Inversion verifier.
//! * [`avg`] — the normalized averaging/norm conventions used throughout.
//! * [`linalg`] — shared dense kernels (realified Hermitian eigensolver,
//!   power iteration, singular-value estimates).
//!
//! Everything here is deterministic: no randomness, no thread-count
//! dependence (parallel loops reduce in a fixed order).

pub mod avg;
pub mod defaults;
pub mod error;
pub mod linalg;
pub mod profile;
pub mod qve;
pub mod stability;
pub mod zero;

pub use error::{Error, Result};
pub use profile::{AssumptionReport, SymmetrizedProfile, VarianceProfile};
pub use qve::{DensityCurve, Plane, QveSolution, SpectralPoint};
pub use stability::{RotationInversionInstance, SaturatedOperator, StabilityReport};
pub use zero::{HardEdgeStructure, SoftEdgeStructure, ZeroStructure};
