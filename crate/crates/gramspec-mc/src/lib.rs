//! Monte-Carlo verification harness for the deterministic spectral theory in
//! `gramspec`.
//!
//! The library side of the workspace computes *deterministic* objects: the
//! self-consistent density of states of a Gram matrix `XX*` with variance
//! profile `S`, its zero-structure, and the stability operators behind the
//! local law. This crate closes the loop experimentally. It
//!
//! * draws random matrices `X` whose entries have exactly the prescribed
//!   variances (`sample`),
//! * computes empirical spectra and resolvents with dual-route
//!   cross-checks (`spectrum`),
//! * measures the distance between the random resolvent and the
//!   deterministic prediction at local-law scale, the rigidity of ordered
//!   eigenvalues around deterministic quantiles, kernel dimensions, spectral
//!   gaps, and Shannon-capacity functionals (`verify`),
//! * stress-tests the rotation-inversion singularity characterization on
//!   random unitary/contraction instances (`ri`).
//!
//! Everything is reproducible: a run is identified by `(seed, trials)` and a
//! sampling spec, every trial derives its own random stream from the seed by
//! a SplitMix64 chain, and aggregation is a deterministic fold in trial
//! order, so reports are bitwise identical across repeated runs and across
//! thread counts.

pub mod defaults;
pub mod ri;
pub mod sample;
pub mod spectrum;
pub mod verify;

pub use ri::{ri_sweep, RiRecord, RiSweep};
pub use sample::{sample, stream_seed, trial_rng, Distribution, SampleSpec};
pub use spectrum::{resolvent_diag, spectrum, EmpiricalSpectrum, GramEigen};
pub use verify::{
    verify, verify_capacity, verify_local_law, verify_rigidity, CheckOutcome, SpectralCdf,
    VerificationReport, VerifySettings,
};
