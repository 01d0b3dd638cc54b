//! Statistical verification of the deterministic spectral theory.
//!
//! A verification run draws `trials` independent matrices from a
//! [`SampleSpec`] and measures three families of statistics against the
//! deterministic predictions computed by `gramspec`:
//!
//! * **Local laws.** At bulk parameters `ζ = τ + i·p^{γ−1}` and at
//!   away-from-spectrum parameters with `Im ζ` of order one, the resolvent
//!   `R(ζ) = (XX* − ζ)⁻¹` is compared entrywise with `diag(m(ζ))` and in
//!   weighted averages `p⁻¹ Σ w_i (R_ii − m_i)`. The errors are scaled by
//!   the local-law rates — `√(p·Im ζ)` and `p·Im ζ` in the bulk, `√p` and
//!   `p` away from the spectrum — and the 95th percentiles must stay below
//!   frozen constants.
//! * **Rigidity and zero structure.** Ordered eigenvalues are compared with
//!   the deterministic quantiles `i(τ) = ⌈p·F(τ)⌉` of the spectral CDF;
//!   kernel dimensions must equal `p − n` exactly; no eigenvalue may fall in
//!   the middle of the deterministic spectral gap; Kolmogorov–Smirnov
//!   distances to the deterministic CDF are recorded.
//! * **Capacity.** The Monte-Carlo mean of `p⁻¹ Σ log(1 + λ_i/σ²)` is
//!   compared with the deterministic quadrature `∫ log(1 + ω/σ²) dν`.
//!
//! Reports are bitwise reproducible: trials derive independent streams from
//! the run seed, the parallel pass collects in trial order, and aggregation
//! is a sequential fold. Percentiles use the nearest-rank convention.

use gramspec::defaults::{ETA_LADDER, SUPPORT_THRESHOLD};
use gramspec::qve::{self, DensityCurve};
use gramspec::zero::{zero_structure, ZeroStructure};
use gramspec::{Error, Result, VarianceProfile};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::defaults::{
    AVERAGED_CONSTANT, CAPACITY_RTOL, CDF_HEAD_START, CDF_POINTS_DEFAULT, ENTRYWISE_CONSTANT,
    GAMMA_DEFAULT, GAP_ZONE, RIGIDITY_CONSTANT, SALT_WVEC, SCHEMA_VERSION, SPECTRUM_BOUND_FACTOR,
    SPECTRUM_BOUND_MIN_P,
};
use crate::sample::{sample, stream_seed, Distribution, SampleSpec};
use crate::spectrum::{empirical_from_values, spectrum, EmpiricalSpectrum, GramEigen};

/// Deterministic spectral CDF `F(τ) = ν([0, τ])` of the limit measure:
/// atom at zero, a closed-form head over `[0, g₀]`, and cumulative
/// trapezoid quadrature of the self-consistent density beyond.
///
/// Square profiles integrate the hard-edge singularity `π(ω) ≈ c/√ω`
/// analytically on the head interval, where the η-ladder cannot resolve it;
/// rectangular profiles start the grid in the middle of the spectral gap,
/// where the density vanishes and the atom is known exactly.
#[derive(Debug, Clone)]
pub struct SpectralCdf {
    /// The underlying self-consistent density curve (atom excluded).
    pub curve: DensityCurve,
    /// Mass of the atom at zero, `max(0, 1 − n/p)`.
    pub atom: f64,
    /// Width of the spectral gap above zero (0 for square profiles).
    pub delta_pi: f64,
    cum: Vec<f64>,
    head_coefficient: f64,
    g0: f64,
}

impl SpectralCdf {
    pub fn new(profile: &VarianceProfile, points: usize, tol: f64) -> Result<Self> {
        if points < 16 {
            return Err(Error::precondition("the CDF grid needs at least 16 points"));
        }
        let structure = zero_structure(profile, tol)?;
        let (atom, delta_pi, head_coefficient, g0) = match structure {
            ZeroStructure::Hard {
                singular_coefficient,
                ..
            } => (0.0, 0.0, singular_coefficient, CDF_HEAD_START),
            ZeroStructure::Soft {
                point_mass,
                delta_pi,
                ..
            } => (point_mass, delta_pi, 0.0, (0.5 * delta_pi).max(1e-9)),
        };
        let hi = 3.0 * profile.s_star();
        if hi <= 2.0 * g0 {
            return Err(Error::precondition(
                "profile scale s* is too small for a CDF grid above the gap",
            ));
        }
        // Geometric grid: constant relative spacing resolves the 1/√ω head
        // and the bulk with one construction.
        let ratio = (hi / g0).powf(1.0 / (points as f64 - 1.0));
        let mut grid: Vec<f64> = (0..points).map(|i| g0 * ratio.powi(i as i32)).collect();
        grid[points - 1] = hi;
        let curve = qve::density(profile, &grid, &ETA_LADDER, tol)?;
        let mut cum = vec![0.0; points];
        for i in 1..points {
            cum[i] = cum[i - 1]
                + 0.5 * (curve.values[i] + curve.values[i - 1]) * (grid[i] - grid[i - 1]);
        }
        Ok(SpectralCdf {
            curve,
            atom,
            delta_pi,
            cum,
            head_coefficient,
            g0,
        })
    }

    fn head(&self, tau: f64) -> f64 {
        // ∫₀^τ c/√ω dω = 2c√τ.
        2.0 * self.head_coefficient * tau.sqrt()
    }

    /// `F(τ)`; 0 below the support, capped at 1.
    pub fn value(&self, tau: f64) -> f64 {
        if tau < 0.0 {
            return 0.0;
        }
        if tau < self.g0 {
            return (self.atom + self.head(tau)).min(1.0);
        }
        let grid = &self.curve.grid;
        let values = &self.curve.values;
        let ac = match grid.binary_search_by(|x| x.total_cmp(&tau)) {
            Ok(i) => self.cum[i],
            Err(i) if i >= grid.len() => self.cum[grid.len() - 1],
            Err(i) => {
                let (a, b) = (grid[i - 1], grid[i]);
                let t = (tau - a) / (b - a);
                let v_tau = values[i - 1] * (1.0 - t) + values[i] * t;
                self.cum[i - 1] + 0.5 * (values[i - 1] + v_tau) * (tau - a)
            }
        };
        (self.atom + self.head(self.g0) + ac).min(1.0)
    }

    /// Total mass `F(∞)`; a harness sanity guard checks it against 1.
    pub fn total_mass(&self) -> f64 {
        self.atom + self.head(self.g0) + self.cum[self.cum.len() - 1]
    }

    /// The 1-based quantile index `i(τ) = ⌈p·F(τ)⌉`, clamped to `[1, p]`.
    pub fn index(&self, p: usize, tau: f64) -> usize {
        ((p as f64 * self.value(tau)).ceil() as usize).clamp(1, p)
    }
}

/// Tunables of a verification run. Every field is echoed into the report.
#[derive(Debug, Clone, Serialize)]
pub struct VerifySettings {
    /// Bulk scale exponent: bulk parameters sit at `Im ζ = p^{γ−1}`, γ ∈ (0,1).
    pub gamma: f64,
    /// Real parts of the bulk local-law parameters.
    pub bulk_tau: Vec<f64>,
    /// Away-from-spectrum parameters (upper half-plane, order-one distance
    /// from the support).
    pub away_zeta: Vec<Complex64>,
    /// Quantile locations for eigenvalue rigidity.
    pub rigidity_tau: Vec<f64>,
    /// Noise level of the capacity functional; `None` skips the capacity
    /// section in a full run.
    pub sigma2: Option<f64>,
    /// Fixed-point residual tolerance for all deterministic solves.
    pub qve_tol: f64,
    /// Grid size of the deterministic spectral CDF.
    pub cdf_points: usize,
}

impl Default for VerifySettings {
    fn default() -> Self {
        VerifySettings {
            gamma: GAMMA_DEFAULT,
            bulk_tau: vec![1.0],
            away_zeta: vec![Complex64::new(3.0, 0.5)],
            rigidity_tau: vec![1.0],
            sigma2: Some(1.0),
            qve_tol: gramspec::defaults::QVE_TOL,
            cdf_points: CDF_POINTS_DEFAULT,
        }
    }
}

/// One named pass/fail comparison against a frozen threshold.
#[derive(Debug, Clone, Serialize)]
pub struct CheckOutcome {
    pub name: String,
    pub observed: f64,
    pub threshold: f64,
    pub passed: bool,
}

impl CheckOutcome {
    fn new(name: String, observed: f64, threshold: f64) -> Self {
        let passed = observed <= threshold;
        CheckOutcome {
            name,
            observed,
            threshold,
            passed,
        }
    }
}

/// Scaled local-law statistics at one spectral parameter.
#[derive(Debug, Clone, Serialize)]
pub struct LocalLawPoint {
    pub zeta_re: f64,
    pub zeta_im: f64,
    pub regime: String,
    pub entrywise_median: f64,
    pub entrywise_p95: f64,
    pub averaged_median: f64,
    pub averaged_p95: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct LocalLawSummary {
    pub gamma: f64,
    pub eta_bulk: f64,
    pub points: Vec<LocalLawPoint>,
}

/// Rigidity statistics at one quantile location.
#[derive(Debug, Clone, Serialize)]
pub struct TauSummary {
    pub tau: f64,
    /// 1-based deterministic quantile index `i(τ)`.
    pub index: usize,
    pub median_dev: f64,
    /// Square profiles only: median of `|λ_{i(τ)} − τ| / (√τ + 1/p)`.
    pub median_dev_scaled: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RigiditySummary {
    pub taus: Vec<TauSummary>,
    pub skipped_taus: Vec<f64>,
    /// Deterministic kernel dimension `max(0, p − n)`.
    pub kernel_expected: usize,
    /// Trials whose kernel dimension matched exactly.
    pub kernel_exact_trials: usize,
    pub gap_zone: Option<(f64, f64)>,
    pub gap_violations: usize,
    /// Largest eigenvalue seen over all trials.
    pub max_eigenvalue: f64,
    /// The no-outlier bound `5·s*` when it applies (Gaussian, p ≥ 200).
    pub spectrum_bound: Option<f64>,
    pub ks_median: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CapacitySummary {
    pub sigma2: f64,
    pub deterministic: f64,
    pub monte_carlo: f64,
    pub rel_err: f64,
}

/// One per-trial observation in long format.
#[derive(Debug, Clone, Serialize)]
pub struct Record {
    pub trial: usize,
    pub quantity: String,
    pub zeta_or_tau: String,
    pub value: f64,
}

/// The complete outcome of a verification run.
#[derive(Debug, Clone, Serialize)]
pub struct VerificationReport {
    pub schema_version: u32,
    pub p: usize,
    pub n: usize,
    pub distribution: Distribution,
    pub seed: u64,
    pub trials: usize,
    pub settings: VerifySettings,
    pub local_law: Option<LocalLawSummary>,
    pub rigidity: Option<RigiditySummary>,
    pub capacity: Option<CapacitySummary>,
    pub checks: Vec<CheckOutcome>,
    pub notices: Vec<String>,
    pub all_passed: bool,
    pub records: Vec<Record>,
}

impl VerificationReport {
    /// Pretty JSON, schema-versioned, bitwise reproducible for a fixed
    /// `(spec, settings)`.
    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)
            .map_err(|e| Error::Parse(format!("report serialization failed: {e}")))?;
        s.push('\n');
        Ok(s)
    }

    /// Per-trial records as CSV in long format:
    /// `trial,quantity,zeta_or_tau,value`. Floats print in shortest
    /// round-trip form, so re-parsing reproduces them bitwise.
    pub fn write_csv<W: std::io::Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["trial", "quantity", "zeta_or_tau", "value"])
            .map_err(csv_err)?;
        for r in &self.records {
            w.write_record([
                r.trial.to_string(),
                r.quantity.clone(),
                r.zeta_or_tau.clone(),
                format!("{}", r.value),
            ])
            .map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Parse(format!("csv write failed: {e}"))
}

#[derive(Clone, Copy)]
struct Sections {
    local_law: bool,
    rigidity: bool,
    capacity: bool,
}

/// Full verification: local laws, rigidity/zero structure, and (when σ² is
/// set) capacity, sharing one eigendecomposition per trial.
pub fn verify(spec: &SampleSpec, settings: &VerifySettings) -> Result<VerificationReport> {
    run(
        spec,
        settings,
        Sections {
            local_law: true,
            rigidity: true,
            capacity: settings.sigma2.is_some(),
        },
    )
}

/// Local-law section only.
pub fn verify_local_law(spec: &SampleSpec, settings: &VerifySettings) -> Result<VerificationReport> {
    run(
        spec,
        settings,
        Sections {
            local_law: true,
            rigidity: false,
            capacity: false,
        },
    )
}

/// Rigidity / zero-structure section only.
pub fn verify_rigidity(spec: &SampleSpec, settings: &VerifySettings) -> Result<VerificationReport> {
    run(
        spec,
        settings,
        Sections {
            local_law: false,
            rigidity: true,
            capacity: false,
        },
    )
}

/// Capacity section only; requires `settings.sigma2`.
pub fn verify_capacity(spec: &SampleSpec, settings: &VerifySettings) -> Result<VerificationReport> {
    if settings.sigma2.is_none() {
        return Err(Error::precondition("the capacity check needs σ² > 0"));
    }
    run(
        spec,
        settings,
        Sections {
            local_law: false,
            rigidity: false,
            capacity: true,
        },
    )
}

struct LawPoint {
    zeta: Complex64,
    m: DVector<Complex64>,
    regime: &'static str,
    entry_scale: f64,
    avg_scale: f64,
    label: String,
}

struct TrialRig {
    devs: Vec<f64>,
    ks: f64,
    zero_count: usize,
    gap_hits: usize,
    max_eig: f64,
}

struct TrialOut {
    law: Vec<(f64, f64)>,
    rigidity: Option<TrialRig>,
    capacity: Option<f64>,
}

fn run(
    spec: &SampleSpec,
    settings: &VerifySettings,
    sections: Sections,
) -> Result<VerificationReport> {
    let profile = &spec.profile;
    let (p, n) = (profile.p(), profile.n());
    let pf = p as f64;
    let mut notices: Vec<String> = Vec::new();
    let mut checks: Vec<CheckOutcome> = Vec::new();

    // Deterministic inputs shared by all trials.
    let sym = profile.symmetrize();
    let eta_bulk = pf.powf(settings.gamma - 1.0);
    let mut law_points: Vec<LawPoint> = Vec::new();
    if sections.local_law {
        if !(settings.gamma > 0.0 && settings.gamma < 1.0) {
            return Err(Error::precondition("the bulk exponent γ must lie in (0, 1)"));
        }
        for &tau in &settings.bulk_tau {
            if !(tau > 0.0) {
                return Err(Error::precondition("bulk locations must be positive"));
            }
            let zeta = Complex64::new(tau, eta_bulk);
            let sol = qve::solve_gram_at(&sym, zeta, settings.qve_tol)?;
            let smoothed = sol.avg_gram_m().im / std::f64::consts::PI;
            if smoothed < SUPPORT_THRESHOLD {
                notices.push(format!(
                    "bulk location τ = {tau} carries little spectral mass (π ≈ {smoothed:.2e}); \
                     the bulk scaling is not meaningful there"
                ));
            }
            law_points.push(LawPoint {
                zeta,
                m: sol.gram_m(),
                regime: "bulk",
                entry_scale: (pf * eta_bulk).sqrt(),
                avg_scale: pf * eta_bulk,
                label: fmt_zeta(zeta),
            });
        }
        for &zeta in &settings.away_zeta {
            let sol = qve::solve_gram_at(&sym, zeta, settings.qve_tol)?;
            law_points.push(LawPoint {
                zeta,
                m: sol.gram_m(),
                regime: "away",
                entry_scale: pf.sqrt(),
                avg_scale: pf,
                label: fmt_zeta(zeta),
            });
        }
    }
    let w_vectors = make_w_vectors(p, spec.seed);

    // Deterministic CDF for quantiles, gap zone, KS, and capacity quadrature.
    let cdf = if sections.rigidity || sections.capacity {
        let cdf = SpectralCdf::new(profile, settings.cdf_points, settings.qve_tol)?;
        if !cdf.curve.flagged.is_empty() {
            notices.push(format!(
                "{} of {} density grid points were flagged during extrapolation",
                cdf.curve.flagged.len(),
                cdf.curve.grid.len()
            ));
        }
        // Harness self-check: if the deterministic quadrature does not
        // integrate to 1, quantile indices would be meaningless.
        checks.push(CheckOutcome::new(
            "deterministic spectral CDF mass defect |F(∞) − 1|".into(),
            (cdf.total_mass() - 1.0).abs(),
            0.02,
        ));
        Some(cdf)
    } else {
        None
    };

    let mut kept_taus: Vec<(f64, usize)> = Vec::new();
    let mut skipped_taus: Vec<f64> = Vec::new();
    let mut gap_zone: Option<(f64, f64)> = None;
    if sections.rigidity {
        let cdf = cdf.as_ref().expect("cdf is built for rigidity");
        for &tau in &settings.rigidity_tau {
            if !(tau > 0.0) {
                return Err(Error::precondition("rigidity locations must be positive"));
            }
            if cdf.curve.interpolate(tau) < SUPPORT_THRESHOLD {
                notices.push(format!(
                    "rigidity location τ = {tau} lies outside the bulk of the density; skipped"
                ));
                skipped_taus.push(tau);
            } else {
                kept_taus.push((tau, cdf.index(p, tau)));
            }
        }
        if p != n && cdf.delta_pi > 0.0 {
            gap_zone = Some((GAP_ZONE.0 * cdf.delta_pi, GAP_ZONE.1 * cdf.delta_pi));
        }
    }

    let sigma2 = if sections.capacity {
        match settings.sigma2 {
            Some(s) if s > 0.0 && s.is_finite() => Some(s),
            _ => return Err(Error::precondition("the capacity check needs σ² > 0")),
        }
    } else {
        None
    };

    // Per-trial pass: parallel over trials, collected in trial order, so the
    // fold below is deterministic regardless of thread count.
    let outs: Vec<TrialOut> = (0..spec.trials)
        .into_par_iter()
        .map(|t| -> Result<TrialOut> {
            let x = sample(spec, t);
            let eig = if sections.local_law {
                Some(GramEigen::new(&x)?)
            } else {
                None
            };
            let law = match &eig {
                Some(eig) => law_points
                    .iter()
                    .map(|pt| -> Result<(f64, f64)> {
                        let r = eig.resolvent(pt.zeta)?;
                        let entry = entrywise_error(&r, &pt.m);
                        let avg = w_vectors
                            .iter()
                            .map(|w| averaged_error(&r, &pt.m, w))
                            .fold(0.0, f64::max);
                        Ok((entry, avg))
                    })
                    .collect::<Result<Vec<_>>>()?,
                None => Vec::new(),
            };
            let es: Option<EmpiricalSpectrum> = if sections.rigidity || sections.capacity {
                Some(match &eig {
                    // The kernel of XX* is exact only through the smaller
                    // Gram route, so p > n always recomputes on the n side.
                    _ if n < p => spectrum(&x)?,
                    Some(eig) => empirical_from_values(eig.eigenvalues())?,
                    None => spectrum(&x)?,
                })
            } else {
                None
            };
            let rigidity = if sections.rigidity {
                let es = es.as_ref().expect("spectrum is built for rigidity");
                let evs = &es.eigenvalues;
                let cdf = cdf.as_ref().expect("cdf is built for rigidity");
                let devs = kept_taus
                    .iter()
                    .map(|&(tau, idx)| (evs[idx - 1] - tau).abs())
                    .collect();
                let gap_hits = gap_zone
                    .map(|(lo, hi)| evs.iter().filter(|&&v| v >= lo && v <= hi).count())
                    .unwrap_or(0);
                Some(TrialRig {
                    devs,
                    ks: ks_distance(evs, cdf),
                    zero_count: es.zero_count,
                    gap_hits,
                    max_eig: evs[p - 1],
                })
            } else {
                None
            };
            let capacity = sigma2.map(|s2| {
                let es = es.as_ref().expect("spectrum is built for capacity");
                es.eigenvalues
                    .iter()
                    .map(|&l| (1.0 + l.max(0.0) / s2).ln())
                    .sum::<f64>()
                    / pf
            });
            Ok(TrialOut {
                law,
                rigidity,
                capacity,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    // Long-format records, trial-major.
    let mut records: Vec<Record> = Vec::new();
    for (t, out) in outs.iter().enumerate() {
        for (j, pt) in law_points.iter().enumerate() {
            records.push(Record {
                trial: t,
                quantity: "entrywise_err".into(),
                zeta_or_tau: pt.label.clone(),
                value: out.law[j].0,
            });
            records.push(Record {
                trial: t,
                quantity: "averaged_err".into(),
                zeta_or_tau: pt.label.clone(),
                value: out.law[j].1,
            });
        }
        if let Some(rig) = &out.rigidity {
            for (k, &(tau, _)) in kept_taus.iter().enumerate() {
                records.push(Record {
                    trial: t,
                    quantity: "rigidity_dev".into(),
                    zeta_or_tau: fmt_f(tau),
                    value: rig.devs[k],
                });
            }
            records.push(Record {
                trial: t,
                quantity: "ks_distance".into(),
                zeta_or_tau: String::new(),
                value: rig.ks,
            });
            records.push(Record {
                trial: t,
                quantity: "kernel_dim".into(),
                zeta_or_tau: String::new(),
                value: rig.zero_count as f64,
            });
            if gap_zone.is_some() {
                records.push(Record {
                    trial: t,
                    quantity: "gap_count".into(),
                    zeta_or_tau: String::new(),
                    value: rig.gap_hits as f64,
                });
            }
            records.push(Record {
                trial: t,
                quantity: "max_eig".into(),
                zeta_or_tau: String::new(),
                value: rig.max_eig,
            });
        }
        if let Some(c) = out.capacity {
            records.push(Record {
                trial: t,
                quantity: "capacity_mc".into(),
                zeta_or_tau: fmt_f(sigma2.expect("σ² is set for capacity")),
                value: c,
            });
        }
    }

    // Aggregation.
    let local_law = if sections.local_law {
        let mut points = Vec::with_capacity(law_points.len());
        for (j, pt) in law_points.iter().enumerate() {
            let entry: Vec<f64> = outs.iter().map(|o| o.law[j].0 * pt.entry_scale).collect();
            let avg: Vec<f64> = outs.iter().map(|o| o.law[j].1 * pt.avg_scale).collect();
            let entry_p95 = percentile(&entry, 0.95);
            let avg_p95 = percentile(&avg, 0.95);
            checks.push(CheckOutcome::new(
                format!(
                    "local law ({}) entrywise p95 · {} at ζ = {}",
                    pt.regime,
                    if pt.regime == "bulk" { "√(p·Im ζ)" } else { "√p" },
                    pt.label
                ),
                entry_p95,
                ENTRYWISE_CONSTANT,
            ));
            checks.push(CheckOutcome::new(
                format!(
                    "local law ({}) averaged p95 · {} at ζ = {}",
                    pt.regime,
                    if pt.regime == "bulk" { "p·Im ζ" } else { "p" },
                    pt.label
                ),
                avg_p95,
                AVERAGED_CONSTANT,
            ));
            points.push(LocalLawPoint {
                zeta_re: pt.zeta.re,
                zeta_im: pt.zeta.im,
                regime: pt.regime.to_string(),
                entrywise_median: percentile(&entry, 0.5),
                entrywise_p95: entry_p95,
                averaged_median: percentile(&avg, 0.5),
                averaged_p95: avg_p95,
            });
        }
        Some(LocalLawSummary {
            gamma: settings.gamma,
            eta_bulk,
            points,
        })
    } else {
        None
    };

    let rigidity = if sections.rigidity {
        let rigs: Vec<&TrialRig> = outs
            .iter()
            .map(|o| o.rigidity.as_ref().expect("rigidity ran"))
            .collect();
        let mut taus = Vec::with_capacity(kept_taus.len());
        for (k, &(tau, idx)) in kept_taus.iter().enumerate() {
            let devs: Vec<f64> = rigs.iter().map(|r| r.devs[k]).collect();
            let median_dev = percentile(&devs, 0.5);
            checks.push(CheckOutcome::new(
                format!("rigidity median |λ_i(τ) − τ| at τ = {tau} (i = {idx})"),
                median_dev,
                RIGIDITY_CONSTANT / pf,
            ));
            let median_dev_scaled = (p == n).then(|| {
                let scaled: Vec<f64> = devs
                    .iter()
                    .map(|d| d / (tau.sqrt() + 1.0 / pf))
                    .collect();
                percentile(&scaled, 0.5)
            });
            taus.push(TauSummary {
                tau,
                index: idx,
                median_dev,
                median_dev_scaled,
            });
        }
        let kernel_expected = p.saturating_sub(n);
        let kernel_exact_trials = rigs
            .iter()
            .filter(|r| r.zero_count == kernel_expected)
            .count();
        checks.push(CheckOutcome::new(
            format!("trials with kernel dimension ≠ {kernel_expected}"),
            (spec.trials - kernel_exact_trials) as f64,
            0.0,
        ));
        let gap_violations: usize = rigs.iter().map(|r| r.gap_hits).sum();
        if let Some((lo, hi)) = gap_zone {
            checks.push(CheckOutcome::new(
                format!("eigenvalues inside the spectral gap zone [{lo:.6}, {hi:.6}]"),
                gap_violations as f64,
                0.0,
            ));
        }
        let max_eigenvalue = rigs.iter().map(|r| r.max_eig).fold(0.0, f64::max);
        let gaussian = matches!(
            spec.distribution,
            Distribution::GaussianReal | Distribution::GaussianComplex
        );
        let spectrum_bound = (gaussian && p >= SPECTRUM_BOUND_MIN_P).then(|| {
            let bound = SPECTRUM_BOUND_FACTOR * profile.s_star();
            checks.push(CheckOutcome::new(
                format!("largest eigenvalue over all trials vs 5·s* = {bound:.6}"),
                max_eigenvalue,
                bound,
            ));
            bound
        });
        let ks: Vec<f64> = rigs.iter().map(|r| r.ks).collect();
        Some(RigiditySummary {
            taus,
            skipped_taus,
            kernel_expected,
            kernel_exact_trials,
            gap_zone,
            gap_violations,
            max_eigenvalue,
            spectrum_bound,
            ks_median: percentile(&ks, 0.5),
        })
    } else {
        None
    };

    let capacity = match sigma2 {
        Some(s2) => {
            let cdf = cdf.as_ref().expect("cdf is built for capacity");
            let deterministic = qve::capacity(&cdf.curve, s2)?;
            let mc_values: Vec<f64> = outs
                .iter()
                .map(|o| o.capacity.expect("capacity ran"))
                .collect();
            let monte_carlo = mc_values.iter().sum::<f64>() / mc_values.len() as f64;
            let rel_err =
                (monte_carlo - deterministic).abs() / deterministic.abs().max(f64::MIN_POSITIVE);
            checks.push(CheckOutcome::new(
                format!("capacity Monte-Carlo vs deterministic relative error (σ² = {s2})"),
                rel_err,
                CAPACITY_RTOL,
            ));
            Some(CapacitySummary {
                sigma2: s2,
                deterministic,
                monte_carlo,
                rel_err,
            })
        }
        None => None,
    };

    let all_passed = checks.iter().all(|c| c.passed);
    Ok(VerificationReport {
        schema_version: SCHEMA_VERSION,
        p,
        n,
        distribution: spec.distribution,
        seed: spec.seed,
        trials: spec.trials,
        settings: settings.clone(),
        local_law,
        rigidity,
        capacity,
        checks,
        notices,
        all_passed,
        records,
    })
}

/// `max_ij |R_ij − m_i δ_ij|`.
fn entrywise_error(r: &DMatrix<Complex64>, m: &DVector<Complex64>) -> f64 {
    let p = r.nrows();
    let mut worst = 0.0f64;
    for j in 0..p {
        for i in 0..p {
            let target = if i == j {
                m[i]
            } else {
                Complex64::new(0.0, 0.0)
            };
            worst = worst.max((r[(i, j)] - target).norm());
        }
    }
    worst
}

/// `|p⁻¹ Σ_i w_i (R_ii − m_i)|` for one test vector.
fn averaged_error(r: &DMatrix<Complex64>, m: &DVector<Complex64>, w: &DVector<f64>) -> f64 {
    let p = r.nrows();
    let mut acc = Complex64::new(0.0, 0.0);
    for i in 0..p {
        acc += (r[(i, i)] - m[i]) * w[i];
    }
    (acc / p as f64).norm()
}

/// The three averaging test vectors: all-ones, alternating signs, and a
/// seeded random sign vector (fixed across trials of a run).
fn make_w_vectors(p: usize, seed: u64) -> Vec<DVector<f64>> {
    let ones = DVector::from_element(p, 1.0);
    let alternating = DVector::from_fn(p, |i, _| if i % 2 == 0 { 1.0 } else { -1.0 });
    let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(seed, SALT_WVEC, 0));
    let signs = DVector::from_fn(p, |_, _| if rng.random::<bool>() { 1.0 } else { -1.0 });
    vec![ones, alternating, signs]
}

/// Two-sided Kolmogorov–Smirnov distance between the empirical spectral
/// measure (ascending eigenvalues) and the deterministic CDF.
fn ks_distance(evs: &[f64], cdf: &SpectralCdf) -> f64 {
    let p = evs.len() as f64;
    let mut d = 0.0f64;
    for (i, &l) in evs.iter().enumerate() {
        let f = cdf.value(l);
        d = d.max((f - i as f64 / p).abs());
        d = d.max((f - (i + 1) as f64 / p).abs());
    }
    d
}

/// Nearest-rank percentile of an unsorted sample (q in (0, 1]).
fn percentile(values: &[f64], q: f64) -> f64 {
    assert!(!values.is_empty(), "percentile of an empty sample");
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let rank = (q * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

/// Shortest round-trip decimal form (re-parsing reproduces the bits).
fn fmt_f(v: f64) -> String {
    format!("{v}")
}

fn fmt_zeta(z: Complex64) -> String {
    if z.im < 0.0 {
        format!("{}-{}i", z.re, -z.im)
    } else {
        format!("{}+{}i", z.re, z.im)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn percentile_uses_nearest_rank() {
        let v = vec![4.0, 1.0, 3.0, 2.0];
        assert_eq!(percentile(&v, 0.5), 2.0);
        assert_eq!(percentile(&v, 0.95), 4.0);
        assert_eq!(percentile(&v, 1.0), 4.0);
        assert_eq!(percentile(&[7.0], 0.5), 7.0);
    }

    #[test]
    fn zeta_labels_are_sign_aware() {
        assert_eq!(fmt_zeta(Complex64::new(1.5, 0.25)), "1.5+0.25i");
        assert_eq!(fmt_zeta(Complex64::new(-2.0, -0.5)), "-2-0.5i");
    }

    #[test]
    fn w_vectors_are_signs_and_reproducible() {
        let ws = make_w_vectors(9, 123);
        assert_eq!(ws.len(), 3);
        assert!(ws[0].iter().all(|&v| v == 1.0));
        assert_eq!(ws[1][0], 1.0);
        assert_eq!(ws[1][1], -1.0);
        assert!(ws[2].iter().all(|&v| v == 1.0 || v == -1.0));
        let again = make_w_vectors(9, 123);
        assert_eq!(ws[2], again[2]);
        let other = make_w_vectors(9, 124);
        assert_ne!(ws[2], other[2]);
    }
}
