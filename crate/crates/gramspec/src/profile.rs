//! Variance profiles, model assumptions, and the symmetrized operator.
//!
//! A profile is the `p×n` matrix `S` of entry variances `s_ik = E|x_ik|²`,
//! normalized so the spectrum of `XX*` lives on an O(1) scale (flatness:
//! `s* = (p+n)·max s_ik` is of order one). The symmetrization
//! `𝔖 = [[0, S], [Sᵗ, 0]]` turns the Gram problem into a Hermitian one on
//! dimension `p+n` and is the operator the vector Dyson equation is written
//! with.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::defaults;
use crate::error::{Error, Result};

/// Default comparability bounds for the aspect ratio p/n.
pub const RATIO_LOWER_DEFAULT: f64 = 0.1;
pub const RATIO_UPPER_DEFAULT: f64 = 10.0;

/// Serialized form of a profile: row-major entries.
#[derive(Serialize, Deserialize)]
struct ProfileData {
    p: usize,
    n: usize,
    entries: Vec<f64>,
}

/// The `p×n` matrix of entry variances with basic well-formedness enforced
/// at construction: nonnegative finite entries and a bounded aspect ratio.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(try_from = "ProfileData", into = "ProfileData")]
pub struct VarianceProfile {
    p: usize,
    n: usize,
    s: DMatrix<f64>,
}

impl TryFrom<ProfileData> for VarianceProfile {
    type Error = Error;
    fn try_from(d: ProfileData) -> Result<Self> {
        VarianceProfile::new(d.p, d.n, d.entries)
    }
}

impl From<VarianceProfile> for ProfileData {
    fn from(v: VarianceProfile) -> ProfileData {
        let mut entries = Vec::with_capacity(v.p * v.n);
        for i in 0..v.p {
            for k in 0..v.n {
                entries.push(v.s[(i, k)]);
            }
        }
        ProfileData {
            p: v.p,
            n: v.n,
            entries,
        }
    }
}

impl VarianceProfile {
    /// Builds a profile from row-major entries, enforcing nonnegative finite
    /// variances and the default aspect-ratio bounds [0.1, 10].
    pub fn new(p: usize, n: usize, entries: Vec<f64>) -> Result<Self> {
        Self::with_ratio_bounds(p, n, entries, RATIO_LOWER_DEFAULT, RATIO_UPPER_DEFAULT)
    }

    /// Like [`VarianceProfile::new`] with explicit comparability bounds
    /// `r1 ≤ p/n ≤ r2`.
    pub fn with_ratio_bounds(
        p: usize,
        n: usize,
        entries: Vec<f64>,
        r1: f64,
        r2: f64,
    ) -> Result<Self> {
        if p == 0 || n == 0 {
            return Err(Error::dimension("profile dimensions must be positive"));
        }
        if entries.len() != p * n {
            return Err(Error::dimension(format!(
                "expected {}·{} = {} entries, got {}",
                p,
                n,
                p * n,
                entries.len()
            )));
        }
        let ratio = p as f64 / n as f64;
        if !(r1..=r2).contains(&ratio) {
            return Err(Error::precondition(format!(
                "aspect ratio p/n = {ratio} outside [{r1}, {r2}]"
            )));
        }
        for (idx, &v) in entries.iter().enumerate() {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidEntry {
                    row: idx / n,
                    col: idx % n,
                    value: v,
                });
            }
        }
        Ok(VarianceProfile {
            p,
            n,
            s: DMatrix::from_row_slice(p, n, &entries),
        })
    }

    /// Uniform profile `s_ik = 1/(p+n)`, so that `s* = 1` exactly. For the
    /// square case this is `s = 1/(2p)`, for `p = 2n` it is `s = 1/(3n)`.
    pub fn uniform(p: usize, n: usize) -> Self {
        let s = 1.0 / (p + n) as f64;
        VarianceProfile {
            p,
            n,
            s: DMatrix::from_element(p, n, s),
        }
    }

    /// Number of rows of `X` (receivers).
    pub fn p(&self) -> usize {
        self.p
    }

    /// Number of columns of `X` (transmitters).
    pub fn n(&self) -> usize {
        self.n
    }

    /// The variance matrix itself.
    pub fn s(&self) -> &DMatrix<f64> {
        &self.s
    }

    /// Flatness constant `s* = (p+n)·max_ik s_ik`.
    pub fn s_star(&self) -> f64 {
        let m = self.s.iter().fold(0.0_f64, |a, &b| a.max(b));
        (self.p + self.n) as f64 * m
    }

    /// The transposed profile (roles of rows and columns interchanged); used
    /// to reduce the `p < n` zero-structure analysis to the `p > n` one.
    pub fn transposed(&self) -> VarianceProfile {
        VarianceProfile {
            p: self.n,
            n: self.p,
            s: self.s.transpose(),
        }
    }

    /// Builds the symmetrized operator `𝔖 = [[0, S], [Sᵗ, 0]]`.
    pub fn symmetrize(&self) -> SymmetrizedProfile {
        SymmetrizedProfile {
            p: self.p,
            n: self.n,
            st: self.s.transpose(),
            s: self.s.clone(),
        }
    }

    /// Loads a profile from a JSON object `{"p", "n", "entries"}` or from a
    /// CSV file with `p` rows of `n` columns, chosen by file extension
    /// (`.json` → JSON, anything else → CSV).
    pub fn load(path: &Path) -> Result<Self> {
        match path.extension().and_then(|e| e.to_str()) {
            Some("json") => Self::from_json_file(path),
            _ => Self::from_csv_file(path),
        }
    }

    /// Loads the JSON representation (row-major `entries`).
    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
    }

    /// Loads a headerless CSV with one row per profile row.
    pub fn from_csv_file(path: &Path) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .from_path(path)
            .map_err(|e| Error::Parse(e.to_string()))?;
        let mut entries: Vec<f64> = Vec::new();
        let mut n: Option<usize> = None;
        let mut p = 0usize;
        for record in rdr.records() {
            let record = record.map_err(|e| Error::Parse(e.to_string()))?;
            let row: Vec<f64> = record
                .iter()
                .map(|f| {
                    f.parse::<f64>()
                        .map_err(|e| Error::Parse(format!("row {}: `{f}`: {e}", p + 1)))
                })
                .collect::<Result<_>>()?;
            match n {
                None => n = Some(row.len()),
                Some(w) if w != row.len() => {
                    return Err(Error::dimension(format!(
                        "CSV row {} has {} columns, expected {w}",
                        p + 1,
                        row.len()
                    )))
                }
                _ => {}
            }
            entries.extend(row);
            p += 1;
        }
        let n = n.ok_or_else(|| Error::Parse("empty CSV profile".into()))?;
        VarianceProfile::new(p, n, entries)
    }

    /// JSON text of this profile (row-major entries).
    pub fn to_json_string(&self) -> String {
        serde_json::to_string(self).expect("profile serialization cannot fail")
    }
}

/// The symmetrized operator `𝔖 = [[0, S], [Sᵗ, 0]]` acting on `ℂ^{p+n}`,
/// stored as the two nonzero blocks (the zero blocks are never materialized).
#[derive(Clone, Debug)]
pub struct SymmetrizedProfile {
    p: usize,
    n: usize,
    s: DMatrix<f64>,
    st: DMatrix<f64>,
}

/// Reusable buffers for the panel-based complex matvec; the real and
/// imaginary parts are packed into two-column panels so nalgebra's gemm
/// kernels do the work.
pub struct SymScratch {
    in1: DMatrix<f64>,
    in2: DMatrix<f64>,
    out1: DMatrix<f64>,
    out2: DMatrix<f64>,
}

impl SymScratch {
    pub fn new(p: usize, n: usize) -> Self {
        SymScratch {
            in1: DMatrix::zeros(p, 2),
            in2: DMatrix::zeros(n, 2),
            out1: DMatrix::zeros(p, 2),
            out2: DMatrix::zeros(n, 2),
        }
    }
}

impl SymmetrizedProfile {
    /// Dimension `p + n` of the symmetrized space.
    pub fn dim(&self) -> usize {
        self.p + self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// The upper-right block `S`.
    pub fn s(&self) -> &DMatrix<f64> {
        &self.s
    }

    /// The lower-left block `Sᵗ` (stored explicitly for fast products).
    pub fn st(&self) -> &DMatrix<f64> {
        &self.st
    }

    /// Applies `v ↦ (S v₂, Sᵗ v₁)` to a real vector.
    pub fn apply_real(&self, v: &DVector<f64>) -> DVector<f64> {
        debug_assert_eq!(v.len(), self.dim());
        let v1 = v.rows(0, self.p);
        let v2 = v.rows(self.p, self.n);
        let mut out = DVector::zeros(self.dim());
        out.rows_mut(0, self.p).gemv(1.0, &self.s, &v2, 0.0);
        out.rows_mut(self.p, self.n).gemv(1.0, &self.st, &v1, 0.0);
        out
    }

    /// Applies `𝔖` to a complex vector using the panel buffers in `scratch`;
    /// `out` must have length `p+n`. No allocation happens here.
    pub fn apply_complex(
        &self,
        v: &DVector<Complex64>,
        out: &mut DVector<Complex64>,
        scratch: &mut SymScratch,
    ) {
        debug_assert_eq!(v.len(), self.dim());
        debug_assert_eq!(out.len(), self.dim());
        for i in 0..self.p {
            scratch.in1[(i, 0)] = v[i].re;
            scratch.in1[(i, 1)] = v[i].im;
        }
        for k in 0..self.n {
            scratch.in2[(k, 0)] = v[self.p + k].re;
            scratch.in2[(k, 1)] = v[self.p + k].im;
        }
        scratch.out1.gemm(1.0, &self.s, &scratch.in2, 0.0);
        scratch.out2.gemm(1.0, &self.st, &scratch.in1, 0.0);
        for i in 0..self.p {
            out[i] = Complex64::new(scratch.out1[(i, 0)], scratch.out1[(i, 1)]);
        }
        for k in 0..self.n {
            out[self.p + k] = Complex64::new(scratch.out2[(k, 0)], scratch.out2[(k, 1)]);
        }
    }

    /// Allocating convenience wrapper around [`SymmetrizedProfile::apply_complex`].
    pub fn apply_complex_alloc(&self, v: &DVector<Complex64>) -> DVector<Complex64> {
        let mut out = DVector::from_element(self.dim(), Complex64::new(0.0, 0.0));
        let mut scratch = SymScratch::new(self.p, self.n);
        self.apply_complex(v, &mut out, &mut scratch);
        out
    }

    /// Materializes the full `(p+n)×(p+n)` matrix (small instances, tests,
    /// dense eigensolves).
    pub fn dense(&self) -> DMatrix<f64> {
        let d = self.dim();
        let mut m = DMatrix::zeros(d, d);
        m.view_mut((0, self.p), (self.p, self.n)).copy_from(&self.s);
        m.view_mut((self.p, 0), (self.n, self.p))
            .copy_from(&self.st);
        m
    }

    /// Unnormalized row sums `‖𝔖_x‖₁` (the entries are nonnegative).
    pub fn row_sums(&self) -> DVector<f64> {
        let mut out = DVector::zeros(self.dim());
        for i in 0..self.p {
            out[i] = self.s.row(i).sum();
        }
        for k in 0..self.n {
            out[self.p + k] = self.st.row(k).sum();
        }
        out
    }

    /// ∞→∞ operator norm: maximal row sum.
    pub fn norm_inf_op(&self) -> f64 {
        self.row_sums().max()
    }

    /// Mixed 2→∞ norm under the normalized-domain convention (see [`crate::avg`]).
    pub fn norm_2_to_inf(&self) -> f64 {
        let nn = self.dim() as f64;
        let mut best = 0.0_f64;
        for i in 0..self.p {
            let sq: f64 = self.s.row(i).iter().map(|x| x * x).sum();
            best = best.max(nn * sq);
        }
        for k in 0..self.n {
            let sq: f64 = self.st.row(k).iter().map(|x| x * x).sum();
            best = best.max(nn * sq);
        }
        best.sqrt()
    }
}

/// Constants certifying primitivity: the smallest powers `L₁, L₂` at which
/// `(SSᵗ)^{L₁}` and `(SᵗS)^{L₂}` are entrywise positive, together with the
/// largest `ψ` such that all entries of the respective power are `≥ ψ/(p+n)`.
#[derive(Clone, Debug, Serialize)]
pub struct Primitivity {
    pub l1: usize,
    pub l2: usize,
    pub psi1: f64,
    pub psi2: f64,
}

/// Detected block structure: a `K×K` fully indecomposable 0/1 pattern with
/// the largest admissible lower-bound constant `φ`.
#[derive(Clone, Debug, Serialize)]
pub struct BlockFid {
    pub k: usize,
    pub phi: f64,
    pub partition_valid: bool,
}

/// Outcome of validating the model assumptions on a profile. Each optional
/// field is present exactly when the corresponding check passed.
#[derive(Clone, Debug, Serialize)]
pub struct AssumptionReport {
    /// Flatness constant `s* = (p+n)·max s_ik`.
    pub s_star: f64,
    /// Primitivity constants, present if both Gram powers become entrywise
    /// positive within the allowed number of powers.
    pub primitivity: Option<Primitivity>,
    /// Block fully-indecomposable structure (square profiles only).
    pub block_fid: Option<BlockFid>,
    /// `|p/n − 1|`, present when the profile is not square.
    pub rectangularity: Option<f64>,
    /// Entrywise lower bound `φ = (p+n)·min s_ik`, present when positive.
    pub lower_bound: Option<f64>,
}

/// Validates the model assumptions on a profile.
///
/// * flatness `s*` is always reported;
/// * primitivity searches the smallest `L₁, L₂ ≤ max_l` with entrywise
///   positive `(SSᵗ)^{L₁}`, `(SᵗS)^{L₂}` and reports the largest admissible
///   `ψ₁, ψ₂`;
/// * block structure is auto-detected on square profiles over contiguous
///   equal cells for `K | p`, `K ≤ 12`;
/// * rectangularity reports `|p/n − 1|` for non-square profiles;
/// * the entrywise lower bound reports `φ = (p+n)·min s_ik` when positive.
pub fn validate(profile: &VarianceProfile, max_l: usize) -> AssumptionReport {
    let (p, n) = (profile.p, profile.n);
    let np = (p + n) as f64;
    let s = &profile.s;

    let primitivity = {
        let g1 = s * s.transpose();
        let g2 = s.transpose() * s;
        let found1 = smallest_positive_power(&g1, max_l);
        let found2 = smallest_positive_power(&g2, max_l);
        match (found1, found2) {
            (Some((l1, min1)), Some((l2, min2))) => Some(Primitivity {
                l1,
                l2,
                psi1: np * min1,
                psi2: np * min2,
            }),
            _ => None,
        }
    };

    let block_fid = if p == n {
        detect_block_fid(profile)
    } else {
        None
    };

    let rectangularity = if p != n {
        Some((p as f64 / n as f64 - 1.0).abs())
    } else {
        None
    };

    let min_entry = s.iter().fold(f64::INFINITY, |a, &b| a.min(b));
    let lower_bound = if min_entry > 0.0 {
        Some(np * min_entry)
    } else {
        None
    };

    AssumptionReport {
        s_star: profile.s_star(),
        primitivity,
        block_fid,
        rectangularity,
        lower_bound,
    }
}

/// Smallest `l ≤ max_l` with `g^l` entrywise positive, returning the minimal
/// entry of that power. Powers are built sequentially — `l` is tiny in
/// practice and sequential products reuse the previous power.
fn smallest_positive_power(g: &DMatrix<f64>, max_l: usize) -> Option<(usize, f64)> {
    let mut power = g.clone();
    for l in 1..=max_l {
        let min = power.iter().fold(f64::INFINITY, |a, &b| a.min(b));
        if min > 0.0 {
            return Some((l, min));
        }
        if l < max_l {
            power = &power * g;
        }
    }
    None
}

/// Exhaustive check of the fully-indecomposable property for a 0/1 pattern:
/// every nonempty `I, J` with `#I + #J ≥ K` must index a submatrix with a
/// nonzero entry. Equivalently, no nonempty `I` may have so many columns
/// vanishing on it that `#I + #{j : z_ij = 0 ∀i∈I} ≥ K`; enumerating `I`
/// covers all violating pairs. Exhaustive over 2^K subsets, so `K ≤ 16`.
pub fn is_fully_indecomposable(z: &DMatrix<f64>) -> Result<bool> {
    let k = z.nrows();
    if z.ncols() != k {
        return Err(Error::dimension("pattern matrix must be square"));
    }
    if k == 0 {
        return Err(Error::dimension("pattern matrix must be nonempty"));
    }
    if k > 16 {
        return Err(Error::precondition(
            "exhaustive full-indecomposability check supports K ≤ 16",
        ));
    }
    // Column masks: bit i of col_mask[j] set iff z[(i, j)] != 0.
    let mut col_mask = vec![0u32; k];
    for (j, mask) in col_mask.iter_mut().enumerate() {
        for i in 0..k {
            if z[(i, j)] != 0.0 {
                *mask |= 1 << i;
            }
        }
    }
    for subset in 1u32..(1 << k) {
        let size = subset.count_ones() as usize;
        let zero_cols = col_mask.iter().filter(|&&m| m & subset == 0).count();
        if size + zero_cols >= k && zero_cols > 0 {
            return Ok(false);
        }
        // size == k with no all-zero column on I is fine; zero_cols == 0
        // can never violate because J must be nonempty.
    }
    Ok(true)
}

/// Checks whether a profile is block fully indecomposable with respect to a
/// given partition of `{0..p}` and 0/1 pattern `Z`: `Z` must be fully
/// indecomposable and every block with `z_ij = 1` must be entrywise positive
/// (so some `φ > 0` works).
///
/// The partition must consist of equal cells covering `{0..p}` exactly, with
/// `K` dividing `p`; the profile must be square (the partition indexes both
/// rows and columns).
pub fn check_block_fid(
    profile: &VarianceProfile,
    partition: &[Vec<usize>],
    z: &DMatrix<f64>,
) -> Result<bool> {
    Ok(block_fid_phi(profile, partition, z)?.is_some())
}

/// As [`check_block_fid`], but returns the largest admissible `φ` (namely
/// `(p+n)·min` over entries of blocks with `z_ij = 1`), or `None` when the
/// structure check fails.
pub fn block_fid_phi(
    profile: &VarianceProfile,
    partition: &[Vec<usize>],
    z: &DMatrix<f64>,
) -> Result<Option<f64>> {
    let p = profile.p;
    if profile.n != p {
        return Err(Error::precondition(
            "block full indecomposability is defined for square profiles",
        ));
    }
    let k = partition.len();
    if k == 0 || z.nrows() != k || z.ncols() != k {
        return Err(Error::dimension(
            "pattern matrix must be K×K for a K-cell partition",
        ));
    }
    if p % k != 0 {
        return Err(Error::dimension(format!(
            "K = {k} does not divide p = {p}"
        )));
    }
    let cell = p / k;
    let mut seen = vec![false; p];
    for part in partition {
        if part.len() != cell {
            return Err(Error::dimension(format!(
                "partition cells must all have size p/K = {cell}"
            )));
        }
        for &x in part {
            if x >= p || seen[x] {
                return Err(Error::dimension(
                    "partition must cover {0..p} without repetition",
                ));
            }
            seen[x] = true;
        }
    }

    if !is_fully_indecomposable(z)? {
        return Ok(None);
    }
    let mut phi = f64::INFINITY;
    for i in 0..k {
        for j in 0..k {
            if z[(i, j)] != 0.0 {
                for &x in &partition[i] {
                    for &y in &partition[j] {
                        phi = phi.min(profile.s[(x, y)]);
                    }
                }
            }
        }
    }
    if phi > 0.0 && phi.is_finite() {
        Ok(Some((2 * p) as f64 * phi))
    } else {
        Ok(None)
    }
}

/// Auto-detection used by [`validate`]: contiguous equal cells for each
/// divisor `K ≤ 12` of `p`, pattern entry 1 iff the block is entrywise
/// positive. Returns the first (smallest-K) structure that passes.
fn detect_block_fid(profile: &VarianceProfile) -> Option<BlockFid> {
    let p = profile.p;
    for k in 1..=defaults::BLOCK_FID_MAX_K.min(p) {
        if p % k != 0 {
            continue;
        }
        let cell = p / k;
        let partition: Vec<Vec<usize>> = (0..k)
            .map(|i| (i * cell..(i + 1) * cell).collect())
            .collect();
        let mut z = DMatrix::zeros(k, k);
        for i in 0..k {
            for j in 0..k {
                let mut min = f64::INFINITY;
                for &x in &partition[i] {
                    for &y in &partition[j] {
                        min = min.min(profile.s[(x, y)]);
                    }
                }
                z[(i, j)] = if min > 0.0 { 1.0 } else { 0.0 };
            }
        }
        if let Ok(Some(phi)) = block_fid_phi(profile, &partition, &z) {
            return Some(BlockFid {
                k,
                phi,
                partition_valid: true,
            });
        }
    }
    None
}
