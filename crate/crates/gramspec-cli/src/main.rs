//! `gramspec`: one reproducible command-line front end for the library.
//!
//! Subcommands: `density` (self-consistent density curve on an ω-grid),
//! `zero` (structure of the spectrum at zero), `stability` (stability
//! operators at one spectral parameter), `ri-sweep` (rotation–inversion
//! stress test on random instances), `verify` (Monte-Carlo verification of
//! local laws, rigidity, and capacity), and `capacity` (deterministic
//! channel capacity).
//!
//! Conventions shared by every subcommand:
//!
//! * Every run writes `<BASE>.manifest.json` echoing the fully resolved
//!   configuration — every tunable, including the ones left at their
//!   defaults — plus the artifact version, so an output directory is
//!   self-describing.
//! * Output files carry no timestamps, and floats are printed with enough
//!   digits to round-trip, so a rerun with identical arguments produces
//!   byte-identical files.
//! * Exit codes: 0 success, 1 a verification check failed, 2 usage or I/O
//!   error, 3 numerical failure (no convergence, singular operator, a
//!   violated certifying identity).
//! * `GRAMSPEC_THREADS` caps the rayon worker count; unset means one worker
//!   per core. The CLI itself stays single-threaded — parallelism lives in
//!   the library calls.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;

use gramspec::defaults::QVE_TOL;
use gramspec::qve::{self, DensityCurve};
use gramspec::stability::{build_b_and_invert, build_f, norm_identity_deviation};
use gramspec::zero::{zero_structure, ZeroStructure};
use gramspec::{Error, Result, VarianceProfile};
use gramspec_mc::{
    ri_sweep, verify, verify_capacity, verify_local_law, verify_rigidity, Distribution,
    SampleSpec, SpectralCdf, VerifySettings,
};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let threads = match configure_threads() {
        Ok(t) => t,
        Err(msg) => {
            eprintln!("error: {msg}");
            return ExitCode::from(2);
        }
    };
    match run(&cli.command, threads) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code(&err))
        }
    }
}

/// Maps library errors onto the documented exit codes: user-facing input
/// problems are 2, numerical failures inside a well-posed run are 3.
fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Io(_)
        | Error::Parse(_)
        | Error::Dimension(_)
        | Error::InvalidEntry { .. }
        | Error::Precondition(_)
        | Error::NotUpperHalfPlane(_) => 2,
        Error::NoConvergence { .. }
        | Error::Singular(_)
        | Error::IdentityViolation { .. }
        | Error::ZeroComponent(_) => 3,
    }
}

/// Applies `GRAMSPEC_THREADS` to the global rayon pool before any parallel
/// work starts. Returns the cap for the manifest (`None` = library default).
fn configure_threads() -> std::result::Result<Option<usize>, String> {
    let Ok(raw) = std::env::var("GRAMSPEC_THREADS") else {
        return Ok(None);
    };
    let threads: usize = raw
        .trim()
        .parse()
        .map_err(|_| format!("GRAMSPEC_THREADS must be a positive integer, got {raw:?}"))?;
    if threads == 0 {
        return Err("GRAMSPEC_THREADS must be a positive integer, got \"0\"".into());
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| format!("cannot configure {threads} rayon threads: {e}"))?;
    Ok(Some(threads))
}

#[derive(Parser)]
#[command(
    name = "gramspec",
    version,
    about = "Deterministic spectral density of random Gram matrices with a variance profile: \
             density curves, zero-structure analysis, stability reports, and Monte-Carlo verification"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the self-consistent density on an ω-grid and write a plot-ready curve.
    Density(DensityArgs),
    /// Analyze the spectrum near zero: atom, gap, or 1/√ω singularity.
    Zero(ZeroArgs),
    /// Report the stability operators F and B at one spectral parameter.
    Stability(StabilityArgs),
    /// Stress-test the rotation–inversion bound on random structured instances.
    RiSweep(RiSweepArgs),
    /// Monte-Carlo verification: local laws, eigenvalue rigidity, capacity.
    Verify(VerifyArgs),
    /// Deterministic channel capacity for a given noise level σ².
    Capacity(CapacityArgs),
}

// ---------------------------------------------------------------------------
// Shared argument groups and parsers
// ---------------------------------------------------------------------------

#[derive(Args)]
struct ProfileArgs {
    /// Variance profile file: `.json` ({"p", "n", "entries"} row-major) or
    /// `.csv` (one matrix row per line).
    #[arg(
        long,
        value_name = "PATH",
        conflicts_with = "uniform",
        required_unless_present = "uniform"
    )]
    profile: Option<PathBuf>,

    /// Built-in uniform profile s_ik = 1/(p+n) with the given shape, e.g. 400x200.
    #[arg(long, value_name = "PxN", value_parser = parse_shape)]
    uniform: Option<Shape>,
}

#[derive(Clone, Copy)]
struct Shape {
    p: usize,
    n: usize,
}

fn parse_shape(s: &str) -> std::result::Result<Shape, String> {
    let (a, b) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("expected PxN, got {s:?}"))?;
    let p = a
        .trim()
        .parse()
        .map_err(|_| format!("bad row count {a:?}"))?;
    let n = b
        .trim()
        .parse()
        .map_err(|_| format!("bad column count {b:?}"))?;
    if p == 0 || n == 0 {
        return Err("profile dimensions must be positive".into());
    }
    Ok(Shape { p, n })
}

fn load_profile(args: &ProfileArgs) -> Result<(VarianceProfile, serde_json::Value)> {
    match (&args.profile, args.uniform) {
        (Some(path), None) => {
            let profile = VarianceProfile::load(path).map_err(|e| match e {
                // Name the offending file; the raw OS error does not.
                Error::Io(io) => Error::Io(std::io::Error::new(
                    io.kind(),
                    format!("{}: {io}", path.display()),
                )),
                other => other,
            })?;
            Ok((profile, serde_json::json!({ "kind": "file", "path": path })))
        }
        (None, Some(shape)) => Ok((
            VarianceProfile::uniform(shape.p, shape.n),
            serde_json::json!({ "kind": "uniform" }),
        )),
        // clap enforces exactly one of --profile / --uniform.
        _ => unreachable!("argument group guarantees one profile source"),
    }
}

/// Inclusive linear grid specification `start:stop:count`.
#[derive(Clone, Copy)]
struct GridSpec {
    start: f64,
    stop: f64,
    count: usize,
}

impl GridSpec {
    fn points(&self) -> Vec<f64> {
        let step = (self.stop - self.start) / (self.count - 1) as f64;
        let mut grid: Vec<f64> = (0..self.count)
            .map(|i| self.start + step * i as f64)
            .collect();
        // Land on the endpoint exactly regardless of rounding in the steps.
        *grid.last_mut().expect("count >= 2") = self.stop;
        grid
    }
}

fn parse_grid(s: &str) -> std::result::Result<GridSpec, String> {
    let parts: Vec<&str> = s.split(':').collect();
    let [start, stop, count] = parts.as_slice() else {
        return Err(format!("expected start:stop:count, got {s:?}"));
    };
    let start: f64 = start
        .trim()
        .parse()
        .map_err(|_| format!("bad grid start {start:?}"))?;
    let stop: f64 = stop
        .trim()
        .parse()
        .map_err(|_| format!("bad grid stop {stop:?}"))?;
    let count: usize = count
        .trim()
        .parse()
        .map_err(|_| format!("bad grid count {count:?}"))?;
    if !start.is_finite() || start <= 0.0 {
        return Err("grid start must be a positive number (the density lives on ω > 0)".into());
    }
    if !stop.is_finite() || stop <= start {
        return Err("grid stop must be finite and larger than start".into());
    }
    if count < 2 {
        return Err("grid count must be at least 2".into());
    }
    Ok(GridSpec { start, stop, count })
}

/// Decreasing ladder of smoothing parameters η, comma-separated.
#[derive(Clone)]
struct Ladder(Vec<f64>);

fn parse_ladder(s: &str) -> std::result::Result<Ladder, String> {
    let mut rungs = Vec::new();
    for part in s.split(',') {
        let eta: f64 = part
            .trim()
            .parse()
            .map_err(|_| format!("bad ladder entry {part:?}"))?;
        if !eta.is_finite() || eta <= 0.0 {
            return Err(format!("ladder entries must be positive, got {eta}"));
        }
        if let Some(&prev) = rungs.last() {
            if eta >= prev {
                return Err("ladder must be strictly decreasing".into());
            }
        }
        rungs.push(eta);
    }
    if rungs.len() < 2 {
        return Err("ladder needs at least two rungs for extrapolation".into());
    }
    Ok(Ladder(rungs))
}

/// Complex parameters in `a+bi` form (`0.5+0.1i`, `3-0.5i`, `2i`).
fn parse_complex(s: &str) -> std::result::Result<Complex64, String> {
    let t = s.trim();
    let body = t
        .strip_suffix('i')
        .ok_or_else(|| format!("expected a+bi with a trailing 'i', got {t:?}"))?;
    let bytes = body.as_bytes();
    if bytes.is_empty() {
        return Ok(Complex64::new(0.0, 1.0));
    }
    // Split at the sign of the imaginary part: the last '+'/'-' that is not
    // an exponent sign and not the leading sign of the real part.
    let mut split = None;
    for k in (1..bytes.len()).rev() {
        if (bytes[k] == b'+' || bytes[k] == b'-') && !matches!(bytes[k - 1], b'e' | b'E') {
            split = Some(k);
            break;
        }
    }
    let (re_str, im_str) = match split {
        Some(k) => (&body[..k], &body[k..]),
        None => ("0", body), // pure imaginary: "2i", "-0.4i"
    };
    let re: f64 = re_str
        .trim()
        .parse()
        .map_err(|_| format!("bad real part {re_str:?}"))?;
    let im: f64 = match im_str.trim() {
        "+" => 1.0,
        "-" => -1.0,
        other => other
            .parse()
            .map_err(|_| format!("bad imaginary part {other:?}"))?,
    };
    Ok(Complex64::new(re, im))
}

fn parse_distribution(s: &str) -> std::result::Result<Distribution, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn fmt_complex(c: Complex64) -> String {
    if c.im >= 0.0 {
        format!("{}+{}i", c.re, c.im)
    } else {
        format!("{}{}i", c.re, c.im)
    }
}

// ---------------------------------------------------------------------------
// Output plumbing
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    /// Plot-ready CSV only.
    Csv,
    /// CSV plus the full curve as JSON.
    Json,
}

impl Format {
    fn name(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

fn output_base(output: &Option<PathBuf>, subcommand: &str) -> PathBuf {
    output
        .clone()
        .unwrap_or_else(|| PathBuf::from(format!("gramspec-{subcommand}")))
}

fn suffixed(base: &Path, suffix: &str) -> PathBuf {
    let mut name = base.as_os_str().to_os_string();
    name.push(suffix);
    PathBuf::from(name)
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    fs::write(path, bytes)?;
    Ok(())
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(json_err)?;
    text.push('\n');
    write_file(path, text.as_bytes())
}

fn json_err(e: serde_json::Error) -> Error {
    Error::Parse(format!("serialization failed: {e}"))
}

fn csv_err(e: csv::Error) -> Error {
    Error::Parse(format!("CSV writing failed: {e}"))
}

/// The manifest every run writes next to its outputs: artifact identity plus
/// the fully resolved configuration (all tunables, defaults included).
fn write_manifest(
    base: &Path,
    subcommand: &str,
    threads: Option<usize>,
    config: serde_json::Value,
) -> Result<PathBuf> {
    let manifest = serde_json::json!({
        "artifact": "gramspec-cli",
        "version": env!("CARGO_PKG_VERSION"),
        "manifest_schema": 1,
        "subcommand": subcommand,
        "threads": threads,
        "config": config,
    });
    let path = suffixed(base, ".manifest.json");
    write_json(&path, &manifest)?;
    Ok(path)
}

fn write_density_csv(path: &Path, curve: &DensityCurve) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["omega", "pi"]).map_err(csv_err)?;
    for (omega, value) in curve.grid.iter().zip(curve.values.iter()) {
        // Shortest round-trip formatting: re-parsing reproduces the f64 exactly.
        w.write_record([format!("{omega}"), format!("{value}")])
            .map_err(csv_err)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Error::Parse(format!("CSV writing failed: {e}")))?;
    write_file(path, &bytes)
}

// ---------------------------------------------------------------------------
// density
// ---------------------------------------------------------------------------

#[derive(Args)]
struct DensityArgs {
    #[command(flatten)]
    profile: ProfileArgs,

    /// Evaluation grid ω as start:stop:count (inclusive endpoints, start > 0).
    #[arg(long, default_value = "0.001:3:600", value_parser = parse_grid)]
    grid: GridSpec,

    /// Smoothing ladder η₁ > η₂ > … for the extrapolation to the real axis.
    #[arg(long, default_value = "0.01,0.001,0.0001", value_parser = parse_ladder)]
    eta: Ladder,

    /// Fixed-point residual tolerance.
    #[arg(long, default_value_t = QVE_TOL)]
    tol: f64,

    /// Base path for outputs (<BASE>.csv, <BASE>.manifest.json, ...).
    #[arg(long, value_name = "BASE")]
    output: Option<PathBuf>,

    /// Data format: csv writes the curve only, json adds the full curve object.
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

fn cmd_density(args: &DensityArgs, threads: Option<usize>) -> Result<ExitCode> {
    let (profile, source) = load_profile(&args.profile)?;
    let grid = args.grid.points();
    let curve = qve::density(&profile, &grid, &args.eta.0, args.tol)?;

    let base = output_base(&args.output, "density");
    write_manifest(
        &base,
        "density",
        threads,
        serde_json::json!({
            "profile": source,
            "p": profile.p(),
            "n": profile.n(),
            "grid": {
                "start": args.grid.start,
                "stop": args.grid.stop,
                "count": args.grid.count,
            },
            "eta_ladder": args.eta.0,
            "tol": args.tol,
            "output": base,
            "format": args.format.name(),
        }),
    )?;
    write_density_csv(&suffixed(&base, ".csv"), &curve)?;
    if args.format == Format::Json {
        let value = serde_json::to_value(&curve).map_err(json_err)?;
        write_json(&suffixed(&base, ".json"), &value)?;
    }

    println!("profile: p = {}, n = {}", profile.p(), profile.n());
    println!("point mass at zero: {}", curve.point_mass);
    let mut intervals = String::new();
    for (a, b) in &curve.support_intervals {
        let _ = write!(intervals, " [{a:.6}, {b:.6}]");
    }
    if curve.support_intervals.is_empty() {
        intervals.push_str(" none above threshold");
    }
    println!("support intervals:{intervals}");
    println!("total mass: {:.6}", curve.total_mass());
    if !curve.flagged.is_empty() {
        println!(
            "flagged grid points (solver fell short of tolerance): {}",
            curve.flagged.len()
        );
    }
    println!("wrote {}.csv and {}.manifest.json", base.display(), base.display());
    Ok(ExitCode::SUCCESS)
}

// ---------------------------------------------------------------------------
// zero
// ---------------------------------------------------------------------------

#[derive(Args)]
struct ZeroArgs {
    #[command(flatten)]
    profile: ProfileArgs,

    /// Solver tolerance for the edge equations.
    #[arg(long, default_value_t = QVE_TOL)]
    tol: f64,

    /// Base path for outputs (<BASE>.json, <BASE>.manifest.json).
    #[arg(long, value_name = "BASE")]
    output: Option<PathBuf>,
}

fn cmd_zero(args: &ZeroArgs, threads: Option<usize>) -> Result<ExitCode> {
    let (profile, source) = load_profile(&args.profile)?;
    let structure = zero_structure(&profile, args.tol)?;

    let base = output_base(&args.output, "zero");
    write_manifest(
        &base,
        "zero",
        threads,
        serde_json::json!({
            "profile": source,
            "p": profile.p(),
            "n": profile.n(),
            "tol": args.tol,
            "output": base,
        }),
    )?;
    let value = serde_json::to_value(&structure).map_err(json_err)?;
    write_json(&suffixed(&base, ".json"), &value)?;

    println!("profile: p = {}, n = {}", profile.p(), profile.n());
    match &structure {
        ZeroStructure::Hard {
            singular_coefficient,
            ..
        } => {
            println!("kind: hard edge (square profile)");
            println!("point mass at zero: 0");
            println!("spectral gap above zero: none");
            println!("density near zero: pi(omega) ~ c/sqrt(omega), c = {singular_coefficient:.6}");
        }
        ZeroStructure::Soft {
            point_mass,
            delta_pi,
            ..
        } => {
            println!("kind: soft edge (rectangular profile)");
            println!("point mass at zero: {point_mass}");
            println!("spectral gap above zero: delta_pi = {delta_pi:.6}");
        }
    }
    println!("wrote {}.json and {}.manifest.json", base.display(), base.display());
    Ok(ExitCode::SUCCESS)
}

// ---------------------------------------------------------------------------
// stability
// ---------------------------------------------------------------------------

#[derive(Args)]
struct StabilityArgs {
    #[command(flatten)]
    profile: ProfileArgs,

    /// Spectral parameter z in the upper half-plane, as a+bi.
    #[arg(long, default_value = "0.5+0.1i", value_parser = parse_complex)]
    z: Complex64,

    /// Fixed-point residual tolerance.
    #[arg(long, default_value_t = QVE_TOL)]
    tol: f64,

    /// Base path for outputs (<BASE>.json, <BASE>.manifest.json).
    #[arg(long, value_name = "BASE")]
    output: Option<PathBuf>,
}

fn cmd_stability(args: &StabilityArgs, threads: Option<usize>) -> Result<ExitCode> {
    let (profile, source) = load_profile(&args.profile)?;
    let sym = profile.symmetrize();
    let solution = qve::solve_at(&sym, args.z, args.tol, None)?;
    let opr = build_f(&sym, &solution);
    let report = build_b_and_invert(&opr, &solution)?;
    let f = nalgebra::DVector::from_column_slice(&report.f);
    let deviation = norm_identity_deviation(&opr, report.norm_f, &f);

    let base = output_base(&args.output, "stability");
    write_manifest(
        &base,
        "stability",
        threads,
        serde_json::json!({
            "profile": source,
            "p": profile.p(),
            "n": profile.n(),
            "z": fmt_complex(args.z),
            "tol": args.tol,
            "output": base,
        }),
    )?;
    let mut value = serde_json::to_value(&report).map_err(json_err)?;
    value
        .as_object_mut()
        .expect("stability report serializes as an object")
        .insert("norm_identity_deviation".into(), deviation.into());
    write_json(&suffixed(&base, ".json"), &value)?;

    println!("profile: p = {}, n = {}", profile.p(), profile.n());
    println!("spectral parameter: z = {}", fmt_complex(args.z));
    println!("norm_F = {:.6} (stability requires < 1)", report.norm_f);
    println!("saturated norm identity deviation: {:.3e}", deviation);
    println!("spectral gap of F/norm_F: {:.6}", report.gap_fft);
    println!(
        "inverse stability operator: |B^-1|_2 = {:.6}, |B^-1|_inf bound = {:.6}",
        report.norm_b_inv_2, report.norm_b_inv_inf
    );
    println!("wrote {}.json and {}.manifest.json", base.display(), base.display());
    Ok(ExitCode::SUCCESS)
}

// ---------------------------------------------------------------------------
// ri-sweep
// ---------------------------------------------------------------------------

#[derive(Args)]
struct RiSweepArgs {
    /// Number of random instances.
    #[arg(long, default_value_t = 10_000)]
    trials: usize,

    /// Maximum total dimension p + n of an instance.
    #[arg(long, default_value_t = 32)]
    max_dim: usize,

    /// Base seed for the instance stream.
    #[arg(long, default_value_t = 1)]
    seed: u64,

    /// Base path for outputs (<BASE>.csv, <BASE>.json, <BASE>.manifest.json).
    #[arg(long, value_name = "BASE")]
    output: Option<PathBuf>,
}

fn cmd_ri_sweep(args: &RiSweepArgs, threads: Option<usize>) -> Result<ExitCode> {
    let sweep = ri_sweep(args.trials, args.max_dim, args.seed)?;

    let base = output_base(&args.output, "ri-sweep");
    write_manifest(
        &base,
        "ri-sweep",
        threads,
        serde_json::json!({
            "trials": args.trials,
            "max_dim": args.max_dim,
            "seed": args.seed,
            "output": base,
        }),
    )?;
    write_file(&suffixed(&base, ".json"), sweep.to_json()?.as_bytes())?;
    let mut csv_bytes = Vec::new();
    sweep.write_csv(&mut csv_bytes)?;
    write_file(&suffixed(&base, ".csv"), &csv_bytes)?;

    println!(
        "instances: {} (block dimensions up to {})",
        sweep.trials, sweep.max_dim
    );
    println!("singular instances (bound vacuous, consistency checked): {}", sweep.singular_count);
    println!("bound violations: {}", sweep.inconsistency_count);
    match sweep.max_ratio_trial {
        Some(trial) => println!(
            "largest lhs/bound ratio: {:.6} (trial {trial})",
            sweep.max_ratio
        ),
        None => println!("largest lhs/bound ratio: n/a (all instances singular)"),
    }
    println!("wrote {}.csv, {}.json, {}.manifest.json", base.display(), base.display(), base.display());
    if sweep.all_consistent {
        println!("result: PASS (no violations)");
        Ok(ExitCode::SUCCESS)
    } else {
        println!("result: FAIL ({} violations)", sweep.inconsistency_count);
        Ok(ExitCode::from(1))
    }
}

// ---------------------------------------------------------------------------
// verify
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, ValueEnum)]
enum Sections {
    /// Local laws, rigidity, and (with --sigma2) capacity.
    All,
    /// Local laws only.
    LocalLaw,
    /// Rigidity, kernel dimension, gap, and spectrum-top checks only.
    Rigidity,
    /// Capacity comparison only (requires --sigma2).
    Capacity,
}

impl Sections {
    fn name(self) -> &'static str {
        match self {
            Sections::All => "all",
            Sections::LocalLaw => "local-law",
            Sections::Rigidity => "rigidity",
            Sections::Capacity => "capacity",
        }
    }
}

#[derive(Args)]
struct VerifyArgs {
    #[command(flatten)]
    profile: ProfileArgs,

    /// Number of Monte-Carlo trials.
    #[arg(long, default_value_t = 50)]
    trials: usize,

    /// Base seed; trial t draws from an independent stream derived from it.
    #[arg(long, default_value_t = 1)]
    seed: u64,

    /// Entry distribution: gaussian-real, gaussian-complex, or rademacher.
    #[arg(long, default_value = "gaussian-real", value_parser = parse_distribution)]
    distribution: Distribution,

    /// Which verification sections to run.
    #[arg(long, value_enum, default_value_t = Sections::All)]
    sections: Sections,

    /// Local-law scale exponent: η = p^(γ-1) in the bulk.
    #[arg(long, default_value_t = 0.6)]
    gamma: f64,

    /// Bulk energies τ for the local-law checks (comma-separated).
    #[arg(long, value_delimiter = ',', default_value = "1")]
    bulk_tau: Vec<f64>,

    /// Spectral parameters away from the spectrum, as a+bi (comma-separated).
    #[arg(long, value_delimiter = ',', default_value = "3+0.5i", value_parser = parse_complex)]
    away_zeta: Vec<Complex64>,

    /// Quantile locations τ for the rigidity checks (comma-separated).
    #[arg(long, value_delimiter = ',', default_value = "1")]
    rigidity_tau: Vec<f64>,

    /// Noise level σ² for the capacity comparison (omitting it skips capacity).
    #[arg(long)]
    sigma2: Option<f64>,

    /// Grid resolution for the deterministic spectral CDF.
    #[arg(long, default_value_t = 1000)]
    cdf_points: usize,

    /// Fixed-point residual tolerance.
    #[arg(long, default_value_t = QVE_TOL)]
    tol: f64,

    /// Base path for outputs (<BASE>.report.json, <BASE>.csv, <BASE>.manifest.json).
    #[arg(long, value_name = "BASE")]
    output: Option<PathBuf>,
}

fn cmd_verify(args: &VerifyArgs, threads: Option<usize>) -> Result<ExitCode> {
    let (profile, source) = load_profile(&args.profile)?;
    let (p, n) = (profile.p(), profile.n());
    let spec = SampleSpec::new(profile, args.distribution, args.seed, args.trials)?;
    let settings = VerifySettings {
        gamma: args.gamma,
        bulk_tau: args.bulk_tau.clone(),
        away_zeta: args.away_zeta.clone(),
        rigidity_tau: args.rigidity_tau.clone(),
        sigma2: args.sigma2,
        qve_tol: args.tol,
        cdf_points: args.cdf_points,
    };
    let report = match args.sections {
        Sections::All => verify(&spec, &settings)?,
        Sections::LocalLaw => verify_local_law(&spec, &settings)?,
        Sections::Rigidity => verify_rigidity(&spec, &settings)?,
        Sections::Capacity => verify_capacity(&spec, &settings)?,
    };

    let base = output_base(&args.output, "verify");
    let away: Vec<String> = args.away_zeta.iter().map(|&z| fmt_complex(z)).collect();
    write_manifest(
        &base,
        "verify",
        threads,
        serde_json::json!({
            "profile": source,
            "p": p,
            "n": n,
            "trials": args.trials,
            "seed": args.seed,
            "distribution": args.distribution.to_string(),
            "sections": args.sections.name(),
            "gamma": args.gamma,
            "bulk_tau": args.bulk_tau,
            "away_zeta": away,
            "rigidity_tau": args.rigidity_tau,
            "sigma2": args.sigma2,
            "cdf_points": args.cdf_points,
            "tol": args.tol,
            "output": base,
        }),
    )?;
    write_file(&suffixed(&base, ".report.json"), report.to_json()?.as_bytes())?;
    let mut csv_bytes = Vec::new();
    report.write_csv(&mut csv_bytes)?;
    write_file(&suffixed(&base, ".csv"), &csv_bytes)?;

    println!(
        "ensemble: p = {p}, n = {n}, {} entries, {} trials, seed {}",
        report.distribution, report.trials, report.seed
    );
    for notice in &report.notices {
        println!("note: {notice}");
    }
    for check in &report.checks {
        let tag = if check.passed { "PASS" } else { "FAIL" };
        println!(
            "[{tag}] {}: observed {:.4e}, threshold {:.4e}",
            check.name, check.observed, check.threshold
        );
    }
    println!(
        "wrote {}.report.json, {}.csv, {}.manifest.json",
        base.display(), base.display(), base.display()
    );
    if report.all_passed {
        println!("result: PASS ({} checks)", report.checks.len());
        Ok(ExitCode::SUCCESS)
    } else {
        let failed = report.checks.iter().filter(|c| !c.passed).count();
        println!("result: FAIL ({failed} of {} checks)", report.checks.len());
        Ok(ExitCode::from(1))
    }
}

// ---------------------------------------------------------------------------
// capacity
// ---------------------------------------------------------------------------

#[derive(Args)]
struct CapacityArgs {
    #[command(flatten)]
    profile: ProfileArgs,

    /// Noise level σ² > 0.
    #[arg(long)]
    sigma2: f64,

    /// Grid resolution for the deterministic spectral CDF.
    #[arg(long, default_value_t = 600)]
    cdf_points: usize,

    /// Fixed-point residual tolerance.
    #[arg(long, default_value_t = QVE_TOL)]
    tol: f64,

    /// Base path for outputs (<BASE>.json, <BASE>.manifest.json).
    #[arg(long, value_name = "BASE")]
    output: Option<PathBuf>,
}

fn cmd_capacity(args: &CapacityArgs, threads: Option<usize>) -> Result<ExitCode> {
    let (profile, source) = load_profile(&args.profile)?;
    let cdf = SpectralCdf::new(&profile, args.cdf_points, args.tol)?;
    let value = qve::capacity(&cdf.curve, args.sigma2)?;

    let base = output_base(&args.output, "capacity");
    write_manifest(
        &base,
        "capacity",
        threads,
        serde_json::json!({
            "profile": source,
            "p": profile.p(),
            "n": profile.n(),
            "sigma2": args.sigma2,
            "cdf_points": args.cdf_points,
            "tol": args.tol,
            "output": base,
        }),
    )?;
    write_json(
        &suffixed(&base, ".json"),
        &serde_json::json!({
            "sigma2": args.sigma2,
            "capacity": value,
            "point_mass": cdf.atom,
            "spectral_mass": cdf.total_mass(),
        }),
    )?;

    println!("profile: p = {}, n = {}", profile.p(), profile.n());
    println!("sigma2 = {}", args.sigma2);
    println!("capacity = {}", value);
    println!("wrote {}.json and {}.manifest.json", base.display(), base.display());
    Ok(ExitCode::SUCCESS)
}

// ---------------------------------------------------------------------------

fn run(command: &Command, threads: Option<usize>) -> Result<ExitCode> {
    match command {
        Command::Density(args) => cmd_density(args, threads),
        Command::Zero(args) => cmd_zero(args, threads),
        Command::Stability(args) => cmd_stability(args, threads),
        Command::RiSweep(args) => cmd_ri_sweep(args, threads),
        Command::Verify(args) => cmd_verify(args, threads),
        Command::Capacity(args) => cmd_capacity(args, threads),
    }
}
