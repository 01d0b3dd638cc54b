//! End-to-end checks of the `gramspec` binary: argument handling, exit
//! codes, file artifacts, stdout summaries, and byte-level reproducibility.

use std::f64::consts::PI;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn run_in(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gramspec"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("the gramspec binary should run")
}

fn stdout_of(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).expect("stdout is UTF-8")
}

fn stderr_of(out: &Output) -> String {
    String::from_utf8(out.stderr.clone()).expect("stderr is UTF-8")
}

fn read_json(path: &Path) -> serde_json::Value {
    let text = fs::read_to_string(path).expect("output file exists");
    serde_json::from_str(&text).expect("output file is valid JSON")
}

/// Parses a two-column density CSV into (omega, pi) pairs.
fn read_density_csv(path: &Path) -> Vec<(f64, f64)> {
    let mut reader = csv::Reader::from_path(path).expect("CSV file exists");
    let headers = reader.headers().expect("CSV has headers").clone();
    assert_eq!(headers, vec!["omega", "pi"]);
    reader
        .records()
        .map(|record| {
            let record = record.expect("CSV row parses");
            let omega: f64 = record[0].parse().expect("omega is a float");
            let value: f64 = record[1].parse().expect("pi is a float");
            (omega, value)
        })
        .collect()
}

#[test]
fn missing_profile_file_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(dir.path(), &["density", "--profile", "absent.json"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(
        stderr_of(&out).contains("absent.json"),
        "the error message should name the missing file"
    );
}

#[test]
fn conflicting_profile_sources_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(
        dir.path(),
        &["density", "--profile", "a.json", "--uniform", "8x8"],
    );
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn capacity_section_without_sigma2_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(
        dir.path(),
        &[
            "verify",
            "--uniform",
            "8x8",
            "--trials",
            "1",
            "--sections",
            "capacity",
        ],
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr_of(&out).contains("σ²") || stderr_of(&out).contains("sigma"));
}

#[test]
fn density_square_matches_the_scalar_form() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(
        dir.path(),
        &[
            "density",
            "--uniform",
            "48x48",
            "--grid",
            "0.001:3:200",
            "--output",
            "d",
        ],
    );
    assert_eq!(out.status.code(), Some(0), "{}", stderr_of(&out));
    let text = stdout_of(&out);
    assert!(text.contains("point mass at zero: 0\n"));
    assert!(text.contains("support intervals: ["));

    // Uniform square profile: pi(omega) = sqrt(2/omega - 1)/pi on (0, 2],
    // independently of the matrix dimension.
    let curve = read_density_csv(&dir.path().join("d.csv"));
    assert_eq!(curve.len(), 200);
    for &(omega, value) in &curve {
        if (0.3..=1.7).contains(&omega) {
            let exact = (2.0 / omega - 1.0).sqrt() / PI;
            assert!(
                (value - exact).abs() < 2e-3,
                "pi({omega}) = {value}, closed form {exact}"
            );
        }
    }
    // The support edge sits at omega = 2 up to the grid resolution (~0.015).
    let right_edge = curve
        .iter()
        .filter(|&&(_, v)| v > 1e-3)
        .map(|&(w, _)| w)
        .fold(0.0, f64::max);
    assert!(
        (right_edge - 2.0).abs() < 0.05,
        "support right edge {right_edge}"
    );
}

#[test]
fn density_rectangular_prints_the_atom() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(
        dir.path(),
        &[
            "density",
            "--uniform",
            "24x12",
            "--grid",
            "0.001:3:150",
            "--output",
            "d",
        ],
    );
    assert_eq!(out.status.code(), Some(0), "{}", stderr_of(&out));
    let text = stdout_of(&out);
    assert!(
        text.contains("point mass at zero: 0.5\n"),
        "p = 2n puts mass exactly 1/2 at zero:\n{text}"
    );

    // The a.c. support starts above the spectral gap, away from zero.
    let curve = read_density_csv(&dir.path().join("d.csv"));
    let left_edge = curve
        .iter()
        .filter(|&&(_, v)| v > 1e-3)
        .map(|&(w, _)| w)
        .fold(f64::INFINITY, f64::min);
    assert!(
        left_edge > 0.02,
        "rectangular profile should show a gap above zero, left edge {left_edge}"
    );
}

#[test]
fn density_csv_round_trips_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(
        dir.path(),
        &[
            "density",
            "--uniform",
            "16x16",
            "--grid",
            "0.01:2.5:80",
            "--format",
            "json",
            "--output",
            "d",
        ],
    );
    assert_eq!(out.status.code(), Some(0), "{}", stderr_of(&out));

    // Every CSV field re-parses to a float whose shortest representation is
    // the field itself, so parse -> format -> parse is the identity.
    let text = fs::read_to_string(dir.path().join("d.csv")).unwrap();
    let mut rows = 0;
    for line in text.lines().skip(1) {
        for field in line.split(',') {
            let value: f64 = field.parse().expect("field parses");
            assert_eq!(format!("{value}"), field, "field {field} round-trips");
        }
        rows += 1;
    }
    assert_eq!(rows, 80);

    // The JSON artifact carries the same curve bit for bit.
    let json = read_json(&dir.path().join("d.json"));
    let csv_curve = read_density_csv(&dir.path().join("d.csv"));
    let grid = json["grid"].as_array().unwrap();
    let values = json["values"].as_array().unwrap();
    assert_eq!(grid.len(), csv_curve.len());
    for (i, &(omega, value)) in csv_curve.iter().enumerate() {
        assert_eq!(grid[i].as_f64().unwrap(), omega);
        assert_eq!(values[i].as_f64().unwrap(), value);
    }
}

#[test]
fn zero_square_reports_the_hard_edge() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(dir.path(), &["zero", "--uniform", "24x24", "--output", "z"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr_of(&out));
    assert!(stdout_of(&out).contains("hard edge"));

    let json = read_json(&dir.path().join("z.json"));
    assert_eq!(json["kind"], "hard");
    // Uniform square profile: the density is sqrt(2)/pi * 1/sqrt(omega) + O(1).
    let coefficient = json["singular_coefficient"].as_f64().unwrap();
    assert!(
        (coefficient - std::f64::consts::SQRT_2 / PI).abs() < 1e-6,
        "singular coefficient {coefficient}"
    );
}

#[test]
fn zero_rectangular_reports_atom_and_gap() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(dir.path(), &["zero", "--uniform", "24x12", "--output", "z"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr_of(&out));

    let json = read_json(&dir.path().join("z.json"));
    assert_eq!(json["kind"], "soft");
    assert_eq!(json["point_mass"].as_f64().unwrap(), 0.5);
    let delta_pi = json["delta_pi"].as_f64().unwrap();
    // Certified gap estimate: positive and below the exact value (3-2*sqrt(2))/3.
    assert!(delta_pi > 0.03 && delta_pi < 0.06, "delta_pi {delta_pi}");
}

#[test]
fn stability_square_is_stable_inside_the_bulk() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(
        dir.path(),
        &[
            "stability",
            "--uniform",
            "32x32",
            "--z",
            "0.5+0.1i",
            "--output",
            "s",
        ],
    );
    assert_eq!(out.status.code(), Some(0), "{}", stderr_of(&out));
    assert!(stdout_of(&out).contains("norm_F"));

    let json = read_json(&dir.path().join("s.json"));
    let norm_f = json["norm_f"].as_f64().unwrap();
    assert!(
        norm_f < 1.0 && norm_f > 0.5,
        "inside the bulk the saturated norm sits strictly below 1, got {norm_f}"
    );
    let deviation = json["norm_identity_deviation"].as_f64().unwrap();
    assert!(deviation < 1e-8, "norm identity deviation {deviation}");
    assert!(json["norm_b_inv_2"].as_f64().unwrap() >= 1.0 - 1e-12);
}

#[test]
fn lower_half_plane_parameter_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(
        dir.path(),
        &["stability", "--uniform", "8x8", "--z", "0.5-0.1i"],
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr_of(&out).contains("Im"));
}

#[test]
fn capacity_with_a_huge_noise_floor_vanishes() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(
        dir.path(),
        &[
            "capacity",
            "--uniform",
            "32x32",
            "--sigma2",
            "1e9",
            "--cdf-points",
            "128",
            "--output",
            "c",
        ],
    );
    assert_eq!(out.status.code(), Some(0), "{}", stderr_of(&out));

    let text = stdout_of(&out);
    let line = text
        .lines()
        .find(|l| l.starts_with("capacity = "))
        .expect("capacity line printed");
    let printed: f64 = line["capacity = ".len()..].parse().unwrap();
    assert!(printed > 0.0 && printed < 1e-8, "capacity {printed}");

    // The JSON artifact carries the identical number.
    let json = read_json(&dir.path().join("c.json"));
    assert_eq!(json["capacity"].as_f64().unwrap(), printed);
}

#[test]
fn verify_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let args = |base: &'static str| {
        [
            "verify",
            "--uniform",
            "16x16",
            "--trials",
            "2",
            "--seed",
            "5",
            "--cdf-points",
            "64",
            "--output",
            base,
        ]
    };
    let first = run_in(dir.path(), &args("a/r"));
    let second = run_in(dir.path(), &args("b/r"));
    assert_eq!(first.status.code(), Some(0), "{}", stderr_of(&first));
    assert_eq!(second.status.code(), Some(0), "{}", stderr_of(&second));

    for suffix in [".report.json", ".csv", ".manifest.json"] {
        let a = fs::read(dir.path().join(format!("a/r{suffix}"))).unwrap();
        let b = fs::read(dir.path().join(format!("b/r{suffix}"))).unwrap();
        // The manifests differ only in the output base; strip it.
        if suffix == ".manifest.json" {
            let a = String::from_utf8(a).unwrap().replace("a/r", "X");
            let b = String::from_utf8(b).unwrap().replace("b/r", "X");
            assert_eq!(a, b, "manifests agree up to the output base");
        } else {
            assert_eq!(a, b, "{suffix} files are byte-identical");
        }
    }
}

#[test]
fn verify_reports_an_honest_failure_with_exit_one() {
    // At p = 8, n = 4 the soft edge fluctuates so strongly that eigenvalues
    // land inside the deterministic gap zone; the run must say so and fail.
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(
        dir.path(),
        &[
            "verify",
            "--uniform",
            "8x4",
            "--trials",
            "20",
            "--seed",
            "1",
            "--cdf-points",
            "64",
            "--output",
            "r",
        ],
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(stdout_of(&out).contains("result: FAIL"));

    let report = read_json(&dir.path().join("r.report.json"));
    assert_eq!(report["all_passed"], false);
    let checks = report["checks"].as_array().unwrap();
    assert!(checks
        .iter()
        .any(|c| c["passed"] == false && c["name"].as_str().unwrap().contains("gap")));
}

#[test]
fn verify_manifest_echoes_every_tunable() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(
        dir.path(),
        &[
            "verify",
            "--uniform",
            "12x12",
            "--trials",
            "1",
            "--cdf-points",
            "64",
            "--output",
            "r",
        ],
    );
    assert_eq!(out.status.code(), Some(0), "{}", stderr_of(&out));

    let manifest = read_json(&dir.path().join("r.manifest.json"));
    assert_eq!(manifest["subcommand"], "verify");
    assert!(manifest["version"].as_str().is_some());
    let config = manifest["config"].as_object().unwrap();
    for key in [
        "profile",
        "p",
        "n",
        "trials",
        "seed",
        "distribution",
        "sections",
        "gamma",
        "bulk_tau",
        "away_zeta",
        "rigidity_tau",
        "sigma2",
        "cdf_points",
        "tol",
        "output",
    ] {
        assert!(config.contains_key(key), "manifest echoes {key}");
    }
    // Defaults are resolved, not omitted.
    assert_eq!(config["gamma"].as_f64().unwrap(), 0.6);
    assert_eq!(config["sigma2"], serde_json::Value::Null);
    assert_eq!(config["distribution"], "gaussian-real");
}

#[test]
fn ri_sweep_emits_records_and_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(
        dir.path(),
        &[
            "ri-sweep",
            "--trials",
            "100",
            "--max-dim",
            "8",
            "--seed",
            "3",
            "--output",
            "sweep",
        ],
    );
    assert_eq!(out.status.code(), Some(0), "{}", stderr_of(&out));
    assert!(stdout_of(&out).contains("result: PASS"));

    let csv_text = fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    assert_eq!(csv_text.lines().count(), 101, "header plus one row per trial");
    assert!(csv_text.starts_with("trial,p,n,lhs,rhs_core,ratio,singular,consistent"));

    let json = read_json(&dir.path().join("sweep.json"));
    assert_eq!(json["all_consistent"], true);
    assert_eq!(json["records"].as_array().unwrap().len(), 100);
}

#[test]
fn thread_cap_is_respected_and_echoed() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_gramspec"))
        .current_dir(dir.path())
        .env("GRAMSPEC_THREADS", "1")
        .args([
            "density",
            "--uniform",
            "8x8",
            "--grid",
            "0.1:2:24",
            "--output",
            "d",
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", stderr_of(&out));
    let manifest = read_json(&dir.path().join("d.manifest.json"));
    assert_eq!(manifest["threads"].as_u64(), Some(1));

    let bad = Command::new(env!("CARGO_BIN_EXE_gramspec"))
        .current_dir(dir.path())
        .env("GRAMSPEC_THREADS", "0")
        .args(["zero", "--uniform", "8x8"])
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(2));
}
