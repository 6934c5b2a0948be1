use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn trilinear(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_trilinear"))
        .args(args)
        .current_dir(cwd)
        .env("RUST_LOG", "error")
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

/// Header row and numeric rows of a CSV with a `#` comment block.
fn read_table(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let text = fs::read_to_string(path).expect("csv exists");
    let body: String = text
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(|l| format!("{l}\n"))
        .collect();
    let mut reader = csv::Reader::from_reader(body.as_bytes());
    let header = reader.headers().unwrap().iter().map(String::from).collect();
    let rows = reader
        .records()
        .map(|r| r.unwrap().iter().map(String::from).collect())
        .collect();
    (header, rows)
}

fn column(header: &[String], rows: &[Vec<String>], name: &str) -> Vec<Option<f64>> {
    let k = header
        .iter()
        .position(|h| h == name)
        .unwrap_or_else(|| panic!("no column {name}"));
    rows.iter().map(|r| r[k].parse().ok()).collect()
}

#[test]
fn tmscs_endpoints_and_constant_logneg() {
    let dir = TempDir::new().unwrap();
    let out = trilinear(&["tmscs", "--out", "o"], dir.path());
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let (header, rows) = read_table(&dir.path().join("o/tmscs.csv"));
    assert_eq!(
        &header[..5],
        ["phi", "n_mean_total", "mandel_q_signal", "logneg", "entropy_signal"]
    );
    assert_eq!(rows.len(), 33);
    let q = column(&header, &rows, "mandel_q_signal");
    assert!((q[0].unwrap() - 2.5915).abs() < 5e-4, "{:?}", q[0]);
    assert!((q[32].unwrap() - 4.4450).abs() < 5e-4, "{:?}", q[32]);
    let ln: Vec<f64> = column(&header, &rows, "logneg").into_iter().flatten().collect();
    let spread = ln.iter().copied().fold(f64::MIN, f64::max) - ln.iter().copied().fold(f64::MAX, f64::min);
    assert!(spread < 1e-3, "logneg spread {spread}");
}

#[test]
fn empty_phase_grid_is_a_config_error() {
    let dir = TempDir::new().unwrap();
    assert_eq!(code(&trilinear(&["tmscs", "--phi=", "--out", "o"], dir.path())), 2);
    fs::write(dir.path().join("c.json"), r#"{"phi_points": 0}"#).unwrap();
    assert_eq!(code(&trilinear(&["tmscs", "--config", "c.json"], dir.path())), 2);
}

#[test]
fn bad_inputs_exit_with_config_code() {
    let dir = TempDir::new().unwrap();
    assert_eq!(code(&trilinear(&["evolve", "--method", "rk9"], dir.path())), 2);
    assert_eq!(code(&trilinear(&["evolve", "--cutoffs", "3,4"], dir.path())), 2);
    fs::write(dir.path().join("c.json"), r#"{"alpha": 1}"#).unwrap();
    assert_eq!(code(&trilinear(&["evolve", "--config", "c.json"], dir.path())), 2);
    assert_eq!(code(&trilinear(&["evolve", "--config", "missing.json"], dir.path())), 2);
    assert_eq!(code(&trilinear(&["evolve", "--alpha2", "-1"], dir.path())), 2);
}

#[test]
fn explicit_seeds_and_shorthand_conflict() {
    let dir = TempDir::new().unwrap();
    let seeds = r#"{"seeds": {"alpha_s": 1, "theta_s": 0, "alpha_i": 1, "theta_i": 0, "gamma": 1, "two_phi": 0}}"#;
    fs::write(dir.path().join("c.json"), seeds).unwrap();
    let out = trilinear(&["tmscs", "--config", "c.json", "--phi", "0,pi"], dir.path());
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("exclude"));
    let ok = trilinear(&["tmscs", "--config", "c.json", "--out", "o"], dir.path());
    assert_eq!(code(&ok), 0);
    assert_eq!(read_table(&dir.path().join("o/tmscs.csv")).1.len(), 1);
}

#[test]
fn flags_take_precedence_over_the_file() {
    let dir = TempDir::new().unwrap();
    fs::write(
        dir.path().join("c.json"),
        r#"{"alpha2": 1.0, "gamma2": 2.0, "t_end": 0.4, "phi": [0.0]}"#,
    )
    .unwrap();
    let out = trilinear(
        &["evolve", "--config", "c.json", "--t-end", "0.2", "--out", "o"],
        dir.path(),
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(dir.path().join("o/evolve_00.csv")).unwrap();
    assert!(text.contains("#   \"t_end\": 0.2,"));
    assert!(text.contains("\"alpha2\": 1.0"));
    assert!(text.contains("\"gamma2\": 2.0"));
}

#[test]
fn outputs_are_identical_across_runs_and_worker_counts() {
    let dir = TempDir::new().unwrap();
    let common = [
        "--alpha2",
        "1",
        "--gamma2",
        "2",
        "--t-end",
        "0.5",
        "--phi",
        "0,pi/2,pi",
        "--out",
        "o",
    ];
    for (run, workers) in [("a", "1"), ("b", "1"), ("c", "3")] {
        let cwd = dir.path().join(run);
        fs::create_dir(&cwd).unwrap();
        let mut args = vec!["evolve", "--workers", workers];
        args.extend(common);
        assert_eq!(code(&trilinear(&args, &cwd)), 0);
    }
    for k in 0..3 {
        let read = |run: &str| fs::read_to_string(dir.path().join(run).join(format!("o/evolve_{k:02}.csv"))).unwrap();
        assert_eq!(read("a"), read("b"));
        // Only the recorded worker count may differ.
        assert_eq!(read("a"), read("c").replace("\"workers\": 3", "\"workers\": 1"));
    }
}

#[test]
fn evolve_conserves_manley_rowe_quantities() {
    let dir = TempDir::new().unwrap();
    let args = [
        "evolve", "--alpha2", "2", "--gamma2", "3", "--t-end", "1", "--phi", "pi", "--out", "o",
    ];
    assert_eq!(code(&trilinear(&args, dir.path())), 0);
    let (header, rows) = read_table(&dir.path().join("o/evolve_00.csv"));
    assert_eq!(header.len(), 22);
    for name in ["mr_si", "mr_sp", "mr_ip"] {
        let worst = column(&header, &rows, name)
            .into_iter()
            .flatten()
            .map(f64::abs)
            .fold(0.0, f64::max);
        assert!(worst < 1e-7, "{name}: {worst}");
    }
    let s_p = column(&header, &rows, "S_p");
    let s_si = column(&header, &rows, "S_si");
    let with_entropy = s_p
        .iter()
        .zip(&s_si)
        .filter_map(|(a, b)| Some((a.as_ref()?, b.as_ref()?)));
    let mut count = 0;
    for (a, b) in with_entropy {
        assert!((a - b).abs() < 1e-7);
        count += 1;
    }
    assert!(count >= 2);
}

#[test]
fn leakage_abort_suggests_cutoffs() {
    let dir = TempDir::new().unwrap();
    let args = [
        "evolve",
        "--alpha2",
        "1",
        "--gamma2",
        "4",
        "--cutoffs",
        "20,14,14",
        "--t-end",
        "3",
        "--phi",
        "0",
    ];
    let out = trilinear(&args, dir.path());
    assert_eq!(code(&out), 3);
    assert!(String::from_utf8_lossy(&out.stderr).contains("try cutoffs"));
}

#[test]
fn perturb_writes_one_file_per_phase() {
    let dir = TempDir::new().unwrap();
    let args = [
        "perturb", "--alpha2", "1", "--gamma2", "2", "--phi", "0,pi", "--t-end", "0.01", "--out", "o",
    ];
    assert_eq!(code(&trilinear(&args, dir.path())), 0);
    for k in 0..2 {
        let path = dir.path().join(format!("o/perturb_{k:02}.csv"));
        let text = fs::read_to_string(&path).unwrap();
        assert!(text.contains("through tau^2"));
        let (header, rows) = read_table(&path);
        assert_eq!(rows.len(), 11);
        let n_p = column(&header, &rows, "n_p");
        assert!((n_p[0].unwrap() - 2.0).abs() < 1e-12);
    }
}

#[test]
fn steady_reports_fits_and_phase_distance() {
    let dir = TempDir::new().unwrap();
    let args = [
        "steady", "--alpha2", "1", "--gamma2", "2", "--t-end", "2", "--phi", "0,pi", "--out", "o",
    ];
    assert_eq!(code(&trilinear(&args, dir.path())), 0);
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("o/steady_summary.json")).unwrap()).unwrap();
    assert!(summary["signal_distance_phi0_phipi"].as_f64().is_some());
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("o/steady_00_report.json")).unwrap()).unwrap();
    assert_eq!(report["chain_fits"].as_array().unwrap().len(), 5);
    let (header, rows) = read_table(&dir.path().join("o/steady_00_signal_density.csv"));
    assert_eq!(header, ["n", "m", "re", "im", "abs"]);
    let trace: f64 = rows
        .iter()
        .filter(|r| r[0] == r[1])
        .map(|r| r[2].parse::<f64>().unwrap())
        .sum();
    assert!((trace - 1.0).abs() < 1e-12);
}

#[test]
fn validate_passes_deterministically() {
    let dir = TempDir::new().unwrap();
    let a = trilinear(&["validate"], dir.path());
    let b = trilinear(&["validate"], dir.path());
    assert_eq!(code(&a), 0, "{}", String::from_utf8_lossy(&a.stdout));
    assert_eq!(a.stdout, b.stdout);
    let text = String::from_utf8_lossy(&a.stdout);
    assert!(!text.contains("FAIL"));
    assert!(text.contains("stencil mutation detected"));
}
