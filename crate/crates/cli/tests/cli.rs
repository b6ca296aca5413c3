use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn wanframe(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wanframe")).args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn run_into(dir: &Path, args: &[&str]) -> Output {
    let mut all = vec!["run"];
    all.extend_from_slice(args);
    all.extend_from_slice(&["--out", dir.to_str().unwrap()]);
    wanframe(&all)
}

fn report(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("report.json")).unwrap()).unwrap()
}

fn csv_rows(path: &Path) -> (Vec<String>, Vec<Vec<f64>>) {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(str::to_string).collect();
    let rows = lines.map(|l| l.split(',').map(|x| x.parse().unwrap()).collect()).collect();
    (header, rows)
}

const HALDANE_24: &str = r#"
[model]
kind = "haldane"
t1 = 1.0
t2 = 0.15
flux = 1.5707963267948966
mass = 0.0

[grid]
sizes = [24, 24]

[selection]
first = 1

[checks]
trials = 5

# A 24x24 supercell leaves only nine shells in the fit window.
[tolerances]
decay-r2 = 0.95
"#;

#[test]
fn list_scenarios_names_the_bundled_runs() {
    let out = wanframe(&["list-scenarios"]);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8(out.stdout).unwrap();
    for name in ["1d-cosine-band1", "hofstadter-q3-band1", "haldane-trivial-band1", "haldane-topological-band1"] {
        assert!(text.contains(name), "{name} missing from\n{text}");
    }
}

#[test]
fn cosine_scenario_succeeds_with_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_into(dir.path(), &["1d-cosine-band1"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let r = report(dir.path());
    assert_eq!(r["achievedL"], 1);
    assert_eq!(r["construction"], "orthonormalBasis");
    assert_eq!(r["topology"]["trivialVerdict"], "trivial");
    assert_eq!(r["passed"], true);
    for name in ["wannier-gram", "parseval", "plancherel"] {
        let check = r["checks"].as_array().unwrap().iter().find(|c| c["name"] == name).unwrap();
        assert_eq!(check["passed"], true, "{name}");
    }

    let (header, rows) = csv_rows(&dir.path().join("bands.csv"));
    assert_eq!(header[0], "k");
    assert_eq!(header.len(), 1 + r["grid"]["fiberDim"].as_u64().unwrap() as usize);
    assert_eq!(rows.len(), 64);
    for row in &rows {
        assert!(row[1..].windows(2).all(|w| w[0] <= w[1]), "bands sorted");
    }

    // Every section is a unit vector in an orthonormal basis.
    let (_, sections) = csv_rows(&dir.path().join("sections_1.csv"));
    assert_eq!(sections.len(), 64);
    for row in &sections {
        let norm: f64 = row[1..].iter().map(|x| x * x).sum();
        assert!((norm - 1.0).abs() < 1e-12);
    }
}

#[test]
fn decay_fit_is_recomputable_from_the_table() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&run_into(dir.path(), &["1d-cosine-band1"])), 0);
    let r = report(dir.path());
    let decay = &r["decay"][0];
    let (header, rows) = csv_rows(&dir.path().join("decay_1.csv"));
    assert_eq!(header, ["shell", "norm"]);
    let (lo, hi) = (decay["fitWindow"][0].as_u64().unwrap() as usize, decay["fitWindow"][1].as_u64().unwrap() as usize);
    let top = rows.iter().map(|row| row[1]).fold(0.0, f64::max);
    let pts: Vec<(f64, f64)> =
        rows[lo..=hi].iter().filter(|row| row[1] > 1e-12 * top).map(|row| (row[0], row[1].ln())).collect();
    assert_eq!(pts.len() as u64, decay["fitPoints"].as_u64().unwrap());
    let n = pts.len() as f64;
    let (sx, sy) = pts.iter().fold((0.0, 0.0), |(a, b), p| (a + p.0, b + p.1));
    let (mx, my) = (sx / n, sy / n);
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let rate = -sxy / sxx;
    let reported = decay["fittedRate"].as_f64().unwrap();
    assert!((rate - reported).abs() < 1e-9 * reported.abs().max(1.0), "{rate} vs {reported}");
}

#[test]
fn tight_frame_sections_resolve_the_trace() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("h.toml");
    fs::write(&cfg, HALDANE_24).unwrap();
    let out = run_into(dir.path(), &[cfg.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let r = report(dir.path());
    assert_eq!(r["topology"]["trivialVerdict"], "obstructed");
    assert_eq!(r["topology"]["chern"].as_i64().unwrap().abs(), 1);
    let l = r["achievedL"].as_u64().unwrap() as usize;
    assert!((2..=4).contains(&l));
    assert_eq!(r["constructionDetails"]["escalation"].as_array().unwrap().last().unwrap()["outcome"], "ok");
    // Σ_j ‖φ_j(k)‖² = tr P(k) = m for a Parseval frame.
    let tables: Vec<Vec<Vec<f64>>> =
        (1..=l).map(|j| csv_rows(&dir.path().join(format!("sections_{j}.csv"))).1).collect();
    for k in 0..24 * 24 {
        let total: f64 = tables.iter().map(|t| t[k][1..].iter().map(|x| x * x).sum::<f64>()).sum();
        assert!((total - 1.0).abs() < 1e-12, "k = {k}: {total}");
    }
}

#[test]
fn orthonormal_construction_on_obstructed_band_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_into(dir.path(), &["haldane-topological-band1", "--grid", "24x24", "--construction", "orthonormal"]);
    assert_eq!(code(&out), 4);
    assert!(stderr(&out).contains("obstruction"), "{}", stderr(&out));
    assert!(!dir.path().join("report.json").exists());
}

#[test]
fn gapless_band_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_into(dir.path(), &["free-1d-band1"]);
    assert_eq!(code(&out), 3);
    assert!(stderr(&out).contains("gap violation"));
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    fs::write(&bad, HALDANE_24.replace("mass = 0.0", "mass = 0.0\nmas = 1.0")).unwrap();
    let out = wanframe(&["run", bad.to_str().unwrap()]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("line 8") && stderr(&out).contains("mas"), "{}", stderr(&out));

    let out = wanframe(&["run", "no-such-scenario"]);
    assert_eq!(code(&out), 2);
    let out = wanframe(&["run", "1d-cosine-band1", "--grid", "8x8"]);
    assert_eq!(code(&out), 2, "2D grid on a 1D model");
    let out = wanframe(&["run", "1d-cosine-band1", "--construction", "sideways"]);
    assert_eq!(code(&out), 2);
    let out = wanframe(&["show-config", "nope"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn failed_check_exits_1_but_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("strict.toml");
    fs::write(&cfg, format!("{HALDANE_24}plancherel = 1e-30\n")).unwrap();
    let out = run_into(&dir.path().join("out"), &[cfg.to_str().unwrap()]);
    assert_eq!(code(&out), 1, "{}", stderr(&out));
    let r = report(&dir.path().join("out"));
    assert_eq!(r["passed"], false);
    let failed: Vec<&str> = r["checks"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|c| c["passed"] == false)
        .map(|c| c["name"].as_str().unwrap())
        .collect();
    assert_eq!(failed, ["plancherel"]);
}

#[test]
fn config_file_round_trips_through_show_config() {
    let dir = tempfile::tempdir().unwrap();
    let out = wanframe(&["show-config", "haldane-trivial-band1"]);
    assert_eq!(code(&out), 0);
    let cfg = dir.path().join("trivial.toml");
    fs::write(&cfg, &out.stdout).unwrap();
    let out = run_into(&dir.path().join("a"), &[cfg.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let out = run_into(&dir.path().join("b"), &["haldane-trivial-band1"]);
    assert_eq!(code(&out), 0);
    let (mut a, mut b) = (report(&dir.path().join("a")), report(&dir.path().join("b")));
    assert_eq!(b["scenario"], "haldane-trivial-band1");
    a.as_object_mut().unwrap().remove("scenario");
    b.as_object_mut().unwrap().remove("scenario");
    assert_eq!(a, b);
}

#[test]
fn repeated_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("h.toml");
    fs::write(&cfg, HALDANE_24).unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert_eq!(code(&run_into(&a, &[cfg.to_str().unwrap(), "--seed", "11"])), 0);
    assert_eq!(code(&run_into(&b, &[cfg.to_str().unwrap(), "--seed", "11"])), 0);
    assert_eq!(fs::read(a.join("report.json")).unwrap(), fs::read(b.join("report.json")).unwrap());
    assert_eq!(report(&a)["rngSeed"], 11);
}
