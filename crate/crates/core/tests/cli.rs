use std::path::Path;
use std::process::Command;

use kahler::cli::{run_verify, RunArtifact};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_kahler"))
}

fn write(dir: &Path, name: &str, body: &str) -> std::path::PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p
}

fn status(cmd: &mut Command) -> i32 {
    cmd.output().unwrap().status.code().unwrap()
}

#[test]
fn solve_is_deterministic_and_verifies() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "a1.json",
        r#"{"group":"A1","k_list":[1,2,3],"m_schedule":[100,200,300],"grid_resolution":4096,"seed":9}"#,
    );
    let (a, b) = (dir.path().join("a.json"), dir.path().join("b.json"));
    for out in [&a, &b] {
        let o = bin().args(["solve", "--config"]).arg(&cfg).arg("--out").arg(out).output().unwrap();
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        assert!(String::from_utf8_lossy(&o.stdout).contains("R_k"));
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());

    let art = RunArtifact::load(&a).unwrap();
    let radii: Vec<f64> = art.steps.iter().map(|s| s.radius).collect();
    assert!(radii.windows(2).all(|w| w[1] > w[0]));
    assert!(art.steps.iter().all(|s| s.diagnostics.max_rel_cell_residual <= 1e-6));

    let (c1, c2) = (dir.path().join("v1.csv"), dir.path().join("v2.csv"));
    for (src, out) in [(&a, &c1), (&b, &c2)] {
        let code = status(
            bin().args(["verify", "--samples", "25", "--artifact"]).arg(src).arg("--out").arg(out),
        );
        assert_eq!(code, 0);
    }
    assert_eq!(std::fs::read(&c1).unwrap(), std::fs::read(&c2).unwrap());
    let text = std::fs::read_to_string(&c1).unwrap();
    assert_eq!(text.lines().count(), 26);
    let (_, _, summary) = run_verify(&art, 25).unwrap();
    assert!(summary.max_invariance_residual <= 1e-9);
    assert!(summary.diagnostics_recheck <= 1e-10);
    assert!(summary.max_defect_deviation < 0.05);
    assert!(summary.proper);
}

#[test]
fn reloaded_artifact_reproduces_verification() {
    let cfg: kahler::cli::SolveConfig = serde_json::from_str(
        r#"{"group":"A2","k_list":[1],"m_schedule":[600],"grid_resolution":192,"seed":2}"#,
    )
    .unwrap();
    let art = kahler::cli::run_solve(&cfg).unwrap();
    let json = art.to_json().unwrap();
    let back: RunArtifact = serde_json::from_str(&json).unwrap();
    assert_eq!(back, art);
    let (_, rows_a, sum_a) = run_verify(&art, 12).unwrap();
    let (_, rows_b, sum_b) = run_verify(&back, 12).unwrap();
    assert_eq!(rows_a, rows_b);
    assert_eq!(sum_a, sum_b);
}

#[test]
fn tampered_artifact_fails_recheck() {
    let cfg: kahler::cli::SolveConfig = serde_json::from_str(
        r#"{"group":"A1","k_list":[1],"m_schedule":[40],"grid_resolution":1024}"#,
    )
    .unwrap();
    let mut art = kahler::cli::run_solve(&cfg).unwrap();
    art.steps[0].diagnostics.max_rel_cell_residual += 1e-3;
    let e = run_verify(&art, 5).unwrap_err();
    assert_eq!(e.exit_code(), 4);
}

#[test]
fn su2_backed_artifact_has_unit_defect() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "su2.json",
        r#"{"group":"A1","k_list":[3],"m_schedule":[2],"grid_resolution":64,"backend":"su2_oracle"}"#,
    );
    let art = dir.path().join("su2.art.json");
    assert_eq!(status(bin().args(["solve", "--config"]).arg(&cfg).arg("--out").arg(&art)), 0);
    let out = dir.path().join("su2.csv");
    assert_eq!(
        status(bin().args(["verify", "--samples", "40", "--artifact"]).arg(&art).arg("--out").arg(&out)),
        0
    );
    let summary: kahler::cli::VerifySummary = serde_json::from_str(
        &std::fs::read_to_string(kahler::cli::summary_path(&out)).unwrap(),
    )
    .unwrap();
    assert!((summary.median_defect - 1.0).abs() < 1e-9);
    assert!(summary.max_defect_deviation < 1e-9);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x.json");
    let empty = write(
        dir.path(),
        "empty.json",
        r#"{"group":"A1","k_list":[],"m_schedule":[],"grid_resolution":64}"#,
    );
    assert_eq!(status(bin().args(["solve", "--config"]).arg(&empty).arg("--out").arg(&out)), 2);
    assert!(!out.exists());
    let garbage = write(dir.path(), "garbage.json", "{not json");
    assert_eq!(status(bin().args(["solve", "--config"]).arg(&garbage).arg("--out").arg(&out)), 2);
    // m far beyond what a 4-cell grid can resolve.
    let starved = write(
        dir.path(),
        "starved.json",
        r#"{"group":"A1","k_list":[1],"m_schedule":[400],"grid_resolution":4}"#,
    );
    assert_eq!(status(bin().args(["solve", "--config"]).arg(&starved).arg("--out").arg(&out)), 3);
    let csv = dir.path().join("o.csv");
    assert_eq!(status(bin().args(["oracle", "nope", "--out"]).arg(&csv)), 2);
    let art = dir.path().join("a.json");
    let ok = write(
        dir.path(),
        "ok.json",
        r#"{"group":"A1","k_list":[1],"m_schedule":[40],"grid_resolution":1024}"#,
    );
    assert_eq!(status(bin().args(["solve", "--config"]).arg(&ok).arg("--out").arg(&art)), 0);
    assert_eq!(
        status(bin().args(["verify", "--samples", "0", "--artifact"]).arg(&art).arg("--out").arg(&csv)),
        4
    );
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<f64>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r
        .records()
        .map(|rec| rec.unwrap().iter().map(|v| v.parse().unwrap()).collect())
        .collect();
    (header, rows)
}

#[test]
fn oracle_tables() {
    let dir = tempfile::tempdir().unwrap();
    let su2 = dir.path().join("su2.csv");
    assert_eq!(
        status(bin().args(["oracle", "su2", "--tmax", "3", "--samples", "50", "--out"]).arg(&su2)),
        0
    );
    let (h, rows) = read_csv(&su2);
    assert_eq!(rows.len(), 50);
    let d = h.iter().position(|c| c == "defect").unwrap();
    assert!(rows.iter().all(|r| (r[d] - 1.0).abs() < 1e-9));

    let heis = dir.path().join("h.csv");
    assert_eq!(
        status(bin().args(["oracle", "heisenberg", "--n", "2", "--f", "ricci-flat", "--out"]).arg(&heis)),
        0
    );
    let (h, rows) = read_csv(&heis);
    let d = h.iter().position(|c| c == "difference").unwrap();
    assert!(rows.iter().all(|r| r[d] <= 1e-12));

    let can = dir.path().join("c.csv");
    assert_eq!(
        status(bin().args(["oracle", "canonical", "--group", "A2", "--out"]).arg(&can)),
        0
    );
    let (h, rows) = read_csv(&can);
    let idx = |name: &str| h.iter().position(|c| c == name).unwrap();
    for r in &rows {
        assert_eq!(r[idx("cartan11")], 1.0);
        assert_eq!(r[idx("cartan12")], 0.0);
        assert_eq!(r[idx("cartan21")], 0.0);
        assert_eq!(r[idx("cartan22")], 1.0);
    }
}
