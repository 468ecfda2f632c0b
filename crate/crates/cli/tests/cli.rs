use std::path::Path;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_padic-harmonics"))
}

fn write_config(dir: &Path, name: &str, text: &str) -> std::path::PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn records(text: &str) -> Vec<serde_json::Value> {
    text.lines().map(|l| serde_json::from_str(l).unwrap()).collect()
}

#[test]
fn decompose_reports_twelve_dimensions_over_z4() {
    let out = bin().args(["decompose", "--seed", "3"]).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let recs = records(&String::from_utf8(out.stdout).unwrap());
    let sum = recs.iter().find(|r| r["id"].as_str().unwrap().ends_with("harmonic-sum")).unwrap();
    assert_eq!(sum["observed"], 12);
    assert_eq!(sum["params"]["spaces"], 4);
    assert!(recs.iter().all(|r| r["seed"] == 3 && r["anchor"].is_string()));
    let ids: Vec<&str> = recs.iter().map(|r| r["id"].as_str().unwrap()).collect();
    let mut sorted = ids.clone();
    sorted.sort();
    assert_eq!(ids, sorted);
}

#[test]
fn level_zero_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.toml", "[ring]\np = 2\nlevel = 0\n");
    let out = bin().arg("decompose").arg("--config").arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn unknown_key_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.toml", "[ring]\np = 2\nlevle = 2\n");
    let out = bin().arg("zonal").arg("--config").arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn budget_overflow_is_skipped_not_passed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.toml", "[ring]\np = 3\nlevel = 4\n");
    let out = bin()
        .arg("double-cosets")
        .arg("--config")
        .arg(&cfg)
        .args(["--samples", "50"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
    let recs = records(&String::from_utf8(out.stdout).unwrap());
    assert!(recs.iter().any(|r| r["status"] == "SKIPPED"));
    assert!(recs.iter().all(|r| r["status"] != "FAIL"));
}

#[test]
fn principal_series_with_ramified_character() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.toml",
        "n = 2\n[ring]\np = 3\nlevel = 3\n[characters]\nconductors = [2, 0]\nindices = [1, 0]\n[run]\nsamples = 100\n",
    );
    let report = dir.path().join("out.jsonl");
    let out = bin()
        .arg("principal-series")
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(&report)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let recs = records(&std::fs::read_to_string(&report).unwrap());
    let c = recs.iter().find(|r| r["id"].as_str().unwrap().ends_with("/conductor")).unwrap();
    assert_eq!(c["observed"], 2);
    assert!(recs.iter().any(|r| r["anchor"] == "newform-matrix-coefficient"));
}

#[test]
fn level_below_conductor_is_skipped() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.toml",
        "n = 2\n[ring]\np = 3\nlevel = 1\n[characters]\nconductors = [1, 1]\n",
    );
    let out = bin().arg("principal-series").arg("--config").arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn arch_verify_passes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.toml",
        "[arch]\nbranch = \"complex\"\ncomplex_max_degree = 3\ncomplex_max_n = 2\n",
    );
    let out = bin().arg("arch-verify").arg("--config").arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let recs = records(&String::from_utf8(out.stdout).unwrap());
    assert!(recs.iter().all(|r| r["params"]["field"] == "complex"));
}

#[test]
fn reports_repeat_apart_from_timing() {
    let run = || {
        let out = bin().args(["zonal", "--seed", "9", "--samples", "30"]).output().unwrap();
        let mut recs = records(&String::from_utf8(out.stdout).unwrap());
        for r in &mut recs {
            r["wall_ms"] = serde_json::Value::Null;
        }
        recs
    };
    assert_eq!(run(), run());
}
