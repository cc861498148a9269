use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn run(sub: &str, config: &str, out: &Path) -> Output {
    let cfg = out.with_extension("conf");
    fs::write(&cfg, config).unwrap();
    Command::new(env!("CARGO_BIN_EXE_largesol"))
        .args([sub, "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(out)
        .output()
        .unwrap()
}

fn manifest(out: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap()
}

#[test]
fn ko_check_passes_for_square() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("ko");
    let res = run("ko-check", "kind = ko-check\ng = power:2:1\na = 1\n", &out);
    assert_eq!(res.status.code(), Some(0), "{}", String::from_utf8_lossy(&res.stdout));
    let csv = fs::read_to_string(out.join("ko.csv")).unwrap();
    assert!(csv.starts_with("converges,lower_a,finite_part,tail_exponent,tail_estimate\ntrue,1,"));
    let m = manifest(&out);
    assert_eq!(m["verdict"], "pass");
    assert_eq!(m["stages"][0]["files"][0], "ko.csv");
    assert_eq!(m["config"]["a"], "1");
}

#[test]
fn ko_check_for_linear_g_fails_unless_expected() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("plain");
    let res = run("ko-check", "g = power:1:1\n", &out);
    assert_eq!(res.status.code(), Some(1));
    assert_eq!(manifest(&out)["first_failure"], "ko/ko_converges");

    let out = dir.path().join("expected");
    let res = run("ko-check", "g = power:1:1\nexpect = diverge\n", &out);
    assert_eq!(res.status.code(), Some(0));
    assert_eq!(manifest(&out)["verdict"], "pass");
}

#[test]
fn forced_newton_failure_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("disk");
    let res = run("disk", "g = power:2:1\nR = 1\nNr = 21\nNtheta = 16\nnewton_max_iter = 1\n", &out);
    assert_eq!(res.status.code(), Some(2));
    let m = manifest(&out);
    assert_eq!(m["verdict"], "error");
    assert_eq!(m["first_failure"], "disk");
    assert!(m["stages"][1]["error"].as_str().unwrap().contains("max iterations exceeded"));
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let res = run("disk", "kind = disk\ng = power:2:1\n", &dir.path().join("a"));
    assert_eq!(res.status.code(), Some(2));
    let err = String::from_utf8_lossy(&res.stderr);
    assert!(err.contains("missing required key: R"), "{err}");

    let res = run("disk", "g = power:2:1\nR = 1\nepsilon = -0.1\n", &dir.path().join("b"));
    assert_eq!(res.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&res.stderr).contains("line 3: malformed value: epsilon must be ≥ 0"));
}

#[test]
fn help_documents_keys() {
    let res = Command::new(env!("CARGO_BIN_EXE_largesol"))
        .args(["full-verify", "--help"])
        .output()
        .unwrap();
    let text = String::from_utf8_lossy(&res.stdout);
    for key in ["g ", "epsilon", "Ntheta", "newton_max_iter", "directions", "[0.2]"] {
        assert!(text.contains(key), "{key} missing from help");
    }
}

#[test]
fn annulus_scenario_checks_outer_half() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("annulus");
    let res = run("radial", "g = power:2:1\nR = 1\nr_inner = 0.5\ninner_value = 1\nn = 201\n", &out);
    assert_eq!(res.status.code(), Some(0), "{}", String::from_utf8_lossy(&res.stdout));
    let m = manifest(&out);
    assert_eq!(m["stages"][1]["checks"][0]["name"], "annulus_outer_half_increasing");
    assert!(out.join("radial.csv").exists() && out.join("asymptote.csv").exists());
}

#[test]
fn full_verify_writes_every_artifact() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("full");
    let res = run(
        "full-verify",
        "g = power:2:1\nR = 1\nNr = 31\nNtheta = 16\nlevels = 4\ndirections = 4\n",
        &out,
    );
    assert_ne!(res.status.code(), Some(2), "{}", String::from_utf8_lossy(&res.stdout));
    let m = manifest(&out);
    let names: Vec<&str> = m["stages"]
        .as_array()
        .unwrap()
        .iter()
        .map(|s| s["name"].as_str().unwrap())
        .collect();
    assert_eq!(names, ["ko", "decomposition", "radial", "disk", "sandwich", "symmetry"]);
    for file in [
        "ko.csv",
        "decomposition.csv",
        "radial.csv",
        "asymptote.csv",
        "ladder.csv",
        "field.csv",
        "sandwich.json",
        "symmetry.json",
        "symmetry.csv",
    ] {
        assert!(out.join(file).exists(), "{file}");
    }
    let sym: Value = serde_json::from_str(&fs::read_to_string(out.join("symmetry.json")).unwrap()).unwrap();
    for key in ["osc", "ratio", "lie_fit", "mp_violations", "mu_hat"] {
        assert!(!sym[key].is_null(), "{key}");
    }
    assert_eq!(m["verdict"] == "pass", res.status.code() == Some(0));
}
