use std::process::{Command, Output};

use serde_json::Value;

fn boundsec(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_boundsec"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn json_of(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

#[test]
fn entropy_of_z_on_grw() {
    let out = boundsec(&["measures", "builtin:grw", "entropy", "Z", "--json", "--seed", "1"]);
    assert!(out.status.success());
    let v = json_of(&out);
    // Z weights 6, three 4s and three 1s out of 21 (brute force)
    let h = |w: f64| -(w / 21.0) * (w / 21.0).log2();
    let expected = h(6.0) + 3.0 * h(4.0) + 3.0 * h(1.0);
    assert!((v["report"]["value"].as_f64().unwrap() - expected).abs() < 1e-12);
    assert_eq!(v["manifest"]["command"], "measures");
    assert_eq!(v["manifest"]["seed"], 1);
}

#[test]
fn point_mass_entropy_is_zero() {
    let dir = std::env::temp_dir().join("boundsec-cli-point-mass.json");
    std::fs::write(
        &dir,
        r#"{"axes":[{"name":"X","symbols":["0","1"]}],"weights":[["0",1]],"normalizer":1}"#,
    )
    .unwrap();
    let out = boundsec(&["measures", dir.to_str().unwrap(), "entropy", "X", "--json", "--seed", "1"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(json_of(&out)["report"]["value"].as_f64().unwrap(), 0.0);
}

#[test]
fn missing_axis_is_an_error() {
    let out = boundsec(&["measures", "builtin:grw", "entropy", "W", "--seed", "1"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("W"));
}

#[test]
fn bad_json_reports_line() {
    let path = std::env::temp_dir().join("boundsec-cli-bad.json");
    std::fs::write(&path, "{\n  \"axes\": [\n  oops\n}").unwrap();
    let out = boundsec(&["measures", path.to_str().unwrap(), "entropy", "X", "--seed", "1"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 3"));
}

#[test]
fn unknown_verification_lists_names() {
    let out = boundsec(&["verify", "nosuch", "--seed", "1"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("itvprop") && err.contains("lemma37-trend"));
}

#[test]
fn verify_itvprop_passes() {
    let out = boundsec(&["verify", "itvprop", "--seed", "7"]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("PASS itvprop"));
}

#[test]
fn failing_verification_exits_nonzero() {
    // the counterexample table is feasible under the default coarsening shape
    let out = boundsec(&["verify", "itvcounter", "--samples", "2", "--seed", "7", "--json"]);
    assert_eq!(out.status.code(), Some(1));
    let v = json_of(&out);
    assert_eq!(v["passed"], false);
    assert_eq!(v["report"]["details"]["outcome"]["status"], "feasible");
}

#[test]
fn single_sample_rate_is_zero_or_one() {
    let out = boundsec(&["search", "rate", "--n", "1", "--seed", "7", "--json"]);
    assert!(out.status.success());
    let r = json_of(&out)["report"]["rate"].as_f64().unwrap();
    assert!(r == 0.0 || r == 1.0);
}

#[test]
fn product_rate_is_one() {
    let out = boundsec(&["search", "rate", "--sampler", "product", "--n", "20", "--seed", "7", "--json"]);
    let v = json_of(&out);
    assert_eq!(v["report"]["rate"].as_f64().unwrap(), 1.0);
    assert_eq!(v["report"]["flag"].as_str().map(|f| f.contains("open question")), Some(true));
}

#[test]
fn rank_report_for_two() {
    let out = boundsec(&["search", "rank", "--N", "2", "--seed", "0", "--json"]);
    let v = json_of(&out);
    assert_eq!(v["report"]["lines"], 8);
    assert_eq!(v["report"]["generators"], 24);
    assert_eq!(v["report"]["ambient_dim"], 16);
}

#[test]
fn runs_are_deterministic_per_seed() {
    let run = || {
        let mut v = json_of(&boundsec(&["search", "ybar", "--samples", "200", "--seed", "11", "--json"]));
        v["manifest"]["wall_clock_seconds"] = Value::Null;
        v
    };
    assert_eq!(run(), run());
}

#[test]
fn missing_seed_is_logged() {
    let out = boundsec(&["search", "rank", "--N", "1"]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("(random)"));
}

#[test]
fn out_file_holds_manifest_and_report() {
    let path = std::env::temp_dir().join("boundsec-cli-out.json");
    let out = boundsec(&[
        "estimate",
        "builtin:rw?a=0.125",
        "--restarts",
        "1",
        "--iterations",
        "20",
        "--seed",
        "3",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(v["manifest"]["command"], "estimate");
    assert_eq!(v["report"]["status"], "observed");
}

#[test]
fn cell_cap_env_is_honored() {
    let out = Command::new(env!("CARGO_BIN_EXE_boundsec"))
        .args(["search", "rate", "--n", "1", "--seed", "1"])
        .env("BOUNDSEC_CELL_CAP", "10")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).to_lowercase().contains("cap"));
}
