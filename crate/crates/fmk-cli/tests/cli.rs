//! End-to-end CLI behavior: exit codes, report determinism, model-file
//! round trips, and failure paths.

use std::process::Command;

fn fmk() -> Command {
    Command::new(env!("CARGO_BIN_EXE_fmk"))
}

#[test]
fn exit_code_zero_on_pass_and_listing() {
    let out = fmk()
        .args([
            "check",
            "--model",
            "builtin:semisimple2",
            "--suite",
            "algebra",
            "--points",
            "30",
        ])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("PASS:"));
    assert!(stdout.contains("algebra.hm"));

    let out = fmk()
        .args(["check", "--model", "builtin:semisimple2", "--suite", "duality", "--list-checks"])
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("duality.involution_families"));
}

#[test]
fn exit_code_two_on_config_errors() {
    // unknown builtin
    let out = fmk()
        .args(["check", "--model", "builtin:nope", "--suite", "algebra"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    // unknown suite
    let out = fmk()
        .args(["check", "--model", "builtin:semisimple2", "--suite", "nope"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    // missing ingredient: semisimple charts are not the deformed example
    let out = fmk()
        .args(["check", "--model", "builtin:semisimple2", "--suite", "kappa"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    // missing file
    let out = fmk()
        .args(["check", "--model", "/nonexistent.json", "--suite", "algebra"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn schema_and_gate_errors_are_diagnosed() {
    let dir = tempfile::tempdir().unwrap();

    // omitting the unit field of an explicit multiplication: schema error
    let path = dir.path().join("no-unit.json");
    std::fs::write(
        &path,
        r#"{
            "schema": "fmk-model/1",
            "name": "no-unit",
            "dimension": 2,
            "domain": {"box": [[0.5, 1.5], [2.0, 3.0]]},
            "multiplication": {"c": [[["1","0"],["0","0"]],[["0","0"],["0","1"]]]}
        }"#,
    )
    .unwrap();
    let out = fmk()
        .args(["check", "--model", path.to_str().unwrap(), "--suite", "algebra"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("unit"));

    // non-symmetric structure functions: load error naming the gate
    let path = dir.path().join("asym.json");
    std::fs::write(
        &path,
        r#"{
            "schema": "fmk-model/1",
            "name": "asym",
            "dimension": 2,
            "domain": {"box": [[0.5, 1.5], [2.0, 3.0]]},
            "multiplication": {"c": [[["1","u1"],["0","0"]],[["0","0"],["0","1"]]]},
            "unit": ["1", "1"]
        }"#,
    )
    .unwrap();
    let out = fmk()
        .args(["check", "--model", path.to_str().unwrap(), "--suite", "algebra"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("multiplication-symmetry"));

    // expression syntax error with position
    let path = dir.path().join("syntax.json");
    std::fs::write(
        &path,
        r#"{
            "schema": "fmk-model/1",
            "name": "syntax",
            "dimension": 2,
            "domain": {"box": [[0.5, 1.5], [2.0, 3.0]]},
            "multiplication": {"c": [[["1","0"],["0","0"]],[["0","0"],["0","u3 +"]]]},
            "unit": ["1", "1"]
        }"#,
    )
    .unwrap();
    let out = fmk()
        .args(["check", "--model", path.to_str().unwrap(), "--suite", "algebra"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("parse error at byte"));
}

#[test]
fn exit_code_one_on_failing_check() {
    // a model declaring `flat` on a curved connection loads fine (torsion
    // and compatibility hold) and fails the named flatness check
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("lying-flat.json");
    std::fs::write(
        &path,
        r#"{
            "schema": "fmk-model/1",
            "name": "lying-flat",
            "dimension": 2,
            "domain": {"box": [[0.5, 1.5], [2.0, 3.0]],
                       "exclusions": [{"expr": "u1 - u2", "margin": 0.1}]},
            "multiplication": {"c": [[["1","0"],["0","0"]],[["0","0"],["0","1"]]]},
            "unit": ["1", "1"],
            "connections": {
                "flat": {
                    "gamma": [[["u2/4","0"],["0","0"]],[["0","0"],["0","u1/4"]]],
                    "flat": true
                }
            }
        }"#,
    )
    .unwrap();
    let out = fmk()
        .args(["check", "--model", path.to_str().unwrap(), "--suite", "flatness"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("fail flatness.curvature.flat"));
}

#[test]
fn reports_are_byte_identical_and_exports_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let r1 = dir.path().join("r1.json");
    let r2 = dir.path().join("r2.json");
    for r in [&r1, &r2] {
        let out = fmk()
            .args([
                "check",
                "--model",
                "builtin:kappa2d",
                "--suite",
                "kappa",
                "--seed",
                "7",
                "--points",
                "40",
                "--report",
                r.to_str().unwrap(),
            ])
            .output()
            .unwrap();
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let a = std::fs::read(&r1).unwrap();
    let b = std::fs::read(&r2).unwrap();
    assert_eq!(a, b, "reports must be byte-identical for fixed inputs");
    let text = String::from_utf8(a).unwrap();
    assert!(text.contains("\"wall_clock_secs\": null"));
    assert!(text.contains("\"anchor\""));

    // exporting a builtin and re-running from the file gives identical checks
    let model_path = dir.path().join("kappa2d.json");
    let out = fmk()
        .args([
            "export",
            "--model",
            "builtin:kappa2d",
            "--out",
            model_path.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(out.status.success());
    let r3 = dir.path().join("r3.json");
    let out = fmk()
        .args([
            "check",
            "--model",
            model_path.to_str().unwrap(),
            "--suite",
            "kappa",
            "--seed",
            "7",
            "--points",
            "40",
            "--report",
            r3.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(out.status.success());
    let c = std::fs::read_to_string(&r3).unwrap();
    // identical checks up to the model identifier line
    assert_eq!(
        text.replace("\"model\": \"kappa2d\"", ""),
        c.replace("\"model\": \"kappa2d\"", "")
    );
}

#[test]
fn ei_gate_is_overridable() {
    // the undeformed Euler field declared on a deformed chart violates the
    // characterization; the default gate rejects the model at load, a
    // loosened gate loads it and reports the defect as a failing check
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("deformed-euler.json");
    let out = fmk()
        .args(["export", "--model", "builtin:kappa2d"])
        .output()
        .unwrap();
    let mut spec: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    spec["parameters"]["k"] = serde_json::json!(0.05);
    std::fs::write(&path, serde_json::to_string(&spec).unwrap()).unwrap();

    let out = fmk()
        .args(["check", "--model", path.to_str().unwrap(), "--suite", "algebra", "--points", "20"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("gate eventual-identity"));

    let out = fmk()
        .args([
            "check",
            "--model",
            path.to_str().unwrap(),
            "--suite",
            "algebra",
            "--points",
            "20",
            "--ei-gate",
            "1.0",
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("fail algebra.ei_defect.euler"));
}

#[test]
fn explicit_bundle_data_is_checked() {
    // constant commuting bundle data over a 2d chart
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bundle.json");
    std::fs::write(
        &path,
        r#"{
            "schema": "fmk-model/1",
            "name": "with-bundle",
            "dimension": 2,
            "domain": {"box": [[0.5, 1.5], [2.0, 3.0]]},
            "multiplication": {"c": [[["1","0"],["0","0"]],[["0","0"],["0","1"]]]},
            "unit": ["1", "1"],
            "bundle": {
                "rank": 2,
                "d": [[["0","0"],["0","0"]],[["0","0"],["0","0"]]],
                "a": [[["1","0"],["0","0"]],[["0","0"],["0","1"]]],
                "u": ["1", "1"]
            }
        }"#,
    )
    .unwrap();
    let out = fmk()
        .args(["check", "--model", path.to_str().unwrap(), "--suite", "pullback"])
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "stdout: {} stderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(String::from_utf8_lossy(&out.stdout).contains("pullback.conditions.file"));
}
