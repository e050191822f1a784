//! End-to-end CLI checks: exit-code contract, JSON round trips, and the
//! compile -> simulate loop.

use std::process::Command;

fn mpuforge() -> Command {
    Command::new(env!("CARGO_BIN_EXE_mpuforge"))
}

#[test]
fn verify_reports_unitarity_and_rank() {
    let out = mpuforge()
        .args([
            "verify",
            "--input",
            "corpus:multicontrol-z",
            "--n",
            "3",
            "--format",
            "json",
        ])
        .output()
        .unwrap();
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["unitary"], true);
    assert_eq!(v["assumption1"]["single_site"], true);
    assert_eq!(v["assumption1"]["full_rank_window"], 1);
}

#[test]
fn verify_identity_has_unit_conditioning() {
    let out = mpuforge()
        .args([
            "verify",
            "--input",
            "corpus:identity",
            "--n",
            "3",
            "--format",
            "json",
        ])
        .output()
        .unwrap();
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!((v["q"].as_f64().unwrap() - 1.0).abs() < 1e-9);
}

#[test]
fn nonunitary_file_exits_2() {
    // scaled identity chain: bond dims fine, normalization broken
    let dir = std::env::temp_dir().join("mpuforge_cli_test_nonunitary");
    std::fs::create_dir_all(&dir).unwrap();
    let chain = serde_json::json!({
        "sites": [
            { "d_out": 2, "d_in": 2, "D_left": 1, "D_right": 1,
              "entries": [[2.0, 0.0], [0.0, 0.0], [0.0, 0.0], [2.0, 0.0]] }
        ],
        "l": [[1.0, 0.0]],
        "r": [[1.0, 0.0]]
    });
    let path = dir.join("scaled.json");
    std::fs::write(&path, serde_json::to_string(&chain).unwrap()).unwrap();
    let out = mpuforge()
        .args(["verify", "--input", path.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unsupported_mpu_exits_4() {
    let out = mpuforge()
        .args(["compile", "--input", "corpus:redundant-bond", "--n", "3"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn dim_cap_env_exits_3() {
    let out = mpuforge()
        .args(["verify", "--input", "corpus:multicontrol-z", "--n", "4"])
        .env("MPUFORGE_DIM_CAP", "8")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn compile_simulate_round_trip() {
    let dir = std::env::temp_dir().join("mpuforge_cli_test_roundtrip");
    std::fs::create_dir_all(&dir).unwrap();
    let circuit = dir.join("mcz4.json");
    let out = mpuforge()
        .args([
            "compile",
            "--input",
            "corpus:multicontrol-z",
            "--n",
            "4",
            "--out",
            circuit.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let out = mpuforge()
        .args([
            "simulate",
            "--circuit",
            circuit.to_str().unwrap(),
            "--input",
            "corpus:multicontrol-z",
            "--n",
            "4",
            "--format",
            "json",
        ])
        .output()
        .unwrap();
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(v["equivalence_metric"].as_f64().unwrap() <= 1e-9);
    assert!(v["ancilla_leakage"].as_f64().unwrap() <= 1e-9);
}

#[test]
fn compile_simulate_round_trip_nonuniform() {
    let dir = std::env::temp_dir().join("mpuforge_cli_test_roundtrip_nu");
    std::fs::create_dir_all(&dir).unwrap();
    let circuit = dir.join("pmcz.json");
    let out = mpuforge()
        .args([
            "compile",
            "--input",
            "corpus:perturbed-mcz:3",
            "--seed",
            "11",
            "--out",
            circuit.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let out = mpuforge()
        .args([
            "simulate",
            "--circuit",
            circuit.to_str().unwrap(),
            "--input",
            "corpus:perturbed-mcz:3",
            "--seed",
            "11",
            "--format",
            "json",
        ])
        .output()
        .unwrap();
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(v["equivalence_metric"].as_f64().unwrap() <= 1e-9);
}

#[test]
fn bench_table_is_bounded() {
    let out = mpuforge()
        .args([
            "bench",
            "--mpus",
            "identity,multicontrol-z",
            "--n-list",
            "4,8,16",
            "--jobs",
            "2",
            "--format",
            "json",
        ])
        .output()
        .unwrap();
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["identity"]["bounded"], true);
    assert_eq!(v["multicontrol-z"]["bounded"], true);
    assert_eq!(v["identity"]["rows"].as_array().unwrap().len(), 3);
}

#[test]
fn export_chain_round_trips_through_file_input() {
    let dir = std::env::temp_dir().join("mpuforge_cli_test_export");
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("ly2.json");
    let out = mpuforge()
        .args([
            "verify",
            "--input",
            "corpus:lee-yang",
            "--n",
            "2",
            "--export-chain",
            path.to_str().unwrap(),
            "--format",
            "json",
        ])
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let v1: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    // re-verify from the exported file: same Schmidt data bit-for-bit
    let out = mpuforge()
        .args([
            "verify",
            "--input",
            path.to_str().unwrap(),
            "--format",
            "json",
        ])
        .output()
        .unwrap();
    assert!(out.status.success());
    let v2: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v1["schmidt"], v2["schmidt"]);
    assert_eq!(v1["q"], v2["q"]);
}

#[test]
fn custom_cap_densities_still_compile_exactly() {
    let dir = std::env::temp_dir().join("mpuforge_cli_test_caps");
    std::fs::create_dir_all(&dir).unwrap();
    let sigma = dir.join("sigma.json");
    std::fs::write(
        &sigma,
        r#"{ "dim": 2, "entries": [[0.7, 0.0], [0.1, 0.05], [0.1, -0.05], [0.3, 0.0]] }"#,
    )
    .unwrap();
    let circuit = dir.join("mcz3_custom.json");
    let out = mpuforge()
        .args([
            "compile",
            "--input",
            "corpus:multicontrol-z",
            "--n",
            "3",
            "--sigma",
            sigma.to_str().unwrap(),
            "--tau",
            sigma.to_str().unwrap(),
            "--out",
            circuit.to_str().unwrap(),
            "--format",
            "json",
        ])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    // non-mixed caps shift the conditioning number away from the mixed value 2
    let q = v["q_report"]["q"].as_f64().unwrap();
    assert!((q - 2.0).abs() > 1e-3, "expected a different q, got {q}");
    let out = mpuforge()
        .args([
            "simulate",
            "--circuit",
            circuit.to_str().unwrap(),
            "--input",
            "corpus:multicontrol-z",
            "--n",
            "3",
            "--format",
            "json",
        ])
        .output()
        .unwrap();
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(v["equivalence_metric"].as_f64().unwrap() <= 1e-9);
}

#[test]
fn bench_deterministic_given_seed() {
    let run = || {
        mpuforge()
            .args([
                "bench",
                "--mpus",
                "multicontrol-z",
                "--n-list",
                "4,8",
                "--format",
                "csv",
            ])
            .output()
            .unwrap()
            .stdout
    };
    assert_eq!(run(), run());
}
