use std::fs;
use std::process::Command;

fn kt1sim() -> Command {
    Command::new(env!("CARGO_BIN_EXE_kt1sim"))
}

#[test]
fn run_writes_json_and_csv_into_the_override_dir() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("cfg.json");
    fs::write(
        &config,
        r#"{"graph": {"family": "grid", "n": 36, "id_scheme": "random_permutation", "seed": 2},
            "algo": "bfs_cover", "trials": 2, "output_path": "elsewhere/out.json"}"#,
    )
    .unwrap();
    let out = kt1sim()
        .args(["run", "--config"])
        .arg(&config)
        .env("KT1SIM_OUT_DIR", dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let record: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("out.json")).unwrap()).unwrap();
    assert_eq!(record["summary"]["passed"], 2);
    let csv = fs::read_to_string(dir.path().join("out.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
}

#[test]
fn generated_graph_verifies_a_produced_tree() {
    let dir = tempfile::tempdir().unwrap();
    let graph = dir.path().join("g.txt");
    let status = kt1sim()
        .args(["gen", "--family", "cycle", "--n", "9", "--out"])
        .arg(&graph)
        .status()
        .unwrap();
    assert!(status.success());
    let tree = dir.path().join("t.json");
    fs::write(&tree, r#"{"root": 1, "parent_map": {"2": 1, "9": 1, "3": 2, "8": 9, "4": 3, "7": 8, "5": 4, "6": 7},
        "layers": {"1": 0, "2": 1, "9": 1, "3": 2, "8": 2, "4": 3, "7": 3, "5": 4, "6": 4}}"#)
        .unwrap();
    let ok = kt1sim().args(["verify", "--graph"]).arg(&graph).arg("--tree").arg(&tree).status().unwrap();
    assert!(ok.success());
    fs::write(&tree, r#"{"root": 1, "parent_map": {"2": 1, "3": 2, "4": 3, "5": 4, "6": 5, "7": 6, "8": 7, "9": 8},
        "layers": {"1": 0, "2": 1, "3": 2, "4": 3, "5": 4, "6": 5, "7": 6, "8": 7, "9": 8}}"#)
        .unwrap();
    let bad = kt1sim().args(["verify", "--graph"]).arg(&graph).arg("--tree").arg(&tree).status().unwrap();
    assert_eq!(bad.code(), Some(1));
}

#[test]
fn scale_prints_one_row_per_size() {
    let out = kt1sim()
        .args(["--sequential", "scale", "--family", "erdos_renyi", "--algo", "le_det", "--ns", "32,64", "--seeds", "1"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().any(|l| l.trim_start().starts_with("32 ")));
    assert!(text.lines().any(|l| l.trim_start().starts_with("64 ")));
    assert!(text.contains("growth:"));
}

#[test]
fn bad_algo_is_an_error() {
    let out = kt1sim().args(["scale", "--family", "grid", "--algo", "nope"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}
