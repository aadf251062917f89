use std::path::Path;
use std::process::{Command, Output};

fn gpf(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gpf"))
        .args(args)
        .output()
        .expect("spawn gpf")
}

fn ok(args: &[&str]) -> Output {
    let out = gpf(args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn code(args: &[&str]) -> i32 {
    gpf(args).status.code().expect("exit code")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn generators_produce_valid_instances() {
    let dir = tempfile::tempdir().unwrap();
    let cases: Vec<(&str, Vec<&str>)> = vec![
        ("lower.json", vec!["make-lower", "--horizon", "4", "--lambda", "1"]),
        ("var.json", vec!["make-varblow", "--horizon", "8"]),
        (
            "my.json",
            vec!["make-myopic", "--schedule", "4", "--gammas", "0.1", "--ystar", "1111"],
        ),
        (
            "ks.json",
            vec!["make-kswitch", "--horizon", "5", "--alpha", "0.5", "--seed", "3"],
        ),
    ];
    for (name, mut args) in cases {
        let path = dir.path().join(name);
        args.extend(["--out", p(&path)]);
        ok(&args);
        assert!(path.with_extension("params.json").exists());
        let out = ok(&["validate", "--instance", p(&path)]);
        assert!(String::from_utf8_lossy(&out.stdout).starts_with("valid:"));
    }
}

#[test]
fn same_config_gives_identical_csv_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let inst = dir.path().join("lower.json");
    ok(&["make-lower", "--horizon", "4", "--out", p(&inst)]);
    let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    for (out, workers) in [(&a, "1"), (&b, "3")] {
        ok(&[
            "run",
            "--instance",
            p(&inst),
            "--algo",
            "smc",
            "--particles",
            "8",
            "--trials",
            "700",
            "--seed",
            "5",
            "--workers",
            workers,
            "--out",
            p(out),
        ]);
    }
    let (x, y) = (std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert_eq!(x, y);
    assert!(String::from_utf8_lossy(&x).starts_with("instance,instance_hash,algo,N,trials,seed,tv_to_pistar"));
    assert!(a.with_extension("json").exists());
}

#[test]
fn sweep_and_couple_write_csv() {
    let dir = tempfile::tempdir().unwrap();
    let inst = dir.path().join("lower.json");
    ok(&["make-lower", "--horizon", "3", "--out", p(&inst)]);
    let out = ok(&[
        "sweep",
        "--instance",
        p(&inst),
        "--algo",
        "smc,sis",
        "--particles",
        "2,4",
        "--trials",
        "200",
    ]);
    let text = String::from_utf8_lossy(&out.stdout).to_string();
    assert_eq!(text.lines().count(), 5, "{text}");
    assert!(text.lines().next().unwrap().contains("thm_3_2"));
    let out = ok(&["couple", "--instance", p(&inst), "--particles", "2", "--trials", "300"]);
    assert!(String::from_utf8_lossy(&out.stderr).contains("coupled forests equal in 300/300 pairs"));
}

#[test]
fn oracle_reports_json() {
    let dir = tempfile::tempdir().unwrap();
    let inst = dir.path().join("var.json");
    ok(&["make-varblow", "--horizon", "8", "--out", p(&inst)]);
    let out = ok(&["oracle", "--instance", p(&inst)]);
    let doc: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(doc["coverage"]["c_act_hat"], 2.0);
    assert_eq!(doc["Z"], 1.0);
}

#[test]
fn exit_codes_follow_error_classes() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{\"name\": \"x\"").unwrap();
    assert_eq!(code(&["validate", "--instance", p(&bad)]), 2);

    let lower = dir.path().join("lower.json");
    ok(&["make-lower", "--horizon", "3", "--out", p(&lower)]);
    let mut doc: serde_json::Value = serde_json::from_slice(&std::fs::read(&lower).unwrap()).unwrap();
    doc["kernels"][0][0][0][1] = serde_json::json!(0.9);
    let broken = dir.path().join("broken.json");
    std::fs::write(&broken, doc.to_string()).unwrap();
    let out = gpf(&["validate", "--instance", p(&broken)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("row not stochastic"));

    let args = [
        "run",
        "--instance",
        p(&lower),
        "--algo",
        "smc-rs",
        "--particles",
        "2",
        "--trials",
        "50",
        "--eta",
        "1",
    ];
    assert_eq!(code(&args), 3);

    let big = dir.path().join("big.json");
    assert_eq!(code(&["make-lower", "--horizon", "30", "--out", p(&big)]), 4);
    assert!(!big.exists());

    assert_eq!(code(&["run", "--instance", p(&lower), "--algo", "nope"]), 3);
    assert_eq!(code(&["run", "--instance", p(&lower), "--strict", "--clamp"]), 2);
}
