use guided_pf::chain::{instance_to_json, parse_instance};
use guided_pf::hard::{build_smc_lower, build_var_blowup, kernel_switch_demo, random_tree_instance, two_path};
use guided_pf::{load_instance, save_instance, validate_instance, Error, Violation};

#[test]
fn two_path_survives_save_and_load() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("two.json");
    let inst = two_path();
    save_instance(&path, &inst).unwrap();
    let back = load_instance(&path).unwrap();
    assert_eq!(back, inst);
    assert_eq!(back.content_hash(), inst.content_hash());
}

#[test]
fn generated_instances_round_trip_bit_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let cases = vec![
        random_tree_instance(3, 3, 4),
        build_var_blowup(10).unwrap(),
        kernel_switch_demo(5, 6, 0.7, 1.0).unwrap(),
    ];
    for (i, inst) in cases.into_iter().enumerate() {
        let path = dir.path().join(format!("{i}.json"));
        save_instance(&path, &inst).unwrap();
        let back = load_instance(&path).unwrap();
        for (a, b) in inst.prm.values.iter().flatten().zip(back.prm.values.iter().flatten()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        for (ra, rb) in inst
            .chain
            .kernels
            .iter()
            .flatten()
            .zip(back.chain.kernels.iter().flatten())
        {
            for (x, y) in ra.iter().zip(rb) {
                assert_eq!(x.0, y.0);
                assert_eq!(x.1.to_bits(), y.1.to_bits());
            }
        }
        assert_eq!(back, inst);
    }
}

#[test]
fn smc_lower_file_has_popcount_rewards() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("lower.json");
    save_instance(&path, &build_smc_lower(4, 1.0).unwrap()).unwrap();
    let inst = load_instance(&path).unwrap();
    assert_eq!(inst.chain.level_size(4), 16);
    for (label, r) in inst.chain.levels[4].iter().zip(&inst.terminal_reward) {
        let ones = label.chars().filter(|c| *c == '1').count() as i32;
        assert_eq!(*r, 2f64.powi(ones), "label {label}");
    }
}

#[test]
fn negative_probability_in_file_fails_validation() {
    let mut doc: serde_json::Value = serde_json::from_str(&instance_to_json(&two_path()).unwrap()).unwrap();
    doc["kernels"][0][0] = serde_json::json!([[0, 1.5], [1, -0.5]]);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(&path, doc.to_string()).unwrap();
    assert!(matches!(load_instance(&path), Err(Error::ValidationFailed(_))));
    match parse_instance(&doc.to_string()) {
        Err(Error::ValidationFailed(v)) => {
            assert!(v.iter().any(|x| matches!(x, Violation::NegativeProbability { .. })));
        }
        other => panic!("expected ValidationFailed, got {other:?}"),
    }
}

#[test]
fn report_lists_every_violation() {
    let mut inst = two_path();
    inst.prm.values[2][0] = 1.0;
    inst.chain.kernels[0][0][0].1 = 0.4;
    let report = validate_instance(&inst);
    assert!(report
        .iter()
        .any(|v| matches!(v, Violation::PrmTerminalMismatch { state: 0, .. })));
    assert!(report
        .iter()
        .any(|v| matches!(v, Violation::RowNotStochastic { level: 0, state: 0, .. })));
    let text = report.iter().map(ToString::to_string).collect::<Vec<_>>().join("\n");
    assert!(text.contains("prm≠r* at level H"));
    assert!(text.contains("row not stochastic"));
}

#[test]
fn truncated_file_is_a_parse_error() {
    let text = instance_to_json(&two_path()).unwrap();
    let cut = &text[..text.len() / 2];
    assert!(matches!(parse_instance(cut), Err(Error::Parse { .. })));
}
