use std::fs;
use std::process::Command;

use hum_tracking::experiments::{
    example_configs, read_controls, run_example, run_obstruction, run_tracking, ExampleOverrides, ObstructionSetup,
    ObstructionVariant,
};

fn eps01() -> ExampleOverrides {
    ExampleOverrides { epsilon: Some(0.1), ..Default::default() }
}

#[test]
fn repeated_runs_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let sa = run_example(1, eps01(), a.path()).unwrap();
    let sb = run_example(1, eps01(), b.path()).unwrap();
    let ca = fs::read(&sa[0].artifacts.timeseries).unwrap();
    let cb = fs::read(&sb[0].artifacts.timeseries).unwrap();
    assert!(!ca.is_empty());
    assert_eq!(ca, cb);
    assert_eq!(sa[0].objective_history, sb[0].objective_history);
}

#[test]
fn controls_in_csv_reproduce_reported_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = &example_configs(1, eps01()).unwrap()[0];
    let summary = run_tracking(cfg, dir.path()).unwrap();
    let controls = read_controls(&summary.artifacts.timeseries).unwrap();
    let e = cfg.problem().unwrap().tracking_error(&controls).unwrap();
    assert!((e.combined - summary.combined_error).abs() <= 1e-12, "{} vs {}", e.combined, summary.combined_error);
    let json: serde_json::Value = serde_json::from_slice(&fs::read(&summary.artifacts.summary).unwrap()).unwrap();
    assert_eq!(json["combined_error"].as_f64().unwrap(), summary.combined_error);
}

#[test]
fn coarser_mesh_stays_close() {
    let dir = tempfile::tempdir().unwrap();
    let fine = run_example(4, ExampleOverrides::default(), dir.path()).unwrap()[0].combined_error;
    let coarse = run_example(4, ExampleOverrides { elements: Some(100), ..Default::default() }, dir.path()).unwrap()[0]
        .combined_error;
    assert!(coarse <= 2.0 * fine && coarse >= 0.5 * fine, "coarse {coarse}, fine {fine}");
}

#[test]
fn space_time_dump_shape() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = example_configs(1, ExampleOverrides { epsilon: Some(0.1), elements: Some(20), steps: Some(50) })
        .unwrap()
        .remove(0);
    cfg.output.space_time = true;
    let s = run_tracking(&cfg, dir.path()).unwrap();
    for path in [s.artifacts.state.unwrap(), s.artifacts.adjoint.unwrap()] {
        let text = fs::read_to_string(path).unwrap();
        let rows: Vec<&str> = text.lines().collect();
        assert_eq!(rows.len(), 1 + 51);
        assert!(rows.iter().all(|r| r.split(',').count() == 1 + 21));
    }
}

#[test]
fn obstruction_mismatch_shrinks() {
    for variant in [ObstructionVariant::OneControlTwoPoints, ObstructionVariant::TwoControlsThreePoints] {
        let coarse = run_obstruction(variant, &ObstructionSetup::standard(variant, 50)).unwrap();
        let fine = run_obstruction(variant, &ObstructionSetup::standard(variant, 100)).unwrap();
        assert!(fine.mismatch < coarse.mismatch, "{variant}: {} -> {}", coarse.mismatch, fine.mismatch);
        assert!(fine.flux_right < coarse.flux_right);
        assert!(fine.forcing_norm > 1.0);
    }
}

fn cli() -> Command {
    Command::new(env!("CARGO_BIN_EXE_hum-track"))
}

#[test]
fn cli_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = example_configs(1, ExampleOverrides { epsilon: Some(0.1), elements: Some(20), steps: Some(50) })
        .unwrap()
        .remove(0);
    let good = dir.path().join("good.json");
    fs::write(&good, cfg.to_json()).unwrap();
    let out = dir.path().join("out");
    let status = cli().args(["track", "--config"]).arg(&good).arg("--out").arg(&out).status().unwrap();
    assert_eq!(status.code(), Some(0));
    assert!(out.join(format!("{}.csv", cfg.name)).exists());

    let bad = dir.path().join("bad.json");
    fs::write(&bad, r#"{"horizon": -1.0}"#).unwrap();
    let status = cli().args(["track", "--config"]).arg(&bad).arg("--out").arg(&out).status().unwrap();
    assert_eq!(status.code(), Some(2));

    let status = cli().args(["example", "5"]).arg("--out").arg(&out).status().unwrap();
    assert_eq!(status.code(), Some(2));

    cfg.delta = 0.0;
    let singular = dir.path().join("delta0.json");
    fs::write(&singular, cfg.to_json()).unwrap();
    let status = cli().args(["track", "--config"]).arg(&singular).arg("--out").arg(&out).status().unwrap();
    assert_eq!(status.code(), Some(3));
}
