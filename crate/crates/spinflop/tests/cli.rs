//! End-to-end checks of the `spinflop` binary: validation, output layout,
//! seed handling and byte-level reproducibility.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use spinflop::runner::{example_config, write_config, ExperimentConfig, ExperimentKind};

fn spinflop(args: &[&str], envs: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_spinflop"));
    cmd.args(args);
    for (k, v) in envs {
        cmd.env(k, v);
    }
    cmd.output().expect("failed to run spinflop")
}

fn write(config: &ExperimentConfig, dir: &Path, name: &str) -> String {
    let path = dir.join(name);
    write_config(config, &path).unwrap();
    path.to_str().unwrap().to_string()
}

fn summary(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(dir.join("summary.json")).unwrap()).unwrap()
}

#[test]
fn validate_reports_violations() {
    let tmp = tempfile::tempdir().unwrap();
    let mut config = example_config(ExperimentKind::FieldMap);
    config.geometry.half_extent = 5;
    config.mc.beta = -2.0;
    let path = write(&config, tmp.path(), "bad.json");
    let out = spinflop(&["validate", "--config", &path], &[]);
    assert!(!out.status.success());
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("multiple of 4"), "{err}");
    assert!(err.contains("beta"), "{err}");

    let good = write(&example_config(ExperimentKind::FieldMap), tmp.path(), "ok.json");
    let out = spinflop(&["validate", "--config", &good], &[]);
    assert!(out.status.success());
    assert_eq!(String::from_utf8(out.stdout).unwrap().trim(), "ok");
}

#[test]
fn run_rejects_invalid_configs_with_json_error() {
    let tmp = tempfile::tempdir().unwrap();
    let mut config = example_config(ExperimentKind::FieldMap);
    config.geometry.half_extent = 5;
    let path = write(&config, tmp.path(), "bad.json");
    let out = spinflop(&["field-map", "--config", &path], &[]);
    assert!(!out.status.success());
    let payload: serde_json::Value =
        serde_json::from_str(String::from_utf8(out.stdout).unwrap().trim()).unwrap();
    assert!(payload["error"].as_str().unwrap().contains("multiple of 4"));
}

#[test]
fn subcommand_must_match_config() {
    let tmp = tempfile::tempdir().unwrap();
    let path = write(&example_config(ExperimentKind::FieldMap), tmp.path(), "c.json");
    let out = spinflop(&["ground-state", "--config", &path], &[]);
    assert!(!out.status.success());
    let payload: serde_json::Value =
        serde_json::from_str(String::from_utf8(out.stdout).unwrap().trim()).unwrap();
    assert!(payload["error"].as_str().unwrap().contains("field-map"));
}

#[test]
fn catalan_check_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let mut config = example_config(ExperimentKind::CatalanCheck);
    config.output = tmp.path().join("out");
    let path = write(&config, tmp.path(), "c.json");
    let out = spinflop(&["catalan-check", "--config", &path], &[]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let dir = tmp.path().join("out").join("catalan-check-1");
    let s = summary(&dir);
    assert!(s["diff"].as_f64().unwrap().abs() < 1e-9);
    assert!((s["value"].as_f64().unwrap() - 1.831931188).abs() < 1e-8);
    assert!(s["latticeSumDiff"].as_f64().unwrap().abs() < s["tailBound"].as_f64().unwrap());
    assert_eq!(s["seed"], 1);
    assert!(s["version"].is_string());
    // run directory is self-describing
    assert!(dir.join("config.resolved.json").exists());
    assert!(dir.join("meta.json").exists());
}

#[test]
fn field_map_csv_carries_the_exact_pattern() {
    let tmp = tempfile::tempdir().unwrap();
    let mut config = example_config(ExperimentKind::FieldMap);
    config.output = tmp.path().join("out");
    let path = write(&config, tmp.path(), "c.json");
    let out = spinflop(&["field-map", "--config", &path], &[]);
    assert!(out.status.success());
    let csv = fs::read_to_string(tmp.path().join("out/field-map-1/data.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "x,y,h1,h2,site_class");
    for line in lines {
        let fields: Vec<&str> = line.split(',').collect();
        assert_eq!(fields[2], "0");
        assert!(
            matches!(fields[3], "0" | "2" | "-2"),
            "unexpected h2 in line: {line}"
        );
    }
}

#[test]
fn gap_probe_hot_only_vanishes() {
    let tmp = tempfile::tempdir().unwrap();
    let mut config = example_config(ExperimentKind::GapProbe);
    config.output = tmp.path().join("out");
    config.geometry.half_extent = 8;
    config.geometry.annulus_radii = vec![4];
    config.gap.betas = vec![0.1];
    config.gap.margin = 4;
    config.mc.sweeps = 3_000;
    config.mc.burnin = 500;
    config.mc.seed = 5;
    let path = write(&config, tmp.path(), "c.json");
    let out = spinflop(&["gap-probe", "--config", &path], &[]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    let s = summary(&tmp.path().join("out/gap-probe-5"));
    assert_eq!(s["results"][0]["verdict"], "vanishes");
    let csv = fs::read_to_string(tmp.path().join("out/gap-probe-5/data.csv")).unwrap();
    assert!(csv.starts_with("beta,radius,dressing,mean,stderr"));
    assert_eq!(csv.lines().count(), 3); // header + me + mw
}

#[test]
fn seed_env_overrides_config() {
    let tmp = tempfile::tempdir().unwrap();
    let mut config = example_config(ExperimentKind::SpectralGap);
    config.output = tmp.path().join("out");
    let path = write(&config, tmp.path(), "c.json");
    let out = spinflop(
        &["spectral-gap", "--config", &path],
        &[("SPINFLOP_SEED", "4242")],
    );
    assert!(out.status.success());
    let dir = tmp.path().join("out/spectral-gap-4242");
    assert!(dir.exists());
    assert_eq!(summary(&dir)["seed"], 4242);
}

#[test]
fn ground_state_run_is_symmetric() {
    let tmp = tempfile::tempdir().unwrap();
    let mut config = example_config(ExperimentKind::GroundState);
    config.output = tmp.path().join("out");
    let path = write(&config, tmp.path(), "c.json");
    let out = spinflop(&["ground-state", "--config", &path], &[]);
    assert!(out.status.success());
    let s = summary(&tmp.path().join("out/ground-state-1"));
    assert_eq!(s["symmetric"], true);
    assert!(s["me"]["mEW"].as_f64().unwrap() > 0.05);
    assert!(s["me"]["gradientNorm"].as_f64().unwrap() < 1e-8);
}

#[test]
fn repeated_runs_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let mut config = example_config(ExperimentKind::Sample);
    config.geometry.half_extent = 4;
    config.mc.sweeps = 1_000;
    config.mc.burnin = 100;
    config.mc.seed = 77;
    let path = write(&config, tmp.path(), "c.json");
    let mut snapshots = Vec::new();
    for k in 0..2 {
        let outdir = tmp.path().join(format!("out{k}"));
        let out = spinflop(
            &["sample", "--config", &path, "--outdir", outdir.to_str().unwrap()],
            &[],
        );
        assert!(out.status.success());
        let dir = outdir.join("sample-77");
        snapshots.push((
            fs::read(dir.join("data.csv")).unwrap(),
            fs::read(dir.join("summary.json")).unwrap(),
        ));
    }
    assert_eq!(snapshots[0].0, snapshots[1].0);
    assert_eq!(snapshots[0].1, snapshots[1].1);
}

#[test]
fn histogram_run_writes_bins() {
    let tmp = tempfile::tempdir().unwrap();
    let mut config = example_config(ExperimentKind::Histogram);
    config.output = tmp.path().join("out");
    config.geometry.half_extent = 4;
    config.mc.sweeps = 500;
    config.mc.burnin = 100;
    config.histogram.chains = 2;
    config.histogram.bins = 11;
    let path = write(&config, tmp.path(), "c.json");
    let out = spinflop(&["histogram", "--config", &path], &[]);
    assert!(out.status.success());
    let csv = fs::read_to_string(tmp.path().join("out/histogram-1/data.csv")).unwrap();
    assert_eq!(csv.lines().count(), 12);
    let s = summary(&tmp.path().join("out/histogram-1"));
    assert_eq!(s["nSamples"], 1_000);
}

#[test]
fn unreadable_config_fails_cleanly() {
    let out = spinflop(&["validate", "--config", "/nonexistent/nope.json"], &[]);
    assert!(!out.status.success());
}
