//! The `witness-lab` binary and the harness behind it.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use witness_lab::benchmarks::build_mab_tree_family;
use witness_lab::harness::{run, ExperimentConfig, ExperimentKind, Overrides};

fn manifest() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

fn cli(args: &[&str], config: &Path, out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_witness-lab"))
        .args(args)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

#[test]
fn plan_matches_golden_file_and_oracle() {
    let tmp = tempfile::tempdir().unwrap();
    let out = cli(&["plan"], &manifest().join("configs/plan.toml"), tmp.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    let got = std::fs::read_to_string(tmp.path().join("plan.json")).unwrap();
    let golden = std::fs::read_to_string(manifest().join("tests/golden/plan_mab_tree_h3_k2.json")).unwrap();
    assert_eq!(got, golden);

    let (class, truth) = build_mab_tree_family(3, 2, 0.2).unwrap();
    let doc: serde_json::Value = serde_json::from_str(&got).unwrap();
    assert_eq!(doc["v_star"].as_f64().unwrap(), class.get(truth).value());
    let policy = class.get(truth).policy();
    for (h, row) in doc["policy"].as_array().unwrap().iter().enumerate() {
        for (x, a) in row.as_array().unwrap().iter().enumerate() {
            assert_eq!(a.as_u64().unwrap() as usize, policy.action(h, x).unwrap());
        }
    }
}

#[test]
fn separation_demo_writes_two_rows_per_seed() {
    let tmp = tempfile::tempdir().unwrap();
    let out = cli(&["separation-demo"], &manifest().join("configs/separation-demo.toml"), tmp.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    let mut reader = csv::Reader::from_path(tmp.path().join("separation.csv")).unwrap();
    assert_eq!(reader.headers().unwrap(), vec!["learner", "seed", "trajectories", "v_pi"]);
    let rows: Vec<csv::StringRecord> = reader.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 2 * 8);
    for pair in rows.chunks(2) {
        assert_eq!((&pair[0][0], &pair[1][0]), ("model_based", "profile"));
        assert_eq!(pair[0][1], pair[1][1]);
    }
}

#[test]
fn malformed_model_exits_2_and_names_the_location() {
    let tmp = tempfile::tempdir().unwrap();
    let mut doc: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(manifest().join("data/mab_tree_h3_k2_truth.json")).unwrap()).unwrap();
    doc["levels"][1]["transitions"][1][0] = serde_json::json!([0.6, 0.5]);
    write(tmp.path(), "bad.json", &doc.to_string());
    let cfg = write(tmp.path(), "plan.toml", "[source]\nkind = \"file\"\npath = \"bad.json\"\n");
    let out = cli(&["plan"], &cfg, &tmp.path().join("out"));
    assert_eq!(out.status.code(), Some(2));
    let err: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(err["error"], "invalid_model");
    let v = &err["violations"][0];
    assert_eq!((v["level"].as_u64(), v["state"].as_u64(), v["action"].as_u64()), (Some(1), Some(1), Some(0)));
    assert_eq!(v["kind"], "not_normalized");
}

#[test]
fn bad_configs_are_rejected_with_error_json() {
    let tmp = tempfile::tempdir().unwrap();
    let cases = [
        ("unknown.toml", "bogus = 1\n[source]\nkind = \"sampling-benchmark\"\n"),
        ("noseeds.toml", "mode = \"sampling\"\n[source]\nkind = \"sampling-benchmark\"\n"),
        ("missing.toml", "[source]\nkind = \"file\"\npath = \"nowhere.json\"\n"),
        ("wrongkind.toml", "experiment = \"rank\"\n[source]\nkind = \"sampling-benchmark\"\n"),
    ];
    for (name, text) in cases {
        let cfg = write(tmp.path(), name, text);
        let out = cli(&["run-main"], &cfg, &tmp.path().join("out"));
        assert_eq!(out.status.code(), Some(2), "{name}");
        let err: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
        assert_eq!(err["error"], "config", "{name}");
    }
}

#[test]
fn shipped_configs_roundtrip() {
    for kind in ExperimentKind::ALL {
        let path = manifest().join("configs").join(format!("{}.toml", kind.name()));
        let cfg = ExperimentConfig::from_toml(&std::fs::read_to_string(&path).unwrap()).unwrap();
        assert_eq!(cfg.experiment, Some(kind));
        let again = ExperimentConfig::from_toml(&cfg.to_toml().unwrap()).unwrap();
        assert_eq!(again, cfg, "{}", kind.name());
        assert_eq!(again.to_toml().unwrap(), cfg.to_toml().unwrap());
    }
}

#[test]
fn seed_offset_shifts_seeds() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig::load(manifest().join("configs/misfit.toml")).unwrap();
    let shifted = Overrides {
        seed_offset: 2,
        out: Some(tmp.path().join("shifted")),
    };
    run(ExperimentKind::Misfit, &cfg, &shifted).unwrap();
    let mut plain = cfg.clone();
    plain.seeds = cfg.seeds.iter().map(|s| s + 2).collect();
    let direct = Overrides {
        seed_offset: 0,
        out: Some(tmp.path().join("direct")),
    };
    run(ExperimentKind::Misfit, &plain, &direct).unwrap();
    let read = |d: &str| std::fs::read(tmp.path().join(d).join("misfit.csv")).unwrap();
    assert_eq!(read("shifted"), read("direct"));
}

#[test]
fn misfit_estimates_track_exact_values() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig::load(manifest().join("configs/misfit.toml")).unwrap();
    let overrides = Overrides {
        seed_offset: 0,
        out: Some(tmp.path().to_path_buf()),
    };
    run(ExperimentKind::Misfit, &cfg, &overrides).unwrap();
    let mut reader = csv::Reader::from_path(tmp.path().join("misfit.csv")).unwrap();
    for row in reader.records() {
        let row = row.unwrap();
        let (est, exact): (f64, f64) = (row[5].parse().unwrap(), row[6].parse().unwrap());
        assert!((est - exact).abs() < 0.1, "{row:?}");
    }
}
