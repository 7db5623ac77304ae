//! The command-line binary driven as a subprocess.

use std::path::Path;
use std::process::{Command, Output};

use dumbbell_spectra::cli::config::example_config;

const BIN: &str = env!("CARGO_BIN_EXE_dumbbell-spectra");
const COMMANDS: [&str; 7] = ["mesh", "solve", "sl", "predict", "sweep", "verify", "nodal"];

fn run(args: &[&str], cache: &Path) -> Output {
    Command::new(BIN)
        .args(args)
        .env("DBSPEC_CACHE_DIR", cache)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, edit: impl FnOnce(&mut serde_json::Value)) -> String {
    let mut cfg = example_config();
    cfg.output.dir = dir.join("out");
    let mut v = serde_json::to_value(&cfg).unwrap();
    edit(&mut v);
    let path = dir.join("run.json");
    std::fs::write(&path, v.to_string()).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn help_and_version() {
    let tmp = tempfile::tempdir().unwrap();
    for flag in ["--help", "--version"] {
        let out = run(&[flag], tmp.path());
        assert!(out.status.success(), "{flag}");
        for cmd in COMMANDS {
            let out = run(&[cmd, flag], tmp.path());
            assert!(out.status.success(), "{cmd} {flag}");
            assert!(!out.stdout.is_empty());
        }
    }
}

#[test]
fn unknown_flags_and_commands_fail() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), |_| {});
    for cmd in COMMANDS {
        let out = run(&[cmd, "--config", &cfg, "--fast"], tmp.path());
        assert!(!out.status.success(), "{cmd}");
    }
    assert!(!run(&["plot", "--config", &cfg], tmp.path()).status.success());
    assert!(!run(&["predict"], tmp.path()).status.success());
}

#[test]
fn config_errors_name_the_field() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), |v| v["mesh"]["neck_layers"] = serde_json::json!(-3));
    let out = run(&["mesh", "--config", &cfg], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("/mesh/neck_layers"));

    let cfg = write_config(tmp.path(), |v| v["sweep"]["epsilons"] = serde_json::json!([0.02, 0.04]));
    let out = run(&["sweep", "--config", &cfg], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("/sweep/epsilons/1"));

    let cfg = write_config(tmp.path(), |v| v["target"]["mode"] = serde_json::json!([0, 1]));
    let out = run(&["predict", "--config", &cfg], tmp.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn predict_and_sl_reports() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), |_| {});
    let out = run(&["predict", "--config", &cfg], tmp.path());
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["schema"], 1);
    assert_eq!(v["k"], 1);
    assert_eq!(v["order"], "OddBelowEven");
    assert_eq!(v["indices"], serde_json::json!({"odd": 6, "even": 7}));
    assert!(tmp.path().join("out/predict.json").exists());

    let out = run(&["sl", "--config", &cfg], tmp.path());
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let taus = v["taus"].as_array().unwrap();
    for (i, t) in taus.iter().enumerate() {
        let exact = ((i + 1) as f64 * std::f64::consts::PI / 2.0).powi(2);
        assert!((t.as_f64().unwrap() - exact).abs() <= 1e-5 * exact);
    }
    assert_eq!((v["N_e"].as_u64(), v["N_o"].as_u64()), (Some(2), Some(1)));
}

#[test]
fn out_flag_overrides_and_cache_is_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let cache = tmp.path().join("cache");
    let cfg = write_config(tmp.path(), |v| v["solver"]["k_eigs"] = serde_json::json!(8));
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    let out = run(&["solve", "--config", &cfg, "--out", a.to_str().unwrap()], &cache);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let entries = std::fs::read_dir(&cache).unwrap().count();
    assert_eq!(entries, 1);
    // a different output dir shares the cache entry
    let out = run(&["solve", "--config", &cfg, "--out", b.to_str().unwrap()], &cache);
    assert!(out.status.success());
    assert_eq!(std::fs::read_dir(&cache).unwrap().count(), 1);
    let cold = std::fs::read(a.join("solve.json")).unwrap();
    assert_eq!(cold, std::fs::read(b.join("solve.json")).unwrap());
    // a cold run elsewhere reproduces the bytes
    let out = run(
        &["solve", "--config", &cfg, "--out", b.to_str().unwrap()],
        &tmp.path().join("fresh"),
    );
    assert!(out.status.success());
    assert_eq!(cold, std::fs::read(b.join("solve.json")).unwrap());
    // a new seed is a new entry
    let out = run(&["solve", "--config", &cfg, "--seed", "7"], &cache);
    assert!(out.status.success());
    assert_eq!(std::fs::read_dir(&cache).unwrap().count(), 2);
}

#[test]
fn mesh_and_nodal_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), |v| v["solver"]["k_eigs"] = serde_json::json!(7));
    let cache = tmp.path().join("cache");
    assert!(run(&["mesh", "--config", &cfg], &cache).status.success());
    let mesh = dumbbell_spectra::mesh::read_mesh_file(&tmp.path().join("out/mesh.txt")).unwrap();
    assert!(mesh.check_invariants().is_empty());
    assert!(mesh.mirror.is_some());

    let out = run(&["nodal", "--config", &cfg], &cache);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(tmp.path().join("out/nodal.json")).unwrap()).unwrap();
    let records = v["records"].as_array().unwrap();
    assert_eq!(records.len(), 7);
    let counts: Vec<u64> = records.iter().map(|r| r["count"].as_u64().unwrap()).collect();
    assert_eq!(counts, vec![1, 2, 3, 4, 5, 6, 7]);
    assert_eq!(v["courant_bound_holds"], true);
    let svg = std::fs::read_to_string(tmp.path().join("out/nodal_01.svg")).unwrap();
    assert!(svg.contains("<svg") && !svg.contains("<polyline"));
    let svg = std::fs::read_to_string(tmp.path().join("out/nodal_06.svg")).unwrap();
    assert!(svg.contains("<polyline"));
}

#[test]
fn verify_first_example() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), |_| {});
    let out = run(&["verify", "--config", &cfg], &tmp.path().join("cache"));
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(tmp.path().join("out/verify.json")).unwrap()).unwrap();
    assert_eq!(v["schema"], 1);
    assert_eq!(v["courant_sharp"], true);
    for d in v["deficiencies"].as_array().unwrap() {
        assert_eq!(d["even"]["courant_sharp"], true);
        assert_eq!(d["odd"]["courant_sharp"], true);
    }
    let csv = std::fs::read_to_string(tmp.path().join("out/verify.csv")).unwrap();
    assert_eq!(csv.lines().count(), 5);
    assert!(csv.starts_with("epsilon,"));
}

#[test]
fn shipped_configs_parse() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let first = dumbbell_spectra::cli::RunConfig::load(&dir.join("first_example.json")).unwrap();
    let mut expected = example_config();
    expected.output.dir = "out/first".into();
    assert_eq!(first, expected);
    let second = dumbbell_spectra::cli::RunConfig::load(&dir.join("second_example.json")).unwrap();
    assert_eq!(second.target.mode, Some((1, 2)));
}
