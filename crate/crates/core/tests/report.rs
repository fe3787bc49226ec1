//! Batch runs end to end: outputs, manifest and runtime table.

use std::fs;

use stmeta::characterization::Method;
use stmeta::report::{run, RunConfig};

fn config(dir: &tempfile::TempDir, circuits: &[&str], samples: usize) -> RunConfig {
    RunConfig {
        circuits: circuits.iter().map(|s| s.to_string()).collect(),
        samples,
        out: dir.path().to_path_buf(),
        ..RunConfig::default()
    }
}

#[test]
fn analytic_trigger_all_methods() {
    let dir = tempfile::tempdir().unwrap();
    let m = run(&config(&dir, &["marino"], 200)).unwrap();
    assert!(m.complete);
    let c = &m.circuits[0];
    assert_eq!(c.methods.len(), 7);
    let limit = |method| match method {
        Method::Hyst | Method::Binary | Method::Static => 1e-6,
        // interpolated on the 1 mV output grid
        Method::Map => 1e-3,
        Method::ExpDc | Method::ExpAc | Method::Inversion => 1e-5,
    };
    for s in &c.methods {
        assert_eq!(s.failures, 0, "{}", s.method);
        assert!(s.max_deviation <= limit(s.method), "{}: {}", s.method, s.max_deviation);
    }
    assert!(m.verify(dir.path()).unwrap().is_empty());
    let listed: Vec<&str> = m.files.iter().map(|f| f.path.as_str()).collect();
    for name in ["marino_points.csv", "marino_branches.csv", "marino_map.dat", "marino.json", "runtime_table.txt"] {
        assert!(listed.contains(&name), "{name}");
    }
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("marino.json")).unwrap()).unwrap();
    assert_eq!(json["schema"], 1);
    assert!(fs::read_to_string(dir.path().join("marino_points.csv")).unwrap().starts_with("# stmeta points v1\n"));
}

#[test]
fn identical_config_gives_identical_files() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let methods = vec![Method::Binary, Method::ExpDc, Method::Static];
    let ma = run(&RunConfig { methods: methods.clone(), seed: 7, ..config(&a, &["loop"], 80) }).unwrap();
    let mb = run(&RunConfig { methods, seed: 7, ..config(&b, &["loop"], 80) }).unwrap();
    for name in ["loop_points.csv", "loop_branches.csv", "loop_map.dat"] {
        assert_eq!(fs::read(a.path().join(name)).unwrap(), fs::read(b.path().join(name)).unwrap(), "{name}");
    }
    assert_eq!(ma.circuits[0].calibration, mb.circuits[0].calibration);
}

#[test]
fn empty_method_list_is_rejected_before_any_work() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("never");
    let c = RunConfig { methods: vec![], out: out.clone(), ..RunConfig::default() };
    assert!(run(&c).is_err());
    assert!(!out.exists());
    let c = RunConfig { circuits: vec!["nand".into()], out: out.clone(), ..RunConfig::default() };
    assert!(run(&c).is_err());
    assert!(!out.exists());
}

#[test]
fn runtime_table_shape_and_ordering() {
    let dir = tempfile::tempdir().unwrap();
    let n = 100;
    let m = run(&config(&dir, &["std6t"], n)).unwrap();
    assert!(m.complete);
    let table = fs::read_to_string(dir.path().join("runtime_table.txt")).unwrap();
    let row = |label: &str| -> Vec<String> {
        let line = table.lines().find(|l| l.starts_with(label)).unwrap_or_else(|| panic!("{label} row"));
        line[24..].split_whitespace().map(String::from).collect()
    };
    let labels: Vec<&str> = table.lines().skip(2).map(|l| l[..24].trim()).collect();
    assert_eq!(labels, ["hyst", "binary", "map", "expAC", "expDC", "inversion", "static", "metastable grid points"]);
    let secs = |label| row(label)[0].parse::<f64>().unwrap();
    assert!(secs("static") < secs("map"));

    // inputs of the uniform grid strictly inside the band
    let c = &m.circuits[0];
    let (lo, hi) = (c.v_low.unwrap(), c.v_high.unwrap());
    let inside = (0..n).map(|k| 0.9 * k as f64 / (n - 1) as f64).filter(|&v| v > lo && v < hi).count();
    assert_eq!(row("metastable grid points")[0].parse::<usize>().unwrap(), inside);
}

#[test]
fn uncharacterizable_circuit_marks_the_run_incomplete() {
    let dir = tempfile::tempdir().unwrap();
    let m = run(&RunConfig { methods: vec![Method::Binary], ..config(&dir, &["marino", "ffhalf"], 40) }).unwrap();
    assert!(!m.complete);
    assert!(m.circuits[0].complete());
    assert!(!m.circuits[1].errors.is_empty());
    assert!(m.files.iter().any(|f| f.path == "marino_points.csv"));
    assert!(m.verify(dir.path()).unwrap().is_empty());
    assert!(dir.path().join("manifest.json").exists());
}
