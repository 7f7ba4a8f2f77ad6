use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::time::Instant;

use serde_json::Value;

fn instances() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../instances")
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("cproj-cli-{}-{name}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cproj-twistor"))
        .args(args)
        .arg("--out")
        .arg(dir.join("out"))
        .arg("--workspace")
        .arg(dir.join("ws"))
        .output()
        .unwrap()
}

fn report(dir: &Path, command: &str) -> Value {
    let text = std::fs::read_to_string(dir.join("out").join(format!("{command}.json"))).unwrap();
    serde_json::from_str(&text).unwrap()
}

fn record<'a>(report: &'a Value, name: &str) -> &'a Value {
    report["records"]
        .as_array()
        .unwrap()
        .iter()
        .find(|r| r["name"] == name)
        .unwrap_or_else(|| panic!("no record {name}"))
}

fn instance(name: &str) -> String {
    instances().join(name).to_string_lossy().into_owned()
}

#[test]
fn check_input_exit_codes() {
    for (file, code) in [("flat.toml", 0), ("fs.toml", 0), ("pert.toml", 2)] {
        let dir = scratch(&format!("check-{file}"));
        let out = run(&dir, &["check-input", "--instance", &instance(file)]);
        assert_eq!(out.status.code(), Some(code), "{file}");
        let r = report(&dir, "check-input");
        let t11 = record(&r, "type11_connection");
        assert_eq!(t11["pass"], code == 0);
        if code != 0 {
            assert!(t11["value"].as_f64().unwrap() > 1e-3);
        }
    }
}

#[test]
fn parse_errors_carry_position() {
    let dir = scratch("parse");
    let bad = dir.join("bad.toml");
    std::fs::write(&bad, "n = 2\n\n[gamma]\n\"1,1,1\" = [1, 2]\n").unwrap();
    let out = run(&dir, &["check-input", "--instance", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let r = report(&dir, "check-input");
    assert_eq!(r["error"]["kind"], "Parse");
    assert!(r["error"]["message"].as_str().unwrap().contains("line 4"), "{}", r["error"]["message"]);

    // a bad literal is reported with its key
    std::fs::write(&bad, "n = 2\n[gamma]\n\"1,1,2\" = \"z3\"\n").unwrap();
    let out = run(&dir, &["check-input", "--instance", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let msg = report(&dir, "check-input")["error"]["message"].as_str().unwrap().to_string();
    assert!(msg.contains("gamma \"1,1,2\"") && msg.contains("column"), "{msg}");

    // unknown keys are rejected
    std::fs::write(&bad, "n = 2\nradius = 1.0\n").unwrap();
    assert_eq!(run(&dir, &["check-input", "--instance", bad.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn build_cache_is_reused() {
    let dir = scratch("cache");
    let args = ["build", "--instance", &instance("flat.toml")];
    let t0 = Instant::now();
    let first = run(&dir, &args);
    let cold = t0.elapsed();
    assert_eq!(first.status.code(), Some(0));
    let a = std::fs::read(dir.join("out/build.json")).unwrap();
    let t1 = Instant::now();
    let second = run(&dir, &args);
    let warm = t1.elapsed();
    assert_eq!(second.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&second.stderr).contains("reusing"));
    assert_eq!(a, std::fs::read(dir.join("out/build.json")).unwrap());
    assert!(warm * 5 < cold, "{warm:?} vs {cold:?}");
    assert!(dir.join("out/transition.csv").exists());
    let r = report(&dir, "build");
    assert_eq!(record(&r, "affine_sections")["pass"], true);

    // a corrupted cache entry is rebuilt
    let ws = std::fs::read_dir(dir.join("ws")).unwrap().next().unwrap().unwrap().path();
    for e in std::fs::read_dir(&ws).unwrap() {
        let p = e.unwrap().path();
        if p.file_name().unwrap().to_string_lossy().starts_with("build-") {
            std::fs::write(&p, "{}").unwrap();
        }
    }
    let third = run(&dir, &args);
    assert_eq!(third.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&third.stderr).contains("rebuilding"));
    assert_eq!(a, std::fs::read(dir.join("out/build.json")).unwrap());
}

#[test]
fn reports_are_reproducible() {
    let dir = scratch("repro");
    let flat = instance("flat.toml");
    let args = ["lines", "--instance", &flat, "--seed", "5"];
    assert_eq!(run(&dir, &args).status.code(), Some(0));
    let a = std::fs::read(dir.join("out/lines.json")).unwrap();
    assert_eq!(run(&dir, &args).status.code(), Some(0));
    assert_eq!(a, std::fs::read(dir.join("out/lines.json")).unwrap());

    // another seed moves the samples but not the verdicts
    let other = scratch("repro-seed");
    assert_eq!(run(&other, &["lines", "--instance", &flat, "--seed", "6"]).status.code(), Some(0));
    let (r1, r2) = (report(&dir, "lines"), report(&other, "lines"));
    assert_ne!(record(&r1, "sphere_span")["value"], record(&r2, "sphere_span")["value"]);
    let verdicts = |r: &Value| r["records"].as_array().unwrap().iter().map(|x| x["pass"].clone()).collect::<Vec<_>>();
    assert_eq!(verdicts(&r1), verdicts(&r2));
}

#[test]
fn tolerance_overrides() {
    let dir = scratch("tol");
    let flat = instance("flat.toml");
    let out = run(&dir, &["lines", "--instance", &flat, "--tol-override", "kernel_gap=1e300"]);
    assert_eq!(out.status.code(), Some(4));
    let r = report(&dir, "lines");
    assert_eq!(record(&r, "kernel_gap")["tolerance"], 1e300);
    assert_eq!(record(&r, "kernel_gap")["pass"], false);
    let out = run(&dir, &["lines", "--instance", &flat, "--tol-override", "kernel_gap"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(report(&dir, "lines")["error"]["kind"], "InvalidInput");
}

#[test]
fn missing_inputs_are_input_errors() {
    let dir = scratch("missing");
    assert_eq!(run(&dir, &["build"]).status.code(), Some(2));
    let out = run(&dir, &["build", "--instance", dir.join("nope.toml").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(report(&dir, "build")["error"]["kind"], "Io");
    // build refuses data that fails the input checks
    let out = run(&dir, &["build", "--instance", &instance("pert.toml")]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(report(&dir, "build")["error"]["kind"], "Type11Violation");
}

#[test]
fn holonomy_command() {
    let dir = scratch("holonomy");
    let out = run(&dir, &["holonomy", "--jobs", "2"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let r = report(&dir, "holonomy");
    for name in ["q_bracket_closure", "gamma_residual", "membership", "loop_expansion", "nonintegrable_residual"] {
        assert_eq!(record(&r, name)["pass"], true, "{name}");
    }
    let detail: Value = serde_json::from_str(&std::fs::read_to_string(dir.join("out/holonomy_report.json")).unwrap()).unwrap();
    assert_eq!(detail["samples"].as_array().unwrap().len(), 20);
    assert!(!detail["loop_checks"].as_array().unwrap().is_empty());
}

#[test]
fn representative_changes_the_field_off_s() {
    let dir = scratch("rep");
    let cfg = dir.join("run.toml");
    std::fs::write(
        &cfg,
        format!(
            "instance = {:?}\nrep = {:?}\n[samples]\njfield = 1\ns1 = 1\n",
            instance("fs.toml"),
            instance("gamma2.json")
        ),
    )
    .unwrap();
    let out = run(&dir, &["jfield", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let r = report(&dir, "jfield");
    assert!(record(&r, "rep_difference")["value"].as_f64().unwrap() > 1e-3);
    assert!(dir.join("out/jfield.csv").exists());
}
