use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn peakgrid(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_peakgrid"))
        .args(args)
        .env_remove("PEAKGRID_TIME_LIMIT")
        .output()
        .unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const TINY: &str = r#"{"horizon":2,"price_cap":[10,10],"kappa":1,"competitor_prices":null,
"customers":[{"id":"c0","lambda":2,"jobs":[{"appliance":"a0","demand":1,"power_cap":1,"tw_begin":0,"tw_end":1}]}]}"#;

fn tiny_file(dir: &Path) -> String {
    let p = dir.join("tiny.json");
    fs::write(&p, TINY).unwrap();
    p.to_str().unwrap().to_string()
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn generate_default_design() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for out in [&a, &b] {
        let o = peakgrid(&["generate", "--out", out.to_str().unwrap()]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    let manifest = json(&a.join("manifest.json"));
    let entries = manifest["instances"].as_array().unwrap();
    assert_eq!(entries.len(), 100);
    for e in entries {
        let f = e["file"].as_str().unwrap();
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap());
    }
    let first = json(&a.join(entries[0]["file"].as_str().unwrap()));
    assert_eq!(first["customers"].as_array().unwrap().len(), 5);
    assert!(first["competitor_prices"].is_null());
}

#[test]
fn bad_config_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, r#"{"demand_range":[9,2]}"#).unwrap();
    let o = peakgrid(&["generate", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("demand_range"), "{}", stderr(&o));

    fs::write(&cfg, r#"{"no_such_key":1}"#).unwrap();
    let o = peakgrid(&["generate", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("no_such_key"), "{}", stderr(&o));
}

#[test]
fn solve_and_verify() {
    let dir = tempfile::tempdir().unwrap();
    let inst = tiny_file(dir.path());
    let res = dir.path().join("mp.json");
    let lp = dir.path().join("mp.lp");
    let o = peakgrid(&[
        "solve",
        &inst,
        "--model",
        "mp",
        "--out",
        res.to_str().unwrap(),
        "--write-lp",
        lp.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let rec = json(&res);
    assert!((rec["metrics"]["net_revenue"].as_f64().unwrap() - 9.0).abs() < 1e-6);
    assert_eq!(rec["status"], "Optimal");
    let text = fs::read_to_string(&lp).unwrap();
    assert!(text.contains("Maximize") && text.contains("Binaries") && text.contains("End"));

    let o = peakgrid(&["verify", res.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stdout));

    let mut bad = rec.clone();
    bad["prices"][1] = serde_json::json!(0.0);
    let tampered = dir.path().join("bad.json");
    fs::write(&tampered, serde_json::to_string(&bad).unwrap()).unwrap();
    let o = peakgrid(&["verify", tampered.to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stdout).contains("follower response mismatch"));
}

#[test]
fn solve_modes() {
    let dir = tempfile::tempdir().unwrap();
    let inst = tiny_file(dir.path());
    let o = peakgrid(&["solve", &inst, "--model", "bc"]);
    assert!(o.status.success());
    let rec: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(rec["status"], "Evaluated");
    assert!(rec["stats"].is_null());

    let o = peakgrid(&["solve", &inst, "--model", "cp"]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("competitor prices required"));

    let o = peakgrid(&["solve", &inst, "--model", "cp", "--competitor-at-cap"]);
    assert!(o.status.success(), "{}", stderr(&o));
}

#[test]
fn time_limit_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let inst = tiny_file(dir.path());
    let o = Command::new(env!("CARGO_BIN_EXE_peakgrid"))
        .args(["solve", &inst])
        .env("PEAKGRID_TIME_LIMIT", "not-a-number")
        .output()
        .unwrap();
    assert!(!o.status.success());
    let o = Command::new(env!("CARGO_BIN_EXE_peakgrid"))
        .args(["solve", &inst])
        .env("PEAKGRID_TIME_LIMIT", "5")
        .output()
        .unwrap();
    assert!(o.status.success());
}

#[test]
fn small_experiment() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(
        &cfg,
        r#"{"n_customers":2,"jobs_per_customer":1,"kappa_set":[200,400],"instances_per_kappa":2}"#,
    )
    .unwrap();
    let out = dir.path().join("out");
    let o = peakgrid(&[
        "experiment",
        "--config",
        cfg.to_str().unwrap(),
        "--threads",
        "1",
        "--node-limit",
        "5000",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    for f in ["table1.csv", "table2.csv", "table3.csv", "table4.csv", "figures.csv", "loadcurve.csv"] {
        assert!(out.join(f).exists(), "{f}");
    }
    for entry in fs::read_dir(out.join("results")).unwrap() {
        let o = peakgrid(&["verify", entry.unwrap().path().to_str().unwrap()]);
        assert!(o.status.success());
    }
}

#[test]
fn stored_instances_resolve_identically() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, r#"{"kappa_set":[1000],"tww":[1.0],"instances_per_kappa":2}"#).unwrap();
    let inst = dir.path().join("inst");
    let out = dir.path().join("out");
    let o = peakgrid(&["generate", "--config", cfg.to_str().unwrap(), "--out", inst.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let common = ["--node-limit", "2000", "--threads", "1", "--models", "mp"];
    let mut args = vec!["experiment", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend(common);
    let o = peakgrid(&args);
    assert!(o.status.success(), "{}", stderr(&o));

    // A node-limited search follows every last bit of the data, so the
    // instance must survive the JSON round trip exactly.
    let single = dir.path().join("single.json");
    let o = peakgrid(&[
        "solve",
        inst.join("tww1_k1000_s2.json").to_str().unwrap(),
        "--node-limit",
        "2000",
        "--out",
        single.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let a = json(&single);
    let b = json(&out.join("results/tww1_k1000_s2_mp.json"));
    for key in ["instance", "prices", "objective", "best_bound", "schedule"] {
        assert_eq!(a[key], b[key], "{key}");
    }
    assert_eq!(a["stats"]["nodes"], b["stats"]["nodes"]);
}
