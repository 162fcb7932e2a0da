use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn ksample(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ksample"))
        .args(args)
        .current_dir(dir)
        .env_remove("KSAMPLE_SEED")
        .output()
        .expect("binary runs")
}

fn ksample_env(args: &[&str], dir: &Path, seed: &str) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ksample"))
        .args(args)
        .current_dir(dir)
        .env("KSAMPLE_SEED", seed)
        .output()
        .expect("binary runs")
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

fn assignments(v: &Value) -> &Vec<Value> {
    v["configuration"]["assignments"].as_array().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn grow_counts_and_is_deterministic() {
    let d = tempfile::tempdir().unwrap();
    let o = ksample(&["grow", "--depth", "4", "--mode", "sym", "--seed", "7", "--out", "c.json"], d.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let v = read_json(&d.path().join("c.json"));
    assert_eq!(assignments(&v).len(), 48);
    assert_eq!(v["version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(v["run_config"]["mode"], "sym");
    assert_eq!(v["run_config"]["seed"], 7);

    let o = ksample(&["grow", "--depth", "4", "--mode", "sym", "--seed", "7", "--out", "c2.json"], d.path());
    assert!(o.status.success());
    let a = std::fs::read(d.path().join("c.json")).unwrap();
    assert_eq!(a, std::fs::read(d.path().join("c2.json")).unwrap());

    // the embedded configuration alone reproduces the artifact
    let o = ksample(&["grow", "--config", "c.json", "--out", "c3.json"], d.path());
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(a, std::fs::read(d.path().join("c3.json")).unwrap());

    let o = ksample(&["grow", "--depth", "0"], d.path());
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    let names: Vec<String> = assignments(&v)
        .iter()
        .map(|e| format!("{}/{}", e["num"], e["den"]))
        .collect();
    assert_eq!(names, ["0/1", "1/1", "1/0"]);
}

#[test]
fn seed_precedence() {
    let d = tempfile::tempdir().unwrap();
    let run = |o: Output| -> Value {
        assert!(o.status.success(), "{}", stderr(&o));
        serde_json::from_slice(&o.stdout).unwrap()
    };
    let by_flag = run(ksample(&["grow", "--depth", "2", "--seed", "11"], d.path()));
    let by_env = run(ksample_env(&["grow", "--depth", "2"], d.path(), "11"));
    assert_eq!(by_flag, by_env);
    let flag_wins = run(ksample_env(&["grow", "--depth", "2", "--seed", "11"], d.path(), "12"));
    assert_eq!(by_flag, flag_wins);

    std::fs::write(d.path().join("run.cfg"), "# run settings\nmode = sym\nseed = 5\ndepth = 1\n").unwrap();
    let v = run(ksample_env(&["grow", "--config", "run.cfg", "--depth", "2"], d.path(), "99"));
    assert_eq!(v["run_config"]["seed"], 5);
    assert_eq!(v["run_config"]["mode"], "sym");
    assert_eq!(assignments(&v).len(), 12);
}

#[test]
fn invalid_flags_exit_2() {
    let d = tempfile::tempdir().unwrap();
    assert_eq!(ksample(&["grow", "--depth", "x"], d.path()).status.code(), Some(2));
    assert_eq!(ksample(&["grow", "--mode", "both"], d.path()).status.code(), Some(2));
    assert_eq!(ksample(&["grow", "--set", "nope=1"], d.path()).status.code(), Some(2));
    assert_eq!(ksample(&["grow", "--set", "window=-1"], d.path()).status.code(), Some(2));
    assert_eq!(ksample_env(&["grow"], d.path(), "seven").status.code(), Some(2));
    assert_eq!(ksample(&["connect", "--t1", "0,0,1", "--t2", "0,1,inf"], d.path()).status.code(), Some(2));
    assert_eq!(ksample(&["check", "--suite", "nope"], d.path()).status.code(), Some(2));
}

#[test]
fn sampler_failure_exit_3_names_quadribone() {
    let d = tempfile::tempdir().unwrap();
    let o = ksample(&["grow", "--depth", "6", "--set", "reject_budget=1"], d.path());
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).contains("quadribone ("), "{}", stderr(&o));
}

#[test]
fn pleat_certifies_and_rejects() {
    let d = tempfile::tempdir().unwrap();
    assert!(ksample(&["grow", "--depth", "4", "--seed", "3", "--out", "c.json"], d.path()).status.success());
    let o = ksample(&["pleat", "--input", "c.json", "--out", "p.json"], d.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let p = read_json(&d.path().join("p.json"));
    assert_eq!(p["certificate"]["locally_convex"], true);
    assert_eq!(p["edges"].as_array().unwrap().len(), 45);
    assert!(p["run_config"].is_object());

    let o = ksample(&["pleat", "--input", "c.json", "--format", "obj", "--out", "c.obj"], d.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let obj = std::fs::read_to_string(d.path().join("c.obj")).unwrap();
    assert!(obj.starts_with("# ksample"));
    let mut n = 0;
    for line in obj.lines().filter(|l| l.starts_with("v ")) {
        let r2: f64 = line[2..].split_whitespace().map(|x| x.parse::<f64>().unwrap().powi(2)).sum();
        assert!(r2 < 1.0, "{line}");
        n += 1;
    }
    assert!(n > 0);

    // conjugate the value at 1/2
    let mut c = read_json(&d.path().join("c.json"));
    let entry = c["configuration"]["assignments"]
        .as_array_mut()
        .unwrap()
        .iter_mut()
        .find(|e| e["num"] == 1 && e["den"] == 2)
        .unwrap();
    let v = &mut entry["value"];
    let conj = |x: &Value| Value::from(-x.as_f64().unwrap());
    v["im"] = conj(&v["im"]);
    let h = v["hom"].as_array_mut().unwrap();
    h[1] = conj(&h[1]);
    h[3] = conj(&h[3]);
    std::fs::write(d.path().join("bad.json"), serde_json::to_string(&c).unwrap()).unwrap();
    let o = ksample(&["pleat", "--input", "bad.json", "--out", "bad_report.json"], d.path());
    assert!(!o.status.success());
    assert!(stderr(&o).contains("quadribone ("), "{}", stderr(&o));
    let r = read_json(&d.path().join("bad_report.json"));
    assert_eq!(r["certificate"]["locally_convex"], false);
    assert!(!r["certificate"]["violations"].as_array().unwrap().is_empty());
}

#[test]
fn degenerate_edge_exit_4() {
    let d = tempfile::tempdir().unwrap();
    assert!(ksample(&["grow", "--depth", "2", "--out", "c.json"], d.path()).status.success());
    let mut c = read_json(&d.path().join("c.json"));
    let list = c["configuration"]["assignments"].as_array_mut().unwrap();
    let zero = list.iter().find(|e| e["num"] == 0).unwrap()["value"].clone();
    list.iter_mut().find(|e| e["num"] == 1 && e["den"] == 2).unwrap()["value"] = zero;
    std::fs::write(d.path().join("deg.json"), serde_json::to_string(&c).unwrap()).unwrap();
    let o = ksample(&["pleat", "--input", "deg.json"], d.path());
    assert_eq!(o.status.code(), Some(4), "{}", stderr(&o));
    assert!(stderr(&o).contains("degenerate edge at quadribone ("));
}

#[test]
fn check_reports() {
    let d = tempfile::tempdir().unwrap();
    let o = ksample(&["check", "--suite", "crossratio", "--out", "r.json"], d.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let r = read_json(&d.path().join("r.json"));
    let items = r["suites"][0]["items"].as_array().unwrap();
    assert_eq!(items.len(), 4);
    assert!(items.iter().all(|i| i["pass"] == true));
    assert_eq!(r["pass"], true);

    let args = ["check", "--suite", "crossratio,vanishing,combinatorics", "--seed", "1"];
    let a = ksample(&args, d.path());
    let b = ksample(&args, d.path());
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);

    let o = ksample(
        &["check", "--suite", "consistency", "--samples", "400", "--set", "block=200", "--set", "permutations=49", "--set", "depth=2"],
        d.path(),
    );
    let r: Value = serde_json::from_slice(&o.stdout).unwrap();
    let items = r["suites"][0]["items"].as_array().unwrap();
    for name in ["restriction_prefix", "sym_pushforward", "sym_two_root", "raw_two_root"] {
        let i = items.iter().find(|i| i["name"] == name).unwrap();
        assert!(i["value"].is_number());
    }
    assert_eq!(items.iter().find(|i| i["name"] == "raw_two_root").unwrap()["informational"], true);
}

#[test]
fn connect_prints_length() {
    let d = tempfile::tempdir().unwrap();
    let o = ksample(&["connect", "--t1", "0,1,inf", "--t2", "i,2,-1", "--seed", "3", "--out", "chain.json"], d.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let out = String::from_utf8(o.stdout).unwrap();
    let len: usize = out.split_whitespace().nth(1).unwrap().parse().unwrap();
    assert!(len <= 1000);
    let c = read_json(&d.path().join("chain.json"));
    assert_eq!(c["validation"]["valid"], true);
    assert_eq!(c["length"], len);
}

fn csv_rows(s: &str) -> (String, Vec<Vec<String>>) {
    let mut lines = s.lines().filter(|l| !l.starts_with('#'));
    let head = lines.next().unwrap().to_string();
    (head, lines.map(|l| l.split(',').map(String::from).collect()).collect())
}

#[test]
fn contraction_csv() {
    let d = tempfile::tempdir().unwrap();
    let o = ksample(&["dynamics", "contract", "--gamma", "2,1,1,1", "--agree", "3", "--steps", "30"], d.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let s = String::from_utf8(o.stdout).unwrap();
    assert!(s.contains("# ksample ") && s.contains("# seed = "));
    let (head, rows) = csv_rows(&s);
    assert_eq!(head, "p,d_value");
    assert_eq!(rows.len(), 31);
    let dv: Vec<f64> = rows.iter().map(|r| r[1].parse().unwrap()).collect();
    assert!(dv[30] < dv[0] && dv[30] < 2f64.powi(-8));

    let o = ksample(&["dynamics", "contract", "--gamma", "1,1,0,1"], d.path());
    assert_eq!(o.status.code(), Some(6));
}

#[test]
fn birkhoff_csv() {
    let d = tempfile::tempdir().unwrap();
    let o = ksample(
        &["dynamics", "birkhoff", "--observable", "root-bend", "--steps", "300", "--seed", "1,2", "--every", "100", "--out", "b.csv"],
        d.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let s = std::fs::read_to_string(d.path().join("b.csv")).unwrap();
    assert!(s.lines().any(|l| l == "# overlap: true" || l == "# overlap: false"));
    let (head, rows) = csv_rows(&s);
    assert_eq!(head, "N,running_average,ci_low,ci_high,seed");
    assert_eq!(rows.len(), 6);
    for r in &rows {
        let v: Vec<f64> = r[1..4].iter().map(|x| x.parse().unwrap()).collect();
        assert!(v[1] <= v[2] && v[0] > 0.0 && v[0] < std::f64::consts::PI);
    }
    let o = ksample(&["dynamics", "birkhoff", "--gamma", "1,2,0,1", "--steps", "10"], d.path());
    assert_eq!(o.status.code(), Some(6));
}
