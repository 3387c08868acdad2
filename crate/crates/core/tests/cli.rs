use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tailor::ServiceDistribution;

fn tailor(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tailor"))
        .args(args)
        .env("TAILOR_THREADS", "1")
        .output()
        .expect("spawn tailor")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn rho(summary: &Path) -> f64 {
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(summary).unwrap()).unwrap();
    v["rho"].as_f64().unwrap()
}

const EXP_CONFIG: &str = r#"{
  "name": "exp",
  "distribution": { "family": "exponential", "rate": 1.0 },
  "kappa_s": 1.0,
  "kappa_p": 1.0,
  "grid": { "dt": 0.02 }
}"#;

#[test]
fn zero_preemption_cost_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    fs::write(
        &cfg,
        EXP_CONFIG.replace("\"kappa_p\": 1.0", "\"kappa_p\": 0.0"),
    )
    .unwrap();
    let o = tailor(&[
        "solve",
        "--config",
        path(&cfg),
        "--out",
        path(&dir.path().join("o")),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("kappa_p"), "{}", stderr(&o));
}

#[test]
fn solve_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.json");
    fs::write(&cfg, EXP_CONFIG).unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let o = tailor(&["solve", "--config", path(&cfg), "--out", path(out)]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    }
    let pa = fs::read(a.join("policy.csv")).unwrap();
    assert_eq!(pa, fs::read(b.join("policy.csv")).unwrap());
    assert!(pa.starts_with(b"y,v,z,theta\n"));
    assert!((rho(&a.join("summary.json")) - 1.0 - 2f64.sqrt()).abs() < 0.02);
}

#[test]
fn trace_matches_parametric_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.json");
    fs::write(&cfg, EXP_CONFIG).unwrap();
    let d = ServiceDistribution::exponential(1.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut text = String::from("# exponential draws\n");
    for _ in 0..100_000 {
        text.push_str(&format!("{}\n", d.sample(&mut rng)));
    }
    let trace = dir.path().join("trace.txt");
    fs::write(&trace, text).unwrap();

    let (p, t) = (dir.path().join("p"), dir.path().join("t"));
    let o = tailor(&["solve", "--config", path(&cfg), "--out", path(&p)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let o = tailor(&[
        "trace",
        "--config",
        path(&cfg),
        "--trace",
        path(&trace),
        "--out",
        path(&t),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let (rp, rt) = (rho(&p.join("summary.json")), rho(&t.join("summary.json")));
    assert!((rt - rp).abs() < 0.05 * rp, "{rt} vs {rp}");
}

#[test]
fn empty_and_comment_only_traces_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.json");
    fs::write(&cfg, EXP_CONFIG).unwrap();
    for (name, body) in [("empty.txt", ""), ("comments.txt", "# one\n# two\n")] {
        let trace = dir.path().join(name);
        fs::write(&trace, body).unwrap();
        let o = tailor(&[
            "trace",
            "--config",
            path(&cfg),
            "--trace",
            path(&trace),
            "--out",
            path(dir.path()),
        ]);
        assert_eq!(o.status.code(), Some(2));
        assert!(stderr(&o).contains("too few samples"), "{}", stderr(&o));
    }
}

#[test]
fn missing_family_lists_supported_families() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("set.json");
    fs::write(
        &cfg,
        r#"{ "scenarios": [ { "name": "x", "distribution": { "rate": 1.0 }, "kappa_s": 1, "kappa_p": 1 } ] }"#,
    )
    .unwrap();
    let o = tailor(&["compare", "--config", path(&cfg), "--out", path(dir.path())]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    for fam in tailor::config::SUPPORTED_FAMILIES {
        assert!(err.contains(fam), "{err}");
    }
}

#[test]
fn unknown_field_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("typo.json");
    fs::write(&cfg, EXP_CONFIG.replace("\"dt\"", "\"dtt\"")).unwrap();
    let o = tailor(&["solve", "--config", path(&cfg), "--out", path(dir.path())]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("dtt"));
}

#[test]
fn missing_config_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = tailor(&[
        "solve",
        "--config",
        path(&dir.path().join("nope.json")),
        "--out",
        path(dir.path()),
    ]);
    assert_eq!(o.status.code(), Some(4));
}

#[test]
fn empty_compare_writes_header_only() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("set.json");
    fs::write(&cfg, r#"{ "scenarios": [] }"#).unwrap();
    let out = dir.path().join("o");
    let o = tailor(&["compare", "--config", path(&cfg), "--out", path(&out)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = fs::read_to_string(out.join("comparison.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1);
}

#[test]
fn simulate_emits_trajectory() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.json");
    fs::write(&cfg, EXP_CONFIG).unwrap();
    let out = dir.path().join("o");
    let o = tailor(&[
        "simulate",
        "--config",
        path(&cfg),
        "--out",
        path(&out),
        "--cycles",
        "2000",
        "--seed",
        "3",
        "--emit-trajectory",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let sim = fs::read_to_string(out.join("simulation.csv")).unwrap();
    let lines: Vec<&str> = sim.lines().collect();
    assert_eq!(lines[0], tailor::simulator::SIM_CSV_HEADER);
    assert_eq!(lines.len(), 4);
    let traj = fs::read_to_string(out.join("trajectory.csv")).unwrap();
    assert!(traj.starts_with("t,aoi,mode,event\n"));
    assert!(traj.lines().count() > 4000);
}

#[test]
fn table1_has_four_rows() {
    let dir = tempfile::tempdir().unwrap();
    let o = tailor(&["table1", "--out", path(dir.path()), "--cycles", "20000"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = fs::read_to_string(dir.path().join("comparison.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 5);
    let names: Vec<&str> = lines[1..]
        .iter()
        .map(|l| l.split(',').next().unwrap())
        .collect();
    assert_eq!(
        names,
        ["lognormal_l1", "lognormal_l2", "lomax_kp1", "lomax_kp5"]
    );
}
