use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn stdp_sim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_stdp-sim"))
        .args(args)
        .output()
        .expect("spawn stdp-sim")
}

fn ok(args: &[&str]) -> Output {
    let out = stdp_sim(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn read(dir: &Path, name: &str) -> String {
    fs::read_to_string(dir.join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

fn files(dir: &Path) -> Vec<String> {
    let mut v: Vec<String> = fs::read_dir(dir)
        .map(|d| {
            d.map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
                .collect()
        })
        .unwrap_or_default();
    v.sort();
    v
}

#[test]
fn decay_trace_staircase() {
    let dir = TempDir::new().unwrap();
    let d = dir.path().to_str().unwrap();
    ok(&[
        "decay-trace",
        "--alpha",
        "495",
        "--lfsr",
        "5",
        "--seed",
        "1",
        "--steps",
        "200",
        "--out-dir",
        d,
    ]);
    let csv = read(dir.path(), "trace.csv");
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("t,v,ideal_v"));
    let v: Vec<u8> = lines
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    assert_eq!(v.len(), 200);
    assert_eq!(v[0], 15);
    assert!(v.windows(2).all(|w| w[1] <= w[0]));
    assert_eq!(*v.last().unwrap(), 0);
    assert_eq!(files(dir.path()), ["manifest.json", "trace.csv"]);
}

#[test]
fn decay_trace_stall_warns() {
    let dir = TempDir::new().unwrap();
    let d = dir.path().to_str().unwrap();
    let out = ok(&[
        "decay-trace",
        "--tau",
        "31",
        "--lfsr",
        "5",
        "--seed",
        "1",
        "--steps",
        "1000",
        "--out-dir",
        d,
    ]);
    assert!(String::from_utf8_lossy(&out.stderr).contains("warning"));
    let csv = read(dir.path(), "trace.csv");
    let last = csv.lines().last().unwrap();
    assert_eq!(last.split(',').nth(1), Some("1"));
}

#[test]
fn decay_trace_zero_steps_is_header_only() {
    let dir = TempDir::new().unwrap();
    let d = dir.path().to_str().unwrap();
    ok(&[
        "decay-trace",
        "--alpha",
        "495",
        "--steps",
        "0",
        "--out-dir",
        d,
    ]);
    assert_eq!(read(dir.path(), "trace.csv"), "t,v,ideal_v\n");
}

#[test]
fn decay_trace_all_seeds_has_a_column_per_seed() {
    let dir = TempDir::new().unwrap();
    let d = dir.path().to_str().unwrap();
    ok(&[
        "decay-trace",
        "--alpha",
        "495",
        "--lfsr",
        "5",
        "--all-seeds",
        "--steps",
        "10",
        "--out-dir",
        d,
    ]);
    let csv = read(dir.path(), "trace.csv");
    assert_eq!(csv.lines().next().unwrap().split(',').count(), 2 + 31);
    assert_eq!(csv.lines().count(), 11);
}

#[test]
fn variance_sweep_orders_widths() {
    let dir = TempDir::new().unwrap();
    let d = dir.path().to_str().unwrap();
    ok(&[
        "variance-sweep",
        "--alpha",
        "495",
        "--lfsr",
        "5,9",
        "--out-dir",
        d,
    ]);
    let csv = read(dir.path(), "variance.csv");
    let rows: Vec<Vec<&str>> = csv
        .lines()
        .skip(1)
        .map(|l| l.split(',').collect())
        .collect();
    assert_eq!(rows.len(), 2);
    let var = |r: &Vec<&str>| r[4].parse::<f64>().unwrap();
    assert_eq!(rows[0][0], "5");
    assert_eq!(rows[1][0], "9");
    assert!(var(&rows[1]) > var(&rows[0]));
}

#[test]
fn feasibility_table() {
    let dir = TempDir::new().unwrap();
    let d = dir.path().to_str().unwrap();
    ok(&[
        "feasibility",
        "--tau",
        "20,30,31",
        "--lfsr",
        "5",
        "--out-dir",
        d,
    ]);
    assert_eq!(
        read(dir.path(), "feasibility.csv"),
        "tau,alpha_q,lfsr_width,bound,exact\n20,488,5,feasible,feasible\n30,495,5,feasible,feasible\n31,496,5,stall,stall\n"
    );
}

#[test]
fn stdp_curve_is_zero_at_coincidence() {
    let dir = TempDir::new().unwrap();
    let d = dir.path().to_str().unwrap();
    let out = ok(&[
        "stdp-curve",
        "--trials",
        "2000",
        "--dt",
        "-10,-1,0,1,10",
        "--out-dir",
        d,
    ]);
    let csv = read(dir.path(), "curve.csv");
    assert!(csv.lines().any(|l| l == "0,0.0,0.0"), "{csv}");
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("potentiation branch"), "{stdout}");
}

#[test]
fn engine_run_with_no_events_keeps_weights() {
    let dir = TempDir::new().unwrap();
    let events = dir.path().join("empty.csv");
    fs::write(&events, "tick,addr,kind\n").unwrap();
    let out_dir = dir.path().join("out");
    ok(&[
        "engine-run",
        "--events",
        events.to_str().unwrap(),
        "--ticks",
        "100",
        "--out-dir",
        out_dir.to_str().unwrap(),
    ]);
    let csv = read(&out_dir, "weights.csv");
    assert_eq!(csv.lines().count(), 8193);
    for l in csv.lines().skip(1) {
        let f: Vec<&str> = l.split(',').collect();
        assert_eq!(f[1], f[2]);
    }
    assert_eq!(read(&out_dir, "updates.csv"), "tick,addr,old_w,new_w\n");
}

#[test]
fn engine_run_parallel_matches_sequential() {
    let dir = TempDir::new().unwrap();
    let events = dir.path().join("ev.csv");
    let mut s = String::from("tick,addr,kind\n");
    for t in 0..50u64 {
        s.push_str(&format!("{t},{},pre\n", (t * 37) % 8192));
        s.push_str(&format!("{},{},post\n", t, (t * 37 + 8191) % 8192));
        if t % 3 == 0 {
            s.push_str(&format!(
                "{},{},post\n",
                t,
                (t.saturating_sub(2) * 37) % 8192
            ));
        }
    }
    fs::write(&events, s).unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let ev = events.to_str().unwrap();
    ok(&[
        "engine-run",
        "--events",
        ev,
        "--ticks",
        "60",
        "--out-dir",
        a.to_str().unwrap(),
    ]);
    ok(&[
        "engine-run",
        "--events",
        ev,
        "--ticks",
        "60",
        "--parallel",
        "--out-dir",
        b.to_str().unwrap(),
    ]);
    assert_eq!(read(&a, "weights.csv"), read(&b, "weights.csv"));
    assert_eq!(read(&a, "updates.csv"), read(&b, "updates.csv"));
    assert!(read(&a, "updates.csv").lines().count() > 1);
}

#[test]
fn malformed_event_line_is_reported() {
    let dir = TempDir::new().unwrap();
    let events = dir.path().join("bad.csv");
    fs::write(&events, "tick,addr,kind\n0,1,pre\n1,two,post\n").unwrap();
    let out_dir = dir.path().join("out");
    let out = stdp_sim(&[
        "engine-run",
        "--events",
        events.to_str().unwrap(),
        "--ticks",
        "5",
        "--out-dir",
        out_dir.to_str().unwrap(),
    ]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 3"), "{err}");
    assert!(files(&out_dir).is_empty());
}

#[test]
fn out_of_range_address_is_a_routing_error() {
    let dir = TempDir::new().unwrap();
    let events = dir.path().join("far.csv");
    fs::write(&events, "0,8192,pre\n").unwrap();
    let out_dir = dir.path().join("out");
    let out = stdp_sim(&[
        "engine-run",
        "--events",
        events.to_str().unwrap(),
        "--ticks",
        "5",
        "--out-dir",
        out_dir.to_str().unwrap(),
    ]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("routing"));
    assert!(files(&out_dir).is_empty());
}

#[test]
fn invalid_flags_write_nothing() {
    let dir = TempDir::new().unwrap();
    let out_dir = dir.path().join("out");
    let d = out_dir.to_str().unwrap();
    for args in [
        vec!["decay-trace", "--alpha", "512", "--out-dir", d],
        vec!["decay-trace", "--lfsr", "5", "--seed", "0", "--out-dir", d],
        vec![
            "decay-trace",
            "--alpha",
            "495",
            "--tau",
            "20",
            "--out-dir",
            d,
        ],
        vec!["variance-sweep", "--lfsr", "1", "--out-dir", d],
        vec!["stdp-curve", "--backend", "dice", "--out-dir", d],
        vec!["balanced-excitation", "--synapses", "9000", "--out-dir", d],
        vec!["balanced-excitation", "--rate", "2000", "--out-dir", d],
    ] {
        let out = stdp_sim(&args);
        assert!(!out.status.success(), "{args:?} should fail");
        assert!(files(&out_dir).is_empty(), "{args:?} left files behind");
    }
}

#[test]
fn config_file_values_and_flag_overrides() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("sim.toml");
    fs::write(&cfg, "[decay]\nalpha_q = 488\nv_init = 9\n").unwrap();
    let out_dir = dir.path().join("out");
    let d = out_dir.to_str().unwrap();
    let c = cfg.to_str().unwrap();
    ok(&["decay-trace", "--config", c, "--steps", "3", "--out-dir", d]);
    let csv = read(&out_dir, "trace.csv");
    assert!(csv.lines().nth(1).unwrap().starts_with("0,9,9"));
    let manifest = read(&out_dir, "manifest.json");
    assert!(manifest.contains("\"alpha_q\": 488"), "{manifest}");
    ok(&[
        "decay-trace",
        "--config",
        c,
        "--alpha",
        "495",
        "--steps",
        "3",
        "--out-dir",
        d,
    ]);
    assert!(read(&out_dir, "manifest.json").contains("\"alpha_q\": 495"));

    fs::write(&cfg, "[decay]\nalpha = 488\n").unwrap();
    let out = stdp_sim(&[
        "decay-trace",
        "--config",
        c,
        "--out-dir",
        dir.path().join("x").to_str().unwrap(),
    ]);
    assert!(!out.status.success());
}

fn replay_matches(args: &[&str]) {
    let dir = TempDir::new().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let mut first: Vec<&str> = args.to_vec();
    let a_str = a.to_str().unwrap().to_string();
    first.extend(["--out-dir", &a_str]);
    ok(&first);
    let manifest = a.join("manifest.json");
    ok(&[
        "replay",
        manifest.to_str().unwrap(),
        "--out-dir",
        b.to_str().unwrap(),
    ]);
    let names = files(&a);
    assert_eq!(names, files(&b));
    for n in &names {
        assert_eq!(
            fs::read(a.join(n)).unwrap(),
            fs::read(b.join(n)).unwrap(),
            "{n} differs"
        );
    }
}

#[test]
fn replay_reproduces_outputs_byte_for_byte() {
    replay_matches(&[
        "decay-trace",
        "--tau",
        "20",
        "--lfsr",
        "9",
        "--seed",
        "77",
        "--steps",
        "300",
    ]);
    replay_matches(&["variance-sweep", "--alpha", "495", "--lfsr", "5,7"]);
    replay_matches(&[
        "stdp-curve",
        "--trials",
        "500",
        "--backend",
        "uniform",
        "--seed",
        "5",
    ]);
    replay_matches(&["feasibility", "--tau-max", "12", "--lfsr", "4,5"]);
    replay_matches(&[
        "balanced-excitation",
        "--synapses",
        "100",
        "--ticks",
        "3000",
        "--seed",
        "3,4",
    ]);
}

#[test]
fn manifest_records_the_run() {
    let dir = TempDir::new().unwrap();
    let d = dir.path().to_str().unwrap();
    ok(&[
        "balanced-excitation",
        "--synapses",
        "50",
        "--ticks",
        "2000",
        "--seed",
        "8",
        "--out-dir",
        d,
    ]);
    let m: serde_json::Value = serde_json::from_str(&read(dir.path(), "manifest.json")).unwrap();
    assert_eq!(m["command"], "balanced-excitation");
    assert_eq!(m["seeds"], serde_json::json!([8]));
    assert_eq!(m["version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(m["config"]["experiment"]["n_synapses"], 50);
    let outputs: Vec<String> = serde_json::from_value(m["outputs"].clone()).unwrap();
    assert_eq!(outputs, ["histogram.csv", "summary.csv", "snapshots.csv"]);
    let hist = read(dir.path(), "histogram.csv");
    let total: u64 = hist
        .lines()
        .skip(1)
        .map(|l| l.rsplit(',').next().unwrap().parse::<u64>().unwrap())
        .sum();
    assert_eq!(total, 50);
}
