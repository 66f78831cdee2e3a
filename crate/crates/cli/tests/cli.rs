use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use cgra_aging::mapper::parse_placement_dump;
use cgra_aging::metrics::Heatmap;
use cgra_aging::workload::{serialize_workload, Dfg, Opcode, TraceEntry, ValueRef, Workload};
use tempfile::TempDir;

fn bin(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cgra-aging"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn write_workload(dir: &Path, name: &str, w: &Workload) {
    fs::write(dir.join(name), serialize_workload(w)).unwrap();
}

fn add_workload(repeat: u64) -> Workload {
    let mut d = Dfg::new("add", 2);
    let a = d.push(Opcode::Add, vec![ValueRef::Input(0), ValueRef::Input(1)]);
    d.outputs.push(a);
    Workload {
        dfgs: vec![d],
        trace: vec![TraceEntry(0, repeat)],
    }
}

#[test]
fn gen_is_deterministic() {
    let tmp = TempDir::new().unwrap();
    for f in ["a.json", "b.json"] {
        let o = bin(&["gen", "--seed", "1", "--dfgs", "10", "-o", f], tmp.path());
        assert_eq!(o.status.code(), Some(0));
    }
    let a = fs::read(tmp.path().join("a.json")).unwrap();
    assert_eq!(a, fs::read(tmp.path().join("b.json")).unwrap());
    let o = bin(&["gen", "--seed", "2", "--dfgs", "10"], tmp.path());
    assert_ne!(o.stdout, a);
}

#[test]
fn gen_rejects_zero_dfgs() {
    let tmp = TempDir::new().unwrap();
    assert_eq!(bin(&["gen", "--dfgs", "0"], tmp.path()).status.code(), Some(2));
    assert_eq!(bin(&["gen", "--mem-frac", "2"], tmp.path()).status.code(), Some(2));
}

#[test]
fn generated_workload_maps_cleanly() {
    let tmp = TempDir::new().unwrap();
    bin(&["gen", "--seed", "1", "-o", "w.json"], tmp.path());
    let o = bin(&["map", "w.json"], tmp.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("mapped 10 of 10"));
}

#[test]
fn map_dump_is_parseable() {
    let tmp = TempDir::new().unwrap();
    write_workload(tmp.path(), "w.json", &add_workload(1));
    let o = bin(&["map", "w.json", "--dump", "-L", "16", "-W", "2"], tmp.path());
    assert_eq!(o.status.code(), Some(0));
    let placements = parse_placement_dump(&stdout(&o).lines().filter(|l| l.starts_with('(') || l.starts_with('#')).collect::<Vec<_>>().join("\n")).unwrap();
    assert_eq!(placements.len(), 1);
    assert_eq!((placements[0].row, placements[0].col_start, placements[0].width), (0, 0, 1));
}

#[test]
fn oversized_dfg_exits_4() {
    let tmp = TempDir::new().unwrap();
    let mut d = Dfg::new("big", 1);
    let mut v = ValueRef::Input(0);
    for _ in 0..3 {
        v = d.push(Opcode::Load, vec![v]);
    }
    let w = Workload { dfgs: vec![d], trace: vec![TraceEntry(0, 1)] };
    write_workload(tmp.path(), "w.json", &w);
    let o = bin(&["map", "w.json", "-L", "4", "-W", "2"], tmp.path());
    assert_eq!(o.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&o.stderr).contains("big"));
    let o = bin(&["simulate", "w.json", "-L", "4", "-W", "2"], tmp.path());
    assert_eq!(o.status.code(), Some(4));
}

#[test]
fn missing_or_broken_input_exits_3() {
    let tmp = TempDir::new().unwrap();
    assert_eq!(bin(&["simulate", "nope.json"], tmp.path()).status.code(), Some(3));
    fs::write(tmp.path().join("bad.json"), "{\"format\": 1, ").unwrap();
    assert_eq!(bin(&["map", "bad.json"], tmp.path()).status.code(), Some(3));
}

#[test]
fn fixed_policy_summary_hits_corner() {
    let tmp = TempDir::new().unwrap();
    bin(&["gen", "--seed", "4", "-o", "w.json"], tmp.path());
    let o = bin(
        &["simulate", "w.json", "--policy", "fixed", "--summary", "s.json", "--heatmap", "h.csv"],
        tmp.path(),
    );
    assert_eq!(o.status.code(), Some(0));
    let s: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("s.json")).unwrap()).unwrap();
    assert_eq!(s["max"], 1.0);
    assert_eq!(s["argmax"], serde_json::json!([0, 0]));
    for key in ["avg", "min", "histogram"] {
        assert!(s.get(key).is_some(), "summary lacks {key}");
    }
    let hist: u64 = s["histogram"].as_array().unwrap().iter().map(|v| v.as_u64().unwrap()).sum();
    assert_eq!(hist, 32);
    let h = Heatmap::parse(&fs::read_to_string(tmp.path().join("h.csv")).unwrap()).unwrap();
    assert_eq!((h.rows(), h.cols()), (2, 16));
    assert_eq!(h.rates[0][0], 1.0);
}

#[test]
fn rotating_full_period_heatmap_is_uniform() {
    let tmp = TempDir::new().unwrap();
    write_workload(tmp.path(), "w.json", &add_workload(32));
    let o = bin(&["simulate", "w.json", "--policy", "rotating", "--heatmap", "h.csv", "--dump-plan"], tmp.path());
    assert_eq!(o.status.code(), Some(0));
    let text = fs::read_to_string(tmp.path().join("h.csv")).unwrap();
    assert!(text.starts_with("#rows=2,cols=16,executions=32\n"));
    let h = Heatmap::parse(&text).unwrap();
    assert!(h.rates.iter().flatten().all(|&r| r == 1.0 / 32.0));
    // last execution is pivot (1, 15)
    assert!(stdout(&o).contains("plan for pivot (1, 15)"));
}

#[test]
fn age_reports_table_values() {
    let tmp = TempDir::new().unwrap();
    let o = bin(&["age", "--u", "0.945", "--u2", "0.411"], tmp.path());
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("improvement 2.30x"));
    let o = bin(&["age", "--u", "1.0"], tmp.path());
    assert!(stdout(&o).contains("lifetime 3.00 years"));
    let o = bin(&["age", "--u", "0"], tmp.path());
    assert!(stdout(&o).contains("unbounded"));
    assert_eq!(bin(&["age", "--u", "1.5"], tmp.path()).status.code(), Some(2));
    assert_eq!(bin(&["age"], tmp.path()).status.code(), Some(2));
}

#[test]
fn age_writes_delay_curve() {
    let tmp = TempDir::new().unwrap();
    let o = bin(&["age", "--u", "1.0", "--curve", "c.csv", "--horizon", "3", "--points", "4"], tmp.path());
    assert_eq!(o.status.code(), Some(0));
    let csv = fs::read_to_string(tmp.path().join("c.csv")).unwrap();
    let lines: Vec<_> = csv.lines().collect();
    assert_eq!(lines[0], "t_years,delay_fraction");
    assert_eq!(lines.len(), 5);
    assert_eq!(lines[4], "3,0.1");
}

#[test]
fn dse_preset_matches_explicit_dims() {
    let tmp = TempDir::new().unwrap();
    bin(&["gen", "--seed", "3", "-o", "w.json"], tmp.path());
    let a = bin(&["dse", "w.json", "--preset", "BE", "-o", "a.json"], tmp.path());
    let b = bin(&["dse", "w.json", "-L", "16", "-W", "2", "-o", "b.json"], tmp.path());
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(
        fs::read(tmp.path().join("a.json")).unwrap(),
        fs::read(tmp.path().join("b.json")).unwrap()
    );
}

#[test]
fn dse_sweep_json_and_jobs() {
    let tmp = TempDir::new().unwrap();
    bin(&["gen", "--seed", "9", "-o", "w.json"], tmp.path());
    let a = bin(&["dse", "w.json", "-L", "16,32", "-W", "2,4,8", "--jobs", "1", "-o", "a.json"], tmp.path());
    let b = bin(&["dse", "w.json", "-L", "16,32", "-W", "2,4,8", "--jobs", "3", "-o", "b.json"], tmp.path());
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let ja = fs::read_to_string(tmp.path().join("a.json")).unwrap();
    assert_eq!(ja, fs::read_to_string(tmp.path().join("b.json")).unwrap());
    let v: serde_json::Value = serde_json::from_str(&ja).unwrap();
    let arr = v.as_array().unwrap();
    assert_eq!(arr.len(), 6);
    for e in arr {
        let r = &e["result"];
        let ratio = r["baseline_max_util"].as_f64().unwrap() / r["proposed_max_util"].as_f64().unwrap();
        assert!((r["lifetime_improvement"].as_f64().unwrap() - ratio).abs() <= 1e-9 * ratio);
    }
    assert_eq!(stdout(&a).lines().count(), 7);
}

#[test]
fn conflicting_dims_are_argument_errors() {
    let tmp = TempDir::new().unwrap();
    write_workload(tmp.path(), "w.json", &add_workload(1));
    for args in [
        vec!["map", "w.json", "--preset", "BE", "-L", "16"],
        vec!["map", "w.json", "-L", "16"],
        vec!["simulate", "w.json", "-L", "16,32", "-W", "2"],
        vec!["simulate", "w.json", "--policy", "random"],
        vec!["dse", "w.json", "-L", "0", "-W", "2"],
    ] {
        assert_eq!(bin(&args, tmp.path()).status.code(), Some(2), "{args:?}");
    }
}
