use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sbmrange")).args(args).env("SBMRANGE_OUT", out).output().expect("spawn sbmrange")
}

fn run_dir(o: &Output) -> PathBuf {
    let s = String::from_utf8_lossy(&o.stdout);
    PathBuf::from(s.lines().last().expect("run dir on stdout").trim())
}

fn json(path: PathBuf) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn usage_errors_exit_64() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(bin(tmp.path(), &["voter", "survive", "--no-such-flag"]).status.code(), Some(64));
    assert_eq!(bin(tmp.path(), &["voter", "survive", "--kernel", "hex"]).status.code(), Some(64));
}

#[test]
fn guards_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(bin(tmp.path(), &["tree", "lace-check", "--n", "9"]).status.code(), Some(2));
    assert_eq!(bin(tmp.path(), &["tree", "pi-n", "--n", "5", "--depth", "6"]).status.code(), Some(2));
    assert_eq!(bin(tmp.path(), &["estimate", "condition", "--which", "3", "--model", "brw"]).status.code(), Some(2));
}

#[test]
fn lace_check_small_n() {
    let tmp = tempfile::tempdir().unwrap();
    let o = bin(tmp.path(), &["tree", "lace-check", "--n", "1", "--trials", "5"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let v = json(run_dir(&o).join("lace_check.json"));
    assert_eq!(v["pass"], true);
    assert_eq!(v["assignments"], 5);
}

#[test]
fn vd_in_one_dimension() {
    let tmp = tempfile::tempdir().unwrap();
    let o = bin(tmp.path(), &["sbm", "vd", "--d", "1"]);
    assert_eq!(o.status.code(), Some(0));
    let dir = run_dir(&o);
    let v0 = json(dir.join("vd.json"))["v0"].as_f64().unwrap();
    assert!((v0 - 8.84751595422715).abs() < 1e-6, "{v0}");
    let m = json(dir.join("manifest.json"));
    assert_eq!(m["command"], "sbm vd");
    assert_eq!(m["outputs"][0]["file"], "vd.json");
    assert_eq!(m["outputs"][0]["sha256"].as_str().unwrap().len(), 64);
}

#[test]
fn flags_beat_config_file() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("run.toml");
    std::fs::write(&cfg, "seed = 9\nunused_key = 1\n[voter]\nreplicas = 50\n[voter.survive]\nt_grid = [2, 4]\nd = 3\n").unwrap();
    let out = tmp.path().join("out");
    let o = bin(&out, &["--config", cfg.to_str().unwrap(), "voter", "survive", "--d", "1"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stderr).contains("unused-key"));
    let m = json(run_dir(&o).join("manifest.json"));
    assert_eq!(m["options"]["lattice"]["d"], 1);
    assert_eq!(m["options"]["mc"]["replicas"], 50);
    assert_eq!(m["options"]["mc"]["seed"], 9);
    assert_eq!(m["options"]["t_grid"], serde_json::json!([2.0, 4.0]));
}

#[test]
fn rerun_reproduces_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    let o = bin(&a, &["brw", "survive", "--replicas", "200", "--t-grid", "2,4,8", "--seed", "3"]);
    assert_eq!(o.status.code(), Some(0));
    let first = run_dir(&o);
    let o2 = bin(&b, &["estimate", "rerun", "--manifest", first.join("manifest.json").to_str().unwrap()]);
    assert_eq!(o2.status.code(), Some(0), "{}", String::from_utf8_lossy(&o2.stderr));
    let second = run_dir(&o2);
    assert_eq!(first.file_name(), second.file_name());
    assert_eq!(std::fs::read(first.join("survival.csv")).unwrap(), std::fs::read(second.join("survival.csv")).unwrap());
}

#[test]
fn plotdata_series() {
    let tmp = tempfile::tempdir().unwrap();
    let o = bin(tmp.path(), &["voter", "survive", "--d", "3", "--replicas", "100", "--t-grid", "1,2,3"]);
    let surv = run_dir(&o).join("survival.csv");
    let inputs = format!("{},{}:normalized", surv.display(), surv.display());
    let o = bin(tmp.path(), &["estimate", "plotdata", "--inputs", &inputs]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(run_dir(&o).join("plotdata.csv")).unwrap();
    let series: std::collections::BTreeSet<&str> = text.lines().filter(|l| !l.starts_with('#')).skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(series.len(), 2);
    let o = bin(tmp.path(), &["estimate", "plotdata", "--inputs", "missing.csv"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn exact_check_passes() {
    let tmp = tempfile::tempdir().unwrap();
    let o = bin(tmp.path(), &["op", "exact", "--d", "1", "--n", "2", "--p", "1/2", "--ell", "1"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(json(run_dir(&o).join("condition7.json"))["holds"], true);
}

fn data_rows(path: &Path) -> usize {
    std::fs::read_to_string(path).unwrap().lines().filter(|l| !l.starts_with('#')).count() - 1
}

#[test]
fn merged_range_rows_are_conserved() {
    let tmp = tempfile::tempdir().unwrap();
    let o = bin(tmp.path(), &["estimate", "range", "--model", "brw", "--d", "3", "--n", "10,20", "--replicas", "2000"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let r0 = run_dir(&o).join("r0.csv");
    let o = bin(tmp.path(), &["estimate", "plotdata", "--inputs", r0.to_str().unwrap(), "--split", "n"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let plot = run_dir(&o).join("plotdata.csv");
    assert_eq!(data_rows(&plot), data_rows(&r0));
    let text = std::fs::read_to_string(plot).unwrap();
    let series: std::collections::BTreeSet<&str> = text.lines().filter(|l| !l.starts_with('#')).skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(series.len(), 2);
}

#[test]
fn mass_and_spread_tables() {
    let tmp = tempfile::tempdir().unwrap();
    let o = bin(tmp.path(), &["estimate", "mass", "--model", "brw", "--n", "10,20", "--moments", "2", "--replicas", "2000"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let dir = run_dir(&o);
    assert_eq!(data_rows(&dir.join("moments.csv")), 4);
    assert_eq!(data_rows(&dir.join("tail.csv")), 6);
    let o = bin(tmp.path(), &["op", "spread", "--d", "1", "--p", "1", "--n-grid", "2,4", "--replicas", "500"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(data_rows(&run_dir(&o).join("spread.csv")), 2);
    assert_eq!(bin(tmp.path(), &["op", "spread", "--p", "1", "--moment", "3"]).status.code(), Some(64));
}
