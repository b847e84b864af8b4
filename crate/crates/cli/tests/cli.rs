use std::path::Path;
use std::process::{Command, Output};

fn tracereuse(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tracereuse")).args(args).output().expect("spawn tracereuse")
}

fn write(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_string()
}

const LOOP: &str = "    addi r1, r0, 200
loop:
    addi r2, r0, 7
    add  r3, r2, r2
    add  r10, r10, r3
    addi r1, r1, -1
    bne  r1, r0, loop
    halt
";

#[test]
fn simulate_writes_reports() {
    let dir = tempfile::tempdir().unwrap();
    let prog = write(dir.path(), "k.s", LOOP);
    let cfg = write(dir.path(), "c.cfg", "fast_forward = 50\n");
    let out = dir.path().join("out");
    let o = tracereuse(&["simulate", "--program", &prog, "--policy", "DTM", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["stats.json", "stats.csv", "metrics.csv", "tables.txt"] {
        assert!(out.join(f).is_file(), "{f}");
    }
    let metrics = std::fs::read_to_string(out.join("metrics.csv")).unwrap();
    assert!(metrics.starts_with("workload,policy,cycles,speedup,rr,ei,"));
    assert!(metrics.lines().nth(1).unwrap().starts_with("k,DTM,"));
    let json = std::fs::read_to_string(out.join("stats.json")).unwrap();
    assert!(json.contains("\"misspeculations\""));
}

#[test]
fn validation_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let prog = write(dir.path(), "k.s", LOOP);
    let out = dir.path().join("out");
    let out = out.to_str().unwrap();
    assert_eq!(tracereuse(&["simulate", "--program", &prog, "--policy", "bogus", "--out", out]).status.code(), Some(1));
    let bad = write(dir.path(), "bad.s", "    frob r1, r2\n");
    assert_eq!(tracereuse(&["simulate", "--program", &bad, "--policy", "DTM", "--out", out]).status.code(), Some(1));
    let cfg = write(dir.path(), "c.cfg", "policies =\n");
    assert_eq!(tracereuse(&["sweep", "--config", &cfg, "--out", out]).status.code(), Some(1));
    let cfg = write(dir.path(), "c2.cfg", "no_such_key = 1\n");
    assert_eq!(tracereuse(&["sweep", "--config", &cfg, "--out", out]).status.code(), Some(1));
    assert_eq!(tracereuse(&["workloads", "dump", "nope"]).status.code(), Some(1));
}

#[test]
fn sweep_three_points() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "s.cfg",
        "workloads = redundant_loop, branchy\npolicies = DTM, RST-Loop\nfast_forward = 1000\nsweep = 32K:512, 64K:512, 32K:1024\n",
    );
    let out = dir.path().join("sweep");
    let o = tracereuse(&["sweep", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(out.join("metrics.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 3 * 2 * 2);
    assert!(csv.contains(",DTM@64K:512,") && csv.contains(",RST-Loop@32K:1024,"));
    assert!(out.join("metrics.json").is_file() && out.join("stats.csv").is_file());
}

#[test]
fn env_override_reaches_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "s.cfg", "workloads = redundant_loop\npolicies = DTM\n");
    let out = dir.path().join("o");
    let o = Command::new(env!("CARGO_BIN_EXE_tracereuse"))
        .args(["sweep", "--config", &cfg, "--out", out.to_str().unwrap()])
        .env("RSTSIM_MAX_OPS", "nonsense")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("max_ops"));
}

#[test]
fn workloads_list_and_dump_round_trip() {
    let o = tracereuse(&["workloads", "list"]);
    let list = String::from_utf8(o.stdout).unwrap();
    assert_eq!(list.lines().count(), 6);
    let o = tracereuse(&["workloads", "dump", "redundant_loop"]);
    assert!(o.status.success());
    let src = String::from_utf8(o.stdout).unwrap();
    let dumped = tracereuse_core::parse_program(&src).unwrap();
    assert_eq!(dumped, tracereuse_core::harness::builtin("redundant_loop").unwrap().program);
}

#[test]
fn help_documents_keys_and_fields() {
    let help = String::from_utf8(tracereuse(&["--help"]).stdout).unwrap();
    for needle in ["RSTSIM_FAST_FORWARD", "RSTSIM_L1D_SIZE", "misspeculations", "dyn_ops.total", "energy_proxy"] {
        assert!(help.contains(needle), "{needle}");
    }
}
