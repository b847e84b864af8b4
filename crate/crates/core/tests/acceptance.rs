//! Acceptance suite: one PASS/FAIL line per criterion.

use rayon::prelude::*;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};
use tracereuse_core::harness::{builtin, builtin_workloads, run_experiment, ExperimentConfig, Workload};
use tracereuse_core::isa::{in_domain, InstrClass};
use tracereuse_core::metrics::{efficiency_index, harmonic_mean, read_csv, reuse_rate, speedup, CSV_HEADER};
use tracereuse_core::reuse::{LoopGateMode, ReuseTable, TableGeometry, TraceEntry};
use tracereuse_core::timing::{entry_bits_with_address, CacheHierarchy, CachePort, SimRun};
use tracereuse_core::{
    entry_bits, run_reference, simulate, DomainSubset, ReuseMode, ReusePolicy, Reg, SimOptions, TimingConfig,
};

const FAST_FORWARD: u64 = 10_000;
const MAX_OPS: u64 = 1_000_000;

struct GridRun {
    workload: String,
    policy: ReusePolicy,
    run: SimRun,
    oracle_ok: bool,
}

fn opts(name: &str) -> SimOptions {
    SimOptions { max_ops: MAX_OPS, fast_forward: FAST_FORWARD, log_window: Some(0), workload: name.to_string() }
}

fn run(w: &Workload, policy: &ReusePolicy) -> SimRun {
    simulate(&w.program, policy, &TimingConfig::default(), &opts(&w.name))
        .unwrap_or_else(|e| panic!("{} under {}: {e}", w.name, policy.name))
}

fn oracle(w: &Workload, r: &SimRun) -> bool {
    let reference = run_reference(&w.program, r.state.dyn_count, Some(0)).expect("reference run");
    reference.state.same_architectural_state(&r.state)
}

fn grid() -> Vec<GridRun> {
    let workloads = builtin_workloads();
    let cells: Vec<(&Workload, ReusePolicy)> = workloads
        .iter()
        .flat_map(|w| ReusePolicy::presets().into_iter().map(move |p| (w, p)))
        .collect();
    cells
        .into_par_iter()
        .map(|(w, policy)| {
            let r = run(w, &policy);
            GridRun { workload: w.name.clone(), oracle_ok: oracle(w, &r), policy, run: r }
        })
        .collect()
}

type Outcome = Result<String, String>;
type Check<'a> = Box<dyn FnOnce() -> Outcome + 'a>;

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn c1_oracle(grid: &[GridRun], elapsed: Duration) -> Outcome {
    let bad: Vec<_> = grid.iter().filter(|g| !g.oracle_ok).map(|g| format!("{}/{}", g.workload, g.policy.name)).collect();
    ensure(bad.is_empty(), format!("state mismatch: {}", bad.join(", ")))?;
    ensure(grid.len() == 6 * 12, format!("grid has {} runs, expected 72", grid.len()))?;
    ensure(elapsed < Duration::from_secs(300), format!("grid took {elapsed:?}"))?;
    Ok(format!("{} runs match the reference interpreter in {:.1?}", grid.len(), elapsed))
}

fn c2_gate() -> Outcome {
    let w = builtin("loopless_straightline").unwrap();
    let lp = run(&w, &ReusePolicy::rst_loop());
    ensure(lp.stats.table_accesses.total() == 0, format!("RST-Loop accesses {}", lp.stats.table_accesses.total()))?;
    ensure(lp.stats.traces_captured == 0, format!("RST-Loop captured {}", lp.stats.traces_captured))?;
    let rst = run(&w, &ReusePolicy::rst());
    let ool = run(&w, &ReusePolicy::rst_out_of_loop());
    ensure(rst.stats == ool.stats, "RST-Out-Of-Loop stats differ from RST")?;
    ensure(rst.stats.table_accesses.total() > 0, "RST performed no lookups")?;
    Ok(format!("RST-Loop 0 accesses / 0 captures; RST-Out-Of-Loop == RST ({} accesses)", rst.stats.table_accesses.total()))
}

fn c3_complementarity() -> Outcome {
    let mut checked = 0;
    for w in builtin_workloads() {
        for mode in [ReuseMode::Dtm, ReuseMode::Rst] {
            let with_gate = |gate| {
                let mut p = ReusePolicy::unified("gate", mode, gate);
                p.name = format!("{mode:?}-{gate:?}");
                run(&w, &p).stats.traces_captured
            };
            let (all, inside, outside) = (
                with_gate(LoopGateMode::Always),
                with_gate(LoopGateMode::InsideLoopsOnly),
                with_gate(LoopGateMode::OutsideLoopsOnly),
            );
            ensure(
                inside + outside == all,
                format!("{} {mode:?}: {inside} + {outside} != {all}", w.name),
            )?;
            checked += 1;
        }
    }
    Ok(format!("inside + outside == always on {checked} workload/mode pairs"))
}

fn c4_redundancy() -> Outcome {
    let w = builtin("redundant_loop").unwrap();
    let base = run(&w, &ReusePolicy::baseline());
    let dtm = {
        let o = SimOptions { log_window: None, ..opts(&w.name) };
        simulate(&w.program, &ReusePolicy::dtm(), &TimingConfig::default(), &o).unwrap()
    };
    let rr = reuse_rate(&dtm.stats, DomainSubset::O);
    let s = speedup(&base.stats, &dtm.stats).unwrap();

    // recount RR(O) from the per-op log
    let (mut executed, mut reused) = (0u64, 0u64);
    for rec in dtm.log.records().filter(|r| r.seq >= FAST_FORWARD && in_domain(r.class, DomainSubset::O)) {
        executed += 1;
        reused += rec.reused as u64;
    }
    let rr_log = reused as f64 / executed as f64;
    ensure((rr - rr_log).abs() < 1e-12, format!("RR {rr} disagrees with log recount {rr_log}"))?;

    // no schedule can beat one dispatch slot per unit at `width` units a cycle
    let timing = TimingConfig::default();
    let units = |r: &SimRun| r.stats.dyn_ops.total() - r.stats.reused_ops.total() + r.stats.table_hits.regular;
    ensure(base.stats.cycles * timing.width as u64 >= base.stats.dyn_ops.total(), "baseline beats issue width")?;
    ensure(dtm.stats.cycles * timing.width as u64 >= units(&dtm), "DTM beats issue width")?;

    ensure(rr >= 0.8, format!("RR(O) {rr:.4} < 0.8"))?;
    ensure(s >= 3.5, format!("speedup {s:.4} < 3.5"))?;
    ensure(dtm.stats.misspeculations == 0, "DTM misspeculated")?;
    Ok(format!("DTM RR(O) {rr:.4}, speedup {s:.4}"))
}

fn c5_speculation() -> Outcome {
    let w = builtin("varying_loop").unwrap();
    let p = ReusePolicy::rst();
    ensure(p.input_scope == 2 && p.output_scope == 1, "RST preset scopes are not (2,1)")?;
    let r = run(&w, &p);
    ensure(r.stats.misspeculations >= 1, "no misspeculation")?;
    ensure(oracle(&w, &r), "state differs from reference after rollback")?;
    Ok(format!("{} misspeculations, {} squashed ops, state exact", r.stats.misspeculations, r.stats.squashed_ops))
}

fn c6_metrics() -> Outcome {
    let ei = efficiency_index(1.13, 0.196).ok_or("EI undefined")?;
    ensure((ei - 5.765).abs() <= 1e-3, format!("EI {ei}"))?;
    ensure(efficiency_index(1.2, 0.0).is_none(), "EI at RR=0 is defined")?;
    let hm = harmonic_mean(&[1.0, 2.0]).map_err(|e| e.to_string())?;
    ensure((hm - 4.0 / 3.0).abs() <= 1e-9, format!("HM {hm}"))?;
    Ok(format!("EI {ei:.4}, HM {hm:.9}, EI(RR=0) undefined"))
}

fn c7_entry_bits() -> Outcome {
    let with = ReusePolicy::rst_subset(DomainSubset::O);
    let without = ReusePolicy::rst_subset(DomainSubset::NotB);
    let diff = entry_bits(&with, 32) as i64 - entry_bits(&without, 32) as i64;
    ensure(diff == 2 * with.branch_limit as i64, format!("entry bit difference {diff}"))?;
    ensure(
        entry_bits_with_address(&with, 16, 30) - entry_bits_with_address(&without, 16, 30) == 2 * with.branch_limit as u32,
        "difference depends on field widths",
    )?;

    let w = builtin("branchy").unwrap();
    let per_access = |p: &ReusePolicy| {
        let r = run(&w, p);
        r.stats.energy_proxy / r.stats.table_accesses.total() as f64
    };
    let ratio = per_access(&without) / per_access(&with);
    ensure((ratio - 0.978).abs() <= 1e-3, format!("energy ratio {ratio}"))?;
    Ok(format!("bm+btk = {diff} bits, read-energy ratio {ratio:.4}"))
}

fn c8_determinism() -> Outcome {
    let t = TimingConfig::default();
    let mut h = CacheHierarchy::new(t.l1i, t.l1d, t.l2, t.l3, t.memory_latency);
    let first = h.access(CachePort::Data, 0x4000);
    let again = h.access(CachePort::Data, 0x4000);
    ensure(first == 226 && again == 1, format!("latencies {first}/{again}"))?;
    for w in builtin_workloads() {
        for p in [ReusePolicy::dtm(), ReusePolicy::rst(), ReusePolicy::rst_subset(DomainSubset::NotM)] {
            let (a, b) = (run(&w, &p), run(&w, &p));
            ensure(a.stats.to_json() == b.stats.to_json(), format!("{} {} not repeatable", w.name, p.name))?;
            ensure(a.state == b.state, format!("{} {} final state not repeatable", w.name, p.name))?;
        }
    }
    Ok("first touch 226, L1 repeat 1, repeated runs bit-identical".into())
}

fn entry(pc: u32) -> TraceEntry {
    TraceEntry {
        pc,
        npc: pc + 4,
        inputs: vec![(Reg::new(1).unwrap(), pc)],
        outputs: vec![(Reg::new(2).unwrap(), pc)],
        ea: None,
        bm: 0,
        btk: 0,
        len: 1,
        class_counts: [0; InstrClass::COUNT],
    }
}

fn c9_table(grid: &[GridRun]) -> Outcome {
    let geometry = TableGeometry::new(16, 4);
    let mut t = ReuseTable::new(geometry);
    let pcs: Vec<u32> = (0..).map(|i| i * 4).filter(|&pc| t.set_index(pc) == 0).take(geometry.assoc + 2).collect();
    for &pc in &pcs[..geometry.assoc] {
        ensure(t.insert(entry(pc)).is_none(), "eviction before the set is full")?;
    }
    // touch the oldest way so the second-oldest becomes the victim
    let mut regs = [0u32; 32];
    regs[1] = pcs[0];
    ensure(t.lookup(pcs[0], &regs, |_| true, false).is_hit(), "lookup missed a resident entry")?;
    let victim = t.insert(entry(pcs[geometry.assoc])).ok_or("no eviction on a full set")?;
    ensure(victim.pc == pcs[1], format!("evicted {:#x}, expected {:#x}", victim.pc, pcs[1]))?;
    let victim = t.insert(entry(pcs[geometry.assoc + 1])).ok_or("no eviction on a full set")?;
    ensure(victim.pc == pcs[2], format!("evicted {:#x}, expected {:#x}", victim.pc, pcs[2]))?;

    let mut entries = 0usize;
    for g in grid {
        let p = &g.policy;
        let tables = std::iter::once(g.run.engine.trace_table()).chain(g.run.engine.instr_table());
        for e in tables.flat_map(ReuseTable::entries) {
            entries += 1;
            ensure(
                e.inputs.len() <= p.input_scope && e.output_slots() <= p.output_scope,
                format!("{} {}: entry at {:#x} exceeds scope", g.workload, p.name, e.pc),
            )?;
            ensure(e.branch_count() as usize <= p.branch_limit, "branch limit exceeded")?;
        }
    }
    Ok(format!("LRU victims correct; {entries} resident entries within scope across the grid"))
}

fn c10_sweep() -> Outcome {
    let cfg = ExperimentConfig::parse(
        "workloads = all\npolicies = Baseline, DTM, RST, RST-Loop\nsweep = 32K:512, 64K:512, 32K:1024\n",
    )
    .map_err(|e| e.to_string())?;
    let report = run_experiment(&cfg).map_err(|e| e.to_string())?;
    let csv = report.metrics_csv();
    let mut lines = csv.lines();
    ensure(lines.next() == Some(CSV_HEADER.join(",").as_str()), "header mismatch")?;
    ensure(csv.lines().count() == 1 + 3 * 6 * 4, format!("{} lines", csv.lines().count()))?;
    for label in ["32K:512", "64K:512", "32K:1024"] {
        let n = csv.lines().filter(|l| l.contains(&format!("@{label},"))).count();
        ensure(n == 6 * 4, format!("{label}: {n} rows"))?;
    }
    let parsed = read_csv(csv.as_bytes()).map_err(|e| e.to_string())?;
    ensure(parsed == report.metric_rows(), "CSV does not round-trip")?;
    ensure(report.oracle_failures().is_empty(), "oracle failure in sweep")?;
    Ok(format!("{} rows over 3 memory-budget points", parsed.len()))
}

fn main() {
    let start = Instant::now();
    let grid = catch_unwind(grid);
    let elapsed = start.elapsed();

    let mut criteria: Vec<(u32, &str, Check)> = Vec::new();
    match &grid {
        Ok(g) => {
            criteria.push((1, "oracle transparency", Box::new(|| c1_oracle(g, elapsed))));
        }
        Err(_) => criteria.push((1, "oracle transparency", Box::new(|| Err("grid run panicked".into())))),
    }
    criteria.push((2, "gate soundness", Box::new(c2_gate)));
    criteria.push((3, "complementarity", Box::new(c3_complementarity)));
    criteria.push((4, "redundancy payoff", Box::new(c4_redundancy)));
    criteria.push((5, "speculation correctness", Box::new(c5_speculation)));
    criteria.push((6, "metric formulas", Box::new(c6_metrics)));
    criteria.push((7, "entry-bit accounting", Box::new(c7_entry_bits)));
    criteria.push((8, "cache latencies and determinism", Box::new(c8_determinism)));
    match &grid {
        Ok(g) => criteria.push((9, "table mechanics", Box::new(|| c9_table(g)))),
        Err(_) => criteria.push((9, "table mechanics", Box::new(|| Err("scope assertion fired in the grid".into())))),
    }
    criteria.push((10, "memory-budget sweep", Box::new(c10_sweep)));

    let mut failed = 0;
    for (n, name, check) in criteria {
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            Err(e.downcast_ref::<String>().cloned().or(e.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default())
        });
        match outcome {
            Ok(detail) => println!("PASS criterion {n} ({name}): {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL criterion {n} ({name}): {why}");
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
