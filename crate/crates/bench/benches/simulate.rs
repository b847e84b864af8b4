use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use tracereuse_core::harness::{redundant_loop, varying_loop, Workload};
use tracereuse_core::reuse::{ReuseTable, TableGeometry, TraceEntry};
use tracereuse_core::timing::CachePort;
use tracereuse_core::{InstrClass, Reg};
use tracereuse_core::{run_reference, simulate, ReusePolicy, SimOptions, TimingConfig};

fn workloads() -> Vec<Workload> {
    vec![redundant_loop(500), varying_loop(500)]
}

fn reference(c: &mut Criterion) {
    let mut g = c.benchmark_group("reference");
    for w in workloads() {
        g.throughput(Throughput::Elements(w.op_bound));
        g.bench_function(&w.name, |b| b.iter(|| run_reference(&w.program, w.op_bound, Some(0)).unwrap()));
    }
    g.finish();
}

fn policies(c: &mut Criterion) {
    let timing = TimingConfig::default();
    let mut g = c.benchmark_group("simulate");
    for w in workloads() {
        let opts = SimOptions { fast_forward: 1000, workload: w.name.clone(), ..SimOptions::default() };
        for policy in [ReusePolicy::baseline(), ReusePolicy::dtm(), ReusePolicy::rst(), ReusePolicy::rst_loop()] {
            g.bench_with_input(BenchmarkId::new(&w.name, &policy.name), &policy, |b, p| {
                b.iter(|| simulate(&w.program, p, &timing, &opts).unwrap())
            });
        }
    }
    g.finish();
}

fn caches(c: &mut Criterion) {
    let timing = TimingConfig::default();
    c.bench_function("cache/strided_64k", |b| {
        b.iter(|| {
            let mut h = timing.hierarchy();
            (0..65536u32).step_by(64).map(|a| h.access(CachePort::Data, a)).sum::<u64>()
        })
    });
}

fn table(c: &mut Criterion) {
    let r2 = Reg::new(2).unwrap();
    let entry = |pc: u32, v: u32| TraceEntry {
        pc,
        npc: pc + 8,
        inputs: vec![(r2, v)],
        outputs: vec![(Reg::new(3).unwrap(), v + 1)],
        ea: None,
        bm: 0,
        btk: 0,
        len: 2,
        class_counts: [0; InstrClass::COUNT],
    };
    c.bench_function("table/insert_lookup_512x4", |b| {
        b.iter(|| {
            let mut t = ReuseTable::new(TableGeometry::new(512, 4));
            let mut regs = [0u32; 32];
            let mut hits = 0;
            for i in 0..4096u32 {
                let pc = (i % 1024) * 4;
                regs[2] = i % 7;
                if t.lookup(pc, &regs, |_| true, false).is_hit() {
                    hits += 1;
                } else {
                    t.insert(entry(pc, i % 7));
                }
            }
            hits
        })
    });
}

criterion_group!(benches, reference, policies, caches, table);
criterion_main!(benches);
