use super::cache::{CacheHierarchy, CachePort};
use super::predictor::PredictorState;
use super::stats::{CacheCounts, HitCounts, PredictorCounts, SimStats, TableCounts};
use super::{TimingConfig, TimingConfigError};
use crate::isa::{Instruction, Opcode, Program, Reg, NUM_REGS};
use crate::machine::{step, DynamicLog, Fault, LogRecord, MachineState, RunOutcome, StepResult};
use crate::reuse::{
    apply_reuse, validate_speculation, CaptureCounters, Lookup, PendingSpeculation, PolicyError, ReuseEngine,
    ReusePolicy, TraceEntry, Validation,
};
use crate::isa::InstrClass;
use std::collections::{HashMap, VecDeque};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Fault(#[from] Fault),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Timing(#[from] TimingConfigError),
    #[error("max_ops must be positive")]
    NoOps,
}

#[derive(Clone, Debug)]
pub struct SimOptions {
    /// Stop once this many micro-ops have committed.
    pub max_ops: u64,
    /// Micro-ops committed before counters start.
    pub fast_forward: u64,
    /// Dynamic log bound: `Some(0)` disables it, `None` keeps every record.
    pub log_window: Option<usize>,
    /// Tag copied into the stats.
    pub workload: String,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions { max_ops: 1_000_000, fast_forward: 0, log_window: Some(0), workload: "program".into() }
    }
}

#[derive(Clone, Debug)]
pub struct SimRun {
    pub stats: SimStats,
    pub state: MachineState,
    pub outcome: RunOutcome,
    pub log: DynamicLog,
    pub engine: ReuseEngine,
}

/// Runs `program` under `policy` and returns the measured statistics and
/// the final architectural state.
pub fn simulate(program: &Program, policy: &ReusePolicy, timing: &TimingConfig, opts: &SimOptions) -> Result<SimRun, SimError> {
    if opts.max_ops == 0 {
        return Err(SimError::NoOps);
    }
    timing.validate()?;
    let engine = ReuseEngine::new(policy.clone())?;
    let mut sim = Simulator::new(program, timing, opts, engine);
    let outcome = sim.run()?;
    let stats = sim.final_stats();
    Ok(SimRun { stats, state: sim.state, outcome, log: sim.log, engine: sim.engine })
}

const ALU: usize = 0;
const MEM: usize = 1;
const MUL: usize = 2;
const NO_UNIT: usize = 3;
const TOTAL: usize = 3;

struct Speculation {
    spec: PendingSpeculation,
    /// True values of the assumed registers, known to the core at lookup time.
    actual: Vec<(Reg, u32)>,
    validate_at: u64,
    ready: [u64; NUM_REGS],
    history: u32,
    /// Reuses performed since the checkpoint: (first seq, entry).
    reuses: Vec<(u64, TraceEntry)>,
}

struct Simulator<'a> {
    program: &'a Program,
    cfg: &'a TimingConfig,
    opts: &'a SimOptions,
    engine: ReuseEngine,
    state: MachineState,
    /// Architectural replay of the committed stream; feeds trace capture.
    shadow: MachineState,
    pred: PredictorState,
    caches: CacheHierarchy,

    ready: [u64; NUM_REGS],
    ea_ready: u64,
    pending_ea: Option<u32>,
    fe_cycle: u64,
    fe_slots: usize,
    fe_line: Option<u32>,
    book: HashMap<u64, [usize; 4]>,
    units: [usize; 3],
    window: VecDeque<u64>,
    last_retire: u64,
    max_complete: u64,
    dispatched: u64,

    pending: Option<Speculation>,
    suppressed: Option<u32>,
    reused_ranges: VecDeque<(u64, u64)>,

    // cumulative counters
    reused_ops: super::ClassCounts,
    dyn_ops: super::ClassCounts,
    misspeculations: u64,
    squashed_ops: u64,
    branches: u64,
    mispredictions: u64,

    mark: Option<(u64, SimStats)>,
    capture_mark: Option<CaptureCounters>,
    log: DynamicLog,
}

impl<'a> Simulator<'a> {
    fn new(program: &'a Program, cfg: &'a TimingConfig, opts: &'a SimOptions, engine: ReuseEngine) -> Self {
        Simulator {
            program,
            cfg,
            opts,
            engine,
            state: MachineState::new(program),
            shadow: MachineState::new(program),
            pred: PredictorState::new(),
            caches: cfg.hierarchy(),
            ready: [0; NUM_REGS],
            ea_ready: 0,
            pending_ea: None,
            fe_cycle: cfg.frontend_depth,
            fe_slots: 0,
            fe_line: None,
            book: HashMap::new(),
            units: [cfg.alu_units, cfg.mem_ports, cfg.mul_units],
            window: VecDeque::with_capacity(cfg.window),
            last_retire: 0,
            max_complete: 0,
            dispatched: 0,
            pending: None,
            suppressed: None,
            reused_ranges: VecDeque::new(),
            reused_ops: Default::default(),
            dyn_ops: Default::default(),
            misspeculations: 0,
            squashed_ops: 0,
            branches: 0,
            mispredictions: 0,
            mark: None,
            capture_mark: None,
            log: DynamicLog::new(opts.log_window),
        }
    }

    fn run(&mut self) -> Result<RunOutcome, SimError> {
        let outcome = loop {
            if let Some(p) = &self.pending {
                let serializing = self.state.halted
                    || self.state.dyn_count >= self.opts.max_ops
                    || self
                        .program
                        .fetch(self.state.pc)
                        .is_none_or(|i| matches!(i.opcode, Opcode::Halt | Opcode::Syscall));
                if serializing || self.fe_cycle >= p.validate_at {
                    self.resolve();
                }
                if self.pending.is_some() {
                    self.advance()?;
                }
                continue;
            }
            self.catch_up()?;
            if self.mark.is_none() && self.state.dyn_count >= self.opts.fast_forward {
                let cycle = if self.opts.fast_forward == 0 { 0 } else { self.fe_cycle };
                self.mark = Some((cycle, self.core_totals()));
            }
            if self.state.halted {
                break RunOutcome::Halted;
            }
            // never stop between a reused address calculation and its access
            if self.state.dyn_count >= self.opts.max_ops && self.pending_ea.is_none() {
                break RunOutcome::OpLimit;
            }
            self.advance()?;
        };
        self.engine.finish();
        Ok(outcome)
    }

    /// Dispatches one unit: a memory access left over from a reused
    /// address calculation, a reused trace, or one executed instruction.
    fn advance(&mut self) -> Result<(), SimError> {
        let pc = self.state.pc;
        let instr = match self.program.fetch(pc) {
            Some(i) => *i,
            None => return self.fault(Fault::BadPc(pc)),
        };
        if let Some(addr) = self.pending_ea.take() {
            return self.execute_memory(&instr, addr);
        }
        let d = self.dispatch_slot(pc);
        if self.suppressed != Some(pc) && self.engine.lookup_allowed(&instr) {
            let ready = &self.ready;
            let known = |r: Reg| ready[r.index()] <= d;
            match self.engine.lookup(pc, &self.state.regs, known, self.pending.is_none()) {
                Lookup::Miss => {}
                Lookup::Regular(entry) => {
                    self.reuse(entry, d);
                    return Ok(());
                }
                Lookup::Speculative { entry, assumed } => {
                    self.speculate(entry, assumed, d);
                    return Ok(());
                }
            }
        }
        self.execute(&instr, d)
    }

    fn reuse(&mut self, entry: TraceEntry, d: u64) {
        let start = self.state.dyn_count;
        let summary = apply_reuse(&mut self.state, &entry);
        let complete = d + self.cfg.reuse_hit_latency;
        for r in &summary.outputs {
            self.ready[r.index()] = complete;
        }
        if let Some(ea) = summary.ea {
            self.ea_ready = complete;
            self.pending_ea = Some(ea);
        }
        for taken in entry.branch_outcomes() {
            self.pred.push_history(taken);
        }
        self.finish_unit(complete);
        match &mut self.pending {
            Some(p) => p.reuses.push((start, entry)),
            None => self.commit_reuse(start, &entry),
        }
    }

    fn speculate(&mut self, entry: TraceEntry, assumed: Vec<(Reg, u32)>, d: u64) {
        let actual = assumed.iter().map(|&(r, _)| (r, self.state.reg(r))).collect();
        let validate_at = assumed.iter().map(|&(r, _)| self.ready[r.index()]).max().unwrap_or(d);
        let checkpoint = self.state.snapshot();
        self.pending = Some(Speculation {
            spec: PendingSpeculation {
                checkpoint,
                entry: entry.clone(),
                assumed,
                issue_seq: self.state.dyn_count,
            },
            actual,
            validate_at,
            ready: self.ready,
            history: self.pred.history(),
            reuses: Vec::new(),
        });
        self.reuse(entry, d);
    }

    fn resolve(&mut self) -> Option<Validation> {
        let p = self.pending.take()?;
        let verdict = validate_speculation(&p.spec.assumed, |r| {
            p.actual.iter().find(|&&(q, _)| q == r).map_or(0, |&(_, v)| v)
        });
        match verdict {
            Validation::Confirmed => {
                self.state.release(p.spec.checkpoint);
                for (start, entry) in &p.reuses {
                    self.commit_reuse(*start, entry);
                }
            }
            Validation::Mispredicted => {
                self.squashed_ops += self.state.dyn_count - p.spec.issue_seq;
                self.state.restore(p.spec.checkpoint);
                self.ready = p.ready;
                self.pred.set_history(p.history);
                self.pending_ea = None;
                self.misspeculations += 1;
                self.suppressed = Some(p.spec.entry.pc);
                self.redirect(self.fe_cycle.max(p.validate_at) + self.cfg.rollback_penalty);
            }
        }
        Some(verdict)
    }

    /// A fault under speculation rolls back if the speculation was wrong;
    /// otherwise, and outside speculation, it is architectural.
    fn fault(&mut self, fault: Fault) -> Result<(), SimError> {
        match self.resolve() {
            Some(Validation::Mispredicted) => Ok(()),
            _ => Err(fault.into()),
        }
    }

    fn commit_reuse(&mut self, start: u64, entry: &TraceEntry) {
        self.reused_ranges.push_back((start, start + entry.len as u64));
        if start >= self.opts.fast_forward {
            self.reused_ops.add_counts(&entry.class_counts);
        }
    }

    fn execute(&mut self, instr: &Instruction, d: u64) -> Result<(), SimError> {
        if self.suppressed == Some(instr.pc) {
            self.suppressed = None;
        }
        let res = match step(&mut self.state, self.program) {
            Ok(r) => r,
            Err(f) => return self.fault(f),
        };
        let operands = |ready: &[u64; NUM_REGS], regs: &[(Reg, u32)]| {
            regs.iter().map(|&(r, _)| ready[r.index()]).max().unwrap_or(0).max(d)
        };
        let complete = match instr.opcode {
            Opcode::Lw | Opcode::Sw => {
                let base = instr.src1.map_or(0, |r| self.ready[r.index()]);
                let t = self.schedule(base.max(d), ALU);
                let addr = res.mem_effect.expect("memory effect").addr;
                self.memory_access(instr, addr, t + self.cfg.alu_latency)
            }
            Opcode::Mul => self.schedule(operands(&self.ready, &res.inputs), MUL) + self.cfg.mul_latency,
            Opcode::Fadd => self.schedule(operands(&self.ready, &res.inputs), ALU) + self.cfg.float_latency,
            Opcode::Halt => self.schedule(d, NO_UNIT),
            Opcode::Syscall => self.schedule(d, NO_UNIT) + 1,
            _ => {
                let c = self.schedule(operands(&self.ready, &res.inputs), ALU) + self.cfg.alu_latency;
                if instr.opcode.is_branch() {
                    self.predict_branch(instr, &res, c);
                }
                c
            }
        };
        if !instr.opcode.is_memory() {
            for &(r, _) in &res.outputs {
                self.ready[r.index()] = complete;
            }
        }
        self.finish_unit(complete);
        Ok(())
    }

    /// The memory access of a load or store whose address calculation was
    /// reused.
    fn execute_memory(&mut self, instr: &Instruction, addr: u32) -> Result<(), SimError> {
        let d = self.dispatch_slot(instr.pc);
        if let Err(f) = self.state.step_memory(self.program, addr) {
            return self.fault(f);
        }
        let complete = self.memory_access(instr, addr, self.ea_ready.max(d));
        self.finish_unit(complete);
        Ok(())
    }

    /// Schedules the memory port for a load or store whose address is ready
    /// at `addr_ready`; returns the completion cycle.
    fn memory_access(&mut self, instr: &Instruction, addr: u32, addr_ready: u64) -> u64 {
        let mut earliest = addr_ready;
        if instr.opcode == Opcode::Sw {
            earliest = earliest.max(instr.src2.map_or(0, |r| self.ready[r.index()]));
        }
        let latency = self.caches.access(CachePort::Data, addr);
        let complete = self.schedule(earliest, MEM) + latency;
        if let Some(rd) = instr.dest.filter(|r| instr.opcode == Opcode::Lw && !r.is_zero()) {
            self.ready[rd.index()] = complete;
        }
        complete
    }

    fn predict_branch(&mut self, instr: &Instruction, res: &StepResult, resolved: u64) {
        let pc = instr.pc;
        let taken = res.branch_taken.expect("branch outcome");
        let predicted = !instr.opcode.is_conditional_branch() || self.pred.predict(pc);
        let target = if predicted { self.pred.btb_lookup(pc) } else { None };
        let correct = match target {
            Some(t) => taken && t == res.next_pc,
            None => !taken,
        };
        if instr.opcode.is_conditional_branch() {
            self.pred.update_counter(pc, taken);
        }
        self.pred.push_history(taken);
        if taken {
            self.pred.btb_update(pc, res.next_pc);
        }
        self.branches += 1;
        if !correct {
            self.mispredictions += 1;
            self.redirect(resolved + self.cfg.branch_mispredict_penalty);
        }
    }

    fn fetch_line(&mut self, pc: u32) {
        let line = pc / self.cfg.l1i.line as u32;
        if self.fe_line != Some(line) {
            let latency = self.caches.access(CachePort::Instruction, pc);
            if latency > 1 {
                self.fe_cycle += latency - 1;
                self.fe_slots = 0;
            }
            self.fe_line = Some(line);
        }
    }

    /// Cycle at which the next unit leaves the front end.
    fn dispatch_slot(&mut self, pc: u32) -> u64 {
        self.fetch_line(pc);
        if self.window.len() >= self.cfg.window {
            let oldest = self.window.pop_front().expect("window entry");
            if oldest > self.fe_cycle {
                self.fe_cycle = oldest;
                self.fe_slots = 0;
            }
        }
        let d = self.fe_cycle;
        self.fe_slots += 1;
        if self.fe_slots >= self.cfg.width {
            self.fe_cycle += 1;
            self.fe_slots = 0;
        }
        self.dispatched += 1;
        if self.dispatched.is_multiple_of(4096) {
            let floor = self.fe_cycle;
            self.book.retain(|&t, _| t >= floor);
        }
        d
    }

    fn redirect(&mut self, cycle: u64) {
        if cycle > self.fe_cycle {
            self.fe_cycle = cycle;
        }
        self.fe_slots = 0;
        self.fe_line = None;
    }

    /// First cycle at or after `earliest` with issue bandwidth and a free
    /// unit of kind `unit`.
    fn schedule(&mut self, earliest: u64, unit: usize) -> u64 {
        let mut t = earliest;
        loop {
            let used = self.book.entry(t).or_default();
            if used[TOTAL] < self.cfg.width && (unit == NO_UNIT || used[unit] < self.units[unit]) {
                used[TOTAL] += 1;
                if unit != NO_UNIT {
                    used[unit] += 1;
                }
                return t;
            }
            t += 1;
        }
    }

    fn finish_unit(&mut self, complete: u64) {
        self.max_complete = self.max_complete.max(complete);
        self.last_retire = self.last_retire.max(complete);
        self.window.push_back(self.last_retire);
    }

    /// Replays the committed stream on the shadow machine, feeding trace
    /// capture, the loop gate, per-class counts and the log.
    fn catch_up(&mut self) -> Result<(), SimError> {
        let target = self.state.dyn_count;
        while self.shadow.dyn_count < target && !self.shadow.halted {
            let seq = self.shadow.dyn_count;
            if self.capture_mark.is_none() && seq >= self.opts.fast_forward {
                self.capture_mark = Some(self.engine.counters);
            }
            let res = step(&mut self.shadow, self.program)?;
            let in_loop = self.engine.observe(&res);
            for (k, &class) in res.classes.iter().enumerate() {
                let s = seq + k as u64;
                while self.reused_ranges.front().is_some_and(|&(_, end)| end <= s) {
                    self.reused_ranges.pop_front();
                }
                let reused = self.reused_ranges.front().is_some_and(|&(start, _)| start <= s);
                if s >= self.opts.fast_forward {
                    self.dyn_ops[class] += 1;
                }
                self.log.push(LogRecord { seq: s, pc: res.executed.pc, opcode: res.executed.opcode, class, reused, in_loop });
            }
        }
        Ok(())
    }

    /// Cumulative core-side counters.
    fn core_totals(&self) -> SimStats {
        let t = self.engine.trace_table();
        let g = self.engine.instr_table();
        SimStats {
            table_accesses: TableCounts { trace: t.accesses, instr: g.map_or(0, |g| g.accesses) },
            table_hits: HitCounts {
                regular: t.regular_hits + g.map_or(0, |g| g.regular_hits),
                speculative: t.speculative_hits + g.map_or(0, |g| g.speculative_hits),
            },
            table_writes: t.writes + g.map_or(0, |g| g.writes),
            misspeculations: self.misspeculations,
            squashed_ops: self.squashed_ops,
            predictor: PredictorCounts { branches: self.branches, mispredictions: self.mispredictions },
            cache: CacheCounts {
                l1i: self.caches.l1i.counts,
                l1d: self.caches.l1d.counts,
                l2: self.caches.l2.counts,
                l3: self.caches.l3.counts,
            },
            ..SimStats::default()
        }
    }

    fn final_stats(&self) -> SimStats {
        let now = self.core_totals();
        let (mark_cycle, mark) = self.mark.clone().unwrap_or((self.max_complete, now.clone()));
        let mut stats = now.delta(&mark);
        stats.workload = self.opts.workload.clone();
        stats.cycles = self.max_complete.saturating_sub(mark_cycle);
        stats.dyn_ops = self.dyn_ops;
        stats.reused_ops = self.reused_ops;
        let captured = self.engine.counters;
        let base = self.capture_mark.unwrap_or(captured);
        stats.traces_captured = captured.traces_captured - base.traces_captured;
        stats.instrs_captured = captured.instrs_captured - base.instrs_captured;
        stats.energy_proxy = stats.table_accesses.total() as f64 * self.cfg.access_energy(self.engine.policy());
        debug_assert!(InstrClass::ALL.iter().all(|&c| stats.reused_ops[c] <= stats.dyn_ops[c]));
        stats
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::isa::parse_program;
    use crate::machine::run_reference;

    fn run(src: &str, policy: ReusePolicy, cfg: &TimingConfig) -> SimRun {
        let p = parse_program(src).unwrap();
        simulate(&p, &policy, cfg, &SimOptions::default()).unwrap()
    }

    fn eight_adds() -> String {
        let mut s: String = (1..=8).map(|i| format!("addi r{i}, r0, {i}\n")).collect();
        s.push_str("halt\n");
        s
    }

    // The first fetch misses every cache level, stalling the front end for
    // all but one cycle of the 226-cycle miss, on top of the front-end depth.
    fn fill(cfg: &TimingConfig) -> u64 {
        cfg.frontend_depth + 225
    }

    #[test]
    fn eight_independent_adds_two_alus() {
        let cfg = TimingConfig::default();
        let r = run(&eight_adds(), ReusePolicy::baseline(), &cfg);
        // 4 per cycle reach issue, but only 2 ALUs: 4 issue cycles
        assert_eq!(r.stats.cycles, fill(&cfg) + 4);
    }

    #[test]
    fn eight_independent_adds_four_alus() {
        let cfg = TimingConfig { alu_units: 4, ..TimingConfig::default() };
        let r = run(&eight_adds(), ReusePolicy::baseline(), &cfg);
        assert_eq!(r.stats.cycles, fill(&cfg) + 2);
    }

    #[test]
    fn dependent_chain_serializes() {
        let cfg = TimingConfig::default();
        let src = "addi r1, r0, 1\naddi r1, r1, 1\naddi r1, r1, 1\naddi r1, r1, 1\nhalt";
        let r = run(src, ReusePolicy::baseline(), &cfg);
        assert_eq!(r.stats.cycles, fill(&cfg) + 4);
        let src = "addi r1, r0, 3\nmul r2, r1, r1\naddi r3, r2, 1\nhalt";
        let r = run(src, ReusePolicy::baseline(), &cfg);
        assert_eq!(r.stats.cycles, fill(&cfg) + 1 + 3 + 1);
    }

    #[test]
    fn load_latency_on_critical_path() {
        let cfg = TimingConfig::default();
        let r = run("lw r1, 256(r0)\naddi r2, r1, 1\nhalt", ReusePolicy::baseline(), &cfg);
        // address 1, first-touch data access 226, dependent add 1
        assert_eq!(r.stats.cycles, fill(&cfg) + 1 + 226 + 1);
        assert_eq!(r.stats.cache.l1d.misses, 1);
    }

    const LOOP: &str = "
        addi r1, r0, 200
    top:
        addi r3, r0, 7
        add  r4, r3, r3
        addi r1, r1, -1
        bne  r1, r0, top
        sw   r4, 64(r0)
        halt";

    #[test]
    fn matches_reference_state() {
        let p = parse_program(LOOP).unwrap();
        let reference = run_reference(&p, 1_000_000, None).unwrap().state;
        for policy in ReusePolicy::presets() {
            let r = simulate(&p, &policy, &TimingConfig::default(), &SimOptions::default()).unwrap();
            assert!(r.state.same_architectural_state(&reference), "{}", policy.name);
            assert_eq!(r.outcome, RunOutcome::Halted);
            assert_eq!(r.stats.dyn_ops.total(), reference.dyn_count, "{}", policy.name);
        }
    }

    #[test]
    fn dtm_reuses_loop_body() {
        let cfg = TimingConfig::default();
        let base = run(LOOP, ReusePolicy::baseline(), &cfg);
        let dtm = run(LOOP, ReusePolicy::dtm(), &cfg);
        assert!(dtm.stats.reused_ops.total() > 0);
        assert!(dtm.stats.table_hits.regular > 0);
        assert_eq!(dtm.stats.table_hits.speculative, 0);
        assert_eq!(dtm.stats.misspeculations, 0);
        assert!(dtm.stats.cycles < base.stats.cycles, "{} vs {}", dtm.stats.cycles, base.stats.cycles);
        assert_eq!(base.stats.table_accesses.total(), 0);
    }

    #[test]
    fn repeated_runs_identical() {
        let cfg = TimingConfig::default();
        let a = run(LOOP, ReusePolicy::rst(), &cfg);
        let b = run(LOOP, ReusePolicy::rst(), &cfg);
        assert_eq!(a.stats, b.stats);
    }

    #[test]
    fn op_limit_stops_run() {
        let p = parse_program("top: addi r1, r1, 1\njmp top").unwrap();
        let opts = SimOptions { max_ops: 1000, ..SimOptions::default() };
        let r = simulate(&p, &ReusePolicy::rst(), &TimingConfig::default(), &opts).unwrap();
        assert_eq!(r.outcome, RunOutcome::OpLimit);
        let reference = run_reference(&p, r.state.dyn_count, None).unwrap();
        assert!(r.state.same_architectural_state(&reference.state));
    }

    #[test]
    fn fast_forward_excludes_warmup() {
        let p = parse_program(LOOP).unwrap();
        let cfg = TimingConfig::default();
        let full = simulate(&p, &ReusePolicy::baseline(), &cfg, &SimOptions::default()).unwrap();
        let opts = SimOptions { fast_forward: 400, ..SimOptions::default() };
        let measured = simulate(&p, &ReusePolicy::baseline(), &cfg, &opts).unwrap();
        assert_eq!(measured.stats.dyn_ops.total(), full.stats.dyn_ops.total() - 400);
        assert!(measured.stats.cycles < full.stats.cycles);
        assert!(measured.state.same_architectural_state(&full.state));
    }

    #[test]
    fn faults_propagate() {
        let p = parse_program("addi r1, r0, 2\nlw r2, 0(r1)\nhalt").unwrap();
        let err = simulate(&p, &ReusePolicy::rst(), &TimingConfig::default(), &SimOptions::default());
        assert!(matches!(err, Err(SimError::Fault(Fault::Unaligned { .. }))));
    }

    #[test]
    fn log_marks_reused_ops() {
        let p = parse_program(LOOP).unwrap();
        let opts = SimOptions { log_window: None, ..SimOptions::default() };
        let r = simulate(&p, &ReusePolicy::dtm(), &TimingConfig::default(), &opts).unwrap();
        let reused = r.log.records().filter(|l| l.reused).count() as u64;
        assert_eq!(reused, r.stats.reused_ops.total());
        assert_eq!(r.log.len() as u64, r.stats.dyn_ops.total());
        assert!(r.log.records().any(|l| l.in_loop));
    }
}
