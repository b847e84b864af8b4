//! Memoization tables, trace construction, reuse decisions and the loop
//! gate.
//!
//! [`ReuseEngine`] ties the pieces together for one simulation: it captures
//! traces from the committed instruction stream, answers lookups at trace
//! start opportunities, and tracks loop regions.

mod builder;
mod entry;
mod gate;
mod policy;
mod table;

pub use builder::{single_entry, TraceBuilder, TraceLimits};
pub use entry::{micro_ops, MicroOp, TraceEntry};
pub use gate::{mode_allows, LoopGate};
pub use policy::{
    LoopGateMode, PolicyError, ReuseMode, ReusePolicy, TableGeometry, TableMode, DEFAULT_BRANCH_LIMIT,
};
pub use table::{Lookup, ReuseTable};

use crate::isa::{InstrClass, Instruction, Reg};
use crate::machine::{Checkpoint, MachineState, StepResult};

/// What a reused entry hands to the timing model.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ReuseSummary {
    pub len: u32,
    pub bm: u32,
    pub btk: u32,
    pub ea: Option<u32>,
    pub outputs: Vec<Reg>,
    pub class_counts: [u32; InstrClass::COUNT],
}

/// Commits a hit: writes the live-outs, skips to `npc` and advances the
/// micro-op count by the trace length.
pub fn apply_reuse(state: &mut MachineState, entry: &TraceEntry) -> ReuseSummary {
    debug_assert_eq!(state.pc, entry.pc);
    for &(r, v) in &entry.outputs {
        state.set_reg(r, v);
    }
    state.pc = entry.npc;
    state.dyn_count += entry.len as u64;
    ReuseSummary {
        len: entry.len,
        bm: entry.bm,
        btk: entry.btk,
        ea: entry.ea,
        outputs: entry.ocr().filter(|r| !r.is_zero()).collect(),
        class_counts: entry.class_counts,
    }
}

/// A speculative reuse awaiting its unavailable inputs.
#[derive(Clone, Debug)]
pub struct PendingSpeculation {
    pub checkpoint: Checkpoint,
    pub entry: TraceEntry,
    /// Inputs that were unavailable, with the values the entry assumed.
    pub assumed: Vec<(Reg, u32)>,
    pub issue_seq: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Validation {
    Confirmed,
    Mispredicted,
}

/// All-or-nothing: confirmed only if every assumed value matches.
pub fn validate_speculation(assumed: &[(Reg, u32)], actual: impl Fn(Reg) -> u32) -> Validation {
    if assumed.iter().all(|&(r, v)| actual(r) == v) {
        Validation::Confirmed
    } else {
        Validation::Mispredicted
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct CaptureCounters {
    /// Traces written to the unified table, or to the trace table in split
    /// mode.
    pub traces_captured: u64,
    /// Single instructions written to the instruction table (split mode).
    pub instrs_captured: u64,
}

#[derive(Clone, Debug)]
pub struct ReuseEngine {
    policy: ReusePolicy,
    trace_table: ReuseTable,
    instr_table: Option<ReuseTable>,
    builder: TraceBuilder,
    gate: LoopGate,
    pub counters: CaptureCounters,
}

impl ReuseEngine {
    pub fn new(policy: ReusePolicy) -> Result<Self, PolicyError> {
        policy.validate()?;
        let instr_table = (policy.table_mode == TableMode::Split).then(|| ReuseTable::new(policy.instr_table));
        Ok(ReuseEngine {
            trace_table: ReuseTable::new(policy.trace_table),
            instr_table,
            builder: TraceBuilder::for_policy(&policy),
            gate: LoopGate::new(),
            counters: CaptureCounters::default(),
            policy,
        })
    }

    pub fn policy(&self) -> &ReusePolicy {
        &self.policy
    }

    pub fn gate(&self) -> &LoopGate {
        &self.gate
    }

    /// The unified table, or the trace table in split mode.
    pub fn trace_table(&self) -> &ReuseTable {
        &self.trace_table
    }

    pub fn instr_table(&self) -> Option<&ReuseTable> {
        self.instr_table.as_ref()
    }

    /// True when `instr` is a trace start opportunity: reuse is enabled,
    /// its first micro-op is in the subset and the loop gate is open.
    pub fn lookup_allowed(&self, instr: &Instruction) -> bool {
        self.policy.reuses()
            && self.policy.subset.classes().contains(instr.classes()[0])
            && self.gate.allows(self.policy.loop_gate, instr.pc)
    }

    /// Consults the trace table, then the instruction table on a miss.
    /// Speculative hits come only from the trace (or unified) table, only in
    /// RST mode, and only when `allow_speculation` is set.
    pub fn lookup(&mut self, pc: u32, regs: &[u32], known: impl Fn(Reg) -> bool + Copy, allow_speculation: bool) -> Lookup {
        if !self.policy.reuses() {
            return Lookup::Miss;
        }
        let speculate = allow_speculation && self.policy.mode == ReuseMode::Rst;
        let hit = self.trace_table.lookup(pc, regs, known, speculate);
        if hit.is_hit() {
            return hit;
        }
        match &mut self.instr_table {
            Some(table) => table.lookup(pc, regs, known, false),
            None => Lookup::Miss,
        }
    }

    /// Observes one committed instruction: feeds trace construction, writes
    /// closed traces to the tables and updates the loop gate. Returns
    /// whether the instruction lay in a known loop region.
    pub fn observe(&mut self, step: &StepResult) -> bool {
        let in_loop = self.gate.in_loop(step.executed.pc);
        if self.policy.reuses() {
            for op in micro_ops(step) {
                let mut closed = Vec::new();
                self.builder.feed_op(&op, in_loop, &mut closed);
                for entry in closed {
                    self.capture(entry);
                }
                if self.instr_table.is_none() || !self.builder.eligible(&op, in_loop) {
                    continue;
                }
                let single = single_entry(&op);
                self.check_scope(&single);
                if let Some(t) = self.instr_table.as_mut() {
                    t.insert(single);
                    self.counters.instrs_captured += 1;
                }
            }
        }
        self.gate.update(step);
        in_loop
    }

    /// Closes any trace still under construction.
    pub fn finish(&mut self) {
        if let Some(entry) = self.builder.flush() {
            self.capture(entry);
        }
    }

    fn capture(&mut self, entry: TraceEntry) {
        self.check_scope(&entry);
        match self.policy.table_mode {
            TableMode::Unified => {
                self.trace_table.insert(entry);
                self.counters.traces_captured += 1;
            }
            // single instructions are already in the instruction table
            TableMode::Split if entry.len >= 2 => {
                self.trace_table.insert(entry);
                self.counters.traces_captured += 1;
            }
            TableMode::Split => {}
        }
    }

    fn check_scope(&self, entry: &TraceEntry) {
        let p = &self.policy;
        assert!(
            entry.inputs.len() <= p.input_scope
                && entry.output_slots() <= p.output_scope
                && entry.branch_count() as usize <= p.branch_limit,
            "entry at {:#x} exceeds scope limits ({}, {}, {})",
            entry.pc,
            p.input_scope,
            p.output_scope,
            p.branch_limit
        );
    }

    pub fn table_accesses(&self) -> u64 {
        self.trace_table.accesses + self.instr_table.as_ref().map_or(0, |t| t.accesses)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::isa::{parse_program, DomainSubset};
    use crate::machine::step;

    fn r(i: u8) -> Reg {
        Reg::new(i).unwrap()
    }

    fn entry(outputs: Vec<(Reg, u32)>, npc: u32, len: u32) -> TraceEntry {
        TraceEntry {
            pc: 0,
            npc,
            inputs: vec![],
            outputs,
            ea: None,
            bm: 0,
            btk: 0,
            len,
            class_counts: [0; InstrClass::COUNT],
        }
    }

    #[test]
    fn apply_writes_outputs_and_skips() {
        let p = parse_program("halt").unwrap();
        let mut s = MachineState::new(&p);
        let summary = apply_reuse(&mut s, &entry(vec![(r(3), 15)], 12, 3));
        assert_eq!(s.regs[3], 15);
        assert_eq!(s.pc, 12);
        assert_eq!(summary.len, 3);
        assert_eq!(s.dyn_count, 3);
    }

    #[test]
    fn apply_discards_r0() {
        let p = parse_program("halt").unwrap();
        let mut s = MachineState::new(&p);
        apply_reuse(&mut s, &entry(vec![(Reg::ZERO, 9)], 8, 1));
        assert_eq!(s.regs[0], 0);
        assert_eq!(s.pc, 8);
    }

    #[test]
    fn speculation_is_all_or_nothing() {
        let actual = |vals: [(u8, u32); 2]| move |reg: Reg| vals.iter().find(|(i, _)| *i as usize == reg.index()).map_or(0, |v| v.1);
        assert_eq!(validate_speculation(&[(r(2), 5)], actual([(2, 5), (4, 0)])), Validation::Confirmed);
        assert_eq!(validate_speculation(&[(r(2), 5)], actual([(2, 6), (4, 0)])), Validation::Mispredicted);
        assert_eq!(
            validate_speculation(&[(r(2), 5), (r(4), 1)], actual([(2, 5), (4, 0)])),
            Validation::Mispredicted
        );
    }

    #[test]
    fn dtm_never_speculates() {
        let mut engine = ReuseEngine::new(ReusePolicy::dtm()).unwrap();
        let p = parse_program("addi r2, r2, 1\nhalt").unwrap();
        let mut s = MachineState::new(&p);
        let res = step(&mut s, &p).unwrap();
        engine.observe(&res);
        engine.finish();
        assert_eq!(engine.counters.traces_captured, 1);
        let hit = engine.lookup(0, &[0; 32], |_| false, true);
        assert_eq!(hit, Lookup::Miss);
        let hit = engine.lookup(0, &[0; 32], |_| true, true);
        assert!(matches!(hit, Lookup::Regular(_)));
        assert_eq!(engine.table_accesses(), 2);
    }

    #[test]
    fn rst_speculates_on_unknown_input() {
        let mut engine = ReuseEngine::new(ReusePolicy::rst()).unwrap();
        let p = parse_program("addi r2, r2, 1\nhalt").unwrap();
        let mut s = MachineState::new(&p);
        s.regs[2] = 5;
        let res = step(&mut s, &p).unwrap();
        engine.observe(&res);
        engine.finish();
        let hit = engine.lookup(0, &[0; 32], |_| false, true);
        match hit {
            Lookup::Speculative { assumed, .. } => assert_eq!(assumed, vec![(r(2), 5)]),
            other => panic!("expected speculative hit, got {other:?}"),
        }
    }

    #[test]
    fn baseline_touches_nothing() {
        let mut engine = ReuseEngine::new(ReusePolicy::baseline()).unwrap();
        let p = parse_program("addi r2, r2, 1\nhalt").unwrap();
        let mut s = MachineState::new(&p);
        let res = step(&mut s, &p).unwrap();
        engine.observe(&res);
        engine.finish();
        assert_eq!(engine.lookup(0, &[0; 32], |_| true, true), Lookup::Miss);
        assert_eq!(engine.table_accesses(), 0);
        assert_eq!(engine.counters.traces_captured, 0);
        assert!(!engine.lookup_allowed(&p.instructions[0]));
    }

    #[test]
    fn split_mode_routes_by_length() {
        let policy = ReusePolicy::rst_subset(DomainSubset::O);
        let mut engine = ReuseEngine::new(policy).unwrap();
        let p = parse_program("addi r2, r0, 1\naddi r3, r2, 1\nfadd r4, r4, r4\naddi r5, r0, 2\nhalt").unwrap();
        let mut s = MachineState::new(&p);
        while !s.halted {
            let res = step(&mut s, &p).unwrap();
            engine.observe(&res);
        }
        engine.finish();
        // [addi, addi] is a trace; the lone addi after fadd is a single
        assert_eq!(engine.counters.traces_captured, 1);
        assert_eq!(engine.counters.instrs_captured, 3);
        assert_eq!(engine.trace_table().occupancy(), 1);
        assert_eq!(engine.instr_table().unwrap().occupancy(), 3);
        // a trace-table miss falls through to the instruction table
        let hit = engine.lookup(12, &[0; 32], |_| true, true);
        assert!(matches!(hit, Lookup::Regular(e) if e.len == 1));
        assert_eq!(engine.trace_table().accesses, 1);
        assert_eq!(engine.instr_table().unwrap().accesses, 1);
    }
}
