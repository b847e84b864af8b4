use super::entry::{micro_ops, MicroOp, TraceEntry};
use super::gate::mode_allows;
use super::policy::{LoopGateMode, ReusePolicy};
use crate::isa::{ClassSet, InstrClass, Reg};
use crate::machine::StepResult;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TraceLimits {
    pub input_scope: usize,
    pub output_scope: usize,
    pub branch_limit: usize,
}

#[derive(Clone, Debug)]
struct Partial {
    pc: u32,
    npc: u32,
    inputs: Vec<(Reg, u32)>,
    outputs: Vec<(Reg, u32)>,
    written: u32,
    ea: Option<u32>,
    bm: u32,
    btk: u32,
    branches: usize,
    len: u32,
    class_counts: [u32; InstrClass::COUNT],
    in_loop: bool,
}

impl Partial {
    fn empty(pc: u32, in_loop: bool) -> Self {
        Partial {
            pc,
            npc: pc,
            inputs: Vec::new(),
            outputs: Vec::new(),
            written: 0,
            ea: None,
            bm: 0,
            btk: 0,
            branches: 0,
            len: 0,
            class_counts: [0; InstrClass::COUNT],
            in_loop,
        }
    }

    fn was_written(&self, r: Reg) -> bool {
        self.written & (1 << r.index()) != 0
    }

    fn fits(&self, op: &MicroOp, limits: &TraceLimits) -> bool {
        if self.ea.is_some() {
            return false;
        }
        let new_inputs = op
            .inputs
            .iter()
            .filter(|&&(r, _)| !self.was_written(r) && !self.inputs.iter().any(|&(q, _)| q == r))
            .count();
        let new_outputs = op
            .output
            .iter()
            .filter(|&&(r, _)| !self.outputs.iter().any(|&(q, _)| q == r))
            .count()
            + op.ea.is_some() as usize;
        let is_branch = op.taken.is_some() as usize;
        self.inputs.len() + new_inputs <= limits.input_scope
            && self.outputs.len() + new_outputs <= limits.output_scope
            && self.branches + is_branch <= limits.branch_limit
    }

    fn push(&mut self, op: &MicroOp) {
        for &(r, v) in &op.inputs {
            if !self.was_written(r) && !self.inputs.iter().any(|&(q, _)| q == r) {
                self.inputs.push((r, v));
            }
        }
        if let Some((r, v)) = op.output {
            match self.outputs.iter_mut().find(|(q, _)| *q == r) {
                Some(slot) => slot.1 = v,
                None => self.outputs.push((r, v)),
            }
            self.written |= 1 << r.index();
        }
        if let Some(addr) = op.ea {
            self.ea = Some(addr);
        }
        if let Some(taken) = op.taken {
            self.bm |= 1 << self.branches;
            if taken {
                self.btk |= 1 << self.branches;
            }
            self.branches += 1;
        }
        self.class_counts[op.class.index()] += 1;
        self.len += 1;
        self.npc = op.next_pc;
    }

    fn finish(self) -> TraceEntry {
        TraceEntry {
            pc: self.pc,
            npc: self.npc,
            inputs: self.inputs,
            outputs: self.outputs,
            ea: self.ea,
            bm: self.bm,
            btk: self.btk,
            len: self.len,
            class_counts: self.class_counts,
        }
    }
}

/// Builds traces from the committed micro-op stream.
///
/// A trace grows while micro-ops are in the reuse subset, allowed by the
/// loop gate, and fit the input, output and branch limits. It is closed
/// just before the first micro-op that breaks one of those conditions, and
/// also whenever the stream crosses between loop and non-loop code, so that
/// every trace lies entirely inside or entirely outside loop regions.
/// A memory access is never in the domain, so a trace that reaches an
/// address calculation always ends there.
#[derive(Clone, Debug)]
pub struct TraceBuilder {
    limits: TraceLimits,
    subset: ClassSet,
    gate: LoopGateMode,
    current: Option<Partial>,
}

impl TraceBuilder {
    pub fn new(limits: TraceLimits, subset: ClassSet, gate: LoopGateMode) -> Self {
        TraceBuilder { limits, subset, gate, current: None }
    }

    pub fn for_policy(policy: &ReusePolicy) -> Self {
        TraceBuilder::new(
            TraceLimits {
                input_scope: policy.input_scope,
                output_scope: policy.output_scope,
                branch_limit: policy.branch_limit,
            },
            policy.subset.classes(),
            policy.loop_gate,
        )
    }

    pub fn limits(&self) -> TraceLimits {
        self.limits
    }

    /// Whether a micro-op may be captured at all, alone or in a trace.
    pub fn eligible(&self, op: &MicroOp, in_loop: bool) -> bool {
        self.subset.contains(op.class)
            && mode_allows(self.gate, in_loop)
            && Partial::empty(op.pc, in_loop).fits(op, &self.limits)
    }

    /// Feeds one executed instruction. Returns the traces it closed.
    pub fn feed(&mut self, step: &StepResult, in_loop: bool) -> Vec<TraceEntry> {
        let mut out = Vec::new();
        for op in micro_ops(step) {
            self.feed_op(&op, in_loop, &mut out);
        }
        out
    }

    pub fn feed_op(&mut self, op: &MicroOp, in_loop: bool, out: &mut Vec<TraceEntry>) {
        let eligible = self.eligible(op, in_loop);
        if let Some(cur) = &self.current {
            if !eligible || cur.in_loop != in_loop || !cur.fits(op, &self.limits) {
                out.push(self.current.take().expect("current trace").finish());
            }
        }
        if eligible {
            self.current.get_or_insert_with(|| Partial::empty(op.pc, in_loop)).push(op);
        }
    }

    /// Closes the trace under construction, if any.
    pub fn flush(&mut self) -> Option<TraceEntry> {
        self.current.take().map(Partial::finish)
    }

    pub fn in_progress(&self) -> bool {
        self.current.is_some()
    }
}

/// A single micro-op as a length-1 entry, for the instruction table.
pub fn single_entry(op: &MicroOp) -> TraceEntry {
    let mut p = Partial::empty(op.pc, false);
    p.push(op);
    p.finish()
}
