use crate::isa::{InstrClass, Opcode, Reg};
use crate::machine::StepResult;
use std::fmt::Write as _;

/// One memoized trace: the start address, the address to resume at, the
/// live-in context (`icr`/`icv`) and live-out context (`ocr`/`ocv`), and the
/// branch bitmaps used to train the predictor on reuse.
///
/// A single memoized instruction is a trace of length 1; split tables keep
/// those in the instruction table and longer traces in the trace table.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TraceEntry {
    pub pc: u32,
    pub npc: u32,
    /// Live-in registers paired with the values they held (`icr`/`icv`).
    pub inputs: Vec<(Reg, u32)>,
    /// Final value of every register written by the trace (`ocr`/`ocv`).
    pub outputs: Vec<(Reg, u32)>,
    /// Effective address produced by a trailing address calculation. When
    /// set, `npc` is the address of the load or store whose memory access
    /// still has to execute. Occupies one output slot.
    pub ea: Option<u32>,
    /// Bit `i` is set for the `i`-th branch in the trace.
    pub bm: u32,
    /// Bit `i` is set when the `i`-th branch was taken.
    pub btk: u32,
    pub len: u32,
    /// Micro-ops per class, recorded at capture time.
    pub class_counts: [u32; InstrClass::COUNT],
}

impl TraceEntry {
    pub fn is_instruction(&self) -> bool {
        self.len == 1
    }

    pub fn branch_count(&self) -> u32 {
        self.bm.count_ones()
    }

    pub fn output_slots(&self) -> usize {
        self.outputs.len() + self.ea.is_some() as usize
    }

    pub fn icr(&self) -> impl Iterator<Item = Reg> + '_ {
        self.inputs.iter().map(|&(r, _)| r)
    }

    pub fn icv(&self) -> impl Iterator<Item = u32> + '_ {
        self.inputs.iter().map(|&(_, v)| v)
    }

    pub fn ocr(&self) -> impl Iterator<Item = Reg> + '_ {
        self.outputs.iter().map(|&(r, _)| r)
    }

    /// Outcomes of the branches inside the trace, in program order.
    pub fn branch_outcomes(&self) -> impl Iterator<Item = bool> + '_ {
        (0..32).filter(move |i| self.bm & (1 << i) != 0).map(move |i| self.btk & (1 << i) != 0)
    }

    pub fn same_context(&self, other: &TraceEntry) -> bool {
        self.pc == other.pc && self.inputs == other.inputs
    }

    /// `set way pc npc len i:<r/v,..> o:<r/v,..> bm btk`, values in hex.
    pub fn dump_line(&self, set: usize, way: usize) -> String {
        let list = |pairs: &[(Reg, u32)], ea: Option<u32>| {
            let mut s = String::new();
            for (k, &(r, v)) in pairs.iter().enumerate() {
                if k > 0 {
                    s.push(',');
                }
                let _ = write!(s, "{:x}/{:x}", r.index(), v);
            }
            if let Some(a) = ea {
                if !s.is_empty() {
                    s.push(',');
                }
                let _ = write!(s, "ea/{a:x}");
            }
            if s.is_empty() {
                s.push('-');
            }
            s
        };
        format!(
            "{:x} {:x} {:x} {:x} {:x} i:{} o:{} {:x} {:x}",
            set,
            way,
            self.pc,
            self.npc,
            self.len,
            list(&self.inputs, None),
            list(&self.outputs, self.ea),
            self.bm,
            self.btk
        )
    }
}

/// One micro-operation of an executed instruction, as seen by trace
/// construction. Loads and stores yield an address calculation (which
/// produces `ea`) followed by the memory access.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MicroOp {
    pub pc: u32,
    pub class: InstrClass,
    pub inputs: Vec<(Reg, u32)>,
    pub output: Option<(Reg, u32)>,
    pub ea: Option<u32>,
    pub taken: Option<bool>,
    /// Where execution continues after this micro-op.
    pub next_pc: u32,
}

pub fn micro_ops(step: &StepResult) -> Vec<MicroOp> {
    let instr = &step.executed;
    let pc = instr.pc;
    let nonzero = |pairs: &[(Reg, u32)]| pairs.iter().copied().filter(|(r, _)| !r.is_zero()).collect::<Vec<_>>();
    if instr.opcode.is_memory() {
        let effect = step.mem_effect.expect("memory effect");
        let base = step.inputs.first().copied().into_iter().filter(|(r, _)| !r.is_zero()).collect();
        let mem_inputs = if instr.opcode == Opcode::Sw { nonzero(&step.inputs[1..]) } else { Vec::new() };
        vec![
            MicroOp {
                pc,
                class: InstrClass::AddrCalc,
                inputs: base,
                output: None,
                ea: Some(effect.addr),
                taken: None,
                next_pc: pc,
            },
            MicroOp {
                pc,
                class: InstrClass::MemAccess,
                inputs: mem_inputs,
                output: step.outputs.first().copied(),
                ea: None,
                taken: None,
                next_pc: step.next_pc,
            },
        ]
    } else {
        let mut inputs = Vec::with_capacity(2);
        for (r, v) in nonzero(&step.inputs) {
            if !inputs.iter().any(|&(q, _)| q == r) {
                inputs.push((r, v));
            }
        }
        vec![MicroOp {
            pc,
            class: step.classes[0],
            inputs,
            output: step.outputs.first().copied(),
            ea: None,
            taken: step.branch_taken,
            next_pc: step.next_pc,
        }]
    }
}
