//! Architectural reference executor.
//!
//! `step` defines the semantics every reuse mechanism must preserve. The
//! simulator compares its final state against `run_reference`.

use crate::isa::{InstrClass, Instruction, Opcode, Program, Reg, NUM_REGS};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, VecDeque};
use std::fmt::Write as _;
use thiserror::Error;

/// Data addresses must lie below this bound.
pub const MEM_LIMIT: u32 = 1 << 24;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Fault {
    #[error("pc {pc:#x}: unaligned memory access at {addr:#x}")]
    Unaligned { pc: u32, addr: u32 },
    #[error("pc {pc:#x}: memory access out of range at {addr:#x}")]
    OutOfRange { pc: u32, addr: u32 },
    #[error("pc {0:#x} is outside the program")]
    BadPc(u32),
    #[error("machine is halted")]
    Halted,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MemKind {
    Read,
    Write,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MemEffect {
    pub addr: u32,
    pub value: u32,
    pub kind: MemKind,
}

/// Full description of one executed instruction.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StepResult {
    pub executed: Instruction,
    pub classes: &'static [InstrClass],
    /// Registers read, in operand order.
    pub inputs: Vec<(Reg, u32)>,
    /// Registers written; writes to `r0` are omitted.
    pub outputs: Vec<(Reg, u32)>,
    pub branch_taken: Option<bool>,
    pub next_pc: u32,
    pub mem_effect: Option<MemEffect>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MachineState {
    pub regs: [u32; NUM_REGS],
    mem: BTreeMap<u32, u32>,
    pub pc: u32,
    pub halted: bool,
    /// Executed dynamic micro-operations.
    pub dyn_count: u64,
    journal: Vec<(u32, Option<u32>)>,
    open_checkpoints: usize,
}

/// Saved registers and pc plus a position in the memory-write journal.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Checkpoint {
    regs: [u32; NUM_REGS],
    pc: u32,
    halted: bool,
    dyn_count: u64,
    journal_len: usize,
}

impl MachineState {
    pub fn new(program: &Program) -> Self {
        let mut mem = BTreeMap::new();
        for (&addr, &value) in &program.data {
            if value != 0 {
                mem.insert(addr, value);
            }
        }
        MachineState {
            regs: [0; NUM_REGS],
            mem,
            pc: program.entry,
            halted: false,
            dyn_count: 0,
            journal: Vec::new(),
            open_checkpoints: 0,
        }
    }

    pub fn reg(&self, r: Reg) -> u32 {
        self.regs[r.index()]
    }

    pub fn set_reg(&mut self, r: Reg, value: u32) {
        if !r.is_zero() {
            self.regs[r.index()] = value;
        }
    }

    pub fn load(&self, addr: u32) -> u32 {
        self.mem.get(&addr).copied().unwrap_or(0)
    }

    pub fn store(&mut self, addr: u32, value: u32) {
        let old = if value == 0 { self.mem.remove(&addr) } else { self.mem.insert(addr, value) };
        if self.open_checkpoints > 0 {
            self.journal.push((addr, old));
        }
    }

    /// Non-zero memory words, ascending by address.
    pub fn memory(&self) -> &BTreeMap<u32, u32> {
        &self.mem
    }

    /// Registers, memory, pc and halt flag compare equal.
    pub fn same_architectural_state(&self, other: &MachineState) -> bool {
        self.regs == other.regs && self.mem == other.mem && self.pc == other.pc && self.halted == other.halted
    }

    pub fn snapshot(&mut self) -> Checkpoint {
        self.open_checkpoints += 1;
        Checkpoint {
            regs: self.regs,
            pc: self.pc,
            halted: self.halted,
            dyn_count: self.dyn_count,
            journal_len: self.journal.len(),
        }
    }

    /// Rolls back to `cp`. Checkpoints taken after `cp` become invalid.
    pub fn restore(&mut self, cp: Checkpoint) {
        while self.journal.len() > cp.journal_len {
            let (addr, old) = self.journal.pop().expect("journal entry");
            match old {
                Some(v) => self.mem.insert(addr, v),
                None => self.mem.remove(&addr),
            };
        }
        self.regs = cp.regs;
        self.pc = cp.pc;
        self.halted = cp.halted;
        self.dyn_count = cp.dyn_count;
        self.close_checkpoint();
    }

    /// Drops a checkpoint without rolling back.
    pub fn release(&mut self, _cp: Checkpoint) {
        self.close_checkpoint();
    }

    fn close_checkpoint(&mut self) {
        self.open_checkpoints = self.open_checkpoints.saturating_sub(1);
        if self.open_checkpoints == 0 {
            self.journal.clear();
        }
    }

    /// Effective address of the load or store at the current pc.
    pub fn effective_address(&self, instr: &Instruction) -> u32 {
        let base = instr.src1.map_or(0, |r| self.reg(r));
        base.wrapping_add(instr.imm.unwrap_or(0) as u32)
    }

    /// Executes only the memory access of the load or store at `pc`, with a
    /// precomputed effective address. The address calculation micro-op is
    /// assumed to have been supplied by reuse.
    pub fn step_memory(&mut self, program: &Program, addr: u32) -> Result<StepResult, Fault> {
        let instr = *self.fetch(program)?;
        assert!(instr.opcode.is_memory(), "step_memory on {}", instr.opcode);
        let inputs = match instr.opcode {
            Opcode::Sw => {
                let rs = instr.src2.expect("sw value");
                vec![(rs, self.reg(rs))]
            }
            _ => Vec::new(),
        };
        let result = self.memory_access(&instr, addr, inputs)?;
        self.pc = result.next_pc;
        self.dyn_count += 1;
        Ok(result)
    }

    fn fetch<'p>(&self, program: &'p Program) -> Result<&'p Instruction, Fault> {
        if self.halted {
            return Err(Fault::Halted);
        }
        program.fetch(self.pc).ok_or(Fault::BadPc(self.pc))
    }

    fn memory_access(&mut self, instr: &Instruction, addr: u32, inputs: Vec<(Reg, u32)>) -> Result<StepResult, Fault> {
        if !addr.is_multiple_of(4) {
            return Err(Fault::Unaligned { pc: instr.pc, addr });
        }
        if addr >= MEM_LIMIT {
            return Err(Fault::OutOfRange { pc: instr.pc, addr });
        }
        let mut outputs = Vec::new();
        let effect = if instr.opcode == Opcode::Lw {
            let value = self.load(addr);
            let rd = instr.dest.expect("lw dest");
            self.set_reg(rd, value);
            if !rd.is_zero() {
                outputs.push((rd, value));
            }
            MemEffect { addr, value, kind: MemKind::Read }
        } else {
            let rs = instr.src2.expect("sw value");
            let value = self.reg(rs);
            self.store(addr, value);
            MemEffect { addr, value, kind: MemKind::Write }
        };
        Ok(StepResult {
            executed: *instr,
            classes: instr.classes(),
            inputs,
            outputs,
            branch_taken: None,
            next_pc: instr.pc.wrapping_add(4),
            mem_effect: Some(effect),
        })
    }
}

/// Advances `state` by one instruction.
pub fn step(state: &mut MachineState, program: &Program) -> Result<StepResult, Fault> {
    use Opcode::*;
    let instr = *state.fetch(program)?;
    let read = |r: Option<Reg>| {
        let r = r.expect("operand");
        (r, state.reg(r))
    };
    let next = instr.pc.wrapping_add(4);

    let result = match instr.opcode {
        Add | Sub | And | Or | Xor | Slt | Mul | Fadd => {
            let a = read(instr.src1);
            let b = read(instr.src2);
            let value = match instr.opcode {
                Add => a.1.wrapping_add(b.1),
                Sub => a.1.wrapping_sub(b.1),
                And => a.1 & b.1,
                Or => a.1 | b.1,
                Xor => a.1 ^ b.1,
                Slt => ((a.1 as i32) < (b.1 as i32)) as u32,
                Mul => a.1.wrapping_mul(b.1),
                Fadd => (f32::from_bits(a.1) + f32::from_bits(b.1)).to_bits(),
                _ => unreachable!(),
            };
            alu_result(state, instr, vec![a, b], value)
        }
        Addi => {
            let a = read(instr.src1);
            let value = a.1.wrapping_add(instr.imm.unwrap_or(0) as u32);
            alu_result(state, instr, vec![a], value)
        }
        Beq | Bne | Blt => {
            let a = read(instr.src1);
            let b = read(instr.src2);
            let taken = match instr.opcode {
                Beq => a.1 == b.1,
                Bne => a.1 != b.1,
                _ => (a.1 as i32) < (b.1 as i32),
            };
            let target = instr.branch_target().expect("branch target");
            StepResult {
                executed: instr,
                classes: instr.classes(),
                inputs: vec![a, b],
                outputs: Vec::new(),
                branch_taken: Some(taken),
                next_pc: if taken { target } else { next },
                mem_effect: None,
            }
        }
        Jmp => StepResult {
            executed: instr,
            classes: instr.classes(),
            inputs: Vec::new(),
            outputs: Vec::new(),
            branch_taken: Some(true),
            next_pc: instr.branch_target().expect("jmp target"),
            mem_effect: None,
        },
        Lw | Sw => {
            let base = read(instr.src1);
            let addr = state.effective_address(&instr);
            let mut inputs = vec![base];
            if instr.opcode == Sw {
                inputs.push(read(instr.src2));
            }
            state.memory_access(&instr, addr, inputs)?
        }
        Syscall => simple_result(instr, next),
        Halt => simple_result(instr, instr.pc),
    };

    if instr.opcode == Halt {
        state.halted = true;
    }
    state.pc = result.next_pc;
    state.dyn_count += instr.classes().len() as u64;
    Ok(result)
}

fn alu_result(state: &mut MachineState, instr: Instruction, inputs: Vec<(Reg, u32)>, value: u32) -> StepResult {
    let rd = instr.dest.expect("dest");
    state.set_reg(rd, value);
    let outputs = if rd.is_zero() { Vec::new() } else { vec![(rd, value)] };
    StepResult {
        executed: instr,
        classes: instr.classes(),
        inputs,
        outputs,
        branch_taken: None,
        next_pc: instr.pc.wrapping_add(4),
        mem_effect: None,
    }
}

fn simple_result(instr: Instruction, next_pc: u32) -> StepResult {
    StepResult {
        executed: instr,
        classes: instr.classes(),
        inputs: Vec::new(),
        outputs: Vec::new(),
        branch_taken: None,
        next_pc,
        mem_effect: None,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RunOutcome {
    Halted,
    /// `max_ops` micro-operations executed without reaching `halt`.
    OpLimit,
}

/// One line of the dynamic log: a single micro-operation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LogRecord {
    pub seq: u64,
    pub pc: u32,
    pub opcode: Opcode,
    pub class: InstrClass,
    pub reused: bool,
    pub in_loop: bool,
}

impl LogRecord {
    /// `seq pc opcode class reused inloop`
    pub fn to_line(&self) -> String {
        format!(
            "{} {:#x} {} {} {} {}",
            self.seq, self.pc, self.opcode, self.class, self.reused as u8, self.in_loop as u8
        )
    }
}

/// Ordered micro-op log, optionally keeping only the most recent records.
#[derive(Clone, Debug, Default)]
pub struct DynamicLog {
    records: VecDeque<LogRecord>,
    window: Option<usize>,
}

impl DynamicLog {
    pub fn new(window: Option<usize>) -> Self {
        DynamicLog { records: VecDeque::new(), window }
    }

    pub fn push(&mut self, record: LogRecord) {
        if self.window == Some(0) {
            return;
        }
        self.records.push_back(record);
        if let Some(w) = self.window {
            while self.records.len() > w {
                self.records.pop_front();
            }
        }
    }

    pub fn records(&self) -> impl Iterator<Item = &LogRecord> {
        self.records.iter()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            let _ = writeln!(out, "{}", r.to_line());
        }
        out
    }
}

pub struct ReferenceRun {
    pub state: MachineState,
    pub outcome: RunOutcome,
    pub steps: Vec<StepResult>,
    pub log: DynamicLog,
}

/// Steps until `halt` or until at least `max_ops` micro-ops have executed.
/// `window` bounds both the returned step list and the log to the most
/// recent entries.
pub fn run_reference(program: &Program, max_ops: u64, window: Option<usize>) -> Result<ReferenceRun, Fault> {
    assert!(max_ops > 0, "max_ops must be positive");
    let mut state = MachineState::new(program);
    let mut steps = VecDeque::new();
    let mut log = DynamicLog::new(window);
    while !state.halted {
        if state.dyn_count >= max_ops {
            return Ok(ReferenceRun { state, outcome: RunOutcome::OpLimit, steps: steps.into(), log });
        }
        let seq = state.dyn_count;
        let s = step(&mut state, program)?;
        for (k, &class) in s.classes.iter().enumerate() {
            log.push(LogRecord {
                seq: seq + k as u64,
                pc: s.executed.pc,
                opcode: s.executed.opcode,
                class,
                reused: false,
                in_loop: false,
            });
        }
        steps.push_back(s);
        if let Some(w) = window {
            while steps.len() > w {
                steps.pop_front();
            }
        }
    }
    Ok(ReferenceRun { state, outcome: RunOutcome::Halted, steps: steps.into(), log })
}
