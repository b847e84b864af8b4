//! Toy RISC instruction set: opcodes, operands, reuse-domain classes and
//! the subsets of the reuse domain that a policy may enable.

mod asm;

pub use asm::{parse_program, unparse, ParseError, ParseErrorKind};

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

pub const NUM_REGS: usize = 32;

/// Architectural register index, `r0` through `r31`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Reg(u8);

impl Reg {
    pub const ZERO: Reg = Reg(0);

    pub fn new(index: u8) -> Option<Reg> {
        ((index as usize) < NUM_REGS).then_some(Reg(index))
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn is_zero(self) -> bool {
        self.0 == 0
    }
}

impl fmt::Display for Reg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "r{}", self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Opcode {
    Add,
    Sub,
    Addi,
    And,
    Or,
    Xor,
    Slt,
    Mul,
    Beq,
    Bne,
    Blt,
    Jmp,
    Lw,
    Sw,
    Fadd,
    Syscall,
    Halt,
}

impl Opcode {
    pub const ALL: [Opcode; 17] = [
        Opcode::Add,
        Opcode::Sub,
        Opcode::Addi,
        Opcode::And,
        Opcode::Or,
        Opcode::Xor,
        Opcode::Slt,
        Opcode::Mul,
        Opcode::Beq,
        Opcode::Bne,
        Opcode::Blt,
        Opcode::Jmp,
        Opcode::Lw,
        Opcode::Sw,
        Opcode::Fadd,
        Opcode::Syscall,
        Opcode::Halt,
    ];

    pub fn mnemonic(self) -> &'static str {
        match self {
            Opcode::Add => "add",
            Opcode::Sub => "sub",
            Opcode::Addi => "addi",
            Opcode::And => "and",
            Opcode::Or => "or",
            Opcode::Xor => "xor",
            Opcode::Slt => "slt",
            Opcode::Mul => "mul",
            Opcode::Beq => "beq",
            Opcode::Bne => "bne",
            Opcode::Blt => "blt",
            Opcode::Jmp => "jmp",
            Opcode::Lw => "lw",
            Opcode::Sw => "sw",
            Opcode::Fadd => "fadd",
            Opcode::Syscall => "syscall",
            Opcode::Halt => "halt",
        }
    }

    /// Micro-operation classes in execution order. Loads and stores split
    /// into an address calculation followed by the memory access.
    pub fn classes(self) -> &'static [InstrClass] {
        use InstrClass::*;
        match self {
            Opcode::Add | Opcode::Sub | Opcode::Addi => &[AddSub],
            Opcode::And | Opcode::Or | Opcode::Xor | Opcode::Slt | Opcode::Mul => &[OtherIntAlu],
            Opcode::Beq | Opcode::Bne | Opcode::Blt | Opcode::Jmp => &[Branch],
            Opcode::Lw | Opcode::Sw => &[AddrCalc, MemAccess],
            Opcode::Fadd => &[Float],
            Opcode::Syscall => &[Syscall],
            Opcode::Halt => &[Halt],
        }
    }

    pub fn is_branch(self) -> bool {
        matches!(self, Opcode::Beq | Opcode::Bne | Opcode::Blt | Opcode::Jmp)
    }

    pub fn is_conditional_branch(self) -> bool {
        matches!(self, Opcode::Beq | Opcode::Bne | Opcode::Blt)
    }

    pub fn is_memory(self) -> bool {
        matches!(self, Opcode::Lw | Opcode::Sw)
    }
}

impl fmt::Display for Opcode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.mnemonic())
    }
}

impl FromStr for Opcode {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Opcode::ALL
            .iter()
            .copied()
            .find(|op| op.mnemonic() == s)
            .ok_or(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum InstrClass {
    AddSub,
    OtherIntAlu,
    Branch,
    AddrCalc,
    MemAccess,
    Float,
    Syscall,
    Halt,
}

impl InstrClass {
    pub const COUNT: usize = 8;

    pub const ALL: [InstrClass; InstrClass::COUNT] = [
        InstrClass::AddSub,
        InstrClass::OtherIntAlu,
        InstrClass::Branch,
        InstrClass::AddrCalc,
        InstrClass::MemAccess,
        InstrClass::Float,
        InstrClass::Syscall,
        InstrClass::Halt,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            InstrClass::AddSub => "AddSub",
            InstrClass::OtherIntAlu => "OtherIntAlu",
            InstrClass::Branch => "Branch",
            InstrClass::AddrCalc => "AddrCalc",
            InstrClass::MemAccess => "MemAccess",
            InstrClass::Float => "Float",
            InstrClass::Syscall => "Syscall",
            InstrClass::Halt => "Halt",
        }
    }
}

impl fmt::Display for InstrClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A set of instruction classes, stored as a bitmask.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub struct ClassSet(u8);

impl ClassSet {
    pub const EMPTY: ClassSet = ClassSet(0);

    pub fn of(classes: &[InstrClass]) -> ClassSet {
        classes.iter().fold(ClassSet::EMPTY, |s, &c| s.with(c))
    }

    pub fn with(self, class: InstrClass) -> ClassSet {
        ClassSet(self.0 | (1 << class.index()))
    }

    pub fn without(self, class: InstrClass) -> ClassSet {
        ClassSet(self.0 & !(1 << class.index()))
    }

    pub fn contains(self, class: InstrClass) -> bool {
        self.0 & (1 << class.index()) != 0
    }

    pub fn is_subset_of(self, other: ClassSet) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn iter(self) -> impl Iterator<Item = InstrClass> {
        InstrClass::ALL.into_iter().filter(move |&c| self.contains(c))
    }
}

/// The reuse domain and the subsets of it studied by the simulator.
///
/// `O` is the full domain (integer ALU, branches, address calculations).
/// `B`, `A` and `M` keep only branches, add/subtract and address
/// calculations respectively; the `Not*` variants are their complements
/// within `O`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DomainSubset {
    O,
    B,
    A,
    M,
    NotB,
    NotA,
    NotM,
}

impl DomainSubset {
    pub const ALL: [DomainSubset; 7] = [
        DomainSubset::O,
        DomainSubset::B,
        DomainSubset::A,
        DomainSubset::M,
        DomainSubset::NotB,
        DomainSubset::NotA,
        DomainSubset::NotM,
    ];

    pub fn classes(self) -> ClassSet {
        use InstrClass::*;
        let full = ClassSet::of(&[AddSub, OtherIntAlu, Branch, AddrCalc]);
        match self {
            DomainSubset::O => full,
            DomainSubset::B => ClassSet::of(&[Branch]),
            DomainSubset::A => ClassSet::of(&[AddSub]),
            DomainSubset::M => ClassSet::of(&[AddrCalc]),
            DomainSubset::NotB => full.without(Branch),
            DomainSubset::NotA => full.without(AddSub),
            DomainSubset::NotM => full.without(AddrCalc),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            DomainSubset::O => "O",
            DomainSubset::B => "B",
            DomainSubset::A => "A",
            DomainSubset::M => "M",
            DomainSubset::NotB => "NotB",
            DomainSubset::NotA => "NotA",
            DomainSubset::NotM => "NotM",
        }
    }
}

impl fmt::Display for DomainSubset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DomainSubset {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        DomainSubset::ALL
            .iter()
            .copied()
            .find(|d| d.name().eq_ignore_ascii_case(s))
            .ok_or(())
    }
}

pub fn in_domain(class: InstrClass, subset: DomainSubset) -> bool {
    subset.classes().contains(class)
}

/// One decoded instruction at its code address.
///
/// Operand roles: `dest` is the written register; `src1`/`src2` are read.
/// For `lw rd, imm(rs)` the base is `src1`; for `sw rt, imm(rs)` the base is
/// `src1` and the stored value is `src2`. Branch `imm` is a byte offset from
/// `pc + 4`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Instruction {
    pub pc: u32,
    pub opcode: Opcode,
    pub dest: Option<Reg>,
    pub src1: Option<Reg>,
    pub src2: Option<Reg>,
    pub imm: Option<i32>,
}

impl Instruction {
    pub fn classes(&self) -> &'static [InstrClass] {
        self.opcode.classes()
    }

    /// Resolved target of a branch or jump.
    pub fn branch_target(&self) -> Option<u32> {
        if !self.opcode.is_branch() {
            return None;
        }
        let offset = self.imm.unwrap_or(0);
        Some(self.pc.wrapping_add(4).wrapping_add(offset as u32))
    }
}

pub fn classify(instr: &Instruction) -> Vec<InstrClass> {
    instr.classes().to_vec()
}

/// True for a branch or jump whose target lies before its own address.
pub fn is_backward_branch(instr: &Instruction) -> bool {
    instr.branch_target().is_some_and(|t| t < instr.pc)
}

#[derive(Clone, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Program {
    pub instructions: Vec<Instruction>,
    pub labels: BTreeMap<String, u32>,
    pub entry: u32,
    /// Initial data memory, word address to value.
    pub data: BTreeMap<u32, u32>,
}

impl Program {
    pub fn fetch(&self, pc: u32) -> Option<&Instruction> {
        if !pc.is_multiple_of(4) {
            return None;
        }
        self.instructions.get((pc / 4) as usize)
    }

    pub fn code_end(&self) -> u32 {
        (self.instructions.len() as u32) * 4
    }

    pub fn contains_pc(&self, pc: u32) -> bool {
        pc.is_multiple_of(4) && pc < self.code_end()
    }
}
