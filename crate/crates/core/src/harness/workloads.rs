use super::HarnessError;
use crate::isa::{parse_program, Program, Reg};
use crate::machine::{run_reference, RunOutcome};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt::{self, Write as _};
use std::str::FromStr;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Tag {
    LoopHeavy,
    Loopless,
    BranchHeavy,
    MemoryHeavy,
    Redundant,
    Varying,
}

impl Tag {
    pub const ALL: [Tag; 6] = [Tag::LoopHeavy, Tag::Loopless, Tag::BranchHeavy, Tag::MemoryHeavy, Tag::Redundant, Tag::Varying];

    pub fn name(self) -> &'static str {
        match self {
            Tag::LoopHeavy => "loop-heavy",
            Tag::Loopless => "loopless",
            Tag::BranchHeavy => "branch-heavy",
            Tag::MemoryHeavy => "memory-heavy",
            Tag::Redundant => "redundant",
            Tag::Varying => "varying",
        }
    }
}

impl fmt::Display for Tag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Tag {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Tag, HarnessError> {
        let key = s.trim().to_ascii_lowercase().replace('_', "-");
        // "branchy" is accepted as the builtin kernel's name for branch-heavy
        let key = if key == "branchy" { "branch-heavy".to_string() } else { key };
        Tag::ALL.into_iter().find(|t| t.name() == key).ok_or_else(|| HarnessError::UnknownKind(s.to_string()))
    }
}

#[derive(Clone, Debug)]
pub struct Workload {
    pub name: String,
    pub program: Program,
    pub tags: BTreeSet<Tag>,
    /// Register values the program must end with.
    pub expected_final: Option<BTreeMap<Reg, u32>>,
    /// Micro-ops within which the program halts.
    pub op_bound: u64,
}

impl Workload {
    fn build(name: &str, source: &str, tags: &[Tag], expected: Option<BTreeMap<Reg, u32>>, op_bound: u64) -> Workload {
        let program = parse_program(source).unwrap_or_else(|e| panic!("{name}: {e}"));
        Workload { name: name.to_string(), program, tags: tags.iter().copied().collect(), expected_final: expected, op_bound }
    }

    /// Runs the reference interpreter and compares against `expected_final`.
    pub fn check(&self) -> Result<(), HarnessError> {
        let run = run_reference(&self.program, self.op_bound, Some(0))
            .map_err(|f| HarnessError::WorkloadCheck(self.name.clone(), f.to_string()))?;
        if run.outcome != RunOutcome::Halted {
            return Err(HarnessError::WorkloadCheck(self.name.clone(), format!("did not halt within {} ops", self.op_bound)));
        }
        for (r, &want) in self.expected_final.iter().flatten() {
            let got = run.state.reg(*r);
            if got != want {
                return Err(HarnessError::WorkloadCheck(self.name.clone(), format!("{r} = {got}, expected {want}")));
            }
        }
        Ok(())
    }
}

fn reg(i: u8) -> Reg {
    Reg::new(i).expect("register index")
}

fn expect(pairs: &[(u8, u32)]) -> Option<BTreeMap<Reg, u32>> {
    Some(pairs.iter().map(|&(r, v)| (reg(r), v)).collect())
}

pub const BUILTIN_NAMES: [&str; 6] =
    ["redundant_loop", "varying_loop", "loopless_straightline", "branchy", "pointer_chase", "mixed"];

/// The built-in kernel suite, each checked against the reference
/// interpreter.
pub fn builtin_workloads() -> Vec<Workload> {
    let suite = vec![
        redundant_loop(1000),
        varying_loop(2000),
        loopless_straightline(2000),
        branchy(1000),
        pointer_chase(1024, 3),
        mixed(1000),
    ];
    for w in &suite {
        w.check().unwrap_or_else(|e| panic!("built-in workload: {e}"));
    }
    suite
}

pub fn builtin(name: &str) -> Result<Workload, HarnessError> {
    builtin_workloads()
        .into_iter()
        .find(|w| w.name.eq_ignore_ascii_case(name))
        .ok_or_else(|| HarnessError::UnknownWorkload(name.to_string()))
}

pub const REDUNDANT_STEP: u32 = 3;

/// `n` passes over a body whose inputs never change: four short dependent
/// chains, each computed from constants into one register.
pub fn redundant_loop(n: u32) -> Workload {
    assert!(n > 0);
    let src = format!(
        "    addi r1, r0, {n}
    addi r10, r0, 0
outer:
    sw   r0, 512(r0)
    addi r3, r0, 7
    add  r3, r3, r3
    addi r3, r3, 11
    add  r3, r3, r3
    addi r4, r0, 3
    mul  r4, r4, r4
    addi r4, r4, -1
    and  r4, r4, r4
    addi r5, r0, 100
    add  r5, r5, r5
    addi r5, r5, -50
    or   r5, r5, r5
    addi r6, r0, 9
    add  r6, r6, r6
    xor  r6, r6, r0
    addi r6, r6, 5
    addi r10, r10, {REDUNDANT_STEP}
    addi r1, r1, -1
    bne  r1, r0, outer
    halt
"
    );
    let expected = expect(&[(1, 0), (3, 50), (4, 8), (5, 150), (6, 23), (10, n.wrapping_mul(REDUNDANT_STEP))]);
    Workload::build("redundant_loop", &src, &[Tag::LoopHeavy, Tag::Redundant], expected, 2 + 21 * n as u64 + 1)
}

pub const VARYING_BASE: u32 = 4096;

/// Array element `i` of the varying loop: mostly 5, with every eighth
/// element different.
pub fn varying_value(i: u32) -> u32 {
    if i % 8 == 7 {
        i
    } else {
        5
    }
}

/// Sums `2 * (a[i] + 3)` over an array. The chain after each load depends
/// on the loaded value, which usually repeats but sometimes does not.
pub fn varying_loop(n: u32) -> Workload {
    assert!(n > 0);
    let mut src = String::new();
    for i in 0..n {
        let _ = writeln!(src, ".word {} {}", VARYING_BASE + 4 * i, varying_value(i));
    }
    let _ = write!(
        src,
        "    addi r1, r0, {n}
    addi r2, r0, {VARYING_BASE}
loop:
    lw   r3, 0(r2)
    addi r4, r3, 3
    add  r4, r4, r4
    add  r10, r10, r4
    addi r2, r2, 4
    addi r1, r1, -1
    bne  r1, r0, loop
    halt
"
    );
    let sum = (0..n).fold(0u32, |acc, i| acc.wrapping_add(2 * (varying_value(i) + 3)));
    let expected = expect(&[(1, 0), (2, VARYING_BASE + 4 * n), (10, sum)]);
    Workload::build("varying_loop", &src, &[Tag::LoopHeavy, Tag::Varying, Tag::MemoryHeavy], expected, 2 + 8 * n as u64 + 1)
}

/// `blocks` copies of a small block with one forward branch each; no
/// instruction executes twice.
pub fn loopless_straightline(blocks: u32) -> Workload {
    let mut src = String::new();
    for k in 0..blocks {
        let r = |off: u32| 1 + (k + off) % 15;
        let (a, b, c, d, e) = (r(0), r(3), r(7), r(10), r(12));
        let _ = write!(
            src,
            "    addi r{a}, r0, {imm}
    add  r{b}, r{a}, r{c}
    lw   r{d}, {load}(r0)
    beq  r{b}, r0, s{k}
    xor  r{e}, r{b}, r{d}
s{k}:
    sw   r{e}, {store}(r0)
",
            imm = k % 97,
            load = 4096 + 4 * (k % 256),
            store = 8192 + 4 * (k % 256),
        );
    }
    src.push_str("    halt\n");
    Workload::build("loopless_straightline", &src, &[Tag::Loopless], None, 8 * blocks as u64 + 1)
}

pub const LCG_MUL: u32 = 1103515245;
pub const LCG_ADD: u32 = 12345;

/// Branch counts the `branchy` kernel ends with, from the same generator.
pub fn branchy_counts(n: u32, seed: u32) -> (u32, u32, u32) {
    let mut x = seed;
    let (mut a, mut b, mut c) = (0, 0, 0);
    for _ in 0..n {
        x = x.wrapping_mul(LCG_MUL).wrapping_add(LCG_ADD);
        if x & 0x100 != 0 {
            a += 1;
        }
        if x & 0x1000 == 0 {
            b += 1;
        }
        if (x as i32) < 0 {
            c += 1;
        }
    }
    (a, b, c)
}

/// Data-dependent branches on bits of a linear congruential sequence.
pub fn branchy(n: u32) -> Workload {
    assert!(n > 0);
    let seed = 12345;
    let src = format!(
        "    addi r1, r0, {n}
    addi r2, r0, {seed}
    addi r7, r0, {LCG_MUL}
    addi r8, r0, {LCG_ADD}
loop:
    mul  r2, r2, r7
    add  r2, r2, r8
    addi r9, r0, 0x100
    and  r3, r2, r9
    beq  r3, r0, skip1
    addi r10, r10, 1
skip1:
    addi r9, r0, 0x1000
    and  r3, r2, r9
    bne  r3, r0, skip2
    addi r11, r11, 1
skip2:
    slt  r4, r2, r0
    beq  r4, r0, skip3
    addi r12, r12, 1
skip3:
    addi r1, r1, -1
    bne  r1, r0, loop
    halt
"
    );
    let (a, b, c) = branchy_counts(n, seed);
    let expected = expect(&[(1, 0), (10, a), (11, b), (12, c)]);
    Workload::build("branchy", &src, &[Tag::LoopHeavy, Tag::BranchHeavy], expected, 4 + 16 * n as u64 + 1)
}

pub const CHASE_BASE: u32 = 0x10000;
const CHASE_STRIDE: u32 = 64;
const CHASE_STEP: u32 = 389;

fn chase_node(nodes: u32, j: u32) -> u32 {
    (j % nodes) * CHASE_STEP % nodes
}

/// Walks a linked list of `nodes` nodes, one per 64-byte line in a
/// scattered order, `passes` times, summing the node values.
pub fn pointer_chase(nodes: u32, passes: u32) -> Workload {
    assert!(nodes.is_power_of_two() && nodes > 1 && passes > 0);
    let addr = |p: u32| CHASE_BASE + p * CHASE_STRIDE;
    let value = |p: u32| p * 7 + 1;
    let mut src = String::new();
    for j in 0..nodes {
        let p = chase_node(nodes, j);
        let next = chase_node(nodes, j + 1);
        let _ = writeln!(src, ".word {} {}", addr(p), addr(next));
        let _ = writeln!(src, ".word {} {}", addr(p) + 4, value(p));
    }
    let steps = nodes * passes;
    let _ = write!(
        src,
        "    addi r1, r0, {steps}
    addi r2, r0, {start}
loop:
    lw   r3, 4(r2)
    add  r10, r10, r3
    lw   r2, 0(r2)
    addi r1, r1, -1
    bne  r1, r0, loop
    halt
",
        start = addr(chase_node(nodes, 0)),
    );
    let sum = (0..steps).fold(0u32, |acc, j| acc.wrapping_add(value(chase_node(nodes, j))));
    let expected = expect(&[(1, 0), (2, addr(chase_node(nodes, steps))), (10, sum)]);
    Workload::build("pointer_chase", &src, &[Tag::LoopHeavy, Tag::MemoryHeavy], expected, 2 + 7 * steps as u64 + 1)
}

/// A loop touching every instruction class, with roughly a third memory
/// operations, a tenth branches and half integer arithmetic.
pub fn mixed(n: u32) -> Workload {
    assert!(n > 0);
    let mut src = String::new();
    for i in 0..256u32 {
        let _ = writeln!(src, ".word {} {}", 4096 + 4 * i, i * 3 % 17);
    }
    let _ = write!(
        src,
        "    addi r1, r0, {n}
    addi r2, r0, 4096
    addi r20, r0, 0x3f800000
    addi r21, r0, 15
    addi r22, r0, 1023
    addi r23, r0, 4096
loop:
    lw   r3, 0(r2)
    addi r4, r3, 1
    mul  r5, r4, r4
    add  r6, r5, r3
    sw   r6, 1024(r2)
    lw   r7, 4(r2)
    xor  r8, r7, r6
    fadd f9, f9, f20
    and  r11, r1, r21
    bne  r11, r0, nosys
    syscall
nosys:
    addi r12, r12, 4
    and  r12, r12, r22
    add  r2, r23, r12
    addi r1, r1, -1
    bne  r1, r0, loop
    halt
"
    );
    // n additions of 1.0 in single precision are exact while n < 2^24
    let expected = expect(&[(1, 0), (9, (n as f32).to_bits())]);
    Workload::build("mixed", &src, &[Tag::LoopHeavy, Tag::MemoryHeavy], expected, 6 + 19 * n as u64 + 1)
}
