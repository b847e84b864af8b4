//! Seeded random workloads.

use super::workloads::{Tag, Workload};
use super::HarnessError;
use crate::isa::{parse_program, Reg};
use crate::machine::run_reference;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;
use std::fmt::Write as _;

pub const MAX_SIZE: u32 = 4096;

const DATA_BASE: u32 = 4096;
const DATA_WORDS: u32 = 256;
// registers the random body may write; r28..r31 hold loop state
const SCRATCH: u8 = 15;
const COUNTER: &str = "r31";

/// Builds a random program of the given kind. `size` is the number of body
/// instructions, between 1 and [`MAX_SIZE`]. The same arguments always
/// give the same program.
pub fn generate(kind: &str, size: u32, seed: u64) -> Result<Workload, HarnessError> {
    let tag: Tag = kind.parse()?;
    if size == 0 || size > MAX_SIZE {
        return Err(HarnessError::GenerateSize(size));
    }
    let mut g = Gen { rng: ChaCha8Rng::seed_from_u64(seed), src: String::new(), labels: 0 };
    let (iterations, body_ops) = match tag {
        Tag::Loopless => {
            g.body(size, Mix::default());
            (1, 2 * size as u64)
        }
        Tag::LoopHeavy => g.looped(size, Mix::default()),
        Tag::BranchHeavy => g.looped(size, Mix { branch: 40, memory: 10, ..Mix::default() }),
        Tag::MemoryHeavy => g.looped(size, Mix { branch: 5, memory: 60, ..Mix::default() }),
        Tag::Redundant => g.looped(size, Mix { branch: 5, memory: 10, constant_only: true }),
        Tag::Varying => {
            g.data(true);
            g.varying(size)
        }
    };
    if !matches!(tag, Tag::Varying) {
        g.data(false);
    }
    g.src.push_str("    halt\n");
    let op_bound = 8 + iterations * (body_ops + 4) + 1;

    let name = format!("gen-{}-{}-{}", tag.name(), size, seed);
    let program = parse_program(&g.src).map_err(|e| HarnessError::Generated(name.clone(), e.to_string()))?;
    let run = run_reference(&program, op_bound, Some(0)).map_err(|f| HarnessError::Generated(name.clone(), f.to_string()))?;
    if !run.state.halted {
        return Err(HarnessError::Generated(name, format!("did not halt within {op_bound} ops")));
    }
    let expected: BTreeMap<Reg, u32> = (0..32u8)
        .filter_map(|i| Reg::new(i).map(|r| (r, run.state.reg(r))))
        .filter(|&(_, v)| v != 0)
        .collect();
    Ok(Workload {
        name,
        program,
        tags: [tag].into_iter().collect(),
        expected_final: Some(expected),
        op_bound,
    })
}

#[derive(Clone, Copy)]
struct Mix {
    /// Percent of body slots that open a forward branch.
    branch: u32,
    /// Percent of body slots that are loads or stores.
    memory: u32,
    /// Draw sources only from r0 and the instruction's own destination, so
    /// every iteration recomputes the same values.
    constant_only: bool,
}

impl Default for Mix {
    fn default() -> Self {
        Mix { branch: 12, memory: 25, constant_only: false }
    }
}

struct Gen {
    rng: ChaCha8Rng,
    src: String,
    labels: u32,
}

impl Gen {
    fn scratch(&mut self) -> u8 {
        self.rng.gen_range(1..=SCRATCH)
    }

    fn source(&mut self) -> u8 {
        self.rng.gen_range(0..=SCRATCH)
    }

    fn data_addr(&mut self) -> u32 {
        DATA_BASE + 4 * self.rng.gen_range(0..DATA_WORDS)
    }

    fn data(&mut self, repeating: bool) {
        for i in 0..DATA_WORDS {
            let v = if repeating {
                if self.rng.gen_ratio(7, 8) { 5 } else { self.rng.gen_range(0..1000) }
            } else {
                self.rng.gen_range(0..1000)
            };
            let _ = writeln!(self.src, ".word {} {}", DATA_BASE + 4 * i, v);
        }
    }

    /// `n` random instructions. Forward branches land inside the body.
    fn body(&mut self, n: u32, mix: Mix) {
        let mut open: Vec<(u32, String)> = Vec::new();
        for k in 0..n {
            while let Some(pos) = open.iter().position(|(at, _)| *at == k) {
                let (_, label) = open.remove(pos);
                let _ = writeln!(self.src, "{label}:");
            }
            let roll = self.rng.gen_range(0..100);
            let remaining = n - k;
            if roll < mix.branch && remaining > 1 {
                let label = format!("skip{}", self.labels);
                self.labels += 1;
                let skip = self.rng.gen_range(1..remaining.min(4));
                let op = ["beq", "bne", "blt"].choose(&mut self.rng).expect("branch op");
                let (a, b) = (self.source(), self.source());
                let _ = writeln!(self.src, "    {op} r{a}, r{b}, {label}");
                open.push((k + 1 + skip, label));
            } else if roll < mix.branch + mix.memory {
                let addr = self.data_addr();
                let r = self.scratch();
                if self.rng.gen_bool(0.6) {
                    let _ = writeln!(self.src, "    lw   r{r}, {addr}(r0)");
                } else {
                    let _ = writeln!(self.src, "    sw   r{r}, {addr}(r0)");
                }
            } else {
                self.alu(mix.constant_only);
            }
        }
        for (_, label) in open {
            let _ = writeln!(self.src, "{label}:");
        }
    }

    fn alu(&mut self, constant_only: bool) {
        let d = self.scratch();
        let (a, b) = if constant_only {
            (if self.rng.gen_bool(0.5) { d } else { 0 }, 0)
        } else {
            (self.source(), self.source())
        };
        match self.rng.gen_range(0..10) {
            0..=3 => {
                let imm: i32 = self.rng.gen_range(-64..64);
                let _ = writeln!(self.src, "    addi r{d}, r{a}, {imm}");
            }
            4 => {
                let _ = writeln!(self.src, "    mul  r{d}, r{a}, r{b}");
            }
            5 => {
                let _ = writeln!(self.src, "    fadd f{d}, f{a}, f{b}");
            }
            _ => {
                let op = ["add", "sub", "and", "or", "xor", "slt"][self.rng.gen_range(0..6)];
                let _ = writeln!(self.src, "    {op:<4} r{d}, r{a}, r{b}");
            }
        }
    }

    /// A counted loop around a random body; returns (iterations, body ops).
    fn looped(&mut self, size: u32, mix: Mix) -> (u64, u64) {
        let iterations = self.rng.gen_range(8..=32u64);
        let _ = writeln!(self.src, "    addi {COUNTER}, r0, {iterations}\nloop:");
        self.body(size, mix);
        let _ = writeln!(self.src, "    addi {COUNTER}, {COUNTER}, -1\n    bne  {COUNTER}, r0, loop");
        (iterations, 2 * size as u64)
    }

    /// Walks the data array through a short chain that depends on each
    /// loaded value.
    fn varying(&mut self, size: u32) -> (u64, u64) {
        let iterations = size.min(DATA_WORDS) as u64;
        let _ = writeln!(
            self.src,
            "    addi {COUNTER}, r0, {iterations}\n    addi r30, r0, {DATA_BASE}\nloop:\n    lw   r3, 0(r30)\n    addi r4, r3, 3\n    add  r4, r4, r4\n    add  r10, r10, r4\n    addi r30, r30, 4\n    addi {COUNTER}, {COUNTER}, -1\n    bne  {COUNTER}, r0, loop"
        );
        (iterations, 8)
    }
}
