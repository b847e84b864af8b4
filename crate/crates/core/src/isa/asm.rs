//! Assembly text format.
//!
//! ```text
//! ; comment
//! .entry main                 ; optional, defaults to address 0
//! .word 0x100 42              ; initial data word at a word-aligned address
//! main:   addi r1, r0, 5
//! loop:   add  r3, r3, r1
//!         addi r1, r1, -1
//!         bne  r1, r0, loop   ; label or byte offset from pc+4
//!         lw   r4, 8(r2)
//!         sw   r4, 12(r2)
//!         halt
//! ```
//!
//! Registers are `r0`..`r31`; `f0`..`f31` name the same registers.
//! Instructions are laid out at consecutive word addresses from 0.

use super::{Instruction, Opcode, Program, Reg};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {kind}")]
pub struct ParseError {
    pub line: usize,
    pub kind: ParseErrorKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseErrorKind {
    #[error("syntax error: {0}")]
    Syntax(String),
    #[error("undefined label `{0}`")]
    UndefinedLabel(String),
    #[error("duplicate label `{0}`")]
    DuplicateLabel(String),
    #[error("misaligned data address {0:#x}")]
    MisalignedData(u32),
    #[error("branch target {0:#x} is not an instruction address")]
    BadTarget(i64),
}

fn err(line: usize, kind: ParseErrorKind) -> ParseError {
    ParseError { line, kind }
}

fn syntax(line: usize, msg: impl Into<String>) -> ParseError {
    err(line, ParseErrorKind::Syntax(msg.into()))
}

struct PendingInstr<'a> {
    line: usize,
    pc: u32,
    opcode: Opcode,
    operands: Vec<&'a str>,
}

pub fn parse_program(text: &str) -> Result<Program, ParseError> {
    let mut labels = BTreeMap::new();
    let mut pending = Vec::new();
    let mut data = BTreeMap::new();
    let mut entry_ref: Option<(usize, &str)> = None;

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let mut rest = raw.split(';').next().unwrap_or("").trim();

        while let Some(colon) = rest.find(':') {
            let name = rest[..colon].trim();
            if !is_ident(name) {
                break;
            }
            let pc = (pending.len() as u32) * 4;
            if labels.insert(name.to_string(), pc).is_some() {
                return Err(err(line, ParseErrorKind::DuplicateLabel(name.to_string())));
            }
            rest = rest[colon + 1..].trim();
        }
        if rest.is_empty() {
            continue;
        }

        let (head, tail) = match rest.find(char::is_whitespace) {
            Some(i) => (&rest[..i], rest[i..].trim()),
            None => (rest, ""),
        };

        match head {
            ".word" => {
                let parts: Vec<&str> = tail.split_whitespace().collect();
                if parts.len() != 2 {
                    return Err(syntax(line, ".word expects `addr value`"));
                }
                let addr = parse_number(parts[0]).ok_or_else(|| syntax(line, "bad address"))?;
                let value = parse_number(parts[1]).ok_or_else(|| syntax(line, "bad value"))?;
                let addr = u32::try_from(addr).map_err(|_| syntax(line, "address out of range"))?;
                if addr % 4 != 0 {
                    return Err(err(line, ParseErrorKind::MisalignedData(addr)));
                }
                data.insert(addr, value as u32);
            }
            ".entry" => {
                if tail.is_empty() || tail.contains(char::is_whitespace) {
                    return Err(syntax(line, ".entry expects one label or address"));
                }
                entry_ref = Some((line, tail));
            }
            _ if head.starts_with('.') => {
                return Err(syntax(line, format!("unknown directive `{head}`")));
            }
            _ => {
                let opcode: Opcode = head
                    .to_ascii_lowercase()
                    .parse()
                    .map_err(|_| syntax(line, format!("unknown opcode `{head}`")))?;
                let operands: Vec<&str> = if tail.is_empty() {
                    Vec::new()
                } else {
                    tail.split(',').map(str::trim).collect()
                };
                pending.push(PendingInstr {
                    line,
                    pc: (pending.len() as u32) * 4,
                    opcode,
                    operands,
                });
            }
        }
    }

    let code_end = (pending.len() as u32) * 4;
    let instructions = pending
        .iter()
        .map(|p| build_instruction(p, &labels, code_end))
        .collect::<Result<Vec<_>, _>>()?;

    let entry = match entry_ref {
        None => 0,
        Some((line, name)) => {
            let addr = resolve_address(name, &labels, line)?;
            if addr % 4 != 0 || addr >= code_end as i64 {
                return Err(err(line, ParseErrorKind::BadTarget(addr)));
            }
            addr as u32
        }
    };

    Ok(Program { instructions, labels, entry, data })
}

fn build_instruction(
    p: &PendingInstr<'_>,
    labels: &BTreeMap<String, u32>,
    code_end: u32,
) -> Result<Instruction, ParseError> {
    use Opcode::*;
    let line = p.line;
    let ops = &p.operands;
    let expect = |n: usize| -> Result<(), ParseError> {
        if ops.len() == n {
            Ok(())
        } else {
            Err(syntax(line, format!("`{}` expects {n} operands, got {}", p.opcode, ops.len())))
        }
    };
    let mut instr = Instruction { pc: p.pc, opcode: p.opcode, dest: None, src1: None, src2: None, imm: None };

    match p.opcode {
        Add | Sub | And | Or | Xor | Slt | Mul | Fadd => {
            expect(3)?;
            instr.dest = Some(parse_reg(ops[0], line)?);
            instr.src1 = Some(parse_reg(ops[1], line)?);
            instr.src2 = Some(parse_reg(ops[2], line)?);
        }
        Addi => {
            expect(3)?;
            instr.dest = Some(parse_reg(ops[0], line)?);
            instr.src1 = Some(parse_reg(ops[1], line)?);
            instr.imm = Some(parse_imm(ops[2], line)?);
        }
        Beq | Bne | Blt => {
            expect(3)?;
            instr.src1 = Some(parse_reg(ops[0], line)?);
            instr.src2 = Some(parse_reg(ops[1], line)?);
            instr.imm = Some(branch_offset(ops[2], p.pc, labels, code_end, line)?);
        }
        Jmp => {
            expect(1)?;
            instr.imm = Some(branch_offset(ops[0], p.pc, labels, code_end, line)?);
        }
        Lw | Sw => {
            expect(2)?;
            let reg = parse_reg(ops[0], line)?;
            let (offset, base) = parse_mem_operand(ops[1], line)?;
            instr.src1 = Some(base);
            instr.imm = Some(offset);
            if p.opcode == Lw {
                instr.dest = Some(reg);
            } else {
                instr.src2 = Some(reg);
            }
        }
        Syscall | Halt => expect(0)?,
    }
    Ok(instr)
}

fn branch_offset(
    operand: &str,
    pc: u32,
    labels: &BTreeMap<String, u32>,
    code_end: u32,
    line: usize,
) -> Result<i32, ParseError> {
    let next = pc as i64 + 4;
    let (target, offset) = if is_ident(operand) {
        let t = *labels
            .get(operand)
            .ok_or_else(|| err(line, ParseErrorKind::UndefinedLabel(operand.to_string())))?
            as i64;
        (t, t - next)
    } else {
        let off = parse_number(operand).ok_or_else(|| syntax(line, format!("bad branch target `{operand}`")))?;
        (next + off, off)
    };
    if target < 0 || target >= code_end as i64 || target % 4 != 0 {
        return Err(err(line, ParseErrorKind::BadTarget(target)));
    }
    i32::try_from(offset).map_err(|_| err(line, ParseErrorKind::BadTarget(target)))
}

fn resolve_address(operand: &str, labels: &BTreeMap<String, u32>, line: usize) -> Result<i64, ParseError> {
    if is_ident(operand) {
        labels
            .get(operand)
            .map(|&a| a as i64)
            .ok_or_else(|| err(line, ParseErrorKind::UndefinedLabel(operand.to_string())))
    } else {
        parse_number(operand).ok_or_else(|| syntax(line, format!("bad address `{operand}`")))
    }
}

fn parse_mem_operand(s: &str, line: usize) -> Result<(i32, Reg), ParseError> {
    let open = s.find('(').ok_or_else(|| syntax(line, "expected `imm(reg)`"))?;
    let close = s.rfind(')').filter(|&c| c > open && s[c + 1..].trim().is_empty());
    let close = close.ok_or_else(|| syntax(line, "expected `imm(reg)`"))?;
    let imm_text = s[..open].trim();
    let offset = if imm_text.is_empty() { 0 } else { parse_imm(imm_text, line)? };
    let base = parse_reg(s[open + 1..close].trim(), line)?;
    Ok((offset, base))
}

fn parse_reg(s: &str, line: usize) -> Result<Reg, ParseError> {
    let digits = s.strip_prefix('r').or_else(|| s.strip_prefix('f'));
    digits
        .filter(|d| !d.is_empty() && d.bytes().all(|b| b.is_ascii_digit()))
        .and_then(|d| d.parse::<u8>().ok())
        .and_then(Reg::new)
        .ok_or_else(|| syntax(line, format!("bad register `{s}`")))
}

fn parse_imm(s: &str, line: usize) -> Result<i32, ParseError> {
    parse_number(s)
        .and_then(|v| i32::try_from(v).ok().or_else(|| u32::try_from(v).ok().map(|u| u as i32)))
        .ok_or_else(|| syntax(line, format!("bad immediate `{s}`")))
}

fn parse_number(s: &str) -> Option<i64> {
    let (neg, body) = match s.strip_prefix('-') {
        Some(b) => (true, b),
        None => (false, s.strip_prefix('+').unwrap_or(s)),
    };
    let value = if let Some(hex) = body.strip_prefix("0x").or_else(|| body.strip_prefix("0X")) {
        i64::from_str_radix(hex, 16).ok()?
    } else {
        if body.is_empty() || !body.bytes().all(|b| b.is_ascii_digit()) {
            return None;
        }
        body.parse::<i64>().ok()?
    };
    if value > u32::MAX as i64 {
        return None;
    }
    Some(if neg { -value } else { value })
}

fn is_ident(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '.')
        && parse_reg_name(s).is_none()
}

// Register names are not labels, so `bne r1, r0, r2` is a syntax error
// rather than a reference to a label called `r2`.
fn parse_reg_name(s: &str) -> Option<Reg> {
    parse_reg(s, 0).ok()
}

fn format_instruction(i: &Instruction) -> String {
    use Opcode::*;
    let r = |r: Option<Reg>| r.map(|r| r.to_string()).unwrap_or_default();
    let imm = i.imm.unwrap_or(0);
    match i.opcode {
        Add | Sub | And | Or | Xor | Slt | Mul | Fadd => {
            format!("{} {}, {}, {}", i.opcode, r(i.dest), r(i.src1), r(i.src2))
        }
        Addi => format!("addi {}, {}, {}", r(i.dest), r(i.src1), imm),
        Beq | Bne | Blt => format!("{} {}, {}, {}", i.opcode, r(i.src1), r(i.src2), imm),
        Jmp => format!("jmp {imm}"),
        Lw => format!("lw {}, {}({})", r(i.dest), imm, r(i.src1)),
        Sw => format!("sw {}, {}({})", r(i.src2), imm, r(i.src1)),
        Syscall | Halt => i.opcode.to_string(),
    }
}

impl std::fmt::Display for Instruction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&format_instruction(self))
    }
}

/// Debug printer: emits text that parses back to an identical `Program`.
pub fn unparse(program: &Program) -> String {
    let mut out = String::new();
    let mut by_addr: BTreeMap<u32, Vec<&str>> = BTreeMap::new();
    for (name, &addr) in &program.labels {
        by_addr.entry(addr).or_default().push(name);
    }
    if program.entry != 0 {
        let _ = writeln!(out, ".entry {}", program.entry);
    }
    for (addr, value) in &program.data {
        let _ = writeln!(out, ".word {addr:#x} {value:#x}");
    }
    for instr in &program.instructions {
        for name in by_addr.get(&instr.pc).into_iter().flatten() {
            let _ = writeln!(out, "{name}:");
        }
        let _ = writeln!(out, "    {}", format_instruction(instr));
    }
    for name in by_addr.range(program.code_end()..).flat_map(|(_, v)| v) {
        let _ = writeln!(out, "{name}:");
    }
    out
}
