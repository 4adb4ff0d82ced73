//! Two-pass assembler for the register-register ISA.
//!
//! Grammar: one instruction per line, `;` comments, labels as `name:`,
//! directives `.data`, `.text`, `.word <label> <decimal|0x-hex>`,
//! `.entry <label>`, and `.init <addr> <value>` for raw data-memory
//! initialization (emitted by the disassembler).
//!
//! Constants and label addresses live in a pool of pre-initialized data
//! words starting at `pool_base` in the protected region. `LOADK rd, <label>`
//! expands to a shift/add sequence that builds the pool-slot address in `rd`
//! (reading the constant one from r30) followed by a single `LD.P` from the
//! slot. When any `LOADK` is present the assembler emits a two-instruction
//! prologue that initializes r30 from data word 0.

use alloc::borrow::ToOwned;
use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use super::{BinaryImage, Instruction, Opcode, REG_ONE};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AsmOptions {
    /// Physical address width `n` of the target memory; data_init addresses
    /// are partition-visible, so the protected-region bit position depends
    /// on it.
    pub address_bits: u8,
    /// Protected-region word offset of the first pool slot. The default
    /// sits just above the 256-word hardware stack region.
    pub pool_base: u32,
}

impl Default for AsmOptions {
    fn default() -> Self {
        AsmOptions { address_bits: 16, pool_base: 257 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AsmError {
    Syntax { line: usize, msg: String },
    UndefinedLabel { line: usize, name: String },
    DuplicateLabel { line: usize, name: String },
    RegisterRange { line: usize },
    /// r30 is reserved for the assembler's constant one.
    ReservedRegister { line: usize },
    /// `.entry` must name the first instruction of the program.
    EntryNotFirst { line: usize, name: String },
    EmptyProgram,
}

impl AsmError {
    pub fn line(&self) -> Option<usize> {
        match self {
            AsmError::Syntax { line, .. }
            | AsmError::UndefinedLabel { line, .. }
            | AsmError::DuplicateLabel { line, .. }
            | AsmError::RegisterRange { line }
            | AsmError::ReservedRegister { line }
            | AsmError::EntryNotFirst { line, .. } => Some(*line),
            AsmError::EmptyProgram => None,
        }
    }
}

impl fmt::Display for AsmError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AsmError::Syntax { line, msg } => write!(f, "line {line}: {msg}"),
            AsmError::UndefinedLabel { line, name } => write!(f, "line {line}: undefined label `{name}`"),
            AsmError::DuplicateLabel { line, name } => write!(f, "line {line}: duplicate label `{name}`"),
            AsmError::RegisterRange { line } => write!(f, "line {line}: register index out of range (r0-r31)"),
            AsmError::ReservedRegister { line } => {
                write!(f, "line {line}: r30 is reserved for the assembler constant one")
            }
            AsmError::EntryNotFirst { line, name } => write!(
                f,
                "line {line}: `.entry {name}` must name the first instruction (execution starts at word 0)"
            ),
            AsmError::EmptyProgram => write!(f, "program contains no instructions"),
        }
    }
}

impl core::error::Error for AsmError {}

enum Stmt {
    Instr { instr: Instruction },
    LoadK { line: usize, rd: u8, label: String },
    Label { line: usize, name: String },
}

/// Assemble with default options (n = 16, pool at word 257).
pub fn assemble(source: &str) -> Result<BinaryImage, AsmError> {
    assemble_with(source, &AsmOptions::default())
}

pub fn assemble_with(source: &str, opts: &AsmOptions) -> Result<BinaryImage, AsmError> {
    let mut stmts: Vec<Stmt> = Vec::new();
    let mut words_directives: Vec<(usize, String, u32)> = Vec::new();
    let mut raw_inits: Vec<(u32, u32)> = Vec::new();
    let mut entry: Option<(usize, String)> = None;

    for (idx, raw_line) in source.lines().enumerate() {
        let line_no = idx + 1;
        let mut text = raw_line;
        if let Some(pos) = text.find(';') {
            text = &text[..pos];
        }
        let mut text = text.trim();
        if text.is_empty() {
            continue;
        }
        // Leading `name:` labels, possibly followed by an instruction.
        while let Some(colon) = text.find(':') {
            let (head, rest) = text.split_at(colon);
            let name = head.trim();
            if !is_ident(name) {
                return Err(AsmError::Syntax {
                    line: line_no,
                    msg: format!("invalid label name `{name}`"),
                });
            }
            stmts.push(Stmt::Label { line: line_no, name: name.to_owned() });
            text = rest[1..].trim();
            if text.is_empty() {
                break;
            }
        }
        if text.is_empty() {
            continue;
        }
        if let Some(directive) = text.strip_prefix('.') {
            let mut parts = directive.split_whitespace();
            let keyword = parts.next().unwrap_or("");
            match keyword {
                "data" | "text" => {
                    // Sections are organizational only; the pool layout is
                    // driven by the .word declarations themselves.
                    if parts.next().is_some() {
                        return Err(AsmError::Syntax {
                            line: line_no,
                            msg: format!(".{keyword} takes no arguments"),
                        });
                    }
                }
                "word" => {
                    let name = parts.next().ok_or_else(|| AsmError::Syntax {
                        line: line_no,
                        msg: ".word requires a label and a value".to_owned(),
                    })?;
                    let value = parts.next().ok_or_else(|| AsmError::Syntax {
                        line: line_no,
                        msg: ".word requires a value".to_owned(),
                    })?;
                    if parts.next().is_some() {
                        return Err(AsmError::Syntax {
                            line: line_no,
                            msg: ".word takes exactly two arguments".to_owned(),
                        });
                    }
                    if !is_ident(name) {
                        return Err(AsmError::Syntax {
                            line: line_no,
                            msg: format!("invalid .word label `{name}`"),
                        });
                    }
                    let value = parse_number(value).ok_or_else(|| AsmError::Syntax {
                        line: line_no,
                        msg: format!("invalid .word value `{value}`"),
                    })?;
                    if words_directives.iter().any(|(_, n, _)| n == name) {
                        return Err(AsmError::DuplicateLabel { line: line_no, name: name.to_owned() });
                    }
                    words_directives.push((line_no, name.to_owned(), value));
                }
                "entry" => {
                    let name = parts.next().ok_or_else(|| AsmError::Syntax {
                        line: line_no,
                        msg: ".entry requires a label".to_owned(),
                    })?;
                    if entry.is_some() {
                        return Err(AsmError::Syntax {
                            line: line_no,
                            msg: "duplicate .entry directive".to_owned(),
                        });
                    }
                    entry = Some((line_no, name.to_owned()));
                }
                "init" => {
                    let addr = parts.next().and_then(parse_number);
                    let value = parts.next().and_then(parse_number);
                    match (addr, value) {
                        (Some(a), Some(v)) if parts.next().is_none() => raw_inits.push((a, v)),
                        _ => {
                            return Err(AsmError::Syntax {
                                line: line_no,
                                msg: ".init requires an address and a value".to_owned(),
                            })
                        }
                    }
                }
                other => {
                    return Err(AsmError::Syntax {
                        line: line_no,
                        msg: format!("unknown directive `.{other}`"),
                    })
                }
            }
            continue;
        }
        stmts.push(parse_instruction(line_no, text)?);
    }

    // Pool layout: .word slots in declaration order, then auto slots for
    // code labels referenced by LOADK.
    let mut pool_slot: BTreeMap<String, u32> = BTreeMap::new();
    let mut pool_order: Vec<String> = Vec::new();
    for (_, name, _) in &words_directives {
        pool_slot.insert(name.clone(), pool_order.len() as u32);
        pool_order.push(name.clone());
    }
    let mut uses_loadk = false;
    for stmt in &stmts {
        if let Stmt::LoadK { label, .. } = stmt {
            uses_loadk = true;
            if !pool_slot.contains_key(label) {
                pool_slot.insert(label.clone(), pool_order.len() as u32);
                pool_order.push(label.clone());
            }
        }
    }

    // Layout pass: assign word indices. The implicit prologue occupies
    // words 0-1 when LOADK is used.
    let prologue_len: u32 = if uses_loadk { 2 } else { 0 };
    let mut labels: BTreeMap<String, (usize, u32)> = BTreeMap::new();
    let mut cursor = prologue_len;
    for stmt in &stmts {
        match stmt {
            Stmt::Label { line, name } => {
                if labels.contains_key(name) {
                    return Err(AsmError::DuplicateLabel { line: *line, name: name.clone() });
                }
                labels.insert(name.clone(), (*line, cursor));
            }
            Stmt::Instr { .. } => cursor += 1,
            Stmt::LoadK { label, .. } => {
                let slot = pool_slot[label];
                cursor += loadk_len(opts.pool_base + slot);
            }
        }
    }
    if cursor == prologue_len {
        return Err(AsmError::EmptyProgram);
    }

    // Resolve pool values: .word literals, then code-label word indices.
    let mut pool_values: Vec<u32> = Vec::with_capacity(pool_order.len());
    for name in &pool_order {
        if let Some((_, _, v)) = words_directives.iter().find(|(_, n, _)| n == name) {
            pool_values.push(*v);
        } else {
            // Auto slot: the label must be defined in the text section.
            let loadk_line = stmts
                .iter()
                .find_map(|s| match s {
                    Stmt::LoadK { line, label, .. } if label == name => Some(*line),
                    _ => None,
                })
                .unwrap_or(0);
            let (_, index) = labels
                .get(name)
                .ok_or_else(|| AsmError::UndefinedLabel { line: loadk_line, name: name.clone() })?;
            pool_values.push(*index);
        }
    }

    if let Some((line, name)) = &entry {
        match labels.get(name) {
            None => return Err(AsmError::UndefinedLabel { line: *line, name: name.clone() }),
            Some((_, index)) if *index != prologue_len => {
                return Err(AsmError::EntryNotFirst { line: *line, name: name.clone() })
            }
            Some(_) => {}
        }
    }

    // Emission pass.
    let mut words: Vec<u32> = Vec::with_capacity(cursor as usize);
    if uses_loadk {
        words.push(Instruction::new(Opcode::Xor, REG_ONE, REG_ONE, REG_ONE).encode());
        words.push(Instruction::new(Opcode::LdP, REG_ONE, REG_ONE, 0).encode());
    }
    for stmt in &stmts {
        match stmt {
            Stmt::Label { .. } => {}
            Stmt::Instr { instr, .. } => words.push(instr.encode()),
            Stmt::LoadK { rd, label, .. } => {
                emit_loadk(&mut words, *rd, opts.pool_base + pool_slot[label]);
            }
        }
    }
    debug_assert_eq!(words.len() as u32, cursor);

    let protected = |offset: u32| (1u32 << (opts.address_bits - 2)) | offset;
    let mut data_init: Vec<(u32, u32)> = Vec::new();
    if uses_loadk {
        data_init.push((protected(0), 1));
    }
    for (i, value) in pool_values.iter().enumerate() {
        data_init.push((protected(opts.pool_base + i as u32), *value));
    }
    data_init.extend(raw_inits);

    Ok(BinaryImage { words, entry_point: 0, data_init })
}

/// Number of words a `LOADK` expands to for pool-slot address `addr`:
/// one XOR, one double per address bit, one add per set bit, one LD.P.
fn loadk_len(addr: u32) -> u32 {
    debug_assert!(addr > 0);
    2 + (32 - addr.leading_zeros()) + addr.count_ones()
}

fn emit_loadk(words: &mut Vec<u32>, rd: u8, addr: u32) {
    words.push(Instruction::new(Opcode::Xor, rd, rd, rd).encode());
    let bits = 32 - addr.leading_zeros();
    for i in (0..bits).rev() {
        words.push(Instruction::new(Opcode::Add, rd, rd, rd).encode());
        if addr & (1 << i) != 0 {
            words.push(Instruction::new(Opcode::Add, rd, rd, REG_ONE).encode());
        }
    }
    words.push(Instruction::new(Opcode::LdP, rd, rd, 0).encode());
}

fn parse_instruction(line: usize, text: &str) -> Result<Stmt, AsmError> {
    let (mnemonic, rest) = match text.find(char::is_whitespace) {
        Some(pos) => (&text[..pos], text[pos..].trim()),
        None => (text, ""),
    };
    let upper = to_upper(mnemonic);
    let operands: Vec<&str> = if rest.is_empty() {
        Vec::new()
    } else {
        rest.split(',').map(str::trim).collect()
    };
    if operands.iter().any(|op| op.is_empty()) {
        return Err(AsmError::Syntax { line, msg: "empty operand".to_owned() });
    }

    if upper == "LOADK" {
        if operands.len() != 2 {
            return Err(AsmError::Syntax { line, msg: "LOADK requires `rd, <label>`".to_owned() });
        }
        let rd = parse_register(line, operands[0])?;
        if rd == REG_ONE {
            return Err(AsmError::ReservedRegister { line });
        }
        if !is_ident(operands[1]) {
            return Err(AsmError::Syntax {
                line,
                msg: format!("invalid label operand `{}`", operands[1]),
            });
        }
        return Ok(Stmt::LoadK { line, rd, label: operands[1].to_owned() });
    }

    let opcode = match upper.as_str() {
        "NOP" => Opcode::Nop,
        "HALT" => Opcode::Halt,
        "ADD" => Opcode::Add,
        "SUB" => Opcode::Sub,
        "AND" => Opcode::And,
        "OR" => Opcode::Or,
        "XOR" => Opcode::Xor,
        "SLL" => Opcode::Sll,
        "SRL" => Opcode::Srl,
        "SLT" => Opcode::Slt,
        "MUL" => Opcode::Mul,
        "LD.P" => Opcode::LdP,
        "ST.P" => Opcode::StP,
        "LD.S" => Opcode::LdS,
        "ST.S" => Opcode::StS,
        "BEQ" => Opcode::Beq,
        "BLT" => Opcode::Blt,
        "JMPR" => Opcode::Jmpr,
        "CALL" => Opcode::Call,
        "RET" => Opcode::Ret,
        other => {
            return Err(AsmError::Syntax { line, msg: format!("unknown mnemonic `{other}`") })
        }
    };

    let expect = |n: usize| -> Result<(), AsmError> {
        if operands.len() != n {
            Err(AsmError::Syntax {
                line,
                msg: format!("{} expects {} operand(s), got {}", opcode.mnemonic(), n, operands.len()),
            })
        } else {
            Ok(())
        }
    };

    let instr = match opcode.fields() {
        (false, false, false) => {
            expect(0)?;
            Instruction::nullary(opcode)
        }
        (true, false, false) => {
            expect(1)?;
            Instruction::new(opcode, parse_register(line, operands[0])?, 0, 0)
        }
        (true, true, false) => {
            expect(2)?;
            Instruction::new(
                opcode,
                parse_register(line, operands[0])?,
                parse_register(line, operands[1])?,
                0,
            )
        }
        (false, true, true) => {
            expect(2)?;
            Instruction::new(
                opcode,
                0,
                parse_register(line, operands[0])?,
                parse_register(line, operands[1])?,
            )
        }
        (true, true, true) => {
            expect(3)?;
            Instruction::new(
                opcode,
                parse_register(line, operands[0])?,
                parse_register(line, operands[1])?,
                parse_register(line, operands[2])?,
            )
        }
        _ => unreachable!(),
    };
    Ok(Stmt::Instr { instr })
}

fn parse_register(line: usize, text: &str) -> Result<u8, AsmError> {
    let rest = text
        .strip_prefix('r')
        .or_else(|| text.strip_prefix('R'))
        .ok_or_else(|| AsmError::Syntax { line, msg: format!("expected register, got `{text}`") })?;
    let value: u32 = rest
        .parse()
        .map_err(|_| AsmError::Syntax { line, msg: format!("expected register, got `{text}`") })?;
    if value > 31 {
        return Err(AsmError::RegisterRange { line });
    }
    Ok(value as u8)
}

fn parse_number(text: &str) -> Option<u32> {
    if let Some(hex) = text.strip_prefix("0x").or_else(|| text.strip_prefix("0X")) {
        u32::from_str_radix(hex, 16).ok()
    } else {
        text.parse().ok()
    }
}

fn is_ident(text: &str) -> bool {
    !text.is_empty()
        && text.chars().next().is_some_and(|c| c.is_ascii_alphabetic() || c == '_')
        && text.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
}

fn to_upper(text: &str) -> String {
    text.chars().map(|c| c.to_ascii_uppercase()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::isa::disassemble;

    #[test]
    fn add_line_packs_fields() {
        let image = assemble("ADD r3, r1, r2").unwrap();
        assert_eq!(image.words, alloc::vec![Instruction::new(Opcode::Add, 3, 1, 2).encode()]);
        assert!(image.data_init.is_empty());
    }

    #[test]
    fn halt_line() {
        let image = assemble("HALT").unwrap();
        assert_eq!(image.words, alloc::vec![Instruction::nullary(Opcode::Halt).encode()]);
    }

    #[test]
    fn three_instruction_source_with_word_directive_roundtrips() {
        let source = "\
.data
.word K 100
.text
start:
  NOP
  ADD r1, r1, r1
  HALT
";
        let image = assemble(source).unwrap();
        assert_eq!(image.words.len(), 3);
        assert_eq!(image.data_init.len(), 1);
        // The pool entry lands at the default pool base in the protected
        // region of a 16-bit memory.
        assert_eq!(image.data_init[0], ((1 << 14) | 257, 100));

        let text = disassemble(&image).unwrap();
        let back = assemble_with(&text, &AsmOptions::default()).unwrap();
        assert_eq!(back.words, image.words);
        assert_eq!(back.data_init, image.data_init);
    }

    #[test]
    fn loadk_materializes_pool_address() {
        let source = "\
.word K 0xdeadbeef
LOADK r5, K
HALT
";
        let image = assemble(source).unwrap();
        // Prologue + expansion + HALT; seed constant and pool entry present.
        assert_eq!(image.data_init[0], ((1 << 14), 1));
        assert_eq!(image.data_init[1], ((1 << 14) | 257, 0xdeadbeef));
        assert_eq!(image.words.len() as u32, 2 + loadk_len(257) + 1);
    }

    #[test]
    fn undefined_label_reports_line() {
        let err = assemble("NOP\nLOADK r5, missing\nHALT").unwrap_err();
        assert_eq!(err, AsmError::UndefinedLabel { line: 2, name: "missing".into() });
    }

    #[test]
    fn register_out_of_range() {
        let err = assemble("ADD r32, r0, r0").unwrap_err();
        assert_eq!(err, AsmError::RegisterRange { line: 1 });
    }

    #[test]
    fn entry_must_be_first_instruction() {
        let ok = "\
.entry main
main:
  NOP
  HALT
";
        assert!(assemble(ok).is_ok());
        let bad = "\
.entry later
  NOP
later:
  HALT
";
        assert!(matches!(assemble(bad), Err(AsmError::EntryNotFirst { .. })));
    }

    #[test]
    fn loadk_cannot_target_reserved_register() {
        let err = assemble(".word K 1\nLOADK r30, K\nHALT").unwrap_err();
        assert_eq!(err, AsmError::ReservedRegister { line: 2 });
    }

    #[test]
    fn store_operand_order_is_addr_then_value() {
        let image = assemble("ST.P r4, r7").unwrap();
        let instr = Instruction::decode(image.words[0]).unwrap();
        assert_eq!((instr.opcode, instr.rs1, instr.rs2), (Opcode::StP, 4, 7));
    }
}
