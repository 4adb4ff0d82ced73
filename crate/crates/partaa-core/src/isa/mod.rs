//! The 32-bit register-register instruction set: encoding, assembler and
//! disassembler.
//!
//! No instruction carries an immediate operand. Constants are materialized
//! by loading from pre-initialized data memory; the assembler's `LOADK`
//! pseudo-instruction builds the data-slot address with shift/add steps and
//! finishes with an `LD.P` from that slot.
//!
//! Word layout: opcode in bits [31:24], rd [23:19], rs1 [18:14], rs2 [13:9],
//! bits [8:0] reserved zero. Control-flow instructions carry their target
//! register in the rd field.

mod asm;
mod disasm;
mod image;

pub use asm::{assemble, assemble_with, AsmError, AsmOptions};
pub use disasm::{disassemble, DisasmError};
pub use image::{BinaryImage, ImageError};

use core::fmt;

/// The reserved constant-one register: the `LOADK` expansion reads it and
/// the assembler prologue initializes it from data slot 0.
pub const REG_ONE: u8 = 30;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum Opcode {
    Nop = 0x00,
    Halt = 0x01,
    Add = 0x10,
    Sub = 0x11,
    And = 0x12,
    Or = 0x13,
    Xor = 0x14,
    Sll = 0x15,
    Srl = 0x16,
    Slt = 0x17,
    Mul = 0x18,
    /// Load from the protected region, address in rs1.
    LdP = 0x20,
    /// Store to the protected region, address in rs1, value in rs2.
    StP = 0x21,
    LdS = 0x22,
    StS = 0x23,
    /// Branch if equal; target address in rd, operands in rs1/rs2.
    Beq = 0x30,
    /// Branch if signed less-than; target address in rd.
    Blt = 0x31,
    /// Unconditional jump to the address in rd.
    Jmpr = 0x32,
    /// Push the return address to the hardware stack and jump to rd.
    Call = 0x33,
    /// Pop the hardware stack and jump to the popped address.
    Ret = 0x34,
}

impl Opcode {
    pub fn from_byte(byte: u8) -> Option<Opcode> {
        Some(match byte {
            0x00 => Opcode::Nop,
            0x01 => Opcode::Halt,
            0x10 => Opcode::Add,
            0x11 => Opcode::Sub,
            0x12 => Opcode::And,
            0x13 => Opcode::Or,
            0x14 => Opcode::Xor,
            0x15 => Opcode::Sll,
            0x16 => Opcode::Srl,
            0x17 => Opcode::Slt,
            0x18 => Opcode::Mul,
            0x20 => Opcode::LdP,
            0x21 => Opcode::StP,
            0x22 => Opcode::LdS,
            0x23 => Opcode::StS,
            0x30 => Opcode::Beq,
            0x31 => Opcode::Blt,
            0x32 => Opcode::Jmpr,
            0x33 => Opcode::Call,
            0x34 => Opcode::Ret,
            _ => return None,
        })
    }

    pub fn mnemonic(self) -> &'static str {
        match self {
            Opcode::Nop => "NOP",
            Opcode::Halt => "HALT",
            Opcode::Add => "ADD",
            Opcode::Sub => "SUB",
            Opcode::And => "AND",
            Opcode::Or => "OR",
            Opcode::Xor => "XOR",
            Opcode::Sll => "SLL",
            Opcode::Srl => "SRL",
            Opcode::Slt => "SLT",
            Opcode::Mul => "MUL",
            Opcode::LdP => "LD.P",
            Opcode::StP => "ST.P",
            Opcode::LdS => "LD.S",
            Opcode::StS => "ST.S",
            Opcode::Beq => "BEQ",
            Opcode::Blt => "BLT",
            Opcode::Jmpr => "JMPR",
            Opcode::Call => "CALL",
            Opcode::Ret => "RET",
        }
    }

    /// Which of the three register fields this opcode actually uses.
    /// Unused fields must encode as zero.
    pub fn fields(self) -> (bool, bool, bool) {
        match self {
            Opcode::Nop | Opcode::Halt | Opcode::Ret => (false, false, false),
            Opcode::Add
            | Opcode::Sub
            | Opcode::And
            | Opcode::Or
            | Opcode::Xor
            | Opcode::Sll
            | Opcode::Srl
            | Opcode::Slt
            | Opcode::Mul => (true, true, true),
            Opcode::LdP | Opcode::LdS => (true, true, false),
            Opcode::StP | Opcode::StS => (false, true, true),
            Opcode::Beq | Opcode::Blt => (true, true, true),
            Opcode::Jmpr | Opcode::Call => (true, false, false),
        }
    }

    /// All valid opcodes, in encoding order.
    pub fn all() -> &'static [Opcode] {
        &[
            Opcode::Nop,
            Opcode::Halt,
            Opcode::Add,
            Opcode::Sub,
            Opcode::And,
            Opcode::Or,
            Opcode::Xor,
            Opcode::Sll,
            Opcode::Srl,
            Opcode::Slt,
            Opcode::Mul,
            Opcode::LdP,
            Opcode::StP,
            Opcode::LdS,
            Opcode::StS,
            Opcode::Beq,
            Opcode::Blt,
            Opcode::Jmpr,
            Opcode::Call,
            Opcode::Ret,
        ]
    }

    pub fn is_control_flow(self) -> bool {
        matches!(
            self,
            Opcode::Beq | Opcode::Blt | Opcode::Jmpr | Opcode::Call | Opcode::Ret
        )
    }
}

/// A decoded instruction. Register indices are 0-31; unused operands are 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Instruction {
    pub opcode: Opcode,
    pub rd: u8,
    pub rs1: u8,
    pub rs2: u8,
}

impl Instruction {
    pub fn new(opcode: Opcode, rd: u8, rs1: u8, rs2: u8) -> Instruction {
        debug_assert!(rd < 32 && rs1 < 32 && rs2 < 32);
        Instruction { opcode, rd, rs1, rs2 }
    }

    pub fn nullary(opcode: Opcode) -> Instruction {
        Instruction::new(opcode, 0, 0, 0)
    }

    /// Pack into the 32-bit word encoding.
    pub fn encode(self) -> u32 {
        (self.opcode as u32) << 24
            | u32::from(self.rd) << 19
            | u32::from(self.rs1) << 14
            | u32::from(self.rs2) << 9
    }

    /// Decode a word, rejecting unknown opcodes, operands in unused fields
    /// and nonzero reserved bits so that `encode(decode(w)) == w` holds for
    /// exactly the valid words.
    pub fn decode(word: u32) -> Result<Instruction, DecodeError> {
        let opcode = Opcode::from_byte((word >> 24) as u8).ok_or(DecodeError::UnknownOpcode(word))?;
        if word & 0x1ff != 0 {
            return Err(DecodeError::ReservedBits(word));
        }
        let rd = ((word >> 19) & 0x1f) as u8;
        let rs1 = ((word >> 14) & 0x1f) as u8;
        let rs2 = ((word >> 9) & 0x1f) as u8;
        let (uses_rd, uses_rs1, uses_rs2) = opcode.fields();
        if (!uses_rd && rd != 0) || (!uses_rs1 && rs1 != 0) || (!uses_rs2 && rs2 != 0) {
            return Err(DecodeError::UnusedField(word));
        }
        Ok(Instruction { opcode, rd, rs1, rs2 })
    }
}

impl fmt::Display for Instruction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let m = self.opcode.mnemonic();
        match self.opcode.fields() {
            (false, false, false) => write!(f, "{m}"),
            (true, false, false) => write!(f, "{m} r{}", self.rd),
            (true, true, false) => write!(f, "{m} r{}, r{}", self.rd, self.rs1),
            (false, true, true) => write!(f, "{m} r{}, r{}", self.rs1, self.rs2),
            (true, true, true) => write!(f, "{m} r{}, r{}, r{}", self.rd, self.rs1, self.rs2),
            _ => unreachable!(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecodeError {
    UnknownOpcode(u32),
    ReservedBits(u32),
    UnusedField(u32),
}

impl fmt::Display for DecodeError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DecodeError::UnknownOpcode(w) => write!(f, "unknown opcode in word {w:08x}"),
            DecodeError::ReservedBits(w) => write!(f, "nonzero reserved bits in word {w:08x}"),
            DecodeError::UnusedField(w) => write!(f, "nonzero unused operand field in word {w:08x}"),
        }
    }
}

impl core::error::Error for DecodeError {}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn add_packs_fields() {
        // "ADD r3, r1, r2" -> opcode ADD, rd=3, rs1=1, rs2=2
        let word = Instruction::new(Opcode::Add, 3, 1, 2).encode();
        assert_eq!(word, 0x10 << 24 | 3 << 19 | 1 << 14 | 2 << 9);
        let back = Instruction::decode(word).unwrap();
        assert_eq!(back, Instruction::new(Opcode::Add, 3, 1, 2));
    }

    #[test]
    fn halt_has_no_operands() {
        let word = Instruction::nullary(Opcode::Halt).encode();
        assert_eq!(word, 0x01 << 24);
    }

    #[test]
    fn decode_rejects_invalid() {
        assert!(matches!(
            Instruction::decode(0xff00_0000),
            Err(DecodeError::UnknownOpcode(_))
        ));
        assert!(matches!(Instruction::decode(0x0000_0001), Err(DecodeError::ReservedBits(_))));
        // HALT with a nonzero rd field
        assert!(matches!(
            Instruction::decode(0x01 << 24 | 3 << 19),
            Err(DecodeError::UnusedField(_))
        ));
    }

    #[test]
    fn roundtrip_all_opcodes_sampled_operands() {
        // Exhaustive over the opcode space, sampled over operand fields.
        for &op in Opcode::all() {
            let (urd, urs1, urs2) = op.fields();
            for (a, b, c) in [(0u8, 0u8, 0u8), (1, 2, 3), (31, 31, 31), (17, 5, 23)] {
                let instr = Instruction::new(
                    op,
                    if urd { a } else { 0 },
                    if urs1 { b } else { 0 },
                    if urs2 { c } else { 0 },
                );
                let word = instr.encode();
                assert_eq!(Instruction::decode(word).unwrap().encode(), word);
            }
        }
    }
}
