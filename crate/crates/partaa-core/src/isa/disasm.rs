//! Disassembler: renders an image back to source that reassembles to the
//! identical words and data_init.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::fmt::Write;

use super::{BinaryImage, DecodeError, Instruction};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DisasmError {
    pub word_index: usize,
    pub cause: DecodeError,
}

impl fmt::Display for DisasmError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "word {}: {}", self.word_index, self.cause)
    }
}

impl core::error::Error for DisasmError {}

pub fn disassemble(image: &BinaryImage) -> Result<String, DisasmError> {
    let mut decoded: Vec<Instruction> = Vec::with_capacity(image.words.len());
    for (word_index, &word) in image.words.iter().enumerate() {
        decoded.push(Instruction::decode(word).map_err(|cause| DisasmError { word_index, cause })?);
    }
    let mut out = String::new();
    if image.entry_point != 0 {
        let _ = writeln!(out, ".entry w{}", image.entry_point);
    }
    for (addr, value) in &image.data_init {
        let _ = writeln!(out, ".init 0x{addr:x} 0x{value:x}");
    }
    for (index, instr) in decoded.iter().enumerate() {
        if image.entry_point != 0 && index as u32 == image.entry_point {
            let _ = writeln!(out, "w{index}:");
        }
        let _ = writeln!(out, "{instr}");
    }
    Ok(out)
}
