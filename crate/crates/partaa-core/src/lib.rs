//! Cycle-accurate model of the PaRTAA platform: partitioned processors with
//! time-triggered partition switching, MCU-segmented memories, a globally
//! visible flag mechanism, and a TDM + dynamic-priority NoC. The `analysis`
//! module carries the closed-form timing bounds that the simulator is
//! cross-checked against.
//!
//! The crate is `no_std` (alloc required); IO, file formats and the CLI live
//! in the companion `partaa` crate.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod analysis;
pub mod cpu;
pub mod isa;
pub mod mem;
pub mod noc;
pub mod sched;
pub mod system;
pub mod trace;
