//! Memory hierarchy of one processing element: the MCU address rewrite, the
//! four-segment data memory, the per-partition hardware stack on the second
//! memory port, and the classification of physical addresses onto the
//! memory-mapped peripheral overlay.
//!
//! The MCU rewrites the top two address bits from the active-partition flag:
//! a protected access (visible bit n-2 set) lands in the active partition's
//! segment, a shared access lands in segment 00. Partitions therefore cannot
//! form an address outside their own segment or the shared segment.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::trace::FaultKind;

/// Active-partition selector as latched by the SwCU: `00` deactivated,
/// `01`/`10`/`11` for partitions 1-3.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PartitionSel {
    Deactivated,
    Active(u8),
}

impl PartitionSel {
    pub fn bits(self) -> u32 {
        match self {
            PartitionSel::Deactivated => 0b00,
            PartitionSel::Active(p) => u32::from(p),
        }
    }

    pub fn from_partition(id: u8) -> PartitionSel {
        debug_assert!((1..=3).contains(&id));
        PartitionSel::Active(id)
    }

    pub fn partition(self) -> Option<u8> {
        match self {
            PartitionSel::Deactivated => None,
            PartitionSel::Active(p) => Some(p),
        }
    }
}

/// Word slots of the assistive hardware in the shared region. The published
/// byte offsets (0x00, 0x04, 0x08, 0x12, 0x16, 0x20) are not self-consistent
/// as offsets of 32-bit words, so their ordering is mapped onto word slots
/// 0-5; see the address-map notes in the README.
pub const SHARED_SLOT_CLOCK_LO: u32 = 0;
pub const SHARED_SLOT_CLOCK_HI: u32 = 1;
pub const SHARED_SLOT_PROC_FLAGS: u32 = 2; // slots 2-5: processors 1-4
pub const SHARED_OVERLAY_WORDS: u32 = 6;

/// Words reserved at the top of each protected segment for the partition's
/// network interface.
pub const NI_REGION_WORDS: u32 = 64;
pub const NI_TX_SLOTS: u32 = 16;
pub const NI_RX_SLOTS: u32 = 16;

/// MCU segmentation for an `n`-bit physical word address space.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AddressMap {
    pub address_bits: u8,
}

impl AddressMap {
    pub fn new(address_bits: u8) -> AddressMap {
        debug_assert!((4..=24).contains(&address_bits));
        AddressMap { address_bits }
    }

    /// Words in one segment (2^(n-2)).
    pub fn segment_words(&self) -> u32 {
        1 << (self.address_bits - 2)
    }

    pub fn total_words(&self) -> usize {
        1 << self.address_bits
    }

    /// Mask for the partition-visible (n-1 bit) address space.
    pub fn visible_mask(&self) -> u32 {
        (1 << (self.address_bits - 1)) - 1
    }

    /// Mask for a region offset (n-2 bits).
    pub fn offset_mask(&self) -> u32 {
        self.segment_words() - 1
    }

    /// Visible address of a protected-region offset.
    pub fn protected_addr(&self, offset: u32) -> u32 {
        self.segment_words() | (offset & self.offset_mask())
    }

    /// Visible address of a shared-region offset.
    pub fn shared_addr(&self, offset: u32) -> u32 {
        offset & self.offset_mask()
    }

    /// The MCU rewrite: protected accesses get the active-partition flag in
    /// the top two bits, shared accesses get 00. Translating while no
    /// partition is active is a fault.
    pub fn translate(&self, visible_addr: u32, sel: PartitionSel) -> Result<u32, FaultKind> {
        let part = match sel {
            PartitionSel::Deactivated => return Err(FaultKind::TranslateDeactivated),
            PartitionSel::Active(p) => u32::from(p),
        };
        let visible = visible_addr & self.visible_mask();
        let offset = visible & self.offset_mask();
        let region_bit = visible >> (self.address_bits - 2) & 1;
        let segment = if region_bit == 1 { part } else { 0 };
        Ok(segment << (self.address_bits - 2) | offset)
    }

    /// Physical segment index (0 shared, 1-3 partitions) of an address.
    pub fn segment_of(&self, phys: u32) -> u32 {
        phys >> (self.address_bits - 2)
    }

    /// Classify a physical address against the peripheral overlay.
    pub fn classify(&self, phys: u32) -> Target {
        let segment = self.segment_of(phys);
        let offset = phys & self.offset_mask();
        if segment == 0 {
            match offset {
                SHARED_SLOT_CLOCK_LO => Target::ClockLo,
                SHARED_SLOT_CLOCK_HI => Target::ClockHi,
                o if (SHARED_SLOT_PROC_FLAGS..SHARED_OVERLAY_WORDS).contains(&o) => {
                    Target::ProcessorFlags { proc: (o - SHARED_SLOT_PROC_FLAGS) as u8 + 1 }
                }
                _ => Target::Ram,
            }
        } else {
            let partition = segment as u8;
            let seg_words = self.segment_words();
            if offset == 0 {
                Target::PartitionBase { partition }
            } else if offset >= seg_words - NI_REGION_WORDS {
                let ni_offset = offset - (seg_words - NI_REGION_WORDS);
                match ni_offset {
                    o if o < NI_TX_SLOTS => Target::NiTx { partition, index: o as u8 },
                    o if o < NI_TX_SLOTS + NI_RX_SLOTS => {
                        Target::NiRxPayload { partition, index: (o - NI_TX_SLOTS) as u8 }
                    }
                    o if o < NI_TX_SLOTS + 2 * NI_RX_SLOTS => {
                        Target::NiRxFresh { partition, index: (o - NI_TX_SLOTS - NI_RX_SLOTS) as u8 }
                    }
                    _ => Target::Ram,
                }
            } else {
                Target::Ram
            }
        }
    }

    /// Protected-region offset of the NI send slot for outbound channel
    /// index `k`.
    pub fn ni_tx_offset(&self, k: u32) -> u32 {
        self.segment_words() - NI_REGION_WORDS + k
    }

    /// Protected-region offset of the sampling-buffer payload word for
    /// inbound channel index `k`.
    pub fn ni_rx_payload_offset(&self, k: u32) -> u32 {
        self.segment_words() - NI_REGION_WORDS + NI_TX_SLOTS + k
    }

    /// Protected-region offset of the freshness word for inbound channel
    /// index `k`.
    pub fn ni_rx_fresh_offset(&self, k: u32) -> u32 {
        self.segment_words() - NI_REGION_WORDS + NI_TX_SLOTS + NI_RX_SLOTS + k
    }
}

/// What a physical address resolves to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Target {
    Ram,
    ClockLo,
    ClockHi,
    /// Read-only processor flag word (1-based processor id).
    ProcessorFlags { proc: u8 },
    /// Base word of a protected segment: stores set the partition flag and
    /// leave the word untouched, loads read the underlying word.
    PartitionBase { partition: u8 },
    NiTx { partition: u8, index: u8 },
    NiRxPayload { partition: u8, index: u8 },
    NiRxFresh { partition: u8, index: u8 },
}

/// Word-addressed backing store of one processing element.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Ram {
    words: Vec<u32>,
}

impl Ram {
    pub fn new(map: &AddressMap) -> Ram {
        Ram { words: vec![0; map.total_words()] }
    }

    pub fn read(&self, phys: u32) -> u32 {
        self.words[phys as usize]
    }

    pub fn write(&mut self, phys: u32, value: u32) {
        self.words[phys as usize] = value;
    }

    pub fn words(&self) -> &[u32] {
        &self.words
    }

    /// Nonzero words as (index, value) pairs; the dump/restore file format.
    pub fn dump(&self) -> Vec<(u32, u32)> {
        self.words
            .iter()
            .enumerate()
            .filter(|(_, w)| **w != 0)
            .map(|(i, w)| (i as u32, *w))
            .collect()
    }

    pub fn restore(&mut self, entries: &[(u32, u32)]) {
        for w in self.words.iter_mut() {
            *w = 0;
        }
        for &(index, value) in entries {
            self.words[index as usize] = value;
        }
    }
}

/// Per-partition hardware stack in the low end of the protected segment
/// (word offsets 1..=depth), driven by the second memory port. The mirror
/// register tracks the most recently pushed return address.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HardwareStack {
    /// Number of pushed entries.
    depth_used: u32,
    max_depth: u32,
    top_mirror: u32,
}

impl HardwareStack {
    pub fn new(max_depth: u32) -> HardwareStack {
        HardwareStack { depth_used: 0, max_depth, top_mirror: 0 }
    }

    pub fn push(
        &mut self,
        ram: &mut Ram,
        map: &AddressMap,
        partition: u8,
        return_pc: u32,
    ) -> Result<(), FaultKind> {
        if self.depth_used == self.max_depth {
            return Err(FaultKind::StackOverflow);
        }
        self.depth_used += 1;
        // Slot offsets start at 1: the base address is reserved for flags.
        let phys = u32::from(partition) << (map.address_bits - 2) | self.depth_used;
        ram.write(phys, return_pc);
        self.top_mirror = return_pc;
        Ok(())
    }

    pub fn pop(&mut self, ram: &mut Ram, map: &AddressMap, partition: u8) -> Result<u32, FaultKind> {
        if self.depth_used == 0 {
            return Err(FaultKind::StackUnderflow);
        }
        let phys = u32::from(partition) << (map.address_bits - 2) | self.depth_used;
        let value = ram.read(phys);
        self.depth_used -= 1;
        self.top_mirror = if self.depth_used == 0 {
            0
        } else {
            ram.read(u32::from(partition) << (map.address_bits - 2) | self.depth_used)
        };
        Ok(value)
    }

    pub fn top_mirror(&self) -> u32 {
        self.top_mirror
    }

    pub fn depth_used(&self) -> u32 {
        self.depth_used
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MemError {
    TranslateDeactivated,
}

impl fmt::Display for MemError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MemError::TranslateDeactivated => write!(f, "memory access while deactivated"),
        }
    }
}

impl core::error::Error for MemError {}
