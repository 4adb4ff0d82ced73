//! Cycle-stamped event log. The trace is the observability and determinism
//! contract: two runs from the same configuration must produce identical
//! event sequences, and every acceptance check is phrased over trace events.

use alloc::vec::Vec;
use core::fmt;

/// Where an event originated. Processor and partition ids are 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Source {
    /// A whole processor (the SwCU emits switch events here).
    Processor(u8),
    /// A partition on a processor (`p1.2` = processor 1, partition 2).
    Partition { proc: u8, part: u8 },
    /// A network interface, identified like its owning partition.
    Ni { proc: u8, part: u8 },
    Router(u8),
    Hub,
    System,
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Source::Processor(id) => write!(f, "p{id}"),
            Source::Partition { proc, part } => write!(f, "p{proc}.{part}"),
            Source::Ni { proc, part } => write!(f, "ni{proc}.{part}"),
            Source::Router(id) => write!(f, "r{id}"),
            Source::Hub => write!(f, "hub"),
            Source::System => write!(f, "sys"),
        }
    }
}

/// Partition-local fault classes. Faults halt the faulting partition and
/// never propagate outside it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FaultKind {
    InvalidOpcode { word: u32 },
    StackOverflow,
    StackUnderflow,
    /// Memory access attempted while no partition is active.
    TranslateDeactivated,
    /// Store to an NI send slot that has no configured channel.
    UnconfiguredChannel,
    /// Store to an occupied NI transmission buffer (back-to-back sends).
    TxBufferOccupied,
    /// A packet reached the hub ingress while the previous packet of the
    /// same channel was still pending (bandwidth contract violation).
    IngressOverrun,
    /// A fresh packet overwrote a delivered-but-unread sampling buffer.
    OverwriteUnread,
}

impl fmt::Display for FaultKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FaultKind::InvalidOpcode { word } => write!(f, "invalid_opcode {word:08x}"),
            FaultKind::StackOverflow => write!(f, "stack_overflow"),
            FaultKind::StackUnderflow => write!(f, "stack_underflow"),
            FaultKind::TranslateDeactivated => write!(f, "translate_deactivated"),
            FaultKind::UnconfiguredChannel => write!(f, "unconfigured_channel"),
            FaultKind::TxBufferOccupied => write!(f, "tx_buffer_occupied"),
            FaultKind::IngressOverrun => write!(f, "ingress_overrun"),
            FaultKind::OverwriteUnread => write!(f, "overwrite_unread"),
        }
    }
}

/// One trace event. `addr` fields are partition-visible word addresses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventKind {
    Fetch { pc: u32, word: u32 },
    Retire { pc: u32 },
    /// Partition switch at a window boundary; 0 means "no partition".
    Switch { from: u8, to: u8 },
    MemRead { addr: u32, value: u32 },
    MemWrite { addr: u32, value: u32 },
    /// A partition stored to its protected base address; `value` is the
    /// 10-bit field that was latched.
    FlagSet { partition: u8, value: u16 },
    /// Store to a read-only location, dropped without effect.
    IgnoredWrite { addr: u32, value: u32 },
    PktSend { channel: u16, payload: u32 },
    PktGrant { channel: u16, slot: u16 },
    PktRecv { channel: u16, payload: u32 },
    Fault(FaultKind),
    Halt,
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EventKind::Fetch { pc, word } => write!(f, "fetch pc={pc:04x} word={word:08x}"),
            EventKind::Retire { pc } => write!(f, "retire pc={pc:04x}"),
            EventKind::Switch { from, to } => write!(f, "switch from={from} to={to}"),
            EventKind::MemRead { addr, value } => write!(f, "mem_rd addr={addr:05x} value={value:08x}"),
            EventKind::MemWrite { addr, value } => write!(f, "mem_wr addr={addr:05x} value={value:08x}"),
            EventKind::FlagSet { partition, value } => write!(f, "flag_set part={partition} value={value:03x}"),
            EventKind::IgnoredWrite { addr, value } => write!(f, "ignored_write addr={addr:05x} value={value:08x}"),
            EventKind::PktSend { channel, payload } => write!(f, "pkt_send ch={channel} payload={payload:08x}"),
            EventKind::PktGrant { channel, slot } => write!(f, "pkt_grant ch={channel} slot={slot}"),
            EventKind::PktRecv { channel, payload } => write!(f, "pkt_recv ch={channel} payload={payload:08x}"),
            EventKind::Fault(kind) => write!(f, "fault {kind}"),
            EventKind::Halt => write!(f, "halt"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TraceEvent {
    pub cycle: u64,
    pub source: Source,
    pub kind: EventKind,
}

impl fmt::Display for TraceEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {}", self.cycle, self.source, self.kind)
    }
}

/// Ordered event log of one run.
#[derive(Debug, Clone, Default)]
pub struct Trace {
    pub events: Vec<TraceEvent>,
}

impl Trace {
    pub fn new() -> Self {
        Trace { events: Vec::new() }
    }

    pub fn push(&mut self, cycle: u64, source: Source, kind: EventKind) {
        self.events.push(TraceEvent { cycle, source, kind });
    }

    pub fn iter(&self) -> core::slice::Iter<'_, TraceEvent> {
        self.events.iter()
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// FNV-1a over the rendered event lines. Stable across runs and
    /// platforms; used by the determinism checks and the CLI.
    pub fn fingerprint(&self) -> u64 {
        use core::fmt::Write;
        let mut hash = 0xcbf2_9ce4_8422_2325u64;
        let mut line = alloc::string::String::new();
        for ev in &self.events {
            line.clear();
            let _ = write!(line, "{ev}");
            for byte in line.as_bytes() {
                hash ^= u64::from(*byte);
                hash = hash.wrapping_mul(0x1000_0000_01b3);
            }
            hash ^= u64::from(b'\n');
            hash = hash.wrapping_mul(0x1000_0000_01b3);
        }
        hash
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn events_render_as_single_lines() {
        let mut trace = Trace::new();
        trace.push(
            7,
            Source::Partition { proc: 1, part: 2 },
            EventKind::FlagSet { partition: 2, value: 0x345 },
        );
        trace.push(8, Source::Hub, EventKind::PktGrant { channel: 3, slot: 1 });
        let lines: alloc::vec::Vec<alloc::string::String> =
            trace.iter().map(|e| alloc::format!("{e}")).collect();
        assert_eq!(lines[0], "7 p1.2 flag_set part=2 value=345");
        assert_eq!(lines[1], "8 hub pkt_grant ch=3 slot=1");
    }

    #[test]
    fn fingerprint_is_order_sensitive() {
        let mut a = Trace::new();
        let mut b = Trace::new();
        a.push(0, Source::Hub, EventKind::Halt);
        a.push(1, Source::System, EventKind::Halt);
        b.push(1, Source::System, EventKind::Halt);
        b.push(0, Source::Hub, EventKind::Halt);
        assert_ne!(a.fingerprint(), b.fingerprint());
    }
}
