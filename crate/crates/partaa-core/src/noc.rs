//! Star/tree network-on-chip: network interfaces with a single transmission
//! buffer and per-channel sampling buffers, routers folded into fixed
//! 8-cycle edges, and a central hub arbitrating with TDM plus
//! dynamic-priority token passing.
//!
//! Hub timing: a packet sent at cycle `c` reaches the hub ingress at `c+8`,
//! becomes visible to arbitration one cycle later (the ingress sampling
//! cycle), can be granted at a slot boundary, crosses the hub in one cycle
//! while the grant occupies the whole slot, and reaches the destination
//! sampling buffer 8 cycles after leaving the hub. The worst case over all
//! arrival phases of a channel with evenly spread slots is exactly
//! `(floor((S_total-1)/S_channel)+1) * t_slot + 1` hub cycles.

use alloc::vec::Vec;
use core::fmt;

use crate::trace::{EventKind, FaultKind, Source, Trace};

/// Fixed propagation cost of each edge: producer NI to its router and into
/// the hub ingress, and hub egress through the reception router to the
/// destination NI.
pub const EDGE_CYCLES: u64 = 8;

/// NIs per router in the reference topology.
pub const NIS_PER_ROUTER: usize = 3;

/// A network interface endpoint, identified like its owning partition
/// (1-based processor and partition ids).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct NiId {
    pub proc: u8,
    pub part: u8,
}

impl NiId {
    pub fn new(proc: u8, part: u8) -> NiId {
        NiId { proc, part }
    }

    /// Dense NI index for a platform with 3 partitions per processor.
    pub fn index(&self) -> usize {
        (self.proc as usize - 1) * 3 + (self.part as usize - 1)
    }
}

impl fmt::Display for NiId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ni{}.{}", self.proc, self.part)
    }
}

/// One data unit: a 32-bit payload with its routing header.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Packet {
    pub channel: u16,
    pub src: NiId,
    pub dst: NiId,
    pub payload: u32,
}

/// A configured unidirectional channel with its guaranteed slots.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChannelConfig {
    pub id: u16,
    pub src: NiId,
    pub dst: NiId,
    /// Slot indices this channel owns; at least one (minimum bandwidth).
    pub slots: Vec<u16>,
    pub base_priority: u32,
}

impl ChannelConfig {
    pub fn slots_assigned(&self) -> u16 {
        self.slots.len() as u16
    }
}

/// The hub's repeating slot table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SlotTable {
    /// Owner channel id per slot, `None` for free slots.
    pub slots: Vec<Option<u16>>,
}

impl SlotTable {
    pub fn s_total(&self) -> u16 {
        self.slots.len() as u16
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NocSpec {
    pub t_slot: u64,
    pub s_total: u16,
    pub channels: Vec<ChannelConfig>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum NocConfigError {
    NoSlots,
    BadTSlot,
    /// Channel ids must be dense: 0..channel_count.
    NonContiguousIds,
    ChannelWithoutSlots { channel: u16 },
    SlotOutOfRange { channel: u16, slot: u16 },
    SlotConflict { slot: u16 },
    DuplicateEndpoints { a: u16, b: u16 },
    SelfChannel { channel: u16 },
    EndpointOutOfRange { channel: u16 },
}

impl fmt::Display for NocConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NocConfigError::NoSlots => write!(f, "slot table must have at least one slot"),
            NocConfigError::BadTSlot => write!(f, "t_slot must be at least 1"),
            NocConfigError::NonContiguousIds => write!(f, "channel ids must be 0..count"),
            NocConfigError::ChannelWithoutSlots { channel } => {
                write!(f, "channel {channel} owns no slots (minimum bandwidth is one slot)")
            }
            NocConfigError::SlotOutOfRange { channel, slot } => {
                write!(f, "channel {channel} claims slot {slot} beyond the table")
            }
            NocConfigError::SlotConflict { slot } => write!(f, "slot {slot} claimed twice"),
            NocConfigError::DuplicateEndpoints { a, b } => {
                write!(f, "channels {a} and {b} share the same (src, dst) pair")
            }
            NocConfigError::SelfChannel { channel } => {
                write!(f, "channel {channel} connects an NI to itself")
            }
            NocConfigError::EndpointOutOfRange { channel } => {
                write!(f, "channel {channel} references an NI outside the platform")
            }
        }
    }
}

impl core::error::Error for NocConfigError {}

impl NocSpec {
    /// Check the configuration and derive the slot table.
    pub fn validate(&self, ni_count: usize) -> Result<SlotTable, Vec<NocConfigError>> {
        let mut errors = Vec::new();
        if self.s_total == 0 {
            errors.push(NocConfigError::NoSlots);
        }
        if self.t_slot == 0 {
            errors.push(NocConfigError::BadTSlot);
        }
        for (i, ch) in self.channels.iter().enumerate() {
            if ch.id as usize != i {
                errors.push(NocConfigError::NonContiguousIds);
                break;
            }
        }
        let mut slots: Vec<Option<u16>> = alloc::vec![None; self.s_total as usize];
        for ch in &self.channels {
            if ch.slots.is_empty() {
                errors.push(NocConfigError::ChannelWithoutSlots { channel: ch.id });
            }
            if ch.src == ch.dst {
                errors.push(NocConfigError::SelfChannel { channel: ch.id });
            }
            if ch.src.index() >= ni_count || ch.dst.index() >= ni_count {
                errors.push(NocConfigError::EndpointOutOfRange { channel: ch.id });
            }
            for &slot in &ch.slots {
                if slot >= self.s_total {
                    errors.push(NocConfigError::SlotOutOfRange { channel: ch.id, slot });
                } else if slots[slot as usize].is_some() {
                    errors.push(NocConfigError::SlotConflict { slot });
                } else {
                    slots[slot as usize] = Some(ch.id);
                }
            }
        }
        for a in 0..self.channels.len() {
            for b in a + 1..self.channels.len() {
                if self.channels[a].src == self.channels[b].src
                    && self.channels[a].dst == self.channels[b].dst
                {
                    errors.push(NocConfigError::DuplicateEndpoints {
                        a: self.channels[a].id,
                        b: self.channels[b].id,
                    });
                }
            }
        }
        if errors.is_empty() {
            Ok(SlotTable { slots })
        } else {
            Err(errors)
        }
    }
}

/// One sampling buffer: a single packet slot where a fresh packet
/// overwrites the previous one and reads are non-destructive.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SamplingBuffer {
    pub payload: u32,
    /// Set on reception, cleared by a payload read.
    pub fresh: bool,
    pub receptions: u64,
}

impl SamplingBuffer {
    fn new() -> SamplingBuffer {
        SamplingBuffer { payload: 0, fresh: false, receptions: 0 }
    }
}

#[derive(Debug, Clone)]
struct NetworkInterface {
    /// Outbound channel ids, ordered; position = send-slot index.
    outbound: Vec<u16>,
    /// Inbound channel ids, ordered; position = sampling-buffer index.
    inbound: Vec<u16>,
    rx: Vec<SamplingBuffer>,
    /// The single transmission buffer holds a packet for one cycle and
    /// forwards it the next; a new store is accepted again from `free_at`.
    tx_free_at: u64,
}

#[derive(Debug, Clone, Copy)]
struct InFlight {
    deliver_at: u64,
    packet: Packet,
}

#[derive(Debug, Clone, Copy)]
struct Ingress {
    packet: Packet,
    arrived: u64,
}

/// The whole interconnect of one platform.
#[derive(Debug, Clone)]
pub struct Noc {
    pub t_slot: u64,
    pub slot_table: SlotTable,
    channels: Vec<ChannelConfig>,
    nis: Vec<NetworkInterface>,
    to_hub: Vec<InFlight>,
    from_hub: Vec<InFlight>,
    ingress: Vec<Option<Ingress>>,
    /// Slot-boundaries each eligible pending channel has waited.
    waiting: Vec<u64>,
    token: usize,
    /// Test hook: when set the hub ignores slot ownership and grants purely
    /// by dynamic priority, which breaks the guaranteed-service bound.
    pub ignore_slot_owners: bool,
}

impl Noc {
    pub fn new(spec: &NocSpec, ni_count: usize) -> Result<Noc, Vec<NocConfigError>> {
        let slot_table = spec.validate(ni_count)?;
        let mut nis: Vec<NetworkInterface> = (0..ni_count)
            .map(|_| NetworkInterface {
                outbound: Vec::new(),
                inbound: Vec::new(),
                rx: Vec::new(),
                tx_free_at: 0,
            })
            .collect();
        for ch in &spec.channels {
            nis[ch.src.index()].outbound.push(ch.id);
            nis[ch.dst.index()].inbound.push(ch.id);
        }
        for ni in &mut nis {
            ni.outbound.sort_unstable();
            ni.inbound.sort_unstable();
            ni.rx = alloc::vec![SamplingBuffer::new(); ni.inbound.len()];
        }
        let n_channels = spec.channels.len();
        Ok(Noc {
            t_slot: spec.t_slot,
            slot_table,
            channels: spec.channels.clone(),
            nis,
            to_hub: Vec::new(),
            from_hub: Vec::new(),
            ingress: alloc::vec![None; n_channels],
            waiting: alloc::vec![0; n_channels],
            token: 0,
            ignore_slot_owners: false,
        })
    }

    pub fn ni_count(&self) -> usize {
        self.nis.len()
    }

    pub fn router_count(&self) -> usize {
        self.nis.len().div_ceil(NIS_PER_ROUTER)
    }

    pub fn channels(&self) -> &[ChannelConfig] {
        &self.channels
    }

    /// Outbound channel id behind send-slot `index` of an NI.
    pub fn tx_channel(&self, ni: NiId, index: u8) -> Option<u16> {
        self.nis[ni.index()].outbound.get(index as usize).copied()
    }

    /// Inbound channel id behind sampling-buffer `index` of an NI.
    pub fn rx_channel(&self, ni: NiId, index: u8) -> Option<u16> {
        self.nis[ni.index()].inbound.get(index as usize).copied()
    }

    /// Send-slot index an NI uses for a channel (for building programs).
    pub fn tx_index(&self, ni: NiId, channel: u16) -> Option<u8> {
        self.nis[ni.index()].outbound.iter().position(|c| *c == channel).map(|i| i as u8)
    }

    pub fn rx_index(&self, ni: NiId, channel: u16) -> Option<u8> {
        self.nis[ni.index()].inbound.iter().position(|c| *c == channel).map(|i| i as u8)
    }

    /// Producer-side send through the NI transmission buffer. Returns false
    /// (with a fault event) if the buffer is still occupied or the send slot
    /// has no configured channel.
    pub fn ni_send(
        &mut self,
        ni: NiId,
        slot_index: u8,
        payload: u32,
        cycle: u64,
        trace: &mut Trace,
    ) -> bool {
        let source = Source::Ni { proc: ni.proc, part: ni.part };
        let Some(channel) = self.tx_channel(ni, slot_index) else {
            trace.push(cycle, source, EventKind::Fault(FaultKind::UnconfiguredChannel));
            return false;
        };
        let iface = &mut self.nis[ni.index()];
        if cycle < iface.tx_free_at {
            trace.push(cycle, source, EventKind::Fault(FaultKind::TxBufferOccupied));
            return false;
        }
        iface.tx_free_at = cycle + 2;
        let cfg = &self.channels[channel as usize];
        let packet = Packet { channel, src: cfg.src, dst: cfg.dst, payload };
        trace.push(cycle, source, EventKind::PktSend { channel, payload });
        self.to_hub.push(InFlight { deliver_at: cycle + EDGE_CYCLES, packet });
        true
    }

    /// Non-destructive read of a sampling buffer; clears the freshness flag.
    pub fn ni_read(&mut self, ni: NiId, buffer_index: u8) -> Option<(u32, bool)> {
        let iface = &mut self.nis[ni.index()];
        let buf = iface.rx.get_mut(buffer_index as usize)?;
        let result = (buf.payload, buf.fresh);
        buf.fresh = false;
        Some(result)
    }

    /// Freshness without consuming it.
    pub fn ni_peek_fresh(&self, ni: NiId, buffer_index: u8) -> Option<bool> {
        self.nis[ni.index()].rx.get(buffer_index as usize).map(|b| b.fresh)
    }

    pub fn sampling_buffer(&self, ni: NiId, buffer_index: u8) -> Option<&SamplingBuffer> {
        self.nis[ni.index()].rx.get(buffer_index as usize)
    }

    /// Test hook used by the verification harnesses: place a packet directly
    /// in a channel's hub ingress register, as if it had just arrived.
    pub fn force_ingress(&mut self, channel: u16, payload: u32, arrived: u64) {
        let cfg = &self.channels[channel as usize];
        let packet = Packet { channel, src: cfg.src, dst: cfg.dst, payload };
        self.ingress[channel as usize] = Some(Ingress { packet, arrived });
    }

    pub fn ingress_pending(&self, channel: u16) -> bool {
        self.ingress[channel as usize].is_some()
    }

    /// Advance the interconnect one cycle: edge arrivals into the hub
    /// ingress, slot-boundary arbitration, and deliveries into sampling
    /// buffers.
    pub fn step(&mut self, cycle: u64, trace: &mut Trace) {
        // Edge arrivals at the hub ingress.
        let mut i = 0;
        while i < self.to_hub.len() {
            if self.to_hub[i].deliver_at == cycle {
                let inflight = self.to_hub.remove(i);
                let ch = inflight.packet.channel as usize;
                if self.ingress[ch].is_some() {
                    trace.push(cycle, Source::Hub, EventKind::Fault(FaultKind::IngressOverrun));
                } else {
                    self.ingress[ch] = Some(Ingress { packet: inflight.packet, arrived: cycle });
                }
            } else {
                i += 1;
            }
        }

        // Arbitration happens at slot boundaries only.
        if cycle % self.t_slot == 0 {
            if let Some(channel) = self.hub_step(cycle) {
                let pending = self.ingress[channel as usize].take().expect("granted channel pending");
                let slot =
                    ((cycle / self.t_slot) % u64::from(self.slot_table.s_total())) as u16;
                trace.push(cycle, Source::Hub, EventKind::PktGrant { channel, slot });
                self.waiting[channel as usize] = 0;
                // One cycle through the hub, then the fixed reception edge.
                self.from_hub.push(InFlight {
                    deliver_at: cycle + 1 + EDGE_CYCLES,
                    packet: pending.packet,
                });
            }
            // Remaining eligible channels have now waited one more slot.
            for (ch, slot) in self.ingress.iter().enumerate() {
                if let Some(ingress) = slot {
                    if ingress.arrived < cycle {
                        self.waiting[ch] += 1;
                    }
                }
            }
            self.token = (self.token + 1) % self.channels.len().max(1);
        }

        // Deliveries into sampling buffers.
        let mut i = 0;
        while i < self.from_hub.len() {
            if self.from_hub[i].deliver_at == cycle {
                let inflight = self.from_hub.remove(i);
                let packet = inflight.packet;
                let dst = packet.dst;
                let buffer_index = self
                    .rx_index(dst, packet.channel)
                    .expect("configured channel has a sampling buffer");
                let source = Source::Ni { proc: dst.proc, part: dst.part };
                let buf = &mut self.nis[dst.index()].rx[buffer_index as usize];
                if buf.fresh {
                    trace.push(cycle, source, EventKind::Fault(FaultKind::OverwriteUnread));
                }
                buf.payload = packet.payload;
                buf.fresh = true;
                buf.receptions += 1;
                trace.push(
                    cycle,
                    source,
                    EventKind::PktRecv { channel: packet.channel, payload: packet.payload },
                );
            } else {
                i += 1;
            }
        }
    }

    /// Slot-boundary arbitration: the slot owner wins if it has an eligible
    /// packet; otherwise the eligible channel with the highest dynamic
    /// priority (base priority plus slots waited), ties broken by the
    /// rotating token order.
    pub fn hub_step(&mut self, cycle: u64) -> Option<u16> {
        let s_total = u64::from(self.slot_table.s_total());
        let slot = ((cycle / self.t_slot) % s_total) as usize;
        let eligible = |noc: &Noc, ch: usize| -> bool {
            noc.ingress[ch].map(|p| p.arrived < cycle).unwrap_or(false)
        };
        if !self.ignore_slot_owners {
            if let Some(owner) = self.slot_table.slots[slot] {
                if eligible(self, owner as usize) {
                    return Some(owner);
                }
            }
        }
        // Idle slot: reclaimed by dynamic priority.
        let n = self.channels.len();
        let mut best: Option<(u64, usize)> = None;
        for offset in 0..n {
            let ch = (self.token + offset) % n;
            if !eligible(self, ch) {
                continue;
            }
            let priority = u64::from(self.channels[ch].base_priority) + self.waiting[ch];
            match best {
                Some((best_priority, _)) if best_priority >= priority => {}
                _ => best = Some((priority, ch)),
            }
        }
        best.map(|(_, ch)| ch as u16)
    }
}

/// Measured delivery of one packet, extracted from a trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Delivery {
    Delivered { send_cycle: u64, recv_cycle: u64, delay: u64 },
    Undelivered { send_cycle: u64 },
}

/// End-to-end delay of the `occurrence`-th packet sent on `channel`
/// (0-based), or `None` if no such send exists in the trace.
pub fn end_to_end_delay(trace: &Trace, channel: u16, occurrence: usize) -> Option<Delivery> {
    let send_cycle = trace
        .iter()
        .filter(|e| matches!(e.kind, EventKind::PktSend { channel: c, .. } if c == channel))
        .nth(occurrence)
        .map(|e| e.cycle)?;
    let recv = trace
        .iter()
        .filter(|e| matches!(e.kind, EventKind::PktRecv { channel: c, .. } if c == channel))
        .nth(occurrence)
        .map(|e| e.cycle);
    Some(match recv {
        Some(recv_cycle) => Delivery::Delivered { send_cycle, recv_cycle, delay: recv_cycle - send_cycle },
        None => Delivery::Undelivered { send_cycle },
    })
}
