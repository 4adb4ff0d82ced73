//! Canned platform configurations: the default four-processor platform and
//! the two-task flag-handshake scenario used by the acceptance checks.
//!
//! Handshake protocol between a producer task on processor 1 and a consumer
//! task on processor 2, iteration k encoded into the 10-bit flag values as
//! `(k << 2) | code`:
//!   1. consumer sets its flag to `(k<<2)|1` when ready,
//!   2. producer polls that value, sends payload `k` over the NoC,
//!   3. producer sets its flag to `(k<<2)|2`,
//!   4. consumer polls that, waits for the sampling buffer to turn fresh,
//!      reads the payload (non-destructively) and stores it away,
//!   5. consumer acknowledges with `(k<<2)|3` and both advance to k+1.
//!
//! The gated variant shrinks the consumer's partition window and paces each
//! iteration against the global clock so the flag goes up just before the
//! window closes: every reception then lands while the consumer partition
//! is inactive and the sampling buffer carries the packet into the next
//! window.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::isa::{assemble_with, AsmOptions};
use crate::mem::AddressMap;
use crate::noc::{ChannelConfig, NiId, NocSpec};
use crate::sched::{PartitionSchedule, Window};

use super::{PartitionLoad, ProcessorSpec, SystemSpec};

/// The reference platform: four processors, three partitions each in a
/// round-robin schedule, and a unidirectional ring of four channels between
/// the first partitions.
pub fn default_platform() -> SystemSpec {
    let schedule = PartitionSchedule::new(
        96,
        alloc::vec![
            Window { partition: 1, start: 0, duration: 32 },
            Window { partition: 2, start: 32, duration: 32 },
            Window { partition: 3, start: 64, duration: 32 },
        ],
        4,
    );
    let halt = || {
        Some(PartitionLoad {
            image: crate::isa::assemble("HALT").expect("static program"),
            extra_data: Vec::new(),
        })
    };
    let processors = (0..4)
        .map(|_| ProcessorSpec {
            schedule: schedule.clone(),
            partitions: [halt(), halt(), halt()],
        })
        .collect();
    let channels = (0..4u16)
        .map(|i| ChannelConfig {
            id: i,
            src: NiId::new(i as u8 + 1, 1),
            dst: NiId::new(((i + 1) % 4) as u8 + 1, 1),
            slots: alloc::vec![i],
            base_priority: 0,
        })
        .collect();
    SystemSpec {
        address_bits: 16,
        stack_depth: 256,
        processors,
        noc: NocSpec { t_slot: 8, s_total: 4, channels },
    }
}

/// A built handshake configuration plus the addresses the checks observe.
#[derive(Debug, Clone)]
pub struct HandshakeScenario {
    pub spec: SystemSpec,
    pub iterations: u32,
    pub channel: u16,
    pub producer: NiId,
    pub consumer: NiId,
    /// Consumer-visible protected offset of the sampling-buffer payload.
    pub rx_payload_offset: u32,
    /// Protected offset the consumer stores received payloads to.
    pub sink_offset: u32,
    /// Consumer window (duration, period) for the gated variant.
    pub consumer_window: Option<(u64, u64)>,
}

const ADDRESS_BITS: u8 = 16;

/// Two always-active processors exchanging `iterations` packets.
pub fn handshake(iterations: u32) -> HandshakeScenario {
    build_handshake(iterations, None)
}

/// Handshake variant where the consumer partition is inactive at every
/// packet reception (sampling-buffer persistence across windows).
pub fn handshake_gated_consumer(iterations: u32) -> HandshakeScenario {
    // Window generous enough for the constant-pool prologue, with the
    // ready-flag paced to go up 24 cycles before the window closes.
    build_handshake(iterations, Some((640, 1600)))
}

fn build_handshake(iterations: u32, gate: Option<(u64, u64)>) -> HandshakeScenario {
    let map = AddressMap::new(ADDRESS_BITS);
    let tx_offset = map.ni_tx_offset(0);
    let rx_payload_offset = map.ni_rx_payload_offset(0);
    let rx_fresh_offset = map.ni_rx_fresh_offset(0);
    let sink_offset = 512;
    let opts = AsmOptions { address_bits: ADDRESS_BITS, pool_base: 257 };

    let producer_src = producer_program(iterations, tx_offset);
    let consumer_src = consumer_program(
        iterations,
        rx_payload_offset,
        rx_fresh_offset,
        sink_offset,
        gate,
    );
    let producer_image = assemble_with(&producer_src, &opts).expect("producer program assembles");
    let consumer_image = assemble_with(&consumer_src, &opts).expect("consumer program assembles");

    let producer_sched = PartitionSchedule::always(1, 1 << 20);
    let consumer_sched = match gate {
        None => PartitionSchedule::always(1, 1 << 20),
        Some((duration, period)) => PartitionSchedule::new(
            period,
            alloc::vec![Window { partition: 1, start: 0, duration }],
            0,
        ),
    };

    let spec = SystemSpec {
        address_bits: ADDRESS_BITS,
        stack_depth: 256,
        processors: alloc::vec![
            ProcessorSpec {
                schedule: producer_sched,
                partitions: [
                    Some(PartitionLoad { image: producer_image, extra_data: Vec::new() }),
                    None,
                    None,
                ],
            },
            ProcessorSpec {
                schedule: consumer_sched,
                partitions: [
                    Some(PartitionLoad { image: consumer_image, extra_data: Vec::new() }),
                    None,
                    None,
                ],
            },
        ],
        noc: NocSpec {
            t_slot: 4,
            s_total: 1,
            channels: alloc::vec![ChannelConfig {
                id: 0,
                src: NiId::new(1, 1),
                dst: NiId::new(2, 1),
                slots: alloc::vec![0],
                base_priority: 0,
            }],
        },
    };
    HandshakeScenario {
        spec,
        iterations,
        channel: 0,
        producer: NiId::new(1, 1),
        consumer: NiId::new(2, 1),
        rx_payload_offset,
        sink_offset,
        consumer_window: gate,
    }
}

fn producer_program(iterations: u32, tx_offset: u32) -> String {
    format!(
        "\
; producer: waits for the consumer's ready flag, sends one packet, raises
; the sent flag, waits for the acknowledge, repeats.
.data
.word P2FLAGS 3       ; shared slot of processor 2 flags
.word FIELDSH 20      ; partition 1 field lives in bits [29:20]
.word FIELDMASK 0x3ff
.word CODESH 2
.word READY 1
.word SENT 2
.word ACK 3
.word ITER {iterations}
.word TXSLOT {tx_offset}
.text
.entry start
start:
  LOADK r2, P2FLAGS
  LOADK r3, FIELDSH
  LOADK r4, FIELDMASK
  LOADK r5, CODESH
  LOADK r6, READY
  LOADK r7, SENT
  LOADK r8, ACK
  LOADK r9, ITER
  LOADK r10, TXSLOT
  LOADK r16, loop
  LOADK r17, pollready
  LOADK r18, send
  LOADK r19, pollack
  LOADK r20, next
  XOR r1, r1, r1
  XOR r11, r11, r11
loop:
  SLL r12, r11, r5
  OR r12, r12, r6     ; expected ready value
pollready:
  LD.S r13, r2
  SRL r13, r13, r3
  AND r13, r13, r4
  BEQ r18, r13, r12
  JMPR r17
send:
  ST.P r10, r11       ; push payload k into the NI
  SLL r12, r11, r5
  OR r12, r12, r7
  ST.P r1, r12        ; flag <- sent(k)
  SLL r12, r11, r5
  OR r12, r12, r8     ; expected acknowledge value
pollack:
  LD.S r13, r2
  SRL r13, r13, r3
  AND r13, r13, r4
  BEQ r20, r13, r12
  JMPR r19
next:
  ADD r11, r11, r30
  BLT r16, r11, r9
  HALT
"
    )
}

fn consumer_program(
    iterations: u32,
    rx_payload_offset: u32,
    rx_fresh_offset: u32,
    sink_offset: u32,
    gate: Option<(u64, u64)>,
) -> String {
    // With a gated window the ready flag is paced against the global clock
    // so it goes up just before the window closes; the producer's packet
    // then always arrives while this partition is frozen.
    let (pace_data, pace_init, pace_code) = match gate {
        None => (String::new(), String::new(), String::new()),
        Some((duration, period)) => (
            format!(".word DEADLINE0 {}\n.word PERIOD {period}\n", duration - 24),
            "  LOADK r24, DEADLINE0\n  LOADK r25, PERIOD\n  LOADK r26, pollclock\n".into(),
            "\
pollclock:
  LD.S r13, r1        ; clock_L (shared slot 0)
  BLT r26, r13, r24   ; spin until the deadline
  ADD r24, r24, r25   ; next deadline
"
            .into(),
        ),
    };
    format!(
        "\
; consumer: raises the ready flag, waits for the sent flag, waits for a
; fresh packet in the sampling buffer, consumes it, acknowledges.
.data
.word P1FLAGS 2       ; shared slot of processor 1 flags
.word FIELDSH 20
.word FIELDMASK 0x3ff
.word CODESH 2
.word READY 1
.word SENT 2
.word ACK 3
.word ITER {iterations}
.word RXPAY {rx_payload_offset}
.word RXFRESH {rx_fresh_offset}
.word SINK {sink_offset}
{pace_data}.text
.entry start
start:
  LOADK r2, P1FLAGS
  LOADK r3, FIELDSH
  LOADK r4, FIELDMASK
  LOADK r5, CODESH
  LOADK r6, READY
  LOADK r7, SENT
  LOADK r8, ACK
  LOADK r9, ITER
  LOADK r10, RXPAY
  LOADK r21, RXFRESH
  LOADK r22, SINK
  LOADK r16, loop
  LOADK r17, pollsent
  LOADK r18, fresh
  LOADK r19, consume
  LOADK r23, pollfresh
{pace_init}  XOR r1, r1, r1
  XOR r11, r11, r11
loop:
{pace_code}  SLL r12, r11, r5
  OR r12, r12, r6
  ST.P r1, r12        ; flag <- ready(k)
  SLL r12, r11, r5
  OR r12, r12, r7     ; expected sent value
pollsent:
  LD.S r13, r2
  SRL r13, r13, r3
  AND r13, r13, r4
  BEQ r18, r13, r12
  JMPR r17
fresh:
pollfresh:
  LD.P r13, r21
  BEQ r19, r13, r30   ; freshness reads 1 when a new packet is waiting
  JMPR r23
consume:
  LD.P r14, r10       ; read the payload (clears freshness)
  ST.P r22, r14
  SLL r12, r11, r5
  OR r12, r12, r8
  ST.P r1, r12        ; flag <- acknowledge(k)
  ADD r11, r11, r30
  BLT r16, r11, r9
  HALT
"
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system::System;
    use crate::trace::EventKind;

    #[test]
    fn handshake_single_iteration_event_order() {
        let scenario = handshake(1);
        let mut system = System::build(&scenario.spec).unwrap();
        system.run(20_000);
        assert!(system.all_halted());

        // Exactly one send and one reception.
        let sends: Vec<_> = system
            .trace()
            .iter()
            .filter(|e| matches!(e.kind, EventKind::PktSend { .. }))
            .collect();
        let recvs: Vec<_> = system
            .trace()
            .iter()
            .filter(|e| matches!(e.kind, EventKind::PktRecv { .. }))
            .collect();
        assert_eq!(sends.len(), 1);
        assert_eq!(recvs.len(), 1);

        // ready -> send -> sent -> read -> acknowledge, in causal order.
        let flag = |value: u16| {
            system
                .trace()
                .iter()
                .find(|e| matches!(e.kind, EventKind::FlagSet { value: v, .. } if v == value))
                .map(|e| e.cycle)
                .unwrap()
        };
        let ready = flag(1);
        let sent = flag(2);
        let ack = flag(3);
        let send = sends[0].cycle;
        let read = system
            .trace()
            .iter()
            .find(|e| {
                e.source == crate::trace::Source::Partition { proc: 2, part: 1 }
                    && matches!(e.kind, EventKind::MemRead { addr, .. }
                        if addr == system.map().protected_addr(scenario.rx_payload_offset))
            })
            .map(|e| e.cycle)
            .unwrap();
        assert!(ready < send, "ready {ready} before send {send}");
        assert!(send < sent, "send {send} before sent-flag {sent}");
        assert!(sent < read, "sent-flag {sent} before read {read}");
        assert!(read < ack, "read {read} before acknowledge {ack}");

        // The consumed payload reached the sink.
        let sink_addr = system.map().protected_addr(scenario.sink_offset);
        assert!(system.trace().iter().any(|e| matches!(
            e.kind,
            EventKind::MemWrite { addr, value: 0 } if addr == sink_addr
        )));
    }
}
