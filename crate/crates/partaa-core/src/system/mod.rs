//! Whole-platform assembly: N processors with their memories, the NoC, the
//! global clock and the deterministic cycle loop.
//!
//! Component order within a cycle is fixed: processors in id order (the
//! SwCU switch decision, then the active partition's pipeline step), then
//! the NoC (edges, hub, deliveries), then the flag snapshot and the clock
//! increment. Same-cycle interactions are mediated by registered state —
//! flag reads observe the previous cycle's values — so the order itself is
//! never observable, only determinism depends on it.

pub mod scenarios;

use alloc::vec::Vec;
use core::fmt;

use crate::cpu::{self, Bus, PartitionContext};
use crate::isa::BinaryImage;
use crate::mem::{AddressMap, HardwareStack, PartitionSel, Ram, Target};
use crate::noc::{NiId, Noc, NocConfigError, NocSpec};
use crate::sched::PartitionSchedule;
use crate::trace::{EventKind, Source, Trace};
use crate::analysis::{validate_schedule, ScheduleViolation};

/// Program plus extra data words for one partition.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PartitionLoad {
    pub image: BinaryImage,
    /// Additional (visible address, value) pairs applied after the image's
    /// own data_init.
    pub extra_data: Vec<(u32, u32)>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProcessorSpec {
    pub schedule: PartitionSchedule,
    pub partitions: [Option<PartitionLoad>; 3],
}

/// Everything needed to build a platform instance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SystemSpec {
    pub address_bits: u8,
    pub stack_depth: u32,
    pub processors: Vec<ProcessorSpec>,
    pub noc: NocSpec,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BuildError {
    AddressBits(u8),
    /// Stack, base word and NI window must fit in a protected segment.
    SegmentLayout { segment_words: u32, required: u32 },
    ProcessorCount(usize),
    Schedule { proc: u8, violation: ScheduleViolation },
    ImageTooLarge { proc: u8, part: u8, words: usize },
    /// data_init address is not a valid visible address or lands on a
    /// peripheral overlay.
    DataInit { proc: u8, part: u8, addr: u32 },
    Noc(NocConfigError),
}

impl fmt::Display for BuildError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BuildError::AddressBits(n) => write!(f, "address_bits {n} outside supported range 10-24"),
            BuildError::SegmentLayout { segment_words, required } => write!(
                f,
                "protected segment of {segment_words} words cannot hold base word, stack and NI window ({required} required)"
            ),
            BuildError::ProcessorCount(n) => {
                write!(f, "processor count {n} outside 1-4 (the shared flag table has four entries)")
            }
            BuildError::Schedule { proc, violation } => write!(f, "processor {proc}: {violation}"),
            BuildError::ImageTooLarge { proc, part, words } => {
                write!(f, "processor {proc} partition {part}: image of {words} words exceeds the region")
            }
            BuildError::DataInit { proc, part, addr } => write!(
                f,
                "processor {proc} partition {part}: data_init address {addr:#x} invalid or on a peripheral"
            ),
            BuildError::Noc(err) => write!(f, "noc: {err}"),
        }
    }
}

impl core::error::Error for BuildError {}

/// Words of instruction memory per partition region. The single shared
/// instruction store of a processor is divided into three fixed regions and
/// each partition's program counter addresses its own region.
pub const IMEM_REGION_WORDS: usize = 4096;

struct Processor {
    schedule: PartitionSchedule,
    imem: Vec<u32>,
    ram: Ram,
    stacks: [HardwareStack; 3],
    parts: [PartitionContext; 3],
    active: PartitionSel,
    loaded: [bool; 3],
}

/// A built platform. Owns all state; stepping is single-threaded and
/// bit-reproducible, and independent instances share nothing.
pub struct System {
    map: AddressMap,
    clock: u64,
    procs: Vec<Processor>,
    noc: Noc,
    /// Live 10-bit flag fields, per processor.
    flag_fields: Vec<[u16; 3]>,
    /// Composed flag words as of the end of the previous cycle; what loads
    /// observe during the current cycle (one-cycle visibility latency).
    flags_visible: Vec<u32>,
    trace: Trace,
}

impl System {
    /// Wire and zero the platform. Collects every violated constraint
    /// instead of stopping at the first.
    pub fn build(spec: &SystemSpec) -> Result<System, Vec<BuildError>> {
        let mut errors = Vec::new();
        if !(10..=24).contains(&spec.address_bits) {
            errors.push(BuildError::AddressBits(spec.address_bits));
            return Err(errors);
        }
        let map = AddressMap::new(spec.address_bits);
        let required = 1 + spec.stack_depth + crate::mem::NI_REGION_WORDS;
        if required > map.segment_words() {
            errors.push(BuildError::SegmentLayout {
                segment_words: map.segment_words(),
                required,
            });
        }
        if spec.processors.is_empty() || spec.processors.len() > 4 {
            errors.push(BuildError::ProcessorCount(spec.processors.len()));
        }
        for (pi, pspec) in spec.processors.iter().enumerate() {
            let proc_id = pi as u8 + 1;
            for violation in validate_schedule(&pspec.schedule).violations {
                errors.push(BuildError::Schedule { proc: proc_id, violation });
            }
            for (part_idx, load) in pspec.partitions.iter().enumerate() {
                let Some(load) = load else { continue };
                let part_id = part_idx as u8 + 1;
                if load.image.words.len() > IMEM_REGION_WORDS {
                    errors.push(BuildError::ImageTooLarge {
                        proc: proc_id,
                        part: part_id,
                        words: load.image.words.len(),
                    });
                }
                for &(addr, _) in load.image.data_init.iter().chain(load.extra_data.iter()) {
                    let bad = addr > map.visible_mask()
                        || match map.translate(addr, PartitionSel::Active(part_id)) {
                            Ok(phys) => !matches!(
                                map.classify(phys),
                                Target::Ram | Target::PartitionBase { .. }
                            ),
                            Err(_) => true,
                        };
                    if bad {
                        errors.push(BuildError::DataInit { proc: proc_id, part: part_id, addr });
                    }
                }
            }
        }
        let ni_count = spec.processors.len() * 3;
        let noc = match Noc::new(&spec.noc, ni_count) {
            Ok(noc) => Some(noc),
            Err(noc_errors) => {
                errors.extend(noc_errors.into_iter().map(BuildError::Noc));
                None
            }
        };
        if !errors.is_empty() {
            return Err(errors);
        }
        let noc = noc.expect("validated");

        let mut procs = Vec::with_capacity(spec.processors.len());
        for pspec in &spec.processors {
            let mut imem = alloc::vec![0u32; IMEM_REGION_WORDS * 3];
            let mut ram = Ram::new(&map);
            let mut parts: [PartitionContext; 3] = Default::default();
            let mut loaded = [false; 3];
            for (part_idx, load) in pspec.partitions.iter().enumerate() {
                let part_id = part_idx as u8 + 1;
                match load {
                    None => parts[part_idx].halted = true,
                    Some(load) => {
                        loaded[part_idx] = true;
                        let base = part_idx * IMEM_REGION_WORDS;
                        imem[base..base + load.image.words.len()]
                            .copy_from_slice(&load.image.words);
                        parts[part_idx].pc = load.image.entry_point;
                        for &(addr, value) in
                            load.image.data_init.iter().chain(load.extra_data.iter())
                        {
                            let phys = map
                                .translate(addr, PartitionSel::Active(part_id))
                                .expect("validated data_init");
                            ram.write(phys, value);
                        }
                    }
                }
            }
            procs.push(Processor {
                schedule: pspec.schedule.clone(),
                imem,
                ram,
                stacks: [
                    HardwareStack::new(spec.stack_depth),
                    HardwareStack::new(spec.stack_depth),
                    HardwareStack::new(spec.stack_depth),
                ],
                parts,
                active: PartitionSel::Deactivated,
                loaded,
            });
        }
        let n = procs.len();
        Ok(System {
            map,
            clock: 0,
            procs,
            noc,
            flag_fields: alloc::vec![[0; 3]; n],
            flags_visible: alloc::vec![0; n],
            trace: Trace::new(),
        })
    }

    pub fn map(&self) -> &AddressMap {
        &self.map
    }

    pub fn clock(&self) -> u64 {
        self.clock
    }

    pub fn trace(&self) -> &Trace {
        &self.trace
    }

    pub fn take_trace(&mut self) -> Trace {
        core::mem::take(&mut self.trace)
    }

    pub fn processor_count(&self) -> usize {
        self.procs.len()
    }

    pub fn partition_count(&self) -> usize {
        self.procs.len() * 3
    }

    pub fn noc(&self) -> &Noc {
        &self.noc
    }

    pub fn noc_mut(&mut self) -> &mut Noc {
        &mut self.noc
    }

    pub fn ram(&self, proc: u8) -> &Ram {
        &self.procs[proc as usize - 1].ram
    }

    pub fn ram_mut(&mut self, proc: u8) -> &mut Ram {
        &mut self.procs[proc as usize - 1].ram
    }

    pub fn partition(&self, proc: u8, part: u8) -> &PartitionContext {
        &self.procs[proc as usize - 1].parts[part as usize - 1]
    }

    pub fn partition_mut(&mut self, proc: u8, part: u8) -> &mut PartitionContext {
        &mut self.procs[proc as usize - 1].parts[part as usize - 1]
    }

    pub fn stack(&self, proc: u8, part: u8) -> &HardwareStack {
        &self.procs[proc as usize - 1].stacks[part as usize - 1]
    }

    /// Composed 32-bit flag word of a processor as currently readable
    /// (bits [31:30] active partition, then the three 10-bit fields).
    pub fn processor_flags(&self, proc: u8) -> u32 {
        self.flags_visible[proc as usize - 1]
    }

    /// Set a partition's 10-bit flag field directly (only the low ten bits
    /// are kept). The platform path for this is a store to the partition's
    /// protected base address.
    pub fn set_partition_flag(&mut self, proc: u8, part: u8, value: u32) -> u32 {
        self.flag_fields[proc as usize - 1][part as usize - 1] = (value & 0x3ff) as u16;
        self.compose_flags(proc as usize - 1)
    }

    fn compose_flags(&self, proc_idx: usize) -> u32 {
        let fields = &self.flag_fields[proc_idx];
        self.procs[proc_idx].active.bits() << 30
            | u32::from(fields[0]) << 20
            | u32::from(fields[1]) << 10
            | u32::from(fields[2])
    }

    /// True when every loaded partition has halted.
    pub fn all_halted(&self) -> bool {
        self.procs.iter().all(|p| {
            p.parts
                .iter()
                .zip(p.loaded)
                .all(|(ctx, loaded)| !loaded || ctx.halted)
        })
    }

    /// Advance the whole platform one clock cycle.
    pub fn step_cycle(&mut self) {
        let cycle = self.clock;
        for pi in 0..self.procs.len() {
            let proc_id = pi as u8 + 1;
            let (sel, executing) = self.procs[pi].schedule.query(cycle);
            if sel != self.procs[pi].active {
                let from = self.procs[pi].active.partition().unwrap_or(0);
                let to = sel.partition().unwrap_or(0);
                self.trace.push(cycle, Source::Processor(proc_id), EventKind::Switch { from, to });
                self.procs[pi].active = sel;
            }
            let Some(part_id) = sel.partition() else { continue };
            if !executing {
                continue;
            }
            let part_idx = part_id as usize - 1;
            let proc = &mut self.procs[pi];
            if !proc.loaded[part_idx] || proc.parts[part_idx].halted {
                continue;
            }
            let region = part_idx * IMEM_REGION_WORDS;
            let (parts, rest) = (&mut proc.parts, (&mut proc.ram, &mut proc.stacks, &proc.imem));
            let (ram, stacks, imem) = rest;
            let mut bus = SystemBus {
                map: &self.map,
                proc_id,
                part_id,
                cycle,
                imem: &imem[region..region + IMEM_REGION_WORDS],
                ram,
                stack: &mut stacks[part_idx],
                noc: &mut self.noc,
                flag_fields: &mut self.flag_fields[pi],
                flags_visible: &self.flags_visible,
                clock: cycle,
                trace: &mut self.trace,
            };
            cpu::step_partition(&mut parts[part_idx], &mut bus, (IMEM_REGION_WORDS - 1) as u32);
        }
        self.noc.step(cycle, &mut self.trace);
        for pi in 0..self.procs.len() {
            self.flags_visible[pi] = self.compose_flags(pi);
        }
        self.clock += 1;
    }

    /// Run until `max_cycles` cycles have elapsed or every loaded partition
    /// has halted. Returns the number of cycles stepped.
    pub fn run(&mut self, max_cycles: u64) -> u64 {
        let mut stepped = 0;
        while stepped < max_cycles {
            if self.all_halted() {
                break;
            }
            self.step_cycle();
            stepped += 1;
        }
        stepped
    }
}

/// The platform's view handed to one partition step: instruction region,
/// MCU-translated data space with the peripheral overlay, the partition's
/// hardware stack, and the trace.
struct SystemBus<'a> {
    map: &'a AddressMap,
    proc_id: u8,
    part_id: u8,
    cycle: u64,
    imem: &'a [u32],
    ram: &'a mut Ram,
    stack: &'a mut HardwareStack,
    noc: &'a mut Noc,
    flag_fields: &'a mut [u16; 3],
    flags_visible: &'a [u32],
    clock: u64,
    trace: &'a mut Trace,
}

impl SystemBus<'_> {
    fn source(&self) -> Source {
        Source::Partition { proc: self.proc_id, part: self.part_id }
    }

    fn visible(&self, protected: bool, addr_reg: u32) -> u32 {
        let offset = addr_reg & self.map.offset_mask();
        if protected {
            self.map.segment_words() | offset
        } else {
            offset
        }
    }

    fn ni(&self) -> NiId {
        NiId::new(self.proc_id, self.part_id)
    }
}

impl Bus for SystemBus<'_> {
    fn fetch_word(&mut self, pc: u32) -> u32 {
        self.imem[pc as usize]
    }

    fn load(&mut self, protected: bool, addr_reg: u32) -> u32 {
        let visible = self.visible(protected, addr_reg);
        let phys = self
            .map
            .translate(visible, PartitionSel::Active(self.part_id))
            .expect("active partition");
        let value = match self.map.classify(phys) {
            Target::Ram | Target::PartitionBase { .. } => self.ram.read(phys),
            Target::ClockLo => self.clock as u32,
            Target::ClockHi => (self.clock >> 32) as u32,
            Target::ProcessorFlags { proc } => {
                self.flags_visible.get(proc as usize - 1).copied().unwrap_or(0)
            }
            Target::NiTx { .. } => 0,
            Target::NiRxPayload { index, .. } => {
                self.noc.ni_read(self.ni(), index).map(|(payload, _)| payload).unwrap_or(0)
            }
            Target::NiRxFresh { index, .. } => {
                u32::from(self.noc.ni_peek_fresh(self.ni(), index).unwrap_or(false))
            }
        };
        let source = self.source();
        self.trace.push(self.cycle, source, EventKind::MemRead { addr: visible, value });
        value
    }

    fn store(&mut self, protected: bool, addr_reg: u32, value: u32) {
        let visible = self.visible(protected, addr_reg);
        let phys = self
            .map
            .translate(visible, PartitionSel::Active(self.part_id))
            .expect("active partition");
        let source = self.source();
        match self.map.classify(phys) {
            Target::Ram => {
                self.ram.write(phys, value);
                self.trace.push(self.cycle, source, EventKind::MemWrite { addr: visible, value });
            }
            Target::PartitionBase { partition } => {
                debug_assert_eq!(partition, self.part_id);
                let field = (value & 0x3ff) as u16;
                self.flag_fields[self.part_id as usize - 1] = field;
                self.trace.push(
                    self.cycle,
                    source,
                    EventKind::FlagSet { partition: self.part_id, value: field },
                );
            }
            Target::ClockLo | Target::ClockHi | Target::ProcessorFlags { .. }
            | Target::NiRxPayload { .. } | Target::NiRxFresh { .. } => {
                self.trace.push(self.cycle, source, EventKind::IgnoredWrite { addr: visible, value });
            }
            Target::NiTx { index, .. } => {
                let ni = self.ni();
                self.noc.ni_send(ni, index, value, self.cycle, self.trace);
            }
        }
    }

    fn push_return(&mut self, return_pc: u32) -> Result<(), crate::trace::FaultKind> {
        self.stack.push(self.ram, self.map, self.part_id, return_pc)
    }

    fn pop_return(&mut self) -> Result<u32, crate::trace::FaultKind> {
        self.stack.pop(self.ram, self.map, self.part_id)
    }

    fn emit(&mut self, kind: EventKind) {
        let source = self.source();
        self.trace.push(self.cycle, source, kind);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::isa::assemble;
    use crate::sched::Window;

    fn halt_image() -> PartitionLoad {
        PartitionLoad { image: assemble("HALT").unwrap(), extra_data: Vec::new() }
    }

    fn single_proc_spec(program: &str) -> SystemSpec {
        SystemSpec {
            address_bits: 16,
            stack_depth: 256,
            processors: alloc::vec![ProcessorSpec {
                schedule: PartitionSchedule::always(1, 1 << 20),
                partitions: [
                    Some(PartitionLoad { image: assemble(program).unwrap(), extra_data: Vec::new() }),
                    None,
                    None,
                ],
            }],
            noc: NocSpec { t_slot: 8, s_total: 1, channels: Vec::new() },
        }
    }

    #[test]
    fn default_platform_structure() {
        let spec = scenarios::default_platform();
        let system = System::build(&spec).unwrap();
        assert_eq!(system.processor_count(), 4);
        assert_eq!(system.partition_count(), 12);
        assert_eq!(system.noc().ni_count(), 12);
        assert_eq!(system.noc().router_count(), 4);
    }

    #[test]
    fn overlapping_windows_rejected_with_diagnostic() {
        let mut spec = single_proc_spec("HALT");
        spec.processors[0].schedule = PartitionSchedule::new(
            10,
            alloc::vec![
                Window { partition: 1, start: 0, duration: 6 },
                Window { partition: 2, start: 4, duration: 4 },
            ],
            0,
        );
        let errors = System::build(&spec).unwrap_err();
        assert!(errors.iter().any(|e| matches!(
            e,
            BuildError::Schedule { violation: ScheduleViolation::Contention { .. }, .. }
        )));
    }

    #[test]
    fn oversubscribed_slot_table_rejected() {
        let mut spec = single_proc_spec("HALT");
        spec.noc.channels.push(crate::noc::ChannelConfig {
            id: 0,
            src: NiId::new(1, 1),
            dst: NiId::new(1, 2),
            slots: alloc::vec![0, 1],
            base_priority: 0,
        });
        // s_total is 1, the channel claims slot 1 too.
        let errors = System::build(&spec).unwrap_err();
        assert!(errors
            .iter()
            .any(|e| matches!(e, BuildError::Noc(NocConfigError::SlotOutOfRange { .. }))));
    }

    #[test]
    fn all_halt_images_trace_is_fill_then_halt() {
        let spec = SystemSpec {
            address_bits: 16,
            stack_depth: 256,
            processors: alloc::vec![ProcessorSpec {
                schedule: PartitionSchedule::always(1, 100),
                partitions: [Some(halt_image()), None, None],
            }],
            noc: NocSpec { t_slot: 8, s_total: 1, channels: Vec::new() },
        };
        let mut system = System::build(&spec).unwrap();
        system.run(50);
        let kinds: Vec<_> = system.trace().iter().map(|e| e.kind).collect();
        // Switch-on, pipeline-fill fetches, one retire, halt.
        assert!(matches!(kinds[0], EventKind::Switch { from: 0, to: 1 }));
        assert!(kinds.iter().any(|k| matches!(k, EventKind::Halt)));
        assert!(system.all_halted());
        let halt_cycle = system
            .trace()
            .iter()
            .find(|e| matches!(e.kind, EventKind::Halt))
            .unwrap()
            .cycle;
        assert_eq!(halt_cycle, 3);
    }

    #[test]
    fn flag_store_composes_processor_word() {
        // Partition 1 stores 0x12345 to its base: field becomes 0x345,
        // readable (with the active bits) one cycle later.
        let program = "\
XOR r1, r1, r1
XOR r2, r2, r2
.word V 0x12345
LOADK r2, V
ST.P r1, r2
HALT
";
        let mut system = System::build(&single_proc_spec(program)).unwrap();
        system.run(200);
        let word = system.processor_flags(1);
        assert_eq!(word & 0x3fff_ffff, 0x345 << 20);
        let flag_event = system
            .trace()
            .iter()
            .find(|e| matches!(e.kind, EventKind::FlagSet { .. }))
            .unwrap();
        assert_eq!(flag_event.kind, EventKind::FlagSet { partition: 1, value: 0x345 });
    }

    #[test]
    fn flag_word_reflects_active_partition_bits() {
        // A never-halting partition 2: the visible word carries 10 in bits
        // [31:30] once partition 2 is running.
        let spec = SystemSpec {
            address_bits: 16,
            stack_depth: 256,
            processors: alloc::vec![ProcessorSpec {
                schedule: PartitionSchedule::always(2, 1000),
                partitions: [None, Some(PartitionLoad {
                    image: assemble("loop:\nNOP\nNOP\nNOP\nNOP\nNOP\nNOP\nNOP\nNOP\nJMPR r0").unwrap(),
                    extra_data: Vec::new(),
                }), None],
            }],
            noc: NocSpec { t_slot: 8, s_total: 1, channels: Vec::new() },
        };
        let mut system = System::build(&spec).unwrap();
        system.run(20);
        assert_eq!(system.processor_flags(1) >> 30, 0b10);
    }

    #[test]
    fn writes_to_shared_flag_slots_are_ignored() {
        // Store to shared slot 2 (processor 1 flags): word unchanged,
        // ignored_write event in the trace. Slot address 2 built from 1+1.
        let program = "\
XOR r1, r1, r1
.word ONE 1
LOADK r2, ONE
ADD r3, r2, r2   ; r3 = 2 (flag slot of processor 1)
.word V 77
LOADK r4, V
ST.S r3, r4
HALT
";
        let mut system = System::build(&single_proc_spec(program)).unwrap();
        system.run(300);
        assert!(system
            .trace()
            .iter()
            .any(|e| matches!(e.kind, EventKind::IgnoredWrite { addr: 2, value: 77 })));
        assert_eq!(system.processor_flags(1) & 0x3fff_ffff, 0);
        // The shared RAM word behind the overlay is also untouched.
        assert_eq!(system.ram(1).read(2), 0);
    }

    #[test]
    fn clock_is_readable_and_monotonic() {
        // Read clock_L twice some cycles apart; values must differ by the
        // cycle distance of the two loads.
        let program = "\
XOR r1, r1, r1
LD.S r2, r1
NOP
NOP
NOP
NOP
LD.S r3, r1
HALT
";
        let mut system = System::build(&single_proc_spec(program)).unwrap();
        system.run(50);
        let ctx = system.partition(1, 1);
        assert_eq!(ctx.registers[3] - ctx.registers[2], 5);
    }

    #[test]
    fn run_prefix_is_stable_under_longer_max_cycles() {
        let program = "loop:\nNOP\nNOP\nNOP\nNOP\nJMPR r0";
        let mut short = System::build(&single_proc_spec(program)).unwrap();
        let mut long = System::build(&single_proc_spec(program)).unwrap();
        short.run(100);
        long.run(200);
        let cutoff = |t: &Trace| -> Vec<_> {
            t.iter().filter(|e| e.cycle < 100).copied().collect::<Vec<_>>()
        };
        assert_eq!(cutoff(short.trace()), cutoff(long.trace()));
    }

    #[test]
    fn repeated_runs_are_bit_identical ()  {
        let spec = scenarios::default_platform();
        let mut a = System::build(&spec).unwrap();
        let mut b = System::build(&spec).unwrap();
        a.run(500);
        b.run(500);
        assert_eq!(a.trace().fingerprint(), b.trace().fingerprint());
    }
}
