//! Cycle model of one partition's view of the processor: a four-stage
//! pipeline (fetch, decode, execute, memory-access) that issues and retires
//! one instruction per cycle.
//!
//! Timing is data-independent by construction: every instruction spends one
//! cycle per stage and retires three cycles after its fetch, and every
//! control-flow instruction (taken or not) annuls the three younger slots
//! behind it, so the next useful fetch lands four cycles after it. Register
//! and memory semantics are applied in program order at retire, which under
//! a one-retire-per-cycle pipeline is equivalent to full forwarding.
//!
//! While a partition is inactive the whole context — registers, program
//! counter and the pipeline latches — is simply not stepped, which is the
//! frozen-state rule: execution resumes mid-flight at the next window.

use crate::isa::{Instruction, Opcode};
use crate::trace::{EventKind, FaultKind};

/// One in-flight instruction: the word and the pc it was fetched from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StageToken {
    pub pc: u32,
    pub word: u32,
}

/// Full replicated state of one partition. Frozen bit-for-bit whenever the
/// partition is not being stepped.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartitionContext {
    pub registers: [u32; 32],
    pub pc: u32,
    pub halted: bool,
    /// Pipeline latches, youngest to oldest.
    pub fetch: Option<StageToken>,
    pub decode: Option<StageToken>,
    pub execute: Option<StageToken>,
    pub memory: Option<StageToken>,
}

impl Default for PartitionContext {
    fn default() -> Self {
        PartitionContext {
            registers: [0; 32],
            pc: 0,
            halted: false,
            fetch: None,
            decode: None,
            execute: None,
            memory: None,
        }
    }
}

impl PartitionContext {
    pub fn new() -> PartitionContext {
        PartitionContext::default()
    }
}

/// What the pipeline needs from the platform: instruction fetch, the two
/// data regions behind the MCU, the hardware stack, and the event log.
pub trait Bus {
    fn fetch_word(&mut self, pc: u32) -> u32;
    /// Data load; `protected` selects the region, the low n-2 bits of
    /// `addr_reg` form the offset.
    fn load(&mut self, protected: bool, addr_reg: u32) -> u32;
    fn store(&mut self, protected: bool, addr_reg: u32, value: u32);
    fn push_return(&mut self, return_pc: u32) -> Result<(), FaultKind>;
    fn pop_return(&mut self) -> Result<u32, FaultKind>;
    fn emit(&mut self, kind: EventKind);
}

/// Advance the partition by one clock cycle.
pub fn step_partition<B: Bus>(ctx: &mut PartitionContext, bus: &mut B, pc_mask: u32) {
    if ctx.halted {
        return;
    }

    // Stage advance.
    ctx.memory = ctx.execute.take();
    ctx.execute = ctx.decode.take();
    ctx.decode = ctx.fetch.take();

    // Retire the memory-stage instruction.
    let mut suppress_fetch = false;
    if let Some(tok) = ctx.memory.take() {
        bus.emit(EventKind::Retire { pc: tok.pc });
        match Instruction::decode(tok.word) {
            Err(_) => {
                bus.emit(EventKind::Fault(FaultKind::InvalidOpcode { word: tok.word }));
                halt(ctx);
                return;
            }
            Ok(instr) => {
                if let Err(fault) = execute(ctx, bus, tok.pc, instr, pc_mask, &mut suppress_fetch) {
                    bus.emit(EventKind::Fault(fault));
                    halt(ctx);
                    return;
                }
                if ctx.halted {
                    return;
                }
            }
        }
    }

    if !suppress_fetch {
        let pc = ctx.pc & pc_mask;
        let word = bus.fetch_word(pc);
        bus.emit(EventKind::Fetch { pc, word });
        ctx.fetch = Some(StageToken { pc, word });
        ctx.pc = (pc + 1) & pc_mask;
    }
}

fn halt(ctx: &mut PartitionContext) {
    ctx.halted = true;
    ctx.fetch = None;
    ctx.decode = None;
    ctx.execute = None;
    ctx.memory = None;
}

/// Annul the younger in-flight instructions and steer fetch to `target`.
fn redirect(ctx: &mut PartitionContext, target: u32, pc_mask: u32, suppress_fetch: &mut bool) {
    ctx.fetch = None;
    ctx.decode = None;
    ctx.execute = None;
    ctx.pc = target & pc_mask;
    *suppress_fetch = true;
}

fn execute<B: Bus>(
    ctx: &mut PartitionContext,
    bus: &mut B,
    pc: u32,
    instr: Instruction,
    pc_mask: u32,
    suppress_fetch: &mut bool,
) -> Result<(), FaultKind> {
    let rs1 = ctx.registers[instr.rs1 as usize];
    let rs2 = ctx.registers[instr.rs2 as usize];
    let rd_val = ctx.registers[instr.rd as usize];
    match instr.opcode {
        Opcode::Nop => {}
        Opcode::Halt => {
            bus.emit(EventKind::Halt);
            halt(ctx);
        }
        Opcode::Add => ctx.registers[instr.rd as usize] = rs1.wrapping_add(rs2),
        Opcode::Sub => ctx.registers[instr.rd as usize] = rs1.wrapping_sub(rs2),
        Opcode::And => ctx.registers[instr.rd as usize] = rs1 & rs2,
        Opcode::Or => ctx.registers[instr.rd as usize] = rs1 | rs2,
        Opcode::Xor => ctx.registers[instr.rd as usize] = rs1 ^ rs2,
        Opcode::Sll => ctx.registers[instr.rd as usize] = rs1 << (rs2 & 31),
        Opcode::Srl => ctx.registers[instr.rd as usize] = rs1 >> (rs2 & 31),
        Opcode::Slt => {
            ctx.registers[instr.rd as usize] = u32::from((rs1 as i32) < (rs2 as i32));
        }
        Opcode::Mul => ctx.registers[instr.rd as usize] = rs1.wrapping_mul(rs2),
        Opcode::LdP => ctx.registers[instr.rd as usize] = bus.load(true, rs1),
        Opcode::LdS => ctx.registers[instr.rd as usize] = bus.load(false, rs1),
        Opcode::StP => bus.store(true, rs1, rs2),
        Opcode::StS => bus.store(false, rs1, rs2),
        Opcode::Beq => {
            let target = if rs1 == rs2 { rd_val } else { pc.wrapping_add(1) };
            redirect(ctx, target, pc_mask, suppress_fetch);
        }
        Opcode::Blt => {
            let target = if (rs1 as i32) < (rs2 as i32) { rd_val } else { pc.wrapping_add(1) };
            redirect(ctx, target, pc_mask, suppress_fetch);
        }
        Opcode::Jmpr => redirect(ctx, rd_val, pc_mask, suppress_fetch),
        Opcode::Call => {
            bus.push_return(pc.wrapping_add(1))?;
            redirect(ctx, rd_val, pc_mask, suppress_fetch);
        }
        Opcode::Ret => {
            let target = bus.pop_return()?;
            redirect(ctx, target, pc_mask, suppress_fetch);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec::Vec;

    struct TestBus {
        imem: Vec<u32>,
        data: [u32; 64],
        stack: Vec<u32>,
        events: Vec<EventKind>,
    }

    impl TestBus {
        fn new(program: &[Instruction]) -> TestBus {
            TestBus {
                imem: program.iter().map(|i| i.encode()).collect(),
                data: [0; 64],
                stack: Vec::new(),
                events: Vec::new(),
            }
        }
    }

    impl Bus for TestBus {
        fn fetch_word(&mut self, pc: u32) -> u32 {
            self.imem.get(pc as usize).copied().unwrap_or(0)
        }
        fn load(&mut self, _protected: bool, addr_reg: u32) -> u32 {
            self.data[(addr_reg & 63) as usize]
        }
        fn store(&mut self, _protected: bool, addr_reg: u32, value: u32) {
            self.data[(addr_reg & 63) as usize] = value;
        }
        fn push_return(&mut self, return_pc: u32) -> Result<(), FaultKind> {
            if self.stack.len() == 4 {
                return Err(FaultKind::StackOverflow);
            }
            self.stack.push(return_pc);
            Ok(())
        }
        fn pop_return(&mut self) -> Result<u32, FaultKind> {
            self.stack.pop().ok_or(FaultKind::StackUnderflow)
        }
        fn emit(&mut self, kind: EventKind) {
            self.events.push(kind);
        }
    }

    fn run(program: &[Instruction], cycles: usize) -> (PartitionContext, TestBus, Vec<(usize, EventKind)>) {
        let mut ctx = PartitionContext::new();
        let mut bus = TestBus::new(program);
        let mut timeline = Vec::new();
        for cycle in 0..cycles {
            let before = bus.events.len();
            step_partition(&mut ctx, &mut bus, 0xffff);
            for ev in &bus.events[before..] {
                timeline.push((cycle, *ev));
            }
        }
        (ctx, bus, timeline)
    }

    fn retire_cycles(timeline: &[(usize, EventKind)]) -> Vec<usize> {
        timeline
            .iter()
            .filter(|(_, e)| matches!(e, EventKind::Retire { .. }))
            .map(|(c, _)| *c)
            .collect()
    }

    #[test]
    fn nop_stream_retires_one_per_cycle_after_fill() {
        let program = [Instruction::nullary(Opcode::Nop); 6];
        let (_, _, timeline) = run(&program, 12);
        // First retire lands in the fourth cycle (index 3), then one each cycle.
        assert_eq!(retire_cycles(&timeline)[..6], [3, 4, 5, 6, 7, 8]);
    }

    #[test]
    fn straight_line_program_takes_count_plus_fill_cycles() {
        // k instructions, last retire at cycle k+2 (duration k+3).
        for k in [1usize, 2, 5, 9] {
            let program: Vec<Instruction> =
                (0..k).map(|_| Instruction::nullary(Opcode::Nop)).collect();
            let (_, _, timeline) = run(&program, k + 8);
            assert_eq!(*retire_cycles(&timeline).last().unwrap(), k + 2);
        }
    }

    #[test]
    fn halt_stops_execution_at_retire() {
        let program = [Instruction::nullary(Opcode::Halt)];
        let (ctx, _, timeline) = run(&program, 10);
        assert!(ctx.halted);
        let halt_at = timeline
            .iter()
            .find(|(_, e)| matches!(e, EventKind::Halt))
            .map(|(c, _)| *c)
            .unwrap();
        assert_eq!(halt_at, 3);
        // Nothing retires afterwards.
        assert!(retire_cycles(&timeline).iter().all(|c| *c <= 3));
    }

    #[test]
    fn taken_and_not_taken_branches_cost_the_same() {
        // r1 == r1 -> taken; r1 < r1 -> not taken. Both paths reach HALT in
        // the same cycle because either way three slots are annulled.
        // Target register r5 carries word index 3 (the HALT).
        let taken_prog = [
            Instruction::new(Opcode::Beq, 5, 1, 1),
            Instruction::nullary(Opcode::Nop),
            Instruction::nullary(Opcode::Nop),
            Instruction::nullary(Opcode::Halt),
        ];
        let not_taken_prog = [
            Instruction::new(Opcode::Blt, 5, 1, 1), // r1 < r1 false
            Instruction::nullary(Opcode::Nop),
            Instruction::nullary(Opcode::Nop),
            Instruction::nullary(Opcode::Halt),
        ];
        let halt_cycle = |program: &[Instruction], r5: u32| {
            let mut ctx = PartitionContext::new();
            ctx.registers[5] = r5;
            let mut bus = TestBus::new(program);
            for cycle in 0..32 {
                step_partition(&mut ctx, &mut bus, 0xffff);
                if ctx.halted {
                    return cycle;
                }
            }
            panic!("no halt");
        };
        // Taken: branch retires at 3, HALT fetched at 7, retires at 10.
        assert_eq!(halt_cycle(&taken_prog, 3), 10);
        // Not taken: redirect to pc+1, NOPs at 1,2 then HALT at 3 refetched
        // on the same schedule.
        assert_eq!(halt_cycle(&not_taken_prog, 3), 10);
    }

    #[test]
    fn call_ret_use_the_stack() {
        // r5 = 4 (subroutine address). CALL, then HALT at word 1; the
        // subroutine stores r7 at the address in r6 and returns.
        let program = [
            Instruction::new(Opcode::Call, 5, 0, 0),
            Instruction::nullary(Opcode::Halt),
            Instruction::nullary(Opcode::Nop),
            Instruction::nullary(Opcode::Nop),
            Instruction::new(Opcode::StP, 0, 6, 7),
            Instruction::nullary(Opcode::Ret),
        ];
        let mut ctx = PartitionContext::new();
        ctx.registers[5] = 4;
        ctx.registers[6] = 9; // address register
        ctx.registers[7] = 0xaa; // value register
        let mut bus = TestBus::new(&program);
        for _ in 0..40 {
            step_partition(&mut ctx, &mut bus, 0xffff);
        }
        assert!(ctx.halted);
        assert_eq!(bus.data[9], 0xaa);
        assert!(bus.stack.is_empty());
    }

    #[test]
    fn invalid_word_faults_and_halts() {
        let program = [Instruction::nullary(Opcode::Nop)];
        let mut bus = TestBus::new(&program);
        bus.imem.push(0xff00_0000); // unknown opcode
        let mut ctx = PartitionContext::new();
        for _ in 0..10 {
            step_partition(&mut ctx, &mut bus, 0xffff);
        }
        assert!(ctx.halted);
        assert!(bus
            .events
            .iter()
            .any(|e| matches!(e, EventKind::Fault(FaultKind::InvalidOpcode { .. }))));
    }

    #[test]
    fn stack_underflow_faults() {
        let program = [Instruction::nullary(Opcode::Ret)];
        let (ctx, bus, _) = run(&program, 10);
        assert!(ctx.halted);
        assert!(bus
            .events
            .iter()
            .any(|e| matches!(e, EventKind::Fault(FaultKind::StackUnderflow))));
    }

    #[test]
    fn alu_semantics() {
        // r1=7, r2=3: check a few ops end-to-end.
        let program = [
            Instruction::new(Opcode::Add, 3, 1, 2),
            Instruction::new(Opcode::Sub, 4, 1, 2),
            Instruction::new(Opcode::Sll, 5, 1, 2),
            Instruction::new(Opcode::Slt, 6, 2, 1),
            Instruction::new(Opcode::Mul, 7, 1, 2),
            Instruction::nullary(Opcode::Halt),
        ];
        let mut ctx = PartitionContext::new();
        ctx.registers[1] = 7;
        ctx.registers[2] = 3;
        let mut bus = TestBus::new(&program);
        for _ in 0..20 {
            step_partition(&mut ctx, &mut bus, 0xffff);
        }
        assert_eq!(ctx.registers[3], 10);
        assert_eq!(ctx.registers[4], 4);
        assert_eq!(ctx.registers[5], 7 << 3);
        assert_eq!(ctx.registers[6], 1);
        assert_eq!(ctx.registers[7], 21);
    }
}
