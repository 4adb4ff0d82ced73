//! Time-triggered partition schedule: the SwCU configuration table.

use alloc::vec::Vec;

use crate::mem::PartitionSel;

/// One execution window inside the period. Partition ids are 1-3.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Window {
    pub partition: u8,
    pub start: u64,
    pub duration: u64,
}

/// Repeating partition schedule. The first `switch_overhead` cycles of every
/// window are consumed by the switch and do not execute instructions; the
/// execution budget of a window is therefore `duration - switch_overhead`.
///
/// `phase` shifts the whole timetable forward in time, which the analysis
/// harnesses use to sweep relative schedule alignments between processors.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartitionSchedule {
    pub period: u64,
    pub windows: Vec<Window>,
    pub switch_overhead: u64,
    pub phase: u64,
}

impl PartitionSchedule {
    pub fn new(period: u64, windows: Vec<Window>, switch_overhead: u64) -> PartitionSchedule {
        PartitionSchedule { period, windows, switch_overhead, phase: 0 }
    }

    /// Schedule with a single partition active for the entire period.
    pub fn always(partition: u8, period: u64) -> PartitionSchedule {
        PartitionSchedule::new(
            period,
            alloc::vec![Window { partition, start: 0, duration: period }],
            0,
        )
    }

    pub fn with_phase(mut self, phase: u64) -> PartitionSchedule {
        self.phase = phase;
        self
    }

    /// Position within the period at an absolute cycle.
    fn position(&self, cycle: u64) -> u64 {
        let phase = if self.period == 0 { 0 } else { self.phase % self.period };
        (cycle + self.period.saturating_sub(phase)) % self.period.max(1)
    }

    /// Which partition owns the cycle, and whether it is past the switch
    /// overhead and actually executing.
    pub fn query(&self, cycle: u64) -> (PartitionSel, bool) {
        let pos = self.position(cycle);
        for w in &self.windows {
            if pos >= w.start && pos < w.start + w.duration {
                let executing = pos >= w.start + self.switch_overhead;
                return (PartitionSel::Active(w.partition), executing);
            }
        }
        (PartitionSel::Deactivated, false)
    }

    /// Execution budget of the window granted to `partition`, summed over
    /// the period.
    pub fn execution_budget(&self, partition: u8) -> u64 {
        self.windows
            .iter()
            .filter(|w| w.partition == partition)
            .map(|w| w.duration.saturating_sub(self.switch_overhead))
            .sum()
    }
}
