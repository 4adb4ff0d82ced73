//! Static timing analysis: worst-case execution time of tasks under
//! time-triggered partitioning, the hub latency bound of the NoC, and the
//! partition-schedule validity rules. Every bound here is cross-checked
//! against the cycle-accurate simulator by the verification harnesses.

use alloc::vec::Vec;
use core::fmt;

use crate::sched::PartitionSchedule;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AnalysisError {
    /// A parameter is outside its domain (named for diagnostics).
    Domain(&'static str),
    /// Case 1: the collective task demand exceeds the partition budget.
    BudgetExceeded { demand: u64, budget: u64 },
    /// Case 3 unsynchronized needs the consumer's partition budgets.
    MissingBudgets,
}

impl fmt::Display for AnalysisError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AnalysisError::Domain(what) => write!(f, "parameter out of domain: {what}"),
            AnalysisError::BudgetExceeded { demand, budget } => {
                write!(f, "task demand {demand} exceeds partition budget {budget}")
            }
            AnalysisError::MissingBudgets => {
                write!(f, "unsynchronized case 3 requires the three partition budgets")
            }
        }
    }
}

impl core::error::Error for AnalysisError {}

/// WCET of a task with standalone execution time `tau_a` placed in a
/// partition with execution budget `tau_p` and period `lambda_p`:
/// `(ceil(tau_a/tau_p) - 1) * lambda_p + (tau_a - (ceil(tau_a/tau_p) - 1) * tau_p)`.
///
/// Partitioning has no effect when `tau_p >= tau_a` (single window).
pub fn partitioned_wcet(tau_a: u64, tau_p: u64, lambda_p: u64) -> Result<u64, AnalysisError> {
    if tau_a == 0 {
        return Err(AnalysisError::Domain("tau_a must be at least 1"));
    }
    if tau_p == 0 {
        return Err(AnalysisError::Domain("tau_p must be at least 1"));
    }
    if tau_p > lambda_p {
        return Err(AnalysisError::Domain("tau_p must not exceed lambda_p"));
    }
    let windows = tau_a.div_ceil(tau_p);
    Ok((windows - 1) * lambda_p + (tau_a - (windows - 1) * tau_p))
}

/// Case 1: tasks scheduled sequentially in one partition. The response is
/// the plain sum as long as the budget covers the collective demand.
pub fn wcet_case1(tasks: &[u64], budget: u64) -> Result<u64, AnalysisError> {
    if tasks.is_empty() {
        return Err(AnalysisError::Domain("at least one task required"));
    }
    if tasks.iter().any(|t| *t == 0) {
        return Err(AnalysisError::Domain("task WCETs must be at least 1"));
    }
    let demand: u64 = tasks.iter().sum();
    if demand > budget {
        return Err(AnalysisError::BudgetExceeded { demand, budget });
    }
    Ok(demand)
}

/// Case 2: producer released `gamma_a` into partition 1's window, consumer
/// released `gamma_b` into the directly following partition 2 window:
/// `(tau_p1 - gamma_a) + (gamma_b + tau_p2_b) + delta_so`.
pub fn wcet_case2(
    tau_p1: u64,
    gamma_a: u64,
    gamma_b: u64,
    tau_p2_b: u64,
    delta_so: u64,
) -> Result<u64, AnalysisError> {
    if gamma_a > tau_p1 {
        return Err(AnalysisError::Domain("gamma_a must not exceed tau_p1"));
    }
    if tau_p2_b == 0 {
        return Err(AnalysisError::Domain("tau_p2_b must be at least 1"));
    }
    Ok((tau_p1 - gamma_a) + (gamma_b + tau_p2_b) + delta_so)
}

/// Scheduling relationship between the two processors of a case-3 system.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Case3Mode {
    /// Consumer window aligned with data arrival; the communication delay
    /// appears explicitly.
    Synchronized { delta_cd: u64 },
    /// Unknown relative schedule state: one full partition cycle of the
    /// consumer processor (its three budgets) is charged instead.
    Unsynchronized { budgets: [u64; 3] },
}

/// Case 3: producer and consumer on different processors.
pub fn wcet_case3(wcet_a: u64, wcet_b: u64, mode: Case3Mode) -> Result<u64, AnalysisError> {
    if wcet_a == 0 || wcet_b == 0 {
        return Err(AnalysisError::Domain("task WCETs must be at least 1"));
    }
    match mode {
        Case3Mode::Synchronized { delta_cd } => Ok(wcet_a + delta_cd + wcet_b),
        Case3Mode::Unsynchronized { budgets } => {
            if budgets.iter().any(|b| *b == 0) {
                return Err(AnalysisError::MissingBudgets);
            }
            Ok(wcet_a + budgets[0] + budgets[1] + budgets[2] + wcet_b - 1)
        }
    }
}

/// Worst-case hub latency of a channel owning `s_channel` of `s_total`
/// slots: `(floor((s_total - 1) / s_channel) + 1) * t_slot + 1`.
///
/// The bound assumes the channel's slots are spread evenly through the
/// table; clustering a channel's slots enlarges the real worst case.
pub fn channel_latency(s_total: u16, s_channel: u16, t_slot: u64) -> Result<u64, AnalysisError> {
    if s_channel == 0 {
        return Err(AnalysisError::Domain("s_channel must be at least 1"));
    }
    if s_channel > s_total {
        return Err(AnalysisError::Domain("s_channel must not exceed s_total"));
    }
    if t_slot == 0 {
        return Err(AnalysisError::Domain("t_slot must be at least 1"));
    }
    let gap = u64::from((s_total - 1) / s_channel) + 1;
    Ok(gap * t_slot + 1)
}

/// Worst-case end-to-end delay: the two fixed 8-cycle edges around the hub
/// term.
pub fn end_to_end_bound(s_total: u16, s_channel: u16, t_slot: u64) -> Result<u64, AnalysisError> {
    Ok(crate::noc::EDGE_CYCLES + channel_latency(s_total, s_channel, t_slot)? + crate::noc::EDGE_CYCLES)
}

/// A violated scheduling assumption.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ScheduleViolation {
    /// A window does not fit inside the period (or the period is zero), so
    /// the schedule cannot repeat identically: the partition is aperiodic.
    Aperiodic { window: usize },
    /// Two windows overlap: partitions would compete for execution access,
    /// contradicting uniform priority.
    Contention { first: usize, second: usize },
    /// A degenerate boundary (zero-duration window or two windows starting
    /// at the same cycle) has no well-defined time trigger.
    NotTimeTriggered { window: usize },
    /// Partition id outside 1-3.
    BadPartition { window: usize, partition: u8 },
}

impl fmt::Display for ScheduleViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScheduleViolation::Aperiodic { window } => {
                write!(f, "window {window} exceeds the period: schedule is aperiodic")
            }
            ScheduleViolation::Contention { first, second } => {
                write!(f, "windows {first} and {second} overlap: partitions would contend")
            }
            ScheduleViolation::NotTimeTriggered { window } => {
                write!(f, "window {window} has no well-defined time-triggered boundary")
            }
            ScheduleViolation::BadPartition { window, partition } => {
                write!(f, "window {window} names invalid partition {partition}")
            }
        }
    }
}

/// Outcome of checking a schedule against the three platform assumptions:
/// periodic partitions, time-triggered switching, uniform priority.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ScheduleReport {
    pub violations: Vec<ScheduleViolation>,
}

impl ScheduleReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

pub fn validate_schedule(schedule: &PartitionSchedule) -> ScheduleReport {
    let mut violations = Vec::new();
    if schedule.period == 0 {
        violations.push(ScheduleViolation::Aperiodic { window: 0 });
        return ScheduleReport { violations };
    }
    for (i, w) in schedule.windows.iter().enumerate() {
        if !(1..=3).contains(&w.partition) {
            violations.push(ScheduleViolation::BadPartition { window: i, partition: w.partition });
        }
        if w.duration == 0 {
            violations.push(ScheduleViolation::NotTimeTriggered { window: i });
        }
        if w.start >= schedule.period || w.start + w.duration > schedule.period {
            violations.push(ScheduleViolation::Aperiodic { window: i });
        }
    }
    for i in 0..schedule.windows.len() {
        for j in i + 1..schedule.windows.len() {
            let a = &schedule.windows[i];
            let b = &schedule.windows[j];
            if a.start == b.start {
                violations.push(ScheduleViolation::NotTimeTriggered { window: j });
                continue;
            }
            let (lo, hi) = if a.start < b.start { (a, b) } else { (b, a) };
            if lo.start + lo.duration > hi.start {
                violations.push(ScheduleViolation::Contention { first: i, second: j });
            }
        }
    }
    ScheduleReport { violations }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sched::Window;
    use alloc::vec;

    #[test]
    fn partitioned_wcet_matches_closed_form_examples() {
        // Budget larger than the task: partitioning has no effect.
        assert_eq!(partitioned_wcet(100, 200, 400).unwrap(), 100);
        // Exact single-window fit.
        assert_eq!(partitioned_wcet(2, 2, 10).unwrap(), 2);
        // Three windows: timeline oracle in tests/analysis_oracle.rs derives 13.
        assert_eq!(partitioned_wcet(5, 2, 6).unwrap(), 13);
    }

    #[test]
    fn partitioned_wcet_rejects_bad_domains() {
        assert!(partitioned_wcet(0, 1, 1).is_err());
        assert!(partitioned_wcet(1, 0, 1).is_err());
        assert!(partitioned_wcet(1, 5, 4).is_err());
    }

    #[test]
    fn case1_sums_or_rejects() {
        assert_eq!(wcet_case1(&[5, 7], 20).unwrap(), 12);
        assert_eq!(wcet_case1(&[5], 20).unwrap(), 5);
        assert_eq!(
            wcet_case1(&[5, 7], 10).unwrap_err(),
            AnalysisError::BudgetExceeded { demand: 12, budget: 10 }
        );
    }

    #[test]
    fn case2_examples() {
        assert_eq!(wcet_case2(10, 4, 2, 5, 1).unwrap(), 14);
        assert_eq!(wcet_case2(10, 10, 0, 5, 0).unwrap(), 5);
        assert_eq!(wcet_case2(10, 0, 0, 1, 4).unwrap(), 15);
        assert!(wcet_case2(10, 11, 0, 5, 0).is_err());
    }

    #[test]
    fn case3_examples() {
        assert_eq!(wcet_case3(10, 10, Case3Mode::Synchronized { delta_cd: 5 }).unwrap(), 25);
        assert_eq!(
            wcet_case3(10, 10, Case3Mode::Unsynchronized { budgets: [10, 10, 10] }).unwrap(),
            49
        );
        assert_eq!(
            wcet_case3(1, 1, Case3Mode::Unsynchronized { budgets: [1, 1, 1] }).unwrap(),
            4
        );
        assert_eq!(
            wcet_case3(1, 1, Case3Mode::Unsynchronized { budgets: [0, 1, 1] }).unwrap_err(),
            AnalysisError::MissingBudgets
        );
    }

    #[test]
    fn channel_latency_examples() {
        for t in [1, 4, 8] {
            assert_eq!(channel_latency(1, 1, t).unwrap(), t + 1);
        }
        assert_eq!(channel_latency(4, 1, 8).unwrap(), 33);
        assert_eq!(channel_latency(4, 2, 8).unwrap(), 17);
        assert!(channel_latency(4, 0, 8).is_err());
        assert!(channel_latency(4, 5, 8).is_err());
    }

    #[test]
    fn end_to_end_examples() {
        assert_eq!(end_to_end_bound(4, 1, 8).unwrap(), 49);
        assert_eq!(end_to_end_bound(1, 1, 8).unwrap(), 25);
        // Fully owned table with unit slots: two hub cycles plus the edges.
        assert_eq!(end_to_end_bound(4, 4, 1).unwrap(), 18);
    }

    #[test]
    fn monotonicity_spot_checks() {
        // Non-decreasing in tau_a, non-increasing in tau_p, non-decreasing
        // in lambda_p (full property test lives in tests/).
        assert!(partitioned_wcet(7, 3, 10).unwrap() <= partitioned_wcet(8, 3, 10).unwrap());
        assert!(partitioned_wcet(7, 4, 10).unwrap() <= partitioned_wcet(7, 3, 10).unwrap());
        assert!(partitioned_wcet(7, 3, 11).unwrap() >= partitioned_wcet(7, 3, 10).unwrap());
    }

    #[test]
    fn schedule_validator_classifies_fixtures() {
        // Passing: three non-overlapping windows.
        let good = PartitionSchedule::new(
            12,
            vec![
                Window { partition: 1, start: 0, duration: 4 },
                Window { partition: 2, start: 4, duration: 4 },
                Window { partition: 3, start: 8, duration: 4 },
            ],
            1,
        );
        assert!(validate_schedule(&good).passed());

        // Overlap -> contention.
        let overlap = PartitionSchedule::new(
            12,
            vec![
                Window { partition: 1, start: 0, duration: 6 },
                Window { partition: 2, start: 4, duration: 4 },
            ],
            0,
        );
        assert!(matches!(
            validate_schedule(&overlap).violations[0],
            ScheduleViolation::Contention { .. }
        ));

        // Window exceeding the period -> aperiodic.
        let spill = PartitionSchedule::new(
            10,
            vec![Window { partition: 1, start: 6, duration: 6 }],
            0,
        );
        assert!(matches!(
            validate_schedule(&spill).violations[0],
            ScheduleViolation::Aperiodic { .. }
        ));

        // Zero-duration window -> no time-triggered boundary.
        let degenerate = PartitionSchedule::new(
            10,
            vec![Window { partition: 1, start: 2, duration: 0 }],
            0,
        );
        assert!(matches!(
            validate_schedule(&degenerate).violations[0],
            ScheduleViolation::NotTimeTriggered { .. }
        ));
    }
}
