use std::fmt;

use crate::Cycle;

use super::command::{parse_log_lines, RefreshRecord};
use super::org::DramOrg;
use super::timing::{RefreshMode, TimingParams};

/// Debt bound: how many refreshes a bank may run behind or ahead of its
/// nominal schedule.
pub const MAX_DEBT: i32 = 8;

/// Nominal refresh deadlines.
///
/// All-bank: every bank is due at `k * tREFI` (k >= 1). Per-bank: bank `b` is
/// due at `k * tREFI + floor((b + 1) * tREFI / banks)` for k >= 0, so the
/// banks are spread evenly and each bank sees exactly one deadline per tREFI.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RefreshSchedule {
    pub mode: RefreshMode,
    pub t_refi: Cycle,
    pub banks: u32,
}

impl RefreshSchedule {
    pub fn new(mode: RefreshMode, t: &TimingParams, banks: u32) -> Self {
        RefreshSchedule {
            mode,
            t_refi: t.t_refi,
            banks,
        }
    }

    /// Period between two deadlines of the same bank.
    pub fn period(&self) -> Cycle {
        self.t_refi
    }

    /// The `k`-th deadline (0-based) of `bank`.
    pub fn deadline(&self, bank: u32, k: u64) -> Cycle {
        match self.mode {
            RefreshMode::AllBank => (k + 1) * self.t_refi,
            RefreshMode::PerBank => {
                k * self.t_refi + (bank as u64 + 1) * self.t_refi / self.banks as u64
            }
        }
    }

    /// Number of deadlines of `bank` at or before `now`.
    pub fn deadlines_through(&self, bank: u32, now: Cycle) -> u64 {
        let first = self.deadline(bank, 0);
        if now < first {
            0
        } else {
            (now - first) / self.period() + 1
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AuditKind {
    /// A row group went longer than the allowed interval without refresh.
    RetentionGap,
    /// A bank fell more than the allowed number of refreshes behind or ahead.
    DebtBound,
    /// Record does not fit the organization.
    Malformed,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AuditViolation {
    pub kind: AuditKind,
    pub channel: u32,
    pub rank: u32,
    pub bank: u32,
    pub row_start: u32,
    pub row_count: u32,
    /// Gap length for retention violations, debt value for debt violations.
    pub amount: i64,
    pub cycle: Cycle,
}

impl fmt::Display for AuditViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let what = match self.kind {
            AuditKind::RetentionGap => "retention gap",
            AuditKind::DebtBound => "debt",
            AuditKind::Malformed => "malformed record",
        };
        write!(
            f,
            "{what} {} at cycle {} on ch{} r{} b{} rows {}..{}",
            self.amount,
            self.cycle,
            self.channel,
            self.rank,
            self.bank,
            self.row_start,
            self.row_start as u64 + self.row_count as u64
        )
    }
}

/// Largest tolerated refresh-to-refresh interval for any row.
///
/// With the debt held in [-8, +8], refresh n of a bank happens between its
/// nominal deadlines n-8 and n+8, so the same row group can see a gap of up
/// to the retention window plus 16 periods.
pub fn max_row_gap(t: &TimingParams, sched: &RefreshSchedule) -> Cycle {
    t.retention_cycles() + 2 * MAX_DEBT as Cycle * sched.period()
}

struct BankAudit {
    last: Vec<Cycle>,
    refreshes: u64,
}

/// Checks every row's refresh interval and every bank's refresh debt.
///
/// Every row is assumed refreshed at `sim_start`; deadlines count from
/// `sim_start`. Records are processed in issue order and deadlines falling
/// on the same cycle as a refresh are counted first.
pub fn retention_audit(
    records: &[RefreshRecord],
    org: &DramOrg,
    t: &TimingParams,
    mode: RefreshMode,
    sim_start: Cycle,
    sim_end: Cycle,
) -> Vec<AuditViolation> {
    let sched = RefreshSchedule::new(mode, t, org.banks_per_rank);
    let rows_per_refresh = org.rows_per_refresh(t.refreshes_per_window);
    let groups = (org.rows_per_bank / rows_per_refresh) as usize;
    let limit = max_row_gap(t, &sched);
    let nbanks = (org.channels * org.ranks_per_channel * org.banks_per_rank) as usize;
    let mut banks: Vec<BankAudit> = (0..nbanks)
        .map(|_| BankAudit {
            last: vec![sim_start; groups],
            refreshes: 0,
        })
        .collect();
    let index = |ch: u32, rank: u32, bank: u32| {
        ((ch * org.ranks_per_channel + rank) * org.banks_per_rank + bank) as usize
    };

    let mut sorted: Vec<&RefreshRecord> = records.iter().collect();
    sorted.sort_by_key(|r| r.issue);
    let mut out = Vec::new();
    let mut debt_flagged = vec![false; nbanks];

    let debt_at = |bank: u32, refreshes: u64, now: Cycle| -> i64 {
        sched.deadlines_through(bank, now - sim_start) as i64 - refreshes as i64
    };

    for r in sorted {
        if r.channel >= org.channels
            || r.rank >= org.ranks_per_channel
            || r.bank >= org.banks_per_rank
            || r.row_start % rows_per_refresh != 0
            || r.row_start >= org.rows_per_bank
            || r.issue < sim_start
        {
            out.push(AuditViolation {
                kind: AuditKind::Malformed,
                channel: r.channel,
                rank: r.rank,
                bank: r.bank,
                row_start: r.row_start,
                row_count: r.row_count,
                amount: 0,
                cycle: r.issue,
            });
            continue;
        }
        let i = index(r.channel, r.rank, r.bank);
        let b = &mut banks[i];
        let violation = |kind, amount, cycle| AuditViolation {
            kind,
            channel: r.channel,
            rank: r.rank,
            bank: r.bank,
            row_start: r.row_start,
            row_count: r.row_count,
            amount,
            cycle,
        };

        // Debt just before this refresh (deadlines at this cycle included)
        // must not exceed the bound; after it, must not go below.
        let before = debt_at(r.bank, b.refreshes, r.issue);
        // A deadline passing while debt is already at the bound pushes it
        // over; report once per bank.
        if before > MAX_DEBT as i64 && !debt_flagged[i] {
            out.push(violation(AuditKind::DebtBound, before, r.issue));
            debt_flagged[i] = true;
        }
        b.refreshes += 1;
        if before - 1 < -(MAX_DEBT as i64) {
            out.push(violation(AuditKind::DebtBound, before - 1, r.issue));
        }

        let g = (r.row_start / rows_per_refresh) as usize;
        let n = (r.row_count / rows_per_refresh).max(1) as usize;
        for k in 0..n {
            let slot = &mut b.last[(g + k) % groups];
            let gap = r.completion.saturating_sub(*slot);
            if gap > limit {
                out.push(violation(AuditKind::RetentionGap, gap as i64, r.completion));
            }
            *slot = r.completion;
        }
    }

    // Tail: rows still waiting at the end, and debt left over.
    for ch in 0..org.channels {
        for rank in 0..org.ranks_per_channel {
            for bank in 0..org.banks_per_rank {
                let i = index(ch, rank, bank);
                let b = &banks[i];
                let end_debt = debt_at(bank, b.refreshes, sim_end.max(sim_start));
                if end_debt > MAX_DEBT as i64 && !debt_flagged[i] {
                    out.push(AuditViolation {
                        kind: AuditKind::DebtBound,
                        channel: ch,
                        rank,
                        bank,
                        row_start: 0,
                        row_count: org.rows_per_bank,
                        amount: end_debt,
                        cycle: sim_end,
                    });
                }
                if let Some((g, &last)) = b.last.iter().enumerate().min_by_key(|(_, &l)| l) {
                    let gap = sim_end.saturating_sub(last);
                    if gap > limit {
                        out.push(AuditViolation {
                            kind: AuditKind::RetentionGap,
                            channel: ch,
                            rank,
                            bank,
                            row_start: g as u32 * rows_per_refresh,
                            row_count: rows_per_refresh,
                            amount: gap as i64,
                            cycle: sim_end,
                        });
                    }
                }
            }
        }
    }
    out
}

/// Text variant: parses a refresh log and audits it.
pub fn retention_audit_text(
    text: &str,
    org: &DramOrg,
    t: &TimingParams,
    mode: RefreshMode,
    sim_start: Cycle,
    sim_end: Cycle,
) -> Result<Vec<AuditViolation>, (usize, String)> {
    let mut recs = Vec::new();
    for (line, r) in parse_log_lines(text, RefreshRecord::parse_record) {
        recs.push(r.map_err(|e| (line, e))?);
    }
    Ok(retention_audit(&recs, org, t, mode, sim_start, sim_end))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dram::command::CommandKind;
    use crate::dram::timing::{derive_timing, FgrMode};

    fn setup() -> (TimingParams, DramOrg) {
        let org = DramOrg {
            channels: 1,
            ranks_per_channel: 1,
            ..DramOrg::default()
        };
        (derive_timing(8, 32, RefreshMode::PerBank, FgrMode::Off, 1.5).unwrap(), org)
    }

    /// Round-robin REFpb exactly at each bank's deadline.
    fn round_robin(t: &TimingParams, org: &DramOrg, end: Cycle) -> Vec<RefreshRecord> {
        let sched = RefreshSchedule::new(RefreshMode::PerBank, t, org.banks_per_rank);
        let rpr = org.rows_per_refresh(t.refreshes_per_window);
        let mut counters = vec![0u32; org.banks_per_rank as usize];
        let mut out = Vec::new();
        for k in 0.. {
            let mut any = false;
            for bank in 0..org.banks_per_rank {
                let d = sched.deadline(bank, k);
                if d > end {
                    continue;
                }
                any = true;
                let c = &mut counters[bank as usize];
                out.push(RefreshRecord {
                    issue: d,
                    completion: d + t.t_rfc_pb,
                    kind: CommandKind::RefPb,
                    channel: 0,
                    rank: 0,
                    bank,
                    row_start: *c,
                    row_count: rpr,
                    subarray: org.subarray_of(*c),
                });
                *c = (*c + rpr) % org.rows_per_bank;
            }
            if !any {
                break;
            }
        }
        out
    }

    #[test]
    fn deadlines_spread_over_banks() {
        let (t, org) = setup();
        let s = RefreshSchedule::new(RefreshMode::PerBank, &t, org.banks_per_rank);
        assert_eq!(s.deadline(0, 0), 325);
        assert_eq!(s.deadline(1, 0), 651);
        assert_eq!(s.deadline(7, 0), 2604);
        assert_eq!(s.deadline(0, 1), 2929);
        assert_eq!(s.deadlines_through(0, 324), 0);
        assert_eq!(s.deadlines_through(0, 325), 1);
        assert_eq!(s.deadlines_through(0, 2928), 1);
        assert_eq!(s.deadlines_through(0, 2929), 2);
        let a = RefreshSchedule::new(RefreshMode::AllBank, &t, 8);
        assert_eq!(a.deadline(3, 0), 2604);
        assert_eq!(a.deadlines_through(5, 5208), 2);
    }

    #[test]
    fn full_window_round_robin_is_clean() {
        let (t, org) = setup();
        let end = t.retention_cycles() + 3 * t.t_refi;
        let log = round_robin(&t, &org, end);
        assert!(log.len() > 8192 * 8);
        assert!(retention_audit(&log, &org, &t, RefreshMode::PerBank, 0, end).is_empty());
    }

    #[test]
    fn deleted_refreshes_flag_bank() {
        let (t, org) = setup();
        let end = 40 * t.t_refi;
        let mut log = round_robin(&t, &org, end);
        let from = 10 * t.t_refi;
        let to = from + 9 * t.t_refi;
        log.retain(|r| !(r.bank == 2 && r.issue >= from && r.issue < to));
        let v = retention_audit(&log, &org, &t, RefreshMode::PerBank, 0, end);
        assert!(!v.is_empty());
        assert!(v.iter().all(|x| x.bank == 2 && x.kind == AuditKind::DebtBound));
    }

    #[test]
    fn bounded_postponement_then_catch_up_is_clean() {
        let (t, org) = setup();
        let end = 60 * t.t_refi;
        let mut log = round_robin(&t, &org, end);
        // Postpone 8 refreshes of bank 4 and issue them back to back later.
        let sched = RefreshSchedule::new(RefreshMode::PerBank, &t, 8);
        let catch_up = sched.deadline(4, 12) - 1;
        let mut n = 0;
        for r in log.iter_mut().filter(|r| r.bank == 4) {
            if (4..12).contains(&((r.issue - sched.deadline(4, 0)) / sched.period())) {
                r.issue = catch_up + n * t.t_rfc_pb;
                r.completion = r.issue + t.t_rfc_pb;
                n += 1;
            }
        }
        assert_eq!(n, 8);
        assert!(retention_audit(&log, &org, &t, RefreshMode::PerBank, 0, end).is_empty());
    }

    #[test]
    fn retention_gap_detected() {
        let (t, org) = setup();
        let sched = RefreshSchedule::new(RefreshMode::PerBank, &t, 8);
        let late = max_row_gap(&t, &sched) + 10;
        let rec = RefreshRecord {
            issue: late - t.t_rfc_pb,
            completion: late,
            kind: CommandKind::RefPb,
            channel: 0,
            rank: 0,
            bank: 0,
            row_start: 0,
            row_count: 8,
            subarray: 0,
        };
        let v = retention_audit(&[rec], &org, &t, RefreshMode::PerBank, 0, late);
        assert!(v.iter().any(|x| x.kind == AuditKind::RetentionGap && x.row_start == 0));
    }
}
