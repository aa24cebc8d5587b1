use crate::dram::audit::{RefreshSchedule, MAX_DEBT};
use crate::error::{Error, Result};
use crate::Cycle;

/// Per-bank refresh debt: +1 when a nominal deadline passes, -1 per refresh
/// issued. Positive means refreshes are owed, negative means pulled in.
#[derive(Debug, Clone)]
pub struct DebtCounters {
    debt: Vec<i32>,
    /// Index of the next deadline per bank.
    next_k: Vec<u64>,
    next_deadline: Vec<Cycle>,
    earliest: Cycle,
    max: i32,
    sched: RefreshSchedule,
    min_seen: i32,
    max_seen: i32,
}

impl DebtCounters {
    pub fn new(sched: RefreshSchedule) -> Self {
        let banks = sched.banks as usize;
        let next_deadline: Vec<Cycle> = (0..sched.banks).map(|b| sched.deadline(b, 0)).collect();
        DebtCounters {
            debt: vec![0; banks],
            next_k: vec![0; banks],
            earliest: next_deadline.iter().copied().min().unwrap_or(Cycle::MAX),
            next_deadline,
            max: 0,
            sched,
            min_seen: 0,
            max_seen: 0,
        }
    }

    pub fn get(&self, bank: u32) -> i32 {
        self.debt[bank as usize]
    }

    pub fn all(&self) -> &[i32] {
        &self.debt
    }

    pub fn banks(&self) -> u32 {
        self.debt.len() as u32
    }

    pub fn schedule(&self) -> &RefreshSchedule {
        &self.sched
    }

    pub fn next_deadline(&self, bank: u32) -> Cycle {
        self.next_deadline[bank as usize]
    }

    /// Earliest pending deadline across banks.
    /// Largest current debt over the banks.
    pub fn max_debt(&self) -> i32 {
        self.max
    }

    pub fn earliest_deadline(&self) -> Cycle {
        self.earliest
    }

    /// Counts every deadline at or before `now`. Returns a bitmask of banks
    /// that had a deadline pass.
    pub fn advance(&mut self, now: Cycle) -> Result<u64> {
        let mut passed = 0u64;
        if now < self.earliest_deadline() {
            return Ok(0);
        }
        for b in 0..self.debt.len() {
            while self.next_deadline[b] <= now {
                self.debt[b] += 1;
                self.next_k[b] += 1;
                self.next_deadline[b] = self.sched.deadline(b as u32, self.next_k[b]);
                passed |= 1 << b;
                self.check(b, now)?;
            }
        }
        self.earliest = self.next_deadline.iter().copied().min().unwrap_or(Cycle::MAX);
        self.max = self.debt.iter().copied().max().unwrap_or(0);
        Ok(passed)
    }

    /// Records a refresh of `bank`.
    pub fn refreshed(&mut self, bank: u32, now: Cycle) -> Result<()> {
        self.debt[bank as usize] -= 1;
        if self.debt[bank as usize] + 1 == self.max {
            self.max = self.debt.iter().copied().max().unwrap_or(0);
        }
        self.check(bank as usize, now)
    }

    fn check(&mut self, b: usize, now: Cycle) -> Result<()> {
        let d = self.debt[b];
        self.min_seen = self.min_seen.min(d);
        self.max_seen = self.max_seen.max(d);
        if !(-MAX_DEBT..=MAX_DEBT).contains(&d) {
            return Err(Error::Invariant {
                cycle: now,
                msg: format!("bank {b} refresh debt {d} outside [-{MAX_DEBT}, {MAX_DEBT}]"),
            });
        }
        Ok(())
    }

    /// Extremes of the debt observed so far, across all banks.
    pub fn observed_range(&self) -> (i32, i32) {
        (self.min_seen, self.max_seen)
    }
}
