use super::{DebtCounters, Origin, RefreshAction, RefreshIntent};

/// All-bank refresh: due once the rank's deadline has passed and until the
/// owed refresh is issued. Shared by REFab, SARP-REFab and FGR modes.
pub fn schedule_refab(rank: u32, debts: &DebtCounters) -> Option<RefreshIntent> {
    (debts.get(0) > 0).then_some(RefreshIntent {
        action: RefreshAction::IssueRefAb { rank },
        block: true,
        wrp: false,
    })
}

/// Per-bank round robin: the next bank in order is due once its deadline
/// passes; it is deferred while illegal but never skipped.
pub fn schedule_refpb_rr(rank: u32, debts: &DebtCounters, next_bank: u32) -> Option<RefreshIntent> {
    let debt = debts.get(next_bank);
    (debt > 0).then_some(RefreshIntent {
        action: RefreshAction::IssueRefPb {
            rank,
            bank: next_bank,
            origin: if debt > 1 {
                Origin::Postponed
            } else {
                Origin::Scheduled
            },
        },
        block: true,
        wrp: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dram::audit::RefreshSchedule;
    use crate::dram::{derive_timing, FgrMode, RefreshMode};

    #[test]
    fn refab_due_only_after_deadline() {
        let t = derive_timing(8, 32, RefreshMode::AllBank, FgrMode::Off, 1.5).unwrap();
        let mut d = DebtCounters::new(RefreshSchedule::new(RefreshMode::AllBank, &t, 8));
        d.advance(t.t_refi - 1).unwrap();
        assert_eq!(schedule_refab(0, &d), None);
        d.advance(t.t_refi).unwrap();
        assert_eq!(schedule_refab(1, &d).unwrap().action, RefreshAction::IssueRefAb { rank: 1 });
    }

    #[test]
    fn round_robin_order_and_wrap() {
        let t = derive_timing(8, 32, RefreshMode::PerBank, FgrMode::Off, 1.5).unwrap();
        let mut d = DebtCounters::new(RefreshSchedule::new(RefreshMode::PerBank, &t, 8));
        let mut next = 0;
        let mut order = Vec::new();
        for now in 0..=t.t_refi + t.t_refi / 8 {
            d.advance(now).unwrap();
            if let Some(i) = schedule_refpb_rr(0, &d, next) {
                let RefreshAction::IssueRefPb { bank, .. } = i.action else { panic!() };
                order.push(bank);
                d.refreshed(bank, now).unwrap();
                next = (next + 1) % 8;
            }
        }
        assert_eq!(order, [0, 1, 2, 3, 4, 5, 6, 7, 0]);
    }
}
