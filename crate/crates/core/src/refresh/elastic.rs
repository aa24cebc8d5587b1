use crate::dram::audit::MAX_DEBT;
use crate::Cycle;

use super::{RefreshAction, RefreshIntent};

/// Below this many postponed refreshes, elastic refresh waits for the
/// predicted idle time; at or above, it refreshes as soon as the rank idles.
pub const ELASTIC_EAGER_THRESHOLD: i32 = 4;

/// Exponentially weighted average of rank idle-period lengths.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct IdlePredictor {
    pub avg: f64,
    /// Start of the current idle period, if the rank is idle.
    pub idle_since: Option<Cycle>,
}

pub const IDLE_EWMA_ALPHA: f64 = 1.0 / 8.0;

/// avg <- (1 - a) avg + a observed
pub fn update_idle_predictor(p: IdlePredictor, observed: Cycle) -> IdlePredictor {
    IdlePredictor {
        avg: (1.0 - IDLE_EWMA_ALPHA) * p.avg + IDLE_EWMA_ALPHA * observed as f64,
        ..p
    }
}

impl IdlePredictor {
    /// Feeds the rank's idle/busy status for cycle `now`.
    pub fn observe(&mut self, now: Cycle, idle: bool) {
        match (self.idle_since, idle) {
            (None, true) => self.idle_since = Some(now),
            (Some(start), false) => {
                *self = update_idle_predictor(*self, now - start);
                self.idle_since = None;
            }
            _ => {}
        }
    }

    /// Wait before refreshing into an idle period.
    pub fn delay(&self, postponed: i32, t_rfc_ab: Cycle) -> Cycle {
        if postponed >= ELASTIC_EAGER_THRESHOLD {
            0
        } else {
            (self.avg.round() as Cycle).saturating_sub(t_rfc_ab)
        }
    }
}

/// Elastic all-bank refresh. `postponed` is the rank's refresh debt.
pub fn elastic_schedule(
    now: Cycle,
    rank: u32,
    postponed: i32,
    predictor: &IdlePredictor,
    t_rfc_ab: Cycle,
) -> Option<RefreshIntent> {
    let action = RefreshAction::IssueRefAb { rank };
    if postponed >= MAX_DEBT {
        return Some(RefreshIntent {
            action,
            block: true,
            wrp: false,
        });
    }
    if postponed <= 0 {
        return None;
    }
    let start = predictor.idle_since?;
    (now - start >= predictor.delay(postponed, t_rfc_ab)).then_some(RefreshIntent {
        action,
        block: false,
        wrp: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn ewma_arithmetic() {
        let p = update_idle_predictor(IdlePredictor::default(), 800);
        assert_eq!(p.avg, 100.0);
        let mut q = IdlePredictor {
            avg: 300.0,
            idle_since: None,
        };
        for _ in 0..50 {
            q = update_idle_predictor(q, 300);
        }
        assert_eq!(q.avg, 300.0);
    }

    #[test]
    fn waits_one_trfc_with_long_predicted_idle() {
        let trfc = 594;
        let p = IdlePredictor {
            avg: 2.0 * trfc as f64,
            idle_since: Some(1000),
        };
        assert_eq!(elastic_schedule(1000 + trfc - 1, 0, 1, &p, trfc), None);
        assert!(elastic_schedule(1000 + trfc, 0, 1, &p, trfc).is_some());
        // Four or more postponed: no wait.
        assert!(elastic_schedule(1000, 0, 4, &p, trfc).is_some());
    }

    #[test]
    fn forced_at_eight_even_when_busy() {
        let p = IdlePredictor::default();
        let i = elastic_schedule(5, 1, 8, &p, 594).unwrap();
        assert!(i.block);
        assert_eq!(i.action, RefreshAction::IssueRefAb { rank: 1 });
        assert_eq!(elastic_schedule(5, 1, 3, &p, 594), None);
        assert_eq!(elastic_schedule(5, 1, 0, &IdlePredictor { avg: 0.0, idle_since: Some(0) }, 594), None);
    }

    #[test]
    fn observe_updates_on_idle_end() {
        let mut p = IdlePredictor::default();
        p.observe(10, true);
        p.observe(20, true);
        assert_eq!(p.avg, 0.0);
        p.observe(90, false);
        assert_eq!(p.avg, 10.0);
        assert_eq!(p.idle_since, None);
    }

    proptest! {
        #[test]
        fn matches_brute_force_ewma(hist in proptest::collection::vec(0u64..100_000, 0..64)) {
            let mut p = IdlePredictor::default();
            for &h in &hist {
                p = update_idle_predictor(p, h);
            }
            // Closed form: sum_i a (1-a)^(n-1-i) x_i
            let n = hist.len();
            let expect: f64 = hist
                .iter()
                .enumerate()
                .map(|(i, &x)| IDLE_EWMA_ALPHA * (1.0 - IDLE_EWMA_ALPHA).powi((n - 1 - i) as i32) * x as f64)
                .sum();
            prop_assert!((p.avg - expect).abs() <= 1e-6 * expect.max(1.0));
            prop_assert!(p.avg >= 0.0);
        }
    }
}
