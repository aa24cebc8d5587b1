//! Refresh scheduling policies.
//!
//! Every policy runs per rank inside a [`RankRefresh`]. Each cycle the
//! controller first advances the nominal deadlines, then asks for a
//! mandatory intent (due refreshes, forced refreshes, write-refresh
//! parallelization), schedules demand around it, and only when no demand
//! command can issue asks for an opportunistic refresh.

mod baseline;
mod darp;
mod debt;
mod elastic;
mod unit;

use std::fmt;
use std::str::FromStr;

use crate::dram::{FgrMode, RefreshMode};
use crate::error::Error;

pub use baseline::{schedule_refab, schedule_refpb_rr};
pub use darp::{darp_mandatory, darp_pull_in, wrp_select};
pub use debt::DebtCounters;
pub use elastic::{elastic_schedule, update_idle_predictor, IdlePredictor};
pub use unit::{RankRefresh, RankView};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PolicyKind {
    RefAb,
    RefPb,
    Elastic,
    Darp,
    SarpAb,
    SarpPb,
    Dsarp,
    Fgr2x,
    Fgr4x,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 9] = [
        PolicyKind::RefAb,
        PolicyKind::RefPb,
        PolicyKind::Elastic,
        PolicyKind::Darp,
        PolicyKind::SarpAb,
        PolicyKind::SarpPb,
        PolicyKind::Dsarp,
        PolicyKind::Fgr2x,
        PolicyKind::Fgr4x,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PolicyKind::RefAb => "refab",
            PolicyKind::RefPb => "refpb",
            PolicyKind::Elastic => "elastic",
            PolicyKind::Darp => "darp",
            PolicyKind::SarpAb => "sarp_ab",
            PolicyKind::SarpPb => "sarp_pb",
            PolicyKind::Dsarp => "dsarp",
            PolicyKind::Fgr2x => "fgr2x",
            PolicyKind::Fgr4x => "fgr4x",
        }
    }

    pub fn refresh_mode(self) -> RefreshMode {
        match self {
            PolicyKind::RefPb | PolicyKind::Darp | PolicyKind::SarpPb | PolicyKind::Dsarp => {
                RefreshMode::PerBank
            }
            _ => RefreshMode::AllBank,
        }
    }

    pub fn fgr(self) -> FgrMode {
        match self {
            PolicyKind::Fgr2x => FgrMode::X2,
            PolicyKind::Fgr4x => FgrMode::X4,
            _ => FgrMode::Off,
        }
    }

    /// Uses subarray-level refresh/access parallelism.
    pub fn sarp(self) -> bool {
        matches!(self, PolicyKind::SarpAb | PolicyKind::SarpPb | PolicyKind::Dsarp)
    }

    /// Out-of-order per-bank refresh with write-refresh parallelization.
    pub fn darp(self) -> bool {
        matches!(self, PolicyKind::Darp | PolicyKind::Dsarp)
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PolicyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        PolicyKind::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| {
                let names: Vec<_> = PolicyKind::ALL.iter().map(|p| p.name()).collect();
                Error::config(format!("unknown policy `{s}` (expected one of {})", names.join(", ")))
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Origin {
    /// Issued at (or shortly after) its nominal deadline.
    Scheduled,
    /// Issued after its deadline passed with the bank busy.
    Postponed,
    /// Issued ahead of its deadline.
    PulledIn,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RefreshAction {
    None,
    IssueRefAb { rank: u32 },
    IssueRefPb { rank: u32, bank: u32, origin: Origin },
}

/// A refresh the policy wants issued, possibly not yet legal.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RefreshIntent {
    pub action: RefreshAction,
    /// Hold back new activations that would keep the target from becoming
    /// refreshable.
    pub block: bool,
    /// Chosen by write-refresh parallelization.
    pub wrp: bool,
}
