use std::fmt;

use crate::Cycle;

use super::command::{parse_log_lines, Command, CommandKind};
use super::org::DramOrg;
use super::state::{DramChannel, Legality, Rule};
use super::timing::TimingParams;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    /// 1-based line in the source text, when verifying a text log.
    pub line: Option<usize>,
    pub cycle: Cycle,
    pub rule: Rule,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(l) = self.line {
            write!(f, "line {l}: ")?;
        }
        write!(f, "{}@{}", self.rule, self.cycle)?;
        if !self.detail.is_empty() {
            write!(f, " ({})", self.detail)?;
        }
        Ok(())
    }
}

/// Replays a command log against fresh device state and reports every rule
/// broken. Illegal commands are still applied so that one bad command does
/// not hide later ones.
pub fn verify_command_log(
    log: &[Command],
    t: &TimingParams,
    org: &DramOrg,
    sarp: bool,
) -> Vec<Violation> {
    let numbered: Vec<(Option<usize>, Command)> = log.iter().map(|c| (None, *c)).collect();
    replay(&numbered, t, org, sarp, Vec::new())
}

/// Text variant of [`verify_command_log`]; malformed lines are reported as
/// violations.
pub fn verify_command_log_text(
    text: &str,
    t: &TimingParams,
    org: &DramOrg,
    sarp: bool,
) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut cmds = Vec::new();
    for (line, parsed) in parse_log_lines(text, Command::parse_record) {
        match parsed {
            Ok(c) => cmds.push((Some(line), c)),
            Err(msg) => out.push(Violation {
                line: Some(line),
                cycle: 0,
                rule: Rule::Malformed,
                detail: msg,
            }),
        }
    }
    replay(&cmds, t, org, sarp, out)
}

fn replay(
    cmds: &[(Option<usize>, Command)],
    t: &TimingParams,
    org: &DramOrg,
    sarp: bool,
    mut out: Vec<Violation>,
) -> Vec<Violation> {
    let mut channels: Vec<DramChannel> =
        (0..org.channels).map(|c| DramChannel::new(c, *org, *t, sarp)).collect();
    let mut last_cycle: Option<Cycle> = None;
    let mut last_issue: Vec<Option<Cycle>> = vec![None; org.channels as usize];
    let mut sink = Vec::new();

    for &(line, cmd) in cmds {
        let mut report = |rule: Rule, detail: String| {
            out.push(Violation {
                line,
                cycle: cmd.cycle,
                rule,
                detail,
            })
        };
        if last_cycle.is_some_and(|l| cmd.cycle < l) {
            report(Rule::NonMonotonic, String::new());
        }
        last_cycle = Some(last_cycle.map_or(cmd.cycle, |l| l.max(cmd.cycle)));

        let Some(chan) = channels.get_mut(cmd.channel as usize) else {
            report(Rule::OutOfRange, format!("channel {}", cmd.channel));
            continue;
        };
        let slot = &mut last_issue[cmd.channel as usize];
        if *slot == Some(cmd.cycle) {
            report(Rule::CommandBus, format!("channel {}", cmd.channel));
        }
        *slot = Some(cmd.cycle);

        match chan.command_legal(&cmd, cmd.cycle) {
            Legality::Legal => {}
            Legality::Illegal(Rule::OutOfRange) => {
                report(Rule::OutOfRange, describe(&cmd));
                continue;
            }
            Legality::Illegal(rule) => report(rule, describe(&cmd)),
        }
        if cmd.kind == CommandKind::RefPb {
            let expected = chan.bank(cmd.rank, cmd.bank).refresh_row_counter;
            if cmd.row != expected {
                report(
                    Rule::RefreshRowMismatch,
                    format!("row {} but bank counter at {expected}", cmd.row),
                );
            }
        }
        sink.clear();
        chan.apply_command(&cmd, cmd.cycle, &mut sink);
    }
    out
}

fn describe(c: &Command) -> String {
    match c.kind {
        CommandKind::RefAb => format!("{} ch{} r{}", c.kind, c.channel, c.rank),
        _ => format!("{} ch{} r{} b{} row {}", c.kind, c.channel, c.rank, c.bank, c.row),
    }
}
