use std::fmt::{self, Write as _};
use std::str::FromStr;

use crate::Cycle;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CommandKind {
    Act,
    Rd,
    Wr,
    Pre,
    RefAb,
    RefPb,
}

impl CommandKind {
    pub fn as_str(self) -> &'static str {
        match self {
            CommandKind::Act => "ACT",
            CommandKind::Rd => "RD",
            CommandKind::Wr => "WR",
            CommandKind::Pre => "PRE",
            CommandKind::RefAb => "REFab",
            CommandKind::RefPb => "REFpb",
        }
    }

    pub fn is_refresh(self) -> bool {
        matches!(self, CommandKind::RefAb | CommandKind::RefPb)
    }

    pub fn is_demand(self) -> bool {
        matches!(self, CommandKind::Act | CommandKind::Rd | CommandKind::Wr)
    }
}

impl fmt::Display for CommandKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CommandKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Ok(match s {
            "ACT" => CommandKind::Act,
            "RD" => CommandKind::Rd,
            "WR" => CommandKind::Wr,
            "PRE" => CommandKind::Pre,
            "REFab" => CommandKind::RefAb,
            "REFpb" => CommandKind::RefPb,
            other => return Err(format!("unknown command kind `{other}`")),
        })
    }
}

/// A DRAM command on a channel's command bus.
///
/// `bank`, `row` and `subarray` are ignored for REFab. For REFpb, `row` and
/// `subarray` record the first row refreshed and its subarray.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Command {
    pub cycle: Cycle,
    pub kind: CommandKind,
    pub channel: u32,
    pub rank: u32,
    pub bank: u32,
    pub row: u32,
    pub subarray: u32,
}

impl Command {
    pub fn refab(cycle: Cycle, channel: u32, rank: u32) -> Self {
        Command {
            cycle,
            kind: CommandKind::RefAb,
            channel,
            rank,
            bank: 0,
            row: 0,
            subarray: 0,
        }
    }

    pub fn refpb(cycle: Cycle, channel: u32, rank: u32, bank: u32) -> Self {
        Command {
            cycle,
            kind: CommandKind::RefPb,
            channel,
            rank,
            bank,
            row: 0,
            subarray: 0,
        }
    }

    /// Appends one command-log record: `cycle kind channel rank bank row subarray`.
    /// Fields that do not apply to the command kind are written as `-`.
    pub fn write_record(&self, out: &mut String) {
        let _ = write!(out, "{} {} {} {} ", self.cycle, self.kind, self.channel, self.rank);
        match self.kind {
            CommandKind::RefAb => out.push_str("- - -"),
            CommandKind::Pre => {
                let _ = write!(out, "{} - -", self.bank);
            }
            _ => {
                let _ = write!(out, "{} {} {}", self.bank, self.row, self.subarray);
            }
        }
        out.push('\n');
    }

    pub fn parse_record(line: &str) -> Result<Command, String> {
        let f: Vec<&str> = line.split_whitespace().collect();
        if f.len() != 7 {
            return Err(format!("expected 7 fields, found {}", f.len()));
        }
        let num = |i: usize, name: &str| -> Result<u64, String> {
            f[i].parse::<u64>()
                .map_err(|_| format!("bad {name} field `{}`", f[i]))
        };
        let opt = |i: usize, name: &str| -> Result<u32, String> {
            if f[i] == "-" {
                Ok(0)
            } else {
                num(i, name).and_then(|v| u32::try_from(v).map_err(|_| format!("{name} overflow")))
            }
        };
        Ok(Command {
            cycle: num(0, "cycle")?,
            kind: f[1].parse()?,
            channel: opt(2, "channel")?,
            rank: opt(3, "rank")?,
            bank: opt(4, "bank")?,
            row: opt(5, "row")?,
            subarray: opt(6, "subarray")?,
        })
    }
}

/// One refresh of a bank: which rows, when issued and when complete.
/// REFab commands produce one record per bank.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RefreshRecord {
    pub issue: Cycle,
    pub completion: Cycle,
    pub kind: CommandKind,
    pub channel: u32,
    pub rank: u32,
    pub bank: u32,
    pub row_start: u32,
    pub row_count: u32,
    pub subarray: u32,
}

impl RefreshRecord {
    /// `issue kind channel rank bank row_start row_count subarray completion`
    pub fn write_record(&self, out: &mut String) {
        let _ = writeln!(
            out,
            "{} {} {} {} {} {} {} {} {}",
            self.issue,
            self.kind,
            self.channel,
            self.rank,
            self.bank,
            self.row_start,
            self.row_count,
            self.subarray,
            self.completion
        );
    }

    pub fn parse_record(line: &str) -> Result<RefreshRecord, String> {
        let f: Vec<&str> = line.split_whitespace().collect();
        if f.len() != 9 {
            return Err(format!("expected 9 fields, found {}", f.len()));
        }
        let n = |i: usize| -> Result<u64, String> {
            f[i].parse::<u64>().map_err(|_| format!("bad number `{}`", f[i]))
        };
        let kind: CommandKind = f[1].parse()?;
        if !kind.is_refresh() {
            return Err(format!("`{kind}` is not a refresh command"));
        }
        Ok(RefreshRecord {
            issue: n(0)?,
            kind,
            channel: n(2)? as u32,
            rank: n(3)? as u32,
            bank: n(4)? as u32,
            row_start: n(5)? as u32,
            row_count: n(6)? as u32,
            subarray: n(7)? as u32,
            completion: n(8)?,
        })
    }
}

/// Parses a log body, skipping blank and `#` lines. Returns per-line results
/// tagged with 1-based line numbers.
pub fn parse_log_lines<T>(
    text: &str,
    parse: impl Fn(&str) -> Result<T, String>,
) -> Vec<(usize, Result<T, String>)> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| {
            let t = l.trim();
            !t.is_empty() && !t.starts_with('#')
        })
        .map(|(i, l)| (i + 1, parse(l)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn record_format() {
        let mut s = String::new();
        Command {
            cycle: 12,
            kind: CommandKind::Act,
            channel: 1,
            rank: 0,
            bank: 3,
            row: 9000,
            subarray: 1,
        }
        .write_record(&mut s);
        Command::refab(40, 0, 1).write_record(&mut s);
        assert_eq!(s, "12 ACT 1 0 3 9000 1\n40 REFab 0 1 - - -\n");
        let parsed: Vec<_> = s.lines().map(|l| Command::parse_record(l).unwrap()).collect();
        assert_eq!(parsed[0].row, 9000);
        assert_eq!(parsed[1], Command::refab(40, 0, 1));
    }

    #[test]
    fn malformed_records() {
        assert!(Command::parse_record("1 ACT 0 0").is_err());
        assert!(Command::parse_record("x ACT 0 0 0 0 0").is_err());
        assert!(Command::parse_record("1 NOP 0 0 0 0 0").is_err());
        assert!(RefreshRecord::parse_record("1 RD 0 0 0 0 8 0 5").is_err());
    }

    #[test]
    fn refresh_record_roundtrip() {
        let r = RefreshRecord {
            issue: 100,
            completion: 202,
            kind: CommandKind::RefPb,
            channel: 1,
            rank: 1,
            bank: 6,
            row_start: 64,
            row_count: 8,
            subarray: 0,
        };
        let mut s = String::new();
        r.write_record(&mut s);
        assert_eq!(RefreshRecord::parse_record(s.trim()).unwrap(), r);
    }

    #[test]
    fn comment_lines_skipped() {
        let text = "# header\n\n1 RD 0 0 0 5 0\nbad\n";
        let out = parse_log_lines(text, Command::parse_record);
        assert_eq!(out.len(), 2);
        assert_eq!(out[0].0, 3);
        assert!(out[1].1.is_err());
        assert_eq!(out[1].0, 4);
    }
}
