use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

/// One post-LLC trace entry: `bubbles` non-memory instructions, then a
/// read, then optionally a writeback.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TraceRecord {
    pub bubbles: u32,
    pub read_addr: u64,
    pub writeback: Option<u64>,
}

fn parse_num(s: &str) -> Option<u64> {
    match s.strip_prefix("0x").or_else(|| s.strip_prefix("0X")) {
        Some(hex) => u64::from_str_radix(hex, 16).ok(),
        None => s.parse().ok(),
    }
}

/// Parses `<bubble> <read_addr> [<write_addr>]` (decimal or 0x-hex).
/// Returns `Ok(None)` for blank and `#` lines.
pub fn parse_trace_line(text: &str) -> Result<Option<TraceRecord>, String> {
    let t = text.trim();
    if t.is_empty() || t.starts_with('#') {
        return Ok(None);
    }
    let f: Vec<&str> = t.split_whitespace().collect();
    if !(2..=3).contains(&f.len()) {
        return Err(format!("expected 2 or 3 fields, found {}", f.len()));
    }
    let bubbles = parse_num(f[0])
        .and_then(|v| u32::try_from(v).ok())
        .ok_or_else(|| format!("bad bubble count `{}`", f[0]))?;
    let read_addr = parse_num(f[1]).ok_or_else(|| format!("bad read address `{}`", f[1]))?;
    let writeback = match f.get(2) {
        Some(w) => Some(parse_num(w).ok_or_else(|| format!("bad writeback address `{w}`"))?),
        None => None,
    };
    Ok(Some(TraceRecord {
        bubbles,
        read_addr,
        writeback,
    }))
}

pub fn parse_trace(text: &str, source_name: &str) -> Result<Vec<TraceRecord>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        match parse_trace_line(line) {
            Ok(Some(r)) => out.push(r),
            Ok(None) => {}
            Err(msg) => {
                return Err(Error::Parse {
                    source_name: source_name.to_string(),
                    line: i + 1,
                    msg,
                })
            }
        }
    }
    if out.is_empty() {
        return Err(Error::Parse {
            source_name: source_name.to_string(),
            line: 0,
            msg: "trace has no records".into(),
        });
    }
    Ok(out)
}

pub fn read_trace(path: &Path) -> Result<Vec<TraceRecord>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_trace(&text, &path.display().to_string())
}

pub fn format_trace(records: &[TraceRecord]) -> String {
    let mut s = String::with_capacity(records.len() * 24);
    for r in records {
        let _ = write!(s, "{} {:#x}", r.bubbles, r.read_addr);
        if let Some(w) = r.writeback {
            let _ = write!(s, " {w:#x}");
        }
        s.push('\n');
    }
    s
}

/// Reads per thousand instructions over the whole trace, counting every
/// read and writeback as one instruction.
pub fn trace_mpki(records: &[TraceRecord]) -> f64 {
    let insts: u64 = records
        .iter()
        .map(|r| r.bubbles as u64 + 1 + r.writeback.is_some() as u64)
        .sum();
    1000.0 * records.len() as f64 / insts.max(1) as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn examples() {
        assert_eq!(
            parse_trace_line("7 0x1a2b40").unwrap(),
            Some(TraceRecord {
                bubbles: 7,
                read_addr: 0x1a2b40,
                writeback: None
            })
        );
        assert_eq!(
            parse_trace_line("0 4096 8192").unwrap(),
            Some(TraceRecord {
                bubbles: 0,
                read_addr: 4096,
                writeback: Some(8192)
            })
        );
        assert!(parse_trace_line("abc").is_err());
        assert_eq!(parse_trace_line("  # c").unwrap(), None);
    }

    #[test]
    fn error_carries_line() {
        let e = parse_trace("1 2\n\nabc\n", "t").unwrap_err();
        assert!(matches!(e, Error::Parse { line: 3, .. }), "{e}");
    }

    #[test]
    fn roundtrip_and_mpki() {
        let recs = vec![
            TraceRecord { bubbles: 99, read_addr: 64, writeback: None },
            TraceRecord { bubbles: 98, read_addr: 128, writeback: Some(64) },
        ];
        let text = format_trace(&recs);
        assert_eq!(parse_trace(&text, "x").unwrap(), recs);
        assert!((trace_mpki(&recs) - 10.0).abs() < 1e-12);
    }
}
