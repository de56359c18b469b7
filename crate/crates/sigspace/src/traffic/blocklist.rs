//! fireHOL netset ingestion: one IPv4 address or CIDR per line, `#` comments.
//! Stored as sorted, merged u32 intervals; membership is a binary search.

use std::net::Ipv4Addr;
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum BlocklistError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("line {line}: unparseable entry `{entry}`")]
    BadEntry { line: usize, entry: String },
}

#[derive(Debug, Clone, Default)]
pub struct Blocklist {
    /// Inclusive (start, end) ranges, sorted by start, non-overlapping.
    ranges: Vec<(u32, u32)>,
    entry_count: usize,
}

impl Blocklist {
    pub fn from_lines<'a>(
        lines: impl IntoIterator<Item = &'a str>,
    ) -> Result<Blocklist, BlocklistError> {
        let mut ranges = Vec::new();
        let mut entry_count = 0;
        for (idx, raw) in lines.into_iter().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let range = parse_entry(line).ok_or_else(|| BlocklistError::BadEntry {
                line: idx + 1,
                entry: line.to_string(),
            })?;
            ranges.push(range);
            entry_count += 1;
        }
        ranges.sort_unstable();
        let mut merged: Vec<(u32, u32)> = Vec::with_capacity(ranges.len());
        for (start, end) in ranges {
            match merged.last_mut() {
                Some((_, last_end)) if start <= last_end.saturating_add(1) => {
                    *last_end = (*last_end).max(end);
                }
                _ => merged.push((start, end)),
            }
        }
        Ok(Blocklist {
            ranges: merged,
            entry_count,
        })
    }

    pub fn contains(&self, ip: Ipv4Addr) -> bool {
        let v = u32::from(ip);
        let i = self.ranges.partition_point(|&(start, _)| start <= v);
        i > 0 && self.ranges[i - 1].1 >= v
    }

    /// Number of source lines that contributed entries (before merging).
    pub fn entry_count(&self) -> usize {
        self.entry_count
    }

    pub fn is_empty(&self) -> bool {
        self.ranges.is_empty()
    }
}

fn parse_entry(s: &str) -> Option<(u32, u32)> {
    match s.split_once('/') {
        None => {
            let ip: Ipv4Addr = s.parse().ok()?;
            let v = u32::from(ip);
            Some((v, v))
        }
        Some((addr, prefix)) => {
            let ip: Ipv4Addr = addr.parse().ok()?;
            let bits: u32 = prefix.parse().ok()?;
            if bits > 32 {
                return None;
            }
            let mask = if bits == 0 { 0 } else { u32::MAX << (32 - bits) };
            let base = u32::from(ip) & mask;
            Some((base, base | !mask))
        }
    }
}

pub fn load_blocklist(path: impl AsRef<Path>) -> Result<Blocklist, BlocklistError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| BlocklistError::Io {
        path: path.display().to_string(),
        source,
    })?;
    Blocklist::from_lines(text.lines())
}
