//! Line-delimited JSON packet captures. One object per line:
//! `{"ts": 1.5, "src": "a.b.c.d", "dst": "a.b.c.d", "proto": 6, "sport": 1,
//!   "dport": 80, "flags": "S", "dir": "to_server", "payload": base64,
//!   "http_header": base64}` with `flags` and `http_header` optional.

use std::fmt;
use std::net::Ipv4Addr;
use std::path::Path;

use base64::Engine as _;
use serde::Deserialize;
use thiserror::Error;

pub const FIN: u8 = 0x01;
pub const SYN: u8 = 0x02;
pub const RST: u8 = 0x04;
pub const PSH: u8 = 0x08;
pub const ACK: u8 = 0x10;
pub const URG: u8 = 0x20;
pub const ECE: u8 = 0x40;
pub const CWR: u8 = 0x80;

/// TCP flag byte. The textual form uses Snort letters, with `1`/`2` accepted
/// for the reserved bits (CWR/ECE) and `0` for the empty set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct TcpFlags(pub u8);

impl TcpFlags {
    pub fn parse(s: &str) -> Result<TcpFlags, char> {
        let mut bits = 0u8;
        for c in s.chars() {
            bits |= match c {
                'F' => FIN,
                'S' => SYN,
                'R' => RST,
                'P' => PSH,
                'A' => ACK,
                'U' => URG,
                'E' | '2' => ECE,
                'C' | '1' => CWR,
                '0' => 0,
                _ => return Err(c),
            };
        }
        Ok(TcpFlags(bits))
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }
}

impl fmt::Display for TcpFlags {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0 == 0 {
            return f.write_str("0");
        }
        for (bit, c) in [
            (FIN, 'F'),
            (SYN, 'S'),
            (RST, 'R'),
            (PSH, 'P'),
            (ACK, 'A'),
            (URG, 'U'),
            (ECE, 'E'),
            (CWR, 'C'),
        ] {
            if self.0 & bit != 0 {
                fmt::Write::write_char(f, c)?;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FlowDirection {
    ToServer,
    ToClient,
}

#[derive(Debug, Clone)]
pub struct PacketRecord {
    pub ts: f64,
    pub src_ip: Ipv4Addr,
    pub dst_ip: Ipv4Addr,
    pub ip_proto: u8,
    pub src_port: u16,
    pub dst_port: u16,
    pub tcp_flags: TcpFlags,
    pub direction: FlowDirection,
    pub payload: Vec<u8>,
    /// Application-layer header sub-buffer, present only for HTTP traffic.
    pub http_header: Option<Vec<u8>>,
}

#[derive(Debug, Error)]
pub enum TrafficError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("line {line}: {reason}")]
    Line { line: usize, reason: String },
}

fn line_err(line: usize, reason: impl Into<String>) -> TrafficError {
    TrafficError::Line {
        line,
        reason: reason.into(),
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPacket {
    ts: f64,
    src: String,
    dst: String,
    proto: i64,
    sport: i64,
    dport: i64,
    #[serde(default)]
    flags: String,
    dir: FlowDirection,
    payload: String,
    #[serde(default)]
    http_header: Option<String>,
}

pub fn load_traffic(path: impl AsRef<Path>) -> Result<Vec<PacketRecord>, TrafficError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| TrafficError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_traffic(&text)
}

/// Records come back in file order; timestamps must be nondecreasing, which
/// the stateful matcher relies on.
pub fn parse_traffic(text: &str) -> Result<Vec<PacketRecord>, TrafficError> {
    let b64 = base64::engine::general_purpose::STANDARD;
    let mut records = Vec::new();
    let mut prev_ts = f64::NEG_INFINITY;
    for (idx, line) in text.lines().enumerate() {
        let lineno = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawPacket = serde_json::from_str(line)
            .map_err(|e| line_err(lineno, format!("malformed record: {e}")))?;
        let src_ip: Ipv4Addr = raw
            .src
            .parse()
            .map_err(|_| line_err(lineno, format!("bad src address `{}`", raw.src)))?;
        let dst_ip: Ipv4Addr = raw
            .dst
            .parse()
            .map_err(|_| line_err(lineno, format!("bad dst address `{}`", raw.dst)))?;
        let ip_proto = u8::try_from(raw.proto)
            .map_err(|_| line_err(lineno, format!("proto {} out of range", raw.proto)))?;
        let src_port = u16::try_from(raw.sport)
            .map_err(|_| line_err(lineno, format!("sport {} out of range", raw.sport)))?;
        let dst_port = u16::try_from(raw.dport)
            .map_err(|_| line_err(lineno, format!("dport {} out of range", raw.dport)))?;
        let tcp_flags = TcpFlags::parse(&raw.flags)
            .map_err(|c| line_err(lineno, format!("invalid flag character `{c}`")))?;
        if !tcp_flags.is_empty() && ip_proto != 6 {
            return Err(line_err(
                lineno,
                format!("tcp flags set on protocol {ip_proto}"),
            ));
        }
        if !raw.ts.is_finite() {
            return Err(line_err(lineno, "non-finite timestamp"));
        }
        if raw.ts < prev_ts {
            return Err(line_err(
                lineno,
                format!("timestamp {} decreases below {}", raw.ts, prev_ts),
            ));
        }
        prev_ts = raw.ts;
        let payload = b64
            .decode(raw.payload.as_bytes())
            .map_err(|e| line_err(lineno, format!("payload base64: {e}")))?;
        let http_header = match raw.http_header {
            None => None,
            Some(h) => Some(
                b64.decode(h.as_bytes())
                    .map_err(|e| line_err(lineno, format!("http_header base64: {e}")))?,
            ),
        };
        records.push(PacketRecord {
            ts: raw.ts,
            src_ip,
            dst_ip,
            ip_proto,
            src_port,
            dst_port,
            tcp_flags,
            direction: raw.dir,
            payload,
            http_header,
        });
    }
    Ok(records)
}
