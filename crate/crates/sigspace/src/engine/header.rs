//! Structural header matching. Variables resolve to `any` (a telescope has no
//! HOME_NET), literal addresses/CIDRs and port lists/ranges are honored, and
//! anything unrecognized degrades to `any` rather than silently failing rules.

use std::net::Ipv4Addr;

use crate::rule::{Direction, Protocol, RuleHeader};
use crate::traffic::PacketRecord;

#[derive(Debug, Clone)]
pub struct CompiledHeader {
    proto: Option<u8>,
    src_addr: AddrMatcher,
    src_port: PortMatcher,
    dst_addr: AddrMatcher,
    dst_port: PortMatcher,
    bidirectional: bool,
}

#[derive(Debug, Clone)]
struct AddrMatcher {
    negated: bool,
    /// None means any address.
    ranges: Option<Vec<(u32, u32)>>,
}

#[derive(Debug, Clone)]
struct PortMatcher {
    negated: bool,
    ranges: Option<Vec<(u16, u16)>>,
}

impl AddrMatcher {
    fn matches(&self, ip: Ipv4Addr) -> bool {
        let inside = match &self.ranges {
            None => true,
            Some(rs) => {
                let v = u32::from(ip);
                rs.iter().any(|&(a, b)| a <= v && v <= b)
            }
        };
        inside != self.negated
    }
}

impl PortMatcher {
    fn matches(&self, port: u16) -> bool {
        let inside = match &self.ranges {
            None => true,
            Some(rs) => rs.iter().any(|&(a, b)| a <= port && port <= b),
        };
        inside != self.negated
    }
}

impl CompiledHeader {
    pub fn compile(header: &RuleHeader) -> CompiledHeader {
        CompiledHeader {
            proto: match header.protocol {
                Protocol::Ip => None,
                Protocol::Tcp => Some(6),
                Protocol::Udp => Some(17),
                Protocol::Icmp => Some(1),
            },
            src_addr: parse_addr_spec(&header.src_addr),
            src_port: parse_port_spec(&header.src_port),
            dst_addr: parse_addr_spec(&header.dst_addr),
            dst_port: parse_port_spec(&header.dst_port),
            bidirectional: header.direction == Direction::Bidirectional,
        }
    }

    pub fn matches(&self, pkt: &PacketRecord) -> bool {
        if let Some(p) = self.proto {
            if pkt.ip_proto != p {
                return false;
            }
        }
        let forward = self.src_addr.matches(pkt.src_ip)
            && self.src_port.matches(pkt.src_port)
            && self.dst_addr.matches(pkt.dst_ip)
            && self.dst_port.matches(pkt.dst_port);
        if forward {
            return true;
        }
        self.bidirectional
            && self.src_addr.matches(pkt.dst_ip)
            && self.src_port.matches(pkt.dst_port)
            && self.dst_addr.matches(pkt.src_ip)
            && self.dst_port.matches(pkt.src_port)
    }
}

fn parse_addr_spec(spec: &str) -> AddrMatcher {
    let spec = spec.trim();
    let (negated, body) = match spec.strip_prefix('!') {
        Some(rest) => (true, rest.trim()),
        None => (false, spec),
    };
    let ranges = addr_ranges(body);
    AddrMatcher {
        // a negation we could not interpret must not invert `any`
        negated: negated && ranges.is_some(),
        ranges,
    }
}

fn addr_ranges(body: &str) -> Option<Vec<(u32, u32)>> {
    if body.eq_ignore_ascii_case("any") || body.starts_with('$') {
        return None;
    }
    let items: Vec<&str> = if let Some(inner) = body.strip_prefix('[') {
        inner.strip_suffix(']')?.split(',').map(str::trim).collect()
    } else {
        vec![body]
    };
    let mut ranges = Vec::new();
    for item in items {
        if item.eq_ignore_ascii_case("any") || item.starts_with('$') {
            return None;
        }
        match item.split_once('/') {
            Some((addr, prefix)) => {
                let ip: Ipv4Addr = addr.parse().ok()?;
                let bits: u32 = prefix.parse().ok()?;
                if bits > 32 {
                    return None;
                }
                let mask = if bits == 0 { 0 } else { u32::MAX << (32 - bits) };
                let base = u32::from(ip) & mask;
                ranges.push((base, base | !mask));
            }
            None => {
                let ip: Ipv4Addr = item.parse().ok()?;
                let v = u32::from(ip);
                ranges.push((v, v));
            }
        }
    }
    Some(ranges)
}

fn parse_port_spec(spec: &str) -> PortMatcher {
    let spec = spec.trim();
    let (negated, body) = match spec.strip_prefix('!') {
        Some(rest) => (true, rest.trim()),
        None => (false, spec),
    };
    let ranges = port_ranges(body);
    PortMatcher {
        negated: negated && ranges.is_some(),
        ranges,
    }
}

fn port_ranges(body: &str) -> Option<Vec<(u16, u16)>> {
    if body.eq_ignore_ascii_case("any") || body.starts_with('$') {
        return None;
    }
    let items: Vec<&str> = if let Some(inner) = body.strip_prefix('[') {
        inner.strip_suffix(']')?.split(',').map(str::trim).collect()
    } else {
        vec![body]
    };
    let mut ranges = Vec::new();
    for item in items {
        if item.eq_ignore_ascii_case("any") || item.starts_with('$') {
            return None;
        }
        let range = if let Some((lo, hi)) = item.split_once(':') {
            let lo = if lo.is_empty() { 0 } else { lo.trim().parse().ok()? };
            let hi = if hi.is_empty() {
                u16::MAX
            } else {
                hi.trim().parse().ok()?
            };
            (lo, hi)
        } else {
            let p: u16 = item.parse().ok()?;
            (p, p)
        };
        ranges.push(range);
    }
    Some(ranges)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rule::parse_rule;
    use crate::traffic::{FlowDirection, TcpFlags};

    fn packet(src: &str, sport: u16, dst: &str, dport: u16, proto: u8) -> PacketRecord {
        PacketRecord {
            ts: 0.0,
            src_ip: src.parse().unwrap(),
            dst_ip: dst.parse().unwrap(),
            ip_proto: proto,
            src_port: sport,
            dst_port: dport,
            tcp_flags: TcpFlags::default(),
            direction: FlowDirection::ToServer,
            payload: Vec::new(),
            http_header: None,
        }
    }

    fn header(text: &str) -> CompiledHeader {
        CompiledHeader::compile(&parse_rule(text).unwrap().header)
    }

    #[test]
    fn protocol_filter() {
        let h = header("alert tcp any any -> any any ( sid:1; )");
        assert!(h.matches(&packet("1.1.1.1", 1, "2.2.2.2", 2, 6)));
        assert!(!h.matches(&packet("1.1.1.1", 1, "2.2.2.2", 2, 17)));
        let ip = header("alert ip any any -> any any ( sid:1; )");
        assert!(ip.matches(&packet("1.1.1.1", 1, "2.2.2.2", 2, 47)));
    }

    #[test]
    fn variables_match_anything() {
        let h = header("alert tcp $EXTERNAL_NET any -> $HOME_NET $HTTP_PORTS ( sid:1; )");
        assert!(h.matches(&packet("8.8.8.8", 1234, "10.0.0.1", 8080, 6)));
    }

    #[test]
    fn literal_port_and_range() {
        let h = header("alert tcp any any -> any 80 ( sid:1; )");
        assert!(h.matches(&packet("1.1.1.1", 1, "2.2.2.2", 80, 6)));
        assert!(!h.matches(&packet("1.1.1.1", 1, "2.2.2.2", 81, 6)));

        let r = header("alert tcp any any -> any 8000:8100 ( sid:1; )");
        assert!(r.matches(&packet("1.1.1.1", 1, "2.2.2.2", 8050, 6)));
        assert!(!r.matches(&packet("1.1.1.1", 1, "2.2.2.2", 7999, 6)));

        let open = header("alert tcp any any -> any 1024: ( sid:1; )");
        assert!(open.matches(&packet("1.1.1.1", 1, "2.2.2.2", 65535, 6)));
        assert!(!open.matches(&packet("1.1.1.1", 1, "2.2.2.2", 80, 6)));
    }

    #[test]
    fn port_list_and_negation() {
        let h = header("alert tcp any any -> any [80, 443] ( sid:1; )");
        assert!(h.matches(&packet("1.1.1.1", 1, "2.2.2.2", 443, 6)));
        assert!(!h.matches(&packet("1.1.1.1", 1, "2.2.2.2", 8080, 6)));

        let n = header("alert tcp any any -> any !80 ( sid:1; )");
        assert!(!n.matches(&packet("1.1.1.1", 1, "2.2.2.2", 80, 6)));
        assert!(n.matches(&packet("1.1.1.1", 1, "2.2.2.2", 81, 6)));
    }

    #[test]
    fn cidr_addresses() {
        let h = header("alert tcp 192.0.2.0/24 any -> any any ( sid:1; )");
        assert!(h.matches(&packet("192.0.2.77", 1, "2.2.2.2", 2, 6)));
        assert!(!h.matches(&packet("192.0.3.77", 1, "2.2.2.2", 2, 6)));
    }

    #[test]
    fn bidirectional_swaps_endpoints() {
        let h = header("alert tcp 192.0.2.1 any <> any 80 ( sid:1; )");
        assert!(h.matches(&packet("192.0.2.1", 999, "2.2.2.2", 80, 6)));
        assert!(h.matches(&packet("2.2.2.2", 80, "192.0.2.1", 999, 6)));
        assert!(!h.matches(&packet("2.2.2.2", 999, "192.0.2.1", 80, 6)));
    }

    #[test]
    fn unparseable_spec_degrades_to_any() {
        let h = header("alert tcp 192.0.2.0/33 any -> any whatever ( sid:1; )");
        assert!(h.matches(&packet("8.8.8.8", 1, "2.2.2.2", 2, 6)));
    }
}
