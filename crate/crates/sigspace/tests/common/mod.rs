//! Shared helpers for the integration and acceptance suites: seeded
//! generators, a rational-arithmetic hull oracle, and a naive matcher oracle.
//! Each oracle reimplements its contract from scratch; none of them call the
//! code paths they are used to check.
#![allow(dead_code)]

pub mod gen;
pub mod hull_oracle;
pub mod naive;

use std::collections::BTreeSet;
use std::net::Ipv4Addr;
use std::path::PathBuf;

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sigspace::engine::{EngineConfig, RunOutput};
use sigspace::mutate::VariantRuleset;
use sigspace::rule::Rule;
use sigspace::traffic::PacketRecord;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn fixture(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures")
        .join(rel)
}

/// C(n, k) in u128; the suites stay well inside n <= 64.
pub fn binomial(n: u64, k: u64) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}

/// Runs one rule alone over a packet sequence under permissive defaults.
pub fn run_single(rule: &Rule, traffic: &[PacketRecord]) -> RunOutput {
    let ruleset = VariantRuleset::originals(std::slice::from_ref(rule));
    sigspace::run_ruleset(&ruleset, traffic, &EngineConfig::default())
}

pub fn flagged_of(out: &RunOutput) -> BTreeSet<Ipv4Addr> {
    out.flagged.clone()
}

/// Builds a packet directly; tests that do not care about addressing use
/// defaults that pass an `any any -> any any` tcp header.
pub struct PacketBuilder {
    pkt: PacketRecord,
}

impl PacketBuilder {
    pub fn new(ts: f64, src: Ipv4Addr) -> Self {
        PacketBuilder {
            pkt: PacketRecord {
                ts,
                src_ip: src,
                dst_ip: Ipv4Addr::new(203, 0, 113, 10),
                ip_proto: 6,
                src_port: 40000,
                dst_port: 80,
                tcp_flags: sigspace::traffic::TcpFlags::parse("S").unwrap(),
                direction: sigspace::traffic::FlowDirection::ToServer,
                payload: Vec::new(),
                http_header: None,
            },
        }
    }

    pub fn payload(mut self, bytes: &[u8]) -> Self {
        self.pkt.payload = bytes.to_vec();
        self
    }

    pub fn http_header(mut self, bytes: &[u8]) -> Self {
        self.pkt.http_header = Some(bytes.to_vec());
        self
    }

    pub fn proto(mut self, p: u8) -> Self {
        self.pkt.ip_proto = p;
        if p != 6 {
            self.pkt.tcp_flags = sigspace::traffic::TcpFlags::default();
        }
        self
    }

    pub fn flags(mut self, s: &str) -> Self {
        self.pkt.tcp_flags = sigspace::traffic::TcpFlags::parse(s).unwrap();
        self
    }

    pub fn direction(mut self, d: sigspace::traffic::FlowDirection) -> Self {
        self.pkt.direction = d;
        self
    }

    pub fn dst_port(mut self, p: u16) -> Self {
        self.pkt.dst_port = p;
        self
    }

    pub fn build(self) -> PacketRecord {
        self.pkt
    }
}
