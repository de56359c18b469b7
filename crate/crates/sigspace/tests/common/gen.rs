//! Seeded random generators for rules, payloads, and traffic. Rules are
//! generated as text and run through the parser, so every generated AST is
//! one the public API can produce.

use std::collections::BTreeSet;
use std::net::Ipv4Addr;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use sigspace::rule::{parse_rule, Rule, GENERAL_OPTIONS};
use sigspace::traffic::PacketRecord;

use super::PacketBuilder;

const ALPHABET: &[u8] = b"ABab";

fn parse(text: &str) -> Rule {
    parse_rule(text).unwrap_or_else(|e| panic!("generated rule failed to parse: {e}\n{text}"))
}

fn gen_pattern(rng: &mut ChaCha8Rng) -> String {
    let len = rng.gen_range(1..=3);
    let mut out = String::new();
    for _ in 0..len {
        let c = *ALPHABET.choose(rng).unwrap();
        if rng.gen_bool(0.15) {
            // same byte spelled as a hex block, mixing digit case
            if rng.gen_bool(0.5) {
                out.push_str(&format!("|{c:02X}|"));
            } else {
                out.push_str(&format!("|{c:02x}|"));
            }
        } else {
            out.push(c as char);
        }
    }
    out
}

fn content_opt(rng: &mut ChaCha8Rng) -> String {
    let pat = gen_pattern(rng);
    let negated = rng.gen_bool(0.25);
    let mut mods: Vec<String> = Vec::new();
    if rng.gen_bool(0.5) {
        if rng.gen_bool(0.8) {
            mods.push(format!("distance {}", rng.gen_range(-4..=6)));
        }
        if rng.gen_bool(0.6) {
            mods.push(format!("within {}", rng.gen_range(0..=16)));
        }
        if mods.is_empty() {
            mods.push("distance 0".to_string());
        }
    } else {
        if rng.gen_bool(0.6) {
            mods.push(format!("offset {}", rng.gen_range(0..=8)));
        }
        if rng.gen_bool(0.5) {
            mods.push(format!("depth {}", rng.gen_range(1..=14)));
        }
    }
    if rng.gen_bool(0.3) {
        mods.push("nocase".to_string());
    }
    let quoted = if negated {
        format!("!\"{pat}\"")
    } else {
        format!("\"{pat}\"")
    };
    if mods.is_empty() {
        format!("content:{quoted}")
    } else {
        format!("content:{quoted},{}", mods.join(","))
    }
}

fn isdataat_opt(rng: &mut ChaCha8Rng) -> String {
    let bang = if rng.gen_bool(0.3) { "!" } else { "" };
    let n = rng.gen_range(0..=40);
    let mut tail = String::new();
    if rng.gen_bool(0.5) {
        tail.push_str(",relative");
    }
    if rng.gen_bool(0.15) {
        tail.push_str(",rawbytes");
    }
    format!("isdataat:{bang}{n}{tail}")
}

/// Rule over the window-matching option family only (content, isdataat, and
/// the http_header buffer switch), for comparison against the naive oracle.
pub fn gen_matcher_rule(rng: &mut ChaCha8Rng, sid: u32) -> Rule {
    let n = rng.gen_range(1..=5);
    let mut body = vec![format!("msg:\"m{sid}\"")];
    let mut switched = false;
    for _ in 0..n {
        let pick = rng.gen_range(0..8);
        if pick == 7 && !switched {
            body.push("http_header".to_string());
            switched = true;
        } else if pick >= 5 {
            body.push(isdataat_opt(rng));
        } else {
            body.push(content_opt(rng));
        }
    }
    body.push(format!("sid:{sid}"));
    body.push("rev:1".to_string());
    parse(&format!("alert tcp any any -> any any ( {}; )", body.join("; ")))
}

/// Payload drawn from the same tiny alphabet the patterns use, so matches,
/// near-misses, and window-boundary hits all occur at useful rates.
pub fn gen_payload(rng: &mut ChaCha8Rng, max_len: usize) -> Vec<u8> {
    let len = rng.gen_range(0..=max_len);
    (0..len).map(|_| *ALPHABET.choose(rng).unwrap()).collect()
}

pub fn gen_matcher_packet(rng: &mut ChaCha8Rng, ts: f64) -> PacketRecord {
    let mut b = PacketBuilder::new(ts, Ipv4Addr::new(198, 51, 100, 1)).payload(&gen_payload(rng, 48));
    if rng.gen_bool(0.4) {
        let header = gen_payload(rng, 24);
        b = b.http_header(&header);
    }
    b.build()
}

/// Rule with a known removable-set shape for mask-combinatorics checks:
/// mixes general options, plain removable options, unreferenced
/// byte_extracts (removable), and byte_extract/byte_test dependency pairs
/// (extract locked, test removable).
pub fn gen_mask_rule(rng: &mut ChaCha8Rng, sid: u32, max_removable: usize) -> Rule {
    let target = rng.gen_range(0..=max_removable);
    let mut body = vec![format!("msg:\"generated {sid}\"")];
    let mut uniq = 0usize;
    let mut emitted = 0usize;
    while emitted < target {
        if rng.gen_bool(0.2) {
            body.push(
                [
                    "reference:url,example.test/gen",
                    "classtype:misc-activity",
                    "priority:2",
                    "metadata:policy balanced",
                ]
                .choose(rng)
                .unwrap()
                .to_string(),
            );
        }
        let remaining = target - emitted;
        let pick = rng.gen_range(0..12);
        match pick {
            0..=4 => body.push(format!("content:\"G{uniq}\"")),
            5 => body.push("flow:to_server".to_string()),
            6 => body.push("flags:S".to_string()),
            7 => body.push(format!("isdataat:{}", rng.gen_range(1..40))),
            8 => body.push("ip_proto:6".to_string()),
            9 => body.push(format!("pcre:\"/gen{uniq}/\"")),
            10 => body.push(format!("byte_extract:2,0,free{uniq}")),
            11 if remaining >= 1 => {
                // locked pair: the extract defines a variable the test uses
                body.push(format!("byte_extract:2,0,dep{uniq}"));
                body.push(format!("byte_test:2,>,5,dep{uniq}"));
            }
            _ => body.push(format!("content:\"G{uniq}\"")),
        }
        uniq += 1;
        emitted += 1;
    }
    body.push(format!("sid:{sid}"));
    body.push("rev:1".to_string());
    parse(&format!("alert tcp any any -> any any ( {}; )", body.join("; ")))
}

/// Independent recount of the default-policy removable set: excludes the
/// general options and any byte_extract whose third field is referenced as a
/// token in some other option's text value.
pub fn expected_removable(rule: &Rule) -> Vec<usize> {
    let is_tok = |c: char| c.is_ascii_alphanumeric() || c == '_';
    let mut locked: BTreeSet<usize> = BTreeSet::new();
    for opt in &rule.options {
        if opt.keyword != "byte_extract" {
            continue;
        }
        let var = opt
            .value
            .as_text()
            .and_then(|t| t.split(',').nth(2))
            .map(str::trim)
            .unwrap_or_default()
            .to_string();
        if var.is_empty() {
            continue;
        }
        let referenced = rule.options.iter().any(|other| {
            other.position != opt.position
                && other
                    .value
                    .as_text()
                    .is_some_and(|t| t.split(|c| !is_tok(c)).any(|tok| tok == var))
        });
        if referenced {
            locked.insert(opt.position);
        }
    }
    rule.options
        .iter()
        .filter(|o| !GENERAL_OPTIONS.contains(&o.keyword.as_str()) && !locked.contains(&o.position))
        .map(|o| o.position)
        .collect()
}

fn mono_cursor_neutral(rng: &mut ChaCha8Rng) -> String {
    match rng.gen_range(0..5) {
        0 => {
            // negated absolute content: fixed window, never touches the cursor
            let mut tail = String::new();
            if rng.gen_bool(0.6) {
                tail.push_str(&format!(",offset {}", rng.gen_range(0..=6)));
            }
            if rng.gen_bool(0.5) {
                tail.push_str(&format!(",depth {}", rng.gen_range(1..=12)));
            }
            format!("content:!\"{}\"{tail}", gen_pattern(rng))
        }
        1 => format!(
            "isdataat:{}{}",
            if rng.gen_bool(0.3) { "!" } else { "" },
            rng.gen_range(0..=40)
        ),
        2 => ["flow:to_server", "flow:to_client"]
            .choose(rng)
            .unwrap()
            .to_string(),
        3 => ["flags:S", "flags:S,12", "flags:+S", "flags:!R"]
            .choose(rng)
            .unwrap()
            .to_string(),
        _ => ["ip_proto:6", "ip_proto:tcp", "ip_proto:>4", "ip_proto:!17"]
            .choose(rng)
            .unwrap()
            .to_string(),
    }
}

/// Rule restricted to the monotone option fragment. Monotonicity under
/// removal needs the cursor to never move backward, so: at most one positive
/// absolute content (the anchor), placed before every relative option;
/// relative contents are positive with distance >= 0 and no `within`;
/// relative isdataat is positive; negation only on absolute placements.
/// http_header, when present, comes first and must be locked by the policy
/// the corpus runs under (removing it would retarget contents to a
/// different buffer entirely).
pub fn gen_monotone_rule(rng: &mut ChaCha8Rng, sid: u32) -> Rule {
    let mut body = vec![format!("msg:\"mono {sid}\"")];
    if rng.gen_bool(0.2) {
        body.push("http_header".to_string());
    }
    for _ in 0..rng.gen_range(0..=2) {
        body.push(mono_cursor_neutral(rng));
    }
    if rng.gen_bool(0.8) {
        // the anchor: sole positive absolute content, ahead of the chain
        let mut mods = Vec::new();
        if rng.gen_bool(0.5) {
            mods.push(format!("offset {}", rng.gen_range(0..=6)));
        }
        if rng.gen_bool(0.4) {
            mods.push(format!("depth {}", rng.gen_range(1..=12)));
        }
        if rng.gen_bool(0.3) {
            mods.push("nocase".to_string());
        }
        let tail = if mods.is_empty() {
            String::new()
        } else {
            format!(",{}", mods.join(","))
        };
        body.push(format!("content:\"{}\"{tail}", gen_pattern(rng)));
    }
    for _ in 0..rng.gen_range(0..=3) {
        let opt = match rng.gen_range(0..4) {
            0 | 1 => format!(
                "content:\"{}\",distance {}",
                gen_pattern(rng),
                rng.gen_range(0..=4)
            ),
            2 => format!("isdataat:{},relative", rng.gen_range(0..=30)),
            _ => mono_cursor_neutral(rng),
        };
        body.push(opt);
    }
    if rng.gen_bool(0.15) {
        body.push(format!(
            "detection_filter:track by_src, count {}, seconds {}",
            rng.gen_range(2..=3),
            rng.gen_range(5..=60)
        ));
    }
    if body.len() == 1 {
        body.push(mono_cursor_neutral(rng));
    }
    body.push(format!("sid:{sid}"));
    body.push("rev:1".to_string());
    let proto = if rng.gen_bool(0.8) { "tcp" } else { "ip" };
    let dport = ["any", "80"].choose(rng).unwrap();
    parse(&format!(
        "alert {proto} any any -> any {dport} ( {}; )",
        body.join("; ")
    ))
}

/// Mixed traffic for the monotonicity corpus: several sources, both
/// directions, tcp and udp, flag variety, and the shared pattern alphabet.
pub fn gen_traffic(rng: &mut ChaCha8Rng, packets: usize, sources: u8) -> Vec<PacketRecord> {
    (0..packets)
        .map(|i| {
            let src = Ipv4Addr::new(198, 51, 100, rng.gen_range(1..=sources));
            let mut b = PacketBuilder::new(0.5 * i as f64, src).payload(&gen_payload(rng, 40));
            if rng.gen_bool(0.8) {
                b = b.flags(["S", "SA", "A", "PA", "R"].choose(rng).unwrap());
            } else {
                b = b.proto(17);
            }
            if rng.gen_bool(0.3) {
                b = b.direction(sigspace::traffic::FlowDirection::ToClient);
            }
            if rng.gen_bool(0.3) {
                let header = gen_payload(rng, 24);
                b = b.http_header(&header);
            }
            b.build()
        })
        .collect()
}
