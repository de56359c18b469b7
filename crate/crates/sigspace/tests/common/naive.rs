//! Naive single-rule body oracle: quadratic window scans, no precompilation,
//! no shared code with the engine. Supports the content/isdataat family plus
//! the http_header buffer switch; anything else is a generator bug.

use std::net::Ipv4Addr;

use sigspace::rule::{OptionValue, Rule, RuleOption};
use sigspace::traffic::PacketRecord;

fn mod_i64(opt: &RuleOption, name: &str) -> Option<i64> {
    opt.modifier(name)
        .map(|m| m.value.as_deref().expect("modifier value").trim().parse().expect("numeric modifier"))
}

fn bytes_eq(a: &[u8], b: &[u8], nocase: bool) -> bool {
    if nocase {
        a.eq_ignore_ascii_case(b)
    } else {
        a == b
    }
}

/// First occurrence of `pat` wholly inside `[start, end)` of `buf`, by plain
/// position-by-position comparison.
fn scan(buf: &[u8], pat: &[u8], nocase: bool, start: usize, end: usize) -> Option<usize> {
    assert!(!pat.is_empty(), "oracle rules never carry empty patterns");
    let mut i = start;
    while i + pat.len() <= end {
        if bytes_eq(&buf[i..i + pat.len()], pat, nocase) {
            return Some(i);
        }
        i += 1;
    }
    None
}

fn eval_content(opt: &RuleOption, buf: &[u8], cursor: &mut usize) -> bool {
    let pat = match &opt.value {
        OptionValue::Pattern(p) => p,
        other => panic!("content with non-pattern value {other:?}"),
    };
    let nocase = opt.modifier("nocase").is_some();
    let offset = mod_i64(opt, "offset");
    let depth = mod_i64(opt, "depth");
    let distance = mod_i64(opt, "distance");
    let within = mod_i64(opt, "within");
    let len = buf.len() as i64;
    let relative = distance.is_some() || within.is_some();
    let (start, end) = if relative {
        assert!(offset.is_none() && depth.is_none(), "mixed placement");
        let s = (*cursor as i64 + distance.unwrap_or(0)).clamp(0, len);
        let e = match within {
            Some(w) => {
                assert!(w >= 0, "oracle rules use nonnegative within");
                (s + w).min(len)
            }
            None => len,
        };
        (s as usize, e as usize)
    } else {
        let off = offset.unwrap_or(0);
        assert!(off >= 0, "oracle rules use nonnegative offset");
        let s = off.min(len);
        let e = match depth {
            Some(d) => {
                assert!(d >= 0, "oracle rules use nonnegative depth");
                (off + d).min(len)
            }
            None => len,
        };
        (s as usize, e as usize)
    };
    match (scan(buf, &pat.bytes, nocase, start, end), pat.negated) {
        (Some(at), false) => {
            *cursor = at + pat.bytes.len();
            true
        }
        (None, true) => true,
        _ => false,
    }
}

fn eval_isdataat(opt: &RuleOption, buf: &[u8], cursor: usize) -> bool {
    let text = match &opt.value {
        OptionValue::Text(t) => t.trim(),
        other => panic!("isdataat with value {other:?}"),
    };
    let (negated, rest) = match text.strip_prefix('!') {
        Some(r) => (true, r),
        None => (false, text),
    };
    let mut parts = rest.split(',').map(str::trim);
    let n: i64 = parts.next().unwrap().parse().expect("isdataat count");
    let mut relative = false;
    for p in parts {
        match p {
            "relative" => relative = true,
            "rawbytes" => {}
            other => panic!("isdataat part {other}"),
        }
    }
    let base = if relative { cursor as i64 } else { 0 };
    let cond = buf.len() as i64 > base + n;
    cond != negated
}

/// Body-only evaluation; the header is assumed to match. Mirrors the
/// cursor-threading contract: matches advance the cursor, negated contents
/// leave it alone, http_header swaps the buffer and rewinds.
pub fn naive_eval_body(rule: &Rule, pkt: &PacketRecord) -> bool {
    let mut buf: &[u8] = &pkt.payload;
    let mut cursor: usize = 0;
    for opt in &rule.options {
        match opt.keyword.as_str() {
            "msg" | "sid" | "rev" | "reference" | "classtype" | "metadata" | "priority"
            | "gid" => {}
            "http_header" => match &pkt.http_header {
                Some(h) => {
                    buf = h;
                    cursor = 0;
                }
                None => return false,
            },
            "content" => {
                if !eval_content(opt, buf, &mut cursor) {
                    return false;
                }
            }
            "isdataat" => {
                if !eval_isdataat(opt, buf, cursor) {
                    return false;
                }
            }
            other => panic!("naive oracle does not evaluate {other}"),
        }
    }
    true
}

/// Threshold recount for scripted detection_filter scenarios: an event at
/// time t fires when at least `count` body matches from the same source
/// (this one included) fall in the inclusive window [t - seconds, t].
pub fn naive_filter_alerts(
    events: &[(Ipv4Addr, f64)],
    count: usize,
    seconds: f64,
) -> Vec<(Ipv4Addr, f64)> {
    let mut fired = Vec::new();
    for (i, &(src, t)) in events.iter().enumerate() {
        let in_window = events[..=i]
            .iter()
            .filter(|&&(s, u)| s == src && t - u <= seconds)
            .count();
        if in_window >= count {
            fired.push((src, t));
        }
    }
    fired
}
