//! Per-keyword option evaluation strategies.
//!
//! Every evaluated keyword registers an [`OptionEvaluator`] in the
//! [`OptionRegistry`]; ruleset compilation looks strategies up by keyword and
//! turns each parsed option into an executable check. Keywords without a
//! registered strategy are what the unevaluable policy is about.

use std::collections::BTreeMap;

use crate::rule::{OptionValue, RuleOption, GENERAL_OPTIONS};
use crate::traffic::{FlowDirection, PacketRecord, TcpFlags};

use super::EngineConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActiveBuffer {
    Payload,
    HttpHeader,
}

/// Per-rule evaluation state: which buffer contents search, and the byte
/// offset just past the previous content match (the relative anchor).
#[derive(Debug, Clone)]
pub struct EvalCursor {
    pub buffer: ActiveBuffer,
    pub pos: usize,
}

impl EvalCursor {
    pub fn new() -> EvalCursor {
        EvalCursor {
            buffer: ActiveBuffer::Payload,
            pos: 0,
        }
    }

    pub fn buffer_bytes<'p>(&self, pkt: &'p PacketRecord) -> &'p [u8] {
        match self.buffer {
            ActiveBuffer::Payload => &pkt.payload,
            ActiveBuffer::HttpHeader => pkt.http_header.as_deref().unwrap_or(&[]),
        }
    }
}

impl Default for EvalCursor {
    fn default() -> Self {
        EvalCursor::new()
    }
}

pub trait CompiledCheck: Send + Sync {
    fn eval(&self, pkt: &PacketRecord, cur: &mut EvalCursor) -> bool;
}

/// Stateful rate limit, hoisted out of the option sequence: the body must
/// fully match before it is consulted.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectionFilterSpec {
    pub count: u32,
    pub seconds: f64,
}

pub enum Compiled {
    Check(Box<dyn CompiledCheck>),
    /// Semantic no-op (general options); always passes, cursor untouched.
    Noop,
    Filter(DetectionFilterSpec),
}

impl std::fmt::Debug for Compiled {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Compiled::Check(_) => f.write_str("Check(..)"),
            Compiled::Noop => f.write_str("Noop"),
            Compiled::Filter(spec) => f.debug_tuple("Filter").field(spec).finish(),
        }
    }
}

/// Why an option could not be compiled. Under the permissive policy the
/// option is treated as always-true; under strict the whole rule is dropped.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Unevaluable {
    pub reason: String,
}

fn unevaluable(reason: impl Into<String>) -> Unevaluable {
    Unevaluable {
        reason: reason.into(),
    }
}

pub trait OptionEvaluator: Send + Sync {
    fn keyword(&self) -> &'static str;
    fn compile(&self, opt: &RuleOption, cfg: &EngineConfig) -> Result<Compiled, Unevaluable>;
}

pub struct OptionRegistry {
    evaluators: BTreeMap<&'static str, Box<dyn OptionEvaluator>>,
}

impl OptionRegistry {
    pub fn empty() -> OptionRegistry {
        OptionRegistry {
            evaluators: BTreeMap::new(),
        }
    }

    /// All evaluated keywords plus no-op strategies for the general options,
    /// so semantic-only rules survive the strict policy.
    pub fn standard() -> OptionRegistry {
        let mut r = OptionRegistry::empty();
        r.register(Box::new(ContentEval));
        r.register(Box::new(HttpHeaderEval));
        r.register(Box::new(IsdataatEval));
        r.register(Box::new(FlagsEval));
        r.register(Box::new(IpProtoEval));
        r.register(Box::new(FlowEval));
        r.register(Box::new(DetectionFilterEval));
        for kw in GENERAL_OPTIONS {
            r.register(Box::new(GeneralNoop { keyword: kw }));
        }
        r
    }

    pub fn register(&mut self, evaluator: Box<dyn OptionEvaluator>) {
        self.evaluators.insert(evaluator.keyword(), evaluator);
    }

    pub fn get(&self, keyword: &str) -> Option<&dyn OptionEvaluator> {
        self.evaluators.get(keyword).map(|b| b.as_ref())
    }

    pub fn keywords(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.evaluators.keys().copied()
    }
}

struct GeneralNoop {
    keyword: &'static str,
}

impl OptionEvaluator for GeneralNoop {
    fn keyword(&self) -> &'static str {
        self.keyword
    }

    fn compile(&self, _opt: &RuleOption, _cfg: &EngineConfig) -> Result<Compiled, Unevaluable> {
        Ok(Compiled::Noop)
    }
}

// ---- content ----

#[derive(Debug, Clone)]
enum Window {
    /// offset/depth: a window measured from the buffer start.
    Absolute { offset: u64, depth: Option<u64> },
    /// distance/within: a window measured from the cursor. Start is
    /// cursor+distance clamped to the buffer; within counts from the clamped
    /// start (a rewind past the buffer head does not eat into it), end
    /// defaults to the buffer end. The pattern must lie wholly inside.
    Relative { distance: i64, within: Option<u64> },
}

struct ContentCheck {
    bytes: Vec<u8>,
    negated: bool,
    nocase: bool,
    window: Window,
}

fn find(haystack: &[u8], needle: &[u8], nocase: bool) -> Option<usize> {
    if needle.is_empty() || needle.len() > haystack.len() {
        return None;
    }
    if nocase {
        haystack
            .windows(needle.len())
            .position(|w| w.eq_ignore_ascii_case(needle))
    } else {
        haystack.windows(needle.len()).position(|w| w == needle)
    }
}

impl CompiledCheck for ContentCheck {
    fn eval(&self, pkt: &PacketRecord, cur: &mut EvalCursor) -> bool {
        let buf = cur.buffer_bytes(pkt);
        let len = buf.len() as i64;
        let (start, end) = match self.window {
            Window::Absolute { offset, depth } => {
                let s = offset as i64;
                let e = match depth {
                    Some(d) => s + d as i64,
                    None => len,
                };
                (s, e)
            }
            Window::Relative { distance, within } => {
                let s = (cur.pos as i64 + distance).clamp(0, len);
                let e = match within {
                    Some(w) => s + w as i64,
                    None => len,
                };
                (s, e)
            }
        };
        let start = start.clamp(0, len) as usize;
        let end = end.clamp(0, len) as usize;
        let hit = if start < end {
            find(&buf[start..end], &self.bytes, self.nocase).map(|i| start + i)
        } else {
            None
        };
        if self.negated {
            hit.is_none()
        } else {
            match hit {
                Some(i) => {
                    cur.pos = i + self.bytes.len();
                    true
                }
                None => false,
            }
        }
    }
}

struct ContentEval;

impl OptionEvaluator for ContentEval {
    fn keyword(&self) -> &'static str {
        "content"
    }

    fn compile(&self, opt: &RuleOption, _cfg: &EngineConfig) -> Result<Compiled, Unevaluable> {
        let OptionValue::Pattern(pattern) = &opt.value else {
            return Err(unevaluable("missing match pattern"));
        };
        if pattern.bytes.is_empty() {
            return Err(unevaluable("empty match pattern"));
        }
        let mut nocase = false;
        let mut offset = None;
        let mut depth = None;
        let mut distance = None;
        let mut within = None;
        for m in &opt.modifiers {
            let num = |slot: &mut Option<i64>| -> Result<(), Unevaluable> {
                let raw = m
                    .value
                    .as_deref()
                    .ok_or_else(|| unevaluable(format!("`{}` needs a value", m.keyword)))?;
                let v: i64 = raw
                    .trim()
                    .parse()
                    .map_err(|_| unevaluable(format!("`{}`: bad number `{raw}`", m.keyword)))?;
                *slot = Some(v);
                Ok(())
            };
            match m.keyword.as_str() {
                "nocase" => nocase = true,
                "offset" => num(&mut offset)?,
                "depth" => num(&mut depth)?,
                "distance" => num(&mut distance)?,
                "within" => num(&mut within)?,
                "fast_pattern" | "rawbytes" => {}
                other => {
                    return Err(unevaluable(format!("unsupported content modifier `{other}`")))
                }
            }
        }
        for (name, v) in [("offset", offset), ("depth", depth), ("within", within)] {
            if v.is_some_and(|v| v < 0) {
                return Err(unevaluable(format!("`{name}` must be nonnegative")));
            }
        }
        let absolute = offset.is_some() || depth.is_some();
        let relative = distance.is_some() || within.is_some();
        if absolute && relative {
            return Err(unevaluable("mixed absolute and relative bounds"));
        }
        let window = if relative {
            Window::Relative {
                distance: distance.unwrap_or(0),
                within: within.map(|w| w as u64),
            }
        } else {
            Window::Absolute {
                offset: offset.unwrap_or(0) as u64,
                depth: depth.map(|d| d as u64),
            }
        };
        Ok(Compiled::Check(Box::new(ContentCheck {
            bytes: pattern.bytes.clone(),
            negated: pattern.negated,
            nocase,
            window,
        })))
    }
}

// ---- http_header ----

struct HttpHeaderCheck;

impl CompiledCheck for HttpHeaderCheck {
    fn eval(&self, pkt: &PacketRecord, cur: &mut EvalCursor) -> bool {
        if pkt.http_header.is_none() {
            return false;
        }
        cur.buffer = ActiveBuffer::HttpHeader;
        cur.pos = 0;
        true
    }
}

struct HttpHeaderEval;

impl OptionEvaluator for HttpHeaderEval {
    fn keyword(&self) -> &'static str {
        "http_header"
    }

    fn compile(&self, opt: &RuleOption, _cfg: &EngineConfig) -> Result<Compiled, Unevaluable> {
        if !matches!(opt.value, OptionValue::None) {
            return Err(unevaluable("sticky buffer takes no value"));
        }
        Ok(Compiled::Check(Box::new(HttpHeaderCheck)))
    }
}

// ---- isdataat ----

struct IsdataatCheck {
    negated: bool,
    index: u64,
    relative: bool,
}

impl CompiledCheck for IsdataatCheck {
    fn eval(&self, pkt: &PacketRecord, cur: &mut EvalCursor) -> bool {
        let buf = cur.buffer_bytes(pkt);
        let base = if self.relative { cur.pos as u64 } else { 0 };
        let present = (buf.len() as u64) > base.saturating_add(self.index);
        present != self.negated
    }
}

struct IsdataatEval;

impl OptionEvaluator for IsdataatEval {
    fn keyword(&self) -> &'static str {
        "isdataat"
    }

    fn compile(&self, opt: &RuleOption, _cfg: &EngineConfig) -> Result<Compiled, Unevaluable> {
        let Some(text) = opt.value.as_text() else {
            return Err(unevaluable("needs an index"));
        };
        let mut parts = text.split(',').map(str::trim);
        let first = parts.next().unwrap_or("");
        let (negated, num) = match first.strip_prefix('!') {
            Some(rest) => (true, rest.trim()),
            None => (false, first),
        };
        let index: u64 = num
            .parse()
            .map_err(|_| unevaluable(format!("bad index `{num}`")))?;
        let mut relative = false;
        for p in parts {
            match p {
                "relative" => relative = true,
                "rawbytes" => {}
                other => return Err(unevaluable(format!("unsupported argument `{other}`"))),
            }
        }
        Ok(Compiled::Check(Box::new(IsdataatCheck {
            negated,
            index,
            relative,
        })))
    }
}

// ---- flags ----

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum FlagMode {
    Exact,
    AllOf,
    AnyOf,
    NoneOf,
}

struct FlagsCheck {
    mode: FlagMode,
    bits: u8,
    ignore: u8,
}

impl CompiledCheck for FlagsCheck {
    fn eval(&self, pkt: &PacketRecord, _cur: &mut EvalCursor) -> bool {
        let f = pkt.tcp_flags.0 & !self.ignore;
        match self.mode {
            FlagMode::Exact => f == self.bits,
            FlagMode::AllOf => f & self.bits == self.bits,
            FlagMode::AnyOf => f & self.bits != 0,
            FlagMode::NoneOf => f & self.bits == 0,
        }
    }
}

struct FlagsEval;

impl OptionEvaluator for FlagsEval {
    fn keyword(&self) -> &'static str {
        "flags"
    }

    fn compile(&self, opt: &RuleOption, _cfg: &EngineConfig) -> Result<Compiled, Unevaluable> {
        let Some(text) = opt.value.as_text() else {
            return Err(unevaluable("needs a flag spec"));
        };
        let (spec, ignore_part) = match text.split_once(',') {
            Some((a, b)) => (a.trim(), Some(b.trim())),
            None => (text.trim(), None),
        };
        let mut spec = spec.to_string();
        let mut mode = FlagMode::Exact;
        if let Some(rest) = spec.strip_prefix(['+', '*', '!']) {
            mode = match spec.as_bytes()[0] {
                b'+' => FlagMode::AllOf,
                b'*' => FlagMode::AnyOf,
                _ => FlagMode::NoneOf,
            };
            spec = rest.to_string();
        } else if let Some(rest) = spec.strip_suffix(['+', '*']) {
            // trailing qualifier spelling, e.g. `S+`
            mode = if spec.ends_with('+') {
                FlagMode::AllOf
            } else {
                FlagMode::AnyOf
            };
            spec = rest.to_string();
        }
        let bits = TcpFlags::parse(&spec)
            .map_err(|c| unevaluable(format!("invalid flag character `{c}`")))?
            .0;
        let ignore = match ignore_part {
            None => 0,
            Some(p) => {
                TcpFlags::parse(p)
                    .map_err(|c| unevaluable(format!("invalid flag character `{c}`")))?
                    .0
            }
        };
        if bits == 0 && mode != FlagMode::Exact {
            return Err(unevaluable("qualifier needs at least one flag"));
        }
        Ok(Compiled::Check(Box::new(FlagsCheck { mode, bits, ignore })))
    }
}

// ---- ip_proto ----

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum CmpOp {
    Eq,
    Ne,
    Gt,
    Lt,
}

struct IpProtoCheck {
    op: CmpOp,
    proto: u8,
}

impl CompiledCheck for IpProtoCheck {
    fn eval(&self, pkt: &PacketRecord, _cur: &mut EvalCursor) -> bool {
        match self.op {
            CmpOp::Eq => pkt.ip_proto == self.proto,
            CmpOp::Ne => pkt.ip_proto != self.proto,
            CmpOp::Gt => pkt.ip_proto > self.proto,
            CmpOp::Lt => pkt.ip_proto < self.proto,
        }
    }
}

struct IpProtoEval;

impl OptionEvaluator for IpProtoEval {
    fn keyword(&self) -> &'static str {
        "ip_proto"
    }

    fn compile(&self, opt: &RuleOption, _cfg: &EngineConfig) -> Result<Compiled, Unevaluable> {
        let Some(text) = opt.value.as_text() else {
            return Err(unevaluable("needs a protocol"));
        };
        let t = text.trim();
        let (op, rest) = match t.as_bytes().first() {
            Some(b'!') => (CmpOp::Ne, &t[1..]),
            Some(b'>') => (CmpOp::Gt, &t[1..]),
            Some(b'<') => (CmpOp::Lt, &t[1..]),
            _ => (CmpOp::Eq, t),
        };
        let rest = rest.trim();
        let proto = match rest {
            "icmp" => 1,
            "tcp" => 6,
            "udp" => 17,
            _ => rest
                .parse()
                .map_err(|_| unevaluable(format!("unknown protocol `{rest}`")))?,
        };
        Ok(Compiled::Check(Box::new(IpProtoCheck { op, proto })))
    }
}

// ---- flow ----

struct FlowCheck {
    dirs: Vec<FlowDirection>,
}

impl CompiledCheck for FlowCheck {
    fn eval(&self, pkt: &PacketRecord, _cur: &mut EvalCursor) -> bool {
        self.dirs.iter().all(|d| pkt.direction == *d)
    }
}

const FLOW_STATE_KEYWORDS: [&str; 7] = [
    "established",
    "not_established",
    "stateless",
    "only_stream",
    "no_stream",
    "only_frag",
    "no_frag",
];

struct FlowEval;

impl OptionEvaluator for FlowEval {
    fn keyword(&self) -> &'static str {
        "flow"
    }

    fn compile(&self, opt: &RuleOption, cfg: &EngineConfig) -> Result<Compiled, Unevaluable> {
        let Some(text) = opt.value.as_text() else {
            return Err(unevaluable("needs at least one keyword"));
        };
        let mut dirs = Vec::new();
        for kw in text.split(',').map(str::trim) {
            match kw {
                "to_server" | "from_client" => dirs.push(FlowDirection::ToServer),
                "to_client" | "from_server" => dirs.push(FlowDirection::ToClient),
                _ if FLOW_STATE_KEYWORDS.contains(&kw) => {
                    // session state does not exist on one-sided captures;
                    // strict mode surfaces that instead of guessing
                    if cfg.unevaluable.is_strict() {
                        return Err(unevaluable(format!("stateful flow keyword `{kw}`")));
                    }
                }
                other => return Err(unevaluable(format!("unknown flow keyword `{other}`"))),
            }
        }
        Ok(Compiled::Check(Box::new(FlowCheck { dirs })))
    }
}

// ---- detection_filter ----

struct DetectionFilterEval;

impl OptionEvaluator for DetectionFilterEval {
    fn keyword(&self) -> &'static str {
        "detection_filter"
    }

    fn compile(&self, opt: &RuleOption, _cfg: &EngineConfig) -> Result<Compiled, Unevaluable> {
        let Some(text) = opt.value.as_text() else {
            return Err(unevaluable("needs track/count/seconds"));
        };
        let mut track = None;
        let mut count = None;
        let mut seconds = None;
        for field in text.split(',').map(str::trim) {
            let mut words = field.split_whitespace();
            match (words.next(), words.next()) {
                (Some("track"), Some(v)) => track = Some(v.to_string()),
                (Some("count"), Some(v)) => {
                    count = Some(
                        v.parse::<u32>()
                            .map_err(|_| unevaluable(format!("bad count `{v}`")))?,
                    )
                }
                (Some("seconds"), Some(v)) => {
                    seconds = Some(
                        v.parse::<f64>()
                            .map_err(|_| unevaluable(format!("bad seconds `{v}`")))?,
                    )
                }
                _ => return Err(unevaluable(format!("unrecognized field `{field}`"))),
            }
        }
        match track.as_deref() {
            Some("by_src") => {}
            Some(other) => return Err(unevaluable(format!("unsupported track `{other}`"))),
            None => return Err(unevaluable("missing track")),
        }
        let count = count.ok_or_else(|| unevaluable("missing count"))?;
        let seconds = seconds.ok_or_else(|| unevaluable("missing seconds"))?;
        if count == 0 || !(seconds > 0.0) {
            return Err(unevaluable("count and seconds must be positive"));
        }
        Ok(Compiled::Filter(DetectionFilterSpec { count, seconds }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rule::parse_rule;
    use crate::traffic::SYN;

    fn opt(rule: &str, idx: usize) -> RuleOption {
        parse_rule(rule).unwrap().options[idx].clone()
    }

    fn packet(payload: &[u8]) -> PacketRecord {
        PacketRecord {
            ts: 0.0,
            src_ip: "1.1.1.1".parse().unwrap(),
            dst_ip: "2.2.2.2".parse().unwrap(),
            ip_proto: 6,
            src_port: 1,
            dst_port: 80,
            tcp_flags: TcpFlags(SYN),
            direction: FlowDirection::ToServer,
            payload: payload.to_vec(),
            http_header: None,
        }
    }

    fn compile_check(rule: &str, idx: usize) -> Box<dyn CompiledCheck> {
        let registry = OptionRegistry::standard();
        let o = opt(rule, idx);
        let ev = registry.get(&o.keyword).unwrap();
        match ev.compile(&o, &EngineConfig::default()).unwrap() {
            Compiled::Check(c) => c,
            _ => panic!("expected a check"),
        }
    }

    fn eval(rule: &str, idx: usize, pkt: &PacketRecord) -> bool {
        compile_check(rule, idx).eval(pkt, &mut EvalCursor::new())
    }

    #[test]
    fn content_plain_and_nocase() {
        let p = packet(b"GET /index HTTP/1.1");
        assert!(eval(r#"alert tcp any any -> any any ( content:"GET"; sid:1; )"#, 0, &p));
        assert!(!eval(r#"alert tcp any any -> any any ( content:"POST"; sid:1; )"#, 0, &p));
        assert!(eval(
            r#"alert tcp any any -> any any ( content:"get",nocase; sid:1; )"#,
            0,
            &p
        ));
    }

    #[test]
    fn content_offset_depth_window() {
        let p = packet(b"aaaaXbbb");
        // X is at index 4; window [4, 5) fits it exactly
        assert!(eval(
            r#"alert tcp any any -> any any ( content:"X",offset 4,depth 1; sid:1; )"#,
            0,
            &p
        ));
        assert!(!eval(
            r#"alert tcp any any -> any any ( content:"X",offset 5; sid:1; )"#,
            0,
            &p
        ));
        assert!(!eval(
            r#"alert tcp any any -> any any ( content:"X",depth 4; sid:1; )"#,
            0,
            &p
        ));
    }

    #[test]
    fn content_relative_window() {
        let p = packet(b"ABCDEFGH");
        let mut cur = EvalCursor::new();
        let first = compile_check(r#"alert tcp any any -> any any ( content:"AB"; sid:1; )"#, 0);
        assert!(first.eval(&p, &mut cur));
        assert_eq!(cur.pos, 2);
        // distance 1 from pos 2 -> window starts at D
        let second = compile_check(
            r#"alert tcp any any -> any any ( content:"D",distance 1; sid:1; )"#,
            0,
        );
        assert!(second.eval(&p, &mut cur));
        assert_eq!(cur.pos, 4);
        // within 2 from pos 4 -> window [4, 6): EF
        let third = compile_check(
            r#"alert tcp any any -> any any ( content:"G",within 2; sid:1; )"#,
            0,
        );
        assert!(!third.eval(&p, &mut cur));
        let third_ok = compile_check(
            r#"alert tcp any any -> any any ( content:"EF",within 2; sid:1; )"#,
            0,
        );
        assert!(third_ok.eval(&p, &mut cur));
    }

    #[test]
    fn relative_rewind_clamps_before_within() {
        // distance -2 from cursor 0 clamps to the buffer head; within then
        // counts forward from there, giving [0, 2), not an empty window
        let p = packet(b"AAzz");
        let mut cur = EvalCursor::new();
        let check = compile_check(
            r#"alert tcp any any -> any any ( content:"AA",distance -2,within 2; sid:1; )"#,
            0,
        );
        assert!(check.eval(&p, &mut cur));
        assert_eq!(cur.pos, 2);
        // past-the-end rewind target stays empty
        let mut cur = EvalCursor { pos: 2, ..EvalCursor::new() };
        let tail = compile_check(
            r#"alert tcp any any -> any any ( content:"z",distance 5,within 3; sid:1; )"#,
            0,
        );
        assert!(!tail.eval(&p, &mut cur));
    }

    #[test]
    fn negated_content_leaves_cursor() {
        let p = packet(b"hello world");
        let mut cur = EvalCursor::new();
        cur.pos = 3;
        let c = compile_check(r#"alert tcp any any -> any any ( content:!"xyz"; sid:1; )"#, 0);
        assert!(c.eval(&p, &mut cur));
        assert_eq!(cur.pos, 3);
        let c2 = compile_check(r#"alert tcp any any -> any any ( content:!"world"; sid:1; )"#, 0);
        assert!(!c2.eval(&p, &mut cur));
    }

    #[test]
    fn http_header_switches_buffer() {
        let mut p = packet(b"body bytes");
        p.http_header = Some(b"Host: example".to_vec());
        let mut cur = EvalCursor::new();
        cur.pos = 5;
        let h = compile_check(r#"alert tcp any any -> any any ( http_header; sid:1; )"#, 0);
        assert!(h.eval(&p, &mut cur));
        assert_eq!(cur.buffer, ActiveBuffer::HttpHeader);
        assert_eq!(cur.pos, 0);
        let c = compile_check(r#"alert tcp any any -> any any ( content:"example"; sid:1; )"#, 0);
        assert!(c.eval(&p, &mut cur));

        let no_header = packet(b"Host: example");
        assert!(!h.eval(&no_header, &mut EvalCursor::new()));
    }

    #[test]
    fn isdataat_forms() {
        let p = packet(b"0123456789");
        assert!(eval(r#"alert tcp any any -> any any ( isdataat:9; sid:1; )"#, 0, &p));
        assert!(!eval(r#"alert tcp any any -> any any ( isdataat:10; sid:1; )"#, 0, &p));
        assert!(eval(r#"alert tcp any any -> any any ( isdataat:!10; sid:1; )"#, 0, &p));
        let mut cur = EvalCursor::new();
        cur.pos = 6;
        let rel = compile_check(
            r#"alert tcp any any -> any any ( isdataat:3,relative; sid:1; )"#,
            0,
        );
        assert!(rel.eval(&p, &mut cur));
        cur.pos = 7;
        assert!(!rel.eval(&p, &mut cur));
    }

    #[test]
    fn flags_forms() {
        let syn = packet(b"");
        let mut synack = packet(b"");
        synack.tcp_flags = TcpFlags::parse("SA").unwrap();
        let exact = |spec: &str, pkt: &PacketRecord| {
            eval(
                &format!("alert tcp any any -> any any ( flags:{spec}; sid:1; )"),
                0,
                pkt,
            )
        };
        assert!(exact("S", &syn));
        assert!(!exact("S", &synack));
        assert!(exact("SA", &synack));
        assert!(exact("+S", &synack));
        assert!(exact("S+", &synack));
        assert!(exact("*SF", &syn));
        assert!(!exact("*FR", &syn));
        assert!(exact("!FR", &syn));
        assert!(!exact("!A", &synack));
        // mask part: ignore ACK, then SYN-ACK looks like a plain SYN
        assert!(exact("S,A", &synack));
        let mut none = packet(b"");
        none.tcp_flags = TcpFlags(0);
        assert!(exact("0", &none));
        assert!(!exact("0", &syn));
    }

    #[test]
    fn ip_proto_forms() {
        let p = packet(b"");
        let ev = |spec: &str| {
            eval(
                &format!("alert ip any any -> any any ( ip_proto:{spec}; sid:1; )"),
                0,
                &p,
            )
        };
        assert!(ev("6"));
        assert!(ev("tcp"));
        assert!(!ev("udp"));
        assert!(ev("!17"));
        assert!(ev(">4"));
        assert!(!ev(">6"));
        assert!(ev("<7"));
    }

    #[test]
    fn flow_direction_only() {
        let p = packet(b"");
        assert!(eval(
            r#"alert tcp any any -> any any ( flow:to_server,established; sid:1; )"#,
            0,
            &p
        ));
        assert!(!eval(
            r#"alert tcp any any -> any any ( flow:to_client; sid:1; )"#,
            0,
            &p
        ));
        assert!(!eval(
            r#"alert tcp any any -> any any ( flow:from_server; sid:1; )"#,
            0,
            &p
        ));
    }

    #[test]
    fn flow_state_rejected_under_strict() {
        let registry = OptionRegistry::standard();
        let o = opt(
            r#"alert tcp any any -> any any ( flow:to_server,established; sid:1; )"#,
            0,
        );
        let strict = EngineConfig::strict();
        let err = registry.get("flow").unwrap().compile(&o, &strict).unwrap_err();
        assert!(err.reason.contains("established"), "{}", err.reason);
    }

    #[test]
    fn detection_filter_spec() {
        let registry = OptionRegistry::standard();
        let o = opt(
            r#"alert tcp any any -> any any ( detection_filter:track by_src, count 3, seconds 60; sid:1; )"#,
            0,
        );
        match registry
            .get("detection_filter")
            .unwrap()
            .compile(&o, &EngineConfig::default())
            .unwrap()
        {
            Compiled::Filter(f) => {
                assert_eq!(f.count, 3);
                assert_eq!(f.seconds, 60.0);
            }
            _ => panic!("expected a filter"),
        }

        let bad = opt(
            r#"alert tcp any any -> any any ( detection_filter:track by_dst, count 3, seconds 60; sid:1; )"#,
            0,
        );
        assert!(registry
            .get("detection_filter")
            .unwrap()
            .compile(&bad, &EngineConfig::default())
            .is_err());
    }

    #[test]
    fn registry_knows_its_keywords() {
        let registry = OptionRegistry::standard();
        for kw in ["content", "flow", "flags", "ip_proto", "msg", "sid"] {
            assert!(registry.get(kw).is_some(), "{kw}");
        }
        assert!(registry.get("pcre").is_none());
    }
}
