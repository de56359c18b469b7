use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RuleAction {
    Alert,
    Block,
    Drop,
    Log,
    Pass,
}

impl fmt::Display for RuleAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            RuleAction::Alert => "alert",
            RuleAction::Block => "block",
            RuleAction::Drop => "drop",
            RuleAction::Log => "log",
            RuleAction::Pass => "pass",
        };
        f.write_str(s)
    }
}

impl FromStr for RuleAction {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "alert" => Ok(RuleAction::Alert),
            "block" => Ok(RuleAction::Block),
            "drop" => Ok(RuleAction::Drop),
            "log" => Ok(RuleAction::Log),
            "pass" => Ok(RuleAction::Pass),
            _ => Err(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Protocol {
    Ip,
    Tcp,
    Udp,
    Icmp,
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Protocol::Ip => "ip",
            Protocol::Tcp => "tcp",
            Protocol::Udp => "udp",
            Protocol::Icmp => "icmp",
        };
        f.write_str(s)
    }
}

impl FromStr for Protocol {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "ip" => Ok(Protocol::Ip),
            "tcp" => Ok(Protocol::Tcp),
            "udp" => Ok(Protocol::Udp),
            "icmp" => Ok(Protocol::Icmp),
            _ => Err(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    /// `->`: source on the left, destination on the right.
    ToDest,
    /// `<>`: match either orientation.
    Bidirectional,
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::ToDest => "->",
            Direction::Bidirectional => "<>",
        })
    }
}

/// Address and port fields are kept verbatim. The engine interprets the
/// common forms; everything else it can still carry around and re-emit.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RuleHeader {
    pub action: RuleAction,
    pub protocol: Protocol,
    pub src_addr: String,
    pub src_port: String,
    pub direction: Direction,
    pub dst_addr: String,
    pub dst_port: String,
}

/// A `content` match pattern with hex blocks already decoded to raw bytes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContentPattern {
    pub bytes: Vec<u8>,
    pub negated: bool,
}

/// Value part of a body option, after `keyword:value` splitting.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum OptionValue {
    /// Flag-style option with no value, e.g. `nocase;` or `file_data;`.
    None,
    /// Uninterpreted text value, e.g. `flow:to_server,established`.
    Text(String),
    /// Quoted match pattern, used by `content`.
    Pattern(ContentPattern),
}

impl OptionValue {
    pub fn as_text(&self) -> Option<&str> {
        match self {
            OptionValue::Text(s) => Some(s),
            _ => None,
        }
    }

    pub fn as_pattern(&self) -> Option<&ContentPattern> {
        match self {
            OptionValue::Pattern(p) => Some(p),
            _ => None,
        }
    }
}

/// Modifier attached to a pattern option, e.g. `nocase` or `offset 4`.
/// Both spellings (comma-separated suffix and standalone trailing option)
/// parse to this form.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Modifier {
    pub keyword: String,
    pub value: Option<String>,
}

/// One body option. `position` is the option's index within the rule body
/// after modifier binding, so positions are contiguous from zero and stable
/// identifiers for mutation masks.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RuleOption {
    pub keyword: String,
    pub value: OptionValue,
    pub modifiers: Vec<Modifier>,
    pub position: usize,
}

impl RuleOption {
    pub fn modifier(&self, keyword: &str) -> Option<&Modifier> {
        self.modifiers.iter().find(|m| m.keyword == keyword)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rule {
    pub header: RuleHeader,
    pub options: Vec<RuleOption>,
    pub sid: u32,
    /// Defaults to 1 when the rule text carries no `rev` option.
    pub rev: u32,
    /// Original rule text as read, surrounding whitespace trimmed.
    pub raw_text: String,
}

impl Rule {
    /// Structural equality that ignores `raw_text`, so a parsed rule and the
    /// re-parse of its serialization compare equal.
    pub fn ast_eq(&self, other: &Rule) -> bool {
        self.header == other.header
            && self.options == other.options
            && self.sid == other.sid
            && self.rev == other.rev
    }

    pub fn option_count(&self) -> usize {
        self.options.len()
    }

    /// Occurrences of `keyword` in body order.
    pub fn options_named<'a>(&'a self, keyword: &'a str) -> impl Iterator<Item = &'a RuleOption> {
        self.options.iter().filter(move |o| o.keyword == keyword)
    }

    pub fn content_count(&self) -> usize {
        self.options_named("content").count()
    }

    /// True when the rule carries more than one `content` option; the rules
    /// this holds for dominate real rulesets and are where single-occurrence
    /// removal stays non-trivial.
    pub fn is_multi_content(&self) -> bool {
        self.content_count() > 1
    }
}
