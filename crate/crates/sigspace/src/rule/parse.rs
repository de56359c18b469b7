//! Recursive-descent parser for single-line Snort 3 rules.
//!
//! The grammar subset: `action proto src_addr src_port dir dst_addr dst_port
//! ( keyword[:value]; ... )`. Content patterns decode `|xx xx|` hex blocks and
//! backslash escapes at parse time; everything else is kept verbatim so
//! unknown keywords survive a round-trip untouched.

use std::collections::BTreeMap;

use thiserror::Error;

use super::ast::{
    ContentPattern, Direction, Modifier, OptionValue, Protocol, Rule, RuleAction, RuleHeader,
    RuleOption,
};

/// Option keywords that, when written standalone (`nocase;`, `offset:4;`),
/// bind to the nearest preceding content instead of standing alone. Snort 3
/// comma-suffix modifiers parse to the same representation.
const BINDABLE_MODIFIERS: [&str; 7] = [
    "nocase",
    "offset",
    "depth",
    "distance",
    "within",
    "fast_pattern",
    "rawbytes",
];

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ParseError {
    #[error("offset {offset}: expected {expected}")]
    Expected { offset: usize, expected: &'static str },
    #[error("offset {offset}: unknown action `{word}`")]
    UnknownAction { offset: usize, word: String },
    #[error("offset {offset}: unknown protocol `{word}`")]
    UnknownProtocol { offset: usize, word: String },
    #[error("offset {offset}: unterminated string")]
    UnterminatedString { offset: usize },
    #[error("offset {offset}: unterminated rule body")]
    UnterminatedBody { offset: usize },
    #[error("offset {offset}: bad hex block: {reason}")]
    BadHex { offset: usize, reason: String },
    #[error("offset {offset}: unsupported escape `\\{found}`")]
    BadEscape { offset: usize, found: char },
    #[error("offset {offset}: modifier `{keyword}` has no preceding content")]
    DanglingModifier { offset: usize, keyword: String },
    #[error("offset {offset}: option `{keyword}`: {reason}")]
    BadOption {
        offset: usize,
        keyword: String,
        reason: String,
    },
    #[error("rule has no sid option")]
    MissingSid,
    #[error("offset {offset}: trailing input after rule body")]
    TrailingInput { offset: usize },
}

#[derive(Debug, Error)]
pub enum RulesetError {
    #[error("line {line}: {source}")]
    Rule {
        line: usize,
        #[source]
        source: ParseError,
    },
    #[error("duplicate sid {sid} on lines {first} and {second}")]
    DuplicateSid { sid: u32, first: usize, second: usize },
}

pub fn parse_rule(text: &str) -> Result<Rule, ParseError> {
    let mut p = Parser::new(text);
    let rule = p.rule()?;
    p.skip_ws();
    if p.pos < p.bytes.len() {
        return Err(ParseError::TrailingInput { offset: p.pos });
    }
    Ok(rule)
}

/// Parses a whole rules file. Lines starting with `#` and blank lines are
/// skipped; every remaining line must hold one complete rule.
pub fn parse_ruleset(text: &str) -> Result<Vec<Rule>, RulesetError> {
    let mut rules = Vec::new();
    let mut seen: BTreeMap<u32, usize> = BTreeMap::new();
    for (idx, line) in text.lines().enumerate() {
        let lineno = idx + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let rule = parse_rule(trimmed).map_err(|source| RulesetError::Rule {
            line: lineno,
            source,
        })?;
        if let Some(&first) = seen.get(&rule.sid) {
            return Err(RulesetError::DuplicateSid {
                sid: rule.sid,
                first,
                second: lineno,
            });
        }
        seen.insert(rule.sid, lineno);
        rules.push(rule);
    }
    Ok(rules)
}

struct Parser<'a> {
    src: &'a str,
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn new(src: &'a str) -> Self {
        let src = src.trim();
        Parser {
            src,
            bytes: src.as_bytes(),
            pos: 0,
        }
    }

    fn peek(&self) -> Option<u8> {
        self.bytes.get(self.pos).copied()
    }

    fn skip_ws(&mut self) {
        while matches!(self.peek(), Some(b) if b.is_ascii_whitespace()) {
            self.pos += 1;
        }
    }

    fn word(&mut self, expected: &'static str) -> Result<(usize, &'a str), ParseError> {
        self.skip_ws();
        let start = self.pos;
        while matches!(self.peek(), Some(b) if !b.is_ascii_whitespace() && b != b'(') {
            self.pos += 1;
        }
        if self.pos == start {
            return Err(ParseError::Expected {
                offset: start,
                expected,
            });
        }
        Ok((start, &self.src[start..self.pos]))
    }

    /// One header field. Bracketed lists may contain whitespace, so `[80, 443]`
    /// is a single field.
    fn header_field(&mut self) -> Result<String, ParseError> {
        self.skip_ws();
        let start = self.pos;
        let mut depth = 0usize;
        while let Some(b) = self.peek() {
            match b {
                b'[' => depth += 1,
                b']' => {
                    if depth == 0 {
                        break;
                    }
                    depth -= 1;
                }
                b'(' if depth == 0 => break,
                b if b.is_ascii_whitespace() && depth == 0 => break,
                _ => {}
            }
            self.pos += 1;
        }
        if depth != 0 {
            return Err(ParseError::Expected {
                offset: start,
                expected: "closing `]`",
            });
        }
        if self.pos == start {
            return Err(ParseError::Expected {
                offset: start,
                expected: "header field",
            });
        }
        Ok(self.src[start..self.pos].to_string())
    }

    fn rule(&mut self) -> Result<Rule, ParseError> {
        let (off, word) = self.word("rule action")?;
        let action: RuleAction = word.parse().map_err(|()| ParseError::UnknownAction {
            offset: off,
            word: word.to_string(),
        })?;
        let (off, word) = self.word("protocol")?;
        let protocol: Protocol = word.parse().map_err(|()| ParseError::UnknownProtocol {
            offset: off,
            word: word.to_string(),
        })?;
        let src_addr = self.header_field()?;
        let src_port = self.header_field()?;
        let (off, word) = self.word("direction `->` or `<>`")?;
        let direction = match word {
            "->" => Direction::ToDest,
            "<>" => Direction::Bidirectional,
            _ => {
                return Err(ParseError::Expected {
                    offset: off,
                    expected: "direction `->` or `<>`",
                })
            }
        };
        let dst_addr = self.header_field()?;
        let dst_port = self.header_field()?;

        self.skip_ws();
        if self.peek() != Some(b'(') {
            return Err(ParseError::Expected {
                offset: self.pos,
                expected: "`(`",
            });
        }
        self.pos += 1;
        let options = self.body()?;

        let (sid, rev) = extract_sid_rev(&options)?;
        Ok(Rule {
            header: RuleHeader {
                action,
                protocol,
                src_addr,
                src_port,
                direction,
                dst_addr,
                dst_port,
            },
            options,
            sid,
            rev,
            raw_text: self.src.to_string(),
        })
    }

    fn body(&mut self) -> Result<Vec<RuleOption>, ParseError> {
        let mut options: Vec<RuleOption> = Vec::new();
        loop {
            self.skip_ws();
            match self.peek() {
                None => {
                    return Err(ParseError::UnterminatedBody { offset: self.pos });
                }
                Some(b')') => {
                    self.pos += 1;
                    break;
                }
                Some(_) => self.option(&mut options)?,
            }
        }
        for (i, opt) in options.iter_mut().enumerate() {
            opt.position = i;
        }
        Ok(options)
    }

    fn option(&mut self, options: &mut Vec<RuleOption>) -> Result<(), ParseError> {
        self.skip_ws();
        let kw_off = self.pos;
        let keyword = self.ident()?;
        self.skip_ws();
        let value = match self.peek() {
            Some(b';') => OptionValue::None,
            Some(b':') => {
                self.pos += 1;
                self.skip_ws();
                if keyword == "content" {
                    let (pattern, modifiers) = self.pattern_value()?;
                    self.expect_semicolon()?;
                    options.push(RuleOption {
                        keyword,
                        value: OptionValue::Pattern(pattern),
                        modifiers,
                        position: 0,
                    });
                    return Ok(());
                }
                OptionValue::Text(self.text_value()?)
            }
            _ => {
                return Err(ParseError::Expected {
                    offset: self.pos,
                    expected: "`:` or `;`",
                })
            }
        };
        self.expect_semicolon()?;

        // Standalone modifier spelling: bind to the last content option.
        if BINDABLE_MODIFIERS.contains(&keyword.as_str()) {
            let target = options
                .iter_mut()
                .rev()
                .find(|o| matches!(o.value, OptionValue::Pattern(_)))
                .ok_or(ParseError::DanglingModifier {
                    offset: kw_off,
                    keyword: keyword.clone(),
                })?;
            target.modifiers.push(Modifier {
                keyword,
                value: match value {
                    OptionValue::None => None,
                    OptionValue::Text(t) => Some(t),
                    OptionValue::Pattern(_) => unreachable!(),
                },
            });
            return Ok(());
        }

        options.push(RuleOption {
            keyword,
            value,
            modifiers: Vec::new(),
            position: 0,
        });
        Ok(())
    }

    fn ident(&mut self) -> Result<String, ParseError> {
        let start = self.pos;
        while matches!(self.peek(), Some(b) if b.is_ascii_alphanumeric() || b == b'_' || b == b'.')
        {
            self.pos += 1;
        }
        if self.pos == start {
            return Err(ParseError::Expected {
                offset: start,
                expected: "option keyword",
            });
        }
        Ok(self.src[start..self.pos].to_string())
    }

    fn expect_semicolon(&mut self) -> Result<(), ParseError> {
        self.skip_ws();
        if self.peek() != Some(b';') {
            return Err(ParseError::Expected {
                offset: self.pos,
                expected: "`;`",
            });
        }
        self.pos += 1;
        Ok(())
    }

    /// Raw option value up to the terminating `;`. Quoted sections may contain
    /// `;` and escaped quotes; the text is preserved verbatim.
    fn text_value(&mut self) -> Result<String, ParseError> {
        let start = self.pos;
        let mut in_quotes = false;
        loop {
            match self.peek() {
                None => {
                    return if in_quotes {
                        Err(ParseError::UnterminatedString { offset: start })
                    } else {
                        Err(ParseError::UnterminatedBody { offset: self.pos })
                    }
                }
                Some(b'"') => {
                    in_quotes = !in_quotes;
                    self.pos += 1;
                }
                Some(b'\\') if in_quotes => {
                    self.pos += 2;
                }
                Some(b';') if !in_quotes => break,
                Some(b')') if !in_quotes => {
                    return Err(ParseError::Expected {
                        offset: self.pos,
                        expected: "`;`",
                    })
                }
                Some(_) => self.pos += 1,
            }
        }
        Ok(self.src[start..self.pos].trim_end().to_string())
    }

    /// `[!]"..."` with hex blocks and escapes decoded, followed by optional
    /// comma-separated modifiers.
    fn pattern_value(&mut self) -> Result<(ContentPattern, Vec<Modifier>), ParseError> {
        let negated = if self.peek() == Some(b'!') {
            self.pos += 1;
            self.skip_ws();
            true
        } else {
            false
        };
        if self.peek() != Some(b'"') {
            return Err(ParseError::Expected {
                offset: self.pos,
                expected: "`\"`",
            });
        }
        let bytes = self.quoted_bytes()?;
        let mut modifiers = Vec::new();
        loop {
            self.skip_ws();
            if self.peek() != Some(b',') {
                break;
            }
            self.pos += 1;
            self.skip_ws();
            let keyword = self.ident()?;
            let vstart = self.pos;
            while !matches!(self.peek(), None | Some(b',') | Some(b';')) {
                self.pos += 1;
            }
            let raw = self.src[vstart..self.pos].trim();
            modifiers.push(Modifier {
                keyword,
                value: if raw.is_empty() {
                    None
                } else {
                    Some(raw.to_string())
                },
            });
        }
        Ok((ContentPattern { bytes, negated }, modifiers))
    }

    fn quoted_bytes(&mut self) -> Result<Vec<u8>, ParseError> {
        let open = self.pos;
        self.pos += 1;
        let mut out = Vec::new();
        let mut in_hex = false;
        loop {
            let Some(b) = self.peek() else {
                return Err(ParseError::UnterminatedString { offset: open });
            };
            if in_hex {
                match b {
                    b'|' => {
                        in_hex = false;
                        self.pos += 1;
                    }
                    b' ' | b'\t' => self.pos += 1,
                    _ if b.is_ascii_hexdigit() => {
                        let hi = b;
                        self.pos += 1;
                        let lo = self.peek().filter(u8::is_ascii_hexdigit).ok_or_else(|| {
                            ParseError::BadHex {
                                offset: self.pos,
                                reason: "odd number of hex digits".to_string(),
                            }
                        })?;
                        self.pos += 1;
                        out.push(hex_pair(hi, lo));
                    }
                    b'"' => {
                        return Err(ParseError::BadHex {
                            offset: self.pos,
                            reason: "unterminated hex block".to_string(),
                        })
                    }
                    _ => {
                        return Err(ParseError::BadHex {
                            offset: self.pos,
                            reason: format!("invalid character `{}`", b as char),
                        })
                    }
                }
            } else {
                match b {
                    b'"' => {
                        self.pos += 1;
                        return Ok(out);
                    }
                    b'|' => {
                        in_hex = true;
                        self.pos += 1;
                    }
                    b'\\' => {
                        self.pos += 1;
                        let Some(e) = self.peek() else {
                            return Err(ParseError::UnterminatedString { offset: open });
                        };
                        match e {
                            b'"' | b'\\' | b';' | b':' | b'|' | b',' => {
                                out.push(e);
                                self.pos += 1;
                            }
                            _ => {
                                return Err(ParseError::BadEscape {
                                    offset: self.pos,
                                    found: e as char,
                                })
                            }
                        }
                    }
                    _ => {
                        out.push(b);
                        self.pos += 1;
                    }
                }
            }
        }
    }
}

fn hex_pair(hi: u8, lo: u8) -> u8 {
    let d = |c: u8| match c {
        b'0'..=b'9' => c - b'0',
        b'a'..=b'f' => c - b'a' + 10,
        b'A'..=b'F' => c - b'A' + 10,
        _ => unreachable!(),
    };
    (d(hi) << 4) | d(lo)
}

fn extract_sid_rev(options: &[RuleOption]) -> Result<(u32, u32), ParseError> {
    let mut sid = None;
    let mut rev = None;
    for opt in options {
        let slot = match opt.keyword.as_str() {
            "sid" => &mut sid,
            "rev" => &mut rev,
            _ => continue,
        };
        if slot.is_some() {
            return Err(ParseError::BadOption {
                offset: 0,
                keyword: opt.keyword.clone(),
                reason: "appears more than once".to_string(),
            });
        }
        let text = opt.value.as_text().unwrap_or("");
        let n: u32 = text.trim().parse().map_err(|_| ParseError::BadOption {
            offset: 0,
            keyword: opt.keyword.clone(),
            reason: format!("`{text}` is not a positive integer"),
        })?;
        if n == 0 {
            return Err(ParseError::BadOption {
                offset: 0,
                keyword: opt.keyword.clone(),
                reason: "must be positive".to_string(),
            });
        }
        *slot = Some(n);
    }
    let sid = sid.ok_or(ParseError::MissingSid)?;
    Ok((sid, rev.unwrap_or(1)))
}
