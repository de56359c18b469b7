//! Canonical rule text emission. The output always re-parses to an AST equal
//! to the input (raw_text aside); escaping and modifier spelling are
//! canonicalized, so serialize(parse(t)) need not equal t byte for byte.

use std::fmt::Write;

use super::ast::{OptionValue, Rule, RuleOption};

pub fn serialize_rule(rule: &Rule) -> String {
    let h = &rule.header;
    let mut out = format!(
        "{} {} {} {} {} {} {} (",
        h.action, h.protocol, h.src_addr, h.src_port, h.direction, h.dst_addr, h.dst_port
    );
    for opt in &rule.options {
        out.push(' ');
        write_option(&mut out, opt);
    }
    out.push_str(" )");
    out
}

pub fn serialize_ruleset<'a>(rules: impl IntoIterator<Item = &'a Rule>) -> String {
    let mut out = String::new();
    for rule in rules {
        out.push_str(&serialize_rule(rule));
        out.push('\n');
    }
    out
}

fn write_option(out: &mut String, opt: &RuleOption) {
    out.push_str(&opt.keyword);
    match &opt.value {
        OptionValue::None => {}
        OptionValue::Text(t) => {
            out.push(':');
            out.push_str(t);
        }
        OptionValue::Pattern(p) => {
            out.push(':');
            if p.negated {
                out.push('!');
            }
            out.push('"');
            write_pattern_bytes(out, &p.bytes);
            out.push('"');
        }
    }
    for m in &opt.modifiers {
        out.push(',');
        out.push_str(&m.keyword);
        if let Some(v) = &m.value {
            out.push(' ');
            out.push_str(v);
        }
    }
    out.push(';');
}

/// Printable ASCII is emitted directly (escaping the characters the grammar
/// reserves); everything else goes into `|xx xx|` hex blocks, adjacent
/// non-printable bytes sharing one block.
fn write_pattern_bytes(out: &mut String, bytes: &[u8]) {
    let mut in_hex = false;
    for &b in bytes {
        let printable = (0x20..=0x7e).contains(&b) && !matches!(b, b'"' | b'\\' | b';' | b'|');
        if printable {
            if in_hex {
                // trailing space before `|` closes the block uniformly
                out.pop();
                out.push('|');
                in_hex = false;
            }
            out.push(b as char);
        } else if matches!(b, b'"' | b'\\' | b';' | b'|') {
            if in_hex {
                out.pop();
                out.push('|');
                in_hex = false;
            }
            out.push('\\');
            out.push(b as char);
        } else {
            if !in_hex {
                out.push('|');
                in_hex = true;
            }
            let _ = write!(out, "{b:02X} ");
        }
    }
    if in_hex {
        out.pop();
        out.push('|');
    }
}
