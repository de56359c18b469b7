//! Snort 3 rule model: AST, parser, serializer, and removal policy.

mod ast;
mod parse;
mod policy;
mod serialize;

pub use ast::{
    ContentPattern, Direction, Modifier, OptionValue, Protocol, Rule, RuleAction, RuleHeader,
    RuleOption,
};
pub use parse::{parse_rule, parse_ruleset, ParseError, RulesetError};
pub use policy::{removable_options, RemovablePolicy, GENERAL_OPTIONS};
pub use serialize::{serialize_rule, serialize_ruleset};

/// True iff the rule has two or more `content` options.
pub fn is_multi_content(rule: &Rule) -> bool {
    rule.is_multi_content()
}
