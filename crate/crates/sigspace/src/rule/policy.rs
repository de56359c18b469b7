//! Which options may be removed from a rule. The default exclusion set is the
//! Snort "general" option family, whose removal changes nothing about what a
//! rule matches.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::ast::{OptionValue, Rule, RuleOption};

/// Keywords that never take part in matching.
pub const GENERAL_OPTIONS: [&str; 8] = [
    "msg",
    "sid",
    "rev",
    "gid",
    "reference",
    "classtype",
    "metadata",
    "priority",
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "PolicyRepr")]
pub struct RemovablePolicy {
    excluded_keywords: BTreeSet<String>,
    dependency_check: bool,
}

#[derive(Deserialize)]
struct PolicyRepr {
    #[serde(default)]
    excluded_keywords: Option<BTreeSet<String>>,
    #[serde(default = "default_true")]
    dependency_check: bool,
}

fn default_true() -> bool {
    true
}

impl From<PolicyRepr> for RemovablePolicy {
    fn from(repr: PolicyRepr) -> Self {
        match repr.excluded_keywords {
            Some(set) => RemovablePolicy::new(set, repr.dependency_check),
            None => RemovablePolicy {
                dependency_check: repr.dependency_check,
                ..RemovablePolicy::default()
            },
        }
    }
}

impl Default for RemovablePolicy {
    fn default() -> Self {
        RemovablePolicy {
            excluded_keywords: GENERAL_OPTIONS.iter().map(|s| s.to_string()).collect(),
            dependency_check: true,
        }
    }
}

impl RemovablePolicy {
    /// sid and rev are forced into the exclusion set regardless of the caller's
    /// list; removing either produces a rule that cannot be identified.
    pub fn new(excluded: impl IntoIterator<Item = String>, dependency_check: bool) -> Self {
        let mut excluded_keywords: BTreeSet<String> = excluded.into_iter().collect();
        excluded_keywords.insert("sid".to_string());
        excluded_keywords.insert("rev".to_string());
        RemovablePolicy {
            excluded_keywords,
            dependency_check,
        }
    }

    pub fn excluded_keywords(&self) -> &BTreeSet<String> {
        &self.excluded_keywords
    }

    pub fn dependency_check(&self) -> bool {
        self.dependency_check
    }

    pub fn is_excluded(&self, keyword: &str) -> bool {
        self.excluded_keywords.contains(keyword)
    }
}

/// Positions of options that may be removed under `policy`, ascending.
///
/// With dependency checking on, an option that defines a variable (byte_extract,
/// byte_math) stays non-removable while any later option's value mentions the
/// variable name.
pub fn removable_options(rule: &Rule, policy: &RemovablePolicy) -> Vec<usize> {
    rule.options
        .iter()
        .enumerate()
        .filter(|(i, opt)| {
            if policy.is_excluded(&opt.keyword) {
                return false;
            }
            if policy.dependency_check() {
                if let Some(var) = defined_variable(opt) {
                    if rule.options[i + 1..].iter().any(|o| references(o, &var)) {
                        return false;
                    }
                }
            }
            true
        })
        .map(|(i, _)| i)
        .collect()
}

fn defined_variable(opt: &RuleOption) -> Option<String> {
    let text = opt.value.as_text()?;
    let fields: Vec<&str> = text.split(',').map(str::trim).collect();
    match opt.keyword.as_str() {
        // byte_extract:<count>,<offset>,<name>[,...]
        "byte_extract" => fields.get(2).map(|s| s.to_string()),
        // byte_math names its output as `result <name>`
        "byte_math" => fields.iter().find_map(|f| {
            f.strip_prefix("result")
                .map(|rest| rest.trim().to_string())
                .filter(|s| !s.is_empty())
        }),
        _ => None,
    }
    .filter(|name| !name.is_empty())
}

fn references(opt: &RuleOption, var: &str) -> bool {
    let mentions = |text: &str| {
        text.split(|c: char| !(c.is_ascii_alphanumeric() || c == '_'))
            .any(|tok| tok == var)
    };
    match &opt.value {
        OptionValue::Text(t) if mentions(t) => return true,
        _ => {}
    }
    opt.modifiers
        .iter()
        .any(|m| m.value.as_deref().is_some_and(mentions))
}
