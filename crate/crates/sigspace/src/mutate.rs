//! The removal function over rules: apply masks, enumerate k-removals, count
//! the full modification space, and build per-keyword evaluation rulesets.
//!
//! Masks always name positions in the base rule, never in a derived rule, so
//! removals compose without re-indexing bookkeeping.

use std::collections::{BTreeMap, BTreeSet};

use num_bigint::BigUint;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rule::{removable_options, serialize_rule, RemovablePolicy, Rule};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RemovalMask {
    pub sid: u32,
    pub removed_positions: BTreeSet<usize>,
}

impl RemovalMask {
    pub fn new(sid: u32, positions: impl IntoIterator<Item = usize>) -> Self {
        RemovalMask {
            sid,
            removed_positions: positions.into_iter().collect(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RuleVariant {
    pub mask: RemovalMask,
    pub derived: Rule,
    pub variant_id: String,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MutationError {
    #[error("mask sid {mask} does not match rule sid {rule}")]
    SidMismatch { mask: u32, rule: u32 },
    #[error("sid {sid}: mask is empty")]
    EmptyMask { sid: u32 },
    #[error("sid {sid}: position {position} is not removable")]
    PolicyViolation { sid: u32, position: usize },
    #[error("sid {sid}: removing every removable option renders the rule trivial")]
    TrivialRule { sid: u32 },
    #[error("mask references unknown sid {sid}")]
    UnknownSid { sid: u32 },
}

pub fn variant_id(sid: u32, positions: &BTreeSet<usize>) -> String {
    if positions.is_empty() {
        return sid.to_string();
    }
    let parts: Vec<String> = positions.iter().map(|p| p.to_string()).collect();
    format!("{}:{}", sid, parts.join(","))
}

/// Base rule minus the masked positions; option order kept, surviving options
/// re-indexed contiguously so the result is a well-formed Rule on its own.
fn derive_rule(base: &Rule, removed: &BTreeSet<usize>) -> Rule {
    let mut derived = base.clone();
    derived.options = base
        .options
        .iter()
        .filter(|o| !removed.contains(&o.position))
        .cloned()
        .collect();
    for (i, opt) in derived.options.iter_mut().enumerate() {
        opt.position = i;
    }
    derived.raw_text = serialize_rule(&derived);
    derived
}

pub fn apply_mask(
    rule: &Rule,
    mask: &RemovalMask,
    policy: &RemovablePolicy,
) -> Result<RuleVariant, MutationError> {
    if mask.sid != rule.sid {
        return Err(MutationError::SidMismatch {
            mask: mask.sid,
            rule: rule.sid,
        });
    }
    if mask.removed_positions.is_empty() {
        return Err(MutationError::EmptyMask { sid: rule.sid });
    }
    let removable: BTreeSet<usize> = removable_options(rule, policy).into_iter().collect();
    for &p in &mask.removed_positions {
        if !removable.contains(&p) {
            return Err(MutationError::PolicyViolation {
                sid: rule.sid,
                position: p,
            });
        }
    }
    if mask.removed_positions.len() == removable.len() {
        return Err(MutationError::TrivialRule { sid: rule.sid });
    }
    Ok(RuleVariant {
        variant_id: variant_id(rule.sid, &mask.removed_positions),
        derived: derive_rule(rule, &mask.removed_positions),
        mask: mask.clone(),
    })
}

/// All k-subsets of the removable positions, minus the full set. Infeasible k
/// (k >= n, or n < 2) yields an empty list. Order is ascending by variant_id.
pub fn enumerate_removals(
    rule: &Rule,
    k: usize,
    policy: &RemovablePolicy,
) -> Vec<RuleVariant> {
    let removable = removable_options(rule, policy);
    let n = removable.len();
    if k == 0 || k >= n {
        return Vec::new();
    }
    let mut variants = Vec::new();
    let mut indices: Vec<usize> = (0..k).collect();
    loop {
        let positions: BTreeSet<usize> = indices.iter().map(|&i| removable[i]).collect();
        let mask = RemovalMask::new(rule.sid, positions);
        variants.push(apply_mask(rule, &mask, policy).expect("in-policy mask"));
        // next k-combination in lexicographic index order
        let mut i = k;
        loop {
            if i == 0 {
                variants.sort_by(|a, b| a.variant_id.cmp(&b.variant_id));
                return variants;
            }
            i -= 1;
            if indices[i] != i + n - k {
                break;
            }
        }
        indices[i] += 1;
        for j in i + 1..k {
            indices[j] = indices[j - 1] + 1;
        }
    }
}

/// Exact size of the whole removal space: sum of 2^n - 2 over rules, where n
/// counts removable options and rules with n <= 1 contribute nothing.
pub fn count_removal_space(rules: &[Rule], policy: &RemovablePolicy) -> BigUint {
    let mut total = BigUint::ZERO;
    for rule in rules {
        let n = removable_options(rule, policy).len();
        if n >= 2 {
            total += (BigUint::from(1u8) << n) - 2u8;
        }
    }
    total
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContentScope {
    #[default]
    All,
    MultiContentOnly,
}

/// One rule of an evaluation ruleset: a base rule plus the cumulative set of
/// removed base positions (empty for an untouched original).
#[derive(Debug, Clone)]
pub struct RulesetEntry {
    pub base: Rule,
    pub removed: BTreeSet<usize>,
    pub derived: Rule,
    pub variant_id: String,
}

impl RulesetEntry {
    fn original(rule: &Rule) -> Self {
        RulesetEntry {
            variant_id: rule.sid.to_string(),
            removed: BTreeSet::new(),
            derived: rule.clone(),
            base: rule.clone(),
        }
    }

    fn with_removed(base: &Rule, removed: BTreeSet<usize>) -> Self {
        RulesetEntry {
            variant_id: variant_id(base.sid, &removed),
            derived: derive_rule(base, &removed),
            removed,
            base: base.clone(),
        }
    }

    pub fn is_original(&self) -> bool {
        self.removed.is_empty()
    }

    pub fn removed_keywords(&self) -> Vec<String> {
        self.removed
            .iter()
            .map(|&p| self.base.options[p].keyword.clone())
            .collect()
    }
}

#[derive(Debug, Clone, Default)]
pub struct VariantRuleset {
    entries: Vec<RulesetEntry>,
}

impl VariantRuleset {
    pub fn originals(rules: &[Rule]) -> Self {
        let mut entries: Vec<RulesetEntry> = rules.iter().map(RulesetEntry::original).collect();
        sort_entries(&mut entries);
        VariantRuleset { entries }
    }

    pub fn entries(&self) -> &[RulesetEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Derived rules as Snort rule text, one per line, in canonical order.
    pub fn serialize_rules(&self) -> String {
        let mut out = String::new();
        for e in &self.entries {
            out.push_str(&serialize_rule(&e.derived));
            out.push('\n');
        }
        out
    }

    pub fn manifest(&self, config: &str, steps: &[String]) -> VariantManifest {
        VariantManifest {
            config: config.to_string(),
            steps: steps.to_vec(),
            variants: self
                .entries
                .iter()
                .filter(|e| !e.is_original())
                .map(|e| VariantManifestEntry {
                    variant_id: e.variant_id.clone(),
                    sid: e.base.sid,
                    positions: e.removed.iter().copied().collect(),
                    removed_keywords: e.removed_keywords(),
                })
                .collect(),
        }
    }
}

fn sort_entries(entries: &mut Vec<RulesetEntry>) {
    entries.sort_by(|a, b| {
        (a.base.sid, &a.variant_id).cmp(&(b.base.sid, &b.variant_id))
    });
    entries.dedup_by(|a, b| a.variant_id == b.variant_id);
}

/// Sidecar description of a variant ruleset: which positions were removed from
/// which rules. Doubles as a mask file for re-running the same ruleset.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VariantManifest {
    pub config: String,
    pub steps: Vec<String>,
    pub variants: Vec<VariantManifestEntry>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VariantManifestEntry {
    pub variant_id: String,
    pub sid: u32,
    pub positions: Vec<usize>,
    #[serde(default)]
    pub removed_keywords: Vec<String>,
}

/// The per-keyword evaluation ruleset: every rule containing `keyword` (in
/// scope) is replaced by one variant per occurrence with that single occurrence
/// removed; everything else passes through unmodified.
///
/// An occurrence whose removal would strip the last removable option is
/// skipped, mirroring the removal function being empty on single-option rules.
pub fn select_by_option(
    rules: &[Rule],
    keyword: &str,
    policy: &RemovablePolicy,
    scope: ContentScope,
) -> VariantRuleset {
    select_by_option_over(&VariantRuleset::originals(rules), keyword, policy, scope, false)
}

/// Same selection applied on top of an existing variant ruleset, composing the
/// new removal with each entry's mask. With `touched_only`, untouched originals
/// are left alone and only already-modified entries are extended.
pub fn select_by_option_over(
    ruleset: &VariantRuleset,
    keyword: &str,
    policy: &RemovablePolicy,
    scope: ContentScope,
    touched_only: bool,
) -> VariantRuleset {
    let mut out: Vec<RulesetEntry> = Vec::new();
    for entry in ruleset.entries() {
        if touched_only && entry.is_original() {
            out.push(entry.clone());
            continue;
        }
        if keyword == "content"
            && scope == ContentScope::MultiContentOnly
            && !entry.derived.is_multi_content()
        {
            out.push(entry.clone());
            continue;
        }
        let removable: BTreeSet<usize> =
            removable_options(&entry.base, policy).into_iter().collect();
        let occurrences: Vec<usize> = entry
            .base
            .options
            .iter()
            .filter(|o| o.keyword == keyword)
            .map(|o| o.position)
            .filter(|p| !entry.removed.contains(p))
            .filter(|p| removable.contains(p))
            .filter(|_| entry.removed.len() + 1 < removable.len())
            .collect();
        if occurrences.is_empty() {
            out.push(entry.clone());
            continue;
        }
        for p in occurrences {
            let mut removed = entry.removed.clone();
            removed.insert(p);
            out.push(RulesetEntry::with_removed(&entry.base, removed));
        }
    }
    sort_entries(&mut out);
    VariantRuleset { entries: out }
}

/// Builds an evaluation ruleset from explicit masks. Sids not mentioned pass
/// through as originals; a sid with masks is replaced by exactly the listed
/// entries (an empty position list keeps that rule's original alongside).
pub fn apply_mask_set(
    rules: &[Rule],
    masks: &[RemovalMask],
    policy: &RemovablePolicy,
) -> Result<VariantRuleset, MutationError> {
    let by_sid: BTreeMap<u32, &Rule> = rules.iter().map(|r| (r.sid, r)).collect();
    let mut masked_sids: BTreeSet<u32> = BTreeSet::new();
    let mut entries: Vec<RulesetEntry> = Vec::new();
    for mask in masks {
        let rule = by_sid
            .get(&mask.sid)
            .ok_or(MutationError::UnknownSid { sid: mask.sid })?;
        masked_sids.insert(mask.sid);
        if mask.removed_positions.is_empty() {
            entries.push(RulesetEntry::original(rule));
        } else {
            apply_mask(rule, mask, policy)?;
            entries.push(RulesetEntry::with_removed(
                rule,
                mask.removed_positions.clone(),
            ));
        }
    }
    for rule in rules {
        if !masked_sids.contains(&rule.sid) {
            entries.push(RulesetEntry::original(rule));
        }
    }
    sort_entries(&mut entries);
    Ok(VariantRuleset { entries })
}
