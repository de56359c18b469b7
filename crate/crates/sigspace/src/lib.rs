//! Snort 3 rule mutation and ROC performance-space exploration.
//!
//! The crate parses Snort 3 rules, derives option-removal variants, runs
//! variant rulesets against captured traffic with a built-in matcher, labels
//! source IPs from a blocklist, and iteratively explores the resulting ROC
//! space: convex-hull frontiers, classifier inversion, f1 tables, and
//! θ-weighted minimum-cost curves.
//!
//! Modules follow the processing order: [`rule`] (text ↔ AST), [`mutate`]
//! (removal masks and variant rulesets), [`traffic`] (packets, blocklist,
//! labels), [`engine`] (matching), [`metrics`] (confusion-derived numbers),
//! [`explore`] (the iteration loop), [`pipeline`] (orchestration used by the
//! CLI).

pub mod engine;
pub mod explore;
pub mod metrics;
pub mod mutate;
pub mod pipeline;
pub mod rule;
pub mod traffic;

pub use engine::{eval_rule, run_ruleset};
pub use explore::{explore, explore_iteration, roc_hull};
pub use metrics::{confusion, frontier_area, invert, macro_f1, min_cost_curve, roc_point};
pub use mutate::{apply_mask, count_removal_space, enumerate_removals, select_by_option};
pub use rule::{parse_rule, parse_ruleset, removable_options, serialize_rule};
pub use traffic::{label_ips, load_blocklist, load_traffic};
