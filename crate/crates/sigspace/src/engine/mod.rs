//! Rule-against-traffic evaluation.
//!
//! A [`VariantRuleset`] is compiled once against an [`OptionRegistry`]; the
//! compiled form is then run over a packet stream. Options are conjunctive
//! and evaluated in rule order with short-circuiting, so earlier contents
//! anchor later relative ones.

mod header;
mod options;

pub use header::CompiledHeader;
pub use options::{
    ActiveBuffer, Compiled, CompiledCheck, DetectionFilterSpec, EvalCursor, OptionEvaluator,
    OptionRegistry, Unevaluable,
};

use std::collections::{BTreeSet, HashMap, VecDeque};
use std::net::Ipv4Addr;

use serde::{Deserialize, Serialize};

use crate::mutate::VariantRuleset;
use crate::rule::Rule;
use crate::traffic::PacketRecord;

/// What to do with an option no strategy can evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UnevaluablePolicy {
    /// Treat the option as always-true and keep the rule.
    #[default]
    Permissive,
    /// Drop the whole rule and report it.
    Strict,
}

impl UnevaluablePolicy {
    pub fn is_strict(self) -> bool {
        matches!(self, UnevaluablePolicy::Strict)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct EngineConfig {
    #[serde(default)]
    pub unevaluable: UnevaluablePolicy,
}

impl EngineConfig {
    pub fn strict() -> EngineConfig {
        EngineConfig {
            unevaluable: UnevaluablePolicy::Strict,
        }
    }
}

/// A rule excluded from a strict-mode run, with the option keywords and
/// reasons that disqualified it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DroppedRule {
    pub variant_id: String,
    pub sid: u32,
    pub reasons: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlertRecord {
    pub variant_id: String,
    pub sid: u32,
    pub src_ip: Ipv4Addr,
    pub timestamp: f64,
}

pub struct CompiledRule {
    pub variant_id: String,
    pub sid: u32,
    header: CompiledHeader,
    checks: Vec<Box<dyn CompiledCheck>>,
    filter: Option<DetectionFilterSpec>,
    /// Options skipped under the permissive policy, as `keyword: reason`.
    pub skipped: Vec<String>,
}

/// Sliding-window state for detection filters, keyed by compiled-rule index
/// and source address. Scoped to a single run; never reuse across rulesets.
#[derive(Debug, Default)]
pub struct MatchContext {
    filter_state: HashMap<(usize, Ipv4Addr), VecDeque<f64>>,
}

impl MatchContext {
    pub fn new() -> MatchContext {
        MatchContext::default()
    }

    pub fn is_empty(&self) -> bool {
        self.filter_state.is_empty()
    }

    pub fn tracked_sources(&self) -> usize {
        self.filter_state.len()
    }

    /// Records a full body match and decides whether the filter fires.
    /// The trailing window is inclusive: a hit exactly `seconds` after the
    /// oldest retained hit still counts it.
    fn filter_hit(&mut self, rule: usize, src: Ipv4Addr, ts: f64, spec: &DetectionFilterSpec) -> bool {
        let q = self.filter_state.entry((rule, src)).or_default();
        q.push_back(ts);
        while let Some(&front) = q.front() {
            if ts - front > spec.seconds {
                q.pop_front();
            } else {
                break;
            }
        }
        q.len() as u64 >= spec.count as u64
    }
}

impl CompiledRule {
    pub fn compile(
        rule: &Rule,
        variant_id: &str,
        registry: &OptionRegistry,
        cfg: &EngineConfig,
    ) -> Result<CompiledRule, Vec<String>> {
        let mut checks: Vec<Box<dyn CompiledCheck>> = Vec::new();
        let mut filter = None;
        let mut skipped = Vec::new();
        for opt in &rule.options {
            match registry.get(&opt.keyword) {
                None => skipped.push(format!("{}: no evaluator", opt.keyword)),
                Some(ev) => match ev.compile(opt, cfg) {
                    Ok(Compiled::Check(c)) => checks.push(c),
                    Ok(Compiled::Noop) => {}
                    Ok(Compiled::Filter(f)) => filter = Some(f),
                    Err(u) => skipped.push(format!("{}: {}", opt.keyword, u.reason)),
                },
            }
        }
        if cfg.unevaluable.is_strict() && !skipped.is_empty() {
            return Err(skipped);
        }
        Ok(CompiledRule {
            variant_id: variant_id.to_string(),
            sid: rule.sid,
            header: CompiledHeader::compile(&rule.header),
            checks,
            filter,
            skipped,
        })
    }

    /// `rule_index` keys detection-filter state inside `ctx`; callers must
    /// use a stable index per rule for the lifetime of the context.
    pub fn eval(&self, rule_index: usize, pkt: &PacketRecord, ctx: &mut MatchContext) -> bool {
        if !self.header.matches(pkt) {
            return false;
        }
        let mut cur = EvalCursor::new();
        for check in &self.checks {
            if !check.eval(pkt, &mut cur) {
                return false;
            }
        }
        match &self.filter {
            None => true,
            Some(spec) => ctx.filter_hit(rule_index, pkt.src_ip, pkt.ts, spec),
        }
    }
}

pub struct CompiledRuleset {
    pub rules: Vec<CompiledRule>,
    pub dropped: Vec<DroppedRule>,
}

impl CompiledRuleset {
    pub fn compile(
        ruleset: &VariantRuleset,
        registry: &OptionRegistry,
        cfg: &EngineConfig,
    ) -> CompiledRuleset {
        let mut rules = Vec::new();
        let mut dropped = Vec::new();
        for entry in ruleset.entries() {
            match CompiledRule::compile(&entry.derived, &entry.variant_id, registry, cfg) {
                Ok(r) => rules.push(r),
                Err(reasons) => dropped.push(DroppedRule {
                    variant_id: entry.variant_id.clone(),
                    sid: entry.base.sid,
                    reasons,
                }),
            }
        }
        CompiledRuleset { rules, dropped }
    }

    /// Runs every packet through every rule in order. Alerts come out sorted
    /// by timestamp then variant id, which together with the sequential
    /// packet scan makes the output independent of caller-side parallelism.
    pub fn run(&self, traffic: &[PacketRecord]) -> RunOutput {
        let mut ctx = MatchContext::new();
        let mut flagged = BTreeSet::new();
        let mut alerts = Vec::new();
        for pkt in traffic {
            for (idx, rule) in self.rules.iter().enumerate() {
                if rule.eval(idx, pkt, &mut ctx) {
                    flagged.insert(pkt.src_ip);
                    alerts.push(AlertRecord {
                        variant_id: rule.variant_id.clone(),
                        sid: rule.sid,
                        src_ip: pkt.src_ip,
                        timestamp: pkt.ts,
                    });
                }
            }
        }
        alerts.sort_by(|a, b| {
            a.timestamp
                .total_cmp(&b.timestamp)
                .then_with(|| a.variant_id.cmp(&b.variant_id))
        });
        RunOutput {
            flagged,
            alerts,
            dropped: self.dropped.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOutput {
    /// Source addresses with at least one alert.
    pub flagged: BTreeSet<Ipv4Addr>,
    pub alerts: Vec<AlertRecord>,
    pub dropped: Vec<DroppedRule>,
}

/// Compiles and runs in one step with the standard registry.
pub fn run_ruleset(ruleset: &VariantRuleset, traffic: &[PacketRecord], cfg: &EngineConfig) -> RunOutput {
    CompiledRuleset::compile(ruleset, &OptionRegistry::standard(), cfg).run(traffic)
}

/// One-rule convenience: compiles with the standard registry under the
/// permissive policy and evaluates a single packet. The context must be
/// dedicated to this rule; detection-filter state lives in slot 0.
pub fn eval_rule(rule: &Rule, pkt: &PacketRecord, ctx: &mut MatchContext) -> bool {
    let compiled = CompiledRule::compile(rule, "", &OptionRegistry::standard(), &EngineConfig::default())
        .expect("permissive compile cannot fail");
    compiled.eval(0, pkt, ctx)
}
