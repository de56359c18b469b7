//! Iterative removal exploration.
//!
//! One iteration evaluates a set of removal configurations, merges the new
//! ROC points into the evaluated pool, and recomputes the hull frontier.
//! Iteration 0 is the untouched ruleset, iteration 1 covers every single
//! keyword removal, and later iterations extend only configurations sitting
//! on the current frontier by one more step each.

mod hull;

pub use hull::{
    effective, is_anchor, pareto_staircase, roc_hull, ALLOW_ALL_LABEL, BLOCK_ALL_LABEL,
};

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metrics::{frontier_area, ConfusionCounts, MetricsError, RocPoint};
use crate::mutate::{select_by_option_over, ContentScope, VariantRuleset};
use crate::rule::{removable_options, RemovablePolicy, Rule};
use crate::traffic::{LabeledIpSpace, PacketRecord};

/// One removal applied ruleset-wide: a keyword plus the content scope
/// restriction (only meaningful for `content`).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RemovalStep {
    pub keyword: String,
    #[serde(default)]
    pub scope: ContentScope,
}

impl RemovalStep {
    pub fn all(keyword: &str) -> RemovalStep {
        RemovalStep {
            keyword: keyword.to_string(),
            scope: ContentScope::All,
        }
    }

    pub fn multi_content() -> RemovalStep {
        RemovalStep {
            keyword: "content".to_string(),
            scope: ContentScope::MultiContentOnly,
        }
    }

    pub fn label(&self) -> String {
        match self.scope {
            ContentScope::All => self.keyword.clone(),
            ContentScope::MultiContentOnly => format!("{}.multi", self.keyword),
        }
    }
}

/// A multiset of removal steps. Steps are kept sorted, so the id (and the
/// resulting ruleset, since steps are applied in sorted order) is independent
/// of the order the steps were added in.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct RemovalConfig {
    steps: Vec<RemovalStep>,
}

pub const ORIGINAL_CONFIG_ID: &str = "original";

impl RemovalConfig {
    pub fn original() -> RemovalConfig {
        RemovalConfig::default()
    }

    pub fn single(step: RemovalStep) -> RemovalConfig {
        RemovalConfig { steps: vec![step] }
    }

    pub fn from_steps(mut steps: Vec<RemovalStep>) -> RemovalConfig {
        steps.sort();
        RemovalConfig { steps }
    }

    pub fn extended(&self, step: RemovalStep) -> RemovalConfig {
        let mut steps = self.steps.clone();
        steps.push(step);
        steps.sort();
        RemovalConfig { steps }
    }

    pub fn steps(&self) -> &[RemovalStep] {
        &self.steps
    }

    pub fn is_original(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn id(&self) -> String {
        if self.steps.is_empty() {
            return ORIGINAL_CONFIG_ID.to_string();
        }
        let labels: Vec<String> = self.steps.iter().map(RemovalStep::label).collect();
        format!("rm-{}", labels.join("+"))
    }

    /// Materializes the variant ruleset this configuration describes. With
    /// `TouchedOnly`, steps after the first only extend rules the earlier
    /// steps already touched.
    pub fn build_ruleset(
        &self,
        rules: &[Rule],
        policy: &RemovablePolicy,
        extend: ExtendScope,
    ) -> VariantRuleset {
        let mut ruleset = VariantRuleset::originals(rules);
        for (i, step) in self.steps.iter().enumerate() {
            let touched_only = i > 0 && extend == ExtendScope::TouchedOnly;
            ruleset =
                select_by_option_over(&ruleset, &step.keyword, policy, step.scope, touched_only);
        }
        ruleset
    }
}

/// Whether later steps of a multi-step configuration may touch rules the
/// earlier steps left alone.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExtendScope {
    #[default]
    AllRules,
    TouchedOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluatedConfig {
    pub config: RemovalConfig,
    pub point: RocPoint,
    pub counts: ConfusionCounts,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("evaluating `{config_id}`: {reason}")]
pub struct EvalFailure {
    pub config_id: String,
    pub reason: String,
}

/// Turns one configuration's ruleset into a ROC point. Injected so the loop
/// can be driven by the real engine, a cache, or a test stub; batches within
/// an iteration are independent and implementations may run them in parallel.
pub trait ConfigEvaluator {
    fn evaluate(
        &self,
        config: &RemovalConfig,
        ruleset: &VariantRuleset,
        traffic: &[PacketRecord],
        labels: &LabeledIpSpace,
    ) -> Result<EvaluatedConfig, EvalFailure>;

    fn evaluate_batch(
        &self,
        jobs: &[(RemovalConfig, VariantRuleset)],
        traffic: &[PacketRecord],
        labels: &LabeledIpSpace,
    ) -> Vec<Result<EvaluatedConfig, EvalFailure>> {
        jobs.iter()
            .map(|(c, rs)| self.evaluate(c, rs, traffic, labels))
            .collect()
    }
}

/// The default evaluator: run the ruleset, count confusion over source IPs.
pub struct EngineEvaluator {
    pub engine: crate::engine::EngineConfig,
}

impl EngineEvaluator {
    pub fn new(engine: crate::engine::EngineConfig) -> EngineEvaluator {
        EngineEvaluator { engine }
    }
}

impl ConfigEvaluator for EngineEvaluator {
    fn evaluate(
        &self,
        config: &RemovalConfig,
        ruleset: &VariantRuleset,
        traffic: &[PacketRecord],
        labels: &LabeledIpSpace,
    ) -> Result<EvaluatedConfig, EvalFailure> {
        let fail = |reason: String| EvalFailure {
            config_id: config.id(),
            reason,
        };
        let out = crate::engine::run_ruleset(ruleset, traffic, &self.engine);
        let counts =
            crate::metrics::confusion(&out.flagged, labels).map_err(|e| fail(e.to_string()))?;
        let mut point = crate::metrics::roc_point(&counts).map_err(|e| fail(e.to_string()))?;
        point.variant_label = config.id();
        Ok(EvaluatedConfig {
            config: config.clone(),
            point,
            counts,
        })
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ExplorationState {
    /// Number of completed iterations; equals `area_history.len()`.
    pub iteration: usize,
    /// Every configuration evaluated so far, keyed by configuration id.
    pub evaluated: BTreeMap<String, EvaluatedConfig>,
    /// Current hull frontier over all evaluated points.
    pub frontier: Vec<RocPoint>,
    pub area_history: Vec<f64>,
    /// Configurations whose effective point is a non-anchor frontier vertex.
    pub frontier_configs: Vec<RemovalConfig>,
    /// Frontier snapshot after each iteration.
    pub iteration_frontiers: Vec<Vec<RocPoint>>,
    /// Hull of all per-iteration frontiers together.
    pub union_frontier: Vec<RocPoint>,
}

impl ExplorationState {
    pub fn new() -> ExplorationState {
        ExplorationState::default()
    }

    pub fn latest_area(&self) -> Option<f64> {
        self.area_history.last().copied()
    }

    pub fn latest_gain(&self) -> Option<f64> {
        match self.area_history.as_slice() {
            [.., a, b] => Some(b - a),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExploreConfig {
    /// Stop once an iteration grows the frontier area by no more than this.
    pub epsilon: f64,
    /// Removal iterations beyond the original evaluation.
    pub max_iterations: usize,
    pub policy: RemovablePolicy,
    pub extend_scope: ExtendScope,
}

impl Default for ExploreConfig {
    fn default() -> ExploreConfig {
        ExploreConfig {
            epsilon: 1e-4,
            max_iterations: 4,
            policy: RemovablePolicy::default(),
            extend_scope: ExtendScope::default(),
        }
    }
}

#[derive(Debug, Error)]
pub enum ExploreError {
    #[error(transparent)]
    Evaluator(#[from] EvalFailure),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

/// Every distinct removable keyword across the ruleset as an all-scope step,
/// plus the multi-content-only step when `content` is removable anywhere.
pub fn candidate_steps(rules: &[Rule], policy: &RemovablePolicy) -> Vec<RemovalStep> {
    let mut keywords: BTreeSet<String> = BTreeSet::new();
    for rule in rules {
        for pos in removable_options(rule, policy) {
            keywords.insert(rule.options[pos].keyword.clone());
        }
    }
    let mut steps: Vec<RemovalStep> = keywords.iter().map(|k| RemovalStep::all(k)).collect();
    if keywords.contains("content") {
        steps.push(RemovalStep::multi_content());
    }
    steps.sort();
    steps
}

fn configs_for_iteration(
    state: &ExplorationState,
    rules: &[Rule],
    policy: &RemovablePolicy,
) -> Vec<RemovalConfig> {
    let mut pending: BTreeMap<String, RemovalConfig> = BTreeMap::new();
    match state.iteration {
        0 => {
            pending.insert(ORIGINAL_CONFIG_ID.to_string(), RemovalConfig::original());
        }
        1 => {
            for step in candidate_steps(rules, policy) {
                let c = RemovalConfig::single(step);
                pending.insert(c.id(), c);
            }
        }
        _ => {
            let steps = candidate_steps(rules, policy);
            for base in &state.frontier_configs {
                for step in &steps {
                    let ext = base.extended(step.clone());
                    pending.insert(ext.id(), ext);
                }
            }
        }
    }
    pending.retain(|id, _| !state.evaluated.contains_key(id));
    pending.into_values().collect()
}

fn recompute_frontier(state: &mut ExplorationState) -> Result<(), MetricsError> {
    let points: Vec<RocPoint> = state.evaluated.values().map(|e| e.point.clone()).collect();
    state.frontier = roc_hull(&points);
    let area = frontier_area(&state.frontier)?;
    state.area_history.push(area);
    state.iteration_frontiers.push(state.frontier.clone());
    let union_points: Vec<RocPoint> = state.iteration_frontiers.concat();
    state.union_frontier = roc_hull(&union_points);
    state.frontier_configs = state
        .evaluated
        .values()
        .filter(|e| {
            let eff = effective(&e.point);
            !is_anchor(&eff)
                && state
                    .frontier
                    .iter()
                    .any(|f| f.fpr == eff.fpr && f.tpr == eff.tpr)
        })
        .map(|e| e.config.clone())
        .collect();
    Ok(())
}

/// Runs one iteration: pick the configurations this iteration owes, evaluate
/// the missing ones, fold the results in, and recompute frontier and area.
pub fn explore_iteration(
    mut state: ExplorationState,
    rules: &[Rule],
    traffic: &[PacketRecord],
    labels: &LabeledIpSpace,
    config: &ExploreConfig,
    evaluator: &dyn ConfigEvaluator,
) -> Result<ExplorationState, ExploreError> {
    let jobs: Vec<(RemovalConfig, VariantRuleset)> =
        configs_for_iteration(&state, rules, &config.policy)
            .into_iter()
            .map(|c| {
                let rs = c.build_ruleset(rules, &config.policy, config.extend_scope);
                (c, rs)
            })
            .collect();
    for result in evaluator.evaluate_batch(&jobs, traffic, labels) {
        let evaluated = result?;
        state.evaluated.insert(evaluated.config.id(), evaluated);
    }
    recompute_frontier(&mut state)?;
    state.iteration += 1;
    Ok(state)
}

/// The full loop: original evaluation, then removal iterations until the
/// area gain drops to `epsilon` or `max_iterations` is exhausted.
pub fn explore(
    rules: &[Rule],
    traffic: &[PacketRecord],
    labels: &LabeledIpSpace,
    config: &ExploreConfig,
    evaluator: &dyn ConfigEvaluator,
) -> Result<ExplorationState, ExploreError> {
    let mut state = ExplorationState::new();
    state = explore_iteration(state, rules, traffic, labels, config, evaluator)?;
    for _ in 0..config.max_iterations {
        state = explore_iteration(state, rules, traffic, labels, config, evaluator)?;
        if state.latest_gain().unwrap_or(0.0) <= config.epsilon {
            break;
        }
    }
    Ok(state)
}
