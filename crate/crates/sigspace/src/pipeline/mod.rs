//! Pipeline orchestration shared by the CLI subcommands.
//!
//! Everything here is deterministic by construction: inputs are hashed,
//! evaluation results are keyed by those hashes, artifact files are written
//! by a single thread in sorted order, and the only run-dependent values
//! (timings, cache statistics, worker count) live in the manifest's
//! `execution` section.

mod cache;
mod report;

pub use cache::{CacheEntry, DiskCache};
pub use report::{cmd_report, write_explore_artifacts, ReportSummary};

use std::collections::{BTreeMap, BTreeSet};
use std::net::Ipv4Addr;
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::engine::{run_ruleset, EngineConfig, UnevaluablePolicy};
use crate::explore::{
    explore, ConfigEvaluator, EvalFailure, EvaluatedConfig, ExplorationState, ExploreConfig,
    ExploreError, ExtendScope, RemovalConfig, RemovalStep,
};
use crate::metrics::{
    confusion, macro_f1, prf1, roc_point, ConfusionCounts, MetricsError, PositiveClass, RocPoint,
};
use crate::mutate::{
    apply_mask_set, count_removal_space, ContentScope, MutationError, RemovalMask, VariantManifest,
    VariantRuleset,
};
use crate::rule::{
    parse_ruleset, removable_options, RemovablePolicy, Rule, RulesetError,
};
use crate::traffic::{
    label_ips, load_blocklist, load_traffic, Blocklist, BlocklistError, LabelPolicy,
    LabeledIpSpace, PacketRecord, TrafficError,
};

pub const CACHE_DIR_ENV: &str = "SIGSPACE_CACHE_DIR";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("reading {path}: {source}")]
    Input {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Rules(#[from] RulesetError),
    #[error(transparent)]
    Traffic(#[from] TrafficError),
    #[error(transparent)]
    Blocklist(#[from] BlocklistError),
    #[error("descriptor: {0}")]
    Descriptor(String),
    #[error(transparent)]
    Mutation(#[from] MutationError),
    #[error(transparent)]
    Eval(#[from] EvalFailure),
    #[error(transparent)]
    Explore(#[from] ExploreError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("writing {path}: {source}")]
    Output {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("verification: {0}")]
    Verify(String),
}

impl PipelineError {
    /// 1 for input-side problems, 2 for evaluation/output-side ones.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Input { .. }
            | PipelineError::Config(_)
            | PipelineError::Rules(_)
            | PipelineError::Traffic(_)
            | PipelineError::Blocklist(_)
            | PipelineError::Descriptor(_)
            | PipelineError::Mutation(_) => 1,
            PipelineError::Eval(_)
            | PipelineError::Explore(_)
            | PipelineError::Metrics(_)
            | PipelineError::Output { .. }
            | PipelineError::Verify(_) => 2,
        }
    }
}

fn default_epsilon() -> f64 {
    1e-4
}

fn default_max_iterations() -> usize {
    4
}

fn default_workers() -> usize {
    1
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub rules_path: PathBuf,
    pub traffic_path: PathBuf,
    pub blocklist_path: PathBuf,
    #[serde(default)]
    pub policy: RemovablePolicy,
    #[serde(default)]
    pub label_policy: LabelPolicy,
    #[serde(default)]
    pub unevaluable: UnevaluablePolicy,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default = "default_max_iterations")]
    pub max_iterations: usize,
    #[serde(default)]
    pub extend_scope: ExtendScope,
    #[serde(default)]
    pub cache_dir: Option<PathBuf>,
    pub output_dir: PathBuf,
    #[serde(default = "default_workers")]
    pub workers: usize,
}

impl PipelineConfig {
    pub fn from_json(text: &str) -> Result<PipelineConfig, PipelineError> {
        serde_json::from_str(text).map_err(|e| PipelineError::Config(e.to_string()))
    }

    pub fn from_json_file(path: &Path) -> Result<PipelineConfig, PipelineError> {
        let text = std::fs::read_to_string(path).map_err(|source| PipelineError::Input {
            path: path.to_path_buf(),
            source,
        })?;
        PipelineConfig::from_json(&text)
    }

    pub fn engine(&self) -> EngineConfig {
        EngineConfig {
            unevaluable: self.unevaluable,
        }
    }

    pub fn explore_config(&self) -> ExploreConfig {
        ExploreConfig {
            epsilon: self.epsilon,
            max_iterations: self.max_iterations,
            policy: self.policy.clone(),
            extend_scope: self.extend_scope,
        }
    }

    /// Everything that affects results; used verbatim as the manifest's
    /// `settings` section, so paths and worker counts stay out.
    pub fn settings(&self) -> SettingsSnapshot {
        SettingsSnapshot {
            policy: self.policy.clone(),
            label_policy: self.label_policy,
            unevaluable: self.unevaluable,
            epsilon: self.epsilon,
            max_iterations: self.max_iterations,
            extend_scope: self.extend_scope,
        }
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        if self.workers == 0 {
            return Err(PipelineError::Config("workers must be at least 1".into()));
        }
        if !(self.epsilon >= 0.0) {
            return Err(PipelineError::Config("epsilon must be nonnegative".into()));
        }
        if self.max_iterations == 0 {
            return Err(PipelineError::Config(
                "max_iterations must be at least 1".into(),
            ));
        }
        for (name, path) in [
            ("rules_path", &self.rules_path),
            ("traffic_path", &self.traffic_path),
            ("blocklist_path", &self.blocklist_path),
        ] {
            if !path.is_file() {
                return Err(PipelineError::Config(format!(
                    "{name} `{}` is not a readable file",
                    path.display()
                )));
            }
        }
        Ok(())
    }
}

/// Cache directory precedence: CLI flag, then the environment override,
/// then the config field, then `<output_dir>/cache`.
pub fn resolve_cache_dir(cli: Option<PathBuf>, cfg: &PipelineConfig) -> PathBuf {
    cli.or_else(|| std::env::var_os(CACHE_DIR_ENV).map(PathBuf::from))
        .or_else(|| cfg.cache_dir.clone())
        .unwrap_or_else(|| cfg.output_dir.join("cache"))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SettingsSnapshot {
    pub policy: RemovablePolicy,
    pub label_policy: LabelPolicy,
    pub unevaluable: UnevaluablePolicy,
    pub epsilon: f64,
    pub max_iterations: usize,
    pub extend_scope: ExtendScope,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputHashes {
    pub rules_sha256: String,
    pub traffic_sha256: String,
    pub blocklist_sha256: String,
}

/// Run-dependent facts only; excluded when comparing manifests for
/// reproducibility.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExecutionInfo {
    pub workers: usize,
    pub cache_dir: String,
    pub output_dir: String,
    pub elapsed_ms: u128,
    pub cache_hits: u64,
    pub cache_misses: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub inputs: InputHashes,
    pub settings: SettingsSnapshot,
    pub results: serde_json::Value,
    pub execution: ExecutionInfo,
}

pub struct LoadedInputs {
    pub rules: Vec<Rule>,
    pub traffic: Vec<PacketRecord>,
    pub blocklist: Blocklist,
    pub labels: LabeledIpSpace,
    pub hashes: InputHashes,
}

fn sha256_file(path: &Path) -> Result<String, PipelineError> {
    let bytes = std::fs::read(path).map_err(|source| PipelineError::Input {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

pub fn load_inputs(cfg: &PipelineConfig) -> Result<LoadedInputs, PipelineError> {
    let rules_text =
        std::fs::read_to_string(&cfg.rules_path).map_err(|source| PipelineError::Input {
            path: cfg.rules_path.clone(),
            source,
        })?;
    let rules = parse_ruleset(&rules_text)?;
    let traffic = load_traffic(&cfg.traffic_path)?;
    let blocklist = load_blocklist(&cfg.blocklist_path)?;
    let observed: BTreeSet<Ipv4Addr> = traffic.iter().map(|p| p.src_ip).collect();
    let labels = label_ips(&observed, &blocklist, cfg.label_policy);
    let hashes = InputHashes {
        rules_sha256: hex::encode(Sha256::digest(rules_text.as_bytes())),
        traffic_sha256: sha256_file(&cfg.traffic_path)?,
        blocklist_sha256: sha256_file(&cfg.blocklist_path)?,
    };
    Ok(LoadedInputs {
        rules,
        traffic,
        blocklist,
        labels,
        hashes,
    })
}

// ---- metrics rows ----

/// One f1-table row. Numbers are the raw (uninverted) metrics; `inverted`
/// records whether the frontier uses this point's inversion instead.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub variant_label: String,
    pub tpr: f64,
    pub fpr: f64,
    pub precision_mal: f64,
    pub recall_mal: f64,
    pub f1_mal: f64,
    pub f1_ben: f64,
    pub f1_macro: f64,
    pub inverted: bool,
}

pub fn metrics_row(label: &str, counts: &ConfusionCounts) -> Result<MetricsRow, MetricsError> {
    let point = roc_point(counts)?;
    let mal = prf1(counts, PositiveClass::Malicious);
    let ben = prf1(counts, PositiveClass::Benign);
    Ok(MetricsRow {
        variant_label: label.to_string(),
        tpr: point.tpr,
        fpr: point.fpr,
        precision_mal: mal.precision,
        recall_mal: mal.recall,
        f1_mal: mal.f1,
        f1_ben: ben.f1,
        f1_macro: macro_f1(mal.f1, ben.f1),
        inverted: point.fpr > point.tpr,
    })
}

// ---- the caching evaluator ----

/// Everything cmd_run/cmd_explore keep per evaluated configuration for the
/// artifact writers.
pub struct ConfigArtifacts {
    pub ruleset_text: String,
    pub variants: VariantManifest,
    pub result: CacheEntry,
    pub cache_hit: bool,
}

pub struct PipelineEvaluator<'a> {
    engine: EngineConfig,
    cache: &'a DiskCache,
    traffic_sha256: &'a str,
    pool: Option<rayon::ThreadPool>,
    collected: Mutex<BTreeMap<String, ConfigArtifacts>>,
}

impl<'a> PipelineEvaluator<'a> {
    pub fn new(
        engine: EngineConfig,
        cache: &'a DiskCache,
        traffic_sha256: &'a str,
        workers: usize,
    ) -> Result<PipelineEvaluator<'a>, PipelineError> {
        let pool = if workers > 1 {
            let p = rayon::ThreadPoolBuilder::new()
                .num_threads(workers)
                .build()
                .map_err(|e| PipelineError::Config(format!("worker pool: {e}")))?;
            Some(p)
        } else {
            None
        };
        Ok(PipelineEvaluator {
            engine,
            cache,
            traffic_sha256,
            pool,
            collected: Mutex::new(BTreeMap::new()),
        })
    }

    /// Cache-or-run for one ruleset under an explicit id; the id names the
    /// artifact files, nothing more.
    pub fn evaluate_with_id(
        &self,
        id: &str,
        step_labels: &[String],
        ruleset: &VariantRuleset,
        traffic: &[PacketRecord],
        labels: &LabeledIpSpace,
    ) -> Result<(RocPoint, ConfusionCounts), EvalFailure> {
        let fail = |reason: String| EvalFailure {
            config_id: id.to_string(),
            reason,
        };
        let text = ruleset.serialize_rules();
        let key = DiskCache::key(&text, self.traffic_sha256, &self.engine);
        let (result, cache_hit) = match self.cache.get(&key) {
            Some(entry) => (entry, true),
            None => {
                let entry = CacheEntry::from(run_ruleset(ruleset, traffic, &self.engine));
                self.cache
                    .put(&key, &entry)
                    .map_err(|e| fail(format!("cache write: {e}")))?;
                (entry, false)
            }
        };
        let counts = confusion(&result.flagged, labels).map_err(|e| fail(e.to_string()))?;
        let mut point = roc_point(&counts).map_err(|e| fail(e.to_string()))?;
        point.variant_label = id.to_string();
        let variants = ruleset.manifest(id, step_labels);
        self.collected.lock().unwrap().insert(
            id.to_string(),
            ConfigArtifacts {
                ruleset_text: text,
                variants,
                result,
                cache_hit,
            },
        );
        Ok((point, counts))
    }

    pub fn into_artifacts(self) -> BTreeMap<String, ConfigArtifacts> {
        self.collected.into_inner().unwrap()
    }
}

impl ConfigEvaluator for PipelineEvaluator<'_> {
    fn evaluate(
        &self,
        config: &RemovalConfig,
        ruleset: &VariantRuleset,
        traffic: &[PacketRecord],
        labels: &LabeledIpSpace,
    ) -> Result<EvaluatedConfig, EvalFailure> {
        let id = config.id();
        let step_labels: Vec<String> = config.steps().iter().map(RemovalStep::label).collect();
        let (point, counts) = self.evaluate_with_id(&id, &step_labels, ruleset, traffic, labels)?;
        Ok(EvaluatedConfig {
            config: config.clone(),
            point,
            counts,
        })
    }

    fn evaluate_batch(
        &self,
        jobs: &[(RemovalConfig, VariantRuleset)],
        traffic: &[PacketRecord],
        labels: &LabeledIpSpace,
    ) -> Vec<Result<EvaluatedConfig, EvalFailure>> {
        match &self.pool {
            None => jobs
                .iter()
                .map(|(c, rs)| self.evaluate(c, rs, traffic, labels))
                .collect(),
            Some(pool) => pool.install(|| {
                jobs.par_iter()
                    .map(|(c, rs)| self.evaluate(c, rs, traffic, labels))
                    .collect()
            }),
        }
    }
}

// ---- cmd_parse ----

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParseReport {
    pub rule_count: usize,
    pub multi_content_count: usize,
    pub multi_content_ratio: f64,
    pub option_instances: BTreeMap<String, usize>,
    pub removable_histogram: BTreeMap<usize, usize>,
    /// Total variant count as a decimal string; it outgrows u64 fast.
    pub removal_space: String,
    pub action_counts: BTreeMap<String, usize>,
    pub protocol_counts: BTreeMap<String, usize>,
    pub direction_counts: BTreeMap<String, usize>,
}

pub fn cmd_parse(rules_path: &Path, policy: &RemovablePolicy) -> Result<ParseReport, PipelineError> {
    let text = std::fs::read_to_string(rules_path).map_err(|source| PipelineError::Input {
        path: rules_path.to_path_buf(),
        source,
    })?;
    let rules = parse_ruleset(&text)?;
    let mut option_instances: BTreeMap<String, usize> = BTreeMap::new();
    let mut removable_histogram: BTreeMap<usize, usize> = BTreeMap::new();
    let mut action_counts: BTreeMap<String, usize> = BTreeMap::new();
    let mut protocol_counts: BTreeMap<String, usize> = BTreeMap::new();
    let mut direction_counts: BTreeMap<String, usize> = BTreeMap::new();
    let mut multi = 0usize;
    for rule in &rules {
        for opt in &rule.options {
            *option_instances.entry(opt.keyword.clone()).or_default() += 1;
        }
        *removable_histogram
            .entry(removable_options(rule, policy).len())
            .or_default() += 1;
        *action_counts
            .entry(rule.header.action.to_string())
            .or_default() += 1;
        *protocol_counts
            .entry(rule.header.protocol.to_string())
            .or_default() += 1;
        *direction_counts
            .entry(rule.header.direction.to_string())
            .or_default() += 1;
        if rule.is_multi_content() {
            multi += 1;
        }
    }
    let ratio = if rules.is_empty() {
        0.0
    } else {
        multi as f64 / rules.len() as f64
    };
    Ok(ParseReport {
        rule_count: rules.len(),
        multi_content_count: multi,
        multi_content_ratio: ratio,
        option_instances,
        removable_histogram,
        removal_space: count_removal_space(&rules, policy).to_string(),
        action_counts,
        protocol_counts,
        direction_counts,
    })
}

// ---- cmd_run ----

/// What to evaluate: the untouched rules, one keyword removal (optionally
/// restricted to multi-content rules), or an explicit mask file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RunDescriptor {
    Original,
    Keyword { keyword: String, scope: ContentScope },
    MaskFile(PathBuf),
}

impl RunDescriptor {
    /// `original`, a keyword like `flow`, `content.multi`, or a path to a
    /// mask JSON file (recognized by a path separator or `.json` suffix).
    pub fn parse(text: &str) -> Result<RunDescriptor, PipelineError> {
        if text.is_empty() {
            return Err(PipelineError::Descriptor("empty descriptor".into()));
        }
        if text == "original" {
            return Ok(RunDescriptor::Original);
        }
        if text.contains('/') || text.contains(std::path::MAIN_SEPARATOR) || text.ends_with(".json")
        {
            return Ok(RunDescriptor::MaskFile(PathBuf::from(text)));
        }
        if let Some(kw) = text.strip_suffix(".multi") {
            if kw != "content" {
                return Err(PipelineError::Descriptor(format!(
                    "`.multi` scope only applies to `content`, got `{text}`"
                )));
            }
            return Ok(RunDescriptor::Keyword {
                keyword: kw.to_string(),
                scope: ContentScope::MultiContentOnly,
            });
        }
        if !text
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '.')
        {
            return Err(PipelineError::Descriptor(format!(
                "`{text}` is neither a keyword nor a mask file path"
            )));
        }
        Ok(RunDescriptor::Keyword {
            keyword: text.to_string(),
            scope: ContentScope::All,
        })
    }

    fn sanitized_stem(path: &Path) -> String {
        let stem = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "mask".to_string());
        let cleaned: String = stem
            .chars()
            .map(|c| {
                if c.is_ascii_alphanumeric() || c == '.' || c == '_' || c == '-' {
                    c
                } else {
                    '-'
                }
            })
            .collect();
        format!("mask-{cleaned}")
    }

    /// Builds the ruleset plus the id and step labels used for artifacts.
    pub fn materialize(
        &self,
        rules: &[Rule],
        policy: &RemovablePolicy,
    ) -> Result<(String, Vec<String>, VariantRuleset), PipelineError> {
        match self {
            RunDescriptor::Original => {
                let config = RemovalConfig::original();
                Ok((
                    config.id(),
                    vec![],
                    VariantRuleset::originals(rules),
                ))
            }
            RunDescriptor::Keyword { keyword, scope } => {
                let step = RemovalStep {
                    keyword: keyword.clone(),
                    scope: *scope,
                };
                let config = RemovalConfig::single(step.clone());
                let ruleset = config.build_ruleset(rules, policy, ExtendScope::AllRules);
                Ok((config.id(), vec![step.label()], ruleset))
            }
            RunDescriptor::MaskFile(path) => {
                let text =
                    std::fs::read_to_string(path).map_err(|source| PipelineError::Input {
                        path: path.clone(),
                        source,
                    })?;
                let manifest: VariantManifest = serde_json::from_str(&text).map_err(|e| {
                    PipelineError::Descriptor(format!("mask file {}: {e}", path.display()))
                })?;
                let masks: Vec<RemovalMask> = manifest
                    .variants
                    .iter()
                    .map(|v| RemovalMask::new(v.sid, v.positions.iter().copied()))
                    .collect();
                let ruleset = apply_mask_set(rules, &masks, policy)?;
                Ok((Self::sanitized_stem(path), manifest.steps.clone(), ruleset))
            }
        }
    }
}

#[derive(Debug)]
pub struct RunSummary {
    pub config_id: String,
    pub row: MetricsRow,
    pub cache_hit: bool,
    pub output_dir: PathBuf,
}

pub fn cmd_run(
    cfg: &PipelineConfig,
    descriptor: &RunDescriptor,
    cache_dir_override: Option<PathBuf>,
) -> Result<RunSummary, PipelineError> {
    cfg.validate()?;
    let started = Instant::now();
    let inputs = load_inputs(cfg)?;
    let (id, step_labels, ruleset) = descriptor.materialize(&inputs.rules, &cfg.policy)?;
    let cache_dir = resolve_cache_dir(cache_dir_override, cfg);
    let cache = DiskCache::open(&cache_dir).map_err(|source| PipelineError::Output {
        path: cache_dir.clone(),
        source,
    })?;
    let evaluator = PipelineEvaluator::new(cfg.engine(), &cache, &inputs.hashes.traffic_sha256, 1)?;
    let (point, counts) =
        evaluator.evaluate_with_id(&id, &step_labels, &ruleset, &inputs.traffic, &inputs.labels)?;
    let row = metrics_row(&id, &counts)?;
    let artifacts = evaluator.into_artifacts();
    let art = &artifacts[&id];
    report::write_run_artifacts(cfg, &inputs, &id, art, &row, &point, &cache, &cache_dir, started)?;
    Ok(RunSummary {
        config_id: id.clone(),
        row,
        cache_hit: art.cache_hit,
        output_dir: cfg.output_dir.clone(),
    })
}

// ---- cmd_explore ----

#[derive(Debug)]
pub struct ExploreSummary {
    pub state: ExplorationState,
    pub output_dir: PathBuf,
}

pub fn cmd_explore(
    cfg: &PipelineConfig,
    cache_dir_override: Option<PathBuf>,
) -> Result<ExploreSummary, PipelineError> {
    cfg.validate()?;
    let started = Instant::now();
    let inputs = load_inputs(cfg)?;
    let cache_dir = resolve_cache_dir(cache_dir_override, cfg);
    let cache = DiskCache::open(&cache_dir).map_err(|source| PipelineError::Output {
        path: cache_dir.clone(),
        source,
    })?;
    let evaluator = PipelineEvaluator::new(
        cfg.engine(),
        &cache,
        &inputs.hashes.traffic_sha256,
        cfg.workers,
    )?;
    let state = explore(
        &inputs.rules,
        &inputs.traffic,
        &inputs.labels,
        &cfg.explore_config(),
        &evaluator,
    )?;
    let artifacts = evaluator.into_artifacts();
    write_explore_artifacts(cfg, &inputs, &state, &artifacts, &cache, &cache_dir, started)?;
    Ok(ExploreSummary {
        state,
        output_dir: cfg.output_dir.clone(),
    })
}
