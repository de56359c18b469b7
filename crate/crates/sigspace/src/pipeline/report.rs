//! Artifact emission and report regeneration.
//!
//! All files are written by the calling thread in sorted order. Floats go
//! through Rust's shortest round-trip formatting in CSVs and through
//! serde_json in JSON documents; both are stable across runs and platforms,
//! which is what the byte-identical-artifacts contract rests on.

use std::collections::{BTreeMap, BTreeSet};
use std::net::Ipv4Addr;
use std::path::Path;
use std::time::Instant;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::explore::{EvaluatedConfig, ExplorationState};
use crate::metrics::{
    confusion, frontier_area, min_cost_curve, uniform_thetas, CostCurve, RocPoint,
    DEFAULT_THETA_SAMPLES,
};
use crate::traffic::{label_ips, load_blocklist, load_traffic};

use super::{
    metrics_row, CacheEntry, ConfigArtifacts, DiskCache, ExecutionInfo, InputHashes, LoadedInputs,
    MetricsRow, PipelineConfig, PipelineError, RunManifest, TOOL_VERSION,
};

fn ensure_dir(path: &Path) -> Result<(), PipelineError> {
    std::fs::create_dir_all(path).map_err(|source| PipelineError::Output {
        path: path.to_path_buf(),
        source,
    })
}

fn write_text(path: &Path, contents: &str) -> Result<(), PipelineError> {
    std::fs::write(path, contents).map_err(|source| PipelineError::Output {
        path: path.to_path_buf(),
        source,
    })
}

fn write_json_pretty<T: Serialize>(path: &Path, value: &T) -> Result<(), PipelineError> {
    let mut text = serde_json::to_string_pretty(value).expect("artifact serializes");
    text.push('\n');
    write_text(path, &text)
}

fn fnum(v: f64) -> String {
    format!("{v}")
}

fn csv_document(header: &[&str], rows: Vec<Vec<String>>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory csv");
    for row in rows {
        w.write_record(&row).expect("in-memory csv");
    }
    String::from_utf8(w.into_inner().expect("in-memory csv")).expect("csv is utf-8")
}

fn result_digest(result: &CacheEntry) -> String {
    let json = serde_json::to_string(result).expect("cache entry serializes");
    hex::encode(Sha256::digest(json.as_bytes()))
}

fn alerts_csv(result: &CacheEntry) -> String {
    csv_document(
        &["variant_id", "sid", "src_ip", "timestamp"],
        result
            .alerts
            .iter()
            .map(|a| {
                vec![
                    a.variant_id.clone(),
                    a.sid.to_string(),
                    a.src_ip.to_string(),
                    fnum(a.timestamp),
                ]
            })
            .collect(),
    )
}

fn curve_csv(points: &[RocPoint]) -> String {
    csv_document(
        &["fpr", "tpr"],
        points
            .iter()
            .map(|p| vec![fnum(p.fpr), fnum(p.tpr)])
            .collect(),
    )
}

fn points_csv(evaluated: &BTreeMap<String, EvaluatedConfig>) -> String {
    csv_document(
        &["variant_label", "fpr", "tpr", "inverted"],
        evaluated
            .values()
            .map(|e| {
                vec![
                    e.point.variant_label.clone(),
                    fnum(e.point.fpr),
                    fnum(e.point.tpr),
                    (e.point.fpr > e.point.tpr).to_string(),
                ]
            })
            .collect(),
    )
}

fn area_history_csv(areas: &[f64]) -> String {
    csv_document(
        &["iteration", "area"],
        areas
            .iter()
            .enumerate()
            .map(|(i, a)| vec![i.to_string(), fnum(*a)])
            .collect(),
    )
}

fn min_cost_csv(curve: &CostCurve) -> String {
    csv_document(
        &["theta", "min_cost", "argmin_label"],
        curve
            .samples
            .iter()
            .map(|s| vec![fnum(s.theta), fnum(s.min_cost), s.argmin_label.clone()])
            .collect(),
    )
}

const F1_HEADER: [&str; 9] = [
    "variant_label",
    "tpr",
    "fpr",
    "precision_mal",
    "recall_mal",
    "f1_mal",
    "f1_ben",
    "f1_macro",
    "inverted",
];

fn f1_row(row: &MetricsRow) -> Vec<String> {
    vec![
        row.variant_label.clone(),
        fnum(row.tpr),
        fnum(row.fpr),
        fnum(row.precision_mal),
        fnum(row.recall_mal),
        fnum(row.f1_mal),
        fnum(row.f1_ben),
        fnum(row.f1_macro),
        row.inverted.to_string(),
    ]
}

fn f1_table_csv(evaluated: &BTreeMap<String, EvaluatedConfig>) -> Result<String, PipelineError> {
    let mut rows = Vec::new();
    for (id, e) in evaluated {
        rows.push(f1_row(&metrics_row(id, &e.counts)?));
    }
    Ok(csv_document(&F1_HEADER, rows))
}

#[derive(Debug, Serialize, serde::Deserialize)]
struct FrontierDoc {
    area: f64,
    points: Vec<RocPoint>,
}

fn write_config_files(
    out: &Path,
    id: &str,
    art: &ConfigArtifacts,
) -> Result<(), PipelineError> {
    write_text(&out.join("rulesets").join(format!("{id}.rules")), &art.ruleset_text)?;
    write_json_pretty(&out.join("variants").join(format!("{id}.json")), &art.variants)?;
    write_text(&out.join("alerts").join(format!("{id}.csv")), &alerts_csv(&art.result))
}

fn execution_info(
    cfg: &PipelineConfig,
    cache: &DiskCache,
    cache_dir: &Path,
    started: Instant,
) -> ExecutionInfo {
    ExecutionInfo {
        workers: cfg.workers,
        cache_dir: cache_dir.display().to_string(),
        output_dir: cfg.output_dir.display().to_string(),
        elapsed_ms: started.elapsed().as_millis(),
        cache_hits: cache.hits(),
        cache_misses: cache.misses(),
    }
}

fn manifest(
    cfg: &PipelineConfig,
    inputs: &InputHashes,
    results: serde_json::Value,
    execution: ExecutionInfo,
) -> RunManifest {
    RunManifest {
        tool_version: TOOL_VERSION.to_string(),
        inputs: inputs.clone(),
        settings: cfg.settings(),
        results,
        execution,
    }
}

/// The fixed explore artifact set, rooted at `cfg.output_dir`.
#[allow(clippy::too_many_arguments)]
pub fn write_explore_artifacts(
    cfg: &PipelineConfig,
    inputs: &LoadedInputs,
    state: &ExplorationState,
    artifacts: &BTreeMap<String, ConfigArtifacts>,
    cache: &DiskCache,
    cache_dir: &Path,
    started: Instant,
) -> Result<(), PipelineError> {
    let out = &cfg.output_dir;
    for sub in ["alerts", "rulesets", "variants"] {
        ensure_dir(&out.join(sub))?;
    }
    for (id, art) in artifacts {
        write_config_files(out, id, art)?;
    }

    write_json_pretty(&out.join("points.json"), &state.evaluated)?;
    write_text(&out.join("points.csv"), &points_csv(&state.evaluated))?;
    write_json_pretty(
        &out.join("frontier.json"),
        &FrontierDoc {
            area: state.latest_area().unwrap_or(0.5),
            points: state.frontier.clone(),
        },
    )?;
    write_text(&out.join("frontier.csv"), &curve_csv(&state.frontier))?;
    write_text(&out.join("union_frontier.csv"), &curve_csv(&state.union_frontier))?;
    write_text(&out.join("area_history.csv"), &area_history_csv(&state.area_history))?;
    let curve = min_cost_curve(&state.frontier, &uniform_thetas(DEFAULT_THETA_SAMPLES))?;
    write_text(&out.join("min_cost.csv"), &min_cost_csv(&curve))?;
    write_text(&out.join("f1_table.csv"), &f1_table_csv(&state.evaluated)?)?;

    let digests: BTreeMap<&String, String> = artifacts
        .iter()
        .map(|(id, art)| (id, result_digest(&art.result)))
        .collect();
    let frontier_config_ids: Vec<String> =
        state.frontier_configs.iter().map(|c| c.id()).collect();
    let results = serde_json::json!({
        "iterations": state.iteration,
        "area_history": state.area_history,
        "frontier": serde_json::to_value(&state.frontier).expect("frontier serializes"),
        "union_frontier": serde_json::to_value(&state.union_frontier).expect("frontier serializes"),
        "frontier_config_ids": frontier_config_ids,
        "config_digests": digests,
    });
    write_json_pretty(
        &out.join("manifest.json"),
        &manifest(cfg, &inputs.hashes, results, execution_info(cfg, cache, cache_dir, started)),
    )
}

/// Artifacts for a single cmd_run invocation; per-config files share the
/// explore layout, the row and manifest go under id-specific names.
#[allow(clippy::too_many_arguments)]
pub(crate) fn write_run_artifacts(
    cfg: &PipelineConfig,
    inputs: &LoadedInputs,
    id: &str,
    art: &ConfigArtifacts,
    row: &MetricsRow,
    point: &RocPoint,
    cache: &DiskCache,
    cache_dir: &Path,
    started: Instant,
) -> Result<(), PipelineError> {
    let out = &cfg.output_dir;
    for sub in ["alerts", "rulesets", "variants", "metrics", "manifests"] {
        ensure_dir(&out.join(sub))?;
    }
    write_config_files(out, id, art)?;
    write_text(
        &out.join("metrics").join(format!("{id}.csv")),
        &csv_document(&F1_HEADER, vec![f1_row(row)]),
    )?;
    let results = serde_json::json!({
        "config_id": id,
        "row": serde_json::to_value(row).expect("row serializes"),
        "point": serde_json::to_value(point).expect("point serializes"),
        "result_digest": result_digest(&art.result),
        "dropped_rules": art.result.dropped.len(),
    });
    write_json_pretty(
        &out.join("manifests").join(format!("{id}.json")),
        &manifest(cfg, &inputs.hashes, results, execution_info(cfg, cache, cache_dir, started)),
    )
}

#[derive(Debug)]
pub struct ReportSummary {
    pub rows: usize,
    pub area: f64,
    /// Number of configurations cross-checked against their alerts CSV;
    /// absent when verification was not requested.
    pub verified: Option<usize>,
}

fn read_alerts_flagged(path: &Path) -> Result<BTreeSet<Ipv4Addr>, PipelineError> {
    let file = std::fs::File::open(path).map_err(|source| PipelineError::Input {
        path: path.to_path_buf(),
        source,
    })?;
    let mut rdr = csv::Reader::from_reader(file);
    let mut flagged = BTreeSet::new();
    for record in rdr.records() {
        let record =
            record.map_err(|e| PipelineError::Verify(format!("{}: {e}", path.display())))?;
        let ip = record.get(2).ok_or_else(|| {
            PipelineError::Verify(format!("{}: missing src_ip column", path.display()))
        })?;
        let ip: Ipv4Addr = ip.parse().map_err(|_| {
            PipelineError::Verify(format!("{}: bad src_ip `{ip}`", path.display()))
        })?;
        flagged.insert(ip);
    }
    Ok(flagged)
}

/// Regenerates the derived tables (frontier, f1 table, min-cost curve,
/// point cloud CSV) from `points.json` without re-running the matcher.
/// With `verify`, every stored confusion count is recomputed from the
/// emitted alerts CSV plus labels, failing on the first mismatch.
pub fn cmd_report(cfg: &PipelineConfig, verify: bool) -> Result<ReportSummary, PipelineError> {
    let out = &cfg.output_dir;
    let points_path = out.join("points.json");
    let text = std::fs::read_to_string(&points_path).map_err(|source| PipelineError::Input {
        path: points_path.clone(),
        source,
    })?;
    let evaluated: BTreeMap<String, EvaluatedConfig> = serde_json::from_str(&text)
        .map_err(|e| PipelineError::Verify(format!("{}: {e}", points_path.display())))?;

    let points: Vec<RocPoint> = evaluated.values().map(|e| e.point.clone()).collect();
    let frontier = crate::explore::roc_hull(&points);
    let area = frontier_area(&frontier)?;
    write_json_pretty(
        &out.join("frontier.json"),
        &FrontierDoc {
            area,
            points: frontier.clone(),
        },
    )?;
    write_text(&out.join("frontier.csv"), &curve_csv(&frontier))?;
    write_text(&out.join("points.csv"), &points_csv(&evaluated))?;
    let curve = min_cost_curve(&frontier, &uniform_thetas(DEFAULT_THETA_SAMPLES))?;
    write_text(&out.join("min_cost.csv"), &min_cost_csv(&curve))?;
    write_text(&out.join("f1_table.csv"), &f1_table_csv(&evaluated)?)?;

    let verified = if verify {
        let traffic = load_traffic(&cfg.traffic_path)?;
        let blocklist = load_blocklist(&cfg.blocklist_path)?;
        let observed: BTreeSet<Ipv4Addr> = traffic.iter().map(|p| p.src_ip).collect();
        let labels = label_ips(&observed, &blocklist, cfg.label_policy);
        let mut checked = 0usize;
        for (id, e) in &evaluated {
            let flagged = read_alerts_flagged(&out.join("alerts").join(format!("{id}.csv")))?;
            let counts = confusion(&flagged, &labels)
                .map_err(|err| PipelineError::Verify(format!("{id}: {err}")))?;
            if counts != e.counts {
                return Err(PipelineError::Verify(format!(
                    "{id}: stored counts {:?} but alerts + labels give {:?}",
                    e.counts, counts
                )));
            }
            checked += 1;
        }
        Some(checked)
    } else {
        None
    };

    Ok(ReportSummary {
        rows: evaluated.len(),
        area,
        verified,
    })
}
