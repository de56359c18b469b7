//! `sigspace` command line: parse / run / explore / report.
//!
//! Flags mirror the pipeline config fields; `--config <json>` loads a full
//! config document and individual flags override it. Exit codes: 0 success,
//! 1 input error (bad flags, unreadable or malformed inputs), 2 evaluation
//! error (matcher, metrics, artifact writing, verification).

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use sigspace::engine::UnevaluablePolicy;
use sigspace::explore::ExtendScope;
use sigspace::pipeline::{
    cmd_explore, cmd_parse, cmd_report, cmd_run, PipelineConfig, PipelineError, RunDescriptor,
};
use sigspace::rule::RemovablePolicy;
use sigspace::traffic::LabelPolicy;

#[derive(Parser)]
#[command(
    name = "sigspace",
    version,
    about = "Snort 3 rule mutation and ROC performance-space exploration"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Parse a ruleset and report option statistics and the removal space.
    Parse {
        /// Snort 3 rules file.
        rules: PathBuf,
        /// Additional option keywords to treat as non-removable.
        #[arg(long = "exclude")]
        exclude: Vec<String>,
        /// Do not lock options whose values other options depend on.
        #[arg(long)]
        no_dependency_check: bool,
    },
    /// Evaluate one configuration: `original`, a keyword, `content.multi`,
    /// or a mask JSON file.
    Run {
        descriptor: String,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Run the full iterative exploration and write all artifacts.
    Explore {
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Regenerate report tables from points.json without re-matching.
    Report {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Recompute every confusion count from the emitted alerts CSVs.
        #[arg(long)]
        verify: bool,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum LabelPolicyArg {
    /// Blocklisted sources are benign background, the rest malicious.
    PaperInverted,
    /// Blocklisted sources are the malicious class.
    BlocklistMalicious,
}

impl From<LabelPolicyArg> for LabelPolicy {
    fn from(v: LabelPolicyArg) -> LabelPolicy {
        match v {
            LabelPolicyArg::PaperInverted => LabelPolicy::PaperInverted,
            LabelPolicyArg::BlocklistMalicious => LabelPolicy::BlocklistMalicious,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum UnevaluableArg {
    Permissive,
    Strict,
}

impl From<UnevaluableArg> for UnevaluablePolicy {
    fn from(v: UnevaluableArg) -> UnevaluablePolicy {
        match v {
            UnevaluableArg::Permissive => UnevaluablePolicy::Permissive,
            UnevaluableArg::Strict => UnevaluablePolicy::Strict,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ExtendScopeArg {
    AllRules,
    TouchedOnly,
}

impl From<ExtendScopeArg> for ExtendScope {
    fn from(v: ExtendScopeArg) -> ExtendScope {
        match v {
            ExtendScopeArg::AllRules => ExtendScope::AllRules,
            ExtendScopeArg::TouchedOnly => ExtendScope::TouchedOnly,
        }
    }
}

#[derive(Args)]
struct ConfigArgs {
    /// Pipeline config JSON; flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    rules: Option<PathBuf>,
    #[arg(long)]
    traffic: Option<PathBuf>,
    #[arg(long)]
    blocklist: Option<PathBuf>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
    /// Result cache directory (also settable via SIGSPACE_CACHE_DIR).
    #[arg(long)]
    cache_dir: Option<PathBuf>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    max_iterations: Option<usize>,
    #[arg(long, value_enum)]
    label_policy: Option<LabelPolicyArg>,
    #[arg(long, value_enum)]
    unevaluable: Option<UnevaluableArg>,
    #[arg(long, value_enum)]
    extend_scope: Option<ExtendScopeArg>,
}

impl ConfigArgs {
    fn resolve(self) -> Result<(PipelineConfig, Option<PathBuf>), PipelineError> {
        let mut cfg = match &self.config {
            Some(path) => PipelineConfig::from_json_file(path)?,
            None => {
                let missing = |name: &str| {
                    PipelineError::Config(format!("--{name} is required without --config"))
                };
                PipelineConfig {
                    rules_path: self.rules.clone().ok_or_else(|| missing("rules"))?,
                    traffic_path: self.traffic.clone().ok_or_else(|| missing("traffic"))?,
                    blocklist_path: self.blocklist.clone().ok_or_else(|| missing("blocklist"))?,
                    policy: RemovablePolicy::default(),
                    label_policy: LabelPolicy::default(),
                    unevaluable: UnevaluablePolicy::default(),
                    epsilon: 1e-4,
                    max_iterations: 4,
                    extend_scope: ExtendScope::default(),
                    cache_dir: None,
                    output_dir: self.output_dir.clone().ok_or_else(|| missing("output-dir"))?,
                    workers: 1,
                }
            }
        };
        if let Some(p) = self.rules {
            cfg.rules_path = p;
        }
        if let Some(p) = self.traffic {
            cfg.traffic_path = p;
        }
        if let Some(p) = self.blocklist {
            cfg.blocklist_path = p;
        }
        if let Some(p) = self.output_dir {
            cfg.output_dir = p;
        }
        if let Some(w) = self.workers {
            cfg.workers = w;
        }
        if let Some(e) = self.epsilon {
            cfg.epsilon = e;
        }
        if let Some(m) = self.max_iterations {
            cfg.max_iterations = m;
        }
        if let Some(l) = self.label_policy {
            cfg.label_policy = l.into();
        }
        if let Some(u) = self.unevaluable {
            cfg.unevaluable = u.into();
        }
        if let Some(s) = self.extend_scope {
            cfg.extend_scope = s.into();
        }
        Ok((cfg, self.cache_dir))
    }
}

fn print_json<T: serde::Serialize>(value: &T) {
    println!(
        "{}",
        serde_json::to_string_pretty(value).expect("report serializes")
    );
}

fn run(cli: Cli) -> Result<(), PipelineError> {
    match cli.cmd {
        Cmd::Parse {
            rules,
            exclude,
            no_dependency_check,
        } => {
            let policy = if exclude.is_empty() && !no_dependency_check {
                RemovablePolicy::default()
            } else {
                let mut excluded: std::collections::BTreeSet<String> =
                    sigspace::rule::GENERAL_OPTIONS
                        .iter()
                        .map(|s| s.to_string())
                        .collect();
                excluded.extend(exclude);
                RemovablePolicy::new(excluded, !no_dependency_check)
            };
            let report = cmd_parse(&rules, &policy)?;
            print_json(&report);
        }
        Cmd::Run { descriptor, cfg } => {
            let descriptor = RunDescriptor::parse(&descriptor)?;
            let (cfg, cache_override) = cfg.resolve()?;
            let summary = cmd_run(&cfg, &descriptor, cache_override)?;
            print_json(&serde_json::json!({
                "config_id": summary.config_id,
                "row": summary.row,
                "cache_hit": summary.cache_hit,
                "output_dir": summary.output_dir,
            }));
        }
        Cmd::Explore { cfg } => {
            let (cfg, cache_override) = cfg.resolve()?;
            let summary = cmd_explore(&cfg, cache_override)?;
            let state = &summary.state;
            print_json(&serde_json::json!({
                "iterations": state.iteration,
                "area_history": state.area_history,
                "frontier": state.frontier,
                "frontier_configs": state
                    .frontier_configs
                    .iter()
                    .map(|c| c.id())
                    .collect::<Vec<_>>(),
                "evaluated": state.evaluated.len(),
                "output_dir": summary.output_dir,
            }));
        }
        Cmd::Report { cfg, verify } => {
            let (cfg, _) = cfg.resolve()?;
            let summary = cmd_report(&cfg, verify)?;
            print_json(&serde_json::json!({
                "rows": summary.rows,
                "area": summary.area,
                "verified": summary.verified,
            }));
        }
    }
    Ok(())
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    if let Err(err) = run(cli) {
        eprintln!("error: {err}");
        std::process::exit(err.exit_code());
    }
}
