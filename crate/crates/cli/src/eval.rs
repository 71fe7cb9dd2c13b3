use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::Context;
use clap::Args;
use sawmatch_core::evaluation::{
    parse_query_file, query_from_description, run_evaluation, write_report_csv, EvalQuery, NamedConfig,
    RelevanceJudgments,
};
use sawmatch_core::{parse_document, MatchConfig};
use serde::Deserialize;

use crate::docs::{fmt4, read_docs};
use crate::rank::{eval_failure, parse_sim, parse_strategy, sim_algorithm};
use crate::{usage, CliResult, Failure};

#[derive(Args)]
pub struct EvalArgs {
    /// Directory of service documents.
    #[arg(long)]
    collection: PathBuf,
    /// Directory of ontologies.
    #[arg(long)]
    ontologies: PathBuf,
    /// Directory of query documents, or a query file with
    /// `id<TAB>I:...<TAB>O:...[<TAB>N:name]` lines.
    #[arg(long)]
    queries: PathBuf,
    /// Graded relevance judgments: `query_id<TAB>service_id<TAB>grade`.
    #[arg(long)]
    judgments: PathBuf,
    /// TOML file with `[[config]]` tables; all strategies with default
    /// settings when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory for the CSV reports.
    #[arg(long, default_value = "eval-out")]
    out: PathBuf,
    /// Skip queries without judgments instead of failing.
    #[arg(long)]
    allow_missing: bool,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigEntry {
    label: Option<String>,
    strategy: String,
    #[serde(default = "default_sim")]
    sim: String,
    sim_threshold: Option<f64>,
    weight: Option<f64>,
    threshold: Option<f64>,
    upper_rate: Option<f64>,
    lower_rate: Option<f64>,
}

fn default_sim() -> String {
    "monge-elkan".into()
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    config: Vec<ConfigEntry>,
}

fn load_configs(path: Option<&Path>) -> Result<Vec<NamedConfig>, Failure> {
    let Some(path) = path else {
        return Ok(sawmatch_core::Strategy::ALL
            .into_iter()
            .map(|s| NamedConfig {
                label: s.to_string(),
                config: MatchConfig::with_strategy(s),
            })
            .collect());
    };
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let file: ConfigFile = toml::from_str(&text).map_err(|e| usage(anyhow::anyhow!("{}: {e}", path.display())))?;
    let defaults = MatchConfig::default();
    let mut out = Vec::new();
    for entry in file.config {
        let strategy = parse_strategy(&entry.strategy).map_err(|e| usage(anyhow::anyhow!(e)))?;
        let kind = parse_sim(&entry.sim).map_err(|e| usage(anyhow::anyhow!(e)))?;
        let config = MatchConfig {
            strategy,
            sim: sim_algorithm(kind, entry.sim_threshold)?,
            weight: entry.weight.unwrap_or(defaults.weight),
            rating_threshold: entry.threshold.unwrap_or(defaults.rating_threshold),
            upper_rate: entry.upper_rate.unwrap_or(defaults.upper_rate),
            lower_rate: entry.lower_rate.unwrap_or(defaults.lower_rate),
        };
        config.validate().map_err(usage)?;
        let label = entry.label.unwrap_or_else(|| format!("{strategy}-{kind}"));
        out.push(NamedConfig { label, config });
    }
    if out.is_empty() {
        return Err(usage(anyhow::anyhow!(
            "{} defines no [[config]] entries",
            path.display()
        )));
    }
    Ok(out)
}

fn load_queries(path: &Path) -> Result<Vec<EvalQuery>, Failure> {
    if path.is_dir() {
        read_docs(path)?
            .into_iter()
            .map(|d| {
                let desc = parse_document(&d.id, &d.bytes).map_err(|e| usage(anyhow::anyhow!("{}: {e}", d.id)))?;
                Ok(EvalQuery {
                    query: query_from_description(&desc),
                    id: d.id,
                })
            })
            .collect()
    } else {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        parse_query_file(&text).map_err(eval_failure)
    }
}

pub fn run(args: EvalArgs) -> CliResult {
    let configs = load_configs(args.config.as_deref())?;
    let text =
        std::fs::read_to_string(&args.judgments).with_context(|| format!("reading {}", args.judgments.display()))?;
    let judged = RelevanceJudgments::from_tsv(&text).map_err(eval_failure)?;
    let all_queries = load_queries(&args.queries)?;

    let (queries, missing): (Vec<_>, Vec<_>) = all_queries.into_iter().partition(|q| judged.contains_query(&q.id));
    for q in &missing {
        eprintln!("no judgments for query {}; skipped", q.id);
    }
    if queries.is_empty() {
        return Err(Failure::Runtime(anyhow::anyhow!("no judged queries to evaluate")));
    }

    let services = read_docs(&args.collection)?;
    let ontologies = read_docs(&args.ontologies)?;
    let report = run_evaluation(&services, &ontologies, &queries, &judged, &configs).map_err(eval_failure)?;
    write_report_csv(&report, &args.out).map_err(eval_failure)?;

    let mut out = std::io::stdout().lock();
    writeln!(out, "config\tap\tndcg\tq\ttotal_s")?;
    for c in &report.configs {
        writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}",
            c.label,
            fmt4(c.ap),
            fmt4(c.ndcg),
            fmt4(c.q),
            fmt4(report.total_secs(c))
        )?;
    }
    log::info!("reports written to {}", args.out.display());

    if !missing.is_empty() && !args.allow_missing {
        return Err(Failure::Runtime(anyhow::anyhow!(
            "{} queries lack judgments: {}",
            missing.len(),
            missing.iter().map(|q| q.id.as_str()).collect::<Vec<_>>().join(", ")
        )));
    }
    Ok(())
}
