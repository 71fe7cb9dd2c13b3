use std::io::Write;
use std::path::PathBuf;
use std::str::FromStr;

use clap::Args;
use sawmatch_core::evaluation::{build_graph, build_index, EvalError};
use sawmatch_core::{
    ClassGraph, MatchConfig, Matcher, OperationIndexEntry, Query, SimAlgorithm, SimKind, Strategy, Tier,
};

use crate::docs::{fmt4, read_docs};
use crate::{usage, CliResult, Failure};

pub fn parse_strategy(s: &str) -> Result<Strategy, String> {
    Strategy::from_str(s).map_err(|e| e.to_string())
}

pub fn parse_sim(s: &str) -> Result<SimKind, String> {
    SimKind::from_str(s).map_err(|e| e.to_string())
}

#[derive(Args)]
pub struct MatchArgs {
    /// Directory (or single file) of service documents.
    #[arg(long)]
    collection: PathBuf,
    /// Directory (or single file) of ontologies.
    #[arg(long)]
    ontologies: Option<PathBuf>,
    /// logic, syn-on-sem, syn-on-syn, hybrid or tomaco-s3.
    #[arg(long, default_value = "hybrid", value_parser = parse_strategy)]
    strategy: Strategy,
    /// monge-elkan or jaro.
    #[arg(long, default_value = "monge-elkan", value_parser = parse_sim)]
    sim: SimKind,
    /// Match threshold of the similarity measure; defaults per measure.
    #[arg(long)]
    sim_threshold: Option<f64>,
    /// Requested input concept IRIs.
    #[arg(long = "input", num_args = 1..)]
    inputs: Vec<String>,
    /// Requested output concept IRIs.
    #[arg(long = "output", num_args = 1..)]
    outputs: Vec<String>,
    /// Share of the input rating in the overall rating.
    #[arg(long, default_value_t = 0.5)]
    weight: f64,
    /// Minimum rating of reported operations.
    #[arg(long, default_value_t = 0.0)]
    threshold: f64,
    /// Query name used by the tomaco-s3 strategy's name pre-pass.
    #[arg(long)]
    query_name: Option<String>,
}

/// Document problems are usage errors; everything else is a runtime error.
pub fn eval_failure(e: EvalError) -> Failure {
    match e {
        EvalError::Parse { .. } | EvalError::Ontology { .. } | EvalError::Format { .. } => usage(e),
        other => Failure::Runtime(other.into()),
    }
}

pub fn load(
    collection: &std::path::Path,
    ontologies: Option<&std::path::Path>,
) -> Result<(ClassGraph, Vec<OperationIndexEntry>), Failure> {
    let graph = match ontologies {
        Some(dir) => build_graph(&read_docs(dir)?).map_err(eval_failure)?,
        None => ClassGraph::new(),
    };
    let index = build_index(&read_docs(collection)?).map_err(eval_failure)?;
    Ok((graph, index))
}

pub fn sim_algorithm(kind: SimKind, threshold: Option<f64>) -> Result<SimAlgorithm, Failure> {
    match threshold {
        None => Ok(SimAlgorithm::new(kind)),
        Some(t) => SimAlgorithm::with_threshold(kind, t)
            .ok_or_else(|| usage(anyhow::anyhow!("--sim-threshold must lie in [0, 1], got {t}"))),
    }
}

pub fn run(args: MatchArgs) -> CliResult {
    let mut query = Query::new(args.inputs, args.outputs);
    query.query_name = args.query_name;
    query
        .validate()
        .map_err(|_| usage(anyhow::anyhow!("give at least one --input or --output concept")))?;
    let cfg = MatchConfig {
        strategy: args.strategy,
        sim: sim_algorithm(args.sim, args.sim_threshold)?,
        weight: args.weight,
        rating_threshold: args.threshold,
        ..MatchConfig::default()
    };
    let (graph, index) = load(&args.collection, args.ontologies.as_deref())?;
    let matcher = Matcher::new(&graph, cfg).map_err(usage)?;
    let results = matcher.match_operations(&query, &index).map_err(usage)?;

    let mut out = std::io::stdout().lock();
    writeln!(out, "rank\trating\ttier\tservice\tinterface\toperation")?;
    for (i, r) in results.iter().enumerate() {
        let tier = match r.tier {
            Tier::NameMatch => "name-match",
            Tier::Normal => "normal",
        };
        writeln!(
            out,
            "{}\t{}\t{tier}\t{}\t{}\t{}",
            i + 1,
            fmt4(r.rating),
            r.service_id,
            r.interface_name,
            r.operation_name
        )?;
    }
    Ok(())
}
