//! Ranking quality metrics and batch evaluation runs.
//!
//! Relevance is graded (0 = irrelevant). Binary metrics treat a service as
//! relevant when its grade reaches the judgments' `binary_cutoff`; graded
//! metrics (nDCG, Q) use the grade itself as gain.

use std::collections::{BTreeMap, HashSet};
use std::path::Path;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::index::{index_service, OperationIndexEntry};
use crate::matching::{MatchConfig, MatchError, MatchResult, Matcher, Query};
use crate::ontology::{load_ontology, ClassGraph, OntologyError};
use crate::sawsdl::{extract_io, parse_document, ParseError, ServiceDescription};

/// Number of recall / lambda sample points on the curves.
pub const CURVE_LEVELS: usize = 20;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("no relevance judgments for query `{0}`")]
    MissingJudgments(String),
    #[error("query `{0}` has no relevant service")]
    NoRelevant(String),
    #[error("no queries to evaluate")]
    NoQueries,
    #[error("line {line}: {message}")]
    Format { line: usize, message: String },
    #[error("{source_id}: {source}")]
    Parse { source_id: String, source: ParseError },
    #[error("{source_id}: {source}")]
    Ontology { source_id: String, source: OntologyError },
    #[error(transparent)]
    Match(#[from] MatchError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// Graded query -> service relevance.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelevanceJudgments {
    pub grades: BTreeMap<String, BTreeMap<String, u32>>,
    pub binary_cutoff: u32,
}

impl RelevanceJudgments {
    pub fn new() -> Self {
        RelevanceJudgments {
            grades: BTreeMap::new(),
            binary_cutoff: 1,
        }
    }

    pub fn insert(&mut self, query_id: &str, service_id: &str, grade: u32) -> bool {
        self.grades
            .entry(query_id.to_string())
            .or_default()
            .insert(service_id.to_string(), grade)
            .is_none()
    }

    pub fn contains_query(&self, query_id: &str) -> bool {
        self.grades.contains_key(query_id)
    }

    pub fn grade(&self, query_id: &str, service_id: &str) -> u32 {
        self.grades
            .get(query_id)
            .and_then(|g| g.get(service_id))
            .copied()
            .unwrap_or(0)
    }

    /// Parses `query_id<TAB>service_id<TAB>grade` lines. Blank lines and
    /// lines starting with `#` are skipped.
    pub fn from_tsv(text: &str) -> Result<Self, EvalError> {
        let mut judged = RelevanceJudgments::new();
        for (n, line) in text.lines().enumerate() {
            let line_no = n + 1;
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').map(str::trim).collect();
            let [query, service, grade] = fields[..] else {
                return Err(EvalError::Format {
                    line: line_no,
                    message: format!("expected 3 tab-separated fields, found {}", fields.len()),
                });
            };
            let grade: u32 = grade.parse().map_err(|_| EvalError::Format {
                line: line_no,
                message: format!("grade `{grade}` is not a non-negative integer"),
            })?;
            if !judged.insert(query, service, grade) {
                return Err(EvalError::Format {
                    line: line_no,
                    message: format!("duplicate judgment for `{query}` / `{service}`"),
                });
            }
        }
        Ok(judged)
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for (q, services) in &self.grades {
            for (s, g) in services {
                out.push_str(&format!("{q}\t{s}\t{g}\n"));
            }
        }
        out
    }
}

/// Everything the metrics need about one query's ranking.
struct Judged {
    /// Grade of each ranked service, duplicates removed.
    ranked_grades: Vec<u32>,
    /// All judged grades, descending.
    ideal: Vec<u32>,
    cutoff: u32,
    relevant_total: usize,
}

impl Judged {
    fn new<S: AsRef<str>>(ranking: &[S], judged: &RelevanceJudgments, query_id: &str) -> Result<Self, EvalError> {
        let grades = judged
            .grades
            .get(query_id)
            .ok_or_else(|| EvalError::MissingJudgments(query_id.to_string()))?;
        let cutoff = judged.binary_cutoff.max(1);
        let relevant_total = grades.values().filter(|&&g| g >= cutoff).count();
        if relevant_total == 0 {
            return Err(EvalError::NoRelevant(query_id.to_string()));
        }
        let mut seen = HashSet::new();
        let ranked_grades = ranking
            .iter()
            .map(AsRef::as_ref)
            .filter(|s| seen.insert(*s))
            .map(|s| grades.get(s).copied().unwrap_or(0))
            .collect();
        let mut ideal: Vec<u32> = grades.values().copied().filter(|&g| g > 0).collect();
        ideal.sort_unstable_by(|a, b| b.cmp(a));
        Ok(Judged {
            ranked_grades,
            ideal,
            cutoff,
            relevant_total,
        })
    }

    fn is_relevant(&self, grade: u32) -> bool {
        grade >= self.cutoff
    }

    fn average_precision(&self) -> f64 {
        let mut hits = 0usize;
        let mut sum = 0.0;
        for (i, &g) in self.ranked_grades.iter().enumerate() {
            if self.is_relevant(g) {
                hits += 1;
                sum += hits as f64 / (i + 1) as f64;
            }
        }
        sum / self.relevant_total as f64
    }

    fn ndcg(&self) -> f64 {
        let dcg = |grades: &[u32]| -> f64 {
            grades
                .iter()
                .enumerate()
                .map(|(i, &g)| g as f64 / ((i + 2) as f64).log2())
                .sum()
        };
        let ideal = dcg(&self.ideal);
        if ideal == 0.0 {
            return 0.0;
        }
        (dcg(&self.ranked_grades) / ideal).min(1.0)
    }

    fn q_measure(&self) -> f64 {
        let mut cg = 0u64;
        let mut cig = 0u64;
        let mut hits = 0u64;
        let mut sum = 0.0;
        for (i, &g) in self.ranked_grades.iter().enumerate() {
            let rank = (i + 1) as u64;
            cg += g as u64;
            cig += self.ideal.get(i).copied().unwrap_or(0) as u64;
            if self.is_relevant(g) {
                hits += 1;
                sum += (cg + hits) as f64 / (cig + rank) as f64;
            }
        }
        sum / self.relevant_total as f64
    }

    fn interpolated_precision(&self) -> Vec<f64> {
        // (hits, rank) after each relevant item
        let mut points = Vec::new();
        let mut hits = 0usize;
        for (i, &g) in self.ranked_grades.iter().enumerate() {
            if self.is_relevant(g) {
                hits += 1;
                points.push((hits, i + 1));
            }
        }
        let total = self.relevant_total;
        (1..=CURVE_LEVELS)
            .map(|level| {
                // recall hits/total >= level/CURVE_LEVELS, compared exactly
                points
                    .iter()
                    .filter(|(h, _)| h * CURVE_LEVELS >= level * total)
                    .map(|&(h, r)| h as f64 / r as f64)
                    .fold(0.0, f64::max)
            })
            .collect()
    }

    fn f1_at_lambda(&self) -> Vec<f64> {
        let n = self.ranked_grades.len();
        let mut prefix_hits = Vec::with_capacity(n + 1);
        prefix_hits.push(0usize);
        for &g in &self.ranked_grades {
            let last = *prefix_hits.last().unwrap();
            prefix_hits.push(last + usize::from(self.is_relevant(g)));
        }
        (1..=CURVE_LEVELS)
            .map(|level| {
                let k = (level * n).div_ceil(CURVE_LEVELS);
                if k == 0 {
                    return 0.0;
                }
                let hits = prefix_hits[k] as f64;
                let p = hits / k as f64;
                let r = hits / self.relevant_total as f64;
                if p + r == 0.0 {
                    0.0
                } else {
                    2.0 * p * r / (p + r)
                }
            })
            .collect()
    }
}

pub fn average_precision<S: AsRef<str>>(
    ranking: &[S],
    judged: &RelevanceJudgments,
    query_id: &str,
) -> Result<f64, EvalError> {
    Ok(Judged::new(ranking, judged, query_id)?.average_precision())
}

/// nDCG with a `log2(rank + 1)` discount over the whole ranking.
pub fn ndcg<S: AsRef<str>>(ranking: &[S], judged: &RelevanceJudgments, query_id: &str) -> Result<f64, EvalError> {
    Ok(Judged::new(ranking, judged, query_id)?.ndcg())
}

/// Sakai's Q-measure with unit persistence parameter.
pub fn q_measure<S: AsRef<str>>(ranking: &[S], judged: &RelevanceJudgments, query_id: &str) -> Result<f64, EvalError> {
    Ok(Judged::new(ranking, judged, query_id)?.q_measure())
}

/// Interpolated precision at recall 0.05, 0.10, ..., 1.00 for one query.
pub fn interpolated_precision<S: AsRef<str>>(
    ranking: &[S],
    judged: &RelevanceJudgments,
    query_id: &str,
) -> Result<Vec<f64>, EvalError> {
    Ok(Judged::new(ranking, judged, query_id)?.interpolated_precision())
}

/// F1 at cutoffs `ceil(lambda * |ranking|)` for lambda = 0.05, ..., 1.00.
pub fn f1_curve<S: AsRef<str>>(
    ranking: &[S],
    judged: &RelevanceJudgments,
    query_id: &str,
) -> Result<Vec<f64>, EvalError> {
    Ok(Judged::new(ranking, judged, query_id)?.f1_at_lambda())
}

fn macro_average<F>(rankings: &BTreeMap<String, Vec<String>>, mut curve: F) -> Result<Vec<f64>, EvalError>
where
    F: FnMut(&[String], &str) -> Result<Vec<f64>, EvalError>,
{
    if rankings.is_empty() {
        return Err(EvalError::NoQueries);
    }
    let mut acc = vec![0.0; CURVE_LEVELS];
    for (qid, ranking) in rankings {
        for (a, v) in acc.iter_mut().zip(curve(ranking, qid)?) {
            *a += v;
        }
    }
    let n = rankings.len() as f64;
    Ok(acc.into_iter().map(|v| v / n).collect())
}

/// Macro-averaged interpolated precision over queries (query id -> ranking).
pub fn macro_precision_at_recall(
    rankings: &BTreeMap<String, Vec<String>>,
    judged: &RelevanceJudgments,
) -> Result<Vec<f64>, EvalError> {
    macro_average(rankings, |r, q| interpolated_precision(r, judged, q))
}

pub fn f1_at_lambda(
    rankings: &BTreeMap<String, Vec<String>>,
    judged: &RelevanceJudgments,
) -> Result<Vec<f64>, EvalError> {
    macro_average(rankings, |r, q| f1_curve(r, judged, q))
}

/// Service-level ranking from operation results; the first (best) operation
/// of each service decides its position.
pub fn service_ranking(results: &[MatchResult]) -> Vec<String> {
    let mut seen = HashSet::new();
    results
        .iter()
        .filter(|r| seen.insert(r.service_id.as_str()))
        .map(|r| r.service_id.clone())
        .collect()
}

/// A raw document with its identifier (usually the file name).
#[derive(Debug, Clone)]
pub struct SourceDoc {
    pub id: String,
    pub bytes: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalQuery {
    pub id: String,
    pub query: Query,
}

/// Turns a SAWSDL query document into a query: requested inputs and outputs
/// are its annotations, the query name is its service name.
pub fn query_from_description(desc: &ServiceDescription) -> Query {
    let mut inputs = std::collections::BTreeSet::new();
    let mut outputs = std::collections::BTreeSet::new();
    for (_, op) in desc.operations() {
        let io = extract_io(op);
        inputs.extend(io.input_annotations);
        outputs.extend(io.output_annotations);
    }
    Query {
        requested_inputs: inputs.into_iter().collect(),
        requested_outputs: outputs.into_iter().collect(),
        query_name: Some(desc.service_name.clone()),
    }
}

/// Parses a line-oriented query file:
/// `query_id<TAB>I:<iri> <iri>...<TAB>O:<iri>...[<TAB>N:<name>]`.
pub fn parse_query_file(text: &str) -> Result<Vec<EvalQuery>, EvalError> {
    let mut queries = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let mut fields = line.split('\t');
        let id = fields.next().unwrap_or_default().trim().to_string();
        let mut query = Query::default();
        for field in fields {
            let field = field.trim();
            if let Some(rest) = field.strip_prefix("I:") {
                query.requested_inputs.extend(rest.split_whitespace().map(String::from));
            } else if let Some(rest) = field.strip_prefix("O:") {
                query
                    .requested_outputs
                    .extend(rest.split_whitespace().map(String::from));
            } else if let Some(rest) = field.strip_prefix("N:") {
                query.query_name = Some(rest.trim().to_string());
            } else if !field.is_empty() {
                return Err(EvalError::Format {
                    line: n + 1,
                    message: format!("unrecognised field `{field}` (expected I:, O: or N:)"),
                });
            }
        }
        if id.is_empty() || query.validate().is_err() {
            return Err(EvalError::Format {
                line: n + 1,
                message: "query needs an id and at least one I: or O: concept".into(),
            });
        }
        queries.push(EvalQuery { id, query });
    }
    Ok(queries)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedConfig {
    pub label: String,
    pub config: MatchConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QueryMetrics {
    pub query_id: String,
    pub ap: f64,
    pub ndcg: f64,
    pub q: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConfigReport {
    pub label: String,
    pub config: MatchConfig,
    pub ap: f64,
    pub ndcg: f64,
    pub q: f64,
    pub precision_at_recall: Vec<f64>,
    pub f1_at_lambda: Vec<f64>,
    pub all_queries_secs: f64,
    pub per_query_secs: f64,
    pub per_query: Vec<QueryMetrics>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvaluationReport {
    pub init_secs: f64,
    pub extraction_secs: f64,
    pub service_count: usize,
    pub operation_count: usize,
    pub query_count: usize,
    pub configs: Vec<ConfigReport>,
}

impl EvaluationReport {
    pub fn total_secs(&self, config: &ConfigReport) -> f64 {
        self.init_secs + self.extraction_secs + config.all_queries_secs
    }
}

/// Builds the class graph from ontology documents.
pub fn build_graph(ontologies: &[SourceDoc]) -> Result<ClassGraph, EvalError> {
    let mut axioms = crate::ontology::Axioms::default();
    for doc in ontologies {
        let base = format!("http://localhost/ontology/{}", doc.id);
        let ax = load_ontology(&doc.bytes, &base).map_err(|source| EvalError::Ontology {
            source_id: doc.id.clone(),
            source,
        })?;
        axioms.union(&ax);
    }
    Ok(ClassGraph::from_axioms(axioms))
}

/// Parses and indexes service documents; ids are the documents' ids.
pub fn build_index(services: &[SourceDoc]) -> Result<Vec<OperationIndexEntry>, EvalError> {
    let mut index = Vec::new();
    for doc in services {
        let desc = parse_document(&doc.id, &doc.bytes).map_err(|source| EvalError::Parse {
            source_id: doc.id.clone(),
            source,
        })?;
        for w in &desc.warnings {
            log::warn!("{}: {}", doc.id, w);
        }
        index.extend(index_service(&desc, None));
    }
    Ok(index)
}

fn secs(d: Duration) -> f64 {
    d.as_secs_f64()
}

/// Runs every configuration over every query and scores the rankings.
///
/// Ontology loading and service indexing happen once and are timed
/// separately from the query loop of each configuration.
pub fn run_evaluation(
    services: &[SourceDoc],
    ontologies: &[SourceDoc],
    queries: &[EvalQuery],
    judged: &RelevanceJudgments,
    configs: &[NamedConfig],
) -> Result<EvaluationReport, EvalError> {
    for q in queries {
        if !judged.contains_query(&q.id) {
            return Err(EvalError::MissingJudgments(q.id.clone()));
        }
    }

    let start = Instant::now();
    let graph = build_graph(ontologies)?;
    let init = start.elapsed();

    let start = Instant::now();
    let index = build_index(services)?;
    let extraction = start.elapsed();

    let mut reports = Vec::with_capacity(configs.len());
    for named in configs {
        let matcher = Matcher::new(&graph, named.config)?;
        let start = Instant::now();
        let mut rankings = BTreeMap::new();
        for q in queries {
            let results = matcher.match_operations(&q.query, &index)?;
            rankings.insert(q.id.clone(), service_ranking(&results));
        }
        let elapsed = start.elapsed();

        let mut per_query = Vec::with_capacity(rankings.len());
        for (qid, ranking) in &rankings {
            let j = Judged::new(ranking, judged, qid)?;
            per_query.push(QueryMetrics {
                query_id: qid.clone(),
                ap: j.average_precision(),
                ndcg: j.ndcg(),
                q: j.q_measure(),
            });
        }
        let n = per_query.len().max(1) as f64;
        let mean = |f: fn(&QueryMetrics) -> f64| per_query.iter().map(f).sum::<f64>() / n;
        let (precision_at_recall, f1) = if rankings.is_empty() {
            (vec![0.0; CURVE_LEVELS], vec![0.0; CURVE_LEVELS])
        } else {
            (
                macro_precision_at_recall(&rankings, judged)?,
                f1_at_lambda(&rankings, judged)?,
            )
        };
        reports.push(ConfigReport {
            label: named.label.clone(),
            config: named.config,
            ap: mean(|m| m.ap),
            ndcg: mean(|m| m.ndcg),
            q: mean(|m| m.q),
            precision_at_recall,
            f1_at_lambda: f1,
            all_queries_secs: secs(elapsed),
            per_query_secs: if queries.is_empty() {
                0.0
            } else {
                secs(elapsed) / queries.len() as f64
            },
            per_query,
        });
    }

    Ok(EvaluationReport {
        init_secs: secs(init),
        extraction_secs: secs(extraction),
        service_count: services.len(),
        operation_count: index.len(),
        query_count: queries.len(),
        configs: reports,
    })
}

fn fmt4(v: f64) -> String {
    format!("{v:.4}")
}

/// Writes `metrics.csv`, `precision_recall.csv`, `f1_lambda.csv` and
/// `timing.csv` into `dir`.
pub fn write_report_csv(report: &EvaluationReport, dir: &Path) -> Result<(), EvalError> {
    std::fs::create_dir_all(dir)?;

    let mut w = csv::Writer::from_path(dir.join("metrics.csv"))?;
    w.write_record(["config", "strategy", "sim", "ap", "ndcg", "q"])?;
    for c in &report.configs {
        w.write_record([
            c.label.clone(),
            c.config.strategy.to_string(),
            c.config.sim.kind.to_string(),
            fmt4(c.ap),
            fmt4(c.ndcg),
            fmt4(c.q),
        ])?;
    }
    w.flush()?;

    for (file, axis, pick) in [
        (
            "precision_recall.csv",
            "recall",
            (|c: &ConfigReport| &c.precision_at_recall) as fn(&ConfigReport) -> &Vec<f64>,
        ),
        ("f1_lambda.csv", "lambda", |c: &ConfigReport| &c.f1_at_lambda),
    ] {
        let mut w = csv::Writer::from_path(dir.join(file))?;
        let mut header = vec![axis.to_string()];
        header.extend(report.configs.iter().map(|c| c.label.clone()));
        w.write_record(&header)?;
        for level in 0..CURVE_LEVELS {
            let mut row = vec![format!("{:.2}", (level + 1) as f64 / CURVE_LEVELS as f64)];
            row.extend(report.configs.iter().map(|c| fmt4(pick(c)[level])));
            w.write_record(&row)?;
        }
        w.flush()?;
    }

    let mut w = csv::Writer::from_path(dir.join("timing.csv"))?;
    w.write_record([
        "config",
        "total_s",
        "init_s",
        "extraction_s",
        "all_queries_s",
        "per_query_s",
    ])?;
    if report.configs.is_empty() {
        w.write_record([
            "-".to_string(),
            fmt4(report.init_secs + report.extraction_secs),
            fmt4(report.init_secs),
            fmt4(report.extraction_secs),
            fmt4(0.0),
            fmt4(0.0),
        ])?;
    }
    for c in &report.configs {
        w.write_record([
            c.label.clone(),
            fmt4(report.total_secs(c)),
            fmt4(report.init_secs),
            fmt4(report.extraction_secs),
            fmt4(c.all_queries_secs),
            fmt4(c.per_query_secs),
        ])?;
    }
    w.flush()?;
    Ok(())
}
