//! Rating and ranking of offered operations against concept queries.
//!
//! Each requested concept is rated against every offered item of the same
//! side and keeps its best pair rating; a side's rating is the mean of those
//! maxima, and the two sides are combined with the input weight. How a pair
//! is rated depends on the [`Strategy`]:
//!
//! * `Logic`: subsumption only. Equivalent = 1, a *desired* generalisation
//!   (offered input above the requested one, offered output below it) =
//!   `upper_rate`, the opposite direction = `lower_rate`, unrelated = 0.
//! * `SynOnSem`: raw text similarity between unfolded annotation names.
//! * `SynOnSyn`: raw text similarity between element names and the
//!   unfolded requested concept; annotations are ignored.
//! * `Hybrid`: an Exact logic match, then a thresholded syntactic match on
//!   annotations, then on element names (both rated 1), then the remaining
//!   logic cases.
//! * `S3`: hybrid ratings, with operations whose service or operation name
//!   matches the query name ranked in a tier above all others.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::index::{IndexItem, OperationIndexEntry};
use crate::ontology::{ClassGraph, ClassRelation};
use crate::sawsdl::NodeKind;
use crate::similarity::{unfold, SimAlgorithm};

/// Slack used when comparing ratings with the rating threshold, so that a
/// weighted sum of two perfect sides still passes a threshold of 1.
pub const RATING_EPSILON: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum MatchError {
    #[error("query requests neither inputs nor outputs")]
    InvalidQuery,
    #[error("invalid `{field}`: {message}")]
    InvalidConfig { field: &'static str, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    Logic,
    SynOnSem,
    SynOnSyn,
    Hybrid,
    #[serde(alias = "tomaco-s3")]
    S3,
}

impl Strategy {
    pub const ALL: [Strategy; 5] = [
        Strategy::Logic,
        Strategy::SynOnSem,
        Strategy::SynOnSyn,
        Strategy::Hybrid,
        Strategy::S3,
    ];
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Strategy::Logic => "logic",
            Strategy::SynOnSem => "syn-on-sem",
            Strategy::SynOnSyn => "syn-on-syn",
            Strategy::Hybrid => "hybrid",
            Strategy::S3 => "s3",
        })
    }
}

impl FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "logic" | "logic-based" => Ok(Strategy::Logic),
            "syn-on-sem" | "synonsem" => Ok(Strategy::SynOnSem),
            "syn-on-syn" | "synonsyn" => Ok(Strategy::SynOnSyn),
            "hybrid" => Ok(Strategy::Hybrid),
            "s3" | "tomaco-s3" => Ok(Strategy::S3),
            other => Err(format!("unknown strategy `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Input,
    Output,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MatchCase {
    Exact,
    SynSemMatch,
    SynSynMatch,
    Desired,
    LessDesired,
    Fail,
}

/// Rank stratum. Only the S3 strategy produces `NameMatch`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Tier {
    NameMatch,
    Normal,
}

impl Tier {
    fn rank(self) -> u8 {
        match self {
            Tier::NameMatch => 0,
            Tier::Normal => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Query {
    pub requested_inputs: Vec<String>,
    pub requested_outputs: Vec<String>,
    pub query_name: Option<String>,
}

impl Query {
    pub fn new(
        inputs: impl IntoIterator<Item = impl Into<String>>,
        outputs: impl IntoIterator<Item = impl Into<String>>,
    ) -> Self {
        Query {
            requested_inputs: inputs.into_iter().map(Into::into).collect(),
            requested_outputs: outputs.into_iter().map(Into::into).collect(),
            query_name: None,
        }
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.query_name = Some(name.into());
        self
    }

    pub fn validate(&self) -> Result<(), MatchError> {
        if self.requested_inputs.is_empty() && self.requested_outputs.is_empty() {
            Err(MatchError::InvalidQuery)
        } else {
            Ok(())
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchConfig {
    pub strategy: Strategy,
    pub sim: SimAlgorithm,
    /// Share of the input rating in the overall rating, in (0, 1).
    pub weight: f64,
    pub rating_threshold: f64,
    pub upper_rate: f64,
    pub lower_rate: f64,
}

impl Default for MatchConfig {
    fn default() -> Self {
        MatchConfig {
            strategy: Strategy::Hybrid,
            sim: SimAlgorithm::default(),
            weight: 0.5,
            rating_threshold: 0.0,
            upper_rate: 0.75,
            lower_rate: 0.25,
        }
    }
}

impl MatchConfig {
    pub fn with_strategy(strategy: Strategy) -> Self {
        MatchConfig {
            strategy,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<(), MatchError> {
        let bad = |field, message: &str| {
            Err(MatchError::InvalidConfig {
                field,
                message: message.to_string(),
            })
        };
        if !(self.weight > 0.0 && self.weight < 1.0) {
            return bad("weight", "must lie strictly between 0 and 1");
        }
        if !(0.0..=1.0).contains(&self.rating_threshold) {
            return bad("rating_threshold", "must lie in [0, 1]");
        }
        if !(0.0..=1.0).contains(&self.sim.match_threshold) {
            return bad("sim_threshold", "must lie in [0, 1]");
        }
        if !(0.0 <= self.lower_rate && self.lower_rate < self.upper_rate && self.upper_rate <= 1.0) {
            return bad("upper_rate", "requires 0 <= lower_rate < upper_rate <= 1");
        }
        Ok(())
    }
}

/// Why a requested concept received its rating: the best offered element.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Justification {
    pub side: Side,
    pub requested_concept: String,
    /// Empty when the operation offers nothing on this side.
    pub matched_element_name: String,
    pub matched_element_kind: Option<NodeKind>,
    pub matched_annotation: Option<String>,
    pub pair_rating: f64,
    /// For the pure syntactic strategies the case records whether the raw
    /// score reached the match threshold; the rating is the raw score.
    pub match_case: MatchCase,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchResult {
    pub service_id: String,
    pub service_name: String,
    pub interface_name: String,
    pub operation_name: String,
    pub rating: f64,
    pub tier: Tier,
    pub justifications: Vec<Justification>,
}

/// Ranking order: tier, then rating descending, then identifiers ascending.
pub fn compare_results(a: &MatchResult, b: &MatchResult) -> Ordering {
    a.tier
        .rank()
        .cmp(&b.tier.rank())
        .then_with(|| b.rating.partial_cmp(&a.rating).unwrap_or(Ordering::Equal))
        .then_with(|| a.service_id.cmp(&b.service_id))
        .then_with(|| a.operation_name.cmp(&b.operation_name))
        .then_with(|| a.interface_name.cmp(&b.interface_name))
}

/// Rates operations under one configuration against one class graph.
#[derive(Debug, Clone, Copy)]
pub struct Matcher<'g> {
    graph: &'g ClassGraph,
    cfg: MatchConfig,
}

impl<'g> Matcher<'g> {
    pub fn new(graph: &'g ClassGraph, cfg: MatchConfig) -> Result<Self, MatchError> {
        cfg.validate()?;
        Ok(Matcher { graph, cfg })
    }

    pub fn config(&self) -> &MatchConfig {
        &self.cfg
    }

    fn logic_case(&self, offered: &str, requested: &str, side: Side) -> MatchCase {
        match (self.graph.relate(offered, requested), side) {
            (ClassRelation::Equivalent, _) => MatchCase::Exact,
            (ClassRelation::OfferedIsSuper, Side::Input) | (ClassRelation::OfferedIsSub, Side::Output) => {
                MatchCase::Desired
            }
            (ClassRelation::OfferedIsSuper, Side::Output) | (ClassRelation::OfferedIsSub, Side::Input) => {
                MatchCase::LessDesired
            }
            (ClassRelation::Unrelated, _) => MatchCase::Fail,
        }
    }

    fn case_rating(&self, case: MatchCase) -> f64 {
        match case {
            MatchCase::Exact | MatchCase::SynSemMatch | MatchCase::SynSynMatch => 1.0,
            MatchCase::Desired => self.cfg.upper_rate,
            MatchCase::LessDesired => self.cfg.lower_rate,
            MatchCase::Fail => 0.0,
        }
    }

    /// Subsumption-only rating of one offered annotation.
    pub fn logic_rate_pair(&self, offered: &str, requested: &str, side: Side) -> f64 {
        self.case_rating(self.logic_case(offered, requested, side))
    }

    /// Hybrid cascade for one offered element; the first step that fires wins.
    pub fn hybrid_rate_pair(
        &self,
        annotation: Option<&str>,
        name: &str,
        requested: &str,
        side: Side,
    ) -> (f64, MatchCase) {
        let requested_name = unfold(requested.trim());
        let logic = annotation.map(|a| self.logic_case(a, requested, side));
        let case = if logic == Some(MatchCase::Exact) {
            MatchCase::Exact
        } else if annotation.is_some_and(|a| self.cfg.sim.is_match(unfold(a), requested_name).0) {
            MatchCase::SynSemMatch
        } else if !name.is_empty() && self.cfg.sim.is_match(name, requested_name).0 {
            MatchCase::SynSynMatch
        } else {
            logic.unwrap_or(MatchCase::Fail)
        };
        (self.case_rating(case), case)
    }

    /// Rating of one item under the active strategy; `None` when the
    /// strategy does not look at this kind of item.
    fn rate_item(&self, item: &IndexItem, requested: &str, side: Side) -> Option<(f64, MatchCase)> {
        let requested_name = unfold(requested.trim());
        match self.cfg.strategy {
            Strategy::Logic => {
                let case = self.logic_case(item.annotation.as_deref()?, requested, side);
                Some((self.case_rating(case), case))
            }
            Strategy::SynOnSem => {
                let (hit, score) = self
                    .cfg
                    .sim
                    .is_match(unfold(item.annotation.as_deref()?), requested_name);
                Some((score, if hit { MatchCase::SynSemMatch } else { MatchCase::Fail }))
            }
            Strategy::SynOnSyn => {
                if item.element_name.is_empty() {
                    return None;
                }
                let (hit, score) = self.cfg.sim.is_match(&item.element_name, requested_name);
                Some((score, if hit { MatchCase::SynSynMatch } else { MatchCase::Fail }))
            }
            Strategy::Hybrid | Strategy::S3 => {
                Some(self.hybrid_rate_pair(item.annotation.as_deref(), &item.element_name, requested, side))
            }
        }
    }

    /// Mean over requested concepts of the best offered rating on one side.
    fn rate_side(&self, requested: &[String], offered: &[IndexItem], side: Side, out: &mut Vec<Justification>) -> f64 {
        let mut sum = 0.0;
        for concept in requested {
            let mut best: Option<(f64, MatchCase, &IndexItem)> = None;
            for item in offered {
                if let Some((rating, case)) = self.rate_item(item, concept, side) {
                    if best.is_none_or(|(b, _, _)| rating > b) {
                        best = Some((rating, case, item));
                    }
                }
            }
            let justification = match best {
                Some((rating, case, item)) => Justification {
                    side,
                    requested_concept: concept.clone(),
                    matched_element_name: item.element_name.clone(),
                    matched_element_kind: Some(item.node_kind),
                    matched_annotation: item.annotation.clone(),
                    pair_rating: rating,
                    match_case: case,
                },
                None => Justification {
                    side,
                    requested_concept: concept.clone(),
                    matched_element_name: String::new(),
                    matched_element_kind: None,
                    matched_annotation: None,
                    pair_rating: 0.0,
                    match_case: MatchCase::Fail,
                },
            };
            sum += justification.pair_rating;
            out.push(justification);
        }
        sum / requested.len() as f64
    }

    pub fn rate_operation(&self, entry: &OperationIndexEntry, query: &Query) -> Result<MatchResult, MatchError> {
        query.validate()?;
        let mut justifications = Vec::with_capacity(query.requested_inputs.len() + query.requested_outputs.len());
        let inputs = &query.requested_inputs;
        let outputs = &query.requested_outputs;

        let rating = if outputs.is_empty() {
            self.rate_side(inputs, &entry.inputs, Side::Input, &mut justifications)
        } else if inputs.is_empty() {
            self.rate_side(outputs, &entry.outputs, Side::Output, &mut justifications)
        } else {
            let w = self.cfg.weight;
            let rin = self.rate_side(inputs, &entry.inputs, Side::Input, &mut justifications);
            let rout = self.rate_side(outputs, &entry.outputs, Side::Output, &mut justifications);
            w * rin + (1.0 - w) * rout
        };

        Ok(MatchResult {
            service_id: entry.service_id.clone(),
            service_name: entry.service_name.clone(),
            interface_name: entry.interface_name.clone(),
            operation_name: entry.operation_name.clone(),
            rating: rating.clamp(0.0, 1.0),
            tier: Tier::Normal,
            justifications,
        })
    }

    fn rate_all(&self, query: &Query, entries: &[OperationIndexEntry]) -> Result<Vec<MatchResult>, MatchError> {
        query.validate()?;
        entries.iter().map(|e| self.rate_operation(e, query)).collect()
    }

    fn finish(&self, mut results: Vec<MatchResult>) -> Vec<MatchResult> {
        let threshold = self.cfg.rating_threshold;
        results.retain(|r| r.rating + RATING_EPSILON >= threshold);
        results.sort_by(compare_results);
        results
    }

    /// Ranks every operation of the collection. The S3 strategy is routed
    /// through [`Matcher::match_s3`].
    pub fn match_operations(
        &self,
        query: &Query,
        entries: &[OperationIndexEntry],
    ) -> Result<Vec<MatchResult>, MatchError> {
        if self.cfg.strategy == Strategy::S3 {
            return self.match_s3(query, entries);
        }
        Ok(self.finish(self.rate_all(query, entries)?))
    }

    /// Hybrid ranking with a name pre-pass: operations whose service name or
    /// operation name matches the query name form a tier above the rest.
    /// Without a query name this is plain hybrid ranking.
    pub fn match_s3(&self, query: &Query, entries: &[OperationIndexEntry]) -> Result<Vec<MatchResult>, MatchError> {
        let hybrid = Matcher {
            graph: self.graph,
            cfg: MatchConfig {
                strategy: Strategy::Hybrid,
                ..self.cfg
            },
        };
        let mut results = hybrid.rate_all(query, entries)?;
        match query.query_name.as_deref().map(str::trim).filter(|n| !n.is_empty()) {
            Some(name) => {
                for r in &mut results {
                    let sim = &self.cfg.sim;
                    if sim.is_match(name, &r.service_name).0 || sim.is_match(name, &r.operation_name).0 {
                        r.tier = Tier::NameMatch;
                    }
                }
            }
            None => log::warn!("S3 strategy without a query name; falling back to hybrid ranking"),
        }
        Ok(self.finish(results))
    }
}
