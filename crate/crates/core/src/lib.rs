//! Semantic web service matchmaking over SAWSDL descriptions.
//!
//! The pipeline is: [`sawsdl`] parses service documents, [`index`] flattens
//! each operation into a search unit, [`ontology`] answers subsumption
//! questions between annotation classes, [`similarity`] compares names, and
//! [`matching`] rates and ranks operations for a concept query.
//! [`evaluation`] scores rankings against graded relevance judgments.

pub mod evaluation;
pub mod index;
pub mod matching;
pub mod ontology;
pub mod sawsdl;
pub mod similarity;

pub use index::{index_service, IndexItem, OperationIndexEntry};
pub use matching::{
    Justification, MatchCase, MatchConfig, MatchError, MatchResult, Matcher, Query, Side, Strategy, Tier,
};
pub use ontology::{load_ontology, Axioms, ClassGraph, ClassRelation, OntologyError};
pub use sawsdl::{extract_io, parse_document, NodeKind, ParseError, ServiceDescription};
pub use similarity::{SimAlgorithm, SimKind};
