//! OWL/RDFS class hierarchies and subsumption queries.
//!
//! Only named-class axioms are read: class declarations, `rdfs:subClassOf`
//! and `owl:equivalentClass`. Equivalence groups (including subclass cycles)
//! are collapsed and the strict subsumption closure is precomputed, so
//! [`ClassGraph::relate`] is a couple of lookups.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use fixedbitset::FixedBitSet;
use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;
use roxmltree::{Document, Node, ParsingOptions};
use serde::{Deserialize, Serialize};
use thiserror::Error;
use url::Url;

pub const RDF_NS: &str = "http://www.w3.org/1999/02/22-rdf-syntax-ns#";
pub const RDFS_NS: &str = "http://www.w3.org/2000/01/rdf-schema#";
pub const OWL_NS: &str = "http://www.w3.org/2002/07/owl#";

#[derive(Debug, Error)]
pub enum OntologyError {
    #[error("malformed XML: {0}")]
    Xml(String),
    #[error("ontology declares no classes")]
    EmptyOntology,
}

/// Named-class axioms asserted by one or more ontology documents.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Axioms {
    pub classes: BTreeSet<String>,
    /// `(sub, super)` pairs.
    pub sub_class_of: BTreeSet<(String, String)>,
    pub equivalent: BTreeSet<(String, String)>,
}

impl Axioms {
    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    pub fn union(&mut self, other: &Axioms) {
        self.classes.extend(other.classes.iter().cloned());
        self.sub_class_of.extend(other.sub_class_of.iter().cloned());
        self.equivalent.extend(other.equivalent.iter().cloned());
    }

    fn declare(&mut self, iri: &str) {
        if !self.classes.contains(iri) {
            self.classes.insert(iri.to_string());
        }
    }
}

/// Top classes every named class trivially falls under; edges to them carry
/// no information and are dropped.
fn is_universal(iri: &str) -> bool {
    iri == "http://www.w3.org/2002/07/owl#Thing" || iri == "http://www.w3.org/2000/01/rdf-schema#Resource"
}

struct RdfReader<'d> {
    base: Option<Url>,
    raw_base: &'d str,
}

impl RdfReader<'_> {
    /// Absolute IRIs are kept verbatim; annotation strings are compared
    /// byte-for-byte, so no normalisation may happen here.
    fn resolve(&self, reference: &str) -> String {
        let reference = reference.trim();
        if has_scheme(reference) {
            return reference.to_string();
        }
        let base = self.raw_base.split('#').next().unwrap_or(self.raw_base);
        if let Some(frag) = reference.strip_prefix('#') {
            return format!("{base}#{frag}");
        }
        match self.base.as_ref().and_then(|b| b.join(reference).ok()) {
            Some(u) => u.to_string(),
            None => format!("{base}{reference}"),
        }
    }

    fn subject(&self, node: Node) -> Option<String> {
        if let Some(about) = node.attribute((RDF_NS, "about")) {
            Some(self.resolve(about))
        } else {
            node.attribute((RDF_NS, "ID")).map(|id| self.resolve(&format!("#{id}")))
        }
    }

    /// Named class on the object side of a property element, if any.
    fn object(&self, prop: Node) -> Option<String> {
        if let Some(res) = prop.attribute((RDF_NS, "resource")) {
            return Some(self.resolve(res));
        }
        let inner = prop.children().find(Node::is_element)?;
        if is_class_node(inner) {
            // nested named class; anonymous class expressions are skipped
            return self.subject(inner);
        }
        None
    }
}

fn has_scheme(reference: &str) -> bool {
    match reference.split_once(':') {
        Some((scheme, _)) => {
            let mut chars = scheme.chars();
            chars.next().is_some_and(|c| c.is_ascii_alphabetic())
                && chars.all(|c| c.is_ascii_alphanumeric() || matches!(c, '+' | '-' | '.'))
        }
        None => false,
    }
}

fn is_class_node(node: Node) -> bool {
    let tag = node.tag_name();
    match (tag.namespace(), tag.name()) {
        (Some(OWL_NS), "Class") | (Some(RDFS_NS), "Class") => true,
        (Some(RDF_NS), "Description") => node.children().any(|c| {
            c.tag_name().namespace() == Some(RDF_NS)
                && c.tag_name().name() == "type"
                && c.attribute((RDF_NS, "resource")).is_some_and(|t| {
                    t == "http://www.w3.org/2002/07/owl#Class" || t == "http://www.w3.org/2000/01/rdf-schema#Class"
                })
        }),
        _ => false,
    }
}

/// Reads class declarations and named subclass/equivalence axioms from an
/// RDF/XML document.
///
/// `fallback_base` resolves `rdf:ID` and relative references when the
/// document carries no `xml:base`.
pub fn load_ontology(bytes: &[u8], fallback_base: &str) -> Result<Axioms, OntologyError> {
    let text = std::str::from_utf8(bytes).map_err(|e| OntologyError::Xml(e.to_string()))?;
    let text = text.strip_prefix('\u{feff}').unwrap_or(text);
    let opts = ParsingOptions {
        allow_dtd: true,
        ..ParsingOptions::default()
    };
    let doc = Document::parse_with_options(text, opts).map_err(|e| OntologyError::Xml(e.to_string()))?;
    let root = doc.root_element();

    let raw_base = root
        .attribute(("http://www.w3.org/XML/1998/namespace", "base"))
        .unwrap_or(fallback_base);
    let reader = RdfReader {
        base: Url::parse(raw_base).ok(),
        raw_base,
    };

    let mut axioms = Axioms::default();
    for node in root.descendants().filter(|n| is_class_node(*n)) {
        let Some(class) = reader.subject(node) else { continue };
        if is_universal(&class) {
            continue;
        }
        axioms.declare(&class);
        for prop in node.children().filter(Node::is_element) {
            let tag = prop.tag_name();
            let is_sub = tag.namespace() == Some(RDFS_NS) && tag.name() == "subClassOf";
            let is_eq = tag.namespace() == Some(OWL_NS) && tag.name() == "equivalentClass";
            if !(is_sub || is_eq) {
                continue;
            }
            let Some(object) = reader.object(prop) else { continue };
            if is_universal(&object) || object == class {
                continue;
            }
            axioms.declare(&object);
            if is_sub {
                axioms.sub_class_of.insert((class.clone(), object));
            } else {
                axioms.equivalent.insert((class.clone(), object));
            }
        }
    }

    if axioms.is_empty() {
        return Err(OntologyError::EmptyOntology);
    }
    Ok(axioms)
}

/// How an offered class stands to a requested one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ClassRelation {
    Equivalent,
    /// The offered class strictly subsumes the requested class.
    OfferedIsSuper,
    /// The offered class is strictly subsumed by the requested class.
    OfferedIsSub,
    Unrelated,
}

impl ClassRelation {
    pub fn swapped(self) -> Self {
        match self {
            ClassRelation::OfferedIsSuper => ClassRelation::OfferedIsSub,
            ClassRelation::OfferedIsSub => ClassRelation::OfferedIsSuper,
            other => other,
        }
    }
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

fn union(parent: &mut [usize], a: usize, b: usize) {
    let (ra, rb) = (find(parent, a), find(parent, b));
    if ra != rb {
        parent[ra.max(rb)] = ra.min(rb);
    }
}

/// Merged class hierarchy with precomputed subsumption.
#[derive(Debug, Clone, Default)]
pub struct ClassGraph {
    axioms: Axioms,
    /// Class IRI -> equivalence group.
    group_of: HashMap<String, usize>,
    groups: Vec<Vec<String>>,
    /// `supers[g]` holds every group strictly above `g`.
    supers: Vec<FixedBitSet>,
}

impl ClassGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_axioms(axioms: Axioms) -> Self {
        let mut graph = ClassGraph {
            axioms,
            ..Default::default()
        };
        graph.rebuild();
        graph
    }

    /// Returns a new graph holding the union of both axiom sets.
    pub fn merge(&self, axioms: &Axioms) -> ClassGraph {
        let mut merged = self.axioms.clone();
        merged.union(axioms);
        if merged == self.axioms {
            return self.clone();
        }
        ClassGraph::from_axioms(merged)
    }

    pub fn axioms(&self) -> &Axioms {
        &self.axioms
    }

    pub fn class_count(&self) -> usize {
        self.group_of.len()
    }

    pub fn contains(&self, iri: &str) -> bool {
        self.group_of.contains_key(iri.trim())
    }

    /// Classes equivalent to `iri`, including itself.
    pub fn equivalents(&self, iri: &str) -> &[String] {
        self.group_of
            .get(iri.trim())
            .map(|&g| self.groups[g].as_slice())
            .unwrap_or(&[])
    }

    fn rebuild(&mut self) {
        let classes: Vec<&String> = self.axioms.classes.iter().collect();
        let index: HashMap<&str, usize> = classes.iter().enumerate().map(|(i, c)| (c.as_str(), i)).collect();
        let n = classes.len();

        let mut parent: Vec<usize> = (0..n).collect();
        for (a, b) in &self.axioms.equivalent {
            union(&mut parent, index[a.as_str()], index[b.as_str()]);
        }

        // subclass cycles mean mutual subsumption: fold them into equivalence
        let mut g = DiGraph::<(), ()>::with_capacity(n, self.axioms.sub_class_of.len());
        let nodes: Vec<_> = (0..n).map(|_| g.add_node(())).collect();
        for (sub, sup) in &self.axioms.sub_class_of {
            let (s, p) = (
                find(&mut parent, index[sub.as_str()]),
                find(&mut parent, index[sup.as_str()]),
            );
            if s != p {
                g.update_edge(nodes[s], nodes[p], ());
            }
        }
        for scc in tarjan_scc(&g) {
            for w in scc.windows(2) {
                union(&mut parent, w[0].index(), w[1].index());
            }
        }

        let mut root_to_group = BTreeMap::new();
        let mut group_of_class = vec![0; n];
        for (i, slot) in group_of_class.iter_mut().enumerate() {
            let root = find(&mut parent, i);
            let next = root_to_group.len();
            *slot = *root_to_group.entry(root).or_insert(next);
        }
        let group_count = root_to_group.len();

        let mut groups = vec![Vec::new(); group_count];
        for (i, c) in classes.iter().enumerate() {
            groups[group_of_class[i]].push((*c).clone());
        }

        let mut direct: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); group_count];
        for (sub, sup) in &self.axioms.sub_class_of {
            let (s, p) = (group_of_class[index[sub.as_str()]], group_of_class[index[sup.as_str()]]);
            if s != p {
                direct[s].insert(p);
            }
        }

        // the group graph is acyclic now; memoised DFS gives the closure
        let mut supers: Vec<Option<FixedBitSet>> = vec![None; group_count];
        for start in 0..group_count {
            if supers[start].is_some() {
                continue;
            }
            let mut stack = vec![(start, false)];
            while let Some((g, expanded)) = stack.pop() {
                if supers[g].is_some() {
                    continue;
                }
                if expanded {
                    let mut set = FixedBitSet::with_capacity(group_count);
                    for &p in &direct[g] {
                        set.insert(p);
                        set.union_with(supers[p].as_ref().expect("parent closed before child"));
                    }
                    supers[g] = Some(set);
                } else {
                    stack.push((g, true));
                    stack.extend(direct[g].iter().filter(|p| supers[**p].is_none()).map(|&p| (p, false)));
                }
            }
        }

        self.group_of = classes
            .iter()
            .enumerate()
            .map(|(i, c)| ((*c).clone(), group_of_class[i]))
            .collect();
        self.groups = groups;
        self.supers = supers.into_iter().map(|s| s.expect("every group closed")).collect();
    }

    /// Relation of `offered` to `requested`. Unknown IRIs are unrelated to
    /// everything except themselves.
    pub fn relate(&self, offered: &str, requested: &str) -> ClassRelation {
        let (offered, requested) = (offered.trim(), requested.trim());
        if offered == requested {
            return ClassRelation::Equivalent;
        }
        let (Some(&o), Some(&r)) = (self.group_of.get(offered), self.group_of.get(requested)) else {
            return ClassRelation::Unrelated;
        };
        if o == r {
            ClassRelation::Equivalent
        } else if self.supers[r].contains(o) {
            ClassRelation::OfferedIsSuper
        } else if self.supers[o].contains(r) {
            ClassRelation::OfferedIsSub
        } else {
            ClassRelation::Unrelated
        }
    }
}

/// One node of a browsable class hierarchy.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassTreeNode {
    pub iri: String,
    pub name: String,
    pub children: Vec<ClassTreeNode>,
}

/// Nests the classes of one ontology under their asserted direct supers.
/// Classes with several supers appear under each of them.
pub fn class_tree(axioms: &Axioms) -> Vec<ClassTreeNode> {
    let mut children: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    let mut has_parent = BTreeSet::new();
    for (sub, sup) in &axioms.sub_class_of {
        children.entry(sup.as_str()).or_default().push(sub.as_str());
        has_parent.insert(sub.as_str());
    }

    fn build<'a>(iri: &'a str, children: &BTreeMap<&str, Vec<&'a str>>, path: &mut Vec<&'a str>) -> ClassTreeNode {
        path.push(iri);
        let mut kids = Vec::new();
        for &k in children.get(iri).map(Vec::as_slice).unwrap_or_default() {
            if !path.contains(&k) {
                kids.push(build(k, children, path));
            }
        }
        path.pop();
        ClassTreeNode {
            iri: iri.to_string(),
            name: crate::similarity::unfold(iri).to_string(),
            children: kids,
        }
    }

    let mut roots: Vec<&str> = axioms
        .classes
        .iter()
        .map(String::as_str)
        .filter(|c| !has_parent.contains(c))
        .collect();
    if roots.is_empty() {
        // pure cycle: show everything flat rather than nothing
        roots = axioms.classes.iter().map(String::as_str).collect();
    }
    roots
        .into_iter()
        .map(|r| build(r, &children, &mut Vec::new()))
        .collect()
}
