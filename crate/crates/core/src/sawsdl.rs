//! WSDL 1.1 / 2.0 parsing with SAWSDL `modelReference` extraction.
//!
//! Every operation's input and output is walked depth-first, from the
//! `input`/`output` node through messages and parts down to schema elements
//! and types, collecting element names and annotation IRIs on the way.

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use roxmltree::{Document, Node, ParsingOptions};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::similarity::unfold;

pub const SAWSDL_NS: &str = "http://www.w3.org/ns/sawsdl";
pub const XSD_NS: &str = "http://www.w3.org/2001/XMLSchema";

#[derive(Debug, Error)]
pub enum ParseError {
    #[error("malformed XML: {0}")]
    Xml(String),
    #[error("document declares no interface or portType with operations")]
    EmptyService,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum NodeKind {
    /// Annotations carried by the operation element itself.
    Operation,
    Input,
    Output,
    Message,
    Part,
    Element,
    ComplexType,
    SimpleType,
}

impl NodeKind {
    pub fn as_str(self) -> &'static str {
        match self {
            NodeKind::Operation => "operation",
            NodeKind::Input => "input",
            NodeKind::Output => "output",
            NodeKind::Message => "message",
            NodeKind::Part => "part",
            NodeKind::Element => "element",
            NodeKind::ComplexType => "complexType",
            NodeKind::SimpleType => "simpleType",
        }
    }
}

impl fmt::Display for NodeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ElementNode {
    pub local_name: String,
    pub node_kind: NodeKind,
    pub annotations: Vec<String>,
    /// Nesting depth below the input/output node. Kept for display only.
    pub depth: usize,
}

/// Nodes of one input or output side, in DFS pre-order.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ElementTree {
    pub nodes: Vec<ElementNode>,
}

impl ElementTree {
    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Operation {
    pub name: String,
    /// `modelReference` values found on the operation element.
    pub annotations: Vec<String>,
    pub input_tree: ElementTree,
    pub output_tree: ElementTree,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Interface {
    pub name: String,
    pub operations: Vec<Operation>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ServiceDescription {
    pub source_id: String,
    pub service_name: String,
    pub interfaces: Vec<Interface>,
    /// Non-fatal irregularities such as dangling type references.
    pub warnings: Vec<String>,
}

impl ServiceDescription {
    pub fn operations(&self) -> impl Iterator<Item = (&Interface, &Operation)> {
        self.interfaces
            .iter()
            .flat_map(|i| i.operations.iter().map(move |op| (i, op)))
    }
}

/// Flattened view of one operation used by the matching strategies.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct IoSets {
    pub input_annotations: BTreeSet<String>,
    pub output_annotations: BTreeSet<String>,
    pub input_names: BTreeSet<String>,
    pub output_names: BTreeSet<String>,
}

/// Unions annotations and names over each side, dropping depth.
///
/// Annotations on the operation element are unfolded and added to both name
/// sets, but to neither annotation set.
pub fn extract_io(op: &Operation) -> IoSets {
    fn collect(tree: &ElementTree, annotations: &mut BTreeSet<String>, names: &mut BTreeSet<String>) {
        for node in &tree.nodes {
            annotations.extend(node.annotations.iter().cloned());
            if !node.local_name.is_empty() {
                names.insert(node.local_name.clone());
            }
        }
    }

    let mut sets = IoSets::default();
    collect(&op.input_tree, &mut sets.input_annotations, &mut sets.input_names);
    collect(&op.output_tree, &mut sets.output_annotations, &mut sets.output_names);
    for iri in &op.annotations {
        let name = unfold(iri);
        if !name.is_empty() {
            sets.input_names.insert(name.to_string());
            sets.output_names.insert(name.to_string());
        }
    }
    sets
}

/// Splits a `modelReference` attribute value into absolute IRIs.
fn split_model_reference(value: &str, warnings: &mut Vec<String>) -> Vec<String> {
    value
        .split_whitespace()
        .filter_map(|tok| {
            if tok.contains(':') {
                Some(tok.to_string())
            } else {
                warnings.push(format!("ignoring non-absolute modelReference `{tok}`"));
                None
            }
        })
        .collect()
}

fn local_part(qname: &str) -> &str {
    qname.rsplit(':').next().unwrap_or(qname)
}

fn is_xsd_builtin(node: Node, qname: &str) -> bool {
    match qname.split_once(':') {
        Some((prefix, _)) => node.lookup_namespace_uri(Some(prefix)) == Some(XSD_NS),
        None => node.lookup_namespace_uri(None) == Some(XSD_NS),
    }
}

struct SchemaIndex<'a, 'input> {
    elements: HashMap<&'a str, Node<'a, 'input>>,
    complex_types: HashMap<&'a str, Node<'a, 'input>>,
    simple_types: HashMap<&'a str, Node<'a, 'input>>,
    messages: HashMap<&'a str, Node<'a, 'input>>,
}

impl<'a, 'input> SchemaIndex<'a, 'input> {
    fn build(root: Node<'a, 'input>) -> Self {
        let mut idx = SchemaIndex {
            elements: HashMap::new(),
            complex_types: HashMap::new(),
            simple_types: HashMap::new(),
            messages: HashMap::new(),
        };
        for child in root.children().filter(Node::is_element) {
            match child.tag_name().name() {
                "message" => {
                    if let Some(name) = child.attribute("name") {
                        idx.messages.entry(name).or_insert(child);
                    }
                }
                "types" => {
                    for schema in child.children().filter(|n| n.tag_name().name() == "schema") {
                        for decl in schema.children().filter(Node::is_element) {
                            let Some(name) = decl.attribute("name") else { continue };
                            let table = match decl.tag_name().name() {
                                "element" => &mut idx.elements,
                                "complexType" => &mut idx.complex_types,
                                "simpleType" => &mut idx.simple_types,
                                _ => continue,
                            };
                            table.entry(name).or_insert(decl);
                        }
                    }
                }
                _ => {}
            }
        }
        idx
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum DeclKind {
    Element,
    Type,
}

struct Walker<'a, 'input, 'w> {
    schema: &'w SchemaIndex<'a, 'input>,
    warnings: &'w mut Vec<String>,
    nodes: Vec<ElementNode>,
    /// Named declarations currently on the DFS stack, to cut recursive schemas.
    active: Vec<(DeclKind, &'a str)>,
}

impl<'a, 'input, 'w> Walker<'a, 'input, 'w> {
    fn push(&mut self, node: Node, local_name: &str, kind: NodeKind, depth: usize) {
        let annotations = node
            .attributes()
            .filter(|a| a.name() == "modelReference")
            .flat_map(|a| split_model_reference(a.value(), self.warnings))
            .collect();
        self.nodes.push(ElementNode {
            local_name: local_name.to_string(),
            node_kind: kind,
            annotations,
            depth,
        });
    }

    fn message(&mut self, qname: &'a str, depth: usize) {
        let name = local_part(qname);
        let Some(&msg) = self.schema.messages.get(name) else {
            self.warnings.push(format!("dangling message reference `{qname}`"));
            return;
        };
        self.push(msg, name, NodeKind::Message, depth);
        for part in msg.children().filter(|n| n.tag_name().name() == "part") {
            let part_name = part.attribute("name").unwrap_or_default();
            self.push(part, part_name, NodeKind::Part, depth + 1);
            if let Some(el) = part.attribute("element") {
                self.element_ref(part, el, depth + 2);
            } else if let Some(ty) = part.attribute("type") {
                self.type_ref(part, ty, depth + 2);
            }
        }
    }

    fn element_ref(&mut self, ctx: Node, qname: &'a str, depth: usize) {
        if is_xsd_builtin(ctx, qname) {
            return;
        }
        let name = local_part(qname);
        if self.active.contains(&(DeclKind::Element, name)) {
            return;
        }
        match self.schema.elements.get(name) {
            Some(&el) => {
                self.active.push((DeclKind::Element, name));
                self.element(el, depth);
                self.active.pop();
            }
            None => self.warnings.push(format!("dangling element reference `{qname}`")),
        }
    }

    fn type_ref(&mut self, ctx: Node, qname: &'a str, depth: usize) {
        if is_xsd_builtin(ctx, qname) {
            return;
        }
        let name = local_part(qname);
        if self.active.contains(&(DeclKind::Type, name)) {
            return;
        }
        let found = self
            .schema
            .complex_types
            .get(name)
            .or_else(|| self.schema.simple_types.get(name))
            .copied();
        match found {
            Some(ty) => {
                self.active.push((DeclKind::Type, name));
                self.schema_type(ty, depth);
                self.active.pop();
            }
            None => self.warnings.push(format!("dangling type reference `{qname}`")),
        }
    }

    fn element(&mut self, el: Node<'a, 'input>, depth: usize) {
        if let Some(r) = el.attribute("ref") {
            // a reference is represented by the referenced declaration, but
            // annotations on the referencing node still count
            self.push(el, local_part(r), NodeKind::Element, depth);
            self.element_ref(el, r, depth + 1);
            return;
        }
        self.push(el, el.attribute("name").unwrap_or_default(), NodeKind::Element, depth);
        if let Some(ty) = el.attribute("type") {
            self.type_ref(el, ty, depth + 1);
        }
        for child in el.children().filter(Node::is_element) {
            if matches!(child.tag_name().name(), "complexType" | "simpleType") {
                self.schema_type(child, depth + 1);
            }
        }
    }

    fn schema_type(&mut self, ty: Node<'a, 'input>, depth: usize) {
        let kind = if ty.tag_name().name() == "simpleType" {
            NodeKind::SimpleType
        } else {
            NodeKind::ComplexType
        };
        self.push(ty, ty.attribute("name").unwrap_or_default(), kind, depth);
        self.content(ty, depth + 1);
    }

    /// Walks model groups and derivations below a type definition.
    fn content(&mut self, parent: Node<'a, 'input>, depth: usize) {
        for child in parent.children().filter(Node::is_element) {
            match child.tag_name().name() {
                "element" => self.element(child, depth),
                "complexType" | "simpleType" => self.schema_type(child, depth),
                "sequence" | "all" | "choice" | "group" | "complexContent" | "simpleContent" => {
                    self.content(child, depth)
                }
                "extension" | "restriction" => {
                    if let Some(base) = child.attribute("base") {
                        self.type_ref(child, base, depth);
                    }
                    self.content(child, depth);
                }
                "list" => {
                    if let Some(item) = child.attribute("itemType") {
                        self.type_ref(child, item, depth);
                    }
                    self.content(child, depth);
                }
                _ => {}
            }
        }
    }

    /// One `input` or `output` node of an operation.
    fn io(&mut self, io: Node<'a, 'input>, kind: NodeKind) {
        self.push(io, io.attribute("name").unwrap_or_default(), kind, 0);
        if let Some(msg) = io.attribute("message") {
            self.message(msg, 1);
        } else if let Some(el) = io.attribute("element") {
            // WSDL 2.0 references the schema element directly
            if !el.starts_with('#') {
                self.element_ref(io, el, 1);
            }
        }
    }
}

fn operation_tree<'a, 'input>(
    op: Node<'a, 'input>,
    tag: &str,
    kind: NodeKind,
    schema: &SchemaIndex<'a, 'input>,
    warnings: &mut Vec<String>,
) -> ElementTree {
    let mut walker = Walker {
        schema,
        warnings,
        nodes: Vec::new(),
        active: Vec::new(),
    };
    for io in op.children().filter(|n| n.is_element() && n.tag_name().name() == tag) {
        walker.io(io, kind);
    }
    ElementTree { nodes: walker.nodes }
}

/// Parses a WSDL 1.1 or 2.0 document into its interfaces and operations.
pub fn parse_document(source_id: &str, bytes: &[u8]) -> Result<ServiceDescription, ParseError> {
    let text = std::str::from_utf8(bytes).map_err(|e| ParseError::Xml(e.to_string()))?;
    let text = text.strip_prefix('\u{feff}').unwrap_or(text);
    let opts = ParsingOptions {
        allow_dtd: true,
        ..ParsingOptions::default()
    };
    let doc = Document::parse_with_options(text, opts).map_err(|e| ParseError::Xml(e.to_string()))?;
    let root = doc.root_element();
    let schema = SchemaIndex::build(root);
    let mut warnings = Vec::new();

    let mut interfaces = Vec::new();
    for iface in root
        .children()
        .filter(|n| matches!(n.tag_name().name(), "portType" | "interface"))
    {
        let mut operations: Vec<Operation> = Vec::new();
        for op in iface.children().filter(|n| n.tag_name().name() == "operation") {
            let name = op.attribute("name").unwrap_or_default().to_string();
            if operations.iter().any(|o| o.name == name) {
                warnings.push(format!("duplicate operation `{name}` skipped"));
                continue;
            }
            let annotations = op
                .attributes()
                .filter(|a| a.name() == "modelReference")
                .flat_map(|a| split_model_reference(a.value(), &mut warnings))
                .collect();
            let input_tree = operation_tree(op, "input", NodeKind::Input, &schema, &mut warnings);
            let output_tree = operation_tree(op, "output", NodeKind::Output, &schema, &mut warnings);
            operations.push(Operation {
                name,
                annotations,
                input_tree,
                output_tree,
            });
        }
        if !operations.is_empty() {
            interfaces.push(Interface {
                name: iface.attribute("name").unwrap_or_default().to_string(),
                operations,
            });
        }
    }
    if interfaces.is_empty() {
        return Err(ParseError::EmptyService);
    }

    let service_name = root
        .children()
        .find(|n| n.tag_name().name() == "service")
        .and_then(|s| s.attribute("name"))
        .or_else(|| root.attribute("name"))
        .map(str::to_string)
        .unwrap_or_else(|| file_stem(source_id).to_string());

    Ok(ServiceDescription {
        source_id: source_id.to_string(),
        service_name,
        interfaces,
        warnings,
    })
}

fn file_stem(source_id: &str) -> &str {
    let name = source_id.rsplit(['/', '\\']).next().unwrap_or(source_id);
    name.rsplit_once('.').map_or(name, |(stem, _)| stem)
}
