//! Per-operation search units built from parsed service descriptions.

use serde::{Deserialize, Serialize};

use crate::sawsdl::{ElementTree, NodeKind, Operation, ServiceDescription};
use crate::similarity::unfold;

/// One offered element seen on an input or output side: its name, kind and
/// at most one annotation. Nodes with several annotations yield one item
/// per annotation.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct IndexItem {
    pub annotation: Option<String>,
    pub element_name: String,
    pub node_kind: NodeKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OperationIndexEntry {
    pub service_id: String,
    pub service_name: String,
    pub interface_name: String,
    pub operation_name: String,
    pub inputs: Vec<IndexItem>,
    pub outputs: Vec<IndexItem>,
}

impl OperationIndexEntry {
    /// Offered annotations on one side, in DFS order.
    pub fn annotations(items: &[IndexItem]) -> impl Iterator<Item = &str> {
        items.iter().filter_map(|i| i.annotation.as_deref())
    }
}

fn side_items(tree: &ElementTree, op: &Operation) -> Vec<IndexItem> {
    let mut items: Vec<IndexItem> = Vec::new();
    let mut push = |item: IndexItem| {
        if !items.contains(&item) {
            items.push(item);
        }
    };
    for iri in &op.annotations {
        push(IndexItem {
            annotation: None,
            element_name: unfold(iri).to_string(),
            node_kind: NodeKind::Operation,
        });
    }
    for node in &tree.nodes {
        if node.annotations.is_empty() {
            if !node.local_name.is_empty() {
                push(IndexItem {
                    annotation: None,
                    element_name: node.local_name.clone(),
                    node_kind: node.node_kind,
                });
            }
        } else {
            for iri in &node.annotations {
                push(IndexItem {
                    annotation: Some(iri.trim().to_string()),
                    element_name: node.local_name.clone(),
                    node_kind: node.node_kind,
                });
            }
        }
    }
    items.retain(|i| i.annotation.is_some() || !i.element_name.is_empty());
    items
}

/// One entry per operation, in document order. `service_id` defaults to the
/// description's `source_id`.
pub fn index_service(service: &ServiceDescription, service_id: Option<&str>) -> Vec<OperationIndexEntry> {
    let service_id = service_id.unwrap_or(&service.source_id);
    service
        .operations()
        .map(|(iface, op)| OperationIndexEntry {
            service_id: service_id.to_string(),
            service_name: service.service_name.clone(),
            interface_name: iface.name.clone(),
            operation_name: op.name.clone(),
            inputs: side_items(&op.input_tree, op),
            outputs: side_items(&op.output_tree, op),
        })
        .collect()
}
