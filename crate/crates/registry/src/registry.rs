use std::collections::HashMap;
use std::path::Path;
use std::sync::{Arc, Mutex, RwLock};
use std::time::SystemTime;

use arc_swap::ArcSwap;
use sawmatch_core::ontology::{class_tree, ClassTreeNode};
use sawmatch_core::{
    index_service, load_ontology, parse_document, ClassGraph, MatchConfig, MatchResult, Matcher, OperationIndexEntry,
    Query, ServiceDescription,
};
use sha2::{Digest, Sha256};

use crate::error::RegistryError;
use crate::store::{Collection, OntologyRecord, OperationRef, ServiceRecord, Store};

fn now() -> String {
    humantime::format_rfc3339_seconds(SystemTime::now()).to_string()
}

fn digest(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

/// Fallback base for ontologies that carry no `xml:base`.
pub fn ontology_base(source: &str) -> String {
    if source.contains("://") {
        source.to_string()
    } else {
        format!("http://localhost/ontology/{source}")
    }
}

/// Collections, services and ontologies, with immutable snapshots of the
/// class graph and the per-collection operation index for matching.
///
/// Writers to the same collection are serialized; matching reads whichever
/// snapshot was current when it started.
pub struct Registry {
    store: Store,
    graph: ArcSwap<ClassGraph>,
    indexes: RwLock<HashMap<String, Arc<Vec<OperationIndexEntry>>>>,
    collection_locks: Mutex<HashMap<String, Arc<Mutex<()>>>>,
    ontology_lock: Mutex<()>,
}

impl Registry {
    /// Opens (or creates) a registry under `dir` and loads its snapshots.
    pub fn open(dir: &Path) -> Result<Self, RegistryError> {
        let store = Store::open(dir)?;

        let mut axioms = sawmatch_core::Axioms::default();
        for o in store.ontologies()? {
            if let Some(ax) = store.ontology_axioms(&o.id)? {
                axioms.union(&ax);
            }
        }

        let mut indexes = HashMap::new();
        for c in store.collections()? {
            let mut entries = Vec::new();
            for sid in &c.services {
                entries.extend(store.service_entries(sid)?.unwrap_or_default());
            }
            indexes.insert(c.id.clone(), Arc::new(entries));
        }
        log::info!(
            "opened registry at {} ({} collections, {} classes)",
            dir.display(),
            indexes.len(),
            axioms.classes.len()
        );

        Ok(Registry {
            store,
            graph: ArcSwap::from_pointee(ClassGraph::from_axioms(axioms)),
            indexes: RwLock::new(indexes),
            collection_locks: Mutex::new(HashMap::new()),
            ontology_lock: Mutex::new(()),
        })
    }

    fn collection_lock(&self, id: &str) -> Arc<Mutex<()>> {
        self.collection_locks
            .lock()
            .unwrap()
            .entry(id.to_string())
            .or_default()
            .clone()
    }

    pub fn create_collection(
        &self,
        name: &str,
        description: &str,
        uploader: &str,
    ) -> Result<Collection, RegistryError> {
        let name = name.trim();
        if name.is_empty() {
            return Err(RegistryError::validation("name", "collection name must not be empty"));
        }
        let c = Collection {
            id: uuid::Uuid::new_v4().to_string(),
            name: name.to_string(),
            description: description.to_string(),
            uploader: uploader.to_string(),
            created: now(),
            services: Vec::new(),
        };
        self.store.put_collection(&c)?;
        self.indexes.write().unwrap().insert(c.id.clone(), Arc::new(Vec::new()));
        Ok(c)
    }

    /// All collections, oldest first.
    pub fn collections(&self) -> Result<Vec<Collection>, RegistryError> {
        let mut all = self.store.collections()?;
        all.sort_by(|a, b| (&a.created, &a.name, &a.id).cmp(&(&b.created, &b.name, &b.id)));
        Ok(all)
    }

    pub fn collection(&self, id: &str) -> Result<Collection, RegistryError> {
        self.store
            .collection(id)?
            .ok_or_else(|| RegistryError::not_found("collection", id))
    }

    /// Services of a collection in upload order.
    pub fn services_in(&self, collection_id: &str) -> Result<Vec<ServiceRecord>, RegistryError> {
        let c = self.collection(collection_id)?;
        c.services.iter().map(|sid| self.service(sid)).collect()
    }

    /// Parses, indexes and stores a service document. Identical bytes
    /// already present in the collection are rejected.
    pub fn add_service(&self, collection_id: &str, source: &str, bytes: &[u8]) -> Result<ServiceRecord, RegistryError> {
        let lock = self.collection_lock(collection_id);
        let _guard = lock.lock().unwrap();

        let mut collection = self.collection(collection_id)?;
        let digest = digest(bytes);
        for sid in &collection.services {
            if self.service(sid)?.digest == digest {
                return Err(RegistryError::Duplicate(format!(
                    "identical document already stored in this collection as service {sid}"
                )));
            }
        }

        let desc = parse_document(source, bytes).map_err(|e| RegistryError::Unparsable {
            source_id: source.to_string(),
            message: e.to_string(),
        })?;
        let id = uuid::Uuid::new_v4().to_string();
        let entries = index_service(&desc, Some(&id));
        let record = ServiceRecord {
            id: id.clone(),
            collection_id: collection_id.to_string(),
            source: source.to_string(),
            service_name: desc.service_name.clone(),
            digest,
            size: bytes.len() as u64,
            uploaded: now(),
            operations: desc
                .operations()
                .map(|(i, o)| OperationRef {
                    interface: i.name.clone(),
                    operation: o.name.clone(),
                })
                .collect(),
            warnings: desc.warnings.clone(),
        };
        collection.services.push(id.clone());

        self.store.write_document(&id, bytes)?;
        if let Err(e) = self.store.put_service(&collection, &record, &entries) {
            self.store.remove_document(&id);
            return Err(e);
        }

        let mut indexes = self.indexes.write().unwrap();
        let mut next = indexes
            .get(collection_id)
            .map(|v| v.as_ref().clone())
            .unwrap_or_default();
        next.extend(entries);
        indexes.insert(collection_id.to_string(), Arc::new(next));
        log::info!(
            "stored service {id} ({}) in collection {collection_id}",
            record.service_name
        );
        Ok(record)
    }

    pub fn service(&self, id: &str) -> Result<ServiceRecord, RegistryError> {
        self.store
            .service(id)?
            .ok_or_else(|| RegistryError::not_found("service", id))
    }

    /// The stored document, byte for byte.
    pub fn service_document(&self, id: &str) -> Result<Vec<u8>, RegistryError> {
        self.service(id)?;
        self.store.read_document(id)
    }

    /// Re-parses the stored document.
    pub fn service_description(&self, id: &str) -> Result<ServiceDescription, RegistryError> {
        let record = self.service(id)?;
        let bytes = self.store.read_document(id)?;
        parse_document(&record.source, &bytes).map_err(|e| RegistryError::Unparsable {
            source_id: record.source,
            message: e.to_string(),
        })
    }

    /// Index entries of a collection rebuilt from its stored documents
    /// rather than the cache.
    pub fn rebuild_index(&self, collection_id: &str) -> Result<Vec<OperationIndexEntry>, RegistryError> {
        let mut out = Vec::new();
        for sid in self.collection(collection_id)?.services {
            out.extend(index_service(&self.service_description(&sid)?, Some(&sid)));
        }
        Ok(out)
    }

    /// Current index snapshot of a collection.
    pub fn index(&self, collection_id: &str) -> Result<Arc<Vec<OperationIndexEntry>>, RegistryError> {
        self.indexes
            .read()
            .unwrap()
            .get(collection_id)
            .cloned()
            .ok_or_else(|| RegistryError::not_found("collection", collection_id))
    }

    /// Loads an ontology and merges it into the class graph. Returns the
    /// record and whether it was newly stored; identical bytes map to the
    /// existing record and leave the graph as it was.
    pub fn add_ontology(&self, source: &str, bytes: &[u8]) -> Result<(OntologyRecord, bool), RegistryError> {
        let _guard = self.ontology_lock.lock().unwrap();
        let digest = digest(bytes);
        if let Some(existing) = self.store.ontologies()?.into_iter().find(|o| o.digest == digest) {
            return Ok((existing, false));
        }
        let axioms = load_ontology(bytes, &ontology_base(source)).map_err(|e| RegistryError::Unparsable {
            source_id: source.to_string(),
            message: e.to_string(),
        })?;
        let record = OntologyRecord {
            id: uuid::Uuid::new_v4().to_string(),
            source: source.to_string(),
            digest,
            size: bytes.len() as u64,
            uploaded: now(),
            class_count: axioms.classes.len(),
        };
        self.store.write_document(&record.id, bytes)?;
        if let Err(e) = self.store.put_ontology(&record, &axioms) {
            self.store.remove_document(&record.id);
            return Err(e);
        }
        self.graph.store(Arc::new(self.graph.load().merge(&axioms)));
        log::info!("stored ontology {} ({} classes)", record.id, record.class_count);
        Ok((record, true))
    }

    pub fn ontologies(&self) -> Result<Vec<OntologyRecord>, RegistryError> {
        let mut all = self.store.ontologies()?;
        all.sort_by(|a, b| (&a.uploaded, &a.source, &a.id).cmp(&(&b.uploaded, &b.source, &b.id)));
        Ok(all)
    }

    /// Class hierarchy asserted by one ontology.
    pub fn ontology_classes(&self, id: &str) -> Result<Vec<ClassTreeNode>, RegistryError> {
        self.store
            .ontology(id)?
            .ok_or_else(|| RegistryError::not_found("ontology", id))?;
        let axioms = self.store.ontology_axioms(id)?.unwrap_or_default();
        Ok(class_tree(&axioms))
    }

    pub fn graph(&self) -> Arc<ClassGraph> {
        self.graph.load_full()
    }

    /// Ranks the operations of one collection against the current graph.
    pub fn match_query(
        &self,
        collection_id: &str,
        cfg: MatchConfig,
        query: &Query,
    ) -> Result<Vec<MatchResult>, RegistryError> {
        let index = self.index(collection_id)?;
        let graph = self.graph();
        let matcher = Matcher::new(&graph, cfg).map_err(match_error)?;
        matcher.match_operations(query, &index).map_err(match_error)
    }
}

fn match_error(e: sawmatch_core::MatchError) -> RegistryError {
    match e {
        sawmatch_core::MatchError::InvalidConfig { field, message } => RegistryError::validation(field, message),
        other => RegistryError::validation("inputs", other.to_string()),
    }
}
