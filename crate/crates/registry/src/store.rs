//! File-backed persistence: raw documents as files, metadata and cached
//! index entries in an embedded transactional key-value store.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use redb::{Database, ReadableTable, TableDefinition};
use sawmatch_core::{Axioms, OperationIndexEntry};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::RegistryError;

const COLLECTIONS: TableDefinition<&str, &[u8]> = TableDefinition::new("collections");
const SERVICES: TableDefinition<&str, &[u8]> = TableDefinition::new("services");
const SERVICE_INDEX: TableDefinition<&str, &[u8]> = TableDefinition::new("service_index");
const ONTOLOGIES: TableDefinition<&str, &[u8]> = TableDefinition::new("ontologies");
const ONTOLOGY_AXIOMS: TableDefinition<&str, &[u8]> = TableDefinition::new("ontology_axioms");

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Collection {
    pub id: String,
    pub name: String,
    pub description: String,
    pub uploader: String,
    pub created: String,
    pub services: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OperationRef {
    pub interface: String,
    pub operation: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ServiceRecord {
    pub id: String,
    pub collection_id: String,
    /// File name or URL the document came from.
    pub source: String,
    pub service_name: String,
    pub digest: String,
    pub size: u64,
    pub uploaded: String,
    pub operations: Vec<OperationRef>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OntologyRecord {
    pub id: String,
    pub source: String,
    pub digest: String,
    pub size: u64,
    pub uploaded: String,
    pub class_count: usize,
}

pub(crate) struct Store {
    db: Database,
    docs: PathBuf,
}

fn get<T: DeserializeOwned>(
    db: &Database,
    table: TableDefinition<&str, &[u8]>,
    key: &str,
) -> Result<Option<T>, RegistryError> {
    let txn = db.begin_read()?;
    let t = txn.open_table(table)?;
    match t.get(key)? {
        Some(v) => Ok(Some(serde_json::from_slice(v.value())?)),
        None => Ok(None),
    }
}

fn all<T: DeserializeOwned>(db: &Database, table: TableDefinition<&str, &[u8]>) -> Result<Vec<T>, RegistryError> {
    let txn = db.begin_read()?;
    let t = txn.open_table(table)?;
    let mut out = Vec::new();
    for row in t.iter()? {
        let (_, v) = row?;
        out.push(serde_json::from_slice(v.value())?);
    }
    Ok(out)
}

impl Store {
    pub fn open(dir: &Path) -> Result<Self, RegistryError> {
        let docs = dir.join("documents");
        fs::create_dir_all(&docs)?;
        let db = Database::create(dir.join("registry.redb"))?;
        let txn = db.begin_write()?;
        for t in [COLLECTIONS, SERVICES, SERVICE_INDEX, ONTOLOGIES, ONTOLOGY_AXIOMS] {
            txn.open_table(t)?;
        }
        txn.commit()?;
        Ok(Store { db, docs })
    }

    fn doc_path(&self, id: &str) -> PathBuf {
        self.docs.join(id)
    }

    /// Writes via a temporary file and rename so readers never see a
    /// partial document.
    pub fn write_document(&self, id: &str, bytes: &[u8]) -> Result<(), RegistryError> {
        let tmp = self.docs.join(format!(".{id}.tmp"));
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, self.doc_path(id))?;
        Ok(())
    }

    pub fn read_document(&self, id: &str) -> Result<Vec<u8>, RegistryError> {
        Ok(fs::read(self.doc_path(id))?)
    }

    pub fn remove_document(&self, id: &str) {
        let _ = fs::remove_file(self.doc_path(id));
    }

    pub fn put_collection(&self, c: &Collection) -> Result<(), RegistryError> {
        let txn = self.db.begin_write()?;
        txn.open_table(COLLECTIONS)?
            .insert(c.id.as_str(), serde_json::to_vec(c)?.as_slice())?;
        txn.commit()?;
        Ok(())
    }

    pub fn collection(&self, id: &str) -> Result<Option<Collection>, RegistryError> {
        get(&self.db, COLLECTIONS, id)
    }

    pub fn collections(&self) -> Result<Vec<Collection>, RegistryError> {
        all(&self.db, COLLECTIONS)
    }

    /// Stores a service, its cached index entries and the updated
    /// collection in one transaction.
    pub fn put_service(
        &self,
        collection: &Collection,
        record: &ServiceRecord,
        entries: &[OperationIndexEntry],
    ) -> Result<(), RegistryError> {
        let txn = self.db.begin_write()?;
        {
            let id = record.id.as_str();
            txn.open_table(SERVICES)?
                .insert(id, serde_json::to_vec(record)?.as_slice())?;
            txn.open_table(SERVICE_INDEX)?
                .insert(id, serde_json::to_vec(entries)?.as_slice())?;
            txn.open_table(COLLECTIONS)?
                .insert(collection.id.as_str(), serde_json::to_vec(collection)?.as_slice())?;
        }
        txn.commit()?;
        Ok(())
    }

    pub fn service(&self, id: &str) -> Result<Option<ServiceRecord>, RegistryError> {
        get(&self.db, SERVICES, id)
    }

    pub fn service_entries(&self, id: &str) -> Result<Option<Vec<OperationIndexEntry>>, RegistryError> {
        get(&self.db, SERVICE_INDEX, id)
    }

    pub fn put_ontology(&self, record: &OntologyRecord, axioms: &Axioms) -> Result<(), RegistryError> {
        let txn = self.db.begin_write()?;
        {
            let id = record.id.as_str();
            txn.open_table(ONTOLOGIES)?
                .insert(id, serde_json::to_vec(record)?.as_slice())?;
            txn.open_table(ONTOLOGY_AXIOMS)?
                .insert(id, serde_json::to_vec(axioms)?.as_slice())?;
        }
        txn.commit()?;
        Ok(())
    }

    pub fn ontology(&self, id: &str) -> Result<Option<OntologyRecord>, RegistryError> {
        get(&self.db, ONTOLOGIES, id)
    }

    pub fn ontologies(&self) -> Result<Vec<OntologyRecord>, RegistryError> {
        all(&self.db, ONTOLOGIES)
    }

    pub fn ontology_axioms(&self, id: &str) -> Result<Option<Axioms>, RegistryError> {
        get(&self.db, ONTOLOGY_AXIOMS, id)
    }
}
