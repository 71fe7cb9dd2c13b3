use thiserror::Error;

#[derive(Debug, Error)]
pub enum RegistryError {
    #[error("{field}: {message}")]
    Validation { field: String, message: String },
    #[error("{what} `{id}` not found")]
    NotFound { what: &'static str, id: String },
    #[error("{0}")]
    Duplicate(String),
    #[error("cannot parse `{source_id}`: {message}")]
    Unparsable { source_id: String, message: String },
    #[error("fetching {url} failed: {message}")]
    Fetch { url: String, message: String },
    #[error("document exceeds the {limit}-byte limit")]
    TooLarge { limit: u64 },
    #[error("store: {0}")]
    Store(Box<redb::Error>),
    #[error("stored record is corrupt: {0}")]
    Corrupt(#[from] serde_json::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl RegistryError {
    pub fn validation(field: impl Into<String>, message: impl Into<String>) -> Self {
        RegistryError::Validation {
            field: field.into(),
            message: message.into(),
        }
    }

    pub(crate) fn not_found(what: &'static str, id: &str) -> Self {
        RegistryError::NotFound {
            what,
            id: id.to_string(),
        }
    }
}

macro_rules! store_err {
    ($($t:ty),*) => {$(
        impl From<$t> for RegistryError {
            fn from(e: $t) -> Self {
                RegistryError::Store(Box::new(e.into()))
            }
        }
    )*};
}

store_err!(
    redb::Error,
    redb::DatabaseError,
    redb::TransactionError,
    redb::TableError,
    redb::StorageError,
    redb::CommitError
);
