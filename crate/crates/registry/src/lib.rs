//! Persistent registry of service collections and ontologies with an HTTP
//! API for browsing and matching.
//!
//! Service documents are parsed and indexed once, at upload time. Matching
//! reads immutable snapshots of the class graph and of each collection's
//! operation index, so requests never wait on uploads.

pub mod api;
mod error;
pub mod fetch;
mod registry;
mod store;

use std::future::Future;

pub use api::{router, AppState};
pub use error::RegistryError;
pub use fetch::FetchConfig;
pub use registry::{ontology_base, Registry};
pub use store::{Collection, OntologyRecord, OperationRef, ServiceRecord};

/// Serves the API on an already bound listener until `shutdown` resolves,
/// then lets in-flight requests finish.
pub async fn serve(
    listener: tokio::net::TcpListener,
    state: AppState,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    axum::serve(listener, router(state))
        .with_graceful_shutdown(shutdown)
        .await
}

/// Resolves on ctrl-c or, on Unix, SIGTERM.
pub async fn shutdown_signal() {
    let ctrl_c = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    #[cfg(unix)]
    let term = async {
        match tokio::signal::unix::signal(tokio::signal::unix::SignalKind::terminate()) {
            Ok(mut s) => {
                s.recv().await;
            }
            Err(_) => std::future::pending::<()>().await,
        }
    };
    #[cfg(not(unix))]
    let term = std::future::pending::<()>();
    tokio::select! {
        _ = ctrl_c => {},
        _ = term => {},
    }
    log::info!("shutdown requested, draining connections");
}
