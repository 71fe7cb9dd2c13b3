use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use anyhow::Context;
use clap::Args;
use sawmatch_registry::{serve, shutdown_signal, AppState, FetchConfig, Registry};

use crate::CliResult;

#[derive(Args)]
pub struct ServeArgs {
    /// Directory holding stored documents and the registry database.
    #[arg(long, env = "SAWMATCH_DATA_DIR", default_value = "sawmatch-data")]
    data: PathBuf,
    /// Address to listen on.
    #[arg(long, default_value = "127.0.0.1:8080")]
    listen: SocketAddr,
    /// Timeout for fetching documents given by URL, in seconds.
    #[arg(long, default_value_t = 30)]
    fetch_timeout: u64,
}

pub fn run(args: ServeArgs) -> CliResult {
    let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    rt.block_on(async move {
        let registry = Registry::open(&args.data).with_context(|| format!("opening {}", args.data.display()))?;
        let listener = tokio::net::TcpListener::bind(args.listen)
            .await
            .with_context(|| format!("binding {}", args.listen))?;
        eprintln!("listening on {}", listener.local_addr()?);
        let state = AppState {
            registry: Arc::new(registry),
            fetch: FetchConfig {
                timeout: Duration::from_secs(args.fetch_timeout),
                ..FetchConfig::default()
            },
        };
        serve(listener, state, shutdown_signal()).await?;
        eprintln!("stopped");
        Ok(())
    })
}
