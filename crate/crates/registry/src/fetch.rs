use std::time::Duration;

use crate::error::RegistryError;

pub const DEFAULT_FETCH_LIMIT: u64 = 16 * 1024 * 1024;
pub const DEFAULT_FETCH_TIMEOUT: Duration = Duration::from_secs(30);

#[derive(Debug, Clone, Copy)]
pub struct FetchConfig {
    pub timeout: Duration,
    pub max_bytes: u64,
}

impl Default for FetchConfig {
    fn default() -> Self {
        FetchConfig {
            timeout: DEFAULT_FETCH_TIMEOUT,
            max_bytes: DEFAULT_FETCH_LIMIT,
        }
    }
}

/// Downloads a document over HTTP(S). Blocking.
pub fn fetch(url: &str, cfg: FetchConfig) -> Result<Vec<u8>, RegistryError> {
    let fail = |message: String| RegistryError::Fetch {
        url: url.to_string(),
        message,
    };
    if !(url.starts_with("http://") || url.starts_with("https://")) {
        return Err(RegistryError::validation(
            "url",
            "only http and https URLs can be fetched",
        ));
    }
    let agent: ureq::Agent = ureq::Agent::config_builder()
        .timeout_global(Some(cfg.timeout))
        .build()
        .into();
    let mut response = agent.get(url).call().map_err(|e| fail(e.to_string()))?;
    match response.body_mut().with_config().limit(cfg.max_bytes).read_to_vec() {
        Ok(bytes) => Ok(bytes),
        Err(ureq::Error::BodyExceedsLimit(_)) => Err(RegistryError::TooLarge { limit: cfg.max_bytes }),
        Err(e) => Err(fail(e.to_string())),
    }
}
