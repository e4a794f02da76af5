//! Good-sentence providers: gold references, an external translation
//! service over HTTP, or the locally tuned translator at full weights.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use crate::decode::{DecodeError, SmtSystem};
use crate::text::{ParallelCorpus, Sentence};

/// Environment variable naming the external translation endpoint.
pub const ENDPOINT_ENV: &str = "PAIRFORGE_MT_ENDPOINT";

const MAX_ATTEMPTS: u32 = 4;
const BACKOFF_BASE_MS: u64 = 100;

#[derive(Debug, thiserror::Error)]
pub enum ProviderError {
    #[error("no source sentences given")]
    EmptyInput,
    #[error("no endpoint configured; set {ENDPOINT_ENV} or the config field")]
    MissingEndpoint,
    #[error("service unreachable after {attempts} attempts: {detail}")]
    ServiceUnreachable { attempts: u32, detail: String },
    #[error("service timed out after {attempts} attempts: {detail}")]
    Timeout { attempts: u32, detail: String },
    #[error("source {index} does not match the reference corpus")]
    AlignmentError { index: usize },
    #[error("malformed service response: {0}")]
    InvalidResponse(String),
    #[error(transparent)]
    Decode(#[from] DecodeError),
}

/// External service connection settings. The service contract is
/// `POST {endpoint}/translate` with body `{"texts": [...]}` answered by
/// `{"translations": [...]}`.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServiceConfig {
    pub endpoint: String,
    #[serde(default = "default_timeout")]
    pub timeout_secs: f64,
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
    #[serde(default = "default_max_in_flight")]
    pub max_in_flight: usize,
    #[serde(default)]
    pub bearer_token: Option<String>,
}

fn default_timeout() -> f64 {
    30.0
}

fn default_batch_size() -> usize {
    32
}

fn default_max_in_flight() -> usize {
    4
}

impl ServiceConfig {
    pub fn new(endpoint: impl Into<String>) -> ServiceConfig {
        ServiceConfig {
            endpoint: endpoint.into(),
            timeout_secs: default_timeout(),
            batch_size: default_batch_size(),
            max_in_flight: default_max_in_flight(),
            bearer_token: None,
        }
    }

    /// Reads the endpoint from the environment.
    pub fn from_env() -> Result<ServiceConfig, ProviderError> {
        match std::env::var(ENDPOINT_ENV) {
            Ok(endpoint) if !endpoint.trim().is_empty() => Ok(ServiceConfig::new(endpoint)),
            _ => Err(ProviderError::MissingEndpoint),
        }
    }
}

/// Where good sentences come from.
pub enum GoodProvider {
    /// Ground-truth targets of a parallel corpus; the sources handed in
    /// must be exactly the corpus source side, in order.
    GoldReference(ParallelCorpus),
    /// A remote translation service.
    ExternalService(ServiceConfig),
    /// The locally trained translator with its tuned (undegraded) weights.
    LocalTuned(SmtSystem),
}

impl GoodProvider {
    /// One good sentence per source, order preserved.
    pub fn good_sentences(&self, sources: &[Sentence]) -> Result<Vec<Sentence>, ProviderError> {
        if sources.is_empty() {
            return Err(ProviderError::EmptyInput);
        }
        match self {
            GoodProvider::GoldReference(corpus) => {
                for (i, src) in sources.iter().enumerate() {
                    match corpus.pairs().get(i) {
                        Some((s, _)) if s == src => {}
                        _ => return Err(ProviderError::AlignmentError { index: i }),
                    }
                }
                if sources.len() != corpus.len() {
                    return Err(ProviderError::AlignmentError { index: sources.len() });
                }
                Ok(corpus.targets().cloned().collect())
            }
            GoodProvider::LocalTuned(sys) => Ok(sys.translate_batch(sources)?),
            GoodProvider::ExternalService(cfg) => service_translate(cfg, sources),
        }
    }
}

/// Splits sources into batches and runs up to `max_in_flight` requests in
/// parallel, each retried with exponential backoff; results are written
/// into per-batch slots so output order never depends on completion order.
fn service_translate(
    cfg: &ServiceConfig,
    sources: &[Sentence],
) -> Result<Vec<Sentence>, ProviderError> {
    let batch_size = cfg.batch_size.max(1);
    let batches: Vec<&[Sentence]> = sources.chunks(batch_size).collect();
    let slots: Vec<Mutex<Option<Result<Vec<Sentence>, ProviderError>>>> =
        batches.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    let workers = cfg.max_in_flight.max(1).min(batches.len());

    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= batches.len() {
                    break;
                }
                let result = request_batch(cfg, batches[i]);
                *slots[i].lock().expect("slot lock") = Some(result);
            });
        }
    });

    let mut out = Vec::with_capacity(sources.len());
    for slot in slots {
        let result = slot.into_inner().expect("slot lock").expect("worker filled slot");
        out.extend(result?);
    }
    Ok(out)
}

/// One batch request with up to 3 retries on transient failures
/// (non-200 status, transport errors, timeouts).
fn request_batch(cfg: &ServiceConfig, batch: &[Sentence]) -> Result<Vec<Sentence>, ProviderError> {
    let url = format!("{}/translate", cfg.endpoint.trim_end_matches('/'));
    let texts: Vec<String> = batch.iter().map(Sentence::detokenize).collect();
    let agent = ureq::AgentBuilder::new()
        .timeout(Duration::from_secs_f64(cfg.timeout_secs))
        .build();

    let mut last_detail = String::new();
    let mut last_was_timeout = false;
    for attempt in 0..MAX_ATTEMPTS {
        if attempt > 0 {
            std::thread::sleep(Duration::from_millis(BACKOFF_BASE_MS << (attempt - 1)));
        }
        let mut req = agent.post(&url);
        if let Some(token) = &cfg.bearer_token {
            req = req.set("Authorization", &format!("Bearer {token}"));
        }
        match req.send_json(serde_json::json!({ "texts": texts })) {
            Ok(resp) => {
                let body: serde_json::Value = resp
                    .into_json()
                    .map_err(|e| ProviderError::InvalidResponse(e.to_string()))?;
                let translations = body
                    .get("translations")
                    .and_then(|v| v.as_array())
                    .ok_or_else(|| {
                        ProviderError::InvalidResponse("missing translations array".into())
                    })?;
                if translations.len() != batch.len() {
                    return Err(ProviderError::InvalidResponse(format!(
                        "{} translations for {} texts",
                        translations.len(),
                        batch.len()
                    )));
                }
                return translations
                    .iter()
                    .map(|v| {
                        v.as_str()
                            .map(crate::text::tokenize)
                            .ok_or_else(|| {
                                ProviderError::InvalidResponse("non-string translation".into())
                            })
                    })
                    .collect();
            }
            Err(e) => {
                last_was_timeout = timeout_in_chain(&e);
                last_detail = e.to_string();
            }
        }
    }
    if last_was_timeout {
        Err(ProviderError::Timeout { attempts: MAX_ATTEMPTS, detail: last_detail })
    } else {
        Err(ProviderError::ServiceUnreachable { attempts: MAX_ATTEMPTS, detail: last_detail })
    }
}

fn timeout_in_chain(e: &(dyn std::error::Error + 'static)) -> bool {
    let mut cur: Option<&(dyn std::error::Error + 'static)> = Some(e);
    while let Some(err) = cur {
        if let Some(io) = err.downcast_ref::<std::io::Error>() {
            if matches!(
                io.kind(),
                std::io::ErrorKind::TimedOut | std::io::ErrorKind::WouldBlock
            ) {
                return true;
            }
        }
        cur = err.source();
    }
    false
}
