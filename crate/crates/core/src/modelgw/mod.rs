//! Gateway to the model under test.
//!
//! Every reply is journaled before it is returned, and the journal is the
//! cache: identical requests are answered from it without contacting the
//! provider, across processes and after crashes.

mod http;
pub mod journal;
mod mock;

use std::collections::{HashMap, HashSet};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Condvar, Mutex, RwLock};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::prompting::{Prompt, Purpose};

pub use http::{HttpProvider, API_KEY_ENV};
pub use journal::{cache_roundtrip, JournalRecord};
pub use mock::{configure_mock, MockBehavior, MockProvider, TaskMode, TranslateMode};

pub const DEFAULT_TEMPERATURE: f64 = 0.25;
pub const TASK_MAX_TOKENS: u32 = 256;
pub const TRANSLATION_MAX_TOKENS: u32 = 2048;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationParams {
    pub model_id: String,
    pub temperature: f64,
    pub max_tokens: u32,
    /// Distinguishes deliberate repeats of an identical request, which
    /// would otherwise be served from the cache.
    #[serde(default, skip_serializing_if = "is_zero")]
    pub replicate: u32,
}

fn is_zero(n: &u32) -> bool {
    *n == 0
}

impl GenerationParams {
    pub fn for_purpose(model_id: &str, purpose: Purpose) -> Self {
        GenerationParams {
            model_id: model_id.to_owned(),
            temperature: DEFAULT_TEMPERATURE,
            max_tokens: match purpose {
                Purpose::Task => TASK_MAX_TOKENS,
                Purpose::Translation => TRANSLATION_MAX_TOKENS,
            },
            replicate: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelRequest {
    pub prompt: Prompt,
    pub params: GenerationParams,
}

impl ModelRequest {
    pub fn new(prompt: Prompt, model_id: &str) -> Self {
        let params = GenerationParams::for_purpose(model_id, prompt.purpose);
        ModelRequest { prompt, params }
    }

    pub fn key(&self) -> CacheKey {
        CacheKey::of(&self.params, &self.prompt.text, self.prompt.purpose)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelReply {
    /// Exactly as the provider returned it.
    pub raw: String,
    pub from_cache: bool,
    pub provider: String,
    pub timestamp: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CacheKey(pub String);

impl CacheKey {
    pub fn of(params: &GenerationParams, prompt_text: &str, purpose: Purpose) -> Self {
        let canonical = serde_json::json!([params.model_id, params, prompt_text, purpose]);
        CacheKey(sha256_hex(canonical.to_string().as_bytes()))
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GatewayError {
    #[error("provider returned HTTP {status} after {attempts} attempt(s): {message}")]
    Provider {
        status: u16,
        attempts: u32,
        message: String,
    },
    #[error("provider timed out after {attempts} attempt(s)")]
    Timeout { attempts: u32 },
    #[error("request budget of {max} provider calls exhausted")]
    BudgetExceeded { max: u64 },
    #[error("mock provider cannot resolve prompt tag {0:?}")]
    UnknownExample(String),
    #[error("journal {path} is corrupt at byte {offset}")]
    CorruptJournal { path: PathBuf, offset: u64 },
    #[error("journal error: {0}")]
    Journal(String),
    #[error("offline: no cached reply for {tag} (key {key})")]
    CacheMiss { key: String, tag: String },
    #[error("empty prompt")]
    EmptyPrompt,
    #[error("provider configuration: {0}")]
    Config(String),
}

/// Outcome of one provider attempt that did not produce a reply.
#[derive(Debug, Clone, PartialEq)]
pub enum AttemptError {
    /// Worth retrying (HTTP 408, 429, 5xx, dropped connections).
    Transient {
        status: u16,
        message: String,
    },
    TimedOut,
    /// Retrying cannot help.
    Permanent(GatewayError),
}

pub trait Provider: Send + Sync {
    fn name(&self) -> String;
    fn call(&self, req: &ModelRequest) -> Result<String, AttemptError>;
}

/// Answers only from the journal; used to rescore without a model.
pub struct OfflineProvider;

impl Provider for OfflineProvider {
    fn name(&self) -> String {
        "offline".into()
    }

    fn call(&self, req: &ModelRequest) -> Result<String, AttemptError> {
        Err(AttemptError::Permanent(GatewayError::CacheMiss {
            key: req.key().0,
            tag: req.prompt.condition_tag.clone(),
        }))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GatewayConfig {
    pub concurrency: usize,
    /// Retries after the first attempt for transient failures.
    pub retries: u32,
    pub max_requests: Option<u64>,
    pub backoff_base: Duration,
    pub journal: Option<PathBuf>,
    /// Test hook: abort the process while writing journal record `n + 1`.
    pub crash_after: Option<u64>,
}

impl Default for GatewayConfig {
    fn default() -> Self {
        GatewayConfig {
            concurrency: 4,
            retries: 5,
            max_requests: None,
            backoff_base: Duration::from_millis(500),
            journal: None,
            crash_after: None,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GatewayStats {
    pub task_calls: u64,
    pub translation_calls: u64,
    pub cache_hits: u64,
    pub attempts: u64,
}

impl GatewayStats {
    pub fn provider_calls(&self) -> u64 {
        self.task_calls + self.translation_calls
    }
}

struct Semaphore {
    free: Mutex<usize>,
    cv: Condvar,
}

impl Semaphore {
    fn acquire(&self) -> SemaphoreGuard<'_> {
        let mut free = self.free.lock().unwrap();
        while *free == 0 {
            free = self.cv.wait(free).unwrap();
        }
        *free -= 1;
        SemaphoreGuard(self)
    }
}

struct SemaphoreGuard<'a>(&'a Semaphore);

impl Drop for SemaphoreGuard<'_> {
    fn drop(&mut self) {
        *self.0.free.lock().unwrap() += 1;
        self.0.cv.notify_one();
    }
}

pub struct Gateway {
    provider: Box<dyn Provider>,
    cfg: GatewayConfig,
    cache: RwLock<HashMap<String, String>>,
    journal: Mutex<Option<journal::JournalWriter>>,
    in_flight: Mutex<HashSet<String>>,
    in_flight_cv: Condvar,
    slots: Semaphore,
    calls_started: AtomicU64,
    task_calls: AtomicU64,
    translation_calls: AtomicU64,
    cache_hits: AtomicU64,
    attempts: AtomicU64,
}

impl Gateway {
    /// Opens the gateway, replaying the configured journal into the cache.
    pub fn new(provider: Box<dyn Provider>, cfg: GatewayConfig) -> Result<Self, GatewayError> {
        let mut cache = HashMap::new();
        let writer = match &cfg.journal {
            Some(path) => {
                let replay = journal::replay(path)?;
                if replay.dropped_tail {
                    log::warn!("{}: resumed after an interrupted write", path.display());
                }
                for rec in replay.records {
                    cache.entry(rec.key).or_insert(rec.raw);
                }
                Some(journal::JournalWriter::open(
                    path,
                    replay.valid_len,
                    cfg.crash_after,
                )?)
            }
            None => None,
        };
        Ok(Gateway {
            provider,
            slots: Semaphore {
                free: Mutex::new(cfg.concurrency.max(1)),
                cv: Condvar::new(),
            },
            cfg,
            cache: RwLock::new(cache),
            journal: Mutex::new(writer),
            in_flight: Mutex::new(HashSet::new()),
            in_flight_cv: Condvar::new(),
            calls_started: AtomicU64::new(0),
            task_calls: AtomicU64::new(0),
            translation_calls: AtomicU64::new(0),
            cache_hits: AtomicU64::new(0),
            attempts: AtomicU64::new(0),
        })
    }

    pub fn provider_name(&self) -> String {
        self.provider.name()
    }

    pub fn journal_path(&self) -> Option<&Path> {
        self.cfg.journal.as_deref()
    }

    pub fn cached_entries(&self) -> usize {
        self.cache.read().unwrap().len()
    }

    pub fn stats(&self) -> GatewayStats {
        GatewayStats {
            task_calls: self.task_calls.load(Ordering::SeqCst),
            translation_calls: self.translation_calls.load(Ordering::SeqCst),
            cache_hits: self.cache_hits.load(Ordering::SeqCst),
            attempts: self.attempts.load(Ordering::SeqCst),
        }
    }

    fn cached(&self, key: &str) -> Option<String> {
        self.cache.read().unwrap().get(key).cloned()
    }

    fn hit(&self, raw: String) -> ModelReply {
        self.cache_hits.fetch_add(1, Ordering::SeqCst);
        ModelReply {
            raw,
            from_cache: true,
            provider: self.provider.name(),
            timestamp: now(),
        }
    }

    /// Returns the cached reply or calls the provider, retrying transient
    /// failures with exponential backoff. Safe to call from many threads.
    pub fn complete(&self, req: &ModelRequest) -> Result<ModelReply, GatewayError> {
        if req.prompt.text.trim().is_empty() {
            return Err(GatewayError::EmptyPrompt);
        }
        let key = req.key().0;
        if let Some(raw) = self.cached(&key) {
            return Ok(self.hit(raw));
        }

        // One provider call per key: later callers wait for the first.
        {
            let mut in_flight = self.in_flight.lock().unwrap();
            while in_flight.contains(&key) {
                in_flight = self.in_flight_cv.wait(in_flight).unwrap();
            }
            if let Some(raw) = self.cached(&key) {
                return Ok(self.hit(raw));
            }
            in_flight.insert(key.clone());
        }
        let result = self.call_and_journal(req, &key);
        self.in_flight.lock().unwrap().remove(&key);
        self.in_flight_cv.notify_all();
        result
    }

    fn call_and_journal(&self, req: &ModelRequest, key: &str) -> Result<ModelReply, GatewayError> {
        let started = self.calls_started.fetch_add(1, Ordering::SeqCst);
        if let Some(max) = self.cfg.max_requests {
            if started >= max {
                self.calls_started.fetch_sub(1, Ordering::SeqCst);
                return Err(GatewayError::BudgetExceeded { max });
            }
        }
        match req.prompt.purpose {
            Purpose::Task => &self.task_calls,
            Purpose::Translation => &self.translation_calls,
        }
        .fetch_add(1, Ordering::SeqCst);

        let raw = {
            let _slot = self.slots.acquire();
            self.call_with_retry(req)?
        };
        let timestamp = now();
        let record = JournalRecord {
            key: key.to_owned(),
            model_id: req.params.model_id.clone(),
            params: req.params.clone(),
            purpose: req.prompt.purpose,
            prompt_sha: sha256_hex(req.prompt.text.as_bytes()),
            prompt: req.prompt.text.clone(),
            raw: raw.clone(),
            timestamp: timestamp.clone(),
            role: "user".into(),
            tag: req.prompt.condition_tag.clone(),
        };
        if let Some(w) = self.journal.lock().unwrap().as_mut() {
            w.append(&record)?;
        }
        self.cache
            .write()
            .unwrap()
            .insert(key.to_owned(), raw.clone());
        Ok(ModelReply {
            raw,
            from_cache: false,
            provider: self.provider.name(),
            timestamp,
        })
    }

    fn call_with_retry(&self, req: &ModelRequest) -> Result<String, GatewayError> {
        let total = self.cfg.retries + 1;
        let mut last = AttemptError::TimedOut;
        for attempt in 0..total {
            if attempt > 0 {
                let factor = 1u32 << (attempt - 1).min(10);
                std::thread::sleep(
                    self.cfg
                        .backoff_base
                        .saturating_mul(factor)
                        .min(Duration::from_secs(60)),
                );
            }
            self.attempts.fetch_add(1, Ordering::SeqCst);
            match self.provider.call(req) {
                Ok(raw) => return Ok(raw),
                Err(AttemptError::Permanent(e)) => return Err(e),
                Err(e) => {
                    log::debug!("attempt {} of {total} failed: {e:?}", attempt + 1);
                    last = e;
                }
            }
        }
        Err(match last {
            AttemptError::Transient { status, message } => GatewayError::Provider {
                status,
                attempts: total,
                message,
            },
            AttemptError::TimedOut => GatewayError::Timeout { attempts: total },
            AttemptError::Permanent(e) => e,
        })
    }
}

fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}
