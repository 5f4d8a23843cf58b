use std::collections::{BTreeMap, HashMap};
use std::io;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use super::{guess_label, normalize};
use crate::corpus::{Label, Lang, TaskKind};
use crate::fsutil;
use crate::metrics::RunRecord;
use crate::prompting::TemplateSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntryStatus {
    /// Proposed by the harness; not applied until a person marks it reviewed.
    Auto,
    Reviewed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LedgerEntry {
    pub task: TaskKind,
    /// Language of the instruction the reply answered.
    pub language: Lang,
    pub normalized_raw: String,
    pub label: Label,
    pub status: EntryStatus,
    #[serde(default)]
    pub note: String,
}

#[derive(Debug, Error)]
pub enum LedgerError {
    #[error("cannot read ledger {path}: {source}")]
    Io { path: String, source: io::Error },
    #[error("ledger entry {normalized_raw:?} maps to {label}, which is not a {task} label")]
    ForeignLabel {
        task: TaskKind,
        normalized_raw: String,
        label: Label,
    },
    #[error("ledger lists {normalized_raw:?} ({task}, {language}) twice")]
    DuplicateEntry {
        task: TaskKind,
        language: Lang,
        normalized_raw: String,
    },
}

type Key = (TaskKind, Lang, String);

/// Reviewed and proposed mappings from normalized replies to labels.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MappingLedger {
    entries: BTreeMap<Key, LedgerEntry>,
}

impl MappingLedger {
    pub fn from_entries(
        entries: impl IntoIterator<Item = LedgerEntry>,
    ) -> Result<Self, LedgerError> {
        let mut ledger = MappingLedger::default();
        for mut e in entries {
            if e.label != Label::Invalid && !e.task.accepts(e.label) {
                return Err(LedgerError::ForeignLabel {
                    task: e.task,
                    normalized_raw: e.normalized_raw,
                    label: e.label,
                });
            }
            e.normalized_raw = normalize(&e.normalized_raw);
            let key = (e.task, e.language, e.normalized_raw.clone());
            if ledger.entries.contains_key(&key) {
                return Err(LedgerError::DuplicateEntry {
                    task: e.task,
                    language: e.language,
                    normalized_raw: e.normalized_raw,
                });
            }
            ledger.entries.insert(key, e);
        }
        Ok(ledger)
    }

    /// Loads a ledger file; a missing file is an empty ledger.
    pub fn load(path: &Path) -> Result<Self, LedgerError> {
        if !path.exists() {
            return Ok(MappingLedger::default());
        }
        let entries = fsutil::read_jsonl(path).map_err(|source| LedgerError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_entries(entries)
    }

    pub fn save(&self, path: &Path) -> io::Result<()> {
        fsutil::atomic_write(path, self.to_jsonl().as_bytes())
    }

    pub fn to_jsonl(&self) -> String {
        let entries: Vec<&LedgerEntry> = self.entries.values().collect();
        fsutil::to_jsonl(&entries).expect("ledger entries serialize")
    }

    pub fn entries(&self) -> impl Iterator<Item = &LedgerEntry> {
        self.entries.values()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(
        &self,
        task: TaskKind,
        language: Lang,
        normalized_raw: &str,
    ) -> Option<&LedgerEntry> {
        self.entries
            .get(&(task, language, normalized_raw.to_owned()))
    }

    /// The label of a reviewed entry; unreviewed proposals are ignored.
    pub fn lookup(&self, task: TaskKind, language: Lang, normalized_raw: &str) -> Option<Label> {
        self.get(task, language, normalized_raw)
            .filter(|e| e.status == EntryStatus::Reviewed)
            .map(|e| e.label)
    }

    /// Adds or replaces an entry. Proposals never replace reviewed entries;
    /// returns whether the ledger changed.
    pub fn upsert(&mut self, entry: LedgerEntry) -> Result<bool, LedgerError> {
        if entry.label != Label::Invalid && !entry.task.accepts(entry.label) {
            return Err(LedgerError::ForeignLabel {
                task: entry.task,
                normalized_raw: entry.normalized_raw,
                label: entry.label,
            });
        }
        let key = (entry.task, entry.language, normalize(&entry.normalized_raw));
        if let Some(old) = self.entries.get(&key) {
            if old.status == EntryStatus::Reviewed && entry.status == EntryStatus::Auto {
                return Ok(false);
            }
            if *old == entry {
                return Ok(false);
            }
        }
        self.entries.insert(key, entry);
        Ok(true)
    }

    /// SHA-256 of the canonical serialization, hex encoded.
    pub fn content_hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_jsonl().as_bytes()))
    }
}

/// Groups unresolved replies and proposes one `Auto` entry per distinct
/// normalized reply, most frequent first. Replies the ledger already covers
/// are skipped.
pub fn propose_ledger_entries(
    records: &[RunRecord],
    templates: &TemplateSet,
    ledger: &MappingLedger,
) -> Vec<LedgerEntry> {
    let mut counts: HashMap<Key, usize> = HashMap::new();
    for r in records.iter().filter(|r| r.label == Label::Invalid) {
        let key = (
            r.condition.task,
            r.condition.instruction.effective(),
            normalize(&r.raw),
        );
        *counts.entry(key).or_default() += 1;
    }
    let mut grouped: Vec<(Key, usize)> = counts
        .into_iter()
        .filter(|((task, lang, norm), _)| ledger.get(*task, *lang, norm).is_none())
        .collect();
    grouped.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    grouped
        .into_iter()
        .map(|((task, language, normalized_raw), count)| {
            let label = templates
                .instruction(task, language)
                .map(|t| guess_label(&normalized_raw, t))
                .unwrap_or(Label::Invalid);
            LedgerEntry {
                task,
                language,
                normalized_raw,
                label,
                status: EntryStatus::Auto,
                note: format!("seen {count}x"),
            }
        })
        .collect()
}
