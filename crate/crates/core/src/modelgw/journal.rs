//! Append-only JSON-lines journal of provider replies; doubles as the cache.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{GatewayError, GenerationParams};
use crate::prompting::Purpose;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JournalRecord {
    pub key: String,
    pub model_id: String,
    pub params: GenerationParams,
    pub purpose: Purpose,
    pub prompt_sha: String,
    pub prompt: String,
    pub raw: String,
    pub timestamp: String,
    /// Chat role the prompt was sent under; always the sole user message.
    pub role: String,
    #[serde(default)]
    pub tag: String,
}

/// Result of reading a journal back.
#[derive(Debug)]
pub struct Replay {
    pub records: Vec<JournalRecord>,
    /// Byte length of the well-formed prefix.
    pub valid_len: u64,
    pub dropped_tail: bool,
}

/// Reads every complete record. A malformed final line (a write cut short
/// by a crash) is dropped; malformed data anywhere else is an error.
pub fn replay(path: &Path) -> Result<Replay, GatewayError> {
    let bytes = match std::fs::read(path) {
        Ok(b) => b,
        Err(e) if e.kind() == io::ErrorKind::NotFound => {
            return Ok(Replay {
                records: Vec::new(),
                valid_len: 0,
                dropped_tail: false,
            })
        }
        Err(e) => return Err(GatewayError::Journal(e.to_string())),
    };
    let mut records = Vec::new();
    let mut offset = 0usize;
    let mut dropped_tail = false;
    while offset < bytes.len() {
        let end = bytes[offset..]
            .iter()
            .position(|&b| b == b'\n')
            .map(|p| offset + p);
        let line = &bytes[offset..end.unwrap_or(bytes.len())];
        let is_last = end.is_none_or(|e| e + 1 >= bytes.len());
        if line.iter().all(u8::is_ascii_whitespace) {
            match end {
                Some(e) => {
                    offset = e + 1;
                    continue;
                }
                None => break,
            }
        }
        match serde_json::from_slice::<JournalRecord>(line) {
            Ok(rec) if end.is_some() => {
                records.push(rec);
                offset = end.unwrap() + 1;
            }
            // Parsable but unterminated: the newline never made it to disk.
            Ok(_) | Err(_) if is_last => {
                log::warn!(
                    "{}: dropping truncated record at byte {offset}",
                    path.display()
                );
                dropped_tail = true;
                break;
            }
            _ => {
                return Err(GatewayError::CorruptJournal {
                    path: path.to_owned(),
                    offset: offset as u64,
                })
            }
        }
    }
    Ok(Replay {
        records,
        valid_len: offset as u64,
        dropped_tail,
    })
}

/// Serialized appender. Construction trims a truncated tail left by a crash.
pub struct JournalWriter {
    file: File,
    path: PathBuf,
    written: u64,
    crash_after: Option<u64>,
}

impl JournalWriter {
    pub fn open(
        path: &Path,
        valid_len: u64,
        crash_after: Option<u64>,
    ) -> Result<Self, GatewayError> {
        let err = |e: io::Error| GatewayError::Journal(format!("{}: {e}", path.display()));
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(err)?;
        }
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(err)?;
        if file.metadata().map_err(err)?.len() > valid_len {
            file.set_len(valid_len).map_err(err)?;
        }
        Ok(JournalWriter {
            file,
            path: path.to_owned(),
            written: 0,
            crash_after,
        })
    }

    pub fn append(&mut self, rec: &JournalRecord) -> Result<(), GatewayError> {
        let mut line =
            serde_json::to_string(rec).map_err(|e| GatewayError::Journal(e.to_string()))?;
        line.push('\n');
        if self.crash_after.is_some_and(|n| self.written >= n) {
            // Simulated crash: leave half a record behind and die.
            let _ = self.file.write_all(&line.as_bytes()[..line.len() / 2]);
            let _ = self.file.sync_all();
            std::process::abort();
        }
        self.file
            .write_all(line.as_bytes())
            .and_then(|_| self.file.flush())
            .map_err(|e| GatewayError::Journal(format!("{}: {e}", self.path.display())))?;
        self.written += 1;
        Ok(())
    }
}

/// Loads a journal into a key → reply map, keeping the first reply per key.
pub fn cache_roundtrip(path: &Path) -> Result<HashMap<String, String>, GatewayError> {
    let mut cache = HashMap::new();
    for rec in replay(path)?.records {
        cache.entry(rec.key).or_insert(rec.raw);
    }
    Ok(cache)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prompting::Purpose;

    fn record(i: usize) -> JournalRecord {
        JournalRecord {
            key: format!("k{i}"),
            model_id: "m".into(),
            params: GenerationParams::for_purpose("m", Purpose::Task),
            purpose: Purpose::Task,
            prompt_sha: String::new(),
            prompt: format!("prompt {i}"),
            raw: format!("reply {i}\n"),
            timestamp: "t".into(),
            role: "user".into(),
            tag: String::new(),
        }
    }

    #[test]
    fn hundred_records_reload() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("j.jsonl");
        let mut w = JournalWriter::open(&path, 0, None).unwrap();
        for i in 0..100 {
            w.append(&record(i)).unwrap();
        }
        let cache = cache_roundtrip(&path).unwrap();
        assert_eq!(cache.len(), 100);
        assert_eq!(cache["k7"], "reply 7\n");
    }

    #[test]
    fn truncated_tail_is_dropped_and_trimmed() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("j.jsonl");
        let mut w = JournalWriter::open(&path, 0, None).unwrap();
        for i in 0..99 {
            w.append(&record(i)).unwrap();
        }
        drop(w);
        let full = serde_json::to_string(&record(99)).unwrap();
        let mut f = OpenOptions::new().append(true).open(&path).unwrap();
        f.write_all(&full.as_bytes()[..full.len() / 2]).unwrap();
        drop(f);

        let r = replay(&path).unwrap();
        assert_eq!((r.records.len(), r.dropped_tail), (99, true));
        let mut w = JournalWriter::open(&path, r.valid_len, None).unwrap();
        w.append(&record(99)).unwrap();
        let r = replay(&path).unwrap();
        assert_eq!((r.records.len(), r.dropped_tail), (100, false));
    }

    #[test]
    fn corruption_before_the_end_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("j.jsonl");
        let good = serde_json::to_string(&record(0)).unwrap();
        std::fs::write(&path, format!("{good}\n{{broken\n{good}\n")).unwrap();
        match replay(&path) {
            Err(GatewayError::CorruptJournal { offset, .. }) => {
                assert_eq!(offset as usize, good.len() + 1)
            }
            other => panic!("unexpected {other:?}"),
        }
    }
}
