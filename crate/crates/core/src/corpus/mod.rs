//! Parallel multilingual classification benchmarks.
//!
//! A [`Dataset`] is one language partition of a benchmark; a
//! [`ParallelCorpus`] aligns several partitions of the same task by example id.

mod parallel;
pub mod synthetic;
mod tsv;

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use parallel::build_parallel;
pub use tsv::{parse_dataset, parse_dataset_str, serialize_dataset, DatasetFormat};

/// Languages the harness ships templates for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Lang {
    En,
    De,
    Zh,
}

impl Lang {
    pub const ALL: [Lang; 3] = [Lang::En, Lang::De, Lang::Zh];

    pub fn code(self) -> &'static str {
        match self {
            Lang::En => "en",
            Lang::De => "de",
            Lang::Zh => "zh",
        }
    }

    /// Scripts written without spaces between words.
    pub fn is_unsegmented(self) -> bool {
        matches!(self, Lang::Zh)
    }
}

impl fmt::Display for Lang {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for Lang {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "en" => Ok(Lang::En),
            "de" => Ok(Lang::De),
            "zh" => Ok(Lang::Zh),
            other => Err(format!(
                "unsupported language code {other:?} (expected en, de or zh)"
            )),
        }
    }
}

/// Task labels. `Invalid` only ever labels model replies, never gold data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Label {
    #[serde(rename = "YES")]
    Yes,
    #[serde(rename = "NO")]
    No,
    A,
    B,
    C,
    #[serde(rename = "INVALID")]
    Invalid,
}

impl Label {
    pub fn as_str(self) -> &'static str {
        match self {
            Label::Yes => "YES",
            Label::No => "NO",
            Label::A => "A",
            Label::B => "B",
            Label::C => "C",
            Label::Invalid => "INVALID",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Label {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "YES" => Ok(Label::Yes),
            "NO" => Ok(Label::No),
            "A" => Ok(Label::A),
            "B" => Ok(Label::B),
            "C" => Ok(Label::C),
            "INVALID" => Ok(Label::Invalid),
            other => Err(format!("unknown label {other:?}")),
        }
    }
}

/// The two benchmark families: binary paraphrase identification and
/// three-way natural language inference.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TaskKind {
    #[serde(rename = "pawsx")]
    ParaphraseBinary,
    #[serde(rename = "xnli")]
    NliTernary,
}

impl TaskKind {
    pub const ALL: [TaskKind; 2] = [TaskKind::ParaphraseBinary, TaskKind::NliTernary];

    /// Ordered label set. For NLI the letters follow the option order of the
    /// instruction: A = entailment, B = contradiction, C = neutral.
    pub fn labels(self) -> &'static [Label] {
        match self {
            TaskKind::ParaphraseBinary => &[Label::Yes, Label::No],
            TaskKind::NliTernary => &[Label::A, Label::B, Label::C],
        }
    }

    pub fn accepts(self, label: Label) -> bool {
        self.labels().contains(&label)
    }

    pub fn short_name(self) -> &'static str {
        match self {
            TaskKind::ParaphraseBinary => "pawsx",
            TaskKind::NliTernary => "xnli",
        }
    }

    pub fn display_name(self) -> &'static str {
        match self {
            TaskKind::ParaphraseBinary => "PAWS-X",
            TaskKind::NliTernary => "XNLI",
        }
    }
}

impl fmt::Display for TaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.short_name())
    }
}

impl FromStr for TaskKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s
            .trim()
            .to_ascii_lowercase()
            .replace(['-', '_'], "")
            .as_str()
        {
            "pawsx" | "paraphrase" | "paraphrasebinary" => Ok(TaskKind::ParaphraseBinary),
            "xnli" | "nli" | "nliternary" => Ok(TaskKind::NliTernary),
            other => Err(format!("unknown task {other:?} (expected pawsx or xnli)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Example {
    pub id: String,
    pub sentence1: String,
    pub sentence2: String,
    pub gold: Label,
    pub language: Lang,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dataset {
    pub task: TaskKind,
    pub language: Lang,
    pub examples: Vec<Example>,
    pub source_name: String,
}

/// A broken [`Dataset`] invariant, reported as data.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    DuplicateId(String),
    EmptySentence { id: String, which: u8 },
    LanguageMismatch { id: String, found: Lang },
    GoldOutsideLabelSet { id: String, label: Label },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::DuplicateId(id) => write!(f, "duplicate id {id:?}"),
            Violation::EmptySentence { id, which } => {
                write!(f, "empty sentence{which} at id {id:?}")
            }
            Violation::LanguageMismatch { id, found } => {
                write!(
                    f,
                    "example {id:?} is tagged {found}, not the dataset language"
                )
            }
            Violation::GoldOutsideLabelSet { id, label } => {
                write!(
                    f,
                    "gold label {label} of {id:?} is not in the task label set"
                )
            }
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("cannot read {path}: {source}")]
    FileUnreadable {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("missing column {column:?} in header")]
    MissingColumn { column: &'static str },
    #[error("malformed row at line {row}: {reason}")]
    MalformedRow { row: usize, reason: String },
    #[error("unknown label {value:?} at line {row}")]
    UnknownLabel { row: usize, value: String },
    #[error("duplicate id {0:?}")]
    DuplicateId(String),
    #[error("no datasets given")]
    NoDatasets,
    #[error("datasets mix tasks {0} and {1}")]
    TaskMismatch(TaskKind, TaskKind),
    #[error("two datasets for language {0}")]
    DuplicateLanguage(Lang),
    #[error("gold labels disagree across languages for id {0:?}")]
    GoldDisagreement(String),
    #[error("language partitions share no example ids")]
    EmptyIntersection,
    #[error("text of {id:?} contains a tab or newline and cannot be written as TSV")]
    Unserializable { id: String },
}

/// Checks every [`Dataset`] invariant. An empty result means the dataset is well formed.
pub fn validate_dataset(ds: &Dataset) -> Vec<Violation> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for ex in &ds.examples {
        if !seen.insert(ex.id.as_str()) {
            out.push(Violation::DuplicateId(ex.id.clone()));
        }
        if ex.sentence1.trim().is_empty() {
            out.push(Violation::EmptySentence {
                id: ex.id.clone(),
                which: 1,
            });
        }
        if ex.sentence2.trim().is_empty() {
            out.push(Violation::EmptySentence {
                id: ex.id.clone(),
                which: 2,
            });
        }
        if ex.language != ds.language {
            out.push(Violation::LanguageMismatch {
                id: ex.id.clone(),
                found: ex.language,
            });
        }
        if !ds.task.accepts(ex.gold) {
            out.push(Violation::GoldOutsideLabelSet {
                id: ex.id.clone(),
                label: ex.gold,
            });
        }
    }
    out
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&Example> {
        self.examples.iter().find(|e| e.id == id)
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.examples.iter().map(|e| e.id.as_str())
    }

    /// Normalized dump: one JSON object per line with
    /// `id, sentence1, sentence2, gold, language`.
    pub fn to_jsonl(&self) -> String {
        crate::fsutil::to_jsonl(&self.examples).expect("examples serialize")
    }
}

/// Language partitions of one task, aligned by id.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParallelCorpus {
    pub task: TaskKind,
    pub per_language: BTreeMap<Lang, Dataset>,
}

impl ParallelCorpus {
    pub fn languages(&self) -> impl Iterator<Item = Lang> + '_ {
        self.per_language.keys().copied()
    }

    pub fn dataset(&self, lang: Lang) -> Option<&Dataset> {
        self.per_language.get(&lang)
    }

    fn any(&self) -> &Dataset {
        self.per_language
            .values()
            .next()
            .expect("corpus has at least one partition")
    }

    pub fn len(&self) -> usize {
        self.any().len()
    }

    pub fn is_empty(&self) -> bool {
        self.any().is_empty()
    }

    /// Example ids in corpus order.
    pub fn ids(&self) -> Vec<String> {
        self.any().ids().map(str::to_owned).collect()
    }

    pub fn golds(&self) -> HashMap<String, Label> {
        self.any()
            .examples
            .iter()
            .map(|e| (e.id.clone(), e.gold))
            .collect()
    }

    pub fn into_datasets(self) -> Vec<Dataset> {
        self.per_language.into_values().collect()
    }
}
