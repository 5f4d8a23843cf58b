use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{CorpusError, Dataset, Example, Label, Lang, TaskKind};

/// Column layouts of the public benchmark distributions.
///
/// Columns are resolved by header name, so reordered files parse the same.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DatasetFormat {
    /// `id, sentence1, sentence2, label` with label `0` (no) / `1` (yes).
    #[serde(rename = "pawsx-tsv")]
    PawsxTsv,
    /// `language, gold_label, …, sentence1|premise, sentence2|hypothesis, pairID`.
    /// Rows tagged with another language are skipped, so the multi-language
    /// XNLI test file can be read once per partition.
    #[serde(rename = "xnli-tsv")]
    XnliTsv,
}

impl std::str::FromStr for DatasetFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "pawsx-tsv" | "pawsx" => Ok(DatasetFormat::PawsxTsv),
            "xnli-tsv" | "xnli" => Ok(DatasetFormat::XnliTsv),
            other => Err(format!("unknown dataset format {other:?}")),
        }
    }
}

impl DatasetFormat {
    pub fn for_task(task: TaskKind) -> Self {
        match task {
            TaskKind::ParaphraseBinary => DatasetFormat::PawsxTsv,
            TaskKind::NliTernary => DatasetFormat::XnliTsv,
        }
    }
}

pub fn parse_dataset(
    path: &Path,
    task: TaskKind,
    language: Lang,
    format: DatasetFormat,
) -> Result<Dataset, CorpusError> {
    let bytes = std::fs::read(path).map_err(|source| CorpusError::FileUnreadable {
        path: path.to_owned(),
        source,
    })?;
    let text = String::from_utf8(bytes).map_err(|e| CorpusError::FileUnreadable {
        path: path.to_owned(),
        source: std::io::Error::new(std::io::ErrorKind::InvalidData, e),
    })?;
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    parse_dataset_str(&text, &name, task, language, format)
}

struct Columns {
    id: usize,
    s1: usize,
    s2: usize,
    label: usize,
    language: Option<usize>,
}

fn find(header: &csv::StringRecord, names: &[&str]) -> Option<usize> {
    names.iter().find_map(|name| {
        header
            .iter()
            .position(|h| h.trim().eq_ignore_ascii_case(name))
    })
}

fn resolve_columns(
    header: &csv::StringRecord,
    format: DatasetFormat,
) -> Result<Columns, CorpusError> {
    let need = |names: &[&str], column: &'static str| {
        find(header, names).ok_or(CorpusError::MissingColumn { column })
    };
    Ok(match format {
        DatasetFormat::PawsxTsv => Columns {
            id: need(&["id"], "id")?,
            s1: need(&["sentence1"], "sentence1")?,
            s2: need(&["sentence2"], "sentence2")?,
            label: need(&["label"], "label")?,
            language: None,
        },
        DatasetFormat::XnliTsv => Columns {
            id: need(&["pairID", "pair_id", "id"], "pairID")?,
            s1: need(&["sentence1", "premise"], "sentence1")?,
            s2: need(&["sentence2", "hypothesis"], "sentence2")?,
            label: need(&["gold_label", "label"], "gold_label")?,
            language: find(header, &["language"]),
        },
    })
}

fn map_label(format: DatasetFormat, raw: &str) -> Option<Label> {
    match (format, raw.trim()) {
        (DatasetFormat::PawsxTsv, "1") => Some(Label::Yes),
        (DatasetFormat::PawsxTsv, "0") => Some(Label::No),
        (DatasetFormat::XnliTsv, "entailment") => Some(Label::A),
        (DatasetFormat::XnliTsv, "contradiction") => Some(Label::B),
        (DatasetFormat::XnliTsv, "neutral") => Some(Label::C),
        _ => None,
    }
}

fn unmap_label(format: DatasetFormat, label: Label) -> Option<&'static str> {
    match (format, label) {
        (DatasetFormat::PawsxTsv, Label::Yes) => Some("1"),
        (DatasetFormat::PawsxTsv, Label::No) => Some("0"),
        (DatasetFormat::XnliTsv, Label::A) => Some("entailment"),
        (DatasetFormat::XnliTsv, Label::B) => Some("contradiction"),
        (DatasetFormat::XnliTsv, Label::C) => Some("neutral"),
        _ => None,
    }
}

/// Parses TSV text with a header row. Line numbers in errors are 1-based and
/// count the header.
pub fn parse_dataset_str(
    text: &str,
    source_name: &str,
    task: TaskKind,
    language: Lang,
    format: DatasetFormat,
) -> Result<Dataset, CorpusError> {
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(b'\t')
        .quoting(false)
        .flexible(true)
        .has_headers(true)
        .from_reader(text.as_bytes());
    let header = reader
        .headers()
        .map_err(|e| CorpusError::MalformedRow {
            row: 1,
            reason: e.to_string(),
        })?
        .clone();
    let cols = resolve_columns(&header, format)?;
    let width = header.len();

    let mut examples = Vec::new();
    let mut seen = HashSet::new();
    for (idx, record) in reader.records().enumerate() {
        let row = idx + 2;
        let record = record.map_err(|e| CorpusError::MalformedRow {
            row,
            reason: e.to_string(),
        })?;
        if record.len() == 1 && record.get(0).is_some_and(|f| f.trim().is_empty()) {
            continue;
        }
        if record.len() != width {
            return Err(CorpusError::MalformedRow {
                row,
                reason: format!("expected {width} fields, found {}", record.len()),
            });
        }
        if let Some(lang_col) = cols.language {
            if !record[lang_col]
                .trim()
                .eq_ignore_ascii_case(language.code())
            {
                continue;
            }
        }
        let id = record[cols.id].trim().to_owned();
        let sentence1 = record[cols.s1].to_owned();
        let sentence2 = record[cols.s2].to_owned();
        if id.is_empty() {
            return Err(CorpusError::MalformedRow {
                row,
                reason: "empty id".into(),
            });
        }
        if sentence1.trim().is_empty() || sentence2.trim().is_empty() {
            return Err(CorpusError::MalformedRow {
                row,
                reason: "empty sentence".into(),
            });
        }
        let raw_label = &record[cols.label];
        let gold = map_label(format, raw_label)
            .filter(|l| task.accepts(*l))
            .ok_or_else(|| CorpusError::UnknownLabel {
                row,
                value: raw_label.to_owned(),
            })?;
        if !seen.insert(id.clone()) {
            return Err(CorpusError::DuplicateId(id));
        }
        examples.push(Example {
            id,
            sentence1,
            sentence2,
            gold,
            language,
        });
    }

    Ok(Dataset {
        task,
        language,
        examples,
        source_name: source_name.to_owned(),
    })
}

/// Writes a dataset back in the given TSV layout.
pub fn serialize_dataset(ds: &Dataset, format: DatasetFormat) -> Result<String, CorpusError> {
    let mut out = String::new();
    match format {
        DatasetFormat::PawsxTsv => out.push_str("id\tsentence1\tsentence2\tlabel\n"),
        DatasetFormat::XnliTsv => {
            out.push_str("language\tgold_label\tpairID\tsentence1\tsentence2\n")
        }
    }
    for ex in &ds.examples {
        let clean = |s: &str| !s.contains(['\t', '\n', '\r']);
        if !clean(&ex.id) || !clean(&ex.sentence1) || !clean(&ex.sentence2) {
            return Err(CorpusError::Unserializable { id: ex.id.clone() });
        }
        let label = unmap_label(format, ex.gold).ok_or_else(|| CorpusError::UnknownLabel {
            row: 0,
            value: ex.gold.to_string(),
        })?;
        let line = match format {
            DatasetFormat::PawsxTsv => {
                format!("{}\t{}\t{}\t{}\n", ex.id, ex.sentence1, ex.sentence2, label)
            }
            DatasetFormat::XnliTsv => format!(
                "{}\t{}\t{}\t{}\t{}\n",
                ds.language, label, ex.id, ex.sentence1, ex.sentence2
            ),
        };
        out.push_str(&line);
    }
    Ok(out)
}
