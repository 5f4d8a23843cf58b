//! The analysis suite over a finished run, and its renderings.
//!
//! Consistency of a translated condition is always measured against the
//! baseline in the translation's source language.

mod render;

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Label, Lang, ParallelCorpus, TaskKind};
use crate::experiments::{
    load_dumped_corpora, Condition, Direction, ExperimentPlan, ProviderKind, RunDir, Scope,
    TranslationArtifact,
};
use crate::fsutil;
use crate::metrics::{
    accuracy, consistency, consistency_breakdown, correlate_quality_accuracy,
    correlate_quality_consistency, read_comet_scores, thresholded_consistency, translation_quality,
    MetricsError, PairTranslation, QualityAggregate, RunRecord, TranslationQuality,
};
use crate::modelgw::GenerationParams;
use crate::prompting::Purpose;
use crate::standardize::MappingLedger;

pub use render::{parse_csv, to_csv, to_markdown};

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("no records")]
    NoRecords,
    #[error("incomplete run; missing conditions: {}", .0.join(", "))]
    IncompleteRun(Vec<String>),
    #[error("{0}")]
    Io(String),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("unknown report format {0:?} (expected md or csv)")]
    UnknownFormat(String),
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> ReportError {
    ReportError::Io(format!("{}: {e}", path.display()))
}

/// One table cell; `n` is the number of examples behind the value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub value: Option<f64>,
    pub n: usize,
}

impl Cell {
    pub fn new(value: f64, n: usize) -> Self {
        Cell {
            value: Some(value),
            n,
        }
    }
    pub fn empty() -> Self {
        Cell { value: None, n: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub label: String,
    pub cells: Vec<Cell>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub key: String,
    pub title: String,
    pub columns: Vec<String>,
    pub rows: Vec<Row>,
    pub notes: Vec<String>,
}

impl Table {
    fn new(key: &str, title: &str, columns: &[&str], notes: &[&str]) -> Self {
        Table {
            key: key.into(),
            title: title.into(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
            notes: notes.iter().map(|c| c.to_string()).collect(),
        }
    }

    pub fn cell(&self, row: &str, column: &str) -> Option<Cell> {
        let c = self.columns.iter().position(|x| x == column)?;
        self.rows
            .iter()
            .find(|r| r.label == row)
            .map(|r| r.cells[c])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub plan: String,
    pub model: String,
    pub provider: String,
    pub task_params: GenerationParams,
    pub translation_params: GenerationParams,
    pub ledger_sha256: String,
    pub seed: u64,
    pub threshold: f64,
    pub quality_aggregate: QualityAggregate,
    pub bleu: String,
    pub rouge: String,
    pub examples: BTreeMap<String, usize>,
    /// Fraction of INVALID labels per condition slug.
    pub invalid_rate: BTreeMap<String, f64>,
    pub omitted_tasks: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportBundle {
    pub consistency: Table,
    pub quality: Table,
    pub correlation: Table,
    pub accuracy: Table,
    pub breakdown: Table,
    pub thresholded: Table,
    pub mixed: Table,
    pub metadata: Metadata,
}

impl ReportBundle {
    pub fn tables(&self) -> [&Table; 7] {
        [
            &self.consistency,
            &self.quality,
            &self.correlation,
            &self.accuracy,
            &self.breakdown,
            &self.thresholded,
            &self.mixed,
        ]
    }

    /// Every cell keyed by (table, row, column).
    pub fn values(&self) -> BTreeMap<(String, String, String), Cell> {
        let mut out = BTreeMap::new();
        for t in self.tables() {
            for r in &t.rows {
                for (c, cell) in t.columns.iter().zip(&r.cells) {
                    out.insert((t.key.clone(), r.label.clone(), c.clone()), *cell);
                }
            }
        }
        out
    }
}

/// Everything a report is computed from, as stored in a run directory.
pub struct RunData {
    pub plan: ExperimentPlan,
    pub corpora: BTreeMap<TaskKind, ParallelCorpus>,
    pub artifacts: BTreeMap<(TaskKind, Direction), TranslationArtifact>,
    pub records: BTreeMap<Condition, Vec<RunRecord>>,
    pub ledger: MappingLedger,
}

impl RunData {
    pub fn load(root: &Path) -> Result<Self, ReportError> {
        let dir = RunDir::new(root);
        if !dir.plan().exists() {
            return Err(ReportError::NoRecords);
        }
        let plan = ExperimentPlan::load(&dir.plan()).map_err(|e| io_err(&dir.plan(), e))?;
        let corpora =
            load_dumped_corpora(&dir, &plan).map_err(|e| ReportError::Io(e.to_string()))?;
        let mut artifacts = BTreeMap::new();
        for (task, d) in plan.translation_needs() {
            let path = dir.artifact(task, d);
            if path.exists() {
                let a =
                    TranslationArtifact::load(&path).map_err(|e| ReportError::Io(e.to_string()))?;
                artifacts.insert((task, d), a);
            }
        }
        let mut records = BTreeMap::new();
        for cond in plan.conditions() {
            let path = dir.records(&cond);
            if path.exists() {
                records.insert(
                    cond,
                    fsutil::read_jsonl(&path).map_err(|e| io_err(&path, e))?,
                );
            }
        }
        let ledger_path = plan.ledger.clone().unwrap_or_else(|| dir.default_ledger());
        let ledger =
            MappingLedger::load(&ledger_path).map_err(|e| ReportError::Io(e.to_string()))?;
        Ok(RunData {
            plan,
            corpora,
            artifacts,
            records,
            ledger,
        })
    }
}

fn direction_label(task: TaskKind, d: Direction) -> String {
    format!("{} {}→{}", task.display_name(), d.src, d.tgt)
}

/// A metric that is undefined for the data (no variance, empty subset)
/// becomes an empty cell; anything else is an error.
fn soft<T>(r: Result<T, MetricsError>) -> Result<Option<T>, ReportError> {
    match r {
        Ok(v) => Ok(Some(v)),
        Err(
            MetricsError::ZeroVariance | MetricsError::EmptySubset(_) | MetricsError::TooFew(_),
        ) => Ok(None),
        Err(e) => Err(e.into()),
    }
}

struct Ctx<'a> {
    data: &'a RunData,
    golds: BTreeMap<TaskKind, HashMap<String, Label>>,
    quality: BTreeMap<(TaskKind, Direction), TranslationQuality>,
}

impl Ctx<'_> {
    fn records(&self, c: &Condition) -> Option<&[RunRecord]> {
        self.data.records.get(c).map(Vec::as_slice)
    }

    fn golds(&self, task: TaskKind) -> &HashMap<String, Label> {
        &self.golds[&task]
    }

    fn directions(&self) -> Vec<(TaskKind, Direction)> {
        let p = &self.data.plan;
        p.matrix
            .tasks
            .iter()
            .flat_map(|&t| p.matrix.directions.iter().map(move |&d| (t, d)))
            .collect()
    }

    fn accuracy_cell(&self, c: &Condition) -> Result<Cell, ReportError> {
        Ok(match self.records(c) {
            Some(r) => Cell::new(accuracy(r, self.golds(c.task))?, r.len()),
            None => Cell::empty(),
        })
    }

    fn consistency_cell(&self, a: &Condition, b: &Condition) -> Result<Cell, ReportError> {
        Ok(match (self.records(a), self.records(b)) {
            (Some(ra), Some(rb)) => Cell::new(consistency(ra, rb)?, ra.len()),
            _ => Cell::empty(),
        })
    }
}

fn quality_of(
    data: &RunData,
    task: TaskKind,
    d: Direction,
) -> Result<Option<TranslationQuality>, ReportError> {
    let (Some(art), Some(refs)) = (
        data.artifacts.get(&(task, d)),
        data.corpora.get(&task).and_then(|c| c.dataset(d.tgt)),
    ) else {
        return Ok(None);
    };
    let mut pairs = Vec::new();
    for ex in &refs.examples {
        if let Some([h1, h2]) = art.sentences.get(&ex.id) {
            pairs.push(PairTranslation {
                id: &ex.id,
                hypotheses: [h1, h2],
                references: [&ex.sentence1, &ex.sentence2],
            });
        }
    }
    let mut q = translation_quality(&pairs, d.tgt, data.plan.quality_aggregate)?;
    if let Some(c) = data
        .plan
        .comet
        .iter()
        .find(|c| c.task == task && c.direction == d)
    {
        let scores = read_comet_scores(&c.path).map_err(|e| io_err(&c.path, e))?;
        q.merge_comet(&scores);
    }
    Ok(Some(q))
}

const BASELINE_NOTE: &str =
    "Paired baseline: T_src, the original instruction and data in the translation's source language.";

/// Computes every table. Fails if the run has no records or lacks any
/// planned condition.
pub fn build_bundle(data: &RunData) -> Result<ReportBundle, ReportError> {
    if data.records.values().all(|r| r.is_empty()) {
        return Err(ReportError::NoRecords);
    }
    let missing: Vec<String> = data
        .plan
        .conditions()
        .iter()
        .filter(|c| !data.records.contains_key(c))
        .map(|c| c.to_string())
        .collect();
    if !missing.is_empty() {
        return Err(ReportError::IncompleteRun(missing));
    }

    let mut ctx = Ctx {
        data,
        golds: data.corpora.iter().map(|(t, c)| (*t, c.golds())).collect(),
        quality: BTreeMap::new(),
    };
    for (task, d) in ctx.directions() {
        if let Some(q) = quality_of(data, task, d)? {
            ctx.quality.insert((task, d), q);
        }
    }
    let threshold = data.plan.threshold;

    // Consistency of T / I / X against the source baseline.
    let mut consistency_t = Table::new(
        "consistency",
        "Consistency with the source-language baseline",
        &["T", "I", "X"],
        &[BASELINE_NOTE],
    );
    // Translation quality against the original target-language sentences.
    let mut quality_t = Table::new(
        "quality",
        "Quality of the model's own translations",
        &["BLEU", "ROUGE-1", "ROUGE-2", "ROUGE-L", "COMET"],
        &["References: the original sentences in the target language. ROUGE is F1; COMET is ingested, not computed."],
    );
    let mut corr_t = Table::new(
        "correlation",
        "Pearson correlation of per-example BLEU with consistency and accuracy",
        &["consistency T", "consistency X", "accuracy T", "accuracy X"],
        &[BASELINE_NOTE, "Per-example BLEU: mean sentence BLEU of both translated sentences (or the minimum, per plan)."],
    );
    let mut breakdown_t = Table::new(
        "breakdown",
        "Consistency split by correctness of the source run",
        &["source accuracy", "all", "correct", "incorrect"],
        &[
            "Translated rows: T_src→tgt against T_src. Repeat rows: a second run of T_src against the first.",
            "Partitions follow the correctness of the source-language run.",
        ],
    );
    let thr_col = format!("T (BLEU ≥ {threshold})");
    let thr_x = format!("X (BLEU ≥ {threshold})");
    let mut thresholded_t = Table::new(
        "thresholded",
        "Consistency restricted to well-translated examples",
        &[thr_col.as_str(), thr_x.as_str(), "% included"],
        &[BASELINE_NOTE],
    );
    let mut accuracy_t = Table::new(
        "accuracy",
        "Accuracy on the original and the model-translated task",
        &["original", "T", "I", "X"],
        &["Rows per language: original instruction and data. Rows per direction: translated conditions."],
    );

    for &task in &data.plan.matrix.tasks {
        for &l in &data.plan.matrix.baselines {
            let c = Condition::baseline(task, l);
            accuracy_t.rows.push(Row {
                label: format!("{} {l}", task.display_name()),
                cells: vec![
                    ctx.accuracy_cell(&c)?,
                    Cell::empty(),
                    Cell::empty(),
                    Cell::empty(),
                ],
            });
        }
    }

    for (task, d) in ctx.directions() {
        let label = direction_label(task, d);
        let base = Condition::baseline(task, d.src);
        let cond = |s: Scope| Condition::translated(task, s, d.src, d.tgt);
        let scopes = &data.plan.matrix.scopes;
        let planned = |s: Scope| scopes.contains(&s);

        let mut cells = Vec::new();
        for s in [Scope::T, Scope::I, Scope::X] {
            cells.push(if planned(s) {
                ctx.consistency_cell(&base, &cond(s))?
            } else {
                Cell::empty()
            });
        }
        consistency_t.rows.push(Row {
            label: label.clone(),
            cells,
        });

        let mut acc = vec![Cell::empty()];
        for s in [Scope::T, Scope::I, Scope::X] {
            acc.push(if planned(s) {
                ctx.accuracy_cell(&cond(s))?
            } else {
                Cell::empty()
            });
        }
        accuracy_t.rows.push(Row {
            label: label.clone(),
            cells: acc,
        });

        let q = ctx.quality.get(&(task, d));
        quality_t.rows.push(Row {
            label: label.clone(),
            cells: match q {
                Some(q) => vec![
                    Cell::new(q.corpus_bleu, q.segments),
                    Cell::new(q.rouge1, q.segments),
                    Cell::new(q.rouge2, q.segments),
                    Cell::new(q.rouge_l, q.segments),
                    Cell {
                        value: q.comet,
                        n: if q.comet.is_some() {
                            q.per_example_bleu.len()
                        } else {
                            0
                        },
                    },
                ],
                None => vec![Cell::empty(); 5],
            },
        });

        let mut corr = Vec::new();
        let mut thr = Vec::new();
        for s in [Scope::T, Scope::X] {
            let pair = (ctx.records(&base), ctx.records(&cond(s)), q);
            corr.push(match pair {
                (Some(a), Some(b), Some(q)) if planned(s) => {
                    let r = soft(correlate_quality_consistency(a, b, &q.per_example_bleu))?;
                    Cell {
                        value: r.map(|r| r.rho),
                        n: a.len(),
                    }
                }
                _ => Cell::empty(),
            });
            thr.push(match pair {
                (Some(a), Some(b), Some(q)) if planned(s) => {
                    let r = soft(thresholded_consistency(
                        a,
                        b,
                        &q.per_example_bleu,
                        threshold,
                    ))?;
                    Cell {
                        value: r.map(|r| r.consistency),
                        n: r.map_or(0, |r| r.n_included),
                    }
                }
                _ => Cell::empty(),
            });
        }
        for s in [Scope::T, Scope::X] {
            corr.push(match (ctx.records(&cond(s)), q) {
                (Some(b), Some(q)) if planned(s) => {
                    let r = soft(correlate_quality_accuracy(
                        b,
                        ctx.golds(task),
                        &q.per_example_bleu,
                    ))?;
                    Cell {
                        value: r.map(|r| r.rho),
                        n: b.len(),
                    }
                }
                _ => Cell::empty(),
            });
        }
        corr_t.rows.push(Row {
            label: label.clone(),
            cells: corr,
        });
        let pct = match (ctx.records(&base), ctx.records(&cond(Scope::T)), q) {
            (Some(a), Some(b), Some(q)) if planned(Scope::T) => {
                match soft(thresholded_consistency(
                    a,
                    b,
                    &q.per_example_bleu,
                    threshold,
                ))? {
                    Some(r) => Cell::new(r.pct_included, r.n_total),
                    None => Cell::new(0.0, a.len()),
                }
            }
            _ => Cell::empty(),
        };
        thr.push(pct);
        thresholded_t.rows.push(Row {
            label: label.clone(),
            cells: thr,
        });

        if planned(Scope::T) {
            breakdown_t
                .rows
                .push(breakdown_row(&ctx, label, &base, &cond(Scope::T))?);
        }
    }
    for &task in &data.plan.matrix.tasks {
        for &l in &data.plan.matrix.repeat {
            let base = Condition::baseline(task, l);
            let label = format!("{} {l} (repeat)", task.display_name());
            breakdown_t
                .rows
                .push(breakdown_row(&ctx, label, &base, &base.with_repeat(1))?);
        }
    }

    let mixed_t = mixed_table(&ctx)?;
    let metadata = metadata(data)?;
    Ok(ReportBundle {
        consistency: consistency_t,
        quality: quality_t,
        correlation: corr_t,
        accuracy: accuracy_t,
        breakdown: breakdown_t,
        thresholded: thresholded_t,
        mixed: mixed_t,
        metadata,
    })
}

fn breakdown_row(
    ctx: &Ctx<'_>,
    label: String,
    src: &Condition,
    tgt: &Condition,
) -> Result<Row, ReportError> {
    let cells = match (ctx.records(src), ctx.records(tgt)) {
        (Some(a), Some(b)) => {
            let r = consistency_breakdown(a, b, ctx.golds(src.task))?;
            vec![
                Cell::new(r.n_correct as f64 / r.n as f64, r.n),
                Cell::new(r.all, r.n),
                Cell {
                    value: r.correct,
                    n: r.n_correct,
                },
                Cell {
                    value: r.incorrect,
                    n: r.n_incorrect,
                },
            ]
        }
        _ => vec![Cell::empty(); 4],
    };
    Ok(Row { label, cells })
}

fn mixed_table(ctx: &Ctx<'_>) -> Result<Table, ReportError> {
    let cols: Vec<String> = Lang::ALL
        .iter()
        .map(|l| format!("instruction {l}"))
        .collect();
    let col_refs: Vec<&str> = cols.iter().map(String::as_str).collect();
    let mut t = Table::new(
        "mixed",
        "Accuracy with original data and original instructions in mixed languages",
        &col_refs,
        &["Rows: language of the data. Diagonal cells are the baselines."],
    );
    let plan = &ctx.data.plan;
    for &task in &plan.matrix.tasks {
        for data_lang in Lang::ALL {
            let cells = Lang::ALL
                .iter()
                .map(|&instr| {
                    let c = Condition::mixed(task, data_lang, instr);
                    if ctx.data.records.contains_key(&c) {
                        ctx.accuracy_cell(&c)
                    } else {
                        Ok(Cell::empty())
                    }
                })
                .collect::<Result<Vec<_>, _>>()?;
            let has_mixed = plan.matrix.mixed.iter().any(|m| m.data == data_lang);
            if has_mixed {
                t.rows.push(Row {
                    label: format!("{} data {data_lang}", task.display_name()),
                    cells,
                });
            }
        }
    }
    Ok(t)
}

fn metadata(data: &RunData) -> Result<Metadata, ReportError> {
    let plan = &data.plan;
    let provider = match plan.provider.kind {
        ProviderKind::Http => format!("http {}", plan.provider.base_url.as_deref().unwrap_or("")),
        ProviderKind::Mock => format!("mock:{}", plan.provider.mock),
    };
    let invalid_rate = data
        .records
        .iter()
        .map(|(c, r)| {
            let invalid = r.iter().filter(|x| x.label == Label::Invalid).count();
            (
                c.slug(),
                if r.is_empty() {
                    0.0
                } else {
                    invalid as f64 / r.len() as f64
                },
            )
        })
        .collect();
    Ok(Metadata {
        plan: plan.name.clone(),
        model: plan.provider.model.clone(),
        provider,
        task_params: GenerationParams::for_purpose(&plan.provider.model, Purpose::Task),
        translation_params: GenerationParams::for_purpose(&plan.provider.model, Purpose::Translation),
        ledger_sha256: data.ledger.content_hash(),
        seed: plan.seed,
        threshold: plan.threshold,
        quality_aggregate: plan.quality_aggregate,
        bleu: "BLEU-4; tokenizer 13a (en, de) or zh; corpus: no smoothing; sentence: exp smoothing, effective order"
            .into(),
        rouge: "F1, on the BLEU tokens".into(),
        examples: data.corpora.iter().map(|(t, c)| (t.short_name().to_owned(), c.len())).collect(),
        invalid_rate,
        omitted_tasks: TaskKind::ALL
            .iter()
            .filter(|t| !plan.matrix.tasks.contains(t))
            .map(|t| t.display_name().to_owned())
            .collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Markdown,
    Csv,
}

impl std::str::FromStr for Format {
    type Err = ReportError;
    fn from_str(s: &str) -> Result<Self, ReportError> {
        match s.trim() {
            "md" | "markdown" => Ok(Format::Markdown),
            "csv" => Ok(Format::Csv),
            other => Err(ReportError::UnknownFormat(other.to_owned())),
        }
    }
}

/// Writes `report.md`, `report.csv` and `metadata.json` into `dir`.
pub fn emit_reports(
    bundle: &ReportBundle,
    dir: &Path,
    formats: &[Format],
) -> Result<Vec<std::path::PathBuf>, ReportError> {
    let mut written = Vec::new();
    let mut write = |name: &str, text: String| -> Result<(), ReportError> {
        let path = dir.join(name);
        fsutil::atomic_write(&path, text.as_bytes()).map_err(|e| io_err(&path, e))?;
        written.push(path);
        Ok(())
    };
    for f in formats {
        match f {
            Format::Markdown => write("report.md", to_markdown(bundle))?,
            Format::Csv => write("report.csv", to_csv(bundle))?,
        }
    }
    write(
        "metadata.json",
        serde_json::to_string_pretty(&bundle.metadata).expect("metadata serializes") + "\n",
    )?;
    Ok(written)
}

/// Loads a run directory, builds the bundle and writes it to `reports/`.
pub fn generate(run_dir: &Path, formats: &[Format]) -> Result<ReportBundle, ReportError> {
    let data = RunData::load(run_dir)?;
    let bundle = build_bundle(&data)?;
    emit_reports(&bundle, &RunDir::new(run_dir).reports(), formats)?;
    Ok(bundle)
}
