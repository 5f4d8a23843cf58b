//! Accuracy, consistency, translation quality and correlation measures.

pub mod bleu;
pub mod rouge;
pub mod tokenize;

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Label, Lang};
use crate::experiments::Condition;
use crate::standardize::MatchRule;

pub use bleu::{corpus_bleu, corpus_bleu_with, sentence_bleu, BleuConfig, Smoothing};
pub use rouge::{rouge, RougeScores};

/// The persisted unit of scoring: one standardized reply.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub condition: Condition,
    pub example_id: String,
    pub label: Label,
    pub raw: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rule: Option<MatchRule>,
    /// Cache key of the request, linking the record to its journal entry.
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub prompt_key: String,
}

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("no records to score")]
    EmptyInput,
    #[error("runs cover different example ids ({only_a} only in the first, {only_b} only in the second; e.g. {example:?})")]
    IdMismatch {
        only_a: usize,
        only_b: usize,
        example: String,
    },
    #[error("example {0:?} appears more than once in a run")]
    DuplicateRecord(String),
    #[error("no gold label for example {0:?}")]
    MissingGold(String),
    #[error("series lengths differ ({left} vs {right})")]
    LengthMismatch { left: usize, right: usize },
    #[error("need at least two data points, got {0}")]
    TooFew(usize),
    #[error("correlation undefined: a series has zero variance")]
    ZeroVariance,
    #[error("no quality score for example {0:?}")]
    MissingScore(String),
    #[error("no example reaches the quality threshold {0}")]
    EmptySubset(f64),
}

fn label_map(records: &[RunRecord]) -> Result<BTreeMap<&str, Label>, MetricsError> {
    let mut m = BTreeMap::new();
    for r in records {
        if m.insert(r.example_id.as_str(), r.label).is_some() {
            return Err(MetricsError::DuplicateRecord(r.example_id.clone()));
        }
    }
    Ok(m)
}

/// Labels of both runs by id, in id order. Fails unless the id sets match.
fn paired<'a>(
    run_a: &'a [RunRecord],
    run_b: &'a [RunRecord],
) -> Result<Vec<(&'a str, Label, Label)>, MetricsError> {
    let a = label_map(run_a)?;
    let b = label_map(run_b)?;
    let only_a: Vec<&str> = a.keys().filter(|k| !b.contains_key(*k)).copied().collect();
    let only_b: Vec<&str> = b.keys().filter(|k| !a.contains_key(*k)).copied().collect();
    if !only_a.is_empty() || !only_b.is_empty() {
        let example = only_a.first().or(only_b.first()).unwrap().to_string();
        return Err(MetricsError::IdMismatch {
            only_a: only_a.len(),
            only_b: only_b.len(),
            example,
        });
    }
    if a.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    Ok(a.into_iter().map(|(id, la)| (id, la, b[id])).collect())
}

fn gold_of(golds: &HashMap<String, Label>, id: &str) -> Result<Label, MetricsError> {
    golds
        .get(id)
        .copied()
        .ok_or_else(|| MetricsError::MissingGold(id.to_owned()))
}

/// Fraction of records whose label equals the gold label. INVALID is never correct.
pub fn accuracy(
    records: &[RunRecord],
    golds: &HashMap<String, Label>,
) -> Result<f64, MetricsError> {
    if records.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    let mut hits = 0usize;
    for r in records {
        if gold_of(golds, &r.example_id)? == r.label {
            hits += 1;
        }
    }
    Ok(hits as f64 / records.len() as f64)
}

/// Fraction of examples on which two runs give the same label.
pub fn consistency(run_a: &[RunRecord], run_b: &[RunRecord]) -> Result<f64, MetricsError> {
    let pairs = paired(run_a, run_b)?;
    let agree = pairs.iter().filter(|(_, a, b)| a == b).count();
    Ok(agree as f64 / pairs.len() as f64)
}

/// Consistency overall and split by whether the source run answered correctly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyReport {
    pub all: f64,
    pub correct: Option<f64>,
    pub incorrect: Option<f64>,
    pub n: usize,
    pub n_correct: usize,
    pub n_incorrect: usize,
}

impl ConsistencyReport {
    /// `all` minus the size-weighted mean of the two partitions.
    pub fn residual(&self) -> f64 {
        let part = |v: Option<f64>, k: usize| v.map_or(0.0, |v| v * k as f64);
        self.all
            - (part(self.correct, self.n_correct) + part(self.incorrect, self.n_incorrect))
                / self.n as f64
    }
}

/// Partitions by correctness of `run_src`; not symmetric in its arguments.
pub fn consistency_breakdown(
    run_src: &[RunRecord],
    run_tgt: &[RunRecord],
    golds: &HashMap<String, Label>,
) -> Result<ConsistencyReport, MetricsError> {
    let pairs = paired(run_src, run_tgt)?;
    let (mut n_c, mut agree_c, mut n_i, mut agree_i) = (0usize, 0usize, 0usize, 0usize);
    for (id, a, b) in &pairs {
        let agree = usize::from(a == b);
        if gold_of(golds, id)? == *a {
            n_c += 1;
            agree_c += agree;
        } else {
            n_i += 1;
            agree_i += agree;
        }
    }
    let frac = |k: usize, n: usize| (n > 0).then(|| k as f64 / n as f64);
    Ok(ConsistencyReport {
        all: (agree_c + agree_i) as f64 / pairs.len() as f64,
        correct: frac(agree_c, n_c),
        incorrect: frac(agree_i, n_i),
        n: pairs.len(),
        n_correct: n_c,
        n_incorrect: n_i,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrelationResult {
    pub rho: f64,
    pub n: usize,
}

/// Sample Pearson correlation.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<CorrelationResult, MetricsError> {
    if xs.len() != ys.len() {
        return Err(MetricsError::LengthMismatch {
            left: xs.len(),
            right: ys.len(),
        });
    }
    let n = xs.len();
    if n < 2 {
        return Err(MetricsError::TooFew(n));
    }
    let mx = xs.iter().sum::<f64>() / n as f64;
    let my = ys.iter().sum::<f64>() / n as f64;
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(MetricsError::ZeroVariance);
    }
    Ok(CorrelationResult {
        rho: (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0),
        n,
    })
}

/// How the two sentence scores of an example combine into one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QualityAggregate {
    #[default]
    Mean,
    /// The worse of the two sentences; thresholds then apply to each sentence.
    Min,
}

/// Per-example quality from the sentence-level scores of both sentences.
pub fn per_example_quality(
    scores: &BTreeMap<String, [Option<f64>; 2]>,
    aggregate: QualityAggregate,
) -> Result<BTreeMap<String, f64>, MetricsError> {
    scores
        .iter()
        .map(|(id, pair)| match pair {
            [Some(a), Some(b)] => Ok((
                id.clone(),
                match aggregate {
                    QualityAggregate::Mean => (a + b) / 2.0,
                    QualityAggregate::Min => a.min(*b),
                },
            )),
            _ => Err(MetricsError::MissingScore(id.clone())),
        })
        .collect()
}

fn quality_of(quality: &BTreeMap<String, f64>, id: &str) -> Result<f64, MetricsError> {
    quality
        .get(id)
        .copied()
        .ok_or_else(|| MetricsError::MissingScore(id.to_owned()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdedConsistency {
    pub consistency: f64,
    /// Percentage (0-100) of examples at or above the threshold.
    pub pct_included: f64,
    pub n_included: usize,
    pub n_total: usize,
}

/// Consistency restricted to examples whose quality is at least `threshold`.
pub fn thresholded_consistency(
    run_a: &[RunRecord],
    run_b: &[RunRecord],
    quality: &BTreeMap<String, f64>,
    threshold: f64,
) -> Result<ThresholdedConsistency, MetricsError> {
    let pairs = paired(run_a, run_b)?;
    let (mut included, mut agree) = (0usize, 0usize);
    for (id, a, b) in &pairs {
        if quality_of(quality, id)? >= threshold {
            included += 1;
            agree += usize::from(a == b);
        }
    }
    if included == 0 {
        return Err(MetricsError::EmptySubset(threshold));
    }
    Ok(ThresholdedConsistency {
        consistency: agree as f64 / included as f64,
        pct_included: 100.0 * included as f64 / pairs.len() as f64,
        n_included: included,
        n_total: pairs.len(),
    })
}

/// Pearson correlation between per-example quality and binary agreement.
pub fn correlate_quality_consistency(
    run_a: &[RunRecord],
    run_b: &[RunRecord],
    quality: &BTreeMap<String, f64>,
) -> Result<CorrelationResult, MetricsError> {
    let pairs = paired(run_a, run_b)?;
    let mut xs = Vec::with_capacity(pairs.len());
    let mut ys = Vec::with_capacity(pairs.len());
    for (id, a, b) in &pairs {
        xs.push(quality_of(quality, id)?);
        ys.push(f64::from(u8::from(a == b)));
    }
    pearson(&xs, &ys)
}

/// Pearson correlation between per-example quality and binary correctness.
pub fn correlate_quality_accuracy(
    run_tgt: &[RunRecord],
    golds: &HashMap<String, Label>,
    quality: &BTreeMap<String, f64>,
) -> Result<CorrelationResult, MetricsError> {
    let labels = label_map(run_tgt)?;
    let mut xs = Vec::with_capacity(labels.len());
    let mut ys = Vec::with_capacity(labels.len());
    for (id, label) in labels {
        xs.push(quality_of(quality, id)?);
        ys.push(f64::from(u8::from(gold_of(golds, id)? == label)));
    }
    pearson(&xs, &ys)
}

/// Quality of one direction's sentence translations against the original
/// sentences of the target language.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranslationQuality {
    pub corpus_bleu: f64,
    pub rouge1: f64,
    pub rouge2: f64,
    pub rouge_l: f64,
    #[serde(default)]
    pub comet: Option<f64>,
    pub per_example_bleu: BTreeMap<String, f64>,
    pub segments: usize,
}

/// Both translated sentences of one example with their references.
#[derive(Debug, Clone, Copy)]
pub struct PairTranslation<'a> {
    pub id: &'a str,
    pub hypotheses: [&'a str; 2],
    pub references: [&'a str; 2],
}

pub fn translation_quality(
    pairs: &[PairTranslation<'_>],
    lang: Lang,
    aggregate: QualityAggregate,
) -> Result<TranslationQuality, MetricsError> {
    if pairs.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    let hyps: Vec<&str> = pairs.iter().flat_map(|p| p.hypotheses).collect();
    let refs: Vec<&str> = pairs.iter().flat_map(|p| p.references).collect();
    let corpus = corpus_bleu(&hyps, &refs, lang)?;

    let mut sums = RougeScores::default();
    for (h, r) in hyps.iter().zip(&refs) {
        let s = rouge(h, r, lang);
        sums.rouge1 += s.rouge1;
        sums.rouge2 += s.rouge2;
        sums.rouge_l += s.rouge_l;
    }
    let k = hyps.len() as f64;

    let sentence: BTreeMap<String, [Option<f64>; 2]> = pairs
        .iter()
        .map(|p| {
            let s = |i: usize| Some(sentence_bleu(p.hypotheses[i], p.references[i], lang));
            (p.id.to_owned(), [s(0), s(1)])
        })
        .collect();
    Ok(TranslationQuality {
        corpus_bleu: corpus,
        rouge1: sums.rouge1 / k,
        rouge2: sums.rouge2 / k,
        rouge_l: sums.rouge_l / k,
        comet: None,
        per_example_bleu: per_example_quality(&sentence, aggregate)?,
        segments: hyps.len(),
    })
}

#[derive(Debug, Deserialize)]
struct CometRecord {
    id: String,
    score: f64,
}

/// Reads externally computed COMET scores, one `{id, score}` JSON object per line.
pub fn read_comet_scores(path: &Path) -> anyhow::Result<BTreeMap<String, f64>> {
    Ok(crate::fsutil::read_jsonl::<CometRecord>(path)?
        .into_iter()
        .map(|r| (r.id, r.score))
        .collect())
}

impl TranslationQuality {
    /// Sets `comet` to the mean external score over this direction's examples.
    pub fn merge_comet(&mut self, scores: &BTreeMap<String, f64>) {
        let found: Vec<f64> = self
            .per_example_bleu
            .keys()
            .filter_map(|id| scores.get(id).copied())
            .collect();
        self.comet = (!found.is_empty()).then(|| found.iter().sum::<f64>() / found.len() as f64);
    }
}
