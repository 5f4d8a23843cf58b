#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use multisense::experiments::{ExperimentPlan, SyntheticCorpus};
use multisense::metrics::{corpus_bleu, rouge, sentence_bleu};
use multisense::Lang;
use serde::Deserialize;

pub fn manifest_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

pub fn fixture(name: &str) -> PathBuf {
    manifest_dir().join("tests").join("fixtures").join(name)
}

#[derive(Debug, Deserialize)]
pub struct ParityRow {
    pub lang_pair: String,
    pub hypothesis: String,
    pub reference: String,
    pub expected_bleu: f64,
    pub expected_rouge1: f64,
    pub expected_rouge2: f64,
    pub expected_rougel: f64,
}

impl ParityRow {
    pub fn target(&self) -> Lang {
        self.lang_pair.split_once('-').unwrap().1.parse().unwrap()
    }
}

#[derive(Debug, Deserialize)]
pub struct CorpusFixture {
    pub sacrebleu_version: String,
    pub corpus_bleu: BTreeMap<String, f64>,
}

pub fn parity_rows() -> Vec<ParityRow> {
    multisense::fsutil::read_jsonl(&fixture("metric_parity.jsonl")).unwrap()
}

pub fn corpus_fixture() -> CorpusFixture {
    serde_json::from_str(&std::fs::read_to_string(fixture("metric_parity_corpus.json")).unwrap())
        .unwrap()
}

pub const BLEU_TOL: f64 = 0.1;
pub const ROUGE_TOL: f64 = 1e-4;

/// Every metric value off by more than the tolerance, as readable lines.
pub fn parity_mismatches() -> Vec<String> {
    let rows = parity_rows();
    let corpus = corpus_fixture();
    let mut bad = Vec::new();
    for r in &rows {
        let lang = r.target();
        let bleu = sentence_bleu(&r.hypothesis, &r.reference, lang);
        if (bleu - r.expected_bleu).abs() > BLEU_TOL {
            bad.push(format!(
                "sentence BLEU {:?}: {bleu} vs {}",
                r.hypothesis, r.expected_bleu
            ));
        }
        let s = rouge(&r.hypothesis, &r.reference, lang);
        for (name, got, want) in [
            ("ROUGE-1", s.rouge1, r.expected_rouge1),
            ("ROUGE-2", s.rouge2, r.expected_rouge2),
            ("ROUGE-L", s.rouge_l, r.expected_rougel),
        ] {
            if (got - want).abs() > ROUGE_TOL {
                bad.push(format!("{name} {:?}: {got} vs {want}", r.hypothesis));
            }
        }
    }
    for (pair, want) in &corpus.corpus_bleu {
        if pair == "example_sentence_bleu" {
            let got = sentence_bleu(
                "the cat sat on the mat",
                "the cat was sitting on the mat",
                Lang::En,
            );
            if (got - want).abs() > BLEU_TOL {
                bad.push(format!("example sentence BLEU: {got} vs {want}"));
            }
            continue;
        }
        let group: Vec<&ParityRow> = rows.iter().filter(|r| &r.lang_pair == pair).collect();
        let hyps: Vec<&str> = group.iter().map(|r| r.hypothesis.as_str()).collect();
        let refs: Vec<&str> = group.iter().map(|r| r.reference.as_str()).collect();
        let got = corpus_bleu(&hyps, &refs, group[0].target()).unwrap();
        if (got - want).abs() > BLEU_TOL {
            bad.push(format!("corpus BLEU {pair}: {got} vs {want}"));
        }
    }
    bad
}

/// The shipped offline preset, resized.
pub fn synthetic_plan(examples: usize, mock: &str) -> ExperimentPlan {
    let mut plan =
        ExperimentPlan::load(&manifest_dir().join("plans").join("full-synthetic.toml")).unwrap();
    plan.synthetic = Some(SyntheticCorpus {
        examples,
        seed: Some(11),
    });
    plan.provider.mock = mock.to_owned();
    plan
}

pub fn read(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}
