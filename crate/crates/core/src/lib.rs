//! Multilingual self-consistency evaluation for instruction-following models.
//!
//! The model under test translates task instructions and inputs into other
//! languages itself; answering the same benchmark items in every rendering
//! and comparing the answers measures how language-independent its task
//! understanding is.
//!
//! Layout:
//! - [`corpus`]: parallel classification benchmarks (PAWS-X, XNLI style TSV).
//! - [`prompting`]: instruction templates, translation instructions, rendering.
//! - [`modelgw`]: cached, journaled, retrying gateway to the model (HTTP or mock).
//! - [`standardize`]: reply → label mapping with a reviewable ledger.
//! - [`metrics`]: accuracy, consistency, BLEU, ROUGE, Pearson correlation.
//! - [`experiments`]: condition matrix, translation artifacts, resumable runs.
//! - [`report`]: analysis tables and their Markdown / CSV renderings.

pub mod cli;
pub mod corpus;
pub mod experiments;
pub mod fsutil;
pub mod metrics;
pub mod modelgw;
pub mod prompting;
pub mod report;
pub mod standardize;

pub use corpus::{Dataset, Example, Label, Lang, ParallelCorpus, TaskKind};
pub use experiments::{Condition, ExperimentPlan, LangSpec};
pub use metrics::RunRecord;
