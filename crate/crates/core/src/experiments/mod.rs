//! The condition matrix and its resumable execution.

mod condition;
mod plan;
mod runner;

pub use condition::{Condition, LangSpec, Scope};
pub use plan::{
    CometRef, DatasetRef, Direction, ExperimentPlan, Limits, Matrix, MixedCell, PlanError,
    ProviderConfig, ProviderKind, SyntheticCorpus,
};
pub use runner::{
    load_corpora, load_dumped_corpora, run_plan, ExperimentError, Harness, InstructionParts,
    ProviderChoice, RunDir, RunSummary, TranslationArtifact, CRASH_AFTER_ENV,
};
