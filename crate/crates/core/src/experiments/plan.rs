use std::collections::BTreeSet;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::condition::{Condition, Scope};
use crate::corpus::{DatasetFormat, Lang, TaskKind};
use crate::metrics::QualityAggregate;

/// A translation direction, written `"en>de"`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Direction {
    pub src: Lang,
    pub tgt: Lang,
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}>{}", self.src, self.tgt)
    }
}

impl FromStr for Direction {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (src, tgt) = s
            .split_once('>')
            .ok_or_else(|| format!("expected SRC>TGT, got {s:?}"))?;
        let (src, tgt): (Lang, Lang) = (src.trim().parse()?, tgt.trim().parse()?);
        if src == tgt {
            return Err(format!("direction {s:?} translates into its own language"));
        }
        Ok(Direction { src, tgt })
    }
}

impl TryFrom<String> for Direction {
    type Error = String;
    fn try_from(s: String) -> Result<Self, String> {
        s.parse()
    }
}

impl From<Direction> for String {
    fn from(d: Direction) -> String {
        d.to_string()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProviderKind {
    Http,
    #[default]
    Mock,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProviderConfig {
    #[serde(default)]
    pub kind: ProviderKind,
    /// Mock behaviour, see [`crate::modelgw::MockBehavior::parse`].
    #[serde(default = "default_mock")]
    pub mock: String,
    #[serde(default)]
    pub base_url: Option<String>,
    #[serde(default = "default_model")]
    pub model: String,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
}

fn default_mock() -> String {
    "perfect".into()
}
fn default_model() -> String {
    "gpt-3.5-turbo-0301".into()
}
fn default_timeout() -> u64 {
    120
}

impl Default for ProviderConfig {
    fn default() -> Self {
        ProviderConfig {
            kind: ProviderKind::Mock,
            mock: default_mock(),
            base_url: None,
            model: default_model(),
            timeout_secs: default_timeout(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Limits {
    #[serde(default = "default_concurrency")]
    pub concurrency: usize,
    #[serde(default = "default_retries")]
    pub retries: u32,
    /// Hard cap on provider calls per invocation; defaults to twice the
    /// number of requests the plan can issue.
    #[serde(default)]
    pub max_requests: Option<u64>,
    #[serde(default = "default_backoff")]
    pub backoff_ms: u64,
}

fn default_concurrency() -> usize {
    4
}
fn default_retries() -> u32 {
    5
}
fn default_backoff() -> u64 {
    500
}

impl Default for Limits {
    fn default() -> Self {
        Limits {
            concurrency: default_concurrency(),
            retries: default_retries(),
            max_requests: None,
            backoff_ms: default_backoff(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetRef {
    pub task: TaskKind,
    pub language: Lang,
    #[serde(default)]
    pub format: Option<DatasetFormat>,
    pub path: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticCorpus {
    pub examples: usize,
    #[serde(default)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CometRef {
    pub task: TaskKind,
    pub direction: Direction,
    pub path: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixedCell {
    pub data: Lang,
    pub instruction: Lang,
}

/// The condition matrix, expanded per task by [`Matrix::conditions`].
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Matrix {
    pub tasks: Vec<TaskKind>,
    #[serde(default)]
    pub baselines: Vec<Lang>,
    /// Baselines run a second time (repeat index 1).
    #[serde(default)]
    pub repeat: Vec<Lang>,
    #[serde(default)]
    pub directions: Vec<Direction>,
    #[serde(default)]
    pub scopes: Vec<Scope>,
    #[serde(default)]
    pub mixed: Vec<MixedCell>,
}

impl Matrix {
    /// The matrix of the original study: both tasks, four directions, all
    /// three scopes, every baseline plus a repeated English one, and the
    /// four mixed original-language cells.
    pub fn full() -> Self {
        let d = |s: &str| s.parse::<Direction>().unwrap();
        Matrix {
            tasks: TaskKind::ALL.to_vec(),
            baselines: Lang::ALL.to_vec(),
            repeat: vec![Lang::En],
            directions: vec![d("en>de"), d("en>zh"), d("de>en"), d("zh>en")],
            scopes: vec![Scope::T, Scope::I, Scope::X],
            mixed: vec![
                MixedCell {
                    data: Lang::En,
                    instruction: Lang::De,
                },
                MixedCell {
                    data: Lang::En,
                    instruction: Lang::Zh,
                },
                MixedCell {
                    data: Lang::De,
                    instruction: Lang::En,
                },
                MixedCell {
                    data: Lang::Zh,
                    instruction: Lang::En,
                },
            ],
        }
    }

    /// Ordered, duplicate-free condition list.
    pub fn conditions(&self) -> Vec<Condition> {
        let mut out = Vec::new();
        let mut seen = BTreeSet::new();
        let mut push = |c: Condition| {
            if seen.insert(c) {
                out.push(c);
            }
        };
        for &task in &self.tasks {
            for &l in &self.baselines {
                push(Condition::baseline(task, l));
            }
            for &l in &self.repeat {
                push(Condition::baseline(task, l).with_repeat(1));
            }
            for d in &self.directions {
                for &s in &self.scopes {
                    push(Condition::translated(task, s, d.src, d.tgt));
                }
            }
            for m in &self.mixed {
                push(Condition::mixed(task, m.data, m.instruction));
            }
        }
        out
    }
}

fn default_threshold() -> f64 {
    50.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentPlan {
    pub name: String,
    #[serde(default)]
    pub seed: u64,
    /// Quality threshold (sentence BLEU) for thresholded consistency.
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    #[serde(default)]
    pub quality_aggregate: QualityAggregate,
    #[serde(default)]
    pub provider: ProviderConfig,
    #[serde(default)]
    pub limits: Limits,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synthetic: Option<SyntheticCorpus>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub templates: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ledger: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub datasets: Vec<DatasetRef>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub comet: Vec<CometRef>,
    pub matrix: Matrix,
}

#[derive(Debug, thiserror::Error)]
pub enum PlanError {
    #[error("cannot read plan {path}: {reason}")]
    Unreadable { path: PathBuf, reason: String },
    #[error("plan has no conditions")]
    EmptyPlan,
    #[error("plan has no corpus: give [[datasets]] or [synthetic]")]
    NoCorpus,
    #[error("plan needs {task} data in {lang}, which no dataset provides")]
    MissingLanguage { task: TaskKind, lang: Lang },
    #[error("http provider needs provider.base_url")]
    MissingBaseUrl,
    #[error("limits.concurrency must be at least 1")]
    ZeroConcurrency,
}

impl ExperimentPlan {
    pub fn from_toml(text: &str) -> Result<Self, PlanError> {
        toml::from_str(text).map_err(|e| PlanError::Unreadable {
            path: PathBuf::new(),
            reason: e.to_string(),
        })
    }

    /// Reads a plan file, resolving relative paths against its directory.
    pub fn load(path: &Path) -> Result<Self, PlanError> {
        let unreadable = |reason: String| PlanError::Unreadable {
            path: path.to_owned(),
            reason,
        };
        let text = std::fs::read_to_string(path).map_err(|e| unreadable(e.to_string()))?;
        let mut plan: ExperimentPlan =
            toml::from_str(&text).map_err(|e| unreadable(e.to_string()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        plan.datasets.iter_mut().for_each(|d| resolve(&mut d.path));
        plan.comet.iter_mut().for_each(|c| resolve(&mut c.path));
        plan.templates.iter_mut().for_each(resolve);
        plan.ledger.iter_mut().for_each(resolve);
        Ok(plan)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("plans serialize")
    }

    pub fn conditions(&self) -> Vec<Condition> {
        self.matrix.conditions()
    }

    /// Directions whose artifacts some condition depends on, per task.
    pub fn translation_needs(&self) -> BTreeSet<(TaskKind, Direction)> {
        self.conditions()
            .iter()
            .flat_map(|c| {
                c.directions()
                    .into_iter()
                    .map(move |(src, tgt)| (c.task, Direction { src, tgt }))
            })
            .collect()
    }

    /// Languages each task's corpus must contain.
    pub fn required_languages(&self) -> BTreeSet<(TaskKind, Lang)> {
        let mut out = BTreeSet::new();
        for c in self.conditions() {
            out.insert((c.task, c.data.source()));
            out.insert((c.task, c.data.effective()));
        }
        out
    }

    pub fn validate(&self) -> Result<(), PlanError> {
        if self.conditions().is_empty() {
            return Err(PlanError::EmptyPlan);
        }
        if self.limits.concurrency == 0 {
            return Err(PlanError::ZeroConcurrency);
        }
        if self.provider.kind == ProviderKind::Http && self.provider.base_url.is_none() {
            return Err(PlanError::MissingBaseUrl);
        }
        if self.synthetic.is_none() {
            if self.datasets.is_empty() {
                return Err(PlanError::NoCorpus);
            }
            for (task, lang) in self.required_languages() {
                if !self
                    .datasets
                    .iter()
                    .any(|d| d.task == task && d.language == lang)
                {
                    return Err(PlanError::MissingLanguage { task, lang });
                }
            }
        }
        Ok(())
    }
}
