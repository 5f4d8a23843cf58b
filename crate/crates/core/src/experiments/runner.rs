use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Duration;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::condition::{Condition, LangSpec};
use super::plan::{Direction, ExperimentPlan, PlanError, ProviderKind};
use crate::corpus::{
    build_parallel, parse_dataset, synthetic, CorpusError, Dataset, DatasetFormat, Example, Lang,
    ParallelCorpus, TaskKind,
};
use crate::fsutil;
use crate::metrics::RunRecord;
use crate::modelgw::{
    configure_mock, Gateway, GatewayConfig, GatewayError, GatewayStats, HttpProvider, MockBehavior,
    ModelRequest, OfflineProvider, Provider,
};
use crate::prompting::{
    compose_translated_instruction, load_builtin_instructions, render_task_prompt,
    render_translation_prompt, strip_echoed_quotes, InstructionTemplate, PromptError, TemplateSet,
};
use crate::standardize::{standardize_response, LedgerError, MappingLedger};

/// Environment variable for the crash-injection test hook.
pub const CRASH_AFTER_ENV: &str = "MULTISENSE_CRASH_AFTER";

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Ledger(#[from] LedgerError),
    #[error("no translation artifact for {task} {direction}")]
    MissingArtifact {
        task: TaskKind,
        direction: Direction,
    },
    #[error("{what}: {completed}/{total} requests completed before: {source}")]
    Partial {
        what: String,
        completed: usize,
        total: usize,
        source: GatewayError,
    },
    #[error("{0}")]
    Io(String),
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> ExperimentError {
    ExperimentError::Io(format!("{}: {e}", path.display()))
}

/// Layout of a run directory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunDir {
    pub root: PathBuf,
}

impl RunDir {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        RunDir { root: root.into() }
    }
    pub fn plan(&self) -> PathBuf {
        self.root.join("plan.toml")
    }
    pub fn journal(&self) -> PathBuf {
        self.root.join("journal.jsonl")
    }
    pub fn default_ledger(&self) -> PathBuf {
        self.root.join("ledger.jsonl")
    }
    pub fn manifest(&self) -> PathBuf {
        self.root.join("manifest.json")
    }
    pub fn corpus(&self, task: TaskKind, lang: Lang) -> PathBuf {
        self.root
            .join("corpus")
            .join(format!("{}_{lang}.jsonl", task.short_name()))
    }
    pub fn artifact(&self, task: TaskKind, d: Direction) -> PathBuf {
        self.root
            .join("artifacts")
            .join(task.short_name())
            .join(format!("{}-{}.json", d.src, d.tgt))
    }
    pub fn records(&self, cond: &Condition) -> PathBuf {
        self.root
            .join("runs")
            .join(cond.slug())
            .join("records.jsonl")
    }
    pub fn instruction(&self, cond: &Condition) -> PathBuf {
        self.root
            .join("runs")
            .join(cond.slug())
            .join("instruction.toml")
    }
    pub fn reports(&self) -> PathBuf {
        self.root.join("reports")
    }
}

/// The model's raw translations of the three instruction parts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstructionParts {
    pub prefix: String,
    pub sentence_word: String,
    pub suffix: String,
}

/// Everything the model produced for one task and direction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranslationArtifact {
    pub task: TaskKind,
    pub direction: Direction,
    pub instruction: InstructionParts,
    /// Per example id, both translated sentences with echoed quotes removed.
    pub sentences: BTreeMap<String, [String; 2]>,
    pub instruction_keys: [String; 3],
    pub sentence_keys: BTreeMap<String, [String; 2]>,
}

impl TranslationArtifact {
    pub fn load(path: &Path) -> Result<Self, ExperimentError> {
        let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
        serde_json::from_str(&text).map_err(|e| io_err(path, e))
    }
}

/// Where provider calls go.
pub enum ProviderChoice {
    /// As configured in the plan.
    FromPlan,
    /// Journal only; any uncached request fails.
    Offline,
    Custom(Box<dyn Provider>),
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub completed: Vec<Condition>,
    /// (what failed, why)
    pub failures: Vec<(String, String)>,
    pub stats: GatewayStats,
}

impl RunSummary {
    pub fn is_complete(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Parses (or generates) the corpus of every task in the plan.
pub fn load_corpora(
    plan: &ExperimentPlan,
) -> Result<BTreeMap<TaskKind, ParallelCorpus>, ExperimentError> {
    let mut out = BTreeMap::new();
    for &task in &plan.matrix.tasks {
        let corpus = if let Some(syn) = &plan.synthetic {
            synthetic::generate(task, syn.examples, syn.seed.unwrap_or(plan.seed))
        } else {
            let mut datasets = Vec::new();
            for d in plan.datasets.iter().filter(|d| d.task == task) {
                let format = d.format.unwrap_or_else(|| DatasetFormat::for_task(task));
                datasets.push(parse_dataset(&d.path, task, d.language, format)?);
            }
            let (corpus, dropped) = build_parallel(datasets)?;
            if !dropped.is_empty() {
                log::warn!(
                    "{task}: {} ids lack a counterpart in some language and were dropped",
                    dropped.len()
                );
            }
            corpus
        };
        out.insert(task, corpus);
    }
    Ok(out)
}

/// Reads the corpus dumps a run directory keeps for offline rescoring.
pub fn load_dumped_corpora(
    dir: &RunDir,
    plan: &ExperimentPlan,
) -> Result<BTreeMap<TaskKind, ParallelCorpus>, ExperimentError> {
    let mut out = BTreeMap::new();
    for &task in &plan.matrix.tasks {
        let mut per_language = BTreeMap::new();
        for lang in Lang::ALL {
            let path = dir.corpus(task, lang);
            if !path.exists() {
                continue;
            }
            let examples: Vec<Example> = fsutil::read_jsonl(&path).map_err(|e| io_err(&path, e))?;
            let source_name = path.file_name().unwrap().to_string_lossy().into_owned();
            per_language.insert(
                lang,
                Dataset {
                    task,
                    language: lang,
                    examples,
                    source_name,
                },
            );
        }
        out.insert(task, ParallelCorpus { task, per_language });
    }
    Ok(out)
}

pub struct Harness {
    pub plan: ExperimentPlan,
    pub dir: RunDir,
    pub corpora: BTreeMap<TaskKind, ParallelCorpus>,
    pub templates: TemplateSet,
    pub ledger: MappingLedger,
    pub gateway: Gateway,
    pool: rayon::ThreadPool,
}

impl Harness {
    /// Prepares `out` for a run of `plan`: writes the plan and corpus dumps
    /// and opens the gateway on the run's journal (resuming if present).
    pub fn open(
        plan: ExperimentPlan,
        out: &Path,
        provider: ProviderChoice,
    ) -> Result<Self, ExperimentError> {
        plan.validate()?;
        let dir = RunDir::new(out);
        let corpora = load_corpora(&plan)?;
        fsutil::atomic_write(&dir.plan(), plan.to_toml().as_bytes())
            .map_err(|e| io_err(&dir.plan(), e))?;
        for corpus in corpora.values() {
            for ds in corpus.per_language.values() {
                let path = dir.corpus(ds.task, ds.language);
                fsutil::atomic_write(&path, ds.to_jsonl().as_bytes())
                    .map_err(|e| io_err(&path, e))?;
            }
        }
        Self::assemble(plan, dir, corpora, provider)
    }

    /// Reopens a finished or interrupted run from its own directory.
    pub fn reopen(out: &Path, provider: ProviderChoice) -> Result<Self, ExperimentError> {
        let dir = RunDir::new(out);
        let plan_path = dir.plan();
        if !plan_path.exists() {
            return Err(io_err(&plan_path, "not a run directory (no plan.toml)"));
        }
        let plan = ExperimentPlan::load(&plan_path)?;
        let corpora = load_dumped_corpora(&dir, &plan)?;
        Self::assemble(plan, dir, corpora, provider)
    }

    fn assemble(
        plan: ExperimentPlan,
        dir: RunDir,
        corpora: BTreeMap<TaskKind, ParallelCorpus>,
        provider: ProviderChoice,
    ) -> Result<Self, ExperimentError> {
        let templates = match &plan.templates {
            Some(path) => TemplateSet::load_dir(path)?,
            None => load_builtin_instructions()?,
        };
        let ledger = MappingLedger::load(&Self::ledger_path_for(&plan, &dir))?;
        let provider: Box<dyn Provider> = match provider {
            ProviderChoice::Custom(p) => p,
            ProviderChoice::Offline => Box::new(OfflineProvider),
            ProviderChoice::FromPlan => match plan.provider.kind {
                ProviderKind::Http => Box::new(HttpProvider::new(
                    plan.provider
                        .base_url
                        .as_deref()
                        .ok_or(PlanError::MissingBaseUrl)?,
                    Duration::from_secs(plan.provider.timeout_secs),
                )?),
                ProviderKind::Mock => {
                    let behavior =
                        MockBehavior::parse(&plan.provider.mock).map_err(GatewayError::Config)?;
                    let refs: Vec<&ParallelCorpus> = corpora.values().collect();
                    Box::new(configure_mock(behavior, &refs, &templates))
                }
            },
        };
        let planned = planned_requests(&plan, &corpora);
        let crash_after = std::env::var(CRASH_AFTER_ENV)
            .ok()
            .and_then(|v| v.parse().ok());
        let cfg = GatewayConfig {
            concurrency: plan.limits.concurrency,
            retries: plan.limits.retries,
            max_requests: Some(plan.limits.max_requests.unwrap_or(2 * planned)),
            backoff_base: Duration::from_millis(plan.limits.backoff_ms),
            journal: Some(dir.journal()),
            crash_after,
        };
        let gateway = Gateway::new(provider, cfg)?;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(plan.limits.concurrency.max(1))
            .build()
            .map_err(|e| ExperimentError::Io(e.to_string()))?;
        Ok(Harness {
            plan,
            dir,
            corpora,
            templates,
            ledger,
            gateway,
            pool,
        })
    }

    fn ledger_path_for(plan: &ExperimentPlan, dir: &RunDir) -> PathBuf {
        plan.ledger.clone().unwrap_or_else(|| dir.default_ledger())
    }

    pub fn ledger_path(&self) -> PathBuf {
        Self::ledger_path_for(&self.plan, &self.dir)
    }

    pub fn model_id(&self) -> &str {
        &self.plan.provider.model
    }

    pub fn corpus(&self, task: TaskKind) -> Result<&ParallelCorpus, ExperimentError> {
        self.corpora
            .get(&task)
            .ok_or(ExperimentError::Plan(PlanError::NoCorpus))
    }

    fn dataset(&self, task: TaskKind, lang: Lang) -> Result<&Dataset, ExperimentError> {
        self.corpus(task)?
            .dataset(lang)
            .ok_or(ExperimentError::Plan(PlanError::MissingLanguage {
                task,
                lang,
            }))
    }

    /// Issues the requests in parallel, bounded by the plan's concurrency.
    fn complete_all(
        &self,
        what: &str,
        requests: &[ModelRequest],
    ) -> Result<Vec<String>, ExperimentError> {
        let results: Vec<Result<String, GatewayError>> = self.pool.install(|| {
            requests
                .par_iter()
                .map(|r| self.gateway.complete(r).map(|reply| reply.raw))
                .collect()
        });
        let completed = results.iter().filter(|r| r.is_ok()).count();
        let mut out = Vec::with_capacity(results.len());
        for r in results {
            match r {
                Ok(raw) => out.push(raw),
                Err(source) => {
                    return Err(ExperimentError::Partial {
                        what: what.to_owned(),
                        completed,
                        total: requests.len(),
                        source,
                    })
                }
            }
        }
        Ok(out)
    }

    /// Translates the instruction parts and every sentence of `task` in
    /// direction `d`, one request each, and persists the artifact.
    pub fn materialize(
        &self,
        task: TaskKind,
        d: Direction,
    ) -> Result<TranslationArtifact, ExperimentError> {
        let ti = self.templates.translation(d.src, d.tgt)?;
        let tmpl = self.templates.instruction(task, d.src)?;
        let ds = self.dataset(task, d.src)?;
        let mut prompts = Vec::with_capacity(3 + 2 * ds.len());
        for part in [&tmpl.prefix, &tmpl.sentence_word, &tmpl.suffix] {
            prompts.push(render_translation_prompt(ti, part)?);
        }
        for ex in &ds.examples {
            prompts.push(render_translation_prompt(ti, &ex.sentence1)?);
            prompts.push(render_translation_prompt(ti, &ex.sentence2)?);
        }
        let requests: Vec<ModelRequest> = prompts
            .into_iter()
            .map(|p| ModelRequest::new(p, self.model_id()))
            .collect();
        let raws = self.complete_all(&format!("{task} {d} translation"), &requests)?;
        let key = |i: usize| requests[i].key().0;

        let mut sentences = BTreeMap::new();
        let mut sentence_keys = BTreeMap::new();
        for (i, ex) in ds.examples.iter().enumerate() {
            let (a, b) = (3 + 2 * i, 4 + 2 * i);
            sentences.insert(
                ex.id.clone(),
                [
                    strip_echoed_quotes(&raws[a]).to_owned(),
                    strip_echoed_quotes(&raws[b]).to_owned(),
                ],
            );
            sentence_keys.insert(ex.id.clone(), [key(a), key(b)]);
        }
        let artifact = TranslationArtifact {
            task,
            direction: d,
            instruction: InstructionParts {
                prefix: raws[0].clone(),
                sentence_word: raws[1].clone(),
                suffix: raws[2].clone(),
            },
            sentences,
            instruction_keys: [key(0), key(1), key(2)],
            sentence_keys,
        };
        let path = self.dir.artifact(task, d);
        let json = serde_json::to_string_pretty(&artifact).expect("artifacts serialize");
        fsutil::atomic_write(&path, json.as_bytes()).map_err(|e| io_err(&path, e))?;
        Ok(artifact)
    }

    /// The instruction a condition is rendered with.
    pub fn instruction_for(
        &self,
        cond: &Condition,
        artifacts: &BTreeMap<(TaskKind, Direction), TranslationArtifact>,
    ) -> Result<InstructionTemplate, ExperimentError> {
        match cond.instruction {
            LangSpec::Original(l) => Ok(self.templates.instruction(cond.task, l)?.clone()),
            LangSpec::ModelTranslated { src, tgt } => {
                let direction = Direction { src, tgt };
                let art = artifacts.get(&(cond.task, direction)).ok_or(
                    ExperimentError::MissingArtifact {
                        task: cond.task,
                        direction,
                    },
                )?;
                let target = self.templates.instruction(cond.task, tgt)?;
                let source = self.templates.instruction(cond.task, src)?;
                let p = &art.instruction;
                Ok(compose_translated_instruction(
                    &p.prefix,
                    &p.sentence_word,
                    &p.suffix,
                    source,
                    target,
                )?)
            }
        }
    }

    /// The examples a condition is asked about, in corpus order.
    pub fn examples_for(
        &self,
        cond: &Condition,
        artifacts: &BTreeMap<(TaskKind, Direction), TranslationArtifact>,
    ) -> Result<Vec<Example>, ExperimentError> {
        match cond.data {
            LangSpec::Original(l) => Ok(self.dataset(cond.task, l)?.examples.clone()),
            LangSpec::ModelTranslated { src, tgt } => {
                let direction = Direction { src, tgt };
                let missing = || ExperimentError::MissingArtifact {
                    task: cond.task,
                    direction,
                };
                let art = artifacts.get(&(cond.task, direction)).ok_or_else(missing)?;
                self.dataset(cond.task, src)?
                    .examples
                    .iter()
                    .map(|ex| {
                        let [s1, s2] = art.sentences.get(&ex.id).ok_or_else(missing)?;
                        Ok(Example {
                            id: ex.id.clone(),
                            sentence1: s1.clone(),
                            sentence2: s2.clone(),
                            gold: ex.gold,
                            language: tgt,
                        })
                    })
                    .collect()
            }
        }
    }

    /// Asks every example of the condition, standardizes the replies and
    /// persists the records.
    pub fn run_condition(
        &self,
        cond: &Condition,
        artifacts: &BTreeMap<(TaskKind, Direction), TranslationArtifact>,
    ) -> Result<Vec<RunRecord>, ExperimentError> {
        let tmpl = self.instruction_for(cond, artifacts)?;
        let examples = self.examples_for(cond, artifacts)?;
        let mut requests = Vec::with_capacity(examples.len());
        for ex in &examples {
            let mut req = ModelRequest::new(render_task_prompt(&tmpl, ex)?, self.model_id());
            req.params.replicate = cond.repeat_index;
            requests.push(req);
        }
        let raws = self.complete_all(&cond.to_string(), &requests)?;
        let records: Vec<RunRecord> = examples
            .iter()
            .zip(raws)
            .zip(&requests)
            .map(|((ex, raw), req)| {
                let s = standardize_response(&raw, &tmpl, &self.ledger);
                RunRecord {
                    condition: *cond,
                    example_id: ex.id.clone(),
                    label: s.label,
                    raw,
                    rule: Some(s.rule),
                    prompt_key: req.key().0,
                }
            })
            .collect();
        let path = self.dir.records(cond);
        fsutil::write_jsonl(&path, &records).map_err(|e| io_err(&path, e))?;
        let ipath = self.dir.instruction(cond);
        let itoml = toml::to_string(&tmpl).expect("templates serialize");
        fsutil::atomic_write(&ipath, itoml.as_bytes()).map_err(|e| io_err(&ipath, e))?;
        Ok(records)
    }

    /// Materializes every needed translation, then runs every condition.
    /// Failures are collected rather than aborting the remaining work.
    pub fn run_all(&self) -> RunSummary {
        let mut summary = RunSummary::default();
        let mut artifacts = BTreeMap::new();
        for (task, d) in self.plan.translation_needs() {
            match self.materialize(task, d) {
                Ok(a) => {
                    artifacts.insert((task, d), a);
                }
                Err(e) => summary
                    .failures
                    .push((format!("{task} translation {d}"), e.to_string())),
            }
        }
        for cond in self.plan.conditions() {
            match self.run_condition(&cond, &artifacts) {
                Ok(_) => summary.completed.push(cond),
                Err(e) => summary.failures.push((cond.to_string(), e.to_string())),
            }
        }
        summary.stats = self.gateway.stats();
        summary
    }
}

/// Provider requests a fresh run of the plan issues.
fn planned_requests(plan: &ExperimentPlan, corpora: &BTreeMap<TaskKind, ParallelCorpus>) -> u64 {
    let n = |t: &TaskKind| corpora.get(t).map_or(0, |c| c.len() as u64);
    let translation: u64 = plan
        .translation_needs()
        .iter()
        .map(|(t, _)| 2 * n(t) + 3)
        .sum();
    let task: u64 = plan.conditions().iter().map(|c| n(&c.task)).sum();
    translation + task
}

#[derive(Serialize)]
struct Manifest<'a> {
    plan: &'a str,
    provider: String,
    model: &'a str,
    started: String,
    finished: String,
    summary: &'a RunSummary,
}

/// Runs `plan` into `out` and writes the run manifest. Re-invocation on the
/// same directory resumes from the journal.
pub fn run_plan(
    plan: ExperimentPlan,
    out: &Path,
    provider: ProviderChoice,
) -> Result<(Harness, RunSummary), ExperimentError> {
    let started = chrono::Utc::now().to_rfc3339();
    let harness = Harness::open(plan, out, provider)?;
    let summary = harness.run_all();
    let manifest = Manifest {
        plan: &harness.plan.name,
        provider: harness.gateway.provider_name(),
        model: harness.model_id(),
        started,
        finished: chrono::Utc::now().to_rfc3339(),
        summary: &summary,
    };
    let path = harness.dir.manifest();
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    fsutil::atomic_write(&path, json.as_bytes()).map_err(|e| io_err(&path, e))?;
    Ok((harness, summary))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::{Matrix, Scope, SyntheticCorpus};

    fn plan(examples: usize, matrix: Matrix, mock: &str) -> ExperimentPlan {
        let mut p = ExperimentPlan::from_toml("name = \"t\"\n[matrix]\ntasks = []\n").unwrap();
        p.synthetic = Some(SyntheticCorpus {
            examples,
            seed: Some(4),
        });
        p.matrix = matrix;
        p.provider.mock = mock.into();
        p.limits.concurrency = 4;
        p
    }

    fn t_only() -> Matrix {
        Matrix {
            tasks: vec![TaskKind::ParaphraseBinary],
            directions: vec!["en>de".parse().unwrap()],
            scopes: vec![Scope::T],
            ..Matrix::default()
        }
    }

    #[test]
    fn t_condition_request_count() {
        let dir = tempfile::tempdir().unwrap();
        let (_, s) = run_plan(
            plan(10, t_only(), "perfect"),
            dir.path(),
            ProviderChoice::FromPlan,
        )
        .unwrap();
        assert!(s.is_complete(), "{:?}", s.failures);
        assert_eq!((s.stats.translation_calls, s.stats.task_calls), (23, 10));
        let (_, s) = run_plan(
            plan(10, t_only(), "perfect"),
            dir.path(),
            ProviderChoice::FromPlan,
        )
        .unwrap();
        assert_eq!(s.stats.provider_calls(), 0);
    }

    #[test]
    fn echo_artifacts_equal_sources() {
        let dir = tempfile::tempdir().unwrap();
        let h = Harness::open(
            plan(5, t_only(), "perfect+echo"),
            dir.path(),
            ProviderChoice::FromPlan,
        )
        .unwrap();
        let d: Direction = "en>de".parse().unwrap();
        let art = h.materialize(TaskKind::ParaphraseBinary, d).unwrap();
        for ex in &h
            .corpus(TaskKind::ParaphraseBinary)
            .unwrap()
            .dataset(Lang::En)
            .unwrap()
            .examples
        {
            assert_eq!(
                art.sentences[&ex.id],
                [ex.sentence1.clone(), ex.sentence2.clone()]
            );
        }
        assert_eq!(
            TranslationArtifact::load(&h.dir.artifact(TaskKind::ParaphraseBinary, d)).unwrap(),
            art
        );
    }

    #[test]
    fn translated_instruction_uses_target_answers() {
        let dir = tempfile::tempdir().unwrap();
        let mut m = t_only();
        m.scopes = vec![Scope::I];
        let h = Harness::open(
            plan(3, m, "perfect+dict"),
            dir.path(),
            ProviderChoice::FromPlan,
        )
        .unwrap();
        let d: Direction = "en>de".parse().unwrap();
        let mut arts = BTreeMap::new();
        arts.insert(
            (TaskKind::ParaphraseBinary, d),
            h.materialize(TaskKind::ParaphraseBinary, d).unwrap(),
        );
        let cond = Condition::translated(TaskKind::ParaphraseBinary, Scope::I, Lang::En, Lang::De);
        let tmpl = h.instruction_for(&cond, &arts).unwrap();
        assert_eq!(tmpl.language, Lang::De);
        assert_eq!(tmpl.answers[&crate::corpus::Label::Yes], "ja");
        let examples = h.examples_for(&cond, &arts).unwrap();
        assert_eq!(examples[0].language, Lang::En);
        let records = h.run_condition(&cond, &arts).unwrap();
        assert!(records
            .iter()
            .all(|r| r.label != crate::corpus::Label::Invalid));
        let missing =
            Condition::translated(TaskKind::ParaphraseBinary, Scope::I, Lang::En, Lang::Zh);
        assert!(matches!(
            h.run_condition(&missing, &arts),
            Err(ExperimentError::MissingArtifact { .. })
        ));
    }

    #[test]
    fn budget_stops_runaway_plans() {
        let dir = tempfile::tempdir().unwrap();
        let mut p = plan(10, t_only(), "perfect");
        p.limits.max_requests = Some(5);
        let (_, s) = run_plan(p, dir.path(), ProviderChoice::FromPlan).unwrap();
        assert!(!s.is_complete());
        assert!(s.failures.iter().any(|(_, why)| why.contains("budget")));
    }
}
