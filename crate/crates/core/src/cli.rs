//! Command-line front end. [`main`] returns the process exit code:
//! 0 on success, 1 on a failed or incomplete run, 2 on usage errors.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

use crate::corpus::{serialize_dataset, synthetic, validate_dataset, DatasetFormat, TaskKind};
use crate::experiments::{
    load_corpora, run_plan, ExperimentPlan, Harness, ProviderChoice, ProviderKind, RunDir,
    RunSummary,
};
use crate::metrics::RunRecord;
use crate::modelgw::MockBehavior;
use crate::report::{self, Format, ReportError};
use crate::standardize::{propose_ledger_entries, EntryStatus};

#[derive(Debug, Parser)]
#[command(
    name = "multisense",
    version,
    about = "Multilingual self-consistency evaluation"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse and validate the plan's corpora and report their sizes.
    Ingest(PlanArgs),
    /// Have the model translate instructions and data for every direction.
    Translate(PlanArgs),
    /// Run the full condition matrix and write the reports.
    Run(RunArgs),
    /// Re-standardize stored replies with the current ledger.
    Standardize(StandardizeArgs),
    /// Recompute every condition from the journal alone and write reports.
    Score(ReportArgs),
    /// Write reports from the records already in a run directory.
    Report(ReportArgs),
    /// Write a synthetic parallel corpus in the benchmark TSV layouts.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
pub struct PlanArgs {
    #[arg(long)]
    pub plan: PathBuf,
    /// Run directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Provider override: `http` or `mock:<behavior>`.
    #[arg(long)]
    pub provider: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub threshold: Option<f64>,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub plan: PlanArgs,
    #[arg(long, default_value = "md,csv")]
    pub formats: String,
}

#[derive(Debug, Args)]
pub struct StandardizeArgs {
    #[arg(long)]
    pub out: PathBuf,
    /// Add proposals for unresolved replies to the ledger for review.
    #[arg(long)]
    pub review: bool,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value = "md,csv")]
    pub formats: String,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// `pawsx` or `xnli`.
    #[arg(long)]
    pub task: TaskKind,
    #[arg(long, default_value_t = 200)]
    pub examples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

fn parse_formats(s: &str) -> Result<Vec<Format>, ReportError> {
    s.split(',')
        .filter(|f| !f.trim().is_empty())
        .map(str::parse)
        .collect()
}

fn load_plan(args: &PlanArgs) -> anyhow::Result<ExperimentPlan> {
    let mut plan = ExperimentPlan::load(&args.plan)?;
    if let Some(p) = &args.provider {
        if p == "http" {
            plan.provider.kind = ProviderKind::Http;
        } else if let Some(spec) =
            p.strip_prefix("mock:")
                .or(if p == "mock" { Some("perfect") } else { None })
        {
            MockBehavior::parse(spec).map_err(anyhow::Error::msg)?;
            plan.provider.kind = ProviderKind::Mock;
            plan.provider.mock = spec.to_owned();
        } else {
            bail!("unknown provider {p:?} (expected http or mock:<behavior>)");
        }
    }
    if let Some(seed) = args.seed {
        plan.seed = seed;
    }
    if let Some(t) = args.threshold {
        plan.threshold = t;
    }
    Ok(plan)
}

fn print_summary(s: &RunSummary) {
    eprintln!(
        "{} conditions completed; provider calls: {} translation, {} task; cache hits: {}",
        s.completed.len(),
        s.stats.translation_calls,
        s.stats.task_calls,
        s.stats.cache_hits
    );
    for (what, why) in &s.failures {
        eprintln!("failed: {what}: {why}");
    }
}

fn write_reports(out: &Path, formats: &[Format]) -> anyhow::Result<()> {
    report::generate(out, formats)?;
    eprintln!(
        "reports written to {}",
        RunDir::new(out).reports().display()
    );
    Ok(())
}

fn ingest(args: &PlanArgs) -> anyhow::Result<bool> {
    let plan = load_plan(args)?;
    plan.validate()?;
    let corpora = load_corpora(&plan)?;
    let dir = RunDir::new(&args.out);
    let mut clean = true;
    for corpus in corpora.values() {
        for ds in corpus.per_language.values() {
            let violations = validate_dataset(ds);
            println!(
                "{} {}: {} examples, {} violations",
                ds.task,
                ds.language,
                ds.len(),
                violations.len()
            );
            for v in &violations {
                println!("  {v}");
            }
            clean &= violations.is_empty();
            let path = dir.corpus(ds.task, ds.language);
            crate::fsutil::atomic_write(&path, ds.to_jsonl().as_bytes())?;
        }
    }
    Ok(clean)
}

fn translate(args: &PlanArgs) -> anyhow::Result<bool> {
    let harness = Harness::open(load_plan(args)?, &args.out, ProviderChoice::FromPlan)?;
    let mut ok = true;
    for (task, d) in harness.plan.translation_needs() {
        match harness.materialize(task, d) {
            Ok(a) => println!("{task} {d}: {} examples", a.sentences.len()),
            Err(e) => {
                eprintln!("failed: {task} {d}: {e}");
                ok = false;
            }
        }
    }
    Ok(ok)
}

fn run(args: &RunArgs) -> anyhow::Result<bool> {
    let formats = parse_formats(&args.formats)?;
    let (_, summary) = run_plan(
        load_plan(&args.plan)?,
        &args.plan.out,
        ProviderChoice::FromPlan,
    )?;
    print_summary(&summary);
    if !summary.is_complete() {
        return Ok(false);
    }
    write_reports(&args.plan.out, &formats)?;
    Ok(true)
}

fn standardize(args: &StandardizeArgs) -> anyhow::Result<bool> {
    let harness = Harness::reopen(&args.out, ProviderChoice::Offline)?;
    let summary = harness.run_all();
    print_summary(&summary);
    if !args.review {
        return Ok(summary.is_complete());
    }
    let mut records: Vec<RunRecord> = Vec::new();
    for cond in &summary.completed {
        let path = harness.dir.records(cond);
        records.extend(
            crate::fsutil::read_jsonl::<RunRecord>(&path)
                .with_context(|| path.display().to_string())?,
        );
    }
    let proposals = propose_ledger_entries(&records, &harness.templates, &harness.ledger);
    let mut ledger = harness.ledger.clone();
    for p in &proposals {
        println!(
            "{}\t{}\t{:?}\t{}\t{}",
            p.task, p.language, p.normalized_raw, p.label, p.note
        );
        ledger.upsert(p.clone())?;
    }
    let path = harness.ledger_path();
    ledger.save(&path)?;
    let pending = ledger
        .entries()
        .filter(|e| e.status == EntryStatus::Auto)
        .count();
    eprintln!(
        "{} new proposals; {pending} entries await review in {} (set status to \"reviewed\" to apply)",
        proposals.len(),
        path.display()
    );
    Ok(summary.is_complete())
}

fn score(args: &ReportArgs) -> anyhow::Result<bool> {
    let formats = parse_formats(&args.formats)?;
    let harness = Harness::reopen(&args.out, ProviderChoice::Offline)?;
    let summary = harness.run_all();
    if !summary.is_complete() {
        print_summary(&summary);
        return Ok(false);
    }
    write_reports(&args.out, &formats)?;
    Ok(true)
}

fn synth(args: &SynthArgs) -> anyhow::Result<bool> {
    let corpus = synthetic::generate(args.task, args.examples, args.seed);
    let format = DatasetFormat::for_task(args.task);
    let mut files = BTreeMap::new();
    for ds in corpus.into_datasets() {
        let path = args
            .out
            .join(format!("{}_{}.tsv", args.task.short_name(), ds.language));
        files.insert(path, serialize_dataset(&ds, format)?);
    }
    for (path, text) in files {
        crate::fsutil::atomic_write(&path, text.as_bytes())?;
        println!("{}", path.display());
    }
    Ok(true)
}

fn dispatch(cli: &Cli) -> anyhow::Result<bool> {
    match &cli.command {
        Command::Ingest(a) => ingest(a),
        Command::Translate(a) => translate(a),
        Command::Run(a) => run(a),
        Command::Standardize(a) => standardize(a),
        Command::Score(a) => score(a),
        Command::Report(a) => {
            write_reports(&a.out, &parse_formats(&a.formats)?)?;
            Ok(true)
        }
        Command::Synth(a) => synth(a),
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match dispatch(&cli) {
        Ok(true) => 0,
        Ok(false) => 1,
        Err(e) => {
            eprintln!("error: {e:#}");
            1
        }
    }
}

pub fn main() -> i32 {
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .try_init();
    main_with(std::env::args_os())
}
