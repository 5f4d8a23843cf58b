//! Acceptance gate. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

mod common;

use std::collections::{BTreeMap, HashMap};
use std::panic::{self, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use multisense::corpus::synthetic;
use multisense::experiments::{
    run_plan, ExperimentPlan, Matrix, ProviderChoice, Scope, SyntheticCorpus,
};
use multisense::metrics::{
    consistency, corpus_bleu, correlate_quality_consistency, rouge, sentence_bleu,
    ConsistencyReport,
};
use multisense::modelgw::MockBehavior;
use multisense::prompting::load_builtin_instructions;
use multisense::report::{self, Format, ReportBundle};
use multisense::standardize::{standardize_response, MappingLedger};
use multisense::{Label, Lang, RunRecord, TaskKind};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn ms(t: Instant) -> u128 {
    t.elapsed().as_millis()
}

fn run_and_report(plan: ExperimentPlan, dir: &Path) -> Result<ReportBundle, String> {
    let (_, summary) = run_plan(plan, dir, ProviderChoice::FromPlan).map_err(|e| e.to_string())?;
    ensure(summary.is_complete(), || {
        format!("run failures: {:?}", summary.failures)
    })?;
    report::generate(dir, &[Format::Markdown, Format::Csv]).map_err(|e| e.to_string())
}

// ---------------------------------------------------------------------------

fn metric_parity() -> Outcome {
    let t = Instant::now();
    let bad = common::parity_mismatches();
    let elapsed = t.elapsed();
    ensure(bad.is_empty(), || bad.join("; "))?;
    ensure(elapsed.as_secs_f64() < 1.0, || format!("took {elapsed:?}"))?;
    let n = common::parity_rows().len();
    let v = common::corpus_fixture().sacrebleu_version;
    Ok(format!("{n} segments and 5 corpus scores within 0.1 BLEU / 1e-4 ROUGE of sacrebleu {v} in {elapsed:?}"))
}

fn decomposition_identity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(20231);
    let labels = [Label::A, Label::B, Label::C, Label::Invalid];
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let n = rng.gen_range(1..300);
        let golds: HashMap<String, Label> = (0..n)
            .map(|i| (format!("e{i}"), labels[rng.gen_range(0..3)]))
            .collect();
        let mut run = |lang| -> Vec<RunRecord> {
            (0..n)
                .map(|i| RunRecord {
                    condition: multisense::Condition::baseline(TaskKind::NliTernary, lang),
                    example_id: format!("e{i}"),
                    label: labels[rng.gen_range(0..4)],
                    raw: String::new(),
                    rule: None,
                    prompt_key: String::new(),
                })
                .collect()
        };
        let (a, b) = (run(Lang::En), run(Lang::De));
        let r = multisense::metrics::consistency_breakdown(&a, &b, &golds)
            .map_err(|e| e.to_string())?;
        worst = worst.max(r.residual().abs());
    }
    ensure(worst < 1e-9, || format!("max residual {worst:e}"))?;

    // (task row, source accuracy, all, correct, incorrect) reference values.
    let reference = [
        ("PAWS-X en→de", 0.77, 0.84, 0.89, 0.67),
        ("PAWS-X en→zh", 0.77, 0.76, 0.78, 0.71),
        ("PAWS-X de→en", 0.71, 0.86, 0.92, 0.72),
        ("PAWS-X zh→en", 0.60, 0.70, 0.82, 0.52),
        ("PAWS-X en repeat", 0.77, 0.99, 0.99, 0.98),
        ("XNLI en→de", 0.71, 0.74, 0.77, 0.66),
        ("XNLI en→zh", 0.71, 0.67, 0.71, 0.57),
        ("XNLI de→en", 0.48, 0.63, 0.83, 0.45),
        ("XNLI zh→en", 0.56, 0.67, 0.80, 0.50),
        ("XNLI en repeat", 0.71, 0.98, 0.99, 0.96),
    ];
    let mut max_gap = 0.0f64;
    for (row, acc, all, correct, incorrect) in reference {
        let n = 10_000;
        let n_correct = (acc * n as f64).round() as usize;
        let r = ConsistencyReport {
            all,
            correct: Some(correct),
            incorrect: Some(incorrect),
            n,
            n_correct,
            n_incorrect: n - n_correct,
        };
        ensure(r.residual().abs() <= 0.01 + 1e-12, || {
            format!("{row}: residual {}", r.residual())
        })?;
        max_gap = max_gap.max(r.residual().abs());
    }
    Ok(format!("1000 seeded pairs, max residual {worst:.1e}; 10 reference rows within ±0.01 (max gap {max_gap:.4})"))
}

fn end_to_end_mock_oracle() -> Outcome {
    let t = Instant::now();
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let plan = common::synthetic_plan(200, "perfect+dict");
    ensure(plan.matrix == Matrix::full(), || {
        "preset is not the full matrix".into()
    })?;
    let bundle = run_and_report(plan, &dir.path().join("perfect"))?;
    let mut checked = 0;
    for table in [&bundle.consistency, &bundle.accuracy, &bundle.mixed] {
        for row in &table.rows {
            for (col, cell) in table.columns.iter().zip(&row.cells) {
                if let Some(v) = cell.value {
                    ensure(v == 1.0, || {
                        format!("{} / {} / {col} = {v}", table.key, row.label)
                    })?;
                    checked += 1;
                }
            }
        }
    }
    for row in &bundle.breakdown.rows {
        ensure(row.cells[1].value == Some(1.0), || {
            format!("breakdown {} = {:?}", row.label, row.cells[1])
        })?;
        checked += 1;
    }
    // 24 consistency, 6 + 24 accuracy, 14 mixed, 10 breakdown cells.
    ensure(checked == 78, || {
        format!("checked {checked} cells, expected 78")
    })?;
    ensure(
        bundle.metadata.invalid_rate.values().all(|r| *r == 0.0),
        || "INVALID replies in perfect run".into(),
    )?;

    let lex = dir.path().join("partial.json");
    write_partial_lexicon(&lex)?;
    let mut noisy =
        common::synthetic_plan(200, &format!("noisy:0.2:seed=5+dict:{}", lex.display()));
    noisy.threshold = 60.0;
    let noisy_dir = dir.path().join("noisy");
    run_and_report(noisy, &noisy_dir)?;
    let compared = brute_force_matches_report(&noisy_dir)?;
    let elapsed = t.elapsed();
    ensure(elapsed.as_secs() < 60, || format!("took {elapsed:?}"))?;
    Ok(format!(
        "perfect: {checked} accuracy/consistency cells = 1.0; noisy 0.2: {compared} report values equal the journal recomputation; {elapsed:.1?}, mock provider only"
    ))
}

/// The synthetic lexicon with every third entry missing, so translation
/// quality varies between examples.
fn write_partial_lexicon(path: &Path) -> Result<(), String> {
    let mut all = BTreeMap::new();
    for (s, t) in [
        (Lang::En, Lang::De),
        (Lang::En, Lang::Zh),
        (Lang::De, Lang::En),
        (Lang::Zh, Lang::En),
    ] {
        let lex: BTreeMap<String, String> = synthetic::lexicon(s, t)
            .into_iter()
            .enumerate()
            .filter(|(i, _)| i % 3 != 0)
            .map(|(_, kv)| kv)
            .collect();
        all.insert(format!("{s}-{t}"), lex);
    }
    std::fs::write(path, serde_json::to_string(&all).unwrap()).map_err(|e| e.to_string())
}

fn jsonl(path: &Path) -> Vec<Value> {
    common::read(path)
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

/// Recomputes every reported number from the journal, the corpus dumps and
/// the per-condition instruction files, without the scoring code paths.
fn brute_force_matches_report(root: &Path) -> Result<usize, String> {
    let mut journal: HashMap<String, String> = HashMap::new();
    for rec in jsonl(&root.join("journal.jsonl")) {
        journal
            .entry(rec["key"].as_str().unwrap().to_owned())
            .or_insert(rec["raw"].as_str().unwrap().to_owned());
    }
    let corpus = |task: &str, lang: &str| -> Vec<(String, String, String, String)> {
        jsonl(&root.join(format!("corpus/{task}_{lang}.jsonl")))
            .iter()
            .map(|e| {
                let s = |k: &str| e[k].as_str().unwrap().to_owned();
                (s("id"), s("sentence1"), s("sentence2"), s("gold"))
            })
            .collect()
    };
    // Labels of one condition: journal reply → exact answer form → label.
    let labels = |slug: &str| -> Option<BTreeMap<String, String>> {
        let dir = root.join("runs").join(slug);
        if !dir.exists() {
            return None;
        }
        let tmpl: toml::Value =
            toml::from_str(&common::read(&dir.join("instruction.toml"))).unwrap();
        let mut forms: Vec<(String, String)> = Vec::new();
        for (label, form) in tmpl["answers"].as_table().unwrap() {
            forms.push((form.as_str().unwrap().to_lowercase(), label.clone()));
        }
        if let Some(aliases) = tmpl.get("accepted_aliases").and_then(|a| a.as_table()) {
            for (label, list) in aliases {
                for f in list.as_array().unwrap() {
                    forms.push((f.as_str().unwrap().to_lowercase(), label.clone()));
                }
            }
        }
        let mut out = BTreeMap::new();
        for rec in jsonl(&dir.join("records.jsonl")) {
            let raw = &journal[rec["prompt_key"].as_str().unwrap()];
            let label = forms
                .iter()
                .find(|(f, _)| *f == raw.trim().to_lowercase())
                .map_or("INVALID".to_owned(), |(_, l)| l.clone());
            out.insert(rec["example_id"].as_str().unwrap().to_owned(), label);
        }
        Some(out)
    };
    let frac = |k: usize, n: usize| k as f64 / n as f64;
    let agree = |a: &BTreeMap<String, String>, b: &BTreeMap<String, String>| {
        frac(a.iter().filter(|(id, l)| b[*id] == **l).count(), a.len())
    };
    let pearson = |xs: &[f64], ys: &[f64]| -> Option<f64> {
        let n = xs.len() as f64;
        let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
        let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
        for (x, y) in xs.iter().zip(ys) {
            sxx += (x - mx) * (x - mx);
            syy += (y - my) * (y - my);
            sxy += (x - mx) * (y - my);
        }
        (sxx != 0.0 && syy != 0.0).then(|| (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
    };

    let plan: toml::Value = toml::from_str(&common::read(&root.join("plan.toml"))).unwrap();
    let threshold = plan["threshold"].as_float().unwrap();
    let mut expect: BTreeMap<(String, String, String), Option<f64>> = BTreeMap::new();
    let mut put = |table: &str, row: &str, col: &str, v: Option<f64>| {
        expect.insert((table.into(), row.into(), col.into()), v);
    };
    let langs = ["en", "de", "zh"];
    let directions = [("en", "de"), ("en", "zh"), ("de", "en"), ("zh", "en")];
    for (task, name) in [("pawsx", "PAWS-X"), ("xnli", "XNLI")] {
        let golds: BTreeMap<String, String> = corpus(task, "en")
            .into_iter()
            .map(|(id, _, _, g)| (id, g))
            .collect();
        let acc = |l: &BTreeMap<String, String>| {
            frac(
                l.iter().filter(|(id, x)| golds[*id] == **x).count(),
                l.len(),
            )
        };
        let base = |l: &str| labels(&format!("{task}__i_{l}__x_{l}")).unwrap();

        for l in langs {
            put(
                "accuracy",
                &format!("{name} {l}"),
                "original",
                Some(acc(&base(l))),
            );
            for c in ["T", "I", "X"] {
                put("accuracy", &format!("{name} {l}"), c, None);
            }
        }
        for d in langs {
            let row = format!("{name} data {d}");
            let cells: Vec<Option<f64>> = langs
                .iter()
                .map(|i| labels(&format!("{task}__i_{i}__x_{d}")).map(|l| acc(&l)))
                .collect();
            if d != "en" || cells.iter().filter(|c| c.is_some()).count() > 1 {
                for (i, c) in langs.iter().zip(cells) {
                    put("mixed", &row, &format!("instruction {i}"), c);
                }
            }
        }
        for (s, t) in directions {
            let row = format!("{name} {s}→{t}");
            let src = base(s);
            let cond = |scope: &str| {
                let tr = format!("{s}-{t}");
                let slug = match scope {
                    "T" => format!("{task}__i_{tr}__x_{tr}"),
                    "I" => format!("{task}__i_{tr}__x_{s}"),
                    _ => format!("{task}__i_{s}__x_{tr}"),
                };
                labels(&slug).unwrap()
            };
            put("accuracy", &row, "original", None);
            for c in ["T", "I", "X"] {
                put("consistency", &row, c, Some(agree(&src, &cond(c))));
                put("accuracy", &row, c, Some(acc(&cond(c))));
            }

            // Translations as the model returned them, against the target originals.
            let art: Value = serde_json::from_str(&common::read(
                &root.join(format!("artifacts/{task}/{s}-{t}.json")),
            ))
            .unwrap();
            let tgt_lang: Lang = t.parse().unwrap();
            let (mut hyps, mut refs, mut q) = (Vec::new(), Vec::new(), BTreeMap::new());
            for (id, _, r1, r2) in corpus(task, t)
                .into_iter()
                .map(|(id, a, b, g)| (id, g, a, b))
            {
                let keys = &art["sentence_keys"][&id];
                let h1 = journal[keys[0].as_str().unwrap()].trim().to_owned();
                let h2 = journal[keys[1].as_str().unwrap()].trim().to_owned();
                let b =
                    (sentence_bleu(&h1, &r1, tgt_lang) + sentence_bleu(&h2, &r2, tgt_lang)) / 2.0;
                q.insert(id, b);
                hyps.extend([h1, h2]);
                refs.extend([r1, r2]);
            }
            let hr: Vec<&str> = hyps.iter().map(String::as_str).collect();
            let rr: Vec<&str> = refs.iter().map(String::as_str).collect();
            put(
                "quality",
                &row,
                "BLEU",
                Some(corpus_bleu(&hr, &rr, tgt_lang).unwrap()),
            );
            let scores: Vec<_> = hr
                .iter()
                .zip(&rr)
                .map(|(h, r)| rouge(h, r, tgt_lang))
                .collect();
            let k = scores.len() as f64;
            put(
                "quality",
                &row,
                "ROUGE-1",
                Some(scores.iter().map(|s| s.rouge1).sum::<f64>() / k),
            );
            put(
                "quality",
                &row,
                "ROUGE-2",
                Some(scores.iter().map(|s| s.rouge2).sum::<f64>() / k),
            );
            put(
                "quality",
                &row,
                "ROUGE-L",
                Some(scores.iter().map(|s| s.rouge_l).sum::<f64>() / k),
            );
            put("quality", &row, "COMET", None);

            let ids: Vec<&String> = q.keys().collect();
            let xs: Vec<f64> = ids.iter().map(|id| q[*id]).collect();
            for c in ["T", "X"] {
                let tgt = cond(c);
                let same: Vec<f64> = ids
                    .iter()
                    .map(|id| f64::from(u8::from(src[*id] == tgt[*id])))
                    .collect();
                let right: Vec<f64> = ids
                    .iter()
                    .map(|id| f64::from(u8::from(golds[*id] == tgt[*id])))
                    .collect();
                put(
                    "correlation",
                    &row,
                    &format!("consistency {c}"),
                    pearson(&xs, &same),
                );
                put(
                    "correlation",
                    &row,
                    &format!("accuracy {c}"),
                    pearson(&xs, &right),
                );
                let kept: Vec<&&String> = ids.iter().filter(|id| q[**id] >= threshold).collect();
                let kept_agree = kept.iter().filter(|id| src[***id] == tgt[***id]).count();
                let v = (!kept.is_empty()).then(|| frac(kept_agree, kept.len()));
                put("thresholded", &row, &format!("{c} (BLEU ≥ {threshold})"), v);
                if c == "T" {
                    put(
                        "thresholded",
                        &row,
                        "% included",
                        Some(100.0 * kept.len() as f64 / ids.len() as f64),
                    );
                }
            }
        }
        let mut breakdown =
            |row: String, a: &BTreeMap<String, String>, b: &BTreeMap<String, String>| {
                let correct: Vec<&String> = a.keys().filter(|id| golds[*id] == a[*id]).collect();
                let wrong: Vec<&String> = a.keys().filter(|id| golds[*id] != a[*id]).collect();
                let part = |ids: &[&String]| {
                    (!ids.is_empty()).then(|| {
                        frac(
                            ids.iter().filter(|id| a[**id] == b[**id]).count(),
                            ids.len(),
                        )
                    })
                };
                put(
                    "breakdown",
                    &row,
                    "source accuracy",
                    Some(frac(correct.len(), a.len())),
                );
                put("breakdown", &row, "all", Some(agree(a, b)));
                put("breakdown", &row, "correct", part(&correct));
                put("breakdown", &row, "incorrect", part(&wrong));
            };
        for (s, t) in directions {
            let tr = format!("{s}-{t}");
            breakdown(
                format!("{name} {s}→{t}"),
                &base(s),
                &labels(&format!("{task}__i_{tr}__x_{tr}")).unwrap(),
            );
        }
        breakdown(
            format!("{name} en (repeat)"),
            &base("en"),
            &labels(&format!("{task}__i_en__x_en__r1")).unwrap(),
        );
    }

    let mut reader =
        csv::Reader::from_path(root.join("reports/report.csv")).map_err(|e| e.to_string())?;
    let mut reported = BTreeMap::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| e.to_string())?;
        let value = match &rec[3] {
            "" => None,
            v => Some(v.parse::<f64>().map_err(|e| e.to_string())?),
        };
        reported.insert(
            (rec[0].to_owned(), rec[1].to_owned(), rec[2].to_owned()),
            value,
        );
    }
    let mut mismatches = Vec::new();
    for (key, want) in &expect {
        match reported.get(key) {
            Some(got) if got == want => {}
            got => mismatches.push(format!("{key:?}: report {got:?}, recomputed {want:?}")),
        }
    }
    for key in reported.keys().filter(|k| !expect.contains_key(*k)) {
        mismatches.push(format!("{key:?}: not recomputed"));
    }
    ensure(mismatches.is_empty(), || {
        format!(
            "{} mismatches: {}",
            mismatches.len(),
            mismatches[..mismatches.len().min(5)].join("; ")
        )
    })?;
    let defined = expect.values().filter(|v| v.is_some()).count();
    ensure(defined >= 180, || format!("only {defined} defined values"))?;
    Ok(expect.len())
}

fn request_count_law() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut plan = common::synthetic_plan(50, "perfect+dict");
    plan.matrix = Matrix {
        tasks: vec![TaskKind::ParaphraseBinary],
        directions: vec!["en>de".parse().unwrap()],
        scopes: vec![Scope::T],
        ..Matrix::default()
    };
    let (_, first) =
        run_plan(plan.clone(), dir.path(), ProviderChoice::FromPlan).map_err(|e| e.to_string())?;
    ensure(first.is_complete(), || format!("{:?}", first.failures))?;

    let art: Value = serde_json::from_str(&common::read(
        &dir.path().join("artifacts/pawsx/en-de.json"),
    ))
    .unwrap();
    let instruction_keys: Vec<&str> = art["instruction_keys"]
        .as_array()
        .unwrap()
        .iter()
        .map(|k| k.as_str().unwrap())
        .collect();
    let sentence_keys: Vec<&str> = art["sentence_keys"]
        .as_object()
        .unwrap()
        .values()
        .flat_map(|pair| pair.as_array().unwrap().iter().map(|k| k.as_str().unwrap()))
        .collect();
    let journal = jsonl(&dir.path().join("journal.jsonl"));
    let count = |keys: &[&str]| {
        journal
            .iter()
            .filter(|r| keys.contains(&r["key"].as_str().unwrap()))
            .count()
    };
    let (sentences, instructions) = (count(&sentence_keys), count(&instruction_keys));
    let tasks = journal.iter().filter(|r| r["purpose"] == "task").count();
    ensure((sentences, instructions, tasks) == (100, 3, 50), || {
        format!(
            "journal has {sentences} sentence, {instructions} instruction, {tasks} task requests"
        )
    })?;
    ensure(
        first.stats.translation_calls == 103 && first.stats.task_calls == 50,
        || format!("{:?}", first.stats),
    )?;

    let (_, again) =
        run_plan(plan, dir.path(), ProviderChoice::FromPlan).map_err(|e| e.to_string())?;
    ensure(again.stats.provider_calls() == 0, || {
        format!("rerun issued {:?}", again.stats)
    })?;
    ensure(
        jsonl(&dir.path().join("journal.jsonl")).len() == 153,
        || "journal grew on rerun".into(),
    )?;
    Ok("fresh: 100 sentence + 3 instruction translations + 50 task requests; rerun: 0".into())
}

fn identity_translation_invariance() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut notes = Vec::new();
    for mock in ["perfect+echo", "hash:seed=2+echo"] {
        let bundle = run_and_report(
            common::synthetic_plan(60, mock),
            &dir.path().join(mock.replace([':', '+', '='], "_")),
        )?;
        for row in &bundle.consistency.rows {
            for (col, cell) in bundle.consistency.columns.iter().zip(&row.cells) {
                ensure(cell.value == Some(1.0), || {
                    format!("{mock}: {} {col} = {:?}", row.label, cell.value)
                })?;
            }
        }
        let repeats: Vec<_> = bundle
            .breakdown
            .rows
            .iter()
            .filter(|r| r.label.ends_with("(repeat)"))
            .collect();
        ensure(
            repeats.len() == 2 && repeats.iter().all(|r| r.cells[1].value == Some(1.0)),
            || {
                format!(
                    "{mock}: repeat consistency {:?}",
                    repeats.iter().map(|r| r.cells[1].value).collect::<Vec<_>>()
                )
            },
        )?;
        let en = bundle
            .accuracy
            .cell("PAWS-X en", "original")
            .and_then(|c| c.value)
            .unwrap_or(f64::NAN);
        notes.push(format!("{mock} (PAWS-X en accuracy {en:.2})"));
    }
    Ok(format!(
        "T_src vs T_src→tgt = repeat = 1.0 in all 8 directions under {}",
        notes.join(", ")
    ))
}

fn standardization_golden_suite() -> Outcome {
    use Label::*;
    use Lang::{De, En, Zh};
    use TaskKind::{NliTernary as Nli, ParaphraseBinary as Para};
    let golden: &[(TaskKind, Lang, &str, Label)] = &[
        (Para, En, "yes", Yes),
        (Para, En, "Yes, the sentences have the same meaning.", Yes),
        (Para, En, "Yes.", Yes),
        (Para, En, "  YES\n", Yes),
        (Para, En, "No.", No),
        (Para, En, "No, they do not have the same meaning.", No),
        (Para, En, "The answer is yes", Yes),
        (Para, En, "yes or no", Invalid),
        (Para, En, "Maybe", Invalid),
        (Para, En, "Nope", Invalid),
        (Para, En, "Yesterday it rained.", Invalid),
        (Para, De, "Ja", Yes),
        (Para, De, "Nein.", No),
        (Para, De, "Ja, die Sätze haben die gleiche Bedeutung.", Yes),
        (Para, De, "nein, nicht ganz", No),
        (Para, De, "Jein", Invalid),
        (Para, Zh, "是", Yes),
        (Para, Zh, "否", No),
        (Para, Zh, "不是", No),
        (Para, Zh, "不是。", No),
        (Para, Zh, "是的，这两个句子意思相同。", Yes),
        (Para, Zh, "不是，意思不同。", No),
        (Para, Zh, "是不是", Invalid),
        (Para, Zh, "我不确定", Invalid),
        (Nli, En, "A", A),
        (Nli, En, "c", C),
        (Nli, En, "(B)", B),
        (Nli, En, "B.", B),
        (Nli, En, "The answer is C.", C),
        (Nli, En, "Answer: (a)", A),
        (Nli, En, "\"C\"", C),
        (Nli, En, "A or B", Invalid),
        (Nli, En, "a cat", Invalid),
        (Nli, En, "Neither", Invalid),
        (Nli, De, "B", B),
        (Nli, De, "Die Antwort ist A.", A),
        (Nli, Zh, "答案是（C）", C),
        (Nli, Zh, "选A", A),
    ];
    let set = load_builtin_instructions().map_err(|e| e.to_string())?;
    let ledger = MappingLedger::default();
    let mut wrong = Vec::new();
    for &(task, lang, raw, want) in golden {
        let got = standardize_response(raw, set.instruction(task, lang).unwrap(), &ledger).label;
        if got != want {
            wrong.push(format!("{task}/{lang} {raw:?}: {got}, expected {want}"));
        }
    }
    ensure(wrong.is_empty(), || wrong.join("; "))?;

    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut worst = 0.0f64;
    let mocks = [
        "perfect",
        "perfect+dict",
        "noisy:0.3:seed=9+dict",
        "hash+echo",
        "fixed:NO",
    ];
    for mock in mocks {
        let mut plan = common::synthetic_plan(30, mock);
        if mock.starts_with("fixed") {
            plan.matrix.tasks = vec![TaskKind::ParaphraseBinary];
        }
        MockBehavior::parse(mock)?;
        let bundle = run_and_report(plan, &dir.path().join(mock.replace([':', '+', '='], "_")))?;
        worst = bundle
            .metadata
            .invalid_rate
            .values()
            .fold(worst, |a, b| a.max(*b));
    }
    ensure(worst == 0.0, || {
        format!("INVALID rate {worst} on a mock run")
    })?;
    Ok(format!(
        "{} golden replies map as expected; INVALID rate 0 on {} mock runs",
        golden.len(),
        mocks.len()
    ))
}

fn thresholded_consistency_checks() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let lex = dir.path().join("partial.json");
    write_partial_lexicon(&lex)?;
    let mut plan = common::synthetic_plan(80, &format!("noisy:0.25:seed=3+dict:{}", lex.display()));
    plan.threshold = 0.0;
    let bundle = run_and_report(plan, &dir.path().join("run"))?;
    for row in &bundle.thresholded.rows {
        for (i, scope) in ["T", "X"].iter().enumerate() {
            let full = bundle
                .consistency
                .cell(&row.label, scope)
                .and_then(|c| c.value);
            ensure(row.cells[i].value == full, || {
                format!(
                    "{} {scope}: {:?} vs {full:?}",
                    row.label, row.cells[i].value
                )
            })?;
        }
        ensure(row.cells[2].value == Some(100.0), || {
            format!("{} includes {:?}%", row.label, row.cells[2].value)
        })?;
    }

    let n = 10_000;
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let labels = [Label::Yes, Label::No];
    let (mut a, mut b, mut q) = (Vec::new(), Vec::new(), BTreeMap::new());
    for i in 0..n {
        let id = format!("e{i:05}");
        let la = labels[rng.gen_range(0..2)];
        let lb = if rng.gen_bool(0.7) {
            la
        } else {
            labels[usize::from(la == Label::Yes)]
        };
        q.insert(id.clone(), rng.gen_range(0.0..100.0));
        let rec = |label, lang| RunRecord {
            condition: multisense::Condition::baseline(TaskKind::ParaphraseBinary, lang),
            example_id: id.clone(),
            label,
            raw: String::new(),
            rule: None,
            prompt_key: String::new(),
        };
        a.push(rec(la, Lang::En));
        b.push(rec(lb, Lang::De));
    }
    let rho = correlate_quality_consistency(&a, &b, &q)
        .map_err(|e| e.to_string())?
        .rho;
    ensure(rho.abs() < 0.05, || format!("rho = {rho}"))?;
    let zero =
        multisense::metrics::thresholded_consistency(&a, &b, &q, 0.0).map_err(|e| e.to_string())?;
    ensure(zero.consistency == consistency(&a, &b).unwrap(), || {
        "threshold 0 differs on synthetic data".into()
    })?;
    Ok(format!("threshold 0 equals unrestricted in all 16 report cells; independent quality and agreement: rho = {rho:+.4} (n = {n})"))
}

fn crash_resumability() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut plan = common::synthetic_plan(40, "noisy:0.2:seed=4+dict");
    plan.synthetic = Some(SyntheticCorpus {
        examples: 40,
        seed: Some(8),
    });
    let plan_path = dir.path().join("plan.toml");
    std::fs::write(&plan_path, plan.to_toml()).map_err(|e| e.to_string())?;
    let bin = env!("CARGO_BIN_EXE_multisense");
    let run = |out: &Path, crash: Option<usize>| {
        let mut cmd = Command::new(bin);
        cmd.args([
            "run",
            "--plan",
            plan_path.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ]);
        cmd.env_remove(multisense::experiments::CRASH_AFTER_ENV);
        if let Some(n) = crash {
            cmd.env(multisense::experiments::CRASH_AFTER_ENV, n.to_string());
        }
        cmd.output().unwrap()
    };
    let score = |out: &Path| {
        Command::new(bin)
            .args(["score", "--out", out.to_str().unwrap()])
            .output()
            .unwrap()
    };

    let clean = dir.path().join("clean");
    let o = run(&clean, None);
    ensure(o.status.success(), || {
        String::from_utf8_lossy(&o.stderr).into_owned()
    })?;
    let writes = common::read(&clean.join("journal.jsonl")).lines().count();

    let crashed = dir.path().join("crashed");
    let half = writes / 2;
    let o = run(&crashed, Some(half));
    ensure(!o.status.success(), || "run did not crash".into())?;
    let partial = common::read(&crashed.join("journal.jsonl"));
    ensure(
        partial.lines().count() == half + 1 && !partial.ends_with('\n'),
        || format!("journal after crash has {} lines", partial.lines().count()),
    )?;
    let o = run(&crashed, None);
    ensure(o.status.success(), || {
        String::from_utf8_lossy(&o.stderr).into_owned()
    })?;
    let resumed_writes = common::read(&crashed.join("journal.jsonl")).lines().count();
    ensure(resumed_writes == writes, || {
        format!("{resumed_writes} journal records after resume, {writes} uninterrupted")
    })?;

    for out in [&clean, &crashed] {
        let o = score(out);
        ensure(o.status.success(), || {
            String::from_utf8_lossy(&o.stderr).into_owned()
        })?;
    }
    for name in ["report.md", "report.csv", "metadata.json"] {
        let a = std::fs::read(clean.join("reports").join(name)).map_err(|e| e.to_string())?;
        let b = std::fs::read(crashed.join("reports").join(name)).map_err(|e| e.to_string())?;
        ensure(a == b, || format!("{name} differs"))?;
    }
    Ok(format!("aborted at journal write {} of {writes}; resumed run re-issued {} calls; score output byte-identical", half + 1, writes - half))
}

fn main() {
    let criteria: [Criterion; 8] = [
        ("metric parity", metric_parity),
        ("decomposition identity", decomposition_identity),
        ("end-to-end mock oracle", end_to_end_mock_oracle),
        ("request-count law", request_count_law),
        (
            "identity-translation invariance",
            identity_translation_invariance,
        ),
        ("standardization", standardization_golden_suite),
        ("thresholded consistency", thresholded_consistency_checks),
        ("crash resumability", crash_resumability),
    ];
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (name, check) in criteria {
        let t = Instant::now();
        let outcome = panic::catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default())
        });
        match outcome {
            Ok(detail) => println!("PASS  {name}: {detail} [{} ms]", ms(t)),
            Err(why) => {
                failed += 1;
                println!("FAIL  {name}: {why} [{} ms]", ms(t));
            }
        }
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
