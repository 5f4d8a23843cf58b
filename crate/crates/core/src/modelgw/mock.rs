//! Deterministic stand-in for the model, used as a test oracle.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use super::{AttemptError, GatewayError, ModelRequest, Provider};
use crate::corpus::{synthetic, Label, Lang, ParallelCorpus, TaskKind};
use crate::prompting::{PromptTag, TemplateSet};

#[derive(Debug, Clone, PartialEq)]
pub enum TaskMode {
    /// Always the gold label.
    Perfect,
    FixedLabel(Label),
    /// Gold with probability `1 - p`, else a uniformly drawn wrong label;
    /// `p` depends on the instruction language. Pure in (seed, prompt text).
    SeededNoisy {
        seed: u64,
        flip_prob: BTreeMap<Lang, f64>,
    },
    /// A label that depends only on the two quoted sentences, so identical
    /// data yields identical answers whatever the instruction.
    SentenceHash {
        seed: u64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub enum TranslateMode {
    /// Returns the text to translate unchanged.
    Echo,
    /// Maps space-separated tokens through a per-direction lexicon; unknown
    /// tokens pass through.
    Dictionary(BTreeMap<(Lang, Lang), BTreeMap<String, String>>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct MockBehavior {
    pub task: TaskMode,
    pub translate: TranslateMode,
}

impl Default for MockBehavior {
    fn default() -> Self {
        MockBehavior {
            task: TaskMode::Perfect,
            translate: TranslateMode::Echo,
        }
    }
}

fn synthetic_dictionary() -> BTreeMap<(Lang, Lang), BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for src in Lang::ALL {
        for tgt in Lang::ALL {
            if src != tgt {
                out.insert((src, tgt), synthetic::lexicon(src, tgt));
            }
        }
    }
    out
}

type Dictionaries = BTreeMap<(Lang, Lang), BTreeMap<String, String>>;

/// Reads `{"en-de": {"the": "der", ...}, ...}`.
fn dictionary_file(path: &Path) -> Result<Dictionaries, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let raw: BTreeMap<String, BTreeMap<String, String>> =
        serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))?;
    raw.into_iter()
        .map(|(dir, lex)| {
            let (s, t) = dir
                .split_once('-')
                .ok_or_else(|| format!("bad direction {dir:?}"))?;
            Ok(((s.parse()?, t.parse()?), lex))
        })
        .collect()
}

fn parse_seed(rest: &[&str]) -> Result<u64, String> {
    match rest {
        [] => Ok(0),
        [s] => s
            .strip_prefix("seed=")
            .ok_or_else(|| format!("expected seed=N, got {s:?}"))?
            .parse()
            .map_err(|e| format!("bad seed: {e}")),
        _ => Err(format!("unexpected arguments {rest:?}")),
    }
}

impl MockBehavior {
    /// Parses the part after `mock:`, e.g. `perfect`, `fixed:YES`,
    /// `noisy:0.2:seed=7`, `noisy:en=0.1,de=0.3`, `hash`, `echo`, `dict`,
    /// `dict:lexicon.json`. A task mode and a translation mode can be
    /// combined with `+`, as in `noisy:0.2+dict`.
    pub fn parse(spec: &str) -> Result<Self, String> {
        let mut b = MockBehavior::default();
        for part in spec.split('+').filter(|p| !p.is_empty()) {
            let fields: Vec<&str> = part.split(':').collect();
            match fields[..] {
                ["perfect"] => b.task = TaskMode::Perfect,
                ["fixed", label] => b.task = TaskMode::FixedLabel(label.parse()?),
                ["noisy", probs, ref rest @ ..] => {
                    let flip_prob = if probs.contains('=') {
                        probs
                            .split(',')
                            .map(|kv| {
                                let (l, p) = kv
                                    .split_once('=')
                                    .ok_or_else(|| format!("bad entry {kv:?}"))?;
                                Ok((l.parse()?, p.parse::<f64>().map_err(|e| e.to_string())?))
                            })
                            .collect::<Result<BTreeMap<Lang, f64>, String>>()?
                    } else {
                        let p: f64 = probs
                            .parse()
                            .map_err(|e| format!("bad probability {probs:?}: {e}"))?;
                        Lang::ALL.iter().map(|&l| (l, p)).collect()
                    };
                    if flip_prob.values().any(|p| !(0.0..=1.0).contains(p)) {
                        return Err("flip probabilities must lie in [0, 1]".into());
                    }
                    b.task = TaskMode::SeededNoisy {
                        seed: parse_seed(rest)?,
                        flip_prob,
                    };
                }
                ["hash", ref rest @ ..] => {
                    b.task = TaskMode::SentenceHash {
                        seed: parse_seed(rest)?,
                    }
                }
                ["echo"] => b.translate = TranslateMode::Echo,
                ["dict"] => b.translate = TranslateMode::Dictionary(synthetic_dictionary()),
                ["dict", ref path @ ..] => {
                    b.translate =
                        TranslateMode::Dictionary(dictionary_file(Path::new(&path.join(":")))?)
                }
                _ => return Err(format!("unknown mock behaviour {part:?}")),
            }
        }
        Ok(b)
    }
}

impl fmt::Display for MockBehavior {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.task {
            TaskMode::Perfect => write!(f, "perfect")?,
            TaskMode::FixedLabel(l) => write!(f, "fixed:{l}")?,
            TaskMode::SeededNoisy { seed, flip_prob } => {
                let probs: Vec<String> =
                    flip_prob.iter().map(|(l, p)| format!("{l}={p}")).collect();
                write!(f, "noisy:{}:seed={seed}", probs.join(","))?
            }
            TaskMode::SentenceHash { seed } => write!(f, "hash:seed={seed}")?,
        }
        match &self.translate {
            TranslateMode::Echo => write!(f, "+echo"),
            TranslateMode::Dictionary(_) => write!(f, "+dict"),
        }
    }
}

pub struct MockProvider {
    behavior: MockBehavior,
    golds: HashMap<(TaskKind, String), Label>,
    templates: TemplateSet,
}

/// Builds a mock that can resolve every example of `corpora`.
pub fn configure_mock(
    behavior: MockBehavior,
    corpora: &[&ParallelCorpus],
    templates: &TemplateSet,
) -> MockProvider {
    let golds = corpora
        .iter()
        .flat_map(|c| c.golds().into_iter().map(move |(id, l)| ((c.task, id), l)))
        .collect();
    MockProvider {
        behavior,
        golds,
        templates: templates.clone(),
    }
}

fn digest_rng(seed: u64, text: &str) -> ChaCha8Rng {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(text.as_bytes());
    ChaCha8Rng::from_seed(h.finalize().into())
}

/// The two sentences of a rendered task prompt (`... 1: "s1" ... 2: "s2" ...`).
fn quoted_sentences(text: &str) -> Option<(&str, &str)> {
    let start1 = text.find(" 1: \"")? + 5;
    let start2 = text.rfind(" 2: \"")?;
    let s1_region = &text[start1..start2];
    let s1 = &s1_region[..s1_region.rfind('"')?];
    let rest = &text[start2 + 5..];
    Some((s1, &rest[..rest.rfind('"')?]))
}

impl MockProvider {
    fn unknown(tag: &str) -> AttemptError {
        AttemptError::Permanent(GatewayError::UnknownExample(tag.to_owned()))
    }

    /// The language the reply is given in: that of the original instruction
    /// whose closing sentence ends the prompt, else the tagged one. Keeps
    /// replies a function of the prompt text, as the cache assumes.
    fn reply_language(&self, text: &str, task: TaskKind, tagged: Lang) -> Lang {
        let ends_with_suffix = |l: Lang| {
            self.templates
                .instruction(task, l)
                .is_ok_and(|t| text.ends_with(&t.suffix))
        };
        std::iter::once(tagged)
            .chain(Lang::ALL)
            .find(|&l| ends_with_suffix(l))
            .unwrap_or(tagged)
    }

    fn answer_task(
        &self,
        req: &ModelRequest,
        task: TaskKind,
        tagged: Lang,
        id: &str,
    ) -> Result<String, AttemptError> {
        let tag = &req.prompt.condition_tag;
        let lang = self.reply_language(&req.prompt.text, task, tagged);
        let gold = *self
            .golds
            .get(&(task, id.to_owned()))
            .ok_or_else(|| Self::unknown(tag))?;
        let labels = task.labels();
        let label = match &self.behavior.task {
            TaskMode::Perfect => gold,
            TaskMode::FixedLabel(l) => *l,
            TaskMode::SeededNoisy { seed, flip_prob } => {
                let mut rng = digest_rng(*seed, &req.prompt.text);
                let p = flip_prob.get(&lang).copied().unwrap_or(0.0);
                if rng.gen::<f64>() < p {
                    let wrong: Vec<Label> = labels.iter().copied().filter(|l| *l != gold).collect();
                    wrong[rng.gen_range(0..wrong.len())]
                } else {
                    gold
                }
            }
            TaskMode::SentenceHash { seed } => {
                let (s1, s2) =
                    quoted_sentences(&req.prompt.text).ok_or_else(|| Self::unknown(tag))?;
                let mut rng = digest_rng(*seed, &format!("{s1}\u{0}{s2}"));
                labels[rng.gen_range(0..labels.len())]
            }
        };
        let tmpl = self
            .templates
            .instruction(task, lang)
            .map_err(|_| Self::unknown(tag))?;
        tmpl.answers
            .get(&label)
            .cloned()
            .ok_or_else(|| Self::unknown(tag))
    }

    fn translate(&self, req: &ModelRequest, src: Lang, tgt: Lang) -> Result<String, AttemptError> {
        let tag = &req.prompt.condition_tag;
        let ti = self
            .templates
            .translation(src, tgt)
            .map_err(|_| Self::unknown(tag))?;
        let (before, after) = ti.frame();
        let inner = req
            .prompt
            .text
            .strip_prefix(before)
            .and_then(|t| t.strip_suffix(after))
            .ok_or_else(|| Self::unknown(tag))?;
        Ok(match &self.behavior.translate {
            TranslateMode::Echo => inner.to_owned(),
            TranslateMode::Dictionary(dicts) => {
                let empty = BTreeMap::new();
                let lex = dicts.get(&(src, tgt)).unwrap_or(&empty);
                inner
                    .split(' ')
                    .map(|w| lex.get(w).map(String::as_str).unwrap_or(w))
                    .collect::<Vec<_>>()
                    .join(" ")
            }
        })
    }
}

impl Provider for MockProvider {
    fn name(&self) -> String {
        format!("mock:{}", self.behavior)
    }

    fn call(&self, req: &ModelRequest) -> Result<String, AttemptError> {
        let tag = &req.prompt.condition_tag;
        match tag.parse::<PromptTag>().map_err(|_| Self::unknown(tag))? {
            PromptTag::Task {
                task,
                instruction_lang,
                example_id,
            } => self.answer_task(req, task, instruction_lang, &example_id),
            PromptTag::Translation { src, tgt } => self.translate(req, src, tgt),
        }
    }
}
