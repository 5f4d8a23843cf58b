//! Instruction templates, translation instructions and prompt rendering.
//!
//! Templates ship as editable TOML data files under `templates/`; a directory
//! of replacement files can be loaded with [`TemplateSet::load_dir`].

mod builtin;

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::{Example, Label, Lang, TaskKind};

pub use builtin::{load_builtin_instructions, BUILTIN_FILES};

const PLACEHOLDERS: [&str; 3] = ["[text]", "[sentence_1]", "[sentence_2]"];
const TEXT_SLOT: &str = "[text]";

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    /// Written by a native speaker.
    Original,
    /// Recomposed from the model's own translation of the `src` template.
    ModelTranslated { src: Lang },
}

/// A task instruction split into the three independently translated parts.
///
/// Rendered as `prefix J word 1: "s1" J word 2: "s2" J suffix`, where `J`
/// is the template's joiner (a space, or empty for unsegmented scripts).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstructionTemplate {
    pub task: TaskKind,
    pub language: Lang,
    pub provenance: Provenance,
    pub prefix: String,
    pub sentence_word: String,
    pub suffix: String,
    pub joiner: String,
    /// Canonical answer token per label, in this template's language.
    pub answers: BTreeMap<Label, String>,
    /// Further replies accepted as a label, e.g. 不是 for NO in Chinese.
    #[serde(default)]
    pub accepted_aliases: BTreeMap<Label, Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranslationInstruction {
    pub src: Lang,
    pub tgt: Lang,
    /// Written in `src`, with exactly one `[text]` slot.
    pub template: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Purpose {
    Task,
    Translation,
}

impl fmt::Display for Purpose {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Purpose::Task => "task",
            Purpose::Translation => "translation",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prompt {
    pub text: String,
    pub purpose: Purpose,
    /// Routing metadata; see [`PromptTag`]. Not part of the cache key.
    pub condition_tag: String,
}

/// Structured form of [`Prompt::condition_tag`], which lets mock providers
/// recover what a prompt is about without parsing its text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PromptTag {
    Task {
        task: TaskKind,
        instruction_lang: Lang,
        example_id: String,
    },
    Translation {
        src: Lang,
        tgt: Lang,
    },
}

impl fmt::Display for PromptTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PromptTag::Task {
                task,
                instruction_lang,
                example_id,
            } => {
                write!(f, "task:{task}:{instruction_lang}:{example_id}")
            }
            PromptTag::Translation { src, tgt } => write!(f, "translate:{src}:{tgt}"),
        }
    }
}

impl FromStr for PromptTag {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut parts = s.splitn(4, ':');
        match (parts.next(), parts.next(), parts.next(), parts.next()) {
            (Some("task"), Some(task), Some(lang), Some(id)) => Ok(PromptTag::Task {
                task: task.parse()?,
                instruction_lang: lang.parse()?,
                example_id: id.to_owned(),
            }),
            (Some("translate"), Some(src), Some(tgt), None) => Ok(PromptTag::Translation {
                src: src.parse()?,
                tgt: tgt.parse()?,
            }),
            _ => Err(format!("unrecognized prompt tag {s:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Part {
    Prefix,
    SentenceWord,
    Suffix,
}

impl fmt::Display for Part {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Part::Prefix => "prefix",
            Part::SentenceWord => "sentence_word",
            Part::Suffix => "suffix",
        })
    }
}

#[derive(Debug, thiserror::Error)]
pub enum PromptError {
    #[error("no instruction template for {task} in {lang}")]
    MissingTemplate { task: TaskKind, lang: Lang },
    #[error("no translation instruction for {src}->{tgt}")]
    MissingTranslation { src: Lang, tgt: Lang },
    #[error("malformed template {path}: {reason}")]
    MalformedTemplate { path: PathBuf, reason: String },
    #[error("unresolved placeholder {0:?} in rendered prompt")]
    UnresolvedPlaceholder(String),
    #[error("text to translate is empty")]
    EmptyText,
    #[error("translated {0} is empty")]
    EmptyPart(Part),
}

impl InstructionTemplate {
    /// Checks the template invariants; the message names the first problem.
    pub fn check(&self) -> Result<(), String> {
        for (part, text) in [
            (Part::Prefix, &self.prefix),
            (Part::SentenceWord, &self.sentence_word),
            (Part::Suffix, &self.suffix),
        ] {
            if text.trim().is_empty() {
                return Err(format!("{part} is empty"));
            }
            if let Some(p) = PLACEHOLDERS.iter().find(|p| text.contains(*p)) {
                return Err(format!("{part} contains placeholder {p}"));
            }
        }
        for label in self.task.labels() {
            match self.answers.get(label) {
                Some(a) if !a.trim().is_empty() => {}
                _ => return Err(format!("no answer for label {label}")),
            }
        }
        if let Some(l) = self
            .answers
            .keys()
            .chain(self.accepted_aliases.keys())
            .find(|l| !self.task.accepts(**l))
        {
            return Err(format!("label {l} is not part of task {}", self.task));
        }
        Ok(())
    }

    /// All accepted surface forms per label: the answer first, then aliases.
    pub fn answer_forms(&self) -> Vec<(Label, &str)> {
        let mut out = Vec::new();
        for label in self.task.labels() {
            if let Some(a) = self.answers.get(label) {
                out.push((*label, a.as_str()));
            }
            for alias in self.accepted_aliases.get(label).into_iter().flatten() {
                out.push((*label, alias.as_str()));
            }
        }
        out
    }

    /// Rendering of the instruction with the two sentence placeholders left in.
    pub fn display_form(&self) -> String {
        self.render_pair("[sentence_1]", "[sentence_2]")
    }

    fn render_pair(&self, s1: &str, s2: &str) -> String {
        let j = &self.joiner;
        let w = &self.sentence_word;
        format!(
            "{}{j}{w} 1: \"{s1}\"{j}{w} 2: \"{s2}\"{j}{}",
            self.prefix, self.suffix
        )
    }
}

/// Renders the task prompt for one example.
pub fn render_task_prompt(tmpl: &InstructionTemplate, ex: &Example) -> Result<Prompt, PromptError> {
    for part in [
        &tmpl.prefix,
        &tmpl.sentence_word,
        &tmpl.suffix,
        &tmpl.joiner,
    ] {
        if let Some(p) = PLACEHOLDERS.iter().find(|p| part.contains(*p)) {
            return Err(PromptError::UnresolvedPlaceholder((*p).to_owned()));
        }
    }
    let tag = PromptTag::Task {
        task: tmpl.task,
        instruction_lang: tmpl.language,
        example_id: ex.id.clone(),
    };
    Ok(Prompt {
        text: tmpl.render_pair(&ex.sentence1, &ex.sentence2),
        purpose: Purpose::Task,
        condition_tag: tag.to_string(),
    })
}

impl TranslationInstruction {
    pub fn check(&self) -> Result<(), String> {
        if self.src == self.tgt {
            return Err("source and target language are equal".into());
        }
        match self.template.matches(TEXT_SLOT).count() {
            1 => Ok(()),
            n => Err(format!("expected exactly one {TEXT_SLOT} slot, found {n}")),
        }
    }

    /// The fixed text around the slot.
    pub fn frame(&self) -> (&str, &str) {
        self.template
            .split_once(TEXT_SLOT)
            .unwrap_or((&self.template, ""))
    }
}

pub fn render_translation_prompt(
    ti: &TranslationInstruction,
    text: &str,
) -> Result<Prompt, PromptError> {
    if text.trim().is_empty() {
        return Err(PromptError::EmptyText);
    }
    let (before, after) = ti.frame();
    if after.is_empty() && !ti.template.contains(TEXT_SLOT) {
        return Err(PromptError::UnresolvedPlaceholder(TEXT_SLOT.into()));
    }
    Ok(Prompt {
        text: format!("{before}{text}{after}"),
        purpose: Purpose::Translation,
        condition_tag: PromptTag::Translation {
            src: ti.src,
            tgt: ti.tgt,
        }
        .to_string(),
    })
}

const QUOTE_PAIRS: &[(char, char)] = &[
    ('"', '"'),
    ('\'', '\''),
    ('“', '”'),
    ('‘', '’'),
    ('„', '“'),
    ('„', '”'),
    ('«', '»'),
    ('»', '«'),
    ('‹', '›'),
    ('「', '」'),
    ('『', '』'),
    ('＂', '＂'),
];

/// Trims a model translation and removes one pair of matching surrounding
/// quotes, which chat models tend to copy from the translation prompt.
pub fn strip_echoed_quotes(text: &str) -> &str {
    let t = text.trim();
    let mut chars = t.chars();
    if let (Some(first), Some(last)) = (chars.next(), chars.next_back()) {
        if QUOTE_PAIRS.contains(&(first, last)) {
            return t[first.len_utf8()..t.len() - last.len_utf8()].trim();
        }
    }
    t
}

/// The joiner used when recomposing an instruction in `lang`. Unsegmented
/// targets join without spaces, unless the translated text carries no
/// characters of that script (an untranslated or echoed instruction).
pub fn composed_joiner(lang: Lang, prefix: &str, suffix: &str) -> &'static str {
    let native = |s: &str| s.chars().any(crate::metrics::tokenize::is_chinese_char);
    if lang.is_unsegmented() && (native(prefix) || native(suffix)) {
        ""
    } else {
        " "
    }
}

/// Recomposes the model's translations of the three instruction parts into a
/// target-language template. Answer tokens and aliases come from
/// `target_answers`, the original instruction for `tgt`. The answers of
/// `source`, the instruction that was translated, are accepted as well
/// unless they collide with a target form of another label: a translation
/// may keep the source-language answer words.
pub fn compose_translated_instruction(
    prefix_t: &str,
    word_t: &str,
    suffix_t: &str,
    source: &InstructionTemplate,
    target_answers: &InstructionTemplate,
) -> Result<InstructionTemplate, PromptError> {
    let mut parts = [
        (Part::Prefix, prefix_t),
        (Part::SentenceWord, word_t),
        (Part::Suffix, suffix_t),
    ]
    .into_iter()
    .map(|(part, text)| {
        let cleaned = strip_echoed_quotes(text);
        if cleaned.is_empty() {
            Err(PromptError::EmptyPart(part))
        } else {
            Ok(cleaned.to_owned())
        }
    });
    let prefix = parts.next().unwrap()?;
    let sentence_word = parts.next().unwrap()?;
    let suffix = parts.next().unwrap()?;
    let tgt = target_answers.language;
    let src = source.language;
    let joiner = composed_joiner(tgt, &prefix, &suffix).to_owned();
    let mut accepted_aliases = target_answers.accepted_aliases.clone();
    let taken: Vec<String> = target_answers
        .answer_forms()
        .into_iter()
        .map(|(_, f)| f.to_lowercase())
        .collect();
    for (label, form) in source.answer_forms() {
        let lower = form.to_lowercase();
        if taken.contains(&lower) {
            continue;
        }
        let list = accepted_aliases.entry(label).or_default();
        if !list.iter().any(|f| f.to_lowercase() == lower) {
            list.push(form.to_owned());
        }
    }
    Ok(InstructionTemplate {
        task: target_answers.task,
        language: tgt,
        provenance: Provenance::ModelTranslated { src },
        prefix,
        sentence_word,
        suffix,
        joiner,
        answers: target_answers.answers.clone(),
        accepted_aliases,
    })
}

/// All instruction and translation templates available to a run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TemplateSet {
    pub instructions: BTreeMap<(TaskKind, Lang), InstructionTemplate>,
    pub translations: BTreeMap<(Lang, Lang), TranslationInstruction>,
}

impl TemplateSet {
    pub fn instruction(
        &self,
        task: TaskKind,
        lang: Lang,
    ) -> Result<&InstructionTemplate, PromptError> {
        self.instructions
            .get(&(task, lang))
            .ok_or(PromptError::MissingTemplate { task, lang })
    }

    pub fn translation(
        &self,
        src: Lang,
        tgt: Lang,
    ) -> Result<&TranslationInstruction, PromptError> {
        self.translations
            .get(&(src, tgt))
            .ok_or(PromptError::MissingTranslation { src, tgt })
    }

    /// Loads `instruction_<task>_<lang>.toml` and `translation_<src>-<tgt>.toml`
    /// files from a directory. Every task must have a template for en, de and zh.
    pub fn load_dir(dir: &std::path::Path) -> Result<Self, PromptError> {
        let mut files = Vec::new();
        let entries = std::fs::read_dir(dir).map_err(|e| PromptError::MalformedTemplate {
            path: dir.to_owned(),
            reason: e.to_string(),
        })?;
        for entry in entries {
            let path = entry
                .map_err(|e| PromptError::MalformedTemplate {
                    path: dir.to_owned(),
                    reason: e.to_string(),
                })?
                .path();
            if path.extension().is_some_and(|e| e == "toml") {
                let text =
                    std::fs::read_to_string(&path).map_err(|e| PromptError::MalformedTemplate {
                        path: path.clone(),
                        reason: e.to_string(),
                    })?;
                files.push((path, text));
            }
        }
        files.sort();
        builtin::assemble(files.iter().map(|(p, t)| (p.clone(), t.as_str())))
    }
}
