use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use super::{InstructionTemplate, PromptError, Provenance, TemplateSet, TranslationInstruction};
use crate::corpus::{Lang, TaskKind};

macro_rules! template_file {
    ($name:literal) => {
        ($name, include_str!(concat!("../../templates/", $name)))
    };
}

/// The template data files compiled into the binary, by file name.
pub const BUILTIN_FILES: &[(&str, &str)] = &[
    template_file!("instruction_pawsx_en.toml"),
    template_file!("instruction_pawsx_de.toml"),
    template_file!("instruction_pawsx_zh.toml"),
    template_file!("instruction_xnli_en.toml"),
    template_file!("instruction_xnli_de.toml"),
    template_file!("instruction_xnli_zh.toml"),
    template_file!("translation_en-de.toml"),
    template_file!("translation_en-zh.toml"),
    template_file!("translation_de-en.toml"),
    template_file!("translation_zh-en.toml"),
];

/// Human-written instructions for both tasks in en/de/zh plus the four
/// translation instructions (each written in its source language).
pub fn load_builtin_instructions() -> Result<TemplateSet, PromptError> {
    assemble(
        BUILTIN_FILES
            .iter()
            .map(|(name, text)| (PathBuf::from(format!("templates/{name}")), *text)),
    )
}

fn malformed(path: &Path, reason: impl ToString) -> PromptError {
    PromptError::MalformedTemplate {
        path: path.to_owned(),
        reason: reason.to_string(),
    }
}

pub(super) fn assemble<'a>(
    files: impl Iterator<Item = (PathBuf, &'a str)>,
) -> Result<TemplateSet, PromptError> {
    let mut instructions = BTreeMap::new();
    let mut translations = BTreeMap::new();
    for (path, text) in files {
        let stem = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        if stem.starts_with("instruction_") {
            let tmpl: InstructionTemplate =
                toml::from_str(text).map_err(|e| malformed(&path, e))?;
            tmpl.check().map_err(|e| malformed(&path, e))?;
            if tmpl.provenance != Provenance::Original {
                return Err(malformed(&path, "shipped instructions must be originals"));
            }
            instructions.insert((tmpl.task, tmpl.language), tmpl);
        } else if stem.starts_with("translation_") {
            let ti: TranslationInstruction =
                toml::from_str(text).map_err(|e| malformed(&path, e))?;
            ti.check().map_err(|e| malformed(&path, e))?;
            translations.insert((ti.src, ti.tgt), ti);
        }
    }
    for task in TaskKind::ALL {
        for lang in Lang::ALL {
            if !instructions.contains_key(&(task, lang)) {
                return Err(PromptError::MissingTemplate { task, lang });
            }
        }
    }
    Ok(TemplateSet {
        instructions,
        translations,
    })
}
