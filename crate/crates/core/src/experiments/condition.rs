use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::{Lang, TaskKind};

/// Where an instruction or the input data of a condition comes from:
/// the original benchmark/native-speaker text, or the model's own
/// translation from `src` into `tgt`.
///
/// Serialized as `"en"` or `"en>de"`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum LangSpec {
    Original(Lang),
    ModelTranslated { src: Lang, tgt: Lang },
}

impl LangSpec {
    pub fn translated(src: Lang, tgt: Lang) -> Result<Self, String> {
        if src == tgt {
            return Err(format!(
                "translation direction {src}>{tgt} has equal languages"
            ));
        }
        Ok(LangSpec::ModelTranslated { src, tgt })
    }

    /// The language the text is presented in.
    pub fn effective(self) -> Lang {
        match self {
            LangSpec::Original(l) => l,
            LangSpec::ModelTranslated { tgt, .. } => tgt,
        }
    }

    /// The language of the original text this rendering derives from.
    pub fn source(self) -> Lang {
        match self {
            LangSpec::Original(l) => l,
            LangSpec::ModelTranslated { src, .. } => src,
        }
    }

    pub fn direction(self) -> Option<(Lang, Lang)> {
        match self {
            LangSpec::Original(_) => None,
            LangSpec::ModelTranslated { src, tgt } => Some((src, tgt)),
        }
    }

    fn notation(self) -> String {
        match self {
            LangSpec::Original(l) => l.to_string(),
            LangSpec::ModelTranslated { src, tgt } => format!("{src}→{tgt}"),
        }
    }
}

impl fmt::Display for LangSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LangSpec::Original(l) => write!(f, "{l}"),
            LangSpec::ModelTranslated { src, tgt } => write!(f, "{src}>{tgt}"),
        }
    }
}

impl FromStr for LangSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.split_once('>') {
            Some((src, tgt)) => LangSpec::translated(src.parse()?, tgt.parse()?),
            None => Ok(LangSpec::Original(s.parse()?)),
        }
    }
}

impl TryFrom<String> for LangSpec {
    type Error = String;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<LangSpec> for String {
    fn from(spec: LangSpec) -> String {
        spec.to_string()
    }
}

/// One cell of the experiment matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Condition {
    pub task: TaskKind,
    pub instruction: LangSpec,
    pub data: LangSpec,
    /// Distinguishes repeated runs of an otherwise identical condition.
    #[serde(default)]
    pub repeat_index: u32,
}

/// What a condition translates relative to its source-language baseline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Scope {
    /// Instruction and data both translated (or both original: a baseline).
    T,
    /// Instruction translated, original data.
    I,
    /// Data translated, original instruction.
    X,
}

impl fmt::Display for Scope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scope::T => "T",
            Scope::I => "I",
            Scope::X => "X",
        })
    }
}

impl FromStr for Scope {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "T" | "t" => Ok(Scope::T),
            "I" | "i" => Ok(Scope::I),
            "X" | "x" => Ok(Scope::X),
            other => Err(format!("unknown scope {other:?} (expected T, I or X)")),
        }
    }
}

impl Condition {
    /// Both parts original, in `lang`.
    pub fn baseline(task: TaskKind, lang: Lang) -> Self {
        Condition {
            task,
            instruction: LangSpec::Original(lang),
            data: LangSpec::Original(lang),
            repeat_index: 0,
        }
    }

    /// The translated cell `scope` for direction `src → tgt`.
    pub fn translated(task: TaskKind, scope: Scope, src: Lang, tgt: Lang) -> Self {
        let translated = LangSpec::ModelTranslated { src, tgt };
        let original = LangSpec::Original(src);
        let (instruction, data) = match scope {
            Scope::T => (translated, translated),
            Scope::I => (translated, original),
            Scope::X => (original, translated),
        };
        Condition {
            task,
            instruction,
            data,
            repeat_index: 0,
        }
    }

    /// Original data in `data` with the original instruction in `instruction`.
    pub fn mixed(task: TaskKind, data: Lang, instruction: Lang) -> Self {
        Condition {
            task,
            instruction: LangSpec::Original(instruction),
            data: LangSpec::Original(data),
            repeat_index: 0,
        }
    }

    pub fn with_repeat(mut self, repeat_index: u32) -> Self {
        self.repeat_index = repeat_index;
        self
    }

    pub fn is_baseline(&self) -> bool {
        matches!((self.instruction, self.data), (LangSpec::Original(a), LangSpec::Original(b)) if a == b)
    }

    /// The translation direction and scope, for cells derived from a
    /// source-language baseline by model translation.
    pub fn translated_cell(&self) -> Option<((Lang, Lang), Scope)> {
        match (self.instruction, self.data) {
            (
                LangSpec::ModelTranslated { src: a, tgt: b },
                LangSpec::ModelTranslated { src: c, tgt: d },
            ) if (a, b) == (c, d) => Some(((a, b), Scope::T)),
            (LangSpec::ModelTranslated { src, tgt }, LangSpec::Original(l)) if l == src => {
                Some(((src, tgt), Scope::I))
            }
            (LangSpec::Original(l), LangSpec::ModelTranslated { src, tgt }) if l == src => {
                Some(((src, tgt), Scope::X))
            }
            _ => None,
        }
    }

    /// The condition whose answers this one is compared against: the
    /// original instruction and data in the source language.
    pub fn source_baseline(&self) -> Condition {
        Condition::baseline(self.task, self.data.source())
    }

    /// Translation directions this condition depends on.
    pub fn directions(&self) -> Vec<(Lang, Lang)> {
        let mut out: Vec<_> = [self.instruction.direction(), self.data.direction()]
            .into_iter()
            .flatten()
            .collect();
        out.dedup();
        out
    }

    /// File-system-safe identifier, stable across runs.
    pub fn slug(&self) -> String {
        let part = |s: LangSpec| match s {
            LangSpec::Original(l) => l.to_string(),
            LangSpec::ModelTranslated { src, tgt } => format!("{src}-{tgt}"),
        };
        let mut slug = format!(
            "{}__i_{}__x_{}",
            self.task.short_name(),
            part(self.instruction),
            part(self.data)
        );
        if self.repeat_index > 0 {
            slug.push_str(&format!("__r{}", self.repeat_index));
        }
        slug
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} ", self.task.display_name())?;
        if self.instruction == self.data {
            write!(f, "T_{}", self.instruction.notation())?;
        } else {
            write!(
                f,
                "I_{}/X_{}",
                self.instruction.notation(),
                self.data.notation()
            )?;
        }
        if self.repeat_index > 0 {
            write!(f, " (repeat {})", self.repeat_index)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lang_spec_string_form() {
        assert_eq!(
            "en>de".parse::<LangSpec>().unwrap(),
            LangSpec::ModelTranslated {
                src: Lang::En,
                tgt: Lang::De
            }
        );
        assert_eq!(
            "zh".parse::<LangSpec>().unwrap(),
            LangSpec::Original(Lang::Zh)
        );
        assert!("en>en".parse::<LangSpec>().is_err());
        let json = serde_json::to_string(&LangSpec::ModelTranslated {
            src: Lang::De,
            tgt: Lang::En,
        })
        .unwrap();
        assert_eq!(json, "\"de>en\"");
    }

    #[test]
    fn scopes_classify() {
        let t = Condition::translated(TaskKind::ParaphraseBinary, Scope::T, Lang::En, Lang::De);
        let i = Condition::translated(TaskKind::ParaphraseBinary, Scope::I, Lang::En, Lang::De);
        let x = Condition::translated(TaskKind::ParaphraseBinary, Scope::X, Lang::De, Lang::En);
        assert_eq!(t.translated_cell(), Some(((Lang::En, Lang::De), Scope::T)));
        assert_eq!(i.translated_cell(), Some(((Lang::En, Lang::De), Scope::I)));
        assert_eq!(x.translated_cell(), Some(((Lang::De, Lang::En), Scope::X)));
        assert_eq!(i.instruction.effective(), Lang::De);
        assert_eq!(i.data, LangSpec::Original(Lang::En));
        assert_eq!(
            x.source_baseline(),
            Condition::baseline(TaskKind::ParaphraseBinary, Lang::De)
        );
        assert!(Condition::mixed(TaskKind::NliTernary, Lang::En, Lang::De)
            .translated_cell()
            .is_none());
        assert!(!Condition::mixed(TaskKind::NliTernary, Lang::En, Lang::De).is_baseline());
    }

    #[test]
    fn baseline_pairs_with_source_not_target() {
        let c = Condition::translated(TaskKind::NliTernary, Scope::T, Lang::Zh, Lang::En);
        assert_eq!(
            c.source_baseline(),
            Condition::baseline(TaskKind::NliTernary, Lang::Zh)
        );
        assert_ne!(
            c.source_baseline(),
            Condition::baseline(TaskKind::NliTernary, Lang::En)
        );
    }

    #[test]
    fn notation_and_slug() {
        let i = Condition::translated(TaskKind::ParaphraseBinary, Scope::I, Lang::En, Lang::De);
        assert_eq!(i.to_string(), "PAWS-X I_en→de/X_en");
        assert_eq!(i.slug(), "pawsx__i_en-de__x_en");
        let rep = Condition::baseline(TaskKind::NliTernary, Lang::En).with_repeat(1);
        assert_eq!(rep.to_string(), "XNLI T_en (repeat 1)");
        assert_eq!(rep.slug(), "xnli__i_en__x_en__r1");
    }
}
