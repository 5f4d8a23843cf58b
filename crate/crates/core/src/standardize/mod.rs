//! Mapping free-text replies to task labels.
//!
//! Rules apply in order: exact match against a template answer or alias,
//! unambiguous containment of one, a reviewed ledger entry, and finally
//! INVALID.

mod ledger;

use serde::{Deserialize, Serialize};

use crate::corpus::{Label, TaskKind};
use crate::metrics::tokenize::is_chinese_char;
use crate::prompting::InstructionTemplate;

pub use ledger::{propose_ledger_entries, EntryStatus, LedgerEntry, LedgerError, MappingLedger};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchRule {
    Exact,
    Containment,
    Ledger,
    FallbackInvalid,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StandardizedResponse {
    pub label: Label,
    pub rule: MatchRule,
    pub raw: String,
}

const TERMINAL_PUNCTUATION: &[char] = &[
    '.', '!', '?', ',', ';', ':', '…', '。', '！', '？', '，', '；', '：', '、', '．',
];

/// Trims, lowercases (Unicode-aware) and strips trailing punctuation.
pub fn normalize(raw: &str) -> String {
    raw.trim()
        .to_lowercase()
        .trim_end_matches(|c: char| c.is_whitespace() || TERMINAL_PUNCTUATION.contains(&c))
        .to_owned()
}

fn is_latin_word_char(c: char) -> bool {
    c.is_alphanumeric() && !is_chinese_char(c)
}

/// Maximal runs of alphanumeric, non-CJK characters.
fn word_tokens(text: &str) -> Vec<&str> {
    text.split(|c: char| !is_latin_word_char(c))
        .filter(|t| !t.is_empty())
        .collect()
}

fn contains_token_seq(haystack: &[&str], needle: &[&str]) -> bool {
    !needle.is_empty() && haystack.windows(needle.len()).any(|w| w == needle)
}

const LETTER_OPENERS: &[char] = &[
    '"', '\'', '(', '[', '“', '‘', '„', '«', '「', '『', '（', '【',
];
const LETTER_CLOSERS: &[char] = &[
    '"', '\'', ')', ']', '”', '’', '“', '»', '」', '』', '）', '】',
];

/// Whether the single-letter answer `letter` appears in a way that cannot
/// be part of ordinary prose: an uppercase standalone token, or wrapped in
/// quotes or brackets in any case.
fn contains_letter(raw: &str, letter: char) -> bool {
    let upper = letter.to_ascii_uppercase();
    let mut up_buf = [0u8; 4];
    let up: &str = upper.encode_utf8(&mut up_buf);
    if word_tokens(raw).contains(&up) {
        return true;
    }
    let chars: Vec<char> = raw.chars().collect();
    chars.windows(3).any(|w| {
        w[1].eq_ignore_ascii_case(&letter)
            && LETTER_OPENERS.contains(&w[0])
            && LETTER_CLOSERS.contains(&w[2])
    })
}

fn is_letter_answer(task: TaskKind, form: &str) -> Option<char> {
    let mut chars = form.chars();
    match (task, chars.next(), chars.next()) {
        (TaskKind::NliTernary, Some(c), None) if c.is_ascii_alphabetic() => Some(c),
        _ => None,
    }
}

/// Labels whose answer forms occur in the reply, in label order.
fn contained_labels(raw: &str, norm: &str, tmpl: &InstructionTemplate) -> Vec<Label> {
    let forms = tmpl.answer_forms();
    let mut found: Vec<Label> = Vec::new();
    let norm_tokens = word_tokens(norm);

    // Substring forms (CJK), longest first; each match masks its span so
    // that e.g. 不是 is not also read as 是.
    let mut cjk: Vec<(Label, String)> = forms
        .iter()
        .map(|(l, f)| (*l, normalize(f)))
        .filter(|(_, f)| f.chars().any(is_chinese_char))
        .collect();
    cjk.sort_by(|a, b| {
        b.1.chars()
            .count()
            .cmp(&a.1.chars().count())
            .then(a.1.cmp(&b.1))
    });
    let mut masked = vec![false; norm.len()];
    for (label, form) in &cjk {
        for (start, m) in norm.match_indices(form.as_str()) {
            let span = start..start + m.len();
            if masked[span.clone()].iter().any(|&b| b) {
                continue;
            }
            masked[span].iter_mut().for_each(|b| *b = true);
            found.push(*label);
        }
    }

    for (label, form) in &forms {
        let nf = normalize(form);
        if nf.chars().any(is_chinese_char) {
            continue;
        }
        let hit = match is_letter_answer(tmpl.task, form) {
            Some(letter) => contains_letter(raw, letter),
            None => contains_token_seq(&norm_tokens, &word_tokens(&nf)),
        };
        if hit {
            found.push(*label);
        }
    }
    found.sort();
    found.dedup();
    found
}

/// Maps one reply to a label of the template's task, or INVALID.
pub fn standardize_response(
    raw: &str,
    tmpl: &InstructionTemplate,
    ledger: &MappingLedger,
) -> StandardizedResponse {
    let norm = normalize(raw);
    let done = |label, rule| StandardizedResponse {
        label,
        rule,
        raw: raw.to_owned(),
    };

    if let Some((label, _)) = tmpl
        .answer_forms()
        .into_iter()
        .find(|(_, f)| normalize(f) == norm)
    {
        return done(label, MatchRule::Exact);
    }
    if let [label] = contained_labels(raw, &norm, tmpl)[..] {
        return done(label, MatchRule::Containment);
    }
    if let Some(label) = ledger.lookup(tmpl.task, tmpl.language, &norm) {
        return done(label, MatchRule::Ledger);
    }
    done(Label::Invalid, MatchRule::FallbackInvalid)
}

/// Best guess for an unmatched reply: the label with the most answer forms
/// present as loose tokens (or substrings, for CJK forms), if unique.
pub(crate) fn guess_label(norm: &str, tmpl: &InstructionTemplate) -> Label {
    let tokens = word_tokens(norm);
    let mut scores: Vec<(usize, Label)> = tmpl
        .task
        .labels()
        .iter()
        .map(|&label| {
            let hits = tmpl
                .answer_forms()
                .into_iter()
                .filter(|(l, f)| {
                    let nf = normalize(f);
                    *l == label
                        && if nf.chars().any(is_chinese_char) {
                            norm.contains(nf.as_str())
                        } else {
                            contains_token_seq(&tokens, &word_tokens(&nf))
                        }
                })
                .count();
            (hits, label)
        })
        .collect();
    scores.sort_by_key(|s| std::cmp::Reverse(s.0));
    match scores.as_slice() {
        [(s, l), rest @ ..] if *s > 0 && rest.first().is_none_or(|r| r.0 < *s) => *l,
        _ => Label::Invalid,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Lang;
    use crate::prompting::load_builtin_instructions;

    fn check(task: TaskKind, lang: Lang, raw: &str) -> (Label, MatchRule) {
        let set = load_builtin_instructions().unwrap();
        let r = standardize_response(
            raw,
            set.instruction(task, lang).unwrap(),
            &MappingLedger::default(),
        );
        (r.label, r.rule)
    }

    #[test]
    fn normalization() {
        assert_eq!(normalize("  Yes.  "), "yes");
        assert_eq!(normalize("JA!"), "ja");
        assert_eq!(normalize("不是。"), "不是");
        assert_eq!(normalize("no, not really?!"), "no, not really");
    }

    #[test]
    fn rules_apply_in_order() {
        use Label::*;
        use MatchRule::*;
        let p = TaskKind::ParaphraseBinary;
        assert_eq!(check(p, Lang::En, "yes"), (Yes, Exact));
        assert_eq!(
            check(p, Lang::En, "Yes, the sentences have the same meaning."),
            (Yes, Containment)
        );
        assert_eq!(
            check(p, Lang::En, "I am not sure I can decide."),
            (Invalid, FallbackInvalid)
        );
        assert_eq!(check(p, Lang::Zh, "不是"), (No, Exact));
        assert_eq!(
            check(p, Lang::Zh, "不是，这两个句子意思不同。"),
            (No, Containment)
        );
        assert_eq!(
            check(TaskKind::NliTernary, Lang::En, "A and C both seem possible"),
            (Invalid, FallbackInvalid)
        );
        assert_eq!(
            check(TaskKind::NliTernary, Lang::En, "The answer is (b)"),
            (B, Containment)
        );
        assert_eq!(
            check(TaskKind::NliTernary, Lang::En, "a neutral relation"),
            (Invalid, FallbackInvalid)
        );
    }
}
