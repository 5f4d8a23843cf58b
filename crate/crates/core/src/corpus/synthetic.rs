//! Seeded synthetic parallel corpora for demos and end-to-end tests.
//!
//! Sentences are built from a small trilingual lexicon, so a word-by-word
//! dictionary translator recovers the reference translations exactly.
//! Chinese sentences keep spaces between words for the same reason.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Dataset, Example, Lang, ParallelCorpus, TaskKind};

/// (en, de, zh) triples.
const ADJECTIVES: &[(&str, &str, &str)] = &[
    ("red", "rote", "红色的"),
    ("small", "kleine", "小的"),
    ("old", "alte", "老的"),
    ("big", "große", "大的"),
    ("quiet", "ruhige", "安静的"),
    ("new", "neue", "新的"),
];

const NOUNS: &[(&str, &str, &str)] = &[
    ("cat", "Katze", "猫"),
    ("dog", "Hund", "狗"),
    ("house", "Haus", "房子"),
    ("tree", "Baum", "树"),
    ("river", "Fluss", "河"),
    ("city", "Stadt", "城市"),
    ("book", "Buch", "书"),
    ("teacher", "Lehrer", "老师"),
    ("child", "Kind", "孩子"),
    ("bird", "Vogel", "鸟"),
];

const VERBS: &[(&str, &str, &str)] = &[
    ("sees", "sieht", "看见"),
    ("likes", "mag", "喜欢"),
    ("follows", "folgt", "跟着"),
    ("finds", "findet", "找到"),
    ("paints", "malt", "画"),
];

fn pick(entry: &(&'static str, &'static str, &'static str), lang: Lang) -> &'static str {
    match lang {
        Lang::En => entry.0,
        Lang::De => entry.1,
        Lang::Zh => entry.2,
    }
}

/// Word-for-word lexicon between two languages of the synthetic vocabulary.
pub fn lexicon(src: Lang, tgt: Lang) -> BTreeMap<String, String> {
    ADJECTIVES
        .iter()
        .chain(NOUNS)
        .chain(VERBS)
        .map(|e| (pick(e, src).to_owned(), pick(e, tgt).to_owned()))
        .collect()
}

fn sentence(
    words: &[&(&'static str, &'static str, &'static str)],
    number: usize,
    lang: Lang,
) -> String {
    let mut parts: Vec<&str> = words.iter().map(|w| pick(w, lang)).collect();
    let number = number.to_string();
    parts.push(&number);
    parts.join(" ")
}

/// Generates an `n`-example corpus in English, German and Chinese with
/// uniformly drawn gold labels. Every sentence is unique.
pub fn generate(task: TaskKind, n: usize, seed: u64) -> ParallelCorpus {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (task as u64).wrapping_mul(0x9e37_79b9));
    let labels = task.labels();
    let mut rows = Vec::with_capacity(n);
    for i in 0..n {
        let mut draw = || {
            [
                ADJECTIVES.choose(&mut rng).unwrap(),
                NOUNS.choose(&mut rng).unwrap(),
                VERBS.choose(&mut rng).unwrap(),
                ADJECTIVES.choose(&mut rng).unwrap(),
                NOUNS.choose(&mut rng).unwrap(),
            ]
        };
        let w1 = draw();
        let w2 = draw();
        let gold = labels[rng.gen_range(0..labels.len())];
        rows.push((format!("s{i:05}"), w1, w2, gold, i));
    }

    let per_language = Lang::ALL
        .iter()
        .map(|&lang| {
            let examples = rows
                .iter()
                .map(|(id, w1, w2, gold, i)| Example {
                    id: id.clone(),
                    sentence1: sentence(w1, 2 * i + 1, lang),
                    sentence2: sentence(w2, 2 * i + 2, lang),
                    gold: *gold,
                    language: lang,
                })
                .collect();
            (
                lang,
                Dataset {
                    task,
                    language: lang,
                    examples,
                    source_name: format!("synthetic-{}-{lang}", task.short_name()),
                },
            )
        })
        .collect();
    ParallelCorpus { task, per_language }
}
