//! ROUGE-1/2/L F1 over the same tokens BLEU uses.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::tokenize::tokens;
use crate::corpus::Lang;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RougeScores {
    pub rouge1: f64,
    pub rouge2: f64,
    pub rouge_l: f64,
}

fn f1(overlap: usize, hyp_count: usize, ref_count: usize) -> f64 {
    let p = overlap as f64 / hyp_count.max(1) as f64;
    let r = overlap as f64 / ref_count.max(1) as f64;
    if p + r > 0.0 {
        2.0 * p * r / (p + r)
    } else {
        0.0
    }
}

fn ngrams(toks: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut m = HashMap::new();
    if toks.len() >= n {
        for w in toks.windows(n) {
            *m.entry(w).or_insert(0) += 1;
        }
    }
    m
}

pub fn rouge_n(hyp: &[String], reference: &[String], n: usize) -> f64 {
    let h = ngrams(hyp, n);
    let r = ngrams(reference, n);
    let overlap = h
        .iter()
        .map(|(g, &c)| c.min(r.get(g).copied().unwrap_or(0)))
        .sum();
    f1(overlap, h.values().sum(), r.values().sum())
}

pub fn lcs_len(a: &[String], b: &[String]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y {
                prev[j] + 1
            } else {
                cur[j].max(prev[j + 1])
            };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

pub fn rouge_l(hyp: &[String], reference: &[String]) -> f64 {
    if hyp.is_empty() || reference.is_empty() {
        return 0.0;
    }
    f1(lcs_len(hyp, reference), hyp.len(), reference.len())
}

pub fn rouge(hypothesis: &str, reference: &str, lang: Lang) -> RougeScores {
    let h = tokens(hypothesis, lang);
    let r = tokens(reference, lang);
    RougeScores {
        rouge1: rouge_n(&h, &r, 1),
        rouge2: rouge_n(&h, &r, 2),
        rouge_l: rouge_l(&h, &r),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_text_scores_one() {
        let s = rouge(
            "der Hund sieht die Katze",
            "der Hund sieht die Katze",
            Lang::De,
        );
        assert_eq!(
            s,
            RougeScores {
                rouge1: 1.0,
                rouge2: 1.0,
                rouge_l: 1.0
            }
        );
    }

    #[test]
    fn lcs_matches_hand_count() {
        let t = |s: &str| s.split(' ').map(str::to_owned).collect::<Vec<_>>();
        assert_eq!(lcs_len(&t("a b c d e"), &t("a c e x")), 3);
        let r = rouge_l(&t("a b c d e"), &t("a c e x"));
        assert!((r - 2.0 * 0.6 * 0.75 / 1.35).abs() < 1e-12);
    }

    #[test]
    fn disjoint_text_scores_zero() {
        assert_eq!(rouge("a b", "c d", Lang::En), RougeScores::default());
        assert_eq!(rouge("", "c d", Lang::En), RougeScores::default());
    }
}
