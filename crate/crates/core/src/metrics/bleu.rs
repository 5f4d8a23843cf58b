//! BLEU with SacreBLEU-compatible statistics and smoothing.

use std::collections::HashMap;

use super::tokenize::tokens;
use crate::corpus::Lang;

pub const MAX_ORDER: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Smoothing {
    None,
    /// Exponential decay of the pseudo-count for zero-match orders.
    Exp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BleuConfig {
    pub smoothing: Smoothing,
    /// Average only over n-gram orders the hypothesis is long enough to contain.
    pub effective_order: bool,
}

impl BleuConfig {
    pub const SENTENCE: BleuConfig = BleuConfig {
        smoothing: Smoothing::Exp,
        effective_order: true,
    };
    pub const CORPUS: BleuConfig = BleuConfig {
        smoothing: Smoothing::None,
        effective_order: false,
    };
}

/// Sufficient statistics for BLEU; they add across segments.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct BleuStats {
    pub sys_len: u64,
    pub ref_len: u64,
    pub correct: [u64; MAX_ORDER],
    pub total: [u64; MAX_ORDER],
}

impl std::ops::AddAssign for BleuStats {
    fn add_assign(&mut self, o: Self) {
        self.sys_len += o.sys_len;
        self.ref_len += o.ref_len;
        for n in 0..MAX_ORDER {
            self.correct[n] += o.correct[n];
            self.total[n] += o.total[n];
        }
    }
}

fn ngram_counts(toks: &[String], n: usize) -> HashMap<&[String], u64> {
    let mut counts = HashMap::new();
    if toks.len() >= n {
        for w in toks.windows(n) {
            *counts.entry(w).or_insert(0) += 1;
        }
    }
    counts
}

pub fn segment_stats(hyp: &[String], reference: &[String]) -> BleuStats {
    let mut stats = BleuStats {
        sys_len: hyp.len() as u64,
        ref_len: reference.len() as u64,
        ..Default::default()
    };
    for n in 1..=MAX_ORDER {
        let h = ngram_counts(hyp, n);
        let r = ngram_counts(reference, n);
        stats.total[n - 1] = hyp.len().saturating_sub(n - 1) as u64;
        stats.correct[n - 1] = h
            .iter()
            .map(|(g, &c)| c.min(r.get(g).copied().unwrap_or(0)))
            .sum();
    }
    stats
}

fn log_or_floor(x: f64) -> f64 {
    if x == 0.0 {
        -9_999_999_999.0
    } else {
        x.ln()
    }
}

/// BLEU score on the 0-100 scale from accumulated statistics.
pub fn score_from_stats(s: &BleuStats, cfg: BleuConfig) -> f64 {
    if s.correct.iter().all(|&c| c == 0) {
        return 0.0;
    }
    let bp = if s.sys_len == 0 {
        0.0
    } else if s.sys_len < s.ref_len {
        (1.0 - s.ref_len as f64 / s.sys_len as f64).exp()
    } else {
        1.0
    };

    let mut precisions = [0.0f64; MAX_ORDER];
    let mut eff_order = MAX_ORDER;
    let mut smooth_mteval = 1.0f64;
    for n in 1..=MAX_ORDER {
        let (correct, total) = (s.correct[n - 1], s.total[n - 1]);
        if total == 0 {
            break;
        }
        if cfg.effective_order {
            eff_order = n;
        }
        precisions[n - 1] = if correct == 0 {
            match cfg.smoothing {
                Smoothing::Exp => {
                    smooth_mteval *= 2.0;
                    100.0 / (smooth_mteval * total as f64)
                }
                Smoothing::None => 0.0,
            }
        } else {
            100.0 * correct as f64 / total as f64
        };
    }
    let log_sum: f64 = precisions[..eff_order]
        .iter()
        .map(|&p| log_or_floor(p))
        .sum();
    bp * (log_sum / eff_order as f64).exp()
}

/// Single-segment BLEU (exponential smoothing, effective order).
pub fn sentence_bleu(hypothesis: &str, reference: &str, lang: Lang) -> f64 {
    let stats = segment_stats(&tokens(hypothesis, lang), &tokens(reference, lang));
    score_from_stats(&stats, BleuConfig::SENTENCE)
}

/// Corpus BLEU over aligned segments, without smoothing.
pub fn corpus_bleu(
    hypotheses: &[&str],
    references: &[&str],
    lang: Lang,
) -> Result<f64, super::MetricsError> {
    corpus_bleu_with(hypotheses, references, lang, BleuConfig::CORPUS)
}

pub fn corpus_bleu_with(
    hypotheses: &[&str],
    references: &[&str],
    lang: Lang,
    cfg: BleuConfig,
) -> Result<f64, super::MetricsError> {
    if hypotheses.len() != references.len() {
        return Err(super::MetricsError::LengthMismatch {
            left: hypotheses.len(),
            right: references.len(),
        });
    }
    let mut total = BleuStats::default();
    for (h, r) in hypotheses.iter().zip(references) {
        total += segment_stats(&tokens(h, lang), &tokens(r, lang));
    }
    Ok(score_from_stats(&total, cfg))
}
