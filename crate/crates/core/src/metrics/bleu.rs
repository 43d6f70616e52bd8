//! Corpus BLEU (4-gram, brevity penalty against the closest reference
//! length, ties to the shorter reference).
//!
//! Smoothing `add-k` adds one to both the matched and total n-gram counts of
//! orders 2..=4, following the convention of sacreBLEU's `add-k` method. A
//! corpus with no matched n-grams at any order scores 0.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::normalize::{normalize, Normalization};
use super::MetricError;

pub const MAX_ORDER: usize = 4;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Smoothing {
    None,
    /// k = 1 on orders 2..=4.
    #[default]
    AddK,
}

impl Smoothing {
    pub fn label(self) -> &'static str {
        match self {
            Smoothing::None => "none",
            Smoothing::AddK => "add-k(k=1, orders 2-4)",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BleuScore {
    /// In `[0, 100]`.
    pub score: f64,
    pub precisions: [f64; MAX_ORDER],
    pub brevity_penalty: f64,
    pub sys_len: usize,
    pub ref_len: usize,
    pub smoothing: String,
}

/// Sufficient statistics for one or more segments.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct BleuStats {
    pub correct: [u64; MAX_ORDER],
    pub total: [u64; MAX_ORDER],
    pub sys_len: usize,
    pub ref_len: usize,
}

impl BleuStats {
    pub fn add(&mut self, other: &BleuStats) {
        for n in 0..MAX_ORDER {
            self.correct[n] += other.correct[n];
            self.total[n] += other.total[n];
        }
        self.sys_len += other.sys_len;
        self.ref_len += other.ref_len;
    }
}

fn ngram_counts<'a>(tokens: &'a [&'a str], n: usize) -> HashMap<&'a [&'a str], u64> {
    let mut counts = HashMap::new();
    if tokens.len() >= n {
        for w in tokens.windows(n) {
            *counts.entry(w).or_insert(0) += 1;
        }
    }
    counts
}

/// Statistics for one hypothesis against its references.
pub fn segment_stats(prediction: &str, references: &[String], norm: &Normalization) -> BleuStats {
    let hyp_text = normalize(prediction, norm);
    let ref_texts: Vec<String> = references.iter().map(|r| normalize(r, norm)).collect();
    let hyp: Vec<&str> = hyp_text.split_whitespace().collect();
    let refs: Vec<Vec<&str>> = ref_texts.iter().map(|r| r.split_whitespace().collect()).collect();

    let mut stats = BleuStats {
        sys_len: hyp.len(),
        ref_len: closest_ref_len(hyp.len(), refs.iter().map(Vec::len)),
        ..Default::default()
    };
    for n in 1..=MAX_ORDER {
        let hyp_counts = ngram_counts(&hyp, n);
        let mut max_ref: HashMap<&[&str], u64> = HashMap::new();
        for r in &refs {
            for (g, c) in ngram_counts(r, n) {
                let e = max_ref.entry(g).or_insert(0);
                *e = (*e).max(c);
            }
        }
        stats.correct[n - 1] = hyp_counts
            .iter()
            .map(|(g, &c)| c.min(max_ref.get(g).copied().unwrap_or(0)))
            .sum();
        stats.total[n - 1] = hyp.len().saturating_sub(n - 1) as u64;
    }
    stats
}

fn closest_ref_len(hyp_len: usize, ref_lens: impl Iterator<Item = usize>) -> usize {
    ref_lens.min_by_key(|&r| (hyp_len.abs_diff(r), r)).unwrap_or(0)
}

pub fn score_from_stats(stats: &BleuStats, smoothing: Smoothing) -> BleuScore {
    let bp = if stats.sys_len == 0 {
        0.0
    } else if stats.sys_len < stats.ref_len {
        (1.0 - stats.ref_len as f64 / stats.sys_len as f64).exp()
    } else {
        1.0
    };
    let mut precisions = [0.0; MAX_ORDER];
    let done = |score: f64, precisions| BleuScore {
        score,
        precisions,
        brevity_penalty: bp,
        sys_len: stats.sys_len,
        ref_len: stats.ref_len,
        smoothing: smoothing.label().to_string(),
    };
    if stats.correct.iter().all(|&c| c == 0) {
        return done(0.0, precisions);
    }
    let mut log_sum = 0.0;
    for n in 0..MAX_ORDER {
        let k = if smoothing == Smoothing::AddK && n > 0 {
            1.0
        } else {
            0.0
        };
        let correct = stats.correct[n] as f64 + k;
        let total = stats.total[n] as f64 + k;
        if total == 0.0 || correct == 0.0 {
            return done(0.0, precisions);
        }
        precisions[n] = 100.0 * correct / total;
        log_sum += (correct / total).ln();
    }
    let score = (100.0 * bp * (log_sum / MAX_ORDER as f64).exp()).min(100.0);
    done(score, precisions)
}

pub fn corpus_bleu(
    predictions: &[String],
    references: &[Vec<String>],
    smoothing: Smoothing,
    norm: &Normalization,
) -> Result<BleuScore, MetricError> {
    if predictions.len() != references.len() {
        return Err(MetricError::LengthMismatch {
            predictions: predictions.len(),
            references: references.len(),
        });
    }
    if let Some(i) = references.iter().position(Vec::is_empty) {
        return Err(MetricError::EmptyReferences(i));
    }
    let mut stats = BleuStats::default();
    for (p, r) in predictions.iter().zip(references) {
        stats.add(&segment_stats(p, r, norm));
    }
    Ok(score_from_stats(&stats, smoothing))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(v: &[&str]) -> Vec<String> {
        v.iter().map(|x| x.to_string()).collect()
    }

    #[test]
    fn identical_is_100() {
        let preds = s(&["the cat sat on the mat", "a b", "x"]);
        let refs: Vec<Vec<String>> = preds.iter().map(|p| vec![p.clone()]).collect();
        let b = corpus_bleu(&preds, &refs, Smoothing::AddK, &Normalization::default()).unwrap();
        assert_eq!(b.score, 100.0);
    }

    #[test]
    fn no_overlap_is_zero() {
        let preds = s(&["a b c d"]);
        let refs = vec![s(&["w x y z"])];
        let b = corpus_bleu(&preds, &refs, Smoothing::None, &Normalization::default()).unwrap();
        assert_eq!(b.score, 0.0);
    }

    #[test]
    fn length_mismatch() {
        let err = corpus_bleu(&s(&["a"]), &[], Smoothing::AddK, &Normalization::default()).unwrap_err();
        assert!(matches!(err, MetricError::LengthMismatch { .. }));
        let err = corpus_bleu(&s(&["a"]), &[vec![]], Smoothing::AddK, &Normalization::default()).unwrap_err();
        assert!(matches!(err, MetricError::EmptyReferences(0)));
    }

    #[test]
    fn closest_reference_breaks_ties_short() {
        assert_eq!(closest_ref_len(5, [3, 7].into_iter()), 3);
        assert_eq!(closest_ref_len(5, [6, 4].into_iter()), 4);
        assert_eq!(closest_ref_len(5, [9, 5].into_iter()), 5);
    }

    #[test]
    fn clipping() {
        let st = segment_stats("the the the", &s(&["the cat"]), &Normalization::NONE);
        assert_eq!(st.correct[0], 1);
        assert_eq!(st.total[0], 3);
        assert_eq!(st.total[3], 0);
    }
}
