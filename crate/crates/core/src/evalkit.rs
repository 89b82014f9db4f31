//! NER precision/recall/F1 and word error rate.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::alphabet::{strip_tags, Category, TagScheme};
use crate::entities::{parse_tagged, to_entity_set, ParseMode};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EvalError {
    #[error("{refs} references but {hyps} hypotheses")]
    LengthMismatch { refs: usize, hyps: usize },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl Prf {
    /// Zero denominators give zero, never NaN.
    pub fn from_counts(tp: usize, fp: usize, fn_: usize) -> Prf {
        let ratio = |n: usize, d: usize| if d == 0 { 0.0 } else { n as f64 / d as f64 };
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        Prf { precision, recall, f1: f1(precision, recall) }
    }
}

pub fn f1(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct CategoryScores {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl CategoryScores {
    fn from_counts(tp: usize, fp: usize, fn_: usize) -> Self {
        let Prf { precision, recall, f1 } = Prf::from_counts(tp, fp, fn_);
        CategoryScores { tp, fp, fn_, precision, recall, f1 }
    }

    fn support(&self) -> usize {
        self.tp + self.fp + self.fn_
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub per_category: BTreeMap<Category, CategoryScores>,
    pub micro: Prf,
    #[serde(rename = "macro")]
    pub macro_avg: Prf,
    pub utterances: usize,
    pub dropped_hyp_tags: usize,
    pub dropped_ref_tags: usize,
}

impl EvalReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Fixed-width table: one row per category, then micro and macro averages.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{:<16}{:>10}{:>10}{:>10}", "Category", "Precision", "Recall", "F1");
        let mut row = |name: &str, p: f64, r: f64, f: f64| {
            let _ = writeln!(out, "{name:<16}{p:>10.2}{r:>10.2}{f:>10.2}");
        };
        for (category, s) in &self.per_category {
            row(category.display_name(), s.precision, s.recall, s.f1);
        }
        row("Micro average", self.micro.precision, self.micro.recall, self.micro.f1);
        row("Macro average", self.macro_avg.precision, self.macro_avg.recall, self.macro_avg.f1);
        out
    }
}

/// Scores hypotheses against references, one tagged transcript per utterance.
///
/// Both sides are parsed leniently (half-labeled tags are discarded) and
/// collapsed to per-utterance entity sets. An entity counts as correct only
/// on an exact (category, surface) match. Counts pool across utterances;
/// micro averages pool across categories, macro averages take the unweighted
/// mean of per-category precision, recall, and F1 over categories that occur
/// on either side.
pub fn evaluate_ner<R: AsRef<str>, H: AsRef<str>>(
    refs: &[R],
    hyps: &[H],
    scheme: &TagScheme,
) -> Result<EvalReport, EvalError> {
    if refs.len() != hyps.len() {
        return Err(EvalError::LengthMismatch { refs: refs.len(), hyps: hyps.len() });
    }
    let mut counts: BTreeMap<Category, (usize, usize, usize)> = Category::ALL.iter().map(|c| (*c, (0, 0, 0))).collect();
    let (mut dropped_ref_tags, mut dropped_hyp_tags) = (0, 0);
    for (r, h) in refs.iter().zip(hyps) {
        let (ref_spans, ref_drop) = parse_tagged(r.as_ref(), scheme, ParseMode::Lenient).expect("lenient parse");
        let (hyp_spans, hyp_drop) = parse_tagged(h.as_ref(), scheme, ParseMode::Lenient).expect("lenient parse");
        dropped_ref_tags += ref_drop;
        dropped_hyp_tags += hyp_drop;
        let ref_set = to_entity_set(&ref_spans);
        let hyp_set = to_entity_set(&hyp_spans);
        for (category, c) in counts.iter_mut() {
            let tp = ref_set.common(&hyp_set, *category);
            c.0 += tp;
            c.1 += hyp_set.count(*category) - tp;
            c.2 += ref_set.count(*category) - tp;
        }
    }

    let per_category: BTreeMap<Category, CategoryScores> =
        counts.iter().map(|(c, &(tp, fp, fn_))| (*c, CategoryScores::from_counts(tp, fp, fn_))).collect();
    let (tp, fp, fn_) = counts.values().fold((0, 0, 0), |a, c| (a.0 + c.0, a.1 + c.1, a.2 + c.2));
    let micro = Prf::from_counts(tp, fp, fn_);
    let active: Vec<&CategoryScores> = per_category.values().filter(|s| s.support() > 0).collect();
    let macro_avg = if active.is_empty() {
        Prf::default()
    } else {
        let n = active.len() as f64;
        Prf {
            precision: active.iter().map(|s| s.precision).sum::<f64>() / n,
            recall: active.iter().map(|s| s.recall).sum::<f64>() / n,
            f1: active.iter().map(|s| s.f1).sum::<f64>() / n,
        }
    };
    Ok(EvalReport { per_category, micro, macro_avg, utterances: refs.len(), dropped_hyp_tags, dropped_ref_tags })
}

/// Word-level edit statistics for one or more utterance pairs.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EditStats {
    pub distance: usize,
    pub ref_words: usize,
    pub hyp_words: usize,
}

impl EditStats {
    /// Distance over reference length. An empty reference divides by one,
    /// so it reports the hypothesis length.
    pub fn rate(&self) -> f64 {
        self.distance as f64 / self.ref_words.max(1) as f64
    }

    /// True when the reference was empty but the hypothesis was not.
    pub fn empty_reference(&self) -> bool {
        self.ref_words == 0 && self.hyp_words > 0
    }
}

impl std::ops::Add for EditStats {
    type Output = EditStats;

    fn add(self, o: EditStats) -> EditStats {
        EditStats {
            distance: self.distance + o.distance,
            ref_words: self.ref_words + o.ref_words,
            hyp_words: self.hyp_words + o.hyp_words,
        }
    }
}

fn wer_tokens(text: &str, scheme: &TagScheme) -> Vec<String> {
    strip_tags(text, scheme).split_whitespace().map(str::to_uppercase).collect()
}

/// Unit-cost Levenshtein distance over token slices.
pub fn edit_distance<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, x) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, y) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(x != y);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

pub fn edit_stats(reference: &str, hypothesis: &str, scheme: &TagScheme) -> EditStats {
    let r = wer_tokens(reference, scheme);
    let h = wer_tokens(hypothesis, scheme);
    EditStats { distance: edit_distance(&r, &h), ref_words: r.len(), hyp_words: h.len() }
}

/// Word error rate after stripping tags and uppercasing.
pub fn wer(reference: &str, hypothesis: &str, scheme: &TagScheme) -> f64 {
    edit_stats(reference, hypothesis, scheme).rate()
}

pub fn corpus_edit_stats<R: AsRef<str>, H: AsRef<str>>(
    refs: &[R],
    hyps: &[H],
    scheme: &TagScheme,
) -> Result<EditStats, EvalError> {
    if refs.len() != hyps.len() {
        return Err(EvalError::LengthMismatch { refs: refs.len(), hyps: hyps.len() });
    }
    Ok(refs
        .iter()
        .zip(hyps)
        .map(|(r, h)| edit_stats(r.as_ref(), h.as_ref(), scheme))
        .fold(EditStats::default(), |a, b| a + b))
}

/// Pooled edit distance over pooled reference length.
pub fn wer_corpus<R: AsRef<str>, H: AsRef<str>>(refs: &[R], hyps: &[H], scheme: &TagScheme) -> Result<f64, EvalError> {
    corpus_edit_stats(refs, hyps, scheme).map(|s| s.rate())
}
