//! Connectionist temporal classification over posteriorgrams: forward-backward
//! probability and gradient, greedy decoding, and an exhaustive best-labeling
//! search for small instances.
//!
//! All recursions run in log space over the blank-augmented label
//! `b l1 b l2 b ... lL b`.

use thiserror::Error;

use crate::alphabet::Alphabet;
use crate::logmath::{log_add, NEG_INF};
use crate::posteriorgram::Posteriorgram;

/// Largest symbol count accepted by [`brute_force_best_labeling`].
pub const BRUTE_FORCE_MAX_SYMBOLS: usize = 6;
/// Largest frame count accepted by [`brute_force_best_labeling`].
pub const BRUTE_FORCE_MAX_FRAMES: usize = 8;

#[derive(Debug, Error, PartialEq)]
pub enum CtcError {
    #[error("label index {index} at position {position} is invalid")]
    InvalidLabel { position: usize, index: usize },
    #[error("label of length {label_len} cannot be aligned to {frames} frames")]
    InfeasibleLabel { label_len: usize, frames: usize },
    #[error("instance too large for exhaustive search: T={frames}, V={symbols}")]
    InstanceTooLarge { frames: usize, symbols: usize },
    #[error("posteriorgram has {actual} symbols, alphabet has {expected}")]
    ShapeMismatch { expected: usize, actual: usize },
}

/// Target label: alphabet indices with no blanks.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct LabelSequence(Vec<usize>);

impl LabelSequence {
    pub fn new(indices: Vec<usize>, alphabet: &Alphabet) -> Result<Self, CtcError> {
        check_label(&indices, alphabet.len(), alphabet.blank_index())?;
        Ok(LabelSequence(indices))
    }

    /// Encodes `text` with the alphabet (uppercasing as it does).
    pub fn from_text(text: &str, alphabet: &Alphabet) -> Result<Self, crate::alphabet::AlphabetError> {
        Ok(LabelSequence(alphabet.encode(text)?))
    }

    pub fn indices(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl From<LabelSequence> for Vec<usize> {
    fn from(l: LabelSequence) -> Self {
        l.0
    }
}

fn check_label(indices: &[usize], num_symbols: usize, blank: usize) -> Result<(), CtcError> {
    match indices.iter().enumerate().find(|(_, &i)| i >= num_symbols || i == blank) {
        Some((position, &index)) => Err(CtcError::InvalidLabel { position, index }),
        None => Ok(()),
    }
}

/// Minimum number of frames that can emit `label`: one per symbol plus one
/// blank between each adjacent repeat.
pub fn min_frames(label: &[usize]) -> usize {
    label.len() + label.windows(2).filter(|w| w[0] == w[1]).count()
}

struct Lattice {
    ext: Vec<usize>,
    /// `alpha[t][s]`, includes the emission at `t`.
    alpha: Vec<Vec<f64>>,
}

fn extended(label: &[usize], blank: usize) -> Vec<usize> {
    let mut ext = Vec::with_capacity(2 * label.len() + 1);
    ext.push(blank);
    for &l in label {
        ext.push(l);
        ext.push(blank);
    }
    ext
}

#[inline]
fn can_skip(ext: &[usize], s: usize, blank: usize) -> bool {
    s >= 2 && ext[s] != blank && ext[s] != ext[s - 2]
}

fn forward(pg: &Posteriorgram, label: &[usize], blank: usize) -> Lattice {
    let ext = extended(label, blank);
    let n = ext.len();
    let frames = pg.num_frames();
    let mut alpha = vec![vec![NEG_INF; n]; frames];
    alpha[0][0] = pg.get(0, ext[0]);
    if n > 1 {
        alpha[0][1] = pg.get(0, ext[1]);
    }
    for t in 1..frames {
        let (done, rest) = alpha.split_at_mut(t);
        let prev = &done[t - 1];
        let cur = &mut rest[0];
        // Only states reachable from the start and able to reach the end matter,
        // but a full sweep keeps the recursion simple.
        for s in 0..n {
            let mut acc = prev[s];
            if s >= 1 {
                acc = log_add(acc, prev[s - 1]);
            }
            if can_skip(&ext, s, blank) {
                acc = log_add(acc, prev[s - 2]);
            }
            cur[s] = if acc == NEG_INF { NEG_INF } else { acc + pg.get(t, ext[s]) };
        }
    }
    Lattice { ext, alpha }
}

impl Lattice {
    fn total(&self) -> f64 {
        let last = self.alpha.last().expect("at least one frame");
        let n = self.ext.len();
        let mut total = last[n - 1];
        if n >= 2 {
            total = log_add(total, last[n - 2]);
        }
        total
    }
}

/// `beta[t][s]`: log-mass of completing the path from state `s` at `t`,
/// excluding the emission at `t`.
fn backward(pg: &Posteriorgram, ext: &[usize], blank: usize) -> Vec<Vec<f64>> {
    let n = ext.len();
    let frames = pg.num_frames();
    let mut beta = vec![vec![NEG_INF; n]; frames];
    beta[frames - 1][n - 1] = 0.0;
    if n >= 2 {
        beta[frames - 1][n - 2] = 0.0;
    }
    for t in (0..frames - 1).rev() {
        let (head, tail) = beta.split_at_mut(t + 1);
        let next = &tail[0];
        let cur = &mut head[t];
        for s in 0..n {
            let mut acc = next[s] + pg.get(t + 1, ext[s]);
            if s + 1 < n {
                acc = log_add(acc, next[s + 1] + pg.get(t + 1, ext[s + 1]));
            }
            if s + 2 < n && can_skip(ext, s + 2, blank) {
                acc = log_add(acc, next[s + 2] + pg.get(t + 1, ext[s + 2]));
            }
            cur[s] = acc;
        }
    }
    beta
}

#[cfg(test)]
fn backward_total(pg: &Posteriorgram, ext: &[usize], beta: &[Vec<f64>]) -> f64 {
    let mut total = pg.get(0, ext[0]) + beta[0][0];
    if ext.len() >= 2 {
        total = log_add(total, pg.get(0, ext[1]) + beta[0][1]);
    }
    total
}

/// Log of the summed probability of every alignment that collapses to `label`.
/// Returns negative infinity when the label needs more frames than exist.
pub fn ctc_log_prob(pg: &Posteriorgram, label: &LabelSequence, blank: usize) -> Result<f64, CtcError> {
    log_prob_raw(pg, label.indices(), blank)
}

fn log_prob_raw(pg: &Posteriorgram, label: &[usize], blank: usize) -> Result<f64, CtcError> {
    check_label(label, pg.num_symbols(), blank)?;
    if blank >= pg.num_symbols() {
        return Err(CtcError::InvalidLabel { position: 0, index: blank });
    }
    if min_frames(label) > pg.num_frames() {
        return Ok(NEG_INF);
    }
    Ok(forward(pg, label, blank).total())
}

/// Negative log-likelihood and its gradient with respect to every
/// log-probability entry of the posteriorgram (row-major, T×V).
pub fn ctc_loss_and_grad(pg: &Posteriorgram, label: &LabelSequence, blank: usize) -> Result<(f64, Vec<f64>), CtcError> {
    let label = label.indices();
    check_label(label, pg.num_symbols(), blank)?;
    let infeasible = CtcError::InfeasibleLabel { label_len: label.len(), frames: pg.num_frames() };
    if min_frames(label) > pg.num_frames() {
        return Err(infeasible);
    }
    let lattice = forward(pg, label, blank);
    let log_p = lattice.total();
    if log_p == NEG_INF {
        return Err(infeasible);
    }
    let beta = backward(pg, &lattice.ext, blank);
    let v = pg.num_symbols();
    let mut grad = vec![0.0; pg.num_frames() * v];
    for (t, (a_row, b_row)) in lattice.alpha.iter().zip(&beta).enumerate() {
        let g_row = &mut grad[t * v..(t + 1) * v];
        for (s, &sym) in lattice.ext.iter().enumerate() {
            let occupancy = a_row[s] + b_row[s] - log_p;
            if occupancy > NEG_INF {
                g_row[sym] -= occupancy.exp();
            }
        }
    }
    Ok((-log_p, grad))
}

/// Per-frame argmax (lowest index on ties), repeats collapsed, blanks removed.
pub fn greedy_labels(pg: &Posteriorgram, blank: usize) -> Vec<usize> {
    let mut out = Vec::new();
    let mut last = None;
    for row in pg.rows() {
        let mut best = 0;
        for (i, &v) in row.iter().enumerate().skip(1) {
            if v > row[best] {
                best = i;
            }
        }
        if Some(best) != last && best != blank {
            out.push(best);
        }
        last = Some(best);
    }
    out
}

pub fn greedy_decode(pg: &Posteriorgram, alphabet: &Alphabet) -> Result<String, CtcError> {
    check_shape(pg, alphabet)?;
    let labels = greedy_labels(pg, alphabet.blank_index());
    Ok(alphabet.decode(&labels).expect("greedy labels exclude the blank"))
}

pub(crate) fn check_shape(pg: &Posteriorgram, alphabet: &Alphabet) -> Result<(), CtcError> {
    if pg.num_symbols() != alphabet.len() {
        return Err(CtcError::ShapeMismatch { expected: alphabet.len(), actual: pg.num_symbols() });
    }
    Ok(())
}

/// Visits every label sequence of length `<= max_len` over the non-blank
/// symbols in lexicographic index order (a prefix precedes its extensions).
fn for_each_labeling(num_symbols: usize, blank: usize, max_len: usize, f: &mut impl FnMut(&[usize])) {
    fn walk(buf: &mut Vec<usize>, num_symbols: usize, blank: usize, max_len: usize, f: &mut impl FnMut(&[usize])) {
        f(buf);
        if buf.len() == max_len {
            return;
        }
        for s in (0..num_symbols).filter(|&s| s != blank) {
            buf.push(s);
            walk(buf, num_symbols, blank, max_len, f);
            buf.pop();
        }
    }
    walk(&mut Vec::with_capacity(max_len), num_symbols, blank, max_len, f);
}

/// Exhaustive argmax of [`ctc_log_prob`] over all labelings no longer than
/// `min(max_len, T)`. Ties resolve to the lexicographically smallest labeling.
pub fn brute_force_best_labeling(
    pg: &Posteriorgram,
    alphabet: &Alphabet,
    max_len: usize,
) -> Result<(String, f64), CtcError> {
    check_shape(pg, alphabet)?;
    if pg.num_symbols() > BRUTE_FORCE_MAX_SYMBOLS || pg.num_frames() > BRUTE_FORCE_MAX_FRAMES {
        return Err(CtcError::InstanceTooLarge { frames: pg.num_frames(), symbols: pg.num_symbols() });
    }
    let blank = alphabet.blank_index();
    let mut best: (Vec<usize>, f64) = (Vec::new(), NEG_INF);
    let mut first = true;
    for_each_labeling(pg.num_symbols(), blank, max_len.min(pg.num_frames()), &mut |label| {
        let lp = log_prob_raw(pg, label, blank).expect("enumerated labels are valid");
        if first || lp > best.1 {
            best = (label.to_vec(), lp);
            first = false;
        }
    });
    let text = alphabet.decode(&best.0).expect("enumerated labels exclude the blank");
    Ok((text, best.1))
}

/// Sum of probabilities of every labeling that fits in the posteriorgram.
/// Equals one for any normalized input; exposed for verification.
pub fn total_labeling_mass(pg: &Posteriorgram, blank: usize) -> Result<f64, CtcError> {
    if pg.num_symbols() > BRUTE_FORCE_MAX_SYMBOLS || pg.num_frames() > BRUTE_FORCE_MAX_FRAMES {
        return Err(CtcError::InstanceTooLarge { frames: pg.num_frames(), symbols: pg.num_symbols() });
    }
    let mut sum = 0.0;
    for_each_labeling(pg.num_symbols(), blank, pg.num_frames(), &mut |label| {
        sum += log_prob_raw(pg, label, blank).expect("enumerated labels are valid").exp();
    });
    Ok(sum)
}
