//! CTC prefix beam search with n-gram shallow fusion.
//!
//! A hypothesis is ranked by
//!
//! `Q(y) = log p_ctc(y) + alpha * lm(y) + beta * words(y) + bonus(y)`
//!
//! where `p_ctc` sums over all alignments of the prefix (tracked separately
//! for alignments ending in blank and in the last symbol), `lm` and `words`
//! cover completed words, and `bonus` is an extra additive term a
//! [`WordScorer`] may award. A word completes when a space is emitted and, for
//! the trailing word, at the end of the utterance.
//!
//! Prefixes live in an arena-backed trie so a hypothesis is a node id and
//! merging equal prefixes is an id comparison.

use std::cmp::Ordering;

use rayon::prelude::*;
use thiserror::Error;

use crate::alphabet::Alphabet;
use crate::ctc::{check_shape, CtcError};
use crate::logmath::{log_add, NEG_INF};
use crate::ngram_lm::{NGramModel, TokenId, DEFAULT_OOV_FLOOR};
use crate::posteriorgram::Posteriorgram;

pub const DEFAULT_ALPHA: f64 = 1.96;
pub const DEFAULT_BETA: f64 = 6.0;
pub const DEFAULT_BEAM_WIDTH: usize = 1024;

#[derive(Debug, Error, PartialEq)]
pub enum DecodeError {
    #[error(transparent)]
    Shape(#[from] CtcError),
    #[error("invalid decoder configuration: {0}")]
    InvalidConfig(String),
    #[error("utterance {index}: {source}")]
    Item {
        index: usize,
        #[source]
        source: Box<DecodeError>,
    },
}

#[derive(Debug, Clone, Copy)]
pub struct DecodeConfig<'a> {
    /// LM weight.
    pub alpha: f64,
    /// Per-word bonus.
    pub beta: f64,
    pub beam_width: usize,
    pub lm: Option<&'a NGramModel>,
    /// Score for words the LM cannot score at all.
    pub oov_floor: f64,
}

impl Default for DecodeConfig<'_> {
    fn default() -> Self {
        DecodeConfig {
            alpha: DEFAULT_ALPHA,
            beta: DEFAULT_BETA,
            beam_width: DEFAULT_BEAM_WIDTH,
            lm: None,
            oov_floor: DEFAULT_OOV_FLOOR,
        }
    }
}

impl<'a> DecodeConfig<'a> {
    pub fn with_lm(mut self, lm: &'a NGramModel) -> Self {
        self.lm = Some(lm);
        self
    }

    pub fn search_params(&self) -> SearchParams {
        SearchParams { alpha: self.alpha, beta: self.beta, beam_width: self.beam_width }
    }
}

/// The weights and beam size shared by every scorer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchParams {
    pub alpha: f64,
    pub beta: f64,
    pub beam_width: usize,
}

impl SearchParams {
    fn validate(&self) -> Result<(), DecodeError> {
        if self.beam_width == 0 {
            return Err(DecodeError::InvalidConfig("beam width must be at least 1".into()));
        }
        if !self.alpha.is_finite() || !self.beta.is_finite() {
            return Err(DecodeError::InvalidConfig("alpha and beta must be finite".into()));
        }
        Ok(())
    }

    #[inline]
    fn rank(&self, acoustic: f64, lm: f64, words: u32, bonus: f64) -> f64 {
        // 0 * -inf would be NaN; alpha = 0 must ignore the LM completely.
        let lm_term = if self.alpha == 0.0 { 0.0 } else { self.alpha * lm };
        acoustic + lm_term + self.beta * words as f64 + bonus
    }
}

/// Contribution of one or more completed words.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct WordScore {
    pub lm: f64,
    pub words: u32,
    pub bonus: f64,
}

impl WordScore {
    fn add(self, other: WordScore) -> WordScore {
        WordScore { lm: self.lm + other.lm, words: self.words + other.words, bonus: self.bonus + other.bonus }
    }
}

/// Hook that turns completed words into LM score, word count, and bonus.
pub trait WordScorer: Sync {
    type State: Clone;

    fn start(&self) -> Self::State;

    /// Called once per completed non-empty word.
    fn word(&self, state: &Self::State, word: &str) -> (Self::State, WordScore);

    /// Called at the end of the utterance, after the trailing word.
    fn finish(&self, state: &Self::State) -> WordScore;
}

/// Plain n-gram scoring; with no model every word scores zero but still counts.
pub struct NGramScorer<'a> {
    lm: Option<&'a NGramModel>,
    floor: f64,
}

impl<'a> NGramScorer<'a> {
    pub fn new(lm: Option<&'a NGramModel>, floor: f64) -> Self {
        NGramScorer { lm, floor }
    }
}

impl WordScorer for NGramScorer<'_> {
    type State = Vec<TokenId>;

    fn start(&self) -> Self::State {
        self.lm.map(|lm| vec![lm.bos()]).unwrap_or_default()
    }

    fn word(&self, state: &Self::State, word: &str) -> (Self::State, WordScore) {
        let Some(lm) = self.lm else {
            return (Vec::new(), WordScore { lm: 0.0, words: 1, bonus: 0.0 });
        };
        let lp = lm.score_ids(state, lm.token_id(word), self.floor);
        (push_context(lm, state, lm.context_id(word)), WordScore { lm: lp, words: 1, bonus: 0.0 })
    }

    fn finish(&self, state: &Self::State) -> WordScore {
        match self.lm {
            Some(lm) => WordScore { lm: lm.score_ids(state, Some(lm.eos()), self.floor), words: 0, bonus: 0.0 },
            None => WordScore::default(),
        }
    }
}

/// Appends `id` to an LM context, keeping only what the model's order can use.
pub fn push_context(lm: &NGramModel, state: &[TokenId], id: TokenId) -> Vec<TokenId> {
    let keep = lm.order().saturating_sub(1);
    let mut next = Vec::with_capacity(keep);
    let skip = (state.len() + 1).saturating_sub(keep);
    next.extend(state.iter().copied().chain(std::iter::once(id)).skip(skip));
    next
}

#[derive(Debug, Clone, PartialEq)]
pub struct Decoded {
    pub text: String,
    /// Final Q-score.
    pub score: f64,
    /// CTC log-probability of `text` as accumulated by the beam.
    pub acoustic: f64,
    pub lm: f64,
    pub words: u32,
    pub bonus: f64,
}

const ROOT: u32 = 0;
const NONE: u32 = u32::MAX;

struct Node {
    parent: u32,
    symbol: u32,
    depth: u32,
    /// Index into the scorer-state arena; shared until a word completes.
    state: u32,
    lm: f64,
    words: u32,
    bonus: f64,
    /// Characters since the last space.
    partial_len: u32,
    children: Vec<(u32, u32)>,
}

struct Trie<S> {
    nodes: Vec<Node>,
    states: Vec<S>,
    /// Memoized result of completing each node's partial word with a space.
    completions: Vec<Option<(S, WordScore)>>,
}

impl<S: Clone> Trie<S> {
    fn new(state: S) -> Self {
        Trie {
            nodes: vec![Node {
                parent: NONE,
                symbol: NONE,
                depth: 0,
                state: 0,
                lm: 0.0,
                words: 0,
                bonus: 0.0,
                partial_len: 0,
                children: Vec::new(),
            }],
            states: vec![state],
            completions: vec![None],
        }
    }

    fn labels(&self, mut node: u32) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.nodes[node as usize].depth as usize);
        while node != ROOT {
            let n = &self.nodes[node as usize];
            out.push(n.symbol as usize);
            node = n.parent;
        }
        out.reverse();
        out
    }

    fn pos_depth(&self, p: Pos) -> u32 {
        match p {
            Pos::Node(n) => self.nodes[n as usize].depth,
            Pos::Virtual(parent, _) => self.nodes[parent as usize].depth + 1,
        }
    }

    fn pos_up(&self, p: Pos) -> (Pos, u32) {
        match p {
            Pos::Node(n) => {
                let node = &self.nodes[n as usize];
                (Pos::Node(node.parent), node.symbol)
            }
            Pos::Virtual(parent, symbol) => (Pos::Node(parent), symbol),
        }
    }

    /// Lexicographic order of the label sequences of two prefixes, without
    /// materializing either.
    fn cmp_labels(&self, mut a: Pos, mut b: Pos) -> Ordering {
        let (da, db) = (self.pos_depth(a), self.pos_depth(b));
        for _ in db..da {
            a = self.pos_up(a).0;
        }
        for _ in da..db {
            b = self.pos_up(b).0;
        }
        if a == b {
            // one is a prefix of the other
            return da.cmp(&db);
        }
        loop {
            let ((pa, sa), (pb, sb)) = (self.pos_up(a), self.pos_up(b));
            if pa == pb {
                return sa.cmp(&sb);
            }
            (a, b) = (pa, pb);
        }
    }

    fn partial(&self, mut node: u32, chars: &[char]) -> String {
        let len = self.nodes[node as usize].partial_len as usize;
        let mut out = Vec::with_capacity(len);
        for _ in 0..len {
            let n = &self.nodes[node as usize];
            out.push(chars[n.symbol as usize]);
            node = n.parent;
        }
        out.iter().rev().collect()
    }

    fn completion<W: WordScorer<State = S>>(&mut self, node: u32, chars: &[char], scorer: &W) -> WordScore {
        let i = node as usize;
        if self.completions[i].is_none() {
            let word = self.partial(node, chars);
            self.completions[i] = Some(scorer.word(&self.states[self.nodes[i].state as usize], &word));
        }
        self.completions[i].as_ref().expect("just filled").1
    }
}

/// A prefix proposed this frame that may not exist in the trie yet.
struct Extension {
    parent: u32,
    symbol: u32,
    p_nonblank: f64,
    /// Set when the symbol is a space that completed a word.
    completed: Option<WordScore>,
}

/// A trie node, or a child of one that has not been created yet.
#[derive(Clone, Copy, PartialEq, Eq)]
enum Pos {
    Node(u32),
    Virtual(u32, u32),
}

#[derive(Clone, Copy)]
enum Cand {
    Existing(u32),
    New(usize),
}

struct Ranked {
    score: f64,
    cand: Cand,
}

#[derive(Clone, Copy)]
struct Hyp {
    node: u32,
    p_blank: f64,
    p_nonblank: f64,
}

impl Hyp {
    fn total(&self) -> f64 {
        log_add(self.p_blank, self.p_nonblank)
    }
}

/// Prefix beam search with a custom word scorer.
pub fn beam_search_with<W: WordScorer>(
    pg: &Posteriorgram,
    alphabet: &Alphabet,
    params: &SearchParams,
    scorer: &W,
) -> Result<Decoded, DecodeError> {
    params.validate()?;
    check_shape(pg, alphabet)?;
    let v = pg.num_symbols();
    let blank = alphabet.blank_index();
    let space = alphabet.space_index();
    let chars: Vec<char> = (0..v).map(|i| alphabet.char_at(i).unwrap_or('\0')).collect();

    let mut trie = Trie::new(scorer.start());
    let mut beam = vec![Hyp { node: ROOT, p_blank: 0.0, p_nonblank: NEG_INF }];

    // Dense accumulators for prefixes already in the trie.
    let mut acc_blank: Vec<f64> = Vec::new();
    let mut acc_nonblank: Vec<f64> = Vec::new();
    let mut is_touched: Vec<bool> = Vec::new();
    let mut touched: Vec<u32> = Vec::new();
    let mut child_of = vec![NONE; v];
    let mut extensions: Vec<Extension> = Vec::new();
    let mut ranked: Vec<Ranked> = Vec::new();

    for t in 0..pg.num_frames() {
        let frame = pg.frame(t);
        acc_blank.resize(trie.nodes.len(), NEG_INF);
        acc_nonblank.resize(trie.nodes.len(), NEG_INF);
        is_touched.resize(trie.nodes.len(), false);
        extensions.clear();

        let mut touch = |node: u32, blank_mass: f64, nonblank_mass: f64, touched: &mut Vec<u32>| {
            let i = node as usize;
            if !is_touched[i] {
                is_touched[i] = true;
                touched.push(node);
            }
            acc_blank[i] = log_add(acc_blank[i], blank_mass);
            acc_nonblank[i] = log_add(acc_nonblank[i], nonblank_mass);
        };

        for hyp in &beam {
            let total = hyp.total();
            let node = &trie.nodes[hyp.node as usize];
            let last = node.symbol;
            let completes_word = node.partial_len > 0;

            touch(hyp.node, total + frame[blank], NEG_INF, &mut touched);
            if last != NONE && frame[last as usize] > NEG_INF {
                touch(hyp.node, NEG_INF, hyp.p_nonblank + frame[last as usize], &mut touched);
            }

            for &(sym, child) in &node.children {
                child_of[sym as usize] = child;
            }
            let mut space_ext = None;
            for (sym, &y) in frame.iter().enumerate() {
                if sym == blank || y == NEG_INF {
                    continue;
                }
                let mass = if sym as u32 == last { hyp.p_blank + y } else { total + y };
                if mass == NEG_INF {
                    continue;
                }
                match child_of[sym] {
                    NONE => {
                        if completes_word && Some(sym) == space {
                            space_ext = Some(extensions.len());
                        }
                        extensions.push(Extension {
                            parent: hyp.node,
                            symbol: sym as u32,
                            p_nonblank: mass,
                            completed: None,
                        });
                    }
                    child => touch(child, NEG_INF, mass, &mut touched),
                }
            }
            for &(sym, _) in &node.children {
                child_of[sym as usize] = NONE;
            }
            if let Some(k) = space_ext {
                extensions[k].completed = Some(trie.completion(hyp.node, &chars, scorer));
            }
        }

        ranked.clear();
        for &node in &touched {
            let i = node as usize;
            let n = &trie.nodes[i];
            let acoustic = log_add(acc_blank[i], acc_nonblank[i]);
            if acoustic > NEG_INF {
                ranked
                    .push(Ranked { score: params.rank(acoustic, n.lm, n.words, n.bonus), cand: Cand::Existing(node) });
            }
        }
        for (k, ext) in extensions.iter().enumerate() {
            let parent = &trie.nodes[ext.parent as usize];
            let extra = ext.completed.unwrap_or_default();
            let score = params.rank(
                ext.p_nonblank,
                parent.lm + extra.lm,
                parent.words + extra.words,
                parent.bonus + extra.bonus,
            );
            ranked.push(Ranked { score, cand: Cand::New(k) });
        }

        let pos = |c: Cand| match c {
            Cand::Existing(n) => Pos::Node(n),
            Cand::New(k) => Pos::Virtual(extensions[k].parent, extensions[k].symbol),
        };
        let order = |a: &Ranked, b: &Ranked| {
            b.score.total_cmp(&a.score).then_with(|| trie.cmp_labels(pos(a.cand), pos(b.cand)))
        };
        if ranked.len() > params.beam_width {
            ranked.select_nth_unstable_by(params.beam_width - 1, order);
            ranked.truncate(params.beam_width);
        }

        let mut next = Vec::with_capacity(ranked.len());
        for r in &ranked {
            match r.cand {
                Cand::Existing(node) => {
                    let i = node as usize;
                    next.push(Hyp { node, p_blank: acc_blank[i], p_nonblank: acc_nonblank[i] });
                }
                Cand::New(k) => {
                    let ext = &extensions[k];
                    let id = trie.nodes.len() as u32;
                    let parent = &trie.nodes[ext.parent as usize];
                    let mut node = Node {
                        parent: ext.parent,
                        symbol: ext.symbol,
                        depth: parent.depth + 1,
                        state: parent.state,
                        lm: parent.lm,
                        words: parent.words,
                        bonus: parent.bonus,
                        partial_len: parent.partial_len + 1,
                        children: Vec::new(),
                    };
                    if Some(ext.symbol as usize) == space {
                        node.partial_len = 0;
                        if let Some(s) = ext.completed {
                            let (state, _) =
                                trie.completions[ext.parent as usize].clone().expect("completion memoized");
                            node.state = trie.states.len() as u32;
                            trie.states.push(state);
                            node.lm += s.lm;
                            node.words += s.words;
                            node.bonus += s.bonus;
                        }
                    }
                    trie.nodes[ext.parent as usize].children.push((ext.symbol, id));
                    trie.nodes.push(node);
                    trie.completions.push(None);
                    next.push(Hyp { node: id, p_blank: NEG_INF, p_nonblank: ext.p_nonblank });
                }
            }
        }
        for &node in &touched {
            acc_blank[node as usize] = NEG_INF;
            acc_nonblank[node as usize] = NEG_INF;
            is_touched[node as usize] = false;
        }
        touched.clear();
        beam = next;
    }

    let mut best: Option<(Decoded, Vec<usize>)> = None;
    for hyp in &beam {
        let node = &trie.nodes[hyp.node as usize];
        let mut extra = WordScore::default();
        let mut state = trie.states[node.state as usize].clone();
        if node.partial_len > 0 {
            let (s, w) = scorer.word(&state, &trie.partial(hyp.node, &chars));
            state = s;
            extra = extra.add(w);
        }
        extra = extra.add(scorer.finish(&state));
        let acoustic = hyp.total();
        let lm = node.lm + extra.lm;
        let words = node.words + extra.words;
        let bonus = node.bonus + extra.bonus;
        let score = params.rank(acoustic, lm, words, bonus);
        let labels = trie.labels(hyp.node);
        let better = match &best {
            None => true,
            Some((b, bl)) => match score.total_cmp(&b.score) {
                Ordering::Greater => true,
                Ordering::Equal => labels < *bl,
                Ordering::Less => false,
            },
        };
        if better {
            let text = alphabet.decode(&labels).expect("beam labels exclude the blank");
            best = Some((Decoded { text, score, acoustic, lm, words, bonus }, labels));
        }
    }
    Ok(best.expect("beam is never empty").0)
}

/// Decodes one posteriorgram with the configured LM (if any).
pub fn prefix_beam_search(
    pg: &Posteriorgram,
    alphabet: &Alphabet,
    config: &DecodeConfig,
) -> Result<Decoded, DecodeError> {
    let scorer = NGramScorer::new(config.lm, config.oov_floor);
    beam_search_with(pg, alphabet, &config.search_params(), &scorer)
}

/// Decodes every posteriorgram in parallel; output order follows input order.
pub fn decode_batch(
    pgs: &[Posteriorgram],
    alphabet: &Alphabet,
    config: &DecodeConfig,
) -> Result<Vec<Decoded>, DecodeError> {
    pgs.par_iter()
        .enumerate()
        .map(|(index, pg)| {
            prefix_beam_search(pg, alphabet, config).map_err(|e| DecodeError::Item { index, source: Box::new(e) })
        })
        .collect()
}
