//! Class-token language modelling for out-of-vocabulary entities.
//!
//! Entity spans of selected categories are replaced by a class literal such
//! as `<PER>` before LM training, so every name shares one in-vocabulary
//! token. At decode time a completed span is scored as its literal and may
//! earn a bonus when its surface form is a known name.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::alphabet::{strip_tags, Alphabet, Category, TagScheme};
use crate::decoder::{beam_search_with, push_context, DecodeConfig, DecodeError, Decoded, WordScore, WordScorer};
use crate::entities::{parse_tagged, scan, ParseMode};
use crate::ngram_lm::{tokenize, NGramModel, TokenId};
use crate::posteriorgram::Posteriorgram;

/// Default in-dictionary bonus, ln 2.
pub const DEFAULT_GAMMA: f64 = std::f64::consts::LN_2;

#[derive(Debug, Error)]
pub enum SemLmError {
    #[error("invalid class literal {literal:?}: {reason}")]
    InvalidLiteral { literal: String, reason: &'static str },
    #[error("category {0} selected twice")]
    DuplicateCategory(Category),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassToken {
    pub category: Category,
    pub literal: String,
}

impl ClassToken {
    pub fn default_for(category: Category) -> Self {
        ClassToken { category, literal: format!("<{}>", category.code()) }
    }
}

/// The selected categories and their literals.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassMap {
    tokens: Vec<ClassToken>,
}

impl Default for ClassMap {
    /// Person only.
    fn default() -> Self {
        ClassMap { tokens: vec![ClassToken::default_for(Category::Person)] }
    }
}

impl ClassMap {
    pub fn new(tokens: Vec<ClassToken>, scheme: &TagScheme) -> Result<Self, SemLmError> {
        let mut seen = BTreeSet::new();
        for t in &tokens {
            let bad = |reason| Err(SemLmError::InvalidLiteral { literal: t.literal.clone(), reason });
            if t.literal.is_empty() {
                return bad("empty");
            }
            if t.literal.chars().any(char::is_whitespace) {
                return bad("contains whitespace");
            }
            if t.literal.chars().any(|c| scheme.is_tag(c)) {
                return bad("contains a tag symbol");
            }
            if t.literal != t.literal.to_uppercase() {
                return bad("not uppercase");
            }
            if !seen.insert(t.category) {
                return Err(SemLmError::DuplicateCategory(t.category));
            }
        }
        if tokens.iter().map(|t| &t.literal).collect::<HashSet<_>>().len() != tokens.len() {
            return Err(SemLmError::InvalidLiteral {
                literal: tokens[0].literal.clone(),
                reason: "shared by two categories",
            });
        }
        Ok(ClassMap { tokens })
    }

    /// Default literals for the given categories.
    pub fn for_categories(categories: &[Category]) -> Result<Self, SemLmError> {
        Self::new(categories.iter().map(|c| ClassToken::default_for(*c)).collect(), &TagScheme::default())
    }

    pub fn all() -> Self {
        Self::for_categories(&Category::ALL).expect("default literals are valid")
    }

    pub fn tokens(&self) -> &[ClassToken] {
        &self.tokens
    }

    pub fn literal(&self, category: Category) -> Option<&str> {
        self.tokens.iter().find(|t| t.category == category).map(|t| t.literal.as_str())
    }

    pub fn literals(&self) -> impl Iterator<Item = &str> + '_ {
        self.tokens.iter().map(|t| t.literal.as_str())
    }

    /// Corpus words that contain a literal; a literal must not occur naturally.
    pub fn collisions<S: AsRef<str>>(&self, corpus: &[S]) -> Vec<String> {
        let mut hits = BTreeSet::new();
        for line in corpus {
            for word in tokenize(line.as_ref()) {
                if self.literals().any(|l| word.contains(l)) {
                    hits.insert(word);
                }
            }
        }
        hits.into_iter().collect()
    }
}

/// A line after class mapping.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Transformed {
    pub text: String,
    /// Complete spans of selected categories: (category, uppercased surface).
    pub replaced: Vec<(Category, String)>,
    /// Char positions of half-labeled tags, left in place.
    pub half_labeled: Vec<usize>,
}

/// Replaces every complete span of a selected category with its literal.
/// Blank spans carry no entity and are left alone.
pub fn transform_line(text: &str, scheme: &TagScheme, classes: &ClassMap) -> Transformed {
    let (spans, half_labeled) = scan(text, scheme);
    let chars: Vec<char> = text.chars().collect();
    let mut out = String::with_capacity(text.len());
    let mut replaced = Vec::new();
    let mut cursor = 0;
    for span in spans {
        let Some(literal) = classes.literal(span.category) else { continue };
        let surface: String = chars[span.open + 1..span.close].iter().collect();
        let surface = surface.split_whitespace().collect::<Vec<_>>().join(" ").to_uppercase();
        if surface.is_empty() {
            continue;
        }
        out.extend(&chars[cursor..span.open]);
        out.push_str(literal);
        cursor = span.close + 1;
        replaced.push((span.category, surface));
    }
    out.extend(&chars[cursor..]);
    Transformed { text: out, replaced, half_labeled }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CorpusTransform {
    pub lines: Vec<String>,
    /// (line index, char position) of every half-labeled tag left in place.
    pub half_labeled: Vec<(usize, usize)>,
}

pub fn transform_corpus<S: AsRef<str>>(corpus: &[S], scheme: &TagScheme, classes: &ClassMap) -> CorpusTransform {
    let mut result = CorpusTransform::default();
    for (i, line) in corpus.iter().enumerate() {
        let t = transform_line(line.as_ref(), scheme, classes);
        result.half_labeled.extend(t.half_labeled.iter().map(|&p| (i, p)));
        result.lines.push(t.text);
    }
    result
}

/// Uppercased whitespace tokens of the tag-stripped corpus, matching how
/// [`oov_stats`] tokenizes evaluation text.
pub fn vocabulary<S: AsRef<str>>(corpus: &[S], scheme: &TagScheme) -> BTreeSet<String> {
    corpus.iter().flat_map(|l| tokenize(&strip_tags(l.as_ref(), scheme))).collect()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct OovStats {
    pub total_words: usize,
    pub oov_words: usize,
    pub oov_entity_words: usize,
    pub oov_rate: f64,
    pub entity_share_of_oov: f64,
}

/// Counts tokens of the tag-stripped evaluation text missing from
/// `train_vocab`, and how many of those fall inside an entity span.
pub fn oov_stats<S: AsRef<str>>(train_vocab: &BTreeSet<String>, eval_corpus: &[S], scheme: &TagScheme) -> OovStats {
    let mut s = OovStats::default();
    for line in eval_corpus {
        let line = line.as_ref();
        let (spans, _) = parse_tagged(line, scheme, ParseMode::Lenient).expect("lenient parse");
        let stripped: Vec<char> = line.chars().filter(|c| !scheme.is_tag(*c)).collect();
        let mut i = 0;
        while i < stripped.len() {
            if stripped[i].is_whitespace() {
                i += 1;
                continue;
            }
            let start = i;
            while i < stripped.len() && !stripped[i].is_whitespace() {
                i += 1;
            }
            let token: String = stripped[start..i].iter().collect::<String>().to_uppercase();
            s.total_words += 1;
            if !train_vocab.contains(&token) {
                s.oov_words += 1;
                if spans.iter().any(|sp| sp.start_offset < i && start < sp.end_offset) {
                    s.oov_entity_words += 1;
                }
            }
        }
    }
    let ratio = |n: usize, d: usize| if d == 0 { 0.0 } else { n as f64 / d as f64 };
    s.oov_rate = ratio(s.oov_words, s.total_words);
    s.entity_share_of_oov = ratio(s.oov_entity_words, s.oov_words);
    s
}

/// Known surface forms per category, uppercased.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct NameDict(BTreeMap<Category, BTreeSet<String>>);

impl NameDict {
    pub fn contains(&self, category: Category, surface: &str) -> bool {
        self.0.get(&category).is_some_and(|s| s.contains(&surface.to_uppercase()))
    }

    pub fn insert(&mut self, category: Category, surface: &str) {
        let norm = surface.split_whitespace().collect::<Vec<_>>().join(" ").to_uppercase();
        self.0.entry(category).or_default().insert(norm);
    }

    pub fn from_json(json: &str) -> Result<Self, SemLmError> {
        let raw: BTreeMap<Category, Vec<String>> = serde_json::from_str(json)?;
        let mut dict = NameDict::default();
        for (c, names) in raw {
            for n in names {
                dict.insert(c, &n);
            }
        }
        Ok(dict)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, SemLmError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// Word scorer for a class-token LM.
///
/// Words inside an open span of a selected category are held back until the
/// span closes, then the whole span is scored as one literal token.
pub struct ClassLmScorer<'a> {
    lm: &'a NGramModel,
    floor: f64,
    scheme: TagScheme,
    classes: &'a ClassMap,
    names: &'a NameDict,
    gamma: f64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassState {
    context: Vec<TokenId>,
    /// Words of a selected span still waiting for its end symbol.
    pending: String,
}

impl<'a> ClassLmScorer<'a> {
    pub fn new(
        lm: &'a NGramModel,
        floor: f64,
        scheme: TagScheme,
        classes: &'a ClassMap,
        names: &'a NameDict,
        gamma: f64,
    ) -> Self {
        ClassLmScorer { lm, floor, scheme, classes, names, gamma }
    }

    fn opens_selected_span(&self, text: &str) -> bool {
        let mut open = None;
        for ch in text.chars() {
            if let Some(c) = self.scheme.category_of(ch) {
                open = Some(c);
            } else if ch == self.scheme.end() {
                open = None;
            }
        }
        open.is_some_and(|c| self.classes.literal(c).is_some())
    }

    fn flush(&self, context: &[TokenId], text: &str) -> (Vec<TokenId>, WordScore) {
        let t = transform_line(text, &self.scheme, self.classes);
        let mut ctx = context.to_vec();
        let mut score = WordScore::default();
        for token in t.text.split_whitespace() {
            score.lm += self.lm.score_ids(&ctx, self.lm.token_id(token), self.floor);
            score.words += 1;
            ctx = push_context(self.lm, &ctx, self.lm.context_id(token));
        }
        score.bonus = t.replaced.iter().filter(|(c, s)| self.names.contains(*c, s)).count() as f64 * self.gamma;
        (ctx, score)
    }
}

impl WordScorer for ClassLmScorer<'_> {
    type State = ClassState;

    fn start(&self) -> ClassState {
        ClassState { context: vec![self.lm.bos()], pending: String::new() }
    }

    fn word(&self, state: &ClassState, word: &str) -> (ClassState, WordScore) {
        let buffer = if state.pending.is_empty() { word.to_string() } else { format!("{} {word}", state.pending) };
        if self.opens_selected_span(&buffer) {
            return (ClassState { context: state.context.clone(), pending: buffer }, WordScore::default());
        }
        let (context, score) = self.flush(&state.context, &buffer);
        (ClassState { context, pending: String::new() }, score)
    }

    fn finish(&self, state: &ClassState) -> WordScore {
        let (context, mut score) = self.flush(&state.context, &state.pending);
        score.lm += self.lm.score_ids(&context, Some(self.lm.eos()), self.floor);
        score
    }
}

/// Prefix beam search under a class-token LM with a dictionary bonus.
pub fn decode_with_class_lm(
    pg: &Posteriorgram,
    alphabet: &Alphabet,
    config: &DecodeConfig,
    classes: &ClassMap,
    names: &NameDict,
    gamma: f64,
) -> Result<Decoded, DecodeError> {
    let lm = config.lm.ok_or_else(|| DecodeError::InvalidConfig("class-LM decoding needs a language model".into()))?;
    if !(gamma >= 0.0 && gamma.is_finite()) {
        return Err(DecodeError::InvalidConfig(format!("gamma must be finite and non-negative, got {gamma}")));
    }
    let scorer = ClassLmScorer::new(lm, config.oov_floor, *alphabet.tags(), classes, names, gamma);
    beam_search_with(pg, alphabet, &config.search_params(), &scorer)
}
