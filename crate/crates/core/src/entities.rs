//! Entity spans in tag-symbol transcripts.
//!
//! Lenient parsing discards half-labeled tags: a start symbol with no end
//! (including a start followed by another start) and an end with no start.
//! Duplicate entities within one utterance collapse in [`EntitySet`].

use std::collections::BTreeSet;

use thiserror::Error;

use crate::alphabet::{Category, TagScheme};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EntityError {
    #[error("half-labeled entity tag at position {0}")]
    HalfLabeled(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParseMode {
    Strict,
    Lenient,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EntitySpan {
    pub category: Category,
    /// Text between the start and end symbols, trimmed.
    pub surface: String,
    /// Char offsets of `surface` within the tag-stripped text.
    pub start_offset: usize,
    pub end_offset: usize,
}

/// A complete span as found in the raw text.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct RawSpan {
    pub category: Category,
    /// Char index of the start symbol.
    pub open: usize,
    /// Char index of the end symbol.
    pub close: usize,
}

/// Complete spans plus the char positions of every half-labeled tag.
pub(crate) fn scan(text: &str, scheme: &TagScheme) -> (Vec<RawSpan>, Vec<usize>) {
    let mut spans = Vec::new();
    let mut dropped = Vec::new();
    let mut open: Option<(Category, usize)> = None;
    for (i, ch) in text.chars().enumerate() {
        if let Some(category) = scheme.category_of(ch) {
            if let Some((_, pos)) = open.replace((category, i)) {
                dropped.push(pos);
            }
        } else if ch == scheme.end() {
            match open.take() {
                Some((category, pos)) => spans.push(RawSpan { category, open: pos, close: i }),
                None => dropped.push(i),
            }
        }
    }
    if let Some((_, pos)) = open {
        dropped.push(pos);
    }
    dropped.sort_unstable();
    (spans, dropped)
}

/// Extracts entity spans. Returns the spans and the number of discarded tags.
///
/// Spans whose content is blank are discarded and counted too.
pub fn parse_tagged(text: &str, scheme: &TagScheme, mode: ParseMode) -> Result<(Vec<EntitySpan>, usize), EntityError> {
    let (raw, half) = scan(text, scheme);
    if mode == ParseMode::Strict {
        if let Some(&pos) = half.first() {
            return Err(EntityError::HalfLabeled(pos));
        }
    }
    let chars: Vec<char> = text.chars().collect();
    // stripped_at[i] = offset in the stripped text of raw char i
    let mut stripped_at = Vec::with_capacity(chars.len() + 1);
    let mut n = 0;
    for &c in &chars {
        stripped_at.push(n);
        if !scheme.is_tag(c) {
            n += 1;
        }
    }
    stripped_at.push(n);

    let mut dropped = half.len();
    let mut spans = Vec::with_capacity(raw.len());
    for r in raw {
        let inner = &chars[r.open + 1..r.close];
        let lead = inner.iter().take_while(|c| c.is_whitespace()).count();
        let trail = inner.iter().rev().take_while(|c| c.is_whitespace()).count();
        if lead == inner.len() {
            dropped += 1;
            continue;
        }
        let surface: String = inner[lead..inner.len() - trail].iter().collect();
        let start_offset = stripped_at[r.open + 1 + lead];
        spans.push(EntitySpan {
            category: r.category,
            start_offset,
            end_offset: start_offset + surface.chars().count(),
            surface,
        });
    }
    Ok((spans, dropped))
}

/// Distinct (category, uppercased surface) pairs of one utterance.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EntitySet {
    entries: BTreeSet<(Category, String)>,
}

impl EntitySet {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn contains(&self, category: Category, surface: &str) -> bool {
        self.entries.contains(&(category, surface.to_uppercase()))
    }

    pub fn iter(&self) -> impl Iterator<Item = (Category, &str)> + '_ {
        self.entries.iter().map(|(c, s)| (*c, s.as_str()))
    }

    pub fn count(&self, category: Category) -> usize {
        self.entries.iter().filter(|(c, _)| *c == category).count()
    }

    /// Entries of `category` present in both sets.
    pub fn common(&self, other: &EntitySet, category: Category) -> usize {
        self.entries.iter().filter(|e| e.0 == category && other.entries.contains(*e)).count()
    }
}

impl FromIterator<(Category, String)> for EntitySet {
    fn from_iter<I: IntoIterator<Item = (Category, String)>>(iter: I) -> Self {
        EntitySet { entries: iter.into_iter().map(|(c, s)| (c, s.to_uppercase())).collect() }
    }
}

pub fn to_entity_set(spans: &[EntitySpan]) -> EntitySet {
    spans.iter().map(|s| (s.category, s.surface.clone())).collect()
}
