//! Tagged character alphabet and the conversions between bracket-annotated
//! text (`[PER Bob] ran`) and inline tag-symbol text (`|Bob] ran`).

use std::collections::HashMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use fnv::FnvHasher;
use serde::{Deserialize, Serialize};
use std::hash::Hasher;
use thiserror::Error;

/// Reserved literal used for the CTC blank in alphabet files.
pub const BLANK_LITERAL: &str = "<blank>";

#[derive(Debug, Error)]
pub enum AlphabetError {
    #[error("unknown symbol {ch:?} at position {position}")]
    UnknownSymbol { position: usize, ch: char },
    #[error("index {0} is out of range")]
    IndexOutOfRange(usize),
    #[error("blank index found in text at position {0}")]
    BlankInText(usize),
    #[error("malformed bracket annotation at position {position}: {reason}")]
    MalformedBracket { position: usize, reason: &'static str },
    #[error("nested entity span at position {0}")]
    NestedSpan(usize),
    #[error("half-labeled entity tag at position {0}")]
    HalfLabeled(usize),
    #[error("invalid alphabet: {0}")]
    Invalid(String),
    #[error("alphabet json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("alphabet io: {0}")]
    Io(#[from] std::io::Error),
}

/// Entity categories carried by the tag scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Category {
    #[serde(rename = "PER")]
    Person,
    #[serde(rename = "LOC")]
    Location,
    #[serde(rename = "ORG")]
    Organization,
}

impl Category {
    pub const ALL: [Category; 3] = [Category::Person, Category::Location, Category::Organization];

    /// Three-letter code used in bracket annotation.
    pub fn code(self) -> &'static str {
        match self {
            Category::Person => "PER",
            Category::Location => "LOC",
            Category::Organization => "ORG",
        }
    }

    pub fn display_name(self) -> &'static str {
        match self {
            Category::Person => "Person",
            Category::Location => "Location",
            Category::Organization => "Organization",
        }
    }

    fn slot(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for Category {
    type Err = AlphabetError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "PER" => Ok(Category::Person),
            "LOC" => Ok(Category::Location),
            "ORG" => Ok(Category::Organization),
            _ => Err(AlphabetError::Invalid(format!("unknown category {s:?}"))),
        }
    }
}

/// Start symbol per category plus one shared end symbol.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TagScheme {
    starts: [char; 3],
    end: char,
}

impl Default for TagScheme {
    fn default() -> Self {
        TagScheme { starts: ['|', '$', '{'], end: ']' }
    }
}

impl TagScheme {
    pub fn new(per: char, loc: char, org: char, end: char) -> Result<Self, AlphabetError> {
        let all = [per, loc, org, end];
        for i in 0..all.len() {
            if all[i].is_whitespace() || all[i] == '[' {
                return Err(AlphabetError::Invalid(format!("{:?} cannot be a tag symbol", all[i])));
            }
            if all[..i].contains(&all[i]) {
                return Err(AlphabetError::Invalid(format!("tag symbol {:?} used twice", all[i])));
            }
        }
        Ok(TagScheme { starts: [per, loc, org], end })
    }

    pub fn start(&self, category: Category) -> char {
        self.starts[category.slot()]
    }

    pub fn end(&self) -> char {
        self.end
    }

    /// The category whose start symbol is `ch`, if any.
    pub fn category_of(&self, ch: char) -> Option<Category> {
        Category::ALL.into_iter().find(|c| self.start(*c) == ch)
    }

    pub fn is_tag(&self, ch: char) -> bool {
        ch == self.end || self.starts.contains(&ch)
    }

    /// Start symbols followed by the end symbol.
    pub fn symbols(&self) -> [char; 4] {
        [self.starts[0], self.starts[1], self.starts[2], self.end]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Symbol {
    Blank,
    Char(char),
}

/// Bijective symbol table over text characters, tag symbols, and the CTC blank.
#[derive(Debug, Clone)]
pub struct Alphabet {
    symbols: Vec<Symbol>,
    blank_index: usize,
    tags: TagScheme,
    lookup: HashMap<char, usize>,
}

impl Default for Alphabet {
    /// blank, `A`-`Z`, space, then the four default tag symbols: 32 entries.
    fn default() -> Self {
        let tags = TagScheme::default();
        let chars = ('A'..='Z').chain([' ']).chain(tags.symbols());
        Alphabet::from_chars(chars, tags).expect("default alphabet is valid")
    }
}

impl Alphabet {
    /// Blank at index 0 followed by `chars` in order.
    pub fn from_chars(chars: impl IntoIterator<Item = char>, tags: TagScheme) -> Result<Self, AlphabetError> {
        let symbols = std::iter::once(Symbol::Blank).chain(chars.into_iter().map(Symbol::Char)).collect();
        Alphabet::new(symbols, tags)
    }

    pub fn new(symbols: Vec<Symbol>, tags: TagScheme) -> Result<Self, AlphabetError> {
        let mut blank_index = None;
        let mut lookup = HashMap::with_capacity(symbols.len());
        for (i, s) in symbols.iter().enumerate() {
            match *s {
                Symbol::Blank => {
                    if blank_index.replace(i).is_some() {
                        return Err(AlphabetError::Invalid("more than one blank".into()));
                    }
                }
                Symbol::Char(c) => {
                    if c.is_lowercase() {
                        return Err(AlphabetError::Invalid(format!("lowercase symbol {c:?}")));
                    }
                    if lookup.insert(c, i).is_some() {
                        return Err(AlphabetError::Invalid(format!("duplicate symbol {c:?}")));
                    }
                }
            }
        }
        let blank_index = blank_index.ok_or_else(|| AlphabetError::Invalid("no blank symbol".into()))?;
        Ok(Alphabet { symbols, blank_index, tags, lookup })
    }

    /// The default alphabet with `extra` characters appended after the tag symbols.
    pub fn default_with_extra(extra: impl IntoIterator<Item = char>) -> Result<Self, AlphabetError> {
        let base = Alphabet::default();
        let mut symbols = base.symbols;
        symbols.extend(extra.into_iter().map(Symbol::Char));
        Alphabet::new(symbols, base.tags)
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn blank_index(&self) -> usize {
        self.blank_index
    }

    pub fn tags(&self) -> &TagScheme {
        &self.tags
    }

    pub fn symbol(&self, index: usize) -> Option<Symbol> {
        self.symbols.get(index).copied()
    }

    pub fn index_of(&self, ch: char) -> Option<usize> {
        self.lookup.get(&ch).copied()
    }

    /// Index of the word separator, if the alphabet has one.
    pub fn space_index(&self) -> Option<usize> {
        self.index_of(' ')
    }

    /// Character for a non-blank index.
    pub fn char_at(&self, index: usize) -> Option<char> {
        match self.symbols.get(index) {
            Some(Symbol::Char(c)) => Some(*c),
            _ => None,
        }
    }

    /// Uppercases `text` and maps each character to its index.
    pub fn encode(&self, text: &str) -> Result<Vec<usize>, AlphabetError> {
        let mut out = Vec::with_capacity(text.len());
        for (position, ch) in text.chars().enumerate() {
            for up in ch.to_uppercase() {
                let idx = self.index_of(up).ok_or(AlphabetError::UnknownSymbol { position, ch })?;
                out.push(idx);
            }
        }
        Ok(out)
    }

    pub fn decode(&self, indices: &[usize]) -> Result<String, AlphabetError> {
        indices
            .iter()
            .enumerate()
            .map(|(pos, &i)| match self.symbols.get(i) {
                Some(Symbol::Char(c)) => Ok(*c),
                Some(Symbol::Blank) => Err(AlphabetError::BlankInText(pos)),
                None => Err(AlphabetError::IndexOutOfRange(i)),
            })
            .collect()
    }

    fn to_file(&self) -> AlphabetFile {
        let symbols = self
            .symbols
            .iter()
            .map(|s| match s {
                Symbol::Blank => BLANK_LITERAL.to_string(),
                Symbol::Char(c) => c.to_string(),
            })
            .collect();
        AlphabetFile {
            symbols,
            blank_index: self.blank_index,
            tags: TagsFile {
                per: self.tags.start(Category::Person).to_string(),
                loc: self.tags.start(Category::Location).to_string(),
                org: self.tags.start(Category::Organization).to_string(),
                end: self.tags.end().to_string(),
            },
        }
    }

    /// Canonical compact JSON form. The posteriorgram checksum is taken over these bytes.
    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.to_file()).expect("alphabet serializes")
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(&self.to_file()).expect("alphabet serializes")
    }

    pub fn from_json(json: &str) -> Result<Self, AlphabetError> {
        let file: AlphabetFile = serde_json::from_str(json)?;
        let single = |s: &str| -> Result<char, AlphabetError> {
            let mut it = s.chars();
            match (it.next(), it.next()) {
                (Some(c), None) => Ok(c),
                _ => Err(AlphabetError::Invalid(format!("{s:?} is not a single character"))),
            }
        };
        let tags = TagScheme::new(
            single(&file.tags.per)?,
            single(&file.tags.loc)?,
            single(&file.tags.org)?,
            single(&file.tags.end)?,
        )?;
        let mut symbols = Vec::with_capacity(file.symbols.len());
        for (i, s) in file.symbols.iter().enumerate() {
            if s == BLANK_LITERAL {
                if i != file.blank_index {
                    return Err(AlphabetError::Invalid(format!(
                        "{BLANK_LITERAL} at {i}, blank_index is {}",
                        file.blank_index
                    )));
                }
                symbols.push(Symbol::Blank);
            } else {
                symbols.push(Symbol::Char(single(s)?));
            }
        }
        if file.blank_index >= symbols.len() {
            return Err(AlphabetError::Invalid(format!("blank_index {} out of range", file.blank_index)));
        }
        Alphabet::new(symbols, tags)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, AlphabetError> {
        Alphabet::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), AlphabetError> {
        std::fs::write(path, self.to_json_pretty() + "\n")?;
        Ok(())
    }

    /// FNV-1a (64 bit) over the canonical JSON bytes.
    pub fn checksum(&self) -> u64 {
        let mut hasher = FnvHasher::default();
        hasher.write(self.to_json().as_bytes());
        hasher.finish()
    }
}

#[derive(Serialize, Deserialize)]
struct AlphabetFile {
    symbols: Vec<String>,
    blank_index: usize,
    tags: TagsFile,
}

#[derive(Serialize, Deserialize)]
struct TagsFile {
    #[serde(rename = "PER")]
    per: String,
    #[serde(rename = "LOC")]
    loc: String,
    #[serde(rename = "ORG")]
    org: String,
    end: String,
}

/// Rewrites `[CAT text]` spans into `<start>text<end>` using the scheme's symbols.
pub fn tag_map(bracket_text: &str, scheme: &TagScheme) -> Result<String, AlphabetError> {
    let chars: Vec<char> = bracket_text.chars().collect();
    let mut out = String::with_capacity(bracket_text.len());
    let mut open: Option<usize> = None;
    let mut i = 0;
    while i < chars.len() {
        let ch = chars[i];
        if ch == '[' {
            if open.is_some() {
                return Err(AlphabetError::NestedSpan(i));
            }
            let code: String = chars.iter().skip(i + 1).take(3).collect();
            let category = code
                .parse::<Category>()
                .map_err(|_| AlphabetError::MalformedBracket { position: i, reason: "unknown category" })?;
            if chars.get(i + 4) != Some(&' ') {
                return Err(AlphabetError::MalformedBracket { position: i, reason: "expected space after category" });
            }
            out.push(scheme.start(category));
            open = Some(i);
            i += 5;
            continue;
        }
        if ch == ']' {
            if open.take().is_none() {
                return Err(AlphabetError::MalformedBracket { position: i, reason: "unopened ']'" });
            }
            out.push(scheme.end());
        } else if scheme.is_tag(ch) {
            return Err(AlphabetError::MalformedBracket { position: i, reason: "tag symbol in plain text" });
        } else {
            out.push(ch);
        }
        i += 1;
    }
    if let Some(position) = open {
        return Err(AlphabetError::MalformedBracket { position, reason: "unclosed span" });
    }
    Ok(out)
}

/// Inverse of [`tag_map`]. Any half-labeled tag is an error.
pub fn tag_unmap(symbol_text: &str, scheme: &TagScheme) -> Result<String, AlphabetError> {
    let mut out = String::with_capacity(symbol_text.len() + 8);
    let mut open: Option<usize> = None;
    for (i, ch) in symbol_text.chars().enumerate() {
        if let Some(category) = scheme.category_of(ch) {
            if let Some(prev) = open {
                return Err(AlphabetError::HalfLabeled(prev));
            }
            open = Some(i);
            out.push('[');
            out.push_str(category.code());
            out.push(' ');
        } else if ch == scheme.end() {
            if open.take().is_none() {
                return Err(AlphabetError::HalfLabeled(i));
            }
            out.push(']');
        } else {
            out.push(ch);
        }
    }
    match open {
        Some(prev) => Err(AlphabetError::HalfLabeled(prev)),
        None => Ok(out),
    }
}

/// Removes every tag symbol, wherever it occurs.
pub fn strip_tags(symbol_text: &str, scheme: &TagScheme) -> String {
    symbol_text.chars().filter(|c| !scheme.is_tag(*c)).collect()
}
