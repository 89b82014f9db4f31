//! Backoff n-gram language model.
//!
//! Probabilities are held in natural log. ARPA files store log10 and are
//! converted on the way in and out. Tokens are whitespace-delimited words of
//! tagged transcripts, so entity tag symbols travel inside tokens
//! (`|RAJESH`, `GOPINATHAN]`).

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;

use fnv::FnvHashMap as HashMap;
use thiserror::Error;

pub const BOS: &str = "<s>";
pub const EOS: &str = "</s>";
pub const UNK: &str = "<unk>";

/// Highest supported n-gram order.
pub const MAX_ORDER: usize = 10;

/// Default log-probability for words the model cannot score at all.
pub const DEFAULT_OOV_FLOOR: f64 = -23.025850929940457; // ln 1e-10

/// Default absolute discount for [`build_from_corpus`].
pub const DEFAULT_DISCOUNT: f64 = 0.4;

/// Log10 probability conventionally given to `<s>`, which is never predicted.
const ARPA_BOS_LOG10: f64 = -99.0;

pub type TokenId = u32;

/// Id used for context words absent from the vocabulary.
pub const NO_TOKEN: TokenId = TokenId::MAX;

#[derive(Debug, Error)]
pub enum LmError {
    #[error("line {line}: {message}")]
    ParseError { line: usize, message: String },
    #[error("order {order}: header declares {declared} n-grams, section has {found}")]
    CountMismatch { order: usize, declared: usize, found: usize },
    #[error("missing section {0}")]
    MissingSection(String),
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("lm io: {0}")]
    Io(#[from] std::io::Error),
}

/// Log-probability and backoff log-weight, both natural log.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Entry {
    pub log_prob: f64,
    pub backoff: f64,
}

#[derive(Debug, Clone)]
pub struct NGramModel {
    order: usize,
    vocab: Vec<String>,
    ids: HashMap<String, TokenId>,
    /// `tables[k - 1]` holds the k-grams.
    tables: Vec<HashMap<Vec<TokenId>, Entry>>,
    bos: TokenId,
    eos: TokenId,
    unk: Option<TokenId>,
    oov_floor: f64,
}

impl NGramModel {
    fn empty(order: usize) -> Self {
        let mut model = NGramModel {
            order,
            vocab: Vec::new(),
            ids: HashMap::default(),
            tables: vec![HashMap::default(); order],
            bos: 0,
            eos: 0,
            unk: None,
            oov_floor: DEFAULT_OOV_FLOOR,
        };
        model.bos = model.intern(BOS);
        model.eos = model.intern(EOS);
        model
    }

    fn intern(&mut self, token: &str) -> TokenId {
        if let Some(&id) = self.ids.get(token) {
            return id;
        }
        let id = self.vocab.len() as TokenId;
        self.vocab.push(token.to_string());
        self.ids.insert(token.to_string(), id);
        id
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn oov_floor(&self) -> f64 {
        self.oov_floor
    }

    pub fn with_oov_floor(mut self, floor: f64) -> Self {
        self.oov_floor = floor;
        self
    }

    pub fn bos(&self) -> TokenId {
        self.bos
    }

    pub fn eos(&self) -> TokenId {
        self.eos
    }

    pub fn unk(&self) -> Option<TokenId> {
        self.unk
    }

    pub fn token_id(&self, token: &str) -> Option<TokenId> {
        self.ids.get(token).copied()
    }

    /// Id to use when `token` appears in a context: the token itself, else
    /// `<unk>`, else [`NO_TOKEN`].
    pub fn context_id(&self, token: &str) -> TokenId {
        self.token_id(token).or(self.unk).unwrap_or(NO_TOKEN)
    }

    pub fn token(&self, id: TokenId) -> Option<&str> {
        self.vocab.get(id as usize).map(String::as_str)
    }

    /// Every token with a unigram entry.
    pub fn vocab(&self) -> impl Iterator<Item = &str> + '_ {
        self.vocab
            .iter()
            .enumerate()
            .filter(|(i, _)| self.tables[0].contains_key(&[*i as TokenId][..]))
            .map(|(_, t)| t.as_str())
    }

    /// Number of stored n-grams per order, lowest order first.
    pub fn counts(&self) -> Vec<usize> {
        self.tables.iter().map(HashMap::len).collect()
    }

    pub fn entry(&self, ngram: &[&str]) -> Option<Entry> {
        if ngram.is_empty() || ngram.len() > self.order {
            return None;
        }
        let ids: Option<Vec<TokenId>> = ngram.iter().map(|t| self.token_id(t)).collect();
        self.tables[ngram.len() - 1].get(&ids?).copied()
    }

    /// Backoff scoring over token ids. `word == None` means out of vocabulary.
    pub fn score_ids(&self, context: &[TokenId], word: Option<TokenId>, floor: f64) -> f64 {
        let Some(word) = word.or(self.unk) else {
            return floor;
        };
        let keep = context.len().min(self.order - 1);
        let mut ctx = &context[context.len() - keep..];
        let mut key = [0 as TokenId; MAX_ORDER];
        let mut backoff = 0.0;
        loop {
            let n = ctx.len();
            key[..n].copy_from_slice(ctx);
            key[n] = word;
            if let Some(e) = self.tables[n].get(&key[..=n]) {
                return backoff + e.log_prob;
            }
            if n == 0 {
                return backoff + floor;
            }
            if let Some(e) = self.tables[n - 1].get(ctx) {
                backoff += e.backoff;
            }
            ctx = &ctx[1..];
        }
    }

    /// Log-probability of `word` after `context` with standard backoff.
    pub fn score_word(&self, context: &[&str], word: &str) -> f64 {
        let ctx: Vec<TokenId> = context.iter().map(|t| self.context_id(t)).collect();
        self.score_ids(&ctx, self.token_id(word), self.oov_floor)
    }

    /// Sentence log-probability including `</s>`, starting from `<s>`.
    pub fn score_sequence(&self, tokens: &[&str]) -> f64 {
        let mut ctx = vec![self.bos];
        let mut total = 0.0;
        for t in tokens {
            total += self.score_ids(&ctx, self.token_id(t), self.oov_floor);
            ctx.push(self.context_id(t));
        }
        total + self.score_ids(&ctx, Some(self.eos), self.oov_floor)
    }

    fn sorted_entries(&self, order: usize) -> Vec<(&Vec<TokenId>, &Entry)> {
        let mut entries: Vec<_> = self.tables[order - 1].iter().collect();
        entries.sort_by(|a, b| a.0.cmp(b.0));
        entries
    }

    /// Renders the model as ARPA text (log10 values, tab separated).
    pub fn to_arpa(&self) -> String {
        let mut out = String::from("\\data\\\n");
        for (k, table) in self.tables.iter().enumerate() {
            let _ = writeln!(out, "ngram {}={}", k + 1, table.len());
        }
        for k in 1..=self.order {
            let _ = write!(out, "\n\\{k}-grams:\n");
            for (ids, e) in self.sorted_entries(k) {
                let words: Vec<&str> = ids.iter().map(|&i| self.vocab[i as usize].as_str()).collect();
                let _ = write!(out, "{}\t{}", to_log10(e.log_prob), words.join(" "));
                if k < self.order && e.backoff != 0.0 {
                    let _ = write!(out, "\t{}", to_log10(e.backoff));
                }
                out.push('\n');
            }
        }
        out.push_str("\n\\end\\\n");
        out
    }
}

fn to_log10(ln: f64) -> f64 {
    ln / std::f64::consts::LN_10
}

fn from_log10(log10: f64) -> f64 {
    log10 * std::f64::consts::LN_10
}

pub fn load_arpa(path: impl AsRef<Path>) -> Result<NGramModel, LmError> {
    parse_arpa(&std::fs::read_to_string(path)?)
}

pub fn write_arpa(model: &NGramModel, path: impl AsRef<Path>) -> Result<(), LmError> {
    std::fs::write(path, model.to_arpa())?;
    Ok(())
}

pub fn parse_arpa(text: &str) -> Result<NGramModel, LmError> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim())).peekable();
    let parse_err = |line: usize, message: String| LmError::ParseError { line, message };

    loop {
        match lines.next() {
            Some((_, "\\data\\")) => break,
            Some(_) => continue,
            None => return Err(LmError::MissingSection("\\data\\".into())),
        }
    }

    let mut declared: Vec<usize> = Vec::new();
    while let Some(&(line, l)) = lines.peek() {
        if l.starts_with('\\') {
            break;
        }
        lines.next();
        if l.is_empty() {
            continue;
        }
        let spec =
            l.strip_prefix("ngram ").ok_or_else(|| parse_err(line, format!("expected `ngram k=count`, got {l:?}")))?;
        let (k, n) = spec
            .split_once('=')
            .and_then(|(k, n)| Some((k.trim().parse::<usize>().ok()?, n.trim().parse::<usize>().ok()?)))
            .ok_or_else(|| parse_err(line, format!("bad count line {l:?}")))?;
        if k != declared.len() + 1 {
            return Err(parse_err(line, format!("expected order {} count, got order {k}", declared.len() + 1)));
        }
        declared.push(n);
    }
    let order = declared.len();
    if order == 0 || order > MAX_ORDER {
        return Err(LmError::InvalidParameter(format!("order {order} not in 1..={MAX_ORDER}")));
    }

    let mut model = NGramModel::empty(order);
    for (k, &count) in declared.iter().enumerate().map(|(i, c)| (i + 1, c)) {
        let header = format!("\\{k}-grams:");
        match lines.next() {
            Some((_, l)) if l == header => {}
            _ => return Err(LmError::MissingSection(header)),
        }
        let mut found = 0;
        while let Some(&(line, l)) = lines.peek() {
            if l.starts_with('\\') {
                break;
            }
            lines.next();
            if l.is_empty() {
                continue;
            }
            let fields: Vec<&str> = l.split_whitespace().collect();
            if fields.len() != k + 1 && fields.len() != k + 2 {
                return Err(parse_err(line, format!("expected {} or {} fields, got {}", k + 1, k + 2, fields.len())));
            }
            let num = |s: &str| s.parse::<f64>().map_err(|_| parse_err(line, format!("bad number {s:?}")));
            let log_prob = from_log10(num(fields[0])?);
            let backoff = if fields.len() == k + 2 { from_log10(num(fields[k + 1])?) } else { 0.0 };
            let ids: Vec<TokenId> = if k == 1 {
                vec![model.intern(fields[1])]
            } else {
                fields[1..=k]
                    .iter()
                    .map(|w| model.token_id(w).ok_or_else(|| parse_err(line, format!("{w:?} has no unigram entry"))))
                    .collect::<Result<_, _>>()?
            };
            if k > 1 && !model.tables[k - 2].contains_key(&ids[..k - 1]) {
                return Err(parse_err(line, format!("prefix of {:?} missing from order {}", &fields[1..=k], k - 1)));
            }
            if model.tables[k - 1].insert(ids, Entry { log_prob, backoff }).is_some() {
                return Err(parse_err(line, "duplicate n-gram".into()));
            }
            found += 1;
        }
        if found != count {
            return Err(LmError::CountMismatch { order: k, declared: count, found });
        }
    }
    loop {
        match lines.next() {
            Some((_, "\\end\\")) => break,
            Some((_, "")) => continue,
            Some((line, l)) => return Err(parse_err(line, format!("unexpected {l:?}"))),
            None => return Err(LmError::MissingSection("\\end\\".into())),
        }
    }
    model.unk = model.token_id(UNK).filter(|id| model.tables[0].contains_key(&[*id][..]));
    Ok(model)
}

/// Uppercases and splits a transcript on whitespace.
pub fn tokenize(line: &str) -> Vec<String> {
    line.split_whitespace().map(str::to_uppercase).collect()
}

/// Interpolated absolute-discounting estimate over `<s> w1 .. wn </s>`.
///
/// For a context `h` seen `c(h)` times with `n(h)` distinct continuations:
///
/// `P(w | h) = max(c(h w) - d, 0) / c(h) + (d n(h) / c(h)) P(w | h')`
///
/// where `h'` drops the oldest word and the order-0 distribution is uniform
/// over the predictable vocabulary (every token but `<s>`, plus `<unk>`). The
/// interpolation weight is the ARPA backoff weight of `h`.
pub fn build_from_corpus<S: AsRef<str>>(corpus: &[Vec<S>], order: usize, discount: f64) -> Result<NGramModel, LmError> {
    if order == 0 || order > MAX_ORDER {
        return Err(LmError::InvalidParameter(format!("order {order} not in 1..={MAX_ORDER}")));
    }
    if !(discount > 0.0 && discount < 1.0) {
        return Err(LmError::InvalidParameter(format!("discount {discount} not in (0, 1)")));
    }
    if corpus.is_empty() {
        return Err(LmError::EmptyCorpus);
    }

    let mut model = NGramModel::empty(order);
    let unk = model.intern(UNK);
    model.unk = Some(unk);
    let words: BTreeSet<&str> = corpus.iter().flatten().map(AsRef::as_ref).collect();
    for w in &words {
        model.intern(w);
    }
    let (bos, eos) = (model.bos, model.eos);

    // counts[k - 1]: k-gram -> count
    let mut counts: Vec<HashMap<Vec<TokenId>, u64>> = vec![HashMap::default(); order];
    for sentence in corpus {
        let mut padded = Vec::with_capacity(sentence.len() + 2);
        padded.push(bos);
        padded.extend(sentence.iter().map(|w| model.ids[w.as_ref()]));
        padded.push(eos);
        for k in 1..=order {
            for window in padded.windows(k) {
                if k == 1 && window[0] == bos {
                    continue;
                }
                *counts[k - 1].entry(window.to_vec()).or_insert(0) += 1;
            }
        }
    }

    let predictable = (model.vocab.len() - 1) as f64;
    let mut probs: Vec<HashMap<Vec<TokenId>, f64>> = vec![HashMap::default(); order];
    let mut gammas: Vec<HashMap<Vec<TokenId>, f64>> = vec![HashMap::default(); order];

    // Context totals and type counts per order.
    for k in 1..=order {
        let mut totals: HashMap<&[TokenId], (u64, u64)> = HashMap::default();
        for (gram, &c) in &counts[k - 1] {
            let t = totals.entry(&gram[..k - 1]).or_insert((0, 0));
            t.0 += c;
            t.1 += 1;
        }
        let mut layer = HashMap::with_capacity_and_hasher(counts[k - 1].len(), Default::default());
        for (gram, &c) in &counts[k - 1] {
            let (total, types) = totals[&gram[..k - 1]];
            let gamma = discount * types as f64 / total as f64;
            let lower = if k == 1 { 1.0 / predictable } else { probs[k - 2][&gram[1..]] };
            layer.insert(gram.clone(), (c as f64 - discount) / total as f64 + gamma * lower);
        }
        if k == 1 {
            let (total, types) = totals[&[][..]];
            let gamma = discount * types as f64 / total as f64;
            layer.entry(vec![unk]).or_insert(gamma / predictable);
        }
        for (ctx, (total, types)) in totals {
            if !ctx.is_empty() {
                gammas[ctx.len() - 1].insert(ctx.to_vec(), discount * types as f64 / total as f64);
            }
        }
        probs[k - 1] = layer;
    }

    for (k, layer) in probs.into_iter().enumerate() {
        for (gram, p) in layer {
            let backoff = gammas[k].get(&gram).map_or(0.0, |g| g.ln());
            model.tables[k].insert(gram, Entry { log_prob: p.ln(), backoff });
        }
    }
    let bos_backoff = gammas[0].get(&vec![bos]).map_or(0.0, |g| g.ln());
    model.tables[0].insert(vec![bos], Entry { log_prob: from_log10(ARPA_BOS_LOG10), backoff: bos_backoff });
    Ok(model)
}
