//! Entity-aware CTC decoding from acoustic posteriorgrams.
//!
//! Named entities are written inline with start symbols (`|` person, `$`
//! location, `{` organization) and a shared end symbol `]`, so a character
//! level CTC model emits transcript and entity tags in one pass. This crate
//! holds the alphabet, CTC loss, an ARPA n-gram LM, the fused prefix beam
//! search, entity evaluation, and class-token LM support for unseen names.

pub mod alphabet;
pub mod ctc;
pub mod decoder;
pub mod entities;
pub mod evalkit;
pub mod logmath;
pub mod ngram_lm;
pub mod posteriorgram;
pub mod semlm;

pub use alphabet::{strip_tags, tag_map, tag_unmap, Alphabet, AlphabetError, Category, Symbol, TagScheme};
pub use ctc::{ctc_log_prob, ctc_loss_and_grad, greedy_decode, CtcError, LabelSequence};
pub use decoder::{decode_batch, prefix_beam_search, DecodeConfig, DecodeError, Decoded};
pub use entities::{parse_tagged, EntitySet, EntitySpan, ParseMode};
pub use evalkit::{evaluate_ner, wer, wer_corpus, EvalError, EvalReport};
pub use ngram_lm::{build_from_corpus, load_arpa, write_arpa, LmError, NGramModel};
pub use posteriorgram::{
    read_posteriorgram, synth_generate, write_posteriorgram, Posteriorgram, PosteriorgramError, SynthOptions,
};
pub use semlm::{decode_with_class_lm, oov_stats, transform_corpus, ClassMap, NameDict, OovStats};
