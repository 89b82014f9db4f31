//! Shared fixtures for the criterion benchmarks under `benches/`.

use tagctc::ngram_lm::{tokenize, DEFAULT_DISCOUNT};
use tagctc::posteriorgram::{synth_generate_with, utterance_seed};
use tagctc::{build_from_corpus, Alphabet, NGramModel, Posteriorgram, SynthOptions};

pub const SENTENCES: &[&str] = &[
    "|ANNA] FLEW TO $PARIS] ON MONDAY",
    "THE BOARD OF {ACME] MET |JOHN SMITH] IN $OSLO]",
    "|MARIA] SAID THE REPORT WAS LATE",
    "WE VISITED $BERLIN] LAST WEEK WITH |PETER]",
    "{GLOBEX] HIRED |LINDA] AND |OMAR]",
    "THE TRAIN FROM $MADRID] ARRIVED EARLY",
];

pub fn language_model(order: usize) -> NGramModel {
    let corpus: Vec<Vec<String>> = SENTENCES.iter().map(|s| tokenize(s)).collect();
    build_from_corpus(&corpus, order, DEFAULT_DISCOUNT).expect("fixture corpus builds")
}

/// Noisy posteriorgrams with some confused segments, one per fixture sentence.
pub fn posteriorgrams(alphabet: &Alphabet) -> Vec<Posteriorgram> {
    SENTENCES
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let opts = SynthOptions { noise: 0.25, dur_max: 3, seed: utterance_seed(7, i), confusion: 0.25 };
            synth_generate_with(s, alphabet, &opts).expect("fixture sentence encodes")
        })
        .collect()
}
