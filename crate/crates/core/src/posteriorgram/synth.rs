//! Synthetic acoustic-model output with CTC-shaped alignments.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Posteriorgram, PosteriorgramError};
use crate::alphabet::Alphabet;

/// Share of a confused segment's peak mass that stays on the true symbol.
const CONFUSION_TRUE_SHARE: f64 = 0.4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthOptions {
    /// Mass spread evenly over non-designated symbols, in `[0, 1)`.
    pub noise: f64,
    /// Each character lasts `1..=dur_max` frames.
    pub dur_max: usize,
    pub seed: u64,
    /// Probability that a letter's segment peaks on a different letter, in `[0, 1]`.
    /// Zero gives frames whose argmax is always the reference symbol.
    pub confusion: f64,
}

impl Default for SynthOptions {
    fn default() -> Self {
        SynthOptions { noise: 0.0, dur_max: 1, seed: 0, confusion: 0.0 }
    }
}

#[derive(Clone, Copy)]
enum Frame {
    Clean(usize),
    Confused { truth: usize, substitute: usize },
}

/// Seed for utterance `index` of a batch generated from one `seed`.
pub fn utterance_seed(seed: u64, index: usize) -> u64 {
    // splitmix64 finalizer, so neighbouring batch seeds do not share streams
    let mut z = seed.wrapping_add((index as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn synth_generate(
    reference: &str,
    alphabet: &Alphabet,
    noise: f64,
    dur_max: usize,
    seed: u64,
) -> Result<Posteriorgram, PosteriorgramError> {
    synth_generate_with(reference, alphabet, &SynthOptions { noise, dur_max, seed, confusion: 0.0 })
}

/// Emits each reference symbol for a random number of frames, separated by
/// blank frames (always between repeats, with probability 0.5 after every
/// other symbol).
pub fn synth_generate_with(
    reference: &str,
    alphabet: &Alphabet,
    opts: &SynthOptions,
) -> Result<Posteriorgram, PosteriorgramError> {
    if !(0.0..1.0).contains(&opts.noise) {
        return Err(PosteriorgramError::InvalidParameter(format!("noise {} not in [0, 1)", opts.noise)));
    }
    if !(0.0..=1.0).contains(&opts.confusion) {
        return Err(PosteriorgramError::InvalidParameter(format!("confusion {} not in [0, 1]", opts.confusion)));
    }
    if opts.dur_max == 0 {
        return Err(PosteriorgramError::InvalidParameter("dur_max must be at least 1".into()));
    }
    let v = alphabet.len();
    if v < 3 {
        return Err(PosteriorgramError::InvalidParameter("alphabet too small".into()));
    }
    let encoded = alphabet.encode(reference)?;
    let blank = alphabet.blank_index();
    let letters: Vec<usize> = ('A'..='Z').filter_map(|c| alphabet.index_of(c)).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut frames = Vec::new();
    let mut prev = None;
    for &sym in &encoded {
        if prev == Some(sym) {
            frames.push(Frame::Clean(blank));
        }
        let dur = rng.gen_range(1..=opts.dur_max);
        let mut frame = Frame::Clean(sym);
        if opts.confusion > 0.0 && letters.contains(&sym) && rng.gen_bool(opts.confusion) {
            let others: Vec<usize> = letters.iter().copied().filter(|&l| l != sym).collect();
            if let Some(&substitute) = others.choose(&mut rng) {
                frame = Frame::Confused { truth: sym, substitute };
            }
        }
        frames.extend(std::iter::repeat_n(frame, dur));
        if rng.gen_bool(0.5) {
            frames.push(Frame::Clean(blank));
        }
        prev = Some(sym);
    }
    if frames.is_empty() {
        frames.push(Frame::Clean(blank));
    }

    let noise = opts.noise;
    let mut values = Vec::with_capacity(frames.len() * v);
    for frame in frames {
        let (peaks, rest): (Vec<(usize, f64)>, f64) = match frame {
            Frame::Clean(s) => (vec![(s, 1.0 - noise)], noise / (v - 1) as f64),
            Frame::Confused { truth, substitute } => (
                vec![
                    (truth, (1.0 - noise) * CONFUSION_TRUE_SHARE),
                    (substitute, (1.0 - noise) * (1.0 - CONFUSION_TRUE_SHARE)),
                ],
                noise / (v - 2) as f64,
            ),
        };
        let row_start = values.len();
        values.extend(std::iter::repeat_n(rest.ln(), v));
        for (s, p) in peaks {
            values[row_start + s] = p.ln();
        }
    }
    // Quantize to what the file format stores so a written file reads back identically.
    let values = values.into_iter().map(|x| x as f32 as f64).collect();
    Posteriorgram::new(values, v, alphabet.checksum())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_parameters() {
        let a = Alphabet::default();
        assert!(synth_generate("A", &a, 1.0, 1, 0).is_err());
        assert!(synth_generate("A", &a, -0.1, 1, 0).is_err());
        assert!(synth_generate("A", &a, 0.1, 0, 0).is_err());
        assert!(matches!(synth_generate("A.", &a, 0.1, 1, 0), Err(PosteriorgramError::Alphabet(_))));
    }

    #[test]
    fn single_char_noiseless_frame_count() {
        let a = Alphabet::default();
        for seed in 0..20 {
            let pg = synth_generate("A", &a, 0.0, 1, seed).unwrap();
            assert!((1..=2).contains(&pg.num_frames()));
            assert_eq!(pg.get(0, 1), 0.0);
        }
    }

    #[test]
    fn repeats_get_a_separating_blank() {
        let a = Alphabet::default();
        let pg = synth_generate("AA", &a, 0.0, 1, 3).unwrap();
        let argmax: Vec<usize> =
            pg.rows().map(|r| (0..r.len()).max_by(|&i, &j| r[i].total_cmp(&r[j]).then(j.cmp(&i))).unwrap()).collect();
        let first_a = argmax.iter().position(|&s| s == 1).unwrap();
        assert_eq!(argmax[first_a + 1], 0);
    }

    #[test]
    fn deterministic_for_fixed_seed() {
        let a = Alphabet::default();
        let x = synth_generate("|BOB] WENT HOME", &a, 0.3, 3, 11).unwrap();
        let y = synth_generate("|BOB] WENT HOME", &a, 0.3, 3, 11).unwrap();
        assert_eq!(x.to_bytes(), y.to_bytes());
        let z = synth_generate("|BOB] WENT HOME", &a, 0.3, 3, 12).unwrap();
        assert_ne!(x.to_bytes(), z.to_bytes());
    }

    #[test]
    fn confused_segments_peak_on_substitute() {
        let a = Alphabet::default();
        let opts = SynthOptions { noise: 0.2, dur_max: 1, seed: 5, confusion: 1.0 };
        let pg = synth_generate_with("Q", &a, &opts).unwrap();
        let row = pg.frame(0);
        let q = a.index_of('Q').unwrap();
        let best = (0..row.len()).max_by(|&i, &j| row[i].total_cmp(&row[j])).unwrap();
        assert_ne!(best, q);
        assert!((row[q] - (0.8f64 * 0.4).ln()).abs() < 1e-6);
    }

    #[test]
    fn empty_reference_is_one_blank_frame() {
        let a = Alphabet::default();
        let pg = synth_generate("", &a, 0.0, 2, 0).unwrap();
        assert_eq!(pg.num_frames(), 1);
        assert_eq!(pg.get(0, 0), 0.0);
    }
}
