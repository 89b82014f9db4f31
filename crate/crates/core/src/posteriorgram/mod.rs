//! Per-frame log-probability matrices and the `LPG1` binary file format.
//!
//! Layout (all little-endian):
//!
//! | bytes | content |
//! |-------|---------|
//! | 4     | magic `LPG1` |
//! | 4     | `u32` frame count T |
//! | 4     | `u32` symbol count V |
//! | 8     | `u64` alphabet checksum |
//! | 4·T·V | `f32` natural-log probabilities, row-major |

mod synth;

use std::io::Write;
use std::path::Path;

use thiserror::Error;

use crate::alphabet::AlphabetError;
use crate::logmath::logsumexp;

pub use synth::{synth_generate, synth_generate_with, utterance_seed, SynthOptions};

pub const MAGIC: [u8; 4] = *b"LPG1";
const HEADER_LEN: usize = 20;

/// Maximum allowed |logsumexp| of a frame.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-3;

/// The file format carries no frame shift; loaded matrices get this value.
pub const DEFAULT_FRAME_SHIFT_MS: f64 = 20.0;

#[derive(Debug, Error)]
pub enum PosteriorgramError {
    #[error("bad magic bytes")]
    BadMagic,
    #[error("unsupported format version {0:?}")]
    VersionUnsupported(char),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("frame {frame} is not normalized (log-sum {log_sum})")]
    NotNormalized { frame: usize, log_sum: f64 },
    #[error("invalid synthesis parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Alphabet(#[from] AlphabetError),
    #[error("posteriorgram io: {0}")]
    Io(#[from] std::io::Error),
}

/// T×V matrix of natural-log symbol probabilities, one row per frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Posteriorgram {
    frames: Vec<f64>,
    num_frames: usize,
    num_symbols: usize,
    alphabet_hash: u64,
    frame_shift_ms: f64,
}

impl Posteriorgram {
    /// Builds a validated matrix from row-major log-probabilities.
    pub fn new(frames: Vec<f64>, num_symbols: usize, alphabet_hash: u64) -> Result<Self, PosteriorgramError> {
        if num_symbols == 0 || frames.is_empty() || !frames.len().is_multiple_of(num_symbols) {
            return Err(PosteriorgramError::ShapeMismatch(format!(
                "{} values cannot form frames of {} symbols",
                frames.len(),
                num_symbols
            )));
        }
        let pg = Posteriorgram {
            num_frames: frames.len() / num_symbols,
            frames,
            num_symbols,
            alphabet_hash,
            frame_shift_ms: DEFAULT_FRAME_SHIFT_MS,
        };
        pg.validate()?;
        Ok(pg)
    }

    /// Normalizes each row of arbitrary scores (log-softmax) before validation.
    pub fn from_scores(scores: Vec<f64>, num_symbols: usize, alphabet_hash: u64) -> Result<Self, PosteriorgramError> {
        let mut frames = scores;
        if num_symbols > 0 {
            for row in frames.chunks_mut(num_symbols) {
                let z = logsumexp(row);
                row.iter_mut().for_each(|v| *v -= z);
            }
        }
        Posteriorgram::new(frames, num_symbols, alphabet_hash)
    }

    pub fn with_frame_shift_ms(mut self, ms: f64) -> Self {
        assert!(ms > 0.0, "frame shift must be positive");
        self.frame_shift_ms = ms;
        self
    }

    fn validate(&self) -> Result<(), PosteriorgramError> {
        for (frame, row) in self.rows().enumerate() {
            let log_sum = logsumexp(row);
            let bad_entry = row.iter().any(|v| v.is_nan() || *v == f64::INFINITY);
            if bad_entry || log_sum.is_nan() || log_sum.abs() > NORMALIZATION_TOLERANCE {
                return Err(PosteriorgramError::NotNormalized { frame, log_sum });
            }
        }
        Ok(())
    }

    pub fn num_frames(&self) -> usize {
        self.num_frames
    }

    pub fn num_symbols(&self) -> usize {
        self.num_symbols
    }

    pub fn alphabet_hash(&self) -> u64 {
        self.alphabet_hash
    }

    pub fn frame_shift_ms(&self) -> f64 {
        self.frame_shift_ms
    }

    pub fn frame(&self, t: usize) -> &[f64] {
        &self.frames[t * self.num_symbols..(t + 1) * self.num_symbols]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.frames.chunks_exact(self.num_symbols)
    }

    #[inline]
    pub fn get(&self, t: usize, symbol: usize) -> f64 {
        self.frames[t * self.num_symbols + symbol]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.frames
    }

    /// Serializes to `LPG1` bytes. Values are narrowed to `f32`.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + 4 * self.frames.len());
        out.extend_from_slice(&MAGIC);
        out.extend_from_slice(&(self.num_frames as u32).to_le_bytes());
        out.extend_from_slice(&(self.num_symbols as u32).to_le_bytes());
        out.extend_from_slice(&self.alphabet_hash.to_le_bytes());
        for v in &self.frames {
            out.extend_from_slice(&(*v as f32).to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, PosteriorgramError> {
        if bytes.len() < 4 || bytes[..3] != MAGIC[..3] {
            return Err(PosteriorgramError::BadMagic);
        }
        if bytes[3] != MAGIC[3] {
            return Err(PosteriorgramError::VersionUnsupported(bytes[3] as char));
        }
        if bytes.len() < HEADER_LEN {
            return Err(PosteriorgramError::ShapeMismatch("truncated header".into()));
        }
        let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap()) as usize;
        let num_frames = u32_at(4);
        let num_symbols = u32_at(8);
        let alphabet_hash = u64::from_le_bytes(bytes[12..20].try_into().unwrap());
        let body = &bytes[HEADER_LEN..];
        let expected = num_frames
            .checked_mul(num_symbols)
            .and_then(|n| n.checked_mul(4))
            .ok_or_else(|| PosteriorgramError::ShapeMismatch("header dimensions overflow".into()))?;
        if body.len() != expected {
            return Err(PosteriorgramError::ShapeMismatch(format!(
                "header says {num_frames}x{num_symbols} ({expected} bytes), body has {} bytes",
                body.len()
            )));
        }
        let frames = body.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64).collect();
        Posteriorgram::new(frames, num_symbols, alphabet_hash)
    }
}

pub fn read_posteriorgram(path: impl AsRef<Path>) -> Result<Posteriorgram, PosteriorgramError> {
    Posteriorgram::from_bytes(&std::fs::read(path)?)
}

pub fn write_posteriorgram(pg: &Posteriorgram, path: impl AsRef<Path>) -> Result<(), PosteriorgramError> {
    let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
    file.write_all(&pg.to_bytes())?;
    file.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn uniform(t: usize, v: usize) -> Posteriorgram {
        Posteriorgram::new(vec![-(v as f64).ln(); t * v], v, 7).unwrap()
    }

    #[test]
    fn uniform_frame_file_layout() {
        let pg = uniform(1, 32);
        let bytes = pg.to_bytes();
        assert_eq!(bytes.len(), 20 + 32 * 4);
        assert_eq!(&bytes[..4], b"LPG1");
        assert_eq!(&bytes[4..8], &1u32.to_le_bytes());
        assert_eq!(&bytes[8..12], &32u32.to_le_bytes());
        assert_eq!(&bytes[12..20], &7u64.to_le_bytes());
        assert_eq!(&bytes[20..24], &(-(32f64.ln()) as f32).to_le_bytes());
    }

    #[test]
    fn write_then_read_is_bit_identical() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("u.lpg");
        let pg = Posteriorgram::from_bytes(&uniform(3, 5).to_bytes()).unwrap();
        write_posteriorgram(&pg, &path).unwrap();
        let back = read_posteriorgram(&path).unwrap();
        assert_eq!(back, pg);
        assert_eq!(back.to_bytes(), pg.to_bytes());
    }

    #[test]
    fn rejects_bad_magic_and_version() {
        let mut bytes = uniform(1, 4).to_bytes();
        bytes[0] = b'X';
        assert!(matches!(Posteriorgram::from_bytes(&bytes), Err(PosteriorgramError::BadMagic)));
        let mut bytes = uniform(1, 4).to_bytes();
        bytes[3] = b'2';
        assert!(matches!(Posteriorgram::from_bytes(&bytes), Err(PosteriorgramError::VersionUnsupported('2'))));
    }

    #[test]
    fn rejects_truncated_body() {
        let bytes = uniform(2, 4).to_bytes();
        assert!(matches!(
            Posteriorgram::from_bytes(&bytes[..bytes.len() - 4]),
            Err(PosteriorgramError::ShapeMismatch(_))
        ));
    }

    #[test]
    fn rejects_unnormalized_frame() {
        let ninf = f64::NEG_INFINITY;
        let ok = vec![0.5f64.ln(), 0.5f64.ln(), ninf, ninf];
        let bad = vec![0.45f64.ln(), 0.45f64.ln(), ninf, ninf];
        let frames = [ok, bad].concat();
        assert!(matches!(Posteriorgram::new(frames, 4, 0), Err(PosteriorgramError::NotNormalized { frame: 1, .. })));
    }

    #[test]
    fn rejects_empty() {
        assert!(matches!(Posteriorgram::new(vec![], 4, 0), Err(PosteriorgramError::ShapeMismatch(_))));
        let mut header = Vec::from(MAGIC);
        header.extend_from_slice(&0u32.to_le_bytes());
        header.extend_from_slice(&4u32.to_le_bytes());
        header.extend_from_slice(&0u64.to_le_bytes());
        assert!(Posteriorgram::from_bytes(&header).is_err());
    }

    proptest! {
        #[test]
        fn file_round_trip_is_identity(
            t in 1usize..6,
            v in 2usize..8,
            seed in prop::collection::vec(-8.0f64..0.0, 48),
            hash in any::<u64>(),
        ) {
            let scores: Vec<f64> = (0..t * v).map(|i| seed[i % seed.len()] + i as f64 * 0.01).collect();
            let pg = Posteriorgram::from_scores(scores, v, hash).unwrap();
            let once = Posteriorgram::from_bytes(&pg.to_bytes()).unwrap();
            let twice = Posteriorgram::from_bytes(&once.to_bytes()).unwrap();
            prop_assert_eq!(&once, &twice);
            for (a, b) in pg.as_slice().iter().zip(once.as_slice()) {
                prop_assert!((a - b).abs() <= 1e-6 * a.abs().max(1.0));
            }
        }
    }
}
