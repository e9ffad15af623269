//! BPSK and QPSK alphabets, bit labelling and the symbol-level XOR used for
//! PNC mapping.
//!
//! Symbols are unit energy. Bit 0 maps to `+1` and bit 1 to `-1`; QPSK applies
//! the same rule per component, first bit on the real axis and second bit on
//! the imaginary axis, so the QPSK XOR is two independent BPSK XORs.
//!
//! Hot paths work on alphabet indices rather than complex values. Alphabet
//! order is fixed: `[+1, -1]` for BPSK and
//! `[(1+j), (-1+j), (-1-j), (1-j)] / sqrt(2)` for QPSK.

use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance used when matching a complex value against alphabet entries.
pub const SYMBOL_MATCH_TOL: f64 = 1e-12;

/// Largest alphabet the decoders are sized for.
pub const MAX_ORDER: usize = 4;

const BPSK_ALPHABET: [Complex64; 2] = [Complex64::new(1.0, 0.0), Complex64::new(-1.0, 0.0)];

const QPSK_ALPHABET: [Complex64; 4] = [
    Complex64::new(FRAC_1_SQRT_2, FRAC_1_SQRT_2),
    Complex64::new(-FRAC_1_SQRT_2, FRAC_1_SQRT_2),
    Complex64::new(-FRAC_1_SQRT_2, -FRAC_1_SQRT_2),
    Complex64::new(FRAC_1_SQRT_2, -FRAC_1_SQRT_2),
];

// index -> packed bit word (first bit in the LSB). Self-inverse for QPSK.
const BPSK_WORDS: [u8; 2] = [0, 1];
const QPSK_WORDS: [u8; 4] = [0b00, 0b01, 0b11, 0b10];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SchemeKind {
    Bpsk,
    Qpsk,
}

impl fmt::Display for SchemeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SchemeKind::Bpsk => f.write_str("bpsk"),
            SchemeKind::Qpsk => f.write_str("qpsk"),
        }
    }
}

impl FromStr for SchemeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "bpsk" => Ok(SchemeKind::Bpsk),
            "qpsk" => Ok(SchemeKind::Qpsk),
            other => Err(Error::invalid(
                "scheme",
                format!("unknown scheme `{other}`"),
            )),
        }
    }
}

/// A fixed-length group of bits carried by one symbol.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct BitWord {
    value: u8,
    len: u8,
}

impl BitWord {
    /// Builds a word from 0/1 values; `bits[0]` is the first bit.
    pub fn from_bits(bits: &[u8]) -> Result<Self> {
        if bits.len() > 8 {
            return Err(Error::invalid("bits", "a word holds at most 8 bits"));
        }
        let mut value = 0u8;
        for (i, &b) in bits.iter().enumerate() {
            match b {
                0 => {}
                1 => value |= 1 << i,
                other => {
                    return Err(Error::invalid(
                        "bits",
                        format!("bit value {other} is not 0 or 1"),
                    ))
                }
            }
        }
        Ok(BitWord {
            value,
            len: bits.len() as u8,
        })
    }

    pub fn len(&self) -> usize {
        self.len as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Packed value, first bit in the least significant position.
    pub fn value(&self) -> u8 {
        self.value
    }

    pub fn bits(&self) -> Vec<u8> {
        (0..self.len).map(|i| (self.value >> i) & 1).collect()
    }
}

/// Modulation scheme: alphabet, bit labelling and XOR table.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "SchemeKind", from = "SchemeKind")]
pub struct ModScheme {
    kind: SchemeKind,
}

impl From<SchemeKind> for ModScheme {
    fn from(kind: SchemeKind) -> Self {
        ModScheme { kind }
    }
}

impl From<ModScheme> for SchemeKind {
    fn from(s: ModScheme) -> Self {
        s.kind
    }
}

impl fmt::Display for ModScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.kind.fmt(f)
    }
}

impl FromStr for ModScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        s.parse::<SchemeKind>().map(ModScheme::from)
    }
}

impl ModScheme {
    pub const fn bpsk() -> Self {
        ModScheme {
            kind: SchemeKind::Bpsk,
        }
    }

    pub const fn qpsk() -> Self {
        ModScheme {
            kind: SchemeKind::Qpsk,
        }
    }

    pub fn kind(&self) -> SchemeKind {
        self.kind
    }

    pub fn bits_per_symbol(&self) -> usize {
        match self.kind {
            SchemeKind::Bpsk => 1,
            SchemeKind::Qpsk => 2,
        }
    }

    /// Alphabet size `M = 2^bits_per_symbol`.
    pub fn order(&self) -> usize {
        1 << self.bits_per_symbol()
    }

    pub fn alphabet(&self) -> &'static [Complex64] {
        match self.kind {
            SchemeKind::Bpsk => &BPSK_ALPHABET,
            SchemeKind::Qpsk => &QPSK_ALPHABET,
        }
    }

    fn words(&self) -> &'static [u8] {
        match self.kind {
            SchemeKind::Bpsk => &BPSK_WORDS,
            SchemeKind::Qpsk => &QPSK_WORDS,
        }
    }

    pub fn symbol(&self, index: usize) -> Complex64 {
        self.alphabet()[index]
    }

    /// Packed bit word of the symbol at `index`.
    pub fn word_of(&self, index: usize) -> u8 {
        self.words()[index]
    }

    /// Alphabet index of a packed bit word.
    pub fn index_of_word(&self, word: u8) -> usize {
        // Both word tables are involutions.
        usize::from(self.words()[usize::from(word)])
    }

    /// Alphabet index of `a ⊕ b` given operand indices.
    pub fn xor_index(&self, a: usize, b: usize) -> usize {
        self.index_of_word(self.word_of(a) ^ self.word_of(b))
    }

    /// Index of the all-zero word, the identity of the XOR group.
    pub fn identity_index(&self) -> usize {
        0
    }

    pub fn index_of(&self, s: Complex64) -> Result<usize> {
        self.alphabet()
            .iter()
            .position(|&c| (c - s).norm() <= SYMBOL_MATCH_TOL)
            .ok_or_else(|| Error::NotInAlphabet(format!("{s}")))
    }

    pub fn bits_to_symbol(&self, word: &BitWord) -> Result<Complex64> {
        if word.len() != self.bits_per_symbol() {
            return Err(Error::LengthMismatch {
                what: "bit word",
                expected: self.bits_per_symbol(),
                got: word.len(),
            });
        }
        Ok(self.symbol(self.index_of_word(word.value())))
    }

    pub fn symbol_to_bits(&self, s: Complex64) -> Result<BitWord> {
        let index = self.index_of(s)?;
        Ok(BitWord {
            value: self.word_of(index),
            len: self.bits_per_symbol() as u8,
        })
    }

    pub fn xor_symbols(&self, a: Complex64, b: Complex64) -> Result<Complex64> {
        let (ia, ib) = (self.index_of(a)?, self.index_of(b)?);
        Ok(self.symbol(self.xor_index(ia, ib)))
    }

    /// Groups a bit packet into alphabet indices.
    pub fn pack_indices(&self, bits: &[u8]) -> Result<Vec<usize>> {
        let k = self.bits_per_symbol();
        if !bits.len().is_multiple_of(k) {
            return Err(Error::IndivisibleLength {
                len: bits.len(),
                bits_per_symbol: k,
            });
        }
        bits.chunks_exact(k)
            .map(|chunk| BitWord::from_bits(chunk).map(|w| self.index_of_word(w.value())))
            .collect()
    }

    pub fn unpack_indices(&self, indices: &[usize]) -> Vec<u8> {
        let k = self.bits_per_symbol();
        indices
            .iter()
            .flat_map(|&i| {
                let w = self.word_of(i);
                (0..k).map(move |b| (w >> b) & 1)
            })
            .collect()
    }

    pub fn pack_bits(&self, bits: &[u8]) -> Result<Vec<Complex64>> {
        Ok(self
            .pack_indices(bits)?
            .into_iter()
            .map(|i| self.symbol(i))
            .collect())
    }

    pub fn unpack_bits(&self, symbols: &[Complex64]) -> Result<Vec<u8>> {
        let indices = symbols
            .iter()
            .map(|&s| self.index_of(s))
            .collect::<Result<Vec<_>>>()?;
        Ok(self.unpack_indices(&indices))
    }

    /// Number of differing bits between the words of two symbols.
    pub fn bit_distance(&self, a: usize, b: usize) -> u32 {
        (self.word_of(a) ^ self.word_of(b)).count_ones()
    }
}
