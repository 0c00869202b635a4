//! Alphabet arithmetic, symbol sequences and the modulo-additive channel
//! `y = x + z (mod q)`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One channel symbol. Alphabets are capped at 256 letters, so a byte suffices.
pub type Symbol = u8;

/// A finite alphabet `{0, .., q-1}` with `2 <= q <= 256`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u16", into = "u16")]
pub struct Alphabet {
    q: u16,
}

impl Alphabet {
    pub const MAX_SIZE: u16 = 256;

    pub fn new(q: u32) -> Result<Self> {
        if (2..=Self::MAX_SIZE as u32).contains(&q) {
            Ok(Alphabet { q: q as u16 })
        } else {
            Err(Error::InvalidAlphabet(q))
        }
    }

    pub const fn binary() -> Self {
        Alphabet { q: 2 }
    }

    #[inline]
    pub fn size(self) -> u16 {
        self.q
    }

    /// `log2 q`, the capacity of the noiseless channel in bits per use.
    #[inline]
    pub fn log2(self) -> f64 {
        (self.q as f64).log2()
    }

    /// Bits needed to write one raw symbol, `ceil(log2 q)`.
    #[inline]
    pub fn symbol_bits(self) -> u32 {
        ceil_log2(self.q as u64)
    }

    #[inline]
    pub fn contains(self, s: Symbol) -> bool {
        (s as u16) < self.q
    }

    pub fn check(self, s: u32) -> Result<Symbol> {
        if s < self.q as u32 {
            Ok(s as Symbol)
        } else {
            Err(Error::SymbolOutOfRange {
                symbol: s,
                q: self.q,
            })
        }
    }

    /// Operands must already be reduced.
    #[inline]
    pub fn add(self, a: Symbol, b: Symbol) -> Symbol {
        let s = a as u16 + b as u16;
        (if s >= self.q { s - self.q } else { s }) as Symbol
    }

    #[inline]
    pub fn sub(self, a: Symbol, b: Symbol) -> Symbol {
        let s = a as u16 + self.q - b as u16;
        (if s >= self.q { s - self.q } else { s }) as Symbol
    }

    /// Base-q code of a word, most significant symbol first.
    pub fn word_code(self, word: &[Symbol]) -> u64 {
        word.iter()
            .fold(0u64, |acc, &s| acc * self.q as u64 + s as u64)
    }

    /// Inverse of [`Alphabet::word_code`] for a word of length `len`.
    pub fn word_from_code(self, mut code: u64, len: usize) -> Vec<Symbol> {
        let mut out = vec![0; len];
        for slot in out.iter_mut().rev() {
            *slot = (code % self.q as u64) as Symbol;
            code /= self.q as u64;
        }
        out
    }
}

impl TryFrom<u16> for Alphabet {
    type Error = Error;

    fn try_from(q: u16) -> Result<Self> {
        Alphabet::new(q as u32)
    }
}

impl From<Alphabet> for u16 {
    fn from(a: Alphabet) -> u16 {
        a.q
    }
}

impl fmt::Display for Alphabet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Z{}", self.q)
    }
}

/// `ceil(log2 x)` for `x >= 1`; 0 for `x <= 1`.
#[inline]
pub fn ceil_log2(x: u64) -> u32 {
    if x <= 1 {
        0
    } else {
        64 - (x - 1).leading_zeros()
    }
}

/// A finite sequence over an alphabet; carries channel inputs, outputs and noise.
#[derive(Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SymbolSeq {
    alphabet: Alphabet,
    data: Vec<Symbol>,
}

impl SymbolSeq {
    pub fn new(alphabet: Alphabet, data: Vec<Symbol>) -> Result<Self> {
        if let Some(&bad) = data.iter().find(|&&s| !alphabet.contains(s)) {
            return Err(Error::SymbolOutOfRange {
                symbol: bad as u32,
                q: alphabet.size(),
            });
        }
        Ok(SymbolSeq { alphabet, data })
    }

    pub fn zeros(alphabet: Alphabet, n: usize) -> Self {
        SymbolSeq {
            alphabet,
            data: vec![0; n],
        }
    }

    pub fn empty(alphabet: Alphabet) -> Self {
        SymbolSeq {
            alphabet,
            data: Vec::new(),
        }
    }

    #[inline]
    pub fn alphabet(&self) -> Alphabet {
        self.alphabet
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn as_slice(&self) -> &[Symbol] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<Symbol> {
        self.data
    }

    pub fn push(&mut self, s: Symbol) -> Result<()> {
        self.alphabet.check(s as u32)?;
        self.data.push(s);
        Ok(())
    }

    /// The first `b` complete blocks of length `k`.
    pub fn blocks(&self, k: usize, b: usize) -> impl Iterator<Item = &[Symbol]> {
        self.data.chunks_exact(k.max(1)).take(b)
    }

    pub fn prefix(&self, len: usize) -> SymbolSeq {
        SymbolSeq {
            alphabet: self.alphabet,
            data: self.data[..len.min(self.data.len())].to_vec(),
        }
    }

    fn check_compatible(&self, other: &SymbolSeq) -> Result<()> {
        if self.alphabet != other.alphabet {
            return Err(Error::AlphabetMismatch {
                left: self.alphabet.size(),
                right: other.alphabet.size(),
            });
        }
        if self.len() != other.len() {
            return Err(Error::LengthMismatch {
                left: self.len(),
                right: other.len(),
            });
        }
        Ok(())
    }
}

impl fmt::Debug for SymbolSeq {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SymbolSeq[{}; {}](", self.alphabet, self.len())?;
        for s in self.data.iter().take(32) {
            write!(f, "{s},")?;
        }
        if self.len() > 32 {
            write!(f, "..")?;
        }
        write!(f, ")")
    }
}

/// Elementwise `(x_i + z_i) mod q`.
pub fn mod_add(x: &SymbolSeq, z: &SymbolSeq) -> Result<SymbolSeq> {
    x.check_compatible(z)?;
    let a = x.alphabet;
    let data = x
        .data
        .iter()
        .zip(&z.data)
        .map(|(&u, &v)| a.add(u, v))
        .collect();
    Ok(SymbolSeq { alphabet: a, data })
}

/// Elementwise `(y_i - x_i) mod q`; recovers the noise from output and input.
pub fn mod_sub(y: &SymbolSeq, x: &SymbolSeq) -> Result<SymbolSeq> {
    y.check_compatible(x)?;
    let a = y.alphabet;
    let data = y
        .data
        .iter()
        .zip(&x.data)
        .map(|(&u, &v)| a.sub(u, v))
        .collect();
    Ok(SymbolSeq { alphabet: a, data })
}

/// A causal modulo-additive channel driven by a fixed noise sequence.
///
/// Each call to [`ChannelSession::transmit`] consumes one noise symbol, so the
/// output at time `i` depends only on inputs up to `i`.
#[derive(Debug, Clone)]
pub struct ChannelSession {
    noise: SymbolSeq,
    cursor: usize,
}

impl ChannelSession {
    pub fn new(noise: SymbolSeq) -> Self {
        ChannelSession { noise, cursor: 0 }
    }

    pub fn alphabet(&self) -> Alphabet {
        self.noise.alphabet
    }

    pub fn horizon(&self) -> usize {
        self.noise.len()
    }

    pub fn cursor(&self) -> usize {
        self.cursor
    }

    pub fn remaining(&self) -> usize {
        self.noise.len() - self.cursor
    }

    pub fn transmit(&mut self, x: Symbol) -> Result<Symbol> {
        let a = self.noise.alphabet;
        a.check(x as u32)?;
        let z = *self
            .noise
            .data
            .get(self.cursor)
            .ok_or(Error::ChannelExhausted(self.cursor))?;
        self.cursor += 1;
        Ok(a.add(x, z))
    }
}
