use serde::{Deserialize, Serialize};

use crate::channel::{Alphabet, Symbol};

/// A random codebook derived from a shared seed.
///
/// The symbol for message `m` of block `b` at absolute channel position `t`
/// is a keyed hash of `(seed, b, m, t)` reduced to the alphabet, so encoder
/// and decoder agree without storing `2^K` codewords.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Codebook {
    seed: u64,
    alphabet: Alphabet,
}

#[inline]
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

impl Codebook {
    pub fn new(seed: u64, alphabet: Alphabet) -> Self {
        Codebook { seed, alphabet }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn alphabet(&self) -> Alphabet {
        self.alphabet
    }

    /// Key of one codeword; the hot loop of the decoder caches it.
    #[inline]
    pub fn key(&self, block: u64, message: u32) -> u64 {
        let h = mix(mix(self.seed.wrapping_add(GOLDEN)) ^ block.wrapping_mul(GOLDEN));
        mix(h ^ (message as u64).wrapping_add(GOLDEN).rotate_left(17))
    }

    /// Codeword symbol at position `t` for a key from [`Codebook::key`].
    #[inline]
    pub fn symbol_at(&self, key: u64, t: usize) -> Symbol {
        let hi = mix(key ^ (t as u64).wrapping_mul(0xd6e8_feb8_6659_fd93)) >> 32;
        // multiply-shift reduction to [0, q)
        ((hi * self.alphabet.size() as u64) >> 32) as Symbol
    }

    #[inline]
    pub fn symbol(&self, block: u64, message: u32, t: usize) -> Symbol {
        self.symbol_at(self.key(block, message), t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_seed_sensitive() {
        let a = Codebook::new(1, Alphabet::binary());
        let b = Codebook::new(1, Alphabet::binary());
        let c = Codebook::new(2, Alphabet::binary());
        let wa: Vec<u8> = (0..256).map(|t| a.symbol(3, 5, t)).collect();
        let wb: Vec<u8> = (0..256).map(|t| b.symbol(3, 5, t)).collect();
        let wc: Vec<u8> = (0..256).map(|t| c.symbol(3, 5, t)).collect();
        assert_eq!(wa, wb);
        assert_ne!(wa, wc);
    }

    #[test]
    fn marginals_roughly_uniform() {
        for q in [2u32, 3, 5, 256] {
            let cb = Codebook::new(77, Alphabet::new(q).unwrap());
            let draws = 200_000usize;
            let mut hist = vec![0usize; q as usize];
            for i in 0..draws {
                hist[cb.symbol((i % 7) as u64, (i / 7 % 1000) as u32, i) as usize] += 1;
            }
            let e = draws as f64 / q as f64;
            let chi2: f64 = hist.iter().map(|&o| (o as f64 - e).powi(2) / e).sum();
            // far beyond the 99.9% quantile for q-1 degrees of freedom
            let dof = (q - 1) as f64;
            assert!(
                chi2 < dof + 6.0 * (2.0 * dof).sqrt() + 20.0,
                "q={q} chi2={chi2}"
            );
        }
    }
}
