//! Mixture over block lengths of Krichevsky-Trofimov block estimators.
//!
//! `P_k` treats `z` as a sequence of `k`-symbol super-letters (blocks aligned
//! at position 0) and assigns the Dirichlet(1/2) mixture probability. A
//! partial trailing block gets the exact marginal, which only needs counts of
//! completed blocks sharing its prefix. The mixture is
//! `P_Z = sum_{k=1}^{k_max} 2^-k P_k`, a sub-probability, and both lengths
//! equal `-log2 P_Z`.

use super::SequentialCoder;
use crate::channel::{Alphabet, Symbol};
use crate::error::{Error, Result};

/// Largest `q^k_max` for which count tables are allocated.
pub const KT_MAX_TABLE: u64 = 1 << 22;

const DEFAULT_K_CAP: usize = 12;

/// `min(floor(log_q n), 12)`, at least 1.
pub fn default_k_max(n: usize, alphabet: Alphabet) -> usize {
    let q = alphabet.size() as u64;
    let mut k = 0;
    let mut p = q;
    while p <= n as u64 && k < DEFAULT_K_CAP {
        k += 1;
        p = p.saturating_mul(q);
    }
    k.max(1)
}

#[derive(Debug, Clone)]
struct Level {
    /// `counts[d][c]`: completed blocks whose first `d` symbols have base-q code `c`.
    /// `counts[0]` is unused; the root count is `blocks`.
    counts: Vec<Vec<u32>>,
    blocks: u64,
    pos: usize,
    code: u64,
    log_p: f64,
}

#[derive(Debug, Clone)]
pub struct KtMixture {
    alphabet: Alphabet,
    k_max: usize,
    /// `half_pow[j] = q^j / 2`.
    half_pow: Vec<f64>,
    pow: Vec<u64>,
    levels: Vec<Level>,
    fed: usize,
}

#[derive(Debug, Clone, Copy)]
struct BranchLevel {
    blocks: u64,
    pos: usize,
    code: u64,
    log_p: f64,
}

/// Overlay on a [`KtMixture`]: per-level cursors plus the blocks completed
/// since the branch point.
#[derive(Debug, Clone)]
pub struct KtBranch {
    base_fed: usize,
    levels: Vec<BranchLevel>,
    extra: Vec<Vec<u64>>,
}

impl KtMixture {
    pub fn new(alphabet: Alphabet, k_max: usize) -> Result<Self> {
        if k_max == 0 {
            return Err(Error::param("k_max must be at least 1"));
        }
        let q = alphabet.size() as u64;
        let pow: Vec<u64> = (0..=k_max)
            .map(|j| q.checked_pow(j as u32).filter(|&p| p <= KT_MAX_TABLE))
            .collect::<Option<_>>()
            .ok_or_else(|| {
                Error::param(format!(
                    "q^k_max = {q}^{k_max} exceeds the table limit {KT_MAX_TABLE}"
                ))
            })?;
        let half_pow = pow.iter().map(|&p| p as f64 / 2.0).collect();
        let levels = (1..=k_max)
            .map(|k| Level {
                counts: (0..=k)
                    .map(|d| {
                        if d == 0 {
                            Vec::new()
                        } else {
                            vec![0; pow[d] as usize]
                        }
                    })
                    .collect(),
                blocks: 0,
                pos: 0,
                code: 0,
                log_p: 0.0,
            })
            .collect();
        Ok(KtMixture {
            alphabet,
            k_max,
            half_pow,
            pow,
            levels,
            fed: 0,
        })
    }

    /// Mixture with the default `k_max` for horizon `n`.
    pub fn for_horizon(alphabet: Alphabet, n: usize) -> Result<Self> {
        Self::new(alphabet, default_k_max(n, alphabet))
    }

    pub fn k_max(&self) -> usize {
        self.k_max
    }

    /// `log2 P_k` of the symbols fed so far.
    pub fn log2_pk(&self, k: usize) -> f64 {
        self.levels[k - 1].log_p
    }

    /// `-log2 P_Z`.
    pub fn code_length(&self) -> f64 {
        mixture_length(self.levels.iter().map(|l| l.log_p))
    }

    #[inline]
    fn conditional(&self, k: usize, pos: usize, n_node: u64, n_child: u64) -> f64 {
        ((n_child as f64 + self.half_pow[k - pos - 1]) / (n_node as f64 + self.half_pow[k - pos]))
            .log2()
    }
}

/// `-log2 sum_k 2^{-k + log_p[k]}`, computed stably.
fn mixture_length(log_p: impl Iterator<Item = f64> + Clone) -> f64 {
    let exps = log_p.enumerate().map(|(i, lp)| lp - (i + 1) as f64);
    let top = exps.clone().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = exps.map(|e| (e - top).exp2()).sum();
    -(top + sum.log2())
}

impl SequentialCoder for KtMixture {
    type Branch = KtBranch;

    fn alphabet(&self) -> Alphabet {
        self.alphabet
    }

    fn fed(&self) -> usize {
        self.fed
    }

    fn feed(&mut self, s: Symbol) {
        debug_assert!(self.alphabet.contains(s));
        let q = self.alphabet.size() as u64;
        self.fed += 1;
        for k in 1..=self.k_max {
            let lv = &self.levels[k - 1];
            let pos = lv.pos;
            let child = lv.code * q + s as u64;
            let n_node = if pos == 0 {
                lv.blocks
            } else {
                lv.counts[pos][lv.code as usize] as u64
            };
            let n_child = lv.counts[pos + 1][child as usize] as u64;
            let step = self.conditional(k, pos, n_node, n_child);
            let pow = &self.pow;
            let lv = &mut self.levels[k - 1];
            lv.log_p += step;
            if pos + 1 == k {
                for d in 1..=k {
                    lv.counts[d][(child / pow[k - d]) as usize] += 1;
                }
                lv.blocks += 1;
                lv.pos = 0;
                lv.code = 0;
            } else {
                lv.pos += 1;
                lv.code = child;
            }
        }
    }

    fn unterminated_bits(&self) -> f64 {
        self.code_length()
    }

    fn terminated_bits(&self) -> f64 {
        self.code_length()
    }

    fn max_gap(&self, _n: usize) -> f64 {
        0.0
    }

    fn integral(&self) -> bool {
        false
    }

    fn branch(&self) -> KtBranch {
        KtBranch {
            base_fed: self.fed,
            levels: self
                .levels
                .iter()
                .map(|l| BranchLevel {
                    blocks: l.blocks,
                    pos: l.pos,
                    code: l.code,
                    log_p: l.log_p,
                })
                .collect(),
            extra: vec![Vec::new(); self.k_max],
        }
    }

    fn branch_feed(&self, br: &mut KtBranch, s: Symbol) {
        debug_assert_eq!(br.base_fed, self.fed, "coder moved under a live branch");
        let q = self.alphabet.size() as u64;
        for k in 1..=self.k_max {
            let base = &self.levels[k - 1];
            let extra = &br.extra[k - 1];
            let lv = &mut br.levels[k - 1];
            let pos = lv.pos;
            let child = lv.code * q + s as u64;
            // counts of completed blocks (base plus overlay) with a given prefix
            let count = |d: usize, c: u64| -> u64 {
                let shift = self.pow[k - d];
                base.counts[d][c as usize] as u64
                    + extra.iter().filter(|&&b| b / shift == c).count() as u64
            };
            let n_node = if pos == 0 {
                lv.blocks
            } else {
                count(pos, lv.code)
            };
            let n_child = count(pos + 1, child);
            lv.log_p += self.conditional(k, pos, n_node, n_child);
            if pos + 1 == k {
                lv.blocks += 1;
                lv.pos = 0;
                lv.code = 0;
                br.extra[k - 1].push(child);
            } else {
                lv.pos += 1;
                lv.code = child;
            }
        }
    }

    fn branch_terminated_bits(&self, br: &KtBranch) -> f64 {
        mixture_length(br.levels.iter().map(|l| l.log_p))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn bin() -> Alphabet {
        Alphabet::binary()
    }

    fn kt(k_max: usize, data: &[u8]) -> KtMixture {
        let mut c = KtMixture::new(bin(), k_max).unwrap();
        c.feed_all(data);
        c
    }

    #[test]
    fn worked_values() {
        assert_abs_diff_eq!(kt(1, &[0]).log2_pk(1), -1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(
            kt(1, &[0, 0]).log2_pk(1),
            (3.0f64 / 8.0).log2(),
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            kt(2, &[0]).code_length(),
            -(3.0f64 / 8.0).log2(),
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(kt(1, &[0]).code_length(), 2.0, epsilon = 1e-12);
        for k in 1..=6 {
            let expect = -(1.0 - 2f64.powi(-(k as i32))).log2();
            assert_abs_diff_eq!(kt(k, &[]).code_length(), expect, epsilon = 1e-12);
        }
    }

    #[test]
    fn default_k_max_values() {
        assert_eq!(default_k_max(1, bin()), 1);
        assert_eq!(default_k_max(4096, bin()), 12);
        assert_eq!(default_k_max(1 << 20, bin()), 12);
        assert_eq!(default_k_max(1000, bin()), 9);
        assert_eq!(default_k_max(1 << 15, Alphabet::new(4).unwrap()), 7);
        assert_eq!(default_k_max(100, Alphabet::new(256).unwrap()), 1);
    }

    #[test]
    fn oversized_table_rejected() {
        assert!(KtMixture::new(Alphabet::new(256).unwrap(), 3).is_err());
        assert!(KtMixture::new(bin(), 0).is_err());
    }

    #[test]
    fn branch_matches_fresh_feed() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for q in [2u32, 3, 5] {
            let a = Alphabet::new(q).unwrap();
            for _ in 0..30 {
                let head: Vec<u8> = (0..rng.gen_range(0..60))
                    .map(|_| rng.gen_range(0..q) as u8)
                    .collect();
                let tail: Vec<u8> = (0..rng.gen_range(0..40))
                    .map(|_| rng.gen_range(0..q) as u8)
                    .collect();
                let mut base = KtMixture::new(a, 4).unwrap();
                base.feed_all(&head);
                let mut full = base.clone();
                let mut br = base.branch();
                for &s in &tail {
                    full.feed(s);
                    base.branch_feed(&mut br, s);
                    assert_abs_diff_eq!(
                        base.branch_terminated_bits(&br),
                        full.terminated_bits(),
                        epsilon = 1e-9
                    );
                }
            }
        }
    }

    #[test]
    fn monotone_lengths() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut c = KtMixture::new(bin(), 6).unwrap();
        let mut prev = c.code_length();
        for _ in 0..2000 {
            c.feed(rng.gen_range(0..2));
            assert!(c.code_length() >= prev - 1e-9);
            prev = c.code_length();
        }
    }
}
