//! Iterated finite-block (IFB) reference systems: a fixed block encoder and
//! decoder applied to consecutive `k`-blocks of the noise, their average error
//! in iterative mapping, collapsed-noise statistics, and the prefix/suffix
//! code that is error-free on the test channel.

use std::collections::{BTreeMap, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::effective_rate;
use crate::channel::{Alphabet, Symbol, SymbolSeq};
use crate::error::{Error, Result};
use crate::noise::{unique_prefix_violation, NoiseSpec};
use crate::scheme::{message_stream, run_session, SchemeConfig, SessionLog};

/// Largest `q^k` for which a full decode table may be given.
pub const MAX_DECODE_TABLE: u64 = 1 << 24;

/// Map from `(k-d)`-symbol noise prefixes to their `d`-symbol suffixes.
pub type Registry = HashMap<Vec<Symbol>, Vec<Symbol>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BlockDecoder {
    /// `table[word_code(y)]` is the decoded message.
    Table { table: Vec<u32> },
    /// Reads the noise from the constant-input prefix, looks up the suffix
    /// noise and subtracts it from the message symbols.
    PrefixSuffix {
        d: usize,
        registry: Vec<(Vec<Symbol>, Vec<Symbol>)>,
    },
}

/// A block encoder/decoder pair of block length `k` with `M` messages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockCode {
    pub alphabet: Alphabet,
    pub k: usize,
    /// `encode[m]` is the codeword of message `m`.
    pub encode: Vec<Vec<Symbol>>,
    pub decoder: BlockDecoder,
    #[serde(skip)]
    lookup: Option<Registry>,
}

impl BlockCode {
    pub fn new(
        alphabet: Alphabet,
        k: usize,
        encode: Vec<Vec<Symbol>>,
        decoder: BlockDecoder,
    ) -> Result<Self> {
        let mut code = BlockCode {
            alphabet,
            k,
            encode,
            decoder,
            lookup: None,
        };
        code.validate()?;
        code.index();
        Ok(code)
    }

    /// Builds a table-decoded code from JSON `{"q", "k", "encode", "decode"}`.
    pub fn from_json(text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct Spec {
            q: u32,
            k: usize,
            encode: Vec<Vec<Symbol>>,
            decode: Vec<u32>,
        }
        let s: Spec = serde_json::from_str(text)?;
        Self::new(
            Alphabet::new(s.q)?,
            s.k,
            s.encode,
            BlockDecoder::Table { table: s.decode },
        )
    }

    fn index(&mut self) {
        if let BlockDecoder::PrefixSuffix { registry, .. } = &self.decoder {
            self.lookup = Some(registry.iter().cloned().collect());
        }
    }

    pub fn messages(&self) -> usize {
        self.encode.len()
    }

    /// `log2(M) / k` in bits per channel use.
    pub fn rate(&self) -> f64 {
        (self.messages() as f64).log2() / self.k as f64
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::param(m));
        if self.k == 0 || self.encode.is_empty() {
            return bad("block code needs k >= 1 and at least one message".into());
        }
        for (m, w) in self.encode.iter().enumerate() {
            if w.len() != self.k {
                return bad(format!(
                    "codeword {m} has length {}, expected {}",
                    w.len(),
                    self.k
                ));
            }
            if let Some(&s) = w.iter().find(|&&s| !self.alphabet.contains(s)) {
                return Err(Error::SymbolOutOfRange {
                    symbol: s as u32,
                    q: self.alphabet.size(),
                });
            }
        }
        let mut seen: HashMap<&[Symbol], usize> = HashMap::new();
        for (m, w) in self.encode.iter().enumerate() {
            if let Some(prev) = seen.insert(w, m) {
                return bad(format!(
                    "encoder not injective: messages {prev} and {m} share a codeword"
                ));
            }
        }
        match &self.decoder {
            BlockDecoder::Table { table } => {
                let words = (self.alphabet.size() as u64).checked_pow(self.k as u32);
                if words.is_none_or(|w| w > MAX_DECODE_TABLE) {
                    return bad(format!(
                        "decode table for q^k with k={} is too large",
                        self.k
                    ));
                }
                if table.len() as u64 != words.unwrap() {
                    return bad(format!(
                        "decode table has {} entries, need q^k = {}",
                        table.len(),
                        words.unwrap()
                    ));
                }
                if let Some(&m) = table.iter().find(|&&m| m as usize >= self.messages()) {
                    return bad(format!(
                        "decode table names message {m} of {}",
                        self.messages()
                    ));
                }
            }
            BlockDecoder::PrefixSuffix { d, registry } => {
                if *d == 0 || *d >= self.k {
                    return bad(format!("prefix/suffix code needs 1 <= d < k, got d={d}"));
                }
                if registry
                    .iter()
                    .any(|(p, s)| p.len() != self.k - d || s.len() != *d)
                {
                    return bad("registry entry has wrong prefix or suffix length".into());
                }
            }
        }
        Ok(())
    }

    /// Decodes one received block of length `k`.
    pub fn decode(&self, y: &[Symbol]) -> u32 {
        match &self.decoder {
            BlockDecoder::Table { table } => table[self.alphabet.word_code(y) as usize],
            BlockDecoder::PrefixSuffix { d, .. } => {
                let split = self.k - d;
                // the input prefix is all zero, so y's prefix is the noise prefix
                let Some(suffix) = self.lookup.as_ref().and_then(|r| r.get(&y[..split])) else {
                    return 0;
                };
                let a = self.alphabet;
                let msg: Vec<Symbol> = y[split..]
                    .iter()
                    .zip(suffix)
                    .map(|(&v, &z)| a.sub(v, z))
                    .collect();
                a.word_code(&msg) as u32
            }
        }
    }

    /// Whether message `m` survives noise block `z`.
    pub fn correct(&self, m: usize, z: &[Symbol]) -> bool {
        let a = self.alphabet;
        let y: Vec<Symbol> = self.encode[m]
            .iter()
            .zip(z)
            .map(|(&x, &n)| a.add(x, n))
            .collect();
        self.decode(&y) as usize == m
    }
}

/// Empirical distribution of the first `b` non-overlapping `k`-blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct CollapsedDist {
    pub k: usize,
    pub b: usize,
    /// Ordered so that entropy sums are reproducible bit for bit.
    pub counts: BTreeMap<Vec<Symbol>, u64>,
}

impl CollapsedDist {
    pub fn from_seq(z: &SymbolSeq, k: usize, b: usize) -> Result<Self> {
        check_blocks(z, k, b)?;
        let mut counts = BTreeMap::new();
        for block in z.blocks(k, b) {
            *counts.entry(block.to_vec()).or_insert(0) += 1;
        }
        Ok(CollapsedDist { k, b, counts })
    }

    pub fn probability(&self, block: &[Symbol]) -> f64 {
        self.counts
            .get(block)
            .map_or(0.0, |&c| c as f64 / self.b as f64)
    }

    pub fn entropy(&self) -> f64 {
        let b = self.b as f64;
        self.counts
            .values()
            .map(|&c| {
                let p = c as f64 / b;
                -p * p.log2()
            })
            .sum()
    }
}

fn check_blocks(z: &SymbolSeq, k: usize, b: usize) -> Result<()> {
    if k == 0 || b == 0 {
        return Err(Error::param("need k >= 1 and b >= 1"));
    }
    if b.checked_mul(k).is_none_or(|bk| bk > z.len()) {
        return Err(Error::param(format!(
            "b*k = {b}*{k} exceeds sequence length {}",
            z.len()
        )));
    }
    Ok(())
}

/// Entropy in bits of the collapsed noise `Z_{b,k}`.
pub fn collapsed_entropy(z: &SymbolSeq, k: usize, b: usize) -> Result<f64> {
    Ok(CollapsedDist::from_seq(z, k, b)?.entropy())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EvalMode {
    /// Independent uniform messages per block per trial.
    MonteCarlo { trials: usize, seed: u64 },
    /// Exact average over all message tuples.
    Exhaustive,
}

/// Average over blocks of the probability that a uniformly drawn message is
/// decoded wrongly when the code is applied to each of the first `b` blocks.
pub fn iterated_mapping_eval(
    code: &BlockCode,
    z: &SymbolSeq,
    b: usize,
    mode: EvalMode,
) -> Result<f64> {
    if z.alphabet() != code.alphabet {
        return Err(Error::AlphabetMismatch {
            left: z.alphabet().size(),
            right: code.alphabet.size(),
        });
    }
    check_blocks(z, code.k, b)?;
    let blocks: Vec<&[Symbol]> = z.blocks(code.k, b).collect();
    let m = code.messages();
    match mode {
        EvalMode::Exhaustive => {
            // Messages are independent across blocks, so the average over all
            // M^b tuples splits into a per-block average over M messages.
            let wrong: usize = blocks
                .iter()
                .map(|zb| (0..m).filter(|&msg| !code.correct(msg, zb)).count())
                .sum();
            Ok(wrong as f64 / (b * m) as f64)
        }
        EvalMode::MonteCarlo { trials, seed } => {
            if trials == 0 {
                return Err(Error::param(
                    "Monte Carlo evaluation needs at least one trial",
                ));
            }
            let wrong: usize = (0..trials)
                .into_par_iter()
                .map(|t| {
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    rng.set_stream(t as u64);
                    blocks
                        .iter()
                        .filter(|zb| !code.correct(rng.gen_range(0..m), zb))
                        .count()
                })
                .sum();
            Ok(wrong as f64 / (b * trials) as f64)
        }
    }
}

/// The zero-error code for a noise sequence with the unique-prefix property:
/// `k-d` zeros followed by `d` message symbols, `M = q^d`.
pub fn prefix_suffix_build(k: usize, d: usize, z: &SymbolSeq) -> Result<(BlockCode, Registry)> {
    if d == 0 || d >= k {
        return Err(Error::param(format!("need 1 <= d < k, got k={k}, d={d}")));
    }
    if let Some(block) = unique_prefix_violation(z, k, d) {
        return Err(Error::UniquePrefixViolation { block });
    }
    let a = z.alphabet();
    let mut registry = Registry::new();
    let mut ordered = Vec::new();
    for block in z.as_slice().chunks_exact(k) {
        let (p, s) = block.split_at(k - d);
        if !registry.contains_key(p) {
            registry.insert(p.to_vec(), s.to_vec());
            ordered.push((p.to_vec(), s.to_vec()));
        }
    }
    let messages = (a.size() as u64).pow(d as u32);
    let encode = (0..messages)
        .map(|m| {
            let mut w = vec![0; k - d];
            w.extend(a.word_from_code(m, d));
            w
        })
        .collect();
    let code = BlockCode::new(
        a,
        k,
        encode,
        BlockDecoder::PrefixSuffix {
            d,
            registry: ordered,
        },
    )?;
    Ok((code, registry))
}

/// Entropy of the first `i` blocks of the test-channel process, by
/// enumerating every reachable sequence with its probability.
pub fn testchannel_entropy_exact(
    alphabet: Alphabet,
    k: usize,
    d: usize,
    i_blocks: usize,
) -> Result<f64> {
    const BUDGET: u64 = 1 << 22;
    if d == 0 || d >= k || i_blocks == 0 {
        return Err(Error::param(format!(
            "need 1 <= d < k and i >= 1, got k={k}, d={d}, i={i_blocks}"
        )));
    }
    let q = alphabet.size() as u64;
    let total = q
        .checked_pow((k * i_blocks) as u32)
        .filter(|&t| t <= BUDGET);
    if total.is_none() {
        return Err(Error::param(format!(
            "q^(k i) beyond the enumeration budget {BUDGET}"
        )));
    }
    let prefixes = q.pow((k - d) as u32);
    let suffixes = q.pow(d as u32);
    let log_pre = ((k - d) as f64) * alphabet.log2();
    let log_suf = (d as f64) * alphabet.log2();

    // depth-first over blocks; `reg` holds the prefix -> suffix history
    fn walk(
        level: usize,
        i_blocks: usize,
        log_p: f64,
        reg: &mut HashMap<u64, u64>,
        dims: (u64, u64, f64, f64),
    ) -> f64 {
        if level == i_blocks {
            return -log_p.exp2() * log_p;
        }
        let (prefixes, suffixes, log_pre, log_suf) = dims;
        let mut h = 0.0;
        for p in 0..prefixes {
            if reg.contains_key(&p) {
                h += walk(level + 1, i_blocks, log_p - log_pre, reg, dims);
            } else {
                for s in 0..suffixes {
                    reg.insert(p, s);
                    h += walk(level + 1, i_blocks, log_p - log_pre - log_suf, reg, dims);
                    reg.remove(&p);
                }
            }
        }
        h
    }
    Ok(walk(
        0,
        i_blocks,
        0.0,
        &mut HashMap::new(),
        (prefixes, suffixes, log_pre, log_suf),
    ))
}

/// `i k H1 + min(i, q^(k-d)) k (H0 - H1)` with `H1 = ((k-d)/k) log2 q` and
/// `H0 = H1 + (d/(2k)) log2 q`.
pub fn testchannel_entropy_lower_bound(
    alphabet: Alphabet,
    k: usize,
    d: usize,
    i_blocks: usize,
) -> f64 {
    let lq = alphabet.log2();
    let (kf, df, i) = (k as f64, d as f64, i_blocks as f64);
    let h1 = (kf - df) / kf * lq;
    let h0 = h1 + df / (2.0 * kf) * lq;
    let distinct = (alphabet.size() as f64).powi((k - d) as i32);
    i * kf * h1 + i.min(distinct) * kf * (h0 - h1)
}

#[derive(Debug, Clone, Serialize)]
pub struct RedundancyReport {
    /// Effective rate of the zero-error prefix/suffix code, `(d/k) log2 q`.
    pub r_star_ifb: f64,
    /// Effective rate of one universal session on the same noise.
    pub r_star_universal: f64,
    pub gap: f64,
    pub session: SessionLog,
}

/// Compares the prefix/suffix reference with one universal session on a
/// test-channel draw of length `config.n`. A single draw says nothing about
/// the minimax gap; this reports what happened.
pub fn redundancy_experiment(
    k: usize,
    d: usize,
    config: &SchemeConfig,
) -> Result<RedundancyReport> {
    let spec = NoiseSpec::TestChannel { k, d, seed: None };
    let z = spec.generate(config.alphabet, config.n, config.seed)?;
    let (code, _) = prefix_suffix_build(k, d, &z.prefix(config.n / k * k))?;
    let session = run_session(config, &z, message_stream(config.seed, config.k_bits))?;
    let r_star_ifb = effective_rate(code.rate(), 0.0, k);
    let r_star_universal = effective_rate(session.r_act, config.epsilon, config.n);
    Ok(RedundancyReport {
        r_star_ifb,
        r_star_universal,
        gap: r_star_ifb - r_star_universal,
        session,
    })
}
