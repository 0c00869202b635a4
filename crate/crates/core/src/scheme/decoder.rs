//! Receiver side of the rateless scheme.
//!
//! For the current block the decoder tracks every message hypothesis `m`.
//! Hypothesis `m` implies the noise tail `y - x(m)`, and its excess is
//! `L_T(prefix + tail) - L_S(prefix)`. The block ends at the first position
//! where some hypothesis's excess is within the threshold.
//!
//! Because `L_T` never decreases, the excess of a partially fed hypothesis is
//! a lower bound on its excess at any later position. A hypothesis is
//! therefore parked until the threshold first reaches that bound, and only
//! then fed further. This yields the same decisions as evaluating every
//! hypothesis at every position, at a fraction of the work.

use serde::{Deserialize, Serialize};

use super::codebook::Codebook;
use super::rates::{Threshold, ThresholdTable};
use crate::channel::Symbol;
use crate::srccode::SequentialCoder;

/// One decoded block, positions 1-based and inclusive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockRecord {
    pub start: usize,
    pub end: usize,
    pub decoded: u32,
    /// `L_S` of the decoded noise estimate before the block.
    pub l_s_prefix: f64,
    /// `L_T` of the winning hypothesis when the block ended.
    pub l_t_end: f64,
}

#[derive(Debug, Clone)]
struct Hypothesis<B> {
    branch: Option<B>,
    key: u64,
    fed: usize,
    excess: f64,
}

#[derive(Debug, Clone)]
pub struct Decoder<C: SequentialCoder> {
    codebook: Codebook,
    threshold: ThresholdTable,
    n: usize,
    messages: u32,
    coder: C,
    l_s_prefix: f64,
    block: u64,
    start: usize,
    received: Vec<Symbol>,
    hyps: Vec<Hypothesis<C::Branch>>,
    /// `due[u]`: hypotheses to revisit after `u` symbols of the block.
    due: Vec<Vec<u32>>,
    /// Highest `due` index touched in the current block.
    due_hi: usize,
    blocks: Vec<BlockRecord>,
    feeds: u64,
}

impl<C: SequentialCoder> Decoder<C> {
    /// `coder` must be fresh; it becomes the decoder's running estimate of the noise.
    pub fn new(codebook: Codebook, coder: C, n: usize, k_bits: u32, eps: f64) -> Self {
        let q = codebook.alphabet().size();
        let threshold =
            ThresholdTable::new(&Threshold::new(n, q, k_bits, eps, coder.integral()), n);
        let messages = 1u32 << k_bits;
        let mut d = Decoder {
            codebook,
            threshold,
            n,
            messages,
            coder,
            l_s_prefix: 0.0,
            block: 0,
            start: 0,
            received: Vec::with_capacity(n),
            hyps: Vec::new(),
            due: vec![Vec::new(); n + 1],
            due_hi: 0,
            blocks: Vec::new(),
            feeds: 0,
        };
        d.open_block();
        d
    }

    pub fn blocks(&self) -> &[BlockRecord] {
        &self.blocks
    }

    pub fn into_blocks(self) -> Vec<BlockRecord> {
        self.blocks
    }

    /// Start (0-based) of the block currently being received.
    pub fn block_start(&self) -> usize {
        self.start
    }

    /// Hypothesis symbol updates performed so far.
    pub fn work(&self) -> u64 {
        self.feeds
    }

    fn open_block(&mut self) {
        self.l_s_prefix = self.coder.unterminated_bits();
        let excess = self.coder.terminated_bits() - self.l_s_prefix;
        self.hyps.clear();
        self.hyps.extend((0..self.messages).map(|_| Hypothesis {
            branch: None,
            key: 0,
            fed: 0,
            excess,
        }));
        self.due[..=self.due_hi].iter_mut().for_each(Vec::clear);
        self.due_hi = 0;
        let u = self.threshold.first_pass(excess);
        if self.start + u <= self.n {
            self.due[u].extend(0..self.messages);
            self.due_hi = u;
        }
    }

    /// Accepts the next channel output; returns the decoded message if the
    /// current block ends here.
    pub fn receive(&mut self, y: Symbol) -> Option<u32> {
        self.received.push(y);
        let u = self.received.len() - self.start;
        let mut list = std::mem::take(&mut self.due[u]);
        list.sort_unstable();
        let winner = list.iter().copied().find(|&m| self.settle(m, u));
        // hand the allocation back for reuse
        list.clear();
        self.due[u] = list;
        let winner = winner?;
        self.close_block(winner, u);
        Some(winner)
    }

    /// Feeds hypothesis `m` until it either passes at `u` or its excess
    /// exceeds the threshold, in which case it is parked for later.
    fn settle(&mut self, m: u32, u: usize) -> bool {
        let alphabet = self.codebook.alphabet();
        let h = &mut self.hyps[m as usize];
        loop {
            if !self.threshold.passes(h.excess, u) {
                let next = self.threshold.first_pass(h.excess);
                debug_assert!(next > u);
                if self.start + next <= self.n {
                    self.due[next].push(m);
                    self.due_hi = self.due_hi.max(next);
                }
                return false;
            }
            if h.fed == u {
                return true;
            }
            if h.branch.is_none() {
                h.key = self.codebook.key(self.block, m);
                h.branch = Some(self.coder.branch());
            }
            let br = h.branch.as_mut().expect("created above");
            let t = self.start + h.fed;
            let z = alphabet.sub(self.received[t], self.codebook.symbol_at(h.key, t));
            self.coder.branch_feed(br, z);
            h.fed += 1;
            h.excess = self.coder.branch_terminated_bits(br) - self.l_s_prefix;
            self.feeds += 1;
        }
    }

    fn close_block(&mut self, m: u32, u: usize) {
        let l_t_end = self.l_s_prefix + self.hyps[m as usize].excess;
        self.hyps.clear();
        let alphabet = self.codebook.alphabet();
        for t in self.start..self.start + u {
            let z = alphabet.sub(self.received[t], self.codebook.symbol(self.block, m, t));
            self.coder.feed(z);
        }
        self.blocks.push(BlockRecord {
            start: self.start + 1,
            end: self.start + u,
            decoded: m,
            l_s_prefix: self.l_s_prefix,
            l_t_end,
        });
        self.block += 1;
        self.start += u;
        self.open_block();
    }
}

/// Reference decoder that evaluates every hypothesis at every position.
/// Quadratic in block length; used to cross-check [`Decoder`].
#[derive(Debug, Clone)]
pub struct EagerDecoder<C: SequentialCoder> {
    codebook: Codebook,
    threshold: Threshold,
    coder: C,
    block: u64,
    start: usize,
    received: Vec<Symbol>,
    blocks: Vec<BlockRecord>,
}

impl<C: SequentialCoder> EagerDecoder<C> {
    pub fn new(codebook: Codebook, coder: C, n: usize, k_bits: u32, eps: f64) -> Self {
        let q = codebook.alphabet().size();
        EagerDecoder {
            codebook,
            threshold: Threshold::new(n, q, k_bits, eps, coder.integral()),
            coder,
            block: 0,
            start: 0,
            received: Vec::new(),
            blocks: Vec::new(),
        }
    }

    pub fn blocks(&self) -> &[BlockRecord] {
        &self.blocks
    }

    pub fn receive(&mut self, y: Symbol, k_bits: u32) -> Option<u32> {
        self.received.push(y);
        let u = self.received.len() - self.start;
        let alphabet = self.codebook.alphabet();
        let l_s = self.coder.unterminated_bits();
        for m in 0..1u32 << k_bits {
            let mut br = self.coder.branch();
            for t in self.start..self.start + u {
                let z = alphabet.sub(self.received[t], self.codebook.symbol(self.block, m, t));
                self.coder.branch_feed(&mut br, z);
            }
            let l_t = self.coder.branch_terminated_bits(&br);
            if self.threshold.passes(l_t - l_s, u) {
                for t in self.start..self.start + u {
                    let z = alphabet.sub(self.received[t], self.codebook.symbol(self.block, m, t));
                    self.coder.feed(z);
                }
                self.blocks.push(BlockRecord {
                    start: self.start + 1,
                    end: self.start + u,
                    decoded: m,
                    l_s_prefix: l_s,
                    l_t_end: l_t,
                });
                self.block += 1;
                self.start += u;
                return Some(m);
            }
        }
        None
    }
}
