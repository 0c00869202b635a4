//! Two-pass block-to-variable coder over the empirical `k`-block distribution.

use std::collections::HashMap;

use crate::channel::{ceil_log2, Symbol, SymbolSeq};
use crate::error::{Error, Result};

/// Shannon code for the empirical distribution of the first `b = floor(n/k)`
/// blocks, with one extra bit per codeword so lengths are
/// `ceil(log2(b / count)) + 1`.
#[derive(Debug, Clone)]
pub struct BlockEmpiricalCoder {
    k: usize,
    blocks: u64,
    counts: HashMap<Vec<Symbol>, u64>,
}

impl BlockEmpiricalCoder {
    pub fn fit(z: &SymbolSeq, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::param("block length must be at least 1"));
        }
        if z.len() < k {
            return Err(Error::param(format!(
                "sequence of length {} shorter than block {k}",
                z.len()
            )));
        }
        let b = z.len() / k;
        let mut counts = HashMap::new();
        for block in z.blocks(k, b) {
            *counts.entry(block.to_vec()).or_insert(0) += 1;
        }
        Ok(BlockEmpiricalCoder {
            k,
            blocks: b as u64,
            counts,
        })
    }

    pub fn block_len(&self) -> usize {
        self.k
    }

    /// Codeword length for an observed block, `None` for an unseen one.
    pub fn codeword_len(&self, block: &[Symbol]) -> Option<u32> {
        self.counts
            .get(block)
            .map(|&c| ceil_log2(self.blocks.div_ceil(c)) + 1)
    }

    pub fn kraft_sum(&self) -> f64 {
        self.counts
            .keys()
            .map(|b| 2f64.powi(-(self.codeword_len(b).unwrap() as i32)))
            .sum()
    }

    pub fn total_bits(&self) -> u64 {
        self.counts
            .iter()
            .map(|(b, &c)| c * self.codeword_len(b).unwrap() as u64)
            .sum()
    }
}

/// Total bits the empirical block coder spends on the first `floor(n/k)` blocks.
pub fn block_empirical_compress(z: &SymbolSeq, k: usize) -> Result<u64> {
    Ok(BlockEmpiricalCoder::fit(z, k)?.total_bits())
}
