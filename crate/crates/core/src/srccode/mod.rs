//! Sequential source coders that report unterminated (`L_S`) and terminated
//! (`L_T`) code lengths in bits.
//!
//! The feedback scheme needs two things from a coder: `L_T` never decreases
//! as symbols are appended, and for a fixed prefix the number of tails whose
//! `L_T` exceeds the prefix's `L_S` by at most `d` bits is at most `2^d`.

mod block;
mod kt;
mod lz78;

pub use block::{block_empirical_compress, BlockEmpiricalCoder};
pub use kt::{default_k_max, KtMixture, KT_MAX_TABLE};
pub use lz78::{
    elias_gamma_len, lz78_compress, lz78_lengths, lz78_max_gap, Lz78Coder, Lz78Summary,
};

use serde::{Deserialize, Serialize};

use crate::channel::{Alphabet, Symbol};

/// A causal source coder whose lengths are defined after every symbol.
///
/// A *branch* is a cheap overlay that extends the coder's current state
/// without touching it. Branches are how the decoder evaluates many message
/// hypotheses from a shared block-boundary state; the coder must not be fed
/// while branches taken from it are still in use.
pub trait SequentialCoder: Clone + Send + Sync {
    type Branch: Clone + Send;

    fn alphabet(&self) -> Alphabet;

    /// Number of symbols fed so far.
    fn fed(&self) -> usize;

    fn feed(&mut self, s: Symbol);

    fn unterminated_bits(&self) -> f64;

    fn terminated_bits(&self) -> f64;

    /// Upper bound on `L_T - L_S` over all inputs of length at most `n`.
    fn max_gap(&self, n: usize) -> f64;

    /// Whether lengths are whole bits, so thresholds may be floored.
    fn integral(&self) -> bool;

    fn branch(&self) -> Self::Branch;

    fn branch_feed(&self, br: &mut Self::Branch, s: Symbol);

    fn branch_terminated_bits(&self, br: &Self::Branch) -> f64;

    fn feed_all(&mut self, data: &[Symbol]) {
        for &s in data {
            self.feed(s);
        }
    }
}

/// Which coder length the scheme uses as its decoding metric.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Metric {
    #[default]
    Lz78,
    /// KT mixture; `k_max = None` picks [`default_k_max`] for the horizon.
    Kt { k_max: Option<usize> },
}

impl Metric {
    pub fn name(&self) -> &'static str {
        match self {
            Metric::Lz78 => "lz78",
            Metric::Kt { .. } => "kt",
        }
    }
}
