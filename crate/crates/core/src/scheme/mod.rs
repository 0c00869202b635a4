//! The rateless feedback scheme: random codebook from a shared seed, the
//! per-symbol termination test over all message hypotheses, and session
//! bookkeeping.

mod codebook;
mod decoder;
mod encoder;
mod rates;

pub use codebook::Codebook;
pub use decoder::{BlockRecord, Decoder, EagerDecoder};
pub use encoder::Encoder;
pub use rates::{
    choose_k, delta_n, lemma_k, r_emp, rate_floor, termination_check, KChoice, Threshold,
    ThresholdTable, K_CAP,
};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{Alphabet, ChannelSession, SymbolSeq};
use crate::error::{Error, Result};
use crate::srccode::{default_k_max, KtMixture, Lz78Coder, Metric, SequentialCoder};

/// Upper limit on `2^K * n`, the dominant factor in decoding work.
pub const WORK_BUDGET: u64 = 1 << 36;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemeConfig {
    pub n: usize,
    pub alphabet: Alphabet,
    /// Message bits per rateless block.
    pub k_bits: u32,
    pub epsilon: f64,
    pub seed: u64,
    #[serde(default)]
    pub metric: Metric,
    #[serde(default = "default_cap")]
    pub k_cap: u32,
}

fn default_cap() -> u32 {
    K_CAP
}

impl SchemeConfig {
    pub fn new(
        n: usize,
        alphabet: Alphabet,
        k_bits: u32,
        epsilon: f64,
        seed: u64,
        metric: Metric,
    ) -> Self {
        SchemeConfig {
            n,
            alphabet,
            k_bits,
            epsilon,
            seed,
            metric,
            k_cap: K_CAP,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::param("horizon n must be at least 1"));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(Error::param(format!(
                "epsilon {} outside (0, 1)",
                self.epsilon
            )));
        }
        if self.k_cap == 0 || self.k_cap > 31 {
            return Err(Error::param(format!("K cap {} outside 1..=31", self.k_cap)));
        }
        if self.k_bits == 0 || self.k_bits > self.k_cap {
            return Err(Error::param(format!(
                "K={} outside 1..={}",
                self.k_bits, self.k_cap
            )));
        }
        let work = (self.n as u64).saturating_mul(1u64 << self.k_bits);
        if work > WORK_BUDGET {
            return Err(Error::param(format!(
                "2^K * n = 2^{} * {} exceeds the work budget 2^36",
                self.k_bits, self.n
            )));
        }
        if let Metric::Kt { k_max: Some(k) } = self.metric {
            KtMixture::new(self.alphabet, k)?;
        }
        Ok(())
    }

    /// The `k_max` a KT metric would use.
    pub fn kt_k_max(&self) -> Option<usize> {
        match self.metric {
            Metric::Lz78 => None,
            Metric::Kt { k_max } => {
                Some(k_max.unwrap_or_else(|| default_k_max(self.n, self.alphabet)))
            }
        }
    }

    /// Bound on `L_T - L_S` of the metric over the horizon.
    pub fn max_gap(&self) -> f64 {
        match self.metric {
            Metric::Lz78 => crate::srccode::lz78_max_gap(self.n) as f64,
            Metric::Kt { .. } => 0.0,
        }
    }

    pub fn codebook(&self) -> Codebook {
        Codebook::new(self.seed, self.alphabet)
    }
}

/// Uniform `k_bits`-bit messages, independent of the codebook stream.
pub fn message_stream(seed: u64, k_bits: u32) -> impl Iterator<Item = u32> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x6d65_7373_6167_6573);
    std::iter::repeat_with(move || rng.gen_range(0..1u32 << k_bits))
}

/// Everything observable about one session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionLog {
    pub n: usize,
    pub q: u16,
    pub k_bits: u32,
    pub epsilon: f64,
    pub seed: u64,
    pub metric: Metric,
    pub blocks: Vec<BlockRecord>,
    /// Message of each decoded block, in order.
    pub sent: Vec<u32>,
    /// First position (1-based) of the block left undecoded at the horizon, if any.
    pub tail_start: Option<usize>,
    pub decoded_blocks: usize,
    pub bits_decoded: u64,
    pub r_act: f64,
    pub error: bool,
    /// `L_T` of the true noise under the metric.
    pub l_t_noise: f64,
    pub r_emp: f64,
    pub rate_floor: f64,
    /// Hypothesis symbol updates the decoder performed.
    pub decoder_work: u64,
}

impl SessionLog {
    /// True when an error-free session fell below its guaranteed rate.
    pub fn floor_violated(&self) -> bool {
        !self.error && self.r_act < self.rate_floor
    }
}

/// Simulates encoder, channel, decoder and the one-bit feedback for `n` uses.
pub fn run_session<I>(config: &SchemeConfig, noise: &SymbolSeq, messages: I) -> Result<SessionLog>
where
    I: IntoIterator<Item = u32>,
{
    config.validate()?;
    if noise.alphabet() != config.alphabet {
        return Err(Error::AlphabetMismatch {
            left: noise.alphabet().size(),
            right: config.alphabet.size(),
        });
    }
    if noise.len() != config.n {
        return Err(Error::LengthMismatch {
            left: noise.len(),
            right: config.n,
        });
    }
    match config.kt_k_max() {
        None => run_with(
            config,
            noise,
            Lz78Coder::new(config.alphabet),
            messages.into_iter(),
        ),
        Some(k) => run_with(
            config,
            noise,
            KtMixture::new(config.alphabet, k)?,
            messages.into_iter(),
        ),
    }
}

fn run_with<C, I>(
    config: &SchemeConfig,
    noise: &SymbolSeq,
    coder: C,
    messages: I,
) -> Result<SessionLog>
where
    C: SequentialCoder,
    I: Iterator<Item = u32>,
{
    let n = config.n;
    let mut truth = coder.clone();
    truth.feed_all(noise.as_slice());
    let l_t_noise = truth.terminated_bits();

    let codebook = config.codebook();
    let mut encoder = Encoder::new(codebook, config.k_bits, messages);
    let mut decoder = Decoder::new(codebook, coder, n, config.k_bits, config.epsilon);
    let mut channel = ChannelSession::new(noise.clone());
    for _ in 0..n {
        let x = encoder.next_symbol()?;
        let y = channel.transmit(x)?;
        let done = decoder.receive(y).is_some();
        encoder.feedback(done);
    }
    let tail_start = (decoder.block_start() < n).then(|| decoder.block_start() + 1);
    let decoder_work = decoder.work();
    let blocks = decoder.into_blocks();
    let b = blocks.len();
    let sent = encoder.sent()[..b].to_vec();
    let error = blocks.iter().zip(&sent).any(|(blk, &m)| blk.decoded != m);
    let q = config.alphabet.size();
    let bits = b as u64 * config.k_bits as u64;
    Ok(SessionLog {
        n,
        q,
        k_bits: config.k_bits,
        epsilon: config.epsilon,
        seed: config.seed,
        metric: config.metric,
        blocks,
        sent,
        tail_start,
        decoded_blocks: b,
        bits_decoded: bits,
        r_act: bits as f64 / n as f64,
        error,
        l_t_noise,
        r_emp: r_emp(l_t_noise, n, q),
        rate_floor: rate_floor(
            l_t_noise,
            n,
            q,
            config.k_bits,
            config.epsilon,
            config.max_gap(),
        ),
        decoder_work,
    })
}
