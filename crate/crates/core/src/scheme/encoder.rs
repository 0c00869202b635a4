use super::codebook::Codebook;
use crate::channel::Symbol;
use crate::error::{Error, Result};

/// Transmitter side: sends the current block's codeword and advances to the
/// next message whenever the receiver's one-bit feedback says it decoded.
#[derive(Debug, Clone)]
pub struct Encoder<I> {
    codebook: Codebook,
    k_bits: u32,
    messages: I,
    sent: Vec<u32>,
    block: u64,
    pos: usize,
    awaiting_feedback: bool,
}

impl<I: Iterator<Item = u32>> Encoder<I> {
    pub fn new(codebook: Codebook, k_bits: u32, messages: I) -> Self {
        Encoder {
            codebook,
            k_bits,
            messages,
            sent: Vec::new(),
            block: 0,
            pos: 0,
            awaiting_feedback: false,
        }
    }

    /// Messages drawn so far, one per started block.
    pub fn sent(&self) -> &[u32] {
        &self.sent
    }

    pub fn position(&self) -> usize {
        self.pos
    }

    /// Channel input for the next position.
    pub fn next_symbol(&mut self) -> Result<Symbol> {
        if self.awaiting_feedback {
            return Err(Error::Invariant("encoder advanced without feedback".into()));
        }
        if self.sent.len() as u64 == self.block {
            let m = self
                .messages
                .next()
                .ok_or_else(|| Error::param("message source exhausted"))?;
            if self.k_bits < 32 && m >> self.k_bits != 0 {
                return Err(Error::param(format!(
                    "message {m} does not fit in {} bits",
                    self.k_bits
                )));
            }
            self.sent.push(m);
        }
        let m = self.sent[self.block as usize];
        let x = self.codebook.symbol(self.block, m, self.pos);
        self.pos += 1;
        self.awaiting_feedback = true;
        Ok(x)
    }

    /// One feedback bit per channel use: `true` means the block just ended.
    pub fn feedback(&mut self, block_done: bool) {
        self.awaiting_feedback = false;
        if block_done {
            self.block += 1;
        }
    }
}
