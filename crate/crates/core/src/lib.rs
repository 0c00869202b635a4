//! Rateless universal communication over modulo-additive channels whose noise
//! is an arbitrary individual sequence, plus the iterated finite-block
//! reference systems and bound evaluators used to judge it.

pub mod bounds;
pub mod channel;
pub mod error;
pub mod harness;
pub mod noise;
pub mod refsys;
pub mod scheme;
pub mod srccode;

pub use channel::{mod_add, mod_sub, Alphabet, ChannelSession, Symbol, SymbolSeq};
pub use error::{Error, Result};
pub use noise::{noise_generate, NoiseSpec};
