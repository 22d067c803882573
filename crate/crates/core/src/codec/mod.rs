//! Encoders and decoders: the low-delay streaming code, its grouped variant
//! and the classical systematic random linear block code used as baseline.

mod decode;
mod encode;

pub use decode::{
    BlockDecoder, BusyRecord, Delivery, DeliverySink, StreamDecoder, Undelivered,
};
pub use encode::{coefficient, encode_block, encode_group, encode_stream, WindowPolicy};

use crate::gf::Symbol;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum CodecError {
    #[error("invalid code shape: {0}")]
    BadShape(String),
    #[error("information stream length {0} is not a multiple of the block dimension {1}")]
    PartialBlock(usize, u32),
    #[error("payload length mismatch: expected {expected}, got {got}")]
    PayloadLength { expected: usize, got: usize },
}

/// Code shape. Stream: one coded packet after every l-1 information packets
/// (rate (l-1)/l). Group: c coded packets closing every l_g-slot interval
/// (rate 1 - c/l_g). Block: k information packets then n-k coded packets per
/// independent block (rate k/n).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case", deny_unknown_fields)]
pub enum CodeParams {
    Stream { l: u32 },
    Group { lg: u32, c: u32 },
    Block { n: u32, k: u32 },
}

impl CodeParams {
    pub fn validate(&self) -> Result<(), CodecError> {
        match *self {
            CodeParams::Stream { l } if l < 2 => {
                Err(CodecError::BadShape(format!("stream needs l >= 2, got {l}")))
            }
            CodeParams::Group { lg, c } if c < 1 || c >= lg => Err(CodecError::BadShape(format!(
                "group needs 1 <= c < l_g, got c={c}, l_g={lg}"
            ))),
            CodeParams::Block { n, k } if k < 1 || k >= n => Err(CodecError::BadShape(format!(
                "block needs 1 <= k < n, got k={k}, n={n}"
            ))),
            _ => Ok(()),
        }
    }

    /// Slots per repeating interval (block length for the block code).
    pub fn span(&self) -> u32 {
        match *self {
            CodeParams::Stream { l } => l,
            CodeParams::Group { lg, .. } => lg,
            CodeParams::Block { n, .. } => n,
        }
    }

    pub fn coded_per_span(&self) -> u32 {
        match *self {
            CodeParams::Stream { .. } => 1,
            CodeParams::Group { c, .. } => c,
            CodeParams::Block { n, k } => n - k,
        }
    }

    pub fn info_per_span(&self) -> u32 {
        self.span() - self.coded_per_span()
    }

    pub fn rate(&self) -> f64 {
        self.info_per_span() as f64 / self.span() as f64
    }

    /// Whether the slot at 1-based position `pos` within an interval carries
    /// a coded packet. Coded slots close the interval.
    pub fn is_coded_pos(&self, pos: u32) -> bool {
        pos > self.info_per_span()
    }
}

/// One coded packet: a random linear combination over the coding window
/// `[window.0, window.1]` of information packets (1-based, inclusive).
#[derive(Debug, Clone, PartialEq)]
pub struct CodedPacket {
    pub index: u64,
    pub window: (u64, u64),
    pub coefficients: Vec<Symbol>,
    pub payload: Vec<Symbol>,
}

impl CodedPacket {
    pub fn coefficient_for(&self, info_index: u64) -> Symbol {
        if info_index < self.window.0 || info_index > self.window.1 {
            return 0;
        }
        self.coefficients[(info_index - self.window.0) as usize]
    }
}

/// A slot's content on the wire.
#[derive(Debug, Clone, PartialEq)]
pub enum SlotPacket {
    Info { index: u64, payload: Vec<Symbol> },
    Coded(CodedPacket),
}

/// What the receiver observes in one slot. Erasure markers carry the slot's
/// identity; the slotted schedule makes that identity known to the receiver.
#[derive(Debug, Clone, PartialEq)]
pub enum SlotEvent {
    Received(SlotPacket),
    ErasedInfo { index: u64 },
    ErasedCoded,
}
