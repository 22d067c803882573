//! Slotted encoders. All three variants interleave information packets with
//! random linear coded packets; they differ only in where coded slots sit
//! and how far the coding window reaches back.

use super::{CodecError, CodeParams, CodedPacket, SlotPacket};
use crate::gf::{Field, Symbol};
use crate::rng::mix3;

/// Coding coefficient of coded packet `i` on information packet `j`.
///
/// Coefficients are a pure function of (seed, i, j), so a window edge moving
/// with feedback never changes the coefficient an index pair would get, and
/// the grouped encoder at c = 1 emits exactly the streaming encoder's output.
#[inline]
pub fn coefficient(field: &Field, seed: u64, coded_index: u64, info_index: u64) -> Symbol {
    (mix3(seed, coded_index, info_index) >> (64 - field.spec.m)) as Symbol
}

/// Lower-edge policy for the streaming coding window.
#[derive(Debug, Clone)]
pub enum WindowPolicy<'a> {
    /// Window always starts at the first information packet.
    FullHistory,
    /// `acked[i]` is the in-order delivered prefix known to the transmitter
    /// when coded packet i+1 is emitted; the window starts just above it.
    AckedPrefix(&'a [u64]),
}

fn combine(field: &Field, seed: u64, coded_index: u64, lo: u64, hi: u64, info: &[Vec<Symbol>]) -> CodedPacket {
    let width = info.first().map_or(0, Vec::len);
    let mut coefficients = Vec::with_capacity((hi + 1 - lo) as usize);
    let mut payload = vec![0 as Symbol; width];
    for j in lo..=hi {
        let w = coefficient(field, seed, coded_index, j);
        coefficients.push(w);
        let u = &info[(j - 1) as usize];
        for (acc, &sym) in payload.iter_mut().zip(u.iter()) {
            *acc = field.add(*acc, field.mul(w, sym));
        }
    }
    CodedPacket { index: coded_index, window: (lo, hi), coefficients, payload }
}

fn check_payload_widths(info: &[Vec<Symbol>]) -> Result<(), CodecError> {
    let width = info.first().map_or(0, Vec::len);
    for u in info {
        if u.len() != width {
            return Err(CodecError::PayloadLength { expected: width, got: u.len() });
        }
    }
    Ok(())
}

/// Streaming layout: slot t carries a coded packet iff t is a multiple of l;
/// coded packet i covers `[L, (l-1) i]`. The final interval is closed with
/// its coded packet even when partially filled, and `tail_coded` extra coded
/// packets are appended for rateless termination (0 keeps the plain layout).
pub fn encode_stream(
    info: &[Vec<Symbol>],
    l: u32,
    policy: WindowPolicy<'_>,
    field: &Field,
    seed: u64,
    tail_coded: u32,
) -> Result<Vec<SlotPacket>, CodecError> {
    CodeParams::Stream { l }.validate()?;
    check_payload_widths(info)?;
    let mut out = Vec::new();
    let mut sent = 0u64;
    let mut coded_index = 0u64;
    let emit_coded = |sent: u64, coded_index: u64, out: &mut Vec<SlotPacket>| {
        let lo = match policy {
            WindowPolicy::FullHistory => 1,
            WindowPolicy::AckedPrefix(acked) => {
                let prefix = acked
                    .get((coded_index - 1) as usize)
                    .copied()
                    .unwrap_or(0)
                    .min(sent.saturating_sub(1));
                prefix + 1
            }
        };
        out.push(SlotPacket::Coded(combine(field, seed, coded_index, lo, sent, info)));
    };
    while sent < info.len() as u64 {
        for _ in 0..(l - 1) {
            if sent == info.len() as u64 {
                break;
            }
            out.push(SlotPacket::Info { index: sent + 1, payload: info[sent as usize].clone() });
            sent += 1;
        }
        coded_index += 1;
        emit_coded(sent, coded_index, &mut out);
    }
    for _ in 0..tail_coded {
        coded_index += 1;
        emit_coded(sent, coded_index, &mut out);
    }
    Ok(out)
}

/// Grouped layout: every l_g-slot interval carries l_g - c information
/// packets followed by c coded packets, each covering the full history.
pub fn encode_group(
    info: &[Vec<Symbol>],
    lg: u32,
    c: u32,
    field: &Field,
    seed: u64,
) -> Result<Vec<SlotPacket>, CodecError> {
    CodeParams::Group { lg, c }.validate()?;
    check_payload_widths(info)?;
    let mut out = Vec::new();
    let mut sent = 0u64;
    let mut coded_index = 0u64;
    while sent < info.len() as u64 {
        for _ in 0..(lg - c) {
            if sent == info.len() as u64 {
                break;
            }
            out.push(SlotPacket::Info { index: sent + 1, payload: info[sent as usize].clone() });
            sent += 1;
        }
        for _ in 0..c {
            coded_index += 1;
            out.push(SlotPacket::Coded(combine(field, seed, coded_index, 1, sent, info)));
        }
    }
    Ok(out)
}

/// Systematic block layout: k information packets then n - k coded packets
/// per block; coded packets cover only their own block.
pub fn encode_block(
    info: &[Vec<Symbol>],
    n: u32,
    k: u32,
    field: &Field,
    seed: u64,
) -> Result<Vec<SlotPacket>, CodecError> {
    CodeParams::Block { n, k }.validate()?;
    check_payload_widths(info)?;
    if !info.len().is_multiple_of(k as usize) {
        return Err(CodecError::PartialBlock(info.len(), k));
    }
    let mut out = Vec::new();
    let blocks = info.len() as u64 / k as u64;
    let mut coded_index = 0u64;
    for b in 0..blocks {
        let lo = b * k as u64 + 1;
        let hi = (b + 1) * k as u64;
        for j in lo..=hi {
            out.push(SlotPacket::Info { index: j, payload: info[(j - 1) as usize].clone() });
        }
        for _ in 0..(n - k) {
            coded_index += 1;
            out.push(SlotPacket::Coded(combine(field, seed, coded_index, lo, hi, info)));
        }
    }
    Ok(out)
}
