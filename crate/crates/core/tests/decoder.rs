//! Decoder behaviour against hand-worked erasure scenarios and randomized
//! end-to-end round trips.

use lowdelay::channel::{apply, ChannelModel};
use lowdelay::codec::{
    encode_stream, CodeParams, CodedPacket, Delivery, SlotEvent, SlotPacket, StreamDecoder,
    WindowPolicy,
};
use lowdelay::gf::{Field, FieldSpec, Symbol};
use lowdelay::rng::Rng;
use std::sync::Arc;

fn ideal(l: u32) -> StreamDecoder {
    StreamDecoder::new_ideal(CodeParams::Stream { l }).record_busy_log()
}

fn coded_marker(index: u64, hi: u64) -> SlotEvent {
    SlotEvent::Received(SlotPacket::Coded(CodedPacket {
        index,
        window: (1, hi),
        coefficients: Vec::new(),
        payload: Vec::new(),
    }))
}

fn info_marker(index: u64) -> SlotEvent {
    SlotEvent::Received(SlotPacket::Info { index, payload: Vec::new() })
}

#[test]
fn erasure_free_run_has_zero_delay() {
    let mut dec = ideal(4);
    let mut out: Vec<Delivery> = Vec::new();
    let mut info = 0u64;
    for slot in 1..=12u64 {
        if slot % 4 == 0 {
            dec.ingest(slot, coded_marker(slot / 4, info), &mut out);
        } else {
            info += 1;
            dec.ingest(slot, info_marker(info), &mut out);
        }
    }
    assert_eq!(out.len(), 9);
    assert!(out.iter().all(|d| d.delay() == 0));
    assert_eq!(dec.finish(12), Default::default());
    // Three idle intervals, no busy periods.
    assert_eq!(dec.busy_hist[0], 3);
    assert_eq!(dec.busy_hist.iter().skip(1).sum::<u64>(), 0);
}

#[test]
fn single_erasure_recovered_at_next_coded_slot() {
    // l=4: u1 erased, u2 u3 received, c1 received -> everything delivered at
    // slot 4; u1 recovered with delay 3.
    let mut dec = ideal(4);
    let mut out: Vec<Delivery> = Vec::new();
    dec.ingest(1, SlotEvent::ErasedInfo { index: 1 }, &mut out);
    dec.ingest(2, info_marker(2), &mut out);
    dec.ingest(3, info_marker(3), &mut out);
    assert!(out.is_empty());
    dec.ingest(4, coded_marker(1, 3), &mut out);
    let delays: Vec<(u64, u64, bool)> = out.iter().map(|d| (d.index, d.delay(), d.recovered)).collect();
    assert_eq!(delays, vec![(1, 3, true), (2, 2, false), (3, 1, false)]);
    let log = dec.busy_log.as_ref().unwrap();
    assert_eq!(log.len(), 1);
    assert_eq!((log[0].pause_slot, log[0].resume_slot, log[0].s), (1, 4, 1));
}

#[test]
fn delay_triangle_with_lost_coded_packet() {
    // l=4: erasure at slot 2 pauses delivery; the first coded packet (slot 4)
    // is itself erased, the next (slot 8) resumes. Delays: 6, 5, 3, 2, 1.
    let mut dec = ideal(4);
    let mut out: Vec<Delivery> = Vec::new();
    dec.ingest(1, info_marker(1), &mut out);
    dec.ingest(2, SlotEvent::ErasedInfo { index: 2 }, &mut out);
    dec.ingest(3, info_marker(3), &mut out);
    dec.ingest(4, SlotEvent::ErasedCoded, &mut out);
    dec.ingest(5, info_marker(4), &mut out);
    dec.ingest(6, info_marker(5), &mut out);
    dec.ingest(7, info_marker(6), &mut out);
    dec.ingest(8, coded_marker(2, 6), &mut out);
    let seq: Vec<(u64, u64)> = out.iter().map(|d| (d.index, d.delay())).collect();
    assert_eq!(seq, vec![(1, 0), (2, 6), (3, 5), (4, 3), (5, 2), (6, 1)]);
    let log = dec.busy_log.as_ref().unwrap();
    assert_eq!((log[0].pause_slot, log[0].resume_slot, log[0].s), (2, 8, 2));
}

#[test]
fn two_erasures_extend_the_busy_period() {
    // Two info erasures in the first interval: one received coded packet is
    // not enough, the busy period runs past it.
    let mut dec = ideal(4);
    let mut out: Vec<Delivery> = Vec::new();
    dec.ingest(1, SlotEvent::ErasedInfo { index: 1 }, &mut out);
    dec.ingest(2, SlotEvent::ErasedInfo { index: 2 }, &mut out);
    dec.ingest(3, info_marker(3), &mut out);
    dec.ingest(4, coded_marker(1, 3), &mut out);
    assert!(out.is_empty(), "busy must continue past the first coded slot");
    assert!(dec.is_busy());
    dec.ingest(5, info_marker(4), &mut out);
    dec.ingest(6, info_marker(5), &mut out);
    dec.ingest(7, info_marker(6), &mut out);
    dec.ingest(8, coded_marker(2, 6), &mut out);
    assert_eq!(out.len(), 6);
    assert_eq!(dec.busy_log.as_ref().unwrap()[0].s, 2);
}

#[test]
fn worst_case_sum_delay_hits_the_triangle_area() {
    // Busy period starting in the very first slot of its interval: the
    // sum-delay equals s^2 l (l-1) / 2 exactly when every coded slot but the
    // last is erased; any later start stays strictly below.
    let l = 3u64;
    for s in 1..=4u64 {
        let mut dec = ideal(l as u32);
        let mut out: Vec<Delivery> = Vec::new();
        let mut info = 0u64;
        for slot in 1..=(s * l) {
            if slot % l == 0 {
                if slot == s * l {
                    dec.ingest(slot, coded_marker(slot / l, info), &mut out);
                } else {
                    dec.ingest(slot, SlotEvent::ErasedCoded, &mut out);
                }
            } else {
                info += 1;
                if slot == 1 {
                    dec.ingest(slot, SlotEvent::ErasedInfo { index: info }, &mut out);
                } else {
                    dec.ingest(slot, info_marker(info), &mut out);
                }
            }
        }
        let sum: u64 = out.iter().map(|d| d.delay()).sum();
        assert_eq!(sum, s * s * l * (l - 1) / 2, "s={s}");
    }

    // Same shape but the pause starts one slot later: strictly below the area.
    let mut dec = ideal(3);
    let mut out: Vec<Delivery> = Vec::new();
    dec.ingest(1, info_marker(1), &mut out);
    dec.ingest(2, SlotEvent::ErasedInfo { index: 2 }, &mut out);
    dec.ingest(3, SlotEvent::ErasedCoded, &mut out);
    dec.ingest(4, info_marker(3), &mut out);
    dec.ingest(5, info_marker(4), &mut out);
    dec.ingest(6, coded_marker(2, 4), &mut out);
    let sum: u64 = out.iter().map(|d| d.delay()).sum();
    assert!(sum < 2 * 2 * 3 * 2 / 2, "sum {sum}");
}

#[test]
fn busy_periods_satisfy_the_admissibility_counts() {
    // In unit-recovery mode a closed busy period of length s must have more
    // than m erasures in its first m intervals for every m < s, and exactly
    // s over the whole window.
    let l = 4u32;
    let span = l as u64;
    let pattern = apply(&ChannelModel::Iid { epsilon: 0.22 }, 40_000, 99).unwrap();
    let mut dec = ideal(l);
    let mut out: Vec<Delivery> = Vec::new();
    let mut info = 0u64;
    for (i, &erased) in pattern.iter().enumerate() {
        let slot = (i + 1) as u64;
        if slot.is_multiple_of(span) {
            if erased {
                dec.ingest(slot, SlotEvent::ErasedCoded, &mut out);
            } else {
                dec.ingest(slot, coded_marker(slot / span, info), &mut out);
            }
        } else {
            info += 1;
            if erased {
                dec.ingest(slot, SlotEvent::ErasedInfo { index: info }, &mut out);
            } else {
                dec.ingest(slot, info_marker(info), &mut out);
            }
        }
    }
    let log = dec.busy_log.as_ref().unwrap().clone();
    assert!(log.len() > 400, "want plenty of busy periods, got {}", log.len());
    for rec in &log {
        let t_i = (rec.pause_slot - 1) / span * span;
        assert_eq!(rec.resume_slot, t_i + rec.s * span, "resume on the busy's last coded slot");
        for m in 1..=rec.s {
            let count = pattern[t_i as usize..(t_i + m * span) as usize]
                .iter()
                .filter(|&&e| e)
                .count() as u64;
            if m < rec.s {
                assert!(count > m, "pause {}: E_{m} = {count} <= {m}", rec.pause_slot);
            } else {
                assert_eq!(count, rec.s, "pause {}: window total", rec.pause_slot);
            }
        }
    }
}

#[test]
fn field_mode_counts_dependent_rows_as_erasures() {
    let field = Arc::new(Field::new(FieldSpec::new(1).unwrap()));
    let mut dec = StreamDecoder::new_field(CodeParams::Stream { l: 2 }, Arc::clone(&field))
        .record_busy_log();
    let mut out: Vec<Delivery> = Vec::new();
    let coded = |index: u64, coeffs: Vec<Symbol>, payload: Symbol| {
        SlotEvent::Received(SlotPacket::Coded(CodedPacket {
            index,
            window: (1, coeffs.len() as u64),
            coefficients: coeffs,
            payload: vec![payload],
        }))
    };
    // u1 = [1], u2 = [0] over GF(2).
    dec.ingest(1, SlotEvent::ErasedInfo { index: 1 }, &mut out);
    dec.ingest(2, SlotEvent::ErasedCoded, &mut out);
    dec.ingest(3, SlotEvent::ErasedInfo { index: 2 }, &mut out);
    dec.ingest(4, coded(2, vec![1, 1], 1), &mut out); // u1 + u2 = 1
    assert_eq!(dec.pending_rank(), 1);
    dec.ingest(5, SlotEvent::Received(SlotPacket::Info { index: 3, payload: vec![1] }), &mut out);
    dec.ingest(6, coded(3, vec![1, 1, 0], 1), &mut out); // depends on row + known u3
    assert_eq!(dec.dependence_events, 1);
    assert_eq!(dec.pending_rank(), 1);
    assert!(dec.is_busy());
    dec.ingest(7, SlotEvent::Received(SlotPacket::Info { index: 4, payload: vec![0] }), &mut out);
    dec.ingest(8, coded(4, vec![1, 0, 0, 0], 1), &mut out); // u1 = 1
    assert!(!dec.is_busy());
    let payloads: Vec<(u64, Vec<Symbol>)> = out
        .iter()
        .map(|d| (d.index, d.payload.clone().unwrap()))
        .collect();
    assert_eq!(
        payloads,
        vec![(1, vec![1]), (2, vec![0]), (3, vec![1]), (4, vec![0])]
    );
    assert_eq!(dec.busy_log.as_ref().unwrap()[0].s, 4);
    assert!(dec.field_ops > 0);
}

/// Full materialised round trip: encode, erase, decode, compare payloads.
#[test]
fn randomized_end_to_end_round_trip() {
    let field = Arc::new(Field::new(FieldSpec::new(8).unwrap()));
    for (seed, l, eps) in [(1u64, 3u32, 0.15), (2, 4, 0.1), (3, 2, 0.2), (4, 5, 0.08)] {
        let mut rng = Rng::new(seed);
        let n_info = 600usize;
        let info: Vec<Vec<Symbol>> = (0..n_info)
            .map(|_| (0..4).map(|_| field.random_symbol(&mut rng)).collect())
            .collect();
        let slots = encode_stream(&info, l, WindowPolicy::FullHistory, &field, seed, 0).unwrap();
        let pattern = apply(&ChannelModel::Iid { epsilon: eps }, slots.len(), seed ^ 0xFEED).unwrap();

        let mut dec = StreamDecoder::new_field(CodeParams::Stream { l }, Arc::clone(&field));
        let mut out: Vec<Delivery> = Vec::new();
        for (i, packet) in slots.iter().enumerate() {
            let slot = (i + 1) as u64;
            let event = if pattern[i] {
                match packet {
                    SlotPacket::Info { index, .. } => SlotEvent::ErasedInfo { index: *index },
                    SlotPacket::Coded(_) => SlotEvent::ErasedCoded,
                }
            } else {
                SlotEvent::Received(packet.clone())
            };
            dec.ingest(slot, event, &mut out);
        }
        // Every delivered packet must carry the original payload, in order.
        let mut expect = 1u64;
        for d in &out {
            assert_eq!(d.index, expect, "in-order delivery broke at seed {seed}");
            expect += 1;
            assert_eq!(
                d.payload.as_ref().unwrap(),
                &info[(d.index - 1) as usize],
                "payload mismatch at index {} (seed {seed})",
                d.index
            );
        }
        let delivered = out.len();
        assert!(
            delivered >= n_info - 60,
            "suspiciously few deliveries: {delivered} of {n_info} (seed {seed})"
        );
        // Collisions happen at roughly rate 1/Q; a handful over hundreds of
        // coded receipts is expected and must not corrupt anything.
        assert!(dec.dependence_events < 20, "implausibly many collisions");
    }
}

#[test]
fn rank_never_decreases_and_increments_by_one() {
    let field = Arc::new(Field::new(FieldSpec::new(2).unwrap()));
    let mut dec = StreamDecoder::new_field(CodeParams::Stream { l: 3 }, Arc::clone(&field));
    let mut out: Vec<Delivery> = Vec::new();
    let mut rng = Rng::new(5);
    let mut info = 0u64;
    let mut coded = 0u64;
    let mut prev_rank = 0usize;
    for slot in 1..=3000u64 {
        let erased = rng.bernoulli(0.25);
        if slot % 3 == 0 {
            coded += 1;
            if erased || info == 0 {
                dec.ingest(slot, SlotEvent::ErasedCoded, &mut out);
            } else {
                let coeffs: Vec<Symbol> =
                    (1..=info).map(|j| lowdelay::codec::coefficient(&field, 7, coded, j)).collect();
                // Payload zeros keep the algebra consistent with all-zero data.
                dec.ingest(
                    slot,
                    SlotEvent::Received(SlotPacket::Coded(CodedPacket {
                        index: coded,
                        window: (1, info),
                        coefficients: coeffs,
                        payload: vec![0],
                    })),
                    &mut out,
                );
            }
        } else {
            info += 1;
            if erased {
                dec.ingest(slot, SlotEvent::ErasedInfo { index: info }, &mut out);
            } else {
                dec.ingest(
                    slot,
                    SlotEvent::Received(SlotPacket::Info { index: info, payload: vec![0] }),
                    &mut out,
                );
            }
        }
        let rank = dec.pending_rank();
        if dec.is_busy() {
            assert!(rank >= prev_rank || rank == 0, "rank dropped inside a busy period");
        }
        prev_rank = if dec.is_busy() { rank } else { 0 };
    }
    assert!(dec.dependence_events > 0, "GF(4) at 25% loss should produce collisions");
}

#[test]
fn per_busy_op_count_stays_within_the_cubic_model() {
    // Feed a sliding-window field-mode decoder a long lossy stream and check
    // every closed busy period's op count against (2/3)s^3 plus lower-order
    // terms scaled by the payload width.
    use lowdelay::codec::coefficient;
    let field = Arc::new(Field::new(FieldSpec::new(8).unwrap()));
    let l = 4u64;
    let d = 4usize;
    let n_slots = 120_000u64;
    let pattern = apply(&ChannelModel::Iid { epsilon: 0.2 }, n_slots as usize, 5).unwrap();
    let mut dec = StreamDecoder::new_field(CodeParams::Stream { l: l as u32 }, Arc::clone(&field))
        .record_busy_log();
    let mut out: Vec<Delivery> = Vec::new();
    let payload_of = |j: u64| -> Vec<Symbol> {
        (0..d).map(|pos| ((j * 131 + pos as u64 * 17) % 251) as Symbol).collect()
    };
    let mut info = 0u64;
    let mut coded = 0u64;
    for slot in 1..=n_slots {
        let erased = pattern[(slot - 1) as usize];
        if slot % l == 0 {
            coded += 1;
            if erased || info == 0 {
                dec.ingest(slot, SlotEvent::ErasedCoded, &mut out);
            } else {
                let lo = (dec.delivered_prefix() + 1).min(info);
                let coeffs: Vec<Symbol> =
                    (lo..=info).map(|j| coefficient(&field, 9, coded, j)).collect();
                let mut payload = vec![0 as Symbol; d];
                for (idx, j) in (lo..=info).enumerate() {
                    let w = coeffs[idx];
                    for (pos, acc) in payload.iter_mut().enumerate() {
                        *acc = field.add(*acc, field.mul(w, payload_of(j)[pos]));
                    }
                }
                dec.ingest(
                    slot,
                    SlotEvent::Received(SlotPacket::Coded(CodedPacket {
                        index: coded,
                        window: (lo, info),
                        coefficients: coeffs,
                        payload,
                    })),
                    &mut out,
                );
            }
        } else {
            info += 1;
            if erased {
                dec.ingest(slot, SlotEvent::ErasedInfo { index: info }, &mut out);
            } else {
                dec.ingest(
                    slot,
                    SlotEvent::Received(SlotPacket::Info { index: info, payload: payload_of(info) }),
                    &mut out,
                );
            }
        }
    }
    let log = dec.busy_log.as_ref().unwrap();
    assert!(log.len() > 3_000, "want many busy periods, got {}", log.len());
    let lower_order = 8 * (d as u64 + 2);
    for rec in log {
        let s = rec.s;
        let bound = (2.0 / 3.0 * (s as f64).powi(3)).ceil() as u64
            + lower_order * s * s
            + lower_order * s
            + 16;
        assert!(
            rec.ops <= bound,
            "busy at slot {} with s={s}: {} ops exceeds {bound}",
            rec.pause_slot,
            rec.ops
        );
    }
}
