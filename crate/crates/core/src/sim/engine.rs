//! Single-replication engines: one for the stream/group layouts, one for the
//! block baseline, each in open- and closed-loop flavours.

use super::{LoopMode, RunMetrics, Scenario, SimError};
use crate::channel::ChannelState;
use crate::codec::{
    coefficient, BlockDecoder, CodeParams, CodedPacket, Delivery, DeliverySink, SlotEvent,
    SlotPacket, StreamDecoder,
};
use crate::gf::{Field, FieldSpec, Symbol};
use crate::rng::{mix3, splitmix64};
use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::sync::Arc;

const COEF_STREAM: u64 = 0xC0EF;
const PAYLOAD_STREAM: u64 = 0xDA7A;

/// Deterministic payload of information packet `index`.
fn synth_payload(seed: u64, index: u64, len: usize, bits: u32) -> Vec<Symbol> {
    (0..len)
        .map(|j| (mix3(seed, index, j as u64) >> (64 - bits)) as Symbol)
        .collect()
}

/// Delivery sink that folds packets straight into metrics, verifying
/// recovered payloads against the synthesised source when present.
struct MetricsSink {
    delivered: u64,
    delay_sum: u64,
    delay_hist: BTreeMap<u64, u64>,
    verify: Option<(u64, usize, u32)>,
}

impl DeliverySink for MetricsSink {
    fn deliver(&mut self, d: Delivery) {
        self.delivered += 1;
        let delay = d.delay();
        self.delay_sum += delay;
        *self.delay_hist.entry(delay).or_insert(0) += 1;
        if let (Some((seed, len, bits)), Some(payload)) = (self.verify, d.payload.as_ref()) {
            let expect = synth_payload(seed, d.index, len, bits);
            assert_eq!(
                payload, &expect,
                "decoded payload mismatch for packet {} delivered at slot {}",
                d.index, d.delivery_slot
            );
        }
    }
}

impl MetricsSink {
    fn new(verify: Option<(u64, usize, u32)>) -> Self {
        MetricsSink { delivered: 0, delay_sum: 0, delay_hist: BTreeMap::new(), verify }
    }
}

/// Run one replication of the scenario under the given seed.
pub fn run_one(scenario: &Scenario, seed: u64) -> Result<RunMetrics, SimError> {
    match scenario.code {
        CodeParams::Stream { .. } | CodeParams::Group { .. } => run_stream(scenario, seed),
        CodeParams::Block { .. } => run_block(scenario, seed),
    }
}

fn field_setup(scenario: &Scenario) -> Option<Arc<Field>> {
    if scenario.ideal_recovery {
        return None;
    }
    Some(Arc::new(Field::new(FieldSpec::new(scenario.field_bits).expect("validated"))))
}

fn run_stream(scenario: &Scenario, seed: u64) -> Result<RunMetrics, SimError> {
    let code = scenario.code;
    let span = code.span() as u64;
    let base_slots = scenario.padded_slots();
    let total_slots = base_slots + scenario.tail_coded as u64;
    let closed = scenario.mode == LoopMode::ClosedLoop;
    let fd = scenario.feedback_delay as usize;

    let mut channel = ChannelState::new(&scenario.channel, seed)
        .map_err(|e| SimError::BadScenario(e.to_string()))?;
    let field_cfg = field_setup(scenario);
    let coef_seed = splitmix64(seed ^ COEF_STREAM);
    let payload_seed = splitmix64(seed ^ PAYLOAD_STREAM);

    let mut decoder = match &field_cfg {
        None => StreamDecoder::new_ideal(code),
        Some(field) => StreamDecoder::new_field(code, Arc::clone(field)),
    };
    let verify = field_cfg
        .as_ref()
        .map(|_| (payload_seed, scenario.payload_len, scenario.field_bits));
    let mut sink = MetricsSink::new(verify);

    let mut info_sent = 0u64;
    let mut coded_sent = 0u64;
    // Closed loop: delivered prefix after slot t becomes visible at t + fd.
    let mut ack_ring: VecDeque<u64> = VecDeque::with_capacity(fd + 1);
    let mut acked_visible = 0u64;

    for slot in 1..=total_slots {
        if closed && ack_ring.len() == fd {
            acked_visible = ack_ring.pop_front().expect("nonempty");
        }
        let pos = ((slot - 1) % span + 1) as u32;
        let in_tail = slot > base_slots;
        let is_coded = in_tail || code.is_coded_pos(pos);
        let erased = channel.next_erased();

        if !is_coded {
            info_sent += 1;
            let index = info_sent;
            if erased {
                decoder.ingest(slot, SlotEvent::ErasedInfo { index }, &mut sink);
            } else {
                let payload = match &field_cfg {
                    Some(_) => synth_payload(payload_seed, index, scenario.payload_len, scenario.field_bits),
                    None => Vec::new(),
                };
                decoder.ingest(slot, SlotEvent::Received(SlotPacket::Info { index, payload }), &mut sink);
            }
        } else {
            coded_sent += 1;
            if erased {
                decoder.ingest(slot, SlotEvent::ErasedCoded, &mut sink);
            } else if info_sent > 0 {
                let hi = info_sent;
                let lo = if closed { (acked_visible + 1).min(hi) } else { 1 };
                let packet = match &field_cfg {
                    None => CodedPacket {
                        index: coded_sent,
                        window: (lo, hi),
                        coefficients: Vec::new(),
                        payload: Vec::new(),
                    },
                    Some(field) => {
                        materialize_coded(field, coef_seed, payload_seed, coded_sent, lo, hi, scenario)
                    }
                };
                decoder.ingest(slot, SlotEvent::Received(SlotPacket::Coded(packet)), &mut sink);
            }
        }
        if closed {
            ack_ring.push_back(decoder.delivered_prefix());
        }
    }

    let undelivered = decoder.finish(total_slots);
    Ok(RunMetrics {
        n_slots: total_slots,
        info_sent,
        coded_sent,
        delivered_info: sink.delivered,
        residual_losses: undelivered.missing.len() as u64,
        stranded_in_buffer: undelivered.buffered.len() as u64,
        delay_sum: sink.delay_sum,
        delay_hist: sink.delay_hist,
        busy_hist: decoder.busy_hist.clone(),
        intervals_accounted: decoder.intervals_accounted(),
        dependence_events: decoder.dependence_events,
        field_ops: decoder.field_ops,
        model_ops: decoder.model_ops,
    })
}

fn materialize_coded(
    field: &Field,
    coef_seed: u64,
    payload_seed: u64,
    coded_index: u64,
    lo: u64,
    hi: u64,
    scenario: &Scenario,
) -> CodedPacket {
    let len = scenario.payload_len;
    let bits = scenario.field_bits;
    let mut coefficients = Vec::with_capacity((hi + 1 - lo) as usize);
    let mut payload = vec![0 as Symbol; len];
    for j in lo..=hi {
        let w = coefficient(field, coef_seed, coded_index, j);
        coefficients.push(w);
        if w == 0 {
            continue;
        }
        for (pos, acc) in payload.iter_mut().enumerate() {
            let u = (mix3(payload_seed, j, pos as u64) >> (64 - bits)) as Symbol;
            *acc = field.add(*acc, field.mul(w, u));
        }
    }
    CodedPacket { index: coded_index, window: (lo, hi), coefficients, payload }
}

fn run_block(scenario: &Scenario, seed: u64) -> Result<RunMetrics, SimError> {
    let CodeParams::Block { n, k } = scenario.code else { unreachable!("dispatched") };
    let n = n as u64;
    let k = k as u64;
    let total_slots = scenario.padded_slots();
    let closed = scenario.mode == LoopMode::ClosedLoop;
    let fd = scenario.feedback_delay as usize;

    let mut channel = ChannelState::new(&scenario.channel, seed)
        .map_err(|e| SimError::BadScenario(e.to_string()))?;
    let field_cfg = field_setup(scenario);
    let coef_seed = splitmix64(seed ^ COEF_STREAM);
    let payload_seed = splitmix64(seed ^ PAYLOAD_STREAM);

    let mut decoder = match &field_cfg {
        None => BlockDecoder::new_ideal(n as u32, k as u32),
        Some(field) => BlockDecoder::new_field(n as u32, k as u32, Arc::clone(field)),
    };
    let verify = field_cfg
        .as_ref()
        .map(|_| (payload_seed, scenario.payload_len, scenario.field_bits));
    let mut sink = MetricsSink::new(verify);

    let mut info_sent = 0u64;
    let mut coded_sent = 0u64;
    // Base schedule cursor.
    let mut sched_block = 0u64;
    let mut sched_pos = 1u64; // 1..=n within block
    // Closed loop state.
    let mut snapshot_ring: VecDeque<Option<(u64, u64)>> = VecDeque::with_capacity(fd + 1);
    let mut visible: Option<(u64, u64)> = None;
    let mut incomplete: BTreeSet<u64> = BTreeSet::new();
    let mut retx_inflight: Vec<(u64, u64)> = Vec::new();

    for slot in 1..=total_slots {
        if closed {
            if snapshot_ring.len() == fd {
                visible = snapshot_ring.pop_front().expect("nonempty");
            }
            retx_inflight.retain(|&(_, sent)| sent + fd as u64 > slot);
        }

        // Decide what this slot carries.
        let mut sent_retx = false;
        if closed {
            if let Some((block, deficit)) = visible {
                let inflight = retx_inflight.iter().filter(|&&(b, _)| b == block).count() as u64;
                if deficit > inflight {
                    // Retransmission: one fresh coded packet for the block.
                    coded_sent += 1;
                    let erased = channel.next_erased();
                    retx_inflight.push((block, slot));
                    if erased {
                        decoder.ingest(slot, SlotEvent::ErasedCoded, &mut sink);
                    } else {
                        let lo = block * k + 1;
                        let hi = block * k + k;
                        let packet = build_block_coded(
                            &field_cfg, coef_seed, payload_seed, coded_sent, lo, hi, scenario,
                        );
                        decoder.ingest(slot, SlotEvent::Received(SlotPacket::Coded(packet)), &mut sink);
                    }
                    sent_retx = true;
                }
            }
        }

        if !sent_retx {
            let block = sched_block;
            let pos = sched_pos;
            let erased = channel.next_erased();
            if pos <= k {
                info_sent += 1;
                let index = block * k + pos;
                if erased {
                    decoder.ingest(slot, SlotEvent::ErasedInfo { index }, &mut sink);
                } else {
                    let payload = match &field_cfg {
                        Some(_) => synth_payload(payload_seed, index, scenario.payload_len, scenario.field_bits),
                        None => Vec::new(),
                    };
                    decoder.ingest(slot, SlotEvent::Received(SlotPacket::Info { index, payload }), &mut sink);
                }
            } else {
                coded_sent += 1;
                if erased {
                    decoder.ingest(slot, SlotEvent::ErasedCoded, &mut sink);
                } else {
                    let lo = block * k + 1;
                    let hi = block * k + k;
                    let packet = build_block_coded(
                        &field_cfg, coef_seed, payload_seed, coded_sent, lo, hi, scenario,
                    );
                    decoder.ingest(slot, SlotEvent::Received(SlotPacket::Coded(packet)), &mut sink);
                }
            }
            if !closed {
                // Open loop: declare failure as soon as the block cannot
                // possibly gather enough degrees of freedom.
                let remaining_coded = n - pos.max(k);
                if decoder.block_deficit(block) > remaining_coded {
                    decoder.declare_block_failed(block, slot, &mut sink);
                }
            } else if pos == n {
                // Block transmission complete: track it until decoded.
                if decoder.block_deficit(block) > 0 {
                    incomplete.insert(block);
                }
            }
            sched_pos += 1;
            if sched_pos > n {
                sched_pos = 1;
                sched_block += 1;
            }
        }

        if closed {
            while let Some(&head) = incomplete.iter().next() {
                if decoder.block_deficit(head) == 0 {
                    incomplete.remove(&head);
                } else {
                    break;
                }
            }
            let head = incomplete.iter().next().map(|&b| (b, decoder.block_deficit(b)));
            snapshot_ring.push_back(head);
        }
    }

    let undelivered = decoder.finish();
    let skipped = decoder.residual_losses().len() as u64;
    Ok(RunMetrics {
        n_slots: total_slots,
        info_sent,
        coded_sent,
        delivered_info: sink.delivered,
        residual_losses: skipped + undelivered.missing.len() as u64,
        stranded_in_buffer: undelivered.buffered.len() as u64,
        delay_sum: sink.delay_sum,
        delay_hist: sink.delay_hist,
        busy_hist: Vec::new(),
        intervals_accounted: 0,
        dependence_events: decoder.dependence_events,
        field_ops: decoder.field_ops,
        model_ops: 0.0,
    })
}

fn build_block_coded(
    field_cfg: &Option<Arc<Field>>,
    coef_seed: u64,
    payload_seed: u64,
    coded_index: u64,
    lo: u64,
    hi: u64,
    scenario: &Scenario,
) -> CodedPacket {
    match field_cfg {
        None => CodedPacket { index: coded_index, window: (lo, hi), coefficients: Vec::new(), payload: Vec::new() },
        Some(field) => materialize_coded(field, coef_seed, payload_seed, coded_index, lo, hi, scenario),
    }
}
