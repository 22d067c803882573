//! On-the-fly decoders with in-order delivery accounting.
//!
//! [`StreamDecoder`] serves the streaming and grouped layouts: delivery
//! pauses at the first information-packet erasure and resumes at the coded
//! slot whose reception completes recovery. Each pause/resume pair is one
//! busy period; the decoder keeps the full renewal log.
//!
//! [`BlockDecoder`] serves the baseline block code, where recovery is
//! per-block and a block that runs out of coded packets is skipped.

use super::{CodeParams, CodedPacket, SlotEvent, SlotPacket};
use crate::gf::{Field, Symbol};
use std::collections::BTreeMap;
use std::sync::Arc;

/// One in-order delivery. `payload` is present when the decoder carries
/// payload data (field mode); unit-recovery mode tracks bookkeeping only.
#[derive(Debug, Clone, PartialEq)]
pub struct Delivery {
    pub index: u64,
    pub tx_slot: u64,
    pub delivery_slot: u64,
    pub recovered: bool,
    pub payload: Option<Vec<Symbol>>,
}

impl Delivery {
    pub fn delay(&self) -> u64 {
        self.delivery_slot - self.tx_slot
    }
}

/// Receives deliveries as they happen.
pub trait DeliverySink {
    fn deliver(&mut self, d: Delivery);
}

impl DeliverySink for Vec<Delivery> {
    fn deliver(&mut self, d: Delivery) {
        self.push(d);
    }
}

/// One closed busy period, in the embedded interval time of the code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BusyRecord {
    /// Slot of the information-packet erasure that paused delivery.
    pub pause_slot: u64,
    /// Coded slot at which delivery resumed.
    pub resume_slot: u64,
    /// Number of intervals the busy period spanned.
    pub s: u64,
    /// Field operations spent resolving this busy period.
    pub ops: u64,
}

/// Packets still outstanding when the stream ends.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Undelivered {
    /// Erased and never recovered.
    pub missing: Vec<u64>,
    /// Received but blocked behind a missing packet.
    pub buffered: Vec<u64>,
}

#[derive(Debug, Clone)]
enum Mode {
    /// Unit recovery: every received coded packet repairs one erasure.
    Ideal,
    /// Finite-field decoding over materialised coefficient rows.
    Field { field: Arc<Field> },
}

#[derive(Debug, Clone)]
struct Row {
    /// Coefficients aligned with the busy period's missing list; positions
    /// beyond `coef.len()` are zero (erasures after the row arrived).
    coef: Vec<Symbol>,
    payload: Vec<Symbol>,
    /// Leading nonzero position in `coef`.
    pivot: usize,
}

#[derive(Debug, Clone)]
struct Busy {
    pause_slot: u64,
    /// 0-based interval holding the pause slot.
    start_interval: u64,
    /// Decoder op counter snapshot at the pause.
    ops_at_start: u64,
    missing: Vec<u64>,
    missing_tx: Vec<u64>,
    buffered: Vec<(u64, u64, Option<Vec<Symbol>>)>,
    /// Unit-recovery outstanding count (ideal mode).
    queue: u64,
    /// Echelon rows (field mode), ordered by pivot.
    rows: Vec<Row>,
}

/// Streaming/grouped decoder with busy-period bookkeeping.
pub struct StreamDecoder {
    span: u64,
    mode: Mode,
    /// Highest information index delivered in order.
    delivered_prefix: u64,
    /// Payloads of every received information packet, for window reduction
    /// in field mode (indexed by info index - 1).
    known: Vec<Option<Vec<Symbol>>>,
    busy: Option<Busy>,
    /// Busy-length histogram: hist[s] counts closed busy periods of length s;
    /// hist[0] counts idle intervals.
    pub busy_hist: Vec<u64>,
    /// Intervals accounted to closed renewals (idle or busy).
    accounted_intervals: u64,
    /// Received coded packets that failed to raise the rank.
    pub dependence_events: u64,
    /// Field operations actually performed while decoding.
    pub field_ops: u64,
    /// Cubic cost-model charge: 1.5 s^3 summed over closed busy periods.
    pub model_ops: f64,
    /// Optional detailed log of closed busy periods.
    pub busy_log: Option<Vec<BusyRecord>>,
}

impl StreamDecoder {
    pub fn new_ideal(params: CodeParams) -> Self {
        Self::new(params, Mode::Ideal)
    }

    pub fn new_field(params: CodeParams, field: Arc<Field>) -> Self {
        Self::new(params, Mode::Field { field })
    }

    fn new(params: CodeParams, mode: Mode) -> Self {
        params.validate().expect("valid code shape");
        StreamDecoder {
            span: params.span() as u64,
            mode,
            delivered_prefix: 0,
            known: Vec::new(),
            busy: None,
            busy_hist: vec![0, 0],
            accounted_intervals: 0,
            dependence_events: 0,
            field_ops: 0,
            model_ops: 0.0,
            busy_log: None,
        }
    }

    pub fn record_busy_log(mut self) -> Self {
        self.busy_log = Some(Vec::new());
        self
    }

    pub fn delivered_prefix(&self) -> u64 {
        self.delivered_prefix
    }

    pub fn is_busy(&self) -> bool {
        self.busy.is_some()
    }

    /// Current decoder rank over the pending system (field mode).
    pub fn pending_rank(&self) -> usize {
        self.busy.as_ref().map_or(0, |b| b.rows.len())
    }

    fn interval_of(&self, slot: u64) -> u64 {
        (slot - 1) / self.span
    }

    fn store_known(&mut self, index: u64, payload: Option<Vec<Symbol>>) {
        if matches!(self.mode, Mode::Field { .. }) {
            let idx = (index - 1) as usize;
            if self.known.len() <= idx {
                self.known.resize(idx + 1, None);
            }
            self.known[idx] = payload;
        }
    }

    /// Feed one slot. Deliveries are pushed into `sink` in index order.
    pub fn ingest<S: DeliverySink>(&mut self, slot: u64, event: SlotEvent, sink: &mut S) {
        match event {
            SlotEvent::Received(SlotPacket::Info { index, payload }) => {
                self.store_known(index, Some(payload.clone()));
                match &mut self.busy {
                    Some(busy) => busy.buffered.push((index, slot, Some(payload))),
                    None => {
                        debug_assert_eq!(index, self.delivered_prefix + 1);
                        self.delivered_prefix = index;
                        sink.deliver(Delivery {
                            index,
                            tx_slot: slot,
                            delivery_slot: slot,
                            recovered: false,
                            payload: Some(payload),
                        });
                    }
                }
            }
            SlotEvent::ErasedInfo { index } => {
                let start_interval = self.interval_of(slot);
                let ops_at_start = self.field_ops;
                let busy = self.busy.get_or_insert_with(|| Busy {
                    pause_slot: slot,
                    start_interval,
                    ops_at_start,
                    missing: Vec::new(),
                    missing_tx: Vec::new(),
                    buffered: Vec::new(),
                    queue: 0,
                    rows: Vec::new(),
                });
                busy.missing.push(index);
                busy.missing_tx.push(slot);
                busy.queue += 1;
            }
            SlotEvent::ErasedCoded => {
                // A lost coded packet is a lost service opportunity.
            }
            SlotEvent::Received(SlotPacket::Coded(cp)) => {
                if self.busy.is_none() {
                    return;
                }
                match &self.mode {
                    Mode::Ideal => {
                        let busy = self.busy.as_mut().expect("checked");
                        busy.queue -= 1;
                        if busy.queue == 0 {
                            self.close_busy(slot, sink);
                        }
                    }
                    Mode::Field { field } => {
                        let field = Arc::clone(field);
                        if self.absorb_coded_row(&field, &cp) {
                            let busy = self.busy.as_ref().expect("checked");
                            if busy.rows.len() == busy.missing.len() {
                                self.solve_and_close(&field, slot, sink);
                            }
                        } else {
                            // Linearly dependent: same effect as an erasure.
                            self.dependence_events += 1;
                        }
                    }
                }
            }
        }
    }

    /// Reduce the coded packet against the known prefix and current echelon
    /// rows. Returns false when the row carries no new information.
    fn absorb_coded_row(&mut self, field: &Field, cp: &CodedPacket) -> bool {
        let busy = self.busy.as_mut().expect("busy");
        let n = busy.missing.len();
        let mut coef = vec![0 as Symbol; n];
        for (pos, &m) in busy.missing.iter().enumerate() {
            coef[pos] = cp.coefficient_for(m);
        }
        // Remove the contribution of every received packet in the window.
        let mut payload = cp.payload.clone();
        for j in cp.window.0..=cp.window.1 {
            if busy.missing.binary_search(&j).is_ok() {
                continue;
            }
            let w = cp.coefficient_for(j);
            if w == 0 {
                continue;
            }
            let known = self.known.get((j - 1) as usize).and_then(|p| p.as_ref());
            if let Some(u) = known {
                for (acc, &sym) in payload.iter_mut().zip(u.iter()) {
                    *acc = field.add(*acc, field.mul(w, sym));
                    self.field_ops += 2;
                }
            }
        }
        // Eliminate against existing pivots.
        for row in &busy.rows {
            if row.pivot >= coef.len() || coef[row.pivot] == 0 {
                continue;
            }
            let factor = coef[row.pivot];
            for (pos, &rc) in row.coef.iter().enumerate() {
                if rc != 0 {
                    coef[pos] = field.add(coef[pos], field.mul(factor, rc));
                    self.field_ops += 2;
                }
            }
            for (pos, &rp) in row.payload.iter().enumerate() {
                payload[pos] = field.add(payload[pos], field.mul(factor, rp));
                self.field_ops += 2;
            }
        }
        let Some(pivot) = coef.iter().position(|&v| v != 0) else {
            return false;
        };
        // Normalise the leading coefficient to one.
        let inv = field.inv(coef[pivot]).expect("pivot nonzero");
        self.field_ops += 1;
        for v in coef.iter_mut().skip(pivot) {
            if *v != 0 {
                *v = field.mul(*v, inv);
                self.field_ops += 1;
            }
        }
        for v in payload.iter_mut() {
            *v = field.mul(*v, inv);
            self.field_ops += 1;
        }
        let row = Row { coef, payload, pivot };
        let at = busy.rows.partition_point(|r| r.pivot < row.pivot);
        debug_assert!(busy.rows.get(at).is_none_or(|r| r.pivot != row.pivot));
        busy.rows.insert(at, row);
        true
    }

    /// Back-substitute the full-rank system, then deliver everything.
    fn solve_and_close<S: DeliverySink>(&mut self, field: &Field, slot: u64, sink: &mut S) {
        let busy = self.busy.as_mut().expect("busy");
        let n = busy.rows.len();
        // Rows are in echelon order with unit pivots: clear above-pivot
        // entries from the bottom up.
        for i in (0..n).rev() {
            let pivot = busy.rows[i].pivot;
            let (upper, lower) = busy.rows.split_at_mut(i);
            let src = &lower[0];
            for row in upper.iter_mut() {
                let factor = if pivot < row.coef.len() { row.coef[pivot] } else { 0 };
                if factor == 0 {
                    continue;
                }
                for (pos, &sc) in src.coef.iter().enumerate() {
                    if sc != 0 {
                        if row.coef.len() <= pos {
                            row.coef.resize(pos + 1, 0);
                        }
                        row.coef[pos] = field.add(row.coef[pos], field.mul(factor, sc));
                        self.field_ops += 2;
                    }
                }
                for (pos, &sp) in src.payload.iter().enumerate() {
                    row.payload[pos] = field.add(row.payload[pos], field.mul(factor, sp));
                    self.field_ops += 2;
                }
            }
        }
        // Row with pivot p now holds the payload of missing[p].
        let recovered: Vec<(u64, Vec<Symbol>)> = busy
            .rows
            .iter()
            .enumerate()
            .map(|(pos, r)| (busy.missing[pos], r.payload.clone()))
            .collect();
        for (index, payload) in recovered {
            self.known_set_recovered(index, payload);
        }
        self.close_busy(slot, sink);
    }

    fn known_set_recovered(&mut self, index: u64, payload: Vec<Symbol>) {
        let idx = (index - 1) as usize;
        if self.known.len() <= idx {
            self.known.resize(idx + 1, None);
        }
        self.known[idx] = Some(payload);
    }

    /// Deliver the pent-up packets in index order and record the renewal.
    fn close_busy<S: DeliverySink>(&mut self, slot: u64, sink: &mut S) {
        let busy = self.busy.take().expect("busy");
        let is_field = matches!(self.mode, Mode::Field { .. });
        let mut deliveries: Vec<Delivery> = Vec::with_capacity(busy.missing.len() + busy.buffered.len());
        for (pos, &index) in busy.missing.iter().enumerate() {
            let payload = if is_field {
                self.known.get((index - 1) as usize).and_then(|p| p.clone())
            } else {
                None
            };
            deliveries.push(Delivery {
                index,
                tx_slot: busy.missing_tx[pos],
                delivery_slot: slot,
                recovered: true,
                payload,
            });
        }
        for (index, tx_slot, payload) in busy.buffered {
            deliveries.push(Delivery {
                index,
                tx_slot,
                delivery_slot: slot,
                recovered: false,
                payload,
            });
        }
        deliveries.sort_by_key(|d| d.index);
        for d in deliveries {
            debug_assert_eq!(d.index, self.delivered_prefix + 1);
            self.delivered_prefix = d.index;
            sink.deliver(d);
        }

        let end_interval = self.interval_of(slot);
        let s = end_interval - busy.start_interval + 1;
        // Idle intervals between the previous renewal and this busy period.
        self.busy_hist[0] += busy.start_interval - self.accounted_intervals;
        self.accounted_intervals = end_interval + 1;
        if self.busy_hist.len() <= s as usize {
            self.busy_hist.resize(s as usize + 1, 0);
        }
        self.busy_hist[s as usize] += 1;
        self.model_ops += 1.5 * (s as f64).powi(3);
        if let Some(log) = &mut self.busy_log {
            log.push(BusyRecord {
                pause_slot: busy.pause_slot,
                resume_slot: slot,
                s,
                ops: self.field_ops - busy.ops_at_start,
            });
        }
    }

    /// Close the renewal accounting at the end of an `n_slots` stream and
    /// report what never made it out. An in-progress busy period is not
    /// counted as a renewal.
    pub fn finish(&mut self, n_slots: u64) -> Undelivered {
        let completed = n_slots / self.span;
        let idle_cutoff = match &self.busy {
            Some(b) => b.start_interval.min(completed),
            None => completed,
        };
        self.busy_hist[0] += idle_cutoff.saturating_sub(self.accounted_intervals);
        self.accounted_intervals = idle_cutoff;
        match self.busy.take() {
            Some(b) => Undelivered {
                missing: b.missing,
                buffered: b.buffered.into_iter().map(|(i, _, _)| i).collect(),
            },
            None => Undelivered::default(),
        }
    }

    /// Renewal identity: intervals accounted by closed renewals.
    pub fn intervals_accounted(&self) -> u64 {
        self.accounted_intervals
    }
}

// ---------------------------------------------------------------------------
// Block decoder
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
struct Pending {
    index: u64,
    tx_slot: u64,
    payload: Option<Vec<Symbol>>,
    recovered: bool,
}

#[derive(Debug, Clone)]
struct BlockState {
    /// Erased info indices with their slots, ascending.
    missing: Vec<(u64, u64)>,
    /// Received or recovered but not yet released (in-order gate).
    buffered: Vec<Pending>,
    /// Received coded rows (field mode); ideal mode counts receipts only.
    rows: Vec<Row>,
    received_coded: u64,
    decoded: bool,
    failed: bool,
}

impl BlockState {
    fn new() -> Self {
        BlockState {
            missing: Vec::new(),
            buffered: Vec::new(),
            rows: Vec::new(),
            received_coded: 0,
            decoded: false,
            failed: false,
        }
    }
}

/// Baseline block-code decoder with global in-order release. A block whose
/// remaining coded supply cannot cover its erasures may be declared failed,
/// at which point its missing packets are skipped (they count as residual
/// loss) and delivery moves on.
pub struct BlockDecoder {
    k: u64,
    mode: Mode,
    blocks: BTreeMap<u64, BlockState>,
    /// Next info index owed to the application.
    next_release: u64,
    /// Payload store for field mode (indexed by info index - 1).
    known: Vec<Option<Vec<Symbol>>>,
    skipped: Vec<u64>,
    pub dependence_events: u64,
    pub field_ops: u64,
}

impl BlockDecoder {
    pub fn new_ideal(n: u32, k: u32) -> Self {
        CodeParams::Block { n, k }.validate().expect("valid shape");
        BlockDecoder {
            k: k as u64,
            mode: Mode::Ideal,
            blocks: BTreeMap::new(),
            next_release: 1,
            known: Vec::new(),
            skipped: Vec::new(),
            dependence_events: 0,
            field_ops: 0,
        }
    }

    pub fn new_field(n: u32, k: u32, field: Arc<Field>) -> Self {
        CodeParams::Block { n, k }.validate().expect("valid shape");
        BlockDecoder {
            k: k as u64,
            mode: Mode::Field { field },
            blocks: BTreeMap::new(),
            next_release: 1,
            known: Vec::new(),
            skipped: Vec::new(),
            dependence_events: 0,
            field_ops: 0,
        }
    }

    fn block_of(&self, info_index: u64) -> u64 {
        (info_index - 1) / self.k
    }

    /// Degrees of freedom the block still needs before it can decode.
    pub fn block_deficit(&self, block: u64) -> u64 {
        match self.blocks.get(&block) {
            Some(st) if !st.decoded && !st.failed => {
                let have = match self.mode {
                    Mode::Ideal => st.received_coded,
                    Mode::Field { .. } => st.rows.len() as u64,
                };
                (st.missing.len() as u64).saturating_sub(have)
            }
            _ => 0,
        }
    }

    pub fn residual_losses(&self) -> &[u64] {
        &self.skipped
    }

    fn store_known(&mut self, index: u64, payload: Option<Vec<Symbol>>) {
        if matches!(self.mode, Mode::Field { .. }) {
            let idx = (index - 1) as usize;
            if self.known.len() <= idx {
                self.known.resize(idx + 1, None);
            }
            self.known[idx] = payload;
        }
    }

    pub fn ingest<S: DeliverySink>(&mut self, slot: u64, event: SlotEvent, sink: &mut S) {
        match event {
            SlotEvent::Received(SlotPacket::Info { index, payload }) => {
                self.store_known(index, Some(payload.clone()));
                let block = self.block_of(index);
                let st = self.blocks.entry(block).or_insert_with(BlockState::new);
                st.buffered.push(Pending { index, tx_slot: slot, payload: Some(payload), recovered: false });
                self.release(slot, sink);
            }
            SlotEvent::ErasedInfo { index } => {
                let block = self.block_of(index);
                let st = self.blocks.entry(block).or_insert_with(BlockState::new);
                if st.failed {
                    // The block was already given up on; the loss is final.
                    self.skipped.push(index);
                    self.release(slot, sink);
                } else {
                    st.missing.push((index, slot));
                }
            }
            SlotEvent::ErasedCoded => {}
            SlotEvent::Received(SlotPacket::Coded(cp)) => {
                let block = self.block_of(cp.window.0);
                {
                    let st = self.blocks.entry(block).or_insert_with(BlockState::new);
                    if st.decoded || st.failed {
                        return;
                    }
                    st.received_coded += 1;
                }
                match &self.mode {
                    Mode::Ideal => {
                        let st = self.blocks.get_mut(&block).expect("present");
                        if st.received_coded >= st.missing.len() as u64 && !st.missing.is_empty() {
                            self.decode_block_ideal(block, slot);
                            self.release(slot, sink);
                        }
                    }
                    Mode::Field { field } => {
                        let field = Arc::clone(field);
                        if self.absorb_block_row(&field, block, &cp) {
                            let st = self.blocks.get_mut(&block).expect("present");
                            if !st.missing.is_empty() && st.rows.len() == st.missing.len() {
                                self.decode_block_field(&field, block, slot);
                                self.release(slot, sink);
                            }
                        } else {
                            self.dependence_events += 1;
                        }
                    }
                }
            }
        }
    }

    fn decode_block_ideal(&mut self, block: u64, _slot: u64) {
        let st = self.blocks.get_mut(&block).expect("present");
        st.decoded = true;
        for (index, tx_slot) in std::mem::take(&mut st.missing) {
            st.buffered.push(Pending { index, tx_slot, payload: None, recovered: true });
        }
    }

    fn absorb_block_row(&mut self, field: &Field, block: u64, cp: &CodedPacket) -> bool {
        let st = self.blocks.get_mut(&block).expect("present");
        let n = st.missing.len();
        if n == 0 {
            // Nothing missing: the row is trivially non-innovative for
            // recovery purposes.
            return false;
        }
        let mut coef = vec![0 as Symbol; n];
        for (pos, &(m, _)) in st.missing.iter().enumerate() {
            coef[pos] = cp.coefficient_for(m);
        }
        let mut payload = cp.payload.clone();
        for j in cp.window.0..=cp.window.1 {
            if st.missing.iter().any(|&(m, _)| m == j) {
                continue;
            }
            let w = cp.coefficient_for(j);
            if w == 0 {
                continue;
            }
            if let Some(u) = self.known.get((j - 1) as usize).and_then(|p| p.as_ref()) {
                for (acc, &sym) in payload.iter_mut().zip(u.iter()) {
                    *acc = field.add(*acc, field.mul(w, sym));
                    self.field_ops += 2;
                }
            }
        }
        for row in &st.rows {
            if row.pivot >= coef.len() || coef[row.pivot] == 0 {
                continue;
            }
            let factor = coef[row.pivot];
            for (pos, &rc) in row.coef.iter().enumerate() {
                if rc != 0 {
                    coef[pos] = field.add(coef[pos], field.mul(factor, rc));
                    self.field_ops += 2;
                }
            }
            for (pos, &rp) in row.payload.iter().enumerate() {
                payload[pos] = field.add(payload[pos], field.mul(factor, rp));
                self.field_ops += 2;
            }
        }
        let Some(pivot) = coef.iter().position(|&v| v != 0) else {
            return false;
        };
        let inv = field.inv(coef[pivot]).expect("pivot nonzero");
        self.field_ops += 1;
        for v in coef.iter_mut().skip(pivot) {
            if *v != 0 {
                *v = field.mul(*v, inv);
                self.field_ops += 1;
            }
        }
        for v in payload.iter_mut() {
            *v = field.mul(*v, inv);
            self.field_ops += 1;
        }
        let row = Row { coef, payload, pivot };
        let at = st.rows.partition_point(|r| r.pivot < row.pivot);
        st.rows.insert(at, row);
        true
    }

    fn decode_block_field(&mut self, field: &Field, block: u64, slot: u64) {
        let st = self.blocks.get_mut(&block).expect("present");
        let n = st.rows.len();
        for i in (0..n).rev() {
            let pivot = st.rows[i].pivot;
            let (upper, lower) = st.rows.split_at_mut(i);
            let src = &lower[0];
            for row in upper.iter_mut() {
                let factor = if pivot < row.coef.len() { row.coef[pivot] } else { 0 };
                if factor == 0 {
                    continue;
                }
                for (pos, &sc) in src.coef.iter().enumerate() {
                    if sc != 0 {
                        row.coef[pos] = field.add(row.coef[pos], field.mul(factor, sc));
                        self.field_ops += 2;
                    }
                }
                for (pos, &sp) in src.payload.iter().enumerate() {
                    row.payload[pos] = field.add(row.payload[pos], field.mul(factor, sp));
                    self.field_ops += 2;
                }
            }
        }
        st.decoded = true;
        let missing = std::mem::take(&mut st.missing);
        let payloads: Vec<Vec<Symbol>> = st.rows.iter().map(|r| r.payload.clone()).collect();
        let mut for_known = Vec::with_capacity(missing.len());
        for (pos, (index, tx_slot)) in missing.into_iter().enumerate() {
            st.buffered.push(Pending {
                index,
                tx_slot,
                payload: Some(payloads[pos].clone()),
                recovered: true,
            });
            for_known.push((index, payloads[pos].clone()));
        }
        for (index, payload) in for_known {
            self.store_known(index, Some(payload));
        }
        let _ = slot;
    }

    /// Give up on a block: its missing packets become residual losses and the
    /// in-order gate moves past them.
    pub fn declare_block_failed<S: DeliverySink>(&mut self, block: u64, slot: u64, sink: &mut S) {
        if let Some(st) = self.blocks.get_mut(&block) {
            if st.decoded || st.failed {
                return;
            }
            st.failed = true;
            for (index, _) in std::mem::take(&mut st.missing) {
                self.skipped.push(index);
            }
        }
        self.release(slot, sink);
    }

    /// Push every releasable packet out in order. A packet is releasable when
    /// all lower indices have been released or skipped.
    fn release<S: DeliverySink>(&mut self, slot: u64, sink: &mut S) {
        loop {
            let mut progressed = false;
            while self.skipped.contains(&self.next_release) {
                self.next_release += 1;
                progressed = true;
            }
            let block = self.block_of(self.next_release);
            if let Some(st) = self.blocks.get_mut(&block) {
                while let Some(pos) = st.buffered.iter().position(|p| p.index == self.next_release) {
                    let p = st.buffered.remove(pos);
                    sink.deliver(Delivery {
                        index: p.index,
                        tx_slot: p.tx_slot,
                        delivery_slot: slot,
                        recovered: p.recovered,
                        payload: p.payload,
                    });
                    self.next_release += 1;
                    progressed = true;
                }
            }
            if !progressed {
                break;
            }
        }
    }

    /// Outstanding packets at stream end.
    pub fn finish(&mut self) -> Undelivered {
        let mut missing = Vec::new();
        let mut buffered = Vec::new();
        for st in self.blocks.values() {
            missing.extend(st.missing.iter().map(|&(i, _)| i));
            buffered.extend(st.buffered.iter().map(|p| p.index));
        }
        missing.sort_unstable();
        buffered.sort_unstable();
        Undelivered { missing, buffered }
    }
}
