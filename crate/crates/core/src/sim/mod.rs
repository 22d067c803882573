//! Slotted Monte Carlo simulator wiring the codecs to the erasure channels,
//! with renewal bookkeeping, delay accounting and reproducible seeding.

mod engine;

pub use engine::run_one;

use crate::analysis::KahanSum;
use crate::channel::ChannelModel;
use crate::codec::CodeParams;
use crate::rng::splitmix64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum SimError {
    #[error("invalid scenario: {0}")]
    BadScenario(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LoopMode {
    OpenLoop,
    ClosedLoop,
}

fn default_payload_len() -> usize {
    4
}

fn default_replications() -> u32 {
    1
}

fn default_field_bits() -> u32 {
    8
}

fn default_feedback_delay() -> u64 {
    1
}

fn default_true() -> bool {
    true
}

/// A complete simulation configuration. Deterministic: the report is a pure
/// function of this value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub code: CodeParams,
    pub channel: ChannelModel,
    /// Stream length in slots; padded up to a multiple of the code span.
    pub n_slots: u64,
    pub mode: LoopMode,
    /// Feedback latency in slots (closed loop).
    #[serde(default = "default_feedback_delay")]
    pub feedback_delay: u64,
    /// Unit-recovery decoding when true; finite-field decoding otherwise.
    #[serde(default = "default_true")]
    pub ideal_recovery: bool,
    /// Field width in bits for finite-field mode.
    #[serde(default = "default_field_bits")]
    pub field_bits: u32,
    /// Symbols per packet in finite-field mode.
    #[serde(default = "default_payload_len")]
    pub payload_len: usize,
    /// Rateless termination: extra coded packets after the last interval.
    #[serde(default)]
    pub tail_coded: u32,
    /// Base seed; per-replication seeds derive from it unless `seeds` is set.
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_replications")]
    pub replications: u32,
    /// Explicit per-replication seeds (overrides `seed` expansion).
    #[serde(default)]
    pub seeds: Vec<u64>,
}

impl Scenario {
    pub fn open_loop(code: CodeParams, channel: ChannelModel, n_slots: u64, seed: u64) -> Self {
        Scenario {
            code,
            channel,
            n_slots,
            mode: LoopMode::OpenLoop,
            feedback_delay: default_feedback_delay(),
            ideal_recovery: true,
            field_bits: default_field_bits(),
            payload_len: default_payload_len(),
            tail_coded: 0,
            seed,
            replications: 1,
            seeds: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        self.code
            .validate()
            .map_err(|e| SimError::BadScenario(e.to_string()))?;
        self.channel
            .validate()
            .map_err(|e| SimError::BadScenario(e.to_string()))?;
        if self.n_slots == 0 {
            return Err(SimError::BadScenario("n_slots must be positive".into()));
        }
        if self.mode == LoopMode::ClosedLoop {
            if self.feedback_delay < 1 {
                return Err(SimError::BadScenario(
                    "closed loop needs feedback_delay >= 1".into(),
                ));
            }
            if matches!(self.code, CodeParams::Group { .. }) {
                return Err(SimError::BadScenario(
                    "closed loop is supported for stream and block codes".into(),
                ));
            }
        }
        if !self.ideal_recovery && !(1..=16).contains(&self.field_bits) {
            return Err(SimError::BadScenario(format!(
                "field_bits = {} outside 1..=16",
                self.field_bits
            )));
        }
        if self.replications == 0 && self.seeds.is_empty() {
            return Err(SimError::BadScenario("no replications requested".into()));
        }
        Ok(())
    }

    /// Slots actually simulated: `n_slots` rounded up to whole intervals.
    pub fn padded_slots(&self) -> u64 {
        let span = self.code.span() as u64;
        self.n_slots.div_ceil(span) * span
    }

    pub fn replication_seeds(&self) -> Vec<u64> {
        if !self.seeds.is_empty() {
            return self.seeds.clone();
        }
        // Two-stage mix so that nearby base seeds never share replication
        // streams: distinct (seed, i) pairs collide only by u64 accident.
        let base = splitmix64(self.seed ^ 0x5EED_5EED_5EED_5EED);
        (0..self.replications)
            .map(|i| splitmix64(base ^ (i as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)))
            .collect()
    }
}

/// Metrics of one replication (or a merge of several).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub n_slots: u64,
    pub info_sent: u64,
    pub coded_sent: u64,
    pub delivered_info: u64,
    /// Erased packets never recovered (skipped blocks plus stream tail).
    pub residual_losses: u64,
    /// Received packets still blocked in the buffer at stream end.
    pub stranded_in_buffer: u64,
    /// Total in-order delay over delivered information packets, slots.
    pub delay_sum: u64,
    /// Delay histogram over delivered information packets.
    pub delay_hist: BTreeMap<u64, u64>,
    /// Busy-length histogram; index 0 counts idle intervals.
    pub busy_hist: Vec<u64>,
    /// Intervals covered by closed renewals (idle + busy).
    pub intervals_accounted: u64,
    pub dependence_events: u64,
    /// Field operations actually performed by the decoder.
    pub field_ops: u64,
    /// Cubic cost-model charge summed over busy periods.
    pub model_ops: f64,
}

impl RunMetrics {
    pub fn merge(&mut self, other: &RunMetrics) {
        self.n_slots += other.n_slots;
        self.info_sent += other.info_sent;
        self.coded_sent += other.coded_sent;
        self.delivered_info += other.delivered_info;
        self.residual_losses += other.residual_losses;
        self.stranded_in_buffer += other.stranded_in_buffer;
        self.delay_sum += other.delay_sum;
        for (&d, &c) in &other.delay_hist {
            *self.delay_hist.entry(d).or_insert(0) += c;
        }
        if self.busy_hist.len() < other.busy_hist.len() {
            self.busy_hist.resize(other.busy_hist.len(), 0);
        }
        for (i, &c) in other.busy_hist.iter().enumerate() {
            self.busy_hist[i] += c;
        }
        self.intervals_accounted += other.intervals_accounted;
        self.dependence_events += other.dependence_events;
        self.field_ops += other.field_ops;
        self.model_ops += other.model_ops;
    }

    /// Good throughput: delivered information packets over transmitted packets.
    pub fn good_throughput(&self) -> f64 {
        self.delivered_info as f64 / self.n_slots as f64
    }

    /// Residual packet erasure rate after coding.
    pub fn residual_per(&self) -> f64 {
        if self.info_sent == 0 {
            return 0.0;
        }
        self.residual_losses as f64 / self.info_sent as f64
    }

    /// Mean in-order delay per transmitted packet (the normalisation the
    /// renewal delay bound speaks to).
    pub fn mean_delay_per_slot(&self) -> f64 {
        self.delay_sum as f64 / self.n_slots as f64
    }

    /// Mean in-order delay per delivered information packet.
    pub fn mean_delay_per_info(&self) -> f64 {
        if self.delivered_info == 0 {
            return 0.0;
        }
        self.delay_sum as f64 / self.delivered_info as f64
    }

    /// Total busy periods (renewals with S >= 1).
    pub fn busy_periods(&self) -> u64 {
        self.busy_hist.iter().skip(1).sum()
    }

    pub fn model_ops_per_info(&self) -> f64 {
        if self.info_sent == 0 {
            return 0.0;
        }
        self.model_ops / self.info_sent as f64
    }
}

/// Simulation report: aggregate metrics plus the per-seed breakdown.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub scenario: Scenario,
    pub aggregate: RunMetrics,
    pub per_seed: Vec<(u64, RunMetrics)>,
}

impl SimReport {
    /// Standard error of the per-replication mean-delay-per-slot estimates.
    pub fn delay_std_error(&self) -> f64 {
        let n = self.per_seed.len();
        if n < 2 {
            return f64::INFINITY;
        }
        let means: Vec<f64> = self.per_seed.iter().map(|(_, m)| m.mean_delay_per_slot()).collect();
        let mut acc = KahanSum::default();
        for &m in &means {
            acc.add(m);
        }
        let mean = acc.value() / n as f64;
        let mut var = KahanSum::default();
        for &m in &means {
            var.add((m - mean) * (m - mean));
        }
        (var.value() / (n as f64 - 1.0) / n as f64).sqrt()
    }

    pub fn gt_samples(&self) -> Vec<f64> {
        self.per_seed.iter().map(|(_, m)| m.good_throughput()).collect()
    }
}

/// Run every replication (in parallel) and merge in seed order.
pub fn run(scenario: &Scenario) -> Result<SimReport, SimError> {
    scenario.validate()?;
    let seeds = scenario.replication_seeds();
    let per_seed: Vec<(u64, RunMetrics)> = seeds
        .par_iter()
        .map(|&seed| run_one(scenario, seed).map(|m| (seed, m)))
        .collect::<Result<_, _>>()?;
    let mut aggregate = RunMetrics::default();
    for (_, m) in &per_seed {
        aggregate.merge(m);
    }
    Ok(SimReport { scenario: scenario.clone(), aggregate, per_seed })
}

/// Good-throughput samples, one per replication. Defined for the open-loop
/// streaming layout without rateless termination, where the only possible
/// loss is a stream tail.
pub fn measure_gt(scenario: &Scenario) -> Result<Vec<f64>, SimError> {
    scenario.validate()?;
    if scenario.mode != LoopMode::OpenLoop
        || scenario.tail_coded != 0
        || !matches!(scenario.code, CodeParams::Stream { .. })
    {
        return Err(SimError::BadScenario(
            "good-throughput measurement needs an open-loop stream scenario without tail packets"
                .into(),
        ));
    }
    let seeds = scenario.replication_seeds();
    seeds
        .par_iter()
        .map(|&seed| run_one(scenario, seed).map(|m| m.good_throughput()))
        .collect()
}

/// Sweep axis for [`sweep`].
#[derive(Debug, Clone, PartialEq)]
pub enum SweepAxis {
    /// Stream code rate via l.
    StreamL(Vec<u32>),
    Epsilon(Vec<f64>),
    /// Grouped variant at fixed rate: l_g = c * l for a given l.
    GroupC { l: u32, c_values: Vec<u32> },
    /// Block dimension at fixed rate num/den: (n, k) = (den * m, num * m).
    BlockK { rate_num: u32, rate_den: u32, multiples: Vec<u32> },
}

/// One report per axis value, all sharing the template's seeds.
pub fn sweep(template: &Scenario, axis: &SweepAxis) -> Result<Vec<(f64, SimReport)>, SimError> {
    let mut out = Vec::new();
    match axis {
        SweepAxis::StreamL(ls) => {
            for &l in ls {
                let mut sc = template.clone();
                sc.code = CodeParams::Stream { l };
                out.push((l as f64, run(&sc)?));
            }
        }
        SweepAxis::Epsilon(es) => {
            for &eps in es {
                let mut sc = template.clone();
                sc.channel = match sc.channel {
                    ChannelModel::Iid { .. } => ChannelModel::Iid { epsilon: eps },
                    ChannelModel::GilbertElliott { expected_burst, .. } => {
                        ChannelModel::GilbertElliott { pi_b: eps, expected_burst }
                    }
                };
                out.push((eps, run(&sc)?));
            }
        }
        SweepAxis::GroupC { l, c_values } => {
            for &c in c_values {
                let mut sc = template.clone();
                sc.code = CodeParams::Group { lg: c * l, c };
                out.push((c as f64, run(&sc)?));
            }
        }
        SweepAxis::BlockK { rate_num, rate_den, multiples } => {
            for &m in multiples {
                let mut sc = template.clone();
                sc.code = CodeParams::Block { n: rate_den * m, k: rate_num * m };
                out.push(((rate_num * m) as f64, run(&sc)?));
            }
        }
    }
    Ok(out)
}
