//! Closed-form delay, throughput and failure analytics for the slotted
//! streaming code, its grouped variant and the renewal machinery behind
//! them, together with exhaustive-enumeration oracles used to validate
//! every formula.

mod busy;
mod comb;
mod failure;
mod group;
mod kreweras;
mod oracle;

pub use busy::{
    busy_time_moments, busy_time_pmf, decoding_cost, delay_upper_bound, stream_log_pmf,
    throughput_tail, BusyMoments, BusyTimePmf, PmfParams,
};
pub use comb::{binomial_big, ln_binomial, ln_biguint, LnFactorial};
pub use failure::{
    admissible_profiles, corollary_failure_bound, exact_failure_numeric, full_rank_probability,
    numeric_failure_lower_bracket, pattern_zero_counts, rank_bounds, stream_failure_bound,
};
pub use group::{group_busy_pmf, group_delay_per_packet, group_np_count};
pub use kreweras::{
    kreweras_count, kreweras_count_determinant, kreweras_count_recursive, kreweras_enumerate,
};
pub use oracle::{oracle_busy_counts, OracleCode, OracleCounts, WindowCounts};

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum AnalysisError {
    #[error("busy time diverges: l*epsilon = {0} >= 1 (finite mean needs l*epsilon < 1)")]
    Divergent(f64),
    #[error("group busy time diverges: l_g*epsilon = {0} >= c = {1}")]
    DivergentGroup(f64, u32),
    #[error("invalid parameter: {0}")]
    BadParams(String),
    #[error("refusing oversized computation: {0}")]
    ResourceLimit(String),
    #[error("root finding failed to converge: {0}")]
    NonConvergence(String),
}

/// Compensated (Kahan) accumulator for long probability sums.
#[derive(Debug, Clone, Copy, Default)]
pub struct KahanSum {
    sum: f64,
    carry: f64,
}

impl KahanSum {
    pub fn add(&mut self, x: f64) {
        let y = x - self.carry;
        let t = self.sum + y;
        self.carry = (t - self.sum) - y;
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum
    }
}
