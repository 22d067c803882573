//! Busy-time distribution of the streaming code and the renewal quantities
//! derived from it: moments, the mean in-order delay bound, decoding cost and
//! the good-throughput tail.
//!
//! Slots are grouped into embedded l-slot intervals ending in a coded packet.
//! The busy time S counts the coded packets transmitted while in-order
//! delivery is paused; idle intervals have S = 0.

use super::comb::{ln_binomial, LnFactorial};
use super::{AnalysisError, KahanSum};

/// Parameters a truncated busy-time distribution was computed for.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PmfParams {
    Stream { l: u32, epsilon: f64 },
    Group { lg: u32, c: u32, epsilon: f64 },
}

/// Truncated busy-time distribution with a certified tail.
///
/// `probs[s]` is P(S = s); everything beyond `probs.len() - 1` is covered by
/// `tail_bound`, a rigorous upper bound on the remaining mass obtained from
/// the binomial Chernoff bound on the erasure count.
#[derive(Debug, Clone)]
pub struct BusyTimePmf {
    pub params: PmfParams,
    pub probs: Vec<f64>,
    pub tail_bound: f64,
}

impl BusyTimePmf {
    pub fn s_max(&self) -> usize {
        self.probs.len() - 1
    }

    pub fn total_mass(&self) -> f64 {
        let mut acc = KahanSum::default();
        for &p in &self.probs {
            acc.add(p);
        }
        acc.value()
    }

    /// Sum of s^k * P(S = s) over the truncated support.
    pub fn moment(&self, k: u32) -> f64 {
        let mut acc = KahanSum::default();
        for (s, &p) in self.probs.iter().enumerate() {
            acc.add((s as f64).powi(k as i32) * p);
        }
        acc.value()
    }

    /// E(max(S, 1)): the number of intervals a renewal consumes.
    pub fn s_plus_mean(&self) -> f64 {
        let mut acc = KahanSum::default();
        for (s, &p) in self.probs.iter().enumerate() {
            acc.add((s.max(1)) as f64 * p);
        }
        acc.value()
    }
}

/// Per-interval geometric decay rate of the busy-time tail:
/// exp(-l * KL(1/l || eps)), the exact Chernoff rate of seeing at least k
/// erasures in k*l slots. Requires l*eps < 1.
pub(crate) fn stream_tail_rate_ln(l: u32, epsilon: f64) -> f64 {
    let lf = l as f64;
    if epsilon == 0.0 {
        return f64::NEG_INFINITY;
    }
    (lf * epsilon).ln() + (lf - 1.0) * (lf * (1.0 - epsilon) / (lf - 1.0)).ln()
}

fn check_stream_params(l: u32, epsilon: f64) -> Result<(), AnalysisError> {
    if l < 2 {
        return Err(AnalysisError::BadParams(format!("l = {l} must be >= 2")));
    }
    if !(0.0..1.0).contains(&epsilon) {
        return Err(AnalysisError::BadParams(format!(
            "epsilon = {epsilon} outside [0, 1)"
        )));
    }
    let le = l as f64 * epsilon;
    if le >= 1.0 {
        return Err(AnalysisError::Divergent(le));
    }
    Ok(())
}

/// ln P(S = s) for the streaming code, s >= 0.
pub fn stream_log_pmf(lf: &mut LnFactorial, l: u32, epsilon: f64, s: usize) -> f64 {
    let lfl = l as f64;
    if epsilon == 0.0 {
        return if s == 0 { 0.0 } else { f64::NEG_INFINITY };
    }
    match s {
        0 => (lfl - 1.0) * (1.0 - epsilon).ln(),
        1 => (lfl - 1.0).ln() + epsilon.ln() + (lfl - 1.0) * (1.0 - epsilon).ln(),
        s => {
            let sf = s as f64;
            (lfl - 1.0).ln() - sf.ln()
                + sf * epsilon.ln()
                + sf * (lfl - 1.0) * (1.0 - epsilon).ln()
                + ln_binomial(lf, (s - 1) * l as usize, s - 1)
        }
    }
}

/// Busy-time distribution truncated so the certified tail mass is at most
/// `tail_tolerance`.
pub fn busy_time_pmf(l: u32, epsilon: f64, tail_tolerance: f64) -> Result<BusyTimePmf, AnalysisError> {
    check_stream_params(l, epsilon)?;
    if !tail_tolerance.is_finite() || tail_tolerance <= 0.0 {
        return Err(AnalysisError::BadParams(
            "tail tolerance must be positive".into(),
        ));
    }
    if epsilon == 0.0 {
        return Ok(BusyTimePmf {
            params: PmfParams::Stream { l, epsilon },
            probs: vec![1.0, 0.0],
            tail_bound: 0.0,
        });
    }

    let ln_rho = stream_tail_rate_ln(l, epsilon);
    let lf = l as f64;
    let le = lf * epsilon;
    // Initial truncation guess from the normal-approximation tail exponent,
    // then extend to where the rigorous geometric rate certifies the mass.
    let s_guess = ((1.0 / (2.0 * tail_tolerance)).ln() * le * (1.0 - epsilon) / (1.0 - le).powi(2))
        .ceil() as usize;
    let s_cert = (tail_tolerance.ln() / ln_rho).ceil() as usize;
    let s_max = s_guess.max(s_cert).max(2);
    if s_max > 10_000_000 {
        return Err(AnalysisError::ResourceLimit(format!(
            "truncation point {s_max} too large for l*epsilon = {le}"
        )));
    }

    let mut lfac = LnFactorial::new();
    let probs: Vec<f64> = (0..=s_max)
        .map(|s| stream_log_pmf(&mut lfac, l, epsilon, s).exp())
        .collect();
    let tail_bound = (s_max as f64 * ln_rho).exp();
    Ok(BusyTimePmf {
        params: PmfParams::Stream { l, epsilon },
        probs,
        tail_bound,
    })
}

/// Closed-form busy-time moments and the renewal interval mean.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BusyMoments {
    pub e_s: f64,
    pub e_s2: f64,
    pub e_s3: f64,
    pub e_s_plus: f64,
}

pub fn busy_time_moments(l: u32, epsilon: f64) -> Result<BusyMoments, AnalysisError> {
    check_stream_params(l, epsilon)?;
    let lf = l as f64;
    let e = epsilon;
    let d = 1.0 - lf * e;
    let e_s = (lf - 1.0) * e * (1.0 - e).powi(l as i32 - 1) / d;
    let e_s2 = e_s + lf * (lf - 1.0) * e * e * (1.0 - e).powi(l as i32) / d.powi(3);
    let poly = 2.0 - 2.0 * e - 2.0 * lf * e * e + lf * e + lf * lf * e * e * e;
    let e_s3 = lf * (lf - 1.0) * e * e * (1.0 - e).powi(l as i32) * poly / d.powi(5) + e_s2;
    let e_s_plus = (1.0 - e).powi(l as i32) / d;
    Ok(BusyMoments { e_s, e_s2, e_s3, e_s_plus })
}

/// Upper bound on the asymptotic mean in-order delivery delay, in slots,
/// normalised per transmitted packet: E(S^2)(l-1) / (2 E(S+)).
pub fn delay_upper_bound(l: u32, epsilon: f64) -> Result<f64, AnalysisError> {
    let m = busy_time_moments(l, epsilon)?;
    Ok(m.e_s2 * (l as f64 - 1.0) / (2.0 * m.e_s_plus))
}

/// Expected decoder arithmetic per information packet under the cubic
/// elimination cost model: (3/2) (1 - l eps) / ((l-1)(1-eps)^l) E(S^3).
pub fn decoding_cost(l: u32, epsilon: f64) -> Result<f64, AnalysisError> {
    let m = busy_time_moments(l, epsilon)?;
    let lf = l as f64;
    Ok(1.5 * (1.0 - lf * epsilon) / ((lf - 1.0) * (1.0 - epsilon).powi(l as i32)) * m.e_s3)
}

/// Lower bound on Pr(GT > r0) for a stream of `n` slots: 1 - delta with
/// delta = (1/2) exp(-f (1-l eps)^2 / (l eps (1-eps))) and
/// f = n ((l-1)/l - r0) / (l-1).
pub fn throughput_tail(l: u32, epsilon: f64, n: u64, r0: f64) -> Result<f64, AnalysisError> {
    check_stream_params(l, epsilon)?;
    let lf = l as f64;
    let rate = (lf - 1.0) / lf;
    if r0 >= rate {
        return Err(AnalysisError::BadParams(format!(
            "r0 = {r0} must be below the code rate {rate}"
        )));
    }
    if epsilon == 0.0 {
        return Ok(1.0);
    }
    let f = n as f64 * (rate - r0) / (lf - 1.0);
    let le = lf * epsilon;
    let delta = 0.5 * (-f * (1.0 - le).powi(2) / (le * (1.0 - epsilon))).exp();
    Ok(1.0 - delta)
}
