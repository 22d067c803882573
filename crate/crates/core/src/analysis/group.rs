//! Busy-time distribution and delay accounting for the grouped scheme:
//! c coded packets at the end of every l_g-slot interval, protecting the
//! full history, with each received coded packet repairing one erasure.

use super::busy::{BusyTimePmf, PmfParams};
use super::comb::{ln_biguint, ln_binomial, LnFactorial};
use super::kreweras::kreweras_count;
use super::{AnalysisError, KahanSum};
use num_bigint::BigUint;
use num_traits::Zero;

fn check_group_params(lg: u32, c: u32) -> Result<(), AnalysisError> {
    if c < 1 || c >= lg {
        return Err(AnalysisError::BadParams(format!(
            "group shape needs 1 <= c < l_g, got c={c}, l_g={lg}"
        )));
    }
    Ok(())
}

/// Number of admissible erasure patterns with `s*c - p` erasures over
/// `s * l_g` slots: patterns that keep recovery pending through the first
/// s-1 intervals and let it finish in interval s.
///
/// An admissible pattern needs at least m*c + 1 erasures within the first
/// m*l_g slots for every m < s, i.e. the (m*c+1)-th erasure position u
/// satisfies u <= m*l_g. Rewriting positions as gaps reduces the count to a
/// dominated-sequence count.
pub fn group_np_count(lg: u32, c: u32, s: u32, p: u32) -> Result<BigUint, AnalysisError> {
    check_group_params(lg, c)?;
    if s < 2 {
        return Err(AnalysisError::BadParams(format!("s = {s} must be >= 2")));
    }
    if p >= c {
        return Err(AnalysisError::BadParams(format!(
            "p = {p} must be below c = {c}"
        )));
    }
    let n = (s * c - p) as u64;
    let slots = s as u64 * lg as u64;
    if n > slots {
        return Ok(BigUint::zero());
    }

    // Bound on u_j - j: the tightest of the interval constraints at or after
    // index j, each translated down along the strictly increasing positions.
    let gap = (lg - c) as u64;
    let bounds: Vec<u64> = (1..=n)
        .map(|j| {
            let m_req = (j - 1).div_ceil(c as u64).max(1);
            if m_req < s as u64 {
                m_req * gap - 1
            } else {
                s as u64 * gap + p as u64
            }
        })
        .collect();
    kreweras_count(&bounds)
}

/// Per-interval geometric decay rate of the group busy-time tail, from the
/// binomial Chernoff bound on seeing >= k*c erasures in k*l_g slots.
fn group_tail_rate_ln(lg: u32, c: u32, epsilon: f64) -> f64 {
    if epsilon == 0.0 {
        return f64::NEG_INFINITY;
    }
    let lgf = lg as f64;
    let cf = c as f64;
    cf * (lgf * epsilon / cf).ln() + (lgf - cf) * (lgf * (1.0 - epsilon) / (lgf - cf)).ln()
}

/// Busy-time distribution of the grouped scheme with certified tail.
pub fn group_busy_pmf(
    lg: u32,
    c: u32,
    epsilon: f64,
    tail_tolerance: f64,
) -> Result<BusyTimePmf, AnalysisError> {
    check_group_params(lg, c)?;
    if !(0.0..1.0).contains(&epsilon) {
        return Err(AnalysisError::BadParams(format!(
            "epsilon = {epsilon} outside [0, 1)"
        )));
    }
    if !tail_tolerance.is_finite() || tail_tolerance <= 0.0 {
        return Err(AnalysisError::BadParams(
            "tail tolerance must be positive".into(),
        ));
    }
    let lge = lg as f64 * epsilon;
    if lge >= c as f64 {
        return Err(AnalysisError::DivergentGroup(lge, c));
    }
    let params = PmfParams::Group { lg, c, epsilon };
    if epsilon == 0.0 {
        return Ok(BusyTimePmf { params, probs: vec![1.0, 0.0], tail_bound: 0.0 });
    }

    let ln_rho = group_tail_rate_ln(lg, c, epsilon);
    let s_guess = ((1.0 / (2.0 * tail_tolerance)).ln() * lge * (1.0 - epsilon)
        / (c as f64 - lge).powi(2))
    .ceil() as usize;
    let s_cert = (tail_tolerance.ln() / ln_rho).ceil() as usize;
    let s_max = s_guess.max(s_cert).max(2);
    // The per-term lattice counts grow quadratically expensive in s*c; refuse
    // configurations whose certified truncation point is impractical.
    if s_max > 600 {
        return Err(AnalysisError::ResourceLimit(format!(
            "group pmf needs {s_max} terms at l_g*eps = {lge}, c = {c}"
        )));
    }

    let ln_eps = epsilon.ln();
    let ln_1me = (1.0 - epsilon).ln();
    let mut lf = LnFactorial::new();

    let mut probs = Vec::with_capacity(s_max + 1);
    probs.push(((lg - c) as f64 * ln_1me).exp());

    // One interval: at least one information erasure, all of them repaired by
    // the interval's coded packets.
    let mut p1 = KahanSum::default();
    for i in 1..=c.min(lg - c) {
        for j in 0..=(c - i) {
            let ln_term = ln_binomial(&mut lf, (lg - c) as usize, i as usize)
                + ln_binomial(&mut lf, c as usize, j as usize)
                + (i + j) as f64 * ln_eps
                + (lg - i - j) as f64 * ln_1me;
            p1.add(ln_term.exp());
        }
    }
    probs.push(p1.value());

    for s in 2..=s_max as u32 {
        let mut acc = KahanSum::default();
        for p in 0..c {
            let np = group_np_count(lg, c, s, p)?;
            if np.is_zero() {
                continue;
            }
            let erasures = (s * c - p) as f64;
            let slots = (s * lg) as f64;
            let ln_term = ln_biguint(&np) + erasures * ln_eps + (slots - erasures) * ln_1me;
            acc.add(ln_term.exp());
        }
        probs.push(acc.value());
    }

    let tail_bound = (s_max as f64 * ln_rho).exp();
    Ok(BusyTimePmf { params, probs, tail_bound })
}

/// Analytic mean in-order delay of the grouped scheme at the matched rate
/// l_g = c*l, in slots per transmitted packet.
///
/// Uses the triangle sum-delay accounting over a busy period of s intervals,
/// with coded-slot contributions removed, normalised by the renewal interval:
/// (l_g - c) (l_g E(S^2) + (c-1) E(S)) / (2 l_g E(S+)). Reduces to the
/// streaming-code delay bound at c = 1.
pub fn group_delay_per_packet(l: u32, c: u32, epsilon: f64) -> Result<f64, AnalysisError> {
    if l < 2 {
        return Err(AnalysisError::BadParams(format!("l = {l} must be >= 2")));
    }
    let lg = c
        .checked_mul(l)
        .ok_or_else(|| AnalysisError::BadParams("l_g = c*l overflows".into()))?;
    let pmf = group_busy_pmf(lg, c, epsilon, 1e-12)?;
    let e_s = pmf.moment(1);
    let e_s2 = pmf.moment(2);
    let e_s_plus = pmf.s_plus_mean();
    let lgf = lg as f64;
    let cf = c as f64;
    Ok((lgf - cf) * (lgf * e_s2 + (cf - 1.0) * e_s) / (2.0 * lgf * e_s_plus))
}
