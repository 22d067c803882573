//! Exhaustive-pattern oracle for the busy-time distributions.
//!
//! For each busy length s the oracle enumerates every erasure pattern over a
//! window of exactly s intervals, classifies the renewal that starts at the
//! first slot with the unit-recovery decoder semantics, and tallies exact
//! integer pattern counts by total erasure count. The resulting counts give
//! both exact admissible-pattern counts and, weighted by slot probabilities,
//! an independent evaluation of the busy-time pmf.

use super::{AnalysisError, KahanSum};
use rayon::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OracleCode {
    Stream { l: u32 },
    Group { lg: u32, c: u32 },
}

impl OracleCode {
    pub fn span(&self) -> u32 {
        match *self {
            OracleCode::Stream { l } => l,
            OracleCode::Group { lg, .. } => lg,
        }
    }

    pub fn coded_per_interval(&self) -> u32 {
        match *self {
            OracleCode::Stream { .. } => 1,
            OracleCode::Group { c, .. } => c,
        }
    }

    fn validate(&self) -> Result<(), AnalysisError> {
        match *self {
            OracleCode::Stream { l } if l < 2 => {
                Err(AnalysisError::BadParams(format!("l = {l} must be >= 2")))
            }
            OracleCode::Group { lg, c } if c < 1 || c >= lg => Err(AnalysisError::BadParams(
                format!("group shape needs 1 <= c < l_g, got c={c}, l_g={lg}"),
            )),
            _ => Ok(()),
        }
    }
}

/// Exact pattern counts for busy length `s`: `by_erasures[e]` is the number
/// of erasure patterns over `window` slots with `e` erasures total whose
/// first renewal has S = s.
#[derive(Debug, Clone)]
pub struct WindowCounts {
    pub s: u32,
    pub window: u32,
    pub by_erasures: Vec<u64>,
}

impl WindowCounts {
    /// Probability of the bucket at slot erasure probability `epsilon`.
    pub fn probability(&self, epsilon: f64) -> f64 {
        let mut acc = KahanSum::default();
        for (e, &count) in self.by_erasures.iter().enumerate() {
            if count > 0 {
                acc.add(
                    count as f64
                        * epsilon.powi(e as i32)
                        * (1.0 - epsilon).powi(self.window as i32 - e as i32),
                );
            }
        }
        acc.value()
    }
}

#[derive(Debug, Clone)]
pub struct OracleCounts {
    pub code: OracleCode,
    /// Index s = 0..=s_max.
    pub windows: Vec<WindowCounts>,
}

impl OracleCounts {
    pub fn pmf(&self, epsilon: f64) -> Vec<f64> {
        self.windows.iter().map(|w| w.probability(epsilon)).collect()
    }
}

/// Outcome of running the unit-recovery decoder over one pattern.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Classified {
    BusyEnds(u32),
    Idle,
    Ongoing,
}

/// First-renewal classification. Slots are numbered 1..=n_slots; the last
/// `c` slots of each span-slot interval carry coded packets (set bits of
/// `coded_mask`). A renewal is idle when interval 1 has no
/// information-packet erasure; otherwise the busy period runs until a
/// received coded packet clears the last pending erasure, each received
/// coded packet repairing exactly one.
fn classify(pattern: u32, coded_mask: u32, span: u32, n_slots: u32) -> Classified {
    let mut queue = 0u32;
    let mut started = false;
    let mut bit = 1u32;
    let mut interval = 1u32;
    let mut pos = 0u32;
    for slot in 1..=n_slots {
        let coded = coded_mask & bit != 0;
        let erased = pattern & bit != 0;
        if erased {
            if !coded {
                started = true;
                queue += 1;
            }
            // An erased coded packet neither serves nor pends.
        } else if coded && started {
            // queue is nonzero while the busy period is open.
            queue -= 1;
            if queue == 0 {
                return Classified::BusyEnds(interval);
            }
        }
        if slot == span && !started {
            return Classified::Idle;
        }
        bit <<= 1;
        pos += 1;
        if pos == span {
            pos = 0;
            interval += 1;
        }
    }
    Classified::Ongoing
}

fn coded_mask_for(span: u32, c: u32, n_slots: u32) -> u32 {
    let mut mask = 0u32;
    for slot in 1..=n_slots {
        let pos = (slot - 1) % span;
        if pos >= span - c {
            mask |= 1 << (slot - 1);
        }
    }
    mask
}

/// Enumerate every pattern for busy lengths 0..=s_max. Windows beyond 26
/// slots are refused.
pub fn oracle_busy_counts(code: OracleCode, s_max: u32) -> Result<OracleCounts, AnalysisError> {
    code.validate()?;
    let span = code.span();
    let c = code.coded_per_interval();
    let max_window = span as u64 * s_max.max(1) as u64;
    if max_window > 26 {
        return Err(AnalysisError::ResourceLimit(format!(
            "enumeration window of {max_window} slots exceeds the budget of 26"
        )));
    }

    let mut windows = Vec::with_capacity(s_max as usize + 1);
    for s in 0..=s_max {
        let window = span * s.max(1);
        let want = if s == 0 { Classified::Idle } else { Classified::BusyEnds(s) };
        let mask = coded_mask_for(span, c, window);
        // The pattern space is disjoint; tally chunks in parallel and sum.
        let chunks = 1u32 << window.min(8);
        let per_chunk = (1u32 << window) / chunks;
        let by_erasures = (0..chunks)
            .into_par_iter()
            .map(|chunk| {
                let mut counts = vec![0u64; window as usize + 1];
                let base = chunk * per_chunk;
                for pattern in base..base + per_chunk {
                    if classify(pattern, mask, span, window) == want {
                        counts[pattern.count_ones() as usize] += 1;
                    }
                }
                counts
            })
            .reduce(
                || vec![0u64; window as usize + 1],
                |mut a, b| {
                    for (x, y) in a.iter_mut().zip(b) {
                        *x += y;
                    }
                    a
                },
            );
        windows.push(WindowCounts { s, window, by_erasures });
    }
    Ok(OracleCounts { code, windows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::{busy_time_pmf, group_busy_pmf, group_np_count};
    use num_traits::ToPrimitive;

    #[test]
    fn idle_classification_counts_p0() {
        // Stream l=3: idle patterns are those with both info slots clean.
        let counts = oracle_busy_counts(OracleCode::Stream { l: 3 }, 0).unwrap();
        let idle = &counts.windows[0];
        // e=0: 1 pattern; e=1: only the coded slot erased.
        assert_eq!(idle.by_erasures, vec![1, 1, 0, 0]);
        let p0 = idle.probability(0.1);
        assert!((p0 - 0.81).abs() < 1e-15);
    }

    #[test]
    fn stream_oracle_matches_closed_form() {
        // The per-length formula is exact for every eps in (0, 1), including
        // the heavy-traffic region where the full distribution is refused,
        // so compare against the raw log-pmf evaluation.
        use crate::analysis::{stream_log_pmf, LnFactorial};
        for l in [2u32, 3, 4] {
            let s_max = 20 / l;
            let counts = oracle_busy_counts(OracleCode::Stream { l }, s_max).unwrap();
            for eps in [0.1, 0.3] {
                let oracle = counts.pmf(eps);
                let mut lf = LnFactorial::new();
                for s in 0..=s_max as usize {
                    let formula = stream_log_pmf(&mut lf, l, eps, s).exp();
                    assert!(
                        (oracle[s] - formula).abs() < 1e-12,
                        "l={l} eps={eps} s={s}: {} vs {}",
                        oracle[s],
                        formula
                    );
                }
            }
        }
    }

    #[test]
    fn smallest_code_l2() {
        // l=2: p(2) covers patterns of exactly 2 erasures over 4 slots with
        // both in the first interval; probability eps^2 (1-eps)^2.
        let counts = oracle_busy_counts(OracleCode::Stream { l: 2 }, 2).unwrap();
        let eps = 0.3;
        let p2 = counts.windows[2].probability(eps);
        assert!((p2 - eps * eps * (1.0 - eps) * (1.0 - eps)).abs() < 1e-15);
    }

    #[test]
    fn group_oracle_matches_np_counts() {
        let (lg, c) = (4u32, 2u32);
        let counts = oracle_busy_counts(OracleCode::Group { lg, c }, 3).unwrap();
        for s in 2..=3u32 {
            let w = &counts.windows[s as usize];
            for p in 0..c {
                let e = (s * c - p) as usize;
                let np = group_np_count(lg, c, s, p).unwrap().to_u64().unwrap();
                assert_eq!(w.by_erasures[e], np, "s={s} p={p}");
            }
        }
    }

    #[test]
    fn group_oracle_matches_pmf() {
        let (lg, c, eps) = (4u32, 2u32, 0.1);
        let counts = oracle_busy_counts(OracleCode::Group { lg, c }, 3).unwrap();
        let oracle = counts.pmf(eps);
        let formula = group_busy_pmf(lg, c, eps, 1e-13).unwrap();
        for s in 0..=3usize {
            assert!(
                (oracle[s] - formula.probs[s]).abs() < 1e-12,
                "s={s}: {} vs {}",
                oracle[s],
                formula.probs[s]
            );
        }
    }

    #[test]
    fn boundary_divergence_flagged_by_mass_deficit() {
        // At l=2, eps=1/2 the busy process sits on the divergence boundary:
        // the enumerated prefix cannot account for all mass and the closed
        // form refuses the parameters.
        let counts = oracle_busy_counts(OracleCode::Stream { l: 2 }, 5).unwrap();
        let total: f64 = counts.pmf(0.5).iter().sum();
        assert!(total < 0.95, "prefix mass {total} should fall clearly short of 1");
        assert!(busy_time_pmf(2, 0.5, 1e-9).is_err());
    }

    #[test]
    fn oversized_window_refused() {
        assert!(matches!(
            oracle_busy_counts(OracleCode::Stream { l: 4 }, 10),
            Err(AnalysisError::ResourceLimit(_))
        ));
    }

    #[test]
    fn admissible_fraction_is_r_over_k() {
        // With r pending erasures at the start, place k-r further erasures
        // anywhere in k intervals of l slots. The pattern keeps recovery
        // pending through interval k-1 iff the cumulative count in the first
        // m intervals is at least m-r+1. Exactly r/k of all placements
        // qualify; checked as an exact integer identity.
        fn admissible(positions: &[usize], r: u32, k: u32, l: u32) -> bool {
            for m in 1..k {
                let cum = positions.iter().filter(|&&p| p < (m * l) as usize).count() as i64;
                if cum < m as i64 - r as i64 + 1 {
                    return false;
                }
            }
            true
        }
        for l in [2u32, 3] {
            for k in 2..=5u32 {
                for r in 1..k {
                    let slots = k * l;
                    let picks = k - r;
                    let mut total = 0u64;
                    let mut good = 0u64;
                    for mask in 0u32..(1 << slots) {
                        if mask.count_ones() != picks {
                            continue;
                        }
                        total += 1;
                        let positions: Vec<usize> =
                            (0..slots as usize).filter(|&p| mask & (1 << p) != 0).collect();
                        if admissible(&positions, r, k, l) {
                            good += 1;
                        }
                    }
                    assert_eq!(
                        good * k as u64,
                        r as u64 * total,
                        "l={l} k={k} r={r}: {good}/{total}"
                    );
                }
            }
        }
    }
}
