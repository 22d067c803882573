//! Decoding-failure probability over a finite field: per-busy-period rank
//! bounds, the renewal-weighted stream bound, its closed-form evaluation and
//! an exact numerical route over enumerated erasure patterns.

use super::busy::busy_time_pmf;
use super::comb::binomial_big;
use super::{AnalysisError, KahanSum};
use num_traits::ToPrimitive;

/// Bounds on the probability that an admissible k x k decoding matrix with
/// i.i.d. uniform coefficients over a field of size q has full rank:
/// lower = q/(q+1) (1 - q^-2)^k, upper = prod_{i=1..k} (1 - q^-i).
pub fn rank_bounds(k: u32, q: f64) -> (f64, f64) {
    assert!(k >= 1 && q >= 2.0);
    let upper: f64 = (1..=k).map(|i| 1.0 - q.powi(-(i as i32))).product();
    let lower = q / (q + 1.0) * (1.0 - q.powi(-2)).powi(k as i32);
    (lower, upper)
}

/// Column zero-counts of the decoding matrix induced by an erasure profile
/// (erasures per interval). Z_i counts the coded rows whose coverage ends
/// before the i-th erased packet.
pub fn pattern_zero_counts(profile: &[u32]) -> Vec<u32> {
    let k = profile.len();
    let mut prefix = Vec::with_capacity(k);
    let mut acc = 0u32;
    for &e in profile {
        acc += e;
        prefix.push(acc);
    }
    (1..=k as u32)
        .map(|i| prefix.iter().filter(|&&cum| cum < i).count() as u32)
        .collect()
}

/// Exact full-rank probability of the decoding matrix for one erasure
/// profile: prod_i (1 - q^{Z_i - i}).
pub fn full_rank_probability(profile: &[u32], q: f64) -> f64 {
    let z = pattern_zero_counts(profile);
    z.iter()
        .enumerate()
        .map(|(idx, &zi)| 1.0 - q.powi(zi as i32 - (idx as i32 + 1)))
        .product()
}

/// All erasure profiles (E_1, ..., E_k) of exactly k information-packet
/// erasures that keep recovery pending through interval k-1: cumulative
/// erasures strictly exceed the interval index before the end. Each E_z is
/// capped at the l-1 information slots of an interval.
pub fn admissible_profiles(k: u32, l: u32) -> Vec<Vec<u32>> {
    let mut out = Vec::new();
    if k == 1 {
        if l >= 2 {
            out.push(vec![1]);
        }
        return out;
    }
    let mut current = Vec::with_capacity(k as usize);
    fn recurse(k: u32, l: u32, placed: u32, current: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        let z = current.len() as u32;
        if z == k {
            if placed == k {
                out.push(current.clone());
            }
            return;
        }
        let remaining_intervals = k - z;
        for e in 0..=(k - placed).min(l - 1) {
            let new_placed = placed + e;
            // Admissibility: before the last interval, cumulative erasures
            // must stay strictly above the interval count.
            if z + 1 < k && new_placed < z + 2 {
                continue;
            }
            // Feasibility: the rest must fit in the remaining intervals.
            if (k - new_placed) > (remaining_intervals - 1) * (l - 1) {
                continue;
            }
            current.push(e);
            recurse(k, l, new_placed, current, out);
            current.pop();
        }
    }
    recurse(k, l, 0, &mut current, &mut out);
    out
}

/// Upper bound on the asymptotic per-packet decoding-failure probability:
/// the renewal-weighted series over busy lengths s >= 1 with the per-period
/// failure bounded through the rank lower bound, truncated at the certified
/// tolerance.
pub fn stream_failure_bound(
    l: u32,
    epsilon: f64,
    q: f64,
    tail_tolerance: f64,
) -> Result<f64, AnalysisError> {
    if q < 2.0 {
        return Err(AnalysisError::BadParams(format!("field size q = {q} must be >= 2")));
    }
    let pmf = busy_time_pmf(l, epsilon, tail_tolerance)?;
    if epsilon == 0.0 {
        return Ok(0.0);
    }
    let lf = l as f64;
    let alpha = (1.0 - lf * epsilon) / (lf * (1.0 - epsilon).powi(l as i32));
    let base = 1.0 - q.powi(-2);
    let qfrac = q / (q + 1.0);
    let mut acc = KahanSum::default();
    let mut basepow = 1.0;
    for s in 1..pmf.probs.len() {
        basepow *= base;
        acc.add((1.0 - qfrac * basepow) * pmf.probs[s]);
    }
    // Every series factor is below 1, so the truncated series tail is bounded
    // by the certified pmf tail mass; adding it keeps the result a bound.
    Ok(alpha * (acc.value() + pmf.tail_bound))
}

/// Closed-form evaluation of the failure bound. Returns (bound, eps0) where
/// eps0 solves eps0 (1-eps0)^{l-1} = (1 - q^-2) eps (1-eps)^{l-1}; the left
/// side is increasing below 1/l so bisection on [0, eps] always brackets.
pub fn corollary_failure_bound(l: u32, epsilon: f64, q: f64) -> Result<(f64, f64), AnalysisError> {
    if q < 2.0 {
        return Err(AnalysisError::BadParams(format!("field size q = {q} must be >= 2")));
    }
    let lf = l as f64;
    if lf * epsilon >= 1.0 {
        return Err(AnalysisError::Divergent(lf * epsilon));
    }
    if !(0.0..1.0).contains(&epsilon) {
        return Err(AnalysisError::BadParams(format!("epsilon = {epsilon} outside [0, 1)")));
    }
    if epsilon == 0.0 {
        return Ok((0.0, 0.0));
    }
    let g = |x: f64| x * (1.0 - x).powi(l as i32 - 1);
    let target = (1.0 - q.powi(-2)) * g(epsilon);
    let (mut lo, mut hi) = (0.0f64, epsilon);
    let mut eps0 = 0.5 * (lo + hi);
    let mut converged = false;
    for _ in 0..200 {
        eps0 = 0.5 * (lo + hi);
        let v = g(eps0);
        if (v - target).abs() <= 1e-16 * target.max(1e-300) || hi - lo < f64::EPSILON * epsilon {
            converged = true;
            break;
        }
        if v < target {
            lo = eps0;
        } else {
            hi = eps0;
        }
    }
    if !converged && (g(eps0) - target).abs() > 1e-12 * target {
        return Err(AnalysisError::NonConvergence(format!(
            "eps0 bisection residual {} at eps0 = {eps0}",
            g(eps0) - target
        )));
    }
    let alpha = (1.0 - lf * epsilon) / (lf * (1.0 - epsilon).powi(l as i32));
    let bound = alpha
        * (q / (q + 1.0) * (1.0 - eps0).powi(l as i32 - 1) - (1.0 - epsilon).powi(l as i32 - 1)
            + 1.0 / (q + 1.0));
    Ok((bound, eps0))
}

/// Exact renewal-weighted failure estimate over enumerated admissible
/// profiles up to busy length `k_max`: each profile is weighted by its
/// placement count and slot probabilities, with the matrix full-rank
/// probability evaluated exactly from its zero structure.
///
/// The enumeration model places exactly k information-packet erasures with
/// all k coded packets received, the regime in which the per-pattern rank
/// product applies.
pub fn exact_failure_numeric(
    l: u32,
    epsilon: f64,
    q: f64,
    k_max: u32,
) -> Result<f64, AnalysisError> {
    if q < 2.0 {
        return Err(AnalysisError::BadParams(format!("field size q = {q} must be >= 2")));
    }
    let lf = l as f64;
    if lf * epsilon >= 1.0 {
        return Err(AnalysisError::Divergent(lf * epsilon));
    }
    if k_max * l > 28 {
        return Err(AnalysisError::ResourceLimit(format!(
            "k_max * l = {} exceeds the enumeration budget of 28",
            k_max * l
        )));
    }
    if epsilon == 0.0 {
        return Ok(0.0);
    }
    let alpha = (1.0 - lf * epsilon) / (lf * (1.0 - epsilon).powi(l as i32));
    let mut acc = KahanSum::default();
    for k in 1..=k_max {
        let pattern_weight =
            epsilon.powi(k as i32) * (1.0 - epsilon).powi((k * (l - 1)) as i32);
        for profile in admissible_profiles(k, l) {
            let placements: f64 = profile
                .iter()
                .map(|&e| {
                    binomial_big((l - 1) as u64, e as u64)
                        .to_f64()
                        .expect("small binomial")
                })
                .product();
            let p_fail = 1.0 - full_rank_probability(&profile, q);
            acc.add(placements * pattern_weight * p_fail);
        }
    }
    Ok(alpha * acc.value())
}

/// Same renewal weighting with the per-profile failure replaced by the rank
/// upper bound; a certified lower bracket for [`exact_failure_numeric`].
pub fn numeric_failure_lower_bracket(
    l: u32,
    epsilon: f64,
    q: f64,
    k_max: u32,
) -> Result<f64, AnalysisError> {
    let lf = l as f64;
    if lf * epsilon >= 1.0 {
        return Err(AnalysisError::Divergent(lf * epsilon));
    }
    let alpha = (1.0 - lf * epsilon) / (lf * (1.0 - epsilon).powi(l as i32));
    let mut acc = KahanSum::default();
    for k in 1..=k_max {
        let (_, upper) = rank_bounds(k, q);
        let pattern_weight = epsilon.powi(k as i32) * (1.0 - epsilon).powi((k * (l - 1)) as i32);
        for profile in admissible_profiles(k, l) {
            let placements: f64 = profile
                .iter()
                .map(|&e| binomial_big((l - 1) as u64, e as u64).to_f64().expect("small"))
                .product();
            acc.add(placements * pattern_weight * (1.0 - upper));
        }
    }
    Ok(alpha * acc.value())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bounds_coincide_at_k1_k2() {
        for q in [2.0, 4.0, 256.0] {
            let (lo1, hi1) = rank_bounds(1, q);
            assert!((lo1 - hi1).abs() < 1e-15, "k=1 q={q}");
            assert!((lo1 - (1.0 - 1.0 / q)).abs() < 1e-15);
            let (lo2, hi2) = rank_bounds(2, q);
            assert!((lo2 - hi2).abs() < 1e-15, "k=2 q={q}");
            let algebra = (1.0 - q.powi(-2)) * (1.0 - 1.0 / q);
            assert!((hi2 - algebra).abs() < 1e-15);
        }
    }

    #[test]
    fn bounds_tend_to_one_for_large_q() {
        let (lo, hi) = rank_bounds(6, 1_f64 * 65536.0);
        assert!(lo > 0.9999 && hi > 0.9999 && lo <= hi);
    }

    #[test]
    fn zero_counts_worst_pattern_hits_lower_bound() {
        // E = (2, 1, 1, ..., 1, 0) maximises the zero structure and its rank
        // probability equals the lower bound.
        for k in 3..=8u32 {
            let mut profile = vec![2u32];
            profile.extend(std::iter::repeat_n(1, k as usize - 2));
            profile.push(0);
            let z = pattern_zero_counts(&profile);
            let expect: Vec<u32> = (1..=k).map(|i| i.saturating_sub(2)).collect();
            assert_eq!(z, expect, "k={k}");
            for q in [2.0, 4.0] {
                let p = full_rank_probability(&profile, q);
                let (lo, _) = rank_bounds(k, q);
                assert!((p - lo).abs() < 1e-14, "k={k} q={q}: {p} vs {lo}");
            }
        }
    }

    #[test]
    fn all_zeros_profile_hits_upper_bound() {
        // All erasures in the first interval: Z_i = 0 throughout.
        for k in 1..=6u32 {
            let mut profile = vec![k];
            profile.extend(std::iter::repeat_n(0, k as usize - 1));
            for q in [2.0, 4.0, 256.0] {
                let p = full_rank_probability(&profile, q);
                let (_, hi) = rank_bounds(k, q);
                assert!((p - hi).abs() < 1e-14, "k={k} q={q}");
            }
        }
    }

    #[test]
    fn profile_rank_probability_within_bounds() {
        for k in 1..=6u32 {
            for profile in admissible_profiles(k, 5) {
                for q in [2.0, 4.0] {
                    let p = full_rank_probability(&profile, q);
                    let (lo, hi) = rank_bounds(k, q);
                    assert!(
                        p >= lo - 1e-12 && p <= hi + 1e-12,
                        "profile {profile:?} q={q}: p={p} not in [{lo}, {hi}]"
                    );
                }
            }
        }
    }

    #[test]
    fn admissible_profiles_small_counts() {
        // k=1: single profile (1). k=2: E_1 = 2 (both erasures up front).
        assert_eq!(admissible_profiles(1, 4), vec![vec![1]]);
        assert_eq!(admissible_profiles(2, 4), vec![vec![2, 0]]);
        // k=3, l=4: E_1 >= 2, prefix_2 >= 3, total 3.
        let p3 = admissible_profiles(3, 4);
        assert_eq!(p3, vec![vec![2, 1, 0], vec![3, 0, 0]]);
    }

    #[test]
    fn series_matches_closed_form() {
        for l in [5u32, 7] {
            for eps in [0.05, 0.1] {
                for q in [4.0, 256.0] {
                    let series = stream_failure_bound(l, eps, q, 1e-14).unwrap();
                    let (closed, eps0) = corollary_failure_bound(l, eps, q).unwrap();
                    assert!(
                        (series - closed).abs() < 1e-10,
                        "l={l} eps={eps} q={q}: {series} vs {closed}"
                    );
                    assert!(eps0 < eps && eps0 > 0.0);
                }
            }
        }
    }

    #[test]
    fn eps0_frozen_value() {
        let (_, eps0) = corollary_failure_bound(5, 0.1, 2.0).unwrap();
        assert!((eps0 - 0.0642).abs() < 2e-4, "eps0 = {eps0}");
        // Residual of the defining equation.
        let g = |x: f64| x * (1.0 - x).powi(4);
        let resid = (g(eps0) - 0.75 * g(0.1)).abs();
        assert!(resid < 1e-12, "residual {resid}");
    }

    #[test]
    fn bound_decreases_in_q_and_vanishes() {
        let mut prev = f64::INFINITY;
        for q in [2.0, 4.0, 16.0, 256.0, 65536.0] {
            let (bound, _) = corollary_failure_bound(5, 0.1, q).unwrap();
            assert!(bound >= 0.0 && bound < prev, "q={q}: {bound} vs {prev}");
            prev = bound;
        }
        // q -> infinity limit: eps0 -> eps and the bound collapses to zero.
        let (b, eps0) = corollary_failure_bound(5, 0.1, 1e12).unwrap();
        assert!(b.abs() < 1e-9);
        assert!((eps0 - 0.1).abs() < 1e-9);
    }

    #[test]
    fn zero_epsilon_failure_is_zero() {
        assert_eq!(stream_failure_bound(5, 0.0, 4.0, 1e-12).unwrap(), 0.0);
        assert_eq!(exact_failure_numeric(5, 0.0, 4.0, 4).unwrap(), 0.0);
    }

    #[test]
    fn numeric_failure_bracketed() {
        let l = 5;
        let eps = 0.1;
        let q = 4.0;
        let exact = exact_failure_numeric(l, eps, q, 4).unwrap();
        let lower = numeric_failure_lower_bracket(l, eps, q, 4).unwrap();
        let upper = stream_failure_bound(l, eps, q, 1e-13).unwrap();
        assert!(
            lower <= exact && exact <= upper,
            "bracket violated: {lower} <= {exact} <= {upper}"
        );
    }

    #[test]
    fn numeric_failure_resource_guard() {
        assert!(matches!(
            exact_failure_numeric(8, 0.05, 4.0, 6),
            Err(AnalysisError::ResourceLimit(_))
        ));
    }
}
