//! Oracle cross-check battery: every analytic result is exercised against an
//! independent route (exhaustive enumeration, Monte Carlo measurement, or an
//! alternative algebraic evaluation), each with a pinned tolerance. The CLI
//! `validate` command and the acceptance test suite both run these checks.

use crate::analysis::{
    admissible_profiles, binomial_big, busy_time_pmf, corollary_failure_bound, decoding_cost,
    delay_upper_bound, full_rank_probability, group_busy_pmf, group_delay_per_packet,
    group_np_count, kreweras_count, kreweras_count_determinant, kreweras_count_recursive,
    kreweras_enumerate, oracle_busy_counts, rank_bounds, stream_failure_bound, throughput_tail,
    AnalysisError, OracleCode,
};
use crate::channel::ChannelModel;
use crate::codec::CodeParams;
use crate::gf::{self, Field, FieldSpec};
use crate::rng::Rng;
use crate::sim::{measure_gt, run, Scenario};
use num_bigint::BigInt;
use num_traits::ToPrimitive;
use std::time::Instant;

#[derive(Debug, Clone)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

type CheckFn = fn() -> Result<String, String>;

pub const CHECK_NAMES: [&str; 13] = [
    "normalization",
    "stream-oracle",
    "group-oracle",
    "kreweras",
    "binomial-identity",
    "busy-histogram-mc",
    "delay-bound",
    "decoding-cost",
    "group-delay-monotone",
    "rank-bounds-mc",
    "failure-closed-form",
    "throughput-bound-mc",
    "exclusions",
];

fn checks() -> Vec<(&'static str, CheckFn)> {
    vec![
        ("normalization", check_normalization),
        ("stream-oracle", check_stream_oracle),
        ("group-oracle", check_group_oracle),
        ("kreweras", check_kreweras),
        ("binomial-identity", check_binomial_identity),
        ("busy-histogram-mc", check_busy_histogram_mc),
        ("delay-bound", check_delay_bound),
        ("decoding-cost", check_decoding_cost),
        ("group-delay-monotone", check_group_delay_monotone),
        ("rank-bounds-mc", check_rank_bounds_mc),
        ("failure-closed-form", check_failure_closed_form),
        ("throughput-bound-mc", check_throughput_bound_mc),
        ("exclusions", check_exclusions),
    ]
}

/// Run the battery, optionally restricted to the named checks.
pub fn run_checks(only: Option<&[String]>) -> Vec<CheckOutcome> {
    checks()
        .into_iter()
        .filter(|(name, _)| only.is_none_or(|sel| sel.iter().any(|s| s == name)))
        .map(|(name, f)| {
            let start = Instant::now();
            let result = f();
            let seconds = start.elapsed().as_secs_f64();
            match result {
                Ok(detail) => CheckOutcome { name, passed: true, detail, seconds },
                Err(detail) => CheckOutcome { name, passed: false, detail, seconds },
            }
        })
        .collect()
}

// ---------------------------------------------------------------------------
// 1. Normalization of the truncated busy-time pmf with certified tail.
// ---------------------------------------------------------------------------

fn check_normalization() -> Result<String, String> {
    let mut worst: f64 = 0.0;
    for l in 2..=10u32 {
        for step in 1..=9u32 {
            let eps = 0.1 * step as f64 / l as f64;
            let pmf = busy_time_pmf(l, eps, 1e-12)
                .map_err(|e| format!("l={l} eps={eps}: {e}"))?;
            let dev = (pmf.total_mass() + pmf.tail_bound - 1.0).abs();
            worst = worst.max(dev);
            if dev > 1e-9 {
                return Err(format!("l={l} eps={eps:.4}: |mass-1| = {dev:.3e} > 1e-9"));
            }
        }
    }
    Ok(format!("90 grid points, worst |mass-1| = {worst:.2e} (<= 1e-9)"))
}

// ---------------------------------------------------------------------------
// 2. Busy-time pmf vs exhaustive-pattern oracle (streaming layout).
// ---------------------------------------------------------------------------

fn check_stream_oracle() -> Result<String, String> {
    use crate::analysis::{stream_log_pmf, LnFactorial};
    let mut worst: f64 = 0.0;
    for l in [2u32, 3, 4] {
        let s_max = 20 / l;
        let counts =
            oracle_busy_counts(OracleCode::Stream { l }, s_max).map_err(|e| e.to_string())?;
        // The per-length formula holds for every eps in (0, 1); at l=4,
        // eps=0.3 the mean diverges but the probabilities stay exact, so the
        // comparison goes through the raw log-pmf rather than the truncated
        // distribution (which rightly refuses that regime).
        for eps in [0.1, 0.3] {
            let oracle = counts.pmf(eps);
            let mut lf = LnFactorial::new();
            for s in 0..=s_max as usize {
                let formula = stream_log_pmf(&mut lf, l, eps, s).exp();
                let diff = (oracle[s] - formula).abs();
                worst = worst.max(diff);
                if diff > 1e-12 {
                    return Err(format!(
                        "l={l} eps={eps} s={s}: oracle {} vs formula {formula} (diff {diff:.3e})",
                        oracle[s]
                    ));
                }
            }
        }
    }
    Ok(format!("l in {{2,3,4}}, k <= 20/l, eps in {{0.1,0.3}}; worst diff {worst:.2e} (<= 1e-12)"))
}

// ---------------------------------------------------------------------------
// 3. Group pattern counts and pmf vs enumeration; c = 1 reduction.
// ---------------------------------------------------------------------------

fn check_group_oracle() -> Result<String, String> {
    let mut worst: f64 = 0.0;
    let mut np_checked = 0u64;
    for lg in 2..=6u32 {
        for c in 1..=3u32.min(lg - 1) {
            let s_max = (24 / lg).clamp(2, 4);
            let counts = oracle_busy_counts(OracleCode::Group { lg, c }, s_max)
                .map_err(|e| e.to_string())?;
            // Exact admissible-pattern counts.
            for s in 2..=s_max {
                let w = &counts.windows[s as usize];
                for p in 0..c {
                    let e = (s * c - p) as usize;
                    let enumerated = w.by_erasures.get(e).copied().unwrap_or(0);
                    let np = group_np_count(lg, c, s, p)
                        .map_err(|e| e.to_string())?
                        .to_u64()
                        .ok_or("count overflow")?;
                    if np != enumerated {
                        return Err(format!(
                            "NP(lg={lg}, c={c}, s={s}, p={p}) = {np} but enumeration gives {enumerated}"
                        ));
                    }
                    np_checked += 1;
                }
            }
            // Probability route.
            let eps = 0.1;
            let oracle = counts.pmf(eps);
            let formula = group_busy_pmf(lg, c, eps, 1e-13).map_err(|e| e.to_string())?;
            for s in 0..=s_max as usize {
                let diff = (oracle[s] - formula.probs[s]).abs();
                worst = worst.max(diff);
                if diff > 1e-12 {
                    return Err(format!(
                        "pmf lg={lg} c={c} s={s}: oracle {} vs formula {} (diff {diff:.3e})",
                        oracle[s], formula.probs[s]
                    ));
                }
            }
        }
    }
    // c = 1 must reduce to the streaming distribution.
    for (l, eps) in [(4u32, 0.1f64), (6, 0.12)] {
        let group = group_busy_pmf(l, 1, eps, 1e-12).map_err(|e| e.to_string())?;
        let stream = busy_time_pmf(l, eps, 1e-12).map_err(|e| e.to_string())?;
        for s in 0..group.probs.len().min(stream.probs.len()) {
            let diff = (group.probs[s] - stream.probs[s]).abs();
            if diff > 1e-12 {
                return Err(format!("c=1 reduction l={l} s={s}: diff {diff:.3e}"));
            }
        }
    }
    Ok(format!(
        "{np_checked} pattern counts exact; pmf worst diff {worst:.2e}; c=1 reduction <= 1e-12"
    ))
}

// ---------------------------------------------------------------------------
// 4. Dominated-sequence counts: determinant == enumeration; +1 convention.
// ---------------------------------------------------------------------------

fn check_kreweras() -> Result<String, String> {
    // The convention probe: enumeration gives 5 on a = (1, 2); the binomial
    // form with +1 agrees, the bare form gives 4.
    let probe = [1u64, 2];
    let enumerated = kreweras_enumerate(&probe).to_u64().unwrap();
    let with = kreweras_count_recursive(&probe, true).map_err(|e| e.to_string())?;
    let without = kreweras_count_recursive(&probe, false).map_err(|e| e.to_string())?;
    if enumerated != 5 || with != BigInt::from(5) || without != BigInt::from(4) {
        return Err(format!(
            "convention probe failed: enumeration {enumerated}, +1 form {with}, bare form {without}"
        ));
    }

    fn strictly_increasing(max: u64, len: usize) -> Vec<Vec<u64>> {
        let mut out = Vec::new();
        let mut buf = Vec::new();
        fn gen(start: u64, max: u64, len: usize, buf: &mut Vec<u64>, out: &mut Vec<Vec<u64>>) {
            if buf.len() == len {
                out.push(buf.clone());
                return;
            }
            for v in start..=max {
                buf.push(v);
                gen(v + 1, max, len, buf, out);
                buf.pop();
            }
        }
        gen(0, max, len, &mut buf, &mut out);
        out
    }

    let mut total = 0u64;
    for n in 1..=6usize {
        for a in strictly_increasing(8, n) {
            let oracle = kreweras_enumerate(&a);
            let det = kreweras_count_determinant(&a).map_err(|e| e.to_string())?;
            let rec = kreweras_count(&a).map_err(|e| e.to_string())?;
            if det != oracle || rec != oracle {
                return Err(format!("mismatch for a = {a:?}: det {det}, rec {rec}, oracle {oracle}"));
            }
            total += 1;
        }
    }
    Ok(format!("{total} strictly increasing sequences (entries <= 8, n <= 6) verified; +1 convention asserted"))
}

// ---------------------------------------------------------------------------
// 5. Exact binomial identity behind the busy-time coefficient.
// ---------------------------------------------------------------------------

fn check_binomial_identity() -> Result<String, String> {
    use num_bigint::BigUint;
    let mut cases = 0u64;
    for k in 2..=40u64 {
        for l in 2..=12u64 {
            let mut lhs = BigUint::from(0u32);
            for r in 2..=k.min(l) {
                lhs += binomial_big(l, r) * binomial_big(l * (k - 1), k - r) * (r - 1);
            }
            let rhs = binomial_big((k - 1) * l, k);
            if lhs != rhs {
                return Err(format!("identity fails at k={k}, l={l}: {lhs} vs {rhs}"));
            }
            cases += 1;
        }
    }
    Ok(format!("{cases} (k, l) pairs verified in exact integer arithmetic"))
}

// ---------------------------------------------------------------------------
// 6. Monte Carlo busy-length histogram vs the analytic distribution.
// ---------------------------------------------------------------------------

fn check_busy_histogram_mc() -> Result<String, String> {
    let mut scenario = Scenario::open_loop(
        CodeParams::Stream { l: 5 },
        ChannelModel::Iid { epsilon: 0.1 },
        2_500_000,
        20260101,
    );
    scenario.replications = 8;
    let report = run(&scenario).map_err(|e| e.to_string())?;
    let hist = &report.aggregate.busy_hist;
    let busy_periods: u64 = hist.iter().skip(1).sum();
    if busy_periods < 1_000_000 {
        return Err(format!("only {busy_periods} busy periods; need at least 1e6"));
    }
    let renewals: u64 = hist.iter().sum();
    let pmf = busy_time_pmf(5, 0.1, 1e-12).map_err(|e| e.to_string())?;
    let mut tv = 0.0;
    let s_top = hist.len().max(pmf.probs.len());
    for s in 0..s_top {
        let emp = hist.get(s).copied().unwrap_or(0) as f64 / renewals as f64;
        let ana = pmf.probs.get(s).copied().unwrap_or(0.0);
        tv += (emp - ana).abs();
    }
    tv *= 0.5;
    if tv >= 0.01 {
        return Err(format!("TV distance {tv:.4} >= 0.01 over {busy_periods} busy periods"));
    }
    Ok(format!("{busy_periods} busy periods; TV distance {tv:.5} (< 0.01)"))
}

// ---------------------------------------------------------------------------
// 7. Simulated mean in-order delay vs the renewal bound.
// ---------------------------------------------------------------------------

fn check_delay_bound() -> Result<String, String> {
    let mut lines = Vec::new();
    for l in [2u32, 5, 10] {
        for eps in [0.05, 0.1] {
            if l as f64 * eps >= 1.0 {
                // Divergent regime: the bound must refuse and the comparison
                // holds vacuously (bound = infinity).
                match delay_upper_bound(l, eps) {
                    Err(AnalysisError::Divergent(_)) => {
                        lines.push(format!("l={l} eps={eps}: divergent (bound = inf, vacuous)"));
                        continue;
                    }
                    other => {
                        return Err(format!("l={l} eps={eps}: expected divergence, got {other:?}"))
                    }
                }
            }
            let bound = delay_upper_bound(l, eps).map_err(|e| e.to_string())?;
            let mut scenario = Scenario::open_loop(
                CodeParams::Stream { l },
                ChannelModel::Iid { epsilon: eps },
                2_000_000,
                31_000 + l as u64,
            );
            scenario.replications = 8;
            let report = run(&scenario).map_err(|e| e.to_string())?;
            let measured = report.aggregate.mean_delay_per_slot();
            let se = report.delay_std_error();
            if measured > bound + 3.0 * se {
                return Err(format!(
                    "l={l} eps={eps}: measured {measured:.5} exceeds bound {bound:.5} + 3se ({se:.2e})"
                ));
            }
            if l == 2 && (eps - 0.05).abs() < 1e-12 {
                let gap = (bound - measured).abs() / measured.max(1e-12);
                if gap > 0.25 {
                    return Err(format!(
                        "tightness at l=2, eps=0.05: bound {bound:.5} vs measured {measured:.5} ({:.1}% off)",
                        gap * 100.0
                    ));
                }
                lines.push(format!(
                    "l=2 eps=0.05: bound {bound:.4}, measured {measured:.4} ({:.1}% gap)",
                    gap * 100.0
                ));
            } else {
                lines.push(format!("l={l} eps={eps}: measured {measured:.4} <= bound {bound:.4}"));
            }
        }
    }
    Ok(lines.join("; "))
}

// ---------------------------------------------------------------------------
// 8. Decoder cost: pinned table values and simulated convergence.
// ---------------------------------------------------------------------------

fn check_decoding_cost() -> Result<String, String> {
    let c1 = decoding_cost(5, 0.1).map_err(|e| e.to_string())?;
    if (c1 - 3.13).abs() > 0.01 {
        return Err(format!("cost(5, 0.1) = {c1:.4}, expected 3.13 +- 0.01"));
    }
    let c2 = decoding_cost(25, 0.02).map_err(|e| e.to_string())?;
    if (c2 - 0.67).abs() > 0.01 {
        return Err(format!("cost(25, 0.02) = {c2:.4}, expected 0.67 +- 0.01"));
    }
    let mut scenario = Scenario::open_loop(
        CodeParams::Stream { l: 5 },
        ChannelModel::Iid { epsilon: 0.1 },
        2_500_000,
        777,
    );
    scenario.replications = 8;
    let report = run(&scenario).map_err(|e| e.to_string())?;
    let info = report.aggregate.info_sent;
    let per_info = report.aggregate.model_ops_per_info();
    if info < 1_000_000 {
        return Err(format!("only {info} information packets; need at least 1e6"));
    }
    let rel = (per_info - 3.13).abs() / 3.13;
    if rel > 0.10 {
        return Err(format!(
            "simulated cost {per_info:.4} deviates {:.1}% from 3.13 (> 10%)",
            rel * 100.0
        ));
    }
    Ok(format!(
        "cost(5,0.1) = {c1:.4}, cost(25,0.02) = {c2:.4}; simulated {per_info:.4} over {info} packets ({:.1}% off)",
        rel * 100.0
    ))
}

// ---------------------------------------------------------------------------
// 9. Group delay grows with the burst size c, analytically and in matched
//    simulations at fixed rate.
// ---------------------------------------------------------------------------

fn check_group_delay_monotone() -> Result<String, String> {
    let analytic: Result<Vec<f64>, _> = (1..=5u32)
        .map(|c| group_delay_per_packet(5, c, 0.1))
        .collect();
    let analytic = analytic.map_err(|e| e.to_string())?;
    for w in analytic.windows(2) {
        if w[1] < w[0] - 1e-12 {
            return Err(format!("analytic delay not nondecreasing: {analytic:?}"));
        }
    }
    let mut measured = Vec::new();
    for c in 1..=5u32 {
        let mut scenario = Scenario::open_loop(
            CodeParams::Group { lg: 5 * c, c },
            ChannelModel::Iid { epsilon: 0.1 },
            2_000_000,
            909,
        );
        scenario.replications = 4;
        let report = run(&scenario).map_err(|e| e.to_string())?;
        measured.push((report.aggregate.mean_delay_per_slot(), report.delay_std_error()));
    }
    for pair in measured.windows(2) {
        let (lo, se_lo) = pair[0];
        let (hi, se_hi) = pair[1];
        if hi < lo - 3.0 * (se_lo + se_hi) {
            return Err(format!("simulated ordering violated: {measured:?}"));
        }
    }
    Ok(format!(
        "analytic {:?}; simulated per-slot delays {:?} nondecreasing",
        analytic.iter().map(|d| (d * 1e4).round() / 1e4).collect::<Vec<_>>(),
        measured.iter().map(|(d, _)| (d * 1e4).round() / 1e4).collect::<Vec<_>>()
    ))
}

// ---------------------------------------------------------------------------
// 10. Rank-probability bounds: coincidence at k = 1, 2 and Monte Carlo
//     containment for sampled admissible patterns.
// ---------------------------------------------------------------------------

fn check_rank_bounds_mc() -> Result<String, String> {
    for q in [2.0f64, 4.0, 256.0] {
        for k in [1u32, 2] {
            let (lo, hi) = rank_bounds(k, q);
            if (lo - hi).abs() > 1e-14 {
                return Err(format!("bounds differ at k={k}, q={q}: {lo} vs {hi}"));
            }
        }
    }

    let samples = 100_000u32;
    let mut rng = Rng::new(4242);
    let mut tested = 0u32;
    for k in 1..=6u32 {
        let mut profiles = admissible_profiles(k, 5);
        // Sample up to 10 profiles deterministically.
        while profiles.len() > 10 {
            let at = rng.below(profiles.len() as u64) as usize;
            profiles.swap_remove(at);
        }
        for q_bits in [1u32, 2] {
            let q = (1u64 << q_bits) as f64;
            let field = Field::new(FieldSpec::new(q_bits).unwrap());
            for profile in &profiles {
                let prefix: Vec<u32> = profile
                    .iter()
                    .scan(0u32, |acc, &e| {
                        *acc += e;
                        Some(*acc)
                    })
                    .collect();
                let mut full = 0u64;
                for _ in 0..samples {
                    let matrix: Vec<Vec<u16>> = (0..k as usize)
                        .map(|row| {
                            (0..k as usize)
                                .map(|col| {
                                    if (col as u32) < prefix[row] {
                                        field.random_symbol(&mut rng)
                                    } else {
                                        0
                                    }
                                })
                                .collect()
                        })
                        .collect();
                    if gf::rank(&field, &matrix) == k as usize {
                        full += 1;
                    }
                }
                let freq = full as f64 / samples as f64;
                let (lo, hi) = rank_bounds(k, q);
                let sigma = (freq * (1.0 - freq) / samples as f64).sqrt().max(1e-6);
                if freq < lo - 4.0 * sigma || freq > hi + 4.0 * sigma {
                    return Err(format!(
                        "profile {profile:?} q={q}: frequency {freq:.5} outside [{lo:.5}, {hi:.5}] at 4 sigma"
                    ));
                }
                let exact = full_rank_probability(profile, q);
                if (freq - exact).abs() > 4.0 * sigma {
                    return Err(format!(
                        "profile {profile:?} q={q}: frequency {freq:.5} vs exact {exact:.5} beyond 4 sigma"
                    ));
                }
                tested += 1;
            }
        }
    }
    Ok(format!(
        "bounds coincide at k=1,2 for q in {{2,4,256}}; {tested} pattern/field pairs contained at 4 sigma"
    ))
}

// ---------------------------------------------------------------------------
// 11. Failure series vs closed form; root residual.
// ---------------------------------------------------------------------------

fn check_failure_closed_form() -> Result<String, String> {
    let mut worst: f64 = 0.0;
    for l in [5u32, 7] {
        for eps in [0.05f64, 0.1] {
            for q in [4.0f64, 256.0] {
                let series = stream_failure_bound(l, eps, q, 1e-14).map_err(|e| e.to_string())?;
                let (closed, eps0) = corollary_failure_bound(l, eps, q).map_err(|e| e.to_string())?;
                let diff = (series - closed).abs();
                worst = worst.max(diff);
                if diff > 1e-10 {
                    return Err(format!(
                        "l={l} eps={eps} q={q}: series {series:.12e} vs closed {closed:.12e}"
                    ));
                }
                let g = |x: f64| x * (1.0 - x).powi(l as i32 - 1);
                let resid = (g(eps0) - (1.0 - q.powi(-2)) * g(eps)).abs();
                if resid > 1e-12 {
                    return Err(format!("l={l} eps={eps} q={q}: eps0 residual {resid:.3e}"));
                }
            }
        }
    }
    Ok(format!("8 parameter triples agree; worst |series - closed| = {worst:.2e} (<= 1e-10)"))
}

// ---------------------------------------------------------------------------
// 12. Good-throughput tail bound vs Monte Carlo.
// ---------------------------------------------------------------------------

fn check_throughput_bound_mc() -> Result<String, String> {
    let bound = throughput_tail(5, 0.1, 10_000, 0.75).map_err(|e| e.to_string())?;
    let mut scenario = Scenario::open_loop(
        CodeParams::Stream { l: 5 },
        ChannelModel::Iid { epsilon: 0.1 },
        10_000,
        555_000_111,
    );
    scenario.replications = 100_000;
    let samples = measure_gt(&scenario).map_err(|e| e.to_string())?;
    let hits = samples.iter().filter(|&&gt| gt > 0.75).count();
    let empirical = hits as f64 / samples.len() as f64;
    if empirical < bound {
        return Err(format!(
            "empirical Pr(GT > 0.75) = {empirical:.6} below the bound {bound:.6}"
        ));
    }
    Ok(format!(
        "empirical Pr(GT > 0.75) = {empirical:.6} over 1e5 streams >= bound {bound:.6}"
    ))
}

// ---------------------------------------------------------------------------
// 13. Documented exclusions.
// ---------------------------------------------------------------------------

fn check_exclusions() -> Result<String, String> {
    Ok("not asserted by design: failure-rate magnitudes at the 1e-16 scale (below Monte Carlo \
        reach; covered by the rank-bound and closed-form checks), reference failure-table spot \
        values (`analyze failure --table` reports our own evaluation), and external-testbed \
        measurements"
        .to_string())
}
