//! Counting nonnegative integer sequences dominated by a partial-sum bound:
//! the number of (b_1, ..., b_n) with b_i >= 0 and
//! b_1 + ... + b_j <= a_j for every j.
//!
//! The count equals the determinant of a lower-Hessenberg matrix whose
//! entries are binomials of a_i + 1. The "+1" matters: enumeration on
//! a = (1, 2) gives 5 with the +1 convention and 4 without it, so the +1
//! form is used everywhere and the bare form is kept only for reference.

use super::AnalysisError;
use num_bigint::{BigInt, BigUint};
use num_traits::{One, Signed, Zero};

fn binomial_int(n: u64, k: u64) -> BigInt {
    super::comb::binomial_big(n, k).into()
}

fn validate(a: &[u64]) -> Result<(), AnalysisError> {
    if a.is_empty() {
        return Err(AnalysisError::BadParams("empty bound sequence".into()));
    }
    if a.windows(2).any(|w| w[1] < w[0]) {
        return Err(AnalysisError::BadParams(
            "dominating sequence must be nondecreasing".into(),
        ));
    }
    Ok(())
}

/// Dominated-sequence count via the Hessenberg expansion of the binomial
/// determinant (the +1 convention).
pub fn kreweras_count(a: &[u64]) -> Result<BigUint, AnalysisError> {
    let n = a.len();
    validate(a)?;
    let value = recursive_count(a, n, 1);
    value
        .to_biguint()
        .ok_or_else(|| AnalysisError::NonConvergence("negative lattice count".into()))
}

/// The same count evaluated as a literal determinant (fraction-free Bareiss
/// elimination). Kept as an independent route for cross-checking.
pub fn kreweras_count_determinant(a: &[u64]) -> Result<BigUint, AnalysisError> {
    let n = a.len();
    validate(a)?;
    // M[i][j] = C(a_{n-i} + 1, i - j + 1) below the diagonal band, 1 on the
    // superdiagonal, 0 above it (0-based i, j).
    let mut m: Vec<Vec<BigInt>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    if j == i + 1 {
                        BigInt::one()
                    } else if j <= i {
                        binomial_int(a[n - 1 - i] + 1, (i - j + 1) as u64)
                    } else {
                        BigInt::zero()
                    }
                })
                .collect()
        })
        .collect();

    let mut sign = 1i64;
    let mut prev = BigInt::one();
    for k in 0..n {
        if m[k][k].is_zero() {
            let Some(swap) = (k + 1..n).find(|&r| !m[r][k].is_zero()) else {
                return Ok(BigUint::zero());
            };
            m.swap(k, swap);
            sign = -sign;
        }
        for i in (k + 1)..n {
            for j in (k + 1)..n {
                let num = &m[i][j] * &m[k][k] - &m[i][k] * &m[k][j];
                m[i][j] = num / &prev;
            }
            m[i][k] = BigInt::zero();
        }
        prev = m[k][k].clone();
    }
    let det = if sign < 0 { -m[n - 1][n - 1].clone() } else { m[n - 1][n - 1].clone() };
    if det.is_negative() {
        return Err(AnalysisError::NonConvergence("negative determinant".into()));
    }
    Ok(det.to_biguint().expect("nonnegative"))
}

/// Recursive evaluation. With `plus_one` the binomials take a_i + 1 (the
/// validated convention). Without it the final expansion uses bare a_i over
/// true sub-counts, which disagrees with enumeration; it is retained only so
/// the discrepancy can be asserted.
pub fn kreweras_count_recursive(a: &[u64], plus_one: bool) -> Result<BigInt, AnalysisError> {
    validate(a)?;
    let n = a.len();
    if plus_one {
        return Ok(recursive_count(a, n, 1));
    }
    let mut acc = BigInt::zero();
    for j in 1..=n {
        let coeff = binomial_int(a[n - j], j as u64);
        let term = coeff * recursive_count(a, n - j, 1);
        if j % 2 == 1 {
            acc += term;
        } else {
            acc -= term;
        }
    }
    Ok(acc)
}

fn recursive_count(a: &[u64], n: usize, offset: u64) -> BigInt {
    // binom[i][j] = C(a[i] + offset, j) for the j range each index is asked
    // for, built by the multiply-divide recurrence so every coefficient costs
    // one big multiplication instead of a fresh O(j) product.
    let binom: Vec<Vec<BigInt>> = a
        .iter()
        .take(n)
        .enumerate()
        .map(|(i, &ai)| {
            let top = ai + offset;
            let max_j = (n - i) as u64;
            let mut row = Vec::with_capacity(max_j as usize + 1);
            row.push(BigInt::one());
            for j in 1..=max_j {
                if j > top {
                    row.push(BigInt::zero());
                } else {
                    let next = &row[(j - 1) as usize] * (top - j + 1) / j;
                    row.push(next);
                }
            }
            row
        })
        .collect();

    let mut table: Vec<BigInt> = Vec::with_capacity(n + 1);
    table.push(BigInt::one());
    for m in 1..=n {
        let mut acc = BigInt::zero();
        for j in 1..=m {
            let coeff = &binom[m - j][j];
            if coeff.is_zero() {
                continue;
            }
            let term = coeff * &table[m - j];
            if j % 2 == 1 {
                acc += term;
            } else {
                acc -= term;
            }
        }
        table.push(acc);
    }
    table.pop().expect("n >= 0")
}

/// Direct dynamic-programming enumeration of dominated sequences. This is the
/// independent oracle the determinant is validated against; only usable for
/// small bounds.
pub fn kreweras_enumerate(a: &[u64]) -> BigUint {
    let n = a.len();
    if n == 0 {
        return BigUint::one();
    }
    let cap = a[n - 1] as usize;
    // dp[s] = number of prefixes with partial sum exactly s.
    let mut dp = vec![BigUint::zero(); cap + 1];
    dp[0] = BigUint::one();
    for &bound in a {
        let b = (bound as usize).min(cap);
        let mut next = vec![BigUint::zero(); cap + 1];
        // prefix sums: next[s] = sum_{s' <= s} dp[s'] for s <= bound.
        let mut run = BigUint::zero();
        for s in 0..=cap {
            run += &dp[s];
            if s <= b {
                next[s] = run.clone();
            }
        }
        dp = next;
    }
    dp.into_iter().sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn singleton_bound() {
        // b1 in {0, 1, 2, 3}.
        assert_eq!(kreweras_count(&[3]).unwrap(), BigUint::from(4u32));
    }

    #[test]
    fn plus_one_convention_discrepancy() {
        // Enumeration of a = (1, 2): pairs with b1 <= 1, b1 + b2 <= 2.
        assert_eq!(kreweras_enumerate(&[1, 2]), BigUint::from(5u32));
        assert_eq!(kreweras_count(&[1, 2]).unwrap(), BigUint::from(5u32));
        assert_eq!(kreweras_count_determinant(&[1, 2]).unwrap(), BigUint::from(5u32));
        assert_eq!(
            kreweras_count_recursive(&[1, 2], true).unwrap(),
            BigInt::from(5)
        );
        assert_eq!(
            kreweras_count_recursive(&[1, 2], false).unwrap(),
            BigInt::from(4)
        );
    }

    #[test]
    fn leading_zero_forces_b1_and_shifts() {
        for tail in [vec![2u64, 4], vec![1, 3, 5], vec![0, 2]] {
            let mut a = vec![0u64];
            a.extend(&tail);
            let with_zero = kreweras_count(&a).unwrap();
            let shifted = kreweras_count(&tail).unwrap();
            assert_eq!(with_zero, shifted, "a = {a:?}");
            assert_eq!(with_zero, kreweras_enumerate(&a));
        }
    }

    #[test]
    fn decreasing_sequence_rejected() {
        assert!(kreweras_count(&[3, 2]).is_err());
        assert!(kreweras_count(&[]).is_err());
    }

    #[test]
    fn weakly_increasing_matches_enumeration() {
        let cases: [&[u64]; 6] = [&[1, 1], &[2, 2], &[2, 2, 2], &[0, 0, 3], &[1, 1, 4, 4], &[3, 3, 3, 7]];
        for a in cases {
            let det = kreweras_count_determinant(a).unwrap();
            let rec = kreweras_count(a).unwrap();
            let oracle = kreweras_enumerate(a);
            assert_eq!(det, oracle, "det mismatch for {a:?}");
            assert_eq!(rec, oracle, "recursion mismatch for {a:?}");
        }
    }

    #[test]
    fn strictly_increasing_grid_matches_enumeration() {
        // All strictly increasing sequences with entries <= 6, n <= 4.
        fn gen(start: u64, max: u64, len: usize, prefix: &mut Vec<u64>, out: &mut Vec<Vec<u64>>) {
            if prefix.len() == len {
                out.push(prefix.clone());
                return;
            }
            for v in start..=max {
                prefix.push(v);
                gen(v + 1, max, len, prefix, out);
                prefix.pop();
            }
        }
        let mut sequences = Vec::new();
        for n in 1..=4usize {
            gen(0, 7, n, &mut Vec::new(), &mut sequences);
        }
        assert!(sequences.len() > 100);
        for a in sequences {
            let oracle = kreweras_enumerate(&a);
            assert_eq!(kreweras_count(&a).unwrap(), oracle, "a = {a:?}");
            assert_eq!(kreweras_count_determinant(&a).unwrap(), oracle, "a = {a:?}");
        }
    }
}
