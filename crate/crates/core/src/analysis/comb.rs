//! Exact and log-domain combinatorics shared across the analytics.

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};

/// Incrementally grown table of ln(n!), accumulated with compensation so the
/// entries stay accurate to the last few ulps even for n in the hundreds of
/// thousands.
#[derive(Debug, Default)]
pub struct LnFactorial {
    table: Vec<f64>,
    carry: f64,
}

impl LnFactorial {
    pub fn new() -> Self {
        LnFactorial { table: vec![0.0, 0.0], carry: 0.0 }
    }

    pub fn get(&mut self, n: usize) -> f64 {
        while self.table.len() <= n {
            let k = self.table.len() as f64;
            let prev = *self.table.last().expect("seeded");
            // Kahan step on the running sum of ln(k).
            let y = k.ln() - self.carry;
            let t = prev + y;
            self.carry = (t - prev) - y;
            self.table.push(t);
        }
        self.table[n]
    }
}

/// ln C(n, k); returns -inf when k > n.
pub fn ln_binomial(lf: &mut LnFactorial, n: usize, k: usize) -> f64 {
    if k > n {
        return f64::NEG_INFINITY;
    }
    lf.get(n) - lf.get(k) - lf.get(n - k)
}

/// Exact binomial coefficient.
pub fn binomial_big(n: u64, k: u64) -> BigUint {
    if k > n {
        return BigUint::zero();
    }
    let k = k.min(n - k);
    let mut num = BigUint::one();
    let mut den = BigUint::one();
    for i in 0..k {
        num *= n - i;
        den *= i + 1;
    }
    num / den
}

/// Natural log of a BigUint, accurate to ~1e-15 relative even far beyond the
/// f64 range. Returns -inf for zero.
pub fn ln_biguint(n: &BigUint) -> f64 {
    if n.is_zero() {
        return f64::NEG_INFINITY;
    }
    let bits = n.bits();
    if bits <= 53 {
        return n.to_f64().expect("fits f64").ln();
    }
    let shift = bits - 53;
    let top = (n >> shift).to_f64().expect("53 bits fit");
    top.ln() + shift as f64 * std::f64::consts::LN_2
}
