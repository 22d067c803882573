//! Seeded packet-erasure processes over slotted transmissions.

use crate::rng::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ChannelError {
    #[error("erasure probability {0} outside [0, 1)")]
    BadErasureProbability(f64),
    #[error("steady-state bad probability {0} outside [0, 1)")]
    BadPiB(f64),
    #[error("expected burst length {0} must be >= 1")]
    BadBurstLength(f64),
    #[error("derived transition probability gamma={0} exceeds 1; lower pi_b or raise expected burst")]
    GammaOutOfRange(f64),
}

/// Memoryless channel: each slot erased independently with probability eps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IidChannel {
    pub epsilon: f64,
}

impl IidChannel {
    pub fn new(epsilon: f64) -> Result<Self, ChannelError> {
        if !(0.0..1.0).contains(&epsilon) {
            return Err(ChannelError::BadErasureProbability(epsilon));
        }
        Ok(IidChannel { epsilon })
    }
}

/// Two-state Markov (Gilbert-Elliott) channel parameterised by the
/// steady-state bad probability and the expected burst length. State G
/// delivers every packet, state B erases every packet.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GilbertElliottChannel {
    pub pi_b: f64,
    pub expected_burst: f64,
    /// B -> G transition probability, 1 / E(L).
    pub beta: f64,
    /// G -> B transition probability, beta * pi_b / (1 - pi_b).
    pub gamma: f64,
}

impl GilbertElliottChannel {
    pub fn new(pi_b: f64, expected_burst: f64) -> Result<Self, ChannelError> {
        if !(0.0..1.0).contains(&pi_b) {
            return Err(ChannelError::BadPiB(pi_b));
        }
        if expected_burst < 1.0 {
            return Err(ChannelError::BadBurstLength(expected_burst));
        }
        let beta = 1.0 / expected_burst;
        let gamma = beta * pi_b / (1.0 - pi_b);
        if gamma > 1.0 {
            return Err(ChannelError::GammaOutOfRange(gamma));
        }
        Ok(GilbertElliottChannel {
            pi_b,
            expected_burst,
            beta,
            gamma,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case", deny_unknown_fields)]
pub enum ChannelModel {
    Iid { epsilon: f64 },
    GilbertElliott { pi_b: f64, expected_burst: f64 },
}

impl ChannelModel {
    pub fn validate(&self) -> Result<(), ChannelError> {
        match *self {
            ChannelModel::Iid { epsilon } => IidChannel::new(epsilon).map(|_| ()),
            ChannelModel::GilbertElliott { pi_b, expected_burst } => {
                GilbertElliottChannel::new(pi_b, expected_burst).map(|_| ())
            }
        }
    }

    /// Long-run erasure fraction of the process.
    pub fn loss_rate(&self) -> f64 {
        match *self {
            ChannelModel::Iid { epsilon } => epsilon,
            ChannelModel::GilbertElliott { pi_b, .. } => pi_b,
        }
    }
}

/// Slot-by-slot erasure sampler. Deterministic for a given seed.
#[derive(Debug, Clone)]
pub enum ChannelState {
    Iid { epsilon: f64, rng: Rng },
    GilbertElliott { ch: GilbertElliottChannel, bad: bool, rng: Rng },
}

impl ChannelState {
    /// The Markov chain starts from its stationary distribution.
    pub fn new(model: &ChannelModel, seed: u64) -> Result<Self, ChannelError> {
        let mut rng = Rng::substream(seed, 0x01);
        Ok(match *model {
            ChannelModel::Iid { epsilon } => {
                let ch = IidChannel::new(epsilon)?;
                ChannelState::Iid { epsilon: ch.epsilon, rng }
            }
            ChannelModel::GilbertElliott { pi_b, expected_burst } => {
                let ch = GilbertElliottChannel::new(pi_b, expected_burst)?;
                let bad = rng.bernoulli(ch.pi_b);
                ChannelState::GilbertElliott { ch, bad, rng }
            }
        })
    }

    /// True when the next slot is erased.
    #[inline]
    pub fn next_erased(&mut self) -> bool {
        match self {
            ChannelState::Iid { epsilon, rng } => rng.bernoulli(*epsilon),
            ChannelState::GilbertElliott { ch, bad, rng } => {
                let erased = *bad;
                let p = if *bad { ch.beta } else { ch.gamma };
                if rng.bernoulli(p) {
                    *bad = !*bad;
                }
                erased
            }
        }
    }
}

/// Apply a channel to `n_slots` slots, returning the erasure pattern.
pub fn apply(model: &ChannelModel, n_slots: usize, seed: u64) -> Result<Vec<bool>, ChannelError> {
    let mut state = ChannelState::new(model, seed)?;
    Ok((0..n_slots).map(|_| state.next_erased()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_epsilon_erases_nothing() {
        let pattern = apply(&ChannelModel::Iid { epsilon: 0.0 }, 10_000, 5).unwrap();
        assert!(pattern.iter().all(|&e| !e));
    }

    #[test]
    fn derived_ge_parameters() {
        let ch = GilbertElliottChannel::new(0.1, 4.0).unwrap();
        assert!((ch.beta - 0.25).abs() < 1e-15);
        assert!((ch.gamma - 1.0 / 36.0).abs() < 1e-12);
        assert!((ch.gamma - 0.0277778).abs() < 1e-6);
    }

    #[test]
    fn invalid_parameters_rejected() {
        assert!(IidChannel::new(1.0).is_err());
        assert!(GilbertElliottChannel::new(1.0, 4.0).is_err());
        assert!(GilbertElliottChannel::new(0.5, 0.5).is_err());
        // pi_b = 0.9 with E(L) = 1 needs gamma = 9: impossible.
        assert!(GilbertElliottChannel::new(0.9, 1.0).is_err());
    }

    #[test]
    fn same_seed_same_pattern() {
        let m = ChannelModel::GilbertElliott { pi_b: 0.1, expected_burst: 4.0 };
        assert_eq!(apply(&m, 5_000, 42).unwrap(), apply(&m, 5_000, 42).unwrap());
        assert_ne!(apply(&m, 5_000, 42).unwrap(), apply(&m, 5_000, 43).unwrap());
    }

    #[test]
    fn iid_loss_rate_converges() {
        let n = 1_000_000usize;
        let pattern = apply(&ChannelModel::Iid { epsilon: 0.1 }, n, 7).unwrap();
        let losses = pattern.iter().filter(|&&e| e).count() as f64;
        let sigma = (n as f64 * 0.1 * 0.9).sqrt();
        assert!((losses - 0.1 * n as f64).abs() < 4.0 * sigma);
    }

    #[test]
    fn ge_burst_length_one_is_memoryless() {
        // With E(L)=1 the bad state never repeats, so the loss process is
        // i.i.d. with rate pi_b; check the empirical rate at 3 sigma.
        let n = 1_000_000usize;
        let m = ChannelModel::GilbertElliott { pi_b: 0.1, expected_burst: 1.0 };
        let pattern = apply(&m, n, 11).unwrap();
        let losses = pattern.iter().filter(|&&e| e).count() as f64;
        let sigma = (n as f64 * 0.1 * 0.9).sqrt();
        assert!((losses - 0.1 * n as f64).abs() < 3.0 * sigma);
    }

    #[test]
    fn ge_mean_burst_matches_parameter() {
        let n = 10_000_000usize;
        let m = ChannelModel::GilbertElliott { pi_b: 0.1, expected_burst: 4.0 };
        let mut state = ChannelState::new(&m, 13).unwrap();
        let mut bursts = 0u64;
        let mut burst_slots = 0u64;
        let mut in_burst = false;
        for _ in 0..n {
            let erased = state.next_erased();
            if erased {
                burst_slots += 1;
                if !in_burst {
                    bursts += 1;
                    in_burst = true;
                }
            } else {
                in_burst = false;
            }
        }
        let mean = burst_slots as f64 / bursts as f64;
        assert!(
            (mean - 4.0).abs() / 4.0 < 0.02,
            "mean burst {mean} deviates more than 2% from 4"
        );
    }

    #[test]
    fn ge_loss_rate_converges_to_pi_b() {
        let n = 2_000_000usize;
        let m = ChannelModel::GilbertElliott { pi_b: 0.2, expected_burst: 3.0 };
        let pattern = apply(&m, n, 17).unwrap();
        let rate = pattern.iter().filter(|&&e| e).count() as f64 / n as f64;
        // Correlated slots: use a generous band rather than the binomial sigma.
        assert!((rate - 0.2).abs() < 0.005, "rate {rate}");
    }
}
