//! Packet-erasure FEC workbench.
//!
//! Three pieces fit together here:
//!
//! * [`codec`] — a systematic streaming code that interleaves one random
//!   linear coded packet after every l-1 information packets (plus its
//!   grouped variant and a classical systematic block code baseline), with
//!   an on-the-fly in-order decoder;
//! * [`analysis`] — closed-form busy-time, delay, throughput, complexity and
//!   decoding-failure results for those codes, each paired with an
//!   independent brute-force oracle;
//! * [`sim`] — a slotted, seeded Monte Carlo simulator that cross-validates
//!   the analytics against measurement over i.i.d. and burst channels.
//!
//! [`validate`] bundles the oracle cross-checks into a pass/fail battery.

pub mod analysis;
pub mod channel;
pub mod codec;
pub mod gf;
pub mod rng;
pub mod sim;
pub mod validate;
