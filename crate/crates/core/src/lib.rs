//! Timing side-channel laboratory for cloud quantum job queues: latency
//! statistics, a seeded queue simulator, trace reconstruction, the attack
//! procedures and their mitigations.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod attacks;
pub mod baseline;
pub mod cli;
pub mod cloudsim;
pub mod config;
pub mod mitigations;
pub mod stats;
pub mod trace;
