//! Slotted random-access simulation for age-of-information fairness.
//!
//! The crate pairs closed-form AoI analysis with a slot-level DCF simulator
//! running 802.11, WiFair PF, WiFair TA or plain Bernoulli access over a
//! Rayleigh capture channel.

pub mod analytics;
pub mod channel;
pub mod harness;
pub mod mac;
pub mod metrics;
pub mod par;
pub mod policy;
pub mod scenario;
pub mod units;
