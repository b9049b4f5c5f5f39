//! Access policies and the transmit-probability to contention-window map.
//!
//! WiFair PF solves, per node, `1/p - sum_j 1/(1 + d_ji - p) = 0` with
//! `d_ji = P_j / (P_i * theta)` and clamps the root to 1. WiFair TA uses the
//! closed form `p = [(N-1) (1 - ln(1 + g) / g)]^-1` with `g = gamma_i * theta`
//! and `gamma_i = P_i / P_min`. Both turn `p` into a fixed window
//! `CW = round(2/p - 2)`.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::units::{NodeId, Topology};

/// Largest contention window the backoff hardware can express.
pub const MAX_CW: u16 = 1023;

/// 802.11 default initial window.
pub const DEFAULT_INITIAL_CW: u16 = 16;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PolicyError {
    #[error("fixed-point solver for node {node} did not converge in {iterations} iterations (last residual {residual:e})")]
    NoConvergence { node: usize, iterations: usize, residual: f64 },
    #[error("transmit probability must lie in (0, 1], got {0}")]
    InvalidProbability(f64),
    #[error("topology-agnostic policy needs at least 2 nodes, got {0}")]
    TooFewNodes(usize),
    #[error("{name} must be positive and finite, got {value}")]
    NonPositive { name: &'static str, value: f64 },
    #[error("contention window {0} outside [0, 1023]")]
    InvalidWindow(u32),
    #[error("initial contention window {0} outside [1, 1023]")]
    InvalidInitialWindow(u16),
    #[error("per-node parameter list has {got} entries, topology has {expected} nodes")]
    LengthMismatch { expected: usize, got: usize },
    #[error("invalid solver settings: {0}")]
    InvalidSettings(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PolicyKind {
    #[serde(rename = "dcf")]
    Dcf80211,
    #[serde(rename = "wifair-pf")]
    WiFairPf,
    #[serde(rename = "wifair-ta")]
    WiFairTa,
    #[serde(rename = "bernoulli")]
    FixedBernoulli,
}

impl PolicyKind {
    pub fn name(self) -> &'static str {
        match self {
            PolicyKind::Dcf80211 => "dcf",
            PolicyKind::WiFairPf => "wifair-pf",
            PolicyKind::WiFairTa => "wifair-ta",
            PolicyKind::FixedBernoulli => "bernoulli",
        }
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// The two WiFair variants.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WiFairKind {
    Pf,
    Ta,
}

/// A resolved access policy for every node of a topology.
#[derive(Debug, Clone, PartialEq)]
pub enum PolicySpec {
    /// Standard DCF: windows start at `initial_cw`, double after the retry
    /// budget is spent and reset on success.
    Dcf80211 { initial_cw: u16 },
    /// Fixed per-node windows from the proportionally fair probabilities.
    WiFairPf { cws: Vec<u16> },
    /// Fixed per-node windows from the topology-agnostic closed form.
    WiFairTa { cws: Vec<u16> },
    /// Slotted Bernoulli access with per-node probabilities, no backoff.
    FixedBernoulli { p: Vec<f64> },
}

impl PolicySpec {
    pub fn kind(&self) -> PolicyKind {
        match self {
            PolicySpec::Dcf80211 { .. } => PolicyKind::Dcf80211,
            PolicySpec::WiFairPf { .. } => PolicyKind::WiFairPf,
            PolicySpec::WiFairTa { .. } => PolicyKind::WiFairTa,
            PolicySpec::FixedBernoulli { .. } => PolicyKind::FixedBernoulli,
        }
    }

    /// Checks parameter ranges against a node count.
    pub fn validate(&self, nodes: usize) -> Result<(), PolicyError> {
        match self {
            PolicySpec::Dcf80211 { initial_cw } => {
                if !(1..=MAX_CW).contains(initial_cw) {
                    return Err(PolicyError::InvalidInitialWindow(*initial_cw));
                }
            }
            PolicySpec::WiFairPf { cws } | PolicySpec::WiFairTa { cws } => {
                if cws.len() != nodes {
                    return Err(PolicyError::LengthMismatch { expected: nodes, got: cws.len() });
                }
                if let Some(&cw) = cws.iter().find(|&&cw| cw > MAX_CW) {
                    return Err(PolicyError::InvalidWindow(cw as u32));
                }
            }
            PolicySpec::FixedBernoulli { p } => {
                if p.len() != nodes {
                    return Err(PolicyError::LengthMismatch { expected: nodes, got: p.len() });
                }
                if let Some(&bad) = p.iter().find(|&&v| !(v > 0.0 && v <= 1.0)) {
                    return Err(PolicyError::InvalidProbability(bad));
                }
            }
        }
        Ok(())
    }

    /// Fixed windows, if the policy has them.
    pub fn fixed_windows(&self) -> Option<&[u16]> {
        match self {
            PolicySpec::WiFairPf { cws } | PolicySpec::WiFairTa { cws } => Some(cws),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixedPointSettings {
    /// Stop once an iteration moves `p` by less than this.
    pub tolerance: f64,
    pub max_iters: usize,
}

impl Default for FixedPointSettings {
    fn default() -> Self {
        Self { tolerance: 1e-10, max_iters: 10_000 }
    }
}

impl FixedPointSettings {
    fn validate(&self) -> Result<(), PolicyError> {
        if !(self.tolerance > 0.0) {
            return Err(PolicyError::InvalidSettings("tolerance must be positive"));
        }
        if self.max_iters == 0 {
            return Err(PolicyError::InvalidSettings("max_iters must be at least 1"));
        }
        Ok(())
    }
}

/// The poles `1 + d_ji` of node `i`'s fixed-point equation, one per interferer.
pub fn pf_poles(topology: &Topology, node: NodeId) -> Vec<f64> {
    let own = topology.power(node).linear();
    let theta = topology.theta();
    topology
        .node_ids()
        .filter(|&j| j != node)
        .map(|j| 1.0 + topology.power(j).linear() / (own * theta))
        .collect()
}

/// `1/p - sum_j 1/(pole_j - p)`; strictly decreasing on `(0, min pole)`.
pub fn pf_residual(poles: &[f64], p: f64) -> f64 {
    1.0 / p - poles.iter().map(|c| 1.0 / (c - p)).sum::<f64>()
}

const BRACKET_EPS: f64 = 1e-12;

/// Halves `[lo, hi]` until it cannot shrink further. Requires
/// `residual(lo) > 0 >= residual(hi)`.
fn bisect(poles: &[f64], mut lo: f64, mut hi: f64) -> f64 {
    loop {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if pf_residual(poles, mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    if pf_residual(poles, lo).abs() <= pf_residual(poles, hi).abs() {
        lo
    } else {
        hi
    }
}

/// Proportionally fair transmit probability of `node`, clamped to 1.
///
/// Iterates `p <- 1 / sum_j 1/(pole_j - p)` from `1/N`. The map is
/// decreasing, so consecutive iterates bracket the root; once they are
/// within tolerance the bracket is polished by bisection. If the iteration
/// stops contracting (a single interferer makes it a pure 2-cycle) the
/// solver falls back to bisection over `(eps, min(1, min pole - eps))`.
pub fn solve_pf_probability(
    topology: &Topology,
    node: NodeId,
    settings: &FixedPointSettings,
) -> Result<f64, PolicyError> {
    settings.validate()?;
    let poles = pf_poles(topology, node);
    if poles.is_empty() || pf_residual(&poles, 1.0) >= 0.0 {
        return Ok(1.0);
    }

    let update = |p: f64| 1.0 / poles.iter().map(|c| 1.0 / (c - p)).sum::<f64>();
    let mut p = 1.0 / topology.len() as f64;
    let mut prev_step = f64::INFINITY;
    let mut stalled = 0;
    for _ in 0..settings.max_iters {
        let next = update(p);
        let step = (next - p).abs();
        if step < settings.tolerance {
            let (lo, hi) = if p < next { (p, next) } else { (next, p) };
            if pf_residual(&poles, lo) > 0.0 && pf_residual(&poles, hi) <= 0.0 {
                return Ok(bisect(&poles, lo, hi));
            }
            return Ok(next);
        }
        if step >= prev_step {
            stalled += 1;
            if stalled >= 3 {
                let min_pole = poles.iter().cloned().fold(f64::INFINITY, f64::min);
                return Ok(bisect(&poles, BRACKET_EPS, 1f64.min(min_pole - BRACKET_EPS)));
            }
        } else {
            stalled = 0;
        }
        prev_step = step;
        p = next;
    }
    Err(PolicyError::NoConvergence {
        node: node.index(),
        iterations: settings.max_iters,
        residual: pf_residual(&poles, p),
    })
}

/// Topology-agnostic transmit probability for normalized power `gamma`.
pub fn ta_probability(gamma: f64, theta: f64, n: usize) -> Result<f64, PolicyError> {
    if n < 2 {
        return Err(PolicyError::TooFewNodes(n));
    }
    if !(gamma.is_finite() && gamma > 0.0) {
        return Err(PolicyError::NonPositive { name: "gamma", value: gamma });
    }
    if !(theta.is_finite() && theta > 0.0) {
        return Err(PolicyError::NonPositive { name: "theta", value: theta });
    }
    let x = gamma * theta;
    let shortfall = 1.0 - x.ln_1p() / x;
    let p = 1.0 / ((n - 1) as f64 * shortfall);
    Ok(if p.is_finite() { p.min(1.0) } else { 1.0 })
}

/// `round(2/p - 2)`, half away from zero, clamped to `[0, 1023]`.
pub fn cw_from_probability(p: f64) -> Result<u16, PolicyError> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(PolicyError::InvalidProbability(p));
    }
    let cw = (2.0 / p - 2.0).round();
    Ok(cw.clamp(0.0, MAX_CW as f64) as u16)
}

/// Per-node transmit probabilities under a WiFair variant.
pub fn wifair_probabilities(
    topology: &Topology,
    kind: WiFairKind,
    settings: &FixedPointSettings,
) -> Result<Vec<f64>, PolicyError> {
    let n = topology.len();
    topology
        .node_ids()
        .map(|node| match kind {
            WiFairKind::Pf => solve_pf_probability(topology, node, settings),
            WiFairKind::Ta if n == 1 => Ok(1.0),
            WiFairKind::Ta => {
                let gamma = topology.power(node).linear() / topology.p_min_rx().linear();
                ta_probability(gamma, topology.theta(), n)
            }
        })
        .collect()
}

/// Fixed WiFair windows for every node.
pub fn derive_wifair_spec(
    topology: &Topology,
    kind: WiFairKind,
    settings: &FixedPointSettings,
) -> Result<PolicySpec, PolicyError> {
    let cws = wifair_probabilities(topology, kind, settings)?
        .into_iter()
        .map(cw_from_probability)
        .collect::<Result<Vec<_>, _>>()?;
    Ok(match kind {
        WiFairKind::Pf => PolicySpec::WiFairPf { cws },
        WiFairKind::Ta => PolicySpec::WiFairTa { cws },
    })
}
