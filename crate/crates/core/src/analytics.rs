//! Closed-form age of information under Bernoulli access and a Rayleigh
//! capture channel.
//!
//! With node `i` transmitting in each slot with probability `p_i` and the
//! base station decoding `i` whenever its faded power beats `theta` times
//! the summed interference, the per-slot success probability of `i` is
//! `p_i * prod_{j != i} (1 - p_j / (1 + d_ij))` where
//! `d_ij = P_i / (P_j * theta)`. The time-average age is its reciprocal.

use thiserror::Error;

use crate::units::Topology;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalyticsError {
    #[error("transmit probability {value} for node {node} is outside [0, 1]")]
    ProbabilityOutOfRange { node: usize, value: f64 },
    #[error("probability vector has {got} entries but the topology has {expected} nodes")]
    LengthMismatch { expected: usize, got: usize },
}

/// Pairwise interference discounts `d[i][j] = P_i / (P_j * theta)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscountMatrix {
    n: usize,
    d: Vec<f64>,
}

impl DiscountMatrix {
    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Discount of interferer `j` against node `i`.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.d[i * self.n + j]
    }
}

pub fn discount_matrix(topology: &Topology) -> DiscountMatrix {
    let n = topology.len();
    let lin: Vec<f64> = topology.powers().iter().map(|p| p.linear()).collect();
    let theta = topology.theta();
    let mut d = vec![f64::NAN; n * n];
    for i in 0..n {
        for j in 0..n {
            if i != j {
                d[i * n + j] = lin[i] / (lin[j] * theta);
            }
        }
    }
    DiscountMatrix { n, d }
}

/// Per-node transmit probabilities, each in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityVector(Vec<f64>);

impl ProbabilityVector {
    pub fn new(p: Vec<f64>) -> Result<Self, AnalyticsError> {
        for (node, &value) in p.iter().enumerate() {
            if !(0.0..=1.0).contains(&value) {
                return Err(AnalyticsError::ProbabilityOutOfRange { node, value });
            }
        }
        Ok(Self(p))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Expected time-average age of one node, in slots.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExpectedAoi {
    Finite(f64),
    /// The node never transmits, so its age grows without bound.
    Starved,
}

impl ExpectedAoi {
    pub fn value(self) -> f64 {
        match self {
            ExpectedAoi::Finite(h) => h,
            ExpectedAoi::Starved => f64::INFINITY,
        }
    }

    pub fn is_starved(self) -> bool {
        matches!(self, ExpectedAoi::Starved)
    }
}

/// Probability that node `i` is decoded in a slot where it transmits.
pub fn capture_probability(p: &ProbabilityVector, d: &DiscountMatrix, i: usize) -> f64 {
    (0..d.len())
        .filter(|&j| j != i)
        .map(|j| 1.0 - p.0[j] / (1.0 + d.get(i, j)))
        .product()
}

pub fn expected_aoi(p: &ProbabilityVector, d: &DiscountMatrix) -> Result<Vec<ExpectedAoi>, AnalyticsError> {
    if p.len() != d.len() {
        return Err(AnalyticsError::LengthMismatch { expected: d.len(), got: p.len() });
    }
    Ok((0..d.len())
        .map(|i| {
            let success = p.0[i] * capture_probability(p, d, i);
            if success > 0.0 {
                ExpectedAoi::Finite(1.0 / success)
            } else {
                ExpectedAoi::Starved
            }
        })
        .collect())
}

/// Sum of log expected ages; `+inf` when any node is starved.
pub fn pf_objective(p: &ProbabilityVector, d: &DiscountMatrix) -> Result<f64, AnalyticsError> {
    Ok(expected_aoi(p, d)?.iter().map(|h| h.value().ln()).sum())
}
