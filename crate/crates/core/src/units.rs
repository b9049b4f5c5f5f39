//! Shared domain types: node identifiers, received power levels, topologies
//! and the MCS to SIR threshold lookup.
//!
//! Powers are kept in decibels and converted to linear scale on demand. The
//! reference level is arbitrary because only power ratios enter the policy
//! and capture math.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum UnitsError {
    #[error("decibel value must be finite, got {0}")]
    NonFinite(f64),
    #[error("no SIR threshold known for MCS {0}; supply an explicit theta")]
    UnknownMcs(u8),
    #[error("SIR threshold must be positive and finite, got {0}")]
    InvalidTheta(f64),
    #[error("topology needs at least one node")]
    EmptyTopology,
}

/// Converts a decibel value to linear scale.
pub fn db_to_linear(db: f64) -> Result<f64, UnitsError> {
    if !db.is_finite() {
        return Err(UnitsError::NonFinite(db));
    }
    Ok(10f64.powf(db / 10.0))
}

pub fn linear_to_db(linear: f64) -> f64 {
    10.0 * linear.log10()
}

/// Dense node index in `0..N`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct NodeId(pub usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Average received power in dB relative to a common reference.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct PowerLevel {
    value_db: f64,
}

impl PowerLevel {
    pub fn from_db(value_db: f64) -> Result<Self, UnitsError> {
        if !value_db.is_finite() {
            return Err(UnitsError::NonFinite(value_db));
        }
        Ok(Self { value_db })
    }

    pub fn db(self) -> f64 {
        self.value_db
    }

    pub fn linear(self) -> f64 {
        10f64.powf(self.value_db / 10.0)
    }
}

/// Modulation and coding scheme index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct McsIndex(pub u8);

/// Required SIR (dB) for the MCS indices with a built-in mapping.
const MCS_THRESHOLDS_DB: &[(u8, f64)] = &[(0, 5.0), (5, 17.5)];

/// Linear SIR threshold for an MCS, or the override when one is given.
pub fn theta_for_mcs(mcs: McsIndex, override_theta: Option<f64>) -> Result<f64, UnitsError> {
    if let Some(theta) = override_theta {
        if !(theta.is_finite() && theta > 0.0) {
            return Err(UnitsError::InvalidTheta(theta));
        }
        return Ok(theta);
    }
    MCS_THRESHOLDS_DB
        .iter()
        .find(|(idx, _)| *idx == mcs.0)
        .map(|(_, db)| 10f64.powf(db / 10.0))
        .ok_or(UnitsError::UnknownMcs(mcs.0))
}

/// The network as seen from the base station.
///
/// Node `k` has the `k`-th power in construction order. `theta` is the
/// linear SIR threshold and `p_min_rx` the weakest decodable average power.
#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    powers: Vec<PowerLevel>,
    theta: f64,
    p_min_rx: PowerLevel,
}

impl Topology {
    pub fn new(powers: Vec<PowerLevel>, theta: f64, p_min_rx: PowerLevel) -> Result<Self, UnitsError> {
        if powers.is_empty() {
            return Err(UnitsError::EmptyTopology);
        }
        if !(theta.is_finite() && theta > 0.0) {
            return Err(UnitsError::InvalidTheta(theta));
        }
        Ok(Self { powers, theta, p_min_rx })
    }

    /// Builds a topology from dB powers and a dB threshold.
    pub fn from_db(powers_db: &[f64], theta_db: f64, p_min_db: f64) -> Result<Self, UnitsError> {
        let powers = powers_db
            .iter()
            .map(|&db| PowerLevel::from_db(db))
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(powers, db_to_linear(theta_db)?, PowerLevel::from_db(p_min_db)?)
    }

    pub fn len(&self) -> usize {
        self.powers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.powers.is_empty()
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn p_min_rx(&self) -> PowerLevel {
        self.p_min_rx
    }

    pub fn power(&self, node: NodeId) -> PowerLevel {
        self.powers[node.0]
    }

    pub fn powers(&self) -> &[PowerLevel] {
        &self.powers
    }

    pub fn node_ids(&self) -> impl Iterator<Item = NodeId> + '_ {
        (0..self.powers.len()).map(NodeId)
    }

    /// Nodes whose average power is below the decodable minimum. These are
    /// legal but worth a warning.
    pub fn below_min_power(&self) -> Vec<NodeId> {
        self.node_ids()
            .filter(|&n| self.power(n).db() < self.p_min_rx.db())
            .collect()
    }

    /// Same nodes with a different threshold.
    pub fn with_theta(&self, theta: f64) -> Result<Self, UnitsError> {
        Self::new(self.powers.clone(), theta, self.p_min_rx)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn db_conversion_examples() {
        assert_eq!(db_to_linear(0.0).unwrap(), 1.0);
        let v = db_to_linear(-15.0).unwrap();
        assert!((v - 0.031623).abs() / 0.031623 < 1e-5);
        let v = db_to_linear(17.5).unwrap();
        assert!((v - 56.234).abs() / 56.234 < 1e-3);
        assert!(db_to_linear(f64::NAN).is_err());
        assert!(db_to_linear(f64::INFINITY).is_err());
    }

    #[test]
    fn mcs_thresholds() {
        assert!((theta_for_mcs(McsIndex(0), None).unwrap() - 3.1623).abs() < 1e-3);
        assert!((theta_for_mcs(McsIndex(5), None).unwrap() - 56.234).abs() < 1e-2);
        assert_eq!(theta_for_mcs(McsIndex(3), None), Err(UnitsError::UnknownMcs(3)));
        assert_eq!(theta_for_mcs(McsIndex(3), Some(7.0)).unwrap(), 7.0);
        assert!(theta_for_mcs(McsIndex(3), Some(-1.0)).is_err());
    }

    #[test]
    fn topology_preserves_order_and_flags_weak_nodes() {
        let t = Topology::from_db(&[-15.0, -50.0, -33.0], 5.0, -45.0).unwrap();
        let dbs: Vec<f64> = t.powers().iter().map(|p| p.db()).collect();
        assert_eq!(dbs, vec![-15.0, -50.0, -33.0]);
        assert_eq!(t.below_min_power(), vec![NodeId(1)]);
        assert!(Topology::from_db(&[], 5.0, -45.0).is_err());
    }

    proptest! {
        #[test]
        fn db_is_multiplicative_and_monotone(a in -100.0f64..100.0, b in -100.0f64..100.0) {
            let ab = db_to_linear(a + b).unwrap();
            let prod = db_to_linear(a).unwrap() * db_to_linear(b).unwrap();
            prop_assert!((ab - prod).abs() <= 1e-9 * ab);
            if a < b {
                prop_assert!(db_to_linear(a).unwrap() < db_to_linear(b).unwrap());
            }
        }

        #[test]
        fn power_round_trips(db in -200.0f64..200.0) {
            let p = PowerLevel::from_db(db).unwrap();
            prop_assert!(p.linear() > 0.0);
            prop_assert!((linear_to_db(p.linear()) - db).abs() < 1e-9);
        }
    }
}
