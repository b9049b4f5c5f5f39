//! Order-preserving batch execution.
//!
//! Independent runs are spread over a rayon pool when the `parallel` feature
//! is on; otherwise, or through the `_sequential` variants, they run on the
//! calling thread. Results come back in input order either way, and since
//! every run owns its random streams the output does not depend on the mode.

use crate::mac::{run, RunOutput, SimConfig, SimError};

#[cfg(feature = "parallel")]
pub fn map_ordered<T, R, F>(items: Vec<T>, f: F) -> Vec<R>
where
    T: Send,
    R: Send,
    F: Fn(T) -> R + Sync + Send,
{
    use rayon::prelude::*;
    items.into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn map_ordered<T, R, F>(items: Vec<T>, f: F) -> Vec<R>
where
    T: Send,
    R: Send,
    F: Fn(T) -> R + Sync + Send,
{
    map_sequential(items, f)
}

pub fn map_sequential<T, R, F>(items: Vec<T>, f: F) -> Vec<R>
where
    F: Fn(T) -> R,
{
    items.into_iter().map(f).collect()
}

/// Runs every configuration, in parallel when enabled.
pub fn run_batch(configs: Vec<SimConfig>) -> Vec<Result<RunOutput, SimError>> {
    map_ordered(configs, run)
}

pub fn run_batch_sequential(configs: Vec<SimConfig>) -> Vec<Result<RunOutput, SimError>> {
    map_sequential(configs, run)
}

/// Whether [`map_ordered`] uses a thread pool in this build.
pub const fn is_parallel() -> bool {
    cfg!(feature = "parallel")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::PolicySpec;
    use crate::units::Topology;

    #[test]
    fn order_is_preserved() {
        let out = map_ordered((0..1000u64).collect(), |x| x * x);
        assert_eq!(out, (0..1000u64).map(|x| x * x).collect::<Vec<_>>());
    }

    #[test]
    fn batch_modes_agree() {
        let t = Topology::from_db(&[-15.0, -25.0, -35.0], 5.0, -45.0).unwrap();
        let cfgs: Vec<SimConfig> = (0..6)
            .map(|seed| SimConfig::saturated(t.clone(), PolicySpec::Dcf80211 { initial_cw: 8 }, 5_000, seed))
            .collect();
        let a = run_batch(cfgs.clone());
        let b = run_batch_sequential(cfgs);
        for (x, y) in a.into_iter().zip(b) {
            let (x, y) = (x.unwrap(), y.unwrap());
            assert_eq!(x.traces, y.traces);
            assert_eq!(x.summary, y.summary);
        }
    }
}
