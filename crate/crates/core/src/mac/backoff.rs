//! Backoff counter samplers.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::policy::MAX_CW;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SamplerKind {
    /// Exact uniform draw on `[0, cw]`.
    #[default]
    Uniform,
    /// Shift-register sampler with bit mask and accept/reject random walk.
    Fpga,
}

pub fn sample_backoff_uniform<R: Rng + ?Sized>(cw: u16, rng: &mut R) -> u16 {
    debug_assert!(cw <= MAX_CW);
    if cw == 0 {
        0
    } else {
        rng.random_range(0..=cw)
    }
}

/// Smallest `2^n - 1` that is at least `cw`.
pub fn mask_for(cw: u16) -> u16 {
    let mut mask = 0u16;
    while mask < cw {
        mask = (mask << 1) | 1;
    }
    mask
}

/// 32-bit Galois LFSR (x^32 + x^22 + x^2 + x + 1) plus the last backoff
/// handed out.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FpgaRngState {
    lfsr: u32,
    pub prev_backoff: u16,
}

impl FpgaRngState {
    const TAPS: u32 = 0x8020_0003;

    pub fn new(seed: u64) -> Self {
        // fold to 32 bits; an all-zero register would lock up
        let folded = (seed ^ (seed >> 32)) as u32;
        Self { lfsr: if folded == 0 { 0xACE1_u32 } else { folded }, prev_backoff: 0 }
    }

    fn bit(&mut self) -> u16 {
        let out = (self.lfsr & 1) as u16;
        self.lfsr >>= 1;
        if out == 1 {
            self.lfsr ^= Self::TAPS;
        }
        out
    }

    /// Ten fresh register bits, a value in `[0, 1023]`.
    pub fn raw(&mut self) -> u16 {
        (0..10).fold(0u16, |acc, _| (acc << 1) | self.bit())
    }

    pub fn coin(&mut self) -> bool {
        self.bit() == 1
    }
}

/// One sampler decision given the register outputs.
///
/// Accepts `raw & mask` when it fits in the window. Otherwise steps the
/// previous backoff up (`coin`) or down, keeping the step only if it stays
/// inside `[0, cw]`.
pub fn fpga_decide(cw: u16, raw: u16, coin: bool, prev: u16) -> u16 {
    let masked = raw & mask_for(cw);
    if masked <= cw {
        return masked;
    }
    let stepped = if coin { prev as i32 + 1 } else { prev as i32 - 1 };
    if (0..=cw as i32).contains(&stepped) {
        stepped as u16
    } else {
        prev.min(cw)
    }
}

pub fn sample_backoff_fpga(cw: u16, state: &mut FpgaRngState) -> u16 {
    debug_assert!(cw <= MAX_CW);
    let raw = state.raw();
    let masked = raw & mask_for(cw);
    let value = if masked <= cw {
        masked
    } else {
        let coin = state.coin();
        fpga_decide(cw, raw, coin, state.prev_backoff)
    };
    state.prev_backoff = value;
    value
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn masks() {
        assert_eq!(mask_for(0), 0);
        assert_eq!(mask_for(1), 1);
        assert_eq!(mask_for(2), 3);
        assert_eq!(mask_for(11), 15);
        assert_eq!(mask_for(16), 31);
        assert_eq!(mask_for(1023), 1023);
    }

    #[test]
    fn zero_window_always_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut fpga = FpgaRngState::new(1);
        for _ in 0..1000 {
            assert_eq!(sample_backoff_uniform(0, &mut rng), 0);
            assert_eq!(sample_backoff_fpga(0, &mut fpga), 0);
        }
    }

    #[test]
    fn uniform_mean_for_window_two() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let n = 3_000_000u64;
        let sum: u64 = (0..n).map(|_| sample_backoff_uniform(2, &mut rng) as u64).sum();
        let mean = sum as f64 / n as f64;
        assert!((mean - 1.0).abs() < 0.01, "{mean}");
    }

    #[test]
    fn uniform_frequencies_for_window_eleven() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 1_000_000usize;
        let mut counts = [0usize; 12];
        for _ in 0..n {
            counts[sample_backoff_uniform(11, &mut rng) as usize] += 1;
        }
        let p = 1.0 / 12.0;
        let sigma = (n as f64 * p * (1.0 - p)).sqrt();
        for c in counts {
            assert!((c as f64 - n as f64 * p).abs() < 3.0 * sigma, "{counts:?}");
        }
    }

    #[test]
    fn masked_value_out_of_window_walks_from_previous() {
        // cw 11 uses mask 15; raw 13 masks to 13 > 11
        assert_eq!(fpga_decide(11, 13, true, 5), 6);
        assert_eq!(fpga_decide(11, 13, false, 5), 4);
        // walk off either edge keeps the previous value
        assert_eq!(fpga_decide(11, 13, false, 0), 0);
        assert_eq!(fpga_decide(11, 13, true, 11), 11);
        // in-window masked value is taken directly
        assert_eq!(fpga_decide(11, 0x3F7, true, 5), 7);
    }

    #[test]
    fn power_of_two_windows_take_masked_raw() {
        for cw in [1u16, 3, 7, 15, 63, 1023] {
            let mut a = FpgaRngState::new(77);
            let mut b = a.clone();
            for _ in 0..10_000 {
                let raw = b.raw();
                assert_eq!(sample_backoff_fpga(cw, &mut a), raw & cw);
            }
        }
    }

    #[test]
    fn register_never_sticks() {
        let mut s = FpgaRngState::new(0);
        let first: Vec<u16> = (0..8).map(|_| s.raw()).collect();
        assert!(first.iter().any(|&v| v != first[0]));
        assert!(first.iter().all(|&v| v <= 1023));
    }
}
