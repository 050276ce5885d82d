//! Seeded i.i.d. channel and energy-arrival processes.
//!
//! A [`Scenario`] owns a single `ChaCha8Rng` stream. Each slot consumes
//! exactly `2K + 2` uniform draws in this order: EH-BS gains for users
//! `0..K`, HES-BS gains for users `0..K`, EH-BS arrival, HES-BS arrival.
//! Gains are exponential (inverse transform `-mean * ln(1 - u)`), arrivals are
//! uniform on `[0, E_max]`. Every policy fed from the same seed therefore sees
//! the same sample path.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::model::{ModelError, SlotObservation, SystemParams, EH_BS, HES_BS};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub seed: u64,
    pub channel_mean: [f64; 2],
    pub eh_max: [f64; 2],
    pub num_slots: u64,
}

impl ScenarioConfig {
    /// Scenario matching the channel and harvesting statistics in `params`.
    pub fn from_params(params: &SystemParams, seed: u64, num_slots: u64) -> Self {
        Self {
            seed,
            channel_mean: params.mean_gain,
            eh_max: params.eh_max,
            num_slots,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        for j in [EH_BS, HES_BS] {
            let m = self.channel_mean[j];
            if !(m.is_finite() && m > 0.0) {
                return Err(ModelError::InvalidParam {
                    field: "channel_mean",
                    reason: format!("must be positive, got {m}"),
                });
            }
            let e = self.eh_max[j];
            if !(e.is_finite() && e >= 0.0) {
                return Err(ModelError::InvalidParam {
                    field: "eh_max",
                    reason: format!("must be non-negative, got {e}"),
                });
            }
        }
        if self.num_slots == 0 {
            return Err(ModelError::InvalidParam {
                field: "num_slots",
                reason: "must be at least 1".into(),
            });
        }
        Ok(())
    }
}

/// Per-slot energy budget `2 * P_H * tau` for a uniform arrival with mean power `P_H`.
pub fn eh_power_to_max(avg_power: f64, slot_len: f64) -> f64 {
    2.0 * avg_power * slot_len
}

/// Seed of replicate `index` derived from `base` with one SplitMix64 step.
pub fn derive_seed(base: u64, index: u64) -> u64 {
    let mut z = base.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn exponential_cdf(mean: f64) -> impl Fn(f64) -> f64 {
    move |x| {
        if x <= 0.0 {
            0.0
        } else {
            1.0 - (-x / mean).exp()
        }
    }
}

/// Empirical CDF over a fixed sample.
#[derive(Debug, Clone)]
pub struct EmpiricalCdf {
    sorted: Vec<f64>,
}

impl EmpiricalCdf {
    pub fn new(mut samples: Vec<f64>) -> Self {
        samples.sort_by(f64::total_cmp);
        Self { sorted: samples }
    }

    pub fn eval(&self, x: f64) -> f64 {
        if self.sorted.is_empty() {
            return 0.0;
        }
        self.sorted.partition_point(|&s| s <= x) as f64 / self.sorted.len() as f64
    }

    /// Kolmogorov-Smirnov distance to a reference CDF.
    pub fn ks_distance(&self, cdf: impl Fn(f64) -> f64) -> f64 {
        let n = self.sorted.len() as f64;
        self.sorted
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let f = cdf(x);
                (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
            })
            .fold(0.0, f64::max)
    }
}

/// Generator of slot observations. As an iterator it yields `num_slots` items.
#[derive(Debug, Clone)]
pub struct Scenario {
    cfg: ScenarioConfig,
    num_users: usize,
    rng: ChaCha8Rng,
    emitted: u64,
}

impl Scenario {
    pub fn new(cfg: ScenarioConfig, num_users: usize) -> Result<Self, ModelError> {
        cfg.validate()?;
        let rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        Ok(Self {
            cfg,
            num_users,
            rng,
            emitted: 0,
        })
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.cfg
    }

    pub fn next_observation(&mut self) -> SlotObservation {
        self.emitted += 1;
        let k = self.num_users;
        let mut gains = [Vec::with_capacity(k), Vec::with_capacity(k)];
        for j in [EH_BS, HES_BS] {
            let mean = self.cfg.channel_mean[j];
            for _ in 0..k {
                let u: f64 = self.rng.gen();
                gains[j].push(-mean * (-u).ln_1p());
            }
        }
        let mut harvestable = [0.0; 2];
        for j in [EH_BS, HES_BS] {
            let u: f64 = self.rng.gen();
            harvestable[j] = (u * self.cfg.eh_max[j]).min(self.cfg.eh_max[j]);
        }
        SlotObservation { gains, harvestable }
    }
}

impl Iterator for Scenario {
    type Item = SlotObservation;

    fn next(&mut self) -> Option<SlotObservation> {
        (self.emitted < self.cfg.num_slots).then(|| self.next_observation())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scenario(seed: u64, eh_max: [f64; 2]) -> Scenario {
        let cfg = ScenarioConfig {
            seed,
            channel_mean: [1.6e-11, 1.6e-11],
            eh_max,
            num_slots: u64::MAX,
        };
        Scenario::new(cfg, 4).unwrap()
    }

    #[test]
    fn eh_power_conversion() {
        assert!((eh_power_to_max(0.03, 1e-3) - 6e-5).abs() < 1e-18);
        assert_eq!(eh_power_to_max(0.0, 1e-3), 0.0);
        let p = 0.037;
        assert_eq!(eh_power_to_max(p, 1e-3) / (2.0 * 1e-3), p);
    }

    #[test]
    fn reference_mean_gain() {
        assert!((1e-4 * 50f64.powi(-4) - 1.6e-11).abs() < 1e-24);
    }

    #[test]
    fn zero_eh_max_gives_zero_arrivals() {
        let mut s = scenario(3, [0.0, 0.0]);
        for _ in 0..1000 {
            assert_eq!(s.next_observation().harvestable, [0.0, 0.0]);
        }
    }

    #[test]
    fn same_seed_same_path() {
        let a: Vec<_> = scenario(42, [6e-5, 6e-5]).take(500).collect();
        let b: Vec<_> = scenario(42, [6e-5, 6e-5]).take(500).collect();
        assert_eq!(a, b);
        let c: Vec<_> = scenario(43, [6e-5, 6e-5]).take(500).collect();
        assert_ne!(a, c);
    }

    #[test]
    fn iterator_stops_after_the_horizon() {
        let mut s = scenario(3, [6e-5, 6e-5]);
        s.cfg.num_slots = 7;
        assert_eq!(s.count(), 7);
    }

    #[test]
    fn arrivals_within_bounds() {
        let mut s = scenario(9, [6e-5, 1e-4]);
        for _ in 0..10_000 {
            let o = s.next_observation();
            assert!(o.harvestable[0] >= 0.0 && o.harvestable[0] <= 6e-5);
            assert!(o.harvestable[1] >= 0.0 && o.harvestable[1] <= 1e-4);
        }
    }

    #[test]
    fn gain_mean_and_distribution() {
        let mut s = scenario(11, [6e-5, 6e-5]);
        let mut samples = Vec::with_capacity(1_000_000);
        while samples.len() < 1_000_000 {
            let o = s.next_observation();
            samples.extend_from_slice(&o.gains[0]);
        }
        samples.truncate(1_000_000);
        let mean = samples.iter().sum::<f64>() / samples.len() as f64;
        assert!((mean / 1.6e-11 - 1.0).abs() < 0.01, "mean {mean}");
        let ecdf = EmpiricalCdf::new(samples);
        let ks = ecdf.ks_distance(exponential_cdf(1.6e-11));
        assert!(ks < 0.01, "ks {ks}");
    }

    #[test]
    fn derived_seeds_are_distinct() {
        let seeds: std::collections::HashSet<_> = (0..1000).map(|i| derive_seed(7, i)).collect();
        assert_eq!(seeds.len(), 1000);
        assert_eq!(derive_seed(7, 3), derive_seed(7, 3));
    }

    #[test]
    fn empirical_cdf_steps() {
        let e = EmpiricalCdf::new(vec![3.0, 1.0, 2.0, 2.0]);
        assert_eq!(e.eval(0.5), 0.0);
        assert_eq!(e.eval(1.0), 0.25);
        assert_eq!(e.eval(2.0), 0.75);
        assert_eq!(e.eval(10.0), 1.0);
    }
}
