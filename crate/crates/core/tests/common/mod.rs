#![allow(dead_code)]

use hes_lyapunov::model::{ControlParams, SlotObservation, SystemParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A random per-slot instance at reference scale.
#[derive(Debug, Clone)]
pub struct Instance {
    pub params: SystemParams,
    pub ctrl: ControlParams,
    pub obs: SlotObservation,
    pub battery: [f64; 2],
    pub vq: [f64; 2],
}

fn exp_draw(rng: &mut ChaCha8Rng, mean: f64) -> f64 {
    match rng.gen_range(0..20) {
        0 => 0.0,
        1 => mean * rng.gen_range(10.0..1000.0),
        _ => -mean * (1.0 - rng.gen::<f64>()).ln(),
    }
}

/// `case` picks the hybrid-station regime: 0 stores (vq2 >= 0), 1 grid only,
/// 2 mixed.
pub fn random_instance(seed: u64, k: usize, case: usize) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut params = SystemParams {
        num_users: k,
        ..SystemParams::default()
    };
    params.n_channels = [rng.gen_range(1..=k), rng.gen_range(1..=k)];
    let v = 10f64.powf(rng.gen_range(-5.0..-3.0));
    let eps = [rng.gen_range(0.01..0.2), rng.gen_range(0.01..0.2)];
    let ctrl = ControlParams::new(&params, eps, v).unwrap();
    let gains = [0, 1].map(|j| {
        (0..k)
            .map(|_| exp_draw(&mut rng, params.mean_gain[j]))
            .collect()
    });
    let harvestable = [0, 1].map(|j| rng.gen_range(0.0..=params.eh_max[j]));
    let obs = SlotObservation { gains, harvestable };

    let top = [0, 1].map(|j| ctrl.theta[j] + params.eh_max[j]);
    let b1 = match rng.gen_range(0..4) {
        0 => rng.gen_range(0.0..params.p_max[0] * params.slot_len),
        _ => rng.gen_range(0.0..=top[0]),
    };
    let vphi = v * params.phi_grid();
    let theta2 = ctrl.theta[1];
    let b2 = match case {
        0 => {
            if rng.gen_range(0..10) == 0 {
                theta2
            } else {
                rng.gen_range(theta2..=top[1])
            }
        }
        1 => {
            if rng.gen_range(0..4) == 0 {
                rng.gen_range(0.0..params.p_max[1] * params.slot_len)
            } else {
                rng.gen_range(0.0..theta2 - vphi)
            }
        }
        _ => {
            if rng.gen_range(0..10) == 0 {
                theta2 - vphi
            } else {
                theta2 - rng.gen_range(0.0..vphi)
            }
        }
    };
    let battery = [b1, b2];
    let vq = [b1 - ctrl.theta[0], b2 - theta2];
    Instance {
        params,
        ctrl,
        obs,
        battery,
        vq,
    }
}

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Sample standard deviation.
pub fn sd(x: &[f64]) -> f64 {
    let m = mean(x);
    (x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (x.len() as f64 - 1.0)).sqrt()
}

/// Standard error of the mean.
pub fn se(x: &[f64]) -> f64 {
    sd(x) / (x.len() as f64).sqrt()
}

/// Standard error of `mean(a) - mean(b)`.
pub fn se_diff(a: &[f64], b: &[f64]) -> f64 {
    (se(a).powi(2) + se(b).powi(2)).sqrt()
}

/// Least-squares line `y = a + b x`; returns `(a, b, r2)`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let (mx, my) = (mean(x), mean(y));
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    let b = sxy / sxx;
    let a = my - b * mx;
    (a, b, sxy * sxy / (sxx * syy))
}
