use hes_lyapunov::baselines::GreedyPolicy;
use hes_lyapunov::controller::{LbapcController, Policy};
use hes_lyapunov::model::{ControlParams, SystemParams, EH_BS, HES_BS};
use hes_lyapunov::stochastic::{Scenario, ScenarioConfig};
use proptest::prelude::*;

fn setup(
    seed: u64,
    k: usize,
    v: f64,
    eps: f64,
    slots: u64,
) -> (SystemParams, ControlParams, Scenario) {
    let params = SystemParams {
        num_users: k,
        n_channels: [1, k],
        ..SystemParams::default()
    };
    let ctrl = ControlParams::new(&params, [eps, eps], v).unwrap();
    let scenario = Scenario::new(ScenarioConfig::from_params(&params, seed, slots), k).unwrap();
    (params, ctrl, scenario)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn lbapc_battery_bookkeeping(
        seed in any::<u64>(),
        k in 1usize..=5,
        log_v in -5.5f64..-4.0,
        eps in 0.02f64..0.2,
    ) {
        let (params, ctrl, scenario) = setup(seed, k, 10f64.powf(log_v), eps, 4000);
        let mut c = LbapcController::new(params.clone(), ctrl.clone()).unwrap();
        let mut net = [0.0f64; 2];
        let mut scale = [0.0f64; 2];
        for obs in scenario {
            let rec = c.step(&obs).unwrap();
            for j in [EH_BS, HES_BS] {
                let b = rec.battery[j];
                prop_assert!(b >= 0.0 && b <= ctrl.theta[j] + params.eh_max[j]);
                if rec.decision.harvested[j] > 0.0 {
                    prop_assert!(b <= ctrl.theta[j], "stored above theta at {b}");
                }
                let drawn = rec.decision.battery_output(j) * params.slot_len;
                net[j] += rec.decision.harvested[j] - drawn;
                scale[j] += rec.decision.harvested[j] + drawn;
            }
        }
        let end = c.state().battery;
        for j in [EH_BS, HES_BS] {
            prop_assert!((end[j] - net[j]).abs() <= 1e-12 * scale[j] + 1e-15,
                "station {j}: {} vs {}", end[j], net[j]);
        }
    }

    #[test]
    fn greedy_never_overdraws(seed in any::<u64>(), k in 1usize..=6) {
        let (params, _, scenario) = setup(seed, k, 1e-4, 0.04, 3000);
        let mut g = GreedyPolicy::new(params.clone(), None).unwrap();
        let mut arrived = [0.0f64; 2];
        for obs in scenario {
            let rec = g.step(&obs).unwrap();
            let d = &rec.decision;
            for j in [EH_BS, HES_BS] {
                prop_assert!(d.battery_output(j) * params.slot_len <= rec.battery[j] * (1.0 + 1e-9) + 1e-15);
                prop_assert!(rec.battery[j] <= arrived[j] * (1.0 + 1e-12) + 1e-18);
                arrived[j] += obs.harvestable[j];
            }
            let hes: f64 = (0..k).map(|u| d.p_h2[u] + d.p_g[u]).sum();
            prop_assert!(hes <= params.p_max[HES_BS] * (1.0 + 1e-9));
            prop_assert!(d.p_h1.iter().sum::<f64>() <= params.p_max[EH_BS] * (1.0 + 1e-9));
            for u in 0..k {
                prop_assert!(d.p_h2[u] == 0.0 || d.p_g[u] == 0.0);
            }
        }
    }
}

#[test]
fn long_run_stays_within_the_battery_bounds() {
    let (params, ctrl, scenario) = setup(7, 4, 1e-4, 0.04, 100_000);
    let mut c = LbapcController::new(params.clone(), ctrl.clone()).unwrap();
    let mut hi = [0.0f64; 2];
    for obs in scenario {
        let rec = c.step(&obs).unwrap();
        for j in [EH_BS, HES_BS] {
            hi[j] = hi[j].max(rec.battery[j]);
        }
    }
    for j in [EH_BS, HES_BS] {
        assert!(hi[j] <= ctrl.theta[j] + params.eh_max[j]);
        // the battery does fill up
        assert!(hi[j] > 0.9 * ctrl.theta[j], "{}", hi[j]);
    }
}
