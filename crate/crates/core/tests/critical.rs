//! Critical comparison pipeline on small, well-resolved population ladders.

use hopf_cw::critical::{critical_compare, CriticalCompareConfig, DEFAULT_KAPPA_FLOOR};
use hopf_cw::micro::InitialCondition;
use hopf_cw::model::{DissipativeParams, ModelParams, TwoPopParams};
use hopf_cw::rng::DEFAULT_MASTER_SEED;

fn config(params: ModelParams, init: InitialCondition, n_list: Vec<u64>) -> CriticalCompareConfig {
    CriticalCompareConfig {
        params,
        init,
        n_list,
        replicas: 4000,
        limit_replicas: 40_000,
        horizon: 1.0,
        output_step: 0.01,
        sde_dt: 1e-3,
        checkpoints: vec![0.0, 0.5, 1.0],
        eta_lags: vec![0.01, 0.1],
        kappa_floor: DEFAULT_KAPPA_FLOOR,
        n_quad: 64,
        seed: DEFAULT_MASTER_SEED,
    }
}

#[test]
fn dissipative_amplitude_law_approaches_the_limit() {
    let params = ModelParams::Dissipative(DissipativeParams::critical(1.0).unwrap());
    let cfg = config(params, InitialCondition::DissipativeCritical { lambda_bar: 0.5 }, vec![25, 100, 400]);
    let r = critical_compare(&cfg).unwrap();
    assert!((r.kappa0 - 0.75).abs() < 1e-12);
    for ci in [1, 2] {
        let ks: Vec<f64> = r.populations.iter().map(|p| p.checkpoints[ci].ks).collect();
        assert!(ks.windows(2).all(|w| w[1] < w[0]), "KS {ks:?} at checkpoint {ci}");
        assert!(ks[2] <= 0.05);
    }
    // the initial amplitude concentrates as N grows
    let sd0: Vec<f64> = r
        .populations
        .iter()
        .map(|p| {
            let m = p.checkpoints[0].moments_micro;
            (m[1] - m[0] * m[0]).sqrt()
        })
        .collect();
    assert!(sd0.windows(2).all(|w| w[1] < w[0]), "{sd0:?}");
}

#[test]
fn twopop_comparison_reports_its_constants() {
    let p = TwoPopParams::with_balanced_j22(0.5, 2.0, 1.0, -1.0).unwrap();
    let mut cfg = config(ModelParams::TwoPop(p), InitialCondition::TwoPopCritical { epsilon: 0.5 }, vec![100, 400]);
    cfg.replicas = 500;
    cfg.limit_replicas = 5000;
    let r = critical_compare(&cfg).unwrap();
    // 4ε²γ²/|Γ| with ε = 1/2 is γ²/|Γ|
    assert!((r.kappa0 - 0.25 / 0.25).abs() < 1e-12);
    let z = r.z_constants.unwrap();
    assert!((z.z2_numeric + 4.0).abs() < 1e-9);
    assert!(!z.z2_nonnegative);
    let json: serde_json::Value = serde_json::from_str(&r.to_json()).unwrap();
    assert_eq!(json["populations"].as_array().unwrap().len(), 2);
    for pop in &r.populations {
        for c in &pop.checkpoints {
            assert!((0.0..=1.0).contains(&c.ks));
            assert!(c.moments_micro.iter().chain(&c.moments_limit).all(|m| m.is_finite()));
        }
    }
}
