//! Finite-N critical amplitudes against the limit SDE on a small ladder.
//!
//! cargo run --release --example critical_compare

use hopf_cw::critical::{critical_compare, CriticalCompareConfig, DEFAULT_KAPPA_FLOOR};
use hopf_cw::micro::InitialCondition;
use hopf_cw::model::{DissipativeParams, ModelParams};
use hopf_cw::rng::DEFAULT_MASTER_SEED;

fn main() -> hopf_cw::Result<()> {
    let cfg = CriticalCompareConfig {
        params: ModelParams::Dissipative(DissipativeParams::critical(1.0)?),
        init: InitialCondition::DissipativeCritical { lambda_bar: 0.5 },
        n_list: vec![25, 100, 400, 1600],
        replicas: 1000,
        limit_replicas: 10_000,
        horizon: 1.0,
        output_step: 0.01,
        sde_dt: 1e-3,
        checkpoints: vec![0.5, 1.0],
        eta_lags: vec![0.01, 0.1],
        kappa_floor: DEFAULT_KAPPA_FLOOR,
        n_quad: 64,
        seed: DEFAULT_MASTER_SEED,
    };
    let report = critical_compare(&cfg)?;
    println!("kappa(0) = {}", report.kappa0);
    for pop in &report.populations {
        for c in &pop.checkpoints {
            println!(
                "N {:>5} t {:.1}: KS {:.4} (threshold {:.4}), mean {:.3} vs {:.3}",
                pop.n, c.t, c.ks, c.ks_threshold, c.moments_micro[0], c.moments_limit[0]
            );
        }
        if let Some(rel) = pop.phase.slope_relative_error {
            println!("N {:>5} phase slope relative error {rel:.4}", pop.n);
        }
    }
    Ok(())
}
