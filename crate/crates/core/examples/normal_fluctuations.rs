//! Variance of √N(m_N(t) − m(t)) against the linear fluctuation SDE.
//!
//! cargo run --release --example normal_fluctuations

use hopf_cw::fluct::{simulate_linear_fluctuation, LinearFluctuation, SdeConfig};
use hopf_cw::limit::{field_dissipative, integrate};
use hopf_cw::micro::{ensemble_in, InitialCondition, MicroRun, TimeGrid};
use hopf_cw::model::{DissipativeParams, ModelParams};
use hopf_cw::rng::{stream, Domain, DEFAULT_MASTER_SEED};
use rand::Rng;
use rand_distr::StandardNormal;

fn variance(xs: &[f64]) -> f64 {
    let mean = xs.iter().sum::<f64>() / xs.len() as f64;
    xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (xs.len() - 1) as f64
}

fn main() -> hopf_cw::Result<()> {
    let p = DissipativeParams::new(1.0, 1.2)?;
    let n = 10_000u64;
    let ode = integrate(|x| field_dissipative(&p, x), [0.0, 0.5], 2.0, 1e-4)?;
    let run = MicroRun {
        params: ModelParams::Dissipative(p),
        n,
        init: InitialCondition::Dissipative { lambda0: 0.5 },
        grid: TimeGrid::new(2.0, 0.5)?,
    };
    let micro = ensemble_in(&run, 500, DEFAULT_MASTER_SEED, Domain::Micro)?;
    let cfg = SdeConfig::new(2.0, 1e-3, 0.5)?;
    let mut linear = Vec::new();
    for k in 0..5000 {
        let mut rng = stream(DEFAULT_MASTER_SEED, Domain::LinearFluctuation, k);
        let m0: f64 = rng.sample(StandardNormal);
        let opts = LinearFluctuation { initial: [m0, 0.0], ..Default::default() };
        linear.push(simulate_linear_fluctuation(&p, &ode, &opts, &cfg, &mut rng)?);
    }
    println!("{:>4} {:>12} {:>12}", "t", "micro var", "linear var");
    for k in 0..run.grid.len() {
        let t = run.grid.time(k);
        let m = ode.at(t)[0];
        let a: Vec<f64> = micro.iter().map(|tr| (n as f64).sqrt() * (tr.first[k] - m)).collect();
        let b: Vec<f64> = linear.iter().map(|path| path.column("m").unwrap()[k]).collect();
        println!("{t:>4.1} {:>12.4} {:>12.4}", variance(&a), variance(&b));
    }
    Ok(())
}
