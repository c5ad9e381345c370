//! The critical amplitude SDE: planar and direct schemes and the stationary law.
//!
//! cargo run --release --example limit_sde

use hopf_cw::critical::ks_two_sample;
use hopf_cw::fluct::{kappa_ensemble, KappaScheme, RadialSdeParams, SdeConfig, StationaryDensity};
use hopf_cw::rng::{Domain, DEFAULT_MASTER_SEED};

fn main() -> hopf_cw::Result<()> {
    let p = RadialSdeParams::dissipative(1.5)?;
    let cfg = SdeConfig::new(20.0, 1e-3, 1.0)?;
    let finals = |scheme, domain| -> hopf_cw::Result<Vec<f64>> {
        let paths = kappa_ensemble(scheme, &p, 0.75, &cfg, 5000, DEFAULT_MASTER_SEED, Domain::Custom(domain))?;
        Ok(paths.iter().map(|path| *path.kappa().last().unwrap()).collect())
    };
    let xy = finals(KappaScheme::Xy, 1)?;
    let direct = finals(KappaScheme::Direct, 2)?;
    println!("KS planar vs direct at t=20: {:.4}", ks_two_sample(&xy, &direct)?);

    let density = StationaryDensity::new(p)?;
    println!("{:>8} {:>10} {:>10}", "quantile", "stationary", "planar");
    let mut sorted = xy.clone();
    sorted.sort_by(f64::total_cmp);
    for q in [0.1, 0.25, 0.5, 0.75, 0.9] {
        let empirical = sorted[(q * sorted.len() as f64) as usize];
        println!("{q:>8.2} {:>10.4} {empirical:>10.4}", density.quantile(q));
    }
    Ok(())
}
