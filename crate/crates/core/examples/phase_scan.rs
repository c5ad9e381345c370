//! Eigenvalues at the origin and long-run ODE behaviour across the Hopf point.
//!
//! cargo run --release --example phase_scan

use hopf_cw::limit::{phase_scan, PhaseScanConfig};

fn main() -> hopf_cw::Result<()> {
    let cfg = PhaseScanConfig {
        alpha: 1.0,
        beta_min: 1.2,
        beta_max: 1.8,
        beta_steps: 13,
        x0: [0.1, 0.1],
        horizon: 400.0,
        step: None,
        tail_fraction: 0.25,
    };
    println!("{:>6} {:>10} {:>9} {:>13} {:>9}", "beta", "Re", "Im", "cycle", "period");
    for row in phase_scan(&cfg)? {
        println!(
            "{:>6.3} {:>10.4} {:>9.4} {:>13} {:>9}",
            row.beta,
            row.re_eig,
            row.im_eig,
            row.cycle.as_str(),
            row.period.map_or("-".into(), |p| format!("{p:.3}")),
        );
    }
    Ok(())
}
