//! One trajectory of each microscopic model next to its deterministic limit.
//!
//! cargo run --release --example micro_trajectory

use hopf_cw::limit::{field, integrate};
use hopf_cw::micro::{InitialCondition, MicroRun, TimeGrid};
use hopf_cw::model::{DissipativeParams, ModelParams, TwoPopParams};
use hopf_cw::rng::{Domain, DEFAULT_MASTER_SEED};

fn show(params: ModelParams, init: InitialCondition, n: u64) -> hopf_cw::Result<()> {
    let grid = TimeGrid::new(10.0, 1.0)?;
    let traj = MicroRun { params, n, init, grid }.replica(DEFAULT_MASTER_SEED, Domain::Micro, 0)?;
    let ode = integrate(|x| field(&params, x), [traj.first[0], traj.second[0]], 10.0, 1e-3)?;
    let (a, b) = traj.column_names();
    println!("{} N={n}, {} events", params.kind().as_str(), traj.events);
    println!("{:>5} {:>10} {:>10} {:>10} {:>10}", "t", a, b, "ode", "ode");
    for (k, t) in traj.times().into_iter().enumerate() {
        let [x, y] = ode.at(t);
        println!("{t:>5.1} {:>10.5} {:>10.5} {x:>10.5} {y:>10.5}", traj.first[k], traj.second[k]);
    }
    Ok(())
}

fn main() -> hopf_cw::Result<()> {
    show(
        ModelParams::Dissipative(DissipativeParams::new(1.0, 1.2)?),
        InitialCondition::Dissipative { lambda0: 0.5 },
        10_000,
    )?;
    println!();
    show(
        ModelParams::TwoPop(TwoPopParams::with_balanced_j22(0.5, 2.0, 1.0, -1.0)?),
        InitialCondition::TwoPop { p1: 0.7, p2: 0.5 },
        10_000,
    )
}
