//! Distance between the discrete generator and its first-order limit.
//!
//! cargo run --release --example generator_consistency

use hopf_cw::critical::{generator_consistency, state_grid, Quadratic};
use hopf_cw::model::{DissipativeParams, ModelParams, TwoPopParams};

fn main() -> hopf_cw::Result<()> {
    let models = [
        ModelParams::Dissipative(DissipativeParams::new(1.0, 1.5)?),
        ModelParams::TwoPop(TwoPopParams::with_balanced_j22(0.5, 2.0, 1.0, -1.0)?),
    ];
    for params in models {
        let states = state_grid(&params, 11);
        println!("{}", params.kind().as_str());
        for n in [100u64, 1000, 10_000] {
            let lin = generator_consistency(&params, n, &Quadratic::first(), &states)?;
            let sq = generator_consistency(&params, n, &Quadratic::first_squared(), &states)?;
            println!("  N {n:>6}: linear {lin:.2e}, quadratic {sq:.4e}");
        }
    }
    Ok(())
}
