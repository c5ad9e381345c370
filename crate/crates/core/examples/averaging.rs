//! Phase-averaged generator coefficients and the two-population constants.
//!
//! cargo run --release --example averaging

use hopf_cw::critical::{averaged_coeffs_dissipative, extract_z_constants, DEFAULT_QUADRATURE_NODES};
use hopf_cw::model::TwoPopParams;

fn main() -> hopf_cw::Result<()> {
    for (beta, kappa) in [(1.5, 0.0), (2.0, 1.0), (3.0, 5.0)] {
        let c = averaged_coeffs_dissipative(beta, kappa, DEFAULT_QUADRATURE_NODES);
        println!(
            "beta {beta} kappa {kappa}: drift {:.6} (closed form {:.6}), diffusion {:.6} (closed form {:.6})",
            c.drift,
            4.0 * beta * beta - beta * kappa * kappa / 2.0,
            c.diffusion,
            4.0 * beta * beta * kappa
        );
    }
    for (g, j11, j12, j21) in [(0.5, 2.0, 1.0, -1.0), (0.5, 1.0, 2.0, -3.0), (0.6, -10.0, 20.0, -15.0)] {
        let p = TwoPopParams::with_balanced_j22(g, j11, j12, j21)?;
        let z = extract_z_constants(&p, DEFAULT_QUADRATURE_NODES)?;
        println!(
            "gamma {g} J11 {j11} J12 {j12} J21 {j21}: Z1 {:.6} (closed form {:.6}), Z2 {:.6} (printed {:.6}){}",
            z.z1_numeric,
            z.z1_printed,
            z.z2_numeric,
            z.z2_printed,
            if z.z2_nonnegative { ", no confining drift" } else { "" }
        );
    }
    Ok(())
}
