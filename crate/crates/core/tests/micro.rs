//! Finite-N engines against deterministic and brute-force references.

use hopf_cw::limit::{field_dissipative, integrate};
use hopf_cw::micro::{ensemble_in, run_twopop, InitialCondition, MicroRun, TimeGrid};
use hopf_cw::model::{DissipativeParams, ModelParams, TwoPopParams, TwoPopState};
use hopf_cw::rng::{stream, Domain, DEFAULT_MASTER_SEED};

mod common;
use common::{expm, twopop_tv};

#[test]
fn matrix_exponential_of_a_two_state_chain() {
    // rates a: 0 -> 1 and b: 1 -> 0
    let (a, b, t) = (0.7, 1.9, 1.3);
    let p = expm(&[vec![-a, a], vec![b, -b]], t);
    let stay = (b + a * (-(a + b) * t).exp()) / (a + b);
    assert!((p[0][0] - stay).abs() < 1e-13);
    assert!((p[0][0] + p[0][1] - 1.0).abs() < 1e-13);
}

#[test]
fn twopop_engine_matches_matrix_exponential() {
    let p = TwoPopParams::new(0.5, -0.6, 1.4, 0.9, 0.3).unwrap();
    let tv = twopop_tv(&p, 2, 2, (1, 2), 100_000, Domain::Custom(201));
    assert!(tv <= 0.01, "TV {tv}");
}

#[test]
fn subcritical_paths_track_the_limit_ode() {
    let params = DissipativeParams::new(1.0, 1.2).unwrap();
    let run = MicroRun {
        params: ModelParams::Dissipative(params),
        n: 10_000,
        init: InitialCondition::Dissipative { lambda0: 0.5 },
        grid: TimeGrid::new(5.0, 0.5).unwrap(),
    };
    let trajs = ensemble_in(&run, 200, DEFAULT_MASTER_SEED, Domain::Micro).unwrap();
    let close = trajs
        .iter()
        .filter(|t| {
            let x0 = [t.first[0], t.second[0]];
            let ode = integrate(|x| field_dissipative(&params, x), x0, 5.0, 1e-3).unwrap();
            let [m, l] = ode.at(5.0);
            let k = t.len() - 1;
            (t.first[k] - m).abs() <= 0.05 && (t.second[k] - l).abs() <= 0.05
        })
        .count();
    assert!(close >= 190, "{close} of 200 replicas within 0.05");
}

#[test]
fn critical_twopop_orbit_rotates_like_its_linearization() {
    let (g, j) = (0.5, 1.0);
    let p = TwoPopParams::new(g, 2.0, j, -j, 2.0).unwrap();
    assert!(p.is_critical());
    // linearization of ṁ_k = 2(γ_k sinh R_k − m_k cosh R_k) at the origin
    let a = [
        [2.0 * (g * p.j11 - 1.0), 2.0 * g * p.j12],
        [2.0 * (1.0 - g) * p.j21, 2.0 * ((1.0 - g) * p.j22 - 1.0)],
    ];
    let omega = (-(a[0][0] * a[0][0]) - a[0][1] * a[1][0]).sqrt();
    let expected = omega * a[1][0].signum();

    let n = 100_000u64;
    let grid = TimeGrid::new(30.0, 0.05).unwrap();
    let mut rng = stream(DEFAULT_MASTER_SEED, Domain::Custom(202), 0);
    let state = TwoPopState::new(n / 2, n / 2, 3 * n / 10, n / 4).unwrap();
    let traj = run_twopop(&p, state, grid, &mut rng);
    let mut theta: Vec<f64> = Vec::with_capacity(traj.len());
    for (x, y) in traj.first.iter().zip(&traj.second) {
        let raw = y.atan2(*x);
        let unwrapped = match theta.last() {
            None => raw,
            Some(&prev) => prev + (raw - prev + std::f64::consts::PI).rem_euclid(std::f64::consts::TAU)
                - std::f64::consts::PI,
        };
        theta.push(unwrapped);
    }
    let ts = traj.times();
    let (mt, mth) = (ts.iter().sum::<f64>() / ts.len() as f64, theta.iter().sum::<f64>() / ts.len() as f64);
    let slope = ts.iter().zip(&theta).map(|(t, h)| (t - mt) * (h - mth)).sum::<f64>()
        / ts.iter().map(|t| (t - mt).powi(2)).sum::<f64>();
    assert!((omega - 2.0 * p.gamma_big().abs().sqrt()).abs() < 1e-12);
    assert!((slope - expected).abs() <= 0.05 * omega, "slope {slope}, expected {expected}");
}

#[test]
fn twopop_event_count_respects_the_rate_bound() {
    let p = TwoPopParams::new(0.4, 0.5, -0.8, 0.6, 0.2).unwrap();
    let run = MicroRun {
        params: ModelParams::TwoPop(p),
        n: 500,
        init: InitialCondition::TwoPop { p1: 0.8, p2: 0.3 },
        grid: TimeGrid::new(2.0, 0.1).unwrap(),
    };
    let trajs = ensemble_in(&run, 50, DEFAULT_MASTER_SEED, Domain::Micro).unwrap();
    let mean = trajs.iter().map(|t| t.events as f64).sum::<f64>() / trajs.len() as f64;
    let bound = 500.0 * (p.j11.abs() + p.j12.abs() + p.j21.abs() + p.j22.abs()).exp() * 2.0;
    assert!(mean <= bound);
}
