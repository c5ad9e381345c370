//! Brute-force oracles shared by the integration tests.
#![allow(dead_code)]

use hopf_cw::micro::{run_twopop, TimeGrid};
use hopf_cw::model::{TwoPopParams, TwoPopState};
use hopf_cw::rng::{stream, Domain, DEFAULT_MASTER_SEED};
use rayon::prelude::*;

/// exp(Q t) by scaling and squaring of a Taylor series.
pub fn expm(q: &[Vec<f64>], t: f64) -> Vec<Vec<f64>> {
    let d = q.len();
    let norm = q.iter().map(|r| r.iter().map(|x| x.abs()).sum::<f64>()).fold(0.0, f64::max) * t;
    let s = (norm / 0.25).log2().ceil().max(0.0) as i32;
    let a: Vec<Vec<f64>> = q.iter().map(|r| r.iter().map(|x| x * t / 2f64.powi(s)).collect()).collect();
    let mul = |x: &Vec<Vec<f64>>, y: &Vec<Vec<f64>>| {
        (0..d)
            .map(|i| (0..d).map(|j| (0..d).map(|k| x[i][k] * y[k][j]).sum()).collect())
            .collect::<Vec<Vec<f64>>>()
    };
    let mut e: Vec<Vec<f64>> = (0..d).map(|i| (0..d).map(|j| (i == j) as u8 as f64).collect()).collect();
    let mut term = e.clone();
    for k in 1..30 {
        term = mul(&term, &a).into_iter().map(|r| r.into_iter().map(|x| x / k as f64).collect()).collect();
        for i in 0..d {
            for j in 0..d {
                e[i][j] += term[i][j];
            }
        }
    }
    for _ in 0..s {
        e = mul(&e, &e);
    }
    e
}

pub fn tv(p: &[f64], q: &[f64]) -> f64 {
    p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>() / 2.0
}

pub fn histogram(values: impl Iterator<Item = usize>, bins: usize) -> Vec<f64> {
    let mut h = vec![0.0; bins];
    let mut total = 0.0;
    for v in values {
        h[v] += 1.0;
        total += 1.0;
    }
    h.iter().map(|x| x / total).collect()
}

/// Total variation between the engine and the matrix exponential of the
/// generator on the (n1_plus, n2_plus) lattice, at t = 1.
pub fn twopop_tv(p: &TwoPopParams, n1: u64, n2: u64, start: (u64, u64), replicas: u64, domain: Domain) -> f64 {
    let n = (n1 + n2) as f64;
    let idx = |a: u64, b: u64| (a * (n2 + 1) + b) as usize;
    let states = ((n1 + 1) * (n2 + 1)) as usize;
    let mut q = vec![vec![0.0; states]; states];
    for a in 0..=n1 {
        for b in 0..=n2 {
            let m1 = (2.0 * a as f64 - n1 as f64) / n;
            let m2 = (2.0 * b as f64 - n2 as f64) / n;
            let r1 = p.j11 * m1 + p.j12 * m2;
            let r2 = p.j21 * m1 + p.j22 * m2;
            let from = idx(a, b);
            let mut moves = vec![];
            if a > 0 {
                moves.push((idx(a - 1, b), a as f64 * (-r1).exp()));
            }
            if a < n1 {
                moves.push((idx(a + 1, b), (n1 - a) as f64 * r1.exp()));
            }
            if b > 0 {
                moves.push((idx(a, b - 1), b as f64 * (-r2).exp()));
            }
            if b < n2 {
                moves.push((idx(a, b + 1), (n2 - b) as f64 * r2.exp()));
            }
            for (to, rate) in moves {
                q[from][to] += rate;
                q[from][from] -= rate;
            }
        }
    }
    let exact = expm(&q, 1.0)[idx(start.0, start.1)].clone();
    let grid = TimeGrid::new(1.0, 1.0).unwrap();
    let finals: Vec<usize> = (0..replicas)
        .into_par_iter()
        .map(|k| {
            let mut rng = stream(DEFAULT_MASTER_SEED, domain, k);
            let s = TwoPopState::new(n1, n2, start.0, start.1).unwrap();
            let t = run_twopop(p, s, grid, &mut rng);
            let a = ((t.first[1] * n + n1 as f64) / 2.0).round() as u64;
            let b = ((t.second[1] * n + n2 as f64) / 2.0).round() as u64;
            idx(a, b)
        })
        .collect();
    tv(&histogram(finals.into_iter(), states), &exact)
}
