//! Exact event-driven simulation of the finite-N Markov chains.
//!
//! The dissipative model has time-dependent rates between spin flips (λ
//! decays continuously), so it is simulated by thinning: candidates arrive
//! at the constant rate `2N`, which dominates the total flip rate
//! `N(1 − m tanh λ)`, and each candidate is accepted with probability
//! `total / 2N`. The two-population model has piecewise-constant rates and
//! uses plain exponential waiting times.
//!
//! Trajectories are sampled on a uniform grid using the left limit of the
//! state at each grid time, with λ decayed exactly to that time.

use rand::Rng;
use rand_distr::{Binomial, Distribution, Exp1};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{require_finite, require_positive, Error, Result};
use crate::io::fmt_f64;
use crate::model::{
    DissipativeParams, DissipativeState, ModelKind, ModelParams, Spin, TwoPopEvent, TwoPopParams,
    TwoPopState,
};
use crate::rng::{stream, Domain};

/// Uniform grid `0, step, 2·step, …, horizon`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TimeGrid {
    pub step: f64,
    pub steps: usize,
}

impl TimeGrid {
    /// `horizon` must be an integer multiple of `step` (up to 1e-9 relative).
    pub fn new(horizon: f64, step: f64) -> Result<Self> {
        require_positive("horizon", horizon)?;
        require_positive("grid_step", step)?;
        let ratio = horizon / step;
        let steps = ratio.round();
        if steps < 1.0 || (steps - ratio).abs() > 1e-9 * ratio.max(1.0) {
            return Err(Error::config(
                "grid_step",
                format!("horizon {horizon} is not a multiple of grid step {step}"),
            ));
        }
        Ok(Self { step, steps: steps as usize })
    }

    pub fn len(&self) -> usize {
        self.steps + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.step
    }

    pub fn horizon(&self) -> f64 {
        self.time(self.steps)
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.len()).map(|k| self.time(k)).collect()
    }

    /// Index of the grid point equal to `t`, if there is one.
    pub fn index_of(&self, t: f64) -> Option<usize> {
        let r = t / self.step;
        let k = r.round();
        ((k - r).abs() <= 1e-9 * r.abs().max(1.0) && k >= 0.0 && (k as usize) <= self.steps)
            .then_some(k as usize)
    }
}

/// Law of the initial configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "law", rename_all = "kebab-case")]
pub enum InitialCondition {
    /// Symmetric Bernoulli spins and λ_N(0) = λ0.
    Dissipative { lambda0: f64 },
    /// Symmetric Bernoulli spins and λ_N(0) = λ̄ N^{-1/4}, λ̄ ≠ 0.
    DissipativeCritical { lambda_bar: f64 },
    /// Independent spins with P(+1) = p1 in population 1 and p2 in population 2.
    TwoPop { p1: f64, p2: f64 },
    /// P(+1) = 1/2 + ε N^{-1/4} in population 1 and 1/2 in population 2, ε ≠ 0.
    TwoPopCritical { epsilon: f64 },
}

impl InitialCondition {
    pub fn model(&self) -> ModelKind {
        match self {
            InitialCondition::Dissipative { .. } | InitialCondition::DissipativeCritical { .. } => {
                ModelKind::Dissipative
            }
            InitialCondition::TwoPop { .. } | InitialCondition::TwoPopCritical { .. } => {
                ModelKind::TwoPop
            }
        }
    }

    /// Checks the law is well defined at population size `n`.
    pub fn validate(&self, n: u64) -> Result<()> {
        match *self {
            InitialCondition::Dissipative { lambda0 } => require_finite("lambda0", lambda0),
            InitialCondition::DissipativeCritical { lambda_bar } => {
                require_finite("lambda_bar", lambda_bar)?;
                if lambda_bar == 0.0 {
                    return Err(Error::config(
                        "lambda_bar",
                        "must be nonzero: the polar change of variables is singular at the origin",
                    ));
                }
                Ok(())
            }
            InitialCondition::TwoPop { p1, p2 } => {
                check_probability("p1", p1)?;
                check_probability("p2", p2)
            }
            InitialCondition::TwoPopCritical { epsilon } => {
                require_finite("epsilon", epsilon)?;
                if epsilon == 0.0 {
                    return Err(Error::config(
                        "epsilon",
                        "must be nonzero: the polar change of variables is singular at the origin",
                    ));
                }
                check_probability("epsilon", 0.5 + epsilon * (n as f64).powf(-0.25))
            }
        }
    }

    pub fn sample_dissipative<R: Rng + ?Sized>(&self, n: u64, rng: &mut R) -> Result<DissipativeState> {
        self.validate(n)?;
        let lambda = match *self {
            InitialCondition::Dissipative { lambda0 } => lambda0,
            InitialCondition::DissipativeCritical { lambda_bar } => lambda_bar * (n as f64).powf(-0.25),
            _ => return Err(Error::config("init", "initial law belongs to the two-population model")),
        };
        let n_plus = binomial(n, 0.5, rng);
        DissipativeState::new(n, n_plus, lambda)
    }

    pub fn sample_twopop<R: Rng + ?Sized>(
        &self,
        params: &TwoPopParams,
        n: u64,
        rng: &mut R,
    ) -> Result<TwoPopState> {
        self.validate(n)?;
        let (p1, p2) = match *self {
            InitialCondition::TwoPop { p1, p2 } => (p1, p2),
            InitialCondition::TwoPopCritical { epsilon } => (0.5 + epsilon * (n as f64).powf(-0.25), 0.5),
            _ => return Err(Error::config("init", "initial law belongs to the dissipative model")),
        };
        let (n1, n2) = params.populations(n)?;
        let n1_plus = binomial(n1, p1, rng);
        let n2_plus = binomial(n2, p2, rng);
        TwoPopState::new(n1, n2, n1_plus, n2_plus)
    }
}

fn check_probability(field: &str, p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::config(field, format!("spin-up probability {p} outside [0, 1]")))
    }
}

fn binomial<R: Rng + ?Sized>(n: u64, p: f64, rng: &mut R) -> u64 {
    // p is validated before we get here
    Binomial::new(n, p).expect("validated probability").sample(rng)
}

/// Order-parameter samples on a uniform grid.
///
/// For the dissipative model `first` holds m and `second` holds λ; for the
/// two-population model they hold m1 and m2.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    pub model: ModelKind,
    pub n: u64,
    pub seed: u64,
    pub replica: u64,
    pub grid: TimeGrid,
    pub first: Vec<f64>,
    pub second: Vec<f64>,
    /// Number of accepted spin flips.
    pub events: u64,
}

impl Trajectory {
    fn empty(model: ModelKind, n: u64, grid: TimeGrid) -> Self {
        Self {
            model,
            n,
            seed: 0,
            replica: 0,
            grid,
            first: Vec::with_capacity(grid.len()),
            second: Vec::with_capacity(grid.len()),
            events: 0,
        }
    }

    pub fn with_provenance(mut self, seed: u64, replica: u64) -> Self {
        self.seed = seed;
        self.replica = replica;
        self
    }

    pub fn times(&self) -> Vec<f64> {
        self.grid.times()
    }

    pub fn len(&self) -> usize {
        self.first.len()
    }

    pub fn is_empty(&self) -> bool {
        self.first.is_empty()
    }

    pub fn column_names(&self) -> (&'static str, &'static str) {
        match self.model {
            ModelKind::Dissipative => ("m", "lambda"),
            ModelKind::TwoPop => ("m1", "m2"),
        }
    }

    /// CSV with header `t,m,lambda` or `t,m1,m2`, one row per grid point.
    pub fn to_csv(&self) -> String {
        let (a, b) = self.column_names();
        let mut out = format!("t,{a},{b}\n");
        for (k, (x, y)) in self.first.iter().zip(&self.second).enumerate() {
            out.push_str(&format!("{},{},{}\n", fmt_f64(self.grid.time(k)), fmt_f64(*x), fmt_f64(*y)));
        }
        out
    }
}

/// Runs the dissipative chain from a given state until the grid horizon.
pub fn run_dissipative<R: Rng + ?Sized>(
    params: &DissipativeParams,
    mut state: DissipativeState,
    grid: TimeGrid,
    rng: &mut R,
) -> Trajectory {
    let n = state.n;
    let mut traj = Trajectory::empty(ModelKind::Dissipative, n, grid);
    let majorant = 2.0 * n as f64;
    let origin = state.t;
    traj.first.push(state.magnetization());
    traj.second.push(state.lambda);
    let mut k = 1;
    loop {
        let tau: f64 = Exp1.sample(rng);
        let tau = tau / majorant;
        let t_cand = state.t + tau;
        while k < grid.len() && origin + grid.time(k) <= t_cand {
            let dt = origin + grid.time(k) - state.t;
            traj.first.push(state.magnetization());
            traj.second.push(state.lambda * (-params.alpha * dt).exp());
            k += 1;
        }
        if k == grid.len() {
            break;
        }
        state.decay(tau, params);
        let rates = state.flip_rates();
        debug_assert!(rates.total() <= majorant * (1.0 + 1e-12));
        let u = rng.random::<f64>() * majorant;
        let which = if u < rates.up {
            Spin::Up
        } else if u < rates.total() {
            Spin::Down
        } else {
            continue;
        };
        // the selected aggregate has positive rate, so the spin exists
        state
            .apply_flip(which, params)
            .expect("selected aggregate has a spin to flip");
        traj.events += 1;
    }
    traj
}

/// Runs the two-population chain from a given state until the grid horizon.
pub fn run_twopop<R: Rng + ?Sized>(
    params: &TwoPopParams,
    mut state: TwoPopState,
    grid: TimeGrid,
    rng: &mut R,
) -> Trajectory {
    let mut traj = Trajectory::empty(ModelKind::TwoPop, state.n(), grid);
    let origin = state.t;
    let (m1, m2) = state.magnetizations();
    traj.first.push(m1);
    traj.second.push(m2);
    let mut k = 1;
    loop {
        let rates = state.flip_rates(params);
        let total = rates.total();
        let tau: f64 = Exp1.sample(rng);
        let t_next = state.t + tau / total;
        let (m1, m2) = state.magnetizations();
        while k < grid.len() && origin + grid.time(k) <= t_next {
            traj.first.push(m1);
            traj.second.push(m2);
            k += 1;
        }
        if k == grid.len() {
            break;
        }
        state.t = t_next;
        let mut u = rng.random::<f64>() * total;
        let events = [
            TwoPopEvent::Pop1(Spin::Up),
            TwoPopEvent::Pop1(Spin::Down),
            TwoPopEvent::Pop2(Spin::Up),
            TwoPopEvent::Pop2(Spin::Down),
        ];
        let rates = rates.as_array();
        // fall back to the last aggregate with positive rate when u lands on
        // the upper edge through rounding
        let mut chosen = None;
        for (ev, r) in events.iter().zip(rates) {
            if r > 0.0 {
                chosen = Some(*ev);
                if u < r {
                    break;
                }
                u -= r;
            }
        }
        let ev = chosen.expect("total rate is positive");
        state.apply(ev).expect("selected aggregate has a spin to flip");
        traj.events += 1;
    }
    traj
}

pub fn simulate_dissipative<R: Rng + ?Sized>(
    params: &DissipativeParams,
    n: u64,
    init: &InitialCondition,
    grid: TimeGrid,
    rng: &mut R,
) -> Result<Trajectory> {
    let state = init.sample_dissipative(n, rng)?;
    Ok(run_dissipative(params, state, grid, rng))
}

pub fn simulate_twopop<R: Rng + ?Sized>(
    params: &TwoPopParams,
    n: u64,
    init: &InitialCondition,
    grid: TimeGrid,
    rng: &mut R,
) -> Result<Trajectory> {
    let state = init.sample_twopop(params, n, rng)?;
    Ok(run_twopop(params, state, grid, rng))
}

/// Everything needed to simulate one replica.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MicroRun {
    pub params: ModelParams,
    pub n: u64,
    pub init: InitialCondition,
    pub grid: TimeGrid,
}

impl MicroRun {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::config("n", "population size must be positive"));
        }
        if self.params.kind() != self.init.model() {
            return Err(Error::config("init", "initial law does not match the model"));
        }
        if let ModelParams::TwoPop(p) = &self.params {
            p.populations(self.n)?;
        }
        self.init.validate(self.n)
    }

    pub fn simulate<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Trajectory> {
        match &self.params {
            ModelParams::Dissipative(p) => simulate_dissipative(p, self.n, &self.init, self.grid, rng),
            ModelParams::TwoPop(p) => simulate_twopop(p, self.n, &self.init, self.grid, rng),
        }
    }

    /// Replica `k` of the ensemble seeded by `master_seed` in `domain`.
    pub fn replica(&self, master_seed: u64, domain: Domain, k: u64) -> Result<Trajectory> {
        let mut rng = stream(master_seed, domain, k);
        Ok(self.simulate(&mut rng)?.with_provenance(master_seed, k))
    }
}

/// `replicas` independent trajectories, replica `k` drawn from the
/// `(master_seed, Micro, k)` stream. Bitwise reproducible for any thread count.
pub fn ensemble(run: &MicroRun, replicas: usize, master_seed: u64) -> Result<Vec<Trajectory>> {
    ensemble_in(run, replicas, master_seed, Domain::Micro)
}

pub fn ensemble_in(
    run: &MicroRun,
    replicas: usize,
    master_seed: u64,
    domain: Domain,
) -> Result<Vec<Trajectory>> {
    if replicas == 0 {
        return Err(Error::config("replicas", "need at least one replica"));
    }
    run.validate()?;
    (0..replicas as u64)
        .into_par_iter()
        .map(|k| run.replica(master_seed, domain, k))
        .collect()
}
