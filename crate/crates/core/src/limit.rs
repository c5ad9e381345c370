//! Limiting ODEs of the order parameters and their analysis near the Hopf
//! point: vector fields, Jacobians, fixed-step RK4, limit-cycle detection,
//! and the quadratic first integral of the linearized critical flow.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{require_positive, Error, Result};
use crate::io::fmt_f64;
use crate::model::{DissipativeParams, ModelKind, ModelParams, TwoPopParams};

pub type State2 = [f64; 2];
pub type Matrix2 = [[f64; 2]; 2];

/// (ṁ, λ̇) = (2(tanh λ − m), 2β(tanh λ − m) − αλ).
#[inline]
pub fn field_dissipative(p: &DissipativeParams, [m, lambda]: State2) -> State2 {
    let g = lambda.tanh() - m;
    [2.0 * g, 2.0 * p.beta * g - p.alpha * lambda]
}

/// ṁ1 = 2γ sinh R1 − 2 m1 cosh R1, ṁ2 = 2(1−γ) sinh R2 − 2 m2 cosh R2.
#[inline]
pub fn field_twopop(p: &TwoPopParams, [m1, m2]: State2) -> State2 {
    let (r1, r2) = p.fields(m1, m2);
    [
        2.0 * p.gamma * r1.sinh() - 2.0 * m1 * r1.cosh(),
        2.0 * (1.0 - p.gamma) * r2.sinh() - 2.0 * m2 * r2.cosh(),
    ]
}

pub fn field(params: &ModelParams, x: State2) -> State2 {
    match params {
        ModelParams::Dissipative(p) => field_dissipative(p, x),
        ModelParams::TwoPop(p) => field_twopop(p, x),
    }
}

/// Analytic Jacobian of the limiting field at `x`.
pub fn jacobian_at(params: &ModelParams, x: State2) -> Matrix2 {
    match params {
        ModelParams::Dissipative(p) => {
            let sech2 = 1.0 - x[1].tanh().powi(2);
            [[-2.0, 2.0 * sech2], [-2.0 * p.beta, 2.0 * p.beta * sech2 - p.alpha]]
        }
        ModelParams::TwoPop(p) => {
            let [m1, m2] = x;
            let (r1, r2) = p.fields(m1, m2);
            let (c1, s1, c2, s2) = (r1.cosh(), r1.sinh(), r2.cosh(), r2.sinh());
            let g = p.gamma;
            [
                [
                    2.0 * g * c1 * p.j11 - 2.0 * c1 - 2.0 * m1 * s1 * p.j11,
                    2.0 * g * c1 * p.j12 - 2.0 * m1 * s1 * p.j12,
                ],
                [
                    2.0 * (1.0 - g) * c2 * p.j21 - 2.0 * m2 * s2 * p.j21,
                    2.0 * (1.0 - g) * c2 * p.j22 - 2.0 * c2 - 2.0 * m2 * s2 * p.j22,
                ],
            ]
        }
    }
}

/// Roots of the characteristic polynomial, the one with nonnegative
/// imaginary part (or larger real part) first.
pub fn eigenvalues(a: Matrix2) -> [Complex64; 2] {
    let half_tr = 0.5 * (a[0][0] + a[1][1]);
    let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
    let disc = half_tr * half_tr - det;
    if disc >= 0.0 {
        let s = disc.sqrt();
        [Complex64::new(half_tr + s, 0.0), Complex64::new(half_tr - s, 0.0)]
    } else {
        let s = (-disc).sqrt();
        [Complex64::new(half_tr, s), Complex64::new(half_tr, -s)]
    }
}

/// Linearization at the origin plus the parameter identities that decide
/// criticality.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriticalityReport {
    pub model: ModelKind,
    pub jacobian: Matrix2,
    /// (re, im) of both eigenvalues.
    pub eigenvalues: [(f64, f64); 2],
    pub critical: bool,
    /// β − (α/2 + 1), dissipative model only.
    pub critical_distance: Option<f64>,
    pub gamma_big: Option<f64>,
    pub condition1_residual: Option<f64>,
    pub z1: Option<f64>,
    pub z2_printed: Option<f64>,
}

pub fn jacobian_origin(params: &ModelParams) -> CriticalityReport {
    let jac = jacobian_at(params, [0.0, 0.0]);
    let ev = eigenvalues(jac);
    let mut report = CriticalityReport {
        model: params.kind(),
        jacobian: jac,
        eigenvalues: [(ev[0].re, ev[0].im), (ev[1].re, ev[1].im)],
        critical: params.is_critical(),
        critical_distance: None,
        gamma_big: None,
        condition1_residual: None,
        z1: None,
        z2_printed: None,
    };
    match params {
        ModelParams::Dissipative(p) => report.critical_distance = Some(p.critical_distance()),
        ModelParams::TwoPop(p) => {
            report.gamma_big = Some(p.gamma_big());
            report.condition1_residual = Some(p.condition1_residual());
            if p.gamma_big() < 0.0 && p.j21 != 0.0 {
                report.z1 = Some(p.z1_closed_form());
                report.z2_printed = Some(p.z2_printed());
            }
        }
    }
    report
}

/// Fixed-step solution of a planar ODE.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OdeSolution {
    pub step: f64,
    pub order: u32,
    pub times: Vec<f64>,
    pub states: Vec<State2>,
}

impl OdeSolution {
    pub fn horizon(&self) -> f64 {
        *self.times.last().unwrap_or(&0.0)
    }

    /// Linear interpolation between stored steps; `t` is clamped to the range.
    pub fn at(&self, t: f64) -> State2 {
        let n = self.states.len();
        if n == 1 || t <= 0.0 {
            return self.states[0];
        }
        let pos = t / self.step;
        let i = (pos.floor() as usize).min(n - 2);
        let w = (pos - i as f64).clamp(0.0, 1.0);
        let (a, b) = (self.states[i], self.states[i + 1]);
        [a[0] + w * (b[0] - a[0]), a[1] + w * (b[1] - a[1])]
    }
}

#[inline]
fn axpy(x: State2, h: f64, k: State2) -> State2 {
    [x[0] + h * k[0], x[1] + h * k[1]]
}

/// Classical fourth-order Runge–Kutta with `ceil(horizon/step)` equal steps.
pub fn integrate<F>(field: F, x0: State2, horizon: f64, step: f64) -> Result<OdeSolution>
where
    F: Fn(State2) -> State2,
{
    require_positive("step", step)?;
    require_positive("horizon", horizon)?;
    let n = ((horizon / step) - 1e-9).ceil().max(1.0) as usize;
    let h = horizon / n as f64;
    let mut times = Vec::with_capacity(n + 1);
    let mut states = Vec::with_capacity(n + 1);
    let mut x = x0;
    times.push(0.0);
    states.push(x);
    for i in 1..=n {
        let k1 = field(x);
        let k2 = field(axpy(x, 0.5 * h, k1));
        let k3 = field(axpy(x, 0.5 * h, k2));
        let k4 = field(axpy(x, h, k3));
        for d in 0..2 {
            x[d] += h / 6.0 * (k1[d] + 2.0 * k2[d] + 2.0 * k3[d] + k4[d]);
        }
        let t = i as f64 * h;
        if !(x[0].is_finite() && x[1].is_finite()) {
            return Err(Error::BlowUp { t });
        }
        times.push(t);
        states.push(x);
    }
    Ok(OdeSolution { step: h, order: 4, times, states })
}

/// Step of 1e-3 characteristic periods, the period taken from the largest
/// eigenvalue modulus of the Jacobian at the origin.
pub fn default_step(params: &ModelParams) -> f64 {
    let ev = eigenvalues(jacobian_at(params, [0.0, 0.0]));
    let rate = ev[0].norm().max(ev[1].norm());
    if rate > 0.0 {
        1e-3 * std::f64::consts::TAU / rate
    } else {
        1e-3
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CycleVerdict {
    Cycle,
    NoCycle,
    /// Fewer than five oscillations in the tail, or amplitudes still growing.
    Inconclusive,
}

impl CycleVerdict {
    pub fn as_str(self) -> &'static str {
        match self {
            CycleVerdict::Cycle => "true",
            CycleVerdict::NoCycle => "false",
            CycleVerdict::Inconclusive => "inconclusive",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LimitCycleReport {
    pub verdict: CycleVerdict,
    /// Mean of the per-period maximum radii.
    pub amplitude: Option<f64>,
    /// Mean spacing of upward zero crossings of the first coordinate.
    pub period: Option<f64>,
    pub oscillations: usize,
    /// Largest relative deviation of a per-period maximum radius from the
    /// first one in the tail.
    pub drift: Option<f64>,
}

/// Radius below which the tail counts as resting at the fixed point.
const REST_RADIUS: f64 = 1e-8;
const MIN_OSCILLATIONS: usize = 5;
const MAX_DRIFT: f64 = 0.01;

pub fn detect_limit_cycle(solution: &OdeSolution, tail_fraction: f64) -> LimitCycleReport {
    let n = solution.states.len();
    let frac = tail_fraction.clamp(0.0, 1.0);
    let start = ((1.0 - frac) * n as f64).floor() as usize;
    let tail = &solution.states[start.min(n.saturating_sub(1))..];
    let times = &solution.times[start.min(n.saturating_sub(1))..];
    let radius = |x: &State2| x[0].hypot(x[1]);

    let rest = LimitCycleReport {
        verdict: CycleVerdict::NoCycle,
        amplitude: None,
        period: None,
        oscillations: 0,
        drift: None,
    };
    let max_r = tail.iter().map(radius).fold(0.0, f64::max);
    if max_r < REST_RADIUS {
        return rest;
    }

    let mut crossings = Vec::new();
    for i in 1..tail.len() {
        let (a, b) = (tail[i - 1][0], tail[i][0]);
        if a < 0.0 && b >= 0.0 {
            let w = a / (a - b);
            crossings.push((i, times[i - 1] + w * (times[i] - times[i - 1])));
        }
    }
    let oscillations = crossings.len().saturating_sub(1);
    if oscillations < MIN_OSCILLATIONS {
        return LimitCycleReport {
            verdict: CycleVerdict::Inconclusive,
            oscillations,
            ..rest
        };
    }
    let amps: Vec<f64> = crossings
        .windows(2)
        .map(|w| tail[w[0].0..w[1].0].iter().map(radius).fold(0.0, f64::max))
        .collect();
    let drift = amps.iter().map(|a| (a - amps[0]).abs() / amps[0]).fold(0.0, f64::max);
    let period = (crossings[crossings.len() - 1].1 - crossings[0].1) / oscillations as f64;
    let amplitude = amps.iter().sum::<f64>() / amps.len() as f64;
    let verdict = if drift < MAX_DRIFT {
        CycleVerdict::Cycle
    } else if amps.windows(2).all(|w| w[1] > w[0]) {
        CycleVerdict::Inconclusive
    } else {
        CycleVerdict::NoCycle
    };
    LimitCycleReport {
        verdict,
        amplitude: (verdict == CycleVerdict::Cycle).then_some(amplitude),
        period: Some(period),
        oscillations,
        drift: Some(drift),
    }
}

/// ẋ = A x with A = [[−2, 2], [−2β, 2]], the linearization at the critical point.
pub fn linearized_critical_field(beta: f64) -> impl Fn(State2) -> State2 {
    move |[x, y]| [-2.0 * x + 2.0 * y, -2.0 * beta * x + 2.0 * y]
}

/// βx² − 2xy + y², conserved by [`linearized_critical_field`].
#[inline]
pub fn quadratic_invariant(beta: f64, [x, y]: State2) -> f64 {
    beta * x * x - 2.0 * x * y + y * y
}

/// max_t |F(x(t)) − F(x(0))| relative to F(x(0)) (absolute when F(x(0)) = 0).
pub fn first_integral_residual(solution: &OdeSolution, beta: f64) -> f64 {
    let c = quadratic_invariant(beta, solution.states[0]);
    let dev = solution
        .states
        .iter()
        .map(|&x| (quadratic_invariant(beta, x) - c).abs())
        .fold(0.0, f64::max);
    if c != 0.0 {
        dev / c.abs()
    } else {
        dev
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhaseScanRow {
    pub beta: f64,
    pub re_eig: f64,
    pub im_eig: f64,
    pub cycle: CycleVerdict,
    pub amplitude: Option<f64>,
    pub period: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PhaseScanConfig {
    pub alpha: f64,
    pub beta_min: f64,
    pub beta_max: f64,
    pub beta_steps: usize,
    pub x0: State2,
    pub horizon: f64,
    /// RK4 step; `None` picks [`default_step`] for each β.
    pub step: Option<f64>,
    pub tail_fraction: f64,
}

impl PhaseScanConfig {
    pub fn betas(&self) -> Vec<f64> {
        match self.beta_steps {
            0 => Vec::new(),
            1 => vec![self.beta_min],
            k => (0..k)
                .map(|i| self.beta_min + (self.beta_max - self.beta_min) * i as f64 / (k - 1) as f64)
                .collect(),
        }
    }
}

/// Eigenvalues at the origin and long-run ODE behaviour over a β grid.
pub fn phase_scan(cfg: &PhaseScanConfig) -> Result<Vec<PhaseScanRow>> {
    require_positive("alpha", cfg.alpha)?;
    if cfg.beta_steps == 0 {
        return Err(Error::config("beta_steps", "need at least one beta value"));
    }
    cfg.betas()
        .into_par_iter()
        .map(|beta| {
            let p = DissipativeParams::new(cfg.alpha, beta)?;
            let params = ModelParams::Dissipative(p);
            let ev = eigenvalues(jacobian_at(&params, [0.0, 0.0]));
            let step = cfg.step.unwrap_or_else(|| default_step(&params));
            let sol = integrate(|x| field_dissipative(&p, x), cfg.x0, cfg.horizon, step)?;
            let cyc = detect_limit_cycle(&sol, cfg.tail_fraction);
            Ok(PhaseScanRow {
                beta,
                re_eig: ev[0].re,
                im_eig: ev[0].im,
                cycle: cyc.verdict,
                amplitude: cyc.amplitude,
                period: if cyc.verdict == CycleVerdict::Cycle { cyc.period } else { None },
            })
        })
        .collect()
}

/// CSV with header `beta,re_eig,im_eig,cycle,amplitude,period`; undefined
/// amplitudes and periods are left empty.
pub fn phase_scan_csv(rows: &[PhaseScanRow]) -> String {
    let opt = |x: Option<f64>| x.map(fmt_f64).unwrap_or_default();
    let mut out = String::from("beta,re_eig,im_eig,cycle,amplitude,period\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            fmt_f64(r.beta),
            fmt_f64(r.re_eig),
            fmt_f64(r.im_eig),
            r.cycle.as_str(),
            opt(r.amplitude),
            opt(r.period)
        ));
    }
    out
}
