//! Critical fluctuations: N^{1/4} space / N^{1/2} time rescaling, the polar
//! decomposition into a slow amplitude κ and a fast phase θ, phase averaging
//! of generator coefficients, discrete-generator checks, and ensemble
//! comparison of finite-N amplitudes against the limiting radial SDE.

use std::f64::consts::{PI, TAU};

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{require_positive, Error, Result};
use crate::fluct::{simulate_kappa_via_xy, RadialSdeParams, SdeConfig};
use crate::limit::{field, State2};
use crate::micro::{ensemble_in, InitialCondition, MicroRun, TimeGrid, Trajectory};
use crate::model::{ModelKind, ModelParams, TwoPopParams};
use crate::rng::{stream, Domain};

/// Rescaled order parameters in rotating coordinates.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RescaledSeries {
    pub model: ModelKind,
    pub n: u64,
    /// Rescaled time grid, step = microscopic step / √N.
    pub grid: TimeGrid,
    /// z (dissipative) or w (two populations).
    pub first: Vec<f64>,
    /// u (dissipative) or v (two populations).
    pub second: Vec<f64>,
    pub kappa: Vec<f64>,
    /// Angular speed of the linearized flow before the √N speed-up.
    pub fast_frequency: f64,
}

impl RescaledSeries {
    /// Expected angular slope in rescaled time, fast frequency × √N.
    pub fn expected_slope(&self) -> f64 {
        self.fast_frequency * (self.n as f64).sqrt()
    }
}

/// The linear change of variables from rescaled order parameters to
/// coordinates in which the critical linear flow is a rotation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotatingFrame {
    /// (first, second) = M · (rescaled first order parameter, rescaled second).
    pub matrix: [[f64; 2]; 2],
    pub fast_frequency: f64,
}

impl RotatingFrame {
    /// z = λ̂, u = (βm̂ − λ̂)/√(β−1) for the dissipative model;
    /// w = ŷ/((1−γ)J21), v = (−x̂ + (γJ11−1)ŷ/((1−γ)J21))/√|Γ| for two
    /// populations.
    pub fn new(params: &ModelParams) -> Result<Self> {
        if !params.is_critical() {
            return Err(Error::NotCritical(format!("{params:?} is not at the Hopf point")));
        }
        match params {
            ModelParams::Dissipative(p) => {
                let s = (p.beta - 1.0).sqrt();
                Ok(Self { matrix: [[0.0, 1.0], [p.beta / s, -1.0 / s]], fast_frequency: p.fast_frequency() })
            }
            ModelParams::TwoPop(p) => {
                p.require_critical()?;
                let d = (1.0 - p.gamma) * p.j21;
                let c = p.gamma * p.j11 - 1.0;
                let s = p.gamma_big().abs().sqrt();
                Ok(Self {
                    matrix: [[0.0, 1.0 / d], [-1.0 / s, c / (d * s)]],
                    fast_frequency: p.fast_frequency(),
                })
            }
        }
    }

    #[inline]
    pub fn apply(&self, [a, b]: State2) -> State2 {
        let m = self.matrix;
        [m[0][0] * a + m[0][1] * b, m[1][0] * a + m[1][1] * b]
    }
}

/// Rescales a trajectory simulated on the microscopic clock: values by
/// N^{1/4}, time by N^{-1/2}, then moves to rotating coordinates.
pub fn rescale(traj: &Trajectory, params: &ModelParams) -> Result<RescaledSeries> {
    if traj.model != params.kind() {
        return Err(Error::config("model", "trajectory and parameters belong to different models"));
    }
    let frame = RotatingFrame::new(params)?;
    let nf = traj.n as f64;
    let space = nf.powf(0.25);
    let grid = TimeGrid { step: traj.grid.step / nf.sqrt(), steps: traj.grid.steps };
    let mut first = Vec::with_capacity(traj.len());
    let mut second = Vec::with_capacity(traj.len());
    let mut kappa = Vec::with_capacity(traj.len());
    for (&a, &b) in traj.first.iter().zip(&traj.second) {
        let [z, u] = frame.apply([space * a, space * b]);
        first.push(z);
        second.push(u);
        kappa.push(z * z + u * u);
    }
    Ok(RescaledSeries {
        model: traj.model,
        n: traj.n,
        grid,
        first,
        second,
        kappa,
        fast_frequency: frame.fast_frequency,
    })
}

pub const DEFAULT_KAPPA_FLOOR: f64 = 1e-4;

/// Unwrapped phase and its deviation from uniform rotation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhaseSeries {
    /// Number of leading samples where κ stays above the floor.
    pub window: usize,
    /// True when κ fell below the floor before the end of the series.
    pub trimmed: bool,
    pub theta: Vec<f64>,
    /// θ(t) − expected slope · t.
    pub eta: Vec<f64>,
    /// Least-squares slope of θ on t over the window.
    pub slope: f64,
    pub expected_slope: f64,
}

/// Full-plane phase θ = atan2(second, first), unwrapped, on the leading
/// window where κ ≥ `kappa_floor`. A series whose first two samples do not
/// both clear the floor has no phase.
pub fn phase_series(series: &RescaledSeries, kappa_floor: f64) -> Result<PhaseSeries> {
    let expected = series.expected_slope();
    if expected * series.grid.step >= PI {
        return Err(Error::config(
            "output_step",
            format!(
                "phase turns by {} rad per sample, which cannot be unwrapped",
                expected * series.grid.step
            ),
        ));
    }
    let window = series.kappa.iter().position(|&k| k < kappa_floor).unwrap_or(series.kappa.len());
    if window < 2 {
        let i = window.min(series.kappa.len() - 1);
        let i = if series.kappa[0] < kappa_floor { 0 } else { i };
        return Err(Error::PhaseUndefined {
            t: series.grid.time(i),
            kappa: series.kappa[i],
            floor: kappa_floor,
        });
    }
    let mut theta = Vec::with_capacity(window);
    let mut prev = series.second[0].atan2(series.first[0]);
    theta.push(prev);
    for k in 1..window {
        let raw = series.second[k].atan2(series.first[k]);
        let mut d = raw - prev.rem_euclid(TAU);
        d = (d + PI).rem_euclid(TAU) - PI;
        let next = prev + d;
        theta.push(next);
        prev = next;
    }
    let times: Vec<f64> = (0..window).map(|k| series.grid.time(k)).collect();
    let slope = least_squares_slope(&times, &theta);
    let eta = theta.iter().zip(&times).map(|(th, t)| th - expected * t).collect();
    Ok(PhaseSeries {
        window,
        trimmed: window < series.kappa.len(),
        theta,
        eta,
        slope,
        expected_slope: expected,
    })
}

pub fn least_squares_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

/// (1/2π)∫₀^{2π} f(θ)dθ by the trapezoid rule on `n_quad` (at least 16)
/// equispaced nodes.
pub fn average_over_phase<F: Fn(f64) -> f64>(f: F, n_quad: usize) -> f64 {
    let n = n_quad.max(16);
    (0..n).map(|k| f(TAU * k as f64 / n as f64)).sum::<f64>() / n as f64
}

/// Coefficients of f″ and f′ in a generator acting on f(κ).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GeneratorCoeffs {
    /// Coefficient of f″.
    pub diffusion: f64,
    /// Coefficient of f′.
    pub drift: f64,
}

pub const DEFAULT_QUADRATURE_NODES: usize = 64;

/// Phase-dependent coefficients 8β²κcos²θ (f″) and 4β² − (4β/3)κ²cos⁴θ (f′).
pub fn dissipative_af(beta: f64, kappa: f64, theta: f64) -> GeneratorCoeffs {
    let c2 = theta.cos().powi(2);
    GeneratorCoeffs {
        diffusion: 8.0 * beta * beta * kappa * c2,
        drift: 4.0 * beta * beta - 4.0 * beta / 3.0 * kappa * kappa * c2 * c2,
    }
}

pub fn averaged_coeffs_dissipative(beta: f64, kappa: f64, n_quad: usize) -> GeneratorCoeffs {
    GeneratorCoeffs {
        diffusion: average_over_phase(|th| dissipative_af(beta, kappa, th).diffusion, n_quad),
        drift: average_over_phase(|th| dissipative_af(beta, kappa, th).drift, n_quad),
    }
}

/// Phase-dependent coefficients of the two-population generator acting on
/// f(κ), with w = √κ cos θ, v = √κ sin θ, x = (γJ11−1)w − √|Γ|v and
/// y = (1−γ)J21 w.
pub fn twopop_af(p: &TwoPopParams, kappa: f64, theta: f64) -> GeneratorCoeffs {
    let g = p.gamma;
    let c = g * p.j11 - 1.0;
    let abs_g = p.gamma_big().abs();
    let sg = abs_g.sqrt();
    let d = (1.0 - g) * p.j21;
    let dj = (1.0 - g) * p.j21 * p.j21;
    let (w, v) = (kappa.sqrt() * theta.cos(), kappa.sqrt() * theta.sin());
    let x = c * w - sg * v;
    let y = d * w;
    let (r1, r2) = p.fields(x, y);
    let diffusion = 8.0 * w * w / dj
        + 16.0 * c * w * v / (dj * sg)
        + 8.0 * (g * dj + c * c) * v * v / (dj * abs_g);
    let drift = 4.0 * p.z1_closed_form()
        + (2.0 * w / d + 2.0 * c * v / (d * sg)) * ((1.0 - g) / 3.0 * r2.powi(3) - y * r2 * r2)
        - (2.0 * v / sg) * (g / 3.0 * r1.powi(3) - x * r1 * r1);
    GeneratorCoeffs { diffusion, drift }
}

pub fn averaged_coeffs_twopop(p: &TwoPopParams, kappa: f64, n_quad: usize) -> Result<GeneratorCoeffs> {
    p.require_critical()?;
    Ok(GeneratorCoeffs {
        diffusion: average_over_phase(|th| twopop_af(p, kappa, th).diffusion, n_quad),
        drift: average_over_phase(|th| twopop_af(p, kappa, th).drift, n_quad),
    })
}

/// Z constants of the two-population radial SDE, from quadrature and as
/// printed in closed form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ZConstants {
    pub z1_numeric: f64,
    pub z2_numeric: f64,
    pub z1_printed: f64,
    pub z2_printed: f64,
    /// Averaged wv cross term of the f″ coefficient, zero by symmetry.
    pub cross_term: f64,
    /// Z2 ≥ 0 leaves the amplitude without a confining drift.
    pub z2_nonnegative: bool,
    /// |Z2 numeric − Z2 printed| > 1e-6 · max(1, |Z2 numeric|).
    pub z2_discrepancy: bool,
}

/// Averaged coefficients are 4Z1κ (f″) and 4Z1 + (Z2/4)κ² (f′); both
/// constants are read off at κ = 1.
pub fn extract_z_constants(p: &TwoPopParams, n_quad: usize) -> Result<ZConstants> {
    let avg = averaged_coeffs_twopop(p, 1.0, n_quad)?;
    let z1 = avg.diffusion / 4.0;
    let z2 = 4.0 * (avg.drift - 4.0 * z1);
    let dj = (1.0 - p.gamma) * p.j21 * p.j21;
    let c = p.gamma * p.j11 - 1.0;
    let sg = p.gamma_big().abs().sqrt();
    let cross_term = average_over_phase(|th| 16.0 * c * th.cos() * th.sin() / (dj * sg), n_quad);
    let z2_printed = p.z2_printed();
    Ok(ZConstants {
        z1_numeric: z1,
        z2_numeric: z2,
        z1_printed: p.z1_closed_form(),
        z2_printed,
        cross_term,
        z2_nonnegative: z2 >= 0.0,
        z2_discrepancy: (z2 - z2_printed).abs() > 1e-6 * z2.abs().max(1.0),
    })
}

/// Radial SDE coefficients of the critical limit. Two-population constants
/// come from quadrature.
pub fn radial_params(params: &ModelParams, n_quad: usize) -> Result<RadialSdeParams> {
    match params {
        ModelParams::Dissipative(p) => {
            if !p.is_critical() {
                return Err(Error::NotCritical(format!("{p:?} is not at the Hopf point")));
            }
            RadialSdeParams::dissipative(p.beta)
        }
        ModelParams::TwoPop(p) => {
            let z = extract_z_constants(p, n_quad)?;
            RadialSdeParams::twopop(z.z1_numeric, z.z2_numeric)
        }
    }
}

/// Smooth test function on the order-parameter plane.
pub trait Observable: Sync {
    fn value(&self, x: State2) -> f64;
    fn gradient(&self, x: State2) -> State2;
    /// f(x + d) − f(x); implementations may return an exact form that
    /// avoids cancellation.
    fn increment(&self, x: State2, d: State2) -> f64 {
        self.value([x[0] + d[0], x[1] + d[1]]) - self.value(x)
    }
}

/// c + a·x + b·y + p·x² + q·xy + r·y².
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct Quadratic {
    pub c: f64,
    pub a: f64,
    pub b: f64,
    pub p: f64,
    pub q: f64,
    pub r: f64,
}

impl Quadratic {
    pub fn constant(c: f64) -> Self {
        Self { c, ..Default::default() }
    }
    pub fn first() -> Self {
        Self { a: 1.0, ..Default::default() }
    }
    pub fn first_squared() -> Self {
        Self { p: 1.0, ..Default::default() }
    }
}

impl Observable for Quadratic {
    fn value(&self, [x, y]: State2) -> f64 {
        self.c + self.a * x + self.b * y + self.p * x * x + self.q * x * y + self.r * y * y
    }
    fn gradient(&self, [x, y]: State2) -> State2 {
        [self.a + 2.0 * self.p * x + self.q * y, self.b + self.q * x + 2.0 * self.r * y]
    }
    fn increment(&self, [x, y]: State2, [dx, dy]: State2) -> f64 {
        self.a * dx
            + self.b * dy
            + self.p * dx * (2.0 * x + dx)
            + self.q * (x * dy + y * dx + dx * dy)
            + self.r * dy * (2.0 * y + dy)
    }
}

/// Order-parameter generator K_N applied to `f` at `x`, from the aggregated
/// jump rates and displacements.
pub fn discrete_generator(params: &ModelParams, n: u64, f: &dyn Observable, x: State2) -> f64 {
    let nf = n as f64;
    let step = 2.0 / nf;
    match params {
        ModelParams::Dissipative(p) => {
            let [m, lambda] = x;
            let th = lambda.tanh();
            let mut out = 0.0;
            for j in [1.0, -1.0] {
                let count = nf * (1.0 + j * m) / 2.0;
                let rate = count * (1.0 - j * th);
                out += rate * f.increment(x, [-j * step, -j * p.beta * step]);
            }
            out - p.alpha * lambda * f.gradient(x)[1]
        }
        ModelParams::TwoPop(p) => {
            let [m1, m2] = x;
            let (r1, r2) = p.fields(m1, m2);
            let g = p.gamma;
            let mut out = 0.0;
            for j in [1.0, -1.0] {
                let c1 = nf * (g + j * m1) / 2.0;
                let c2 = nf * (1.0 - g + j * m2) / 2.0;
                out += c1 * (-j * r1).exp() * f.increment(x, [-j * step, 0.0]);
                out += c2 * (-j * r2).exp() * f.increment(x, [0.0, -j * step]);
            }
            out
        }
    }
}

/// First-order limit of the generator, (limiting field) · ∇f.
pub fn limit_generator(params: &ModelParams, f: &dyn Observable, x: State2) -> f64 {
    let v = field(params, x);
    let g = f.gradient(x);
    v[0] * g[0] + v[1] * g[1]
}

fn check_state(params: &ModelParams, x: State2) -> Result<()> {
    let ok = match params {
        ModelParams::Dissipative(_) => x[0].abs() <= 1.0 && x[1].is_finite(),
        ModelParams::TwoPop(p) => x[0].abs() <= p.gamma && x[1].abs() <= 1.0 - p.gamma,
    };
    if ok {
        Ok(())
    } else {
        Err(Error::config("grid", format!("{x:?} is not a reachable order parameter")))
    }
}

/// sup over `states` of |K_N f − (field · ∇f)|.
pub fn generator_consistency(
    params: &ModelParams,
    n: u64,
    f: &dyn Observable,
    states: &[State2],
) -> Result<f64> {
    if n == 0 {
        return Err(Error::config("n", "population size must be positive"));
    }
    if states.is_empty() {
        return Err(Error::EmptySample("state grid"));
    }
    let mut sup = 0.0f64;
    for &x in states {
        check_state(params, x)?;
        sup = sup.max((discrete_generator(params, n, f, x) - limit_generator(params, f, x)).abs());
    }
    Ok(sup)
}

/// `k × k` grid covering the reachable region, shrunk by 10% on each side.
pub fn state_grid(params: &ModelParams, k: usize) -> Vec<State2> {
    let (h0, h1) = match params {
        ModelParams::Dissipative(_) => (0.9, 1.5),
        ModelParams::TwoPop(p) => (0.9 * p.gamma, 0.9 * (1.0 - p.gamma)),
    };
    let axis = |h: f64, i: usize| if k == 1 { 0.0 } else { -h + 2.0 * h * i as f64 / (k - 1) as f64 };
    (0..k).flat_map(|i| (0..k).map(move |j| [axis(h0, i), axis(h1, j)])).collect()
}

/// Kolmogorov–Smirnov distance between the empirical CDFs of two samples,
/// by merging the sorted samples; ties are consumed together.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptySample("KS sample"));
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (n, m) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d = 0.0f64;
    while i < a.len() && j < b.len() {
        let v = if a[i] <= b[j] { a[i] } else { b[j] };
        while i < a.len() && a[i] == v {
            i += 1;
        }
        while j < b.len() && b[j] == v {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    Ok(d)
}

/// Asymptotic 5% critical value 1.36·√((n + m)/(nm)).
pub fn ks_threshold(n: usize, m: usize) -> f64 {
    let (n, m) = (n as f64, m as f64);
    1.36 * ((n + m) / (n * m)).sqrt()
}

/// Raw moments E[X], E[X²], E[X³], E[X⁴].
pub fn raw_moments(sample: &[f64]) -> Result<[f64; 4]> {
    if sample.is_empty() {
        return Err(Error::EmptySample("moments"));
    }
    let mut s = [0.0; 4];
    for &x in sample {
        let x2 = x * x;
        s[0] += x;
        s[1] += x2;
        s[2] += x2 * x;
        s[3] += x2 * x2;
    }
    let n = sample.len() as f64;
    Ok(s.map(|v| v / n))
}

/// Amplitude at time 0 of the critical limit.
pub fn critical_kappa0(params: &ModelParams, init: &InitialCondition) -> Result<f64> {
    match (params, init) {
        (ModelParams::Dissipative(p), InitialCondition::DissipativeCritical { lambda_bar }) => {
            Ok(p.beta / (p.beta - 1.0) * lambda_bar * lambda_bar)
        }
        (ModelParams::TwoPop(p), InitialCondition::TwoPopCritical { epsilon }) => {
            Ok(4.0 * epsilon * epsilon * p.gamma * p.gamma / p.gamma_big().abs())
        }
        _ => Err(Error::config("init", "critical comparison needs the critical initial law of the model")),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriticalCompareConfig {
    pub params: ModelParams,
    /// Must be `DissipativeCritical` or `TwoPopCritical`.
    pub init: InitialCondition,
    pub n_list: Vec<u64>,
    /// Micro replicas per N.
    pub replicas: usize,
    /// Limit-SDE paths; at least ten times `replicas`.
    pub limit_replicas: usize,
    /// Rescaled horizon.
    pub horizon: f64,
    /// Rescaled output step.
    pub output_step: f64,
    pub sde_dt: f64,
    pub checkpoints: Vec<f64>,
    /// Lags, in rescaled time, of the η increment diagnostic.
    pub eta_lags: Vec<f64>,
    pub kappa_floor: f64,
    pub n_quad: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckpointStats {
    pub t: f64,
    pub ks: f64,
    pub ks_threshold: f64,
    pub moments_micro: [f64; 4],
    pub moments_limit: [f64; 4],
    pub n_micro: usize,
    pub n_limit: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhaseDiagnostics {
    pub expected_slope: f64,
    /// Mean fitted slope over replicas with a defined phase.
    pub mean_slope: Option<f64>,
    pub slope_relative_error: Option<f64>,
    pub phase_replicas: usize,
    pub trimmed_replicas: usize,
    pub eta_lags: Vec<f64>,
    /// Mean |η(t+h) − η(t)| over replicas and start times, per lag.
    pub eta_mean_abs_increment: Vec<f64>,
    /// Least-squares slope of log increment against log lag.
    pub eta_loglog_slope: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PopulationReport {
    pub n: u64,
    pub checkpoints: Vec<CheckpointStats>,
    pub phase: PhaseDiagnostics,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonReport {
    pub model: ModelKind,
    pub params: ModelParams,
    pub init: InitialCondition,
    pub seed: u64,
    pub n_list: Vec<u64>,
    pub replicas: usize,
    pub limit_replicas: usize,
    pub horizon: f64,
    pub output_step: f64,
    pub sde_dt: f64,
    pub kappa0: f64,
    pub radial: RadialSdeParams,
    pub z_constants: Option<ZConstants>,
    pub populations: Vec<PopulationReport>,
    /// Per checkpoint: KS never increases along `n_list`.
    pub ks_non_increasing: Vec<bool>,
}

impl ComparisonReport {
    pub fn to_json(&self) -> String {
        // every field is plain data
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

fn grid_index(step: f64, t: f64, what: &str) -> Result<usize> {
    let pos = t / step;
    let k = pos.round();
    if k < 0.0 || (pos - k).abs() > 1e-6 {
        return Err(Error::config(what, format!("{t} is not on the output grid of step {step}")));
    }
    Ok(k as usize)
}

impl CriticalCompareConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.params.is_critical() {
            return Err(Error::NotCritical(format!("{:?} is not at the Hopf point", self.params)));
        }
        if self.params.kind() != self.init.model() {
            return Err(Error::config("init", "initial law does not match the model"));
        }
        if self.n_list.is_empty() || self.n_list.contains(&0) {
            return Err(Error::config("n_list", "need at least one positive population size"));
        }
        if self.replicas == 0 {
            return Err(Error::config("replicas", "need at least one replica"));
        }
        if self.limit_replicas < 10 * self.replicas {
            return Err(Error::config("limit_replicas", "must be at least ten times the micro replicas"));
        }
        require_positive("horizon", self.horizon)?;
        require_positive("output_step", self.output_step)?;
        require_positive("kappa_floor", self.kappa_floor)?;
        TimeGrid::new(self.horizon, self.output_step)?;
        SdeConfig::new(self.horizon, self.sde_dt, self.output_step)?;
        if self.checkpoints.is_empty() {
            return Err(Error::config("checkpoints", "need at least one checkpoint"));
        }
        for &t in &self.checkpoints {
            if !(0.0..=self.horizon).contains(&t) {
                return Err(Error::config("checkpoints", format!("{t} outside [0, horizon]")));
            }
            grid_index(self.output_step, t, "checkpoints")?;
        }
        for &h in &self.eta_lags {
            require_positive("eta_lags", h)?;
            grid_index(self.output_step, h, "eta_lags")?;
        }
        let frame = RotatingFrame::new(&self.params)?;
        for &n in &self.n_list {
            self.init.validate(n)?;
            let turn = frame.fast_frequency * (n as f64).sqrt() * self.output_step;
            if turn >= PI {
                return Err(Error::config(
                    "output_step",
                    format!("phase turns by {turn} rad per sample at N = {n}; refine the output step"),
                ));
            }
        }
        Ok(())
    }
}

/// Mean |η(t+h) − η(t)| for each lag (in samples) over all series.
fn eta_increments(phases: &[PhaseSeries], lags: &[usize]) -> Vec<f64> {
    lags.iter()
        .map(|&l| {
            let (mut sum, mut count) = (0.0, 0usize);
            for ph in phases {
                for k in l..ph.eta.len() {
                    sum += (ph.eta[k] - ph.eta[k - l]).abs();
                    count += 1;
                }
            }
            if count == 0 {
                f64::NAN
            } else {
                sum / count as f64
            }
        })
        .collect()
}

/// Runs the micro ensembles for each N and the shared limit ensemble, and
/// compares the amplitude laws at each checkpoint.
pub fn critical_compare(cfg: &CriticalCompareConfig) -> Result<ComparisonReport> {
    cfg.validate()?;
    let radial = radial_params(&cfg.params, cfg.n_quad)?;
    let z_constants = match &cfg.params {
        ModelParams::TwoPop(p) => Some(extract_z_constants(p, cfg.n_quad)?),
        ModelParams::Dissipative(_) => None,
    };
    let kappa0 = critical_kappa0(&cfg.params, &cfg.init)?;
    let sde = SdeConfig::new(cfg.horizon, cfg.sde_dt, cfg.output_step)?;
    let checkpoint_idx: Vec<usize> = cfg
        .checkpoints
        .iter()
        .map(|&t| grid_index(cfg.output_step, t, "checkpoints"))
        .collect::<Result<_>>()?;
    // one row per limit path, one column per checkpoint
    let rows: Vec<Vec<f64>> = (0..cfg.limit_replicas as u64)
        .into_par_iter()
        .map(|k| {
            let mut rng = stream(cfg.seed, Domain::LimitSde, k);
            let path = simulate_kappa_via_xy(&radial, kappa0, &sde, &mut rng)?;
            Ok(checkpoint_idx.iter().map(|&i| path.kappa()[i]).collect())
        })
        .collect::<Result<_>>()?;
    let limit_samples: Vec<Vec<f64>> =
        (0..checkpoint_idx.len()).map(|c| rows.iter().map(|r| r[c]).collect()).collect();
    drop(rows);
    let lag_idx: Vec<usize> = cfg
        .eta_lags
        .iter()
        .map(|&h| grid_index(cfg.output_step, h, "eta_lags"))
        .collect::<Result<_>>()?;

    let mut populations = Vec::with_capacity(cfg.n_list.len());
    for &n in &cfg.n_list {
        let root = (n as f64).sqrt();
        let grid = TimeGrid::new(root * cfg.horizon, root * cfg.output_step)?;
        let run = MicroRun { params: cfg.params, n, init: cfg.init, grid };
        let trajs = ensemble_in(&run, cfg.replicas, cfg.seed, Domain::CriticalMicro(n))?;
        let series: Vec<RescaledSeries> =
            trajs.par_iter().map(|t| rescale(t, &cfg.params)).collect::<Result<_>>()?;
        drop(trajs);

        let mut checkpoints = Vec::with_capacity(checkpoint_idx.len());
        for (ci, &k) in checkpoint_idx.iter().enumerate() {
            let micro: Vec<f64> = series.iter().map(|s| s.kappa[k]).collect();
            let lim = &limit_samples[ci];
            checkpoints.push(CheckpointStats {
                t: cfg.checkpoints[ci],
                ks: ks_two_sample(&micro, lim)?,
                ks_threshold: ks_threshold(micro.len(), lim.len()),
                moments_micro: raw_moments(&micro)?,
                moments_limit: raw_moments(lim)?,
                n_micro: micro.len(),
                n_limit: lim.len(),
            });
        }

        let phases: Vec<PhaseSeries> = series
            .par_iter()
            .filter_map(|s| match phase_series(s, cfg.kappa_floor) {
                Ok(p) => Some(Ok(p)),
                Err(Error::PhaseUndefined { .. }) => None,
                Err(e) => Some(Err(e)),
            })
            .collect::<Result<_>>()?;
        let expected_slope = RotatingFrame::new(&cfg.params)?.fast_frequency * root;
        let mean_slope = (!phases.is_empty())
            .then(|| phases.iter().map(|p| p.slope).sum::<f64>() / phases.len() as f64);
        let incs = eta_increments(&phases, &lag_idx);
        let usable: Vec<(f64, f64)> = cfg
            .eta_lags
            .iter()
            .zip(&incs)
            .filter(|(_, v)| v.is_finite() && **v > 0.0)
            .map(|(h, v)| (h.ln(), v.ln()))
            .collect();
        let eta_loglog_slope = (usable.len() >= 2).then(|| {
            let (x, y): (Vec<f64>, Vec<f64>) = usable.into_iter().unzip();
            least_squares_slope(&x, &y)
        });
        populations.push(PopulationReport {
            n,
            checkpoints,
            phase: PhaseDiagnostics {
                expected_slope,
                mean_slope,
                slope_relative_error: mean_slope.map(|s| (s - expected_slope).abs() / expected_slope),
                phase_replicas: phases.len(),
                trimmed_replicas: phases.iter().filter(|p| p.trimmed).count()
                    + (series.len() - phases.len()),
                eta_lags: cfg.eta_lags.clone(),
                eta_mean_abs_increment: incs,
                eta_loglog_slope,
            },
        });
    }

    let ks_non_increasing = (0..checkpoint_idx.len())
        .map(|ci| populations.windows(2).all(|w| w[1].checkpoints[ci].ks <= w[0].checkpoints[ci].ks))
        .collect();
    Ok(ComparisonReport {
        model: cfg.params.kind(),
        params: cfg.params,
        init: cfg.init,
        seed: cfg.seed,
        n_list: cfg.n_list.clone(),
        replicas: cfg.replicas,
        limit_replicas: cfg.limit_replicas,
        horizon: cfg.horizon,
        output_step: cfg.output_step,
        sde_dt: cfg.sde_dt,
        kappa0,
        radial,
        z_constants,
        populations,
        ks_non_increasing,
    })
}
