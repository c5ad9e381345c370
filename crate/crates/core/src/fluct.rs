//! Stochastic limits: the Gaussian fluctuation SDE around the deterministic
//! flow, and the radial SDE dκ = (c1 − c2κ²)dt + √(c3κ)dB that describes the
//! critical amplitude, simulated either directly or through a planar
//! (X, Y) system that stays away from the boundary singularity at κ = 0.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{require_finite, require_positive, Error, Result};
use crate::io::fmt_f64;
use crate::limit::{Matrix2, OdeSolution, State2};
use crate::micro::TimeGrid;
use crate::model::DissipativeParams;
use crate::rng::{stream, Domain};

/// Coefficients of dκ = (c1 − c2κ²)dt + √(c3κ)dB.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RadialSdeParams {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
}

impl RadialSdeParams {
    pub fn new(c1: f64, c2: f64, c3: f64) -> Result<Self> {
        require_positive("c1", c1)?;
        require_positive("c2", c2)?;
        require_positive("c3", c3)?;
        Ok(Self { c1, c2, c3 })
    }

    /// c1 = 4β², c2 = β/2, c3 = 8β².
    pub fn dissipative(beta: f64) -> Result<Self> {
        require_positive("beta", beta)?;
        Self::new(4.0 * beta * beta, beta / 2.0, 8.0 * beta * beta)
    }

    /// c1 = 4Z1, c2 = −Z2/4, c3 = 8Z1. A nonnegative Z2 has no
    /// stationary regime and is rejected.
    pub fn twopop(z1: f64, z2: f64) -> Result<Self> {
        if z2.is_nan() || z2 >= 0.0 {
            return Err(Error::NotCritical(format!(
                "Z2 = {z2} is not negative, the radial drift does not confine"
            )));
        }
        Self::new(4.0 * z1, -z2 / 4.0, 8.0 * z1)
    }

    #[inline]
    pub fn drift(&self, kappa: f64) -> f64 {
        self.c1 - self.c2 * kappa * kappa
    }

    /// Planar representation κ = a(X² + Y²) with
    /// dX = −bX(X² + Y²)dt + dB1 and dY = −bY(X² + Y²)dt + dB2.
    ///
    /// Itô gives dκ = (2a − 2bκ²/a)dt + 2√(aκ)dB, which matches the radial
    /// SDE only when c3 = 2c1; then a = c3/4 and b = c2·c3/8.
    pub fn xy_coeffs(&self) -> Result<(f64, f64)> {
        if (self.c3 - 2.0 * self.c1).abs() > 1e-12 * self.c3 {
            return Err(Error::Contract(format!(
                "planar representation needs c3 = 2 c1, got c1 = {}, c3 = {}",
                self.c1, self.c3
            )));
        }
        Ok((self.c3 / 4.0, self.c2 * self.c3 / 8.0))
    }
}

/// Time horizon, Euler step and output spacing for one SDE path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SdeConfig {
    pub horizon: f64,
    pub dt: f64,
    pub sample_step: f64,
}

impl SdeConfig {
    pub fn new(horizon: f64, dt: f64, sample_step: f64) -> Result<Self> {
        let cfg = Self { horizon, dt, sample_step };
        cfg.layout()?;
        Ok(cfg)
    }

    /// (output grid, Euler steps per output sample).
    fn layout(&self) -> Result<(TimeGrid, usize)> {
        require_positive("dt", self.dt)?;
        require_positive("sample_step", self.sample_step)?;
        let grid = TimeGrid::new(self.horizon, self.sample_step)?;
        let ratio = self.sample_step / self.dt;
        let per = ratio.round();
        if per < 1.0 || (ratio - per).abs() > 1e-9 * ratio {
            return Err(Error::config(
                "dt",
                format!("sample step {} is not a multiple of dt {}", self.sample_step, self.dt),
            ));
        }
        Ok((grid, per as usize))
    }
}

/// Samples of one SDE path on its output grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SdePath {
    pub grid: TimeGrid,
    /// Euler step that produced the samples.
    pub dt: f64,
    pub seed: u64,
    pub replica: u64,
    pub columns: Vec<(&'static str, Vec<f64>)>,
}

impl SdePath {
    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.columns.iter().find(|(n, _)| *n == name).map(|(_, v)| v.as_slice())
    }

    /// κ samples; panics for paths that do not carry κ.
    pub fn kappa(&self) -> &[f64] {
        self.column("kappa").expect("path carries kappa")
    }

    pub fn with_provenance(mut self, seed: u64, replica: u64) -> Self {
        self.seed = seed;
        self.replica = replica;
        self
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("t");
        for (name, _) in &self.columns {
            out.push(',');
            out.push_str(name);
        }
        out.push('\n');
        for k in 0..self.grid.len() {
            out.push_str(&fmt_f64(self.grid.time(k)));
            for (_, v) in &self.columns {
                out.push(',');
                out.push_str(&fmt_f64(v[k]));
            }
            out.push('\n');
        }
        out
    }
}

fn require_kappa0(kappa0: f64) -> Result<()> {
    require_finite("kappa0", kappa0)?;
    if kappa0 < 0.0 {
        return Err(Error::config("kappa0", "must be nonnegative"));
    }
    Ok(())
}

/// Euler–Maruyama on the planar system, reporting κ = a(X² + Y²).
/// X(0) = Y(0) = √(κ0/(2a)), so κ(0) = κ0.
pub fn simulate_kappa_via_xy<R: Rng + ?Sized>(
    p: &RadialSdeParams,
    kappa0: f64,
    cfg: &SdeConfig,
    rng: &mut R,
) -> Result<SdePath> {
    require_kappa0(kappa0)?;
    let (a, b) = p.xy_coeffs()?;
    let (grid, per) = cfg.layout()?;
    let dt = cfg.dt;
    let sq = dt.sqrt();
    let mut x = (kappa0 / (2.0 * a)).sqrt();
    let mut y = x;
    let mut kappa = Vec::with_capacity(grid.len());
    kappa.push(kappa0);
    for _ in 1..grid.len() {
        for _ in 0..per {
            let r2 = x * x + y * y;
            let g1: f64 = rng.sample(StandardNormal);
            let g2: f64 = rng.sample(StandardNormal);
            let s = b * r2 * dt;
            x += -s * x + sq * g1;
            y += -s * y + sq * g2;
        }
        kappa.push(a * (x * x + y * y));
    }
    if !kappa.iter().all(|k| k.is_finite()) {
        return Err(Error::BlowUp { t: grid.horizon() });
    }
    Ok(SdePath { grid, dt, seed: 0, replica: 0, columns: vec![("kappa", kappa)] })
}

/// Full-truncation Euler scheme for the radial SDE; reports max(κ, 0).
pub fn simulate_kappa_direct<R: Rng + ?Sized>(
    p: &RadialSdeParams,
    kappa0: f64,
    cfg: &SdeConfig,
    rng: &mut R,
) -> Result<SdePath> {
    require_kappa0(kappa0)?;
    let (grid, per) = cfg.layout()?;
    let dt = cfg.dt;
    let sq = dt.sqrt();
    let mut k = kappa0;
    let mut kappa = Vec::with_capacity(grid.len());
    kappa.push(kappa0);
    for _ in 1..grid.len() {
        for _ in 0..per {
            let kp = k.max(0.0);
            let g: f64 = rng.sample(StandardNormal);
            k += (p.c1 - p.c2 * kp * kp) * dt + (p.c3 * kp).sqrt() * sq * g;
        }
        kappa.push(k.max(0.0));
    }
    if !kappa.iter().all(|k| k.is_finite()) {
        return Err(Error::BlowUp { t: grid.horizon() });
    }
    Ok(SdePath { grid, dt, seed: 0, replica: 0, columns: vec![("kappa", kappa)] })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum KappaScheme {
    /// Planar representation, the reference simulator.
    Xy,
    /// Full-truncation Euler on κ itself.
    Direct,
}

/// `replicas` κ paths, replica `k` drawn from stream `(seed, domain, k)`.
pub fn kappa_ensemble(
    scheme: KappaScheme,
    p: &RadialSdeParams,
    kappa0: f64,
    cfg: &SdeConfig,
    replicas: usize,
    seed: u64,
    domain: Domain,
) -> Result<Vec<SdePath>> {
    if replicas == 0 {
        return Err(Error::config("replicas", "need at least one replica"));
    }
    (0..replicas as u64)
        .into_par_iter()
        .map(|k| {
            let mut rng = stream(seed, domain, k);
            let path = match scheme {
                KappaScheme::Xy => simulate_kappa_via_xy(p, kappa0, cfg, &mut rng),
                KappaScheme::Direct => simulate_kappa_direct(p, kappa0, cfg, &mut rng),
            }?;
            Ok(path.with_provenance(seed, k))
        })
        .collect()
}

/// Drift matrix of the Gaussian fluctuation SDE.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum DriftForm {
    /// Jacobian of the limiting field along the deterministic path.
    #[default]
    Jacobian,
    /// [[−2, 2(1 + tanh λ)], [−2β(1 − tanh λ), 2β − α]]. Agrees with the
    /// Jacobian at the fixed point only.
    Printed,
}

pub fn fluctuation_drift(form: DriftForm, p: &DissipativeParams, [_, lambda]: State2) -> Matrix2 {
    let th = lambda.tanh();
    match form {
        DriftForm::Jacobian => {
            let sech2 = 1.0 - th * th;
            [[-2.0, 2.0 * sech2], [-2.0 * p.beta, 2.0 * p.beta * sech2 - p.alpha]]
        }
        DriftForm::Printed => [
            [-2.0, 2.0 * (1.0 + th)],
            [-2.0 * p.beta * (1.0 - th), 2.0 * p.beta - p.alpha],
        ],
    }
}

/// Options of [`simulate_linear_fluctuation`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LinearFluctuation {
    pub form: DriftForm,
    /// (m̃, λ̃) at time 0.
    pub initial: State2,
    /// Multiplies the diffusion; 0 gives the deterministic linear flow.
    pub noise: f64,
}

impl Default for LinearFluctuation {
    fn default() -> Self {
        Self { form: DriftForm::Jacobian, initial: [0.0, 0.0], noise: 1.0 }
    }
}

/// Euler–Maruyama path of d(m̃, λ̃) = A(t)(m̃, λ̃)dt + √(1 − m tanh λ)(2, 2β)dB
/// along the deterministic solution `ode`.
pub fn simulate_linear_fluctuation<R: Rng + ?Sized>(
    p: &DissipativeParams,
    ode: &OdeSolution,
    opts: &LinearFluctuation,
    cfg: &SdeConfig,
    rng: &mut R,
) -> Result<SdePath> {
    let (grid, per) = cfg.layout()?;
    if ode.horizon() < grid.horizon() * (1.0 - 1e-12) {
        return Err(Error::config(
            "horizon",
            format!("deterministic solution ends at {} before {}", ode.horizon(), grid.horizon()),
        ));
    }
    let dt = cfg.dt;
    let sq = dt.sqrt();
    let [mut x, mut y] = opts.initial;
    let mut ms = Vec::with_capacity(grid.len());
    let mut ls = Vec::with_capacity(grid.len());
    ms.push(x);
    ls.push(y);
    let mut step = 0usize;
    for _ in 1..grid.len() {
        for _ in 0..per {
            let t = step as f64 * dt;
            let s = ode.at(t);
            let a = fluctuation_drift(opts.form, p, s);
            let sigma = opts.noise * (1.0 - s[0] * s[1].tanh()).max(0.0).sqrt();
            let g: f64 = rng.sample(StandardNormal);
            let db = sigma * sq * g;
            let nx = x + (a[0][0] * x + a[0][1] * y) * dt + 2.0 * db;
            let ny = y + (a[1][0] * x + a[1][1] * y) * dt + 2.0 * p.beta * db;
            x = nx;
            y = ny;
            step += 1;
        }
        ms.push(x);
        ls.push(y);
    }
    Ok(SdePath { grid, dt, seed: 0, replica: 0, columns: vec![("m", ms), ("lambda", ls)] })
}

/// Normalized stationary density of the radial SDE,
/// ∝ κ^{2c1/c3 − 1} exp(−c2κ²/c3) on κ > 0.
#[derive(Debug, Clone)]
pub struct StationaryDensity {
    pub params: RadialSdeParams,
    power: f64,
    decay: f64,
    log_norm: f64,
    /// Nodes in y = ln κ, the CDF there and its y-derivative.
    y0: f64,
    h: f64,
    cdf: Vec<f64>,
    dcdf: Vec<f64>,
}

const DENSITY_NODES: usize = 20_000;

impl StationaryDensity {
    pub fn new(params: RadialSdeParams) -> Result<Self> {
        require_positive("c1", params.c1)?;
        require_positive("c2", params.c2)?;
        require_positive("c3", params.c3)?;
        let power = 2.0 * params.c1 / params.c3 - 1.0;
        let decay = params.c2 / params.c3;
        // in y = ln κ the mass element is g(y) = exp((power + 1) y − decay e^{2y})
        let log_scale = -0.5 * decay.ln();
        let lo = log_scale - 45.0 / (power + 1.0);
        let hi = log_scale + 0.5 * 80.0f64.ln();
        let h = (hi - lo) / DENSITY_NODES as f64;
        let g = |y: f64| ((power + 1.0) * y - decay * (2.0 * y).exp()).exp();
        let dg = |y: f64| g(y) * ((power + 1.0) - 2.0 * decay * (2.0 * y).exp());
        let ys: Vec<f64> = (0..=DENSITY_NODES).map(|i| lo + h * i as f64).collect();
        let vals: Vec<f64> = ys.iter().map(|&y| g(y)).collect();
        // trapezoid sums with the Euler–Maclaurin end correction, O(h⁴)
        let mut cdf = Vec::with_capacity(ys.len());
        let mut trap = 0.0;
        let d0 = dg(lo);
        cdf.push(0.0);
        for i in 1..ys.len() {
            trap += 0.5 * h * (vals[i - 1] + vals[i]);
            cdf.push(trap - h * h / 12.0 * (dg(ys[i]) - d0));
        }
        let total = *cdf.last().unwrap();
        cdf.iter_mut().for_each(|c| *c /= total);
        let dcdf = vals.iter().map(|v| v / total).collect();
        Ok(Self { params, power, decay, log_norm: -total.ln(), y0: lo, h, cdf, dcdf })
    }

    pub fn pdf(&self, kappa: f64) -> f64 {
        if kappa <= 0.0 {
            return 0.0;
        }
        (self.power * kappa.ln() - self.decay * kappa * kappa + self.log_norm).exp()
    }

    /// Cubic Hermite interpolation of the tabulated CDF in ln κ.
    fn hermite(&self, i: usize, w: f64) -> f64 {
        let (c0, c1) = (self.cdf[i], self.cdf[i + 1]);
        let (d0, d1) = (self.dcdf[i] * self.h, self.dcdf[i + 1] * self.h);
        let (w2, w3) = (w * w, w * w * w);
        (2.0 * w3 - 3.0 * w2 + 1.0) * c0
            + (w3 - 2.0 * w2 + w) * d0
            + (-2.0 * w3 + 3.0 * w2) * c1
            + (w3 - w2) * d1
    }

    pub fn cdf(&self, kappa: f64) -> f64 {
        if kappa <= 0.0 {
            return 0.0;
        }
        let pos = (kappa.ln() - self.y0) / self.h;
        if pos <= 0.0 {
            return 0.0;
        }
        if pos >= (self.cdf.len() - 1) as f64 {
            return 1.0;
        }
        let i = pos.floor() as usize;
        self.hermite(i, pos - i as f64)
    }

    /// κ with CDF equal to `q` ∈ (0, 1).
    pub fn quantile(&self, q: f64) -> f64 {
        let i = self.cdf.partition_point(|&c| c < q).clamp(1, self.cdf.len() - 1) - 1;
        let (mut lo, mut hi) = (0.0, 1.0);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if self.hermite(i, mid) < q {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        (self.y0 + self.h * (i as f64 + 0.5 * (lo + hi))).exp()
    }

    /// `kappa,pdf` table on `points` equispaced nodes in (0, kappa_max].
    pub fn table(&self, kappa_max: f64, points: usize) -> String {
        let rows = (1..=points).map(|i| {
            let k = kappa_max * i as f64 / points as f64;
            vec![k, self.pdf(k)]
        });
        crate::io::csv_table(&["kappa", "pdf"], rows)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::limit::{field_dissipative, integrate};
    use crate::rng::StreamRng;
    use rand::SeedableRng;

    fn rng(seed: u64) -> StreamRng {
        StreamRng::seed_from_u64(seed)
    }

    #[test]
    fn instantiations() {
        let p = RadialSdeParams::dissipative(1.5).unwrap();
        assert_eq!((p.c1, p.c2, p.c3), (9.0, 0.75, 18.0));
        let (a, b) = p.xy_coeffs().unwrap();
        assert_eq!(a, 2.0 * 1.5 * 1.5);
        assert_eq!(b, 1.5f64.powi(3) / 2.0);
        let q = RadialSdeParams::twopop(4.0, -4.0).unwrap();
        assert_eq!((q.c1, q.c2, q.c3), (16.0, 1.0, 32.0));
        assert!(matches!(RadialSdeParams::twopop(4.0, 3000.0), Err(Error::NotCritical(_))));
        assert!(RadialSdeParams::new(1.0, 1.0, 3.0).unwrap().xy_coeffs().is_err());
        assert!(RadialSdeParams::new(1.0, 0.0, 2.0).is_err());
    }

    #[test]
    fn planar_initial_value_matches_kappa0() {
        let p = RadialSdeParams::dissipative(1.5).unwrap();
        let cfg = SdeConfig::new(0.01, 1e-3, 0.01).unwrap();
        let path = simulate_kappa_via_xy(&p, 0.75, &cfg, &mut rng(1)).unwrap();
        assert_eq!(path.kappa()[0], 0.75);
        // the symmetric start X = Y = λ̄/(2√(β(β−1))) lands on the same κ0
        let (a, _) = p.xy_coeffs().unwrap();
        let x = 0.5 / (2.0 * (1.5f64 * 0.5).sqrt());
        assert!((a * 2.0 * x * x - 0.75).abs() < 1e-15);
    }

    #[test]
    fn planar_drift_reproduces_radial_drift() {
        // one Euler step from a fixed point, averaged over many normals:
        // E[Δκ]/dt → c1 − c2κ²
        let p = RadialSdeParams::dissipative(1.5).unwrap();
        let (a, b) = p.xy_coeffs().unwrap();
        let (x, y) = (0.3, 0.4);
        let kappa = a * (x * x + y * y);
        let dt = 1e-4;
        let mut r = rng(5);
        let n = 400_000;
        let mut acc = 0.0;
        for _ in 0..n {
            let g1: f64 = r.sample(StandardNormal);
            let g2: f64 = r.sample(StandardNormal);
            let s = b * (x * x + y * y) * dt;
            let nx = x - s * x + dt.sqrt() * g1;
            let ny = y - s * y + dt.sqrt() * g2;
            acc += a * (nx * nx + ny * ny) - kappa;
        }
        let drift = acc / n as f64 / dt;
        let target = p.drift(kappa);
        // Monte Carlo error of the mean is about √(c3κ/dt)/√n
        let se = (p.c3 * kappa / dt).sqrt() / (n as f64).sqrt();
        assert!((drift - target).abs() < 5.0 * se, "{drift} vs {target} (se {se})");
    }

    #[test]
    fn direct_scheme_without_noise_follows_riccati() {
        let p = RadialSdeParams { c1: 9.0, c2: 0.75, c3: 0.0 };
        let cfg = SdeConfig::new(1.0, 1e-4, 0.25).unwrap();
        let path = simulate_kappa_direct(&p, 0.75, &cfg, &mut rng(2)).unwrap();
        let ode = integrate(|[k, _]| [p.c1 - p.c2 * k * k, 0.0], [0.75, 0.0], 1.0, 1e-3).unwrap();
        for (i, &k) in path.kappa().iter().enumerate() {
            let exact = ode.at(0.25 * i as f64)[0];
            assert!((k - exact).abs() < 1e-2 * exact.max(1.0), "t {} {k} {exact}", 0.25 * i as f64);
        }
    }

    #[test]
    fn kappa_is_never_negative() {
        let p = RadialSdeParams::dissipative(1.5).unwrap();
        let cfg = SdeConfig::new(2.0, 1e-2, 0.02).unwrap();
        for s in 0..20 {
            let d = simulate_kappa_direct(&p, 0.0, &cfg, &mut rng(s)).unwrap();
            let x = simulate_kappa_via_xy(&p, 0.0, &cfg, &mut rng(s)).unwrap();
            assert!(d.kappa().iter().chain(x.kappa()).all(|&k| k >= 0.0));
        }
    }

    #[test]
    fn config_errors() {
        assert!(SdeConfig::new(1.0, 0.0, 0.1).is_err());
        assert!(SdeConfig::new(1.0, 0.03, 0.1).is_err());
        assert!(SdeConfig::new(1.0, 0.01, 0.1).is_ok());
        let p = RadialSdeParams::dissipative(1.5).unwrap();
        let cfg = SdeConfig::new(1.0, 0.01, 0.1).unwrap();
        assert!(simulate_kappa_direct(&p, -1.0, &cfg, &mut rng(0)).is_err());
    }

    #[test]
    fn ensembles_are_reproducible() {
        let p = RadialSdeParams::dissipative(1.5).unwrap();
        let cfg = SdeConfig::new(0.5, 1e-3, 0.1).unwrap();
        let a = kappa_ensemble(KappaScheme::Xy, &p, 0.75, &cfg, 8, 3, Domain::LimitSde).unwrap();
        let b = kappa_ensemble(KappaScheme::Xy, &p, 0.75, &cfg, 8, 3, Domain::LimitSde).unwrap();
        assert_eq!(a, b);
        assert_ne!(a[0].kappa(), a[1].kappa());
        assert!(a[0].to_csv().starts_with("t,kappa\n0.0,0.75\n"));
    }

    fn stationary_setup() -> (DissipativeParams, OdeSolution) {
        let p = DissipativeParams::new(1.0, 1.2).unwrap();
        let ode = integrate(|x| field_dissipative(&p, x), [0.0, 0.0], 4000.0, 1.0).unwrap();
        (p, ode)
    }

    /// Σ solving AΣ + ΣAᵀ + DDᵀ = 0, written as a 3×3 linear system in
    /// (Σ11, Σ12, Σ22) and solved by Cramer's rule.
    fn lyapunov(a: Matrix2, d: [f64; 2]) -> [f64; 3] {
        let m = [
            [2.0 * a[0][0], 2.0 * a[0][1], 0.0],
            [a[1][0], a[0][0] + a[1][1], a[0][1]],
            [0.0, 2.0 * a[1][0], 2.0 * a[1][1]],
        ];
        let rhs = [-d[0] * d[0], -d[0] * d[1], -d[1] * d[1]];
        let det3 = |m: [[f64; 3]; 3]| {
            m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
                - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
                + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
        };
        let det = det3(m);
        let mut out = [0.0; 3];
        for c in 0..3 {
            let mut mc = m;
            for r in 0..3 {
                mc[r][c] = rhs[r];
            }
            out[c] = det3(mc) / det;
        }
        out
    }

    #[test]
    fn stationary_covariance_matches_lyapunov_solution() {
        let (p, ode) = stationary_setup();
        let cfg = SdeConfig::new(4000.0, 5e-3, 0.5).unwrap();
        let (mut s11, mut s12, mut s22, mut n) = (0.0, 0.0, 0.0, 0.0);
        for k in 0..16 {
            let mut r = stream(9, Domain::LinearFluctuation, k);
            let path = simulate_linear_fluctuation(&p, &ode, &LinearFluctuation::default(), &cfg, &mut r)
                .unwrap();
            // the stationary mean is zero; skip a burn-in of 20 time units
            let ms = &path.column("m").unwrap()[40..];
            let ls = &path.column("lambda").unwrap()[40..];
            for (x, y) in ms.iter().zip(ls) {
                s11 += x * x;
                s12 += x * y;
                s22 += y * y;
                n += 1.0;
            }
        }
        let a = fluctuation_drift(DriftForm::Jacobian, &p, [0.0, 0.0]);
        let sigma = lyapunov(a, [2.0, 2.0 * p.beta]);
        for (emp, exact) in [(s11 / n, sigma[0]), (s12 / n, sigma[1]), (s22 / n, sigma[2])] {
            assert!((emp / exact - 1.0).abs() < 0.05, "{emp} vs {exact}");
        }
    }

    #[test]
    fn lyapunov_oracle_checks_itself() {
        let a = [[-1.0, 0.0], [0.0, -2.0]];
        let s = lyapunov(a, [1.0, 2.0]);
        assert!((s[0] - 0.5).abs() < 1e-14);
        assert!((s[1] - 2.0 / 3.0).abs() < 1e-14);
        assert!((s[2] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn both_drift_forms_agree_at_the_fixed_point() {
        let p = DissipativeParams::new(1.0, 1.2).unwrap();
        assert_eq!(
            fluctuation_drift(DriftForm::Jacobian, &p, [0.0, 0.0]),
            fluctuation_drift(DriftForm::Printed, &p, [0.0, 0.0])
        );
        assert_ne!(
            fluctuation_drift(DriftForm::Jacobian, &p, [0.3, 0.5]),
            fluctuation_drift(DriftForm::Printed, &p, [0.3, 0.5])
        );
    }

    #[test]
    fn zero_noise_from_origin_stays_at_origin() {
        let (p, ode) = stationary_setup();
        let cfg = SdeConfig::new(5.0, 1e-3, 0.1).unwrap();
        let opts = LinearFluctuation { noise: 0.0, ..Default::default() };
        let path = simulate_linear_fluctuation(&p, &ode, &opts, &cfg, &mut rng(4)).unwrap();
        assert!(path.columns.iter().all(|(_, v)| v.iter().all(|&x| x == 0.0)));
    }

    #[test]
    fn short_time_variance_grows_like_diffusion() {
        let (p, ode) = stationary_setup();
        let t = 0.01;
        let cfg = SdeConfig::new(t, 1e-4, t).unwrap();
        let n = 40_000;
        let (mut s_m, mut s_l) = (0.0, 0.0);
        for k in 0..n {
            let mut r = stream(77, Domain::LinearFluctuation, k);
            let path =
                simulate_linear_fluctuation(&p, &ode, &LinearFluctuation::default(), &cfg, &mut r).unwrap();
            s_m += path.column("m").unwrap()[1].powi(2);
            s_l += path.column("lambda").unwrap()[1].powi(2);
        }
        let (vm, vl) = (s_m / n as f64 / t, s_l / n as f64 / t);
        // first-order slopes 4 and 4β²; sampling error is below 1% at this n
        assert!((vm / 4.0 - 1.0).abs() < 0.03, "{vm}");
        assert!((vl / (4.0 * p.beta * p.beta) - 1.0).abs() < 0.03, "{vl}");
    }

    #[test]
    fn horizon_longer_than_ode_is_rejected() {
        let p = DissipativeParams::new(1.0, 1.2).unwrap();
        let ode = integrate(|x| field_dissipative(&p, x), [0.0, 0.0], 1.0, 0.01).unwrap();
        let cfg = SdeConfig::new(2.0, 0.01, 0.1).unwrap();
        assert!(simulate_linear_fluctuation(&p, &ode, &LinearFluctuation::default(), &cfg, &mut rng(0)).is_err());
    }

    /// Mass of the planar stationary law exp(−b r⁴/2) r dr between the radii
    /// that κ = a r² maps to `k_lo` and `k_hi`; Simpson in r.
    fn planar_mass(a: f64, b: f64, k_lo: f64, k_hi: f64) -> f64 {
        let r_of = |k: f64| (k / a).sqrt();
        let f = |r: f64| r * (-0.5 * b * r.powi(4)).exp();
        let simpson = |lo: f64, hi: f64| {
            let n = 20_000;
            let h = (hi - lo) / n as f64;
            let mut s = f(lo) + f(hi);
            for i in 1..n {
                s += f(lo + h * i as f64) * if i % 2 == 1 { 4.0 } else { 2.0 };
            }
            s * h / 3.0
        };
        let total = simpson(0.0, 12.0 / b.powf(0.25));
        simpson(r_of(k_lo), r_of(k_hi)) / total
    }

    #[test]
    fn density_matches_planar_pushforward() {
        for beta in [1.1, 1.5, 3.0] {
            let p = RadialSdeParams::dissipative(beta).unwrap();
            let (a, b) = p.xy_coeffs().unwrap();
            let d = StationaryDensity::new(p).unwrap();
            for (lo, hi) in [(0.0, 1.0), (1.0, 3.0), (2.0, 10.0)] {
                let exact = planar_mass(a, b, lo, hi);
                let ours = d.cdf(hi) - d.cdf(lo);
                assert!((ours - exact).abs() < 1e-7, "beta {beta} [{lo},{hi}] {ours} {exact}");
            }
            // flat power for this instantiation: pdf ∝ exp(−κ²/(16β))
            let ratio = d.pdf(2.0) / d.pdf(1.0);
            assert!((ratio - (-(4.0 - 1.0) / (16.0 * beta)).exp()).abs() < 1e-12);
        }
    }

    #[test]
    fn density_is_normalized() {
        for p in [
            RadialSdeParams::dissipative(1.5).unwrap(),
            RadialSdeParams::twopop(4.0, -4.0).unwrap(),
            RadialSdeParams::new(3.0, 0.2, 2.0).unwrap(),
        ] {
            let d = StationaryDensity::new(p).unwrap();
            // independent midpoint rule in κ on a fine grid
            let hi = 20.0 * (p.c3 / p.c2).sqrt();
            let n = 400_000;
            let h = hi / n as f64;
            let mass: f64 = (0..n).map(|i| d.pdf(h * (i as f64 + 0.5))).sum::<f64>() * h;
            assert!((mass - 1.0).abs() < 1e-6, "{p:?} mass {mass}");
            assert!((d.cdf(d.quantile(0.3)) - 0.3).abs() < 1e-9);
        }
    }

    #[test]
    fn normalization_matches_gaussian_integral() {
        // ∫ exp(−κ²/(16β)) dκ over κ > 0 equals 2√(βπ)
        for beta in [1.1, 1.5, 3.0] {
            let d = StationaryDensity::new(RadialSdeParams::dissipative(beta).unwrap()).unwrap();
            let at_zero = d.pdf(f64::MIN_POSITIVE);
            let exact = 1.0 / (2.0 * (beta * std::f64::consts::PI).sqrt());
            assert!((at_zero / exact - 1.0).abs() < 1e-8, "{at_zero} {exact}");
        }
    }

    #[test]
    fn density_table_layout() {
        let d = StationaryDensity::new(RadialSdeParams::dissipative(1.5).unwrap()).unwrap();
        let t = d.table(10.0, 4);
        assert!(t.starts_with("kappa,pdf\n2.5,"));
        assert_eq!(t.lines().count(), 5);
    }
}
