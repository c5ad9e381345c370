//! Parameter sets, aggregated microscopic states and exact jump rates for
//! the two models.
//!
//! * The dissipative Curie-Weiss model: spins flip at rate `1 - tanh(σλ)`
//!   while the interaction field λ relaxes as `dλ = -αλ dt + β dm`.
//! * The two-population model: a spin of population `k` flips at rate
//!   `exp(-σ R_k(m1, m2))` with `R_1 = J11 m1 + J12 m2`, `R_2 = J21 m1 + J22 m2`.
//!
//! Both rate families depend on the configuration only through
//! magnetizations, so the states store counts of `+1` spins instead of
//! per-spin arrays. Every event is O(1).

use serde::Serialize;

use crate::error::{require_finite, require_positive, Error, Result};

/// Absolute tolerance on the parameter identities that define criticality.
pub const CRITICALITY_TOL: f64 = 1e-12;

/// Which of the two spin models a value belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    Dissipative,
    TwoPop,
}

impl ModelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Dissipative => "dissipative",
            ModelKind::TwoPop => "two-pop",
        }
    }
}

/// Dissipation rate α and inverse temperature β.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DissipativeParams {
    pub alpha: f64,
    pub beta: f64,
}

impl DissipativeParams {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        require_positive("alpha", alpha)?;
        require_positive("beta", beta)?;
        Ok(Self { alpha, beta })
    }

    /// The critical point β = α/2 + 1 for the given α.
    pub fn critical(alpha: f64) -> Result<Self> {
        Self::new(alpha, alpha / 2.0 + 1.0)
    }

    /// Signed distance β − (α/2 + 1); positive means past the Hopf point.
    pub fn critical_distance(&self) -> f64 {
        self.beta - (self.alpha / 2.0 + 1.0)
    }

    pub fn is_critical(&self) -> bool {
        self.critical_distance().abs() <= CRITICALITY_TOL
    }

    /// Rotation speed 2√(β−1) of the linearized critical flow.
    pub fn fast_frequency(&self) -> f64 {
        2.0 * (self.beta - 1.0).sqrt()
    }
}

/// Population-1 fraction γ and the four couplings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TwoPopParams {
    pub gamma: f64,
    pub j11: f64,
    pub j12: f64,
    pub j21: f64,
    pub j22: f64,
}

impl TwoPopParams {
    pub fn new(gamma: f64, j11: f64, j12: f64, j21: f64, j22: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma < 1.0) {
            return Err(Error::config("gamma", format!("expected a value in (0, 1), got {gamma}")));
        }
        for (name, v) in [("j11", j11), ("j12", j12), ("j21", j21), ("j22", j22)] {
            require_finite(name, v)?;
        }
        Ok(Self { gamma, j11, j12, j21, j22 })
    }

    /// Builds a parameter set with J22 solved from γJ11 − 1 = −((1−γ)J22 − 1).
    pub fn with_balanced_j22(gamma: f64, j11: f64, j12: f64, j21: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma < 1.0) {
            return Err(Error::config("gamma", format!("expected a value in (0, 1), got {gamma}")));
        }
        let j22 = (2.0 - gamma * j11) / (1.0 - gamma);
        Self::new(gamma, j11, j12, j21, j22)
    }

    /// Γ = (γJ11 − 1)² + γ(1−γ)J12J21.
    pub fn gamma_big(&self) -> f64 {
        let g = self.gamma;
        (g * self.j11 - 1.0).powi(2) + g * (1.0 - g) * self.j12 * self.j21
    }

    /// (γJ11 − 1) + ((1−γ)J22 − 1); zero when the linearization is traceless.
    pub fn condition1_residual(&self) -> f64 {
        (self.gamma * self.j11 - 1.0) + ((1.0 - self.gamma) * self.j22 - 1.0)
    }

    pub fn is_critical(&self) -> bool {
        self.condition1_residual().abs() <= CRITICALITY_TOL && self.gamma_big() < 0.0
    }

    /// Fails with [`Error::NotCritical`] naming the violated condition.
    pub fn require_critical(&self) -> Result<()> {
        let r = self.condition1_residual();
        if r.abs() > CRITICALITY_TOL {
            return Err(Error::NotCritical(format!("trace condition residual {r}")));
        }
        let g = self.gamma_big();
        if g >= 0.0 {
            return Err(Error::NotCritical(format!("Gamma = {g} is not negative")));
        }
        if self.j21 == 0.0 {
            return Err(Error::NotCritical("J21 = 0 makes the change of variables singular".into()));
        }
        Ok(())
    }

    /// Rotation speed 2√|Γ| of the linearized critical flow.
    pub fn fast_frequency(&self) -> f64 {
        2.0 * self.gamma_big().abs().sqrt()
    }

    /// Closed-form diffusion constant Z1 of the critical radial SDE.
    pub fn z1_closed_form(&self) -> f64 {
        let g = self.gamma;
        let a = g * self.j11 - 1.0;
        let abs_g = self.gamma_big().abs();
        (abs_g + g * (1.0 - g) * self.j21 * self.j21 + a * a)
            / ((1.0 - g) * self.j21 * self.j21 * abs_g)
    }

    /// Closed-form candidate for Z2. It disagrees with the phase average of
    /// the generator coefficients away from special parameter sets; see
    /// `critical::extract_z_constants`.
    pub fn z2_printed(&self) -> f64 {
        let g = self.gamma;
        let (j11, j12, j21) = (self.j11, self.j12, self.j21);
        let a = g * j11 - 1.0;
        let abs_g = self.gamma_big().abs();
        let b = j11 * a + (1.0 - g) * j12 * j21;
        -2.0 * j11 * j11 * abs_g - 2.0 * j21 * j21 + a * abs_g * (j11 * j11 - j21 * j21)
            + a * j21 * j21
            + a * b * b
            - j11 * a * b
    }

    /// Coupling fields (R1, R2) at magnetizations (m1, m2).
    #[inline]
    pub fn fields(&self, m1: f64, m2: f64) -> (f64, f64) {
        (self.j11 * m1 + self.j12 * m2, self.j21 * m1 + self.j22 * m2)
    }

    /// Upper bound on |R1|, |R2| given |m1| ≤ γ and |m2| ≤ 1−γ.
    pub fn field_bound(&self) -> f64 {
        self.j11.abs() + self.j12.abs() + self.j21.abs() + self.j22.abs()
    }

    /// Splits N spins into (n1, n2) with n1 = round(γN); both must be positive.
    pub fn populations(&self, n: u64) -> Result<(u64, u64)> {
        let n1 = (self.gamma * n as f64).round() as u64;
        if n1 == 0 || n1 >= n {
            return Err(Error::config(
                "n",
                format!("N = {n} leaves an empty population at gamma = {}", self.gamma),
            ));
        }
        Ok((n1, n - n1))
    }
}

/// Parameters of either model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "model", rename_all = "kebab-case")]
pub enum ModelParams {
    Dissipative(DissipativeParams),
    TwoPop(TwoPopParams),
}

impl ModelParams {
    pub fn kind(&self) -> ModelKind {
        match self {
            ModelParams::Dissipative(_) => ModelKind::Dissipative,
            ModelParams::TwoPop(_) => ModelKind::TwoPop,
        }
    }

    pub fn is_critical(&self) -> bool {
        match self {
            ModelParams::Dissipative(p) => p.is_critical(),
            ModelParams::TwoPop(p) => p.is_critical(),
        }
    }

    pub fn fast_frequency(&self) -> f64 {
        match self {
            ModelParams::Dissipative(p) => p.fast_frequency(),
            ModelParams::TwoPop(p) => p.fast_frequency(),
        }
    }
}

/// Sign of the spin selected for a flip.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Spin {
    Up,
    Down,
}

/// Aggregate flip rates of the dissipative model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DissipativeRates {
    /// Total rate at which some `+1` spin flips.
    pub up: f64,
    /// Total rate at which some `-1` spin flips.
    pub down: f64,
}

impl DissipativeRates {
    pub fn total(&self) -> f64 {
        self.up + self.down
    }
}

/// Counts of `+1` spins plus the interaction field λ at time `t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DissipativeState {
    pub n: u64,
    pub n_plus: u64,
    pub lambda: f64,
    pub t: f64,
}

impl DissipativeState {
    pub fn new(n: u64, n_plus: u64, lambda: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::config("n", "population size must be positive"));
        }
        if n_plus > n {
            return Err(Error::config("n_plus", format!("{n_plus} exceeds N = {n}")));
        }
        require_finite("lambda", lambda)?;
        Ok(Self { n, n_plus, lambda, t: 0.0 })
    }

    /// m = (2 n_plus − N)/N.
    #[inline]
    pub fn magnetization(&self) -> f64 {
        (2.0 * self.n_plus as f64 - self.n as f64) / self.n as f64
    }

    /// Aggregate rates `n_plus(1 − tanh λ)` and `(N − n_plus)(1 + tanh λ)`.
    #[inline]
    pub fn flip_rates(&self) -> DissipativeRates {
        let th = self.lambda.tanh();
        DissipativeRates {
            up: self.n_plus as f64 * (1.0 - th),
            down: (self.n - self.n_plus) as f64 * (1.0 + th),
        }
    }

    /// Flips one spin of the given sign; λ jumps by `∓2β/N`. Time is unchanged.
    pub fn apply_flip(&mut self, which: Spin, params: &DissipativeParams) -> Result<()> {
        let jump = 2.0 * params.beta / self.n as f64;
        match which {
            Spin::Up => {
                if self.n_plus == 0 {
                    return Err(Error::Contract("no +1 spin left to flip".into()));
                }
                self.n_plus -= 1;
                self.lambda -= jump;
            }
            Spin::Down => {
                if self.n_plus == self.n {
                    return Err(Error::Contract("no -1 spin left to flip".into()));
                }
                self.n_plus += 1;
                self.lambda += jump;
            }
        }
        Ok(())
    }

    /// Advances time by `dt` with no spin flips: λ ← λ e^{−α dt}, exactly.
    #[inline]
    pub fn decay(&mut self, dt: f64, params: &DissipativeParams) {
        debug_assert!(dt >= 0.0);
        self.lambda *= (-params.alpha * dt).exp();
        self.t += dt;
    }
}

/// Which aggregate of the two-population model fires.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TwoPopEvent {
    Pop1(Spin),
    Pop2(Spin),
}

/// The four aggregate rates of the two-population model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoPopRates {
    pub pop1_up: f64,
    pub pop1_down: f64,
    pub pop2_up: f64,
    pub pop2_down: f64,
}

impl TwoPopRates {
    pub fn total(&self) -> f64 {
        self.pop1_up + self.pop1_down + self.pop2_up + self.pop2_down
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.pop1_up, self.pop1_down, self.pop2_up, self.pop2_down]
    }
}

/// Counts of `+1` spins in each population.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoPopState {
    pub n1: u64,
    pub n2: u64,
    pub n1_plus: u64,
    pub n2_plus: u64,
    pub t: f64,
}

impl TwoPopState {
    pub fn new(n1: u64, n2: u64, n1_plus: u64, n2_plus: u64) -> Result<Self> {
        if n1 == 0 || n2 == 0 {
            return Err(Error::config("n", "both populations must be non-empty"));
        }
        if n1_plus > n1 {
            return Err(Error::config("n1_plus", format!("{n1_plus} exceeds n1 = {n1}")));
        }
        if n2_plus > n2 {
            return Err(Error::config("n2_plus", format!("{n2_plus} exceeds n2 = {n2}")));
        }
        Ok(Self { n1, n2, n1_plus, n2_plus, t: 0.0 })
    }

    pub fn n(&self) -> u64 {
        self.n1 + self.n2
    }

    /// (m1, m2), both normalized by the total N.
    #[inline]
    pub fn magnetizations(&self) -> (f64, f64) {
        let n = self.n() as f64;
        (
            (2.0 * self.n1_plus as f64 - self.n1 as f64) / n,
            (2.0 * self.n2_plus as f64 - self.n2 as f64) / n,
        )
    }

    #[inline]
    pub fn flip_rates(&self, params: &TwoPopParams) -> TwoPopRates {
        let (m1, m2) = self.magnetizations();
        let (r1, r2) = params.fields(m1, m2);
        debug_assert!(r1.abs() <= params.field_bound() + 1e-12);
        debug_assert!(r2.abs() <= params.field_bound() + 1e-12);
        let e1 = r1.exp();
        let e2 = r2.exp();
        TwoPopRates {
            pop1_up: self.n1_plus as f64 / e1,
            pop1_down: (self.n1 - self.n1_plus) as f64 * e1,
            pop2_up: self.n2_plus as f64 / e2,
            pop2_down: (self.n2 - self.n2_plus) as f64 * e2,
        }
    }

    pub fn apply(&mut self, event: TwoPopEvent) -> Result<()> {
        let (count, size) = match event {
            TwoPopEvent::Pop1(_) => (&mut self.n1_plus, self.n1),
            TwoPopEvent::Pop2(_) => (&mut self.n2_plus, self.n2),
        };
        match event {
            TwoPopEvent::Pop1(Spin::Up) | TwoPopEvent::Pop2(Spin::Up) => {
                if *count == 0 {
                    return Err(Error::Contract("no +1 spin left to flip".into()));
                }
                *count -= 1;
            }
            TwoPopEvent::Pop1(Spin::Down) | TwoPopEvent::Pop2(Spin::Down) => {
                if *count == size {
                    return Err(Error::Contract("no -1 spin left to flip".into()));
                }
                *count += 1;
            }
        }
        Ok(())
    }
}
