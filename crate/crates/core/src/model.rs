//! Population model definitions.
//!
//! A neuron carries an age `a` (time since its last spike) and a leaky memory
//! `m`. Between spikes `a` grows at unit speed and `m` decays at rate `lambda`;
//! the neuron spikes with intensity `f(a, m, x)` where `x` is the already
//! scaled input `epsilon * x_t`, and at a spike `(a, m) -> (0, gamma(m))`.
//! The population potential `x_t` is driven through an exponential kernel
//! `h(t, a, m) = C_h exp(-decay t) kappa(m)`.
//!
//! Every derived constant (Lipschitz constant, jump bounds, Lyapunov pair) is
//! computed in closed form from the preset parameters.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default bound on the stationary mass allowed above the memory truncation.
pub const DEFAULT_TAIL_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FiringKind {
    /// `f = f_max` once the absolute refractory period is over.
    Constant,
    /// Adaptive SRM0: `f = fhat(eta(a) - m + x)`.
    Asrm0,
    /// Memory-independent sigmoid `f = fhat(eta(a) + x)`.
    Renewal,
    /// Piecewise-linear hazard in age, independent of `m` and `x`.
    Tabulated,
}

/// Firing-rate function. For the sigmoid kinds
/// `fhat(u) = sigma + (f_max - sigma) / (1 + exp(-beta u))` and
/// `eta(a) = -eta_amplitude * exp(-a / eta_tau)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FiringRate {
    pub kind: FiringKind,
    pub f_max: f64,
    #[serde(default)]
    pub beta: f64,
    #[serde(default)]
    pub sigma_floor: f64,
    #[serde(default)]
    pub delta_abs: f64,
    #[serde(default)]
    pub eta_amplitude: f64,
    #[serde(default = "default_eta_tau")]
    pub eta_tau: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub table_ages: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub table_rates: Vec<f64>,
}

fn default_eta_tau() -> f64 {
    1.0
}

impl FiringRate {
    pub fn constant(rate: f64) -> Self {
        FiringRate {
            kind: FiringKind::Constant,
            f_max: rate,
            beta: 0.0,
            sigma_floor: rate,
            delta_abs: 0.0,
            eta_amplitude: 0.0,
            eta_tau: 1.0,
            table_ages: Vec::new(),
            table_rates: Vec::new(),
        }
    }

    #[inline]
    fn eta(&self, a: f64) -> f64 {
        if self.eta_amplitude == 0.0 {
            0.0
        } else {
            -self.eta_amplitude * (-a / self.eta_tau).exp()
        }
    }

    #[inline]
    fn fhat(&self, u: f64) -> f64 {
        self.sigma_floor + (self.f_max - self.sigma_floor) / (1.0 + (-self.beta * u).exp())
    }

    fn tabulated(&self, a: f64) -> f64 {
        let ages = &self.table_ages;
        let rates = &self.table_rates;
        if a <= ages[0] {
            return rates[0];
        }
        let last = ages.len() - 1;
        if a >= ages[last] {
            return rates[last];
        }
        let k = ages.partition_point(|&t| t <= a) - 1;
        let s = (a - ages[k]) / (ages[k + 1] - ages[k]);
        rates[k] + s * (rates[k + 1] - rates[k])
    }

    /// Unchecked evaluation, used on hot paths.
    #[inline]
    pub fn eval(&self, a: f64, m: f64, x: f64) -> f64 {
        if a < self.delta_abs {
            return 0.0;
        }
        match self.kind {
            FiringKind::Constant => self.f_max,
            FiringKind::Asrm0 => self.fhat(self.eta(a) - m + x),
            FiringKind::Renewal => self.fhat(self.eta(a) + x),
            FiringKind::Tabulated => self.tabulated(a),
        }
    }

    /// Whether `f` ignores the memory variable.
    pub fn is_memory_independent(&self) -> bool {
        !matches!(self.kind, FiringKind::Asrm0)
    }

    /// Whether `f` ignores the input potential.
    pub fn is_input_independent(&self) -> bool {
        matches!(self.kind, FiringKind::Constant | FiringKind::Tabulated)
    }

    /// Lower bound `sigma` on `f` for `a >= delta_abs`.
    pub fn floor(&self) -> f64 {
        match self.kind {
            FiringKind::Constant => self.f_max,
            FiringKind::Asrm0 | FiringKind::Renewal => self.sigma_floor,
            FiringKind::Tabulated => self
                .table_rates
                .iter()
                .copied()
                .fold(f64::INFINITY, f64::min),
        }
    }

    /// Supremum of `f`.
    pub fn sup(&self) -> f64 {
        match self.kind {
            FiringKind::Tabulated => self.table_rates.iter().copied().fold(0.0, f64::max),
            _ => self.f_max,
        }
    }

    /// Lipschitz constant for the sum norm `|da| + |dm| + |dx|`, away from
    /// the refractory edge `a = delta_abs` where `f` jumps from 0 to at least
    /// `sigma`.
    pub fn lipschitz(&self) -> f64 {
        match self.kind {
            FiringKind::Constant => 0.0,
            FiringKind::Asrm0 | FiringKind::Renewal => {
                let eta_slope = if self.eta_amplitude == 0.0 {
                    0.0
                } else {
                    self.eta_amplitude.abs() / self.eta_tau
                };
                0.25 * (self.f_max - self.sigma_floor) * self.beta * eta_slope.max(1.0)
            }
            FiringKind::Tabulated => self
                .table_ages
                .windows(2)
                .zip(self.table_rates.windows(2))
                .map(|(t, r)| ((r[1] - r[0]) / (t[1] - t[0])).abs())
                .fold(0.0, f64::max),
        }
    }

    pub(crate) fn validate(&self) -> Result<()> {
        let finite = [
            ("firing.f_max", self.f_max),
            ("firing.beta", self.beta),
            ("firing.sigma_floor", self.sigma_floor),
            ("firing.delta_abs", self.delta_abs),
            ("firing.eta_amplitude", self.eta_amplitude),
            ("firing.eta_tau", self.eta_tau),
        ];
        for (key, v) in finite {
            if !v.is_finite() {
                return Err(Error::config(key, "must be finite"));
            }
        }
        if self.delta_abs < 0.0 {
            return Err(Error::config("firing.delta_abs", "must be non-negative"));
        }
        match self.kind {
            FiringKind::Constant => {
                if self.f_max <= 0.0 {
                    return Err(Error::config(
                        "firing.f_max",
                        "constant rate must be positive",
                    ));
                }
            }
            FiringKind::Asrm0 | FiringKind::Renewal => {
                if !(self.sigma_floor > 0.0) {
                    return Err(Error::config(
                        "firing.sigma_floor",
                        "must be positive (rate floor after the refractory period)",
                    ));
                }
                if self.f_max <= self.sigma_floor {
                    return Err(Error::config("firing.f_max", "must exceed sigma_floor"));
                }
                if self.beta <= 0.0 {
                    return Err(Error::config("firing.beta", "must be positive"));
                }
                if self.eta_tau <= 0.0 {
                    return Err(Error::config("firing.eta_tau", "must be positive"));
                }
            }
            FiringKind::Tabulated => {
                let (ages, rates) = (&self.table_ages, &self.table_rates);
                if ages.len() < 2 || ages.len() != rates.len() {
                    return Err(Error::config(
                        "firing.table_ages",
                        "needs at least two ages and one rate per age",
                    ));
                }
                if ages.windows(2).any(|w| !(w[1] > w[0])) {
                    return Err(Error::config(
                        "firing.table_ages",
                        "must be strictly increasing",
                    ));
                }
                if rates.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
                    return Err(Error::config(
                        "firing.table_rates",
                        "must be positive and finite",
                    ));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum JumpKind {
    /// `gamma(m) = m + gamma_hat`.
    Additive,
    /// `gamma(m) = 1 - upsilon + upsilon m` on `(0, 1)`.
    Depression,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JumpMap {
    pub kind: JumpKind,
    #[serde(default)]
    pub gamma_hat: f64,
    #[serde(default)]
    pub upsilon: f64,
}

impl JumpMap {
    pub fn additive(gamma_hat: f64) -> Self {
        JumpMap {
            kind: JumpKind::Additive,
            gamma_hat,
            upsilon: 0.0,
        }
    }

    pub fn depression(upsilon: f64) -> Self {
        JumpMap {
            kind: JumpKind::Depression,
            gamma_hat: 0.0,
            upsilon,
        }
    }

    #[inline]
    pub fn apply(&self, m: f64) -> f64 {
        match self.kind {
            JumpKind::Additive => m + self.gamma_hat,
            JumpKind::Depression => 1.0 - self.upsilon + self.upsilon * m,
        }
    }

    #[inline]
    pub fn inverse(&self, m: f64) -> f64 {
        match self.kind {
            JumpKind::Additive => m - self.gamma_hat,
            JumpKind::Depression => (m - 1.0 + self.upsilon) / self.upsilon,
        }
    }

    /// `gamma'(m)`; both presets are affine.
    #[inline]
    pub fn derivative(&self, _m: f64) -> f64 {
        match self.kind {
            JumpKind::Additive => 1.0,
            JumpKind::Depression => self.upsilon,
        }
    }

    /// `|(gamma^{-1})'(m)|`.
    #[inline]
    pub fn inverse_derivative(&self, m: f64) -> f64 {
        1.0 / self.derivative(self.inverse(m))
    }

    /// `gamma(0)`, the lower edge of the post-spike memory support.
    pub fn at_zero(&self) -> f64 {
        self.apply(0.0)
    }

    /// Lower bound `C_gamma` on `gamma'`.
    pub fn c_gamma(&self) -> f64 {
        self.derivative(0.0)
    }

    /// `sup |Gamma|` where `Gamma(m) = gamma(m) - m`.
    pub fn jump_sup(&self) -> f64 {
        match self.kind {
            JumpKind::Additive => self.gamma_hat,
            // Gamma(m) = (1 - upsilon)(1 - m) is maximal as m -> 0.
            JumpKind::Depression => 1.0 - self.upsilon,
        }
    }

    pub(crate) fn validate(&self) -> Result<()> {
        match self.kind {
            JumpKind::Additive => {
                if !self.gamma_hat.is_finite() || self.gamma_hat < 0.0 {
                    return Err(Error::config(
                        "jump.gamma_hat",
                        "jump size must be non-negative (Gamma > 0 is required)",
                    ));
                }
            }
            JumpKind::Depression => {
                if !(self.upsilon > 0.0 && self.upsilon < 1.0) {
                    return Err(Error::config("jump.upsilon", "must lie in (0, 1)"));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelKind {
    /// `h(t) = C_h exp(-decay t)`.
    Exponential,
    /// `h(t, m) = C_h exp(-decay t) (1 - m)`.
    Depression,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InteractionKernel {
    pub kind: KernelKind,
    pub amplitude: f64,
    pub decay: f64,
}

impl InteractionKernel {
    pub fn exponential(amplitude: f64, decay: f64) -> Self {
        InteractionKernel {
            kind: KernelKind::Exponential,
            amplitude,
            decay,
        }
    }

    pub fn depression(amplitude: f64, decay: f64) -> Self {
        InteractionKernel {
            kind: KernelKind::Depression,
            amplitude,
            decay,
        }
    }

    /// Memory weight `kappa(m)` applied to each spike.
    #[inline]
    pub fn weight(&self, m: f64) -> f64 {
        match self.kind {
            KernelKind::Exponential => 1.0,
            KernelKind::Depression => 1.0 - m,
        }
    }

    pub fn eval(&self, t: f64, m: f64) -> f64 {
        self.amplitude * (-self.decay * t).exp() * self.weight(m)
    }

    /// Time integral `int_0^inf hhat(t) dt = C_h / decay`.
    pub fn integral(&self) -> f64 {
        self.amplitude / self.decay
    }

    /// `hbar(a, m) = int_0^inf h(t, a, m) dt`.
    pub fn hbar(&self, m: f64) -> f64 {
        self.integral() * self.weight(m)
    }

    /// `sup |hbar|` over the memory domain `(0, m_max]`.
    pub fn hbar_sup(&self) -> f64 {
        self.integral().abs()
    }

    /// Advances the potential over one step given the kernel-weighted spike
    /// mass `drive` (spikes per neuron, weighted by `kappa`) emitted in the
    /// step. The emission is taken uniform within the step, so the update is
    /// exact for a constant flux.
    #[inline]
    pub fn advance(&self, x: f64, drive: f64, dt: f64) -> f64 {
        let decay = (-self.decay * dt).exp();
        let gain = if self.decay * dt > 1e-12 {
            (1.0 - decay) / (self.decay * dt)
        } else {
            1.0
        };
        decay * x + self.amplitude * gain * drive
    }

    pub(crate) fn validate(&self) -> Result<()> {
        if !self.amplitude.is_finite() || self.amplitude < 0.0 {
            return Err(Error::config(
                "kernel.amplitude",
                "must be finite and non-negative",
            ));
        }
        if !(self.decay.is_finite() && self.decay > 0.0) {
            return Err(Error::config("kernel.decay", "must be positive"));
        }
        Ok(())
    }
}

/// A complete population model.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub lambda: f64,
    pub epsilon: f64,
    pub firing: FiringRate,
    pub jump: JumpMap,
    pub kernel: InteractionKernel,
    /// Upper end of the memory domain `(0, m_max]`.
    pub m_max: f64,
    pub tail_tolerance: f64,
}

/// Upper bound on the memory of a neuron started below `m_start`, for the
/// additive jump map. Two independent bounds are combined:
///
/// * with an absolute refractory period, consecutive jumps are at least
///   `delta_abs` apart, so `m` never exceeds `gamma_hat / (1 - exp(-lambda delta_abs))`;
/// * the exponential Lyapunov function `exp(m / gamma_hat)` has drift
///   `<= exp(m/gamma_hat) ((e-1) f_max - lambda m / gamma_hat)`, which bounds the
///   stationary tail by `2 exp((M0 - M) / gamma_hat)` with
///   `M0 = 2 (e-1) f_max gamma_hat / lambda`.
pub fn additive_memory_bound(
    lambda: f64,
    gamma_hat: f64,
    f_max: f64,
    delta_abs: f64,
    tail_tolerance: f64,
    m_start: f64,
) -> f64 {
    if gamma_hat == 0.0 {
        return m_start.max(1.0);
    }
    let drift_bound = 2.0 * (std::f64::consts::E - 1.0) * f_max * gamma_hat / lambda
        + gamma_hat * (2.0 / tail_tolerance).ln();
    let refractory_bound = if delta_abs > 0.0 {
        gamma_hat / (-(-lambda * delta_abs).exp_m1())
    } else {
        f64::INFINITY
    };
    drift_bound.min(refractory_bound).max(m_start)
}

impl ModelSpec {
    /// Assembles and validates a model; `m_max` is derived from the tail
    /// tolerance unless given.
    pub fn new(
        lambda: f64,
        epsilon: f64,
        firing: FiringRate,
        jump: JumpMap,
        kernel: InteractionKernel,
        m_max: Option<f64>,
    ) -> Result<Self> {
        let mut spec = ModelSpec {
            lambda,
            epsilon,
            firing,
            jump,
            kernel,
            m_max: 1.0,
            tail_tolerance: DEFAULT_TAIL_TOLERANCE,
        };
        spec.m_max = match m_max {
            Some(m) => m,
            None => spec.default_m_max(),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub(crate) fn default_m_max(&self) -> f64 {
        match self.jump.kind {
            JumpKind::Depression => 1.0,
            JumpKind::Additive => additive_memory_bound(
                self.lambda,
                self.jump.gamma_hat,
                self.firing.sup(),
                self.firing.delta_abs,
                self.tail_tolerance,
                1.0,
            ),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda.is_finite() && self.lambda > 0.0) {
            return Err(Error::config("model.lambda", "decay rate must be positive"));
        }
        if !self.epsilon.is_finite() {
            return Err(Error::config("model.epsilon", "must be finite"));
        }
        if !(self.tail_tolerance > 0.0 && self.tail_tolerance < 1.0) {
            return Err(Error::config("model.tail_tolerance", "must lie in (0, 1)"));
        }
        self.firing.validate()?;
        self.jump.validate()?;
        self.kernel.validate()?;
        if !(self.m_max.is_finite() && self.m_max > 0.0) {
            return Err(Error::config("model.m_max", "must be positive"));
        }
        if self.jump.kind == JumpKind::Depression && (self.m_max - 1.0).abs() > 1e-12 {
            return Err(Error::config(
                "model.m_max",
                "the depression jump map lives on (0, 1]; m_max must be 1",
            ));
        }
        if self.jump.kind == JumpKind::Additive && self.m_max <= self.jump.at_zero() {
            return Err(Error::config("model.m_max", "must exceed gamma(0)"));
        }
        if self.kernel.kind == KernelKind::Depression && self.jump.kind != JumpKind::Depression {
            return Err(Error::config(
                "kernel.kind",
                "the (1 - m) kernel requires the depression jump map",
            ));
        }
        Ok(())
    }

    /// Human-readable outcome of the standing assumptions on this model.
    pub fn assumption_report(&self) -> Vec<String> {
        let f = &self.firing;
        let mut notes = vec![format!(
            "bounded and Lipschitz rate: sup f = {}, L_f = {} (away from a = delta_abs)",
            f.sup(),
            f.lipschitz()
        )];
        if self.jump.jump_sup() > 0.0 {
            notes.push(format!(
                "bounded jumps: sup Gamma = {}",
                self.jump.jump_sup()
            ));
        } else {
            notes.push("degenerate jumps: Gamma = 0, memory is inert".to_string());
        }
        if f.floor() > 0.0 {
            notes.push(format!(
                "rate floor: f >= {} for a >= delta_abs = {}",
                f.floor(),
                f.delta_abs
            ));
        } else {
            notes.push("rate floor violated: sigma = 0".to_string());
        }
        notes.push(format!(
            "jump slope: C_gamma = {} <= gamma' <= 1",
            self.jump.c_gamma()
        ));
        notes.push(format!("hbar bounded by {}", self.kernel.hbar_sup()));
        match self.jump.kind {
            JumpKind::Depression => {
                notes.push("compact memory: gamma(m) < G = 1 satisfied".to_string())
            }
            JumpKind::Additive => notes.push(format!(
                "compact memory not satisfied; memory truncated at m_max = {} (tail tolerance {})",
                self.m_max, self.tail_tolerance
            )),
        }
        notes.push(format!(
            "exponential kernel: h <= {} exp(-{} t)",
            self.kernel.amplitude, self.kernel.decay
        ));
        notes
    }

    /// Unchecked `f(a, m, x)`.
    #[inline]
    pub fn rate(&self, a: f64, m: f64, x: f64) -> f64 {
        self.firing.eval(a, m, x)
    }

    fn check_state(&self, a: f64, m: f64) -> Result<()> {
        if !(a >= 0.0) || !a.is_finite() {
            return Err(Error::input(format!(
                "age must be finite and non-negative, got {a}"
            )));
        }
        if !(m > 0.0 && m <= self.m_max) {
            return Err(Error::input(format!(
                "memory {m} outside the domain (0, {}]",
                self.m_max
            )));
        }
        Ok(())
    }

    /// `f(a, m, x)` with `x` already multiplied by the coupling.
    pub fn evaluate_rate(&self, a: f64, m: f64, x: f64) -> Result<f64> {
        self.check_state(a, m)?;
        if !x.is_finite() {
            return Err(Error::input("potential must be finite"));
        }
        Ok(self.rate(a, m, x))
    }

    /// `gamma(m)`.
    pub fn apply_jump(&self, m: f64) -> Result<f64> {
        if !(m > 0.0 && m <= self.m_max) {
            return Err(Error::input(format!(
                "memory {m} outside the domain (0, {}]",
                self.m_max
            )));
        }
        Ok(self.jump.apply(m))
    }

    /// Constants `(alpha, b)` of the drift condition `L* w <= -alpha w + b`
    /// for `w = 1 + m`.
    pub fn lyapunov_constants(&self) -> Result<(f64, f64)> {
        let jump = self.jump.jump_sup();
        if !jump.is_finite() {
            return Err(Error::Unsupported("jump sizes must be bounded".into()));
        }
        Ok((self.lambda, self.lambda + jump * self.firing.sup()))
    }

    /// `L* w(a, m)` for `w = 1 + m` at input `x`.
    pub fn generator_on_weight(&self, a: f64, m: f64, x: f64) -> f64 {
        -self.lambda * m + (self.jump.apply(m) - m) * self.rate(a, m, x)
    }

    /// Copy of this model with another coupling strength.
    pub fn with_epsilon(&self, epsilon: f64) -> Self {
        ModelSpec {
            epsilon,
            ..self.clone()
        }
    }

    /// Upper bound on any achievable stationary potential, `sup hbar * sup f`.
    pub fn potential_bound(&self) -> f64 {
        self.kernel.hbar_sup() * self.firing.sup()
    }
}

/// Built-in model presets.
pub mod presets {
    use super::*;

    /// Coupling at which the adaptive SRM0 preset produces self-sustained
    /// population bursts.
    pub const ASRM0_BURST_EPSILON: f64 = 1.0;
    /// Coupling at which the time-elapsed preset oscillates.
    pub const TIME_ELAPSED_OSCILLATION_EPSILON: f64 = 1.3;

    /// Adaptive SRM0 neurons with additive adaptation jumps.
    pub fn asrm0() -> ModelSpec {
        let firing = FiringRate {
            kind: FiringKind::Asrm0,
            f_max: 20.0,
            beta: 2.0,
            sigma_floor: 0.5,
            delta_abs: 0.1,
            eta_amplitude: 2.0,
            eta_tau: 0.2,
            table_ages: Vec::new(),
            table_rates: Vec::new(),
        };
        ModelSpec::new(
            1.0,
            0.05,
            firing,
            JumpMap::additive(1.0),
            InteractionKernel::exponential(5.0, 5.0),
            None,
        )
        .expect("asrm0 preset is valid")
    }

    /// Renewal neurons with depressing synapses.
    pub fn depression() -> ModelSpec {
        let firing = FiringRate {
            kind: FiringKind::Renewal,
            f_max: 10.0,
            beta: 1.0,
            sigma_floor: 0.5,
            delta_abs: 0.05,
            eta_amplitude: 2.0,
            eta_tau: 0.2,
            table_ages: Vec::new(),
            table_rates: Vec::new(),
        };
        ModelSpec::new(
            1.0,
            0.05,
            firing,
            JumpMap::depression(0.5),
            InteractionKernel::depression(1.0, 1.0),
            None,
        )
        .expect("depression preset is valid")
    }

    /// Time-elapsed model: no memory jumps, memory-independent rate.
    pub fn time_elapsed() -> ModelSpec {
        let firing = FiringRate {
            kind: FiringKind::Renewal,
            f_max: 20.0,
            beta: 10.0,
            sigma_floor: 0.2,
            delta_abs: 0.1,
            eta_amplitude: 10.0,
            eta_tau: 1.0,
            table_ages: Vec::new(),
            table_rates: Vec::new(),
        };
        ModelSpec::new(
            1.0,
            0.05,
            firing,
            JumpMap::additive(0.0),
            InteractionKernel::exponential(10.0, 10.0),
            None,
        )
        .expect("time-elapsed preset is valid")
    }

    /// Constant hazard `rate` with the given jump map and an exponential
    /// kernel with unit time integral.
    pub fn constant_rate(rate: f64, jump: JumpMap) -> ModelSpec {
        let kernel = match jump.kind {
            JumpKind::Depression => InteractionKernel::depression(1.0, 1.0),
            JumpKind::Additive => InteractionKernel::exponential(1.0, 1.0),
        };
        ModelSpec::new(1.0, 0.0, FiringRate::constant(rate), jump, kernel, None)
            .expect("constant-rate preset is valid")
    }
}
