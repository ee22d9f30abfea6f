//! Dynamical-system families and their integrators.
//!
//! Two stochastic families share the parameter vector `(d, kappa, a)`:
//! the double-well system with drift `4(x - a)(d^2 - x^2)` and the
//! multi-well system whose potential adds `cos(4 pi x) / 2`. Both are
//! integrated with Euler–Maruyama using per-step noise `kappa * sqrt(2 dt)`,
//! which makes `exp(-u(x) / kappa^2)` their stationary density.
//!
//! The deterministic pulse-driven system is integrated with classical RK4.

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::rng_from_seed;

/// Magnitude of the rectangular input pulse.
pub const PULSE_MAGNITUDE: f64 = 0.1;

/// Parameters `(d, kappa, a)` of a double- or multi-well system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SdwParams {
    /// Well location.
    pub d: f64,
    /// Dynamical noise standard deviation.
    pub kappa: f64,
    /// Well asymmetry.
    pub a: f64,
}

impl SdwParams {
    pub fn new(d: f64, kappa: f64, a: f64) -> Result<Self> {
        let p = SdwParams { d, kappa, a };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.d > 0.0 && self.d.is_finite()) {
            return Err(Error::invalid(format!("well location d must be > 0, got {}", self.d)));
        }
        if !(self.kappa > 0.0 && self.kappa.is_finite()) {
            return Err(Error::invalid(format!("kappa must be > 0, got {}", self.kappa)));
        }
        if !self.a.is_finite() {
            return Err(Error::invalid("asymmetry a must be finite"));
        }
        Ok(())
    }

    /// Build from a `[d, kappa, a]` slice.
    pub fn from_slice(v: &[f64]) -> Result<Self> {
        match v {
            [d, kappa, a] => SdwParams::new(*d, *kappa, *a),
            _ => Err(Error::invalid(format!(
                "double-well parameters need 3 values, got {}",
                v.len()
            ))),
        }
    }

    pub fn to_vec(self) -> Vec<f64> {
        vec![self.d, self.kappa, self.a]
    }
}

pub fn double_well_drift(x: f64, p: &SdwParams) -> f64 {
    4.0 * (x - p.a) * (p.d * p.d - x * x)
}

pub fn double_well_potential(x: f64, p: &SdwParams) -> f64 {
    let d2 = p.d * p.d;
    let x2 = x * x;
    x2 * x2 - (4.0 / 3.0) * p.a * x2 * x - 2.0 * d2 * x2 + 4.0 * p.a * d2 * x
}

pub fn multi_well_potential(x: f64, p: &SdwParams) -> f64 {
    double_well_potential(x, p) + 0.5 * (4.0 * std::f64::consts::PI * x).cos()
}

pub fn multi_well_drift(x: f64, p: &SdwParams) -> f64 {
    use std::f64::consts::PI;
    double_well_drift(x, p) + 2.0 * PI * (4.0 * PI * x).sin()
}

/// Which potential generates the dynamics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum WellFamily {
    #[default]
    DoubleWell,
    MultiWell,
}

impl WellFamily {
    #[inline]
    pub fn drift(self, x: f64, p: &SdwParams) -> f64 {
        match self {
            WellFamily::DoubleWell => double_well_drift(x, p),
            WellFamily::MultiWell => multi_well_drift(x, p),
        }
    }

    #[inline]
    pub fn potential(self, x: f64, p: &SdwParams) -> f64 {
        match self {
            WellFamily::DoubleWell => double_well_potential(x, p),
            WellFamily::MultiWell => multi_well_potential(x, p),
        }
    }
}

/// Stationary density `exp(-u(x) / kappa^2)` on `xs`, normalised so its
/// trapezoidal integral over `xs` is one.
pub fn equilibrium_density<U>(xs: &[f64], p: &SdwParams, potential: U) -> Result<Vec<f64>>
where
    U: Fn(f64, &SdwParams) -> f64,
{
    if xs.len() < 8 {
        return Err(Error::invalid(format!(
            "equilibrium grid needs at least 8 points, got {}",
            xs.len()
        )));
    }
    if xs.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::invalid("equilibrium grid must be strictly increasing"));
    }
    let k2 = p.kappa * p.kappa;
    let energy: Vec<f64> = xs.iter().map(|&x| potential(x, p) / k2).collect();
    let min = energy.iter().copied().fold(f64::INFINITY, f64::min);
    let mut density: Vec<f64> = energy.iter().map(|e| (min - e).exp()).collect();
    let mass = trapezoid(xs, &density);
    if !(mass > 0.0 && mass.is_finite()) {
        return Err(Error::Numerical("equilibrium density has no mass".into()));
    }
    density.iter_mut().for_each(|v| *v /= mass);
    Ok(density)
}

pub(crate) fn trapezoid(xs: &[f64], ys: &[f64]) -> f64 {
    xs.windows(2)
        .zip(ys.windows(2))
        .map(|(x, y)| 0.5 * (x[1] - x[0]) * (y[0] + y[1]))
        .sum()
}

/// Inverse-CDF sampler for the stationary density of a well system.
#[derive(Debug, Clone)]
pub struct EquilibriumSampler {
    xs: Vec<f64>,
    cdf: Vec<f64>,
}

impl EquilibriumSampler {
    pub const GRID_POINTS: usize = 2048;

    /// The support starts at `[-2d-1, 2d+1]` and is widened until the
    /// density at both ends has fallen by at least `exp(-40)`.
    pub fn new(p: &SdwParams, family: WellFamily) -> Result<Self> {
        p.validate()?;
        let k2 = p.kappa * p.kappa;
        let mut half = 2.0 * p.d + 1.0;
        let mut xs = Vec::new();
        for _ in 0..64 {
            xs = linspace(-half, half, Self::GRID_POINTS);
            let umin = xs
                .iter()
                .map(|&x| family.potential(x, p))
                .fold(f64::INFINITY, f64::min);
            let lo = family.potential(-half, p);
            let hi = family.potential(half, p);
            if (lo - umin) / k2 >= 40.0 && (hi - umin) / k2 >= 40.0 {
                break;
            }
            half *= 1.25;
        }
        let density = equilibrium_density(&xs, p, |x, q| family.potential(x, q))?;
        let mut cdf = Vec::with_capacity(xs.len());
        let mut acc = 0.0;
        cdf.push(0.0);
        for i in 1..xs.len() {
            acc += 0.5 * (xs[i] - xs[i - 1]) * (density[i] + density[i - 1]);
            cdf.push(acc);
        }
        let total = acc;
        cdf.iter_mut().for_each(|c| *c /= total);
        Ok(EquilibriumSampler { xs, cdf })
    }

    /// Map a uniform variate in `[0, 1)` to a state.
    pub fn quantile(&self, u: f64) -> f64 {
        let i = self.cdf.partition_point(|&c| c <= u).clamp(1, self.cdf.len() - 1);
        let (c0, c1) = (self.cdf[i - 1], self.cdf[i]);
        let frac = if c1 > c0 { (u - c0) / (c1 - c0) } else { 0.5 };
        self.xs[i - 1] + frac.clamp(0.0, 1.0) * (self.xs[i] - self.xs[i - 1])
    }

    pub fn sample<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.quantile(rng.random::<f64>())
    }

    pub fn support(&self) -> (f64, f64) {
        (self.xs[0], self.xs[self.xs.len() - 1])
    }
}

pub(crate) fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let step = (hi - lo) / (n - 1) as f64;
    (0..n).map(|i| lo + step * i as f64).collect()
}

/// A uniformly sampled one-dimensional path.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub t0: f64,
    pub dt: f64,
    pub states: Vec<f64>,
}

impl Trajectory {
    pub fn t_end(&self) -> f64 {
        self.t0 + self.dt * (self.states.len() - 1) as f64
    }

    pub fn time(&self, i: usize) -> f64 {
        self.t0 + self.dt * i as f64
    }

    /// Linearly interpolated state at `t`; `None` outside the span.
    pub fn value_at(&self, t: f64) -> Option<f64> {
        let last = self.states.len() - 1;
        let pos = (t - self.t0) / self.dt;
        // half-ulp slack for times that land on the final step
        if !(pos >= -1e-9 && pos <= last as f64 + 1e-9) {
            return None;
        }
        let pos = pos.clamp(0.0, last as f64);
        let i = (pos.floor() as usize).min(last.saturating_sub(1));
        if last == 0 {
            return Some(self.states[0]);
        }
        let frac = pos - i as f64;
        Some(self.states[i] + frac * (self.states[i + 1] - self.states[i]))
    }
}

fn step_count(dt: f64, t_end: f64) -> Result<usize> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::invalid(format!("step size must be > 0, got {dt}")));
    }
    if !(t_end >= dt) {
        return Err(Error::invalid(format!("t_end ({t_end}) must be at least dt ({dt})")));
    }
    Ok((t_end / dt).round() as usize)
}

/// Standard deviation of one Euler–Maruyama noise increment of length `dt`.
pub fn noise_scale(kappa: f64, dt: f64) -> f64 {
    kappa * (2.0 * dt).sqrt()
}

/// Euler–Maruyama path of `dx = drift(x) dt + sqrt(2) kappa dW` on `[0, t_end]`.
pub fn simulate_sde<F>(drift: F, kappa: f64, x0: f64, dt: f64, t_end: f64, seed: u64) -> Result<Trajectory>
where
    F: Fn(f64) -> f64,
{
    let n = step_count(dt, t_end)?;
    if !(kappa >= 0.0) {
        return Err(Error::invalid(format!("kappa must be >= 0, got {kappa}")));
    }
    let mut rng = rng_from_seed(seed);
    let scale = noise_scale(kappa, dt);
    let mut states = Vec::with_capacity(n + 1);
    let mut x = x0;
    states.push(x);
    for step in 1..=n {
        let xi: f64 = StandardNormal.sample(&mut rng);
        x = x + drift(x) * dt + scale * xi;
        if !x.is_finite() {
            return Err(Error::NonFinite { step, time: step as f64 * dt });
        }
        states.push(x);
    }
    Ok(Trajectory { t0: 0.0, dt, states })
}

/// Parameters of the rectangular pulse input.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PulseParams {
    /// Pulse frequency.
    pub f: f64,
    /// Pulse duration.
    pub t_p: f64,
    pub p_mag: f64,
}

impl PulseParams {
    pub fn new(f: f64, t_p: f64) -> Result<Self> {
        if !(f > 0.0 && f.is_finite()) {
            return Err(Error::invalid(format!("pulse frequency must be > 0, got {f}")));
        }
        if !(t_p > 0.0 && t_p < 1.0 / f) {
            return Err(Error::invalid(format!(
                "pulse duration must lie in (0, 1/f) = (0, {}), got {t_p}",
                1.0 / f
            )));
        }
        Ok(PulseParams { f, t_p, p_mag: PULSE_MAGNITUDE })
    }

    pub fn from_slice(v: &[f64]) -> Result<Self> {
        match v {
            [f, t_p] => PulseParams::new(*f, *t_p),
            _ => Err(Error::invalid(format!("pulse parameters need 2 values, got {}", v.len()))),
        }
    }

    /// Heaviside convention H(0) = 1, so a pulse is on for phase in `[0, t_p)`.
    pub fn is_on(&self, t: f64) -> bool {
        (t.rem_euclid(1.0 / self.f)) < self.t_p
    }
}

pub fn pulse_drift(x: f64, t: f64, p: &PulseParams) -> f64 {
    if p.is_on(t) {
        -x + p.p_mag
    } else {
        -x
    }
}

/// Classical fourth-order Runge–Kutta path of `dx/dt = drift(x, t)` on `[0, t_end]`.
pub fn simulate_ode<F>(drift: F, x0: f64, dt: f64, t_end: f64) -> Result<Trajectory>
where
    F: Fn(f64, f64) -> f64,
{
    let n = step_count(dt, t_end)?;
    let mut states = Vec::with_capacity(n + 1);
    let mut x = x0;
    states.push(x);
    for step in 1..=n {
        let t = (step - 1) as f64 * dt;
        let k1 = drift(x, t);
        let k2 = drift(x + 0.5 * dt * k1, t + 0.5 * dt);
        let k3 = drift(x + 0.5 * dt * k2, t + 0.5 * dt);
        let k4 = drift(x + dt * k3, t + dt);
        x += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        if !x.is_finite() {
            return Err(Error::NonFinite { step, time: step as f64 * dt });
        }
        states.push(x);
    }
    Ok(Trajectory { t0: 0.0, dt, states })
}
