//! Oja's streaming iteration and its step-size schedules.

use crate::error::{invalid, Error, Result};
use crate::metrics::UnitVector;
use crate::model::{Dataset, ModelParams};
use crate::rng::{derived_rng, purpose, Rng};
use crate::Vector;

/// Step size for iteration `t` (1-based).
pub trait StepSize {
    fn eta(&self, t: usize) -> f64;
}

/// `eta_t = alpha / (gap (xi + t))` with `alpha > 1/2` and `gap > 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LearningRateSchedule {
    alpha: f64,
    xi: f64,
    gap: f64,
}

impl LearningRateSchedule {
    pub fn new(alpha: f64, xi: f64, gap: f64) -> Result<Self> {
        if !(alpha > 0.5 && alpha.is_finite()) {
            return Err(Error::OutOfRange {
                name: "alpha",
                value: alpha,
                reason: "must exceed 1/2",
            });
        }
        if !(xi >= 0.0 && xi.is_finite()) {
            return Err(Error::OutOfRange {
                name: "xi",
                value: xi,
                reason: "must be finite and nonnegative",
            });
        }
        if !(gap > 0.0 && gap.is_finite()) {
            return Err(Error::OutOfRange {
                name: "gap",
                value: gap,
                reason: "spectral gap must be positive",
            });
        }
        Ok(Self { alpha, xi, gap })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn xi(&self) -> f64 {
        self.xi
    }

    pub fn gap(&self) -> f64 {
        self.gap
    }
}

impl StepSize for LearningRateSchedule {
    fn eta(&self, t: usize) -> f64 {
        self.alpha / (self.gap * (self.xi + t as f64))
    }
}

/// The step-size rules used across the crate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepRule {
    Schedule(LearningRateSchedule),
    /// `eta_t = c1 / (c2 + t)`, the family searched by the learning-rate tuner.
    InverseTime { c1: f64, c2: f64 },
    Constant(f64),
}

impl StepSize for StepRule {
    fn eta(&self, t: usize) -> f64 {
        match self {
            StepRule::Schedule(s) => s.eta(t),
            StepRule::InverseTime { c1, c2 } => c1 / (c2 + t as f64),
            StepRule::Constant(eta) => *eta,
        }
    }
}

impl From<LearningRateSchedule> for StepRule {
    fn from(s: LearningRateSchedule) -> Self {
        StepRule::Schedule(s)
    }
}

/// Default step-size multiplier `alpha = ln n`.
pub fn default_alpha(n: usize) -> f64 {
    (n.max(2) as f64).ln().max(0.5 + f64::EPSILON)
}

/// Default failure probability.
pub const DEFAULT_ZETA: f64 = 0.01;

/// Offset that makes the non-private error bound hold:
/// `20 max(kappa M alpha, kappa^2 (V + 1) alpha^2 / ln(1 + zeta / 100))`.
pub fn oja_xi(params: &ModelParams, alpha: f64, zeta: f64) -> Result<f64> {
    if !params.has_gap() {
        return Err(invalid("no spectral gap: kappa is infinite"));
    }
    if !(alpha > 0.5) {
        return Err(Error::OutOfRange {
            name: "alpha",
            value: alpha,
            reason: "must exceed 1/2",
        });
    }
    check_zeta(zeta)?;
    Ok(xi_formula(
        params.kappa,
        params.m_bound,
        params.v_bound,
        alpha,
        (1.0 + zeta / 100.0).ln(),
    ))
}

fn xi_formula(kappa: f64, m: f64, v: f64, alpha: f64, log_term: f64) -> f64 {
    20.0 * f64::max(kappa * m * alpha, kappa * kappa * (v + 1.0) * alpha * alpha / log_term)
}

pub(crate) fn check_zeta(zeta: f64) -> Result<()> {
    if !(zeta > 0.0 && zeta < 1.0) {
        return Err(Error::OutOfRange {
            name: "zeta",
            value: zeta,
            reason: "failure probability must lie in (0, 1)",
        });
    }
    Ok(())
}

/// Starting point drawn uniformly from the sphere. Every algorithm in the
/// crate derives `w_0` this way, so equal seeds give equal starts.
pub fn initial_iterate(dim: usize, seed: u64) -> (UnitVector, Rng) {
    let mut rng = derived_rng(seed, &[purpose::INIT]);
    let w = UnitVector::random(dim, &mut rng);
    (w, rng)
}

/// Normalizes `w_prime`; a zero vector restarts from a fresh uniform draw.
pub(crate) fn renormalize(w_prime: Vector, t: usize, restart: &mut Rng) -> UnitVector {
    let dim = w_prime.len();
    UnitVector::new(w_prime).unwrap_or_else(|_| {
        log::warn!("iterate vanished at step {t}; restarting from a fresh random direction");
        UnitVector::random(dim, restart)
    })
}

/// Single pass of Oja's iteration:
/// `w <- normalize(w + eta_t A_t w)` for `t = 1..n`, from a uniform `w_0`.
pub fn run_oja(dataset: &Dataset, steps: &impl StepSize, seed: u64) -> Result<UnitVector> {
    if dataset.is_empty() {
        return Err(invalid("dataset is empty"));
    }
    let d = dataset.dim();
    let (mut w, mut restart) = initial_iterate(d, seed);
    for (i, sample) in dataset.samples().iter().enumerate() {
        let t = i + 1;
        let eta = steps.eta(t);
        let mut next = sample.apply(&w);
        next *= eta;
        next += &*w;
        w = renormalize(next, t, &mut restart);
    }
    Ok(w)
}
