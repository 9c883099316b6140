//! Oja's iteration with per-gradient clipping and Gaussian noise, in a
//! per-sample form accounted by amplification by shuffling and a minibatch
//! form accounted by serial composition.

use rand::seq::SliceRandom;

use crate::error::{invalid, Error, Result};
use crate::metrics::UnitVector;
use crate::model::Dataset;
use crate::oja::{check_zeta, initial_iterate, renormalize, StepSize};
use crate::privacy::{gaussian_sigma, shuffle_amplified_epsilon, PrivacyBudget};
use crate::rng::{derived_rng, purpose, standard_normal_vector};
use crate::Vector;

/// Constant in the clipping threshold.
pub const CLIP_CONSTANT: f64 = 1.0;
/// Constant in the shuffled noise multiplier.
pub const NOISE_CONSTANT: f64 = 1.0;

/// Clipping threshold `beta` and noise multiplier `alpha`; each step adds
/// `2 eta beta alpha z` with `z ~ N(0, I)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClipConfig {
    beta: f64,
    noise_multiplier: f64,
}

impl ClipConfig {
    pub fn new(beta: f64, noise_multiplier: f64) -> Result<Self> {
        if !(beta > 0.0) {
            return Err(Error::OutOfRange {
                name: "beta",
                value: beta,
                reason: "clipping threshold must be positive",
            });
        }
        if !(noise_multiplier >= 0.0 && noise_multiplier.is_finite()) {
            return Err(Error::OutOfRange {
                name: "noise_multiplier",
                value: noise_multiplier,
                reason: "must be finite and nonnegative",
            });
        }
        Ok(Self {
            beta,
            noise_multiplier,
        })
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn noise_multiplier(&self) -> f64 {
        self.noise_multiplier
    }
}

/// `x min(1, beta / |x|)`.
pub fn clip(x: &Vector, beta: f64) -> Vector {
    let norm = x.norm();
    if norm <= beta {
        x.clone()
    } else {
        x * (beta / norm)
    }
}

/// `beta = C lambda1 sqrt(d) (K gamma ln^a(n d / zeta) + 1)`: with high
/// probability no gradient `A_t w` exceeds it.
pub fn clipping_threshold(
    lambda1: f64,
    dim: usize,
    k_tail: f64,
    gamma: f64,
    a_tail: f64,
    n: usize,
    zeta: f64,
) -> Result<f64> {
    check_zeta(zeta)?;
    if !(lambda1 > 0.0) || dim == 0 || n == 0 {
        return Err(invalid("lambda1, dimension and n must be positive"));
    }
    let log_term = ((n as f64) * (dim as f64) / zeta).ln().powf(a_tail);
    Ok(CLIP_CONSTANT * lambda1 * (dim as f64).sqrt() * (k_tail * gamma * log_term + 1.0))
}

/// Noise multiplier for the shuffled per-sample iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseMultiplier {
    pub alpha: f64,
    /// Whether epsilon lies in the range `epsilon <= sqrt(ln(n / delta) / n)`
    /// where the shuffling argument applies.
    pub regime_valid: bool,
}

/// `alpha = C' ln(n / delta) / (epsilon sqrt(n))`.
pub fn noise_multiplier(n: usize, budget: PrivacyBudget) -> Result<NoiseMultiplier> {
    if n == 0 {
        return Err(invalid("n must be at least 1"));
    }
    let nf = n as f64;
    let log_term = (nf / budget.delta()).ln();
    Ok(NoiseMultiplier {
        alpha: NOISE_CONSTANT * log_term / (budget.epsilon() * nf.sqrt()),
        regime_valid: budget.epsilon() <= (log_term / nf).sqrt(),
    })
}

/// Summary of a [`run_private_oja`] run.
#[derive(Debug, Clone, PartialEq)]
pub struct PrivateOjaReport {
    /// Steps where `|A_t w| > beta`.
    pub clipped_steps: usize,
    pub regime_valid: bool,
    /// Whether the configured multiplier is at least the calibrated one.
    pub noise_calibrated: bool,
    /// Epsilon of one noisy step viewed as a local randomizer.
    pub local_epsilon: f64,
    /// Central epsilon after shuffling, when the amplification bound applies.
    pub amplified_epsilon: Option<f64>,
}

/// Uniform permutation of `0..n` (Fisher-Yates) from the shuffle stream of `seed`.
pub fn shuffle_order(n: usize, seed: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut derived_rng(seed, &[purpose::SHUFFLE]));
    order
}

/// Per-sample private Oja: shuffle, then for each sample
/// `w <- normalize(w + eta_t clip(A_t w) + 2 eta_t beta alpha z_t)`.
pub fn run_private_oja(
    dataset: &Dataset,
    budget: PrivacyBudget,
    steps: &impl StepSize,
    clip_cfg: ClipConfig,
    seed: u64,
) -> Result<(UnitVector, PrivateOjaReport)> {
    if dataset.is_empty() {
        return Err(invalid("dataset is empty"));
    }
    let n = dataset.len();
    let d = dataset.dim();
    let calibrated = noise_multiplier(n, budget)?;
    let order = shuffle_order(n, seed);
    let (mut w, mut restart) = initial_iterate(d, seed);
    let mut noise_rng = derived_rng(seed, &[purpose::NOISE]);
    let beta = clip_cfg.beta;
    let alpha = clip_cfg.noise_multiplier;
    let mut clipped_steps = 0;
    for (i, &idx) in order.iter().enumerate() {
        let t = i + 1;
        let eta = steps.eta(t);
        let g = dataset.samples()[idx].apply(&w);
        if g.norm() > beta {
            clipped_steps += 1;
        }
        let z = standard_normal_vector(&mut noise_rng, d);
        let next = &*w + clip(&g, beta) * eta + z * (2.0 * eta * beta * alpha);
        w = renormalize(next, t, &mut restart);
    }

    let delta_local = budget.delta() / (2.0 * n as f64);
    let local_epsilon = if alpha > 0.0 {
        (2.0 * (1.25 / delta_local).ln()).sqrt() / alpha
    } else {
        f64::INFINITY
    };
    let amplified_epsilon = shuffle_amplified_epsilon(local_epsilon, n, budget.delta() / 2.0).ok();
    Ok((
        w,
        PrivateOjaReport {
            clipped_steps,
            regime_valid: calibrated.regime_valid,
            noise_calibrated: alpha >= calibrated.alpha,
            local_epsilon,
            amplified_epsilon,
        },
    ))
}

/// Noise multiplier for `steps` minibatch updates: each update gets
/// `(epsilon / T, delta / T)` and serial composition gives the total.
pub fn minibatch_noise_multiplier(steps: usize, budget: PrivacyBudget) -> Result<f64> {
    gaussian_sigma(1.0, budget.split_evenly(steps)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MinibatchReport {
    pub batch_size: usize,
    /// Budget of each update under serial composition.
    pub per_step_budget: PrivacyBudget,
    pub steps: usize,
    pub clipped_gradients: usize,
}

/// Minibatch clipped Oja with `T` steps of batch size `B = floor(n / T)`:
/// `w <- normalize(w + (eta_t / B) sum clip(A_i w) + (2 eta_t beta alpha / B) z_t)`.
///
/// The noise level comes from `clip_cfg`, usually set with
/// [`minibatch_noise_multiplier`]; `budget` only feeds the report.
pub fn run_minibatch_clipped_oja(
    dataset: &Dataset,
    budget: PrivacyBudget,
    steps_count: usize,
    steps: &impl StepSize,
    clip_cfg: ClipConfig,
    seed: u64,
) -> Result<(UnitVector, MinibatchReport)> {
    let n = dataset.len();
    if steps_count == 0 || steps_count > n {
        return Err(invalid(format!(
            "number of steps {steps_count} must lie in 1..={n}"
        )));
    }
    let per_step_budget = budget.split_evenly(steps_count)?;
    let d = dataset.dim();
    let batch = n / steps_count;
    let (mut w, mut restart) = initial_iterate(d, seed);
    let mut noise_rng = derived_rng(seed, &[purpose::NOISE]);
    let beta = clip_cfg.beta;
    let alpha = clip_cfg.noise_multiplier;
    let mut clipped = 0;
    for t in 1..=steps_count {
        let eta = steps.eta(t);
        let mut sum = Vector::zeros(d);
        for sample in &dataset.samples()[(t - 1) * batch..t * batch] {
            let g = sample.apply(&w);
            if g.norm() > beta {
                clipped += 1;
            }
            sum += clip(&g, beta);
        }
        let z = standard_normal_vector(&mut noise_rng, d);
        let b = batch as f64;
        let next = &*w + sum * (eta / b) + z * (2.0 * eta * beta * alpha / b);
        w = renormalize(next, t, &mut restart);
    }
    Ok((
        w,
        MinibatchReport {
            batch_size: batch,
            per_step_budget,
            steps: steps_count,
            clipped_gradients: clipped,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::sin_distance;
    use crate::model::{sample_gaussian_dataset, SampleMatrix};
    use crate::oja::{run_oja, LearningRateSchedule, StepRule};
    use crate::Matrix;
    use proptest::prelude::*;

    fn diag(values: &[f64]) -> Matrix {
        Matrix::from_diagonal(&Vector::from_column_slice(values))
    }

    fn budget(e: f64, d: f64) -> PrivacyBudget {
        PrivacyBudget::new(e, d).unwrap()
    }

    #[test]
    fn clip_examples() {
        let x = Vector::from_column_slice(&[0.0, 3.0, 0.0]);
        assert_eq!(clip(&x, 1.0), &x / 3.0);
        let small = Vector::from_column_slice(&[0.3, 0.4]);
        assert_eq!(clip(&small, 1.0), small);
        assert_eq!(clip(&Vector::zeros(2), 1.0), Vector::zeros(2));
    }

    proptest! {
        #[test]
        fn clip_bounds_norm_and_is_idempotent(
            x in proptest::collection::vec(-50.0f64..50.0, 1..6),
            beta in 0.01f64..20.0,
        ) {
            let x = Vector::from_vec(x);
            let c = clip(&x, beta);
            prop_assert!(c.norm() <= beta * (1.0 + 1e-12));
            let cc = clip(&c, beta);
            prop_assert!((cc - &c).amax() <= 1e-12 * beta);
            if x.norm() > 0.0 {
                prop_assert!((c.dot(&x) - c.norm() * x.norm()).abs() <= 1e-9 * x.norm() * c.norm().max(1.0));
            }
        }
    }

    #[test]
    fn clipping_threshold_examples() {
        let base = clipping_threshold(1.0, 4, 4.0, 0.0, 1.0, 1000, 0.01).unwrap();
        assert_eq!(base, 2.0);
        let wide = clipping_threshold(1.0, 16, 4.0, 0.0, 1.0, 1000, 0.01).unwrap();
        assert_eq!(wide / base, 2.0);
        // ln(n d / zeta) = 10 with n = 1000, d = 4.
        let zeta = 4000.0 / 10f64.exp();
        let beta = clipping_threshold(1.0, 4, 4.0, 1.0, 1.0, 1000, zeta).unwrap();
        assert!((beta - 82.0).abs() < 1e-9, "beta {beta}");
    }

    #[test]
    fn noise_multiplier_examples() {
        let m = noise_multiplier(10_000, budget(0.02, 1e-5)).unwrap();
        assert!((m.alpha - 1e9f64.ln() / 2.0).abs() < 1e-12);
        assert!((m.alpha - 10.36).abs() < 0.01);
        // sqrt(ln(1e9) / 1e4) = 0.0455
        assert!(m.regime_valid);
        assert!(!noise_multiplier(10_000, budget(0.05, 1e-5)).unwrap().regime_valid);

        let a1 = noise_multiplier(10_000, budget(0.5, 1e-5)).unwrap().alpha;
        let a2 = noise_multiplier(1_000_000, budget(0.5, 1e-5)).unwrap().alpha;
        let expected = (1e11f64.ln() / 1e9f64.ln()) / 10.0;
        assert!((a2 / a1 - expected).abs() < 1e-12);
    }

    #[test]
    fn reduces_to_oja_without_noise_or_clipping() {
        let ds = sample_gaussian_dataset(&diag(&[1.0, 0.5, 0.5]), 400, 3).unwrap();
        let sched = LearningRateSchedule::new(2.0, 5.0, 0.5).unwrap();
        let cfg = ClipConfig::new(1e12, 0.0).unwrap();
        let (w, report) = run_private_oja(&ds, budget(0.5, 1e-5), &sched, cfg, 17).unwrap();
        let shuffled = ds.permuted(&shuffle_order(ds.len(), 17));
        let reference = run_oja(&shuffled, &sched, 17).unwrap();
        assert_eq!(w, reference);
        assert_eq!(report.clipped_steps, 0);
        assert_eq!(report.amplified_epsilon, None);
    }

    #[test]
    fn shuffle_order_is_a_permutation() {
        let mut order = shuffle_order(100, 5);
        assert_ne!(order, (0..100).collect::<Vec<_>>());
        order.sort_unstable();
        assert_eq!(order, (0..100).collect::<Vec<_>>());
    }

    #[test]
    fn clipping_counts_bound_steps() {
        let a = SampleMatrix::Dense(Matrix::identity(2, 2) * 10.0);
        let ds = Dataset::new(vec![a; 20], 0).unwrap();
        let cfg = ClipConfig::new(1.0, 0.0).unwrap();
        let (_, report) =
            run_private_oja(&ds, budget(0.5, 1e-5), &StepRule::Constant(0.1), cfg, 1).unwrap();
        assert_eq!(report.clipped_steps, 20);
    }

    #[test]
    fn per_step_noise_has_calibrated_spread() {
        // With A = 0 the update is w + 2 eta beta alpha z; compare before normalizing.
        let d = 4;
        let (eta, beta, alpha) = (0.01, 2.0, 1.5);
        let mut rng = derived_rng(9, &[purpose::NOISE]);
        let expected = 2.0 * eta * beta * alpha;
        let draws: Vec<f64> = (0..10_000)
            .map(|_| standard_normal_vector(&mut rng, d)[0] * expected)
            .collect();
        let mean = draws.iter().sum::<f64>() / draws.len() as f64;
        let var = draws.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (draws.len() - 1) as f64;
        assert!((var.sqrt() / expected - 1.0).abs() < 0.1);
    }

    #[test]
    fn minibatch_converges_without_noise() {
        let a = SampleMatrix::Dense(diag(&[2.0, 1.0]));
        let ds = Dataset::new(vec![a; 1000], 0).unwrap();
        let sched = LearningRateSchedule::new(2.0, 0.0, 1.0).unwrap();
        let cfg = ClipConfig::new(1e9, 0.0).unwrap();
        let e1 = UnitVector::basis(2, 0).unwrap();
        for seed in 0..5 {
            let (w, report) =
                run_minibatch_clipped_oja(&ds, budget(0.5, 1e-5), 100, &sched, cfg, seed).unwrap();
            assert_eq!(report.batch_size, 10);
            assert!(sin_distance(&w, &e1) <= 0.05);
        }
    }

    #[test]
    fn minibatch_with_unit_batches_matches_private_oja_shape() {
        let ds = sample_gaussian_dataset(&diag(&[1.0, 0.5]), 50, 1).unwrap();
        let cfg = ClipConfig::new(1e9, 0.0).unwrap();
        let sched = StepRule::Constant(0.05);
        let (w, report) =
            run_minibatch_clipped_oja(&ds, budget(0.5, 1e-5), 50, &sched, cfg, 4).unwrap();
        assert_eq!(report.batch_size, 1);
        assert_eq!(w, run_oja(&ds, &sched, 4).unwrap());
        assert!(run_minibatch_clipped_oja(&ds, budget(0.5, 1e-5), 51, &sched, cfg, 4).is_err());
    }

    #[test]
    fn minibatch_noise_multiplier_uses_serial_split() {
        let b = budget(0.8, 1e-5);
        let alpha = minibatch_noise_multiplier(4, b).unwrap();
        let expected = (2.0 * (1.25 / 2.5e-6f64).ln()).sqrt() / 0.2;
        assert!((alpha - expected).abs() < 1e-12);
        // Noise std 2 eta beta alpha / B halves when B doubles.
        let std = |batch: f64| 2.0 * 0.1 * 3.0 * alpha / batch;
        assert_eq!(std(200.0) / std(100.0), 0.5);
    }
}
