//! Minibatch private PCA with variance-adaptive noise.
//!
//! Each batch of size `B` is split in two halves. The first half yields a
//! private estimate of the gradient covariance's top eigenvalue, which sets
//! the truncation box and noise level for a private mean of the second half's
//! gradients. The mean drives one Oja-style update.

use crate::baseline::{default_norm_bound, gaussian_mechanism_pca};
use crate::error::{invalid, Error, Result};
use crate::estimators::{log_power, private_mean, private_top_eigenvalue, EigenEstimate};
pub use crate::estimators::EIGEN_SUBSETS_CONSTANT;
use crate::metrics::{sin_distance, UnitVector};
use crate::model::{Dataset, ModelParams};
use crate::oja::{check_zeta, initial_iterate, renormalize, LearningRateSchedule, StepRule, StepSize};
use crate::privacy::{parallel_compose, serial_compose, PrivacyBudget, PrivacyLedger};
use crate::rng::{derive_seed, purpose};
use crate::Vector;

/// Smallest eigenvalue scale handed to the mean estimator.
pub const LAMBDA_FLOOR: f64 = 1e-12;
/// Constant in the effective variance of the noisy minibatch gradient.
pub const VARIANCE_CONSTANT: f64 = 1.0;
/// Constant in the effective norm bound of the noisy minibatch gradient.
pub const NORM_CONSTANT: f64 = 1.0;
/// Smallest admissible batch: each half must hold a pair of gradients.
pub const MIN_BATCH: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DpPcaConfig {
    pub budget: PrivacyBudget,
    pub batch_size: usize,
    pub zeta: f64,
    pub steps: StepRule,
    pub k_tail: f64,
    pub a_tail: f64,
    /// Multiplier in the number of subsets of the eigenvalue estimator.
    pub subsets_constant: f64,
    pub seed: u64,
}

impl DpPcaConfig {
    pub fn validate(&self, n: usize) -> Result<()> {
        if self.batch_size < MIN_BATCH {
            return Err(invalid(format!(
                "batch size {} is below the minimum {MIN_BATCH}",
                self.batch_size
            )));
        }
        if n < self.batch_size {
            return Err(Error::InsufficientSamples {
                needed: self.batch_size,
                got: n,
            });
        }
        check_zeta(self.zeta)?;
        for (name, value) in [
            ("k_tail", self.k_tail),
            ("a_tail", self.a_tail),
            ("subsets_constant", self.subsets_constant),
        ] {
            if !(value > 0.0 && value.is_finite()) {
                return Err(Error::OutOfRange {
                    name,
                    value,
                    reason: "must be finite and positive",
                });
            }
        }
        Ok(())
    }

    /// Number of updates `T = floor(n / B)`.
    pub fn num_steps(&self, n: usize) -> usize {
        n / self.batch_size
    }
}

/// `B = floor(c1 n / ln(n)^2)`, at least [`MIN_BATCH`] and at most `n`.
pub fn default_batch_size(n: usize, c1: f64) -> usize {
    let nf = n.max(2) as f64;
    let b = (c1 * nf / nf.ln().powi(2)).floor() as usize;
    b.max(MIN_BATCH).min(n.max(MIN_BATCH))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SkipReason {
    /// The eigenvalue histogram suppressed every bin.
    EigenBottom,
    /// A coordinate histogram of the mean estimator suppressed every bin.
    MeanFailed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub step: usize,
    /// Eigenvalue estimate of the first half-batch; `None` for a bottom outcome.
    pub lambda_hat: Option<f64>,
    /// The estimate was raised to [`LAMBDA_FLOOR`].
    pub floored: bool,
    pub truncated_entries: usize,
    pub skipped: Option<SkipReason>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DpPcaReport {
    pub batch_size: usize,
    pub steps: Vec<StepRecord>,
    pub ledger: PrivacyLedger,
}

impl DpPcaReport {
    pub fn skipped_steps(&self) -> usize {
        self.steps.iter().filter(|s| s.skipped.is_some()).count()
    }

    pub fn truncated_entries(&self) -> usize {
        self.steps.iter().map(|s| s.truncated_entries).sum()
    }

    /// Mean of the eigenvalue estimates that were not bottom.
    pub fn lambda_hat_mean(&self) -> Option<f64> {
        let values: Vec<f64> = self.steps.iter().filter_map(|s| s.lambda_hat).collect();
        (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
    }

    /// Guarantee for any one sample: it enters exactly one mechanism, and
    /// mechanisms on disjoint half-batches compose in parallel.
    pub fn per_sample_budget(&self) -> Option<PrivacyBudget> {
        self.ledger.per_scope_total()
    }

    /// Conservative end-to-end guarantee: the two half-batch mechanisms of a
    /// batch are added, batches compose in parallel.
    pub fn conservative_budget(&self) -> Option<PrivacyBudget> {
        let per_batch: Vec<PrivacyBudget> = self
            .ledger
            .entries
            .chunks(2)
            .filter_map(|pair| serial_compose(&pair.iter().map(|e| e.budget).collect::<Vec<_>>()).ok())
            .collect();
        parallel_compose(&per_batch).ok()
    }
}

/// Runs `T = floor(n / B)` private minibatch updates over consecutive batches.
///
/// A bottom eigenvalue outcome or a failed mean estimate skips the update for
/// that batch; both are recorded in the report.
pub fn run_dppca(dataset: &Dataset, cfg: &DpPcaConfig) -> Result<(UnitVector, DpPcaReport)> {
    let n = dataset.len();
    cfg.validate(n)?;
    let d = dataset.dim();
    let b = cfg.batch_size;
    let half = b / 2;
    let num_steps = cfg.num_steps(n);
    let step_zeta = cfg.zeta / (2.0 * num_steps as f64);
    let half_budget = cfg.budget.halved();
    let (mut w, mut restart) = initial_iterate(d, cfg.seed);
    let mut records = Vec::with_capacity(num_steps);
    let mut ledger = PrivacyLedger::default();

    for t in 1..=num_steps {
        let batch = &dataset.samples()[(t - 1) * b..t * b];
        let gradients = |samples: &[crate::SampleMatrix], w: &Vector| -> Vec<Vector> {
            samples.iter().map(|s| s.apply(w)).collect()
        };
        let first = gradients(&batch[..half], &w);
        let eigen = private_top_eigenvalue(
            &first,
            half_budget,
            step_zeta,
            cfg.subsets_constant,
            derive_seed(cfg.seed, &[purpose::EIGEN, t as u64]),
        )?;
        ledger.record("top eigenvalue", format!("batch {t} first half"), half_budget);
        let mut record = StepRecord {
            step: t,
            lambda_hat: eigen.estimate.value(),
            floored: false,
            truncated_entries: 0,
            skipped: None,
        };
        let lambda_hat = match eigen.estimate {
            EigenEstimate::Bottom => {
                log::debug!("step {t}: eigenvalue histogram empty, skipping update");
                record.skipped = Some(SkipReason::EigenBottom);
                ledger.record("mean (not released)", format!("batch {t} second half"), half_budget);
                records.push(record);
                continue;
            }
            _ => eigen.estimate.value().unwrap_or(0.0),
        };
        let scale = 2.0 * lambda_hat;
        if scale < LAMBDA_FLOOR {
            record.floored = true;
        }
        let second = gradients(&batch[half..2 * half], &w);
        let mean = private_mean(
            &second,
            half_budget,
            step_zeta,
            scale.max(LAMBDA_FLOOR),
            cfg.k_tail,
            cfg.a_tail,
            derive_seed(cfg.seed, &[purpose::MEAN, t as u64]),
        );
        ledger.record("mean", format!("batch {t} second half"), half_budget);
        match mean {
            Ok(out) => {
                record.truncated_entries = out.truncated_entries;
                let eta = cfg.steps.eta(t);
                w = renormalize(&*w + out.mean * eta, t, &mut restart);
            }
            Err(Error::EstimationFailed(msg)) => {
                log::debug!("step {t}: {msg}, skipping update");
                record.skipped = Some(SkipReason::MeanFailed);
            }
            Err(e) => return Err(e),
        }
        records.push(record);
    }
    Ok((
        w,
        DpPcaReport {
            batch_size: b,
            steps: records,
            ledger,
        },
    ))
}

/// Standard deviation scale of the privatized minibatch gradient,
/// `16 K gamma lambda1 ln^a(B d / zeta) sqrt(2 d ln(2.5 / delta)) / (epsilon B)`.
pub fn dppca_noise_scale(params: &ModelParams, batch: usize, budget: PrivacyBudget, zeta: f64) -> Result<f64> {
    check_zeta(zeta)?;
    if batch == 0 {
        return Err(invalid("batch size must be positive"));
    }
    let d = params.dim as f64;
    let bf = batch as f64;
    Ok(16.0
        * params.k_tail
        * params.gamma()
        * params.lambda1
        * log_power(bf * d / zeta, params.a_tail)
        * (2.0 * d * (2.5 / budget.delta()).ln()).sqrt()
        / (budget.epsilon() * bf))
}

/// Offset `xi` of the minibatch schedule, built from the effective variance
/// `V~ = V lambda1^2 / B + C2 d beta^2` and norm bound
/// `M~ = C3 (M lambda1 L / B + sqrt(V lambda1^2 L / B) + beta (sqrt d + sqrt ln(T / zeta)))`
/// with `L = ln(d T / zeta)` and noise scale `beta`.
pub fn dppca_xi(
    params: &ModelParams,
    batch: usize,
    num_steps: usize,
    noise_scale: f64,
    alpha: f64,
    zeta: f64,
) -> Result<f64> {
    if !params.has_gap() {
        return Err(invalid("no spectral gap: kappa is infinite"));
    }
    check_zeta(zeta)?;
    if batch == 0 || num_steps == 0 {
        return Err(invalid("batch size and number of steps must be positive"));
    }
    let d = params.dim as f64;
    let bf = batch as f64;
    let tf = num_steps as f64;
    let l1 = params.lambda1;
    let log_dt = (d * tf / zeta).ln();
    let v_eff = params.v_bound * l1 * l1 / bf + VARIANCE_CONSTANT * d * noise_scale * noise_scale;
    let m_eff = NORM_CONSTANT
        * (params.m_bound * l1 * log_dt / bf
            + (params.v_bound * l1 * l1 * log_dt / bf).sqrt()
            + noise_scale * (d.sqrt() + (tf / zeta).ln().sqrt()));
    let gap = params.gap();
    Ok(20.0
        * f64::max(
            m_eff * alpha / gap,
            (v_eff + l1 * l1) * alpha * alpha / (gap * gap * (1.0 + zeta / 100.0).ln()),
        ))
}

/// The schedule `alpha / ((lambda1 - lambda2)(xi + t))` with [`dppca_xi`].
pub fn dppca_schedule(
    params: &ModelParams,
    batch: usize,
    num_steps: usize,
    noise_scale: f64,
    alpha: f64,
    zeta: f64,
) -> Result<LearningRateSchedule> {
    let xi = dppca_xi(params, batch, num_steps, noise_scale, alpha, zeta)?;
    LearningRateSchedule::new(alpha, xi, params.gap())
}

/// Step size at update `t` of [`dppca_schedule`].
pub fn dppca_learning_rate(
    t: usize,
    params: &ModelParams,
    batch: usize,
    num_steps: usize,
    noise_scale: f64,
    alpha: f64,
    zeta: f64,
) -> Result<f64> {
    Ok(dppca_schedule(params, batch, num_steps, noise_scale, alpha, zeta)?.eta(t))
}

/// Whether `n >= e^(kappa^2)`, the sample size beyond which the error bound
/// for the minibatch algorithm is stated. Reported, never enforced.
pub fn dppca_regime_valid(n: usize, kappa: f64) -> bool {
    kappa.is_finite() && (n as f64).ln() >= kappa * kappa
}

/// Default cap on tuning rounds.
pub const DEFAULT_TUNING_ROUNDS: usize = 6;

/// How the tuner scores a candidate.
#[derive(Debug, Clone, PartialEq)]
pub enum Evaluator {
    /// Exact sine distance to a known direction. Not private; for tests.
    Oracle(UnitVector),
    /// Sine distance to a Gaussian-mechanism PCA direction released once per
    /// round at that round's evaluation budget, with this norm bound.
    PrivateReference { norm_bound: f64 },
}

impl Evaluator {
    /// Private reference with the default norm bound for covariance top
    /// eigenvalue `lambda1`.
    pub fn private_reference(lambda1: f64, dim: usize, n: usize, zeta: f64) -> Self {
        Evaluator::PrivateReference {
            norm_bound: default_norm_bound(lambda1, dim, n, zeta),
        }
    }
}

/// Evaluation budget of round `i >= 1`:
/// `(epsilon, delta) / (2^(i + 1) (2 i - 1))`.
pub fn tuning_round_budget(total: PrivacyBudget, round: usize) -> Result<PrivacyBudget> {
    if round == 0 {
        return Err(invalid("rounds are numbered from 1"));
    }
    let i = round as i32;
    let divisor = 2f64.powi(i + 1) * (2 * i - 1) as f64;
    PrivacyBudget::new(total.epsilon() / divisor, total.delta() / divisor)
}

/// Candidates `(c1, c2)` of round `i`: pairs from
/// `S_i = {2^(-i+1), ..., 2^(i-1)}` with at least one coordinate at an end of
/// `S_i`, in a fixed order without duplicates.
pub fn tuning_candidates(round: usize) -> Vec<(f64, f64)> {
    if round == 0 {
        return Vec::new();
    }
    let r = round as i32 - 1;
    let mut out = Vec::new();
    for a in -r..=r {
        for b in -r..=r {
            if a.abs() == r || b.abs() == r {
                out.push((2f64.powi(a), 2f64.powi(b)));
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct TuneOutcome {
    pub c1: f64,
    pub c2: f64,
    pub estimate: UnitVector,
    /// Score of the winner as seen by the evaluator.
    pub score: f64,
    pub rounds: usize,
    pub converged: bool,
    /// Budget spent on evaluation in each round.
    pub round_budgets: Vec<PrivacyBudget>,
}

impl TuneOutcome {
    pub fn evaluation_total(&self) -> Option<PrivacyBudget> {
        serial_compose(&self.round_budgets).ok()
    }
}

/// Searches `eta_t = c1 / (c2 + t)` over doubling grids until a candidate
/// scores at most `target_error`, or `max_rounds` rounds pass; in the latter
/// case the best candidate seen is returned with `converged = false`.
///
/// Every candidate is trained with `cfg_base` apart from its step rule.
pub fn tune_learning_rate(
    dataset: &Dataset,
    cfg_base: &DpPcaConfig,
    target_error: f64,
    evaluator: &Evaluator,
    max_rounds: usize,
) -> Result<TuneOutcome> {
    if !(target_error > 0.0 && target_error < 1.0) {
        return Err(Error::OutOfRange {
            name: "target_error",
            value: target_error,
            reason: "must lie in (0, 1)",
        });
    }
    if max_rounds == 0 {
        return Err(invalid("need at least one tuning round"));
    }
    cfg_base.validate(dataset.len())?;
    let mut best: Option<TuneOutcome> = None;
    let mut round_budgets = Vec::new();
    for round in 1..=max_rounds {
        let round_budget = tuning_round_budget(cfg_base.budget, round)?;
        round_budgets.push(round_budget);
        let reference = match evaluator {
            Evaluator::Oracle(v) => v.clone(),
            Evaluator::PrivateReference { norm_bound } => {
                gaussian_mechanism_pca(
                    dataset,
                    *norm_bound,
                    round_budget,
                    derive_seed(cfg_base.seed, &[purpose::TUNE, round as u64]),
                )?
                .0
            }
        };
        for (c1, c2) in tuning_candidates(round) {
            let cfg = DpPcaConfig {
                steps: StepRule::InverseTime { c1, c2 },
                ..*cfg_base
            };
            let (w, _) = run_dppca(dataset, &cfg)?;
            let score = sin_distance(&w, &reference);
            log::debug!("round {round}: c1 = {c1}, c2 = {c2}, score {score:.4}");
            if best.as_ref().is_none_or(|b| score < b.score) {
                best = Some(TuneOutcome {
                    c1,
                    c2,
                    estimate: w,
                    score,
                    rounds: round,
                    converged: false,
                    round_budgets: Vec::new(),
                });
            }
            if score <= target_error {
                let mut out = best.expect("a candidate was just recorded");
                out.rounds = round;
                out.converged = true;
                out.round_budgets = round_budgets;
                return Ok(out);
            }
        }
    }
    let mut out = best.expect("round 1 has a candidate");
    out.rounds = max_rounds;
    out.round_budgets = round_budgets;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{
        gaussian_model_params, sample_gaussian_dataset, sample_toy_dataset, spiked_covariance, SampleMatrix,
    };
    use crate::Matrix;

    fn budget(e: f64, d: f64) -> PrivacyBudget {
        PrivacyBudget::new(e, d).unwrap()
    }

    fn config(batch: usize, steps: StepRule, seed: u64) -> DpPcaConfig {
        DpPcaConfig {
            budget: budget(0.89, 1e-5),
            batch_size: batch,
            zeta: 0.01,
            steps,
            k_tail: 1.0,
            a_tail: 1.0,
            subsets_constant: EIGEN_SUBSETS_CONSTANT,
            seed,
        }
    }

    #[test]
    fn default_batch_matches_formula() {
        let n = 100_000usize;
        let expected = (n as f64 / (n as f64).ln().powi(2)).floor() as usize;
        assert_eq!(default_batch_size(n, 1.0), expected);
        assert_eq!(default_batch_size(10, 1.0), MIN_BATCH);
        assert_eq!(default_batch_size(1000, 1e6), 1000);
    }

    #[test]
    fn config_validation() {
        let c = config(3, StepRule::Constant(1.0), 0);
        assert!(c.validate(100).is_err());
        let c = config(200, StepRule::Constant(1.0), 0);
        assert!(matches!(c.validate(100), Err(Error::InsufficientSamples { .. })));
        assert!(c.validate(200).is_ok());
        assert_eq!(c.num_steps(450), 2);
    }

    #[test]
    fn single_step_moves_toward_top_direction() {
        // Identical samples: every pair difference vanishes, the zero bin wins
        // and the floored scale leaves the exact gradient almost noiseless.
        let a = SampleMatrix::Dense(Matrix::from_diagonal(&Vector::from_column_slice(&[2.0, 1.0])));
        let e1 = UnitVector::basis(2, 0).unwrap();
        let n = 40_000;
        let ds = Dataset::new(vec![a; n], 0).unwrap();
        let mut improved = 0;
        for seed in 0..20 {
            let cfg = config(n, StepRule::Constant(1.0), seed);
            let (w, report) = run_dppca(&ds, &cfg).unwrap();
            assert!(report.steps[0].floored);
            let w0 = initial_iterate(2, seed).0;
            if w.dot(&e1).powi(2) > w0.dot(&e1).powi(2) {
                improved += 1;
            }
        }
        assert!(improved >= 18, "improved {improved}");
    }

    #[test]
    fn deterministic_unit_norm_and_ledger() {
        let sigma = spiked_covariance(5, 2.0, 1.0).unwrap();
        let ds = sample_gaussian_dataset(&sigma, 40_000, 3).unwrap();
        let cfg = config(20_000, StepRule::InverseTime { c1: 1.0, c2: 1.0 }, 9);
        let (a, ra) = run_dppca(&ds, &cfg).unwrap();
        let (b, rb) = run_dppca(&ds, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(ra, rb);
        assert!(a.is_unit());
        assert_eq!(ra.steps.len(), 2);
        assert_eq!(ra.ledger.entries.len(), 4);
        let per_sample = ra.per_sample_budget().unwrap();
        assert_eq!(per_sample, cfg.budget.halved());
        let conservative = ra.conservative_budget().unwrap();
        assert_eq!(conservative, cfg.budget);
    }

    #[test]
    fn recovers_direction_with_large_batches() {
        let v1 = UnitVector::basis(5, 0).unwrap();
        let ds = sample_toy_dataset(&v1, 0.01, 100_000, 4).unwrap();
        let mut errors = Vec::new();
        for seed in 0..5 {
            let cfg = config(50_000, StepRule::InverseTime { c1: 100.0, c2: 1.0 }, seed);
            let (w, report) = run_dppca(&ds, &cfg).unwrap();
            assert_eq!(report.skipped_steps(), 0);
            assert_eq!(report.truncated_entries(), 0);
            errors.push(sin_distance(&w, &v1));
        }
        errors.sort_by(f64::total_cmp);
        assert!(errors[2] < 0.3, "{errors:?}");
    }

    #[test]
    fn tiny_batches_skip_every_step() {
        let sigma = spiked_covariance(3, 2.0, 1.0).unwrap();
        let ds = sample_gaussian_dataset(&sigma, 400, 0).unwrap();
        let cfg = config(8, StepRule::Constant(1.0), 0);
        // Half a batch of 4 cannot hold 2k gradients.
        assert!(matches!(run_dppca(&ds, &cfg), Err(Error::InsufficientSamples { .. })));
    }

    #[test]
    fn learning_rate_examples() {
        let sched = LearningRateSchedule::new(10f64.ln(), 20.0, 0.5).unwrap();
        assert!((sched.eta(1) - 10f64.ln() / 10.5).abs() < 1e-12);

        let sigma = spiked_covariance(4, 2.0, 1.0).unwrap();
        let params = gaussian_model_params(&sigma, 1000).unwrap();
        let etas: Vec<f64> = (1..50)
            .map(|t| dppca_learning_rate(t, &params, 100, 10, 0.1, 2.0, 0.01).unwrap())
            .collect();
        assert!(etas.windows(2).all(|w| w[0] > w[1]));

        // Without noise and with a huge batch only the lambda1^2 floor remains.
        let xi = dppca_xi(&params, usize::MAX / 4, 10, 0.0, 2.0, 0.01).unwrap();
        let floor = 20.0 * 4.0 * 4.0 / (1.0 + 0.01f64 / 100.0).ln();
        assert!((xi - floor).abs() / floor < 1e-6);
    }

    #[test]
    fn learning_rate_requires_gap() {
        let params = gaussian_model_params(&Matrix::identity(3, 3), 100).unwrap();
        assert!(dppca_xi(&params, 10, 10, 0.1, 2.0, 0.01).is_err());
    }

    #[test]
    fn noise_scale_formula() {
        let sigma = spiked_covariance(4, 2.0, 1.0).unwrap();
        let params = gaussian_model_params(&sigma, 1000).unwrap();
        let b = budget(0.5, 1e-6);
        let got = dppca_noise_scale(&params, 500, b, 0.01).unwrap();
        let expected = 16.0 * 4.0 * 1.0 * 2.0 * (500.0f64 * 4.0 / 0.01).ln() * (8.0 * (2.5e6f64).ln()).sqrt()
            / (0.5 * 500.0);
        assert!((got - expected).abs() < 1e-9 * expected);
    }

    #[test]
    fn tuning_grid_and_budgets() {
        assert_eq!(tuning_candidates(1), vec![(1.0, 1.0)]);
        let r2 = tuning_candidates(2);
        assert_eq!(r2.len(), 8);
        assert!(!r2.contains(&(1.0, 1.0)));
        assert_eq!(tuning_candidates(3).len(), 16);

        let total = budget(0.89, 1e-5);
        let mut eps = 0.0;
        let mut delta = 0.0;
        for i in 1..=60 {
            let b = tuning_round_budget(total, i).unwrap();
            eps += b.epsilon();
            delta += b.delta();
        }
        assert!(eps < total.epsilon() && delta < total.delta());
        let r1 = tuning_round_budget(total, 1).unwrap();
        assert_eq!(r1.epsilon(), 0.89 / 4.0);
    }

    #[test]
    fn tuner_stops_in_first_round_when_target_is_loose() {
        let sigma = spiked_covariance(4, 2.0, 1.0).unwrap();
        let ds = sample_gaussian_dataset(&sigma, 40_000, 1).unwrap();
        let cfg = config(20_000, StepRule::Constant(1.0), 1);
        let out = tune_learning_rate(&ds, &cfg, 0.999_999, &Evaluator::Oracle(UnitVector::basis(4, 0).unwrap()), 6)
            .unwrap();
        assert_eq!(out.rounds, 1);
        assert!(out.converged);
        assert_eq!((out.c1, out.c2), (1.0, 1.0));
        assert_eq!(out.round_budgets.len(), 1);
    }

    #[test]
    fn tuner_reports_best_when_not_converged() {
        let sigma = spiked_covariance(4, 2.0, 1.0).unwrap();
        let ds = sample_gaussian_dataset(&sigma, 40_000, 2).unwrap();
        let cfg = config(20_000, StepRule::Constant(1.0), 2);
        let out = tune_learning_rate(&ds, &cfg, 1e-9, &Evaluator::Oracle(UnitVector::basis(4, 0).unwrap()), 2)
            .unwrap();
        assert!(!out.converged);
        assert_eq!(out.rounds, 2);
        assert!(out.evaluation_total().unwrap().epsilon() < cfg.budget.epsilon());
    }
}
