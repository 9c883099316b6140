//! Runs the configured cross product of grid points, algorithms and trials.

use std::path::{Path, PathBuf};
use std::time::Instant;

use dppca_core::baseline::{default_norm_bound, gaussian_mechanism_pca};
use dppca_core::dppca::{default_batch_size, dppca_regime_valid, run_dppca, DpPcaConfig, EIGEN_SUBSETS_CONSTANT};
use dppca_core::estimators::eigen_subset_count;
use dppca_core::model::{gaussian_model_params, sample_gaussian_dataset, sample_toy_dataset, toy_model_params};
use dppca_core::oja::{default_alpha, run_oja};
use dppca_core::private_oja::{
    clipping_threshold, minibatch_noise_multiplier, noise_multiplier, run_minibatch_clipped_oja, run_private_oja,
    ClipConfig,
};
use dppca_core::rng::{derive_seed, purpose};
use dppca_core::{
    sin_distance, top_eigpair, Dataset, LearningRateSchedule, Matrix, ModelParams, PrivacyBudget, StepRule,
    UnitVector, Vector,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{Algorithm, ExperimentConfig, ModelSpec};
use crate::error::CliError;
use crate::results::{write_csv, ResultRow};

/// Default tail constant of the toy model.
pub const TOY_K_TAIL: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub n: usize,
    pub epsilon: f64,
    pub delta: f64,
    pub sigma_noise_sq: Option<f64>,
}

/// One unit of work. Everything needed to reproduce a row besides the config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Job {
    pub algorithm: Algorithm,
    #[serde(flatten)]
    pub point: GridPoint,
    pub trial: usize,
    pub seed: u64,
}

/// Seed of trial `trial` at `point`. Algorithms share it, so they see the
/// same data.
pub fn trial_seed(master: u64, point: &GridPoint, trial: usize) -> u64 {
    derive_seed(
        master,
        &[
            purpose::TRIAL,
            point.n as u64,
            point.epsilon.to_bits(),
            point.delta.to_bits(),
            point.sigma_noise_sq.map_or(u64::MAX, f64::to_bits),
            trial as u64,
        ],
    )
}

pub fn grid_points(cfg: &ExperimentConfig) -> Vec<GridPoint> {
    let noise: Vec<Option<f64>> = if cfg.model.is_toy() {
        cfg.grid.sigma_noise_sq.iter().copied().map(Some).collect()
    } else {
        vec![None]
    };
    let mut out = Vec::new();
    for &n in &cfg.grid.n {
        for &epsilon in &cfg.grid.epsilon {
            for &delta in &cfg.grid.delta {
                for &sigma_noise_sq in &noise {
                    out.push(GridPoint {
                        n,
                        epsilon,
                        delta,
                        sigma_noise_sq,
                    });
                }
            }
        }
    }
    out
}

/// Jobs in output order: algorithm (config order), then grid order, then trial.
pub fn jobs(cfg: &ExperimentConfig) -> Vec<Job> {
    let points = grid_points(cfg);
    let mut out = Vec::with_capacity(cfg.algorithms.len() * points.len() * cfg.trials);
    for &algorithm in &cfg.algorithms {
        for point in &points {
            for trial in 0..cfg.trials {
                out.push(Job {
                    algorithm,
                    point: *point,
                    trial,
                    seed: trial_seed(cfg.master_seed, point, trial),
                });
            }
        }
    }
    out
}

/// Data and population quantities of one trial.
struct Problem {
    params: ModelParams,
    truth: UnitVector,
    dataset: Dataset,
}

fn problem(cfg: &ExperimentConfig, point: &GridPoint, seed: u64) -> Result<Problem, CliError> {
    let n = point.n;
    match &cfg.model {
        ModelSpec::Toy { d } => {
            let s2 = point
                .sigma_noise_sq
                .ok_or_else(|| CliError::config("grid.sigma_noise_sq", "missing for the toy model"))?;
            let truth = UnitVector::basis(*d, 0)?;
            let k = cfg.schedule.k_tail.unwrap_or(TOY_K_TAIL);
            Ok(Problem {
                params: toy_model_params(&truth, s2, n, k)?,
                dataset: sample_toy_dataset(&truth, s2, n, seed)?,
                truth,
            })
        }
        ModelSpec::Gaussian { .. } => {
            let diag = cfg.model.gaussian_diagonal().expect("validated gaussian model");
            let sigma = Matrix::from_diagonal(&Vector::from_vec(diag));
            let mut params = gaussian_model_params(&sigma, n)?;
            if let Some(k) = cfg.schedule.k_tail {
                params.k_tail = k;
            }
            Ok(Problem {
                truth: top_eigpair(&sigma)?.1,
                dataset: sample_gaussian_dataset(&sigma, n, seed)?,
                params,
            })
        }
    }
}

/// `c1 / (c2 + t)` when both are configured, else `alpha / (gap t)` with
/// `alpha` defaulting to `ln n`.
pub fn step_rule(cfg: &ExperimentConfig, n: usize, gap: f64) -> Result<StepRule, CliError> {
    let s = &cfg.schedule;
    if let (Some(c1), Some(c2)) = (s.c1, s.c2) {
        return Ok(StepRule::InverseTime { c1, c2 });
    }
    let alpha = s.alpha.unwrap_or_else(|| default_alpha(n));
    Ok(StepRule::Schedule(LearningRateSchedule::new(alpha, 0.0, gap)?))
}

/// Default number of minibatch Oja steps, `ln(n)^2`, within `1..=n`.
pub fn default_minibatch_steps(n: usize) -> usize {
    ((n.max(2) as f64).ln().powi(2) as usize).clamp(1, n)
}

/// Default dp-pca batch: `n / ln(n)^2`, doubled until each eigenvalue
/// estimate gets at least two gradients per subset, and at most `n`.
pub fn default_dppca_batch(n: usize, budget: PrivacyBudget, zeta: f64, subsets_constant: f64) -> Result<usize, CliError> {
    let mut batch = default_batch_size(n, 1.0).min(n);
    while batch < n {
        let steps = n / batch;
        let subsets = eigen_subset_count(budget.halved(), zeta / (2.0 * steps as f64), subsets_constant)?;
        if batch / 2 >= 2 * subsets {
            break;
        }
        batch = (2 * batch).min(n);
    }
    Ok(batch)
}

struct Outcome {
    estimate: UnitVector,
    clipped: usize,
    skipped: usize,
    lambda_hat_mean: Option<f64>,
    regime_valid: Option<bool>,
}

impl Outcome {
    fn plain(estimate: UnitVector) -> Self {
        Self {
            estimate,
            clipped: 0,
            skipped: 0,
            lambda_hat_mean: None,
            regime_valid: None,
        }
    }
}

fn run_algorithm(cfg: &ExperimentConfig, job: &Job, p: &Problem) -> Result<Outcome, CliError> {
    let n = job.point.n;
    let d = p.params.dim;
    let zeta = cfg.zeta();
    let budget = PrivacyBudget::new(job.point.epsilon, job.point.delta)?;
    let rule = step_rule(cfg, n, p.params.gap())?;
    let beta = || {
        clipping_threshold(
            p.params.lambda1,
            d,
            p.params.k_tail,
            p.params.gamma(),
            p.params.a_tail,
            n,
            zeta,
        )
    };
    Ok(match job.algorithm {
        Algorithm::Oja => Outcome::plain(run_oja(&p.dataset, &rule, job.seed)?),
        Algorithm::PrivateOja => {
            let clip = ClipConfig::new(beta()?, noise_multiplier(n, budget)?.alpha)?;
            let (w, report) = run_private_oja(&p.dataset, budget, &rule, clip, job.seed)?;
            Outcome {
                clipped: report.clipped_steps,
                regime_valid: Some(report.regime_valid),
                ..Outcome::plain(w)
            }
        }
        Algorithm::MinibatchOja => {
            let steps = cfg
                .schedule
                .minibatch_steps
                .unwrap_or_else(|| default_minibatch_steps(n))
                .min(n);
            let clip = ClipConfig::new(beta()?, minibatch_noise_multiplier(steps, budget)?)?;
            let (w, report) = run_minibatch_clipped_oja(&p.dataset, budget, steps, &rule, clip, job.seed)?;
            Outcome {
                clipped: report.clipped_gradients,
                ..Outcome::plain(w)
            }
        }
        Algorithm::Dppca => {
            let subsets_constant = cfg.schedule.subsets_constant.unwrap_or(EIGEN_SUBSETS_CONSTANT);
            let batch_size = match cfg.schedule.batch_size {
                Some(b) => b.min(n),
                None => default_dppca_batch(n, budget, zeta, subsets_constant)?,
            };
            let dp = DpPcaConfig {
                budget,
                batch_size,
                zeta,
                steps: rule,
                k_tail: p.params.k_tail,
                a_tail: p.params.a_tail,
                subsets_constant,
                seed: job.seed,
            };
            let (w, report) = run_dppca(&p.dataset, &dp)?;
            Outcome {
                skipped: report.skipped_steps(),
                lambda_hat_mean: report.lambda_hat_mean(),
                regime_valid: Some(dppca_regime_valid(n, p.params.kappa)),
                ..Outcome::plain(w)
            }
        }
        Algorithm::Baseline => {
            let bound = default_norm_bound(p.params.lambda1, d, n, zeta);
            let (w, report) = gaussian_mechanism_pca(&p.dataset, bound, budget, job.seed)?;
            Outcome {
                clipped: report.projected,
                ..Outcome::plain(w)
            }
        }
    })
}

/// Runs a single job. With `record_runtime` off the row depends only on the
/// config and the job.
pub fn run_job(cfg: &ExperimentConfig, job: &Job) -> Result<ResultRow, CliError> {
    let start = Instant::now();
    let p = problem(cfg, &job.point, job.seed)?;
    let out = run_algorithm(cfg, job, &p)
        .map_err(|e| CliError::Runtime(format!("{} at n = {}, trial {}: {e}", job.algorithm, job.point.n, job.trial)))?;
    let runtime_ms = cfg.record_runtime.then(|| start.elapsed().as_secs_f64() * 1e3);
    Ok(ResultRow {
        algorithm: job.algorithm,
        n: job.point.n,
        d: p.params.dim,
        epsilon: job.point.epsilon,
        delta: job.point.delta,
        sigma_noise_sq: job.point.sigma_noise_sq,
        trial: job.trial,
        seed: job.seed,
        sin_error: sin_distance(&out.estimate, &p.truth),
        clipped_steps: out.clipped,
        skipped_steps: out.skipped,
        lambda_hat_mean: out.lambda_hat_mean,
        runtime_ms,
        regime_valid: out.regime_valid,
    })
}

/// Runs every job in parallel; rows come back in [`jobs`] order.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<ResultRow>, CliError> {
    let jobs = jobs(cfg);
    log::info!("running {} jobs", jobs.len());
    jobs.par_iter().map(|job| run_job(cfg, job)).collect()
}

/// Config echo, library version and the job behind every row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub library_version: String,
    pub config: ExperimentConfig,
    pub rows: Vec<Job>,
}

impl Manifest {
    pub fn new(cfg: &ExperimentConfig) -> Self {
        Self {
            library_version: dppca_core::VERSION.to_string(),
            config: cfg.clone(),
            rows: jobs(cfg),
        }
    }

    /// Recomputes row `index` alone.
    pub fn reproduce(&self, index: usize) -> Result<ResultRow, CliError> {
        let job = self
            .rows
            .get(index)
            .ok_or_else(|| CliError::Runtime(format!("manifest has no row {index}")))?;
        run_job(&self.config, job)
    }
}

/// `results.csv` -> `results.manifest.json`.
pub fn manifest_path(out: &Path) -> PathBuf {
    out.with_extension("manifest.json")
}

/// Writes the CSV to `out` and the manifest next to it.
pub fn write_outputs(cfg: &ExperimentConfig, rows: &[ResultRow], out: &Path) -> Result<(), CliError> {
    let file = std::fs::File::create(out)
        .map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", out.display())))?;
    write_csv(rows, std::io::BufWriter::new(file))?;
    let manifest = serde_json::to_string_pretty(&Manifest::new(cfg))
        .map_err(|e| CliError::Runtime(format!("cannot encode manifest: {e}")))?;
    let path = manifest_path(out);
    std::fs::write(&path, manifest + "\n")
        .map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(text: &str) -> ExperimentConfig {
        ExperimentConfig::from_toml(text).unwrap()
    }

    const SMALL: &str = r#"
master_seed = 3
trials = 2
algorithms = ["oja", "private_oja", "minibatch_oja", "dppca", "baseline"]
[model]
kind = "gaussian"
spiked = { lambda1 = 4.0, lambda2 = 1.0, d = 3 }
[grid]
n = [5000, 10000]
epsilon = [0.5]
delta = [1e-5]
"#;

    #[test]
    fn cross_product_and_order() {
        let c = cfg(SMALL);
        let jobs = jobs(&c);
        assert_eq!(jobs.len(), 5 * 2 * 2);
        assert_eq!(jobs[0].algorithm, Algorithm::Oja);
        assert_eq!((jobs[0].point.n, jobs[0].trial), (5000, 0));
        assert_eq!((jobs[1].point.n, jobs[1].trial), (5000, 1));
        assert_eq!((jobs[2].point.n, jobs[2].trial), (10000, 0));
        // Same data for every algorithm at a given point and trial.
        assert_eq!(jobs[0].seed, jobs[4].seed);
        assert_ne!(jobs[0].seed, jobs[1].seed);
    }

    #[test]
    fn toy_grid_includes_noise_axis() {
        let c = cfg(r#"
master_seed = 1
trials = 1
algorithms = ["oja"]
[model]
kind = "toy"
d = 4
[grid]
n = [100]
epsilon = [0.5, 0.8]
delta = [1e-5]
sigma_noise_sq = [0.1, 0.01, 0.001]
"#);
        let points = grid_points(&c);
        assert_eq!(points.len(), 6);
        assert!(points.iter().all(|p| p.sigma_noise_sq.is_some()));
    }

    #[test]
    fn rows_are_well_formed() {
        let rows = run_experiment(&cfg(SMALL)).unwrap();
        assert_eq!(rows.len(), 20);
        for r in &rows {
            assert!((0.0..=1.0).contains(&r.sin_error), "{r:?}");
            assert_eq!(r.d, 3);
            assert!(r.runtime_ms.is_none());
            match r.algorithm {
                Algorithm::Oja | Algorithm::Baseline | Algorithm::MinibatchOja => assert!(r.regime_valid.is_none()),
                _ => assert!(r.regime_valid.is_some()),
            }
        }
        let oja: Vec<&ResultRow> = rows.iter().filter(|r| r.algorithm == Algorithm::Oja).collect();
        assert!(oja.iter().all(|r| r.sin_error < 0.3), "{oja:?}");
    }

    #[test]
    fn manifest_reproduces_single_rows() {
        let c = cfg(SMALL);
        let rows = run_experiment(&c).unwrap();
        let manifest = Manifest::new(&c);
        for i in [0, 7, 13, 19] {
            assert_eq!(manifest.reproduce(i).unwrap(), rows[i]);
        }
        let json = serde_json::to_string(&manifest).unwrap();
        let back: Manifest = serde_json::from_str(&json).unwrap();
        assert_eq!(back, manifest);
        assert!(manifest.reproduce(20).is_err());
    }

    #[test]
    fn step_rule_overrides() {
        let mut c = cfg(SMALL);
        assert_eq!(
            step_rule(&c, 100, 3.0).unwrap(),
            StepRule::Schedule(LearningRateSchedule::new(100f64.ln(), 0.0, 3.0).unwrap())
        );
        c.schedule.alpha = Some(2.0);
        assert_eq!(
            step_rule(&c, 100, 3.0).unwrap(),
            StepRule::Schedule(LearningRateSchedule::new(2.0, 0.0, 3.0).unwrap())
        );
        c.schedule.c1 = Some(1.0);
        c.schedule.c2 = Some(5.0);
        assert_eq!(step_rule(&c, 100, 3.0).unwrap(), StepRule::InverseTime { c1: 1.0, c2: 5.0 });
    }

    #[test]
    fn minibatch_steps_default() {
        assert_eq!(default_minibatch_steps(100_000), 132);
        assert_eq!(default_minibatch_steps(1), 1);
        assert_eq!(default_minibatch_steps(3), 1);
    }

    #[test]
    fn dppca_batch_meets_estimator_precondition() {
        let b = PrivacyBudget::new(0.5, 1e-5).unwrap();
        for n in [400, 5000, 100_000, 10_000_000] {
            let batch = default_dppca_batch(n, b, 0.01, EIGEN_SUBSETS_CONSTANT).unwrap();
            assert!(batch >= default_batch_size(n, 1.0).min(n) && batch <= n);
            let k = eigen_subset_count(b.halved(), 0.01 / (2.0 * (n / batch) as f64), EIGEN_SUBSETS_CONSTANT).unwrap();
            assert!(batch == n || batch / 2 >= 2 * k, "n = {n}, batch = {batch}");
        }
        // Large n keeps the plain default.
        assert_eq!(
            default_dppca_batch(10_000_000, b, 0.01, 1.0).unwrap(),
            default_batch_size(10_000_000, 1.0)
        );
    }

    #[test]
    fn manifest_path_replaces_extension() {
        assert_eq!(manifest_path(Path::new("out/r.csv")), PathBuf::from("out/r.manifest.json"));
        assert_eq!(manifest_path(Path::new("r")), PathBuf::from("r.manifest.json"));
    }
}
