//! Input perturbation baseline: top eigenvector of the empirical covariance
//! plus a symmetric Gaussian noise matrix.

use crate::error::{invalid, Error, Result};
use crate::metrics::{top_eigpair, UnitVector};
use crate::model::Dataset;
use crate::privacy::{gaussian_sigma, PrivacyBudget};
use crate::rng::{derived_rng, purpose, standard_normal};
use crate::{Matrix, Vector};

/// `beta = sqrt(lambda1 d ln(n / zeta))`, a high-probability bound on the
/// norm of Gaussian samples.
pub fn default_norm_bound(lambda1: f64, dim: usize, n: usize, zeta: f64) -> f64 {
    (lambda1 * dim as f64 * (n.max(1) as f64 / zeta).ln()).sqrt()
}

/// Entry standard deviation `(beta^2 / (n epsilon)) sqrt(2 ln(1.25 / delta))`.
pub fn baseline_noise_std(norm_bound: f64, n: usize, budget: PrivacyBudget) -> Result<f64> {
    gaussian_sigma(norm_bound * norm_bound / n as f64, budget)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaselineReport {
    /// Samples whose norm exceeded the bound and were projected onto the ball.
    pub projected: usize,
    pub noise_std: f64,
}

/// Symmetric matrix with independent `N(0, std^2)` entries on and above the
/// diagonal, mirrored below.
pub fn symmetric_gaussian_noise(dim: usize, std: f64, seed: u64) -> Matrix {
    let mut rng = derived_rng(seed, &[purpose::NOISE]);
    let mut z = Matrix::zeros(dim, dim);
    for j in 0..dim {
        for i in 0..=j {
            let v = std * standard_normal(&mut rng);
            z[(i, j)] = v;
            z[(j, i)] = v;
        }
    }
    z
}

/// Top eigenvector of `Sigma_hat + Z`, where `Sigma_hat` is the centered
/// empirical covariance of the sample vectors after projecting them into the
/// ball of radius `norm_bound`.
///
/// Needs rank-one samples `x x^T`.
pub fn gaussian_mechanism_pca(
    dataset: &Dataset,
    norm_bound: f64,
    budget: PrivacyBudget,
    seed: u64,
) -> Result<(UnitVector, BaselineReport)> {
    if dataset.is_empty() {
        return Err(invalid("dataset is empty"));
    }
    if !(norm_bound > 0.0 && norm_bound.is_finite()) {
        return Err(Error::OutOfRange {
            name: "norm_bound",
            value: norm_bound,
            reason: "must be positive and finite",
        });
    }
    let n = dataset.len();
    let d = dataset.dim();
    let mut projected = 0;
    let mut xs = Vec::with_capacity(n);
    for s in dataset.samples() {
        let x = s
            .factor()
            .ok_or_else(|| invalid("the covariance baseline needs rank-one samples"))?;
        let norm = x.norm();
        if norm > norm_bound {
            projected += 1;
            xs.push(x * (norm_bound / norm));
        } else {
            xs.push(x.clone());
        }
    }
    let mean = xs.iter().fold(Vector::zeros(d), |acc, x| acc + x) / n as f64;
    let mut cov = Matrix::zeros(d, d);
    for x in &xs {
        let c = x - &mean;
        cov.syger(1.0, &c, &c, 1.0);
    }
    cov.fill_lower_triangle_with_upper_triangle();
    cov /= n as f64;
    let noise_std = baseline_noise_std(norm_bound, n, budget)?;
    cov += symmetric_gaussian_noise(d, noise_std, seed);
    let (_, v) = top_eigpair(&cov)?;
    Ok((v, BaselineReport { projected, noise_std }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::sin_distance;
    use crate::model::{sample_gaussian_dataset, spiked_covariance, SampleMatrix};

    #[test]
    fn noise_is_exactly_symmetric() {
        let z = symmetric_gaussian_noise(7, 1.3, 11);
        assert_eq!(z, z.transpose());
        assert!(z.iter().all(|x| *x != 0.0));
    }

    #[test]
    fn noise_std_quadruples_with_doubled_bound() {
        let b = PrivacyBudget::new(0.5, 1e-5).unwrap();
        let s1 = baseline_noise_std(1.5, 1000, b).unwrap();
        let s2 = baseline_noise_std(3.0, 1000, b).unwrap();
        assert!((s2 / s1 - 4.0).abs() < 1e-12);
        let expected = 1.5f64.powi(2) / (1000.0 * 0.5) * (2.0 * (1.25e5f64).ln()).sqrt();
        assert!((s1 - expected).abs() < 1e-15);
    }

    #[test]
    fn recovers_spike_with_little_noise() {
        let sigma = spiked_covariance(6, 3.0, 1.0).unwrap();
        let ds = sample_gaussian_dataset(&sigma, 50_000, 5).unwrap();
        let beta = default_norm_bound(3.0, 6, 50_000, 0.01);
        let b = PrivacyBudget::new(0.99, 1e-3).unwrap();
        let (v, report) = gaussian_mechanism_pca(&ds, beta, b, 1).unwrap();
        assert!(report.noise_std < 0.03);
        assert!(sin_distance(&v, &UnitVector::basis(6, 0).unwrap()) < 0.05);
    }

    #[test]
    fn projects_violators() {
        let samples = vec![
            SampleMatrix::Rank1(Vector::from_column_slice(&[3.0, 4.0])),
            SampleMatrix::Rank1(Vector::from_column_slice(&[0.1, 0.0])),
        ];
        let ds = Dataset::new(samples, 0).unwrap();
        let b = PrivacyBudget::new(0.5, 1e-5).unwrap();
        let (_, report) = gaussian_mechanism_pca(&ds, 1.0, b, 0).unwrap();
        assert_eq!(report.projected, 1);
    }

    #[test]
    fn rejects_dense_samples_and_bad_bound() {
        let ds = Dataset::new(vec![SampleMatrix::Dense(Matrix::identity(2, 2))], 0).unwrap();
        let b = PrivacyBudget::new(0.5, 1e-5).unwrap();
        assert!(gaussian_mechanism_pca(&ds, 1.0, b, 0).is_err());
        let ds = sample_gaussian_dataset(&Matrix::identity(2, 2), 10, 0).unwrap();
        assert!(gaussian_mechanism_pca(&ds, 0.0, b, 0).is_err());
    }
}
