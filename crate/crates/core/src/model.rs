//! Data models: distribution parameters, samples, and synthetic generators.

use nalgebra::SymmetricEigen;

use crate::error::{invalid, Error, Result};
use crate::metrics::{symmetrized, UnitVector};
use crate::rng::{derived_rng, purpose, standard_normal, standard_normal_vector};
use crate::{Matrix, Vector};

/// Eigenvalues of a PSD input may dip below zero by at most this much.
const PSD_CLAMP: f64 = -1e-10;

/// Constants hidden in the O(.) bounds for Gaussian data.
pub const GAUSSIAN_M_CONSTANT: f64 = 1.0;
pub const GAUSSIAN_V_CONSTANT: f64 = 1.0;
pub const GAUSSIAN_GAMMA_SQ: f64 = 1.0;
pub const GAUSSIAN_K_TAIL: f64 = 4.0;
pub const GAUSSIAN_A_TAIL: f64 = 1.0;

/// Parameters of a distribution over sample matrices.
///
/// `m_bound` is in units of `lambda1`, `v_bound` in units of `lambda1^2`.
/// `kappa` is `+inf` when there is no spectral gap.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub dim: usize,
    pub sigma: Matrix,
    pub lambda1: f64,
    pub lambda2: f64,
    pub kappa: f64,
    pub m_bound: f64,
    pub v_bound: f64,
    pub k_tail: f64,
    pub a_tail: f64,
    pub gamma_sq: f64,
}

impl ModelParams {
    /// Builds parameters for population covariance `sigma`, reading the top two
    /// eigenvalues from an exact eigendecomposition.
    pub fn new(
        sigma: &Matrix,
        m_bound: f64,
        v_bound: f64,
        k_tail: f64,
        a_tail: f64,
        gamma_sq: f64,
    ) -> Result<Self> {
        let (sigma, eigenvalues) = validated_psd(sigma)?;
        for (name, value) in [("m_bound", m_bound), ("v_bound", v_bound), ("gamma_sq", gamma_sq)] {
            if !(value >= 0.0 && value.is_finite()) {
                return Err(Error::OutOfRange {
                    name,
                    value,
                    reason: "must be finite and nonnegative",
                });
            }
        }
        for (name, value) in [("k_tail", k_tail), ("a_tail", a_tail)] {
            if !(value > 0.0 && value.is_finite()) {
                return Err(Error::OutOfRange {
                    name,
                    value,
                    reason: "must be finite and positive",
                });
            }
        }
        let mut sorted: Vec<f64> = eigenvalues.iter().map(|&x| x.max(0.0)).collect();
        sorted.sort_by(|a, b| b.total_cmp(a));
        let lambda1 = sorted[0];
        let lambda2 = sorted.get(1).copied().unwrap_or(0.0);
        Ok(Self {
            dim: sigma.nrows(),
            sigma,
            lambda1,
            lambda2,
            kappa: kappa(lambda1, lambda2),
            m_bound,
            v_bound,
            k_tail,
            a_tail,
            gamma_sq,
        })
    }

    pub fn gap(&self) -> f64 {
        self.lambda1 - self.lambda2
    }

    pub fn gamma(&self) -> f64 {
        self.gamma_sq.sqrt()
    }

    pub fn has_gap(&self) -> bool {
        self.kappa.is_finite()
    }
}

fn kappa(lambda1: f64, lambda2: f64) -> f64 {
    if lambda1 > lambda2 {
        lambda1 / (lambda1 - lambda2)
    } else {
        f64::INFINITY
    }
}

/// Symmetrizes `sigma` and checks it is PSD up to the clamp tolerance.
fn validated_psd(sigma: &Matrix) -> Result<(Matrix, Vector)> {
    let sym = symmetrized(sigma)?;
    if sym.nrows() == 0 {
        return Err(invalid("covariance must be at least 1x1"));
    }
    let eigenvalues = sym.symmetric_eigenvalues();
    if let Some(&min) = eigenvalues.iter().min_by(|a, b| a.total_cmp(b)) {
        if min < PSD_CLAMP {
            return Err(invalid(format!(
                "covariance is not positive semidefinite (eigenvalue {min:e})"
            )));
        }
    }
    Ok((sym, eigenvalues))
}

/// Parameters for Gaussian samples `x x^T`, `x ~ N(0, sigma)`, with the
/// unit constants `M = d ln n`, `V = d`, `K = 4`, `a = 1`, `gamma^2 = 1`.
pub fn gaussian_model_params(sigma: &Matrix, n: usize) -> Result<ModelParams> {
    let d = sigma.nrows() as f64;
    let log_n = (n.max(1) as f64).ln();
    ModelParams::new(
        sigma,
        GAUSSIAN_M_CONSTANT * d * log_n,
        GAUSSIAN_V_CONSTANT * d,
        GAUSSIAN_K_TAIL,
        GAUSSIAN_A_TAIL,
        GAUSSIAN_GAMMA_SQ,
    )
}

/// Parameters of the signal-plus-noise model: `Sigma = v v^T + sigma^2 I`,
/// `V = d sigma^2`, `gamma^2 = sigma^2`, `a = 1`, with the given tail constant.
pub fn toy_model_params(
    v: &UnitVector,
    sigma_noise_sq: f64,
    n: usize,
    k_tail: f64,
) -> Result<ModelParams> {
    let d = v.dim();
    let sigma = toy_covariance(v, sigma_noise_sq)?;
    // |A - Sigma| <= |n|^2 + 2|n| + sigma^2 and |n|^2 <= d sigma^2 ln n w.h.p.
    let log_n = (n.max(1) as f64).ln();
    let m_bound = d as f64 * sigma_noise_sq * log_n + 2.0 * (d as f64 * sigma_noise_sq * log_n).sqrt();
    ModelParams::new(&sigma, m_bound, d as f64 * sigma_noise_sq, k_tail, 1.0, sigma_noise_sq)
}

pub fn toy_covariance(v: &UnitVector, sigma_noise_sq: f64) -> Result<Matrix> {
    check_noise_level(sigma_noise_sq)?;
    let d = v.dim();
    Ok(&**v * v.transpose() + Matrix::identity(d, d) * sigma_noise_sq)
}

/// Covariance with eigenvalue `lambda1` along `e_1` and `lambda2` elsewhere.
pub fn spiked_covariance(dim: usize, lambda1: f64, lambda2: f64) -> Result<Matrix> {
    if dim == 0 {
        return Err(invalid("dimension must be positive"));
    }
    if !(lambda1 >= lambda2 && lambda2 >= 0.0) {
        return Err(invalid(format!(
            "need lambda1 >= lambda2 >= 0, got ({lambda1}, {lambda2})"
        )));
    }
    let mut diag = Vector::from_element(dim, lambda2);
    diag[0] = lambda1;
    Ok(Matrix::from_diagonal(&diag))
}

/// One observation `A_i`. Rank-one samples keep only their factor `x_i`.
#[derive(Debug, Clone, PartialEq)]
pub enum SampleMatrix {
    /// `A = x x^T`.
    Rank1(Vector),
    /// General (not necessarily symmetric) `A`.
    Dense(Matrix),
}

impl SampleMatrix {
    pub fn dim(&self) -> usize {
        match self {
            SampleMatrix::Rank1(x) => x.len(),
            SampleMatrix::Dense(a) => a.nrows(),
        }
    }

    /// `A w`; for rank-one samples computed as `x (x . w)`.
    pub fn apply(&self, w: &Vector) -> Vector {
        match self {
            SampleMatrix::Rank1(x) => x * x.dot(w),
            SampleMatrix::Dense(a) => a * w,
        }
    }

    pub fn factor(&self) -> Option<&Vector> {
        match self {
            SampleMatrix::Rank1(x) => Some(x),
            SampleMatrix::Dense(_) => None,
        }
    }

    pub fn to_dense(&self) -> Matrix {
        match self {
            SampleMatrix::Rank1(x) => x * x.transpose(),
            SampleMatrix::Dense(a) => a.clone(),
        }
    }
}

/// An ordered stream of samples sharing one dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    samples: Vec<SampleMatrix>,
    seed: u64,
}

impl Dataset {
    /// `seed` records the generator seed; use 0 for external data.
    pub fn new(samples: Vec<SampleMatrix>, seed: u64) -> Result<Self> {
        if let Some(first) = samples.first() {
            let d = first.dim();
            if d == 0 {
                return Err(invalid("samples must have positive dimension"));
            }
            if let SampleMatrix::Dense(a) = first {
                if !a.is_square() {
                    return Err(invalid("dense samples must be square"));
                }
            }
            if let Some(bad) = samples.iter().position(|s| {
                s.dim() != d || matches!(s, SampleMatrix::Dense(a) if !a.is_square())
            }) {
                return Err(invalid(format!(
                    "sample {bad} does not match dimension {d}"
                )));
            }
        }
        Ok(Self { samples, seed })
    }

    pub fn samples(&self) -> &[SampleMatrix] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Dimension `d`, or 0 for an empty dataset.
    pub fn dim(&self) -> usize {
        self.samples.first().map_or(0, SampleMatrix::dim)
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Same samples in the order given by `perm` (a permutation of indices).
    pub fn permuted(&self, perm: &[usize]) -> Self {
        Self {
            samples: perm.iter().map(|&i| self.samples[i].clone()).collect(),
            seed: self.seed,
        }
    }

    /// `(1/n) sum A_i`.
    pub fn empirical_mean(&self) -> Matrix {
        let d = self.dim();
        let mut acc = Matrix::zeros(d, d);
        for s in &self.samples {
            match s {
                SampleMatrix::Rank1(x) => acc.ger(1.0, x, x, 1.0),
                SampleMatrix::Dense(a) => acc += a,
            }
        }
        if !self.samples.is_empty() {
            acc /= self.samples.len() as f64;
        }
        acc
    }
}

/// `n` samples `x x^T` with `x ~ N(0, sigma)`.
///
/// `x = L z` with `L = Q diag(sqrt(max(lambda, 0)))` from the eigendecomposition
/// of the symmetrized `sigma`, so singular covariances are accepted.
pub fn sample_gaussian_dataset(sigma: &Matrix, n: usize, seed: u64) -> Result<Dataset> {
    if n == 0 {
        return Err(invalid("sample count must be at least 1"));
    }
    let (sym, _) = validated_psd(sigma)?;
    let d = sym.nrows();
    let eig = SymmetricEigen::new(sym);
    let scales = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    let factor = eig.eigenvectors * Matrix::from_diagonal(&scales);
    let mut rng = derived_rng(seed, &[purpose::DATA]);
    let samples = (0..n)
        .map(|_| SampleMatrix::Rank1(&factor * standard_normal_vector(&mut rng, d)))
        .collect();
    Dataset::new(samples, seed)
}

fn check_noise_level(sigma_noise_sq: f64) -> Result<()> {
    if !(sigma_noise_sq >= 0.0 && sigma_noise_sq.is_finite()) {
        return Err(Error::OutOfRange {
            name: "sigma_noise_sq",
            value: sigma_noise_sq,
            reason: "must be finite and nonnegative",
        });
    }
    Ok(())
}

/// Signal-plus-noise samples: `x = s + n`, `s = +-v` equiprobably,
/// `n ~ N(0, sigma^2 I)`, `A = x x^T`.
pub fn sample_toy_dataset(v: &Vector, sigma_noise_sq: f64, n: usize, seed: u64) -> Result<Dataset> {
    if n == 0 {
        return Err(invalid("sample count must be at least 1"));
    }
    if (v.norm() - 1.0).abs() > 1e-9 {
        return Err(invalid(format!("signal direction must be unit norm, got {}", v.norm())));
    }
    check_noise_level(sigma_noise_sq)?;
    let sd = sigma_noise_sq.sqrt();
    let mut rng = derived_rng(seed, &[purpose::DATA]);
    let samples = (0..n)
        .map(|_| {
            let sign = if rand::Rng::random::<bool>(&mut rng) { 1.0 } else { -1.0 };
            let noise = Vector::from_fn(v.len(), |_, _| sd * standard_normal(&mut rng));
            SampleMatrix::Rank1(v * sign + noise)
        })
        .collect();
    Dataset::new(samples, seed)
}

/// Copy of `dataset` with the sample at `index` replaced.
pub fn make_neighboring(dataset: &Dataset, index: usize, replacement: SampleMatrix) -> Result<Dataset> {
    if index >= dataset.len() {
        return Err(Error::IndexOutOfRange {
            index,
            len: dataset.len(),
        });
    }
    if replacement.dim() != dataset.dim() {
        return Err(invalid(format!(
            "replacement has dimension {}, dataset has {}",
            replacement.dim(),
            dataset.dim()
        )));
    }
    let mut samples = dataset.samples.clone();
    samples[index] = replacement;
    Dataset::new(samples, dataset.seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::{sin_distance, top_eigpair};

    fn diag(values: &[f64]) -> Matrix {
        Matrix::from_diagonal(&Vector::from_column_slice(values))
    }

    #[test]
    fn zero_covariance_gives_zero_samples() {
        let ds = sample_gaussian_dataset(&Matrix::zeros(3, 3), 5, 1).unwrap();
        assert_eq!(ds.len(), 5);
        for s in ds.samples() {
            assert!(s.to_dense().iter().all(|&x| x == 0.0));
        }
    }

    #[test]
    fn gaussian_empirical_mean_concentrates() {
        let ds = sample_gaussian_dataset(&Matrix::identity(2, 2), 100_000, 5).unwrap();
        let err = (ds.empirical_mean() - Matrix::identity(2, 2)).norm();
        // Frobenius bounds the spectral norm.
        assert!(err < 0.05, "deviation {err}");
    }

    #[test]
    fn generation_is_deterministic() {
        let sigma = diag(&[2.0, 1.0, 0.5]);
        let a = sample_gaussian_dataset(&sigma, 50, 9).unwrap();
        let b = sample_gaussian_dataset(&sigma, 50, 9).unwrap();
        let c = sample_gaussian_dataset(&sigma, 50, 10).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        let v = Vector::from_column_slice(&[0.0, 1.0]);
        assert_eq!(
            sample_toy_dataset(&v, 0.1, 20, 3).unwrap(),
            sample_toy_dataset(&v, 0.1, 20, 3).unwrap()
        );
    }

    #[test]
    fn indefinite_covariance_is_rejected() {
        let m = Matrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(matches!(
            sample_gaussian_dataset(&m, 3, 0),
            Err(Error::InvalidInput(_))
        ));
        // Tiny asymmetry is tolerated.
        let near = Matrix::from_row_slice(2, 2, &[1.0, 1e-14, 0.0, 1.0]);
        assert!(sample_gaussian_dataset(&near, 3, 0).is_ok());
    }

    #[test]
    fn rank_one_factor_matches_dense() {
        let ds = sample_gaussian_dataset(&diag(&[1.0, 2.0, 3.0]), 10, 4).unwrap();
        let w = Vector::from_column_slice(&[0.3, -0.2, 0.9]);
        for s in ds.samples() {
            let x = s.factor().unwrap();
            let dense = s.to_dense();
            assert!((dense.clone() - x * x.transpose()).amax() <= 1e-12);
            assert!((s.apply(&w) - dense * &w).amax() <= 1e-12);
        }
    }

    #[test]
    fn toy_noiseless_samples_are_projector() {
        let v = Vector::from_column_slice(&[0.6, 0.8]);
        let ds = sample_toy_dataset(&v, 0.0, 10, 2).unwrap();
        let vvt = &v * v.transpose();
        for s in ds.samples() {
            assert_eq!(s.to_dense(), vvt);
        }
    }

    #[test]
    fn toy_rejects_non_unit_direction() {
        let v = Vector::from_column_slice(&[1.0, 1.0]);
        assert!(sample_toy_dataset(&v, 0.1, 10, 0).is_err());
    }

    #[test]
    fn toy_top_direction_recovered() {
        let mut v = Vector::zeros(4);
        v[0] = 1.0;
        let ds = sample_toy_dataset(&v, 0.01, 100_000, 7).unwrap();
        let (_, top) = top_eigpair(&ds.empirical_mean()).unwrap();
        let e1 = UnitVector::basis(4, 0).unwrap();
        assert!(sin_distance(&top, &e1) < 0.05);
    }

    #[test]
    fn toy_population_eigenvalues() {
        let v = UnitVector::basis(5, 2).unwrap();
        let p = toy_model_params(&v, 0.1, 1000, 1.0).unwrap();
        assert!((p.lambda1 - 1.1).abs() < 1e-12);
        assert!((p.lambda2 - 0.1).abs() < 1e-12);
        assert!((p.gamma_sq - 0.1).abs() < 1e-15);
    }

    #[test]
    fn gaussian_params_examples() {
        let p = gaussian_model_params(&diag(&[1.0, 0.5]), 100).unwrap();
        assert!((p.lambda1 - 1.0).abs() < 1e-12);
        assert!((p.lambda2 - 0.5).abs() < 1e-12);
        assert!((p.kappa - 2.0).abs() < 1e-12);
        assert_eq!(p.k_tail, 4.0);
        assert_eq!(p.a_tail, 1.0);

        let flat = gaussian_model_params(&Matrix::identity(3, 3), 100).unwrap();
        assert!(flat.kappa.is_infinite());
        assert!(!flat.has_gap());

        let p = gaussian_model_params(&diag(&[2.0, 1.0, 1.0]), 1000).unwrap();
        assert!((p.m_bound - 3.0 * 1000f64.ln()).abs() < 1e-12);
        assert!((p.m_bound - 20.7233).abs() < 1e-4);
        assert_eq!(p.v_bound, 3.0);
        assert!((p.kappa - p.lambda1 / (p.lambda1 - p.lambda2)).abs() <= 1e-12 * p.kappa);
    }

    #[test]
    fn neighboring_edits() {
        let ds = sample_gaussian_dataset(&Matrix::identity(2, 2), 6, 1).unwrap();
        let same = make_neighboring(&ds, 0, ds.samples()[0].clone()).unwrap();
        assert_eq!(same, ds);

        let replacement = SampleMatrix::Rank1(Vector::from_column_slice(&[9.0, 9.0]));
        let nb = make_neighboring(&ds, 3, replacement).unwrap();
        let differing = ds
            .samples()
            .iter()
            .zip(nb.samples())
            .filter(|(a, b)| a != b)
            .count();
        assert_eq!(differing, 1);

        // Multiset symmetric difference has at most two elements.
        let removed = ds.samples().iter().filter(|s| !nb.samples().contains(s)).count();
        let added = nb.samples().iter().filter(|s| !ds.samples().contains(s)).count();
        assert!(removed + added <= 2);

        assert!(matches!(
            make_neighboring(&ds, 6, ds.samples()[0].clone()),
            Err(Error::IndexOutOfRange { index: 6, len: 6 })
        ));
    }
}
