//! Private top-eigenvalue estimation of a gradient covariance and private
//! mean estimation with truncation scaled by that eigenvalue.
//!
//! Both rely on [`stable_histogram`], which only perturbs occupied bins and can
//! therefore work over unbounded bin families: geometric bins of ratio
//! `2^(1/4)` for eigenvalues and linear bins of width `tau` for coordinates.

use crate::error::{invalid, Error, Result};
use crate::metrics::top_eigenvalue;
use crate::oja::check_zeta;
use crate::privacy::{
    advanced_composition_split, gaussian_sigma, serial_compose, stable_histogram, BinFamily,
    HistogramOutcome, PrivacyBudget,
};
use crate::rng::{derive_seed, derived_rng, purpose, standard_normal_vector};
use crate::{Matrix, Vector};

/// Default multiplier in the number of subsets `k = ceil(C ln(1 / (delta zeta)) / epsilon)`.
///
/// The release threshold of the histogram over `k` eigenvalues is roughly
/// `2 ln(2 / delta) / (epsilon k)`, i.e. about `1.5 / C` of the total mass, so
/// the constant must be well above 2 for any bin to survive. Raising it shrinks
/// the threshold like `1 / C` while the fullest bin only shrinks like
/// `1 / sqrt(C)`, at the price of upward bias once subsets get small.
pub const EIGEN_SUBSETS_CONSTANT: f64 = 16.0;

/// Id of the reserved bin holding exact zeros.
pub const ZERO_BIN: i64 = i64::MIN;

const QUARTER_POWERS: [f64; 4] = [
    1.0,
    1.189_207_115_002_721, // 2^(1/4)
    std::f64::consts::SQRT_2,
    1.681_792_830_507_429, // 2^(3/4)
];

/// Index `k` of the geometric bin `[2^(k/4), 2^((k+1)/4))` containing
/// `lambda > 0`, or [`ZERO_BIN`] for `lambda <= 0`.
///
/// Computed from the binary exponent and mantissa, so scaling by a power of
/// two shifts the index by an exact multiple of four.
pub fn geometric_bin(lambda: f64) -> i64 {
    if !(lambda > 0.0) {
        return ZERO_BIN;
    }
    let (mut x, mut shift) = (lambda, 0i64);
    if x < f64::MIN_POSITIVE {
        x *= 2f64.powi(64);
        shift = -64;
    }
    let bits = x.to_bits();
    let exponent = ((bits >> 52) & 0x7ff) as i64 - 1023 + shift;
    let mantissa = f64::from_bits((bits & ((1u64 << 52) - 1)) | (1023u64 << 52));
    let quarter = QUARTER_POWERS[1..].iter().filter(|&&q| mantissa >= q).count() as i64;
    4 * exponent + quarter
}

/// Lower edge `2^(k/4)` of geometric bin `k`; zero for [`ZERO_BIN`].
pub fn geometric_bin_lower_edge(index: i64) -> f64 {
    if index == ZERO_BIN {
        return 0.0;
    }
    let whole = index.div_euclid(4);
    let part = index.rem_euclid(4) as usize;
    2f64.powi(whole as i32) * QUARTER_POWERS[part]
}

/// Output of the private top-eigenvalue estimator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EigenEstimate {
    /// Lower edge of geometric bin `index`.
    Bin { index: i64 },
    /// The reserved zero bin won.
    Zero,
    /// Every bin was suppressed.
    Bottom,
}

impl EigenEstimate {
    pub fn value(&self) -> Option<f64> {
        match self {
            EigenEstimate::Bin { index } => Some(geometric_bin_lower_edge(*index)),
            EigenEstimate::Zero => Some(0.0),
            EigenEstimate::Bottom => None,
        }
    }

    pub fn is_bottom(&self) -> bool {
        matches!(self, EigenEstimate::Bottom)
    }

    pub fn bin_index(&self) -> Option<i64> {
        match self {
            EigenEstimate::Bin { index } => Some(*index),
            EigenEstimate::Zero => Some(ZERO_BIN),
            EigenEstimate::Bottom => None,
        }
    }
}

/// Number of disjoint subsets the pair differences are split into.
pub fn eigen_subset_count(budget: PrivacyBudget, zeta: f64, constant: f64) -> Result<usize> {
    check_zeta(zeta)?;
    if !(constant > 0.0 && constant.is_finite()) {
        return Err(Error::OutOfRange {
            name: "subsets_constant",
            value: constant,
            reason: "must be finite and positive",
        });
    }
    let k = constant * (1.0 / (budget.delta() * zeta)).ln() / budget.epsilon();
    Ok((k.ceil() as usize).max(1))
}

/// Top eigenvalue of `(1/b) G G^T` where the columns of `G` are `vectors`,
/// via the `b x b` Gram matrix when `b < d`.
pub fn scatter_top_eigenvalue(vectors: &[Vector]) -> Result<f64> {
    let b = vectors.len();
    if b == 0 {
        return Err(invalid("no vectors"));
    }
    let d = vectors[0].len();
    let m = if b < d {
        Matrix::from_fn(b, b, |i, j| vectors[i].dot(&vectors[j]))
    } else {
        let mut acc = Matrix::zeros(d, d);
        for v in vectors {
            acc.ger(1.0, v, v, 1.0);
        }
        acc
    };
    Ok(top_eigenvalue(&m)? / b as f64)
}

/// Pair differences `g_{2i} - g_{2i-1}` split into `k` contiguous subsets of
/// size `floor(B / 2k)`, returning each subset's scatter top eigenvalue. The
/// values are not private.
pub fn subset_eigenvalues(gradients: &[Vector], subsets: usize) -> Result<Vec<f64>> {
    if subsets == 0 {
        return Err(invalid("need at least one subset"));
    }
    let needed = 2 * subsets;
    if gradients.len() < needed {
        return Err(Error::InsufficientSamples {
            needed,
            got: gradients.len(),
        });
    }
    let diffs: Vec<Vector> = gradients
        .chunks_exact(2)
        .map(|pair| &pair[1] - &pair[0])
        .collect();
    let size = gradients.len() / needed;
    diffs
        .chunks_exact(size)
        .take(subsets)
        .map(scatter_top_eigenvalue)
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct TopEigenvalueOutcome {
    pub estimate: EigenEstimate,
    pub subsets: usize,
    pub subset_size: usize,
    pub histogram: HistogramOutcome,
}

/// Private estimate of the top eigenvalue of the covariance of the pair
/// differences `g_{2i} - g_{2i-1}` (twice the gradient covariance).
///
/// The differences are split into `k` subsets (see [`EIGEN_SUBSETS_CONSTANT`]), each subset's top eigenvalue is
/// placed in a geometric bin, and the lower edge of the fullest bin of a
/// stability histogram is returned (smallest index on ties).
pub fn private_top_eigenvalue(
    gradients: &[Vector],
    budget: PrivacyBudget,
    zeta: f64,
    subsets_constant: f64,
    seed: u64,
) -> Result<TopEigenvalueOutcome> {
    let subsets = eigen_subset_count(budget, zeta, subsets_constant)?;
    let eigenvalues = subset_eigenvalues(gradients, subsets)?;
    let bins: Vec<i64> = eigenvalues.iter().map(|&l| geometric_bin(l)).collect();
    let histogram = stable_histogram(
        &bins,
        subsets,
        budget,
        derive_seed(seed, &[purpose::HISTOGRAM]),
    )?
    .with_bins(BinFamily::Geometric {
        ratio: QUARTER_POWERS[1],
        zero_bin: ZERO_BIN,
    });
    let estimate = match histogram.max_bin() {
        None => EigenEstimate::Bottom,
        Some((ZERO_BIN, _)) => EigenEstimate::Zero,
        Some((index, _)) => EigenEstimate::Bin { index },
    };
    Ok(TopEigenvalueOutcome {
        estimate,
        subsets,
        subset_size: gradients.len() / (2 * subsets),
        histogram,
    })
}

/// How [`private_mean`] divides its budget: half over `d` coordinate
/// histograms by advanced composition, half to the Gaussian mechanism.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanBudgetSplit {
    pub histograms: PrivacyBudget,
    pub per_coordinate: PrivacyBudget,
    pub gaussian: PrivacyBudget,
}

impl MeanBudgetSplit {
    pub fn new(budget: PrivacyBudget, dim: usize) -> Result<Self> {
        let half = budget.halved();
        Ok(Self {
            histograms: half,
            per_coordinate: advanced_composition_split(half, dim)?,
            gaussian: half,
        })
    }

    /// Serial composition of the two halves.
    pub fn total(&self) -> Result<PrivacyBudget> {
        serial_compose(&[self.histograms, self.gaussian])
    }
}

/// `ln^a(x)` with the natural logarithm.
pub fn log_power(x: f64, a: f64) -> f64 {
    x.ln().powf(a)
}

/// Linear histogram bin width `tau = 2^(1/4) K sqrt(lambda_hat) ln^a(25)`.
pub fn mean_bin_width(lambda_hat: f64, k_tail: f64, a_tail: f64) -> f64 {
    QUARTER_POWERS[1] * k_tail * lambda_hat.sqrt() * log_power(25.0, a_tail)
}

/// Truncation half-width `3 K sqrt(lambda_hat) ln^a(B d / zeta)`.
pub fn truncation_radius(lambda_hat: f64, k_tail: f64, a_tail: f64, batch: usize, dim: usize, zeta: f64) -> f64 {
    3.0 * k_tail * lambda_hat.sqrt() * log_power(batch as f64 * dim as f64 / zeta, a_tail)
}

/// Per-coordinate standard deviation of the Gaussian noise added to the
/// truncated mean: `12 K sqrt(lambda_hat) ln^a(B d / zeta) sqrt(2 d ln(2.5 / delta)) / (epsilon B)`.
pub fn mean_noise_std(
    lambda_hat: f64,
    k_tail: f64,
    a_tail: f64,
    batch: usize,
    dim: usize,
    zeta: f64,
    budget: PrivacyBudget,
) -> f64 {
    12.0 * k_tail
        * lambda_hat.sqrt()
        * log_power(batch as f64 * dim as f64 / zeta, a_tail)
        * (2.0 * dim as f64 * (2.5 / budget.delta()).ln()).sqrt()
        / (budget.epsilon() * batch as f64)
}

/// Center of truncation and bin id of coordinate `value` for linear bins
/// `(k tau, (k + 1) tau]`.
fn linear_bin(value: f64, width: f64) -> i64 {
    ((value / width).ceil() - 1.0) as i64
}

/// A cube `center + [-half_width, half_width]^d`.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncationBox {
    pub center: Vector,
    pub half_width: f64,
}

impl TruncationBox {
    /// Truncates `g` into the box, returning how many coordinates moved.
    pub fn truncate(&self, g: &mut Vector) -> usize {
        let mut moved = 0;
        for (x, c) in g.iter_mut().zip(self.center.iter()) {
            let clamped = x.clamp(c - self.half_width, c + self.half_width);
            if clamped != *x {
                moved += 1;
                *x = clamped;
            }
        }
        moved
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrivateMeanOutcome {
    pub mean: Vector,
    /// Number of (sample, coordinate) entries that were truncated.
    pub truncated_entries: usize,
    pub truncation: TruncationBox,
    pub noise_std: f64,
    pub split: MeanBudgetSplit,
}

/// Private mean of `B` gradients given an eigenvalue scale `lambda_hat`.
///
/// Each coordinate is located with a stability histogram over bins of width
/// `tau`; gradients are truncated to a box around the located centers and the
/// truncated mean is released with the Gaussian mechanism.
#[allow(clippy::too_many_arguments)]
pub fn private_mean(
    gradients: &[Vector],
    budget: PrivacyBudget,
    zeta: f64,
    lambda_hat: f64,
    k_tail: f64,
    a_tail: f64,
    seed: u64,
) -> Result<PrivateMeanOutcome> {
    if !(lambda_hat > 0.0 && lambda_hat.is_finite()) {
        return Err(Error::OutOfRange {
            name: "lambda_hat",
            value: lambda_hat,
            reason: "eigenvalue scale must be positive and finite",
        });
    }
    if !(budget.epsilon() < 0.9) {
        return Err(Error::OutOfRange {
            name: "epsilon",
            value: budget.epsilon(),
            reason: "private mean estimation requires epsilon < 0.9",
        });
    }
    check_zeta(zeta)?;
    let batch = gradients.len();
    if batch == 0 {
        return Err(Error::InsufficientSamples { needed: 1, got: 0 });
    }
    let dim = gradients[0].len();
    let split = MeanBudgetSplit::new(budget, dim)?;
    let width = mean_bin_width(lambda_hat, k_tail, a_tail);
    let radius = truncation_radius(lambda_hat, k_tail, a_tail, batch, dim, zeta);

    let mut center = Vector::zeros(dim);
    for j in 0..dim {
        let bins: Vec<i64> = gradients.iter().map(|g| linear_bin(g[j], width)).collect();
        let hist = stable_histogram(
            &bins,
            batch,
            split.per_coordinate,
            derive_seed(seed, &[purpose::HISTOGRAM, j as u64]),
        )?;
        let (bin, _) = hist.max_bin().ok_or_else(|| {
            Error::EstimationFailed(format!("coordinate {j}: every histogram bin was suppressed"))
        })?;
        center[j] = bin as f64 * width;
    }
    let truncation = TruncationBox {
        center,
        half_width: radius,
    };

    let mut sum = Vector::zeros(dim);
    let mut truncated_entries = 0;
    for g in gradients {
        let mut g = g.clone();
        truncated_entries += truncation.truncate(&mut g);
        sum += g;
    }
    let sensitivity = 2.0 * radius * (dim as f64).sqrt() / batch as f64;
    let noise_std = gaussian_sigma(sensitivity, split.gaussian)?;
    let mut rng = derived_rng(seed, &[purpose::NOISE]);
    let mean = sum / batch as f64 + standard_normal_vector(&mut rng, dim) * noise_std;
    Ok(PrivateMeanOutcome {
        mean,
        truncated_entries,
        truncation,
        noise_std,
        split,
    })
}
