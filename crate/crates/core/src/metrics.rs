//! Directions on the unit sphere, the sine distance between them, and a dense
//! symmetric eigensolver used both by estimators and as a test oracle.

use std::ops::Deref;

use nalgebra::SymmetricEigen;

use crate::error::{invalid, Result};
use crate::rng::{standard_normal_vector, Rng};
use crate::{Matrix, Vector};

const UNIT_TOLERANCE: f64 = 1e-9;

/// A vector with unit Euclidean norm.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitVector(Vector);

impl UnitVector {
    /// Normalizes `v`. Fails on zero or non-finite input.
    pub fn new(v: Vector) -> Result<Self> {
        if v.iter().any(|x| !x.is_finite()) {
            return Err(invalid("vector has non-finite entries"));
        }
        let norm = v.norm();
        if norm == 0.0 {
            return Err(invalid("cannot normalize the zero vector"));
        }
        Ok(Self(v / norm))
    }

    pub fn from_slice(components: &[f64]) -> Result<Self> {
        Self::new(Vector::from_column_slice(components))
    }

    /// Standard basis vector `e_index` in `dim` dimensions.
    pub fn basis(dim: usize, index: usize) -> Result<Self> {
        if index >= dim {
            return Err(invalid(format!("basis index {index} >= dimension {dim}")));
        }
        let mut v = Vector::zeros(dim);
        v[index] = 1.0;
        Ok(Self(v))
    }

    /// Uniform draw from the sphere: a normalized standard Gaussian vector.
    pub fn random(dim: usize, rng: &mut Rng) -> Self {
        loop {
            let g = standard_normal_vector(rng, dim);
            if let Ok(u) = Self::new(g) {
                return u;
            }
        }
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn into_inner(self) -> Vector {
        self.0
    }

    pub fn is_unit(&self) -> bool {
        (self.0.norm() - 1.0).abs() <= UNIT_TOLERANCE
    }
}

impl Deref for UnitVector {
    type Target = Vector;

    fn deref(&self) -> &Vector {
        &self.0
    }
}

impl AsRef<[f64]> for UnitVector {
    fn as_ref(&self) -> &[f64] {
        self.0.as_slice()
    }
}

/// Sine of the angle between two directions, `sqrt(1 - <u, v>^2)`.
///
/// Symmetric and invariant to the sign of either argument. Evaluated as
/// `2 a b / (a^2 + b^2)` with `a = |u - v|`, `b = |u + v|`, which keeps full
/// relative accuracy for nearly parallel directions where `1 - <u, v>^2`
/// cancels.
pub fn sin_distance(u: &UnitVector, v: &UnitVector) -> f64 {
    let (a2, b2) = u
        .iter()
        .zip(v.iter())
        .fold((0.0, 0.0), |(a2, b2), (x, y)| (a2 + (x - y) * (x - y), b2 + (x + y) * (x + y)));
    let s = a2 + b2;
    if s == 0.0 {
        return 0.0;
    }
    (2.0 * (a2 * b2).sqrt() / s).min(1.0)
}

/// [`sin_distance`] for arbitrary nonzero vectors, normalizing both first.
pub fn sin_between(u: &Vector, v: &Vector) -> Result<f64> {
    if u.len() != v.len() {
        return Err(invalid(format!(
            "dimension mismatch: {} vs {}",
            u.len(),
            v.len()
        )));
    }
    let u = UnitVector::new(u.clone())?;
    let v = UnitVector::new(v.clone())?;
    Ok(sin_distance(&u, &v))
}

pub(crate) fn symmetrized(m: &Matrix) -> Result<Matrix> {
    if !m.is_square() {
        return Err(invalid(format!(
            "matrix must be square, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    if m.iter().any(|x| !x.is_finite()) {
        return Err(invalid("matrix has NaN or infinite entries"));
    }
    Ok((m + m.transpose()) * 0.5)
}

/// Largest eigenvalue and its eigenvector of the symmetric part of `m`.
///
/// The eigenvector is signed so that its largest-magnitude coordinate is
/// positive (first such coordinate on ties).
pub fn top_eigpair(m: &Matrix) -> Result<(f64, UnitVector)> {
    let sym = symmetrized(m)?;
    if sym.nrows() == 0 {
        return Err(invalid("empty matrix"));
    }
    let eig = SymmetricEigen::new(sym);
    let (idx, &lambda) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .fold(None, |best: Option<(usize, &f64)>, (i, v)| match best {
            Some((_, b)) if b >= v => best,
            _ => Some((i, v)),
        })
        .expect("nonempty spectrum");
    let mut v = eig.eigenvectors.column(idx).into_owned();
    let pivot = v
        .iter()
        .enumerate()
        .fold((0, 0.0f64), |(bi, bv), (i, x)| {
            if x.abs() > bv.abs() {
                (i, *x)
            } else {
                (bi, bv)
            }
        })
        .1;
    if pivot < 0.0 {
        v.neg_mut();
    }
    Ok((lambda, UnitVector::new(v)?))
}

/// Largest eigenvalue of the symmetric part of `m`.
pub fn top_eigenvalue(m: &Matrix) -> Result<f64> {
    let sym = symmetrized(m)?;
    if sym.nrows() == 0 {
        return Err(invalid("empty matrix"));
    }
    Ok(sym
        .symmetric_eigenvalues()
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max))
}
