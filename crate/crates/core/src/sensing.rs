//! Gaussian sensing ensembles and the lifted measurement operators.
//!
//! For sensing vectors `z_1..z_m`:
//!
//! * `A(x)_i = |<x, z_i>|^2` (phaseless measurements of a vector),
//! * `A(X)_i = z_i* X z_i` (the lifted, linear version; `A(xx*) = A(x)`),
//! * `A*(lam) = sum_i lam_i z_i z_i*`.
//!
//! The moment operator `S` satisfies `E[A*A] = m S` for the real Gaussian law.

use std::fmt;

use nalgebra::{DMatrix, DVector};

use crate::error::{check_dim, Error, Result};
use crate::matcore::{Field, HermitianMatrix, Scalar};
use crate::rng;

/// `m` sensing vectors of length `n`, stored as the columns of an `n x m`
/// matrix. Ensembles drawn by [`sample_ensemble`] remember their seed and can
/// be regenerated from `(n, m, field, seed)` alone.
#[derive(Clone)]
pub struct SensingEnsemble<T: Field> {
    vectors: DMatrix<T>,
    seed: Option<u64>,
}

impl<T: Field> fmt::Debug for SensingEnsemble<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SensingEnsemble")
            .field("n", &self.n())
            .field("m", &self.m())
            .field("field", &T::SCALAR)
            .field("seed", &self.seed)
            .finish()
    }
}

/// Draws `m` i.i.d. Gaussian sensing vectors from the stream `seed`.
///
/// Coordinates are consumed vector by vector; a complex coordinate takes its
/// real part first, then its imaginary part.
pub fn sample_ensemble<T: Field>(n: usize, m: usize, seed: u64) -> Result<SensingEnsemble<T>> {
    if n == 0 || m == 0 {
        return Err(Error::InvalidArgument(format!(
            "ensemble needs n >= 1 and m >= 1, got n={n}, m={m}"
        )));
    }
    let mut r = rng::stream(seed);
    let mut vectors = DMatrix::zeros(n, m);
    for i in 0..m {
        for k in 0..n {
            vectors[(k, i)] = T::sample_standard(&mut r);
        }
    }
    Ok(SensingEnsemble {
        vectors,
        seed: Some(seed),
    })
}

impl<T: Field> SensingEnsemble<T> {
    /// Ensemble with explicitly given vectors (columns of `vectors`).
    pub fn from_vectors(vectors: DMatrix<T>) -> Result<Self> {
        if vectors.nrows() == 0 || vectors.ncols() == 0 {
            return Err(Error::InvalidArgument("ensemble needs n >= 1 and m >= 1".into()));
        }
        if vectors.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Self { vectors, seed: None })
    }

    pub fn n(&self) -> usize {
        self.vectors.nrows()
    }

    pub fn m(&self) -> usize {
        self.vectors.ncols()
    }

    pub fn field(&self) -> Scalar {
        T::SCALAR
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn vectors(&self) -> &DMatrix<T> {
        &self.vectors
    }

    pub fn vector(&self, i: usize) -> DVector<T> {
        self.vectors.column(i).into_owned()
    }

    /// Plain-text header `n m field seed`. Vectors are never serialized.
    pub fn header(&self) -> Result<String> {
        let seed = self.seed.ok_or_else(|| {
            Error::InvalidArgument("ensemble built from explicit vectors has no seed".into())
        })?;
        Ok(format!("{} {} {} {}", self.n(), self.m(), T::SCALAR, seed))
    }

    /// Regenerates an ensemble from its header.
    pub fn from_header(line: &str) -> Result<Self> {
        let parts: Vec<&str> = line.split_whitespace().collect();
        let [n, m, field, seed] = parts[..] else {
            return Err(Error::InvalidArgument(format!("malformed ensemble header `{line}`")));
        };
        let parse = |s: &str| {
            s.parse::<u64>()
                .map_err(|_| Error::InvalidArgument(format!("bad integer `{s}` in ensemble header")))
        };
        let field: Scalar = field.parse()?;
        if field != T::SCALAR {
            return Err(Error::InvalidArgument(format!(
                "header field `{field}` does not match requested `{}`",
                T::SCALAR
            )));
        }
        sample_ensemble(parse(n)? as usize, parse(m)? as usize, parse(seed)?)
    }
}

/// Phaseless measurements together with the declared noise level.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementVector {
    pub values: DVector<f64>,
    pub epsilon: f64,
}

impl MeasurementVector {
    pub fn new(values: DVector<f64>, epsilon: f64) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) || !epsilon.is_finite() {
            return Err(Error::NonFinite);
        }
        if epsilon < 0.0 {
            return Err(Error::InvalidArgument(format!("negative noise level {epsilon}")));
        }
        if epsilon == 0.0 && values.iter().any(|&v| v < 0.0) {
            return Err(Error::InvalidArgument(
                "exact measurements must be nonnegative".into(),
            ));
        }
        Ok(Self { values, epsilon })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn norm(&self) -> f64 {
        self.values.norm()
    }
}

/// `|<x, z_i>|^2` for every sensing vector.
pub fn measure<T: Field>(e: &SensingEnsemble<T>, x: &DVector<T>) -> Result<MeasurementVector> {
    check_dim(e.n(), x.len())?;
    let inner = e.vectors.ad_mul(x);
    let values = inner.map(|v| v.modulus_squared());
    Ok(MeasurementVector { values, epsilon: 0.0 })
}

/// `A(X)_i = z_i* X z_i`.
pub fn apply_lifted<T: Field>(e: &SensingEnsemble<T>, x: &HermitianMatrix<T>) -> Result<DVector<f64>> {
    check_dim(e.n(), x.dim())?;
    let w = x.matrix() * &e.vectors;
    Ok(DVector::from_iterator(
        e.m(),
        (0..e.m()).map(|i| e.vectors.column(i).dotc(&w.column(i)).real()),
    ))
}

/// `A*(lam) = sum_i lam_i z_i z_i*`.
pub fn apply_adjoint<T: Field>(e: &SensingEnsemble<T>, lam: &DVector<f64>) -> Result<HermitianMatrix<T>> {
    check_dim(e.m(), lam.len())?;
    let mut scaled = e.vectors.clone();
    for (i, &l) in lam.iter().enumerate() {
        scaled.column_mut(i).iter_mut().for_each(|v| *v = v.scale(l));
    }
    Ok(HermitianMatrix::from_matrix_unchecked(scaled * e.vectors.adjoint()))
}

/// Real: `S(X) = 2X + Tr(X) I`. Complex: `S(X) = X + Tr(X) I`.
pub fn s_apply<T: Field>(x: &HermitianMatrix<T>) -> HermitianMatrix<T> {
    let tr = x.trace();
    match T::SCALAR {
        Scalar::Real => x.scale(2.0).add_identity(tr),
        Scalar::Complex => x.add_identity(tr),
    }
}

/// Real: `S^-1(X) = (X - Tr(X) I / (n+2)) / 2`. Complex: `X - Tr(X) I / (n+1)`.
pub fn s_inverse<T: Field>(x: &HermitianMatrix<T>) -> HermitianMatrix<T> {
    let tr = x.trace();
    let n = x.dim() as f64;
    match T::SCALAR {
        Scalar::Real => x.add_identity(-tr / (n + 2.0)).scale(0.5),
        Scalar::Complex => x.add_identity(-tr / (n + 1.0)),
    }
}

/// Adds Gaussian noise rescaled to `||nu||_2 = eps * x0_norm^2` exactly.
pub fn add_noise(b: &MeasurementVector, eps: f64, x0_norm: f64, seed: u64) -> Result<MeasurementVector> {
    if !eps.is_finite() || !x0_norm.is_finite() {
        return Err(Error::NonFinite);
    }
    if eps < 0.0 {
        return Err(Error::InvalidArgument(format!("negative noise level {eps}")));
    }
    if eps == 0.0 {
        return Ok(b.clone());
    }
    let mut r = rng::stream(seed);
    let raw = DVector::from_fn(b.len(), |_, _| f64::sample_standard(&mut r));
    let target = eps * x0_norm * x0_norm;
    let nu = raw.scale(target / raw.norm());
    Ok(MeasurementVector {
        values: &b.values + nu,
        epsilon: eps,
    })
}
