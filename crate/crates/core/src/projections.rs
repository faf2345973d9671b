//! Projectors onto the PSD cone and onto the affine slice `{A(X) = b}`, and
//! the helpers that turn a lifted solution back into a vector.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{check_dim, Error, Result};
use crate::matcore::{eig, Field, HermitianMatrix};
use crate::sensing::{apply_adjoint, apply_lifted, MeasurementVector, SensingEnsemble};

/// Singular values of the Gram matrix below `PINV_RTOL * sigma_max` are
/// treated as zero.
pub const PINV_RTOL: f64 = 1e-12;

/// Cached pseudoinverse of the Gram operator `A A*` for a fixed ensemble and
/// right-hand side.
///
/// `project(X) = X + A*(G^+ (b - A(X)))`. For `m` below the dimension of the
/// Hermitian space and a nonsingular Gram matrix this is the exact orthogonal
/// projector; otherwise it projects onto the least-squares solution set.
#[derive(Debug, Clone)]
pub struct AffineProjector {
    gram: DMatrix<f64>,
    pinv: DMatrix<f64>,
    b: MeasurementVector,
    rank: usize,
    condition: f64,
    n: usize,
}

/// `G_ij = |z_i* z_j|^2`.
pub fn gram_matrix<T: Field>(e: &SensingEnsemble<T>) -> DMatrix<f64> {
    let k = e.vectors().ad_mul(e.vectors());
    let g = k.map(|v| v.modulus_squared());
    // `|k_ij| == |k_ji|` in exact arithmetic; pick one triangle so G is symmetric bit-for-bit.
    DMatrix::from_fn(g.nrows(), g.ncols(), |i, j| if i <= j { g[(i, j)] } else { g[(j, i)] })
}

pub fn build_affine_projector<T: Field>(e: &SensingEnsemble<T>, b: &MeasurementVector) -> Result<AffineProjector> {
    check_dim(e.m(), b.len())?;
    if b.values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite);
    }
    let gram = gram_matrix(e);
    if gram.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite);
    }
    let se = SymmetricEigen::new(gram.clone());
    let sigma_max = se.eigenvalues.iter().fold(0.0_f64, |acc, &s| acc.max(s));
    let sigma_min = se.eigenvalues.iter().fold(f64::INFINITY, |acc, &s| acc.min(s)).max(0.0);
    let condition = if sigma_min > 0.0 { sigma_max / sigma_min } else { f64::INFINITY };
    if !sigma_max.is_finite() || sigma_max <= 0.0 {
        return Err(Error::Factorization { condition });
    }
    let cutoff = PINV_RTOL * sigma_max;
    let m = e.m();
    let mut weighted = se.eigenvectors.clone();
    let mut rank = 0;
    for k in 0..m {
        let s = se.eigenvalues[k];
        let w = if s > cutoff {
            rank += 1;
            1.0 / s
        } else {
            0.0
        };
        weighted.column_mut(k).scale_mut(w);
    }
    let pinv = &weighted * se.eigenvectors.transpose();
    let pinv = DMatrix::from_fn(m, m, |i, j| if i <= j { pinv[(i, j)] } else { pinv[(j, i)] });
    if pinv.iter().any(|v| !v.is_finite()) {
        return Err(Error::Factorization { condition });
    }
    Ok(AffineProjector {
        gram,
        pinv,
        b: b.clone(),
        rank,
        condition,
        n: e.n(),
    })
}

impl AffineProjector {
    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    /// Moore-Penrose pseudoinverse of the Gram matrix.
    pub fn gram_pinv(&self) -> &DMatrix<f64> {
        &self.pinv
    }

    pub fn measurements(&self) -> &MeasurementVector {
        &self.b
    }

    /// Numerical rank of the Gram matrix.
    pub fn rank(&self) -> usize {
        self.rank
    }

    /// `sigma_max / sigma_min` of the Gram matrix (infinite when singular).
    pub fn condition_estimate(&self) -> f64 {
        self.condition
    }

    pub fn m(&self) -> usize {
        self.b.len()
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Correction `A*(G^+ r)` for a residual `r = b - A(X)`.
    fn correction<T: Field>(&self, e: &SensingEnsemble<T>, r: &DVector<f64>) -> Result<HermitianMatrix<T>> {
        apply_adjoint(e, &(&self.pinv * r))
    }

    pub fn project<T: Field>(&self, e: &SensingEnsemble<T>, x: &HermitianMatrix<T>) -> Result<HermitianMatrix<T>> {
        project_affine(self, e, x)
    }
}

pub fn project_affine<T: Field>(
    p: &AffineProjector,
    e: &SensingEnsemble<T>,
    x: &HermitianMatrix<T>,
) -> Result<HermitianMatrix<T>> {
    check_dim(p.m(), e.m())?;
    check_dim(p.n(), e.n())?;
    let r = &p.b.values - apply_lifted(e, x)?;
    let out = x + &p.correction(e, &r)?;
    if !out.is_finite() {
        return Err(Error::Factorization {
            condition: p.condition,
        });
    }
    Ok(out)
}

/// Nearest PSD matrix in Frobenius norm: negative eigenvalues clamped to 0.
pub fn project_psd<T: Field>(x: &HermitianMatrix<T>) -> Result<HermitianMatrix<T>> {
    let e = eig(x)?;
    let keep = e.eigenvalues.iter().take_while(|&&l| l > 0.0).count();
    if keep == 0 {
        return Ok(HermitianMatrix::zeros(x.dim()));
    }
    let v = e.eigenvectors.columns(0, keep);
    let mut scaled = v.clone_owned();
    for k in 0..keep {
        let s = e.eigenvalues[k];
        scaled.column_mut(k).iter_mut().for_each(|z| *z = z.scale(s));
    }
    Ok(HermitianMatrix::from_matrix_unchecked(scaled * v.adjoint()))
}

/// Top eigenpair, with the phase convention of [`eig`].
pub fn leading_eigenvector<T: Field>(x: &HermitianMatrix<T>) -> Result<(f64, DVector<T>)> {
    let e = eig(x)?;
    Ok((e.eigenvalues[0], e.vector(0)))
}

/// `||X - X0||_F / ||X0||_F`.
pub fn recovery_error<T: Field>(x: &HermitianMatrix<T>, x0: &HermitianMatrix<T>) -> Result<f64> {
    check_dim(x0.dim(), x.dim())?;
    let denom = x0.frobenius_norm();
    if denom == 0.0 {
        return Err(Error::ZeroReference);
    }
    Ok((x - x0).frobenius_norm() / denom)
}

/// `min_phi ||x - e^{i phi} x0||_2` (a sign choice in the real case).
pub fn vector_error_up_to_phase<T: Field>(x: &DVector<T>, x0: &DVector<T>) -> Result<f64> {
    check_dim(x0.len(), x.len())?;
    let phase = x0.dotc(x).unit_phase();
    Ok((x - x0 * phase).norm())
}
