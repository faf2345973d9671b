//! Dense Hermitian matrix arithmetic over the real or complex field.

use std::fmt;
use std::ops::{Add, Sub};

use nalgebra::{Complex, ComplexField, DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{check_dim, Error, Result};

/// Runtime tag for the scalar field.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scalar {
    Real,
    Complex,
}

impl Scalar {
    pub fn as_str(self) -> &'static str {
        match self {
            Scalar::Real => "real",
            Scalar::Complex => "complex",
        }
    }
}

impl fmt::Display for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Scalar {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "real" => Ok(Scalar::Real),
            "complex" => Ok(Scalar::Complex),
            other => Err(Error::InvalidArgument(format!("unknown field `{other}`"))),
        }
    }
}

/// Scalar type of vectors and matrices: `f64` or `Complex<f64>`.
pub trait Field: ComplexField<RealField = f64> + Copy + Send + Sync + fmt::Debug + 'static {
    const SCALAR: Scalar;

    /// One draw of the sensing law: N(0,1) in the real case, independent
    /// N(0,1) real and imaginary parts in the complex case.
    fn sample_standard<R: Rng + ?Sized>(rng: &mut R) -> Self;

    /// `self / |self|`, or one when `self` is zero.
    fn unit_phase(self) -> Self {
        let r = self.modulus();
        if r == 0.0 {
            Self::one()
        } else {
            self.unscale(r)
        }
    }
}

impl Field for f64 {
    const SCALAR: Scalar = Scalar::Real;

    fn sample_standard<R: Rng + ?Sized>(rng: &mut R) -> Self {
        rng.sample(StandardNormal)
    }
}

impl Field for Complex<f64> {
    const SCALAR: Scalar = Scalar::Complex;

    fn sample_standard<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        Complex::new(re, im)
    }
}

/// `u* v`.
pub fn dot<T: Field>(u: &DVector<T>, v: &DVector<T>) -> T {
    u.dotc(v)
}

pub fn norm2<T: Field>(v: &DVector<T>) -> f64 {
    v.norm()
}

/// Self-adjoint `n x n` matrix. Every constructor stores the Hermitian part of
/// its input, so `entry(i,j) == conj(entry(j,i))` holds bit-exactly.
#[derive(Clone, PartialEq)]
pub struct HermitianMatrix<T: Field> {
    data: DMatrix<T>,
}

impl<T: Field> fmt::Debug for HermitianMatrix<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "HermitianMatrix{:?}", self.data)
    }
}

fn hermitian_part<T: Field>(mut a: DMatrix<T>) -> DMatrix<T> {
    let n = a.nrows();
    let half = 0.5;
    for j in 0..n {
        for i in 0..j {
            let v = (a[(i, j)] + a[(j, i)].conjugate()).scale(half);
            a[(i, j)] = v;
            a[(j, i)] = v.conjugate();
        }
        a[(j, j)] = T::from_real(a[(j, j)].real());
    }
    a
}

impl<T: Field> HermitianMatrix<T> {
    /// Hermitian part `(A + A*)/2` of a square matrix.
    pub fn from_matrix(a: DMatrix<T>) -> Result<Self> {
        check_dim(a.nrows(), a.ncols())?;
        if a.nrows() == 0 {
            return Err(Error::InvalidArgument("matrix dimension must be positive".into()));
        }
        Ok(Self {
            data: hermitian_part(a),
        })
    }

    pub(crate) fn from_matrix_unchecked(a: DMatrix<T>) -> Self {
        debug_assert_eq!(a.nrows(), a.ncols());
        Self {
            data: hermitian_part(a),
        }
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            data: DMatrix::zeros(n, n),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            data: DMatrix::identity(n, n),
        }
    }

    pub fn from_diagonal(d: &[f64]) -> Self {
        let n = d.len();
        let mut data = DMatrix::zeros(n, n);
        for (i, &v) in d.iter().enumerate() {
            data[(i, i)] = T::from_real(v);
        }
        Self { data }
    }

    /// Rank-one `x x*`.
    pub fn outer(x: &DVector<T>) -> Self {
        Self::from_matrix_unchecked(x * x.adjoint())
    }

    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<T> {
        &self.data
    }

    pub fn into_matrix(self) -> DMatrix<T> {
        self.data
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[(i, j)]
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim()).map(|i| self.data[(i, i)].real()).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.norm()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            data: self.data.map(|v| v.scale(s)),
        }
    }

    /// `self + s * I`.
    pub fn add_identity(&self, s: f64) -> Self {
        let mut data = self.data.clone();
        for i in 0..self.dim() {
            data[(i, i)] += T::from_real(s);
        }
        Self { data }
    }

    /// `self + s * other`.
    pub fn axpy(&self, s: f64, other: &Self) -> Result<Self> {
        check_dim(self.dim(), other.dim())?;
        Ok(Self {
            data: self.data.zip_map(&other.data, |a, b| a + b.scale(s)),
        })
    }

    /// `Q self Q*` for a square `Q`.
    pub fn congruence(&self, q: &DMatrix<T>) -> Result<Self> {
        check_dim(self.dim(), q.ncols())?;
        Ok(Self::from_matrix_unchecked(q * &self.data * q.adjoint()))
    }

    pub fn apply(&self, v: &DVector<T>) -> Result<DVector<T>> {
        check_dim(self.dim(), v.len())?;
        Ok(&self.data * v)
    }

    /// `v* self v`, real for Hermitian `self`.
    pub fn quadratic_form(&self, v: &DVector<T>) -> Result<f64> {
        Ok(v.dotc(&self.apply(v)?).real())
    }

    pub fn eig(&self) -> Result<EigenDecomposition<T>> {
        eig(self)
    }
}

impl<T: Field> Add for &HermitianMatrix<T> {
    type Output = HermitianMatrix<T>;

    fn add(self, rhs: Self) -> HermitianMatrix<T> {
        assert_eq!(self.dim(), rhs.dim(), "dimension mismatch in matrix sum");
        HermitianMatrix {
            data: &self.data + &rhs.data,
        }
    }
}

impl<T: Field> Sub for &HermitianMatrix<T> {
    type Output = HermitianMatrix<T>;

    fn sub(self, rhs: Self) -> HermitianMatrix<T> {
        assert_eq!(self.dim(), rhs.dim(), "dimension mismatch in matrix difference");
        HermitianMatrix {
            data: &self.data - &rhs.data,
        }
    }
}

/// Eigenpairs sorted by decreasing eigenvalue. Each eigenvector has its
/// largest-magnitude component (first one on ties) real and positive.
#[derive(Debug, Clone)]
pub struct EigenDecomposition<T: Field> {
    pub eigenvalues: Vec<f64>,
    /// Orthonormal eigenvectors stored as columns.
    pub eigenvectors: DMatrix<T>,
}

impl<T: Field> EigenDecomposition<T> {
    pub fn vector(&self, k: usize) -> DVector<T> {
        self.eigenvectors.column(k).into_owned()
    }

    /// `V diag(f(lambda)) V*`.
    pub fn reconstruct_with(&self, f: impl Fn(f64) -> f64) -> HermitianMatrix<T> {
        let mut scaled = self.eigenvectors.clone();
        for (k, &lam) in self.eigenvalues.iter().enumerate() {
            let s = f(lam);
            scaled.column_mut(k).iter_mut().for_each(|v| *v = v.scale(s));
        }
        HermitianMatrix::from_matrix_unchecked(scaled * self.eigenvectors.adjoint())
    }

    pub fn reconstruct(&self) -> HermitianMatrix<T> {
        self.reconstruct_with(|l| l)
    }
}

fn normalize_phase<T: Field>(col: &mut DVector<T>) {
    let mut best = 0;
    let mut best_mod = -1.0;
    for (i, v) in col.iter().enumerate() {
        let r = v.modulus();
        if r > best_mod {
            best_mod = r;
            best = i;
        }
    }
    let phase = col[best].unit_phase().conjugate();
    col.iter_mut().for_each(|v| *v *= phase);
    col[best] = T::from_real(col[best].real());
}

pub fn eig<T: Field>(x: &HermitianMatrix<T>) -> Result<EigenDecomposition<T>> {
    if !x.is_finite() {
        return Err(Error::NonFinite);
    }
    let n = x.dim();
    let se = SymmetricEigen::new(x.data.clone());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| se.eigenvalues[b].total_cmp(&se.eigenvalues[a]));

    let mut eigenvectors = DMatrix::zeros(n, n);
    let mut eigenvalues = Vec::with_capacity(n);
    for (k, &src) in order.iter().enumerate() {
        let mut col: DVector<T> = se.eigenvectors.column(src).into_owned();
        normalize_phase(&mut col);
        eigenvectors.set_column(k, &col);
        eigenvalues.push(se.eigenvalues[src]);
    }
    if eigenvalues.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite);
    }
    Ok(EigenDecomposition {
        eigenvalues,
        eigenvectors,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SchattenP {
    One,
    Two,
    Inf,
}

/// `(sum sigma_i^p)^(1/p)`; `p = 2` is the entrywise Frobenius norm and
/// `p = Inf` the spectral norm.
pub fn schatten_norm<T: Field>(x: &HermitianMatrix<T>, p: SchattenP) -> Result<f64> {
    if !x.is_finite() {
        return Err(Error::NonFinite);
    }
    match p {
        SchattenP::Two => Ok(x.frobenius_norm()),
        SchattenP::One => Ok(eig(x)?.eigenvalues.iter().map(|l| l.abs()).sum()),
        SchattenP::Inf => Ok(eig(x)?
            .eigenvalues
            .iter()
            .fold(0.0_f64, |acc, l| acc.max(l.abs()))),
    }
}

/// `<X, Y> = Tr(Y* X)`, real for Hermitian arguments.
pub fn hs_inner<T: Field>(x: &HermitianMatrix<T>, y: &HermitianMatrix<T>) -> Result<f64> {
    check_dim(x.dim(), y.dim())?;
    Ok(y.data.dotc(&x.data).real())
}

/// Unit vector `x` defining `T_x = {x y* + y x*}` and its complement.
#[derive(Debug, Clone, PartialEq)]
pub struct SubspaceAnchor<T: Field> {
    x: DVector<T>,
}

impl<T: Field> SubspaceAnchor<T> {
    pub const NORM_TOL: f64 = 1e-12;

    pub fn new(x: DVector<T>) -> Result<Self> {
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        let r = x.norm();
        if (r - 1.0).abs() > Self::NORM_TOL {
            return Err(Error::InvalidArgument(format!(
                "anchor must have unit norm, got {r}"
            )));
        }
        Ok(Self { x })
    }

    /// Normalizes `x`; fails on the zero vector.
    pub fn from_direction(x: &DVector<T>) -> Result<Self> {
        let r = x.norm();
        if r == 0.0 || !r.is_finite() {
            return Err(Error::InvalidArgument("anchor direction must be nonzero".into()));
        }
        Ok(Self { x: x.unscale(r) })
    }

    /// The coordinate vector `e_k` in dimension `n`.
    pub fn coordinate(n: usize, k: usize) -> Self {
        let mut x = DVector::zeros(n);
        x[k] = T::one();
        Self { x }
    }

    pub fn vector(&self) -> &DVector<T> {
        &self.x
    }

    pub fn dim(&self) -> usize {
        self.x.len()
    }

    /// Unitary `H` with `H[:, 0]` parallel to `x`; the remaining columns are
    /// an orthonormal basis of `x⊥`.
    pub fn complement_basis(&self) -> DMatrix<T> {
        let n = self.dim();
        let s = self.x[0].unit_phase();
        let mut w = self.x.clone();
        w[0] += s;
        let ww = w.norm_squared();
        let mut h = DMatrix::<T>::identity(n, n);
        h -= (&w * w.adjoint()).map(|v| v.scale(2.0 / ww));
        h
    }
}

/// `X_T = X - (I - xx*) X (I - xx*)`.
pub fn project_t<T: Field>(x: &HermitianMatrix<T>, anchor: &SubspaceAnchor<T>) -> Result<HermitianMatrix<T>> {
    check_dim(x.dim(), anchor.dim())?;
    let a = anchor.vector();
    let u = &x.data * a;
    let c = a.dotc(&u).real();
    let m = a * u.adjoint() + &u * a.adjoint() - (a * a.adjoint()).map(|v| v.scale(c));
    Ok(HermitianMatrix::from_matrix_unchecked(m))
}

/// `(I - xx*) X (I - xx*)`.
pub fn project_tperp<T: Field>(
    x: &HermitianMatrix<T>,
    anchor: &SubspaceAnchor<T>,
) -> Result<HermitianMatrix<T>> {
    let t = project_t(x, anchor)?;
    Ok(x - &t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    type C = Complex<f64>;

    fn random_hermitian<T: Field>(n: usize, seed: u64) -> HermitianMatrix<T> {
        let mut r = rng::stream(seed);
        let a = DMatrix::from_fn(n, n, |_, _| T::sample_standard(&mut r));
        HermitianMatrix::from_matrix(a).unwrap()
    }

    fn max_abs<T: Field>(a: &DMatrix<T>) -> f64 {
        a.iter().fold(0.0, |acc, v| acc.max(v.modulus()))
    }

    #[test]
    fn storage_is_exactly_hermitian() {
        let x = random_hermitian::<C>(5, 3);
        for i in 0..5 {
            assert_eq!(x.get(i, i).im, 0.0);
            for j in 0..5 {
                assert_eq!(x.get(i, j), x.get(j, i).conj());
            }
        }
    }

    #[test]
    fn eig_of_diagonal() {
        let x = HermitianMatrix::<f64>::from_diagonal(&[1.0, 2.0, 3.0]);
        let e = x.eig().unwrap();
        assert_eq!(e.eigenvalues.len(), 3);
        for (got, want) in e.eigenvalues.iter().zip([3.0, 2.0, 1.0]) {
            assert!((got - want).abs() < 1e-14);
        }
        for k in 0..3 {
            let v = e.vector(k);
            assert!((v[2 - k] - 1.0).abs() < 1e-14, "column {k}: {v}");
        }
    }

    #[test]
    fn eig_of_rank_one() {
        let mut r = rng::stream(11);
        let x: DVector<C> = DVector::from_fn(6, |_, _| C::sample_standard(&mut r));
        let x = x.unscale(x.norm());
        let e = HermitianMatrix::outer(&x).eig().unwrap();
        assert!((e.eigenvalues[0] - 1.0).abs() < 1e-12);
        assert!(e.eigenvalues[1..].iter().all(|l| l.abs() < 1e-12));
        let v = e.vector(0);
        assert!((v.dotc(&x).modulus() - 1.0).abs() < 1e-12);
    }

    fn check_decomposition<T: Field>(n: usize, seed: u64) {
        let x = random_hermitian::<T>(n, seed);
        let e = x.eig().unwrap();
        let scale = schatten_norm(&x, SchattenP::Inf).unwrap().max(1.0);
        let resid = schatten_norm(&(&x - &e.reconstruct()), SchattenP::Two).unwrap();
        assert!(resid <= 1e-10 * scale, "reconstruction residual {resid}");
        let gram = e.eigenvectors.adjoint() * &e.eigenvectors;
        let eye = DMatrix::<T>::identity(n, n);
        assert!(max_abs(&(gram - eye)) <= 1e-10);
        assert!(e.eigenvalues.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn eig_reconstructs_random_matrices() {
        check_decomposition::<f64>(4, 1);
        check_decomposition::<C>(4, 2);
        check_decomposition::<f64>(60, 3);
        check_decomposition::<C>(30, 4);
    }

    #[test]
    fn eig_is_deterministic_and_phase_normalized() {
        let x = random_hermitian::<C>(7, 5);
        let a = x.eig().unwrap();
        let b = x.eig().unwrap();
        assert_eq!(a.eigenvectors, b.eigenvectors);
        assert_eq!(a.eigenvalues, b.eigenvalues);
        for k in 0..7 {
            let v = a.vector(k);
            let (imax, _) = v
                .iter()
                .enumerate()
                .fold((0, -1.0), |acc, (i, z)| if z.norm() > acc.1 { (i, z.norm()) } else { acc });
            assert_eq!(v[imax].im, 0.0);
            assert!(v[imax].re > 0.0);
        }
    }

    #[test]
    fn eig_rejects_non_finite() {
        let mut d = DMatrix::<f64>::identity(2, 2);
        d[(0, 1)] = f64::NAN;
        let x = HermitianMatrix::from_matrix(d).unwrap();
        assert!(matches!(x.eig(), Err(Error::NonFinite)));
        assert!(matches!(schatten_norm(&x, SchattenP::One), Err(Error::NonFinite)));
    }

    #[test]
    fn schatten_norms_of_simple_matrices() {
        let d = HermitianMatrix::<f64>::from_diagonal(&[3.0, -4.0]);
        assert!((schatten_norm(&d, SchattenP::One).unwrap() - 7.0).abs() < 1e-14);
        assert!((schatten_norm(&d, SchattenP::Two).unwrap() - 5.0).abs() < 1e-14);
        assert!((schatten_norm(&d, SchattenP::Inf).unwrap() - 4.0).abs() < 1e-14);

        let z = HermitianMatrix::<C>::zeros(4);
        for p in [SchattenP::One, SchattenP::Two, SchattenP::Inf] {
            assert_eq!(schatten_norm(&z, p).unwrap(), 0.0);
        }

        let x = DVector::from_vec(vec![0.6, 0.0, -0.8]);
        let r1 = HermitianMatrix::<f64>::outer(&x);
        for p in [SchattenP::One, SchattenP::Two, SchattenP::Inf] {
            assert!((schatten_norm(&r1, p).unwrap() - 1.0).abs() < 1e-12);
        }
    }

    fn e(n: usize, k: usize) -> DVector<f64> {
        let mut v = DVector::zeros(n);
        v[k] = 1.0;
        v
    }

    #[test]
    fn t_projections_on_coordinate_anchor() {
        let a = SubspaceAnchor::<f64>::coordinate(3, 0);
        let e2 = HermitianMatrix::outer(&e(3, 1));
        assert_eq!(max_abs(project_t(&e2, &a).unwrap().matrix()), 0.0);

        let e1 = HermitianMatrix::outer(&e(3, 0));
        assert_eq!(project_t(&e1, &a).unwrap(), e1);

        let eye = HermitianMatrix::<f64>::identity(3);
        let tp = project_tperp(&eye, &a).unwrap();
        assert_eq!(tp, HermitianMatrix::from_diagonal(&[0.0, 1.0, 1.0]));

        let cross = HermitianMatrix::from_matrix(e(3, 0) * e(3, 1).transpose() + e(3, 1) * e(3, 0).transpose()).unwrap();
        assert!(max_abs(project_tperp(&cross, &a).unwrap().matrix()) < 1e-15);
    }

    #[test]
    fn t_projection_rejects_dimension_mismatch() {
        let a = SubspaceAnchor::<f64>::coordinate(3, 0);
        let x = HermitianMatrix::<f64>::identity(4);
        assert!(matches!(project_t(&x, &a), Err(Error::DimensionMismatch { .. })));
        assert!(matches!(project_tperp(&x, &a), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn anchor_requires_unit_norm() {
        assert!(SubspaceAnchor::new(DVector::from_vec(vec![1.0, 1.0])).is_err());
        assert!(SubspaceAnchor::<f64>::from_direction(&DVector::zeros(3)).is_err());
        let a = SubspaceAnchor::from_direction(&DVector::from_vec(vec![3.0, 4.0])).unwrap();
        assert!((a.vector().norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn complement_basis_is_unitary_and_spans_perp() {
        let mut r = rng::stream(9);
        let x: DVector<C> = DVector::from_fn(5, |_, _| C::sample_standard(&mut r));
        let a = SubspaceAnchor::from_direction(&x).unwrap();
        let h = a.complement_basis();
        let gram = h.adjoint() * &h;
        assert!(max_abs(&(gram - DMatrix::identity(5, 5))) < 1e-13);
        assert!((h.column(0).dotc(a.vector()).norm() - 1.0).abs() < 1e-13);
        for k in 1..5 {
            assert!(h.column(k).dotc(a.vector()).norm() < 1e-13);
        }
    }

    #[test]
    fn hs_inner_basics() {
        let eye = HermitianMatrix::<f64>::identity(5);
        assert_eq!(hs_inner(&eye, &eye).unwrap(), 5.0);
        let a = HermitianMatrix::outer(&e(3, 0));
        let b = HermitianMatrix::outer(&e(3, 1));
        assert_eq!(hs_inner(&a, &b).unwrap(), 0.0);
        let x = random_hermitian::<C>(6, 21);
        let f = schatten_norm(&x, SchattenP::Two).unwrap();
        assert!((hs_inner(&x, &x).unwrap() - f * f).abs() < 1e-12 * f * f);
        assert!(hs_inner(&x, &HermitianMatrix::identity(5)).is_err());
    }
}
