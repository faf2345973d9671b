//! The truncated inexact dual certificate and empirical checks of the
//! conditions under which it certifies that `X0 = x0 x0*` is the only PSD
//! matrix consistent with the measurements.
//!
//! For anchor `x0` the certificate is `Ybar = (1/m) sum_i 1_{E_i} w_i z_i z_i*`
//! with weights
//!
//! * real: `w_i = 3/(n+2) ||z_i||^2 - |<z_i, x0>|^2`,
//! * complex: `w_i = 4/(n+1) ||z_i||^2 - 2 |<z_i, x0>|^2`,
//!
//! i.e. `w = A(S^-1(2(I - x0 x0*)))`, and truncation events
//! `E_i = {|<z_i, x0>| <= sqrt(2 beta log n)} ∩ {||z_i|| <= sqrt(3n)}`.
//! Equivalently `Ybar = A*(lam)` with `lam_i = 1_{E_i} w_i / m`.
//!
//! The certificate is good when `||Ybar_T||_1 <= 1/2`, `Ybar_{T⊥} ⪰ I` on
//! `x0⊥`, and (for stability) `||lam||_1 <= 5`.

use nalgebra::{DMatrix, DVector};

use crate::error::{check_dim, Error, Result};
use crate::matcore::{eig, project_t, schatten_norm, Field, HermitianMatrix, Scalar, SchattenP, SubspaceAnchor};
use crate::rng;
use crate::sensing::{apply_lifted, SensingEnsemble};

/// Thresholds certifying uniqueness and stability.
pub const T_NUCLEAR_MAX: f64 = 0.5;
pub const T_PERP_MIN_EIG: f64 = 1.0;
pub const LAMBDA_L1_MAX: f64 = 5.0;

/// Lower `l1`-isometry constants on `T`.
pub const L1_LOWER_REAL: f64 = 0.94;
pub const L1_LOWER_COMPLEX: f64 = 0.828;

#[derive(Debug, Clone)]
pub struct CertificateParams<T: Field> {
    /// Truncation parameter; `f64::INFINITY` disables truncation entirely.
    pub beta: f64,
    pub anchor: SubspaceAnchor<T>,
}

impl<T: Field> CertificateParams<T> {
    pub fn new(beta: f64, anchor: SubspaceAnchor<T>) -> Result<Self> {
        if !(beta > 0.0) {
            return Err(Error::InvalidArgument(format!("beta must be positive, got {beta}")));
        }
        Ok(Self { beta, anchor })
    }

    pub fn untruncated(anchor: SubspaceAnchor<T>) -> Self {
        Self {
            beta: f64::INFINITY,
            anchor,
        }
    }

    pub fn truncates(&self) -> bool {
        self.beta.is_finite()
    }
}

/// Certificate weight `A(S^-1(2(I - x0 x0*)))` for one sensing vector, given
/// `||z||^2` and `|<z, x0>|^2`.
pub fn certificate_weight(field: Scalar, n: usize, norm_sq: f64, proj_sq: f64) -> f64 {
    let n = n as f64;
    match field {
        Scalar::Real => 3.0 / (n + 2.0) * norm_sq - proj_sq,
        Scalar::Complex => 4.0 / (n + 1.0) * norm_sq - 2.0 * proj_sq,
    }
}

/// Whether the truncation event `E_i` holds.
pub fn in_truncation_event(n: usize, beta: f64, norm_sq: f64, proj_abs: f64) -> bool {
    if beta.is_infinite() {
        return true;
    }
    let n = n as f64;
    proj_abs <= (2.0 * beta * n.ln()).sqrt() && norm_sq <= 3.0 * n
}

/// Builds `(Ybar, lam)`. `Ybar` is accumulated term by term; `A*(lam)`
/// reproduces it.
pub fn build_certificate<T: Field>(
    e: &SensingEnsemble<T>,
    params: &CertificateParams<T>,
) -> Result<(HermitianMatrix<T>, DVector<f64>)> {
    let n = e.n();
    check_dim(n, params.anchor.dim())?;
    if n < 2 {
        return Err(Error::InvalidArgument(
            "certificate needs n >= 2 (log n = 0 degenerates the truncation event)".into(),
        ));
    }
    let m = e.m();
    let x0 = params.anchor.vector();
    let mut lam = DVector::zeros(m);
    let mut acc = DMatrix::<T>::zeros(n, n);
    for i in 0..m {
        let z = e.vectors().column(i);
        let norm_sq = z.norm_squared();
        let proj = z.dotc(x0).modulus();
        if !in_truncation_event(n, params.beta, norm_sq, proj) {
            continue;
        }
        let w = certificate_weight(T::SCALAR, n, norm_sq, proj * proj) / m as f64;
        lam[i] = w;
        acc.gerc(T::from_real(w), &z, &z, T::one());
    }
    Ok((HermitianMatrix::from_matrix(acc)?, lam))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CertificatePasses {
    /// `||Ybar_T||_1 <= 1/2`.
    pub t_nuclear: bool,
    /// `Ybar_{T⊥} ⪰ I` on `x0⊥`.
    pub t_perp: bool,
    /// `||lam||_1 <= 5`.
    pub lambda_l1: bool,
}

impl CertificatePasses {
    pub fn all(&self) -> bool {
        self.t_nuclear && self.t_perp && self.lambda_l1
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CertificateReport {
    pub y_t_nuclear: f64,
    /// Smallest eigenvalue of `Ybar` restricted to `x0⊥`.
    pub t_perp_min_eig: f64,
    /// `||Ybar_{T⊥} - 2 I_{T⊥}||` on `x0⊥`.
    pub t_perp_dev: f64,
    pub lambda_l1: f64,
    /// Fraction of measurements dropped by truncation (zero weights).
    pub truncation_rate: f64,
    pub passes: CertificatePasses,
}

impl CertificateReport {
    /// `key=value` lines, one per field.
    pub fn to_key_value(&self) -> String {
        format!(
            "y_t_nuclear={}\nt_perp_min_eig={}\nt_perp_dev={}\nlambda_l1={}\ntruncation_rate={}\npass_t_nuclear={}\npass_t_perp={}\npass_lambda_l1={}\n",
            self.y_t_nuclear,
            self.t_perp_min_eig,
            self.t_perp_dev,
            self.lambda_l1,
            self.truncation_rate,
            self.passes.t_nuclear,
            self.passes.t_perp,
            self.passes.lambda_l1,
        )
    }
}

/// Eigenvalues of `Ybar` restricted to `x0⊥`, descending.
pub fn t_perp_spectrum<T: Field>(ybar: &HermitianMatrix<T>, anchor: &SubspaceAnchor<T>) -> Result<Vec<f64>> {
    check_dim(ybar.dim(), anchor.dim())?;
    let n = ybar.dim();
    let h = anchor.complement_basis();
    let basis = h.columns(1, n - 1);
    let block = basis.adjoint() * ybar.matrix() * basis;
    Ok(eig(&HermitianMatrix::from_matrix(block)?)?.eigenvalues)
}

pub fn check_certificate<T: Field>(
    ybar: &HermitianMatrix<T>,
    lam: &DVector<f64>,
    anchor: &SubspaceAnchor<T>,
) -> Result<CertificateReport> {
    check_dim(ybar.dim(), anchor.dim())?;
    if ybar.dim() < 2 {
        return Err(Error::InvalidArgument("certificate check needs n >= 2".into()));
    }
    let y_t_nuclear = schatten_norm(&project_t(ybar, anchor)?, SchattenP::One)?;
    let spectrum = t_perp_spectrum(ybar, anchor)?;
    let t_perp_min_eig = *spectrum.last().expect("n >= 2");
    let t_perp_dev = spectrum.iter().fold(0.0_f64, |acc, l| acc.max((l - 2.0).abs()));
    let lambda_l1 = lam.lp_norm(1);
    let truncation_rate = if lam.is_empty() {
        0.0
    } else {
        lam.iter().filter(|&&l| l == 0.0).count() as f64 / lam.len() as f64
    };
    Ok(CertificateReport {
        y_t_nuclear,
        t_perp_min_eig,
        t_perp_dev,
        lambda_l1,
        truncation_rate,
        passes: CertificatePasses {
            t_nuclear: y_t_nuclear <= T_NUCLEAR_MAX,
            t_perp: t_perp_min_eig >= T_PERP_MIN_EIG,
            lambda_l1: lambda_l1 <= LAMBDA_L1_MAX,
        },
    })
}

/// Bound `n^-beta + e^{-n/3}` on the probability that a Gaussian vector is
/// truncated; valid when `2 beta log n >= 1`.
pub fn pi_beta_bound(n: f64, beta: f64) -> Result<f64> {
    if !(2.0 * beta * n.ln() >= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "truncation bound needs 2 beta log n >= 1, got n={n}, beta={beta}"
        )));
    }
    Ok(n.powf(-beta) + (-n / 3.0).exp())
}

/// `m^-1 ||A(X)||_1`.
pub fn mean_abs_measurement<T: Field>(e: &SensingEnsemble<T>, x: &HermitianMatrix<T>) -> Result<f64> {
    Ok(apply_lifted(e, x)?.lp_norm(1) / e.m() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IsometryEstimate {
    /// Largest sampled `m^-1 ||A(X)||_1 / ||X||_1` over PSD `X` (target `<= 1 + delta`).
    pub upper_ratio: f64,
    /// Smallest sampled `m^-1 ||A(X)||_1 / ||X||` over `X ∈ T` (target
    /// `>= 0.94 (1 - delta)` real, `0.828 (1 - delta)` complex).
    pub lower_ratio: f64,
    pub trials: usize,
}

/// Samples the two `l1`-isometry ratios. Extremes are over `trials` random
/// matrices of each kind, not a true sup/inf.
///
/// PSD samples are `G G*` with `G` Gaussian `n x k`, `k` cycling through
/// `1..=n`. `T` samples are `x0 y* + y x0* + c x0 x0*` with Gaussian `y`, `c`.
pub fn estimate_l1_isometry<T: Field>(
    e: &SensingEnsemble<T>,
    anchor: &SubspaceAnchor<T>,
    trials: usize,
    seed: u64,
) -> Result<IsometryEstimate> {
    check_dim(e.n(), anchor.dim())?;
    if trials == 0 {
        return Err(Error::InvalidArgument("trials must be at least 1".into()));
    }
    let n = e.n();
    let x0 = anchor.vector();
    let mut r = rng::stream(seed);
    let mut upper = f64::NEG_INFINITY;
    let mut lower = f64::INFINITY;
    for t in 0..trials {
        let k = 1 + t % n;
        let g = DMatrix::from_fn(n, k, |_, _| T::sample_standard(&mut r));
        let psd = HermitianMatrix::from_matrix(&g * g.adjoint())?;
        upper = upper.max(mean_abs_measurement(e, &psd)? / psd.trace());

        let y = DVector::from_fn(n, |_, _| T::sample_standard(&mut r));
        let c = f64::sample_standard(&mut r);
        let tx = HermitianMatrix::from_matrix(x0 * y.adjoint() + &y * x0.adjoint() + (x0 * x0.adjoint()).map(|v| v.scale(c)))?;
        let spec = schatten_norm(&tx, SchattenP::Inf)?;
        if spec > 0.0 {
            lower = lower.min(mean_abs_measurement(e, &tx)? / spec);
        }
    }
    Ok(IsometryEstimate {
        upper_ratio: upper,
        lower_ratio: lower,
        trials,
    })
}

/// Monte-Carlo checks of the Gaussian moment identities behind the
/// certificate bounds (real field, first coordinate `z_1`).
pub mod moments {
    use crate::matcore::Field;
    use crate::rng;

    #[derive(Debug, Clone, PartialEq)]
    pub struct MomentEstimate {
        pub name: &'static str,
        /// Exact value of the expectation.
        pub exact: f64,
        pub mean: f64,
        pub std_error: f64,
    }

    impl MomentEstimate {
        /// `|mean - exact|` in units of the standard error.
        pub fn z_score(&self) -> f64 {
            (self.mean - self.exact).abs() / self.std_error
        }
    }

    /// Exact moments for `z ~ N(0, I_n)`, in the order of [`estimate`].
    pub fn closed_forms(n: usize) -> [(&'static str, f64); 8] {
        let n = n as f64;
        let e16 = 15.0 * n + 90.0;
        let e14 = 3.0 * n * n + 30.0 * n + 72.0;
        let e12 = (n + 2.0) * (n + 4.0) * (n + 6.0);
        [
            ("E[z1^4]", 3.0),
            ("E[z1^2 |z|^2]", n + 2.0),
            ("E[z1^8]", 105.0),
            ("E[z1^6 |z|^2]", e16),
            ("E[z1^4 |z|^4]", e14),
            ("E[z1^2 |z|^6]", e12),
            ("E[y1^2]", 105.0 - 6.0 / (n + 2.0) * e16 + 9.0 / (n + 2.0).powi(2) * e14),
            ("E[|y|^2]", e16 - 6.0 / (n + 2.0) * e14 + 9.0 / (n + 2.0).powi(2) * e12),
        ]
    }

    /// Sample means and standard errors of the quantities in
    /// [`closed_forms`] over `samples` draws of `z ~ N(0, I_n)`, where
    /// `y = xi z_1 z` and `xi = 3/(n+2) |z|^2 - z_1^2`.
    pub fn estimate(n: usize, samples: usize, seed: u64) -> Vec<MomentEstimate> {
        let mut r = rng::stream(seed);
        let mut sum = [0.0_f64; 8];
        let mut sum_sq = [0.0_f64; 8];
        let nf = n as f64;
        for _ in 0..samples {
            let z1 = f64::sample_standard(&mut r);
            let mut s = z1 * z1;
            for _ in 1..n {
                let v = f64::sample_standard(&mut r);
                s += v * v;
            }
            let a = z1 * z1;
            let xi = 3.0 / (nf + 2.0) * s - a;
            let vals = [
                a * a,
                a * s,
                a * a * a * a,
                a * a * a * s,
                a * a * s * s,
                a * s * s * s,
                xi * xi * a * a,
                xi * xi * a * s,
            ];
            for k in 0..8 {
                sum[k] += vals[k];
                sum_sq[k] += vals[k] * vals[k];
            }
        }
        let cnt = samples as f64;
        closed_forms(n)
            .iter()
            .enumerate()
            .map(|(k, &(name, exact))| {
                let mean = sum[k] / cnt;
                let var = (sum_sq[k] / cnt - mean * mean) * cnt / (cnt - 1.0);
                MomentEstimate {
                    name,
                    exact,
                    mean,
                    std_error: (var / cnt).sqrt(),
                }
            })
            .collect()
    }
}
