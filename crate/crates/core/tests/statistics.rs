//! Monte-Carlo checks of the sensing moments and certificate statistics.

use liftfeas::certificate::{
    build_certificate, check_certificate, in_truncation_event, moments, pi_beta_bound, CertificateParams,
    LAMBDA_L1_MAX,
};
use liftfeas::harness::run_certificate_study;
use liftfeas::rng::stream;
use liftfeas::sensing::{s_apply, sample_ensemble};
use liftfeas::{Complex, DMatrix, DVector, Field, HermitianMatrix, SensingEnsemble, SubspaceAnchor};

/// Worst entrywise `|mean - want| / SE` of `m^-1 sum (z* X z) z z*`.
fn lifted_moment_z<T: Field>(e: &SensingEnsemble<T>, x: &HermitianMatrix<T>, want: &DMatrix<T>) -> f64 {
    let n = e.n();
    let m = e.m() as f64;
    let mut sum = DMatrix::<T>::zeros(n, n);
    let mut sum_re = DMatrix::<f64>::zeros(n, n);
    let mut sum_im = DMatrix::<f64>::zeros(n, n);
    for i in 0..e.m() {
        let z = e.vector(i);
        let q = x.quadratic_form(&z).unwrap();
        let term = (&z * z.adjoint()).map(|v| v.scale(q));
        sum_re += term.map(|v| v.real().powi(2));
        sum_im += term.map(|v| v.imaginary().powi(2));
        sum += term;
    }
    let mut worst: f64 = 0.0;
    for j in 0..n {
        for k in 0..n {
            let mean = sum[(j, k)].unscale(m);
            let d = mean - want[(j, k)];
            let var_re = (sum_re[(j, k)] / m - mean.real().powi(2)) / (m - 1.0);
            worst = worst.max(d.real().abs() / var_re.sqrt());
            if j != k && T::SCALAR == liftfeas::Scalar::Complex {
                let var_im = (sum_im[(j, k)] / m - mean.imaginary().powi(2)) / (m - 1.0);
                worst = worst.max(d.imaginary().abs() / var_im.sqrt());
            }
        }
    }
    worst
}

fn test_matrix<T: Field>(n: usize, seed: u64) -> HermitianMatrix<T> {
    let mut r = stream(seed);
    let g = DMatrix::from_fn(n, n, |_, _| T::sample_standard(&mut r));
    HermitianMatrix::from_matrix((&g + g.adjoint()).map(|v| v.scale(0.5))).unwrap()
}

#[test]
fn lifted_operator_moment_is_s_real() {
    let e = sample_ensemble::<f64>(6, 200_000, 41).unwrap();
    let x = test_matrix::<f64>(6, 42);
    let z = lifted_moment_z(&e, &x, s_apply(&x).matrix());
    assert!(z <= 5.0, "worst entry {z} SE");
}

#[test]
fn lifted_operator_moment_is_four_s_complex() {
    // With Re z and Im z each N(0, I), E[(z* X z) z z*] = 4 S(X).
    let e = sample_ensemble::<Complex<f64>>(6, 200_000, 43).unwrap();
    let x = test_matrix::<Complex<f64>>(6, 44);
    let want = s_apply(&x).scale(4.0);
    let z = lifted_moment_z(&e, &x, want.matrix());
    assert!(z <= 5.0, "worst entry {z} SE");
}

#[test]
fn truncation_probability_is_below_bound() {
    let n = 20;
    let beta = 1.0;
    let samples = 1_000_000;
    let mut r = stream(7);
    let mut outside = 0usize;
    for _ in 0..samples {
        let z1 = f64::sample_standard(&mut r);
        let mut norm_sq = z1 * z1;
        for _ in 1..n {
            let v = f64::sample_standard(&mut r);
            norm_sq += v * v;
        }
        if !in_truncation_event(n, beta, norm_sq, z1.abs()) {
            outside += 1;
        }
    }
    let p = outside as f64 / samples as f64;
    let bound = pi_beta_bound(n as f64, beta).unwrap();
    assert!(p <= bound, "empirical {p} above bound {bound}");
    assert!(p > 0.0);
}

#[test]
fn certificate_term_moments_match_closed_forms() {
    for n in [10usize, 50] {
        for est in moments::estimate(n, 1_000_000, 100 + n as u64) {
            assert!(est.z_score() <= 4.0, "n={n} {}: {} vs {} ({} SE)", est.name, est.mean, est.exact, est.z_score());
        }
        let forms = moments::closed_forms(n);
        assert!(forms[6].1 <= 44.0);
        assert!(forms[7].1 <= 8.0 * n as f64 + 16.0);
    }
}

#[test]
fn lambda_l1_is_bounded_at_ten_n() {
    let rows = run_certificate_study(20, 200, 1.0, 100, 5, None).unwrap();
    let ok = rows.iter().filter(|r| r.report.lambda_l1 <= LAMBDA_L1_MAX).count();
    assert!(ok >= 99, "{ok}/100");
}

fn random_unitary<T: Field>(n: usize, seed: u64) -> DMatrix<T> {
    let mut r = stream(seed);
    DMatrix::from_fn(n, n, |_, _| T::sample_standard(&mut r)).qr().q()
}

fn rotation_covariance<T: Field>(seed: u64) {
    let n = 7;
    let e = sample_ensemble::<T>(n, 300, seed).unwrap();
    let q = random_unitary::<T>(n, seed + 1);
    let base = CertificateParams::new(1.0, SubspaceAnchor::coordinate(n, 0)).unwrap();
    let (ybar, lam) = build_certificate(&e, &base).unwrap();

    let rotated = SensingEnsemble::from_vectors(&q * e.vectors()).unwrap();
    let anchor = SubspaceAnchor::new(q.column(0).into_owned()).unwrap();
    let params = CertificateParams::new(1.0, anchor.clone()).unwrap();
    let (yq, lam_q) = build_certificate(&rotated, &params).unwrap();

    let want = ybar.congruence(&q).unwrap();
    assert!((&yq - &want).frobenius_norm() <= 1e-10 * want.frobenius_norm());
    assert!((&lam_q - &lam).norm() <= 1e-10 * lam.norm());

    let a = check_certificate(&ybar, &lam, &base.anchor).unwrap();
    let b = check_certificate(&yq, &lam_q, &anchor).unwrap();
    assert!((a.y_t_nuclear - b.y_t_nuclear).abs() <= 1e-10);
    assert!((a.t_perp_min_eig - b.t_perp_min_eig).abs() <= 1e-10);
}

#[test]
fn certificate_is_rotation_covariant_real() {
    rotation_covariance::<f64>(11);
}

#[test]
fn certificate_is_rotation_covariant_complex() {
    rotation_covariance::<Complex<f64>>(12);
}

#[test]
fn untruncated_complex_certificate_expectation() {
    // Complex weights give E[Y] = 4 (2 (I - x0 x0*)) under the Re/Im N(0, I) convention.
    let n = 4;
    let e = sample_ensemble::<Complex<f64>>(n, 100_000, 13).unwrap();
    let anchor = SubspaceAnchor::<Complex<f64>>::coordinate(n, 0);
    let (ybar, _) = build_certificate(&e, &CertificateParams::untruncated(anchor)).unwrap();
    let mut want = DVector::from_element(n, 8.0);
    want[0] = 0.0;
    for j in 0..n {
        assert!((ybar.get(j, j).re - want[j]).abs() < 0.3, "diag {j}: {}", ybar.get(j, j));
    }
}
