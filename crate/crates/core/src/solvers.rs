//! Iterative schemes for `{X ⪰ 0} ∩ {A(X) = b}`.
//!
//! * Douglas-Rachford on the two projectors (hard data fit, no parameters).
//! * POCS, the plain alternation `X <- P_psd(P_aff(X))`.
//! * Accelerated projected gradient on `g(X) = ||A(X) - b||^2 / 2 + lambda tr(X)`
//!   over the PSD cone; `lambda = 0` is the feasibility problem, `lambda > 0`
//!   the soft-constrained trace-penalized variant.
//!
//! Every scheme starts from `X = Y = 0` unless given a warm start and runs a
//! fixed number of iterations, optionally stopping early once the relative
//! change of the PSD iterate drops below `stop_tol`.

use std::fmt;
use std::str::FromStr;

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::matcore::{eig, Field, HermitianMatrix};
use crate::projections::{project_affine, project_psd, recovery_error, AffineProjector};
use crate::sensing::{apply_adjoint, apply_lifted, SensingEnsemble};

/// Step size used for phase-transition grids.
pub const GRID_STEP_SIZE: f64 = 2e-4;
/// Step size used for convergence traces.
pub const CONVERGENCE_STEP_SIZE: f64 = 1e-4;
/// Nesterov runs abort once the relative residual exceeds this.
pub const DIVERGENCE_RESIDUAL: f64 = 1e6;
/// Smallest residual threshold for the `converged` flag on exact data.
pub const RESIDUAL_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    DouglasRachford,
    Pocs,
    Nesterov,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::DouglasRachford => "dr",
            Method::Pocs => "pocs",
            Method::Nesterov => "nesterov",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dr" => Ok(Method::DouglasRachford),
            "pocs" => Ok(Method::Pocs),
            "nesterov" => Ok(Method::Nesterov),
            other => Err(Error::InvalidArgument(format!("unknown solver `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub method: Method,
    pub max_iters: usize,
    /// Gradient step (Nesterov only).
    pub alpha: f64,
    /// Trace penalty `lambda >= 0` (Nesterov only).
    pub lambda_trace: f64,
    /// Relative-change tolerance for early stopping; 0 runs all iterations.
    pub stop_tol: f64,
    pub record_every: usize,
}

impl SolverConfig {
    pub fn dr(max_iters: usize) -> Self {
        Self {
            method: Method::DouglasRachford,
            max_iters,
            alpha: GRID_STEP_SIZE,
            lambda_trace: 0.0,
            stop_tol: 0.0,
            record_every: 1,
        }
    }

    pub fn pocs(max_iters: usize) -> Self {
        Self {
            method: Method::Pocs,
            ..Self::dr(max_iters)
        }
    }

    pub fn nesterov(alpha: f64, lambda_trace: f64, max_iters: usize) -> Self {
        Self {
            method: Method::Nesterov,
            alpha,
            lambda_trace,
            ..Self::dr(max_iters)
        }
    }

    pub fn with_record_every(mut self, k: usize) -> Self {
        self.record_every = k;
        self
    }

    pub fn with_stop_tol(mut self, tol: f64) -> Self {
        self.stop_tol = tol;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if self.max_iters == 0 {
            return bad("max_iters must be at least 1".into());
        }
        if self.record_every == 0 {
            return bad("record_every must be at least 1".into());
        }
        if !(self.stop_tol >= 0.0) {
            return bad(format!("stop_tol must be nonnegative, got {}", self.stop_tol));
        }
        if self.method == Method::Nesterov {
            if !(self.alpha > 0.0) || !self.alpha.is_finite() {
                return bad(format!("step size must be positive, got {}", self.alpha));
            }
            if !(self.lambda_trace >= 0.0) || !self.lambda_trace.is_finite() {
                return bad(format!("trace penalty must be nonnegative, got {}", self.lambda_trace));
            }
        }
        Ok(())
    }

    fn expect(&self, method: Method) -> Result<()> {
        self.validate()?;
        if self.method != method {
            return Err(Error::InvalidArgument(format!(
                "config is for `{}`, called `{}`",
                self.method, method
            )));
        }
        Ok(())
    }
}

/// One recorded iterate. `recovery_error` is present only when the true
/// matrix was supplied.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRecord {
    pub iter: usize,
    pub recovery_error: Option<f64>,
    /// `||A(X) - b|| / ||b||` (absolute when `b = 0`).
    pub residual: f64,
    pub trace_value: f64,
}

#[derive(Debug, Clone)]
pub struct SolverTrace<T: Field> {
    pub records: Vec<TraceRecord>,
    pub final_x: HermitianMatrix<T>,
    /// Iterations actually performed.
    pub iterations: usize,
    pub converged: bool,
}

impl<T: Field> SolverTrace<T> {
    pub fn last(&self) -> Option<&TraceRecord> {
        self.records.last()
    }

    pub fn final_residual(&self) -> f64 {
        self.records.last().map_or(f64::NAN, |r| r.residual)
    }

    pub fn final_error(&self) -> Option<f64> {
        self.records.last().and_then(|r| r.recovery_error)
    }

    /// CSV with header `iter,recovery_error,residual,trace_value`. Floats use
    /// the shortest round-trip form; a missing recovery error is left empty.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("iter,recovery_error,residual,trace_value\n");
        for r in &self.records {
            let err = r.recovery_error.map(|v| v.to_string()).unwrap_or_default();
            out.push_str(&format!("{},{},{},{}\n", r.iter, err, r.residual, r.trace_value));
        }
        out
    }
}

pub fn relative_residual<T: Field>(
    p: &AffineProjector,
    e: &SensingEnsemble<T>,
    x: &HermitianMatrix<T>,
) -> Result<f64> {
    let b = &p.measurements().values;
    let r = (apply_lifted(e, x)? - b).norm();
    let nb = b.norm();
    Ok(if nb > 0.0 { r / nb } else { r })
}

struct Recorder<'a, T: Field> {
    p: &'a AffineProjector,
    e: &'a SensingEnsemble<T>,
    cfg: &'a SolverConfig,
    truth: Option<&'a HermitianMatrix<T>>,
    records: Vec<TraceRecord>,
}

impl<'a, T: Field> Recorder<'a, T> {
    fn new(
        p: &'a AffineProjector,
        e: &'a SensingEnsemble<T>,
        cfg: &'a SolverConfig,
        truth: Option<&'a HermitianMatrix<T>>,
    ) -> Self {
        Self {
            p,
            e,
            cfg,
            truth,
            records: Vec::with_capacity(cfg.max_iters / cfg.record_every + 1),
        }
    }

    fn record(&mut self, iter: usize, x: &HermitianMatrix<T>) -> Result<()> {
        let recovery_error = self.truth.map(|t| recovery_error(x, t)).transpose()?;
        let residual = relative_residual(self.p, self.e, x)?;
        let trace_value = x.trace();
        if !residual.is_finite() || !trace_value.is_finite() {
            return Err(Error::NonFinite);
        }
        self.records.push(TraceRecord {
            iter,
            recovery_error,
            residual,
            trace_value,
        });
        Ok(())
    }

    /// Records on schedule; returns true when the run should stop early.
    fn step(&mut self, iter: usize, x: &HermitianMatrix<T>, prev: &HermitianMatrix<T>) -> Result<bool> {
        let stop = self.cfg.stop_tol > 0.0 && {
            let change = (x - prev).frobenius_norm();
            change <= self.cfg.stop_tol * x.frobenius_norm().max(f64::MIN_POSITIVE)
        };
        if stop || iter == self.cfg.max_iters || iter % self.cfg.record_every == 0 {
            self.record(iter, x).map_err(|err| err.at_iteration(iter))?;
        }
        Ok(stop)
    }

    fn finish(self, final_x: HermitianMatrix<T>, iterations: usize) -> SolverTrace<T> {
        let eps = self.p.measurements().epsilon;
        let threshold = self.cfg.stop_tol.max(10.0 * eps).max(RESIDUAL_FLOOR);
        let converged = self.records.last().is_some_and(|r| r.residual <= threshold);
        SolverTrace {
            records: self.records,
            final_x,
            iterations,
            converged,
        }
    }
}

fn check_shapes<T: Field>(p: &AffineProjector, e: &SensingEnsemble<T>, start: Option<&HermitianMatrix<T>>) -> Result<()> {
    crate::error::check_dim(p.m(), e.m())?;
    crate::error::check_dim(p.n(), e.n())?;
    if let Some(s) = start {
        crate::error::check_dim(e.n(), s.dim())?;
    }
    Ok(())
}

/// Douglas-Rachford from `X = Y = 0`.
pub fn solve_dr<T: Field>(
    p: &AffineProjector,
    e: &SensingEnsemble<T>,
    cfg: &SolverConfig,
    truth: Option<&HermitianMatrix<T>>,
) -> Result<SolverTrace<T>> {
    solve_dr_from(p, e, cfg, truth, None)
}

/// Douglas-Rachford from the governing iterate `Y_0 = start`, `X_0 = P_psd(Y_0)`:
///
/// `Y_n = P_aff(2 X_{n-1} - Y_{n-1}) - X_{n-1} + Y_{n-1}`, `X_n = P_psd(Y_n)`.
pub fn solve_dr_from<T: Field>(
    p: &AffineProjector,
    e: &SensingEnsemble<T>,
    cfg: &SolverConfig,
    truth: Option<&HermitianMatrix<T>>,
    start: Option<&HermitianMatrix<T>>,
) -> Result<SolverTrace<T>> {
    cfg.expect(Method::DouglasRachford)?;
    check_shapes(p, e, start)?;
    let n = e.n();
    let mut y = start.cloned().unwrap_or_else(|| HermitianMatrix::zeros(n));
    let mut x = project_psd(&y)?;
    let mut rec = Recorder::new(p, e, cfg, truth);
    let mut done = cfg.max_iters;
    for iter in 1..=cfg.max_iters {
        let step = || -> Result<(HermitianMatrix<T>, HermitianMatrix<T>)> {
            let reflected = x.scale(2.0).axpy(-1.0, &y)?;
            let projected = project_affine(p, e, &reflected)?;
            let y_next = (&projected - &x).axpy(1.0, &y)?;
            let x_next = project_psd(&y_next)?;
            Ok((y_next, x_next))
        };
        let (y_next, x_next) = step().map_err(|err| err.at_iteration(iter))?;
        y = y_next;
        let prev = std::mem::replace(&mut x, x_next);
        if rec.step(iter, &x, &prev)? {
            done = iter;
            break;
        }
    }
    Ok(rec.finish(x, done))
}

/// POCS from `X = 0`.
pub fn solve_pocs<T: Field>(
    p: &AffineProjector,
    e: &SensingEnsemble<T>,
    cfg: &SolverConfig,
    truth: Option<&HermitianMatrix<T>>,
) -> Result<SolverTrace<T>> {
    solve_pocs_from(p, e, cfg, truth, None)
}

/// `X_{n+1} = P_psd(P_aff(X_n))` from `X_0 = start`.
pub fn solve_pocs_from<T: Field>(
    p: &AffineProjector,
    e: &SensingEnsemble<T>,
    cfg: &SolverConfig,
    truth: Option<&HermitianMatrix<T>>,
    start: Option<&HermitianMatrix<T>>,
) -> Result<SolverTrace<T>> {
    cfg.expect(Method::Pocs)?;
    check_shapes(p, e, start)?;
    let mut x = start.cloned().unwrap_or_else(|| HermitianMatrix::zeros(e.n()));
    let mut rec = Recorder::new(p, e, cfg, truth);
    let mut done = cfg.max_iters;
    for iter in 1..=cfg.max_iters {
        let next = project_affine(p, e, &x)
            .and_then(|a| project_psd(&a))
            .map_err(|err| err.at_iteration(iter))?;
        let prev = std::mem::replace(&mut x, next);
        if rec.step(iter, &x, &prev)? {
            done = iter;
            break;
        }
    }
    Ok(rec.finish(x, done))
}

/// One step of the momentum schedule: returns `(theta_n, beta_n)` from
/// `theta_{n-1}`.
pub fn momentum_step(theta_prev: f64) -> (f64, f64) {
    let theta = 2.0 / (1.0 + (1.0 + 4.0 / (theta_prev * theta_prev)).sqrt());
    let beta = theta * (1.0 / theta_prev - 1.0);
    (theta, beta)
}

/// Accelerated projected gradient with constant step `alpha` on
/// `g(X) = ||A(X) - b||^2 / 2 + lambda tr(X)`, starting from `X = Y = 0` and
/// `theta_0 = 1`:
///
/// `X_n = P_psd(Y_{n-1} - alpha grad g(Y_{n-1}))`,
/// `Y_n = X_n + beta_n (X_n - X_{n-1})`.
pub fn solve_nesterov<T: Field>(
    p: &AffineProjector,
    e: &SensingEnsemble<T>,
    cfg: &SolverConfig,
    truth: Option<&HermitianMatrix<T>>,
) -> Result<SolverTrace<T>> {
    cfg.expect(Method::Nesterov)?;
    check_shapes(p, e, None)?;
    let n = e.n();
    let b = &p.measurements().values;
    let nb = b.norm();
    let mut x = HermitianMatrix::<T>::zeros(n);
    let mut y = HermitianMatrix::<T>::zeros(n);
    let mut theta = 1.0;
    let mut rec = Recorder::new(p, e, cfg, truth);
    let mut done = cfg.max_iters;
    for iter in 1..=cfg.max_iters {
        let r: DVector<f64> = apply_lifted(e, &y)? - b;
        let rel = if nb > 0.0 { r.norm() / nb } else { r.norm() };
        if !(rel <= DIVERGENCE_RESIDUAL) {
            return Err(Error::Diverged { iter, residual: rel });
        }
        let grad = apply_adjoint(e, &r)?.add_identity(cfg.lambda_trace);
        let x_next = project_psd(&y.axpy(-cfg.alpha, &grad)?).map_err(|err| err.at_iteration(iter))?;
        let (theta_next, beta) = momentum_step(theta);
        theta = theta_next;
        y = x_next.axpy(beta, &(&x_next - &x))?;
        let prev = std::mem::replace(&mut x, x_next);
        if rec.step(iter, &x, &prev)? {
            done = iter;
            break;
        }
    }
    Ok(rec.finish(x, done))
}

/// Runs the scheme selected by `cfg.method` from the origin.
pub fn solve<T: Field>(
    p: &AffineProjector,
    e: &SensingEnsemble<T>,
    cfg: &SolverConfig,
    truth: Option<&HermitianMatrix<T>>,
) -> Result<SolverTrace<T>> {
    match cfg.method {
        Method::DouglasRachford => solve_dr(p, e, cfg, truth),
        Method::Pocs => solve_pocs(p, e, cfg, truth),
        Method::Nesterov => solve_nesterov(p, e, cfg, truth),
    }
}

/// `x = sqrt(lambda_1) v_1` from the final iterate, plus the gap `lambda_1 - lambda_2`
/// (zero for `n = 1`).
pub fn round_to_vector<T: Field>(trace: &SolverTrace<T>) -> Result<(DVector<T>, f64)> {
    let dec = eig(&trace.final_x)?;
    let top = dec.eigenvalues[0];
    if !(top > 0.0) {
        return Err(Error::NoPositiveComponent);
    }
    let gap = dec.eigenvalues.get(1).map_or(0.0, |l2| top - l2);
    Ok((dec.vector(0).scale(top.sqrt()), gap))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::projections::build_affine_projector;
    use crate::rng;
    use crate::sensing::{measure, sample_ensemble, MeasurementVector};
    use nalgebra::DMatrix;

    fn instance(n: usize, m: usize, seed: u64) -> (SensingEnsemble<f64>, AffineProjector, HermitianMatrix<f64>) {
        let e = sample_ensemble::<f64>(n, m, seed).unwrap();
        let mut r = rng::stream(seed ^ 0x5eed);
        let x = DVector::from_fn(n, |_, _| f64::sample_standard(&mut r));
        let x = x.unscale(x.norm());
        let b = measure(&e, &x).unwrap();
        let p = build_affine_projector(&e, &b).unwrap();
        (e, p, HermitianMatrix::outer(&x))
    }

    #[test]
    fn momentum_schedule_from_unit_start() {
        // Closed-form evaluation of the recurrence.
        let (t1, b1) = momentum_step(1.0);
        assert!((t1 - 2.0 / (1.0 + 5f64.sqrt())).abs() < 1e-15);
        assert_eq!(b1, 0.0);
        let (t2, b2) = momentum_step(t1);
        let want = 2.0 / (1.0 + (1.0 + 4.0 / (t1 * t1)).sqrt());
        assert!((t2 - want).abs() < 1e-15);
        assert!((t2 - 0.455_887).abs() < 1e-6);
        assert!((b2 - t2 * (1.0 / t1 - 1.0)).abs() < 1e-15);
    }

    #[test]
    fn config_validation() {
        assert!(SolverConfig::dr(0).validate().is_err());
        assert!(SolverConfig::nesterov(0.0, 0.0, 10).validate().is_err());
        assert!(SolverConfig::nesterov(1e-4, -1.0, 10).validate().is_err());
        assert!(SolverConfig::dr(10).with_record_every(0).validate().is_err());
        assert!(SolverConfig::nesterov(1e-4, 1e-5, 10).validate().is_ok());
        let (e, p, _) = instance(3, 10, 1);
        assert!(solve_dr(&p, &e, &SolverConfig::pocs(5), None).is_err());
        assert_eq!("pocs".parse::<Method>().unwrap(), Method::Pocs);
        assert!("admm".parse::<Method>().is_err());
    }

    #[test]
    fn zero_data_stays_at_origin() {
        let e = sample_ensemble::<f64>(4, 12, 3).unwrap();
        let b = MeasurementVector::new(DVector::zeros(12), 0.0).unwrap();
        let p = build_affine_projector(&e, &b).unwrap();
        let dr = solve_dr(&p, &e, &SolverConfig::dr(50), None).unwrap();
        assert_eq!(dr.final_x, HermitianMatrix::zeros(4));
        let nest = solve_nesterov(&p, &e, &SolverConfig::nesterov(1e-3, 0.0, 50), None).unwrap();
        assert_eq!(nest.final_x, HermitianMatrix::zeros(4));
        assert!(dr.records.iter().all(|r| r.residual == 0.0));
    }

    #[test]
    fn dr_recovers_critically_determined_instance() {
        let (e, p, x0) = instance(2, 3, 4);
        let t = solve_dr(&p, &e, &SolverConfig::dr(1000), Some(&x0)).unwrap();
        assert!(t.final_error().unwrap() <= 1e-6);
        assert!(t.converged);
        assert_eq!(t.records.len(), 1000);
        assert!(t.records.windows(2).all(|w| w[0].iter < w[1].iter));
    }

    #[test]
    fn pocs_leaves_feasible_start_alone() {
        let (e, p, x0) = instance(3, 12, 5);
        let t = solve_pocs_from(&p, &e, &SolverConfig::pocs(20), Some(&x0), Some(&x0)).unwrap();
        assert!(t.final_error().unwrap() < 1e-9);
    }

    #[test]
    fn pocs_is_fejer_monotone() {
        let (e, p, x0) = instance(2, 3, 6);
        let mut x = HermitianMatrix::<f64>::zeros(2);
        let mut dist = x0.frobenius_norm();
        for _ in 0..200 {
            x = project_psd(&project_affine(&p, &e, &x).unwrap()).unwrap();
            let d = (&x - &x0).frobenius_norm();
            assert!(d <= dist + 1e-9);
            dist = d;
        }
        let t = solve_pocs(&p, &e, &SolverConfig::pocs(5000), Some(&x0)).unwrap();
        assert!(t.final_error().unwrap() <= 1e-4);
    }

    #[test]
    fn iterates_stay_psd() {
        let (e, p, x0) = instance(5, 12, 7);
        for k in 1..=15 {
            for cfg in [
                SolverConfig::dr(k),
                SolverConfig::pocs(k),
                SolverConfig::nesterov(1e-3, 0.0, k),
            ] {
                let t = solve(&p, &e, &cfg, Some(&x0)).unwrap();
                let ev = t.final_x.eig().unwrap().eigenvalues;
                let spec = ev[0].abs().max(ev[4].abs());
                assert!(ev[4] >= -1e-8 * spec, "{:?} after {k}: {ev:?}", cfg.method);
            }
        }
    }

    #[test]
    fn early_stop_and_recording_schedule() {
        let (e, p, x0) = instance(3, 20, 8);
        let cfg = SolverConfig::dr(1000).with_stop_tol(1e-12).with_record_every(7);
        let t = solve_dr(&p, &e, &cfg, Some(&x0)).unwrap();
        assert!(t.iterations < 1000);
        assert_eq!(t.last().unwrap().iter, t.iterations);
        assert!(t.records[..t.records.len() - 1].iter().all(|r| r.iter % 7 == 0));
        let t = solve_dr(&p, &e, &SolverConfig::dr(20).with_record_every(7), None).unwrap();
        let iters: Vec<usize> = t.records.iter().map(|r| r.iter).collect();
        assert_eq!(iters, vec![7, 14, 20]);
        assert!(t.records.iter().all(|r| r.recovery_error.is_none()));
    }

    #[test]
    fn huge_step_is_reported_as_divergence() {
        let (e, p, _) = instance(4, 20, 9);
        let err = solve_nesterov(&p, &e, &SolverConfig::nesterov(10.0, 0.0, 200), None).unwrap_err();
        assert!(matches!(err, Error::Diverged { .. }), "{err}");
        assert!(err.to_string().contains("step size too large"));
    }

    #[test]
    fn csv_export_format() {
        let (e, p, x0) = instance(2, 3, 10);
        let t = solve_dr(&p, &e, &SolverConfig::dr(2), Some(&x0)).unwrap();
        let csv = t.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "iter,recovery_error,residual,trace_value");
        assert_eq!(lines.len(), 3);
        let fields: Vec<&str> = lines[1].split(',').collect();
        assert_eq!(fields[0], "1");
        assert_eq!(fields[1].parse::<f64>().unwrap(), t.records[0].recovery_error.unwrap());
        let t = solve_dr(&p, &e, &SolverConfig::dr(1), None).unwrap();
        assert!(t.to_csv().lines().nth(1).unwrap().starts_with("1,,"));
    }

    #[test]
    fn rounding_examples() {
        let x0 = DVector::from_vec(vec![0.6, -0.8]);
        let mut trace = SolverTrace {
            records: vec![],
            final_x: HermitianMatrix::outer(&x0),
            iterations: 0,
            converged: true,
        };
        let (x, gap) = round_to_vector(&trace).unwrap();
        assert!((&x - &x0).norm().min((&x + &x0).norm()) < 1e-12);
        assert!((gap - 1.0).abs() < 1e-12);

        trace.final_x = HermitianMatrix::identity(3);
        assert_eq!(round_to_vector(&trace).unwrap().1, 0.0);

        trace.final_x = HermitianMatrix::from_matrix(DMatrix::from_element(2, 2, 0.0)).unwrap();
        assert!(matches!(round_to_vector(&trace), Err(Error::NoPositiveComponent)));
    }
}
