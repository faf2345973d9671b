//! Seeded experiments: single recovery trials, `(n, m)` phase-transition
//! grids, convergence traces and certificate studies.
//!
//! Every random quantity is a pure function of a seed. Grid cells use
//! `derive_seed(master, [n, m, trial])`; inside a trial the signal, the
//! ensemble and the noise use sub-streams 0, 1 and 2. Work items may run on
//! any number of threads without changing a single output byte.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use nalgebra::DVector;
use rayon::prelude::*;

use crate::certificate::{build_certificate, check_certificate, CertificateParams, CertificateReport};
use crate::error::{Error, Result};
use crate::matcore::{Field, HermitianMatrix, SubspaceAnchor};
use crate::projections::{build_affine_projector, AffineProjector};
use crate::rng::derive_seed;
use crate::sensing::{add_noise, measure, sample_ensemble, MeasurementVector, SensingEnsemble};
use crate::solvers::{solve, SolverConfig, SolverTrace, CONVERGENCE_STEP_SIZE};

const SIGNAL_STREAM: u64 = 0;
const ENSEMBLE_STREAM: u64 = 1;
const NOISE_STREAM: u64 = 2;

/// Maps `f` over `items` in parallel, preserving order. `threads = None` uses
/// rayon's global pool.
pub fn par_map<I, O, F>(threads: Option<usize>, items: Vec<I>, f: F) -> Result<Vec<O>>
where
    I: Send,
    O: Send,
    F: Fn(I) -> O + Send + Sync,
{
    match threads {
        None => Ok(items.into_par_iter().map(f).collect()),
        Some(k) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(k.max(1))
                .build()
                .map_err(|err| Error::InvalidArgument(format!("thread pool: {err}")))?;
            Ok(pool.install(|| items.into_par_iter().map(f).collect()))
        }
    }
}

/// A sampled recovery problem: unit signal `x0` uniform on the sphere,
/// Gaussian ensemble, measurements with exact-radius noise.
#[derive(Debug, Clone)]
pub struct Instance<T: Field> {
    pub x0: DVector<T>,
    pub truth: HermitianMatrix<T>,
    pub ensemble: SensingEnsemble<T>,
    pub measurements: MeasurementVector,
    pub seed: u64,
}

impl<T: Field> Instance<T> {
    pub fn sample(n: usize, m: usize, eps: f64, seed: u64) -> Result<Self> {
        if n == 0 || m == 0 {
            return Err(Error::InvalidArgument(format!("need n, m >= 1, got n={n}, m={m}")));
        }
        let mut r = crate::rng::stream(derive_seed(seed, &[SIGNAL_STREAM]));
        let x0 = DVector::from_fn(n, |_, _| T::sample_standard(&mut r));
        let x0 = x0.unscale(x0.norm());
        let ensemble = sample_ensemble::<T>(n, m, derive_seed(seed, &[ENSEMBLE_STREAM]))?;
        let exact = measure(&ensemble, &x0)?;
        let measurements = add_noise(&exact, eps, x0.norm(), derive_seed(seed, &[NOISE_STREAM]))?;
        Ok(Self {
            truth: HermitianMatrix::outer(&x0),
            x0,
            ensemble,
            measurements,
            seed,
        })
    }

    pub fn projector(&self) -> Result<AffineProjector> {
        build_affine_projector(&self.ensemble, &self.measurements)
    }

    pub fn solve(&self, cfg: &SolverConfig) -> Result<SolverTrace<T>> {
        let p = self.projector()?;
        solve(&p, &self.ensemble, cfg, Some(&self.truth))
    }
}

/// One grid cell sample. Failed solves carry `NaN` errors and `failed = true`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridRow {
    pub n: usize,
    pub m: usize,
    pub trial: usize,
    pub seed: u64,
    pub iters: usize,
    pub recovery_error: f64,
    pub residual: f64,
    pub wall_ms: f64,
    pub failed: bool,
}

/// Runs one real-field trial, recording solver failures in the row.
pub fn run_trial(n: usize, m: usize, eps: f64, solver: &SolverConfig, seed: u64) -> GridRow {
    run_trial_at(n, m, 0, eps, solver, seed)
}

fn run_trial_at(n: usize, m: usize, trial: usize, eps: f64, solver: &SolverConfig, seed: u64) -> GridRow {
    let start = Instant::now();
    let outcome = Instance::<f64>::sample(n, m, eps, seed).and_then(|inst| inst.solve(solver));
    let wall_ms = start.elapsed().as_secs_f64() * 1e3;
    let (iters, recovery_error, residual, failed) = match outcome {
        Ok(t) => (
            t.iterations,
            t.final_error().unwrap_or(f64::NAN),
            t.final_residual(),
            false,
        ),
        Err(_) => (0, f64::NAN, f64::NAN, true),
    };
    GridRow {
        n,
        m,
        trial,
        seed,
        iters,
        recovery_error,
        residual,
        wall_ms,
        failed,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub n_values: Vec<usize>,
    pub m_values: Vec<usize>,
    pub trials: usize,
    pub eps: f64,
    pub solver: SolverConfig,
    pub master_seed: u64,
}

impl GridSpec {
    /// `n` in 5..=50 step 5, `m` in 10..=250 step 10, 10 trials, `eps = 0.1`,
    /// Douglas-Rachford for 1000 iterations.
    pub fn reproduction(master_seed: u64) -> Self {
        Self {
            n_values: (5..=50).step_by(5).collect(),
            m_values: (10..=250).step_by(10).collect(),
            trials: 10,
            eps: 0.1,
            solver: SolverConfig::dr(1000),
            master_seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_values.is_empty() || self.m_values.is_empty() {
            return Err(Error::InvalidArgument("grid ranges must be nonempty".into()));
        }
        if self.trials == 0 {
            return Err(Error::InvalidArgument("trials must be at least 1".into()));
        }
        if self.n_values.contains(&0) || self.m_values.contains(&0) {
            return Err(Error::InvalidArgument("grid values must be positive".into()));
        }
        self.solver.validate()
    }

    pub fn trial_seed(&self, n: usize, m: usize, trial: usize) -> u64 {
        derive_seed(self.master_seed, &[n as u64, m as u64, trial as u64])
    }
}

/// Parses `start:stop:step` (inclusive) or a single value.
pub fn parse_range(s: &str) -> Result<Vec<usize>> {
    let bad = || Error::InvalidArgument(format!("bad range `{s}`, expected start:stop:step"));
    let parts: Vec<usize> = s
        .split(':')
        .map(|p| p.trim().parse::<usize>().map_err(|_| bad()))
        .collect::<Result<_>>()?;
    match parts[..] {
        [v] => Ok(vec![v]),
        [a, b] if a <= b => Ok((a..=b).collect()),
        [a, b, step] if a <= b && step > 0 => Ok((a..=b).step_by(step).collect()),
        _ => Err(bad()),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridResult {
    pub n_values: Vec<usize>,
    pub m_values: Vec<usize>,
    /// Sorted by `(n, m, trial)`.
    pub rows: Vec<GridRow>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellSummary {
    /// Mean recovery error over successful trials (`NaN` if none).
    pub mean_error: f64,
    pub trials: usize,
    pub failures: usize,
}

pub fn run_grid(spec: &GridSpec, threads: Option<usize>) -> Result<GridResult> {
    spec.validate()?;
    let mut items = Vec::new();
    for &n in &spec.n_values {
        for &m in &spec.m_values {
            for trial in 0..spec.trials {
                items.push((n, m, trial));
            }
        }
    }
    let mut rows = par_map(threads, items, |(n, m, trial)| {
        run_trial_at(n, m, trial, spec.eps, &spec.solver, spec.trial_seed(n, m, trial))
    })?;
    rows.sort_by_key(|r| (r.n, r.m, r.trial));
    Ok(GridResult {
        n_values: spec.n_values.clone(),
        m_values: spec.m_values.clone(),
        rows,
    })
}

impl GridResult {
    pub fn summaries(&self) -> BTreeMap<(usize, usize), CellSummary> {
        let mut acc: BTreeMap<(usize, usize), (f64, usize, usize, usize)> = BTreeMap::new();
        for r in &self.rows {
            let e = acc.entry((r.n, r.m)).or_insert((0.0, 0, 0, 0));
            e.2 += 1;
            if r.failed || !r.recovery_error.is_finite() {
                e.3 += 1;
            } else {
                e.0 += r.recovery_error;
                e.1 += 1;
            }
        }
        acc.into_iter()
            .map(|(k, (sum, ok, trials, failures))| {
                let mean_error = if ok > 0 { sum / ok as f64 } else { f64::NAN };
                (k, CellSummary { mean_error, trials, failures })
            })
            .collect()
    }

    pub fn mean_error(&self, n: usize, m: usize) -> Option<f64> {
        self.summaries().get(&(n, m)).map(|s| s.mean_error)
    }

    /// Smallest `m` whose mean error is below `threshold` at this `n`.
    pub fn threshold_m(&self, n: usize, threshold: f64) -> Option<usize> {
        let s = self.summaries();
        self.m_values
            .iter()
            .copied()
            .find(|&m| s.get(&(n, m)).is_some_and(|c| c.mean_error < threshold))
    }

    /// `n,m,trial,seed,iters,recovery_error,residual`. Wall-clock times live
    /// in [`GridResult::timing_csv`] so this file is reproducible byte for byte.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,m,trial,seed,iters,recovery_error,residual\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                r.n, r.m, r.trial, r.seed, r.iters, r.recovery_error, r.residual
            ));
        }
        out
    }

    pub fn timing_csv(&self) -> String {
        let mut out = String::from("n,m,trial,wall_ms\n");
        for r in &self.rows {
            out.push_str(&format!("{},{},{},{}\n", r.n, r.m, r.trial, r.wall_ms));
        }
        out
    }

    fn missing_cells(&self) -> Vec<(usize, usize)> {
        let s = self.summaries();
        let mut missing = Vec::new();
        for &n in &self.n_values {
            for &m in &self.m_values {
                if !s.contains_key(&(n, m)) {
                    missing.push((n, m));
                }
            }
        }
        missing
    }

    /// Plain PGM (P2, maxval 255): one row per `n` ascending top to bottom,
    /// one column per `m` ascending left to right, gray
    /// `round(255 (1 - min(mean_error, 1)))` so white is exact recovery. A
    /// cell whose trials all failed is drawn black.
    pub fn heatmap_pgm(&self) -> Result<String> {
        let missing = self.missing_cells();
        if !missing.is_empty() {
            return Err(Error::IncompleteGrid(missing));
        }
        let s = self.summaries();
        let mut out = format!("P2\n{} {}\n255\n", self.m_values.len(), self.n_values.len());
        for &n in &self.n_values {
            let row: Vec<String> = self
                .m_values
                .iter()
                .map(|&m| gray_level(s[&(n, m)].mean_error).to_string())
                .collect();
            out.push_str(&row.join(" "));
            out.push('\n');
        }
        Ok(out)
    }
}

/// `round_half_up(255 (1 - min(err, 1)))`; non-finite errors map to 0.
pub fn gray_level(err: f64) -> u8 {
    if !err.is_finite() {
        return 0;
    }
    let v = 255.0 * (1.0 - err.clamp(0.0, 1.0));
    (v + 0.5).floor() as u8
}

pub fn emit_heatmap(g: &GridResult, path: &Path) -> Result<()> {
    fs::write(path, g.heatmap_pgm()?)?;
    Ok(())
}

/// Writes `grid.csv`, `timing.csv` and `heatmap.pgm` into `dir`.
pub fn write_grid_outputs(g: &GridResult, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("grid.csv"), g.to_csv())?;
    fs::write(dir.join("timing.csv"), g.timing_csv())?;
    emit_heatmap(g, &dir.join("heatmap.pgm"))
}

/// The three solver variants of a convergence study.
pub fn convergence_variants(iters: usize) -> [(&'static str, SolverConfig); 3] {
    [
        ("dr", SolverConfig::dr(iters)),
        ("nesterov", SolverConfig::nesterov(CONVERGENCE_STEP_SIZE, 0.0, iters)),
        ("phaselift", SolverConfig::nesterov(CONVERGENCE_STEP_SIZE, 1e-5, iters)),
    ]
}

pub const CONVERGENCE_NOISE_LEVELS: [f64; 2] = [0.0, 0.1];

#[derive(Debug, Clone)]
pub struct ConvergenceRun {
    pub variant: &'static str,
    pub eps: f64,
    pub trace: SolverTrace<f64>,
}

impl ConvergenceRun {
    pub fn file_name(&self) -> String {
        format!("{}_{}.csv", self.variant, self.eps)
    }
}

/// Runs every variant on the noiseless and noisy instance drawn from `seed`.
/// Both instances share the signal and the ensemble.
pub fn convergence_runs(n: usize, m: usize, seed: u64, iters: usize) -> Result<Vec<ConvergenceRun>> {
    let mut runs = Vec::new();
    for eps in CONVERGENCE_NOISE_LEVELS {
        let inst = Instance::<f64>::sample(n, m, eps, seed)?;
        let p = inst.projector()?;
        for (variant, cfg) in convergence_variants(iters) {
            let trace = solve(&p, &inst.ensemble, &cfg, Some(&inst.truth))?;
            runs.push(ConvergenceRun { variant, eps, trace });
        }
    }
    Ok(runs)
}

/// Writes `{method}_{eps}.csv` traces for each seed into `out_dir/seed_{seed}/`.
pub fn run_convergence_study(
    n: usize,
    m: usize,
    seeds: &[u64],
    iters: usize,
    out_dir: &Path,
    threads: Option<usize>,
) -> Result<Vec<PathBuf>> {
    let all = par_map(threads, seeds.to_vec(), |seed| {
        convergence_runs(n, m, seed, iters).map(|r| (seed, r))
    })?;
    let mut written = Vec::new();
    for item in all {
        let (seed, runs) = item?;
        let dir = out_dir.join(format!("seed_{seed}"));
        fs::create_dir_all(&dir)?;
        for run in runs {
            let path = dir.join(run.file_name());
            fs::write(&path, run.trace.to_csv())?;
            written.push(path);
        }
    }
    Ok(written)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CertificateRow {
    pub index: usize,
    pub seed: u64,
    pub report: CertificateReport,
}

/// Certificate for `x0 = e_1` on `count` independent real ensembles.
pub fn run_certificate_study(
    n: usize,
    m: usize,
    beta: f64,
    count: usize,
    master_seed: u64,
    threads: Option<usize>,
) -> Result<Vec<CertificateRow>> {
    let params = CertificateParams::<f64>::new(beta, SubspaceAnchor::coordinate(n, 0))?;
    let rows = par_map(threads, (0..count).collect(), |index| -> Result<CertificateRow> {
        let seed = derive_seed(master_seed, &[index as u64]);
        let e = sample_ensemble::<f64>(n, m, seed)?;
        let (ybar, lam) = build_certificate(&e, &params)?;
        let report = check_certificate(&ybar, &lam, &params.anchor)?;
        Ok(CertificateRow { index, seed, report })
    })?;
    rows.into_iter().collect()
}

pub fn certificate_csv(rows: &[CertificateRow]) -> String {
    let mut out = String::from(
        "index,seed,y_t_nuclear,t_perp_min_eig,t_perp_dev,lambda_l1,truncation_rate,pass_t_nuclear,pass_t_perp,pass_lambda_l1\n",
    );
    for r in rows {
        let rep = &r.report;
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            r.index,
            r.seed,
            rep.y_t_nuclear,
            rep.t_perp_min_eig,
            rep.t_perp_dev,
            rep.lambda_l1,
            rep.truncation_rate,
            rep.passes.t_nuclear,
            rep.passes.t_perp,
            rep.passes.lambda_l1
        ));
    }
    out
}

/// `key=value` summary of pass rates over a certificate study.
pub fn certificate_summary(n: usize, m: usize, beta: f64, rows: &[CertificateRow]) -> String {
    let count = rows.len().max(1) as f64;
    let rate = |f: &dyn Fn(&CertificateReport) -> bool| rows.iter().filter(|r| f(&r.report)).count() as f64 / count;
    let max_of = |f: &dyn Fn(&CertificateReport) -> f64| rows.iter().map(|r| f(&r.report)).fold(f64::NEG_INFINITY, f64::max);
    format!(
        "n={n}\nm={m}\nbeta={beta}\nseeds={}\npass_rate_t_nuclear={}\npass_rate_t_perp={}\npass_rate_lambda_l1={}\npass_rate_all={}\nmax_y_t_nuclear={}\nmin_t_perp_min_eig={}\nmax_lambda_l1={}\n",
        rows.len(),
        rate(&|r| r.passes.t_nuclear),
        rate(&|r| r.passes.t_perp),
        rate(&|r| r.passes.lambda_l1),
        rate(&|r| r.passes.all()),
        max_of(&|r| r.y_t_nuclear),
        -max_of(&|r| -r.t_perp_min_eig),
        max_of(&|r| r.lambda_l1),
    )
}
