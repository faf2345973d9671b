mod input;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use liftfeas::harness::{
    certificate_csv, certificate_summary, convergence_runs, parse_range, run_certificate_study,
    run_convergence_study, run_grid, write_grid_outputs, GridSpec,
};
use liftfeas::projections::build_affine_projector;
use liftfeas::rng::stream;
use liftfeas::solvers::{
    round_to_vector, solve, solve_dr_from, SolverConfig, SolverTrace, GRID_STEP_SIZE,
};
use liftfeas::{Complex, DMatrix, Error, Field, HermitianMatrix, MeasurementVector, Method, Scalar, SensingEnsemble};

use input::CsvScalar;

#[derive(Parser)]
#[command(name = "liftfeas", version, about = "Phaseless recovery by lifted PSD feasibility")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Phase-transition grid: grid.csv, timing.csv and heatmap.pgm.
    Grid(GridArgs),
    /// Convergence traces for DR, Nesterov and PhaseLift at eps 0 and 0.1.
    Converge(ConvergeArgs),
    /// Certificate checks over independent ensembles.
    Certify(CertifyArgs),
    /// Recover a vector from a measurements CSV.
    Solve(SolveArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum SolverArg {
    Dr,
    Pocs,
    Nesterov,
}

#[derive(Clone, Copy, ValueEnum)]
enum FieldArg {
    Real,
    Complex,
}

#[derive(Args)]
struct GridArgs {
    /// Signal dimensions, `start:stop:step` or a single value.
    #[arg(long, default_value = "5:50:5")]
    n: String,
    #[arg(long, default_value = "10:250:10")]
    m: String,
    #[arg(long, default_value_t = 10)]
    trials: usize,
    #[arg(long, default_value_t = 0.1)]
    eps: f64,
    #[arg(long, value_enum, default_value_t = SolverArg::Dr)]
    solver: SolverArg,
    #[arg(long, default_value_t = GRID_STEP_SIZE)]
    alpha: f64,
    #[arg(long, default_value_t = 0.0)]
    lambda: f64,
    #[arg(long, default_value_t = 1000)]
    iters: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Worker threads (default: all cores). Outputs do not depend on it.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args)]
struct ConvergeArgs {
    #[arg(long, default_value_t = 10)]
    n: usize,
    #[arg(long, default_value_t = 60)]
    m: usize,
    /// One seed writes into `--out`; several write `seed_{s}/` subdirectories.
    #[arg(long, num_args = 1.., value_delimiter = ',', default_value = "0")]
    seed: Vec<u64>,
    #[arg(long, default_value_t = 1000)]
    iters: usize,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args)]
struct CertifyArgs {
    #[arg(long, default_value_t = 20)]
    n: usize,
    /// Defaults to `ceil(20 n log n)`.
    #[arg(long)]
    m: Option<usize>,
    #[arg(long, default_value_t = 1.0)]
    beta: f64,
    /// Number of independent ensembles.
    #[arg(long, default_value_t = 100)]
    seeds: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    n: usize,
    /// Douglas-Rachford warm start `Y_0` drawn from this seed; zero start when absent.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum, default_value_t = FieldArg::Real)]
    field: FieldArg,
    #[arg(long, value_enum, default_value_t = SolverArg::Dr)]
    solver: SolverArg,
    #[arg(long, default_value_t = GRID_STEP_SIZE)]
    alpha: f64,
    #[arg(long, default_value_t = 0.0)]
    lambda: f64,
    #[arg(long, default_value_t = 1000)]
    iters: usize,
    /// Declared noise level of the measurements.
    #[arg(long, default_value_t = 0.0)]
    eps: f64,
}

enum Failure {
    Input(String),
    Solver(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Solver(_) => 1,
            Failure::Input(_) => 2,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::NonFinite
            | Error::DimensionMismatch { .. }
            | Error::InvalidArgument(_)
            | Error::ZeroReference
            | Error::IncompleteGrid(_) => Failure::Input(e.to_string()),
            _ => Failure::Solver(e.to_string()),
        }
    }
}

fn write(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text).map_err(|e| Failure::Solver(format!("{}: {e}", path.display())))
}

fn create_dir(dir: &Path) -> Result<(), Failure> {
    fs::create_dir_all(dir).map_err(|e| Failure::Solver(format!("{}: {e}", dir.display())))
}

fn solver_config(kind: SolverArg, iters: usize, alpha: f64, lambda: f64) -> SolverConfig {
    match kind {
        SolverArg::Dr => SolverConfig::dr(iters),
        SolverArg::Pocs => SolverConfig::pocs(iters),
        SolverArg::Nesterov => SolverConfig::nesterov(alpha, lambda, iters),
    }
}

fn grid(a: GridArgs) -> Result<(), Failure> {
    let spec = GridSpec {
        n_values: parse_range(&a.n)?,
        m_values: parse_range(&a.m)?,
        trials: a.trials,
        eps: a.eps,
        solver: solver_config(a.solver, a.iters, a.alpha, a.lambda),
        master_seed: a.seed,
    };
    let g = run_grid(&spec, a.threads)?;
    write_grid_outputs(&g, &a.out)?;
    let failed = g.rows.iter().filter(|r| r.failed).count();
    println!("{} trials, {failed} failed; wrote {}", g.rows.len(), a.out.display());
    Ok(())
}

fn converge(a: ConvergeArgs) -> Result<(), Failure> {
    if let [seed] = a.seed[..] {
        create_dir(&a.out)?;
        for run in convergence_runs(a.n, a.m, seed, a.iters)? {
            write(&a.out.join(run.file_name()), &run.trace.to_csv())?;
        }
    } else {
        run_convergence_study(a.n, a.m, &a.seed, a.iters, &a.out, a.threads)?;
    }
    println!("wrote {}", a.out.display());
    Ok(())
}

fn certify(a: CertifyArgs) -> Result<(), Failure> {
    let n = a.n as f64;
    let m = a.m.unwrap_or_else(|| (20.0 * n * n.ln()).ceil().max(1.0) as usize);
    let rows = run_certificate_study(a.n, m, a.beta, a.seeds, a.seed, a.threads)?;
    create_dir(&a.out)?;
    write(&a.out.join("certificate.csv"), &certificate_csv(&rows))?;
    let summary = certificate_summary(a.n, m, a.beta, &rows);
    write(&a.out.join("summary.txt"), &summary)?;
    print!("{summary}");
    Ok(())
}

fn random_start<T: Field>(n: usize, seed: u64) -> HermitianMatrix<T> {
    let mut r = stream(seed);
    let g = DMatrix::from_fn(n, n, |_, _| T::sample_standard(&mut r));
    HermitianMatrix::from_matrix((&g + g.adjoint()).map(|v| v.scale(0.5))).expect("finite")
}

fn format_scalar<T: Field>(v: T) -> String {
    match T::SCALAR {
        Scalar::Real => v.real().to_string(),
        Scalar::Complex => format!("{},{}", v.real(), v.imaginary()),
    }
}

fn solve_file<T: CsvScalar>(a: &SolveArgs) -> Result<(), Failure> {
    let file = fs::File::open(&a.input).map_err(|e| Failure::Input(format!("{}: {e}", a.input.display())))?;
    let data = input::read::<T, _>(file, a.n).map_err(Failure::Input)?;
    let e = SensingEnsemble::from_vectors(data.vectors)?;
    let b = MeasurementVector::new(data.values, a.eps)?;
    let cfg = solver_config(a.solver, a.iters, a.alpha, a.lambda);
    cfg.validate()?;
    let p = build_affine_projector(&e, &b)?;
    let trace: SolverTrace<T> = match (cfg.method, a.seed) {
        (Method::DouglasRachford, Some(seed)) => {
            solve_dr_from(&p, &e, &cfg, None, Some(&random_start(a.n, seed)))?
        }
        _ => solve(&p, &e, &cfg, None)?,
    };
    let (x, gap) = round_to_vector(&trace)?;
    for v in x.iter() {
        println!("{}", format_scalar(*v));
    }
    println!(
        "# residual={} eigen_gap={} iterations={} converged={}",
        trace.final_residual(),
        gap,
        trace.iterations,
        trace.converged
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Grid(a) => grid(a),
        Command::Converge(a) => converge(a),
        Command::Certify(a) => certify(a),
        Command::Solve(a) => match a.field {
            FieldArg::Real => solve_file::<f64>(&a),
            FieldArg::Complex => solve_file::<Complex<f64>>(&a),
        },
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let msg = match &f {
                Failure::Input(m) => format!("bad input: {m}"),
                Failure::Solver(m) => format!("solver failure: {m}"),
            };
            eprintln!("liftfeas: {msg}");
            ExitCode::from(f.code())
        }
    }
}
