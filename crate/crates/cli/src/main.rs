//! `ajdkit` command-line front end.
//!
//! Exit codes: 0 success, 1 invalid input or arguments, 2 a solver did not converge (results are
//! still written), 3 I/O or parse failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use ajdkit::ajd::{AjdProblem, Algorithm, SolveOptions};
use ajdkit::bench::{self, ScenarioConfig};
use ajdkit::io::{self, MatrixJson};
use ajdkit::means::{ajd_mean, MeanKind, MeanOptions};
use ajdkit::measures::{diagonality, DiagonalityKind};
use ajdkit::projections::{closest_diagonal_with, ProjectionCriterion, ProjectionOptions};
use ajdkit::{Error, HpdMatrix, Scalar, C64};
use clap::{Parser, Subcommand, ValueEnum};
use nalgebra::DMatrix;
use serde_json::{json, Map, Value};

#[derive(Parser, Debug)]
#[command(name = "ajdkit", version, about = "Diagonality measures, closest diagonal matrices, joint diagonalization and AJD means")]
struct Cli {
    /// Worker threads for parallel sections [default: available parallelism]
    #[arg(long, global = true, env = "AJDKIT_THREADS")]
    threads: Option<usize>,

    /// Log solver iterations to standard error
    #[arg(long, global = true)]
    verbose: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Print every diagonality measure of a matrix as a JSON object
    Measure {
        /// Matrix JSON file
        #[arg(long)]
        input: PathBuf,
        /// Alpha values for the log-det alpha measure, comma separated, each in (-1, 1)
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true, default_value = "-0.5,0.5")]
        alpha: Vec<f64>,
    },
    /// Closest positive diagonal matrix under a criterion
    Project {
        /// Matrix JSON file
        #[arg(long)]
        input: PathBuf,
        /// Projection criterion
        #[arg(long, value_enum, default_value_t = CriterionArg::Riemannian)]
        criterion: CriterionArg,
        /// Alpha for `--criterion alpha`, in [-1, 1]
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        alpha: f64,
        /// Residual tolerance of the iterative criteria
        #[arg(long, default_value = "1e-10")]
        tol: f64,
        /// Iteration cap of the iterative criteria
        #[arg(long, default_value_t = 500)]
        max_iter: usize,
    },
    /// Approximate joint diagonalizer of a matrix set, written as matrix JSON to standard output
    Ajd {
        /// Matrix-set JSON file
        #[arg(long)]
        input: PathBuf,
        /// Alpha of the log-det criterion, in [-1, 1]; ignored by jadiag and uwedge
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        alpha: f64,
        /// Diagonalization algorithm
        #[arg(long, value_enum, default_value_t = AlgoArg::Ldnewton)]
        algo: AlgoArg,
        /// Stopping tolerance on the relative change of successive iterates
        #[arg(long, default_value = "1e-15")]
        tol: f64,
        /// Iteration cap
        #[arg(long, default_value_t = 200)]
        max_iter: usize,
        /// Write the per-iteration trace as CSV to this path
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// AJD-based mean of a matrix set, written as matrix JSON to standard output
    Mean {
        /// Matrix-set JSON file
        #[arg(long)]
        input: PathBuf,
        /// Order of the mean in [-1, 1]: -1 harmonic, 0 geometric, 1 arithmetic
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        p: f64,
        /// Alpha of the underlying diagonalizer, in [-1, 1]
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        alpha: f64,
    },
    /// Run a simulation scenario and write records.csv, timings.csv, summary.json and plots/
    Bench {
        /// Scenario JSON with ScenarioConfig field names
        #[arg(long)]
        config: PathBuf,
        /// Output directory, created if missing
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum CriterionArg {
    Frobenius,
    Riemannian,
    KlRight,
    KlLeft,
    KlSymmetric,
    Alpha,
    Bhattacharyya,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum AlgoArg {
    Ldnewton,
    Jadiag,
    Uwedge,
}

impl From<AlgoArg> for Algorithm {
    fn from(a: AlgoArg) -> Self {
        match a {
            AlgoArg::Ldnewton => Algorithm::LdNewton,
            AlgoArg::Jadiag => Algorithm::Jadiag,
            AlgoArg::Uwedge => Algorithm::Uwedge,
        }
    }
}

enum Outcome {
    Done,
    NotConverged,
}

fn check_alpha(alpha: f64) -> Result<(), Error> {
    if (-1.0..=1.0).contains(&alpha) {
        Ok(())
    } else {
        Err(Error::domain(format!("alpha = {alpha} is outside the valid range [-1, 1]")))
    }
}

fn check_solver(tol: f64, max_iter: usize) -> Result<(), Error> {
    if !(tol > 0.0 && tol.is_finite()) || max_iter == 0 {
        return Err(Error::domain("--tol must be positive and --max-iter at least 1"));
    }
    Ok(())
}

fn read_single(path: &Path) -> Result<(MatrixJson, bool), Error> {
    let text = io::read_to_string(path)?;
    let js: MatrixJson = serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    let complex = js.has_imaginary_part();
    Ok((js, complex))
}

fn read_set<T: Scalar>(text: &str) -> Result<Vec<HpdMatrix<T>>, Error> {
    io::parse_matrix_set::<T>(text)?.into_iter().map(HpdMatrix::from_matrix).collect()
}

fn measure<T: Scalar>(js: &MatrixJson, alphas: &[f64]) -> Result<Value, Error> {
    let a = HpdMatrix::from_matrix(js.to_matrix::<T>()?)?;
    let mut kinds = vec![
        ("frobenius".to_string(), DiagonalityKind::Frobenius),
        ("modified_frobenius".to_string(), DiagonalityKind::ModifiedFrobenius),
        ("riemannian".to_string(), DiagonalityKind::Riemannian),
        ("kl_right".to_string(), DiagonalityKind::KLRight),
        ("kl_left".to_string(), DiagonalityKind::KLLeft),
        ("kl_symmetric".to_string(), DiagonalityKind::KLSymmetric),
        ("bhattacharyya".to_string(), DiagonalityKind::Bhattacharyya),
    ];
    for &al in alphas {
        kinds.push((format!("logdet_alpha({al})"), DiagonalityKind::log_det_alpha(al)?));
    }
    let mut out = Map::new();
    for (name, kind) in kinds {
        out.insert(name, json!(diagonality(&a, kind)?));
    }
    Ok(Value::Object(out))
}

fn project<T: Scalar>(js: &MatrixJson, criterion: ProjectionCriterion, opts: &ProjectionOptions) -> Result<(Value, bool), Error> {
    let a = HpdMatrix::from_matrix(js.to_matrix::<T>()?)?;
    let p = closest_diagonal_with(&a, criterion, opts)?;
    let out = json!({
        "criterion": format!("{criterion:?}"),
        "diagonal": p.diag.entries().as_slice(),
        "residual": p.report.residual,
        "iterations": p.report.iterations,
        "converged": p.report.converged,
    });
    Ok((out, p.report.converged))
}

struct AjdArgs<'a> {
    alpha: f64,
    algo: Algorithm,
    opts: SolveOptions,
    trace: Option<&'a Path>,
    verbose: bool,
}

fn ajd<T: Scalar>(text: &str, args: &AjdArgs) -> Result<(String, bool), Error> {
    let problem = AjdProblem::new(read_set::<T>(text)?, args.alpha)?;
    let n = problem.dim();
    let c0 = DMatrix::<T>::identity(n, n);
    let res = args.algo.run(&problem, &c0, &args.opts, |_, _| {})?;
    if args.verbose {
        for e in &res.trace {
            eprintln!("iter {} cost {:.16e} grad {:.3e} step {:.3e} stop {:.3e}", e.iter, e.cost, e.grad_norm, e.step, e.stop_stat);
        }
    }
    if let Some(path) = args.trace {
        io::write_atomic(path, res.trace_csv().as_bytes())?;
    }
    Ok((io::matrix_to_string(&res.c), res.converged))
}

fn mean<T: Scalar>(text: &str, kind: MeanKind, alpha: f64) -> Result<(String, bool), Error> {
    let ms = read_set::<T>(text)?;
    let r = ajd_mean(&ms, kind, &MeanOptions { alpha, ..MeanOptions::default() })?;
    Ok((io::matrix_to_string(r.mean.as_matrix()), r.converged))
}

fn criterion(c: CriterionArg, alpha: f64) -> ProjectionCriterion {
    match c {
        CriterionArg::Frobenius => ProjectionCriterion::Frobenius,
        CriterionArg::Riemannian => ProjectionCriterion::Riemannian,
        CriterionArg::KlRight => ProjectionCriterion::KLRight,
        CriterionArg::KlLeft => ProjectionCriterion::KLLeft,
        CriterionArg::KlSymmetric => ProjectionCriterion::KLSymmetric,
        CriterionArg::Alpha => ProjectionCriterion::LogDetAlphaRight(alpha),
        CriterionArg::Bhattacharyya => ProjectionCriterion::Bhattacharyya,
    }
}

fn converged(ok: bool) -> Outcome {
    if ok {
        Outcome::Done
    } else {
        Outcome::NotConverged
    }
}

fn run(cli: Cli) -> Result<Outcome, Error> {
    if let Some(t) = cli.threads {
        if t == 0 {
            return Err(Error::domain("--threads must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new().num_threads(t).build_global().map_err(|e| Error::domain(e.to_string()))?;
    }
    match cli.command {
        Command::Measure { input, alpha } => {
            for &a in &alpha {
                DiagonalityKind::log_det_alpha(a)?;
            }
            let (js, complex) = read_single(&input)?;
            let v = if complex { measure::<C64>(&js, &alpha)? } else { measure::<f64>(&js, &alpha)? };
            println!("{v}");
            Ok(Outcome::Done)
        }
        Command::Project { input, criterion: c, alpha, tol, max_iter } => {
            check_alpha(alpha)?;
            check_solver(tol, max_iter)?;
            let crit = criterion(c, alpha);
            let opts = ProjectionOptions { tol, max_iter, start: None };
            let (js, complex) = read_single(&input)?;
            let (v, ok) = if complex { project::<C64>(&js, crit, &opts)? } else { project::<f64>(&js, crit, &opts)? };
            println!("{v}");
            Ok(converged(ok))
        }
        Command::Ajd { input, alpha, algo, tol, max_iter, trace } => {
            check_alpha(alpha)?;
            check_solver(tol, max_iter)?;
            let text = io::read_to_string(&input)?;
            let args = AjdArgs {
                alpha,
                algo: algo.into(),
                opts: SolveOptions { tol, max_iter, ..SolveOptions::default() },
                trace: trace.as_deref(),
                verbose: cli.verbose,
            };
            let (out, ok) = if io::set_is_complex(&text)? { ajd::<C64>(&text, &args)? } else { ajd::<f64>(&text, &args)? };
            println!("{out}");
            Ok(converged(ok))
        }
        Command::Mean { input, p, alpha } => {
            check_alpha(alpha)?;
            let kind = MeanKind::new(p)?;
            let text = io::read_to_string(&input)?;
            let (out, ok) = if io::set_is_complex(&text)? { mean::<C64>(&text, kind, alpha)? } else { mean::<f64>(&text, kind, alpha)? };
            println!("{out}");
            Ok(converged(ok))
        }
        Command::Bench { config, out } => {
            let text = io::read_to_string(&config)?;
            let cfg: ScenarioConfig = serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", config.display())))?;
            cfg.validate()?;
            let (records, summary) = bench::run_experiment(&cfg)?;
            bench::export(&out, &records, &summary)?;
            if cli.verbose {
                for c in &summary.cells {
                    eprintln!("{} alpha {:?}: mean PI {:.6} converged {}/{}", c.algorithm, c.alpha, c.mean_pi, c.converged, c.runs);
                }
            }
            Ok(converged(records.iter().all(|r| r.converged)))
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(Outcome::Done) => ExitCode::SUCCESS,
        Ok(Outcome::NotConverged) => {
            eprintln!("warning: the solver did not converge; results were written anyway");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_io() { 3 } else { 1 })
        }
    }
}
