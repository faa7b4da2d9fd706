use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use ampdens::oracle::{self, GradientAscent};
use ampdens::synth::{self, TrueDensity};
use ampdens::{
    fit, DensityModel, DesignMatrix, DomainMap, Error, FitConfig, FitTrace, InnerSolver, SampleSet,
    WindowBasis,
};
use clap::{Args, Parser, Subcommand};

const EXIT_NONCONVERGED: u8 = 2;
const EXIT_INFEASIBLE: u8 = 3;
const EXIT_CONFIG: u8 = 4;

const TRACE_HEADER: &str = "k,theta_bar,inner_product,log_likelihood,inner_updates";
const ISE_TOL: f64 = 1e-10;

/// Maximum-likelihood density estimation with Bernstein windows.
#[derive(Parser)]
#[command(name = "ampdens", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a synthetic sample, one value per line.
    Gen(GenArgs),
    /// Fit a model to a sample file.
    Fit(FitArgs),
    /// Tabulate a model's pdf on an even grid.
    Eval(EvalArgs),
    /// Integrated squared error against a reference density.
    Compare(CompareArgs),
    /// Cross-check a fit against the brute-force oracles.
    Verify(VerifyArgs),
}

#[derive(Args)]
struct GenArgs {
    #[arg(long)]
    density: TrueDensity,
    /// Number of observations.
    #[arg(long)]
    size: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Destination; standard output when omitted.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct BasisArgs {
    /// Polynomial degree n (n + 1 windows).
    #[arg(long, conflicts_with = "windows")]
    degree: Option<usize>,
    /// Number of windows, n + 1.
    #[arg(long)]
    windows: Option<usize>,
    /// Data interval `a,b`; defaults to a hair beyond the sample range.
    #[arg(long, value_parser = parse_interval, allow_hyphen_values = true)]
    interval: Option<(f64, f64)>,
}

#[derive(Args)]
#[command(allow_negative_numbers = true)]
struct SolverArgs {
    /// Squared sphere radius, the total mass of the estimate.
    #[arg(long, default_value_t = 1.0)]
    r: f64,
    /// Outer tolerance on `r - sum u_i v_i`.
    #[arg(long, default_value_t = 1e-8)]
    epsilon: f64,
    /// Inner residual tolerance; defaults to 1e-10 * m.
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long, default_value_t = 10_000)]
    max_outer: usize,
    /// Inner update cap; defaults to 200 * m^2.
    #[arg(long)]
    max_inner: Option<usize>,
}

#[derive(Args)]
struct FitArgs {
    /// Sample file, one value per line.
    #[arg(long)]
    input: PathBuf,
    /// Model document destination.
    #[arg(long)]
    output: PathBuf,
    /// Per-iteration trace destination (CSV).
    #[arg(long)]
    trace: Option<PathBuf>,
    #[command(flatten)]
    basis: BasisArgs,
    #[command(flatten)]
    solver: SolverArgs,
}

#[derive(Args)]
struct EvalArgs {
    /// Model document.
    #[arg(long)]
    input: PathBuf,
    /// Destination; standard output when omitted.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Number of grid points, end points included.
    #[arg(long, default_value_t = 512)]
    grid: usize,
}

#[derive(Args)]
struct CompareArgs {
    /// Model document.
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    density: TrueDensity,
    /// Held-out sample file scored by log-likelihood.
    #[arg(long)]
    holdout: Option<PathBuf>,
    /// Destination; standard output when omitted.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    /// Sample file, one value per line.
    #[arg(long)]
    input: PathBuf,
    /// Destination; standard output when omitted.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Grid-search points per angle.
    #[arg(long, default_value_t = 401)]
    grid: usize,
    /// Seed for the projected-gradient starts.
    #[arg(long, default_value_t = 0x5eed)]
    seed: u64,
    #[command(flatten)]
    basis: BasisArgs,
    #[command(flatten)]
    solver: SolverArgs,
}

#[derive(Debug)]
enum CliError {
    Config(String),
    Infeasible(String),
    Nonconverged(String),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Infeasible { .. } | Error::ZeroDensity { .. } => {
                CliError::Infeasible(e.to_string())
            }
            Error::InnerCapExceeded { .. }
            | Error::OuterCapExceeded { .. }
            | Error::StepFailed { .. }
            | Error::SphereViolation { .. }
            | Error::Quadrature { .. }
            | Error::OracleNonConvergence(_) => CliError::Nonconverged(e.to_string()),
            _ => CliError::Config(e.to_string()),
        }
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Config(e.to_string())
    }
}

fn parse_interval(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s
        .split_once(',')
        .ok_or_else(|| format!("expected a,b but got {s:?}"))?;
    let a: f64 = a
        .trim()
        .parse()
        .map_err(|e| format!("bad lower end {a:?}: {e}"))?;
    let b: f64 = b
        .trim()
        .parse()
        .map_err(|e| format!("bad upper end {b:?}: {e}"))?;
    Ok((a, b))
}

fn read_samples(path: &Path) -> Result<Vec<f64>, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            l.trim()
                .parse::<f64>()
                .map_err(|e| CliError::Config(format!("{}:{}: {e}", path.display(), i + 1)))
        })
        .collect()
}

fn open_output(path: Option<&Path>) -> Result<Box<dyn Write>, CliError> {
    Ok(match path {
        Some(p) => {
            Box::new(BufWriter::new(fs::File::create(p).map_err(|e| {
                CliError::Config(format!("{}: {e}", p.display()))
            })?))
        }
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

impl BasisArgs {
    fn basis(&self) -> Result<WindowBasis, CliError> {
        let degree = match (self.degree, self.windows) {
            (Some(d), _) => d,
            (None, Some(0)) => return Err(CliError::Config("--windows must be at least 1".into())),
            (None, Some(w)) => w - 1,
            (None, None) => {
                return Err(CliError::Config(
                    "one of --degree or --windows is required".into(),
                ))
            }
        };
        Ok(WindowBasis::bernstein(degree)?)
    }

    fn samples(&self, observations: Vec<f64>) -> Result<SampleSet, CliError> {
        Ok(match self.interval {
            Some((a, b)) => SampleSet::new(observations, DomainMap::new(a, b)?)?,
            None => SampleSet::with_enclosing_domain(observations)?,
        })
    }
}

impl SolverArgs {
    fn config(&self) -> Result<FitConfig, CliError> {
        if let Some(0) = self.max_inner {
            return Err(CliError::Config("--max-inner must be positive".into()));
        }
        if self.max_outer == 0 {
            return Err(CliError::Config("--max-outer must be positive".into()));
        }
        Ok(FitConfig {
            r: self.r,
            epsilon: self.epsilon,
            inner: InnerSolver {
                delta: self.delta,
                max_updates: self.max_inner,
            },
            max_outer: self.max_outer,
        })
    }
}

fn write_trace(path: &Path, trace: &FitTrace) -> Result<(), CliError> {
    let mut w = open_output(Some(path))?;
    writeln!(w, "{TRACE_HEADER}")?;
    for k in 0..trace.iterations() {
        writeln!(
            w,
            "{},{:e},{:e},{:e},{}",
            k + 1,
            trace.theta[k],
            trace.inner_product[k],
            trace.loglik[k],
            trace.inner_updates[k]
        )?;
    }
    w.flush()?;
    Ok(())
}

fn cmd_gen(args: GenArgs) -> Result<(), CliError> {
    let xs = args.density.sample(args.size, args.seed)?;
    let mut w = open_output(args.output.as_deref())?;
    for x in xs {
        writeln!(w, "{x}")?;
    }
    w.flush()?;
    Ok(())
}

fn cmd_fit(args: FitArgs) -> Result<(), CliError> {
    let basis = args.basis.basis()?;
    let samples = args.basis.samples(read_samples(&args.input)?)?;
    let config = args.solver.config()?;
    match fit(&basis, &samples, &config) {
        Ok(model) => {
            if let (Some(path), Some(trace)) = (&args.trace, model.trace()) {
                write_trace(path, trace)?;
            }
            model.save(&args.output)?;
            Ok(())
        }
        Err(e) => {
            if let (
                Some(path),
                Error::OuterCapExceeded { trace, .. } | Error::StepFailed { trace, .. },
            ) = (&args.trace, &e)
            {
                write_trace(path, trace)?;
            }
            Err(e.into())
        }
    }
}

fn cmd_eval(args: EvalArgs) -> Result<(), CliError> {
    if args.grid < 2 {
        return Err(CliError::Config("--grid must be at least 2".into()));
    }
    let model = DensityModel::load(&args.input)?;
    let dom = model.domain();
    let mut w = open_output(args.output.as_deref())?;
    writeln!(w, "x,pdf")?;
    for x in synth::grid(dom.a(), dom.b(), args.grid) {
        writeln!(w, "{x:e},{:e}", model.pdf(x))?;
    }
    w.flush()?;
    Ok(())
}

fn cmd_compare(args: CompareArgs) -> Result<(), CliError> {
    let model = DensityModel::load(&args.input)?;
    let ise = synth::integrated_squared_error(&model, args.density, ISE_TOL)?;
    let holdout = match &args.holdout {
        Some(p) => Some(model.log_likelihood(&read_samples(p)?)?),
        None => None,
    };
    let mut w = open_output(args.output.as_deref())?;
    writeln!(w, "metric,value")?;
    writeln!(w, "ise,{ise:e}")?;
    if let Some(ll) = holdout {
        writeln!(w, "holdout_log_likelihood,{ll:e}")?;
    }
    w.flush()?;
    Ok(())
}

fn cmd_verify(args: VerifyArgs) -> Result<(), CliError> {
    let basis = args.basis.basis()?;
    if basis.len() > oracle::GRID_MAX_WINDOWS {
        return Err(CliError::Config(format!(
            "instance too large for oracle: grid search needs at most {} windows, got {}",
            oracle::GRID_MAX_WINDOWS,
            basis.len()
        )));
    }
    let samples = args.basis.samples(read_samples(&args.input)?)?;
    if samples.len() > oracle::GRADIENT_MAX_SAMPLES {
        return Err(CliError::Config(format!(
            "instance too large for oracle: projected gradient needs at most {} samples, got {}",
            oracle::GRADIENT_MAX_SAMPLES,
            samples.len()
        )));
    }
    let config = args.solver.config()?;
    let model = fit(&basis, &samples, &config)?;
    let a = DesignMatrix::windows(&basis, &samples)?;
    let fitted: Vec<f64> = model.coefficients().iter().map(|c| c.sqrt()).collect();
    let fit_ll = oracle::amplitude_loglik(&a, &fitted);
    let grid = oracle::grid_search(&a, config.r, args.grid)?;
    let pg = oracle::projected_gradient(
        &a,
        config.r,
        &GradientAscent {
            seed: args.seed,
            ..GradientAscent::default()
        },
    )?;
    let pg_weights = pg.weights();
    let coefficient_gap = model
        .coefficients()
        .iter()
        .zip(&pg_weights)
        .map(|(c, w)| (c - w).abs())
        .fold(0.0, f64::max);
    let spread = pg
        .endpoints
        .iter()
        .flat_map(|e| e.iter().zip(&pg.amplitudes).map(|(x, y)| (x - y).abs()))
        .fold(0.0, f64::max);
    let mut w = open_output(args.output.as_deref())?;
    writeln!(w, "metric,value")?;
    writeln!(w, "fit_log_likelihood,{fit_ll:e}")?;
    writeln!(w, "grid_log_likelihood,{:e}", grid.best_loglik)?;
    writeln!(w, "gradient_log_likelihood,{:e}", pg.best_loglik)?;
    writeln!(
        w,
        "log_likelihood_gap,{:e}",
        (grid.best_loglik - fit_ll).max(0.0)
    )?;
    writeln!(w, "coefficient_gap,{coefficient_gap:e}")?;
    writeln!(w, "multistart_spread,{spread:e}")?;
    writeln!(w, "gradient_check,{:e}", pg.gradient_check)?;
    w.flush()?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_CONFIG)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match cli.command {
        Command::Gen(a) => cmd_gen(a),
        Command::Fit(a) => cmd_fit(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Compare(a) => cmd_compare(a),
        Command::Verify(a) => cmd_verify(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let (code, msg) = match e {
                CliError::Config(m) => (EXIT_CONFIG, m),
                CliError::Infeasible(m) => (EXIT_INFEASIBLE, m),
                CliError::Nonconverged(m) => (EXIT_NONCONVERGED, m),
            };
            eprintln!("ampdens: {msg}");
            ExitCode::from(code)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn error_classes() {
        assert!(matches!(
            CliError::from(Error::Infeasible { sample: 0 }),
            CliError::Infeasible(_)
        ));
        assert!(matches!(
            CliError::from(Error::ZeroDensity { index: 2 }),
            CliError::Infeasible(_)
        ));
        assert!(matches!(
            CliError::from(Error::InnerCapExceeded {
                updates: 1,
                residual: 1.0,
                trace: vec![]
            }),
            CliError::Nonconverged(_)
        ));
        assert!(matches!(
            CliError::from(Error::EmptySample),
            CliError::Config(_)
        ));
    }

    #[test]
    fn interval_parsing() {
        assert_eq!(parse_interval("0,4"), Ok((0.0, 4.0)));
        assert_eq!(parse_interval(" -1.5 , 2 "), Ok((-1.5, 2.0)));
        assert!(parse_interval("0;4").is_err());
        assert!(parse_interval("a,4").is_err());
    }
}
