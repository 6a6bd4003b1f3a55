use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use sobolevkit::csv::number;
use sobolevkit::{
    commutation_residual, compose, convergence_study, exponential_flow, membership_report, mollify,
    mollify_zero_extended, newton_net, suite, verify_weak_derivative, BoxDomain, DerivativeFamily, Error, Expr,
    Grid, GridFunction, MollifierProfile, MultiIndex, TestFunction,
};

const GRAMMAR: &str = "\
EXPRESSIONS:
  Variables x1, x2, x3; constants pi, e; numbers such as 2, 0.5, 1e-3.
  Operators + - * / ^ with the usual precedence; ^ is right-associative and
  binds tighter than unary minus, so -2^2 = -4.
  Functions: abs sin cos exp log sqrt step sign min(a,b) max(a,b).
  step(x) is 0 for x < 0 and 1 otherwise; sign(0) = 0.

CONFIG FILES:
  --config FILE reads one key=value per line (keys are flag names without
  the leading dashes, # starts a comment). Flags given on the command line
  take precedence.

EXIT STATUS:
  0 success, 1 suite failure, 2 invalid input, 3 numerical failure.

ENVIRONMENT:
  SOBOLEVKIT_SEED fixes the seed of the randomized suite checks.";

#[derive(Parser)]
#[command(name = "sobolevkit", version, about = "Mollifiers, weak derivatives and Sobolev norms on grids")]
#[command(after_help = GRAMMAR, args_override_self = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Domain {
    /// Box bounds as lo,hi per axis, e.g. 0,1 or 0,1,0,2
    #[arg(long = "box", value_delimiter = ',', default_value = "0,1", allow_negative_numbers = true)]
    bounds: Vec<f64>,
    /// Cells per axis
    #[arg(long, default_value_t = 400)]
    res: usize,
}

#[derive(Args, Clone)]
struct Output {
    /// Write CSV here instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
    /// key=value file supplying defaults for any flag
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Smooth f with the bump of radius eps and print the samples
    Mollify {
        #[arg(long)]
        f: String,
        #[arg(long)]
        eps: f64,
        /// Treat f as zero outside the box and smooth every node
        #[arg(long)]
        zero_extend: bool,
        #[command(flatten)]
        domain: Domain,
        #[command(flatten)]
        output: Output,
    },
    /// L^p distance between f and its smoothings along an eps ladder
    Converge {
        #[arg(long)]
        f: String,
        #[arg(long, default_value = "2", value_parser = parse_p)]
        p: f64,
        /// Strictly decreasing radii, comma separated
        #[arg(long, value_delimiter = ',', required = true)]
        eps: Vec<f64>,
        #[command(flatten)]
        domain: Domain,
        #[command(flatten)]
        output: Output,
    },
    /// ||d^alpha(f_eps) - (u)_eps||_p on the interior region
    Commute {
        #[arg(long)]
        f: String,
        #[arg(long)]
        u: String,
        #[arg(long, default_value = "1")]
        alpha: String,
        #[arg(long)]
        eps: f64,
        #[arg(long, default_value = "2", value_parser = parse_p)]
        p: f64,
        #[command(flatten)]
        domain: Domain,
        #[command(flatten)]
        output: Output,
    },
    /// Check that u is the weak derivative d^alpha f against test functions
    WeakVerify {
        #[arg(long)]
        f: String,
        #[arg(long)]
        u: String,
        #[arg(long, default_value = "1")]
        alpha: String,
        /// Number of catalog test functions
        #[arg(long, default_value_t = 8)]
        tests: usize,
        #[arg(long, default_value_t = 1e-4)]
        tol: f64,
        #[command(flatten)]
        domain: Domain,
        #[command(flatten)]
        output: Output,
    },
    /// Decide membership in W^{k,p} from candidate derivatives
    Sobolev {
        #[arg(long)]
        f: String,
        /// Candidate derivative as alpha=expr, e.g. "1=cos(x1)" or "(0,1)=x1"; repeatable
        #[arg(long = "d")]
        derivatives: Vec<String>,
        #[arg(long, default_value_t = 1)]
        k: u32,
        #[arg(long, default_value = "2", value_parser = parse_p)]
        p: f64,
        #[arg(long, default_value_t = 8)]
        tests: usize,
        #[arg(long, default_value_t = 1e-4)]
        tol: f64,
        #[command(flatten)]
        domain: Domain,
        #[command(flatten)]
        output: Output,
    },
    /// Support radius and mass of the convolution of two scaled bumps
    Compose {
        #[arg(long)]
        eps_a: f64,
        #[arg(long)]
        eps_b: f64,
        #[arg(long, default_value_t = 1)]
        dim: usize,
        #[arg(long, default_value_t = 600)]
        res: usize,
        #[command(flatten)]
        output: Output,
    },
    /// Solve f(x) = y by the chord iteration anchored at a
    Newton {
        #[arg(long)]
        f: String,
        #[arg(long, allow_negative_numbers = true)]
        a: f64,
        #[arg(long, allow_negative_numbers = true)]
        y: f64,
        #[arg(long, allow_negative_numbers = true)]
        x0: f64,
        /// Slope at the anchor; defaults to a central difference of f at a
        #[arg(long, allow_negative_numbers = true)]
        dfa: Option<f64>,
        #[arg(long, default_value_t = 60)]
        max_iter: usize,
        #[arg(long, default_value_t = 1e-12)]
        tol: f64,
        #[command(flatten)]
        output: Output,
    },
    /// Group law and RK4 check for the flow of x' = kx
    Flow {
        #[arg(long, allow_negative_numbers = true)]
        k: f64,
        #[arg(long, allow_negative_numbers = true)]
        x0: f64,
        #[arg(long, allow_negative_numbers = true)]
        s: f64,
        #[arg(long, allow_negative_numbers = true)]
        t: f64,
        #[command(flatten)]
        output: Output,
    },
    /// Run the built-in numerical self-check
    Suite {
        #[command(flatten)]
        output: Output,
    },
}

fn parse_p(s: &str) -> Result<f64, String> {
    match s.trim() {
        "inf" | "infinity" | "Inf" => Ok(f64::INFINITY),
        t => t.parse::<f64>().map_err(|e| e.to_string()),
    }
}

enum Failure {
    Invalid(String),
    Numerical(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::NonFinite { .. }
            | Error::NonFiniteIterate { .. }
            | Error::Eval(_) => Failure::Numerical(e.to_string()),
            _ => Failure::Invalid(e.to_string()),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Invalid(e.to_string())
    }
}

type Outcome = Result<ExitCode, Failure>;

/// Splices `key=value` lines from `--config FILE` into the arguments. Keys
/// that also appear as flags on the command line are dropped.
fn expand_config(args: Vec<String>) -> Result<Vec<String>, Failure> {
    let Some(pos) = args.iter().position(|a| a == "--config" || a.starts_with("--config=")) else {
        return Ok(args);
    };
    let path = match args[pos].strip_prefix("--config=") {
        Some(p) => p.to_string(),
        None => args.get(pos + 1).cloned().ok_or_else(|| Failure::Invalid("--config needs a file".into()))?,
    };
    let text = fs::read_to_string(&path).map_err(|e| Failure::Invalid(format!("{path}: {e}")))?;
    let explicit: Vec<&str> = args
        .iter()
        .filter_map(|a| a.strip_prefix("--"))
        .map(|a| a.split_once('=').map_or(a, |(k, _)| k))
        .collect();
    let mut injected = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Failure::Invalid(format!("{path}:{}: expected key=value", i + 1)))?;
        let key = key.trim().trim_start_matches("--");
        if explicit.contains(&key) {
            continue;
        }
        // repeatable `d` entries carry their own '='
        injected.push(format!("--{key}={}", value.trim()));
    }
    let subcommand = args.iter().skip(1).position(|a| !a.starts_with('-')).map(|p| p + 2).unwrap_or(args.len());
    let mut out: Vec<String> = args[..subcommand.min(args.len())].to_vec();
    out.extend(injected);
    out.extend(args[subcommand.min(args.len())..].iter().cloned());
    Ok(out)
}

fn domain_grid(d: &Domain) -> Result<Grid, Failure> {
    if d.bounds.is_empty() || !d.bounds.len().is_multiple_of(2) {
        return Err(Failure::Invalid(format!("--box needs lo,hi pairs, got {} numbers", d.bounds.len())));
    }
    let lo = d.bounds.iter().step_by(2).copied().collect();
    let hi = d.bounds.iter().skip(1).step_by(2).copied().collect();
    Ok(Grid::uniform(BoxDomain::new(lo, hi)?, d.res)?)
}

fn expression(src: &str, dim: usize, flag: &str) -> Result<Expr, Failure> {
    Expr::parse(src, dim).map_err(|e| Failure::Invalid(format!("--{flag}: {e}")))
}

fn sample(grid: &Grid, src: &str, flag: &str) -> Result<GridFunction, Failure> {
    let e = expression(src, grid.dim(), flag)?;
    Ok(GridFunction::try_from_fn(grid, |x| Ok(e.eval(x)?))?)
}

fn sink(out: &Output) -> Result<Box<dyn Write>, Failure> {
    Ok(match &out.out {
        Some(path) => Box::new(io::BufWriter::new(create(path)?)),
        None => Box::new(io::BufWriter::new(io::stdout().lock())),
    })
}

fn create(path: &Path) -> Result<fs::File, Failure> {
    fs::File::create(path).map_err(|e| Failure::Invalid(format!("{}: {e}", path.display())))
}

fn multi_index(s: &str, dim: usize) -> Result<MultiIndex, Failure> {
    let alpha: MultiIndex = s.parse()?;
    if alpha.dim() != dim {
        return Err(Error::MultiIndexLength { expected: dim, got: alpha.dim() }.into());
    }
    Ok(alpha)
}

fn run(cli: Cli) -> Outcome {
    match cli.command {
        Command::Mollify { f, eps, zero_extend, domain, output } => {
            let grid = domain_grid(&domain)?;
            let g = sample(&grid, &f, "f")?;
            let m = MollifierProfile::bump(grid.dim())?.scale(eps)?;
            let mut w = sink(&output)?;
            if zero_extend {
                mollify_zero_extended(&g, &m)?.write_csv(&mut w)?;
            } else {
                let (fe, region) = mollify(&g, &m)?;
                writeln!(w, "# interior nodes farther than {} from the boundary", number(eps))?;
                for k in region.nodes() {
                    let x = grid.coord(k);
                    for xi in &x[..grid.dim()] {
                        write!(w, "{},", number(*xi))?;
                    }
                    writeln!(w, "{}", number(fe.value(k)))?;
                }
            }
            w.flush()?;
        }
        Command::Converge { f, p, eps, domain, output } => {
            let grid = domain_grid(&domain)?;
            let g = sample(&grid, &f, "f")?;
            let table = convergence_study(&g, &MollifierProfile::bump(grid.dim())?, p, &eps)?;
            let mut w = sink(&output)?;
            table.write_csv(&mut w)?;
            w.flush()?;
        }
        Command::Commute { f, u, alpha, eps, p, domain, output } => {
            let grid = domain_grid(&domain)?;
            let alpha = multi_index(&alpha, grid.dim())?;
            let (fg, ug) = (sample(&grid, &f, "f")?, sample(&grid, &u, "u")?);
            let r = commutation_residual(&fg, &ug, &MollifierProfile::bump(grid.dim())?, &alpha, eps, p)?;
            let mut w = sink(&output)?;
            writeln!(w, "eps,p,residual")?;
            writeln!(w, "{},{},{}", number(eps), number(p), number(r))?;
            w.flush()?;
        }
        Command::WeakVerify { f, u, alpha, tests, tol, domain, output } => {
            let grid = domain_grid(&domain)?;
            let alpha = multi_index(&alpha, grid.dim())?;
            let (fg, ug) = (sample(&grid, &f, "f")?, sample(&grid, &u, "u")?);
            let catalog = TestFunction::catalog(grid.bbox(), tests);
            let report = verify_weak_derivative(&fg, &ug, &alpha, &catalog, tol)?;
            let mut w = sink(&output)?;
            report.write_csv(&mut w)?;
            w.flush()?;
        }
        Command::Sobolev { f, derivatives, k, p, tests, tol, domain, output } => {
            let grid = domain_grid(&domain)?;
            let fg = sample(&grid, &f, "f")?;
            let mut family = DerivativeFamily::new(fg.clone());
            for d in &derivatives {
                let (alpha, src) = d
                    .split_once('=')
                    .ok_or_else(|| Failure::Invalid(format!("--d '{d}': expected alpha=expr")))?;
                family.insert(multi_index(alpha, grid.dim())?, sample(&grid, src, "d")?)?;
            }
            let catalog = TestFunction::catalog(grid.bbox(), tests);
            let report = membership_report(&fg, &family, k, p, &catalog, tol)?;
            let mut w = sink(&output)?;
            report.write_csv(&mut w)?;
            w.flush()?;
        }
        Command::Compose { eps_a, eps_b, dim, res, output } => {
            let profile = MollifierProfile::bump(dim)?;
            let report = compose(&profile.scale(eps_a)?, &profile.scale(eps_b)?, res)?;
            let mut w = sink(&output)?;
            report.write_csv(&mut w)?;
            w.flush()?;
        }
        Command::Newton { f, a, y, x0, dfa, max_iter, tol, output } => {
            let e = expression(&f, 1, "f")?;
            let func = |x: f64| e.eval(&[x]).unwrap_or(f64::NAN);
            let slope = match dfa {
                Some(s) => s,
                None => {
                    let h = 1e-6 * a.abs().max(1.0);
                    (e.eval(&[a + h]).map_err(Error::from)? - e.eval(&[a - h]).map_err(Error::from)?) / (2.0 * h)
                }
            };
            let trace = newton_net(func, a, slope, y, x0, max_iter, tol)?;
            let mut w = sink(&output)?;
            trace.write_csv(&mut w)?;
            w.flush()?;
            if !trace.converged {
                return Err(Failure::Numerical(format!("no convergence within {max_iter} iterations")));
            }
        }
        Command::Flow { k, x0, s, t, output } => {
            let check = exponential_flow(k, x0, s, t);
            let mut w = sink(&output)?;
            check.write_csv(&mut w)?;
            w.flush()?;
        }
        Command::Suite { output } => {
            let outcomes = suite::run(suite::seed_from_env());
            let mut w = sink(&output)?;
            writeln!(w, "id,name,status,detail")?;
            for o in &outcomes {
                let status = if o.passed { "PASS" } else { "FAIL" };
                writeln!(w, "{},{},{},{}", o.id, o.name, status, sobolevkit::csv::field(&o.detail))?;
            }
            let passed = outcomes.iter().filter(|o| o.passed).count();
            writeln!(w, "# {passed} of {} checks passed", outcomes.len())?;
            w.flush()?;
            if passed != outcomes.len() {
                return Ok(ExitCode::from(1));
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let args = match expand_config(std::env::args().collect()) {
        Ok(a) => a,
        Err(Failure::Invalid(m)) | Err(Failure::Numerical(m)) => {
            eprintln!("error: {m}");
            return ExitCode::from(2);
        }
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(Failure::Invalid(m)) => {
            eprintln!("error: {}", m.lines().next().unwrap_or(""));
            ExitCode::from(2)
        }
        Err(Failure::Numerical(m)) => {
            eprintln!("error: {}", m.lines().next().unwrap_or(""));
            ExitCode::from(3)
        }
    }
}
