//! Front end for `goursat-core`: configuration, problem files and table output.

pub mod config;
pub mod output;
pub mod problem;

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufWriter, Write};

use clap::Parser;

use goursat_core::harness::{error_vs_exact, DEFAULT_SUB_SAMPLES};
use goursat_core::selftest::{run_all_with, DEFAULT_SEED};
use goursat_core::{convergence_study, fd_solve, GoursatProblem, StudySpec};

use config::{Cli, ConfigError, Mode, ProblemRef, RunConfig};
use output::{Sample, StudyRecord};

pub const EXIT_OK: i32 = 0;
pub const EXIT_NUMERICAL: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;

/// A run failure with its exit code and a one-line reason.
#[derive(Debug)]
pub enum Failure {
    Config(String),
    Numerical(String),
    Io(String),
}

impl Failure {
    pub fn code(&self) -> i32 {
        match self {
            Failure::Numerical(_) => EXIT_NUMERICAL,
            Failure::Config(_) | Failure::Io(_) => EXIT_CONFIG,
        }
    }

    /// `error: <kind>: <message>` on a single line.
    pub fn line(&self) -> String {
        let (kind, msg) = match self {
            Failure::Config(m) => ("config", m),
            Failure::Numerical(m) => ("numerical", m),
            Failure::Io(m) => ("io", m),
        };
        format!("error: {kind}: {}", msg.replace('\n', " "))
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e.0)
    }
}

impl From<goursat_core::Error> for Failure {
    fn from(e: goursat_core::Error) -> Self {
        Failure::Numerical(e.to_string())
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Io(e.to_string())
    }
}

/// Parses `args` (program name first), runs, and returns the exit code.
pub fn run_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            let _ = e.print();
            return EXIT_OK;
        }
        Err(e) => {
            let msg = e.to_string();
            let first = msg
                .lines()
                .next()
                .unwrap_or("invalid arguments")
                .trim_start_matches("error: ");
            eprintln!("{}", Failure::Config(first.to_string()).line());
            return EXIT_CONFIG;
        }
    };
    let env = std::env::var("FD_THREADS").ok();
    let result = RunConfig::resolve(cli, env.as_deref())
        .map_err(Failure::from)
        .and_then(|cfg| run(&cfg));
    match result {
        Ok(()) => EXIT_OK,
        Err(f) => {
            eprintln!("{}", f.line());
            f.code()
        }
    }
}

pub fn load(problem: &ProblemRef) -> Result<GoursatProblem, Failure> {
    match problem {
        ProblemRef::Preset(name) => {
            GoursatProblem::preset(name).ok_or_else(|| Failure::Config(format!("unknown preset `{name}`")))
        }
        ProblemRef::File(path) => Ok(problem::load_problem(path)?),
    }
}

/// Executes a validated configuration.
pub fn run(cfg: &RunConfig) -> Result<(), Failure> {
    if let Some(t) = cfg.threads {
        // a second call in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
    }
    match cfg.mode {
        Mode::Solve => solve(cfg),
        Mode::Study => study(cfg),
        Mode::Selftest => selftest(cfg),
    }
}

fn sink(cfg: &RunConfig) -> Result<Box<dyn Write>, Failure> {
    Ok(match &cfg.output {
        Some(path) => {
            Box::new(BufWriter::new(File::create(path).map_err(|e| {
                Failure::Io(format!("cannot create {}: {e}", path.display()))
            })?))
        }
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn lattice(n: usize, step: f64, end: f64) -> Vec<f64> {
    (0..=n).map(|k| if k == n { end } else { k as f64 * step }).collect()
}

fn solve(cfg: &RunConfig) -> Result<(), Failure> {
    let problem = load(cfg.problem.as_ref().expect("validated"))?;
    let fd = fd_solve(&problem, cfg.n1, cfg.n2, cfg.rank, cfg.p)?;
    let field = fd.partial_sum(cfg.rank);
    let grid = *fd.grid();
    let s = DEFAULT_SUB_SAMPLES;
    let xs = lattice(cfg.n1 * s, grid.h1() / s as f64, problem.x_max);
    let ys = lattice(cfg.n2 * s, grid.h2() / s as f64, problem.y_max);
    let mut samples = Vec::with_capacity(xs.len() * ys.len());
    for &x in &xs {
        for &y in &ys {
            let u = field.eval(x, y)?;
            let exact = problem.exact.as_ref().map(|g| g(x, y));
            samples.push(Sample {
                x,
                y,
                u,
                exact,
                error: exact.map(|e| (u - e).abs()),
            });
        }
    }
    let mut w = sink(cfg)?;
    output::write_samples(&mut w, &samples, cfg.format)?;
    w.flush()?;
    if let Some(exact) = &problem.exact {
        let delta = error_vs_exact(&fd, |x, y| exact(x, y), cfg.rank);
        eprintln!("delta(m={}) = {}", cfg.rank, output::sci(delta));
        if !delta.is_finite() {
            return Err(Failure::Numerical(format!("non-finite error {delta}")));
        }
    }
    Ok(())
}

fn study(cfg: &RunConfig) -> Result<(), Failure> {
    let problem = load(cfg.problem.as_ref().expect("validated"))?;
    let meshes = cfg.n_list.iter().map(|&n| (n, n)).collect();
    let spec = StudySpec::new(problem, meshes, cfg.rank, cfg.p).map_err(|e| Failure::Config(e.to_string()))?;
    if spec.problem.exact.is_none() {
        return Err(Failure::Config(format!(
            "study needs a problem with `exact`; {} has none",
            spec.problem.name
        )));
    }
    let report = convergence_study(&spec)?;
    let rows: Vec<_> = report
        .rows
        .iter()
        .map(|r| StudyRecord::from_row(r, cfg.timing))
        .collect();
    let mut w = sink(cfg)?;
    output::write_study(&mut w, &rows, cfg.format)?;
    w.flush()?;
    match report.failures.first() {
        None => Ok(()),
        Some(f) => Err(Failure::Numerical(format!(
            "{} of {} meshes failed; first {}x{}: {}",
            report.failures.len(),
            cfg.n_list.len(),
            f.n1,
            f.n2,
            f.error
        ))),
    }
}

fn selftest(cfg: &RunConfig) -> Result<(), Failure> {
    let reports = run_all_with(DEFAULT_SEED, cfg.tol);
    let mut w = sink(cfg)?;
    writeln!(w, "suite,passed,failed")?;
    for r in &reports {
        writeln!(w, "{},{},{}", r.name, r.passed, r.failed)?;
    }
    w.flush()?;
    let failed: Vec<_> = reports.iter().filter(|r| !r.ok()).collect();
    for r in &failed {
        for msg in r.failures.iter().take(5) {
            eprintln!("{}: {msg}", r.name);
        }
    }
    match failed.first() {
        None => Ok(()),
        Some(r) => Err(Failure::Numerical(format!(
            "{} suite(s) failed; first {} with {} failure(s)",
            failed.len(),
            r.name,
            r.failed
        ))),
    }
}
