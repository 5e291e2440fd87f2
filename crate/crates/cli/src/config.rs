use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};

use goursat_core::harness::MAX_STUDY_RANK;
use goursat_core::solver::{DEFAULT_P, MAX_P, MIN_P, PICARD_TOL};

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

fn err<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError(msg.into()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Solve,
    Study,
    Selftest,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ProblemRef {
    Preset(String),
    File(PathBuf),
}

/// Validated run configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub mode: Mode,
    pub problem: Option<ProblemRef>,
    pub n1: usize,
    pub n2: usize,
    pub n_list: Vec<usize>,
    pub rank: usize,
    pub p: usize,
    pub tol: f64,
    pub output: Option<PathBuf>,
    pub format: Format,
    pub threads: Option<usize>,
    pub timing: bool,
}

#[derive(Debug, Parser)]
#[command(
    name = "goursat",
    version,
    about = "FD-method solver for Goursat problems u_xy + N(u) u = f"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Option<Command>,

    #[command(flatten)]
    pub opts: Flags,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve one mesh and write sampled values of the partial sum.
    Solve,
    /// Sweep meshes and ranks and write the error table.
    Study,
    /// Run the built-in property suites.
    Selftest,
}

#[derive(Debug, Default, Args)]
pub struct Flags {
    /// `key = value` configuration file; flags take precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Preset name (pr1) or path to a problem file.
    #[arg(long, global = true)]
    pub problem: Option<String>,
    #[arg(long, global = true)]
    pub n1: Option<usize>,
    #[arg(long, global = true)]
    pub n2: Option<usize>,
    /// Comma-separated cell counts for study mode (N1 = N2 = n).
    #[arg(long = "n-list", global = true)]
    pub n_list: Option<String>,
    #[arg(long, global = true)]
    pub rank: Option<usize>,
    /// Chebyshev nodes per cell direction.
    #[arg(long = "cheb-order", global = true)]
    pub cheb_order: Option<usize>,
    /// Fixed-point tolerance of the cell cross-check in selftest.
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum, global = true)]
    pub format: Option<Format>,
    /// Worker threads; falls back to FD_THREADS.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Record wall times in the output (otherwise written as 0).
    #[arg(long, global = true)]
    pub timing: bool,
}

const KEYS: &[&str] = &[
    "mode",
    "problem",
    "n1",
    "n2",
    "n_list",
    "rank",
    "cheb_order",
    "tol",
    "output",
    "format",
    "threads",
    "timing",
];

/// Parses `key = value` lines; `#` starts a comment. Dashes in keys are
/// read as underscores.
pub fn parse_config_text(text: &str) -> Result<BTreeMap<String, String>, ConfigError> {
    let mut out = BTreeMap::new();
    for (no, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return err(format!("config line {}: expected `key = value`, got `{line}`", no + 1));
        };
        let key = k.trim().replace('-', "_");
        if !KEYS.contains(&key.as_str()) {
            return err(format!("unknown config key `{}` (line {})", k.trim(), no + 1));
        }
        if out.insert(key.clone(), v.trim().to_string()).is_some() {
            return err(format!("config key `{key}` given twice"));
        }
    }
    Ok(out)
}

fn typed<T: FromStr>(file: &BTreeMap<String, String>, key: &str, what: &str) -> Result<Option<T>, ConfigError> {
    match file.get(key) {
        None => Ok(None),
        Some(v) => v
            .parse()
            .map(Some)
            .map_err(|_| ConfigError(format!("config key `{key}` expects {what}, got `{v}`"))),
    }
}

pub fn parse_list(key: &str, s: &str) -> Result<Vec<usize>, ConfigError> {
    s.split(',')
        .map(|t| {
            t.trim().parse().map_err(|_| {
                ConfigError(format!(
                    "`{key}` expects comma-separated non-negative integers, got `{s}`"
                ))
            })
        })
        .collect()
}

fn parse_mode(s: &str) -> Result<Mode, ConfigError> {
    Mode::from_str(s, true).map_err(|_| ConfigError(format!("`mode` expects solve, study or selftest, got `{s}`")))
}

fn parse_format(s: &str) -> Result<Format, ConfigError> {
    Format::from_str(s, true).map_err(|_| ConfigError(format!("`format` expects csv or json, got `{s}`")))
}

fn problem_ref(s: &str) -> ProblemRef {
    if goursat_core::GoursatProblem::preset(s).is_some() {
        ProblemRef::Preset(s.to_string())
    } else {
        ProblemRef::File(PathBuf::from(s))
    }
}

impl RunConfig {
    /// Merges flags over the optional config file and validates the result.
    /// `env_threads` is the value of `FD_THREADS`, if set.
    pub fn resolve(cli: Cli, env_threads: Option<&str>) -> Result<Self, ConfigError> {
        let file = match &cli.opts.config {
            Some(path) => read_config(path)?,
            None => BTreeMap::new(),
        };
        let f = &cli.opts;
        let mode = match (&cli.command, file.get("mode")) {
            (Some(Command::Solve), _) => Mode::Solve,
            (Some(Command::Study), _) => Mode::Study,
            (Some(Command::Selftest), _) => Mode::Selftest,
            (None, Some(m)) => parse_mode(m)?,
            (None, None) => return err("missing `mode`: use a subcommand (solve, study, selftest)"),
        };
        let problem = f
            .problem
            .clone()
            .or_else(|| file.get("problem").cloned())
            .map(|s| problem_ref(&s));
        let n1 = f.n1.or(typed(&file, "n1", "a non-negative integer")?);
        let n2 = f.n2.or(typed(&file, "n2", "a non-negative integer")?);
        let n_list = match f.n_list.as_deref().or(file.get("n_list").map(String::as_str)) {
            Some(s) => Some(parse_list("n_list", s)?),
            None => None,
        };
        let rank = f.rank.or(typed(&file, "rank", "a non-negative integer")?).unwrap_or(0);
        let p = f
            .cheb_order
            .or(typed(&file, "cheb_order", "an integer")?)
            .unwrap_or(DEFAULT_P);
        let tol = f.tol.or(typed(&file, "tol", "a number")?).unwrap_or(PICARD_TOL);
        let output = f.output.clone().or_else(|| file.get("output").map(PathBuf::from));
        let format = match (f.format, file.get("format")) {
            (Some(x), _) => x,
            (None, Some(s)) => parse_format(s)?,
            (None, None) => Format::default(),
        };
        let threads = match f.threads.or(typed(&file, "threads", "a positive integer")?) {
            Some(t) => Some(t),
            None => match env_threads {
                Some(s) => Some(
                    s.trim()
                        .parse()
                        .map_err(|_| ConfigError(format!("FD_THREADS expects a positive integer, got `{s}`")))?,
                ),
                None => None,
            },
        };
        let timing = f.timing || typed::<bool>(&file, "timing", "true or false")?.unwrap_or(false);

        if mode != Mode::Selftest && problem.is_none() {
            return err("missing required `problem`");
        }
        if threads == Some(0) {
            return err("`threads` must be positive");
        }
        if !(MIN_P..=MAX_P).contains(&p) {
            return err(format!("`cheb_order` must lie in {MIN_P}..={MAX_P}, got {p}"));
        }
        if rank > MAX_STUDY_RANK {
            return err(format!("`rank` must not exceed {MAX_STUDY_RANK}, got {rank}"));
        }
        if !(tol > 0.0 && tol.is_finite()) {
            return err(format!("`tol` must be a positive number, got {tol}"));
        }
        let (n1, n2, n_list) = match mode {
            Mode::Solve => {
                let (Some(a), Some(b)) = (n1, n2) else {
                    return err(format!("solve needs `{}`", if n1.is_none() { "n1" } else { "n2" }));
                };
                (a, b, Vec::new())
            }
            Mode::Study => match (n_list, n1, n2) {
                (Some(list), _, _) => (0, 0, list),
                (None, Some(a), Some(b)) if a == b => (a, b, vec![a]),
                (None, Some(_), Some(_)) => return err("study meshes are square; use `n_list` or equal `n1`, `n2`"),
                (None, _, _) => return err("study needs `n_list` (or `n1` and `n2`)"),
            },
            Mode::Selftest => (0, 0, Vec::new()),
        };
        if mode == Mode::Solve && (n1 == 0 || n2 == 0) {
            return err(format!("`n1` and `n2` must be positive, got {n1} and {n2}"));
        }
        if mode == Mode::Study && (n_list.is_empty() || n_list.contains(&0)) {
            return err("`n_list` entries must be positive");
        }
        Ok(Self {
            mode,
            problem,
            n1,
            n2,
            n_list,
            rank,
            p,
            tol,
            output,
            format,
            threads,
            timing,
        })
    }
}

fn read_config(path: &Path) -> Result<BTreeMap<String, String>, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError(format!("cannot read config {}: {e}", path.display())))?;
    parse_config_text(&text)
}
