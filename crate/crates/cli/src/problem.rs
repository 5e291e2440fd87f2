//! Problem files: `key = value` lines defining the domain, the data and the
//! multiplier `N`.
//!
//! ```text
//! x_max = 1
//! y_max = 1
//! psi = sin(x)
//! phi = y^2
//! f = exp(x*y)
//! nu = 1.0, 0.5        # N(u) = 1 + 0.5 u
//! exact = ...          # optional, in x and y
//! ```
//!
//! Expressions use `+ - * / ^`, parentheses, numbers and the functions
//! `exp`, `ln`, `sin`, `cos`. `nu = liouville` selects `N(u) = (1 - e^{2u})/u`.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use meval::{ContextProvider, Expr, FuncEvalError};

use goursat_core::problem::{Fn1, Fn2};
use goursat_core::{GoursatProblem, Nonlinearity};

use crate::config::ConfigError;

const KEYS: &[&str] = &["x_max", "y_max", "psi", "phi", "f", "nu", "exact"];

/// Elementary functions only; no constants beyond numeric literals.
#[derive(Debug, Clone, Copy)]
struct Elementary;

impl ContextProvider for Elementary {
    fn eval_func(&self, name: &str, args: &[f64]) -> Result<f64, FuncEvalError> {
        let f: fn(f64) -> f64 = match name {
            "exp" => f64::exp,
            "ln" => f64::ln,
            "sin" => f64::sin,
            "cos" => f64::cos,
            _ => return Err(FuncEvalError::UnknownFunction),
        };
        match args {
            [a] => Ok(f(*a)),
            [] => Err(FuncEvalError::TooFewArguments),
            _ => Err(FuncEvalError::TooManyArguments),
        }
    }
}

fn compile(key: &str, src: &str, vars: &[&str]) -> Result<Arc<Expr>, ConfigError> {
    let expr: Expr = src
        .parse()
        .map_err(|e| ConfigError(format!("problem key `{key}`: cannot parse `{src}`: {e}")))?;
    // binding validates every variable and function name
    let probe = [(vars[0], 0.0), (*vars.get(1).unwrap_or(&vars[0]), 0.0)];
    let _ = expr
        .clone()
        .bind_with_context((probe, Elementary), "__unused")
        .map_err(|e| {
            ConfigError(format!(
                "problem key `{key}` in `{src}`: {e} (allowed: {}, exp, ln, sin, cos)",
                vars.join(", ")
            ))
        })?;
    Ok(Arc::new(expr))
}

fn expr1(key: &str, src: &str, var: &'static str) -> Result<Fn1, ConfigError> {
    let e = compile(key, src, &[var])?;
    Ok(Arc::new(move |t| {
        e.eval_with_context(([(var, t)], Elementary)).unwrap_or(f64::NAN)
    }))
}

fn expr2(key: &str, src: &str) -> Result<Fn2, ConfigError> {
    let e = compile(key, src, &["x", "y"])?;
    Ok(Arc::new(move |x, y| {
        e.eval_with_context(([("x", x), ("y", y)], Elementary))
            .unwrap_or(f64::NAN)
    }))
}

fn number(key: &str, src: &str) -> Result<f64, ConfigError> {
    src.parse()
        .map_err(|_| ConfigError(format!("problem key `{key}` expects a number, got `{src}`")))
}

fn nonlinearity(src: &str) -> Result<Nonlinearity, ConfigError> {
    if src.eq_ignore_ascii_case("liouville") {
        return Ok(Nonlinearity::Liouville);
    }
    let nu = src
        .split(',')
        .map(|t| t.trim().parse::<f64>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|_| {
            ConfigError(format!(
                "problem key `nu` expects comma-separated numbers or `liouville`, got `{src}`"
            ))
        })?;
    if nu.iter().any(|v| !v.is_finite()) {
        return Err(ConfigError(format!(
            "problem key `nu` has a non-finite coefficient: `{src}`"
        )));
    }
    Ok(Nonlinearity::Polynomial(nu))
}

/// Parses problem-file text. `name` labels the problem in reports.
pub fn parse_problem(name: &str, text: &str) -> Result<GoursatProblem, ConfigError> {
    let mut kv = BTreeMap::new();
    for (no, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(ConfigError(format!(
                "problem line {}: expected `key = value`, got `{line}`",
                no + 1
            )));
        };
        let k = k.trim();
        if !KEYS.contains(&k) {
            return Err(ConfigError(format!("unknown problem key `{k}` (line {})", no + 1)));
        }
        if kv.insert(k.to_string(), v.trim().to_string()).is_some() {
            return Err(ConfigError(format!("problem key `{k}` given twice")));
        }
    }
    let get = |k: &str| {
        kv.get(k)
            .ok_or_else(|| ConfigError(format!("problem file is missing `{k}`")))
    };
    let x_max = number("x_max", get("x_max")?)?;
    let y_max = number("y_max", get("y_max")?)?;
    let psi = expr1("psi", get("psi")?, "x")?;
    let phi = expr1("phi", get("phi")?, "y")?;
    let f = expr2("f", get("f")?)?;
    let nl = nonlinearity(get("nu")?)?;
    let mut problem =
        GoursatProblem::new(name, x_max, y_max, psi, phi, f, nl).map_err(|e| ConfigError(format!("problem: {e}")))?;
    if let Some(src) = kv.get("exact") {
        problem = problem.with_exact(expr2("exact", src)?);
    }
    Ok(problem)
}

pub fn load_problem(path: &Path) -> Result<GoursatProblem, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError(format!("cannot read problem file {}: {e}", path.display())))?;
    let name = path.file_stem().and_then(|s| s.to_str()).unwrap_or("problem");
    parse_problem(name, &text)
}
