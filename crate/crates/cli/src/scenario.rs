//! Flat `key = value` scenario files.
//!
//! ```text
//! # Heisenberg group, CMC one
//! g11 = "1"
//! f = "1"
//! nx = 33
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use subriem_core::expr::ScalarField;
use subriem_core::geometry::ContactMetric;
use subriem_core::graph::{GraphDomain, SignConvention};
use subriem_core::solver::SolverConfig;
use subriem_core::variation::Orientation;

use crate::CliError;

const KEYS: &[&str] = &[
    "name",
    "g11",
    "g12",
    "g22",
    "f",
    "u",
    "graph_csv",
    "x0",
    "x1",
    "t0",
    "t1",
    "nx",
    "nt",
    "sign",
    "start_x",
    "start_t",
    "halfwidth",
    "step",
    "tol",
    "max_iter",
    "damping",
    "fd_eps",
    "vol_tol",
    "target_volume",
    "levels",
    "curve_x",
    "curve_t",
    "step_ratio",
    "frozen_u",
    "cases",
    "s_step",
    "points",
    "surface_x",
    "surface_y",
    "surface_t",
    "surface_csv",
    "s1_range",
    "s2_range",
    "n1",
    "n2",
    "orientation",
    "fields",
    "field_u1",
    "field_u2",
    "field_u3",
    "support_x",
    "support_y",
    "support_t",
    "seed",
];

/// Keys holding expressions; all are parsed when the scenario is loaded.
const EXPRESSION_KEYS: &[&str] = &[
    "g11",
    "g12",
    "g22",
    "f",
    "u",
    "frozen_u",
    "surface_x",
    "surface_y",
    "surface_t",
    "field_u1",
    "field_u2",
    "field_u3",
];

#[derive(Debug, Clone)]
pub struct Scenario {
    values: BTreeMap<String, String>,
    base: PathBuf,
}

fn unquote(raw: &str, line: usize) -> Result<String, CliError> {
    let raw = raw.trim();
    if let Some(rest) = raw.strip_prefix('"') {
        let end = rest
            .find('"')
            .ok_or_else(|| CliError::Config(format!("line {line}: unterminated string")))?;
        let tail = rest[end + 1..].trim();
        if !(tail.is_empty() || tail.starts_with('#')) {
            return Err(CliError::Config(format!("line {line}: trailing text after string")));
        }
        Ok(rest[..end].to_string())
    } else {
        let v = raw.split('#').next().unwrap_or("").trim();
        if v.is_empty() {
            return Err(CliError::Config(format!("line {line}: missing value")));
        }
        Ok(v.to_string())
    }
}

impl Scenario {
    pub fn parse(text: &str, base: &Path) -> Result<Self, CliError> {
        let mut values = BTreeMap::new();
        for (n, line) in text.lines().enumerate() {
            let n = n + 1;
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let (key, value) = trimmed
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("line {n}: expected key = value")))?;
            let key = key.trim();
            if !KEYS.contains(&key) {
                return Err(CliError::Config(format!("line {n}: unknown key '{key}'")));
            }
            if values.insert(key.to_string(), unquote(value, n)?).is_some() {
                return Err(CliError::Config(format!("line {n}: duplicate key '{key}'")));
            }
        }
        let sc = Scenario {
            values,
            base: base.to_path_buf(),
        };
        for key in EXPRESSION_KEYS {
            if sc.get(key).is_some() {
                sc.field(key, "0")?;
            }
        }
        Ok(sc)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Scenario::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }

    pub fn set(&mut self, key: &str, value: impl Into<String>) {
        self.values.insert(key.to_string(), value.into());
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    pub fn str_or<'a>(&'a self, key: &str, default: &'a str) -> &'a str {
        self.get(key).unwrap_or(default)
    }

    pub fn number<T: std::str::FromStr>(&self, key: &str, default: T) -> Result<T, CliError> {
        match self.get(key) {
            None => Ok(default),
            Some(v) => v
                .parse()
                .map_err(|_| CliError::Config(format!("'{key}': cannot read '{v}' as a number"))),
        }
    }

    pub fn list(&self, key: &str, default: &[f64]) -> Result<Vec<f64>, CliError> {
        match self.get(key) {
            None => Ok(default.to_vec()),
            Some(v) => v
                .split(',')
                .map(|s| {
                    s.trim()
                        .parse()
                        .map_err(|_| CliError::Config(format!("'{key}': bad list entry '{s}'")))
                })
                .collect(),
        }
    }

    pub fn pair(&self, key: &str, default: (f64, f64)) -> Result<(f64, f64), CliError> {
        match self.get(key) {
            None => Ok(default),
            Some(_) => match self.list(key, &[])?.as_slice() {
                [a, b] if b > a => Ok((*a, *b)),
                _ => Err(CliError::Config(format!("'{key}' needs two increasing numbers"))),
            },
        }
    }

    pub fn field(&self, key: &str, default: &str) -> Result<ScalarField, CliError> {
        let text = self.str_or(key, default);
        ScalarField::parse(text).map_err(|e| CliError::Config(format!("'{key}': {e}")))
    }

    pub fn path(&self, key: &str) -> Option<PathBuf> {
        self.get(key).map(|p| self.base.join(p))
    }

    pub fn metric(&self) -> Result<ContactMetric, CliError> {
        Ok(ContactMetric::new(
            self.field("g11", "1")?,
            self.field("g12", "0")?,
            self.field("g22", "1")?,
        ))
    }

    pub fn sign(&self) -> Result<SignConvention, CliError> {
        let s = self.str_or("sign", "minus");
        SignConvention::parse(s).ok_or_else(|| CliError::Config(format!("'sign': expected minus or plus, got '{s}'")))
    }

    pub fn orientation(&self) -> Result<Orientation, CliError> {
        match self.str_or("orientation", "inner") {
            "inner" => Ok(Orientation::Inner),
            "outer" => Ok(Orientation::Outer),
            s => Err(CliError::Config(format!(
                "'orientation': expected inner or outer, got '{s}'"
            ))),
        }
    }

    pub fn domain(&self) -> Result<GraphDomain, CliError> {
        let nx: usize = self.number("nx", 33)?;
        let nt: usize = self.number("nt", nx)?;
        GraphDomain::new(
            self.number("x0", 0.0)?,
            self.number("x1", 1.0)?,
            self.number("t0", 0.0)?,
            self.number("t1", 1.0)?,
            nx,
            nt,
        )
        .map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn solver_config(&self) -> Result<SolverConfig, CliError> {
        let d = SolverConfig::default();
        Ok(SolverConfig {
            tol: self.number("tol", d.tol)?,
            max_iter: self.number("max_iter", d.max_iter)?,
            damping: self.number("damping", d.damping)?,
            fd_eps: self.number("fd_eps", d.fd_eps)?,
            vol_tol: self.number("vol_tol", d.vol_tol)?,
        })
    }
}

/// `NXxNT`.
pub fn parse_grid(s: &str) -> Result<(usize, usize), String> {
    let (a, b) = s.split_once(['x', 'X']).ok_or("expected NXxNT")?;
    let nx = a.trim().parse().map_err(|_| format!("bad size '{a}'"))?;
    let nt = b.trim().parse().map_err(|_| format!("bad size '{b}'"))?;
    if nx < 3 || nt < 3 {
        return Err("grid sizes must be at least 3".into());
    }
    Ok((nx, nt))
}
