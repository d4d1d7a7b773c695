//! `key = value` run configuration.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::expr::UExpr;
use crate::angle::HomotopyClass;
use crate::error::{Error, Result};
use crate::functionals::Formulation;
use crate::solver::{Preconditioner, SolveOptions};
use crate::torus::{LatticeSpec, ScalarField};

/// Conformal factor source.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum USpec {
    Expr(UExpr),
    /// Whitespace- or comma-separated samples, row-major in `(s, t)`.
    File(PathBuf),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputFlags {
    pub fields: bool,
    pub heatmaps: bool,
    pub quiver: bool,
    pub quiver_stride: usize,
}

impl Default for OutputFlags {
    fn default() -> Self {
        Self { fields: true, heatmaps: true, quiver: true, quiver_stride: 4 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub lattice: LatticeSpec,
    pub u: USpec,
    pub class: HomotopyClass,
    pub solver: SolveOptions,
    pub outputs: OutputFlags,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            lattice: LatticeSpec::unit_square(64).expect("valid default lattice"),
            u: USpec::Expr(UExpr::default()),
            class: HomotopyClass::new(1, 0),
            solver: SolveOptions::default(),
            outputs: OutputFlags::default(),
        }
    }
}

impl RunConfig {
    pub fn emit(&self) -> String {
        let mut s = String::new();
        let l = &self.lattice;
        let _ = writeln!(s, "d1 = {:?}, {:?}", l.d1[0], l.d1[1]);
        let _ = writeln!(s, "d2 = {:?}, {:?}", l.d2[0], l.d2[1]);
        let _ = writeln!(s, "n1 = {}", l.n1);
        let _ = writeln!(s, "n2 = {}", l.n2);
        match &self.u {
            USpec::Expr(e) => {
                let _ = writeln!(s, "u = {e}");
            }
            USpec::File(p) => {
                let _ = writeln!(s, "u_file = {}", p.display());
            }
        }
        let _ = writeln!(s, "class = {} {}", self.class.m, self.class.n);
        let _ = writeln!(s, "tolerance = {:?}", self.solver.tolerance);
        match self.solver.max_iterations {
            Some(n) => {
                let _ = writeln!(s, "max_iterations = {n}");
            }
            None => {
                let _ = writeln!(s, "max_iterations = auto");
            }
        }
        let _ = writeln!(s, "preconditioner = {}", self.solver.preconditioner);
        let _ = writeln!(s, "formulation = {}", self.solver.formulation);
        let o = &self.outputs;
        let _ = writeln!(s, "write_fields = {}", o.fields);
        let _ = writeln!(s, "write_heatmaps = {}", o.heatmaps);
        let _ = writeln!(s, "write_quiver = {}", o.quiver);
        let _ = writeln!(s, "quiver_stride = {}", o.quiver_stride);
        s
    }

    /// Parses the text form. Missing keys keep their defaults; `#` starts a
    /// comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        let (mut d1, mut d2, mut n1, mut n2) = (cfg.lattice.d1, cfg.lattice.d2, cfg.lattice.n1, cfg.lattice.n2);
        let mut u_expr: Option<UExpr> = None;
        let mut u_file: Option<PathBuf> = None;
        for (no, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let at = |msg: String| Error::Parse(format!("config line {}: {msg}", no + 1));
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| at(format!("expected 'key = value', got '{line}'")))?;
            let (key, value) = (key.trim(), value.trim());
            match key {
                "d1" => d1 = parse_pair(value).map_err(at)?,
                "d2" => d2 = parse_pair(value).map_err(at)?,
                "n1" => n1 = parse_num(value).map_err(at)?,
                "n2" => n2 = parse_num(value).map_err(at)?,
                "grid" => {
                    n1 = parse_num(value).map_err(at)?;
                    n2 = n1;
                }
                "u" => u_expr = Some(value.parse().map_err(|e: Error| at(e.to_string()))?),
                "u_file" => u_file = Some(PathBuf::from(value)),
                "class" => {
                    let parts: Vec<&str> = value.split([' ', ',']).filter(|p| !p.is_empty()).collect();
                    if parts.len() != 2 {
                        return Err(at(format!("class needs two integers, got '{value}'")));
                    }
                    cfg.class = HomotopyClass::new(parse_num(parts[0]).map_err(at)?, parse_num(parts[1]).map_err(at)?);
                }
                "tolerance" => cfg.solver.tolerance = parse_num(value).map_err(at)?,
                "max_iterations" => {
                    cfg.solver.max_iterations =
                        if value == "auto" { None } else { Some(parse_num(value).map_err(at)?) }
                }
                "preconditioner" => {
                    cfg.solver.preconditioner = value.parse::<Preconditioner>().map_err(|e| at(e.to_string()))?
                }
                "formulation" => {
                    cfg.solver.formulation = value.parse::<Formulation>().map_err(|e| at(e.to_string()))?
                }
                "write_fields" => cfg.outputs.fields = parse_bool(value).map_err(at)?,
                "write_heatmaps" => cfg.outputs.heatmaps = parse_bool(value).map_err(at)?,
                "write_quiver" => cfg.outputs.quiver = parse_bool(value).map_err(at)?,
                "quiver_stride" => cfg.outputs.quiver_stride = parse_num(value).map_err(at)?,
                other => return Err(at(format!("unknown key '{other}'"))),
            }
        }
        cfg.u = match (u_expr, u_file) {
            (Some(_), Some(_)) => return Err(Error::Parse("config sets both u and u_file; keep one".into())),
            (Some(e), None) => USpec::Expr(e),
            (None, Some(p)) => USpec::File(p),
            (None, None) => cfg.u,
        };
        cfg.lattice = LatticeSpec::new(d1, d2, n1, n2)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn validate(&self) -> Result<()> {
        self.solver.validate()?;
        if self.outputs.quiver_stride == 0 {
            return Err(Error::InvalidArgument("quiver_stride must be at least 1".into()));
        }
        Ok(())
    }

    /// Samples of `u` on the configured lattice.
    pub fn u_field(&self) -> Result<ScalarField> {
        match &self.u {
            USpec::Expr(e) => Ok(e.sample(self.lattice)),
            USpec::File(p) => read_u_samples(p, self.lattice),
        }
    }
}

fn parse_num<T: std::str::FromStr>(s: &str) -> std::result::Result<T, String> {
    s.trim().parse().map_err(|_| format!("cannot parse '{s}' as a number"))
}

fn parse_pair(s: &str) -> std::result::Result<[f64; 2], String> {
    let parts: Vec<&str> = s.split([',', ' ']).filter(|p| !p.is_empty()).collect();
    if parts.len() != 2 {
        return Err(format!("expected two numbers 'a, b', got '{s}'"));
    }
    Ok([parse_num(parts[0])?, parse_num(parts[1])?])
}

fn parse_bool(s: &str) -> std::result::Result<bool, String> {
    match s {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(format!("expected true or false, got '{s}'")),
    }
}

/// Reads `n1·n2` samples of `u`, row-major in `(s, t)`, separated by
/// whitespace or commas; `#` starts a comment.
pub fn read_u_samples(path: &Path, lattice: LatticeSpec) -> Result<ScalarField> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Io(format!("cannot read u samples {}: {e}", path.display())))?;
    let mut values = Vec::with_capacity(lattice.len());
    for (no, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("");
        for tok in line.split(|c: char| c.is_whitespace() || c == ',').filter(|t| !t.is_empty()) {
            values.push(tok.parse::<f64>().map_err(|_| {
                Error::Parse(format!("{} line {}: '{tok}' is not a number", path.display(), no + 1))
            })?);
        }
    }
    if values.len() != lattice.len() {
        return Err(Error::InvalidField(format!(
            "{} holds {} samples but the grid is {}x{} = {}",
            path.display(),
            values.len(),
            lattice.n1,
            lattice.n2,
            lattice.len()
        )));
    }
    ScalarField::new(lattice, values)
}
