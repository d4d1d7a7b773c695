//! JSON run reports. Wall-clock time goes to a separate timing file so that
//! reports are byte-identical across repeated runs.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use crate::angle::HomotopyClass;
use crate::error::{Error, Result};
use crate::functionals::EnergyBreakdown;
use crate::solver::SolveReport;

/// Top-level keys of `report.json`, in emission order.
pub const REPORT_KEYS: &[&str] = &[
    "class",
    "iterations",
    "final_relative_residual",
    "el_residual_maxnorm",
    "converged",
    "energy",
    "residual_history",
    "output_class",
    "resolution_fraction",
    "config",
    "config_text",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub class: HomotopyClass,
    pub iterations: usize,
    pub final_relative_residual: f64,
    pub el_residual_maxnorm: f64,
    pub converged: bool,
    pub energy: EnergyBreakdown,
    pub residual_history: Vec<f64>,
    /// Winding class measured on the returned field.
    pub output_class: HomotopyClass,
    /// High-mode energy fraction of `u`; large values mean under-resolution.
    pub resolution_fraction: f64,
    pub config: RunConfig,
    /// The configuration in `key = value` form.
    pub config_text: String,
}

impl RunReport {
    pub fn new(report: &SolveReport, output_class: HomotopyClass, resolution_fraction: f64, config: &RunConfig) -> Self {
        Self {
            class: report.class,
            iterations: report.iterations,
            final_relative_residual: report.final_relative_residual,
            el_residual_maxnorm: report.el_residual_maxnorm,
            converged: report.converged,
            energy: report.energy,
            residual_history: report.residual_history.clone(),
            output_class,
            resolution_fraction,
            config: config.clone(),
            config_text: config.emit(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub wall_time: f64,
}

pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| Error::Io(format!("cannot serialize report: {e}")))?;
    s.push('\n');
    Ok(s)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    std::fs::write(path, to_json(value)?).map_err(|e| Error::Io(format!("cannot write {}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conformal::ConformalStructure;
    use crate::solver::{solve_homotopy_class, SolveOptions};
    use crate::torus::LatticeSpec;

    #[test]
    fn report_has_documented_keys() {
        let cfg = RunConfig { lattice: LatticeSpec::unit_square(16).unwrap(), ..RunConfig::default() };
        let cs = ConformalStructure::flat(cfg.lattice);
        let (_, rep) = solve_homotopy_class(&cs, cfg.class, &SolveOptions::default()).unwrap();
        let json = to_json(&RunReport::new(&rep, cfg.class, 0.0, &cfg)).unwrap();
        let v: serde_json::Value = serde_json::from_str(&json).unwrap();
        let keys: Vec<&str> = v.as_object().unwrap().keys().map(String::as_str).collect();
        let mut want = REPORT_KEYS.to_vec();
        want.sort_unstable();
        let mut got = keys.clone();
        got.sort_unstable();
        assert_eq!(got, want);
        let back: RunReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back.config, cfg);
    }
}
