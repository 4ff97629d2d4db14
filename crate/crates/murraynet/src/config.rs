//! TOML run configuration.

use std::path::{Path, PathBuf};

use murraynet_core::continuum_grid::{box_mask, ContinuumProblem, RectGrid};
use murraynet_core::discrete_optim::{
    MetabolicParams, OptimizerConfig, DEFAULT_C_MIN, DEFAULT_GRAD_TOL,
};
use murraynet_core::kirchhoff::DEFAULT_LIN_TOL;
use murraynet_core::profile::Profile;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};
use crate::formats::{read_cell_csv, read_text};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub discrete: DiscreteConfig,
    #[serde(default)]
    pub continuum: ContinuumConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DiscreteConfig {
    pub network: Option<PathBuf>,
    pub gamma: f64,
    pub nu: f64,
    pub c_min: f64,
    pub grad_tol: f64,
    pub max_iter: usize,
    pub lin_tol: f64,
    pub flux_eps: f64,
}

impl Default for DiscreteConfig {
    fn default() -> Self {
        DiscreteConfig {
            network: None,
            gamma: 1.0,
            nu: 1.0,
            c_min: DEFAULT_C_MIN,
            grad_tol: DEFAULT_GRAD_TOL,
            max_iter: 100_000,
            lin_tol: DEFAULT_LIN_TOL,
            flux_eps: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Model {
    Grid,
    Vector,
}

/// A number, a named preset, or a cell CSV file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FieldSpec {
    Value(f64),
    Preset(String),
    Csv { csv: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubdomainSpec {
    pub x: [f64; 2],
    #[serde(default)]
    pub y: Option<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ContinuumConfig {
    pub model: Model,
    pub extents: Vec<f64>,
    pub cells: Vec<usize>,
    pub gamma: f64,
    pub nu: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub r: FieldSpec,
    pub source: FieldSpec,
    pub subdomain: Option<SubdomainSpec>,
    pub sign_eps: Option<f64>,
    /// Cell CSV; nonzero values put the cell in the minus orientation set.
    pub orientation_mask: Option<PathBuf>,
}

impl Default for ContinuumConfig {
    fn default() -> Self {
        ContinuumConfig {
            model: Model::Grid,
            extents: vec![1.0],
            cells: vec![128],
            gamma: 2.0,
            nu: 1.0,
            tol: 1e-10,
            max_iter: 200_000,
            r: FieldSpec::Value(1.0),
            source: FieldSpec::Preset("cos1d".into()),
            subdomain: None,
            sign_eps: None,
            orientation_mask: None,
        }
    }
}

impl RunConfig {
    /// Parses a config file; relative paths inside are taken relative to it.
    pub fn load(path: &Path) -> Result<Self> {
        let text = read_text(path)?;
        let mut cfg: RunConfig = toml::from_str(&text).map_err(|e| {
            let line = e.span().map(|s| text[..s.start].lines().count().max(1));
            CliError::input(path, line, e.message().to_string())
        })?;
        let base = path.parent().unwrap_or(Path::new(""));
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let Some(p) = cfg.discrete.network.as_mut() {
            fix(p);
        }
        for spec in [&mut cfg.continuum.r, &mut cfg.continuum.source] {
            if let FieldSpec::Csv { csv } = spec {
                fix(csv);
            }
        }
        if let Some(p) = cfg.continuum.orientation_mask.as_mut() {
            fix(p);
        }
        Ok(cfg)
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(CliError::Config(format!(
            "{name} must be positive, got {v}"
        )))
    }
}

impl DiscreteConfig {
    pub fn validate(&self) -> Result<()> {
        positive("discrete.gamma", self.gamma)?;
        positive("discrete.nu", self.nu)?;
        positive("discrete.grad_tol", self.grad_tol)?;
        positive("discrete.lin_tol", self.lin_tol)?;
        if !(self.c_min >= 0.0) || !(self.flux_eps >= 0.0) {
            return Err(CliError::Config(
                "discrete.c_min and discrete.flux_eps must be nonnegative".into(),
            ));
        }
        Ok(())
    }

    pub fn params(&self) -> Result<MetabolicParams> {
        self.validate()?;
        Ok(MetabolicParams::new(self.gamma, self.nu)?)
    }

    pub fn optimizer(&self) -> Result<OptimizerConfig> {
        Ok(OptimizerConfig {
            c_min: self.c_min,
            grad_tol: self.grad_tol,
            max_iter: self.max_iter,
            lin_tol: self.lin_tol,
            ..OptimizerConfig::new(self.params()?)
        })
    }
}

impl ContinuumConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma.is_finite() && self.gamma > 1.0) {
            return Err(CliError::Config(format!(
                "continuum.gamma must exceed 1, got {}",
                self.gamma
            )));
        }
        positive("continuum.nu", self.nu)?;
        positive("continuum.tol", self.tol)?;
        if let Some(e) = self.sign_eps {
            if !(e >= 0.0) {
                return Err(CliError::Config(
                    "continuum.sign_eps must be nonnegative".into(),
                ));
            }
        }
        if self.model == Model::Vector && self.extents.len() != 2 {
            return Err(CliError::Config("the vector model needs a 2-D grid".into()));
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<RectGrid> {
        RectGrid::new(&self.extents, &self.cells)
            .map_err(|e| CliError::Config(format!("grid: {e}")))
    }

    fn profile(&self, spec: &FieldSpec, what: &str, grid: &RectGrid) -> Result<Option<Profile>> {
        let ext = grid.extents();
        let (lx, ly) = (ext[0], ext.get(1).copied().unwrap_or(0.0));
        Ok(match spec {
            FieldSpec::Value(v) => Some(Profile::Constant(*v)),
            FieldSpec::Csv { .. } => None,
            FieldSpec::Preset(name) => Some(match (what, name.as_str()) {
                ("source", "cos1d") => Profile::Cos1d {
                    amplitude: 1.0,
                    extent: lx,
                },
                ("source", "dipole2d") => Profile::Dipole2d {
                    amplitude: 10.0,
                    sigma: 0.1 * lx.min(if ly > 0.0 { ly } else { lx }),
                    plus: [0.3 * lx, 0.5 * ly],
                    minus: [0.7 * lx, 0.5 * ly],
                },
                ("source", "radial") => Profile::RadialHat {
                    amplitude: 50.0,
                    sigma: 0.15 * lx.min(if ly > 0.0 { ly } else { lx }),
                    center: [0.5 * lx, 0.5 * ly],
                },
                ("r", "ramp") => Profile::Ramp {
                    base: 1.0,
                    slope: 0.5 / lx,
                    axis: 0,
                },
                _ => return Err(CliError::Config(format!("unknown {what} preset {name:?}"))),
            }),
        })
    }

    /// Builds the projected problem.
    pub fn problem(&self) -> Result<ContinuumProblem> {
        self.validate()?;
        let grid = self.grid()?;
        let rp = self.profile(&self.r, "r", &grid)?;
        let sp = self.profile(&self.source, "source", &grid)?;
        let problem = match (rp, sp) {
            (Some(r), Some(s)) => ContinuumProblem::from_profiles(grid, self.gamma, self.nu, r, s)?,
            _ => {
                let sample = |spec: &FieldSpec, p: Option<Profile>| match (spec, p) {
                    (FieldSpec::Csv { csv }, _) => read_cell_csv(csv, &grid),
                    (_, Some(p)) => Ok(grid.sample(&p)),
                    _ => unreachable!(),
                };
                let r = sample(&self.r, rp)?;
                let s = sample(&self.source, sp)?;
                ContinuumProblem::new(grid.clone(), self.gamma, self.nu, r, s)?
            }
        };
        Ok(murraynet_core::continuum_grid::project_source(&problem))
    }

    /// Cells whose centers fall inside the configured rectangle.
    pub fn subdomain_mask(&self, grid: &RectGrid) -> Result<Vec<bool>> {
        let s = self
            .subdomain
            .as_ref()
            .ok_or_else(|| CliError::Config("continuum.subdomain is required".into()))?;
        let y = s.y.unwrap_or([f64::NEG_INFINITY, f64::INFINITY]);
        let mask = box_mask(grid, [s.x[0], y[0]], [s.x[1], y[1]]);
        if !mask.iter().any(|&b| b) {
            return Err(CliError::Config(
                "continuum.subdomain contains no cell center".into(),
            ));
        }
        Ok(mask)
    }

    pub fn orientation(&self, grid: &RectGrid) -> Result<Option<Vec<bool>>> {
        match &self.orientation_mask {
            None => Ok(None),
            Some(p) => Ok(Some(
                read_cell_csv(p, grid)?
                    .into_iter()
                    .map(|v| v != 0.0)
                    .collect(),
            )),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_field_specs() {
        let cfg: RunConfig = toml::from_str(
            "[continuum]\nextents = [1.0, 1.0]\ncells = [8, 8]\nr = 2.0\nsource = \"dipole2d\"\nsubdomain = { x = [0.0, 0.5] }\n",
        )
        .unwrap();
        assert_eq!(cfg.continuum.r, FieldSpec::Value(2.0));
        assert_eq!(cfg.continuum.source, FieldSpec::Preset("dipole2d".into()));
        let pr = cfg.continuum.problem().unwrap();
        assert!(pr.source_total().abs() < 1e-12);
        assert_eq!(
            cfg.continuum
                .subdomain_mask(pr.grid())
                .unwrap()
                .iter()
                .filter(|&&b| b)
                .count(),
            32
        );
    }

    #[test]
    fn rejects_unknown_keys_and_bad_gamma() {
        assert!(toml::from_str::<RunConfig>("[discrete]\ngama = 1.0\n").is_err());
        let cfg: RunConfig = toml::from_str("[continuum]\ngamma = 1.0\n").unwrap();
        assert!(matches!(cfg.continuum.problem(), Err(CliError::Config(_))));
    }
}
