//! Sectioned `key = value` experiment files.
//!
//! ```text
//! # comment
//! [grid]
//! dim = 2
//! n = 129
//! lo = -1 -1
//! hi = 1 1
//! ```
//!
//! Keys are addressed as `section.key`. Every key must be known, appear at
//! most once and parse as its type; missing keys take their defaults.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use inflap_core::continuation::{ContinuationConfig, EpsilonSchedule};
use inflap_core::geometry::GeometryConfig;
use inflap_core::operator::{OperatorConfig, DEFAULT_GRADIENT_FLOOR, DEFAULT_VISCOSITY};
use inflap_core::solver::{InitKind, SolveOptions, DEFAULT_GAMMA, DEFAULT_MAX_ITER};
use inflap_core::{Bump, BumpKind, GProfile, Grid, ReactionTerm};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("{path}: {msg}")]
    Io { path: String, msg: String },
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: duplicate key `{key}`")]
    Duplicate { line: usize, key: String },
    #[error("line {line}: key `{key}`: {msg}")]
    Value { line: usize, key: String, msg: String },
    /// A combination of keys that no module accepts.
    #[error("{key}: {msg}")]
    Invalid { key: String, msg: String },
}

type Result<T> = std::result::Result<T, ConfigError>;

const KEYS: &[&str] = &[
    "grid.dim",
    "grid.n",
    "grid.lo",
    "grid.hi",
    "boundary.kind",
    "boundary.value",
    "boundary.slope_x",
    "boundary.slope_y",
    "boundary.power",
    "operator.width",
    "operator.directions",
    "operator.gradient_floor",
    "operator.viscosity",
    "operator.layer_width",
    "reaction.beta",
    "reaction.beta_scale",
    "reaction.eps",
    "reaction.g.kind",
    "reaction.g.c0",
    "reaction.g.c1",
    "reaction.band.a",
    "reaction.band.b",
    "solver.tol",
    "solver.max_iter",
    "solver.gamma",
    "solver.init",
    "solver.history_stride",
    "schedule.eps0",
    "schedule.factor",
    "schedule.first",
    "schedule.count",
    "schedule.c1",
    "schedule.delta_factor",
    "schedule.tail",
    "schedule.stability_factor",
    "schedule.cauchy_ratio",
    "schedule.burn_in",
    "geometry.snapshot",
    "geometry.eps",
    "geometry.margin",
    "geometry.rho_cells",
    "geometry.porosity_cells",
    "geometry.porosity_big_r_cells",
    "geometry.minkowski_cells",
    "geometry.max_samples",
    "geometry.seed",
    "barrier.a",
    "barrier.b",
    "barrier.a0",
    "barrier.alpha",
    "barrier.l",
    "barrier.kappa0",
    "barrier.radii",
    "oned.left",
    "oned.right",
    "oned.step",
    "output.dir",
    "output.assert",
];

/// Raw entries keyed by `section.key`, with their line numbers.
#[derive(Debug, Clone, Default)]
pub struct RawConfig {
    entries: BTreeMap<String, (usize, String)>,
}

impl RawConfig {
    pub fn parse(text: &str) -> Result<RawConfig> {
        let mut entries = BTreeMap::new();
        let mut section: Option<String> = None;
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let s = raw.split('#').next().unwrap_or("").trim();
            if s.is_empty() {
                continue;
            }
            if let Some(rest) = s.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .map(str::trim)
                    .filter(|n| !n.is_empty() && !n.contains(char::is_whitespace))
                    .ok_or_else(|| ConfigError::Syntax { line, msg: format!("bad section header `{s}`") })?;
                section = Some(name.to_string());
                continue;
            }
            let (k, v) = s
                .split_once('=')
                .ok_or_else(|| ConfigError::Syntax { line, msg: format!("expected `key = value`, got `{s}`") })?;
            let (k, v) = (k.trim(), v.trim());
            if k.is_empty() {
                return Err(ConfigError::Syntax { line, msg: "empty key".into() });
            }
            let sec = section
                .as_deref()
                .ok_or_else(|| ConfigError::Syntax { line, msg: format!("key `{k}` outside any section") })?;
            let key = format!("{sec}.{k}");
            if !KEYS.contains(&key.as_str()) {
                return Err(ConfigError::UnknownKey { line, key });
            }
            if entries.contains_key(&key) {
                return Err(ConfigError::Duplicate { line, key });
            }
            entries.insert(key, (line, v.to_string()));
        }
        Ok(RawConfig { entries })
    }

    pub fn load(path: &Path) -> Result<RawConfig> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::Io { path: path.display().to_string(), msg: e.to_string() })?;
        RawConfig::parse(&text)
    }

    fn value_err(&self, key: &str, msg: String) -> ConfigError {
        let line = self.entries.get(key).map_or(0, |e| e.0);
        ConfigError::Value { line, key: key.to_string(), msg }
    }

    fn get<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.entries.get(key) {
            None => Ok(None),
            Some((_, v)) => v
                .parse()
                .map(Some)
                .map_err(|_| self.value_err(key, format!("cannot parse `{v}` as {}", std::any::type_name::<T>()))),
        }
    }

    fn or<T: std::str::FromStr>(&self, key: &str, default: T) -> Result<T> {
        Ok(self.get(key)?.unwrap_or(default))
    }

    fn list(&self, key: &str) -> Result<Option<Vec<f64>>> {
        match self.entries.get(key) {
            None => Ok(None),
            Some((_, v)) => v
                .split_whitespace()
                .map(|t| t.parse::<f64>().map_err(|_| self.value_err(key, format!("cannot parse `{t}` as a number"))))
                .collect::<Result<Vec<_>>>()
                .map(Some),
        }
    }

    fn text(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|e| e.1.as_str())
    }

    pub fn has(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    /// Wraps a failure from the numerical crate as a diagnostic on `key`.
    fn check<T>(&self, key: &str, r: inflap_core::Result<T>) -> Result<T> {
        r.map_err(|e| match self.entries.get(key) {
            Some(_) => self.value_err(key, e.to_string()),
            None => ConfigError::Invalid { key: key.to_string(), msg: e.to_string() },
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum BoundaryKind {
    /// `value + slope_x x + slope_y y`.
    Affine { value: f64, slope_x: f64, slope_y: f64 },
    /// `|x|^power`.
    RadialPower(f64),
    /// `x^{4/3} − y^{4/3}`.
    Aronsson,
}

impl BoundaryKind {
    pub fn eval(&self, x: [f64; 2]) -> f64 {
        match *self {
            BoundaryKind::Affine { value, slope_x, slope_y } => value + slope_x * x[0] + slope_y * x[1],
            BoundaryKind::RadialPower(p) => x[0].hypot(x[1]).powf(p),
            BoundaryKind::Aronsson => x[0].abs().powf(4.0 / 3.0) - x[1].abs().powf(4.0 / 3.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BarrierConfig {
    pub a: f64,
    pub b: f64,
    pub a0: f64,
    pub alpha: f64,
    pub l: f64,
    pub kappa0: f64,
    pub radii: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OneDConfig {
    pub left: f64,
    pub right: f64,
    pub step: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub grid: Grid,
    pub boundary: BoundaryKind,
    pub operator: OperatorConfig,
    pub reaction: ReactionTerm,
    pub solve: SolveOptions,
    pub init: InitKind,
    pub schedule: EpsilonSchedule,
    pub continuation: ContinuationConfig,
    pub snapshot: Option<PathBuf>,
    /// Height used by the `geometry` subcommand; defaults to `reaction.eps`.
    pub geometry_eps: f64,
    pub barrier: BarrierConfig,
    pub oned: OneDConfig,
    pub out_dir: PathBuf,
    pub assert: bool,
}

impl ExperimentConfig {
    pub fn from_raw(raw: &RawConfig) -> Result<ExperimentConfig> {
        let dim: usize = raw.or("grid.dim", 2)?;
        let n: usize = raw.or("grid.n", 65)?;
        let default_lo = vec![-1.0; dim];
        let default_hi = vec![1.0; dim];
        let lo = raw.list("grid.lo")?.unwrap_or(default_lo);
        let hi = raw.list("grid.hi")?.unwrap_or(default_hi);
        let grid = raw.check("grid.n", Grid::new(dim, &lo, &hi, n))?;

        let boundary = match raw.text("boundary.kind").unwrap_or("affine") {
            "affine" | "constant" => BoundaryKind::Affine {
                value: raw.or("boundary.value", 1.0)?,
                slope_x: raw.or("boundary.slope_x", 0.0)?,
                slope_y: raw.or("boundary.slope_y", 0.0)?,
            },
            "radial_power" => BoundaryKind::RadialPower(raw.or("boundary.power", 4.0 / 3.0)?),
            "aronsson" => BoundaryKind::Aronsson,
            other => return Err(raw.value_err("boundary.kind", format!("unknown boundary kind `{other}`"))),
        };

        let operator = OperatorConfig {
            width: raw.get("operator.width")?,
            directions: raw.get("operator.directions")?,
            gradient_floor: raw.or("operator.gradient_floor", DEFAULT_GRADIENT_FLOOR)?,
            viscosity: raw.or("operator.viscosity", DEFAULT_VISCOSITY)?,
            layer_width: raw.get("operator.layer_width")?,
        };

        let kind = match raw.text("reaction.beta") {
            None => BumpKind::Bump6,
            Some(s) => BumpKind::parse(s)
                .ok_or_else(|| raw.value_err("reaction.beta", format!("expected bump6, bump30 or zero, got `{s}`")))?,
        };
        let scale = if kind == BumpKind::Zero { 0.0 } else { raw.or("reaction.beta_scale", 1.0)? };
        let eps: f64 = raw.or("reaction.eps", 0.1)?;
        let c0: f64 = raw.or("reaction.g.c0", 0.0)?;
        let g = match raw.text("reaction.g.kind").unwrap_or("constant") {
            "constant" => GProfile::Constant(c0),
            "affine" => GProfile::Affine { c0, c1: raw.or("reaction.g.c1", c0)? },
            other => return Err(raw.value_err("reaction.g.kind", format!("expected constant or affine, got `{other}`"))),
        };
        let mut reaction = raw.check("reaction.eps", ReactionTerm::new(eps, Bump::scaled(kind, scale), g))?;
        let band = (raw.or("reaction.band.a", 0.25)?, raw.or("reaction.band.b", 0.75)?);
        if !(0.0 <= band.0 && band.0 < band.1 && band.1 <= 1.0) {
            return Err(raw.value_err("reaction.band.b", format!("need 0 <= a < b <= 1, got {band:?}")));
        }
        reaction.band = band;

        let solve = SolveOptions {
            tol: raw.get("solver.tol")?,
            max_iter: raw.or("solver.max_iter", DEFAULT_MAX_ITER)?,
            gamma: raw.or("solver.gamma", DEFAULT_GAMMA)?,
            history_stride: raw.or("solver.history_stride", 1)?,
        };
        if !(solve.gamma > 0.0 && solve.gamma <= 1.0) {
            return Err(raw.value_err("solver.gamma", format!("must lie in (0, 1], got {}", solve.gamma)));
        }
        if solve.history_stride == 0 {
            return Err(raw.value_err("solver.history_stride", "must be positive".into()));
        }
        let init = match raw.text("solver.init") {
            None => InitKind::Super,
            Some(s) => InitKind::parse(s).ok_or_else(|| {
                raw.value_err("solver.init", format!("expected super, sub, boundary-extend or zero, got `{s}`"))
            })?,
        };

        let schedule = raw.check(
            "schedule.factor",
            EpsilonSchedule::starting_at(
                raw.or("schedule.eps0", eps)?,
                raw.or("schedule.factor", 0.5)?,
                raw.or("schedule.first", 0)?,
                raw.or("schedule.count", 5)?,
            ),
        )?;

        let dg = GeometryConfig::default();
        let geometry = GeometryConfig {
            margin: raw.or("geometry.margin", dg.margin)?,
            rho_cells: raw.list("geometry.rho_cells")?.unwrap_or(dg.rho_cells),
            porosity_cells: raw.list("geometry.porosity_cells")?.unwrap_or(dg.porosity_cells),
            porosity_big_r_cells: raw.or("geometry.porosity_big_r_cells", dg.porosity_big_r_cells)?,
            minkowski_cells: raw.list("geometry.minkowski_cells")?.unwrap_or(dg.minkowski_cells),
            minkowski_ball: None,
            max_samples: raw.or("geometry.max_samples", dg.max_samples)?,
            seed: raw.or("geometry.seed", dg.seed)?,
        };
        let dc = ContinuationConfig::default();
        let continuation = ContinuationConfig {
            c1: raw.or("schedule.c1", dc.c1)?,
            delta_factor: raw.or("schedule.delta_factor", dc.delta_factor)?,
            tail: raw.or("schedule.tail", dc.tail)?,
            stability_factor: raw.or("schedule.stability_factor", dc.stability_factor)?,
            cauchy_ratio: raw.or("schedule.cauchy_ratio", dc.cauchy_ratio)?,
            burn_in: raw.or("schedule.burn_in", dc.burn_in)?,
            geometry,
            solve,
        };

        let barrier = BarrierConfig {
            a: raw.or("barrier.a", 0.25)?,
            b: raw.or("barrier.b", 0.75)?,
            a0: raw.or("barrier.a0", 0.5)?,
            alpha: raw.or("barrier.alpha", 2.0)?,
            l: raw.or("barrier.l", 0.25)?,
            kappa0: raw.or("barrier.kappa0", 0.01)?,
            radii: raw.or("barrier.radii", 64)?,
        };
        let oned = OneDConfig {
            left: raw.or("oned.left", 0.5)?,
            right: raw.or("oned.right", 0.5)?,
            step: raw.or("oned.step", inflap_core::one_dim::DEFAULT_STEP)?,
        };

        Ok(ExperimentConfig {
            grid,
            boundary,
            operator,
            reaction,
            solve,
            init,
            schedule,
            continuation,
            snapshot: raw.text("geometry.snapshot").map(PathBuf::from),
            geometry_eps: raw.or("geometry.eps", eps)?,
            barrier,
            oned,
            out_dir: PathBuf::from(raw.text("output.dir").unwrap_or("out")),
            assert: raw.or("output.assert", true)?,
        })
    }

    pub fn parse(text: &str) -> Result<ExperimentConfig> {
        ExperimentConfig::from_raw(&RawConfig::parse(text)?)
    }

    pub fn load(path: &Path) -> Result<ExperimentConfig> {
        ExperimentConfig::from_raw(&RawConfig::load(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_from_an_empty_file() {
        let c = ExperimentConfig::parse("").unwrap();
        assert_eq!(c.grid.n(), 65);
        assert_eq!(c.init, InitKind::Super);
        assert!(c.assert);
    }

    #[test]
    fn diagnostics_carry_lines_and_keys() {
        let e = ExperimentConfig::parse("[grid]\nn = 33\n\n[solver]\ntoll = 1e-9\n").unwrap_err();
        assert_eq!(e, ConfigError::UnknownKey { line: 5, key: "solver.toll".into() });
        let e = ExperimentConfig::parse("[grid]\nn = many\n").unwrap_err();
        assert!(matches!(e, ConfigError::Value { line: 2, ref key, .. } if key == "grid.n"));
        let e = ExperimentConfig::parse("n = 3\n").unwrap_err();
        assert!(matches!(e, ConfigError::Syntax { line: 1, .. }));
        let e = ExperimentConfig::parse("[grid]\nn = 3\nn = 5\n").unwrap_err();
        assert!(matches!(e, ConfigError::Duplicate { line: 3, .. }));
        let e = ExperimentConfig::parse("[reaction]\nbeta = bump7\n").unwrap_err();
        assert!(e.to_string().contains("reaction.beta"));
    }
}
