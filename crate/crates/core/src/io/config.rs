//! Run configuration: a TOML file with one table per concern. Every key is
//! optional; unknown keys are rejected.
//!
//! | key                         | default                      |
//! |-----------------------------|------------------------------|
//! | `system.e_12`               | 152 meV                      |
//! | `system.n_prop`             | 3.3                          |
//! | `cavity.model`              | `"parametric"`               |
//! | `cavity.n_cav`              | 3.3                          |
//! | `cavity.theta_res`          | 60°, calibrates `e_z`        |
//! | `cavity.e_z`                | unset (overrides calibration)|
//! | `cavity.table`              | unset (`model = "tabulated"`)|
//! | `coupling.kind`             | `"constant"`                 |
//! | `coupling.omega_r`          | 16.5 meV                     |
//! | `diamagnetic.rule`          | `"standard"`                 |
//! | `diamagnetic.factor`        | 1 (`rule = "scaled"`)        |
//! | `diamagnetic.d_dia`         | unset (`rule = "fixed"`)     |
//! | `geometry.prism_angle`      | 70°                          |
//! | `geometry.theta_min/max`    | 40° / 85°                    |
//! | `geometry.theta_points`     | 91                           |
//! | `fit.omega_r_bounds`        | [0, 50] meV                  |
//! | `fit.coarse_grid_points`    | 64                           |
//! | `fit.refine_tolerance`      | 1e-6 meV                     |
//! | `fit.variant`               | `"FULL"`                     |
//! | `fit.domain`                | `"angle"`                    |
//! | `oracle.*`                  | see [`FockConfig`]           |
//! | `tolerances.*`              | see [`Tolerances`]           |
//! | `output.dir`                | `$POLARITON_OUTPUT_DIR` or `polariton-out` |
//! | `output.plot_script`        | false                        |
//! | `output.threads`            | 0 (all cores)                |

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dispersion::{CavityModel, CouplingKind, CouplingModel, DiamagneticRule, SystemParams};
use crate::fit::FitConfig;
use crate::fock::FockConfig;
use crate::io::csv::{load_cavity_table, CsvError};
use crate::model::Tolerances;

pub const OUTPUT_DIR_ENV: &str = "POLARITON_OUTPUT_DIR";
pub const DEFAULT_OUTPUT_DIR: &str = "polariton-out";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{0}")]
    Parse(String),
    #[error("`{field}`: {message}")]
    Invalid { field: String, message: String },
    #[error("cavity table: {0}")]
    Table(#[from] CsvError),
}

fn invalid(field: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid { field: field.to_string(), message: message.into() }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SystemSection {
    pub e_12: f64,
    pub n_prop: f64,
}

impl Default for SystemSection {
    fn default() -> Self {
        Self { e_12: 152.0, n_prop: 3.3 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CavityKind {
    Parametric,
    Tabulated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CavitySection {
    pub model: CavityKind,
    pub n_cav: f64,
    pub theta_res: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub e_z: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub table: Option<PathBuf>,
}

impl Default for CavitySection {
    fn default() -> Self {
        Self { model: CavityKind::Parametric, n_cav: 3.3, theta_res: 60.0, e_z: None, table: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CouplingSection {
    pub kind: CouplingKind,
    pub omega_r: f64,
}

impl Default for CouplingSection {
    fn default() -> Self {
        Self { kind: CouplingKind::Constant, omega_r: 16.5 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiamagneticKind {
    Standard,
    Scaled,
    Fixed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DiamagneticSection {
    pub rule: DiamagneticKind,
    pub factor: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub d_dia: Option<f64>,
}

impl Default for DiamagneticSection {
    fn default() -> Self {
        Self { rule: DiamagneticKind::Standard, factor: 1.0, d_dia: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GeometrySection {
    /// Facet angle of the multipass prism; light crosses the facet at
    /// normal incidence, so this is also the internal angle.
    pub prism_angle: f64,
    pub theta_min: f64,
    pub theta_max: f64,
    pub theta_points: usize,
}

impl Default for GeometrySection {
    fn default() -> Self {
        Self { prism_angle: 70.0, theta_min: 40.0, theta_max: 85.0, theta_points: 91 }
    }
}

impl GeometrySection {
    pub fn angle_grid(&self) -> Vec<f64> {
        linear_grid(self.theta_min, self.theta_max, self.theta_points)
    }
}

pub fn linear_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n).map(|i| if i + 1 == n { hi } else { lo + (hi - lo) * i as f64 / (n - 1) as f64 }).collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: PathBuf,
    pub plot_script: bool,
    /// Worker threads for grid evaluations; 0 uses every core.
    pub threads: usize,
}

impl Default for OutputSection {
    fn default() -> Self {
        let dir = std::env::var_os(OUTPUT_DIR_ENV).map(PathBuf::from).unwrap_or_else(|| DEFAULT_OUTPUT_DIR.into());
        Self { dir, plot_script: false, threads: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub system: SystemSection,
    pub cavity: CavitySection,
    pub coupling: CouplingSection,
    pub diamagnetic: DiamagneticSection,
    pub geometry: GeometrySection,
    pub fit: FitConfig,
    pub oracle: FockConfig,
    pub tolerances: Tolerances,
    pub output: OutputSection,
    /// Directory relative paths in the file are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

pub fn parse_config(path: &Path) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    parse_config_str(&text, &base).map_err(|e| match e {
        ConfigError::Parse(msg) => ConfigError::Parse(format!("{}: {msg}", path.display())),
        other => other,
    })
}

pub fn parse_config_str(text: &str, base_dir: &Path) -> Result<RunConfig, ConfigError> {
    let mut config: RunConfig = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
    config.base_dir = base_dir.to_path_buf();
    config.validate()?;
    Ok(config)
}

fn require(ok: bool, field: &str, value: f64, rule: &str) -> Result<(), ConfigError> {
    if ok {
        Ok(())
    } else {
        Err(invalid(field, format!("{value} {rule}")))
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let s = &self.system;
        require(s.e_12.is_finite() && s.e_12 > 0.0, "system.e_12", s.e_12, "must be > 0")?;
        require(s.n_prop.is_finite() && s.n_prop > 1.0, "system.n_prop", s.n_prop, "must be > 1")?;
        let c = &self.cavity;
        require(c.n_cav.is_finite() && c.n_cav > 0.0, "cavity.n_cav", c.n_cav, "must be > 0")?;
        require(c.theta_res > 0.0 && c.theta_res < 90.0, "cavity.theta_res", c.theta_res, "must lie in (0, 90)")?;
        if let Some(e_z) = c.e_z {
            require(e_z.is_finite() && e_z > 0.0, "cavity.e_z", e_z, "must be > 0")?;
        }
        match (c.model, &c.table) {
            (CavityKind::Tabulated, None) => {
                return Err(invalid("cavity.table", "required when model = \"tabulated\""))
            }
            (CavityKind::Parametric, Some(_)) => {
                return Err(invalid("cavity.table", "only valid with model = \"tabulated\""))
            }
            _ => {}
        }
        let omega = self.coupling.omega_r;
        require(omega.is_finite() && omega >= 0.0, "coupling.omega_r", omega, "must be >= 0")?;
        let d = &self.diamagnetic;
        require(d.factor.is_finite() && d.factor >= 0.0, "diamagnetic.factor", d.factor, "must be >= 0")?;
        match (d.rule, d.d_dia) {
            (DiamagneticKind::Fixed, None) => {
                return Err(invalid("diamagnetic.d_dia", "required when rule = \"fixed\""))
            }
            (DiamagneticKind::Fixed, Some(v)) => {
                require(v.is_finite() && v >= 0.0, "diamagnetic.d_dia", v, "must be >= 0")?
            }
            (_, Some(_)) => return Err(invalid("diamagnetic.d_dia", "only valid with rule = \"fixed\"")),
            _ => {}
        }
        let g = &self.geometry;
        for (name, v) in [
            ("geometry.prism_angle", g.prism_angle),
            ("geometry.theta_min", g.theta_min),
            ("geometry.theta_max", g.theta_max),
        ] {
            require(v > 0.0 && v < 90.0, name, v, "must lie in (0, 90)")?;
        }
        require(g.theta_max >= g.theta_min, "geometry.theta_max", g.theta_max, "must be >= geometry.theta_min")?;
        require(g.theta_points >= 1, "geometry.theta_points", g.theta_points as f64, "must be >= 1")?;
        self.fit.validate().map_err(|e| invalid("fit", e.to_string()))?;
        self.oracle.validate().map_err(|e| invalid("oracle", e.to_string()))?;
        let t = &self.tolerances;
        for (name, v) in [
            ("tolerances.pairing", t.pairing),
            ("tolerances.normalization", t.normalization),
            ("tolerances.degeneracy", t.degeneracy),
        ] {
            require(v.is_finite() && v > 0.0, name, v, "must be > 0")?;
        }
        Ok(())
    }

    pub fn resolve(&self, path: &Path) -> PathBuf {
        if path.is_absolute() {
            path.to_path_buf()
        } else {
            self.base_dir.join(path)
        }
    }

    pub fn cavity_model(&self) -> Result<CavityModel, ConfigError> {
        let c = &self.cavity;
        let model = match (c.model, &c.table) {
            (CavityKind::Tabulated, Some(table)) => {
                CavityModel::Tabulated { table: load_cavity_table(&self.resolve(table), self.system.n_prop)? }
            }
            (CavityKind::Tabulated, None) => {
                return Err(invalid("cavity.table", "required when model = \"tabulated\""))
            }
            (CavityKind::Parametric, _) => match c.e_z {
                Some(e_z) => CavityModel::parametric(e_z, c.n_cav),
                None => CavityModel::calibrated(self.system.e_12, c.theta_res, self.system.n_prop, c.n_cav),
            }
            .map_err(|e| invalid("cavity", e.to_string()))?,
        };
        Ok(model)
    }

    pub fn system_params(&self) -> Result<SystemParams, ConfigError> {
        let diamagnetic = match self.diamagnetic.rule {
            DiamagneticKind::Standard => DiamagneticRule::Standard,
            DiamagneticKind::Scaled => DiamagneticRule::Scaled { factor: self.diamagnetic.factor },
            DiamagneticKind::Fixed => DiamagneticRule::Fixed { d_dia: self.diamagnetic.d_dia.unwrap_or(0.0) },
        };
        let params = SystemParams {
            e_12: self.system.e_12,
            cavity: self.cavity_model()?,
            coupling: CouplingModel { kind: self.coupling.kind, omega_r_res: self.coupling.omega_r },
            n_prop: self.system.n_prop,
            diamagnetic,
            tolerances: self.tolerances,
        };
        params.validate().map_err(|e| invalid("system", e.to_string()))?;
        Ok(params)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dispersion::Domain;
    use crate::model::HamiltonianVariant;

    fn parse(text: &str) -> Result<RunConfig, ConfigError> {
        parse_config_str(text, Path::new("."))
    }

    #[test]
    fn minimal_config_gets_defaults() {
        let c = parse("[system]\ne_12 = 152.0\n").unwrap();
        assert_eq!(c.system, SystemSection::default());
        assert_eq!(c.fit, FitConfig::default());
        assert_eq!(c.geometry.prism_angle, 70.0);
        let p = c.system_params().unwrap();
        match p.cavity {
            CavityModel::Parametric { e_z, n_cav } => {
                assert!((e_z - 76.0).abs() < 1e-12);
                assert_eq!(n_cav, 3.3);
            }
            _ => panic!("expected parametric cavity"),
        }
        assert_eq!(parse("").unwrap().system.e_12, 152.0);
    }

    #[test]
    fn fit_section_is_populated() {
        let c =
            parse("[fit]\nomega_r_bounds = [0.0, 50.0]\nvariant = \"NO_ANTIRES_NO_DIA\"\ndomain = \"wavevector\"\n")
                .unwrap();
        assert_eq!(c.fit.omega_r_bounds, (0.0, 50.0));
        assert_eq!(c.fit.variant, HamiltonianVariant::NoAntiresNoDia);
        assert_eq!(c.fit.domain, Domain::Wavevector);
    }

    #[test]
    fn negative_transition_energy_names_the_field() {
        match parse("[system]\ne_12 = -5.0\n") {
            Err(ConfigError::Invalid { field, .. }) => assert_eq!(field, "system.e_12"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = parse("[system]\ne12 = 150.0\n").unwrap_err().to_string();
        assert!(err.contains("e12"), "{err}");
        assert!(parse("[bogus]\nx = 1\n").is_err());
        assert!(parse("[fit]\nrefine_tol = 1e-3\n").is_err());
        assert!(parse("[oracle]\nn_max = 3\n").is_err());
    }

    #[test]
    fn inconsistent_sections_are_rejected() {
        assert!(parse("[cavity]\nmodel = \"tabulated\"\n").is_err());
        assert!(parse("[diamagnetic]\nrule = \"fixed\"\n").is_err());
        assert!(parse("[diamagnetic]\nrule = \"standard\"\nd_dia = 1.0\n").is_err());
        assert!(parse("[fit]\ncoarse_grid_points = 4\n").is_err());
        assert!(parse("[geometry]\ntheta_min = 80.0\ntheta_max = 50.0\n").is_err());
    }

    #[test]
    fn diamagnetic_rules() {
        let c = parse("[diamagnetic]\nrule = \"fixed\"\nd_dia = 2.5\n").unwrap();
        assert_eq!(c.system_params().unwrap().diamagnetic, DiamagneticRule::Fixed { d_dia: 2.5 });
        let c = parse("[diamagnetic]\nrule = \"scaled\"\nfactor = 0.5\n").unwrap();
        assert_eq!(c.system_params().unwrap().diamagnetic, DiamagneticRule::Scaled { factor: 0.5 });
    }

    #[test]
    fn explicit_e_z_overrides_calibration() {
        let c = parse("[cavity]\ne_z = 90.0\n").unwrap();
        assert_eq!(c.cavity_model().unwrap(), CavityModel::Parametric { e_z: 90.0, n_cav: 3.3 });
    }

    #[test]
    fn echo_reparses_to_the_same_config() {
        let c = parse("[coupling]\nomega_r = 20.0\n[output]\ndir = \"out\"\n").unwrap();
        let text = toml::to_string(&c).unwrap();
        assert_eq!(parse(&text).unwrap(), c);
    }

    #[test]
    fn grid() {
        assert_eq!(linear_grid(1.0, 2.0, 3), vec![1.0, 1.5, 2.0]);
        assert_eq!(GeometrySection::default().angle_grid().len(), 91);
    }
}
