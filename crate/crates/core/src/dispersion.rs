//! Cavity dispersion, angle/wavevector conversion and polariton branch
//! energies at fixed wavevector or at fixed internal angle.
//!
//! At fixed internal angle the in-plane wavevector depends on the photon
//! energy, `k = E n_prop sin θ / ħc`, so a branch energy is the solution of
//! the implicit equation `E = E_branch(k(E))`. The two polaritons seen at
//! one angle therefore sit at different `k`, and their apparent splitting
//! exceeds the fixed-`k` value.

use std::cell::RefCell;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{
    self, diagonalize_with, Branch, HamiltonianVariant, ModeInputs, ModelError, PolaritonModes, Tolerances,
};
use crate::numerics::pchip::{Pchip, PchipError};
use crate::numerics::roots::{brent, BrentOptions, RootError};

/// ħc in meV·nm.
pub const HBAR_C_MEV_NM: f64 = 197_326.98;

/// Default refractive index of the propagation medium and of the cavity.
pub const DEFAULT_INDEX: f64 = 3.3;

/// Convergence of the fixed-angle solver, meV.
pub const ANGLE_SOLVER_TOL: f64 = 1e-8;
pub const ANGLE_SOLVER_MAX_ITER: usize = 200;
/// Number of times a failed bracket is widened before giving up.
const BRACKET_WIDENINGS: usize = 10;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DispersionError {
    #[error("invalid parameter `{name}` = {value}: {reason}")]
    Domain { name: &'static str, value: f64, reason: &'static str },
    #[error("invalid cavity table: {0}")]
    Table(PchipError),
    #[error("wavevector {k} nm⁻¹ outside the tabulated range [{lo}, {hi}] nm⁻¹")]
    OutOfRange { k: f64, lo: f64, hi: f64 },
    #[error("cavity never reaches {e_12} meV on k ∈ [{lo}, {hi}] nm⁻¹")]
    ResonanceNotFound { e_12: f64, lo: f64, hi: f64 },
    #[error("{branch} at θ = {theta}°: no sign change of E - E_{branch}(k(E)) on [{lo}, {hi}] meV")]
    Bracket { branch: Branch, theta: f64, lo: f64, hi: f64 },
    #[error("{branch} at θ = {theta}°: no convergence after {iterations} iterations")]
    Convergence { branch: Branch, theta: f64, iterations: usize },
    #[error("empty abscissa grid")]
    EmptyGrid,
    #[error("abscissa grid must be sorted ascending")]
    UnsortedGrid,
    #[error(transparent)]
    Model(#[from] ModelError),
}

fn check(ok: bool, name: &'static str, value: f64, reason: &'static str) -> Result<(), DispersionError> {
    if ok {
        Ok(())
    } else {
        Err(DispersionError::Domain { name, value, reason })
    }
}

/// Tabulated bare-cavity dispersion with monotone cubic interpolation.
#[derive(Debug, Clone, PartialEq)]
pub struct CavityTable {
    interp: Pchip,
}

impl CavityTable {
    pub const MIN_POINTS: usize = 4;

    /// `points` are `(k [nm⁻¹], e_cav [meV])`, strictly increasing in `k`.
    pub fn new(points: &[(f64, f64)]) -> Result<Self, DispersionError> {
        if points.len() < Self::MIN_POINTS {
            return Err(DispersionError::Table(PchipError::TooFewSamples { min: Self::MIN_POINTS, got: points.len() }));
        }
        for &(k, e) in points {
            check(k.is_finite() && k >= 0.0, "k", k, "tabulated wavevectors must be >= 0")?;
            check(e.is_finite() && e > 0.0, "e_cav", e, "tabulated energies must be > 0")?;
        }
        let (ks, es): (Vec<f64>, Vec<f64>) = points.iter().copied().unzip();
        Pchip::new(ks, es).map(|interp| Self { interp }).map_err(DispersionError::Table)
    }

    pub fn points(&self) -> Vec<(f64, f64)> {
        self.interp.xs().iter().copied().zip(self.interp.ys().iter().copied()).collect()
    }

    pub fn k_range(&self) -> (f64, f64) {
        self.interp.domain()
    }
}

impl Serialize for CavityTable {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.points().serialize(s)
    }
}

impl<'de> Deserialize<'de> for CavityTable {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let points = Vec::<(f64, f64)>::deserialize(d)?;
        CavityTable::new(&points).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CavityModel {
    /// `e_cav(k) = sqrt(e_z² + (ħc k / n_cav)²)`.
    Parametric {
        e_z: f64,
        n_cav: f64,
    },
    Tabulated {
        table: CavityTable,
    },
}

impl CavityModel {
    pub fn parametric(e_z: f64, n_cav: f64) -> Result<Self, DispersionError> {
        let model = CavityModel::Parametric { e_z, n_cav };
        model.validate()?;
        Ok(model)
    }

    /// Parametric cavity whose fixed-angle bare mode crosses `e_12` at
    /// internal angle `theta_res`.
    pub fn calibrated(e_12: f64, theta_res: f64, n_prop: f64, n_cav: f64) -> Result<Self, DispersionError> {
        check(theta_res > 0.0 && theta_res < 90.0, "theta_res", theta_res, "must lie in (0, 90) degrees")?;
        let s = n_prop * theta_res.to_radians().sin() / n_cav;
        check(s < 1.0, "theta_res", theta_res, "resonance beyond the cavity light cone")?;
        Self::parametric(e_12 * (1.0 - s * s).sqrt(), n_cav)
    }

    pub fn validate(&self) -> Result<(), DispersionError> {
        match self {
            CavityModel::Parametric { e_z, n_cav } => {
                check(e_z.is_finite() && *e_z > 0.0, "e_z", *e_z, "must be > 0")?;
                check(n_cav.is_finite() && *n_cav > 0.0, "n_cav", *n_cav, "must be > 0")
            }
            CavityModel::Tabulated { .. } => Ok(()),
        }
    }

    /// Valid wavevector interval; `None` means unbounded above.
    pub fn k_range(&self) -> (f64, Option<f64>) {
        match self {
            CavityModel::Parametric { .. } => (0.0, None),
            CavityModel::Tabulated { table } => {
                let (lo, hi) = table.k_range();
                (lo, Some(hi))
            }
        }
    }
}

pub fn cavity_energy(model: &CavityModel, k: f64) -> Result<f64, DispersionError> {
    check(k.is_finite() && k >= 0.0, "k", k, "must be finite and >= 0")?;
    match model {
        CavityModel::Parametric { e_z, n_cav } => Ok(e_z.hypot(HBAR_C_MEV_NM * k / n_cav)),
        CavityModel::Tabulated { table } => table.interp.eval(k).map_err(|e| match e {
            PchipError::OutOfRange { x, lo, hi } => DispersionError::OutOfRange { k: x, lo, hi },
            other => DispersionError::Table(other),
        }),
    }
}

/// Wavevector at which the bare cavity energy equals `e_12`.
pub fn resonant_k(model: &CavityModel, e_12: f64) -> Result<f64, DispersionError> {
    check(e_12.is_finite() && e_12 > 0.0, "e_12", e_12, "must be > 0")?;
    model.validate()?;
    let f = |k: f64| cavity_energy(model, k).map(|e| e - e_12).unwrap_or(f64::NAN);
    let opts = BrentOptions { xtol: 0.0, rtol: 1e-12, max_iter: 200 };

    let (lo, hi) = match model {
        CavityModel::Parametric { e_z, n_cav } => {
            if *e_z == e_12 {
                return Ok(0.0);
            }
            if *e_z > e_12 {
                return Err(DispersionError::ResonanceNotFound { e_12, lo: 0.0, hi: f64::INFINITY });
            }
            // e_cav(k) >= ħc k / n_cav, so the crossing lies below e_12 n_cav / ħc
            (0.0, e_12 * n_cav / HBAR_C_MEV_NM)
        }
        CavityModel::Tabulated { table } => {
            // first tabulated interval whose ends straddle e_12
            let points = table.points();
            let hit = points.windows(2).find(|w| (w[0].1 - e_12) * (w[1].1 - e_12) <= 0.0);
            match hit {
                Some(w) => (w[0].0, w[1].0),
                None => {
                    let (lo, hi) = table.k_range();
                    return Err(DispersionError::ResonanceNotFound { e_12, lo, hi });
                }
            }
        }
    };
    brent(f, lo, hi, opts).map_err(|_| DispersionError::ResonanceNotFound { e_12, lo, hi })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CouplingKind {
    /// Same Rabi energy at every `k`.
    Constant,
    /// `Ω_k = Ω_res sqrt(e_12 / e_cav(k))`.
    Scaled,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CouplingModel {
    pub kind: CouplingKind,
    /// Vacuum Rabi energy at the resonant wavevector, meV.
    pub omega_r_res: f64,
}

impl CouplingModel {
    pub fn constant(omega_r_res: f64) -> Self {
        Self { kind: CouplingKind::Constant, omega_r_res }
    }

    pub fn rabi_at(&self, e_cav: f64, e_12: f64) -> f64 {
        match self.kind {
            CouplingKind::Constant => self.omega_r_res,
            CouplingKind::Scaled => self.omega_r_res * (e_12 / e_cav).sqrt(),
        }
    }
}

/// How the diamagnetic energy follows the Rabi energy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum DiamagneticRule {
    /// `D = Ω² / e_12`.
    Standard,
    /// `D = factor · Ω² / e_12`.
    Scaled { factor: f64 },
    /// `D` fixed, independent of `Ω`.
    Fixed { d_dia: f64 },
}

impl DiamagneticRule {
    pub fn energy(&self, omega_r: f64, e_12: f64) -> f64 {
        match *self {
            DiamagneticRule::Standard => model::standard_diamagnetic(omega_r, e_12),
            DiamagneticRule::Scaled { factor } => factor * model::standard_diamagnetic(omega_r, e_12),
            DiamagneticRule::Fixed { d_dia } => d_dia,
        }
    }
}

/// Physics configuration shared by all dispersion calculations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    /// Bare intersubband transition energy, meV.
    pub e_12: f64,
    pub cavity: CavityModel,
    pub coupling: CouplingModel,
    /// Refractive index of the medium light propagates in before reaching the cavity.
    pub n_prop: f64,
    pub diamagnetic: DiamagneticRule,
    pub tolerances: Tolerances,
}

impl SystemParams {
    /// 152 meV transition, parametric cavity resonant at `theta_res`,
    /// constant coupling, both indices 3.3.
    pub fn reference(omega_r: f64, theta_res: f64) -> Result<Self, DispersionError> {
        let e_12 = 152.0;
        let params = SystemParams {
            e_12,
            cavity: CavityModel::calibrated(e_12, theta_res, DEFAULT_INDEX, DEFAULT_INDEX)?,
            coupling: CouplingModel::constant(omega_r),
            n_prop: DEFAULT_INDEX,
            diamagnetic: DiamagneticRule::Standard,
            tolerances: Tolerances::default(),
        };
        params.validate()?;
        Ok(params)
    }

    pub fn with_omega(&self, omega_r: f64) -> Self {
        let mut p = self.clone();
        p.coupling.omega_r_res = omega_r;
        p
    }

    pub fn validate(&self) -> Result<(), DispersionError> {
        check(self.e_12.is_finite() && self.e_12 > 0.0, "e_12", self.e_12, "must be > 0")?;
        check(self.n_prop.is_finite() && self.n_prop > 1.0, "n_prop", self.n_prop, "must be > 1")?;
        let omega = self.coupling.omega_r_res;
        check(omega.is_finite() && omega >= 0.0, "omega_r", omega, "must be >= 0")?;
        match self.diamagnetic {
            DiamagneticRule::Scaled { factor } => {
                check(factor.is_finite() && factor >= 0.0, "factor", factor, "must be >= 0")?
            }
            DiamagneticRule::Fixed { d_dia } => {
                check(d_dia.is_finite() && d_dia >= 0.0, "d_dia", d_dia, "must be >= 0")?
            }
            DiamagneticRule::Standard => {}
        }
        self.cavity.validate()
    }

    pub fn geometry(&self, theta_int: f64) -> Result<GeometryParams, DispersionError> {
        GeometryParams::new(self.n_prop, theta_int)
    }

    pub fn mode_inputs(&self, k: f64) -> Result<ModeInputs, DispersionError> {
        let e_cav = cavity_energy(&self.cavity, k)?;
        let omega_r = self.coupling.rabi_at(e_cav, self.e_12);
        let d_dia = self.diamagnetic.energy(omega_r, self.e_12);
        Ok(ModeInputs::new(e_cav, self.e_12, omega_r, d_dia)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeometryParams {
    pub n_prop: f64,
    /// Internal incidence angle from the cavity normal, degrees.
    pub theta_int: f64,
}

impl GeometryParams {
    pub fn new(n_prop: f64, theta_int: f64) -> Result<Self, DispersionError> {
        check(n_prop.is_finite() && n_prop > 1.0, "n_prop", n_prop, "must be > 1")?;
        check(theta_int > 0.0 && theta_int < 90.0, "theta_int", theta_int, "must lie in (0, 90) degrees")?;
        Ok(Self { n_prop, theta_int })
    }

    /// nm⁻¹ per meV of photon energy.
    fn k_per_energy(&self) -> f64 {
        self.n_prop * self.theta_int.to_radians().sin() / HBAR_C_MEV_NM
    }
}

/// In-plane wavevector (nm⁻¹) of light of `energy` (meV) at the given angle.
pub fn k_of_angle_energy(geom: &GeometryParams, energy: f64) -> Result<f64, DispersionError> {
    check(energy.is_finite() && energy >= 0.0, "energy", energy, "must be >= 0")?;
    Ok(energy * geom.k_per_energy())
}

pub fn modes_at_k(
    params: &SystemParams,
    variant: HamiltonianVariant,
    k: f64,
) -> Result<PolaritonModes, DispersionError> {
    let inputs = params.mode_inputs(k)?;
    Ok(diagonalize_with(&inputs, variant, &params.tolerances)?)
}

pub fn branch_energy_at_k(
    params: &SystemParams,
    variant: HamiltonianVariant,
    k: f64,
    branch: Branch,
) -> Result<f64, DispersionError> {
    Ok(modes_at_k(params, variant, k)?.energy(branch))
}

/// Default search interval of the fixed-angle solver.
pub fn default_bracket(e_12: f64, branch: Branch) -> (f64, f64) {
    match branch {
        Branch::Lower => (0.2 * e_12, e_12),
        Branch::Upper => (e_12, 3.0 * e_12),
    }
}

/// Polariton energy observed at fixed internal angle.
pub fn branch_energy_at_angle(
    params: &SystemParams,
    variant: HamiltonianVariant,
    geom: &GeometryParams,
    branch: Branch,
) -> Result<f64, DispersionError> {
    let (lo, hi) = default_bracket(params.e_12, branch);
    branch_energy_at_angle_in(params, variant, geom, branch, lo, hi)
}

/// As [`branch_energy_at_angle`] with an explicit starting bracket. On a
/// sign failure the bracket is widened away from `e_12` (down for LP, up
/// for UP).
pub fn branch_energy_at_angle_in(
    params: &SystemParams,
    variant: HamiltonianVariant,
    geom: &GeometryParams,
    branch: Branch,
    lo: f64,
    hi: f64,
) -> Result<f64, DispersionError> {
    let theta = geom.theta_int;
    let first_error: RefCell<Option<DispersionError>> = RefCell::new(None);
    let objective = |e: f64| -> f64 {
        let value = k_of_angle_energy(geom, e).and_then(|k| branch_energy_at_k(params, variant, k, branch));
        match value {
            Ok(model) => e - model,
            Err(err) => {
                first_error.borrow_mut().get_or_insert(err);
                f64::NAN
            }
        }
    };

    // energies whose wavevector stays inside the cavity model's domain
    let per = geom.k_per_energy();
    let (k_lo, k_hi) = params.cavity.k_range();
    let e_min = k_lo / per;
    let e_max = k_hi.map_or(f64::INFINITY, |k| k / per);
    let clamp = |e: f64| e.clamp(e_min, e_max);

    let (mut lo, mut hi) = (clamp(lo), clamp(hi));
    let opts = BrentOptions { xtol: ANGLE_SOLVER_TOL, rtol: 0.0, max_iter: ANGLE_SOLVER_MAX_ITER };
    for _ in 0..=BRACKET_WIDENINGS {
        match brent(&objective, lo, hi, opts) {
            Ok(e) => return Ok(e),
            Err(RootError::NoSignChange { .. }) => {
                let (wlo, whi) = match branch {
                    Branch::Lower => (clamp(0.5 * lo), hi),
                    Branch::Upper => (lo, clamp(2.0 * hi)),
                };
                if (wlo, whi) == (lo, hi) {
                    break;
                }
                lo = wlo;
                hi = whi;
            }
            Err(RootError::MaxIterations { iterations, .. }) => {
                return Err(DispersionError::Convergence { branch, theta, iterations })
            }
            Err(RootError::NonFinite { .. }) => {
                return Err(first_error.into_inner().unwrap_or(DispersionError::Bracket { branch, theta, lo, hi }))
            }
        }
    }
    Err(DispersionError::Bracket { branch, theta, lo, hi })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DispersionPoint {
    /// Internal angle, degrees.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub theta_int: Option<f64>,
    /// In-plane wavevector, nm⁻¹.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub k: Option<f64>,
    /// meV.
    pub energy: f64,
    pub branch: Branch,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Domain {
    Angle,
    Wavevector,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointFailure {
    pub abscissa: f64,
    pub branch: Branch,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DispersionCurve {
    pub variant: HamiltonianVariant,
    pub domain: Domain,
    /// All LP points by ascending abscissa, then all UP points.
    pub points: Vec<DispersionPoint>,
    pub failures: Vec<PointFailure>,
    pub partial: bool,
}

impl DispersionCurve {
    pub fn branch(&self, branch: Branch) -> impl Iterator<Item = &DispersionPoint> {
        self.points.iter().filter(move |p| p.branch == branch)
    }
}

/// Evaluate one point; used by [`dispersion_curve`] and the fitting code.
pub fn evaluate_point(
    params: &SystemParams,
    variant: HamiltonianVariant,
    domain: Domain,
    abscissa: f64,
    branch: Branch,
) -> Result<DispersionPoint, DispersionError> {
    match domain {
        Domain::Angle => {
            let geom = params.geometry(abscissa)?;
            let energy = branch_energy_at_angle(params, variant, &geom, branch)?;
            Ok(DispersionPoint {
                theta_int: Some(abscissa),
                k: Some(k_of_angle_energy(&geom, energy)?),
                energy,
                branch,
            })
        }
        Domain::Wavevector => {
            let energy = branch_energy_at_k(params, variant, abscissa, branch)?;
            Ok(DispersionPoint { theta_int: None, k: Some(abscissa), energy, branch })
        }
    }
}

/// Both branches over a sorted grid. Points are independent; failures are
/// collected and mark the curve partial.
pub fn dispersion_curve(
    params: &SystemParams,
    variant: HamiltonianVariant,
    domain: Domain,
    grid: &[f64],
) -> Result<DispersionCurve, DispersionError> {
    if grid.is_empty() {
        return Err(DispersionError::EmptyGrid);
    }
    if grid.iter().any(|x| x.is_nan()) || grid.windows(2).any(|w| w[0] > w[1]) {
        return Err(DispersionError::UnsortedGrid);
    }
    params.validate()?;

    let jobs: Vec<(Branch, f64)> = Branch::BOTH.iter().flat_map(|&b| grid.iter().map(move |&x| (b, x))).collect();
    let results: Vec<_> =
        jobs.par_iter().map(|&(branch, x)| (branch, x, evaluate_point(params, variant, domain, x, branch))).collect();

    let mut points = Vec::with_capacity(results.len());
    let mut failures = Vec::new();
    for (branch, abscissa, r) in results {
        match r {
            Ok(p) => points.push(p),
            Err(e) => failures.push(PointFailure { abscissa, branch, message: e.to_string() }),
        }
    }
    let partial = !failures.is_empty();
    Ok(DispersionCurve { variant, domain, points, failures, partial })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const E12: f64 = 152.0;

    fn reference(omega: f64) -> SystemParams {
        SystemParams::reference(omega, 60.0).unwrap()
    }

    fn parametric_table(e_z: f64, n_cav: f64, k_max: f64, n: usize) -> CavityModel {
        let model = CavityModel::Parametric { e_z, n_cav };
        let points: Vec<(f64, f64)> = (0..n)
            .map(|i| {
                let k = k_max * i as f64 / (n - 1) as f64;
                (k, cavity_energy(&model, k).unwrap())
            })
            .collect();
        CavityModel::Tabulated { table: CavityTable::new(&points).unwrap() }
    }

    #[test]
    fn wavevector_from_angle() {
        let g = GeometryParams::new(3.3, 60.0).unwrap();
        assert_eq!(k_of_angle_energy(&g, 0.0).unwrap(), 0.0);
        let k = k_of_angle_energy(&g, 152.0).unwrap();
        let expected = 152.0 * 3.3 * 60f64.to_radians().sin() / 197_326.98;
        assert!((k - expected).abs() < 1e-18);
        assert!((k - 2.2015e-3).abs() < 1e-7, "{k}");
        // grazing incidence in vacuum-like medium reaches the light line
        let g = GeometryParams { n_prop: 1.0, theta_int: 90.0 };
        assert!((k_of_angle_energy(&g, 100.0).unwrap() - 100.0 / HBAR_C_MEV_NM).abs() < 1e-18);
    }

    #[test]
    fn geometry_validation() {
        assert!(GeometryParams::new(1.0, 30.0).is_err());
        assert!(GeometryParams::new(3.3, 0.0).is_err());
        assert!(GeometryParams::new(3.3, 90.0).is_err());
        assert!(GeometryParams::new(3.3, 45.0).is_ok());
    }

    #[test]
    fn parametric_cavity() {
        let m = CavityModel::parametric(100.0, 3.3).unwrap();
        assert_eq!(cavity_energy(&m, 0.0).unwrap(), 100.0);
        let k = 100.0 * 3.3 / HBAR_C_MEV_NM;
        assert!((cavity_energy(&m, k).unwrap() - 100.0 * 2f64.sqrt()).abs() < 1e-12);
        assert!(cavity_energy(&m, -1.0).is_err());
    }

    #[test]
    fn tabulated_tracks_parametric() {
        // 20 nodes over the wavevectors probed between 40° and 85°
        let k_max = 3.5e-3;
        let table = parametric_table(76.0, 3.3, k_max, 20);
        let exact = CavityModel::Parametric { e_z: 76.0, n_cav: 3.3 };
        for i in 0..=400 {
            let k = (k_max * i as f64 / 400.0).min(k_max);
            let d = (cavity_energy(&table, k).unwrap() - cavity_energy(&exact, k).unwrap()).abs();
            assert!(d < 0.1, "k = {k}: {d}");
        }
        assert!(matches!(cavity_energy(&table, 1.01 * k_max), Err(DispersionError::OutOfRange { .. })));
    }

    #[test]
    fn table_needs_four_points() {
        let err = CavityTable::new(&[(0.0, 1.0), (1.0, 2.0), (2.0, 3.0)]).unwrap_err();
        assert!(matches!(err, DispersionError::Table(PchipError::TooFewSamples { .. })));
    }

    #[test]
    fn resonance_location() {
        let m = CavityModel::parametric(E12, 3.3).unwrap();
        assert_eq!(resonant_k(&m, E12).unwrap(), 0.0);
        let m = CavityModel::parametric(100.0, 3.3).unwrap();
        let analytic = 3.3 * (E12 * E12 - 100.0f64 * 100.0).sqrt() / HBAR_C_MEV_NM;
        let k = resonant_k(&m, E12).unwrap();
        assert!(((k - analytic) / analytic).abs() < 1e-10);
        let table = parametric_table(100.0, 3.3, 4e-3, 20);
        let kt = resonant_k(&table, E12).unwrap();
        assert!(((kt - analytic) / analytic).abs() < 1e-4);
        assert!(matches!(resonant_k(&m, 90.0), Err(DispersionError::ResonanceNotFound { .. })));
        assert!(matches!(resonant_k(&table, 900.0), Err(DispersionError::ResonanceNotFound { .. })));
    }

    #[test]
    fn calibrated_cavity_resonates_at_requested_angle() {
        let p = reference(0.0);
        let geom = p.geometry(60.0).unwrap();
        let e = branch_energy_at_angle(&p, HamiltonianVariant::Full, &geom, Branch::Upper).unwrap();
        // decoupled: UP is max(cavity, e_12); both coincide at the resonant angle
        assert!((e - E12).abs() < 1e-7);
        match &p.cavity {
            CavityModel::Parametric { e_z, .. } => assert!((e_z - 76.0).abs() < 1e-12),
            _ => unreachable!(),
        }
    }

    #[test]
    fn decoupled_branches_at_k() {
        let p = reference(0.0);
        for k in [0.0, 1e-3, 2e-3, 3e-3] {
            let e_cav = cavity_energy(&p.cavity, k).unwrap();
            let lp = branch_energy_at_k(&p, HamiltonianVariant::Full, k, Branch::Lower).unwrap();
            assert!((lp - e_cav.min(E12)).abs() < 1e-12);
        }
    }

    #[test]
    fn resonant_rwa_at_k() {
        let p = reference(16.5);
        let k = resonant_k(&p.cavity, E12).unwrap();
        let lp = branch_energy_at_k(&p, HamiltonianVariant::NoAntiresNoDia, k, Branch::Lower).unwrap();
        let up = branch_energy_at_k(&p, HamiltonianVariant::NoAntiresNoDia, k, Branch::Upper).unwrap();
        assert!((lp - 135.5).abs() < 1e-8);
        assert!((up - 168.5).abs() < 1e-8);
    }

    #[test]
    fn decoupled_fixed_angle_solutions() {
        let p = reference(0.0);
        for theta in [45.0, 55.0, 65.0, 75.0] {
            let geom = p.geometry(theta).unwrap();
            // bare fixed-angle cavity: E = e_z / cos θ for equal indices
            let cavity = 76.0 / theta.to_radians().cos();
            let lp = branch_energy_at_angle(&p, HamiltonianVariant::Full, &geom, Branch::Lower).unwrap();
            let up = branch_energy_at_angle(&p, HamiltonianVariant::Full, &geom, Branch::Upper).unwrap();
            assert!((lp - cavity.min(E12)).abs() < 1e-7, "θ={theta}: {lp}");
            assert!((up - cavity.max(E12)).abs() < 1e-7, "θ={theta}: {up}");
        }
    }

    #[test]
    fn fixed_angle_solution_is_self_consistent_and_idempotent() {
        let p = reference(16.5);
        for v in HamiltonianVariant::ALL {
            for theta in [50.0, 60.0, 72.0] {
                let geom = p.geometry(theta).unwrap();
                for b in Branch::BOTH {
                    let e = branch_energy_at_angle(&p, v, &geom, b).unwrap();
                    let k = k_of_angle_energy(&geom, e).unwrap();
                    assert!((branch_energy_at_k(&p, v, k, b).unwrap() - e).abs() < 1e-8);
                    let again = branch_energy_at_angle_in(&p, v, &geom, b, e - 0.5, e + 0.5).unwrap();
                    assert!((again - e).abs() < 1e-8);
                }
            }
        }
    }

    #[test]
    fn fixed_angle_branches_straddle_transition() {
        let p = reference(16.5);
        for i in 0..=45 {
            let theta = 40.0 + i as f64;
            let geom = p.geometry(theta).unwrap();
            let lp = branch_energy_at_angle(&p, HamiltonianVariant::Full, &geom, Branch::Lower).unwrap();
            let up = branch_energy_at_angle(&p, HamiltonianVariant::Full, &geom, Branch::Upper).unwrap();
            assert!(lp < E12 && E12 < up);
            assert!(up - lp > 33.0);
        }
    }

    #[test]
    fn bracket_failure_beyond_light_cone() {
        // n_prop sin θ > n_cav: the photon line outruns E and UP never closes
        let mut p = reference(16.5);
        p.n_prop = 4.5;
        let geom = p.geometry(80.0).unwrap();
        let err = branch_energy_at_angle(&p, HamiltonianVariant::Full, &geom, Branch::Upper).unwrap_err();
        assert!(matches!(err, DispersionError::Bracket { branch: Branch::Upper, .. }), "{err:?}");
    }

    #[test]
    fn tabulated_and_parametric_branches_agree() {
        let p = reference(16.5);
        let (e_z, n_cav) = match p.cavity {
            CavityModel::Parametric { e_z, n_cav } => (e_z, n_cav),
            _ => unreachable!(),
        };
        let mut t = p.clone();
        t.cavity = parametric_table(e_z, n_cav, 6e-3, 24);
        for theta in [45.0, 55.0, 60.0, 65.0, 75.0] {
            for b in Branch::BOTH {
                let geom = p.geometry(theta).unwrap();
                let ep = branch_energy_at_angle(&p, HamiltonianVariant::Full, &geom, b).unwrap();
                let et = branch_energy_at_angle(&t, HamiltonianVariant::Full, &geom, b).unwrap();
                assert!((ep - et).abs() < 0.2, "θ={theta} {b}: {ep} vs {et}");
            }
        }
    }

    #[test]
    fn tabulated_out_of_range_is_an_error() {
        let mut p = reference(16.5);
        p.cavity = parametric_table(76.0, 3.3, 1e-3, 10);
        let geom = p.geometry(70.0).unwrap();
        assert!(branch_energy_at_angle(&p, HamiltonianVariant::Full, &geom, Branch::Upper).is_err());
    }

    #[test]
    fn curve_edge_cases() {
        let p = reference(16.5);
        assert_eq!(dispersion_curve(&p, HamiltonianVariant::Full, Domain::Angle, &[]), Err(DispersionError::EmptyGrid));
        assert_eq!(
            dispersion_curve(&p, HamiltonianVariant::Full, Domain::Angle, &[60.0, 50.0]),
            Err(DispersionError::UnsortedGrid)
        );
        let c = dispersion_curve(&p, HamiltonianVariant::Full, Domain::Angle, &[60.0]).unwrap();
        assert_eq!(c.points.len(), 2);
        let geom = p.geometry(60.0).unwrap();
        assert_eq!(
            c.points[0].energy,
            branch_energy_at_angle(&p, HamiltonianVariant::Full, &geom, Branch::Lower).unwrap()
        );
        let c = dispersion_curve(&p, HamiltonianVariant::Full, Domain::Wavevector, &[1e-3]).unwrap();
        assert_eq!(c.points[1].energy, branch_energy_at_k(&p, HamiltonianVariant::Full, 1e-3, Branch::Upper).unwrap());
    }

    #[test]
    fn curve_collects_failures() {
        let mut p = reference(16.5);
        p.cavity = parametric_table(76.0, 3.3, 2.2e-3, 10);
        let c = dispersion_curve(&p, HamiltonianVariant::Full, Domain::Wavevector, &[1e-3, 2e-3, 3e-3]).unwrap();
        assert!(c.partial);
        assert_eq!(c.failures.len(), 2);
        assert_eq!(c.points.len(), 4);
    }

    #[test]
    fn hundred_angle_sweep_is_monotone() {
        let p = reference(16.5);
        let grid: Vec<f64> = (0..100).map(|i| 55.0 + 30.0 * i as f64 / 99.0).collect();
        let c = dispersion_curve(&p, HamiltonianVariant::Full, Domain::Angle, &grid).unwrap();
        assert!(!c.partial);
        for b in Branch::BOTH {
            let e: Vec<f64> = c.branch(b).map(|p| p.energy).collect();
            assert_eq!(e.len(), 100);
            assert!(e.windows(2).all(|w| w[1] > w[0]), "{b} not monotone");
        }
        // LP flattens toward the transition, UP keeps rising
        let lp: Vec<f64> = c.branch(Branch::Lower).map(|p| p.energy).collect();
        assert!(lp[99] < E12);
        assert!(lp[99] - lp[98] < 0.2 * (lp[1] - lp[0]));
        let up: Vec<f64> = c.branch(Branch::Upper).map(|p| p.energy).collect();
        assert!(up[99] - up[0] > 100.0);
    }

    #[test]
    fn scaled_coupling_equals_constant_at_resonance() {
        let c = CouplingModel { kind: CouplingKind::Scaled, omega_r_res: 16.5 };
        assert_eq!(c.rabi_at(E12, E12), 16.5);
        assert!(c.rabi_at(2.0 * E12, E12) < 16.5);
    }

    proptest! {
        #[test]
        fn wavevector_increases_with_energy_and_angle(
            n in 1.01f64..4.0,
            t1 in 1.0f64..89.0, dt in 0.01f64..10.0,
            e1 in 1.0f64..500.0, de in 0.01f64..50.0,
        ) {
            let t2 = (t1 + dt).min(89.99);
            prop_assume!(t2 > t1);
            let g1 = GeometryParams::new(n, t1).unwrap();
            let g2 = GeometryParams::new(n, t2).unwrap();
            prop_assert!(k_of_angle_energy(&g1, e1 + de).unwrap() > k_of_angle_energy(&g1, e1).unwrap());
            prop_assert!(k_of_angle_energy(&g2, e1).unwrap() > k_of_angle_energy(&g1, e1).unwrap());
        }
    }
}
