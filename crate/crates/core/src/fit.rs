//! Single-parameter fits of the vacuum Rabi energy and the
//! deviation-versus-coupling map of the reduced Hamiltonians.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dispersion::{
    self, dispersion_curve, evaluate_point, CavityModel, DispersionCurve, DispersionError, DispersionPoint, Domain,
    PointFailure, SystemParams,
};
use crate::model::{Branch, HamiltonianVariant};
use crate::numerics::golden::golden_section;

/// Coarse minima whose RMS lies within this fraction of the best one are
/// reported as ambiguous.
const AMBIGUITY_FRACTION: f64 = 0.05;
const GOLDEN_MAX_ITER: usize = 500;
pub const MAX_DEVIATION_RATIO: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FitError {
    #[error("invalid fit setting `{name}` = {value}: {reason}")]
    Config { name: &'static str, value: f64, reason: &'static str },
    #[error("no data points")]
    EmptyData,
    #[error("data point {index} has no {missing} abscissa")]
    MissingAbscissa { index: usize, missing: &'static str },
    #[error("{} data point(s) could not be resolved: {}", .0.len(), describe(.0))]
    Unresolvable(Vec<PointFailure>),
    #[error("objective was not finite anywhere on [{lo}, {hi}] meV")]
    NoFiniteObjective { lo: f64, hi: f64 },
    #[error(transparent)]
    Dispersion(#[from] DispersionError),
}

fn describe(failures: &[PointFailure]) -> String {
    failures.iter().map(|f| format!("{} at {}: {}", f.branch, f.abscissa, f.message)).collect::<Vec<_>>().join("; ")
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FitConfig {
    /// Search interval for Ω_R, meV.
    pub omega_r_bounds: (f64, f64),
    pub coarse_grid_points: usize,
    /// Final golden-section bracket width, meV.
    pub refine_tolerance: f64,
    pub variant: HamiltonianVariant,
    pub domain: Domain,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            omega_r_bounds: (0.0, 50.0),
            coarse_grid_points: 64,
            refine_tolerance: 1e-6,
            variant: HamiltonianVariant::Full,
            domain: Domain::Angle,
        }
    }
}

impl FitConfig {
    pub const MIN_GRID_POINTS: usize = 16;

    pub fn validate(&self) -> Result<(), FitError> {
        let (lo, hi) = self.omega_r_bounds;
        let err = |name, value, reason| Err(FitError::Config { name, value, reason });
        if !(lo.is_finite() && lo >= 0.0) {
            return err("omega_r_bounds.low", lo, "must be >= 0");
        }
        if !(hi.is_finite() && hi > lo) {
            return err("omega_r_bounds.high", hi, "must exceed the lower bound");
        }
        if self.coarse_grid_points < Self::MIN_GRID_POINTS {
            return err("coarse_grid_points", self.coarse_grid_points as f64, "must be >= 16");
        }
        if !(self.refine_tolerance.is_finite() && self.refine_tolerance > 0.0) {
            return err("refine_tolerance", self.refine_tolerance, "must be > 0");
        }
        Ok(())
    }

    fn coarse_grid(&self) -> Vec<f64> {
        let (lo, hi) = self.omega_r_bounds;
        let n = self.coarse_grid_points;
        (0..n).map(|i| if i + 1 == n { hi } else { lo + (hi - lo) * i as f64 / (n - 1) as f64 }).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RmsSample {
    pub omega_r: f64,
    /// `+inf` where the model could not be evaluated.
    pub rms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub variant: HamiltonianVariant,
    pub domain: Domain,
    pub omega_r_star: f64,
    pub rms_star: f64,
    /// Every objective evaluation, sorted by Ω_R.
    pub rms_curve: Vec<RmsSample>,
    /// Model at `omega_r_star` over the data abscissae.
    pub fitted_curve: DispersionCurve,
    pub n_points_used: usize,
    pub warnings: Vec<String>,
}

fn abscissa(point: &DispersionPoint, index: usize, domain: Domain) -> Result<f64, FitError> {
    match domain {
        Domain::Angle => point.theta_int.ok_or(FitError::MissingAbscissa { index, missing: "angle" }),
        Domain::Wavevector => point.k.ok_or(FitError::MissingAbscissa { index, missing: "wavevector" }),
    }
}

/// Root-mean-square model error over all points, both branches pooled.
pub fn rms_deviation(
    data: &[DispersionPoint],
    params: &SystemParams,
    variant: HamiltonianVariant,
    domain: Domain,
) -> Result<f64, FitError> {
    if data.is_empty() {
        return Err(FitError::EmptyData);
    }
    let xs = data.iter().enumerate().map(|(i, p)| abscissa(p, i, domain)).collect::<Result<Vec<_>, _>>()?;
    let mut sum = 0.0;
    let mut failures = Vec::new();
    for (p, &x) in data.iter().zip(&xs) {
        match evaluate_point(params, variant, domain, x, p.branch) {
            Ok(model) => sum += (model.energy - p.energy).powi(2),
            Err(e) => failures.push(PointFailure { abscissa: x, branch: p.branch, message: e.to_string() }),
        }
    }
    if !failures.is_empty() {
        return Err(FitError::Unresolvable(failures));
    }
    Ok((sum / data.len() as f64).sqrt())
}

/// Coarse scan of Ω_R over the configured bounds followed by golden-section
/// refinement around the best coarse sample.
pub fn fit_rabi(data: &[DispersionPoint], params: &SystemParams, config: &FitConfig) -> Result<FitResult, FitError> {
    config.validate()?;
    params.validate()?;
    if data.is_empty() {
        return Err(FitError::EmptyData);
    }
    for (i, p) in data.iter().enumerate() {
        abscissa(p, i, config.domain)?;
    }
    let variant = config.variant;
    let objective = |omega: f64| -> f64 {
        rms_deviation(data, &params.with_omega(omega), variant, config.domain).unwrap_or(f64::INFINITY)
    };

    let grid = config.coarse_grid();
    let coarse: Vec<RmsSample> =
        grid.par_iter().map(|&omega_r| RmsSample { omega_r, rms: objective(omega_r) }).collect();
    let (lo, hi) = config.omega_r_bounds;
    let best_index = (0..coarse.len())
        .filter(|&i| coarse[i].rms.is_finite())
        .min_by(|&a, &b| coarse[a].rms.total_cmp(&coarse[b].rms))
        .ok_or(FitError::NoFiniteObjective { lo, hi })?;

    let mut warnings = Vec::new();
    let minima = coarse_minima(&coarse);
    let best_rms = coarse[best_index].rms;
    let close: Vec<&RmsSample> = minima
        .iter()
        .map(|&i| &coarse[i])
        .filter(|s| s.rms <= best_rms + AMBIGUITY_FRACTION * best_rms.abs())
        .collect();
    if close.len() > 1 {
        let listed: Vec<String> =
            close.iter().map(|s| format!("Ω_R = {} meV (rms {} meV)", s.omega_r, s.rms)).collect();
        warnings.push(format!("ambiguous fit: coarse minima within 5%: {}", listed.join(", ")));
    }

    let a = grid[best_index.saturating_sub(1)];
    let b = grid[(best_index + 1).min(grid.len() - 1)];
    let refined = golden_section(objective, a, b, config.refine_tolerance, GOLDEN_MAX_ITER);

    let mut rms_curve = coarse;
    rms_curve.extend(refined.samples.iter().map(|s| RmsSample { omega_r: s.x, rms: s.value }));
    rms_curve.sort_by(|p, q| p.omega_r.total_cmp(&q.omega_r));
    let best = rms_curve.iter().copied().min_by(|p, q| p.rms.total_cmp(&q.rms)).expect("coarse grid is non-empty");

    if best.omega_r - lo <= config.refine_tolerance || hi - best.omega_r <= config.refine_tolerance {
        warnings.push(format!("minimum at the search bound Ω_R = {} meV; widen omega_r_bounds", best.omega_r));
    }

    let mut abscissae: Vec<f64> =
        data.iter().enumerate().map(|(i, p)| abscissa(p, i, config.domain)).collect::<Result<_, _>>()?;
    abscissae.sort_by(f64::total_cmp);
    abscissae.dedup();
    let fitted_curve = dispersion_curve(&params.with_omega(best.omega_r), variant, config.domain, &abscissae)?;

    Ok(FitResult {
        variant,
        domain: config.domain,
        omega_r_star: best.omega_r,
        rms_star: best.rms,
        rms_curve,
        fitted_curve,
        n_points_used: data.len(),
        warnings,
    })
}

/// Indices of local minima of the coarse scan, endpoints included.
fn coarse_minima(samples: &[RmsSample]) -> Vec<usize> {
    let n = samples.len();
    (0..n)
        .filter(|&i| {
            let v = samples[i].rms;
            v.is_finite() && (i == 0 || v < samples[i - 1].rms) && (i + 1 == n || v <= samples[i + 1].rms)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantFailure {
    pub variant: HamiltonianVariant,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    /// Sorted by ascending `rms_star`.
    pub results: Vec<FitResult>,
    pub failures: Vec<VariantFailure>,
}

/// Fit every Hamiltonian variant with the same settings.
pub fn compare_variants(
    data: &[DispersionPoint],
    params: &SystemParams,
    config: &FitConfig,
) -> Result<Comparison, FitError> {
    config.validate()?;
    if data.is_empty() {
        return Err(FitError::EmptyData);
    }
    let mut results = Vec::new();
    let mut failures = Vec::new();
    for variant in HamiltonianVariant::ALL {
        match fit_rabi(data, params, &FitConfig { variant, ..*config }) {
            Ok(r) => results.push(r),
            Err(e) => failures.push(VariantFailure { variant, message: e.to_string() }),
        }
    }
    results.sort_by(|a, b| a.rms_star.total_cmp(&b.rms_star));
    Ok(Comparison { results, failures })
}

/// Relative deviation of the reduced Hamiltonians from the full one at a
/// single coupling ratio, percent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeviationRow {
    pub ratio: f64,
    pub omega_r: f64,
    pub full_lp: f64,
    pub full_up: f64,
    pub no_antires_lp: f64,
    pub no_antires_up: f64,
    pub no_antires_no_dia_lp: f64,
    pub no_antires_no_dia_up: f64,
}

impl DeviationRow {
    pub fn deviations(&self) -> [f64; 4] {
        [self.no_antires_lp, self.no_antires_up, self.no_antires_no_dia_lp, self.no_antires_no_dia_up]
    }

    pub fn max_abs_deviation(&self) -> f64 {
        self.deviations().iter().fold(0.0, |m, d| m.max(d.abs()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioFailure {
    pub ratio: f64,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviationTable {
    pub theta_res: f64,
    pub rows: Vec<DeviationRow>,
    pub failures: Vec<RatioFailure>,
    /// Observations that break the expected ordering or monotonicity.
    pub flags: Vec<String>,
}

pub const DEVIATION_LABELS: [&str; 4] =
    ["no_antires_lp", "no_antires_up", "no_antires_no_dia_lp", "no_antires_no_dia_up"];

/// Fixed-angle energies at `theta_res` for each `Ω_R = r e_12`, compared
/// across variants. A parametric cavity is recalibrated to resonate at
/// `theta_res`; a tabulated one is used as given.
pub fn deviation_vs_coupling(
    template: &SystemParams,
    ratios: &[f64],
    theta_res: f64,
) -> Result<DeviationTable, FitError> {
    for &r in ratios {
        if !(0.0..=MAX_DEVIATION_RATIO).contains(&r) {
            return Err(FitError::Config { name: "ratio", value: r, reason: "must lie in [0, 0.5]" });
        }
    }
    let mut params = template.clone();
    if let CavityModel::Parametric { n_cav, .. } = params.cavity {
        params.cavity = CavityModel::calibrated(params.e_12, theta_res, params.n_prop, n_cav)?;
    }
    params.validate()?;
    let geom = params.geometry(theta_res)?;

    let evaluated: Vec<(f64, Result<DeviationRow, DispersionError>)> = ratios
        .par_iter()
        .map(|&ratio| {
            let omega_r = ratio * params.e_12;
            let p = params.with_omega(omega_r);
            let energy = |v, b| dispersion::branch_energy_at_angle(&p, v, &geom, b);
            let row = (|| {
                let full_lp = energy(HamiltonianVariant::Full, Branch::Lower)?;
                let full_up = energy(HamiltonianVariant::Full, Branch::Upper)?;
                let pct = |e: f64, full: f64| 100.0 * (e - full) / full;
                Ok(DeviationRow {
                    ratio,
                    omega_r,
                    full_lp,
                    full_up,
                    no_antires_lp: pct(energy(HamiltonianVariant::NoAntires, Branch::Lower)?, full_lp),
                    no_antires_up: pct(energy(HamiltonianVariant::NoAntires, Branch::Upper)?, full_up),
                    no_antires_no_dia_lp: pct(energy(HamiltonianVariant::NoAntiresNoDia, Branch::Lower)?, full_lp),
                    no_antires_no_dia_up: pct(energy(HamiltonianVariant::NoAntiresNoDia, Branch::Upper)?, full_up),
                })
            })();
            (ratio, row)
        })
        .collect();

    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for (ratio, r) in evaluated {
        match r {
            Ok(row) => rows.push(row),
            Err(e) => failures.push(RatioFailure { ratio, message: e.to_string() }),
        }
    }
    let flags = deviation_flags(&rows);
    Ok(DeviationTable { theta_res, rows, failures, flags })
}

fn deviation_flags(rows: &[DeviationRow]) -> Vec<String> {
    let mut flags = Vec::new();
    for row in rows {
        for (branch, partial, both) in
            [("LP", row.no_antires_lp, row.no_antires_no_dia_lp), ("UP", row.no_antires_up, row.no_antires_no_dia_up)]
        {
            if partial.abs() > both.abs() {
                flags.push(format!(
                    "r = {}: {branch} deviation without anti-resonant terms ({partial:.6}%) exceeds the one without both ({both:.6}%)",
                    row.ratio
                ));
            }
        }
    }
    let mut sorted: Vec<&DeviationRow> = rows.iter().collect();
    sorted.sort_by(|a, b| a.ratio.total_cmp(&b.ratio));
    for (c, label) in DEVIATION_LABELS.iter().enumerate() {
        for w in sorted.windows(2) {
            if w[1].ratio > w[0].ratio && w[1].deviations()[c].abs() < w[0].deviations()[c].abs() {
                flags.push(format!("{label}: |deviation| decreases between r = {} and r = {}", w[0].ratio, w[1].ratio));
            }
        }
    }
    flags
}

/// Model points over `abscissae` for both branches, used to build
/// synthetic data sets.
pub fn synthesize(
    params: &SystemParams,
    variant: HamiltonianVariant,
    domain: Domain,
    abscissae: &[f64],
) -> Result<Vec<DispersionPoint>, FitError> {
    let curve = dispersion_curve(params, variant, domain, abscissae)?;
    if curve.partial {
        return Err(FitError::Unresolvable(curve.failures));
    }
    Ok(curve.points)
}
