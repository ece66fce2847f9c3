//! Hopfield-Bogoliubov model of a single cavity-photon / intersubband mode
//! pair at in-plane wavevector `k`.
//!
//! The Hamiltonian per wavevector is
//!
//! ```text
//! H = e_cav (a†a + 1/2) + e_12 b†b + i Ω (a†b - a b†)        resonant
//!   + D (a†a + a a†)                                      diamagnetic
//!   + i Ω (a b₋ - a† b†₋) + D (a a₋ + a† a†₋)              anti-resonant
//! ```
//!
//! with all energies in meV (ħ = 1). A polariton annihilation operator
//! `p = w a + x b + y a†₋ + z b†₋` obeys `[p, H] = E p`, which is the
//! eigenvalue problem `K c = E c` for `c = (w, x, y, z)`; `K` is the matrix
//! returned by [`build_bogoliubov_matrix`]. Physical branches are the
//! eigenvectors with positive symplectic norm `|w|² + |x|² - |y|² - |z|²`.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, Matrix2, Matrix4};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numerics::eigen::{eig, EigenError, EigenPair};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("invalid parameter `{name}` = {value}: {reason}")]
    Domain { name: &'static str, value: f64, reason: &'static str },
    #[error("{branch} branch is unstable: squared excitation energy {e_squared} meV² is not positive")]
    Unstable { branch: Branch, e_squared: f64 },
    #[error("eigenvalue pairing residual {residual:e} meV exceeds {tolerance:e} meV")]
    Pairing { residual: f64, tolerance: f64 },
    #[error("symplectic normalization residual {residual:e} exceeds {tolerance:e}")]
    Normalization { residual: f64, tolerance: f64 },
    #[error("could not identify two positive-norm branches (found {found})")]
    BranchCount { found: usize },
    #[error(transparent)]
    Eigen(#[from] EigenError),
}

/// Polariton branch label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Branch {
    #[serde(rename = "LP")]
    Lower,
    #[serde(rename = "UP")]
    Upper,
}

impl Branch {
    pub const BOTH: [Branch; 2] = [Branch::Lower, Branch::Upper];

    pub fn label(self) -> &'static str {
        match self {
            Branch::Lower => "LP",
            Branch::Upper => "UP",
        }
    }
}

impl fmt::Display for Branch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Branch {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "LP" => Ok(Branch::Lower),
            "UP" => Ok(Branch::Upper),
            other => Err(format!("unknown branch `{other}` (expected LP or UP)")),
        }
    }
}

/// Which terms of the light-matter Hamiltonian are retained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum HamiltonianVariant {
    /// Resonant, diamagnetic and anti-resonant terms.
    Full,
    /// Resonant and diamagnetic terms.
    NoAntires,
    /// Resonant terms only (rotating-wave approximation).
    NoAntiresNoDia,
}

impl HamiltonianVariant {
    pub const ALL: [HamiltonianVariant; 3] =
        [HamiltonianVariant::Full, HamiltonianVariant::NoAntires, HamiltonianVariant::NoAntiresNoDia];

    pub fn has_antiresonant(self) -> bool {
        matches!(self, HamiltonianVariant::Full)
    }

    pub fn has_diamagnetic(self) -> bool {
        !matches!(self, HamiltonianVariant::NoAntiresNoDia)
    }

    pub fn label(self) -> &'static str {
        match self {
            HamiltonianVariant::Full => "FULL",
            HamiltonianVariant::NoAntires => "NO_ANTIRES",
            HamiltonianVariant::NoAntiresNoDia => "NO_ANTIRES_NO_DIA",
        }
    }
}

impl fmt::Display for HamiltonianVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for HamiltonianVariant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().replace('-', "_").as_str() {
            "FULL" => Ok(HamiltonianVariant::Full),
            "NO_ANTIRES" => Ok(HamiltonianVariant::NoAntires),
            "NO_ANTIRES_NO_DIA" | "RWA" => Ok(HamiltonianVariant::NoAntiresNoDia),
            _ => Err(format!("unknown Hamiltonian variant `{s}` (expected FULL, NO_ANTIRES or NO_ANTIRES_NO_DIA)")),
        }
    }
}

/// Diamagnetic energy `Ω²/e_12` of a quantum-well intersubband transition.
pub fn standard_diamagnetic(omega_r: f64, e_12: f64) -> f64 {
    omega_r * omega_r / e_12
}

/// Parameters of one mode pair, all in meV.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModeInputs {
    /// Bare cavity photon energy at this wavevector.
    pub e_cav: f64,
    /// Bare intersubband transition energy.
    pub e_12: f64,
    /// Vacuum Rabi energy.
    pub omega_r: f64,
    /// Diamagnetic energy.
    pub d_dia: f64,
}

impl ModeInputs {
    pub fn new(e_cav: f64, e_12: f64, omega_r: f64, d_dia: f64) -> Result<Self, ModelError> {
        let inputs = Self { e_cav, e_12, omega_r, d_dia };
        inputs.validate()?;
        Ok(inputs)
    }

    /// Inputs with `d_dia = omega_r² / e_12`.
    pub fn with_standard_dia(e_cav: f64, e_12: f64, omega_r: f64) -> Result<Self, ModelError> {
        Self::new(e_cav, e_12, omega_r, standard_diamagnetic(omega_r, e_12))
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        positive("e_cav", self.e_cav)?;
        positive("e_12", self.e_12)?;
        non_negative("omega_r", self.omega_r)?;
        non_negative("d_dia", self.d_dia)?;
        Ok(())
    }

    fn scale(&self) -> f64 {
        self.e_cav.max(self.e_12).max(self.omega_r).max(self.d_dia)
    }
}

pub(crate) fn positive(name: &'static str, value: f64) -> Result<(), ModelError> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(ModelError::Domain { name, value, reason: "must be finite and > 0" })
    }
}

pub(crate) fn non_negative(name: &'static str, value: f64) -> Result<(), ModelError> {
    if value.is_finite() && value >= 0.0 {
        Ok(())
    } else {
        Err(ModelError::Domain { name, value, reason: "must be finite and >= 0" })
    }
}

/// Bogoliubov coefficients of one polariton branch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Coefficients {
    pub photon: Complex64,
    pub matter: Complex64,
    pub photon_anomalous: Complex64,
    pub matter_anomalous: Complex64,
}

impl Coefficients {
    fn from_slice(c: &[Complex64]) -> Self {
        Self { photon: c[0], matter: c[1], photon_anomalous: c[2], matter_anomalous: c[3] }
    }

    fn as_array(&self) -> [Complex64; 4] {
        [self.photon, self.matter, self.photon_anomalous, self.matter_anomalous]
    }

    pub fn symplectic_norm(&self) -> f64 {
        self.photon.norm_sqr() + self.matter.norm_sqr()
            - self.photon_anomalous.norm_sqr()
            - self.matter_anomalous.norm_sqr()
    }

    /// Photon weight `|w|²` (Hopfield coefficient).
    pub fn photon_fraction(&self) -> f64 {
        self.photon.norm_sqr()
    }

    /// Modulus of the symplectic inner product with another branch.
    pub fn overlap(&self, other: &Coefficients) -> f64 {
        let a = self.as_array();
        let b = other.as_array();
        let s = a[0].conj() * b[0] + a[1].conj() * b[1] - a[2].conj() * b[2] - a[3].conj() * b[3];
        s.norm()
    }

    /// Rescale to unit symplectic norm and rotate so the photon-normal
    /// coefficient (or, if it vanishes, the matter-normal one) is real and
    /// non-negative.
    fn normalized(self) -> Self {
        let norm = self.symplectic_norm().sqrt();
        let pivot = if self.photon.norm() > 1e-12 * norm { self.photon } else { self.matter };
        let phase = if pivot.norm() > 0.0 { pivot.conj() / pivot.norm() } else { Complex64::new(1.0, 0.0) };
        let k = phase / norm;
        let mut out = Self {
            photon: self.photon * k,
            matter: self.matter * k,
            photon_anomalous: self.photon_anomalous * k,
            matter_anomalous: self.matter_anomalous * k,
        };
        // the pivot is real by construction; drop rounding residue
        if self.photon.norm() > 1e-12 * norm {
            out.photon = Complex64::new(out.photon.re, 0.0);
        } else {
            out.matter = Complex64::new(out.matter.re, 0.0);
        }
        out
    }
}

/// Residual thresholds applied by [`diagonalize_with`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    /// Max `|E_i + E_j|` over ± pairs, meV (scaled up for energies above 1 eV).
    pub pairing: f64,
    /// Max deviation of the symplectic norm from 1.
    pub normalization: f64,
    /// Relative energy gap under which two branches are treated as degenerate.
    pub degeneracy: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { pairing: 1e-9, normalization: 1e-9, degeneracy: 1e-12 }
    }
}

/// Per-wavevector diagonalization result.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolaritonModes {
    pub e_lp: f64,
    pub e_up: f64,
    pub coeff_lp: Coefficients,
    pub coeff_up: Coefficients,
}

impl PolaritonModes {
    pub fn energy(&self, branch: Branch) -> f64 {
        match branch {
            Branch::Lower => self.e_lp,
            Branch::Upper => self.e_up,
        }
    }

    pub fn coefficients(&self, branch: Branch) -> &Coefficients {
        match branch {
            Branch::Lower => &self.coeff_lp,
            Branch::Upper => &self.coeff_up,
        }
    }

    /// Reorder the coefficient sets of a degenerate pair to follow `previous`
    /// (the neighbouring point of a sweep). Non-degenerate results are
    /// returned unchanged since ascending order already fixes the labels.
    pub fn align_to(&self, previous: &PolaritonModes, tol: &Tolerances) -> PolaritonModes {
        let gap = self.e_up - self.e_lp;
        if gap > tol.degeneracy * self.e_up.max(1.0) {
            return *self;
        }
        let keep = self.coeff_lp.overlap(&previous.coeff_lp) + self.coeff_up.overlap(&previous.coeff_up);
        let swap = self.coeff_up.overlap(&previous.coeff_lp) + self.coeff_lp.overlap(&previous.coeff_up);
        if swap > keep {
            PolaritonModes { coeff_lp: self.coeff_up, coeff_up: self.coeff_lp, ..*self }
        } else {
            *self
        }
    }
}

/// Virtual excitation numbers of the interacting ground state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroundStatePopulations {
    pub n_photon: f64,
    pub n_matter: f64,
}

/// Coefficient-space dynamical matrix for `(a_k, b_k, a†_-k, b†_-k)`.
pub fn build_bogoliubov_matrix(
    inputs: &ModeInputs,
    variant: HamiltonianVariant,
) -> Result<Matrix4<Complex64>, ModelError> {
    inputs.validate()?;
    let re = |x: f64| Complex64::new(x, 0.0);
    let ig = Complex64::new(0.0, inputs.omega_r);
    let d = if variant.has_diamagnetic() { inputs.d_dia } else { 0.0 };
    let photon = re(inputs.e_cav + 2.0 * d);
    let matter = re(inputs.e_12);

    let mut k = Matrix4::<Complex64>::zeros();
    // normal block
    k[(0, 0)] = photon;
    k[(0, 1)] = -ig;
    k[(1, 0)] = ig;
    k[(1, 1)] = matter;
    k[(2, 2)] = -photon;
    k[(2, 3)] = -ig;
    k[(3, 2)] = ig;
    k[(3, 3)] = -matter;
    if variant.has_antiresonant() {
        // anomalous blocks: pair creation/annihilation
        k[(0, 2)] = re(-2.0 * d);
        k[(0, 3)] = -ig;
        k[(1, 2)] = -ig;
        k[(2, 0)] = re(2.0 * d);
        k[(2, 1)] = -ig;
        k[(3, 0)] = -ig;
    }
    Ok(k)
}

/// Diagonalize with the default [`Tolerances`].
pub fn diagonalize(inputs: &ModeInputs, variant: HamiltonianVariant) -> Result<PolaritonModes, ModelError> {
    diagonalize_with(inputs, variant, &Tolerances::default())
}

pub fn diagonalize_with(
    inputs: &ModeInputs,
    variant: HamiltonianVariant,
    tol: &Tolerances,
) -> Result<PolaritonModes, ModelError> {
    let k = build_bogoliubov_matrix(inputs, variant)?;
    let scale = inputs.scale();

    let anomalous_free = (0..2).all(|i| (2..4).all(|j| k[(i, j)] == ZERO && k[(j, i)] == ZERO));
    let branches = if anomalous_free { number_conserving_branches(&k)? } else { bogoliubov_branches(&k, scale, tol)? };

    for (_, c) in &branches {
        let residual = (c.symplectic_norm() - 1.0).abs();
        if residual > tol.normalization {
            return Err(ModelError::Normalization { residual, tolerance: tol.normalization });
        }
    }

    let [(e0, c0), (e1, c1)] = branches;
    let (mut lp, mut up) = if e0 <= e1 { ((e0, c0), (e1, c1)) } else { ((e1, c1), (e0, c0)) };
    if (up.0 - lp.0) <= tol.degeneracy * up.0.max(1.0) && up.1.photon_fraction() > lp.1.photon_fraction() {
        // degenerate: photon-like coefficients go to the first branch
        std::mem::swap(&mut lp.1, &mut up.1);
    }
    if lp.0 <= 0.0 {
        return Err(ModelError::Unstable { branch: Branch::Lower, e_squared: -(lp.0 * lp.0) });
    }
    Ok(PolaritonModes { e_lp: lp.0, e_up: up.0, coeff_lp: lp.1, coeff_up: up.1 })
}

/// Block-diagonal case: only the 2x2 normal block needs diagonalizing.
fn number_conserving_branches(k: &Matrix4<Complex64>) -> Result<[(f64, Coefficients); 2], ModelError> {
    let block: Matrix2<Complex64> = k.fixed_view::<2, 2>(0, 0).into_owned();
    let pairs = eig(&DMatrix::from_iterator(2, 2, block.iter().copied()))?;
    let mut out = pairs.iter().map(|p| {
        let c =
            Coefficients { photon: p.vector[0], matter: p.vector[1], photon_anomalous: ZERO, matter_anomalous: ZERO };
        (p.value.re, c.normalized())
    });
    Ok([out.next().unwrap(), out.next().unwrap()])
}

fn bogoliubov_branches(
    k: &Matrix4<Complex64>,
    scale: f64,
    tol: &Tolerances,
) -> Result<[(f64, Coefficients); 2], ModelError> {
    let pairs = eig(&DMatrix::from_iterator(4, 4, k.iter().copied()))?;

    // E² of each ± pair; a softened mode shows up as a negative value
    let imag_tol = 1e-9 * scale.max(1.0);
    if pairs.iter().any(|p| p.value.im.abs() > imag_tol) {
        let mut squares: Vec<f64> = pairs.iter().map(|p| (p.value * p.value).re).collect();
        squares.sort_by(f64::total_cmp);
        // each E² appears twice
        let lowest = squares[0];
        let second = squares[2];
        let (branch, e_squared) = if lowest < 0.0 { (Branch::Lower, lowest) } else { (Branch::Upper, second) };
        return Err(ModelError::Unstable { branch, e_squared });
    }

    let mut values: Vec<f64> = pairs.iter().map(|p| p.value.re).collect();
    values.sort_by(f64::total_cmp);
    let residual = (values[0] + values[3]).abs().max((values[1] + values[2]).abs());
    let pairing_tol = tol.pairing * (scale / 1e3).max(1.0);
    if residual > pairing_tol {
        return Err(ModelError::Pairing { residual, tolerance: pairing_tol });
    }

    let physical: Vec<&EigenPair> = pairs
        .iter()
        .filter(|p| {
            let c = Coefficients::from_slice(p.vector.as_slice());
            c.symplectic_norm() > 0.0
        })
        .collect();
    if physical.len() != 2 {
        return Err(ModelError::BranchCount { found: physical.len() });
    }
    let mut out = physical.iter().map(|p| {
        let c = Coefficients::from_slice(p.vector.as_slice());
        (p.value.re, c.normalized())
    });
    Ok([out.next().unwrap(), out.next().unwrap()])
}

/// Exact one-excitation spectrum of the resonant Hamiltonian.
pub fn rwa_eigenvalues(e_cav: f64, e_12: f64, omega_r: f64) -> Result<(f64, f64), ModelError> {
    positive("e_cav", e_cav)?;
    positive("e_12", e_12)?;
    non_negative("omega_r", omega_r)?;
    let mean = 0.5 * (e_cav + e_12);
    let half_gap = 0.5 * (e_cav - e_12).hypot(2.0 * omega_r);
    Ok((mean - half_gap, mean + half_gap))
}

/// Spectrum with the diamagnetic term but no anti-resonant terms; the
/// diamagnetic term only moves the photon energy up by `2 d_dia`.
pub fn dia_rwa_eigenvalues(e_cav: f64, e_12: f64, omega_r: f64, d_dia: f64) -> Result<(f64, f64), ModelError> {
    non_negative("d_dia", d_dia)?;
    rwa_eigenvalues(e_cav + 2.0 * d_dia, e_12, omega_r)
}

pub fn ground_state_populations(modes: &PolaritonModes) -> GroundStatePopulations {
    GroundStatePopulations {
        n_photon: modes.coeff_lp.photon_anomalous.norm_sqr() + modes.coeff_up.photon_anomalous.norm_sqr(),
        n_matter: modes.coeff_lp.matter_anomalous.norm_sqr() + modes.coeff_up.matter_anomalous.norm_sqr(),
    }
}
