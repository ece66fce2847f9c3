//! Brute-force verifier: exact diagonalization of the two-mode light-matter
//! Hamiltonian on a truncated Fock basis `|n_a, n_b⟩`.
//!
//! The `±k` pair is represented by a single effective photon mode `a` and a
//! single matter mode `b`; the quadratic Hamiltonian built that way has the
//! same dynamical matrix, hence the same excitation energies and
//! ground-state populations, as the four-mode problem.
//!
//! All terms change the total boson number by 0 or ±2, so the Hamiltonian
//! splits into even and odd parity sectors. The ground state is the lowest
//! even state; the two polariton energies are the two lowest odd states
//! measured from it.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use rayon::prelude::*;

use crate::model::{
    diagonalize_with, ground_state_populations, HamiltonianVariant, ModeInputs, ModelError, Tolerances,
};

/// Largest basis accepted by [`build_fock_hamiltonian`].
pub const MAX_BASIS: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FockError {
    #[error("invalid oracle configuration: {0}")]
    Config(String),
    #[error("basis of {dim} states exceeds the limit of {limit}")]
    Dimension { dim: usize, limit: usize },
    #[error(
        "oracle not converged at cutoffs {}/{}: coarse (LP {}, UP {}, n_photon {}) vs fine (LP {}, UP {}, n_photon {})",
        fine.cutoff_photon, fine.cutoff_matter, coarse.e_lp, coarse.e_up, coarse.n_photon_gs,
        fine.e_lp, fine.e_up, fine.n_photon_gs
    )]
    NotConverged { coarse: Box<OracleSpectrum>, fine: Box<OracleSpectrum> },
    #[error("Lanczos iteration did not converge within {steps} steps")]
    Lanczos { steps: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FockConfig {
    /// Highest photon occupation kept.
    pub n_max_photon: usize,
    /// Highest matter occupation kept.
    pub n_max_matter: usize,
    /// Agreement required between cutoffs `n` and `n + 4`, meV (and occupancy).
    pub convergence_tol: f64,
    /// The cutoff ladder stops here.
    pub max_cutoff: usize,
    /// Parity sectors larger than this use Lanczos instead of dense diagonalization.
    pub dense_limit: usize,
}

impl Default for FockConfig {
    fn default() -> Self {
        Self { n_max_photon: 16, n_max_matter: 16, convergence_tol: 1e-8, max_cutoff: 60, dense_limit: 2000 }
    }
}

impl FockConfig {
    pub fn validate(&self) -> Result<(), FockError> {
        if self.n_max_photon < 4 || self.n_max_matter < 4 {
            return Err(FockError::Config("cutoffs must be >= 4".into()));
        }
        if !(self.convergence_tol.is_finite() && self.convergence_tol > 0.0) {
            return Err(FockError::Config("convergence_tol must be > 0".into()));
        }
        if self.max_cutoff < self.n_max_photon.max(self.n_max_matter) + 4 {
            return Err(FockError::Config("max_cutoff must leave room for one refinement step".into()));
        }
        Ok(())
    }
}

/// Sparse Hermitian matrix over the product basis, stored by rows.
#[derive(Debug, Clone, PartialEq)]
pub struct FockHamiltonian {
    n_max_photon: usize,
    n_max_matter: usize,
    rows: Vec<Vec<(usize, Complex64)>>,
}

impl FockHamiltonian {
    pub fn dim(&self) -> usize {
        self.rows.len()
    }

    pub fn index(&self, n_a: usize, n_b: usize) -> usize {
        n_a * (self.n_max_matter + 1) + n_b
    }

    /// Occupations `(n_a, n_b)` of basis state `i`.
    pub fn occupations(&self, i: usize) -> (usize, usize) {
        (i / (self.n_max_matter + 1), i % (self.n_max_matter + 1))
    }

    pub fn cutoffs(&self) -> (usize, usize) {
        (self.n_max_photon, self.n_max_matter)
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.rows[i].iter().filter(|(c, _)| *c == j).map(|(_, v)| *v).sum()
    }

    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, Complex64)> + '_ {
        self.rows.iter().enumerate().flat_map(|(i, row)| row.iter().map(move |&(j, v)| (i, j, v)))
    }

    pub fn to_dense(&self) -> DMatrix<Complex64> {
        let mut m = DMatrix::zeros(self.dim(), self.dim());
        for (i, j, v) in self.entries() {
            m[(i, j)] += v;
        }
        m
    }

    /// Largest `|H_ij - conj(H_ji)|`.
    pub fn hermiticity_residual(&self) -> f64 {
        self.entries().map(|(i, j, v)| (v - self.get(j, i).conj()).norm()).fold(0.0, f64::max)
    }

    /// Frobenius norm of all elements linking even and odd total boson number.
    pub fn cross_parity_norm(&self) -> f64 {
        self.entries()
            .filter(|&(i, j, _)| self.parity(i) != self.parity(j))
            .map(|(_, _, v)| v.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    fn parity(&self, i: usize) -> usize {
        let (a, b) = self.occupations(i);
        (a + b) % 2
    }
}

pub fn build_fock_hamiltonian(
    inputs: &ModeInputs,
    variant: HamiltonianVariant,
    n_max_photon: usize,
    n_max_matter: usize,
) -> Result<FockHamiltonian, FockError> {
    inputs.validate()?;
    let dim = (n_max_photon + 1).saturating_mul(n_max_matter + 1);
    if dim > MAX_BASIS {
        return Err(FockError::Dimension { dim, limit: MAX_BASIS });
    }

    let stride = n_max_matter + 1;
    let idx = |a: usize, b: usize| a * stride + b;
    let sq = |x: usize| (x as f64).sqrt();
    let omega = inputs.omega_r;
    let d = if variant.has_diamagnetic() { inputs.d_dia } else { 0.0 };
    let i_omega = Complex64::new(0.0, omega);

    // rows[target] holds (source, <target|H|source>)
    let mut rows: Vec<Vec<(usize, Complex64)>> = vec![Vec::new(); dim];
    let mut push = |target: usize, source: usize, value: Complex64| {
        if value != Complex64::new(0.0, 0.0) {
            rows[target].push((source, value));
        }
    };

    for a in 0..=n_max_photon {
        for b in 0..=n_max_matter {
            let src = idx(a, b);
            let (fa, fb) = (a as f64, b as f64);
            // photon (with zero point), matter, diamagnetic a†a + a a† = 2 n_a + 1
            let diag = inputs.e_cav * (fa + 0.5) + inputs.e_12 * fb + d * (2.0 * fa + 1.0);
            push(src, src, Complex64::new(diag, 0.0));

            // i Ω a† b
            if a < n_max_photon && b > 0 {
                push(idx(a + 1, b - 1), src, i_omega * sq((a + 1) * b));
            }
            // -i Ω a b†
            if a > 0 && b < n_max_matter {
                push(idx(a - 1, b + 1), src, -i_omega * sq(a * (b + 1)));
            }

            if variant.has_antiresonant() {
                // i Ω a b
                if a > 0 && b > 0 {
                    push(idx(a - 1, b - 1), src, i_omega * sq(a * b));
                }
                // -i Ω a† b†
                if a < n_max_photon && b < n_max_matter {
                    push(idx(a + 1, b + 1), src, -i_omega * sq((a + 1) * (b + 1)));
                }
                // D a a
                if a >= 2 {
                    push(idx(a - 2, b), src, Complex64::new(d * sq(a * (a - 1)), 0.0));
                }
                // D a† a†
                if a + 2 <= n_max_photon {
                    push(idx(a + 2, b), src, Complex64::new(d * sq((a + 1) * (a + 2)), 0.0));
                }
            }
        }
    }

    for row in &mut rows {
        row.sort_by_key(|&(c, _)| c);
    }
    Ok(FockHamiltonian { n_max_photon, n_max_matter, rows })
}

/// Oracle result at one pair of cutoffs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleSpectrum {
    pub e_lp: f64,
    pub e_up: f64,
    pub n_photon_gs: f64,
    pub n_matter_gs: f64,
    pub ground_energy: f64,
    pub cutoff_photon: usize,
    pub cutoff_matter: usize,
    /// Set when the estimate agrees with the one at cutoffs - 4.
    pub converged: bool,
}

impl OracleSpectrum {
    fn max_discrepancy(&self, other: &OracleSpectrum) -> f64 {
        [
            (self.e_lp - other.e_lp).abs(),
            (self.e_up - other.e_up).abs(),
            (self.n_photon_gs - other.n_photon_gs).abs(),
            (self.n_matter_gs - other.n_matter_gs).abs(),
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

/// Climb the cutoff ladder in steps of 4 until two consecutive estimates agree.
pub fn oracle_spectrum(
    inputs: &ModeInputs,
    variant: HamiltonianVariant,
    config: &FockConfig,
) -> Result<OracleSpectrum, FockError> {
    config.validate()?;
    let (mut n_a, mut n_b) = (config.n_max_photon, config.n_max_matter);
    let mut coarse = truncated_spectrum(inputs, variant, n_a, n_b, config.dense_limit)?;
    loop {
        n_a += 4;
        n_b += 4;
        let fine = truncated_spectrum(inputs, variant, n_a, n_b, config.dense_limit)?;
        if fine.max_discrepancy(&coarse) <= config.convergence_tol {
            return Ok(OracleSpectrum { converged: true, ..fine });
        }
        if n_a.max(n_b) + 4 > config.max_cutoff {
            return Err(FockError::NotConverged { coarse: Box::new(coarse), fine: Box::new(fine) });
        }
        coarse = fine;
    }
}

/// Single estimate at fixed cutoffs (no convergence check).
pub fn truncated_spectrum(
    inputs: &ModeInputs,
    variant: HamiltonianVariant,
    n_max_photon: usize,
    n_max_matter: usize,
    dense_limit: usize,
) -> Result<OracleSpectrum, FockError> {
    let h = build_fock_hamiltonian(inputs, variant, n_max_photon, n_max_matter)?;
    let even = Sector::extract(&h, 0);
    let odd = Sector::extract(&h, 1);

    let (ground_values, ground_vector) = even.lowest(1, dense_limit)?;
    let (odd_values, _) = odd.lowest(2, dense_limit)?;
    let e0 = ground_values[0];

    let (mut n_photon, mut n_matter) = (0.0, 0.0);
    for (local, &global) in even.states.iter().enumerate() {
        let (a, b) = h.occupations(global);
        let w = ground_vector[local] * ground_vector[local];
        n_photon += w * a as f64;
        n_matter += w * b as f64;
    }

    Ok(OracleSpectrum {
        e_lp: odd_values[0] - e0,
        e_up: odd_values[1] - e0,
        n_photon_gs: n_photon,
        n_matter_gs: n_matter,
        ground_energy: e0,
        cutoff_photon: n_max_photon,
        cutoff_matter: n_max_matter,
        converged: false,
    })
}

/// One parity sector, gauge-transformed to a real symmetric matrix.
///
/// With `U = diag(i^{n_b})`, every element of `U† H U` is real: the `±iΩ`
/// couplings change `n_b` by one and pick up a compensating factor of `i`.
struct Sector {
    states: Vec<usize>,
    rows: Vec<Vec<(usize, f64)>>,
}

impl Sector {
    fn extract(h: &FockHamiltonian, parity: usize) -> Self {
        let states: Vec<usize> = (0..h.dim()).filter(|&i| h.parity(i) == parity).collect();
        let mut local = vec![usize::MAX; h.dim()];
        for (l, &g) in states.iter().enumerate() {
            local[g] = l;
        }
        let gauge = |i: usize| -> Complex64 {
            match h.occupations(i).1 % 4 {
                0 => Complex64::new(1.0, 0.0),
                1 => Complex64::new(0.0, 1.0),
                2 => Complex64::new(-1.0, 0.0),
                _ => Complex64::new(0.0, -1.0),
            }
        };
        let rows = states
            .iter()
            .map(|&g| {
                h.rows[g]
                    .iter()
                    .filter(|(c, _)| local[*c] != usize::MAX)
                    .map(|&(c, v)| {
                        let t = gauge(g).conj() * v * gauge(c);
                        debug_assert!(t.im.abs() <= 1e-12 * v.norm().max(1.0));
                        (local[c], t.re)
                    })
                    .collect()
            })
            .collect();
        Sector { states, rows }
    }

    fn dim(&self) -> usize {
        self.states.len()
    }

    fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(self.dim(), self.rows.iter().map(|row| row.iter().map(|&(c, v)| v * x[c]).sum::<f64>()))
    }

    /// Lowest `count` eigenvalues (ascending) and the eigenvector of the lowest.
    fn lowest(&self, count: usize, dense_limit: usize) -> Result<(Vec<f64>, DVector<f64>), FockError> {
        if self.dim() <= dense_limit {
            self.lowest_dense(count)
        } else {
            lanczos_lowest(self, count)
        }
    }

    fn lowest_dense(&self, count: usize) -> Result<(Vec<f64>, DVector<f64>), FockError> {
        let n = self.dim();
        let mut m = DMatrix::<f64>::zeros(n, n);
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, v) in row {
                m[(i, j)] += v;
            }
        }
        let eig = SymmetricEigen::new(m);
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&p, &q| eig.eigenvalues[p].total_cmp(&eig.eigenvalues[q]));
        let values = order.iter().take(count).map(|&i| eig.eigenvalues[i]).collect();
        Ok((values, eig.eigenvectors.column(order[0]).into_owned()))
    }
}

/// Lanczos with full reorthogonalization for the low end of a large sector.
fn lanczos_lowest(sector: &Sector, count: usize) -> Result<(Vec<f64>, DVector<f64>), FockError> {
    const MAX_STEPS: usize = 400;
    const TOL: f64 = 1e-11;
    let n = sector.dim();
    let steps_cap = MAX_STEPS.min(n);

    // deterministic start vector with weight on every state
    let mut q = DVector::from_fn(n, |i, _| 1.0 + ((i * 7919) % 101) as f64 / 101.0);
    q /= q.norm();
    let mut basis: Vec<DVector<f64>> = vec![q];
    let mut alpha: Vec<f64> = Vec::new();
    let mut beta: Vec<f64> = Vec::new();

    for step in 0..steps_cap {
        let mut w = sector.apply(&basis[step]);
        let a = basis[step].dot(&w);
        alpha.push(a);
        // two passes of classical Gram-Schmidt
        for _ in 0..2 {
            for v in &basis {
                let proj = v.dot(&w);
                w.axpy(-proj, v, 1.0);
            }
        }
        let b = w.norm();

        let m = alpha.len();
        if m > count || b < TOL {
            let mut t = DMatrix::<f64>::zeros(m, m);
            for i in 0..m {
                t[(i, i)] = alpha[i];
                if i + 1 < m {
                    t[(i, i + 1)] = beta[i];
                    t[(i + 1, i)] = beta[i];
                }
            }
            let eig = SymmetricEigen::new(t);
            let mut order: Vec<usize> = (0..m).collect();
            order.sort_by(|&p, &r| eig.eigenvalues[p].total_cmp(&eig.eigenvalues[r]));
            let scale = eig.eigenvalues.amax().max(1.0);
            let converged = order.iter().take(count).all(|&i| (b * eig.eigenvectors[(m - 1, i)]).abs() <= TOL * scale);
            if converged || b < TOL {
                if m < count {
                    break;
                }
                let values = order.iter().take(count).map(|&i| eig.eigenvalues[i]).collect();
                let s = eig.eigenvectors.column(order[0]);
                let mut x = DVector::<f64>::zeros(n);
                for (j, v) in basis.iter().enumerate() {
                    x.axpy(s[j], v, 1.0);
                }
                let norm = x.norm();
                return Ok((values, x / norm));
            }
        }
        beta.push(b);
        basis.push(w / b);
    }
    Err(FockError::Lanczos { steps: steps_cap })
}

/// Coupling ratios Ω_R/e_12 and cavity detunings (meV) of the standard
/// oracle comparison.
pub const CHECK_RATIOS: [f64; 5] = [0.01, 0.05, 0.11, 0.2, 0.3];
pub const CHECK_DETUNINGS: [f64; 3] = [-20.0, 0.0, 20.0];
/// Agreement required between the Bogoliubov solution and the oracle.
pub const CHECK_THRESHOLD: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleCase {
    pub ratio: f64,
    pub detuning: f64,
    pub e_lp: f64,
    pub e_up: f64,
    pub n_photon: f64,
    pub oracle: Option<OracleSpectrum>,
    /// Largest of the energy and photon-number differences.
    pub discrepancy: f64,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub e_12: f64,
    pub variant: HamiltonianVariant,
    pub threshold: f64,
    pub cases: Vec<OracleCase>,
    pub max_discrepancy: f64,
    pub passed: bool,
}

/// Compare the Bogoliubov solution with the truncated-Fock oracle at
/// `e_cav = e_12 + detuning`, `Ω_R = ratio e_12`, standard diamagnetic term.
pub fn oracle_check(
    e_12: f64,
    ratios: &[f64],
    detunings: &[f64],
    variant: HamiltonianVariant,
    config: &FockConfig,
    tolerances: &Tolerances,
    threshold: f64,
) -> Result<OracleReport, FockError> {
    config.validate()?;
    let jobs: Vec<(f64, f64)> = ratios.iter().flat_map(|&r| detunings.iter().map(move |&d| (r, d))).collect();
    let cases: Vec<OracleCase> = jobs
        .par_iter()
        .map(|&(ratio, detuning)| {
            let mut case = OracleCase {
                ratio,
                detuning,
                e_lp: f64::NAN,
                e_up: f64::NAN,
                n_photon: f64::NAN,
                oracle: None,
                discrepancy: f64::INFINITY,
                error: None,
            };
            let mut run = || -> Result<(), FockError> {
                let inputs = ModeInputs::with_standard_dia(e_12 + detuning, e_12, ratio * e_12)?;
                let modes = diagonalize_with(&inputs, variant, tolerances)?;
                case.e_lp = modes.e_lp;
                case.e_up = modes.e_up;
                case.n_photon = ground_state_populations(&modes).n_photon;
                let oracle = oracle_spectrum(&inputs, variant, config)?;
                case.discrepancy = [
                    (oracle.e_lp - case.e_lp).abs(),
                    (oracle.e_up - case.e_up).abs(),
                    (oracle.n_photon_gs - case.n_photon).abs(),
                ]
                .into_iter()
                .fold(0.0, f64::max);
                case.oracle = Some(oracle);
                Ok(())
            };
            if let Err(e) = run() {
                case.error = Some(e.to_string());
            }
            case
        })
        .collect();
    let max_discrepancy = cases.iter().map(|c| c.discrepancy).fold(0.0, f64::max);
    let passed = cases.iter().all(|c| c.error.is_none() && c.discrepancy < threshold);
    Ok(OracleReport { e_12, variant, threshold, cases, max_discrepancy, passed })
}
