//! Synthetic stationary channels and pilot weighting matrices.
//!
//! A [`Dccm`] is built directly from a prescribed eigen-profile with
//! Haar-random eigenvectors. Pilots are semi-unitary `N_A × N_P` matrices:
//! round 1 uses a fixed DFT beam pattern, later rounds use seeded random
//! orthonormalized Gaussian draws.

use std::f64::consts::PI;
use std::fmt;

use nalgebra::SymmetricEigen;

use crate::error::{arg_err, dim_err, Error, Result};
use crate::linalg::{hermitian_deviation, hermitian_part, orthonormality_error, orthonormalize_columns};
use crate::rng::{complex_normal_matrix, derive_seed, rng_from_seed, tag};
use crate::{CMat, C64};

/// Downlink channel covariance matrix `C = U diag(σ) Uᴴ`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dccm {
    matrix: CMat,
    eigenvalues: Vec<f64>,
    eigenvectors: CMat,
}

impl Dccm {
    /// Assemble from orthonormal eigenvectors (columns) and a descending,
    /// non-negative eigenvalue list.
    pub fn from_eigen(eigenvectors: CMat, eigenvalues: Vec<f64>) -> Result<Self> {
        if eigenvectors.ncols() != eigenvalues.len() {
            return Err(dim_err(format!(
                "{} eigenvectors but {} eigenvalues",
                eigenvectors.ncols(),
                eigenvalues.len()
            )));
        }
        if eigenvalues.iter().any(|s| !s.is_finite() || *s < 0.0) {
            return Err(arg_err("eigenvalues must be finite and non-negative"));
        }
        if eigenvalues.windows(2).any(|w| w[0] < w[1]) {
            return Err(arg_err("eigenvalues must be sorted descending"));
        }
        let dev = orthonormality_error(&eigenvectors);
        if dev > 1e-10 {
            return Err(Error::NotOrthonormal(dev));
        }
        let mut scaled = eigenvectors.clone();
        for (j, s) in eigenvalues.iter().enumerate() {
            scaled.column_mut(j).scale_mut(*s);
        }
        let matrix = hermitian_part(&(scaled * eigenvectors.adjoint()));
        Ok(Self { matrix, eigenvalues, eigenvectors })
    }

    pub fn matrix(&self) -> &CMat {
        &self.matrix
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn eigenvectors(&self) -> &CMat {
        &self.eigenvectors
    }

    pub fn n_antennas(&self) -> usize {
        self.matrix.nrows()
    }

    /// Number of strictly positive eigenvalues.
    pub fn rank(&self) -> usize {
        self.eigenvalues.iter().filter(|s| **s > 0.0).count()
    }

    pub fn trace(&self) -> f64 {
        self.eigenvalues.iter().sum()
    }

    /// Largest eigenvalue.
    pub fn principal_eigenvalue(&self) -> f64 {
        self.eigenvalues.first().copied().unwrap_or(0.0)
    }
}

/// Random covariance with exactly the requested eigenvalues.
pub fn make_dccm(n_antennas: usize, n_user: usize, eigen_profile: &[f64], seed: u64) -> Result<Dccm> {
    if n_user == 0 || n_user > n_antennas {
        return Err(dim_err(format!("n_user {n_user} must be in 1..={n_antennas}")));
    }
    if eigen_profile.len() != n_user {
        return Err(dim_err(format!(
            "eigen profile has {} entries for n_user {n_user}",
            eigen_profile.len()
        )));
    }
    if eigen_profile.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
        return Err(arg_err("eigen profile must be finite and positive"));
    }
    if eigen_profile.windows(2).any(|w| w[0] < w[1]) {
        return Err(arg_err("eigen profile must be descending"));
    }
    let u = random_semiunitary(n_antennas, n_user, derive_seed(seed, tag::DCCM, 0))?;
    Dccm::from_eigen(u, eigen_profile.to_vec())
}

/// Seeded `rows × cols` matrix with orthonormal columns.
pub fn random_semiunitary(rows: usize, cols: usize, seed: u64) -> Result<CMat> {
    if cols > rows {
        return Err(dim_err(format!("semi-unitary {rows}x{cols} needs cols <= rows")));
    }
    let mut rng = rng_from_seed(seed);
    let g = complex_normal_matrix(&mut rng, rows, cols);
    orthonormalize_columns(&g)
}

/// Where a pilot matrix came from; written to the feedback CSV.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PilotSource {
    /// Entry of the pre-defined beam set.
    BeamSet(usize),
    /// Random draw from this seed.
    Seeded(u64),
    /// Built by a caller (constructed test instances, rotated pilots).
    Custom,
}

impl fmt::Display for PilotSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PilotSource::BeamSet(i) => write!(f, "beam:{i}"),
            PilotSource::Seeded(s) => write!(f, "seed:{s}"),
            PilotSource::Custom => f.write_str("custom"),
        }
    }
}

/// Pilot weighting matrix `Q(t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PilotMatrix {
    matrix: CMat,
    round: usize,
    source: PilotSource,
}

impl PilotMatrix {
    pub fn new(matrix: CMat, round: usize, source: PilotSource) -> Result<Self> {
        if round == 0 {
            return Err(arg_err("rounds are numbered from 1"));
        }
        let dev = orthonormality_error(&matrix);
        if dev > 1e-10 {
            return Err(Error::NotOrthonormal(dev));
        }
        Ok(Self { matrix, round, source })
    }

    pub fn matrix(&self) -> &CMat {
        &self.matrix
    }

    pub fn round(&self) -> usize {
        self.round
    }

    pub fn source(&self) -> PilotSource {
        self.source
    }

    pub fn n_antennas(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn n_ports(&self) -> usize {
        self.matrix.ncols()
    }

    pub(crate) fn with_round(mut self, round: usize) -> Self {
        self.round = round;
        self
    }
}

/// First `n_ports` columns of the normalized `n_antennas`-point DFT matrix.
pub fn dft_beam_pilot(n_antennas: usize, n_ports: usize) -> Result<PilotMatrix> {
    if n_ports == 0 || n_ports > n_antennas {
        return Err(dim_err(format!("{n_ports} ports for {n_antennas} antennas")));
    }
    let scale = 1.0 / (n_antennas as f64).sqrt();
    let m = CMat::from_fn(n_antennas, n_ports, |n, k| {
        C64::from_polar(scale, 2.0 * PI * (n * k) as f64 / n_antennas as f64)
    });
    PilotMatrix::new(m, 1, PilotSource::BeamSet(0))
}

/// Pilot for communication round `round` (1-based).
pub fn pilot_for_round(
    round: usize,
    n_antennas: usize,
    n_ports: usize,
    beam_set: &[PilotMatrix],
    seed: u64,
) -> Result<PilotMatrix> {
    match round {
        0 => Err(arg_err("rounds are numbered from 1")),
        1 => {
            let first = beam_set.first().ok_or_else(|| arg_err("empty beam set at round 1"))?;
            if first.n_antennas() != n_antennas || first.n_ports() != n_ports {
                return Err(dim_err(format!(
                    "beam set entry is {}x{}, expected {n_antennas}x{n_ports}",
                    first.n_antennas(),
                    first.n_ports()
                )));
            }
            Ok(first.clone().with_round(1))
        }
        t => {
            let s = derive_seed(seed, tag::PILOT, t as u64);
            let m = random_semiunitary(n_antennas, n_ports, s)?;
            PilotMatrix::new(m, t, PilotSource::Seeded(s))
        }
    }
}

/// `Q(t)ᴴ C Q(t)`.
pub fn effective_gram(dccm: &Dccm, pilot: &PilotMatrix) -> Result<CMat> {
    if dccm.n_antennas() != pilot.n_antennas() {
        return Err(dim_err(format!(
            "covariance is {0}x{0} but pilot has {1} rows",
            dccm.n_antennas(),
            pilot.n_antennas()
        )));
    }
    let q = pilot.matrix();
    Ok(hermitian_part(&(q.adjoint() * dccm.matrix() * q)))
}

/// Eigendecomposition of a Hermitian matrix, values descending.
#[derive(Debug, Clone)]
pub struct EigenPair {
    pub values: Vec<f64>,
    pub vectors: CMat,
}

pub fn hermitian_eig(m: &CMat) -> Result<EigenPair> {
    if m.nrows() != m.ncols() {
        return Err(dim_err(format!("{}x{} matrix is not square", m.nrows(), m.ncols())));
    }
    let scale = m.iter().map(|z| z.norm()).fold(1.0_f64, f64::max);
    let dev = hermitian_deviation(m);
    if dev > 1e-10 * scale {
        return Err(Error::NotHermitian(dev));
    }
    let n = m.nrows();
    if n == 0 {
        return Ok(EigenPair { values: Vec::new(), vectors: CMat::zeros(0, 0) });
    }
    let eig = SymmetricEigen::new(hermitian_part(m));
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = CMat::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    Ok(EigenPair { values, vectors })
}
