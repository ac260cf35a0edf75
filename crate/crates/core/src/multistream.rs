//! Sequential multi-stream estimation.
//!
//! Stream `k` is estimated inside the orthogonal complement of the streams
//! already found: with `B_k` an orthonormal basis of `null(Ŵ_{k−1}ᴴ)`, the
//! substitution `w_k = B_k u_k` turns the orthogonality constraint into an
//! unconstrained single-stream problem whose effective pilots are
//! `B_kᴴ Q(t)`. Each stage gets its own regularization weight.

use crate::am_estimator::{run_am, AmConfig, AmProblem};
use crate::bayes_tuner::{tune_lambda, LambdaChoice, TunerConfig};
use crate::channel_model::hermitian_eig;
use crate::codebook::Codebook;
use crate::error::{arg_err, dim_err, Error, Result};
use crate::feedback::{partition_cqi, FeedbackRecord, PartitionMode};
use crate::linalg::orthonormality_error;
use crate::{CMat, CVec};

/// Orthonormal basis of the complement of previously estimated beams.
#[derive(Debug, Clone)]
pub struct NullBasis {
    matrix: CMat,
    against: CMat,
    identity: bool,
}

impl NullBasis {
    pub fn identity(n_antennas: usize) -> Self {
        Self {
            matrix: CMat::identity(n_antennas, n_antennas),
            against: CMat::zeros(n_antennas, 0),
            identity: true,
        }
    }

    /// `N_A × (N_A − k + 1)`.
    pub fn matrix(&self) -> &CMat {
        &self.matrix
    }

    /// Stacked prior estimates `Ŵ_{k−1}`.
    pub fn against(&self) -> &CMat {
        &self.against
    }

    pub fn width(&self) -> usize {
        self.matrix.ncols()
    }

    /// `Bᴴ x`.
    pub fn reduce(&self, x: &CVec) -> CVec {
        if self.identity {
            x.clone()
        } else {
            self.matrix.ad_mul(x)
        }
    }

    /// `B u`.
    pub fn lift(&self, u: &CVec) -> CVec {
        if self.identity {
            u.clone()
        } else {
            &self.matrix * u
        }
    }

    /// `Bᴴ P`.
    pub fn reduce_matrix(&self, p: &CMat) -> CMat {
        if self.identity {
            p.clone()
        } else {
            self.matrix.ad_mul(p)
        }
    }
}

pub fn null_basis(prior: &[CVec], n_antennas: usize) -> Result<NullBasis> {
    if prior.is_empty() {
        return Ok(NullBasis::identity(n_antennas));
    }
    if prior.len() >= n_antennas {
        return Err(dim_err(format!("{} prior beams leave no room in dimension {n_antennas}", prior.len())));
    }
    if prior.iter().any(|v| v.len() != n_antennas) {
        return Err(dim_err("prior beam length differs from antenna count"));
    }
    let w = CMat::from_columns(prior);
    let dev = orthonormality_error(&w);
    if dev > 1e-8 {
        return Err(Error::NotOrthonormal(dev));
    }
    let projector = CMat::identity(n_antennas, n_antennas) - &w * w.adjoint();
    let eig = hermitian_eig(&projector)?;
    let width = n_antennas - prior.len();
    let matrix = eig.vectors.columns(0, width).into_owned();
    Ok(NullBasis { matrix, against: w, identity: false })
}

/// Orthonormal beamforming vectors, one column per stream.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamMatrix {
    columns: CMat,
}

impl BeamMatrix {
    pub fn new(columns: CMat) -> Result<Self> {
        let dev = orthonormality_error(&columns);
        if dev > 1e-8 {
            return Err(Error::NotOrthonormal(dev));
        }
        Ok(Self { columns })
    }

    pub fn from_vectors(vectors: &[CVec]) -> Result<Self> {
        if vectors.is_empty() {
            return Err(arg_err("beam matrix needs at least one beam"));
        }
        Self::new(CMat::from_columns(vectors))
    }

    pub fn matrix(&self) -> &CMat {
        &self.columns
    }

    pub fn n_streams(&self) -> usize {
        self.columns.ncols()
    }

    pub fn column(&self, k: usize) -> CVec {
        self.columns.column(k).into_owned()
    }
}

/// Regularization weight source.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LambdaPolicy {
    Auto,
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimatorConfig {
    pub lambda: LambdaPolicy,
    pub tuner: TunerConfig,
    pub am: AmConfig,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self { lambda: LambdaPolicy::Auto, tuner: TunerConfig::default(), am: AmConfig::default() }
    }
}

/// Per-stream starting point, in full `N_A` coordinates.
#[derive(Debug, Clone)]
pub struct StreamStart {
    /// AM initial iterate.
    pub init_w: CVec,
    /// Beam used to freeze the phases for evidence maximization.
    pub reference_w: CVec,
    pub alpha0: f64,
    pub beta0: f64,
}

#[derive(Debug, Clone)]
pub struct SubproblemOutcome {
    /// Unit-norm beam in `N_A` coordinates.
    pub beam: CVec,
    /// Unnormalized iterate `B_k u_k`, kept for warm starts.
    pub iterate: CVec,
    pub lambda: f64,
    pub choice: Option<LambdaChoice>,
    pub dimension: usize,
    pub am_iterations: usize,
    pub am_converged: bool,
}

/// Solve stage `layer` (0-based) against `targets` (the per-stream CQIs
/// `η_k(t)`, one per record).
pub fn solve_subproblem_k(
    records: &[FeedbackRecord],
    codebook: &Codebook,
    layer: usize,
    targets: &[f64],
    basis: &NullBasis,
    start: &StreamStart,
    config: &EstimatorConfig,
) -> Result<SubproblemOutcome> {
    if records.len() != targets.len() {
        return Err(dim_err(format!("{} records for {} targets", records.len(), targets.len())));
    }
    let n_antennas = basis.matrix().nrows();
    if start.init_w.len() != n_antennas || start.reference_w.len() != n_antennas {
        return Err(dim_err("stream start vectors do not match the antenna count"));
    }
    let pilots: Vec<CMat> = records
        .iter()
        .map(|r| {
            if r.pilot.n_antennas() != n_antennas {
                return Err(dim_err("pilot rows differ from basis dimension"));
            }
            Ok(basis.reduce_matrix(r.pilot.matrix()))
        })
        .collect::<Result<_>>()?;
    let codewords = records
        .iter()
        .map(|r| codebook.column(r.pmi, layer))
        .collect::<Result<Vec<_>>>()?;
    let problem = AmProblem::from_parts(&pilots, &codewords, targets, 1.0)?;

    let (lambda, choice) = match config.lambda {
        LambdaPolicy::Fixed(v) => (v, None),
        LambdaPolicy::Auto => {
            let reference = basis.reduce(&start.reference_w);
            let c = tune_lambda(&problem, &reference, start.alpha0, start.beta0, &config.tuner);
            (c.lambda, Some(c))
        }
    };
    let problem = problem.with_lambda(lambda)?;
    let out = run_am(&problem, &basis.reduce(&start.init_w), &config.am)?;
    let iterate = basis.lift(&out.state.w);
    let beam = basis.lift(&out.beam);
    let norm = beam.norm();
    Ok(SubproblemOutcome {
        beam: beam.unscale(norm),
        iterate,
        lambda,
        choice,
        dimension: problem.dim(),
        am_iterations: out.state.iteration,
        am_converged: out.converged,
    })
}

#[derive(Debug, Clone)]
pub struct MultistreamOutcome {
    pub beams: BeamMatrix,
    pub streams: Vec<SubproblemOutcome>,
}

/// Partition every CQI, then solve the stages in ascending order.
/// `oracle_fractions[t]` holds the per-stream shares of record `t` and is
/// required for [`PartitionMode::Oracle`].
pub fn run_multistream(
    records: &[FeedbackRecord],
    codebook: &Codebook,
    n_streams: usize,
    mode: PartitionMode,
    oracle_fractions: Option<&[Vec<f64>]>,
    starts: &[StreamStart],
    config: &EstimatorConfig,
) -> Result<MultistreamOutcome> {
    if n_streams == 0 || n_streams > codebook.layers() {
        return Err(arg_err(format!(
            "{n_streams} streams with a {}-layer codebook",
            codebook.layers()
        )));
    }
    if starts.len() != n_streams {
        return Err(dim_err(format!("{} stream starts for {n_streams} streams", starts.len())));
    }
    let first = records.first().ok_or_else(|| arg_err("no feedback records"))?;
    let n_antennas = first.pilot.n_antennas();
    if let Some(f) = oracle_fractions {
        if f.len() != records.len() {
            return Err(dim_err(format!("{} fraction rows for {} records", f.len(), records.len())));
        }
    }

    let mut per_stream = vec![Vec::with_capacity(records.len()); n_streams];
    for (t, r) in records.iter().enumerate() {
        let fractions = oracle_fractions.map(|f| f[t].as_slice());
        let part = partition_cqi(r.cqi, n_streams, mode, fractions)?;
        for (k, c) in part.components.into_iter().enumerate() {
            per_stream[k].push(c);
        }
    }

    let mut found: Vec<CVec> = Vec::with_capacity(n_streams);
    let mut streams = Vec::with_capacity(n_streams);
    for k in 0..n_streams {
        let basis = null_basis(&found, n_antennas)?;
        let out = solve_subproblem_k(records, codebook, k, &per_stream[k], &basis, &starts[k], config)?;
        found.push(out.beam.clone());
        streams.push(out);
    }
    Ok(MultistreamOutcome { beams: BeamMatrix::from_vectors(&found)?, streams })
}

/// Single-stream pipeline: stage 0 with the identity basis and the full CQIs.
pub fn estimate_single_stream(
    records: &[FeedbackRecord],
    codebook: &Codebook,
    start: &StreamStart,
    config: &EstimatorConfig,
) -> Result<SubproblemOutcome> {
    let first = records.first().ok_or_else(|| arg_err("no feedback records"))?;
    let targets: Vec<f64> = records.iter().map(|r| r.cqi).collect();
    solve_subproblem_k(records, codebook, 0, &targets, &NullBasis::identity(first.pilot.n_antennas()), start, config)
}
