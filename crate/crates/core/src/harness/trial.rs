use std::collections::BTreeMap;

use rand::Rng;

use crate::am_estimator::{run_am, AmOutcome, AmProblem};
use crate::baseline::{accumulate, baseline_beams, baseline_pilots, codeword_beam};
use crate::bayes_tuner::tune_lambda;
use crate::channel_model::{dft_beam_pilot, make_dccm, pilot_for_round, Dccm, PilotMatrix, PilotSource};
use crate::codebook::{build_multi_layer, build_single_layer, Codebook};
use crate::error::{arg_err, dim_err, Result};
use crate::feedback::{make_feedback, oracle_fractions, FeedbackRecord, PartitionMode};
use crate::linalg::orthonormalize_columns;
use crate::multistream::{
    estimate_single_stream, run_multistream, BeamMatrix, EstimatorConfig, StreamStart,
};
use crate::rng::{complex_normal_matrix, complex_normal_vector, derive_seed, rng_from_seed, tag};
use crate::{CMat, CVec};

use super::config::{ExperimentConfig, LambdaMode, Method};
use super::beam_precision;

/// Per-round precision of one method, possibly averaged over trials.
#[derive(Debug, Clone, PartialEq)]
pub struct PrecisionCurve {
    pub method: Method,
    pub precision: Vec<f64>,
    /// Standard error of the mean; zeros for a single trial.
    pub stderr: Vec<f64>,
    /// Mean regularization weight per round (proposed method only).
    pub lambda: Option<Vec<f64>>,
    pub trials: usize,
}

/// Everything a trial needs besides the estimator settings.
#[derive(Debug, Clone)]
pub struct TrialInstance {
    pub dccm: Dccm,
    pub codebook: Codebook,
    /// `Q(t)` for the proposed and codeword methods, one per round.
    pub pilots: Vec<PilotMatrix>,
    /// Rotated pilots for the accumulator baseline, one per round.
    pub baseline_pilots: Vec<PilotMatrix>,
}

fn codebook_for(config: &ExperimentConfig) -> Result<Codebook> {
    if config.n_streams == 1 {
        build_single_layer(config.n_ports, config.codebook_size)
    } else {
        build_multi_layer(config.n_ports, config.n_streams, config.codebook_size)
    }
}

/// Random covariance with the configured profile, DFT first-round pilot,
/// random pilots afterwards.
pub fn synthetic_instance(config: &ExperimentConfig, trial_seed: u64) -> Result<TrialInstance> {
    let dccm = make_dccm(config.n_antennas, config.n_user, &config.eigen_profile, trial_seed)?;
    let q1 = dft_beam_pilot(config.n_antennas, config.n_ports)?;
    let beam_set = std::slice::from_ref(&q1);
    let pilots = (1..=config.rounds)
        .map(|t| pilot_for_round(t, config.n_antennas, config.n_ports, beam_set, trial_seed))
        .collect::<Result<Vec<_>>>()?;
    let baseline = (1..=config.rounds)
        .map(|t| baseline_pilots(&q1, t, trial_seed))
        .collect::<Result<Vec<_>>>()?;
    Ok(TrialInstance { dccm, codebook: codebook_for(config)?, pilots, baseline_pilots: baseline })
}

/// Semi-unitary `rows × cols` matrix whose first column is `first` (unit
/// norm), completed at random.
fn complete_basis(first: &CVec, cols: usize, seed: u64) -> Result<CMat> {
    let mut rng = rng_from_seed(seed);
    let mut m = complex_normal_matrix(&mut rng, first.len(), cols);
    m.set_column(0, first);
    orthonormalize_columns(&m)
}

/// Rank-one covariance `σ w* w*ᴴ` with every pilot satisfying
/// `Q(t)ᴴ w* = v_c` for codeword `c` of the configured single-layer codebook.
pub fn aligned_rank1_instance(config: &ExperimentConfig, sigma: f64, seed: u64) -> Result<TrialInstance> {
    if config.n_streams != 1 {
        return Err(arg_err("aligned instance is single-stream"));
    }
    let codebook = codebook_for(config)?;
    let mut rng = rng_from_seed(derive_seed(seed, tag::INSTANCE, 0));
    let c = rng.random_range(0..codebook.len());
    let v_c = codebook.column(c, 0)?;
    let mut w_star = complex_normal_vector(&mut rng, config.n_antennas);
    w_star.unscale_mut(w_star.norm());
    let dccm = Dccm::from_eigen(CMat::from_columns(&[w_star.clone()]), vec![sigma])?;

    let pilot = |t: usize| -> Result<PilotMatrix> {
        let r = complete_basis(&w_star, config.n_ports, derive_seed(seed, tag::INSTANCE, 2 * t as u64))?;
        let u = complete_basis(&v_c, config.n_ports, derive_seed(seed, tag::INSTANCE, 2 * t as u64 + 1))?;
        PilotMatrix::new(r * u.adjoint(), t, PilotSource::Custom)
    };
    let pilots = (1..=config.rounds).map(pilot).collect::<Result<Vec<_>>>()?;
    let baseline = (1..=config.rounds)
        .map(|t| baseline_pilots(&pilots[0], t, seed))
        .collect::<Result<Vec<_>>>()?;
    Ok(TrialInstance { dccm, codebook, pilots, baseline_pilots: baseline })
}

/// Uniform draw in `(0, 1]`.
fn unit_interval<R: Rng>(rng: &mut R) -> f64 {
    1.0 - rng.random::<f64>()
}

struct ProposedTracker {
    iterates: Vec<CVec>,
    beams: Vec<CVec>,
}

/// Score every configured method on `instance`, re-estimating from the
/// records of rounds `1..=t` at each round `t`.
pub fn run_instance(
    config: &ExperimentConfig,
    instance: &TrialInstance,
    trial_seed: u64,
) -> Result<BTreeMap<Method, PrecisionCurve>> {
    let methods = config.method_list();
    let rounds = instance.pilots.len();
    if rounds == 0 || instance.baseline_pilots.len() != rounds {
        return Err(dim_err("instance needs one pilot of each kind per round"));
    }
    let n_streams = config.n_streams;
    let dccm = &instance.dccm;
    let cb = &instance.codebook;
    let needs_main = methods.iter().any(|m| *m != Method::Baseline);

    let records: Vec<FeedbackRecord> = if needs_main {
        instance.pilots.iter().map(|p| make_feedback(dccm, p, cb)).collect::<Result<_>>()?
    } else {
        Vec::new()
    };
    let mut out = BTreeMap::new();

    if methods.contains(&Method::Codeword) {
        let beam = codeword_beam(&records[0].pilot, records[0].codeword(cb)?)?;
        let p = beam_precision(dccm, &beam)?;
        out.insert(Method::Codeword, single_curve(Method::Codeword, vec![p; rounds], None));
    }

    if methods.contains(&Method::Baseline) {
        let base_records: Vec<FeedbackRecord> = instance
            .baseline_pilots
            .iter()
            .map(|p| make_feedback(dccm, p, cb))
            .collect::<Result<_>>()?;
        let mut precision = Vec::with_capacity(rounds);
        for t in 1..=rounds {
            let acc = accumulate(&base_records[..t], cb)?;
            precision.push(beam_precision(dccm, &baseline_beams(&acc, n_streams)?)?);
        }
        out.insert(Method::Baseline, single_curve(Method::Baseline, precision, None));
    }

    if methods.contains(&Method::Proposed) {
        let estimator = EstimatorConfig { lambda: config.lambda_mode.into(), ..EstimatorConfig::default() };
        let mode: PartitionMode = config.partition_mode.into();
        let fractions: Option<Vec<Vec<f64>>> = if n_streams > 1 && mode == PartitionMode::Oracle {
            Some(records.iter().map(|r| oracle_fractions(dccm, r, cb, n_streams)).collect::<Result<_>>()?)
        } else {
            None
        };
        let first_beam = codeword_beam(&records[0].pilot, records[0].codeword(cb)?)?;
        let mut tracker = ProposedTracker {
            iterates: (0..n_streams)
                .map(|k| {
                    let mut rng = rng_from_seed(derive_seed(trial_seed, tag::AM_INIT, k as u64));
                    complex_normal_vector(&mut rng, dccm.n_antennas())
                })
                .collect(),
            beams: (0..n_streams).map(|k| first_beam.column(k)).collect(),
        };
        let mut tuner_rng = rng_from_seed(derive_seed(trial_seed, tag::TUNER_INIT, 0));
        let mut precision = Vec::with_capacity(rounds);
        let mut lambdas = Vec::with_capacity(rounds);
        for t in 1..=rounds {
            let starts: Vec<StreamStart> = (0..n_streams)
                .map(|k| StreamStart {
                    init_w: tracker.iterates[k].clone(),
                    reference_w: tracker.beams[k].clone(),
                    alpha0: unit_interval(&mut tuner_rng),
                    beta0: unit_interval(&mut tuner_rng),
                })
                .collect();
            let recs = &records[..t];
            let streams = if n_streams == 1 {
                vec![estimate_single_stream(recs, cb, &starts[0], &estimator)?]
            } else {
                let f = fractions.as_ref().map(|f| &f[..t]);
                run_multistream(recs, cb, n_streams, mode, f, &starts, &estimator)?.streams
            };
            let beams: Vec<CVec> = streams.iter().map(|s| s.beam.clone()).collect();
            precision.push(beam_precision(dccm, &BeamMatrix::from_vectors(&beams)?)?);
            lambdas.push(streams.iter().map(|s| s.lambda).sum::<f64>() / n_streams as f64);
            tracker.iterates = streams.iter().map(|s| s.iterate.clone()).collect();
            tracker.beams = beams;
        }
        out.insert(Method::Proposed, single_curve(Method::Proposed, precision, Some(lambdas)));
    }
    Ok(out)
}

fn single_curve(method: Method, precision: Vec<f64>, lambda: Option<Vec<f64>>) -> PrecisionCurve {
    let stderr = vec![0.0; precision.len()];
    PrecisionCurve { method, precision, stderr, lambda, trials: 1 }
}

/// One synthetic Monte-Carlo trial.
pub fn run_trial(config: &ExperimentConfig, trial_seed: u64) -> Result<BTreeMap<Method, PrecisionCurve>> {
    config.validate()?;
    let instance = synthetic_instance(config, trial_seed)?;
    run_instance(config, &instance, trial_seed)
}

/// AM run on all `rounds` records of the first trial, from a random start,
/// with the configured regularization. Used for iteration traces.
pub fn convergence_trace(config: &ExperimentConfig) -> Result<AmOutcome> {
    config.validate()?;
    let trial_seed = derive_seed(config.master_seed, tag::TRIAL, 0);
    let instance = synthetic_instance(config, trial_seed)?;
    let records = instance
        .pilots
        .iter()
        .map(|p| make_feedback(&instance.dccm, p, &instance.codebook))
        .collect::<Result<Vec<_>>>()?;
    let problem = AmProblem::from_records(&records, &instance.codebook, 0, 1.0)?;
    let lambda = match config.lambda_mode {
        LambdaMode::Fixed(v) => v,
        LambdaMode::Auto => {
            let reference = codeword_beam(&records[0].pilot, records[0].codeword(&instance.codebook)?)?.column(0);
            let mut rng = rng_from_seed(derive_seed(trial_seed, tag::TUNER_INIT, 0));
            let (a0, b0) = (unit_interval(&mut rng), unit_interval(&mut rng));
            tune_lambda(&problem, &reference, a0, b0, &EstimatorConfig::default().tuner).lambda
        }
    };
    let problem = problem.with_lambda(lambda)?;
    let mut rng = rng_from_seed(derive_seed(trial_seed, tag::AM_INIT, 0));
    let init = complex_normal_vector(&mut rng, config.n_antennas);
    run_am(&problem, &init, &EstimatorConfig::default().am)
}
