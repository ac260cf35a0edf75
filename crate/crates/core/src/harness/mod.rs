//! Monte-Carlo experiments, metrics and CSV output.

mod betacheck;
mod config;
mod experiment;
mod trial;

pub use betacheck::{empirical_beta_check, BetaCheckReport, SphereField};
pub use config::{ExperimentConfig, LambdaMode, Method, Partition};
pub use experiment::{render_csv, run_experiment, simulate, ExperimentSummary, CSV_HEADER};
pub use trial::{
    aligned_rank1_instance, convergence_trace, run_instance, run_trial, synthetic_instance, PrecisionCurve,
    TrialInstance,
};

use crate::channel_model::Dccm;
use crate::error::{dim_err, Result};
use crate::linalg::trace_re;
use crate::multistream::BeamMatrix;

/// `wᴴCw / σ₁` for one beam, `Tr(WᴴCW) / Tr(C)` for several.
pub fn beam_precision(dccm: &Dccm, beams: &BeamMatrix) -> Result<f64> {
    let w = beams.matrix();
    if w.nrows() != dccm.n_antennas() {
        return Err(dim_err(format!(
            "{}-row beams for a {}-antenna covariance",
            w.nrows(),
            dccm.n_antennas()
        )));
    }
    let captured = trace_re(&(w.adjoint() * dccm.matrix() * w));
    let scale = if beams.n_streams() == 1 { dccm.principal_eigenvalue() } else { dccm.trace() };
    Ok((captured / scale).max(0.0))
}

/// Nine significant digits, shortest form, as C's `%.9g`.
pub fn format_sig9(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return if x.is_nan() { "nan".into() } else if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let sci = format!("{x:.8e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..9).contains(&exp) {
        let m = trim_fraction(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{m}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (8 - exp) as usize;
        trim_fraction(&format!("{x:.decimals$}")).to_string()
    }
}

fn trim_fraction(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}
