//! UE-side feedback: PMI selection, CQI computation and quantization, and the
//! per-stream CQI partition used by the multi-stream estimator.

use crate::channel_model::{effective_gram, Dccm, PilotMatrix};
use crate::codebook::Codebook;
use crate::error::{arg_err, dim_err, Result};
use crate::CMat;

/// One round of limited feedback.
#[derive(Debug, Clone, PartialEq)]
pub struct FeedbackRecord {
    pub round: usize,
    pub pilot: PilotMatrix,
    /// 0-based codebook index.
    pub pmi: usize,
    /// Quantized CQI.
    pub cqi: f64,
    pub layers: usize,
}

impl FeedbackRecord {
    pub fn codeword<'a>(&self, codebook: &'a Codebook) -> Result<&'a CMat> {
        codebook.entry(self.pmi)
    }

    /// `round,pmi,cqi,pilot` with the CQI at 9 significant digits.
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{}",
            self.round,
            self.pmi,
            crate::harness::format_sig9(self.cqi),
            self.pilot.source()
        )
    }

    pub const CSV_HEADER: &'static str = "round,pmi,cqi,pilot";
}

/// `Tr(Vᴴ G V)`, clamped at zero.
fn trace_quadratic(gram: &CMat, codeword: &CMat) -> f64 {
    let mut total = 0.0;
    for v in codeword.column_iter() {
        let gv = gram * v;
        total += v.dotc(&gv).re;
    }
    total.max(0.0)
}

/// Relative slack under which two codeword scores count as tied.
const TIE_TOLERANCE: f64 = 1e-12;

/// Index maximizing `Tr(V_mᴴ G V_m)`; the lowest index wins ties, where
/// scores within rounding of each other are ties.
pub fn select_pmi(gram: &CMat, codebook: &Codebook) -> Result<usize> {
    if gram.nrows() != codebook.n_ports() || gram.ncols() != codebook.n_ports() {
        return Err(dim_err(format!(
            "gram is {}x{} but codebook has {} ports",
            gram.nrows(),
            gram.ncols(),
            codebook.n_ports()
        )));
    }
    let mut best = (0, f64::NEG_INFINITY);
    for (m, v) in codebook.entries().iter().enumerate() {
        let value = trace_quadratic(gram, v);
        if m == 0 || value > best.1 + TIE_TOLERANCE * best.1.abs() {
            best = (m, value);
        }
    }
    Ok(best.0)
}

pub fn compute_cqi(gram: &CMat, codeword: &CMat) -> Result<f64> {
    if gram.nrows() != gram.ncols() || gram.ncols() != codeword.nrows() {
        return Err(dim_err(format!(
            "gram is {}x{}, codeword has {} rows",
            gram.nrows(),
            gram.ncols(),
            codeword.nrows()
        )));
    }
    Ok(trace_quadratic(gram, codeword))
}

/// Nearest IEEE-754 binary32 value of the linear CQI. Only the 32-bit budget
/// is supported.
pub fn quantize_cqi(value: f64, bits: u32) -> Result<f64> {
    if bits != 32 {
        return Err(arg_err(format!("unsupported CQI width {bits} (only 32 bits)")));
    }
    if !value.is_finite() || value < 0.0 {
        return Err(arg_err(format!("CQI must be finite and non-negative, got {value}")));
    }
    let q = value as f32;
    if !q.is_finite() {
        return Err(arg_err(format!("CQI {value} overflows binary32")));
    }
    Ok(q as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PartitionMode {
    /// Equal split.
    Average,
    /// Split by known per-stream fractions.
    Oracle,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CqiPartition {
    pub components: Vec<f64>,
}

pub fn partition_cqi(
    cqi: f64,
    n_streams: usize,
    mode: PartitionMode,
    fractions: Option<&[f64]>,
) -> Result<CqiPartition> {
    if n_streams == 0 {
        return Err(arg_err("need at least one stream"));
    }
    let components = match mode {
        PartitionMode::Average => vec![cqi / n_streams as f64; n_streams],
        PartitionMode::Oracle => {
            let f = fractions.ok_or_else(|| arg_err("oracle partition needs fractions"))?;
            if f.len() != n_streams {
                return Err(arg_err(format!("{} fractions for {n_streams} streams", f.len())));
            }
            if f.iter().any(|x| !x.is_finite() || *x < 0.0) {
                return Err(arg_err("fractions must be finite and non-negative"));
            }
            let sum: f64 = f.iter().sum();
            if (sum - 1.0).abs() > 1e-9 {
                return Err(arg_err(format!("fractions sum to {sum}, expected 1")));
            }
            f.iter().map(|x| cqi * x).collect()
        }
    };
    Ok(CqiPartition { components })
}

/// True per-stream shares of a record's CQI: `σ_k ‖Vᴴ Qᴴ u_k‖²` for the
/// first `n_streams` eigenpairs of `C`, normalized to sum to one. Falls back
/// to an equal split when all shares vanish.
pub fn oracle_fractions(
    dccm: &Dccm,
    record: &FeedbackRecord,
    codebook: &Codebook,
    n_streams: usize,
) -> Result<Vec<f64>> {
    if n_streams == 0 || n_streams > dccm.eigenvalues().len() {
        return Err(arg_err(format!(
            "{n_streams} streams for a rank-{} covariance",
            dccm.eigenvalues().len()
        )));
    }
    let v = record.codeword(codebook)?;
    let proj = v.adjoint() * record.pilot.matrix().adjoint();
    let shares: Vec<f64> = (0..n_streams)
        .map(|k| {
            let u = dccm.eigenvectors().column(k);
            dccm.eigenvalues()[k] * (&proj * u).norm_squared()
        })
        .collect();
    let total: f64 = shares.iter().sum();
    if total <= 0.0 {
        return Ok(vec![1.0 / n_streams as f64; n_streams]);
    }
    Ok(shares.iter().map(|s| s / total).collect())
}

/// Effective Gram, PMI, CQI and quantization for one round.
pub fn make_feedback(dccm: &Dccm, pilot: &PilotMatrix, codebook: &Codebook) -> Result<FeedbackRecord> {
    let gram = effective_gram(dccm, pilot)?;
    let pmi = select_pmi(&gram, codebook)?;
    let raw = compute_cqi(&gram, codebook.entry(pmi)?)?;
    let cqi = quantize_cqi(raw, 32)?;
    Ok(FeedbackRecord {
        round: pilot.round(),
        pilot: pilot.clone(),
        pmi,
        cqi,
        layers: codebook.layers(),
    })
}
