//! Small dense-algebra helpers on top of nalgebra.

use nalgebra::linalg::Cholesky;
use nalgebra::Dyn;

use crate::error::{dim_err, Error, Result};
use crate::{CMat, CVec, C64};

/// Systems whose Cholesky-based condition estimate exceeds this are rejected.
pub const MAX_CONDITION: f64 = 1e12;

/// Largest elementwise `|m_ij - conj(m_ji)|`.
pub fn hermitian_deviation(m: &CMat) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0_f64;
    for j in 0..n {
        for i in j..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

/// `(M + Mᴴ) / 2`.
pub fn hermitian_part(m: &CMat) -> CMat {
    (m + m.adjoint()) * C64::new(0.5, 0.0)
}

pub fn frobenius(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// `‖MᴴM − I‖_F`.
pub fn orthonormality_error(m: &CMat) -> f64 {
    let g = m.adjoint() * m;
    let k = g.nrows();
    frobenius(&(g - CMat::identity(k, k)))
}

pub fn trace_re(m: &CMat) -> f64 {
    (0..m.nrows().min(m.ncols())).map(|i| m[(i, i)].re).sum()
}

/// Orthonormal basis for the column span of a full-column-rank `m`, with the
/// implied triangular factor having a positive real diagonal. This makes the
/// result unique, and Haar-distributed when `m` has i.i.d. Gaussian entries.
pub fn orthonormalize_columns(m: &CMat) -> Result<CMat> {
    if m.ncols() > m.nrows() {
        return Err(dim_err(format!(
            "cannot orthonormalize {} columns in dimension {}",
            m.ncols(),
            m.nrows()
        )));
    }
    let qr = m.clone().qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..q.ncols() {
        let d = r[(j, j)];
        let mag = d.norm();
        if mag < 1e-300 {
            return Err(Error::IllConditioned(f64::INFINITY));
        }
        let phase = d / mag;
        for i in 0..q.nrows() {
            q[(i, j)] *= phase;
        }
    }
    Ok(q)
}

/// Prefactored Hermitian positive-definite system.
#[derive(Debug, Clone)]
pub struct HpdSolver {
    chol: Cholesky<C64, Dyn>,
    condition_estimate: f64,
}

impl HpdSolver {
    pub fn new(a: &CMat) -> Result<Self> {
        if a.nrows() != a.ncols() {
            return Err(dim_err(format!("{}x{} system matrix", a.nrows(), a.ncols())));
        }
        let chol = Cholesky::new(hermitian_part(a)).ok_or(Error::IllConditioned(f64::INFINITY))?;
        let l = chol.l_dirty();
        let (mut lo, mut hi) = (f64::INFINITY, 0.0_f64);
        for i in 0..a.nrows() {
            let d = l[(i, i)].re;
            lo = lo.min(d);
            hi = hi.max(d);
        }
        let condition_estimate = if lo > 0.0 { (hi / lo).powi(2) } else { f64::INFINITY };
        if condition_estimate.is_nan() || condition_estimate > MAX_CONDITION {
            return Err(Error::IllConditioned(condition_estimate));
        }
        Ok(Self { chol, condition_estimate })
    }

    pub fn solve(&self, b: &CVec) -> Result<CVec> {
        if b.len() != self.chol.l_dirty().nrows() {
            return Err(dim_err(format!(
                "rhs length {} for {}-dimensional system",
                b.len(),
                self.chol.l_dirty().nrows()
            )));
        }
        Ok(self.chol.solve(b))
    }

    /// `ln det A`.
    pub fn ln_det(&self) -> f64 {
        let l = self.chol.l_dirty();
        2.0 * (0..l.nrows()).map(|i| l[(i, i)].re.ln()).sum::<f64>()
    }

    pub fn condition_estimate(&self) -> f64 {
        self.condition_estimate
    }
}
