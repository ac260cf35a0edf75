//! Monte-Carlo check of the sphere statistics behind the matching error.
//!
//! For a random unit `w*`, a pilot `Q` with `w* ∈ Col(Q)`, and the codeword
//! picked by the UE for the rank-one covariance `w* w*ᴴ`, the codeword splits
//! as `v = a·Qᴴw* + √(1−a²)·o` with `o ⊥ Qᴴw*`. A second unit vector
//! `u ⊥ w*` then sees `|oᴴQᴴu|²`, which should have mean `1/N_A`.

use rayon::prelude::*;

use crate::codebook::build_single_layer;
use crate::error::{arg_err, Result};
use crate::linalg::orthonormalize_columns;
use crate::rng::{
    complex_normal_matrix, complex_normal_vector, derive_seed, real_normal_matrix, real_normal_vector, rng_from_seed,
    tag,
};
use crate::{CMat, CVec};

/// Scalar field the random vectors are drawn from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SphereField {
    /// Real unit sphere with a random real codebook.
    #[default]
    Real,
    /// Complex unit sphere with the oversampled DFT codebook.
    Complex,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BetaCheckReport {
    pub n_antennas: usize,
    pub samples: usize,
    pub field: SphereField,
    /// Sample mean of `|oᴴQᴴu|²`.
    pub mean: f64,
    /// Unbiased sample variance of `|oᴴQᴴu|²`.
    pub variance: f64,
    pub stderr_mean: f64,
    pub stderr_variance: f64,
    /// `1/N_A`.
    pub theoretical_mean: f64,
    /// `2(N_A − 1)/(N_A³ + 2N_A)`.
    pub theoretical_variance: f64,
    /// Sample mean of the alignment `a²`.
    pub alignment_mean: f64,
    pub alignment_variance: f64,
}

impl BetaCheckReport {
    /// `|mean − target| / stderr_mean`.
    pub fn mean_z(&self, target: f64) -> f64 {
        (self.mean - target).abs() / self.stderr_mean
    }

    pub fn variance_z(&self, target: f64) -> f64 {
        (self.variance - target).abs() / self.stderr_variance
    }

    pub fn summary(&self) -> String {
        format!(
            "n_antennas={} samples={} mean={:.6e} (theory {:.6e}, se {:.2e}) variance={:.6e} (theory {:.6e}, se {:.2e}) alignment mean={:.4} variance={:.4}",
            self.n_antennas,
            self.samples,
            self.mean,
            self.theoretical_mean,
            self.stderr_mean,
            self.variance,
            self.theoretical_variance,
            self.stderr_variance,
            self.alignment_mean,
            self.alignment_variance
        )
    }
}

struct Moments {
    mean: f64,
    variance: f64,
    stderr_mean: f64,
    stderr_variance: f64,
}

fn moments(x: &[f64]) -> Moments {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let m2 = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let m4 = x.iter().map(|v| (v - mean).powi(4)).sum::<f64>() / n;
    let variance = m2 * n / (n - 1.0);
    Moments {
        mean,
        variance,
        stderr_mean: (variance / n).sqrt(),
        stderr_variance: ((m4 - m2 * m2).max(0.0) / n).sqrt(),
    }
}

fn draw_vector(field: SphereField, rng: &mut impl rand::Rng, n: usize) -> CVec {
    let mut v = match field {
        SphereField::Real => real_normal_vector(rng, n),
        SphereField::Complex => complex_normal_vector(rng, n),
    };
    v.unscale_mut(v.norm());
    v
}

fn draw_matrix(field: SphereField, rng: &mut impl rand::Rng, rows: usize, cols: usize) -> CMat {
    match field {
        SphereField::Real => real_normal_matrix(rng, rows, cols),
        SphereField::Complex => complex_normal_matrix(rng, rows, cols),
    }
}

/// Unit part of `v` orthogonal to unit `x`, or a random one if `v ∥ x`.
fn orthogonal_part(v: &CVec, x: &CVec, field: SphereField, rng: &mut impl rand::Rng) -> CVec {
    let mut v = v.clone();
    loop {
        let r = &v - x * x.dotc(&v);
        let n = r.norm();
        if n > 1e-12 {
            return r.unscale(n);
        }
        v = draw_vector(field, rng, x.len());
    }
}

pub fn empirical_beta_check(
    n_antennas: usize,
    n_ports: usize,
    codebook_size: usize,
    samples: usize,
    seed: u64,
    field: SphereField,
) -> Result<BetaCheckReport> {
    if samples < 2 {
        return Err(arg_err("need at least two samples"));
    }
    if n_ports < 2 || n_ports >= n_antennas {
        return Err(arg_err(format!("need 2 <= n_ports < n_antennas, got {n_ports} and {n_antennas}")));
    }
    if codebook_size == 0 {
        return Err(arg_err("empty codebook"));
    }
    let codewords: Vec<CVec> = match field {
        SphereField::Real => {
            let mut rng = rng_from_seed(derive_seed(seed, tag::BETA_CHECK, u64::MAX));
            (0..codebook_size).map(|_| draw_vector(field, &mut rng, n_ports)).collect()
        }
        SphereField::Complex => {
            let cb = build_single_layer(n_ports, codebook_size)?;
            (0..cb.len()).map(|m| cb.column(m, 0)).collect::<Result<_>>()?
        }
    };

    let draws: Vec<(f64, f64)> = (0..samples)
        .into_par_iter()
        .map(|i| -> Result<(f64, f64)> {
            let mut rng = rng_from_seed(derive_seed(seed, tag::BETA_CHECK, i as u64));
            let w = draw_vector(field, &mut rng, n_antennas);
            let mut g = draw_matrix(field, &mut rng, n_antennas, n_ports);
            g.set_column(0, &w);
            let basis = orthonormalize_columns(&g)?;
            let rotation = orthonormalize_columns(&draw_matrix(field, &mut rng, n_ports, n_ports))?;
            let q = basis * rotation;

            let x = q.ad_mul(&w);
            let (v, a2) = codewords
                .iter()
                .map(|v| (v, v.dotc(&x).norm_sqr()))
                .fold((&codewords[0], f64::NEG_INFINITY), |best, c| if c.1 > best.1 { c } else { best });
            let o = orthogonal_part(v, &x, field, &mut rng);

            let gu = draw_vector(field, &mut rng, n_antennas);
            let u = orthogonal_part(&gu, &w, field, &mut rng);
            let z = o.dotc(&q.ad_mul(&u)).norm_sqr();
            Ok((z, a2))
        })
        .collect::<Result<_>>()?;

    let z: Vec<f64> = draws.iter().map(|d| d.0).collect();
    let a: Vec<f64> = draws.iter().map(|d| d.1).collect();
    let zm = moments(&z);
    let am = moments(&a);
    let n = n_antennas as f64;
    Ok(BetaCheckReport {
        n_antennas,
        samples,
        field,
        mean: zm.mean,
        variance: zm.variance,
        stderr_mean: zm.stderr_mean,
        stderr_variance: zm.stderr_variance,
        theoretical_mean: 1.0 / n,
        theoretical_variance: 2.0 * (n - 1.0) / (n * n * n + 2.0 * n),
        alignment_mean: am.mean,
        alignment_variance: am.variance,
    })
}
