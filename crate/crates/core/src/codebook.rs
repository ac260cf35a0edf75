//! Oversampled-DFT codebooks shared by the base station and the UE.
//!
//! Single-layer entry `i` is the unit vector `exp(j2π n i / M) / √N_P`,
//! `n = 0..N_P`. Multi-layer entry `m` stacks the DFT vectors at indices
//! `(m + k·O) mod M` for `k = 0..N_D`, where `O = M / N_P` is the
//! oversampling factor; those columns are exactly orthogonal.

use std::f64::consts::PI;

use crate::error::{arg_err, dim_err, Result};
use crate::{CMat, CVec, C64};

#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    entries: Vec<CMat>,
    n_ports: usize,
    layers: usize,
}

fn dft_vector(n_ports: usize, index: usize, size: usize) -> CVec {
    let scale = 1.0 / (n_ports as f64).sqrt();
    CVec::from_fn(n_ports, |n, _| {
        // reduce before converting so large products stay exact
        let phase_index = (n * index) % size;
        C64::from_polar(scale, 2.0 * PI * phase_index as f64 / size as f64)
    })
}

/// `size` single-layer oversampled-DFT codewords over `n_ports` dimensions.
pub fn build_single_layer(n_ports: usize, size: usize) -> Result<Codebook> {
    if n_ports == 0 {
        return Err(arg_err("codebook needs at least one port"));
    }
    if size < n_ports {
        return Err(arg_err(format!("codebook size {size} is smaller than {n_ports} ports")));
    }
    let entries = (0..size)
        .map(|i| CMat::from_columns(&[dft_vector(n_ports, i, size)]))
        .collect();
    Ok(Codebook { entries, n_ports, layers: 1 })
}

/// `size` semi-unitary `n_ports × n_layers` codewords.
pub fn build_multi_layer(n_ports: usize, n_layers: usize, size: usize) -> Result<Codebook> {
    if n_layers == 0 || n_layers > n_ports {
        return Err(dim_err(format!("{n_layers} layers for {n_ports} ports")));
    }
    if size < n_ports || !size.is_multiple_of(n_ports) {
        return Err(arg_err(format!(
            "multi-layer codebook size {size} must be a positive multiple of {n_ports} ports"
        )));
    }
    let oversampling = size / n_ports;
    let entries = (0..size)
        .map(|m| {
            let cols: Vec<CVec> = (0..n_layers)
                .map(|k| dft_vector(n_ports, (m + k * oversampling) % size, size))
                .collect();
            CMat::from_columns(&cols)
        })
        .collect();
    Ok(Codebook { entries, n_ports, layers: n_layers })
}

impl Codebook {
    /// Wrap caller-supplied codewords; all must share a shape and be
    /// semi-unitary.
    pub fn from_entries(entries: Vec<CMat>) -> Result<Self> {
        let first = entries.first().ok_or_else(|| arg_err("empty codebook"))?;
        let (n_ports, layers) = first.shape();
        for e in &entries {
            if e.shape() != (n_ports, layers) {
                return Err(dim_err("codewords differ in shape"));
            }
            let dev = crate::linalg::orthonormality_error(e);
            if dev > 1e-10 {
                return Err(crate::Error::NotOrthonormal(dev));
            }
        }
        Ok(Self { entries, n_ports, layers })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn n_ports(&self) -> usize {
        self.n_ports
    }

    pub fn layers(&self) -> usize {
        self.layers
    }

    pub fn entries(&self) -> &[CMat] {
        &self.entries
    }

    /// Codeword `m` (0-based), `n_ports × layers`.
    pub fn entry(&self, m: usize) -> Result<&CMat> {
        self.entries
            .get(m)
            .ok_or_else(|| arg_err(format!("codeword index {m} out of range 0..{}", self.len())))
    }

    /// Column `k` of codeword `m`.
    pub fn column(&self, m: usize, k: usize) -> Result<CVec> {
        let e = self.entry(m)?;
        if k >= e.ncols() {
            return Err(dim_err(format!("layer {k} of a {}-layer codeword", e.ncols())));
        }
        Ok(e.column(k).into_owned())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::orthonormality_error;
    use crate::rng::{complex_normal_vector, rng_from_seed};

    #[test]
    fn single_layer_basics() {
        let cb = build_single_layer(8, 16).unwrap();
        assert_eq!(cb.len(), 16);
        let v0 = cb.column(0, 0).unwrap();
        let s = 1.0 / 8f64.sqrt();
        assert!(v0.iter().all(|z| (z - C64::new(s, 0.0)).norm() < 1e-15));
        let v2 = cb.column(2, 0).unwrap();
        assert!(v0.dotc(&v2).norm() < 1e-10);
        for m in 0..16 {
            assert!((cb.column(m, 0).unwrap().norm() - 1.0).abs() < 1e-12);
        }
        assert!(build_single_layer(8, 4).is_err());
    }

    #[test]
    fn single_layer_entries_are_distinct() {
        let cb = build_single_layer(8, 16).unwrap();
        for a in 0..16 {
            for b in 0..16 {
                if a != b {
                    let ip = cb.column(a, 0).unwrap().dotc(&cb.column(b, 0).unwrap()).norm();
                    assert!(ip < 1.0 - 1e-6);
                }
            }
        }
    }

    #[test]
    fn multi_layer_basics() {
        let single = build_single_layer(8, 16).unwrap();
        let cb = build_multi_layer(8, 2, 16).unwrap();
        for m in 0..16 {
            let e = cb.entry(m).unwrap();
            assert!(orthonormality_error(e) < 1e-10);
            assert_eq!(cb.column(m, 0).unwrap(), single.column(m, 0).unwrap());
        }
        let sq = build_multi_layer(4, 4, 4).unwrap();
        for e in sq.entries() {
            assert!(orthonormality_error(e) < 1e-10);
            assert!(orthonormality_error(&e.adjoint()) < 1e-10);
        }
        assert!(build_multi_layer(4, 5, 8).is_err());
    }

    #[test]
    fn construction_is_deterministic() {
        assert_eq!(build_multi_layer(8, 2, 16).unwrap(), build_multi_layer(8, 2, 16).unwrap());
    }

    #[test]
    fn single_layer_covers_the_sphere() {
        let cb = build_single_layer(8, 16).unwrap();
        let mut rng = rng_from_seed(1234);
        let mut worst = 0.0_f64;
        for _ in 0..1000 {
            let mut x = complex_normal_vector(&mut rng, 8);
            x.unscale_mut(x.norm());
            let best = (0..16)
                .map(|m| 1.0 - cb.column(m, 0).unwrap().dotc(&x).norm_sqr())
                .fold(f64::INFINITY, f64::min);
            worst = worst.max(best);
        }
        assert!(worst < 1.0);
    }
}
