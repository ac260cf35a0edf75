//! Comparison beamformers.
//!
//! The accumulator baseline averages CQI-weighted outer products of the
//! reported codeword beams and takes its top eigenvectors. Its pilots rotate
//! a fixed first-round pilot by seeded Haar unitaries. The codeword beam
//! simply transmits along `Q V_{m₀}`.

use crate::channel_model::{hermitian_eig, random_semiunitary, PilotMatrix, PilotSource};
use crate::codebook::Codebook;
use crate::error::{arg_err, dim_err, Result};
use crate::feedback::FeedbackRecord;
use crate::multistream::BeamMatrix;
use crate::rng::{derive_seed, tag};
use crate::CMat;

/// Running average `(1/t) Σ η(i) Σ_k q_{ik} q_{ik}ᴴ`.
#[derive(Debug, Clone, PartialEq)]
pub struct Accumulator {
    sum: CMat,
    count: usize,
}

impl Accumulator {
    pub fn new(n_antennas: usize) -> Self {
        Self { sum: CMat::zeros(n_antennas, n_antennas), count: 0 }
    }

    pub fn add(&mut self, record: &FeedbackRecord, codebook: &Codebook) -> Result<()> {
        if record.pilot.n_antennas() != self.sum.nrows() {
            return Err(dim_err("record pilot does not match accumulator dimension"));
        }
        let q = record.pilot.matrix() * record.codeword(codebook)?;
        self.sum += (&q * q.adjoint()).scale(record.cqi);
        self.count += 1;
        Ok(())
    }

    pub fn count(&self) -> usize {
        self.count
    }

    /// Averaged matrix; zero before the first record.
    pub fn matrix(&self) -> CMat {
        if self.count == 0 {
            self.sum.clone()
        } else {
            self.sum.unscale(self.count as f64)
        }
    }
}

pub fn accumulate(records: &[FeedbackRecord], codebook: &Codebook) -> Result<Accumulator> {
    let first = records.first().ok_or_else(|| arg_err("no feedback records to accumulate"))?;
    let mut acc = Accumulator::new(first.pilot.n_antennas());
    for r in records {
        acc.add(r, codebook)?;
    }
    Ok(acc)
}

/// Top `n_streams` eigenvectors of the averaged accumulator.
pub fn baseline_beams(acc: &Accumulator, n_streams: usize) -> Result<BeamMatrix> {
    let m = acc.matrix();
    if n_streams == 0 || n_streams > m.nrows() {
        return Err(arg_err(format!("{n_streams} streams in dimension {}", m.nrows())));
    }
    let eig = hermitian_eig(&m)?;
    BeamMatrix::new(eig.vectors.columns(0, n_streams).into_owned())
}

/// Baseline pilot for round `t`: `Q(1)` itself, then `Q(1) O_t`.
pub fn baseline_pilots(q1: &PilotMatrix, t: usize, seed: u64) -> Result<PilotMatrix> {
    if t == 0 {
        return Err(arg_err("rounds are numbered from 1"));
    }
    if t == 1 {
        return Ok(q1.clone());
    }
    let n_p = q1.n_ports();
    let s = derive_seed(seed, tag::BASELINE_PILOT, t as u64);
    let rotation = random_semiunitary(n_p, n_p, s)?;
    PilotMatrix::new(q1.matrix() * rotation, t, PilotSource::Seeded(s))
}

/// `Q V`, one beam per codeword column.
pub fn codeword_beam(pilot: &PilotMatrix, codeword: &CMat) -> Result<BeamMatrix> {
    if codeword.nrows() != pilot.n_ports() {
        return Err(dim_err(format!(
            "{}-row codeword for a {}-port pilot",
            codeword.nrows(),
            pilot.n_ports()
        )));
    }
    let mut beams = pilot.matrix() * codeword;
    for mut c in beams.column_iter_mut() {
        let n = c.norm();
        c.unscale_mut(n);
    }
    BeamMatrix::new(beams)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel_model::{dft_beam_pilot, make_dccm, pilot_for_round};
    use crate::codebook::{build_multi_layer, build_single_layer};
    use crate::feedback::make_feedback;
    use crate::linalg::{frobenius, hermitian_deviation, orthonormality_error, trace_re};
    use crate::rng::{complex_normal_matrix, rng_from_seed};
    use crate::C64;

    fn re(x: f64) -> C64 {
        C64::new(x, 0.0)
    }

    fn identity_pilot(n_a: usize, n_p: usize) -> PilotMatrix {
        PilotMatrix::new(CMat::identity(n_a, n_p), 1, PilotSource::Custom).unwrap()
    }

    fn record(pilot: PilotMatrix, pmi: usize, cqi: f64) -> FeedbackRecord {
        FeedbackRecord { round: pilot.round(), pilot, pmi, cqi, layers: 1 }
    }

    fn e1_codebook() -> Codebook {
        Codebook::from_entries(vec![CMat::from_column_slice(2, 1, &[re(1.0), re(0.0)])]).unwrap()
    }

    #[test]
    fn weighted_average_of_identical_beams() {
        let cb = e1_codebook();
        let recs = [record(identity_pilot(3, 2), 0, 1.0), record(identity_pilot(3, 2), 0, 3.0)];
        let acc = accumulate(&recs, &cb).unwrap();
        let mut want = CMat::zeros(3, 3);
        want[(0, 0)] = re(2.0);
        assert!(frobenius(&(acc.matrix() - want)) < 1e-15);
        assert_eq!(acc.count(), 2);
    }

    #[test]
    fn zero_cqi_gives_zero_matrix() {
        let cb = e1_codebook();
        let recs = vec![record(identity_pilot(3, 2), 0, 0.0); 3];
        assert_eq!(accumulate(&recs, &cb).unwrap().matrix(), CMat::zeros(3, 3));
        assert!(accumulate(&[], &cb).is_err());
    }

    fn random_records(n_layers: usize, count: usize, seed: u64) -> (Vec<FeedbackRecord>, Codebook) {
        let dccm = make_dccm(12, 3, &[5.0, 2.0, 1.0], seed).unwrap();
        let cb = if n_layers == 1 { build_single_layer(4, 8).unwrap() } else { build_multi_layer(4, n_layers, 8).unwrap() };
        let q1 = dft_beam_pilot(12, 4).unwrap();
        let recs = (1..=count)
            .map(|t| {
                let p = pilot_for_round(t, 12, 4, std::slice::from_ref(&q1), seed).unwrap();
                make_feedback(&dccm, &p, &cb).unwrap()
            })
            .collect();
        (recs, cb)
    }

    #[test]
    fn matches_loop_sum_over_all_layers() {
        for layers in [1, 2] {
            let (recs, cb) = random_records(layers, 7, 31);
            let acc = accumulate(&recs, &cb).unwrap();
            let mut want = CMat::zeros(12, 12);
            for r in &recs {
                let v = cb.entry(r.pmi).unwrap();
                for k in 0..layers {
                    let q = r.pilot.matrix() * v.column(k);
                    for i in 0..12 {
                        for j in 0..12 {
                            want[(i, j)] += q[i] * q[j].conj() * r.cqi;
                        }
                    }
                }
            }
            want /= re(recs.len() as f64);
            assert!(frobenius(&(acc.matrix() - &want)) < 1e-12 * frobenius(&want).max(1.0));
            let m = acc.matrix();
            assert!(hermitian_deviation(&m) < 1e-12);
            assert!(hermitian_eig(&m).unwrap().values.iter().all(|&l| l > -1e-9));
        }
    }

    #[test]
    fn record_order_does_not_matter() {
        let (mut recs, cb) = random_records(1, 6, 5);
        let a = accumulate(&recs, &cb).unwrap().matrix();
        recs.reverse();
        let b = accumulate(&recs, &cb).unwrap().matrix();
        assert!(frobenius(&(a - b)) < 1e-12);
    }

    #[test]
    fn diagonal_accumulator_beams() {
        let mut acc = Accumulator::new(3);
        acc.sum = CMat::from_diagonal(&crate::CVec::from_vec(vec![re(3.0), re(1.0), re(0.0)]));
        acc.count = 1;
        let w = baseline_beams(&acc, 1).unwrap();
        assert!((w.column(0)[0].norm() - 1.0).abs() < 1e-12);
        let w2 = baseline_beams(&acc, 2).unwrap();
        assert!(w2.matrix().row(2).norm() < 1e-12);
        assert!(baseline_beams(&acc, 4).is_err());
    }

    #[test]
    fn beams_capture_top_eigenvalue_sum() {
        let mut rng = rng_from_seed(8);
        let g = complex_normal_matrix(&mut rng, 6, 6);
        let mut acc = Accumulator::new(6);
        acc.sum = &g * g.adjoint();
        acc.count = 1;
        let vals = hermitian_eig(&acc.matrix()).unwrap().values;
        for n in 1..=3 {
            let w = baseline_beams(&acc, n).unwrap();
            let captured = trace_re(&(w.matrix().adjoint() * acc.matrix() * w.matrix()));
            let want: f64 = vals[..n].iter().sum();
            assert!((captured - want).abs() < 1e-8);
        }
    }

    #[test]
    fn baseline_pilot_properties() {
        let q1 = dft_beam_pilot(16, 4).unwrap();
        assert_eq!(baseline_pilots(&q1, 1, 3).unwrap(), q1);
        for t in 2..6 {
            let p = baseline_pilots(&q1, t, 3).unwrap();
            assert!(orthonormality_error(p.matrix()) < 1e-10);
            assert_eq!(p.round(), t);
            // same column space as Q(1)
            let proj = q1.matrix() * q1.matrix().adjoint() * p.matrix();
            assert!(frobenius(&(proj - p.matrix())) < 1e-10);
            assert_eq!(p, baseline_pilots(&q1, t, 3).unwrap());
        }
        assert!(baseline_pilots(&q1, 0, 3).is_err());
    }

    #[test]
    fn codeword_beam_examples() {
        let w = codeword_beam(&identity_pilot(3, 2), &CMat::from_column_slice(2, 1, &[re(1.0), re(0.0)])).unwrap();
        assert_eq!(w.column(0), crate::CVec::from_vec(vec![re(1.0), re(0.0), re(0.0)]));

        let cb = build_multi_layer(4, 2, 8).unwrap();
        let q = random_semiunitary(12, 4, 2).unwrap();
        let p = PilotMatrix::new(q, 1, PilotSource::Custom).unwrap();
        for e in cb.entries() {
            assert!(orthonormality_error(codeword_beam(&p, e).unwrap().matrix()) < 1e-10);
        }
        assert!(codeword_beam(&p, &CMat::identity(3, 1)).is_err());
    }

    #[test]
    fn reported_codeword_is_the_best_codeword_beam() {
        let dccm = make_dccm(12, 2, &[4.0, 1.0], 17).unwrap();
        let cb = build_single_layer(4, 8).unwrap();
        let p = dft_beam_pilot(12, 4).unwrap();
        let r = make_feedback(&dccm, &p, &cb).unwrap();
        let score = |w: &BeamMatrix| trace_re(&(w.matrix().adjoint() * dccm.matrix() * w.matrix()));
        let chosen = score(&codeword_beam(&p, cb.entry(r.pmi).unwrap()).unwrap());
        let best = cb
            .entries()
            .iter()
            .map(|e| score(&codeword_beam(&p, e).unwrap()))
            .fold(f64::NEG_INFINITY, f64::max);
        assert!(chosen <= best + 1e-12);
        assert!(chosen >= best - 1e-9);
    }
}
