//! Alternating minimization for single-beam estimation from CQIs.
//!
//! Each feedback round `t` contributes a direction `q_t = Q_eff(t) v_{m₀(t)}`
//! and a target `√η(t)`. The estimator minimizes
//!
//! ```text
//! Σ_t ( |q_tᴴ w| − √η(t) )² + λ‖w‖²
//! ```
//!
//! by introducing one unit-modulus phase per round and alternating between
//! the closed-form phase update and the ridge solve `w = A⁻¹ b` with
//! `A = λI + Σ q_t q_tᴴ` (phase independent, factored once) and
//! `b = Σ √η(t) conj(e^{jφ_t}) q_t`.

use std::fmt::Write as _;

use crate::codebook::Codebook;
use crate::error::{arg_err, dim_err, Result};
use crate::feedback::FeedbackRecord;
use crate::linalg::HpdSolver;
use crate::{CMat, CVec, C64};

/// Below this modulus a phase is left at 1.
pub const DEGENERATE_MODULUS: f64 = 1e-14;

/// Regularized modulus-fitting problem.
#[derive(Debug, Clone)]
pub struct AmProblem {
    /// `N × T`, column `t` is `q_t`.
    directions: CMat,
    /// `√η(t)`.
    targets: Vec<f64>,
    lambda: f64,
}

impl AmProblem {
    /// From precomputed directions `q_t` and (unsquared) CQIs `η(t)`.
    pub fn new(directions: CMat, cqis: &[f64], lambda: f64) -> Result<Self> {
        if directions.ncols() == 0 {
            return Err(arg_err("AM problem needs at least one record"));
        }
        if directions.ncols() != cqis.len() {
            return Err(dim_err(format!("{} directions for {} CQIs", directions.ncols(), cqis.len())));
        }
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(arg_err(format!("lambda must be positive, got {lambda}")));
        }
        if cqis.iter().any(|c| !c.is_finite() || *c < 0.0) {
            return Err(arg_err("CQIs must be finite and non-negative"));
        }
        let targets = cqis.iter().map(|c| c.sqrt()).collect();
        Ok(Self { directions, targets, lambda })
    }

    /// `q_t = P_t v_t` for effective pilots `P_t` (`N × N_P`) and codeword
    /// columns `v_t`.
    pub fn from_parts(effective_pilots: &[CMat], codewords: &[CVec], cqis: &[f64], lambda: f64) -> Result<Self> {
        if effective_pilots.len() != codewords.len() {
            return Err(dim_err(format!(
                "{} pilots for {} codewords",
                effective_pilots.len(),
                codewords.len()
            )));
        }
        let dim = effective_pilots.first().map(|p| p.nrows()).unwrap_or(0);
        let mut cols = Vec::with_capacity(codewords.len());
        for (p, v) in effective_pilots.iter().zip(codewords) {
            if p.nrows() != dim || p.ncols() != v.len() {
                return Err(dim_err(format!(
                    "effective pilot {}x{} with codeword of length {} (dimension {dim})",
                    p.nrows(),
                    p.ncols(),
                    v.len()
                )));
            }
            cols.push(p * v);
        }
        if cols.is_empty() {
            return Err(arg_err("AM problem needs at least one record"));
        }
        Self::new(CMat::from_columns(&cols), cqis, lambda)
    }

    /// Single-stream problem: raw pilots, codeword column `layer`, full CQIs.
    pub fn from_records(records: &[FeedbackRecord], codebook: &Codebook, layer: usize, lambda: f64) -> Result<Self> {
        let pilots: Vec<CMat> = records.iter().map(|r| r.pilot.matrix().clone()).collect();
        let codewords = records
            .iter()
            .map(|r| codebook.column(r.pmi, layer))
            .collect::<Result<Vec<_>>>()?;
        let cqis: Vec<f64> = records.iter().map(|r| r.cqi).collect();
        Self::from_parts(&pilots, &codewords, &cqis, lambda)
    }

    pub fn with_lambda(&self, lambda: f64) -> Result<Self> {
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(arg_err(format!("lambda must be positive, got {lambda}")));
        }
        Ok(Self { lambda, ..self.clone() })
    }

    pub fn directions(&self) -> &CMat {
        &self.directions
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn dim(&self) -> usize {
        self.directions.nrows()
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    /// `a_t = q_tᴴ w` for every round.
    pub fn projections(&self, w: &CVec) -> Result<CVec> {
        if w.len() != self.dim() {
            return Err(dim_err(format!("w has length {} for dimension {}", w.len(), self.dim())));
        }
        Ok(self.directions.ad_mul(w))
    }
}

fn phase_of(a: C64) -> C64 {
    let r = a.norm();
    if r < DEGENERATE_MODULUS {
        C64::new(1.0, 0.0)
    } else {
        a.conj() / r
    }
}

/// Optimal phases `e^{jφ_t} = conj(a_t)/|a_t|` for a fixed `w`.
pub fn phase_update(problem: &AmProblem, w: &CVec) -> Result<Vec<C64>> {
    Ok(problem.projections(w)?.iter().map(|a| phase_of(*a)).collect())
}

/// `A = λI + Σ_t q_t q_tᴴ`.
pub fn assemble_normal_matrix(problem: &AmProblem) -> CMat {
    let d = &problem.directions;
    let n = d.nrows();
    let mut a = d * d.adjoint();
    for i in 0..n {
        a[(i, i)] += C64::new(problem.lambda, 0.0);
    }
    crate::linalg::hermitian_part(&a)
}

/// `b = Σ_t √η(t) conj(phase_t) q_t`.
pub fn assemble_rhs(problem: &AmProblem, phases: &[C64]) -> Result<CVec> {
    if phases.len() != problem.len() {
        return Err(dim_err(format!("{} phases for {} records", phases.len(), problem.len())));
    }
    let weights = CVec::from_iterator(
        phases.len(),
        phases.iter().zip(&problem.targets).map(|(p, y)| p.conj() * *y),
    );
    Ok(&problem.directions * weights)
}

/// Solve `A w = b` for Hermitian positive-definite `A`.
pub fn w_update(a: &CMat, b: &CVec) -> Result<CVec> {
    HpdSolver::new(a)?.solve(b)
}

fn objective_from_projections(problem: &AmProblem, a: &CVec, w: &CVec, phases: &[C64]) -> f64 {
    let fit: f64 = a
        .iter()
        .zip(phases)
        .zip(&problem.targets)
        .map(|((a, p), y)| a.norm_sqr() - 2.0 * y * (a * p).re)
        .sum();
    fit + problem.lambda * w.norm_squared()
}

/// Phase-augmented objective
/// `Σ_t [ |q_tᴴ w|² − 2√η(t) Re{q_tᴴ w · phase_t} ] + λ‖w‖²`.
pub fn objective(problem: &AmProblem, w: &CVec, phases: &[C64]) -> Result<f64> {
    if phases.len() != problem.len() {
        return Err(dim_err(format!("{} phases for {} records", phases.len(), problem.len())));
    }
    let a = problem.projections(w)?;
    Ok(objective_from_projections(problem, &a, w, phases))
}

/// Modulus objective `Σ_t (|q_tᴴ w| − √η(t))² + λ‖w‖²`.
pub fn modulus_objective(problem: &AmProblem, w: &CVec) -> Result<f64> {
    let a = problem.projections(w)?;
    let fit: f64 = a.iter().zip(&problem.targets).map(|(a, y)| (a.norm() - y).powi(2)).sum();
    Ok(fit + problem.lambda * w.norm_squared())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AmConfig {
    /// Stop once the relative objective change drops below this.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for AmConfig {
    fn default() -> Self {
        Self { tol: 1e-8, max_iter: 500 }
    }
}

/// Iterate of the alternating scheme.
#[derive(Debug, Clone)]
pub struct AmState {
    /// Unnormalized beam iterate.
    pub w: CVec,
    pub phases: Vec<C64>,
    pub objective: f64,
    pub iteration: usize,
}

#[derive(Debug, Clone)]
pub struct AmOutcome {
    /// Unit-norm estimate.
    pub beam: CVec,
    pub state: AmState,
    /// Objective after initialization (index 0) and after every iteration.
    pub objectives: Vec<f64>,
    pub converged: bool,
}

impl AmOutcome {
    /// `iteration,objective` lines with header.
    pub fn trace_csv(&self) -> String {
        let mut out = String::from("iteration,objective\n");
        for (i, f) in self.objectives.iter().enumerate() {
            let _ = writeln!(out, "{i},{}", crate::harness::format_sig9(*f));
        }
        out
    }
}

/// Alternate phase and beam updates from `init_w` with all phases at 1.
pub fn run_am(problem: &AmProblem, init_w: &CVec, config: &AmConfig) -> Result<AmOutcome> {
    if !config.tol.is_finite() || config.tol <= 0.0 || config.max_iter == 0 {
        return Err(arg_err("AM needs tol > 0 and max_iter >= 1"));
    }
    if init_w.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(arg_err("initial beam must be finite"));
    }
    let solver = HpdSolver::new(&assemble_normal_matrix(problem))?;

    let mut w = init_w.clone();
    let mut phases = vec![C64::new(1.0, 0.0); problem.len()];
    let mut a = problem.projections(&w)?;
    let mut value = objective_from_projections(problem, &a, &w, &phases);
    let mut objectives = Vec::with_capacity(config.max_iter.min(1024) + 1);
    objectives.push(value);
    let mut converged = false;
    let mut iteration = 0;

    while iteration < config.max_iter {
        iteration += 1;
        phases = a.iter().map(|z| phase_of(*z)).collect();
        let b = assemble_rhs(problem, &phases)?;
        w = solver.solve(&b)?;
        a = problem.projections(&w)?;
        let next = objective_from_projections(problem, &a, &w, &phases);
        objectives.push(next);
        let scale = value.abs().max(next.abs());
        let change = if scale == 0.0 { 0.0 } else { (value - next).abs() / scale };
        value = next;
        if change < config.tol {
            converged = true;
            break;
        }
    }

    let norm = w.norm();
    if !norm.is_finite() || norm <= 0.0 {
        return Err(arg_err("AM estimate vanished (all targets zero?)"));
    }
    Ok(AmOutcome {
        beam: w.unscale(norm),
        state: AmState { w, phases, objective: value, iteration },
        objectives,
        converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::frobenius;
    use crate::rng::{complex_normal_matrix, complex_normal_vector, rng_from_seed};
    use rand::Rng;

    fn re(x: f64) -> C64 {
        C64::new(x, 0.0)
    }

    fn random_problem(n: usize, t: usize, lambda: f64, seed: u64) -> AmProblem {
        let mut rng = rng_from_seed(seed);
        let mut d = complex_normal_matrix(&mut rng, n, t);
        for mut c in d.column_iter_mut() {
            let nrm = c.norm();
            c.unscale_mut(nrm);
        }
        let cqis: Vec<f64> = (0..t).map(|_| rng.random_range(0.0..4.0)).collect();
        AmProblem::new(d, &cqis, lambda).unwrap()
    }

    #[test]
    fn phase_closed_forms() {
        let cases = [
            (re(1.0), re(1.0)),
            (C64::new(0.0, 1.0), C64::new(0.0, -1.0)),
            (C64::new(1.0, 1.0), C64::new(1.0, -1.0) / 2f64.sqrt()),
            (re(0.0), re(1.0)),
        ];
        for (a, expect) in cases {
            // q = e1, w = conj(a) e1  →  qᴴw = a... use w = a e1 with q = e1
            let p = AmProblem::new(CMat::from_column_slice(1, 1, &[re(1.0)]), &[1.0], 1.0).unwrap();
            let w = CVec::from_vec(vec![a]);
            let ph = phase_update(&p, &w).unwrap();
            assert!((ph[0] - expect).norm() < 1e-15, "{a} -> {}", ph[0]);
        }
    }

    #[test]
    fn normal_matrix_small_cases() {
        let p = AmProblem::new(CMat::from_column_slice(2, 1, &[re(1.0), re(0.0)]), &[1.0], 1.0).unwrap();
        let a = assemble_normal_matrix(&p);
        assert!(frobenius(&(a - CMat::from_row_slice(2, 2, &[re(2.0), re(0.0), re(0.0), re(1.0)]))) < 1e-15);

        let s = std::f64::consts::FRAC_1_SQRT_2;
        let p = AmProblem::new(CMat::from_column_slice(2, 1, &[re(s), re(s)]), &[1.0], 0.5).unwrap();
        let a = assemble_normal_matrix(&p);
        assert!(frobenius(&(a - CMat::from_row_slice(2, 2, &[re(1.0), re(0.5), re(0.5), re(1.0)]))) < 1e-15);
    }

    #[test]
    fn normal_matrix_and_rhs_match_loop_sums() {
        let p = random_problem(6, 9, 0.3, 12);
        let mut rng = rng_from_seed(13);
        let phases: Vec<C64> = (0..9).map(|_| C64::from_polar(1.0, rng.random_range(0.0..std::f64::consts::TAU))).collect();
        let mut a = CMat::identity(6, 6) * re(0.3);
        let mut b = CVec::zeros(6);
        for (t, phase) in phases.iter().enumerate() {
            let q = p.directions().column(t);
            for i in 0..6 {
                for j in 0..6 {
                    a[(i, j)] += q[i] * q[j].conj();
                }
                b[i] += phase.conj() * p.targets()[t] * q[i];
            }
        }
        assert!(frobenius(&(assemble_normal_matrix(&p) - a)) < 1e-12);
        assert!((assemble_rhs(&p, &phases).unwrap() - b).norm() < 1e-12);
        assert!(assemble_rhs(&p, &phases[..3]).is_err());
    }

    #[test]
    fn rhs_small_cases() {
        let p = AmProblem::new(CMat::from_column_slice(2, 1, &[re(1.0), re(0.0)]), &[4.0], 1.0).unwrap();
        let b = assemble_rhs(&p, &[re(1.0)]).unwrap();
        assert!((b - CVec::from_vec(vec![re(2.0), re(0.0)])).norm() < 1e-15);
        let z = random_problem(4, 5, 1.0, 3);
        let z = AmProblem::new(z.directions().clone(), &[0.0; 5], 1.0).unwrap();
        assert_eq!(assemble_rhs(&z, &[re(1.0); 5]).unwrap().norm(), 0.0);
    }

    #[test]
    fn w_update_cases() {
        let a = CMat::from_row_slice(2, 2, &[re(2.0), re(0.0), re(0.0), re(1.0)]);
        let w = w_update(&a, &CVec::from_vec(vec![re(2.0), re(0.0)])).unwrap();
        assert!((w - CVec::from_vec(vec![re(1.0), re(0.0)])).norm() < 1e-15);

        let mut rng = rng_from_seed(5);
        let b = complex_normal_vector(&mut rng, 4);
        assert!((w_update(&CMat::identity(4, 4), &b).unwrap() - &b).norm() < 1e-14);

        let g = complex_normal_matrix(&mut rng, 8, 8);
        let a = &g * g.adjoint() + CMat::identity(8, 8) * re(0.1);
        let b = complex_normal_vector(&mut rng, 8);
        let w = w_update(&a, &b).unwrap();
        // dense elimination oracle
        let w_lu = a.clone().lu().solve(&b).unwrap();
        assert!((&a * &w - &b).norm() / b.norm() < 1e-10);
        assert!((&w - &w_lu).norm() / w_lu.norm() < 1e-10);
    }

    #[test]
    fn objective_cases() {
        let p = random_problem(5, 7, 0.7, 21);
        assert_eq!(objective(&p, &CVec::zeros(5), &[re(1.0); 7]).unwrap(), 0.0);

        let p1 = AmProblem::new(CMat::from_column_slice(2, 1, &[re(1.0), re(0.0)]), &[4.0], 1.0).unwrap();
        let w = CVec::from_vec(vec![re(1.0), re(0.0)]);
        assert!((objective(&p1, &w, &[re(1.0)]).unwrap() + 2.0).abs() < 1e-15);

        // with optimal phases, augmented objective = modulus objective − Ση
        let mut rng = rng_from_seed(22);
        let w = complex_normal_vector(&mut rng, 5);
        let ph = phase_update(&p, &w).unwrap();
        let sum_eta: f64 = p.targets().iter().map(|y| y * y).sum();
        let direct = {
            let mut acc = 0.0;
            for t in 0..7 {
                let q = p.directions().column(t);
                let a: C64 = q.iter().zip(w.iter()).map(|(q, w)| q.conj() * w).sum();
                acc += (a.norm() - p.targets()[t]).powi(2);
            }
            acc + 0.7 * w.norm_squared()
        };
        assert!((objective(&p, &w, &ph).unwrap() - (direct - sum_eta)).abs() < 1e-10);
    }

    #[test]
    fn single_record_converges_to_its_direction() {
        let p = random_problem(6, 1, 1.0, 31);
        let mut rng = rng_from_seed(32);
        let init = complex_normal_vector(&mut rng, 6);
        let out = run_am(&p, &init, &AmConfig::default()).unwrap();
        assert!(out.state.iteration <= 2);
        let q = p.directions().column(0).into_owned();
        assert!((out.beam.dotc(&q).norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn descent_on_random_instances() {
        for seed in 0..20 {
            let mut rng = rng_from_seed(1000 + seed);
            let lambda = 10f64.powf(rng.random_range(-2.0..2.0));
            let p = random_problem(12, 20, lambda, seed);
            let init = complex_normal_vector(&mut rng, 12);
            let out = run_am(&p, &init, &AmConfig::default()).unwrap();
            for w in out.objectives.windows(2) {
                assert!(w[1] <= w[0] + 1e-9, "seed {seed}: {} -> {}", w[0], w[1]);
            }
            assert!((out.beam.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn phase_optimality_and_global_phase_invariance() {
        let p = random_problem(8, 10, 0.5, 41);
        let mut rng = rng_from_seed(42);
        for _ in 0..50 {
            let w = complex_normal_vector(&mut rng, 8);
            let ph = phase_update(&p, &w).unwrap();
            let a = p.projections(&w).unwrap();
            for (a, ph) in a.iter().zip(&ph) {
                assert!(((a * ph).re - a.norm()).abs() < 1e-10);
            }
            let rot = C64::from_polar(1.0, rng.random_range(0.0..std::f64::consts::TAU));
            let w2 = &w * rot;
            let ph2 = phase_update(&p, &w2).unwrap();
            let f1 = objective(&p, &w, &ph).unwrap();
            let f2 = objective(&p, &w2, &ph2).unwrap();
            assert!((f1 - f2).abs() < 1e-9);
        }
    }

    #[test]
    fn trace_csv_has_header_and_rows() {
        let p = random_problem(4, 6, 1.0, 51);
        let init = CVec::from_element(4, re(1.0));
        let out = run_am(&p, &init, &AmConfig { tol: 1e-8, max_iter: 5 }).unwrap();
        let csv = out.trace_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "iteration,objective");
        assert_eq!(lines.len(), out.objectives.len() + 1);
    }

    #[test]
    fn invalid_inputs() {
        assert!(AmProblem::new(CMat::zeros(3, 0), &[], 1.0).is_err());
        assert!(AmProblem::new(CMat::zeros(3, 2), &[1.0, 1.0], 0.0).is_err());
        assert!(AmProblem::new(CMat::zeros(3, 2), &[1.0], 1.0).is_err());
        let p = random_problem(3, 2, 1.0, 0);
        assert!(run_am(&p, &CVec::zeros(3), &AmConfig { tol: 0.0, max_iter: 5 }).is_err());
        assert!(run_am(&p, &CVec::zeros(4), &AmConfig::default()).is_err());
    }
}
