//! Evidence maximization for the regularization weight.
//!
//! With the phases frozen at `φ̂_t`, the AM objective is the MAP problem of a
//! linear-Gaussian model `y = Φw + noise`, `y_t = √η(t)`, noise precision
//! `β` and prior `w ~ N(0, α⁻¹I)`, so `λ = α/β`. The hyperparameters are
//! found with the classic fixed-point updates
//!
//! ```text
//! γ = Σ_i μ_i / (α + μ_i),   μ_i = β·eig_i(ΦᴴΦ)
//! α ← γ / mᴴm
//! 1/β ← ‖y − Φm‖² / (T − γ)
//! ```
//!
//! where `m = β B⁻¹ Φᴴ y` and `B = αI + βΦᴴΦ`. `ΦᴴΦ` is diagonalized once;
//! every iterate reuses that basis, since scaling by `β` only rescales the
//! spectrum.

use std::f64::consts::PI;

use crate::am_estimator::{phase_update, AmProblem};
use crate::channel_model::hermitian_eig;
use crate::error::{arg_err, dim_err, Error, Result};
use crate::linalg::{hermitian_part, HpdSolver};
use crate::{CMat, CVec, C64};

pub const MIN_PRECISION: f64 = 1e-8;
pub const MAX_PRECISION: f64 = 1e8;

/// `T − γ` at or below this aborts the fixed point.
pub const MIN_RESIDUAL_DOF: f64 = 1e-6;

/// Bayesian linear-regression view of a phase-frozen AM problem.
#[derive(Debug, Clone)]
pub struct EvidenceProblem {
    /// `T × N`.
    design: CMat,
    targets: CVec,
    reference_w: Option<CVec>,
}

impl EvidenceProblem {
    pub fn new(design: CMat, targets: &[f64]) -> Result<Self> {
        if design.nrows() != targets.len() {
            return Err(dim_err(format!("{} design rows for {} targets", design.nrows(), targets.len())));
        }
        if targets.iter().any(|y| !y.is_finite() || *y < 0.0) {
            return Err(arg_err("targets must be finite and non-negative"));
        }
        let targets = CVec::from_iterator(targets.len(), targets.iter().map(|y| C64::new(*y, 0.0)));
        Ok(Self { design, targets, reference_w: None })
    }

    pub fn design(&self) -> &CMat {
        &self.design
    }

    pub fn targets(&self) -> &CVec {
        &self.targets
    }

    pub fn reference_w(&self) -> Option<&CVec> {
        self.reference_w.as_ref()
    }

    pub fn dim(&self) -> usize {
        self.design.ncols()
    }

    pub fn len(&self) -> usize {
        self.design.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.design.nrows() == 0
    }

    fn gram(&self) -> CMat {
        hermitian_part(&self.design.ad_mul(&self.design))
    }
}

/// Freeze the phases against `reference_w`: row `t` becomes
/// `e^{jφ̂_t} q_tᴴ`, target `√η(t)`.
pub fn build_design(problem: &AmProblem, reference_w: &CVec) -> Result<EvidenceProblem> {
    if reference_w.norm() == 0.0 {
        return Err(arg_err("reference beam is zero"));
    }
    let phases = phase_update(problem, reference_w)?;
    let mut design = problem.directions().adjoint();
    for (t, ph) in phases.iter().enumerate() {
        for j in 0..design.ncols() {
            design[(t, j)] *= ph;
        }
    }
    let mut ev = EvidenceProblem::new(design, problem.targets())?;
    ev.reference_w = Some(reference_w.clone());
    Ok(ev)
}

fn check_precisions(alpha: f64, beta: f64) -> Result<()> {
    if !(alpha.is_finite() && alpha > 0.0 && beta.is_finite() && beta > 0.0) {
        return Err(arg_err(format!("precisions must be positive, got alpha={alpha}, beta={beta}")));
    }
    Ok(())
}

fn precision_matrix(p: &EvidenceProblem, alpha: f64, beta: f64) -> CMat {
    let mut b = p.gram() * C64::new(beta, 0.0);
    for i in 0..b.nrows() {
        b[(i, i)] += C64::new(alpha, 0.0);
    }
    b
}

/// `m = β B⁻¹ Φᴴ y`.
pub fn posterior_mean(p: &EvidenceProblem, alpha: f64, beta: f64) -> Result<CVec> {
    check_precisions(alpha, beta)?;
    let solver = HpdSolver::new(&precision_matrix(p, alpha, beta))?;
    let rhs = p.design.ad_mul(&p.targets) * C64::new(beta, 0.0);
    solver.solve(&rhs)
}

/// `(N/2)ln α + (T/2)ln β − E(m) − ½ln|B| − (T/2)ln 2π`.
pub fn log_evidence(p: &EvidenceProblem, alpha: f64, beta: f64) -> Result<f64> {
    check_precisions(alpha, beta)?;
    let solver = HpdSolver::new(&precision_matrix(p, alpha, beta))?;
    let rhs = p.design.ad_mul(&p.targets) * C64::new(beta, 0.0);
    let m = solver.solve(&rhs)?;
    let resid = (&p.targets - &p.design * &m).norm_squared();
    let energy = 0.5 * beta * resid + 0.5 * alpha * m.norm_squared();
    let (n, t) = (p.dim() as f64, p.len() as f64);
    Ok(0.5 * n * alpha.ln() + 0.5 * t * beta.ln() - energy - 0.5 * solver.ln_det() - 0.5 * t * (2.0 * PI).ln())
}

/// Eigenvalues of `ΦᴴΦ`, descending, clipped at zero.
pub fn design_spectrum(p: &EvidenceProblem) -> Result<Vec<f64>> {
    Ok(hermitian_eig(&p.gram())?.values.into_iter().map(|v| v.max(0.0)).collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HyperParams {
    pub alpha: f64,
    pub beta: f64,
    /// `α / β`.
    pub lambda: f64,
    /// Effective number of well-determined parameters at the last update.
    pub gamma_eff: f64,
    pub iterations: usize,
    pub converged: bool,
    /// `α` or `β` ended on a clamp bound.
    pub clamped: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TunerConfig {
    pub tol: f64,
    pub max_iter: usize,
    /// Used whenever the fixed point cannot produce a trustworthy value.
    pub fallback_lambda: f64,
}

impl Default for TunerConfig {
    fn default() -> Self {
        Self { tol: 1e-6, max_iter: 200, fallback_lambda: 1.0 }
    }
}

/// `ΦᴴΦ = V diag(s) Vᴴ` plus the pieces every update needs.
struct Spectrum {
    values: Vec<f64>,
    vectors: CMat,
    /// `Vᴴ Φᴴ y`.
    projected: CVec,
}

impl Spectrum {
    fn new(p: &EvidenceProblem) -> Result<Self> {
        let eig = hermitian_eig(&p.gram())?;
        let top = eig.values.first().copied().unwrap_or(0.0).max(0.0);
        // roundoff-level eigenvalues belong to the null space
        let floor = top * 1e-13;
        let values = eig.values.iter().map(|v| if *v > floor { *v } else { 0.0 }).collect();
        let projected = eig.vectors.ad_mul(&p.design.ad_mul(&p.targets));
        Ok(Self { values, vectors: eig.vectors, projected })
    }
}

struct Update {
    gamma: f64,
    alpha: f64,
    beta: f64,
}

fn update(p: &EvidenceProblem, s: &Spectrum, alpha: f64, beta: f64) -> Result<Update> {
    let mut gamma = 0.0;
    let mut coords = CVec::zeros(s.values.len());
    for (i, ev) in s.values.iter().enumerate() {
        let mu = beta * ev;
        gamma += mu / (alpha + mu);
        coords[i] = s.projected[i] * (beta / (alpha + mu));
    }
    let t = p.len() as f64;
    let dof = t - gamma;
    if dof <= MIN_RESIDUAL_DOF {
        return Err(Error::Underdetermined(dof));
    }
    let m = &s.vectors * &coords;
    let mm = m.norm_squared();
    let resid = (&p.targets - &p.design * &m).norm_squared();
    let alpha_new = if mm > 0.0 { gamma / mm } else { MAX_PRECISION };
    let beta_new = if resid > 0.0 { dof / resid } else { MAX_PRECISION };
    Ok(Update {
        gamma,
        alpha: alpha_new.clamp(MIN_PRECISION, MAX_PRECISION),
        beta: beta_new.clamp(MIN_PRECISION, MAX_PRECISION),
    })
}

fn on_bound(x: f64) -> bool {
    x <= MIN_PRECISION || x >= MAX_PRECISION
}

/// Fixed-point evidence maximization from `(alpha0, beta0)`.
pub fn fixed_point(p: &EvidenceProblem, alpha0: f64, beta0: f64, config: &TunerConfig) -> Result<HyperParams> {
    check_precisions(alpha0, beta0)?;
    if p.len() < 2 {
        return Err(arg_err(format!("evidence maximization needs T >= 2, got {}", p.len())));
    }
    if !config.tol.is_finite() || config.tol <= 0.0 || config.max_iter == 0 {
        return Err(arg_err("fixed point needs tol > 0 and max_iter >= 1"));
    }
    let spectrum = Spectrum::new(p)?;
    let (mut alpha, mut beta) = (alpha0.clamp(MIN_PRECISION, MAX_PRECISION), beta0.clamp(MIN_PRECISION, MAX_PRECISION));
    let mut gamma = 0.0;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < config.max_iter {
        iterations += 1;
        let u = update(p, &spectrum, alpha, beta)?;
        let da = (u.alpha - alpha).abs() / alpha;
        let db = (u.beta - beta).abs() / beta;
        gamma = u.gamma;
        alpha = u.alpha;
        beta = u.beta;
        if da < config.tol && db < config.tol {
            converged = true;
            break;
        }
    }
    Ok(HyperParams {
        alpha,
        beta,
        lambda: alpha / beta,
        gamma_eff: gamma,
        iterations,
        converged,
        clamped: on_bound(alpha) || on_bound(beta),
    })
}

/// Relative change each update equation would still make at `hp`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpdateResiduals {
    pub gamma: f64,
    pub alpha: f64,
    pub beta: f64,
}

impl UpdateResiduals {
    pub fn max(&self) -> f64 {
        self.gamma.max(self.alpha).max(self.beta)
    }
}

pub fn update_residuals(p: &EvidenceProblem, hp: &HyperParams) -> Result<UpdateResiduals> {
    let spectrum = Spectrum::new(p)?;
    let u = update(p, &spectrum, hp.alpha, hp.beta)?;
    Ok(UpdateResiduals {
        gamma: (u.gamma - hp.gamma_eff).abs() / u.gamma.max(f64::MIN_POSITIVE),
        alpha: (u.alpha - hp.alpha).abs() / hp.alpha,
        beta: (u.beta - hp.beta).abs() / hp.beta,
    })
}

/// How a regularization weight was chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LambdaChoice {
    pub lambda: f64,
    pub hyper: Option<HyperParams>,
    pub fell_back: bool,
}

/// Evidence-based `λ` for `problem` with phases frozen at `reference_w`.
/// Falls back to `config.fallback_lambda` when there are fewer than two
/// records, the reference is zero, the noise estimate is underdetermined, or
/// a precision ends on its clamp.
pub fn tune_lambda(
    problem: &AmProblem,
    reference_w: &CVec,
    alpha0: f64,
    beta0: f64,
    config: &TunerConfig,
) -> LambdaChoice {
    let fallback = LambdaChoice { lambda: config.fallback_lambda, hyper: None, fell_back: true };
    if problem.len() < 2 {
        return fallback;
    }
    let Ok(design) = build_design(problem, reference_w) else {
        return fallback;
    };
    match fixed_point(&design, alpha0, beta0, config) {
        Ok(hp) if !hp.clamped && hp.lambda.is_finite() && hp.lambda > 0.0 => {
            LambdaChoice { lambda: hp.lambda, hyper: Some(hp), fell_back: false }
        }
        Ok(hp) => LambdaChoice { hyper: Some(hp), ..fallback },
        Err(_) => fallback,
    }
}
