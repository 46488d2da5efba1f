//! Reproducible random-matrix sequences with known theoretical parameters.
//!
//! Every draw is a deterministic function of `(seed_root, path_index, step)`;
//! see [`crate::rng`].

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::martingale::ConditionalMoments;
use crate::psi::PsiFn;
use crate::rng::step_rng;
use crate::specmat::SymMatrix;
use crate::{Error, Result};

/// Attempts per step before a clipped draw gives up.
pub const MAX_REJECTIONS: usize = 100_000;

/// `E|γ|³` for a standard normal γ.
const GAUSSIAN_ABS_THIRD: f64 = 1.595_769_121_605_730_7;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleConfig {
    pub seed_root: u64,
    pub family: EnsembleFamily,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EnsembleFamily {
    /// `X_i = ε_i A_i` with independent Rademacher signs.
    RademacherSeries { coeffs: Vec<SymMatrix> },
    /// `X_i = γ_i A_i` with independent standard normals.
    GaussianSeries { coeffs: Vec<SymMatrix> },
    /// `X_i = v vᵀ - Σ` with `v ~ N(0, Σ)`, redrawn while `‖v vᵀ - Σ‖ > clip`.
    BoundedCovariance { pop_dim: usize, pop_cov: SymMatrix, clip: f64, n: usize },
    /// `X_t = ε_t (A + κ tanh(S_{t-1}))`, conditionally symmetric with
    /// `‖X_t‖ <= ‖A‖ + κ`.
    CondSymMartingale { base: SymMatrix, drive: f64, n: usize },
}

/// Analytic parameters of the first `n` steps.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TheoreticalParams {
    pub sigma_sq: f64,
    pub c_bound: Option<f64>,
    pub v_n: SymMatrix,
    pub trace_v: f64,
    pub d_prime: f64,
    pub psi_valid: Vec<PsiFn>,
}

impl EnsembleFamily {
    pub fn label(&self) -> &'static str {
        match self {
            EnsembleFamily::RademacherSeries { .. } => "rademacher_series",
            EnsembleFamily::GaussianSeries { .. } => "gaussian_series",
            EnsembleFamily::BoundedCovariance { .. } => "bounded_covariance",
            EnsembleFamily::CondSymMartingale { .. } => "cond_sym_martingale",
        }
    }
}

impl EnsembleConfig {
    pub fn new(seed_root: u64, family: EnsembleFamily) -> Result<Self> {
        let config = EnsembleConfig { seed_root, family };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        match &self.family {
            EnsembleFamily::RademacherSeries { coeffs } | EnsembleFamily::GaussianSeries { coeffs } => {
                let first = coeffs.first().ok_or_else(|| Error::Parameter("coeffs must be non-empty".into()))?;
                for a in coeffs {
                    if a.dim() != first.dim() {
                        return Err(Error::DimensionMismatch { left: first.dim(), right: a.dim() });
                    }
                }
                Ok(())
            }
            EnsembleFamily::BoundedCovariance { pop_dim, pop_cov, clip, n } => {
                if *pop_dim != pop_cov.dim() {
                    return Err(Error::DimensionMismatch { left: *pop_dim, right: pop_cov.dim() });
                }
                pop_cov.check_psd()?;
                if !(clip.is_finite() && *clip > 0.0) {
                    return Err(Error::Parameter(format!("clip must be finite and > 0, got {clip}")));
                }
                if *n == 0 {
                    return Err(Error::Parameter("n must be >= 1".into()));
                }
                Ok(())
            }
            EnsembleFamily::CondSymMartingale { drive, n, .. } => {
                if !(drive.is_finite() && *drive >= 0.0) {
                    return Err(Error::Parameter(format!("drive must be finite and >= 0, got {drive}")));
                }
                if *n == 0 {
                    return Err(Error::Parameter("n must be >= 1".into()));
                }
                Ok(())
            }
        }
    }

    pub fn dim(&self) -> usize {
        match &self.family {
            EnsembleFamily::RademacherSeries { coeffs } | EnsembleFamily::GaussianSeries { coeffs } => {
                coeffs.first().map_or(0, SymMatrix::dim)
            }
            EnsembleFamily::BoundedCovariance { pop_cov, .. } => pop_cov.dim(),
            EnsembleFamily::CondSymMartingale { base, .. } => base.dim(),
        }
    }

    /// Longest path the configuration defines.
    pub fn max_len(&self) -> usize {
        match &self.family {
            EnsembleFamily::RademacherSeries { coeffs } | EnsembleFamily::GaussianSeries { coeffs } => coeffs.len(),
            EnsembleFamily::BoundedCovariance { n, .. } | EnsembleFamily::CondSymMartingale { n, .. } => *n,
        }
    }

    /// Are the increments independent?
    pub fn is_independent(&self) -> bool {
        !matches!(self.family, EnsembleFamily::CondSymMartingale { .. })
    }

    /// Does `X_t` have the same conditional law as `-X_t`?
    pub fn is_conditionally_symmetric(&self) -> bool {
        !matches!(self.family, EnsembleFamily::BoundedCovariance { .. })
    }

    /// Almost-sure bound on `‖X_t‖` over the first `n` steps.
    pub fn c_bound(&self, n: usize) -> Option<f64> {
        match &self.family {
            EnsembleFamily::RademacherSeries { coeffs } => {
                Some(coeffs.iter().take(n).map(SymMatrix::op_norm).fold(0.0, f64::max))
            }
            EnsembleFamily::GaussianSeries { .. } => None,
            EnsembleFamily::BoundedCovariance { clip, .. } => Some(*clip),
            EnsembleFamily::CondSymMartingale { base, drive, .. } => Some(base.op_norm() + drive),
        }
    }

    fn check_len(&self, n: usize) -> Result<()> {
        if n == 0 || n > self.max_len() {
            return Err(Error::Parameter(format!("n = {n} outside 1..={} for this ensemble", self.max_len())));
        }
        Ok(())
    }

    /// Validated sampler with per-configuration precomputation.
    pub fn sampler(&self) -> Result<Sampler<'_>> {
        self.validate()?;
        let pop_sqrt = match &self.family {
            EnsembleFamily::BoundedCovariance { pop_cov, .. } => Some(pop_cov.apply_spectral_fn(|u| u.max(0.0).sqrt())?),
            _ => None,
        };
        Ok(Sampler { config: self, pop_sqrt })
    }

    /// `X_1..X_n` of path `path_index`.
    pub fn sample_path(&self, path_index: u64, n: usize) -> Result<Vec<SymMatrix>> {
        self.sampler()?.path(path_index, n)
    }

    pub fn theoretical_params(&self, n: usize) -> Result<TheoreticalParams> {
        self.validate()?;
        self.check_len(n)?;
        let dim = self.dim();
        let c_bound = self.c_bound(n);
        let mut v_n = SymMatrix::zeros(dim);
        let psi_valid = match &self.family {
            EnsembleFamily::RademacherSeries { coeffs } | EnsembleFamily::GaussianSeries { coeffs } => {
                for a in &coeffs[..n] {
                    v_n.add_assign(&a.square());
                }
                bounded_psi(c_bound, true)
            }
            EnsembleFamily::BoundedCovariance { pop_cov, .. } => {
                // Gaussian fourth moment: E(v vᵀ)² = 2Σ² + tr(Σ)Σ, before clipping.
                let mut per_step = pop_cov.square();
                per_step.add_scaled_assign(pop_cov.trace(), pop_cov);
                v_n.add_scaled_assign(n as f64, &per_step);
                bounded_psi(c_bound, false)
            }
            EnsembleFamily::CondSymMartingale { base, drive, .. } => {
                if *drive == 0.0 {
                    let per_step = base.square();
                    for _ in 0..n {
                        v_n.add_assign(&per_step);
                    }
                } else {
                    // Deterministic dominator of Σ B_t² since ‖B_t‖ <= ‖A‖ + κ.
                    let c = base.op_norm() + drive;
                    v_n = SymMatrix::identity(dim).scale(n as f64 * c * c);
                }
                bounded_psi(c_bound, true)
            }
        };
        let sigma_sq = v_n.op_norm();
        if sigma_sq == 0.0 {
            return Err(Error::Parameter("degenerate ensemble: V_n = 0".into()));
        }
        let trace_v = v_n.trace();
        Ok(TheoreticalParams { sigma_sq, c_bound, v_n, trace_v, d_prime: trace_v / sigma_sq, psi_valid })
    }

    /// `E_{t-1}` moments of `X_t` given the prefix sum `S_{t-1}`; `t` is 1-based.
    pub fn conditional_moments(&self, t: usize, prefix: &SymMatrix) -> Result<ConditionalMoments> {
        self.check_len(t)?;
        if prefix.dim() != self.dim() {
            return Err(Error::DimensionMismatch { left: self.dim(), right: prefix.dim() });
        }
        match &self.family {
            EnsembleFamily::RademacherSeries { coeffs } => Ok(symmetric_moments(&coeffs[t - 1], 1.0, true)?),
            EnsembleFamily::GaussianSeries { coeffs } => {
                Ok(symmetric_moments(&coeffs[t - 1], GAUSSIAN_ABS_THIRD, false)?)
            }
            EnsembleFamily::CondSymMartingale { base, drive, .. } => {
                Ok(symmetric_moments(&cond_sym_coeff(base, *drive, prefix)?, 1.0, true)?)
            }
            EnsembleFamily::BoundedCovariance { .. } => Err(Error::Unsupported {
                op: "conditional_moments",
                ensemble: "bounded_covariance",
                reason: "rejection clipping has no closed-form conditional moments".into(),
            }),
        }
    }

    /// `E_{t-1} X_t²` where `history = X_1..X_{t-1}`.
    pub fn conditional_second_moment(&self, history: &[SymMatrix]) -> Result<SymMatrix> {
        let mut prefix = SymMatrix::zeros(self.dim());
        for x in history {
            prefix = prefix.checked_add(x)?;
        }
        Ok(self.conditional_moments(history.len() + 1, &prefix)?.second)
    }
}

fn bounded_psi(c_bound: Option<f64>, symmetric: bool) -> Vec<PsiFn> {
    let mut out = Vec::new();
    if symmetric {
        out.push(PsiFn::Normal);
    }
    if let Some(c) = c_bound.filter(|c| *c > 0.0) {
        out.push(PsiFn::Poisson { c });
        out.push(PsiFn::Gamma { c: c / 3.0 });
    }
    out
}

/// Moments of `ξB` for a symmetric scalar ξ with `E ξ² = 1` and `E|ξ|³ = abs_third`.
fn symmetric_moments(b: &SymMatrix, abs_third: f64, bounded: bool) -> Result<ConditionalMoments> {
    let second = b.square();
    Ok(ConditionalMoments {
        neg_second: Some(second.scale(0.5)),
        abs_third: Some(b.apply_spectral_fn(|u| abs_third * u.abs().powi(3))?),
        hoeffding_sq: bounded.then(|| second.clone()),
        second,
    })
}

fn cond_sym_coeff(base: &SymMatrix, drive: f64, prefix: &SymMatrix) -> Result<SymMatrix> {
    if drive == 0.0 {
        return Ok(base.clone());
    }
    let mut b = base.clone();
    b.add_scaled_assign(drive, &prefix.apply_spectral_fn(f64::tanh)?);
    Ok(b)
}

/// Validated view of an [`EnsembleConfig`] ready to draw paths.
#[derive(Debug, Clone)]
pub struct Sampler<'a> {
    config: &'a EnsembleConfig,
    pop_sqrt: Option<SymMatrix>,
}

impl Sampler<'_> {
    pub fn config(&self) -> &EnsembleConfig {
        self.config
    }

    /// `X_1..X_n` of path `path_index`.
    pub fn path(&self, path_index: u64, n: usize) -> Result<Vec<SymMatrix>> {
        self.config.check_len(n)?;
        let root = self.config.seed_root;
        let sign = |t: usize| if step_rng(root, path_index, t as u64).random::<bool>() { 1.0 } else { -1.0 };
        match &self.config.family {
            EnsembleFamily::RademacherSeries { coeffs } => {
                Ok(coeffs[..n].iter().enumerate().map(|(i, a)| a.scale(sign(i + 1))).collect())
            }
            EnsembleFamily::GaussianSeries { coeffs } => Ok(coeffs[..n]
                .iter()
                .enumerate()
                .map(|(i, a)| {
                    let gamma: f64 = step_rng(root, path_index, i as u64 + 1).sample(StandardNormal);
                    a.scale(gamma)
                })
                .collect()),
            EnsembleFamily::CondSymMartingale { base, drive, .. } => {
                let mut prefix = SymMatrix::zeros(base.dim());
                let mut out = Vec::with_capacity(n);
                for t in 1..=n {
                    let x = cond_sym_coeff(base, *drive, &prefix)?.scale(sign(t));
                    prefix.add_assign(&x);
                    out.push(x);
                }
                Ok(out)
            }
            EnsembleFamily::BoundedCovariance { pop_cov, clip, .. } => {
                let root_cov = self.pop_sqrt.as_ref().expect("computed for bounded_covariance");
                (1..=n).map(|t| draw_clipped(root_cov, pop_cov, *clip, root, path_index, t)).collect()
            }
        }
    }
}

fn draw_clipped(
    root_cov: &SymMatrix,
    pop_cov: &SymMatrix,
    clip: f64,
    root: u64,
    path_index: u64,
    t: usize,
) -> Result<SymMatrix> {
    let dim = pop_cov.dim();
    let mut rng = step_rng(root, path_index, t as u64);
    for _ in 0..MAX_REJECTIONS {
        let z = nalgebra::DVector::from_fn(dim, |_, _| rng.sample::<f64, _>(StandardNormal));
        let v = root_cov.as_dmatrix() * z;
        let x = SymMatrix::from_dmatrix(&v * v.transpose() - pop_cov.as_dmatrix())?;
        if x.op_norm() <= clip {
            return Ok(x);
        }
    }
    Err(Error::Resource(format!(
        "no draw with ‖v vᵀ - Σ‖ <= {clip} in {MAX_REJECTIONS} attempts at step {t} of path {path_index}"
    )))
}
