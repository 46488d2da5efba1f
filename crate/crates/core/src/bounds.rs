//! Tail bounds for sums of independent random symmetric matrices.
//!
//! Every bound has the shape `C(mode) · d′ · exp(exponent(r))` where
//! `d′ = tr(V)/σ²` is the intrinsic-dimension prefactor and `C(mode)` is
//! `e/(e-1)` for the maximum eigenvalue and `2` for the operator norm. The
//! left-hand side controlled is the prefix supremum `sup_{i<=n}` of
//! `λ_max(S_i)` or `‖S_i‖`.

use std::f64::consts::E;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::psi::{self, chernoff_infimum, h_fn, PsiFn, ThetaRule};
use crate::specmat::SymMatrix;
use crate::{Error, Result};

/// `e/(e-1) ≈ 1.5820`.
pub const E_OVER_E_MINUS_ONE: f64 = E / (E - 1.0);

/// Slack allowed on `d′ >= 1` for proxies assembled in floating point.
const D_PRIME_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    MaxEig,
    OpNorm,
}

impl Mode {
    pub fn prefactor(self) -> f64 {
        match self {
            Mode::MaxEig => E_OVER_E_MINUS_ONE,
            Mode::OpNorm => 2.0,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Mode::MaxEig => "maxeig",
            Mode::OpNorm => "opnorm",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Which inequality produced a [`TailBoundResult`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundKind {
    Master,
    Hoeffding,
    SubGaussian,
    Bennett,
    Bernstein,
    SubExponential,
}

impl BoundKind {
    pub fn label(self) -> &'static str {
        match self {
            BoundKind::Master => "master",
            BoundKind::Hoeffding => "hoeffding",
            BoundKind::SubGaussian => "subgaussian",
            BoundKind::Bennett => "bennett",
            BoundKind::Bernstein => "bernstein",
            BoundKind::SubExponential => "subexponential",
        }
    }
}

impl fmt::Display for BoundKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Variance proxy `V_n` summarized by `tr(V_n)` and `σ² >= ‖V_n‖`.
#[derive(Debug, Clone, PartialEq)]
pub struct VarianceProxy {
    trace_v: f64,
    sigma_sq: f64,
    matrix: Option<SymMatrix>,
}

impl VarianceProxy {
    /// Scalar form. Requires `σ² > 0` and `tr(V)/σ² >= 1`.
    pub fn new(trace_v: f64, sigma_sq: f64) -> Result<Self> {
        if !(sigma_sq.is_finite() && sigma_sq > 0.0) {
            return Err(Error::Parameter(format!("sigma_sq must be finite and > 0, got {sigma_sq}")));
        }
        if !(trace_v.is_finite() && trace_v >= 0.0) {
            return Err(Error::Parameter(format!("trace_V must be finite and >= 0, got {trace_v}")));
        }
        if trace_v < sigma_sq * (1.0 - D_PRIME_SLACK) {
            return Err(Error::Precondition(format!(
                "d′ ≥ 1 violated: trace_V/sigma_sq = {trace_v}/{sigma_sq} = {}",
                trace_v / sigma_sq
            )));
        }
        Ok(Self { trace_v: trace_v.max(sigma_sq), sigma_sq, matrix: None })
    }

    /// Full-matrix form with the tightest legal `σ² = ‖V‖`.
    pub fn from_matrix(v: SymMatrix) -> Result<Self> {
        let norm = v.op_norm();
        Self::from_matrix_with_sigma(v, norm)
    }

    /// Full-matrix form with a caller-chosen `σ² >= ‖V‖`.
    pub fn from_matrix_with_sigma(v: SymMatrix, sigma_sq: f64) -> Result<Self> {
        v.check_psd()?;
        let norm = v.op_norm();
        if norm > sigma_sq + 1e-9 {
            return Err(Error::Precondition(format!("sigma_sq = {sigma_sq} is below ‖V_n‖ = {norm}")));
        }
        let mut proxy = Self::new(v.trace(), sigma_sq)?;
        proxy.matrix = Some(v);
        Ok(proxy)
    }

    pub fn trace_v(&self) -> f64 {
        self.trace_v
    }

    pub fn sigma_sq(&self) -> f64 {
        self.sigma_sq
    }

    pub fn matrix(&self) -> Option<&SymMatrix> {
        self.matrix.as_ref()
    }

    /// `d′ = tr(V_n)/σ²`.
    pub fn d_prime(&self) -> f64 {
        self.trace_v / self.sigma_sq
    }
}

/// A bound value at one radius. `raw` is the formula's value; `clamped`
/// caps it at 1 for reporting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TailBoundResult {
    pub kind: BoundKind,
    pub mode: Mode,
    pub r: f64,
    pub theta: f64,
    pub raw: f64,
    pub clamped: f64,
}

impl TailBoundResult {
    fn new(kind: BoundKind, mode: Mode, r: f64, theta: f64, raw: f64) -> Self {
        Self { kind, mode, r, theta, raw, clamped: raw.min(1.0) }
    }
}

fn check_radius(r: f64) -> Result<()> {
    if r.is_finite() && r >= 0.0 {
        Ok(())
    } else {
        Err(Error::Precondition(format!("r must be finite and >= 0, got {r}")))
    }
}

fn check_d_prime(d_prime: f64) -> Result<f64> {
    if !d_prime.is_finite() || d_prime < 1.0 - D_PRIME_SLACK {
        return Err(Error::Precondition(format!("d′ ≥ 1 required, got d′ = {d_prime}")));
    }
    Ok(d_prime.max(1.0))
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::Parameter(format!("{name} must be finite and > 0, got {v}")))
    }
}

/// `C(mode) · d′ · inf_θ exp(ψ(θ)σ² - θr)` with the generic minimizer.
pub fn master_bound(d_prime: f64, psi: &PsiFn, sigma_sq: f64, r: f64, mode: Mode) -> Result<TailBoundResult> {
    let d_prime = check_d_prime(d_prime)?;
    check_radius(r)?;
    let opt = chernoff_infimum(psi, sigma_sq, r)?;
    let raw = mode.prefactor() * d_prime * opt.value;
    Ok(TailBoundResult::new(BoundKind::Master, mode, r, opt.theta, raw))
}

/// The master bound evaluated at a fixed θ instead of the infimum.
pub fn master_bound_at(
    d_prime: f64,
    psi: &PsiFn,
    sigma_sq: f64,
    r: f64,
    theta: f64,
    mode: Mode,
) -> Result<TailBoundResult> {
    let d_prime = check_d_prime(d_prime)?;
    check_radius(r)?;
    positive("sigma_sq", sigma_sq)?;
    let exponent = psi.chernoff_exponent(theta, sigma_sq, r)?;
    let raw = mode.prefactor() * d_prime * exponent.exp();
    Ok(TailBoundResult::new(BoundKind::Master, mode, r, theta, raw))
}

fn gaussian_tail(kind: BoundKind, vp: &VarianceProxy, r: f64, mode: Mode) -> Result<TailBoundResult> {
    check_radius(r)?;
    let sigma_sq = vp.sigma_sq();
    let theta = psi::theta_star(ThetaRule::SubGaussian { sigma_sq }, r)?;
    let raw = mode.prefactor() * vp.d_prime() * (-r * r / (2.0 * sigma_sq)).exp();
    Ok(TailBoundResult::new(kind, mode, r, theta, raw))
}

/// Hoeffding: `C · d′ · exp(-r²/(2σ²))` for `X_i² ⪯ A_i²`.
pub fn hoeffding_bound(vp: &VarianceProxy, r: f64, mode: Mode) -> Result<TailBoundResult> {
    gaussian_tail(BoundKind::Hoeffding, vp, r, mode)
}

/// Sub-Gaussian (ψ = θ²/2): same displayed formula as Hoeffding.
pub fn subgaussian_bound(vp: &VarianceProxy, r: f64, mode: Mode) -> Result<TailBoundResult> {
    gaussian_tail(BoundKind::SubGaussian, vp, r, mode)
}

/// Bennett: `C · d′ · exp(-(σ²/c²) h(cr/σ²))` for `‖X_i‖ <= c`.
pub fn bennett_bound(vp: &VarianceProxy, c: f64, r: f64, mode: Mode) -> Result<TailBoundResult> {
    positive("c", c)?;
    check_radius(r)?;
    let sigma_sq = vp.sigma_sq();
    let theta = psi::theta_star(ThetaRule::Bennett { c, sigma_sq }, r)?;
    let exponent = -(sigma_sq / (c * c)) * h_fn(c * r / sigma_sq);
    let raw = mode.prefactor() * vp.d_prime() * exponent.exp();
    Ok(TailBoundResult::new(BoundKind::Bennett, mode, r, theta, raw))
}

/// Bernstein: `C · d′ · exp(-r²/(2(σ² + cr)))`.
pub fn bernstein_bound(vp: &VarianceProxy, c: f64, r: f64, mode: Mode) -> Result<TailBoundResult> {
    positive("c", c)?;
    check_radius(r)?;
    let sigma_sq = vp.sigma_sq();
    let theta = psi::theta_star(ThetaRule::Bernstein { c, sigma_sq }, r)?;
    let raw = mode.prefactor() * vp.d_prime() * (-r * r / (2.0 * (sigma_sq + c * r))).exp();
    Ok(TailBoundResult::new(BoundKind::Bernstein, mode, r, theta, raw))
}

/// Sub-exponential: `C · d′ · exp(-min(r²/ν², r/α)/2)`.
pub fn subexponential_bound(
    vp: &VarianceProxy,
    nu: f64,
    alpha: f64,
    r: f64,
    mode: Mode,
) -> Result<TailBoundResult> {
    positive("nu", nu)?;
    positive("alpha", alpha)?;
    check_radius(r)?;
    let theta = psi::theta_star(ThetaRule::SubExponential { nu, alpha }, r)?;
    let exponent = -0.5 * (r * r / (nu * nu)).min(r / alpha);
    let raw = mode.prefactor() * vp.d_prime() * exponent.exp();
    Ok(TailBoundResult::new(BoundKind::SubExponential, mode, r, theta, raw))
}

/// Ambient-dimension sub-Gaussian form `2d exp(-r²/(2σ²))`.
pub fn ambient_subgaussian_bound(d: usize, sigma_sq: f64, r: f64) -> f64 {
    2.0 * d as f64 * (-r * r / (2.0 * sigma_sq)).exp()
}

/// How `sigma` is normalized when passed to [`confidence_radius`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VarianceNormalization {
    /// `σ² = ‖Σ_i E X_i²‖`, the proxy of the whole sum `S_n`.
    #[default]
    PerSum,
    /// `σ² = ‖E X_i²‖`, the per-summand proxy (`n σ²` for the sum).
    PerSample,
}

/// A `(1 - δ)` confidence radius for `‖S_n/n - μ‖`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConfidenceRadius {
    /// Closed form `σ√(2L/n) + cL/(3n)` with per-sample σ.
    pub radius: f64,
    /// Root `t` of `n t² = 2L(σ² + ct/3)`: the radius at which the relaxed
    /// Bennett bound equals δ exactly.
    pub exact_radius: f64,
    /// `L = log((2/δ)·tr(V)/σ²)`.
    pub log_term: f64,
    /// Set when `(2/δ)·tr(V)/σ² < 1`; the radii are then clamped to 0.
    pub degenerate: bool,
}

/// Confidence radius for the empirical mean of `n` bounded summands.
///
/// `sigma` and `trace_v` are interpreted under `normalization`; the trace
/// ratio `tr(V)/σ²` is the same in both normalizations.
pub fn confidence_radius(
    n: usize,
    sigma: f64,
    c: f64,
    trace_v: f64,
    delta: f64,
    normalization: VarianceNormalization,
) -> Result<ConfidenceRadius> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::Parameter(format!("delta must lie in (0, 1), got {delta}")));
    }
    if n == 0 {
        return Err(Error::Parameter("n must be positive".into()));
    }
    positive("sigma", sigma)?;
    positive("c", c)?;
    if !(trace_v.is_finite() && trace_v >= 0.0) {
        return Err(Error::Parameter(format!("trace_V must be finite and >= 0, got {trace_v}")));
    }
    let nf = n as f64;
    let sigma_sq = sigma * sigma;
    let ratio = trace_v / sigma_sq;
    let per_sample_sigma_sq = match normalization {
        VarianceNormalization::PerSum => sigma_sq / nf,
        VarianceNormalization::PerSample => sigma_sq,
    };
    let arg = 2.0 / delta * ratio;
    let log_term = arg.ln();
    if arg < 1.0 {
        return Ok(ConfidenceRadius { radius: 0.0, exact_radius: 0.0, log_term, degenerate: true });
    }
    let radius = (2.0 * per_sample_sigma_sq * log_term / nf).sqrt() + c * log_term / (3.0 * nf);
    let linear = c * log_term / 3.0;
    let exact_radius = (linear + (linear * linear + 2.0 * nf * log_term * per_sample_sigma_sq).sqrt()) / nf;
    Ok(ConfidenceRadius { radius, exact_radius, log_term, degenerate: false })
}

/// Relaxed Bennett bound `2 d′ exp(-n t²/(2(σ² + ct/3)))` on `‖S_n/n‖ >= t`
/// with per-sample `σ²`; the inverse of [`confidence_radius`].
pub fn relaxed_mean_tail(n: usize, per_sample_sigma_sq: f64, c: f64, d_prime: f64, t: f64) -> f64 {
    let nf = n as f64;
    2.0 * d_prime * (-nf * t * t / (2.0 * (per_sample_sigma_sq + c * t / 3.0))).exp()
}
