//! Freedman-type bounds under martingale dependence and the variance
//! processes that make `R_t = tr exp(θS_t - ψ(θ)V_t)` a supermartingale.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::bounds::E_OVER_E_MINUS_ONE;
use crate::policy::NumericPolicy;
use crate::psi::{chernoff_infimum, theta_star, PsiFn, ThetaRule};
use crate::specmat::SymMatrix;
use crate::{Error, Result};

/// Variance processes from the supermartingale catalog.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum VProcessKind {
    /// `[S]_t = Σ X_i²`.
    #[serde(rename = "bracket")]
    Bracket,
    /// `⟨S⟩_t = Σ E_{i-1} X_i²`.
    #[serde(rename = "predictable")]
    Predictable,
    /// `[S+]_t = Σ max(0, X_i)²`.
    #[serde(rename = "pospart")]
    PositivePart,
    /// `⟨S-⟩_t = Σ E_{i-1} min(0, X_i)²`.
    #[serde(rename = "negpred")]
    NegativePredictable,
    /// `([S]_t + 2⟨S⟩_t)/3`.
    #[serde(rename = "selfnorm1")]
    SelfNormI,
    /// `([S+]_t + ⟨S-⟩_t)/2`.
    #[serde(rename = "selfnorm2")]
    SelfNormII,
    /// `Σ A_i²` for `X_i² ⪯ A_i²`.
    #[serde(rename = "hoeffding")]
    HoeffdingSum,
    /// `[S]_t + Σ E_{i-1}|X_i|³`.
    #[serde(rename = "cubic")]
    Cubic,
    /// `⟨S⟩_t`, paired with the Poisson ψ for bounded increments.
    #[serde(rename = "bennett")]
    BennettPredictable,
    /// `Σ ΔV_i` with `ΔV_i = E_{i-1} X_i²` under a Bernstein moment condition.
    #[serde(rename = "bernstein")]
    BernsteinDeclared,
}

impl VProcessKind {
    pub const ALL: [VProcessKind; 10] = [
        VProcessKind::Bracket,
        VProcessKind::Predictable,
        VProcessKind::PositivePart,
        VProcessKind::NegativePredictable,
        VProcessKind::SelfNormI,
        VProcessKind::SelfNormII,
        VProcessKind::HoeffdingSum,
        VProcessKind::Cubic,
        VProcessKind::BennettPredictable,
        VProcessKind::BernsteinDeclared,
    ];

    pub fn label(self) -> &'static str {
        match self {
            VProcessKind::Bracket => "bracket",
            VProcessKind::Predictable => "predictable",
            VProcessKind::PositivePart => "pospart",
            VProcessKind::NegativePredictable => "negpred",
            VProcessKind::SelfNormI => "selfnorm1",
            VProcessKind::SelfNormII => "selfnorm2",
            VProcessKind::HoeffdingSum => "hoeffding",
            VProcessKind::Cubic => "cubic",
            VProcessKind::BennettPredictable => "bennett",
            VProcessKind::BernsteinDeclared => "bernstein",
        }
    }

    /// Checks that `(self, psi)` is a catalog pairing. `c_bound` is the
    /// almost-sure bound on `‖X_t‖` when the ensemble has one.
    ///
    /// `Bracket` additionally needs conditional symmetry, which only the
    /// ensemble can certify; callers check it separately.
    pub fn check_pairing(self, psi: &PsiFn, c_bound: Option<f64>) -> Result<()> {
        psi.validate()?;
        let fail = |msg: String| Err(Error::Catalog(format!("{} with {psi:?}: {msg}", self.label())));
        match (self, *psi) {
            (VProcessKind::Bracket | VProcessKind::SelfNormI | VProcessKind::SelfNormII | VProcessKind::HoeffdingSum, PsiFn::Normal) => {
                Ok(())
            }
            (VProcessKind::Cubic, PsiFn::Gamma { c }) => {
                if (c - 1.0 / 6.0).abs() <= 1e-12 {
                    Ok(())
                } else {
                    fail(format!("cubic self-normalization requires c = 1/6, got {c}"))
                }
            }
            (VProcessKind::Predictable | VProcessKind::BennettPredictable, PsiFn::Poisson { c }) => match c_bound {
                Some(bound) if c >= bound => Ok(()),
                Some(bound) => fail(format!("requires c >= sup ‖X_t‖ = {bound}, got {c}")),
                None => fail("requires almost surely bounded increments".into()),
            },
            (VProcessKind::BernsteinDeclared, PsiFn::Gamma { c }) => match c_bound {
                // ‖X‖ <= b gives E|X|^k ⪯ ½ k! (b/3)^{k-2} E X²
                Some(bound) if 3.0 * c >= bound => Ok(()),
                Some(bound) => fail(format!("moment condition requires c >= sup ‖X_t‖ / 3 = {}, got {c}", bound / 3.0)),
                None => fail("moment condition is only certified for bounded increments".into()),
            },
            (VProcessKind::PositivePart | VProcessKind::NegativePredictable, _) => {
                fail("component process with no standalone supermartingale pairing".into())
            }
            _ => fail("not a catalog pairing".into()),
        }
    }
}

impl fmt::Display for VProcessKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Conditional moments of `X_t` given the past, supplied by the ensemble.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalMoments {
    /// `E_{t-1} X_t²`.
    pub second: SymMatrix,
    /// `E_{t-1} min(0, X_t)²`.
    pub neg_second: Option<SymMatrix>,
    /// `E_{t-1} |X_t|³`.
    pub abs_third: Option<SymMatrix>,
    /// Predictable `A_t²` with `X_t² ⪯ A_t²`.
    pub hoeffding_sq: Option<SymMatrix>,
}

/// Running value of a variance process along one path.
///
/// Single-owner mutable state: one accumulator per simulated path.
#[derive(Debug, Clone)]
pub struct VProcess {
    kind: VProcessKind,
    dim: usize,
    bracket: Option<SymMatrix>,
    predictable: Option<SymMatrix>,
    pospart: Option<SymMatrix>,
    negpred: Option<SymMatrix>,
    hoeffding: Option<SymMatrix>,
    abs_third: Option<SymMatrix>,
}

impl VProcess {
    pub fn new(kind: VProcessKind, dim: usize) -> Self {
        use VProcessKind::*;
        let zero = || Some(SymMatrix::zeros(dim));
        let pick = |on: bool| if on { zero() } else { None };
        VProcess {
            kind,
            dim,
            bracket: pick(matches!(kind, Bracket | SelfNormI | Cubic)),
            predictable: pick(matches!(kind, Predictable | SelfNormI | BennettPredictable | BernsteinDeclared)),
            pospart: pick(matches!(kind, PositivePart | SelfNormII)),
            negpred: pick(matches!(kind, NegativePredictable | SelfNormII)),
            hoeffding: pick(matches!(kind, HoeffdingSum)),
            abs_third: pick(matches!(kind, Cubic)),
        }
    }

    pub fn kind(&self) -> VProcessKind {
        self.kind
    }

    /// Does this kind consume conditional moments?
    pub fn needs_moments(&self) -> bool {
        self.predictable.is_some() || self.negpred.is_some() || self.hoeffding.is_some() || self.abs_third.is_some()
    }

    /// Accumulates increment `x` (with its conditional moments, if the kind
    /// needs them).
    pub fn step(&mut self, x: &SymMatrix, moments: Option<&ConditionalMoments>) -> Result<()> {
        if x.dim() != self.dim {
            return Err(Error::DimensionMismatch { left: self.dim, right: x.dim() });
        }
        let kind = self.kind;
        let need = |what: &str| Error::MissingMoment(format!("{what} required by the {kind} variance process"));
        if self.needs_moments() && moments.is_none() {
            return Err(need("conditional moments"));
        }
        if let Some(acc) = self.bracket.as_mut() {
            acc.add_assign(&x.square());
        }
        if let Some(acc) = self.pospart.as_mut() {
            acc.add_assign(&x.apply_spectral_fn(|u| if u > 0.0 { u * u } else { 0.0 })?);
        }
        if let Some(m) = moments {
            for (acc, value, what) in [
                (self.predictable.as_mut(), Some(&m.second), "E_{t-1} X_t²"),
                (self.negpred.as_mut(), m.neg_second.as_ref(), "E_{t-1} min(0, X_t)²"),
                (self.hoeffding.as_mut(), m.hoeffding_sq.as_ref(), "a dominating A_t²"),
                (self.abs_third.as_mut(), m.abs_third.as_ref(), "E_{t-1} |X_t|³"),
            ] {
                if let Some(acc) = acc {
                    let value = value.ok_or_else(|| need(what))?;
                    if value.dim() != self.dim {
                        return Err(Error::DimensionMismatch { left: self.dim, right: value.dim() });
                    }
                    acc.add_assign(value);
                }
            }
        }
        Ok(())
    }

    /// Current `V_t`.
    pub fn value(&self) -> SymMatrix {
        use VProcessKind::*;
        let get = |m: &Option<SymMatrix>| m.clone().expect("component allocated for kind");
        match self.kind {
            Bracket => get(&self.bracket),
            Predictable | BennettPredictable | BernsteinDeclared => get(&self.predictable),
            PositivePart => get(&self.pospart),
            NegativePredictable => get(&self.negpred),
            SelfNormI => {
                let mut v = get(&self.bracket);
                v.add_scaled_assign(2.0, self.predictable.as_ref().expect("allocated"));
                v.scale(1.0 / 3.0)
            }
            SelfNormII => {
                let mut v = get(&self.pospart);
                v.add_assign(self.negpred.as_ref().expect("allocated"));
                v.scale(0.5)
            }
            HoeffdingSum => get(&self.hoeffding),
            Cubic => {
                let mut v = get(&self.bracket);
                v.add_assign(self.abs_third.as_ref().expect("allocated"));
                v
            }
        }
    }
}

/// Inputs to the Freedman-type bound on `{λ_max(S_n) >= r, λ_max(V_n) <= σ²}`.
#[derive(Debug, Clone, PartialEq)]
pub struct MartingaleBoundInput {
    /// Eigenvalues of `E V_n`.
    pub ev_spectrum: Vec<f64>,
    pub sigma_sq: f64,
    pub r: f64,
    pub psi: PsiFn,
}

impl MartingaleBoundInput {
    fn validate(&self) -> Result<()> {
        check_spectrum(&self.ev_spectrum)?;
        self.psi.validate()?;
        if !(self.sigma_sq.is_finite() && self.sigma_sq > 0.0) {
            return Err(Error::Parameter(format!("sigma_sq must be finite and > 0, got {}", self.sigma_sq)));
        }
        if !(self.r.is_finite() && self.r >= 0.0) {
            return Err(Error::Parameter(format!("r must be finite and >= 0, got {}", self.r)));
        }
        Ok(())
    }
}

fn check_spectrum(spectrum: &[f64]) -> Result<()> {
    if spectrum.is_empty() {
        return Err(Error::Parameter("E V_n spectrum is empty".into()));
    }
    let scale = spectrum.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let tol = NumericPolicy::global().psd_rel_tol * scale;
    for &lambda in spectrum {
        if !lambda.is_finite() {
            return Err(Error::Parameter(format!("non-finite eigenvalue {lambda} in E V_n")));
        }
        if lambda < -tol {
            return Err(Error::NotPsd { lambda_min: lambda, tol });
        }
    }
    Ok(())
}

fn p_term_unchecked(spectrum: &[f64], scale: f64) -> f64 {
    spectrum.iter().map(|&lambda| (scale * lambda.max(0.0)).min(1.0)).sum()
}

/// `tr p(-scale · E V_n) = Σ_j min(scale·λ_j, 1)`.
pub fn trace_p_term(ev_spectrum: &[f64], scale: f64) -> Result<f64> {
    check_spectrum(ev_spectrum)?;
    if !(scale.is_finite() && scale >= 0.0) {
        return Err(Error::Parameter(format!("scale must be finite and >= 0, got {scale}")));
    }
    Ok(p_term_unchecked(ev_spectrum, scale))
}

/// `(e/(e-1)) · {tr p(-ψ(θ) E V_n) + 1} · exp(ψ(θ)σ² - θr)` at a fixed θ.
pub fn freedman_bound(input: &MartingaleBoundInput, theta: f64) -> Result<f64> {
    input.validate()?;
    let psi_theta = input.psi.eval(theta)?;
    let p = p_term_unchecked(&input.ev_spectrum, psi_theta);
    Ok(E_OVER_E_MINUS_ONE * (p + 1.0) * (psi_theta * input.sigma_sq - theta * input.r).exp())
}

/// Best θ found for [`freedman_bound`] and the bound there.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FreedmanOptimum {
    pub theta: f64,
    pub value: f64,
}

const THETA_GRID_POINTS: usize = 257;

/// Minimum of [`freedman_bound`] over a θ grid that contains the exponent's
/// Chernoff minimizer and, for the Poisson ψ, the closed-form θ*.
///
/// Every θ gives a valid bound, so the minimum over any finite set is one.
pub fn freedman_bound_optimized(input: &MartingaleBoundInput) -> Result<FreedmanOptimum> {
    input.validate()?;
    let chernoff = chernoff_infimum(&input.psi, input.sigma_sq, input.r)?;
    let mut candidates = vec![0.0, chernoff.theta];
    if let PsiFn::Poisson { c } = input.psi {
        candidates.push(theta_star(ThetaRule::MartingaleBernstein { c, sigma_sq: input.sigma_sq }, input.r)?);
    }
    let top = (4.0 * chernoff.theta.max(1e-3)).min(input.psi.theta_cap());
    candidates.extend((1..THETA_GRID_POINTS).map(|k| top * k as f64 / (THETA_GRID_POINTS - 1) as f64));
    let mut best = FreedmanOptimum { theta: 0.0, value: f64::INFINITY };
    for theta in candidates {
        if theta >= input.psi.theta_max() {
            continue;
        }
        let value = freedman_bound(input, theta)?;
        if value < best.value {
            best = FreedmanOptimum { theta, value };
        }
    }
    Ok(best)
}

/// Operator-norm version: union bound over `±S_n`, twice the max-eigenvalue bound.
pub fn freedman_opnorm_bound(input: &MartingaleBoundInput, theta: f64) -> Result<f64> {
    Ok(2.0 * freedman_bound(input, theta)?)
}

fn check_bernstein_args(ev_spectrum: &[f64], sigma_sq: f64, c: f64, r: f64) -> Result<()> {
    check_spectrum(ev_spectrum)?;
    if !(c.is_finite() && c > 0.0) {
        return Err(Error::Parameter(format!("c must be finite and > 0, got {c}")));
    }
    if !(sigma_sq.is_finite() && sigma_sq > 0.0) {
        return Err(Error::Parameter(format!("sigma_sq must be finite and > 0, got {sigma_sq}")));
    }
    if !(r.is_finite() && r >= 0.0) {
        return Err(Error::Parameter(format!("r must be finite and >= 0, got {r}")));
    }
    Ok(())
}

fn bernstein_exponential(sigma_sq: f64, c: f64, r: f64) -> f64 {
    (-r * r / (2.0 * (sigma_sq + r * c / 3.0))).exp()
}

/// Martingale Bernstein bound
/// `(e/(e-1)) · {1 + tr p(-(r/c) E V_n/σ²)} · exp(-r²/(2(σ² + rc/3)))`.
pub fn martingale_bernstein_bound(ev_spectrum: &[f64], sigma_sq: f64, c: f64, r: f64) -> Result<f64> {
    check_bernstein_args(ev_spectrum, sigma_sq, c, r)?;
    let p = p_term_unchecked(ev_spectrum, r / (c * sigma_sq));
    Ok(E_OVER_E_MINUS_ONE * (1.0 + p) * bernstein_exponential(sigma_sq, c, r))
}

/// `(c + √(c² + σ²))/6`, the smallest radius where the prior martingale
/// Bernstein bound applies.
pub fn minsker_threshold(c: f64, sigma_sq: f64) -> f64 {
    (c + (c * c + sigma_sq).sqrt()) / 6.0
}

/// The prior bound `25 · tr p(-(r/c) E V_n/σ²) · exp(-r²/(2(σ² + rc/3)))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MinskerBound {
    pub value: f64,
    pub threshold: f64,
    /// False when `r` is below [`minsker_threshold`]; `value` is then the
    /// bare formula.
    pub valid: bool,
}

pub fn minsker_martingale_bound(ev_spectrum: &[f64], sigma_sq: f64, c: f64, r: f64) -> Result<MinskerBound> {
    check_bernstein_args(ev_spectrum, sigma_sq, c, r)?;
    let p = p_term_unchecked(ev_spectrum, r / (c * sigma_sq));
    let threshold = minsker_threshold(c, sigma_sq);
    Ok(MinskerBound { value: 25.0 * p * bernstein_exponential(sigma_sq, c, r), threshold, valid: r >= threshold })
}
