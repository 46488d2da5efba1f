//! CGF-like ψ functions, the auxiliary scalars φ, ϕ, g, p, h, closed-form
//! optimal Chernoff parameters, and a generic Chernoff infimum.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Relative distance kept from a finite `θ_max` pole.
pub const BOUNDARY_MARGIN: f64 = 1e-9;

/// A CGF-like function `ψ` on `[0, θ_max)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum PsiFn {
    /// `θ²/2`.
    Normal,
    /// `(e^{θc} - θc - 1)/c²`.
    Poisson { c: f64 },
    /// `θ²/(2(1 - cθ))` on `[0, 1/c)`.
    Gamma { c: f64 },
    /// `θ²ν²/(2σ²)` on `[0, 1/α)`.
    Exponential { nu: f64, alpha: f64, sigma_sq: f64 },
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::Parameter(format!("{name} must be finite and > 0, got {v}")))
    }
}

impl PsiFn {
    pub fn validate(&self) -> Result<()> {
        match *self {
            PsiFn::Normal => Ok(()),
            PsiFn::Poisson { c } | PsiFn::Gamma { c } => positive("c", c),
            PsiFn::Exponential { nu, alpha, sigma_sq } => {
                positive("nu", nu)?;
                positive("alpha", alpha)?;
                positive("sigma_sq", sigma_sq)
            }
        }
    }

    pub fn theta_max(&self) -> f64 {
        match *self {
            PsiFn::Normal | PsiFn::Poisson { .. } => f64::INFINITY,
            PsiFn::Gamma { c } => 1.0 / c,
            PsiFn::Exponential { alpha, .. } => 1.0 / alpha,
        }
    }

    /// Largest θ the optimizers will probe: `θ_max` itself when infinite,
    /// otherwise `(1 - 1e-9)·θ_max`.
    pub fn theta_cap(&self) -> f64 {
        let max = self.theta_max();
        if max.is_finite() {
            max * (1.0 - BOUNDARY_MARGIN)
        } else {
            max
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            PsiFn::Normal => "normal",
            PsiFn::Poisson { .. } => "poisson",
            PsiFn::Gamma { .. } => "gamma",
            PsiFn::Exponential { .. } => "exponential",
        }
    }

    /// `ψ(θ)`, rejecting θ outside `[0, θ_max)`.
    pub fn eval(&self, theta: f64) -> Result<f64> {
        self.validate()?;
        let theta_max = self.theta_max();
        if !(theta >= 0.0 && theta < theta_max) {
            return Err(Error::PsiDomain { theta, theta_max });
        }
        Ok(self.eval_in_domain(theta))
    }

    /// `ψ(θ)` for θ already known to be in the domain.
    pub(crate) fn eval_in_domain(&self, theta: f64) -> f64 {
        match *self {
            PsiFn::Normal => 0.5 * theta * theta,
            PsiFn::Poisson { c } => {
                let x = theta * c;
                let numerator = if x.abs() < 1e-4 {
                    // e^x - x - 1 = x²/2 + x³/6 + x⁴/24 + O(x⁵)
                    x * x * (0.5 + x * (1.0 / 6.0 + x / 24.0))
                } else {
                    x.exp_m1() - x
                };
                numerator / (c * c)
            }
            PsiFn::Gamma { c } => theta * theta / (2.0 * (1.0 - c * theta)),
            PsiFn::Exponential { nu, sigma_sq, .. } => theta * theta * nu * nu / (2.0 * sigma_sq),
        }
    }

    /// Chernoff exponent `ψ(θ)σ² - θr`.
    pub fn chernoff_exponent(&self, theta: f64, sigma_sq: f64, r: f64) -> Result<f64> {
        Ok(self.eval(theta)? * sigma_sq - theta * r)
    }
}

/// `φ(u) = e^u - u - 1`.
pub fn phi(u: f64) -> f64 {
    u.exp_m1() - u
}

/// `ϕ(u) = cosh(u) - 1`, evaluated as `2 sinh²(u/2)`.
pub fn varphi(u: f64) -> f64 {
    let s = (0.5 * u).sinh();
    2.0 * s * s
}

/// `p(u) = min(-u, 1)`.
pub fn p_fn(u: f64) -> f64 {
    (-u).min(1.0)
}

/// `g(u) = e^u + p(u) - 1`; equals φ for `u >= -1` and `e^u` below.
pub fn g_fn(u: f64) -> f64 {
    if u >= -1.0 {
        phi(u)
    } else {
        u.exp()
    }
}

/// `h(u) = (1 + u) log(1 + u) - u` for `u >= 0`.
pub fn h_fn(u: f64) -> f64 {
    if u.abs() < 1e-3 {
        // Σ_{k>=2} (-1)^k u^k / (k(k-1))
        let u2 = u * u;
        u2 * (0.5 - u * (1.0 / 6.0 - u * (1.0 / 12.0 - u * (1.0 / 20.0 - u / 30.0))))
    } else {
        (1.0 + u) * u.ln_1p() - u
    }
}

/// Closed-form Chernoff parameters used by the corollaries.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ThetaRule {
    /// `θ = r/σ²`.
    SubGaussian { sigma_sq: f64 },
    /// `θ = log(1 + cr/σ²)/c`.
    Bennett { c: f64, sigma_sq: f64 },
    /// `θ = r/(σ² + cr)`.
    Bernstein { c: f64, sigma_sq: f64 },
    /// `θ = r/ν²` when `r/ν² < 1/α`, otherwise `(1 - 1e-9)/α`.
    SubExponential { nu: f64, alpha: f64 },
    /// Same parameter as [`ThetaRule::Bennett`], used with the martingale bound.
    MartingaleBernstein { c: f64, sigma_sq: f64 },
}

pub fn theta_star(rule: ThetaRule, r: f64) -> Result<f64> {
    if !(r.is_finite() && r >= 0.0) {
        return Err(Error::Parameter(format!("r must be finite and >= 0, got {r}")));
    }
    match rule {
        ThetaRule::SubGaussian { sigma_sq } => {
            positive("sigma_sq", sigma_sq)?;
            Ok(r / sigma_sq)
        }
        ThetaRule::Bennett { c, sigma_sq } | ThetaRule::MartingaleBernstein { c, sigma_sq } => {
            positive("c", c)?;
            positive("sigma_sq", sigma_sq)?;
            Ok((c * r / sigma_sq).ln_1p() / c)
        }
        ThetaRule::Bernstein { c, sigma_sq } => {
            positive("c", c)?;
            positive("sigma_sq", sigma_sq)?;
            Ok(r / (sigma_sq + c * r))
        }
        ThetaRule::SubExponential { nu, alpha } => {
            positive("nu", nu)?;
            positive("alpha", alpha)?;
            let theta = r / (nu * nu);
            if theta < 1.0 / alpha {
                Ok(theta)
            } else {
                Ok((1.0 - BOUNDARY_MARGIN) / alpha)
            }
        }
    }
}

/// Minimizer and value of `θ ↦ exp(ψ(θ)σ² - θr)` over `[0, θ_max)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChernoffOptimum {
    pub theta: f64,
    pub exponent: f64,
    pub value: f64,
}

const GOLDEN: f64 = 0.618_033_988_749_894_9;
const BRACKET_STEPS: usize = 2_000;
const GOLDEN_STEPS: usize = 400;
const THETA_REL_TOL: f64 = 1e-10;

/// Generic Chernoff infimum by exponential bracketing from θ = 0 followed by
/// golden-section search on the convex exponent.
pub fn chernoff_infimum(psi: &PsiFn, sigma_sq: f64, r: f64) -> Result<ChernoffOptimum> {
    psi.validate()?;
    positive("sigma_sq", sigma_sq)?;
    if !(r.is_finite() && r >= 0.0) {
        return Err(Error::Parameter(format!("r must be finite and >= 0, got {r}")));
    }
    if r == 0.0 {
        return Ok(ChernoffOptimum { theta: 0.0, exponent: 0.0, value: 1.0 });
    }
    let cap = psi.theta_cap();
    let f = |theta: f64| psi.eval_in_domain(theta) * sigma_sq - theta * r;

    let mut best = (0.0, 0.0);
    let mut consider = |theta: f64, value: f64| {
        if value < best.1 {
            best = (theta, value);
        }
    };

    // Start at the sub-Gaussian optimum r/σ², which has the right scale for
    // every family near θ = 0.
    let mut hi = (r / sigma_sq).min(0.5 * cap);
    if !(hi.is_finite() && hi > 0.0) {
        hi = 0.5 * cap.min(1.0);
    }
    let mut lo = 0.0;
    let mut mid_value = f(hi);
    consider(hi, mid_value);
    let (mut a, mut b) = if mid_value >= 0.0 {
        (0.0, hi)
    } else {
        let mut found = None;
        let mut mid = hi;
        for _ in 0..BRACKET_STEPS {
            let next = (2.0 * mid).min(cap);
            let next_value = f(next);
            consider(next, next_value);
            if next_value >= mid_value || next == cap {
                found = Some((lo, next));
                break;
            }
            lo = mid;
            mid = next;
            mid_value = next_value;
        }
        found.ok_or_else(|| Error::Internal(format!("Chernoff exponent for {psi:?} appears unbounded below")))?
    };

    let mut x1 = b - GOLDEN * (b - a);
    let mut x2 = a + GOLDEN * (b - a);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    consider(x1, f1);
    consider(x2, f2);
    for _ in 0..GOLDEN_STEPS {
        if b - a <= THETA_REL_TOL * 0.5 * (a.abs() + b.abs()) {
            break;
        }
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - GOLDEN * (b - a);
            f1 = f(x1);
            consider(x1, f1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + GOLDEN * (b - a);
            f2 = f(x2);
            consider(x2, f2);
        }
    }
    let fb = f(b);
    consider(b, fb);

    let (theta, exponent) = best;
    if !exponent.is_finite() {
        return Err(Error::Internal(format!("non-finite Chernoff exponent at theta = {theta}")));
    }
    Ok(ChernoffOptimum { theta, exponent, value: exponent.exp() })
}
