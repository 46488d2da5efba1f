//! Comparisons with earlier ambient-dimension and intrinsic-dimension bounds.

use serde::Serialize;

use crate::bounds::{ambient_subgaussian_bound, subgaussian_bound, Mode, VarianceProxy, E_OVER_E_MINUS_ONE};
use crate::martingale::{martingale_bernstein_bound, minsker_martingale_bound, trace_p_term};
use crate::specmat::SymMatrix;
use crate::{Error, Result};

/// Prefactor constant of the prior martingale Bernstein bound.
pub const MINSKER_MARTINGALE: f64 = 25.0;

/// Which tail the constant multiplies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Setting {
    OpNorm,
    MaxEig,
    Martingale,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PriorConstant {
    pub source: &'static str,
    pub setting: Setting,
    pub value: f64,
}

pub const PRIOR_CONSTANTS: [PriorConstant; 5] = [
    PriorConstant { source: "minsker", setting: Setting::OpNorm, value: 14.0 },
    PriorConstant { source: "tropp", setting: Setting::OpNorm, value: 8.0 },
    PriorConstant { source: "minsker", setting: Setting::MaxEig, value: 7.0 },
    PriorConstant { source: "tropp", setting: Setting::MaxEig, value: 4.0 },
    PriorConstant { source: "minsker", setting: Setting::Martingale, value: MINSKER_MARTINGALE },
];

/// One line of the constants table: our prefactor against a prior one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConstantRow {
    pub setting: Setting,
    pub source: &'static str,
    pub ours: f64,
    pub prior: f64,
    pub ratio: f64,
}

/// Prefactor constants of the independence bounds against prior ones.
///
/// The martingale comparison is not a scalar ratio; see
/// [`martingale_prefactors`].
pub fn constants_table() -> Vec<ConstantRow> {
    PRIOR_CONSTANTS
        .iter()
        .filter_map(|p| {
            let ours = match p.setting {
                Setting::OpNorm => Mode::OpNorm.prefactor(),
                Setting::MaxEig => Mode::MaxEig.prefactor(),
                Setting::Martingale => return None,
            };
            Some(ConstantRow { setting: p.setting, source: p.source, ours, prior: p.value, ratio: ours / p.value })
        })
        .collect()
}

/// `(e/(e-1))(1 + T)` and `25 T` for a trace term `T = tr p(·)`.
pub fn martingale_prefactors(t: f64) -> (f64, f64) {
    (E_OVER_E_MINUS_ONE * (1.0 + t), MINSKER_MARTINGALE * t)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GapRow {
    pub r: f64,
    pub intrinsic: f64,
    pub ambient: f64,
    /// `intrinsic / ambient = (tr V/σ²)/d`.
    pub ratio: f64,
}

/// Intrinsic-dimension sub-Gaussian bound against the ambient `2d·exp(-r²/(2σ²))`.
pub fn intrinsic_vs_ambient(v: &SymMatrix, sigma_sq: f64, r_grid: &[f64]) -> Result<Vec<GapRow>> {
    let vp = VarianceProxy::from_matrix_with_sigma(v.clone(), sigma_sq)?;
    r_grid
        .iter()
        .map(|&r| {
            let intrinsic = subgaussian_bound(&vp, r, Mode::OpNorm)?.raw;
            let ambient = ambient_subgaussian_bound(v.dim(), sigma_sq, r);
            Ok(GapRow { r, intrinsic, ambient, ratio: vp.d_prime() / v.dim() as f64 })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SharpeningRow {
    pub r: f64,
    pub ours: f64,
    pub prior: f64,
    pub ratio: f64,
    /// `r` lies in the prior bound's validity region.
    pub valid: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SharpeningReport {
    pub rows: Vec<SharpeningRow>,
    pub threshold: f64,
    /// `σ² <= λ_max(E V_n)`, which forces the trace term to be at least 1/3
    /// on the valid region.
    pub regime_ok: bool,
    /// Every valid row has ratio < 1.
    pub strict: bool,
}

/// Martingale Bernstein bound against the prior 25-constant bound on `r_grid`.
pub fn martingale_sharpening_report(ev_spectrum: &[f64], sigma_sq: f64, c: f64, r_grid: &[f64]) -> Result<SharpeningReport> {
    let mut rows = Vec::with_capacity(r_grid.len());
    let mut threshold = f64::NAN;
    for &r in r_grid {
        let ours = martingale_bernstein_bound(ev_spectrum, sigma_sq, c, r)?;
        let prior = minsker_martingale_bound(ev_spectrum, sigma_sq, c, r)?;
        threshold = prior.threshold;
        // Both bounds share exp(-r²/(2(σ² + rc/3))); the ratio of prefactors
        // stays meaningful where that factor underflows.
        let (ours_pre, prior_pre) = martingale_prefactors(trace_p_term(ev_spectrum, r / (c * sigma_sq))?);
        rows.push(SharpeningRow { r, ours, prior: prior.value, ratio: ours_pre / prior_pre, valid: prior.valid });
    }
    if !rows.iter().any(|row| row.valid) {
        return Err(Error::Parameter(format!("no r in the grid reaches the validity threshold {threshold}")));
    }
    let lambda_max = ev_spectrum.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let strict = rows.iter().filter(|row| row.valid).all(|row| row.ratio < 1.0);
    Ok(SharpeningReport { rows, threshold, regime_ok: sigma_sq <= lambda_max, strict })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::step_rng;
    use rand::Rng;

    // mpmath: 2e/(e-1)/25
    const SPECTRUM_ONE_RATIO: f64 = 0.126_558_136_549_546_11;

    #[test]
    fn constants_table_values() {
        let rows = constants_table();
        assert_eq!(rows.len(), 4);
        let find = |setting, source| rows.iter().find(|r| r.setting == setting && r.source == source).unwrap();
        assert_eq!(find(Setting::OpNorm, "minsker").ratio, 2.0 / 14.0);
        assert_eq!(find(Setting::OpNorm, "tropp").ratio, 0.25);
        assert_eq!(find(Setting::MaxEig, "minsker").ratio, E_OVER_E_MINUS_ONE / 7.0);
        assert_eq!(find(Setting::MaxEig, "tropp").ratio, E_OVER_E_MINUS_ONE / 4.0);
        assert!((find(Setting::MaxEig, "minsker").ratio - 0.2260).abs() < 5e-5);
    }

    #[test]
    fn isotropic_variance_has_no_gain() {
        let rows = intrinsic_vs_ambient(&SymMatrix::identity(5).scale(2.0), 2.0, &[0.0, 1.0, 3.0]).unwrap();
        for row in rows {
            assert_eq!(row.ratio, 1.0);
            assert!((row.intrinsic - row.ambient).abs() <= 1e-15 * row.ambient);
        }
    }

    #[test]
    fn spiked_variance_gap() {
        let mut diag = vec![1e-3; 100];
        diag[0] = 1.0;
        let rows = intrinsic_vs_ambient(&SymMatrix::diag(&diag), 1.0, &[1.0, 2.0]).unwrap();
        for row in rows {
            assert!((row.ratio - 1.099 / 100.0).abs() < 1e-12);
            assert!(row.intrinsic <= row.ambient);
            assert!((row.intrinsic / row.ambient - row.ratio).abs() < 1e-12);
        }
    }

    #[test]
    fn sharpening_single_eigenvalue() {
        let report = martingale_sharpening_report(&[1.0], 1.0, 1.0, &[0.1, 2.0]).unwrap();
        assert!(!report.rows[0].valid);
        let row = report.rows[1];
        assert!(row.valid);
        assert!((row.ratio - SPECTRUM_ONE_RATIO).abs() < 1e-14);
        assert!(report.strict && report.regime_ok);
        assert!(martingale_sharpening_report(&[1.0], 1.0, 1.0, &[0.1]).is_err());
    }

    #[test]
    fn sharpening_on_random_spectra() {
        for k in 0..100u64 {
            let mut rng = step_rng(2024, k, 0);
            let d = rng.random_range(1..=20);
            let spectrum: Vec<f64> = (0..d).map(|_| rng.random_range(0.0..5.0f64).powi(2)).collect();
            let sigma_sq = spectrum.iter().copied().fold(0.0, f64::max);
            let c = rng.random_range(0.05..5.0);
            let grid: Vec<f64> = (0..60).map(|j| 0.01 * 1.25f64.powi(j)).collect();
            let report = martingale_sharpening_report(&spectrum, sigma_sq, c, &grid).unwrap();
            assert!(report.regime_ok && report.strict, "spectrum {k}");
        }
    }

    #[test]
    fn tiny_expected_variance_breaks_strictness() {
        // With σ² far above ‖E V_n‖ the trace term can fall below the
        // crossover and the prior bound wins.
        let report = martingale_sharpening_report(&[1e-3], 1.0, 1.0, &[0.5]).unwrap();
        assert!(!report.regime_ok);
        assert!(!report.strict);
    }
}
