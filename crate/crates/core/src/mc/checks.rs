use serde::{Deserialize, Serialize};

use super::stats::{chunked_reduce, RunningStats};
use super::{check_work, Z_THRESHOLD};
use crate::bounds::{confidence_radius, VarianceNormalization};
use crate::ensembles::{EnsembleConfig, EnsembleFamily};
use crate::martingale::{VProcess, VProcessKind};
use crate::psi::{phi, varphi, PsiFn};
use crate::specmat::SymMatrix;
use crate::{Error, Result};

/// Absolute slack on drift comparisons, for steps with zero sample variance.
const DRIFT_SLACK: f64 = 1e-12;

/// Scalar function applied spectrally inside the trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceFn {
    /// `e^u - u - 1`.
    Phi,
    /// `cosh(u) - 1`.
    Varphi,
}

impl TraceFn {
    fn eval(self, u: f64) -> f64 {
        match self {
            TraceFn::Phi => phi(u),
            TraceFn::Varphi => varphi(u),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SubmartingaleStep {
    pub step: usize,
    /// Sample mean of `tr f(θS_i)`.
    pub mean: f64,
    pub std_err: f64,
    /// Sample mean of `tr exp(θS_i)`.
    pub trace_exp_mean: f64,
    pub trace_exp_std_err: f64,
    /// Exact `E tr exp(θS_i)` where the ensemble admits one.
    pub trace_exp_exact: Option<f64>,
    /// Sample mean of the paired increment `tr f(θS_i) - tr f(θS_{i-1})`.
    pub increment_mean: f64,
    pub increment_std_err: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubmartingaleReport {
    pub theta: f64,
    pub f: TraceFn,
    pub trials: u64,
    pub steps: Vec<SubmartingaleStep>,
    /// No increment mean below `-4` standard errors.
    pub monotone: bool,
    /// Every exact `E tr exp(θS_i)` within 4 standard errors of its estimate.
    pub closed_form_ok: bool,
    pub pass: bool,
}

fn z_score(value: f64, std_err: f64) -> f64 {
    if std_err > 0.0 {
        value / std_err
    } else if value.abs() <= DRIFT_SLACK {
        0.0
    } else {
        value.signum() * f64::INFINITY
    }
}

/// Exact `E tr exp(θS_i)` for scalar series.
fn scalar_trace_exp(config: &EnsembleConfig, theta: f64, i: usize) -> Option<f64> {
    match &config.family {
        EnsembleFamily::RademacherSeries { coeffs } if config.dim() == 1 => {
            Some(coeffs[..i].iter().map(|a| (theta * a.get(0, 0)).cosh()).product())
        }
        EnsembleFamily::GaussianSeries { coeffs } if config.dim() == 1 => {
            let var: f64 = coeffs[..i].iter().map(|a| a.get(0, 0).powi(2)).sum();
            Some((0.5 * theta * theta * var).exp())
        }
        _ => None,
    }
}

/// Checks that `i ↦ E tr f(θS_i)` is nondecreasing for an independent
/// mean-zero series.
pub fn submartingale_check(
    config: &EnsembleConfig,
    n: usize,
    theta: f64,
    f: TraceFn,
    trials: u64,
) -> Result<SubmartingaleReport> {
    if !matches!(config.family, EnsembleFamily::RademacherSeries { .. } | EnsembleFamily::GaussianSeries { .. }) {
        return Err(Error::Unsupported {
            op: "submartingale_check",
            ensemble: config.family.label(),
            reason: "requires independent mean-zero summands".into(),
        });
    }
    if !(theta.is_finite() && theta >= 0.0) {
        return Err(Error::Parameter(format!("theta must be finite and >= 0, got {theta}")));
    }
    if trials < 2 {
        return Err(Error::Parameter("trials must be >= 2".into()));
    }
    if n == 0 || n > config.max_len() {
        return Err(Error::Parameter(format!("n = {n} outside 1..={}", config.max_len())));
    }
    check_work(trials, n, config.dim())?;
    let sampler = config.sampler()?;
    type Acc = Vec<[RunningStats; 3]>;
    let stats: Acc = chunked_reduce(
        trials,
        || vec![[RunningStats::default(); 3]; n],
        |acc: &mut Acc, path| {
            let mut s = SymMatrix::zeros(config.dim());
            let mut previous = 0.0;
            for (slot, x) in acc.iter_mut().zip(sampler.path(path, n)?) {
                s.add_assign(&x);
                let spectrum = s.scale(theta).eigenvalues();
                let value: f64 = spectrum.iter().map(|&u| f.eval(u)).sum();
                let trace_exp: f64 = spectrum.iter().map(|&u| u.exp()).sum();
                slot[0].push(value);
                slot[1].push(trace_exp);
                slot[2].push(value - previous);
                previous = value;
            }
            Ok(())
        },
        |a, b| {
            for (x, y) in a.iter_mut().zip(&b) {
                for k in 0..3 {
                    x[k].merge(&y[k]);
                }
            }
        },
    )?;
    let steps: Vec<SubmartingaleStep> = stats
        .iter()
        .enumerate()
        .map(|(i, [value, trace_exp, increment])| SubmartingaleStep {
            step: i + 1,
            mean: value.mean(),
            std_err: value.std_err(),
            trace_exp_mean: trace_exp.mean(),
            trace_exp_std_err: trace_exp.std_err(),
            trace_exp_exact: scalar_trace_exp(config, theta, i + 1),
            increment_mean: increment.mean(),
            increment_std_err: increment.std_err(),
        })
        .collect();
    let monotone = steps.iter().all(|s| z_score(s.increment_mean, s.increment_std_err) >= -Z_THRESHOLD);
    let closed_form_ok = steps.iter().all(|s| {
        s.trace_exp_exact
            .is_none_or(|exact| z_score(s.trace_exp_mean - exact, s.trace_exp_std_err).abs() <= Z_THRESHOLD)
    });
    Ok(SubmartingaleReport { theta, f, trials, steps, monotone, closed_form_ok, pass: monotone && closed_form_ok })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DriftStep {
    pub step: usize,
    /// Sample mean of `R_t`.
    pub mean_r: f64,
    /// Sample mean of `R_t - R_{t-1}`.
    pub drift_mean: f64,
    pub drift_std_err: f64,
    pub z: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SupermartingaleReport {
    pub v_kind: VProcessKind,
    pub psi: PsiFn,
    pub theta: f64,
    pub trials: u64,
    pub steps: Vec<DriftStep>,
    /// Largest per-step z-score of the drift.
    pub max_z: f64,
    pub pass: bool,
}

/// Estimates the per-step drift of `R_t = tr exp(θS_t - ψ(θ)V_t)`.
pub fn supermartingale_check(
    config: &EnsembleConfig,
    v_kind: VProcessKind,
    psi: PsiFn,
    theta: f64,
    trials: u64,
    n: usize,
) -> Result<SupermartingaleReport> {
    v_kind.check_pairing(&psi, config.c_bound(n))?;
    if matches!(v_kind, VProcessKind::Bracket) && !config.is_conditionally_symmetric() {
        return Err(Error::Catalog(format!(
            "bracket variance needs conditionally symmetric increments; {} is not",
            config.family.label()
        )));
    }
    if !(theta.is_finite() && theta >= 0.0) {
        return Err(Error::Parameter(format!("theta must be finite and >= 0, got {theta}")));
    }
    let psi_theta = psi.eval(theta)?;
    if trials < 2 {
        return Err(Error::Parameter("trials must be >= 2".into()));
    }
    if n == 0 || n > config.max_len() {
        return Err(Error::Parameter(format!("n = {n} outside 1..={}", config.max_len())));
    }
    let dim = config.dim();
    if VProcess::new(v_kind, dim).needs_moments() {
        config.conditional_moments(1, &SymMatrix::zeros(dim))?;
    }
    check_work(trials, n, dim)?;
    let sampler = config.sampler()?;
    type Acc = Vec<[RunningStats; 2]>;
    let stats: Acc = chunked_reduce(
        trials,
        || vec![[RunningStats::default(); 2]; n],
        |acc: &mut Acc, path| {
            let mut s = SymMatrix::zeros(dim);
            let mut v = VProcess::new(v_kind, dim);
            let mut previous = dim as f64;
            for (t, (slot, x)) in acc.iter_mut().zip(sampler.path(path, n)?).enumerate() {
                let moments = if v.needs_moments() { Some(config.conditional_moments(t + 1, &s)?) } else { None };
                v.step(&x, moments.as_ref())?;
                s.add_assign(&x);
                let mut arg = s.scale(theta);
                arg.add_scaled_assign(-psi_theta, &v.value());
                let r = arg.trace_spectral_fn(f64::exp)?;
                slot[0].push(r);
                slot[1].push(r - previous);
                previous = r;
            }
            Ok(())
        },
        |a, b| {
            for (x, y) in a.iter_mut().zip(&b) {
                x[0].merge(&y[0]);
                x[1].merge(&y[1]);
            }
        },
    )?;
    let steps: Vec<DriftStep> = stats
        .iter()
        .enumerate()
        .map(|(t, [r, drift])| DriftStep {
            step: t + 1,
            mean_r: r.mean(),
            drift_mean: drift.mean(),
            drift_std_err: drift.std_err(),
            z: z_score(drift.mean(), drift.std_err()),
        })
        .collect();
    let max_z = steps.iter().map(|s| s.z).fold(f64::NEG_INFINITY, f64::max);
    let pass = steps.iter().all(|s| s.drift_mean <= Z_THRESHOLD * s.drift_std_err + DRIFT_SLACK);
    Ok(SupermartingaleReport { v_kind, psi, theta, trials, steps, max_z, pass })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CoverageReport {
    pub n: usize,
    pub delta: f64,
    pub radius: f64,
    pub exact_radius: f64,
    pub trials: u64,
    pub covered: u64,
    pub coverage: f64,
    /// `1 - δ - 4·sqrt(δ(1-δ)/trials)`.
    pub threshold: f64,
    pub pass: bool,
}

/// Fraction of paths with `‖S_n/n‖` inside the `(1 - δ)` confidence radius.
pub fn coverage_check(config: &EnsembleConfig, n: usize, delta: f64, trials: u64) -> Result<CoverageReport> {
    if !config.is_independent() {
        return Err(Error::Unsupported {
            op: "coverage_check",
            ensemble: config.family.label(),
            reason: "the confidence interval assumes independent summands".into(),
        });
    }
    let c = config.c_bound(n).ok_or_else(|| Error::Unsupported {
        op: "coverage_check",
        ensemble: config.family.label(),
        reason: "summands are unbounded".into(),
    })?;
    if trials == 0 {
        return Err(Error::Parameter("trials must be >= 1".into()));
    }
    let params = config.theoretical_params(n)?;
    let cr = confidence_radius(n, params.sigma_sq.sqrt(), c, params.trace_v, delta, VarianceNormalization::PerSum)?;
    check_work(trials, n, config.dim())?;
    let sampler = config.sampler()?;
    let covered = chunked_reduce(
        trials,
        || 0u64,
        |acc: &mut u64, path| {
            let mut s = SymMatrix::zeros(config.dim());
            for x in sampler.path(path, n)? {
                s.add_assign(&x);
            }
            if s.op_norm() / n as f64 <= cr.radius {
                *acc += 1;
            }
            Ok(())
        },
        |a, b| *a += b,
    )?;
    let coverage = covered as f64 / trials as f64;
    let threshold = 1.0 - delta - Z_THRESHOLD * (delta * (1.0 - delta) / trials as f64).sqrt();
    Ok(CoverageReport {
        n,
        delta,
        radius: cr.radius,
        exact_radius: cr.exact_radius,
        trials,
        covered,
        coverage,
        threshold,
        pass: coverage >= threshold,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_rademacher(n: usize) -> EnsembleConfig {
        EnsembleConfig::new(5, EnsembleFamily::RademacherSeries { coeffs: vec![SymMatrix::scalar(1.0); n] }).unwrap()
    }

    #[test]
    fn zero_theta_submartingale_is_flat() {
        let report = submartingale_check(&scalar_rademacher(5), 5, 0.0, TraceFn::Phi, 100).unwrap();
        assert!(report.pass);
        for s in &report.steps {
            assert_eq!(s.mean, 0.0);
            assert_eq!(s.trace_exp_exact, Some(1.0));
        }
    }

    #[test]
    fn submartingale_closed_form_tracks_cosh_power() {
        let report = submartingale_check(&scalar_rademacher(8), 8, 1.0, TraceFn::Phi, 20_000).unwrap();
        assert!(report.pass, "{report:?}");
        for s in &report.steps {
            let exact = 1f64.cosh().powi(s.step as i32);
            assert!((s.trace_exp_exact.unwrap() - exact).abs() < 1e-12 * exact);
        }
    }

    #[test]
    fn submartingale_rejects_martingales() {
        let cfg = EnsembleConfig::new(
            0,
            EnsembleFamily::CondSymMartingale { base: SymMatrix::scalar(1.0), drive: 0.5, n: 4 },
        )
        .unwrap();
        assert!(matches!(submartingale_check(&cfg, 4, 1.0, TraceFn::Varphi, 100), Err(Error::Unsupported { .. })));
    }

    #[test]
    fn zero_theta_supermartingale_has_no_drift() {
        let cfg = EnsembleConfig::new(0, EnsembleFamily::RademacherSeries { coeffs: vec![SymMatrix::identity(3); 4] })
            .unwrap();
        let report = supermartingale_check(&cfg, VProcessKind::Bracket, PsiFn::Normal, 0.0, 50, 4).unwrap();
        assert!(report.pass);
        for s in &report.steps {
            assert!((s.mean_r - 3.0).abs() < 1e-12 && s.drift_mean.abs() < 1e-12);
        }
    }

    #[test]
    fn cond_sym_bracket_drift_is_nonpositive() {
        let cfg = EnsembleConfig::new(
            9,
            EnsembleFamily::CondSymMartingale {
                base: SymMatrix::from_rows(&[[1.0, 0.3], [0.3, -0.4]]).unwrap(),
                drive: 0.5,
                n: 10,
            },
        )
        .unwrap();
        let report = supermartingale_check(&cfg, VProcessKind::Bracket, PsiFn::Normal, 0.8, 20_000, 10).unwrap();
        assert!(report.pass, "{report:?}");
    }

    #[test]
    fn mismatched_pairings_are_refused() {
        let cfg = scalar_rademacher(3);
        assert!(matches!(
            supermartingale_check(&cfg, VProcessKind::Bracket, PsiFn::Poisson { c: 1.0 }, 0.5, 10, 3),
            Err(Error::Catalog(_))
        ));
        let bc = EnsembleConfig::new(
            0,
            EnsembleFamily::BoundedCovariance { pop_dim: 1, pop_cov: SymMatrix::scalar(1.0), clip: 5.0, n: 3 },
        )
        .unwrap();
        assert!(matches!(
            supermartingale_check(&bc, VProcessKind::Bracket, PsiFn::Normal, 0.5, 10, 3),
            Err(Error::Catalog(_))
        ));
        assert!(matches!(
            supermartingale_check(&bc, VProcessKind::Predictable, PsiFn::Poisson { c: 5.0 }, 0.5, 10, 3),
            Err(Error::Unsupported { .. })
        ));
    }

    #[test]
    fn coverage_at_half_confidence() {
        let cfg = EnsembleConfig::new(2, EnsembleFamily::RademacherSeries { coeffs: vec![SymMatrix::identity(2); 5] })
            .unwrap();
        let report = coverage_check(&cfg, 5, 0.5, 2000).unwrap();
        assert!(report.pass && report.coverage >= 0.5);
        let near_one = coverage_check(&cfg, 5, 0.999, 200).unwrap();
        assert!(near_one.threshold < 0.01 && near_one.pass);
    }

    #[test]
    fn coverage_needs_bounded_independent_summands() {
        let gauss = EnsembleConfig::new(0, EnsembleFamily::GaussianSeries { coeffs: vec![SymMatrix::scalar(1.0)] })
            .unwrap();
        assert!(matches!(coverage_check(&gauss, 1, 0.1, 10), Err(Error::Unsupported { .. })));
    }
}
