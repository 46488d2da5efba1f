use serde::Serialize;

use super::stats::chunked_reduce;
use super::{check_work, clopper_pearson_upper, TailStatistic, CONFIDENCE_ALPHA};
use crate::ensembles::{EnsembleConfig, Sampler};
use crate::martingale::VProcess;
use crate::specmat::SymMatrix;
use crate::{Error, Result};

/// Monte Carlo estimate of `P(statistic >= r)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TailEstimate {
    pub r: f64,
    pub exceed: u64,
    pub trials: u64,
    pub p_hat: f64,
    /// Exact one-sided binomial upper limit at level [`CONFIDENCE_ALPHA`].
    pub upper_conf: f64,
    pub statistic: TailStatistic,
}

fn validate_statistic(config: &EnsembleConfig, n: usize, statistic: &TailStatistic) -> Result<()> {
    if let TailStatistic::JointFreedman { sigma_sq, v_kind } = statistic {
        if !(sigma_sq.is_finite() && *sigma_sq > 0.0) {
            return Err(Error::Parameter(format!("sigma_sq must be finite and > 0, got {sigma_sq}")));
        }
        if VProcess::new(*v_kind, config.dim()).needs_moments() {
            config.conditional_moments(1, &SymMatrix::zeros(config.dim()))?;
        }
    }
    if n == 0 || n > config.max_len() {
        return Err(Error::Parameter(format!("n = {n} outside 1..={}", config.max_len())));
    }
    Ok(())
}

fn path_statistic(sampler: &Sampler<'_>, path: u64, n: usize, statistic: &TailStatistic) -> Result<f64> {
    let config = sampler.config();
    let xs = sampler.path(path, n)?;
    let mut s = SymMatrix::zeros(config.dim());
    match statistic {
        TailStatistic::SupMaxEig | TailStatistic::SupOpNorm => {
            let mut sup = f64::NEG_INFINITY;
            for x in &xs {
                s.add_assign(x);
                let value = if matches!(statistic, TailStatistic::SupOpNorm) { s.op_norm() } else { s.lambda_max() };
                sup = sup.max(value);
            }
            Ok(sup)
        }
        TailStatistic::JointFreedman { sigma_sq, v_kind } => {
            let mut v = VProcess::new(*v_kind, config.dim());
            for (t, x) in xs.iter().enumerate() {
                let moments = if v.needs_moments() { Some(config.conditional_moments(t + 1, &s)?) } else { None };
                v.step(x, moments.as_ref())?;
                s.add_assign(x);
            }
            if v.value().lambda_max() <= *sigma_sq {
                Ok(s.lambda_max())
            } else {
                Ok(f64::NEG_INFINITY)
            }
        }
    }
}

/// Statistic value of every path `0..trials`, in path order.
pub fn trial_statistics(config: &EnsembleConfig, n: usize, trials: u64, statistic: TailStatistic) -> Result<Vec<f64>> {
    validate_statistic(config, n, &statistic)?;
    check_work(trials, n, config.dim())?;
    let sampler = config.sampler()?;
    chunked_reduce(
        trials,
        Vec::new,
        |acc: &mut Vec<f64>, path| {
            acc.push(path_statistic(&sampler, path, n, &statistic)?);
            Ok(())
        },
        |a, b| a.extend(b),
    )
}

/// Monte Carlo tail estimates at every `r` in `r_grid` from `trials`
/// independent paths.
pub fn run_trials(
    config: &EnsembleConfig,
    n: usize,
    trials: u64,
    r_grid: &[f64],
    statistic: TailStatistic,
) -> Result<Vec<TailEstimate>> {
    if trials == 0 {
        return Err(Error::Parameter("trials must be >= 1".into()));
    }
    if let Some(r) = r_grid.iter().find(|r| r.is_nan()) {
        return Err(Error::Parameter(format!("r_grid contains {r}")));
    }
    validate_statistic(config, n, &statistic)?;
    check_work(trials, n, config.dim())?;
    let sampler = config.sampler()?;
    let counts = chunked_reduce(
        trials,
        || vec![0u64; r_grid.len()],
        |acc: &mut Vec<u64>, path| {
            let value = path_statistic(&sampler, path, n, &statistic)?;
            for (count, &r) in acc.iter_mut().zip(r_grid) {
                if value >= r {
                    *count += 1;
                }
            }
            Ok(())
        },
        |a, b| a.iter_mut().zip(b).for_each(|(x, y)| *x += y),
    )?;
    Ok(r_grid
        .iter()
        .zip(counts)
        .map(|(&r, exceed)| TailEstimate {
            r,
            exceed,
            trials,
            p_hat: exceed as f64 / trials as f64,
            upper_conf: clopper_pearson_upper(exceed, trials, CONFIDENCE_ALPHA),
            statistic,
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensembles::EnsembleFamily;
    use crate::martingale::VProcessKind;
    use crate::mc::enumerate_exact;

    fn rademacher(coeffs: Vec<SymMatrix>) -> EnsembleConfig {
        EnsembleConfig::new(17, EnsembleFamily::RademacherSeries { coeffs }).unwrap()
    }

    #[test]
    fn single_trial_gives_zero_or_one() {
        let cfg = rademacher(vec![SymMatrix::identity(2); 4]);
        let est = run_trials(&cfg, 4, 1, &[0.5, 1.5, 100.0], TailStatistic::SupMaxEig).unwrap();
        for e in est {
            assert!(e.p_hat == 0.0 || e.p_hat == 1.0);
            assert!(e.p_hat <= e.upper_conf && e.upper_conf <= 1.0);
        }
    }

    #[test]
    fn negative_radius_always_exceeded_by_norm() {
        let cfg = EnsembleConfig::new(3, EnsembleFamily::GaussianSeries { coeffs: vec![SymMatrix::identity(2); 3] })
            .unwrap();
        let est = run_trials(&cfg, 3, 500, &[-1.0], TailStatistic::SupOpNorm).unwrap();
        assert_eq!(est[0].p_hat, 1.0);
        assert_eq!(est[0].upper_conf, 1.0);
    }

    #[test]
    fn agrees_with_enumeration() {
        let coeffs = vec![
            SymMatrix::diag(&[1.0, 0.2]),
            SymMatrix::from_rows(&[[0.3, 0.4], [0.4, -0.1]]).unwrap(),
            SymMatrix::diag(&[-0.5, 0.7]),
            SymMatrix::identity(2).scale(0.6),
            SymMatrix::from_rows(&[[0.0, 0.8], [0.8, 0.0]]).unwrap(),
        ];
        let cfg = rademacher(coeffs);
        let grid = [0.5, 1.0, 1.5, 2.0, 2.5];
        let trials = 40_000u64;
        for statistic in [TailStatistic::SupMaxEig, TailStatistic::SupOpNorm] {
            let exact = enumerate_exact(&cfg, &grid, statistic).unwrap();
            let mc = run_trials(&cfg, 5, trials, &grid, statistic).unwrap();
            for (e, m) in exact.iter().zip(&mc) {
                let sd = (e.probability * (1.0 - e.probability) / trials as f64).sqrt();
                assert!((e.probability - m.p_hat).abs() <= 4.0 * sd + 1e-12, "r={}: {} vs {}", e.r, e.probability, m.p_hat);
            }
        }
    }

    #[test]
    fn deterministic_for_any_worker_count() {
        let cfg = EnsembleConfig::new(
            99,
            EnsembleFamily::CondSymMartingale { base: SymMatrix::diag(&[1.0, 0.5]), drive: 0.4, n: 8 },
        )
        .unwrap();
        let statistic = TailStatistic::JointFreedman { sigma_sq: 6.0, v_kind: VProcessKind::Bracket };
        let run = |threads: usize| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| run_trials(&cfg, 8, 3000, &[0.0, 1.0, 2.0, 4.0], statistic).unwrap())
        };
        assert_eq!(run(1), run(5));
    }

    #[test]
    fn joint_event_never_exceeds_sup_statistic() {
        let cfg = rademacher(vec![SymMatrix::diag(&[1.0, 0.3]); 6]);
        let grid = [0.0, 1.0, 2.0, 3.0];
        let sup = run_trials(&cfg, 6, 4000, &grid, TailStatistic::SupMaxEig).unwrap();
        let joint = run_trials(
            &cfg,
            6,
            4000,
            &grid,
            TailStatistic::JointFreedman { sigma_sq: 6.0, v_kind: VProcessKind::Predictable },
        )
        .unwrap();
        for (s, j) in sup.iter().zip(&joint) {
            assert!(j.exceed <= s.exceed);
        }
    }

    #[test]
    fn rejects_bad_requests() {
        let cfg = rademacher(vec![SymMatrix::identity(2); 3]);
        assert!(run_trials(&cfg, 3, 0, &[1.0], TailStatistic::SupOpNorm).is_err());
        assert!(run_trials(&cfg, 4, 10, &[1.0], TailStatistic::SupOpNorm).is_err());
        assert!(matches!(
            run_trials(&cfg, 3, u64::MAX / 2, &[1.0], TailStatistic::SupOpNorm),
            Err(Error::Resource(_))
        ));
    }
}
