use rayon::prelude::*;
use serde::Serialize;

use super::TailStatistic;
use crate::ensembles::{EnsembleConfig, EnsembleFamily};
use crate::specmat::SymMatrix;
use crate::{Error, Result};

/// Exact tail `P(statistic >= r)` over all `2^n` sign patterns.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExactTail {
    pub r: f64,
    pub exceed: u64,
    pub total: u64,
    pub probability: f64,
}

/// Largest enumerable `n` at matrix dimension `dim`.
pub fn enumeration_cap(dim: usize) -> usize {
    if dim == 1 {
        22
    } else {
        14
    }
}

/// Depth at which the sign tree is split into parallel subtrees.
const SPLIT_DEPTH: usize = 8;

/// Sorted radii plus a histogram of leaf values by how many radii they reach.
struct Tally<'a> {
    sorted: &'a [f64],
    hist: Vec<u64>,
}

impl Tally<'_> {
    fn record(&mut self, value: f64) {
        self.hist[self.sorted.partition_point(|&r| r <= value)] += 1;
    }
}

/// Exact prefix-supremum tails of a Rademacher series at every `r` in `r_grid`.
pub fn enumerate_exact(config: &EnsembleConfig, r_grid: &[f64], statistic: TailStatistic) -> Result<Vec<ExactTail>> {
    config.validate()?;
    let EnsembleFamily::RademacherSeries { coeffs } = &config.family else {
        return Err(Error::Unsupported {
            op: "enumerate_exact",
            ensemble: config.family.label(),
            reason: "exact enumeration needs a finite sign space".into(),
        });
    };
    if matches!(statistic, TailStatistic::JointFreedman { .. }) {
        return Err(Error::Unsupported {
            op: "enumerate_exact",
            ensemble: "rademacher_series",
            reason: "only the prefix-supremum statistics are enumerated".into(),
        });
    }
    if let Some(r) = r_grid.iter().find(|r| r.is_nan()) {
        return Err(Error::Parameter(format!("r_grid contains {r}")));
    }
    let n = coeffs.len();
    let dim = config.dim();
    let cap = enumeration_cap(dim);
    if n > cap {
        return Err(Error::EnumerationCap { n, dim, cap, paths: 1u64 << n.min(63) });
    }
    let op_norm = matches!(statistic, TailStatistic::SupOpNorm);

    let mut sorted = r_grid.to_vec();
    sorted.sort_by(f64::total_cmp);
    let split = n.min(SPLIT_DEPTH);
    let hists: Vec<Vec<u64>> = (0..1u64 << split)
        .into_par_iter()
        .map(|prefix_bits| {
            let mut tally = Tally { sorted: &sorted, hist: vec![0; sorted.len() + 1] };
            if dim == 1 {
                let a: Vec<f64> = coeffs.iter().map(|c| c.get(0, 0)).collect();
                let (mut s, mut sup) = (0.0, f64::NEG_INFINITY);
                for (i, &ai) in a.iter().enumerate().take(split) {
                    s += if prefix_bits >> i & 1 == 1 { ai } else { -ai };
                    sup = sup.max(if op_norm { s.abs() } else { s });
                }
                scalar_dfs(&a[split..], s, sup, op_norm, &mut tally);
            } else {
                let mut s = SymMatrix::zeros(dim);
                let mut sup = f64::NEG_INFINITY;
                for (i, a) in coeffs.iter().enumerate().take(split) {
                    s.add_scaled_assign(if prefix_bits >> i & 1 == 1 { 1.0 } else { -1.0 }, a);
                    sup = sup.max(node_value(&s, op_norm));
                }
                matrix_dfs(&coeffs[split..], &s, sup, op_norm, &mut tally);
            }
            tally.hist
        })
        .collect();

    let mut hist = vec![0u64; sorted.len() + 1];
    for h in hists {
        hist.iter_mut().zip(h).for_each(|(a, b)| *a += b);
    }
    let total = 1u64 << n;
    // exceed_sorted[j] = #{leaves with value >= sorted[j]} = Σ_{idx > j} hist[idx]
    let mut exceed_sorted = vec![0u64; sorted.len()];
    let mut acc = 0u64;
    for j in (0..sorted.len()).rev() {
        acc += hist[j + 1];
        exceed_sorted[j] = acc;
    }
    Ok(r_grid
        .iter()
        .map(|&r| {
            let j = sorted.partition_point(|&s| s < r);
            let exceed = exceed_sorted[j];
            ExactTail { r, exceed, total, probability: exceed as f64 / total as f64 }
        })
        .collect())
}

fn node_value(s: &SymMatrix, op_norm: bool) -> f64 {
    if op_norm {
        s.op_norm()
    } else {
        s.lambda_max()
    }
}

fn scalar_dfs(rest: &[f64], s: f64, sup: f64, op_norm: bool, tally: &mut Tally<'_>) {
    let Some((&a, tail)) = rest.split_first() else {
        tally.record(sup);
        return;
    };
    for next in [s + a, s - a] {
        scalar_dfs(tail, next, sup.max(if op_norm { next.abs() } else { next }), op_norm, tally);
    }
}

fn matrix_dfs(rest: &[SymMatrix], s: &SymMatrix, sup: f64, op_norm: bool, tally: &mut Tally<'_>) {
    let Some((a, tail)) = rest.split_first() else {
        tally.record(sup);
        return;
    };
    for sign in [1.0, -1.0] {
        let mut next = s.clone();
        next.add_scaled_assign(sign, a);
        let value = node_value(&next, op_norm);
        matrix_dfs(tail, &next, sup.max(value), op_norm, tally);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bounds::{hoeffding_bound, Mode, VarianceProxy};

    fn series(coeffs: Vec<SymMatrix>) -> EnsembleConfig {
        EnsembleConfig::new(0, EnsembleFamily::RademacherSeries { coeffs }).unwrap()
    }

    #[test]
    fn single_identity_step() {
        let tails = enumerate_exact(&series(vec![SymMatrix::identity(2)]), &[0.5], TailStatistic::SupOpNorm).unwrap();
        assert_eq!(tails[0].probability, 1.0);
    }

    #[test]
    fn two_scalar_steps() {
        let cfg = series(vec![SymMatrix::scalar(1.0); 2]);
        let tails = enumerate_exact(&cfg, &[1.5], TailStatistic::SupOpNorm).unwrap();
        assert_eq!((tails[0].exceed, tails[0].total), (2, 4));
        assert_eq!(tails[0].probability, 0.5);
    }

    #[test]
    fn ten_identity_steps_under_hoeffding() {
        let cfg = series(vec![SymMatrix::identity(2); 10]);
        let vp = VarianceProxy::new(20.0, 10.0).unwrap();
        let tails = enumerate_exact(&cfg, &[2.0, 4.0, 6.0, 8.0], TailStatistic::SupOpNorm).unwrap();
        for t in tails {
            let bound = hoeffding_bound(&vp, t.r, Mode::OpNorm).unwrap().raw;
            assert!(t.probability <= bound, "r = {}: {} > {bound}", t.r, t.probability);
        }
    }

    #[test]
    fn matches_brute_force_on_small_matrix_series() {
        let coeffs = vec![
            SymMatrix::from_rows(&[[1.0, 0.5], [0.5, -0.2]]).unwrap(),
            SymMatrix::diag(&[0.3, 0.9]),
            SymMatrix::from_rows(&[[0.0, 1.0], [1.0, 0.0]]).unwrap(),
            SymMatrix::diag(&[-0.4, 0.1]),
        ];
        let grid: Vec<f64> = (0..30).map(|k| -1.0 + 0.12 * k as f64).collect();
        for statistic in [TailStatistic::SupMaxEig, TailStatistic::SupOpNorm] {
            let tails = enumerate_exact(&series(coeffs.clone()), &grid, statistic).unwrap();
            let mut values = Vec::new();
            for bits in 0..16u32 {
                let mut s = SymMatrix::zeros(2);
                let mut sup = f64::NEG_INFINITY;
                for (i, a) in coeffs.iter().enumerate() {
                    s = if bits >> i & 1 == 1 { &s + a } else { &s - a };
                    sup = sup.max(node_value(&s, statistic == TailStatistic::SupOpNorm));
                }
                values.push(sup);
            }
            for t in tails {
                let count = values.iter().filter(|&&v| v >= t.r).count() as u64;
                assert_eq!(t.exceed, count, "r = {}", t.r);
            }
        }
    }

    #[test]
    fn tails_are_monotone_in_n_and_r() {
        let grid: Vec<f64> = (0..20).map(|k| 0.5 * k as f64).collect();
        let mut previous: Option<Vec<ExactTail>> = None;
        for n in 1..=12 {
            let cfg = series((1..=n).map(|k| SymMatrix::scalar(1.0 / k as f64)).collect());
            let tails = enumerate_exact(&cfg, &grid, TailStatistic::SupMaxEig).unwrap();
            for w in tails.windows(2) {
                assert!(w[0].probability >= w[1].probability);
            }
            if let Some(prev) = previous {
                for (a, b) in prev.iter().zip(&tails) {
                    assert!(a.probability <= b.probability);
                }
            }
            previous = Some(tails);
        }
    }

    #[test]
    fn refuses_above_cap() {
        let err = enumerate_exact(&series(vec![SymMatrix::identity(2); 15]), &[1.0], TailStatistic::SupOpNorm)
            .unwrap_err();
        assert!(matches!(err, Error::EnumerationCap { n: 15, cap: 14, paths: 32768, .. }));
        let gauss = EnsembleConfig::new(0, EnsembleFamily::GaussianSeries { coeffs: vec![SymMatrix::scalar(1.0)] })
            .unwrap();
        assert!(matches!(enumerate_exact(&gauss, &[1.0], TailStatistic::SupOpNorm), Err(Error::Unsupported { .. })));
    }
}
