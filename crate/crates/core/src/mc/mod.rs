//! Verification engine: exact enumeration of Rademacher sums, Monte Carlo
//! tail estimates, empirical (super/sub)martingale checks and confidence
//! interval coverage.
//!
//! Parallel work is split into fixed chunks of path indices whose partial
//! results are merged in index order, so every result is independent of the
//! worker count.

mod binomial;
mod checks;
mod enumerate;
mod stats;
mod trials;

use serde::{Deserialize, Serialize};

use crate::martingale::VProcessKind;

pub use binomial::{binomial_cdf, clopper_pearson_upper};
pub use checks::{
    coverage_check, submartingale_check, supermartingale_check, CoverageReport, DriftStep, SubmartingaleReport,
    SubmartingaleStep, SupermartingaleReport, TraceFn,
};
pub use enumerate::{enumerate_exact, enumeration_cap, ExactTail};
pub use stats::RunningStats;
pub use trials::{run_trials, trial_statistics, TailEstimate};

/// One-sided level of the binomial upper confidence limit.
pub const CONFIDENCE_ALPHA: f64 = 1e-3;

/// Number of standard errors a statistical check may deviate before failing.
pub const Z_THRESHOLD: f64 = 4.0;

/// Upper limit on `trials · n · dim³`, a proxy for floating-point work.
pub const MAX_WORK: f64 = 2e11;

/// Path-wise statistic whose tail is estimated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TailStatistic {
    /// `sup_{i<=n} λ_max(S_i)`.
    SupMaxEig,
    /// `sup_{i<=n} ‖S_i‖`.
    SupOpNorm,
    /// `λ_max(S_n)` on the event `λ_max(V_n) <= σ²`, and `-∞` off it.
    JointFreedman { sigma_sq: f64, v_kind: VProcessKind },
}

impl TailStatistic {
    pub fn label(&self) -> &'static str {
        match self {
            TailStatistic::SupMaxEig => "sup_max_eig",
            TailStatistic::SupOpNorm => "sup_op_norm",
            TailStatistic::JointFreedman { .. } => "joint_freedman",
        }
    }
}

pub(crate) fn check_work(trials: u64, n: usize, dim: usize) -> crate::Result<()> {
    let work = trials as f64 * n as f64 * (dim as f64).powi(3);
    if work > MAX_WORK {
        return Err(crate::Error::Resource(format!(
            "{trials} trials of {n} steps at dim {dim} is ~{work:.2e} flops, above the cap {MAX_WORK:.0e}"
        )));
    }
    Ok(())
}
