//! Deterministic inequality suites for the scalar auxiliary functions and the
//! trace inequality behind the intrinsic-dimension prefactor.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::psi::{g_fn, h_fn, phi, varphi};
use crate::rng::step_rng;
use crate::specmat::SymMatrix;
use crate::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    /// Two-sided exponential bounds on `φ + 1` and the lower bound on `ϕ + 1`.
    PhiExp,
    /// Two-sided exponential bounds on `g + 1`.
    GExp,
    /// `0 <= g <= φ`.
    GPhi,
    /// `h(u) >= u²/(2(1 + u/3))` on `[0, 100]`.
    HBound,
    /// `tr[exp(sV) - I] <= (e^{s‖V‖} - 1) tr V/‖V‖` for random PSD `V`.
    Trace,
}

impl Suite {
    pub const ALL: [Suite; 5] = [Suite::PhiExp, Suite::GExp, Suite::GPhi, Suite::HBound, Suite::Trace];

    pub fn name(self) -> &'static str {
        match self {
            Suite::PhiExp => "phi_exp",
            Suite::GExp => "g_exp",
            Suite::GPhi => "g_phi",
            Suite::HBound => "h_bound",
            Suite::Trace => "trace",
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        Suite::ALL
            .into_iter()
            .find(|suite| suite.name() == s)
            .ok_or_else(|| Error::Parameter(format!("unknown suite {s:?}; expected one of phi_exp, g_exp, g_phi, h_bound, trace")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyOptions {
    /// Grid size for the scalar suites.
    pub grid_points: usize,
    /// Added to every φ evaluation; a nonzero value must make a suite fail.
    pub phi_perturbation: f64,
    pub trace_matrices: usize,
    pub trace_scales: usize,
    pub trace_max_dim: usize,
    pub trace_seed: u64,
    /// Relative slack of the trace inequality.
    pub trace_rel_slack: f64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            grid_points: 10_000,
            phi_perturbation: 0.0,
            trace_matrices: 200,
            trace_scales: 20,
            trace_max_dim: 50,
            trace_seed: 0x5eed,
            trace_rel_slack: 1e-9,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Failure {
    pub check: &'static str,
    pub location: String,
    pub lhs: f64,
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteReport {
    pub suite: Suite,
    pub checks: u64,
    pub failures: u64,
    pub first_failure: Option<Failure>,
    pub pass: bool,
}

/// Relative rounding slack for the scalar suites; some bounds are tight at
/// isolated points (`u = 0`, `u = 1`).
const SCALAR_REL_SLACK: f64 = 8.0 * f64::EPSILON;

struct Tally {
    suite: Suite,
    checks: u64,
    failures: u64,
    first_failure: Option<Failure>,
}

impl Tally {
    fn new(suite: Suite) -> Self {
        Tally { suite, checks: 0, failures: 0, first_failure: None }
    }

    /// Records `lhs <= rhs` within `rel_slack`.
    fn leq(&mut self, check: &'static str, location: impl FnOnce() -> String, lhs: f64, rhs: f64, rel_slack: f64) {
        self.checks += 1;
        let ok = lhs <= rhs + rel_slack * lhs.abs().max(rhs.abs());
        if !ok {
            self.failures += 1;
            if self.first_failure.is_none() {
                self.first_failure = Some(Failure { check, location: location(), lhs, rhs });
            }
        }
    }

    fn finish(self) -> SuiteReport {
        SuiteReport {
            suite: self.suite,
            checks: self.checks,
            failures: self.failures,
            first_failure: self.first_failure,
            pass: self.failures == 0,
        }
    }
}

/// `points` evenly spaced values on `[lo, hi]`, endpoints included, with exact
/// zero when the grid is symmetric about it.
fn grid(lo: f64, hi: f64, points: usize) -> impl Iterator<Item = f64> {
    let last = points.max(2) - 1;
    (0..=last).map(move |k| (lo * (last - k) as f64 + hi * k as f64) / last as f64)
}

pub fn run_suite(suite: Suite, options: &VerifyOptions) -> SuiteReport {
    let mut tally = Tally::new(suite);
    let phi_p = |u: f64| phi(u) + options.phi_perturbation;
    let at = |u: f64| move || format!("u = {u:.17e}");
    let lower = (std::f64::consts::E - 1.0) / std::f64::consts::E;
    let points = options.grid_points;
    match suite {
        Suite::PhiExp => {
            for u in grid(-30.0, 30.0, points) {
                tally.leq("(e-1)/e·e^u <= φ(u)+1", at(u), lower * u.exp(), phi_p(u) + 1.0, SCALAR_REL_SLACK);
                tally.leq("e^u/2 <= ϕ(u)+1", at(u), 0.5 * u.exp(), varphi(u) + 1.0, SCALAR_REL_SLACK);
            }
            // φ(u) + 1 = e^u - u exceeds e^u for u < 0, so the upper bound is
            // checked on the nonnegative half only.
            for u in grid(0.0, 30.0, points) {
                tally.leq("φ(u)+1 <= e^u", at(u), phi_p(u) + 1.0, u.exp(), SCALAR_REL_SLACK);
            }
        }
        Suite::GExp => {
            for u in grid(-30.0, 30.0, points) {
                tally.leq("(e-1)/e·e^u <= g(u)+1", at(u), lower * u.exp(), g_fn(u) + 1.0, SCALAR_REL_SLACK);
                tally.leq("g(u)+1 <= e^u+1", at(u), g_fn(u) + 1.0, u.exp() + 1.0, SCALAR_REL_SLACK);
            }
        }
        Suite::GPhi => {
            for u in grid(-30.0, 30.0, points) {
                tally.leq("0 <= g(u)", at(u), 0.0, g_fn(u), 0.0);
                tally.leq("g(u) <= φ(u)", at(u), g_fn(u), phi_p(u), SCALAR_REL_SLACK);
            }
        }
        Suite::HBound => {
            for u in grid(0.0, 100.0, points) {
                tally.leq("u²/(2(1+u/3)) <= h(u)", at(u), u * u / (2.0 * (1.0 + u / 3.0)), h_fn(u), SCALAR_REL_SLACK);
            }
        }
        Suite::Trace => trace_suite(&mut tally, options),
    }
    tally.finish()
}

/// Random PSD matrix `G W Gᵀ` with random dimension, rank and spectral decay.
pub fn random_psd(seed: u64, index: u64, max_dim: usize) -> SymMatrix {
    let mut rng = step_rng(seed, index, 0);
    let dim = rng.random_range(1..=max_dim.max(1));
    let rank = rng.random_range(1..=dim);
    let decay: f64 = rng.random_range(0.0..1.0);
    let g = nalgebra::DMatrix::from_fn(dim, rank, |_, _| rng.sample::<f64, _>(StandardNormal));
    let w = nalgebra::DVector::from_fn(rank, |j, _| (-decay * j as f64).exp());
    let v = &g * nalgebra::DMatrix::from_diagonal(&w) * g.transpose();
    SymMatrix::from_dmatrix(v).expect("G W Gᵀ is symmetric up to rounding")
}

fn trace_suite(tally: &mut Tally, options: &VerifyOptions) {
    for k in 0..options.trace_matrices as u64 {
        let v = random_psd(options.trace_seed, k, options.trace_max_dim);
        let eigen = v.eigenvalues();
        let norm = v.op_norm();
        let trace = v.trace();
        for j in 0..options.trace_scales {
            // s‖V‖ sweeps [1e-3, 30] geometrically
            let frac = j as f64 / (options.trace_scales.max(2) - 1) as f64;
            let s = 1e-3 * (3e4f64).powf(frac) / norm;
            let lhs: f64 = eigen.iter().map(|&l| (s * l).exp_m1()).sum();
            let rhs = (s * norm).exp_m1() * trace / norm;
            tally.leq(
                "tr[exp(sV)-I] <= (e^{s‖V‖}-1)·trV/‖V‖",
                || format!("matrix {k} (dim {}), s = {s:.17e}", v.dim()),
                lhs,
                rhs,
                options.trace_rel_slack,
            );
        }
    }
}

/// Runs `suites` in order.
pub fn run_suites(suites: &[Suite], options: &VerifyOptions) -> Vec<SuiteReport> {
    suites.iter().map(|&suite| run_suite(suite, options)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_suites_pass() {
        for report in run_suites(&Suite::ALL, &VerifyOptions::default()) {
            assert!(report.pass, "{report:?}");
            assert!(report.checks >= 4000);
        }
    }

    #[test]
    fn perturbed_phi_is_caught_and_located() {
        let options = VerifyOptions { phi_perturbation: 1e-3, ..VerifyOptions::default() };
        let report = run_suite(Suite::PhiExp, &options);
        assert!(!report.pass);
        let failure = report.first_failure.unwrap();
        assert_eq!(failure.check, "φ(u)+1 <= e^u");
        assert!(failure.location.starts_with("u = 0.0"));
        assert!(failure.lhs > failure.rhs);
    }

    #[test]
    fn grid_contains_zero_and_endpoints() {
        let g: Vec<f64> = grid(-30.0, 30.0, 10_001).collect();
        assert_eq!(g.len(), 10_001);
        assert_eq!((g[0], g[5000], g[10_000]), (-30.0, 0.0, 30.0));
    }

    #[test]
    fn suite_names_parse() {
        for suite in Suite::ALL {
            assert_eq!(suite.name().parse::<Suite>().unwrap(), suite);
        }
        assert!("phi".parse::<Suite>().is_err());
    }

    #[test]
    fn random_psd_is_psd_and_reproducible() {
        for k in 0..20 {
            let v = random_psd(1, k, 12);
            assert!(v.check_psd().is_ok());
            assert_eq!(v, random_psd(1, k, 12));
        }
    }
}
