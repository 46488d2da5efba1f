//! One function per subcommand. Each returns CSV tables plus named checks.

use opconc::bounds::{
    bennett_bound, bernstein_bound, confidence_radius, hoeffding_bound, master_bound, subexponential_bound,
    subgaussian_bound, Mode, TailBoundResult, VarianceNormalization, VarianceProxy,
};
use opconc::compare::{constants_table, intrinsic_vs_ambient, martingale_sharpening_report};
use opconc::ensembles::TheoreticalParams;
use opconc::martingale::{freedman_bound_optimized, MartingaleBoundInput};
use opconc::mc::{
    coverage_check, enumerate_exact, run_trials, submartingale_check, supermartingale_check, TailStatistic,
};
use opconc::report::{bound_table, fmt_float, tail_table, CsvTable, TailRow, Verdict};
use opconc::verify::{run_suites, Suite, VerifyOptions};
use serde::Serialize;

use crate::config::{
    BoundRequest, BoundSpec, CompareRequest, EnumerateRequest, InvertRequest, SimulateRequest,
};
use crate::CliError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

#[derive(Debug, Default)]
pub struct Output {
    pub tables: Vec<(String, CsvTable)>,
    pub checks: Vec<Check>,
}

impl Output {
    pub fn pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    fn check(&mut self, name: impl Into<String>, pass: bool, detail: impl Into<String>) {
        self.checks.push(Check { name: name.into(), pass, detail: detail.into() });
    }
}

fn spec_label(spec: &BoundSpec) -> &'static str {
    match spec {
        BoundSpec::Hoeffding => "hoeffding",
        BoundSpec::Subgaussian => "subgaussian",
        BoundSpec::Bennett { .. } => "bennett",
        BoundSpec::Bernstein { .. } => "bernstein",
        BoundSpec::Subexponential { .. } => "subexponential",
        BoundSpec::Master { .. } => "master",
        BoundSpec::Freedman { .. } => "freedman",
    }
}

fn need_c(c: Option<f64>, fallback: Option<f64>, label: &str) -> Result<f64, CliError> {
    c.or(fallback).ok_or_else(|| CliError::config("schema", format!("{label} bound needs c (ensemble has no almost-sure bound)")))
}

fn eval_bound(spec: &BoundSpec, vp: &VarianceProxy, r: f64, mode: Mode, c_default: Option<f64>) -> Result<TailBoundResult, CliError> {
    Ok(match *spec {
        BoundSpec::Hoeffding => hoeffding_bound(vp, r, mode)?,
        BoundSpec::Subgaussian => subgaussian_bound(vp, r, mode)?,
        BoundSpec::Bennett { c } => bennett_bound(vp, need_c(c, c_default, "bennett")?, r, mode)?,
        BoundSpec::Bernstein { c } => bernstein_bound(vp, need_c(c, c_default, "bernstein")?, r, mode)?,
        BoundSpec::Subexponential { nu, alpha } => subexponential_bound(vp, nu, alpha, r, mode)?,
        BoundSpec::Master { psi } => master_bound(vp.d_prime(), &psi, vp.sigma_sq(), r, mode)?,
        BoundSpec::Freedman { .. } => {
            return Err(CliError::config("schema", "freedman bounds apply only to the joint_freedman statistic".into()))
        }
    })
}

pub fn bound(req: &BoundRequest) -> Result<Output, CliError> {
    let vp = req.proxy.resolve()?;
    let mut results = Vec::new();
    for spec in &req.bounds {
        for &mode in &req.modes {
            for &r in &req.r_grid {
                results.push(eval_bound(spec, &vp, r, mode, None)?);
            }
        }
    }
    let mut out = Output::default();
    out.tables.push(("bound".into(), bound_table(&results)));
    out.check("bound", true, format!("{} rows, d′ = {}", results.len(), fmt_float(vp.d_prime())));
    Ok(out)
}

pub fn invert(req: &InvertRequest) -> Result<Output, CliError> {
    let from_ensemble = match &req.ensemble {
        Some(ensemble) => Some(ensemble.theoretical_params(req.n)?),
        None => None,
    };
    if from_ensemble.is_some() && req.normalization != VarianceNormalization::PerSum {
        return Err(CliError::config("schema", "ensemble parameters are per-sum; use normalization per_sum".into()));
    }
    let pick = |given: Option<f64>, derived: Option<f64>, name: &str| {
        given.or(derived).ok_or_else(|| CliError::config("schema", format!("invert needs {name} or an ensemble providing it")))
    };
    let sigma = pick(req.sigma, from_ensemble.as_ref().map(|p| p.sigma_sq.sqrt()), "sigma")?;
    let c = pick(req.c, from_ensemble.as_ref().and_then(|p| p.c_bound), "c")?;
    let trace_v = pick(req.trace_v, from_ensemble.as_ref().map(|p| p.trace_v), "trace_v")?;
    let mut table = CsvTable::new(&["delta", "n", "radius", "exact_radius", "log_term", "degenerate"]);
    for &delta in &req.deltas {
        let cr = confidence_radius(req.n, sigma, c, trace_v, delta, req.normalization)?;
        table.push(vec![
            fmt_float(delta),
            req.n.to_string(),
            fmt_float(cr.radius),
            fmt_float(cr.exact_radius),
            fmt_float(cr.log_term),
            cr.degenerate.to_string(),
        ]);
    }
    let mut out = Output::default();
    out.check("invert", true, format!("{} radii", req.deltas.len()));
    out.tables.push(("invert".into(), table));
    Ok(out)
}

/// Bound on the tail of `statistic` at `r`, with ensemble-derived parameters.
fn statistic_bound(
    spec: &BoundSpec,
    statistic: &TailStatistic,
    params: &TheoreticalParams,
    vp: &VarianceProxy,
    r: f64,
) -> Result<f64, CliError> {
    if r < 0.0 {
        return Err(CliError::config("schema", format!("bounds need r >= 0, got {r}")));
    }
    match (statistic, spec) {
        (TailStatistic::JointFreedman { sigma_sq, .. }, BoundSpec::Freedman { psi }) => {
            let input = MartingaleBoundInput {
                ev_spectrum: params.v_n.eigenvalues().into_iter().map(|l| l.max(0.0)).collect(),
                sigma_sq: *sigma_sq,
                r,
                psi: *psi,
            };
            Ok(freedman_bound_optimized(&input)?.value)
        }
        (TailStatistic::JointFreedman { .. }, _) => {
            Err(CliError::config("schema", "the joint_freedman statistic takes only freedman bounds".into()))
        }
        (TailStatistic::SupMaxEig, _) => Ok(eval_bound(spec, vp, r, Mode::MaxEig, params.c_bound)?.raw),
        (TailStatistic::SupOpNorm, _) => Ok(eval_bound(spec, vp, r, Mode::OpNorm, params.c_bound)?.raw),
    }
}

fn tail_rows(
    statistic: &TailStatistic,
    estimates: &[(f64, f64, f64)],
    bounds: &[BoundSpec],
    params: &TheoreticalParams,
) -> Result<Vec<TailRow>, CliError> {
    let vp = VarianceProxy::from_matrix(params.v_n.clone())?;
    let mut rows = Vec::new();
    for &(r, p_hat, upper_conf) in estimates {
        let base = TailRow {
            statistic: statistic.label().into(),
            r,
            p_hat,
            upper_conf,
            bound_kind: "none".into(),
            bound_value: f64::NAN,
            verdict: None,
        };
        if bounds.is_empty() {
            rows.push(base.clone());
        }
        for spec in bounds {
            let value = statistic_bound(spec, statistic, params, &vp, r)?;
            rows.push(TailRow {
                bound_kind: spec_label(spec).into(),
                bound_value: value,
                verdict: Some(Verdict::classify(p_hat, upper_conf, value)),
                ..base.clone()
            });
        }
    }
    Ok(rows)
}

fn verdict_check(out: &mut Output, name: &str, rows: &[TailRow]) {
    let count = |v: Verdict| rows.iter().filter(|row| row.verdict == Some(v)).count();
    let fails = count(Verdict::Fail);
    out.check(
        name,
        fails == 0,
        format!(
            "{} pass, {fails} fail, {} inconclusive, {} unverifiable",
            count(Verdict::Pass),
            count(Verdict::Inconclusive),
            count(Verdict::Unverifiable)
        ),
    );
}

pub fn simulate(req: &SimulateRequest, max_trials: Option<u64>) -> Result<Output, CliError> {
    let trials = max_trials.map_or(req.trials, |cap| req.trials.min(cap));
    let mut out = Output::default();
    if let Some(tails) = &req.tails {
        let params = req.ensemble.theoretical_params(req.n)?;
        let estimates = run_trials(&req.ensemble, req.n, trials, &tails.r_grid, tails.statistic)?;
        let triples: Vec<_> = estimates.iter().map(|e| (e.r, e.p_hat, e.upper_conf)).collect();
        let rows = tail_rows(&tails.statistic, &triples, &tails.bounds, &params)?;
        verdict_check(&mut out, "tails", &rows);
        out.tables.push(("tails".into(), tail_table(&rows)));
    }
    if !req.supermartingale.is_empty() {
        let mut table = CsvTable::new(&["v_kind", "psi", "theta", "step", "mean_r", "drift_mean", "drift_std_err", "z"]);
        for s in &req.supermartingale {
            let report = supermartingale_check(&req.ensemble, s.v_kind, s.psi, s.theta, trials, req.n)?;
            let psi = serde_json::to_string(&s.psi).expect("psi serializes");
            for step in &report.steps {
                table.push(vec![
                    s.v_kind.label().into(),
                    psi.clone(),
                    fmt_float(s.theta),
                    step.step.to_string(),
                    fmt_float(step.mean_r),
                    fmt_float(step.drift_mean),
                    fmt_float(step.drift_std_err),
                    fmt_float(step.z),
                ]);
            }
            out.check(
                format!("supermartingale {} {psi} theta={}", s.v_kind, fmt_float(s.theta)),
                report.pass,
                format!("max drift z = {}", fmt_float(report.max_z)),
            );
        }
        out.tables.push(("supermartingale".into(), table));
    }
    if !req.submartingale.is_empty() {
        let mut table = CsvTable::new(&[
            "theta",
            "f",
            "step",
            "mean",
            "std_err",
            "trace_exp_mean",
            "trace_exp_std_err",
            "trace_exp_exact",
            "increment_mean",
            "increment_std_err",
        ]);
        for s in &req.submartingale {
            let report = submartingale_check(&req.ensemble, req.n, s.theta, s.f, trials)?;
            let f = serde_json::to_value(s.f).expect("serializes").as_str().unwrap_or_default().to_string();
            for step in &report.steps {
                table.push(vec![
                    fmt_float(s.theta),
                    f.clone(),
                    step.step.to_string(),
                    fmt_float(step.mean),
                    fmt_float(step.std_err),
                    fmt_float(step.trace_exp_mean),
                    fmt_float(step.trace_exp_std_err),
                    step.trace_exp_exact.map_or_else(|| "NA".into(), fmt_float),
                    fmt_float(step.increment_mean),
                    fmt_float(step.increment_std_err),
                ]);
            }
            out.check(
                format!("submartingale {f} theta={}", fmt_float(s.theta)),
                report.pass,
                format!("monotone = {}, closed form ok = {}", report.monotone, report.closed_form_ok),
            );
        }
        out.tables.push(("submartingale".into(), table));
    }
    if !req.coverage.is_empty() {
        let mut table = CsvTable::new(&[
            "delta",
            "n",
            "radius",
            "exact_radius",
            "trials",
            "covered",
            "coverage",
            "threshold",
            "pass",
        ]);
        for c in &req.coverage {
            let report = coverage_check(&req.ensemble, req.n, c.delta, trials)?;
            table.push(vec![
                fmt_float(report.delta),
                report.n.to_string(),
                fmt_float(report.radius),
                fmt_float(report.exact_radius),
                report.trials.to_string(),
                report.covered.to_string(),
                fmt_float(report.coverage),
                fmt_float(report.threshold),
                report.pass.to_string(),
            ]);
            out.check(
                format!("coverage delta={}", fmt_float(c.delta)),
                report.pass,
                format!("coverage {} vs threshold {}", fmt_float(report.coverage), fmt_float(report.threshold)),
            );
        }
        out.tables.push(("coverage".into(), table));
    }
    if out.checks.is_empty() {
        return Err(CliError::config("schema", "simulate needs at least one of tails, supermartingale, submartingale, coverage".into()));
    }
    Ok(out)
}

pub fn enumerate(req: &EnumerateRequest) -> Result<Output, CliError> {
    let exact = enumerate_exact(&req.ensemble, &req.r_grid, req.statistic)?;
    let params = req.ensemble.theoretical_params(req.ensemble.max_len())?;
    let triples: Vec<_> = exact.iter().map(|t| (t.r, t.probability, t.probability)).collect();
    let rows = tail_rows(&req.statistic, &triples, &req.bounds, &params)?;
    let mut out = Output::default();
    verdict_check(&mut out, "enumerate", &rows);
    out.tables.push(("enumerate".into(), tail_table(&rows)));
    Ok(out)
}

pub fn verify(options: &VerifyOptions, suites: &[Suite]) -> Result<Output, CliError> {
    let mut table = CsvTable::new(&[
        "suite",
        "checks",
        "failures",
        "first_check",
        "first_location",
        "first_lhs",
        "first_rhs",
        "pass",
    ]);
    let mut out = Output::default();
    for report in run_suites(suites, options) {
        let first = report.first_failure.as_ref();
        table.push(vec![
            report.suite.name().into(),
            report.checks.to_string(),
            report.failures.to_string(),
            first.map_or_else(String::new, |f| f.check.into()),
            first.map_or_else(String::new, |f| f.location.clone()),
            first.map_or_else(String::new, |f| fmt_float(f.lhs)),
            first.map_or_else(String::new, |f| fmt_float(f.rhs)),
            report.pass.to_string(),
        ]);
        let detail = match first {
            None => format!("{} checks, 0 failures", report.checks),
            Some(f) => format!(
                "{} of {} checks failed; first: {} at {} (lhs {}, rhs {})",
                report.failures,
                report.checks,
                f.check,
                f.location,
                fmt_float(f.lhs),
                fmt_float(f.rhs)
            ),
        };
        out.check(report.suite.name(), report.pass, detail);
    }
    out.tables.push(("verify".into(), table));
    Ok(out)
}

pub fn compare(req: &CompareRequest) -> Result<Output, CliError> {
    let mut out = Output::default();
    if req.constants {
        let mut table = CsvTable::new(&["setting", "source", "ours", "prior", "ratio"]);
        for row in constants_table() {
            let setting = serde_json::to_value(row.setting).expect("serializes").as_str().unwrap_or_default().to_string();
            table.push(vec![setting, row.source.into(), fmt_float(row.ours), fmt_float(row.prior), fmt_float(row.ratio)]);
        }
        out.check("constants", true, "prefactor constants against prior bounds");
        out.tables.push(("constants".into(), table));
    }
    if let Some(a) = &req.ambient {
        let sigma_sq = a.sigma_sq.unwrap_or_else(|| a.v.op_norm());
        let rows = intrinsic_vs_ambient(&a.v, sigma_sq, &a.r_grid)?;
        let mut table = CsvTable::new(&["r", "intrinsic", "ambient", "ratio"]);
        for row in &rows {
            table.push(vec![fmt_float(row.r), fmt_float(row.intrinsic), fmt_float(row.ambient), fmt_float(row.ratio)]);
        }
        let ok = rows.iter().all(|row| row.ratio <= 1.0);
        out.check("ambient", ok, format!("{} rows, intrinsic/ambient <= 1", rows.len()));
        out.tables.push(("ambient".into(), table));
    }
    if let Some(m) = &req.martingale {
        let report = martingale_sharpening_report(&m.ev_spectrum, m.sigma_sq, m.c, &m.r_grid)?;
        let mut table = CsvTable::new(&["r", "ours", "prior", "ratio", "valid"]);
        for row in &report.rows {
            table.push(vec![
                fmt_float(row.r),
                fmt_float(row.ours),
                fmt_float(row.prior),
                fmt_float(row.ratio),
                row.valid.to_string(),
            ]);
        }
        let valid = report.rows.iter().filter(|row| row.valid).count();
        out.check(
            "martingale",
            report.strict,
            format!(
                "{valid} valid rows (r >= {}), strict = {}, regime_ok = {}",
                fmt_float(report.threshold),
                report.strict,
                report.regime_ok
            ),
        );
        out.tables.push(("sharpening".into(), table));
    }
    Ok(out)
}
