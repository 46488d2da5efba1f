//! JSON run configuration. Every object rejects unknown fields.

use std::path::Path;

use opconc::bounds::{Mode, VarianceNormalization, VarianceProxy};
use opconc::ensembles::EnsembleConfig;
use opconc::martingale::VProcessKind;
use opconc::mc::{TailStatistic, TraceFn};
use opconc::psi::PsiFn;
use opconc::verify::VerifyOptions;
use opconc::{NumericPolicy, SymMatrix};
use serde::Deserialize;

use crate::CliError;

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub numeric_policy: Option<NumericPolicy>,
    pub bound: Option<BoundRequest>,
    pub invert: Option<InvertRequest>,
    pub simulate: Option<SimulateRequest>,
    pub enumerate: Option<EnumerateRequest>,
    pub verify: Option<VerifyOptions>,
    pub compare: Option<CompareRequest>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::config("io", format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::config("schema", format!("{}: {e}", path.display())))
    }
}

/// Either scalar `(trace_v, sigma_sq)` or a full matrix with optional σ².
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProxySpec {
    pub trace_v: Option<f64>,
    pub sigma_sq: Option<f64>,
    pub matrix: Option<SymMatrix>,
}

impl ProxySpec {
    pub fn resolve(&self) -> Result<VarianceProxy, CliError> {
        let proxy = match (&self.matrix, self.trace_v, self.sigma_sq) {
            (Some(m), None, None) => VarianceProxy::from_matrix(m.clone()),
            (Some(m), None, Some(s)) => VarianceProxy::from_matrix_with_sigma(m.clone(), s),
            (None, Some(t), Some(s)) => VarianceProxy::new(t, s),
            _ => {
                return Err(CliError::config(
                    "schema",
                    "proxy needs either {trace_v, sigma_sq} or {matrix[, sigma_sq]}".to_string(),
                ))
            }
        };
        Ok(proxy?)
    }
}

/// Which closed-form or generic bound to evaluate. `c` defaults to the
/// ensemble's almost-sure bound where one is available.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BoundSpec {
    Hoeffding,
    Subgaussian,
    Bennett {
        c: Option<f64>,
    },
    Bernstein {
        c: Option<f64>,
    },
    Subexponential {
        nu: f64,
        alpha: f64,
    },
    Master {
        psi: PsiFn,
    },
    /// Freedman-type bound for the joint statistic, minimized over θ.
    Freedman {
        psi: PsiFn,
    },
}

fn default_modes() -> Vec<Mode> {
    vec![Mode::MaxEig, Mode::OpNorm]
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundRequest {
    pub proxy: ProxySpec,
    pub bounds: Vec<BoundSpec>,
    #[serde(default = "default_modes")]
    pub modes: Vec<Mode>,
    pub r_grid: Vec<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InvertRequest {
    pub n: usize,
    pub deltas: Vec<f64>,
    #[serde(default)]
    pub normalization: VarianceNormalization,
    /// Parameters taken from this ensemble when the scalars are absent.
    pub ensemble: Option<EnsembleConfig>,
    pub sigma: Option<f64>,
    pub c: Option<f64>,
    pub trace_v: Option<f64>,
}

fn default_statistic() -> TailStatistic {
    TailStatistic::SupOpNorm
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TailsRequest {
    pub r_grid: Vec<f64>,
    #[serde(default = "default_statistic")]
    pub statistic: TailStatistic,
    #[serde(default)]
    pub bounds: Vec<BoundSpec>,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SupermartingaleRequest {
    pub v_kind: VProcessKind,
    pub psi: PsiFn,
    pub theta: f64,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubmartingaleRequest {
    pub theta: f64,
    pub f: TraceFn,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoverageRequest {
    pub delta: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateRequest {
    pub ensemble: EnsembleConfig,
    pub n: usize,
    pub trials: u64,
    pub tails: Option<TailsRequest>,
    #[serde(default)]
    pub supermartingale: Vec<SupermartingaleRequest>,
    #[serde(default)]
    pub submartingale: Vec<SubmartingaleRequest>,
    #[serde(default)]
    pub coverage: Vec<CoverageRequest>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnumerateRequest {
    pub ensemble: EnsembleConfig,
    pub r_grid: Vec<f64>,
    #[serde(default = "default_statistic")]
    pub statistic: TailStatistic,
    #[serde(default)]
    pub bounds: Vec<BoundSpec>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AmbientRequest {
    pub v: SymMatrix,
    pub sigma_sq: Option<f64>,
    pub r_grid: Vec<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SharpeningRequest {
    pub ev_spectrum: Vec<f64>,
    pub sigma_sq: f64,
    pub c: f64,
    pub r_grid: Vec<f64>,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareRequest {
    #[serde(default = "yes")]
    pub constants: bool,
    pub ambient: Option<AmbientRequest>,
    pub martingale: Option<SharpeningRequest>,
}

impl Default for CompareRequest {
    fn default() -> Self {
        CompareRequest { constants: true, ambient: None, martingale: None }
    }
}
