//! Process-wide numeric tolerances.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

static GLOBAL: OnceLock<NumericPolicy> = OnceLock::new();

/// Tolerances shared by every matrix routine.
///
/// The policy is read once, on first use. Call [`NumericPolicy::install`]
/// before any computation to override the defaults.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NumericPolicy {
    /// Maximum asymmetry `|a_ij - a_ji|` relative to `max(1, max|a|)`.
    pub symmetry_rel_tol: f64,
    /// PSD slack: `lambda_min >= -psd_rel_tol * max(1, ‖A‖)` counts as PSD.
    pub psd_rel_tol: f64,
}

impl Default for NumericPolicy {
    fn default() -> Self {
        Self { symmetry_rel_tol: 1e-12, psd_rel_tol: 1e-10 }
    }
}

impl NumericPolicy {
    pub fn global() -> &'static NumericPolicy {
        GLOBAL.get_or_init(NumericPolicy::default)
    }

    /// Installs `self` as the global policy. Fails if a policy was already
    /// read or installed.
    pub fn install(self) -> Result<(), NumericPolicy> {
        GLOBAL.set(self)
    }

    pub fn validate(&self) -> crate::Result<()> {
        for (name, v) in [("symmetry_rel_tol", self.symmetry_rel_tol), ("psd_rel_tol", self.psd_rel_tol)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(crate::Error::Parameter(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        Ok(())
    }
}
