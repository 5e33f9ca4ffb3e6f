//! Replication orchestration and theorem diagnostics.

mod clt;
mod curves;
mod hessian;
mod qsl;
mod report;

pub use clt::{clt_diagnostic, CltConfig};
pub use curves::{
    average_series, compare_algorithms, final_sq_error, mse_curve, mse_curve_single, rate_slope,
    real_excess_curve, value_at, AlgoCurve, CurvePoint, CurveSeries, RealRunConfig,
    SynthRunConfig, DEFAULT_RATE_WINDOW,
};
pub use hessian::{hessian_convergence, HessianConfig, HessianCurves};
pub use qsl::{null_outer_stats, qsl_diagnostic, NullTrajectory, QslCheckpoint, QslConfig};
pub use report::{DiagnosticEntry, DiagnosticReport};

/// Per-iteration metric row; the CSV schema shared by every curve output.
#[derive(Clone, Copy, Debug, serde::Serialize)]
pub struct RunRecord {
    pub iteration: u64,
    pub sq_error: Option<f64>,
    pub excess_risk: Option<f64>,
    pub sbar_dist: Option<f64>,
    pub sbar_inv_dist: Option<f64>,
    pub hbar_dist: Option<f64>,
    pub sigbar_dist: Option<f64>,
}

impl RunRecord {
    pub fn at(iteration: u64) -> Self {
        Self {
            iteration,
            sq_error: None,
            excess_risk: None,
            sbar_dist: None,
            sbar_inv_dist: None,
            hbar_dist: None,
            sigbar_dist: None,
        }
    }
}
