//! Synthetic spiked instances with correlated noise, their large-dimension
//! predictions, and Monte Carlo studies built on them.

mod config;
mod generate;
mod measure;
mod predict;
mod study;

pub use config::{CovarianceKind, CovarianceSpec, DSpec, GenerativeConfig, NoiseDistribution, Spike};
pub use generate::{derive_seed, generate, true_tau, GroundTruth, Instance};
pub use measure::{measure_leading, ReducedGaussian, TrialMetrics};
pub use predict::{asymptotic_predictions, Predictions};
pub use study::{
    run_comparison, run_convergence_study, run_trials, with_threads, ComparisonConfig, ComparisonRow,
    ConvergenceConfig, ConvergenceRow, Method, Metric, Sampler, Summary,
};

use crate::error::Result;
use crate::json::format_f64;
use serde::{Deserialize, Serialize};
use std::fmt::Write;

/// A study description as read from a config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "study", rename_all = "snake_case")]
pub enum StudyConfig {
    Convergence(ConvergenceConfig),
    Comparison(ComparisonConfig),
}

impl StudyConfig {
    pub fn validate(&self) -> Result<()> {
        match self {
            StudyConfig::Convergence(c) => c.validate(),
            StudyConfig::Comparison(c) => c.validate(),
        }
    }

    /// Run the study and render its results table as CSV.
    pub fn run_to_csv(&self) -> Result<String> {
        match self {
            StudyConfig::Convergence(c) => Ok(convergence_csv(&run_convergence_study(c)?)),
            StudyConfig::Comparison(c) => Ok(comparison_csv(&run_comparison(c)?)),
        }
    }
}

pub fn convergence_csv(rows: &[ConvergenceRow]) -> String {
    let mut out = String::from("p,noise,metric,limit,mean,stderr,n_trials\n");
    for row in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            row.p,
            row.noise.label(),
            row.metric.label(),
            format_f64(row.limit),
            format_f64(row.error.mean),
            format_f64(row.error.stderr),
            row.error.n_trials
        );
    }
    out
}

pub fn comparison_csv(rows: &[ComparisonRow]) -> String {
    let mut out = String::from("kappa,method,mean,stderr,n_trials\n");
    for row in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            format_f64(row.kappa),
            row.method.label(),
            format_f64(row.error.mean),
            format_f64(row.error.stderr),
            row.error.n_trials
        );
    }
    out
}
