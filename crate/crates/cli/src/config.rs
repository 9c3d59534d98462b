//! Tool-wide defaults, overridable from a JSON config file and again
//! from command-line flags.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use rehab_core::assessment::{
    AssessConfig, MarginConfig, Strategy, DEFAULT_ERROR_SCORE_THRESHOLD, DEFAULT_TAU_FACTOR,
    DEFAULT_WINDOW,
};
use rehab_core::feedback::{SvmConfig, DEFAULT_CONFIDENCE_GATE};
use rehab_core::movement_model::EmConfig;
use rehab_core::Result;

fn default_k() -> usize {
    6
}
fn default_window() -> usize {
    DEFAULT_WINDOW
}
fn default_tau_factor() -> f64 {
    DEFAULT_TAU_FACTOR
}
fn default_strategy() -> Strategy {
    Strategy::TransitionHold
}
fn default_margin_sigma_mult() -> f64 {
    MarginConfig::default().sigma_mult
}
fn default_margin_min_nats() -> f64 {
    MarginConfig::default().min_nats
}
fn default_theta() -> f64 {
    DEFAULT_CONFIDENCE_GATE
}
fn default_regularization() -> f64 {
    EmConfig::default().regularization
}
fn default_em_max_iter() -> usize {
    EmConfig::default().max_iter
}
fn default_em_rel_tol() -> f64 {
    EmConfig::default().rel_tol
}
fn default_error_score_threshold() -> f64 {
    DEFAULT_ERROR_SCORE_THRESHOLD
}
fn default_svm_c() -> f64 {
    SvmConfig::default().c
}
fn default_svm_epochs() -> usize {
    SvmConfig::default().epochs
}

/// Every tunable the pipeline exposes, with working defaults. A config
/// file may set any subset.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToolConfig {
    /// Mixture components for training.
    #[serde(default = "default_k")]
    pub k: usize,
    /// Motion-profile window, frames.
    #[serde(default = "default_window")]
    pub window: usize,
    /// Fixed transition threshold; omitted means derive it from the
    /// ideal movement's peak motion.
    #[serde(default)]
    pub tau: Option<f64>,
    #[serde(default = "default_tau_factor")]
    pub tau_factor: f64,
    #[serde(default = "default_strategy")]
    pub strategy: Strategy,
    #[serde(default = "default_margin_sigma_mult")]
    pub margin_sigma_mult: f64,
    #[serde(default = "default_margin_min_nats")]
    pub margin_min_nats: f64,
    /// Confidence gate for emitting error advice.
    #[serde(default = "default_theta")]
    pub theta: f64,
    #[serde(default = "default_regularization")]
    pub regularization: f64,
    #[serde(default = "default_em_max_iter")]
    pub em_max_iter: usize,
    #[serde(default = "default_em_rel_tol")]
    pub em_rel_tol: f64,
    /// Per-part weight on the score penalty; unlisted parts use 1.
    #[serde(default)]
    pub part_weights: BTreeMap<String, f64>,
    /// Segment/part score below which the error classifier is asked.
    #[serde(default = "default_error_score_threshold")]
    pub error_score_threshold: f64,
    #[serde(default = "default_svm_c")]
    pub svm_c: f64,
    #[serde(default = "default_svm_epochs")]
    pub svm_epochs: usize,
}

impl Default for ToolConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("defaults deserialize")
    }
}

impl ToolConfig {
    pub fn load(path: &Path) -> Result<ToolConfig> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn em(&self) -> EmConfig {
        EmConfig {
            max_iter: self.em_max_iter,
            rel_tol: self.em_rel_tol,
            regularization: self.regularization,
            ..EmConfig::default()
        }
    }

    pub fn margin(&self) -> MarginConfig {
        MarginConfig {
            sigma_mult: self.margin_sigma_mult,
            min_nats: self.margin_min_nats,
        }
    }

    pub fn assess(&self) -> AssessConfig {
        AssessConfig {
            window: self.window,
            tau: self.tau,
            tau_factor: self.tau_factor,
            strategy: self.strategy,
            margin: self.margin(),
            part_weights: self.part_weights.clone(),
        }
    }

    pub fn svm(&self) -> SvmConfig {
        SvmConfig {
            c: self.svm_c,
            epochs: self.svm_epochs,
        }
    }
}
