//! CSV artifacts: evaluation reports (one row per method and seed),
//! per-episode rows, and learning curves.

use std::path::Path;

use serde::{de::DeserializeOwned, Deserialize, Serialize};

use super::HarnessError;
use crate::env::TerminationCause;
use crate::eval::{EpisodeSummary, EvalReport};
use crate::learner::CurvePoint;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub method: String,
    pub seed: u64,
    pub shield: bool,
    pub scenario: String,
    pub episodes: usize,
    pub mean_return: f64,
    pub std_return: f64,
    pub ci_low: Option<f64>,
    pub ci_high: Option<f64>,
    pub success_rate: f64,
    pub crash_rate: f64,
    pub timeout_rate: f64,
    pub mean_length: f64,
    pub mean_energy_flight: f64,
    pub mean_energy_transmission: f64,
    pub mean_energy_compute: f64,
    pub activations_standard: u64,
    pub activations_semantic: u64,
    pub mean_activation_distance_standard: Option<f64>,
    pub mean_activation_distance_semantic: Option<f64>,
    pub mean_activation_ratio_standard: Option<f64>,
    pub mean_activation_ratio_semantic: Option<f64>,
    pub redundant_activation_rate: Option<f64>,
    pub redundant_activations: u64,
    pub redundant_opportunities: u64,
    pub overrides: u64,
}

impl ReportRow {
    pub fn from_report(r: &EvalReport) -> Self {
        Self {
            method: r.method.clone(),
            seed: r.seed,
            shield: r.shield,
            scenario: format_fingerprint(r.scenario_fingerprint),
            episodes: r.episodes,
            mean_return: r.mean_return,
            std_return: r.std_return,
            ci_low: r.ci95.map(|c| c.0),
            ci_high: r.ci95.map(|c| c.1),
            success_rate: r.success_rate,
            crash_rate: r.crash_rate,
            timeout_rate: r.timeout_rate,
            mean_length: r.mean_length,
            mean_energy_flight: r.mean_energy_flight,
            mean_energy_transmission: r.mean_energy_transmission,
            mean_energy_compute: r.mean_energy_compute,
            activations_standard: r.activations_standard,
            activations_semantic: r.activations_semantic,
            mean_activation_distance_standard: r.mean_activation_distance_standard,
            mean_activation_distance_semantic: r.mean_activation_distance_semantic,
            mean_activation_ratio_standard: r.mean_activation_ratio_standard,
            mean_activation_ratio_semantic: r.mean_activation_ratio_semantic,
            redundant_activation_rate: r.redundant_activation_rate,
            redundant_activations: r.redundant_activations,
            redundant_opportunities: r.redundant_opportunities,
            overrides: r.overrides,
        }
    }
}

pub fn format_fingerprint(f: u64) -> String {
    format!("{f:016x}")
}

pub fn parse_fingerprint(s: &str) -> Option<u64> {
    u64::from_str_radix(s, 16).ok()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRow {
    pub method: String,
    pub seed: u64,
    pub episode: u64,
    #[serde(rename = "return")]
    pub episode_return: f64,
    pub length: u32,
    pub cause: TerminationCause,
    pub energy_flight: f64,
    pub energy_transmission: f64,
    pub energy_compute: f64,
    pub activations_standard: u32,
    pub activations_semantic: u32,
    pub overrides: u32,
    pub missed: u32,
}

impl EpisodeRow {
    pub fn new(method: &str, seed: u64, s: &EpisodeSummary) -> Self {
        Self {
            method: method.to_string(),
            seed,
            episode: s.episode,
            episode_return: s.episode_return,
            length: s.length,
            cause: s.cause,
            energy_flight: s.energy_flight,
            energy_transmission: s.energy_transmission,
            energy_compute: s.energy_compute,
            activations_standard: s.activations_standard,
            activations_semantic: s.activations_semantic,
            overrides: s.overrides,
            missed: s.missed,
        }
    }

    pub fn summary(&self) -> EpisodeSummary {
        EpisodeSummary {
            episode: self.episode,
            episode_return: self.episode_return,
            length: self.length,
            cause: self.cause,
            energy_flight: self.energy_flight,
            energy_transmission: self.energy_transmission,
            energy_compute: self.energy_compute,
            activations_standard: self.activations_standard,
            activations_semantic: self.activations_semantic,
            overrides: self.overrides,
            missed: self.missed,
        }
    }
}

pub fn write_rows<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| HarnessError::csv(path, e))?;
    for r in rows {
        w.serialize(r).map_err(|e| HarnessError::csv(path, e))?;
    }
    w.flush().map_err(|e| HarnessError::io(path, e))
}

pub fn read_rows<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, HarnessError> {
    let mut r = csv::Reader::from_path(path).map_err(|e| HarnessError::csv(path, e))?;
    r.deserialize()
        .enumerate()
        .map(|(i, row)| {
            row.map_err(|e| HarnessError::Malformed {
                path: path.display().to_string(),
                // Header is line 1.
                line: e.position().map_or(i + 2, |p| p.line() as usize),
                detail: e.to_string(),
            })
        })
        .collect()
}

pub fn write_curve(path: &Path, curve: &[CurvePoint]) -> Result<(), HarnessError> {
    write_rows(path, curve)
}

pub fn read_curve(path: &Path) -> Result<Vec<CurvePoint>, HarnessError> {
    read_rows(path)
}
