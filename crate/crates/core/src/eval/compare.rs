use serde::{Deserialize, Serialize};

use super::stats::{mann_whitney, MannWhitney};
use super::EvalReport;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CompareError {
    #[error("need at least two reports to compare, got {0}")]
    TooFew(usize),
    #[error("report `{method}` was built on scenario {found:016x}, expected {expected:016x}")]
    ScenarioMismatch { method: String, expected: u64, found: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedMethod {
    pub method: String,
    pub mean_return: f64,
    pub episodes: usize,
}

/// Rank-sum test between two methods adjacent in the ordering.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairTest {
    pub higher: String,
    pub lower: String,
    pub mean_gap: f64,
    pub test: MannWhitney,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    /// Best mean return first.
    pub ranking: Vec<RankedMethod>,
    pub pairs: Vec<PairTest>,
}

/// Orders reports by mean return (ties by name, so input order never
/// matters) and tests each adjacent pair.
pub fn compare(reports: &[EvalReport]) -> Result<Comparison, CompareError> {
    if reports.len() < 2 {
        return Err(CompareError::TooFew(reports.len()));
    }
    let expected = reports[0].scenario_fingerprint;
    if let Some(r) = reports.iter().find(|r| r.scenario_fingerprint != expected) {
        return Err(CompareError::ScenarioMismatch {
            method: r.method.clone(),
            expected,
            found: r.scenario_fingerprint,
        });
    }
    let mut sorted: Vec<&EvalReport> = reports.iter().collect();
    sorted.sort_by(|a, b| {
        b.mean_return
            .total_cmp(&a.mean_return)
            .then_with(|| a.method.cmp(&b.method))
            .then_with(|| a.seed.cmp(&b.seed))
    });
    let pairs = sorted
        .windows(2)
        .map(|w| PairTest {
            higher: w[0].method.clone(),
            lower: w[1].method.clone(),
            mean_gap: w[0].mean_return - w[1].mean_return,
            test: mann_whitney(&w[0].returns, &w[1].returns),
        })
        .collect();
    Ok(Comparison {
        ranking: sorted
            .iter()
            .map(|r| RankedMethod {
                method: r.method.clone(),
                mean_return: r.mean_return,
                episodes: r.episodes,
            })
            .collect(),
        pairs,
    })
}
