//! One JSON object per environment step. Floats go through `serde_json`
//! with `float_roundtrip`, so every value reads back bit-identical.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::env::{Episode, RewardComponents, StepCharges, TerminationCause, Transition};
use crate::geometry::Vec2;
use crate::world::ToolKind;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceRecord {
    pub step: u32,
    pub pos_believed: Vec2,
    pub pos_true: Vec2,
    pub drift_norm: f64,
    pub velocity: Vec2,
    pub proposed_activate: bool,
    pub activate: bool,
    pub overridden: bool,
    pub server: Option<usize>,
    pub server_kind: Option<ToolKind>,
    pub missed: bool,
    pub charges: StepCharges,
    pub components: RewardComponents,
    pub reward: f64,
    pub guidance_left: u32,
    pub energy: f64,
    pub cumulative_return: f64,
    pub done: bool,
    pub cause: TerminationCause,
}

impl TraceRecord {
    /// Record for `t`, taken with the episode in its post-step state.
    pub fn from_step(ep: &Episode, t: &Transition) -> Self {
        let st = ep.state();
        Self {
            step: t.step,
            pos_believed: st.pos_believed,
            pos_true: st.pos_true,
            drift_norm: st.drift.norm(),
            velocity: t.action.velocity,
            proposed_activate: t.proposed.activate,
            activate: t.action.activate,
            overridden: t.info.overridden,
            server: t.info.server,
            server_kind: t.info.server_kind,
            missed: t.info.missed,
            charges: t.info.charges,
            components: t.components,
            reward: t.reward,
            guidance_left: st.guidance_left,
            energy: st.energy,
            cumulative_return: ep.episode_return(),
            done: t.done,
            cause: t.cause,
        }
    }
}

pub fn write_trace(path: &Path, records: &[TraceRecord]) -> Result<(), HarnessError> {
    let file = File::create(path).map_err(|e| HarnessError::io(path, e))?;
    let mut w = BufWriter::new(file);
    for r in records {
        let line = serde_json::to_string(r).expect("trace record serializes");
        writeln!(w, "{line}").map_err(|e| HarnessError::io(path, e))?;
    }
    w.flush().map_err(|e| HarnessError::io(path, e))
}

/// Reads a trace. A malformed or truncated line is reported with its
/// 1-based line number.
pub fn read_trace(path: &Path) -> Result<Vec<TraceRecord>, HarnessError> {
    let file = File::open(path).map_err(|e| HarnessError::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| HarnessError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec = serde_json::from_str(&line).map_err(|e| HarnessError::Malformed {
            path: path.display().to_string(),
            line: i + 1,
            detail: e.to_string(),
        })?;
        out.push(rec);
    }
    Ok(out)
}

/// Outcome of recomputing rewards from a trace.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplayCheck {
    pub steps: usize,
    /// Steps whose stored reward differs from the sum of its components.
    pub reward_mismatches: Vec<u32>,
    /// Steps whose stored cumulative return differs from the running sum.
    pub return_mismatches: Vec<u32>,
    pub final_return: f64,
}

impl ReplayCheck {
    pub fn is_clean(&self) -> bool {
        self.reward_mismatches.is_empty() && self.return_mismatches.is_empty()
    }
}

/// Recomputes each reward from its components and the running return, and
/// compares both bit-for-bit with the stored values.
pub fn check_replay(records: &[TraceRecord]) -> ReplayCheck {
    let mut check = ReplayCheck {
        steps: records.len(),
        reward_mismatches: Vec::new(),
        return_mismatches: Vec::new(),
        final_return: 0.0,
    };
    let mut running = 0.0;
    for r in records {
        let reward = r.components.total();
        if reward.to_bits() != r.reward.to_bits() {
            check.reward_mismatches.push(r.step);
        }
        running += reward;
        if running.to_bits() != r.cumulative_return.to_bits() {
            check.return_mismatches.push(r.step);
        }
    }
    check.final_return = running;
    check
}

/// One human-readable line per step.
pub fn describe(r: &TraceRecord) -> String {
    let tool = match (r.server, r.server_kind) {
        (Some(i), Some(k)) if r.missed => format!(" call {k}#{i} (missed)"),
        (Some(i), Some(k)) => format!(" call {k}#{i}"),
        _ if r.activate => " call (no server)".to_string(),
        _ => String::new(),
    };
    let ovr = if r.overridden { " [shield override]" } else { "" };
    format!(
        "{:4} belief ({:7.2},{:7.2}) true ({:7.2},{:7.2}) drift {:6.2} v ({:6.2},{:6.2}) E {:9.2} g {:2} r {:9.4} R {:10.4}{tool}{ovr}{}",
        r.step,
        r.pos_believed.x,
        r.pos_believed.y,
        r.pos_true.x,
        r.pos_true.y,
        r.drift_norm,
        r.velocity.x,
        r.velocity.y,
        r.energy,
        r.guidance_left,
        r.reward,
        r.cumulative_return,
        if r.done { format!(" -> {:?}", r.cause) } else { String::new() }
    )
}
