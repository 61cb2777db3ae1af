use serde::{Deserialize, Serialize};

use crate::dynamics::UavState;
use crate::geometry::Vec2;
use crate::world::{in_range, ToolKind, WorldConfig};

/// Fields before the per-server blocks.
pub const HEADER_LEN: usize = 7;
/// Fields per server block.
pub const PER_SERVER_LEN: usize = 5;

pub fn observation_len(n_servers: usize) -> usize {
    HEADER_LEN + PER_SERVER_LEN * n_servers
}

/// Flat, arena-normalized view of what the agent knows. Everything is
/// computed from the believed position; the true position never leaks in.
///
/// Layout: believed position (2), goal minus belief (2), energy fraction,
/// steps since correction over `max_steps`, guidance left over the largest
/// horizon, then per server in canonical order: server minus belief (2),
/// in-range flag, kind one-hot (standard, semantic).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Observation(pub Vec<f64>);

impl Observation {
    pub fn encode(state: &UavState, cfg: &WorldConfig) -> Self {
        let scale = 1.0 / cfg.arena_size;
        let b = state.pos_believed;
        let goal = cfg.goal_pos - b;
        let max_h = cfg.max_horizon();
        let mut v = Vec::with_capacity(observation_len(cfg.servers.len()));
        v.extend([
            b.x * scale,
            b.y * scale,
            goal.x * scale,
            goal.y * scale,
            state.energy / cfg.initial_energy,
            f64::from(state.steps_since_correction()) / f64::from(cfg.max_steps),
            if max_h == 0 {
                0.0
            } else {
                f64::from(state.guidance_left) / f64::from(max_h)
            },
        ]);
        for s in &cfg.servers {
            let rel = s.position - b;
            let (is_std, is_sem) = match s.kind {
                ToolKind::Standard => (1.0, 0.0),
                ToolKind::Semantic => (0.0, 1.0),
            };
            v.extend([
                rel.x * scale,
                rel.y * scale,
                if in_range(s, b) { 1.0 } else { 0.0 },
                is_std,
                is_sem,
            ]);
        }
        Observation(v)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// Inverse of the header encoding. Counters come back as reals.
    pub fn decode(&self, cfg: &WorldConfig) -> DecodedObservation {
        let o = &self.0;
        DecodedObservation {
            pos_believed: Vec2::new(o[0] * cfg.arena_size, o[1] * cfg.arena_size),
            energy: o[4] * cfg.initial_energy,
            steps_since_correction: o[5] * f64::from(cfg.max_steps),
            guidance_left: o[6] * f64::from(cfg.max_horizon()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecodedObservation {
    pub pos_believed: Vec2,
    pub energy: f64,
    pub steps_since_correction: f64,
    pub guidance_left: f64,
}
