//! Scripted comparison policies.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{resolve_server, Observation};
use crate::dynamics::{Action, UavState};
use crate::energy::{reserve_to_goal, tool_cost};
use crate::geometry::Vec2;
use crate::world::rng::RngStream;
use crate::world::WorldConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BaselineKind {
    Random,
    Greedy,
    CostAware,
}

impl BaselineKind {
    pub const ALL: [BaselineKind; 3] = [BaselineKind::Random, BaselineKind::Greedy, BaselineKind::CostAware];

    pub fn name(self) -> &'static str {
        match self {
            BaselineKind::Random => "random",
            BaselineKind::Greedy => "greedy",
            BaselineKind::CostAware => "costaware",
        }
    }
}

impl fmt::Display for BaselineKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown baseline `{0}` (expected random, greedy or costaware)")]
pub struct UnknownBaseline(pub String);

impl FromStr for BaselineKind {
    type Err = UnknownBaseline;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "random" => Ok(BaselineKind::Random),
            "greedy" => Ok(BaselineKind::Greedy),
            "costaware" => Ok(BaselineKind::CostAware),
            _ => Err(UnknownBaseline(s.to_string())),
        }
    }
}

/// Full speed toward the believed goal, slowing on the last step so the
/// believed position lands on the goal instead of overshooting.
pub fn heading_to_goal(state: &UavState, cfg: &WorldConfig) -> Vec2 {
    let delta = cfg.goal_pos - state.pos_believed;
    let d = delta.norm();
    if d == 0.0 {
        return Vec2::ZERO;
    }
    let speed = cfg.v_max.min(d / cfg.dt);
    delta * (speed / d)
}

/// One decision of a scripted policy. `rng` is only drawn from by
/// [`BaselineKind::Random`].
pub fn baseline_policy(
    kind: BaselineKind,
    _obs: &Observation,
    state: &UavState,
    cfg: &WorldConfig,
    rng: &mut RngStream,
) -> Action {
    match kind {
        BaselineKind::Random => {
            let velocity = rng.in_disc(cfg.v_max);
            Action::new(velocity, rng.bernoulli(0.5))
        }
        BaselineKind::Greedy => {
            let activate = resolve_server(state, cfg).is_some();
            Action::new(heading_to_goal(state, cfg), activate)
        }
        BaselineKind::CostAware => {
            let activate = resolve_server(state, cfg).is_some_and(|s| {
                state.energy - tool_cost(s, state.pos_believed, &cfg.energy_params)
                    >= reserve_to_goal(state, cfg)
            });
            Action::new(heading_to_goal(state, cfg), activate)
        }
    }
}
