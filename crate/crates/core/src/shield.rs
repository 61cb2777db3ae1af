//! Teacher shield: prices a proposed tool call and overrides it with "keep
//! flying" when the call would eat into the straight-line reserve.

use serde::{Deserialize, Serialize};

use crate::dynamics::{Action, UavState};
use crate::energy::{reserve_to_goal, tool_cost};
use crate::env::resolve_server;
use crate::world::WorldConfig;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShieldVerdict {
    pub final_action: Action,
    pub overridden: bool,
    /// Cost of the call the shield priced, if it priced one.
    pub predicted_call_cost: Option<f64>,
    /// Reward shaping term, `-rho_shield` on override and 0 otherwise.
    pub penalty: f64,
}

impl ShieldVerdict {
    pub fn pass(action: Action, predicted_call_cost: Option<f64>) -> Self {
        Self {
            final_action: action,
            overridden: false,
            predicted_call_cost,
            penalty: 0.0,
        }
    }
}

/// Screens one proposed action. Only activations are inspected and only the
/// activation bit can change.
pub fn screen(proposed: Action, state: &UavState, cfg: &WorldConfig) -> ShieldVerdict {
    if !proposed.activate {
        return ShieldVerdict::pass(proposed, None);
    }
    let Some(server) = resolve_server(state, cfg) else {
        return ShieldVerdict::pass(proposed, None);
    };
    let cost = tool_cost(server, state.pos_believed, &cfg.energy_params);
    if state.energy - cost < reserve_to_goal(state, cfg) {
        ShieldVerdict {
            final_action: Action {
                activate: false,
                ..proposed
            },
            overridden: true,
            predicted_call_cost: Some(cost),
            penalty: -cfg.reward_params.rho_shield,
        }
    } else {
        ShieldVerdict::pass(proposed, Some(cost))
    }
}
