//! UAV motion with belief/truth divergence.
//!
//! The agent commands velocities in its believed frame. Every unguided step
//! the true position additionally receives per-axis Gaussian drift. A tool
//! correction snaps the belief onto the truth and suppresses drift for the
//! server's validity horizon.

use serde::{Deserialize, Serialize};

use crate::geometry::Vec2;
use crate::world::rng::RngStream;
use crate::world::{in_range, ToolServer, WorldConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UavState {
    pub pos_true: Vec2,
    pub pos_believed: Vec2,
    /// Always `pos_true - pos_believed`.
    pub drift: Vec2,
    pub energy: f64,
    pub guidance_left: u32,
    pub steps_elapsed: u32,
    pub last_correction_step: Option<u32>,
}

impl UavState {
    pub fn at_start(cfg: &WorldConfig) -> Self {
        Self {
            pos_true: cfg.start_pos,
            pos_believed: cfg.start_pos,
            drift: Vec2::ZERO,
            energy: cfg.initial_energy,
            guidance_left: 0,
            steps_elapsed: 0,
            last_correction_step: None,
        }
    }

    /// Steps since the last correction, or since the episode began.
    pub fn steps_since_correction(&self) -> u32 {
        match self.last_correction_step {
            Some(s) => self.steps_elapsed - s,
            None => self.steps_elapsed,
        }
    }

    fn sync_drift(&mut self) {
        self.drift = self.pos_true - self.pos_believed;
    }
}

/// A decision: velocity command plus the tool-activation bit.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Action {
    pub velocity: Vec2,
    pub activate: bool,
}

impl Action {
    pub fn new(velocity: Vec2, activate: bool) -> Self {
        Self { velocity, activate }
    }

    /// Clamps the velocity into the `v_max` disc. Never fails.
    pub fn clamped(self, v_max: f64) -> Self {
        Self {
            velocity: self.velocity.clamp_norm(v_max),
            ..self
        }
    }
}

/// Advances both frames by `velocity * dt`; the true frame also gets drift
/// unless guidance is active. Draws from `rng` only on unguided steps with
/// `sigma_drift > 0`.
pub fn step_motion(state: &UavState, velocity: Vec2, cfg: &WorldConfig, rng: &mut RngStream) -> UavState {
    debug_assert!(velocity.norm() <= cfg.v_max * (1.0 + 1e-12), "velocity not clamped");
    let mut next = state.clone();
    let displacement = velocity * cfg.dt;
    next.pos_believed += displacement;
    next.pos_true += displacement;
    if state.guidance_left == 0 {
        if cfg.sigma_drift > 0.0 {
            let eta = Vec2::new(rng.normal(), rng.normal()) * cfg.sigma_drift;
            next.pos_true += eta;
        }
    } else {
        next.guidance_left = state.guidance_left - 1;
    }
    next.steps_elapsed += 1;
    next.sync_drift();
    next
}

/// Snaps belief onto truth and starts the server's guidance window. Energy
/// is charged by the caller.
pub fn apply_correction(state: &UavState, server: &ToolServer) -> UavState {
    debug_assert!(
        in_range(server, state.pos_true),
        "correction from server {} out of range",
        server.index
    );
    let mut next = state.clone();
    next.pos_believed = next.pos_true;
    next.guidance_left = server.validity_horizon;
    next.last_correction_step = Some(state.steps_elapsed);
    next.sync_drift();
    next
}

/// Success is judged on the true position, inclusive of the radius.
pub fn goal_reached(state: &UavState, cfg: &WorldConfig) -> bool {
    state.pos_true.distance(cfg.goal_pos) <= cfg.goal_radius
}
