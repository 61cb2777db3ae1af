//! Scenario description: arena, mission endpoints, tool servers, cost and
//! reward parameters, and the seed every random stream derives from.
//!
//! Configurations are JSON files whose field names match the struct fields
//! below. [`WorldConfig::to_canonical_json`] is the canonical serialization:
//! loading a canonical file and saving it again reproduces it byte for byte.

pub mod rng;

use std::borrow::Cow;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::energy::EnergyParams;
use crate::env::RewardParams;
use crate::geometry::Vec2;
use rng::{labels, RngStream};

/// The scenario shipped with the crate (`scenarios/default.json`).
pub const DEFAULT_SCENARIO_JSON: &str = include_str!("../../scenarios/default.json");

pub const DEFAULT_RANGE: f64 = 150.0;
pub const DEFAULT_STANDARD_HORIZON: u32 = 40;
pub const DEFAULT_SEMANTIC_HORIZON: u32 = 12;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed config: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ToolKind {
    Standard,
    Semantic,
}

impl ToolKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ToolKind::Standard => "standard",
            ToolKind::Semantic => "semantic",
        }
    }
}

impl fmt::Display for ToolKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A ground server exposing a navigation tool.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToolServer {
    pub index: usize,
    pub kind: ToolKind,
    pub position: Vec2,
    /// Activation radius in meters.
    pub range: f64,
    /// Steps of drift-free guidance after a successful activation.
    pub validity_horizon: u32,
}

impl ToolServer {
    pub fn new(index: usize, kind: ToolKind, position: Vec2) -> Self {
        let validity_horizon = match kind {
            ToolKind::Standard => DEFAULT_STANDARD_HORIZON,
            ToolKind::Semantic => DEFAULT_SEMANTIC_HORIZON,
        };
        Self {
            index,
            kind,
            position,
            range: DEFAULT_RANGE,
            validity_horizon,
        }
    }
}

/// Inclusive range test: distance exactly equal to `range` is in range.
pub fn in_range(server: &ToolServer, pos: Vec2) -> bool {
    pos.distance(server.position) <= server.range
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorldConfig {
    /// Side of the square arena `[0, arena_size]^2`, meters.
    pub arena_size: f64,
    pub start_pos: Vec2,
    pub goal_pos: Vec2,
    pub goal_radius: f64,
    pub dt: f64,
    pub v_max: f64,
    /// Per-axis standard deviation of the drift added to the true position
    /// on every unguided step, meters.
    pub sigma_drift: f64,
    pub max_steps: u32,
    pub initial_energy: f64,
    /// Canonical server order; `servers[i].index == i`.
    pub servers: Vec<ToolServer>,
    pub energy_params: EnergyParams,
    pub reward_params: RewardParams,
    /// When set, every episode redraws the server positions uniformly in the
    /// arena (kinds, ranges and horizons are kept) from its own stream.
    #[serde(default)]
    pub randomize_layout: bool,
    pub seed: u64,
}

impl Default for WorldConfig {
    fn default() -> Self {
        let servers = vec![
            ToolServer::new(0, ToolKind::Standard, Vec2::new(320.0, 560.0)),
            ToolServer::new(1, ToolKind::Standard, Vec2::new(700.0, 260.0)),
            ToolServer::new(2, ToolKind::Semantic, Vec2::new(520.0, 760.0)),
            ToolServer::new(3, ToolKind::Semantic, Vec2::new(840.0, 630.0)),
        ];
        Self {
            servers,
            randomize_layout: true,
            ..Self::empty_arena()
        }
    }
}

impl WorldConfig {
    /// Default arena, endpoints and parameters with no tool servers.
    pub fn empty_arena() -> Self {
        Self {
            arena_size: 1000.0,
            start_pos: Vec2::new(50.0, 500.0),
            goal_pos: Vec2::new(950.0, 500.0),
            goal_radius: 20.0,
            dt: 1.0,
            v_max: 20.0,
            sigma_drift: 2.0,
            max_steps: 200,
            initial_energy: 12_000.0,
            servers: Vec::new(),
            energy_params: EnergyParams::default(),
            reward_params: RewardParams::default(),
            randomize_layout: false,
            seed: 0,
        }
    }

    /// Parses and validates the bundled default scenario.
    pub fn bundled_default() -> Self {
        Self::from_json(DEFAULT_SCENARIO_JSON).expect("bundled scenario is valid")
    }

    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let cfg: WorldConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text)
    }

    /// Pretty-printed JSON with a trailing newline.
    pub fn to_canonical_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("config serializes");
        s.push('\n');
        s
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), ConfigError> {
        let path = path.as_ref();
        std::fs::write(path, self.to_canonical_json()).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// Largest validity horizon over all servers (0 with no servers).
    pub fn max_horizon(&self) -> u32 {
        self.servers.iter().map(|s| s.validity_horizon).max().unwrap_or(0)
    }

    pub fn contains(&self, p: Vec2) -> bool {
        p.is_finite()
            && (0.0..=self.arena_size).contains(&p.x)
            && (0.0..=self.arena_size).contains(&p.y)
    }

    /// FNV-1a of the canonical JSON, seed excluded. Reports computed on the
    /// same scenario share the fingerprint.
    pub fn fingerprint(&self) -> u64 {
        let mut c = self.clone();
        c.seed = 0;
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for b in c.to_canonical_json().as_bytes() {
            h ^= u64::from(*b);
            h = h.wrapping_mul(0x0000_0100_0000_01B3);
        }
        h
    }

    /// The concrete scenario for one episode. With `randomize_layout` the
    /// servers are redrawn from the `(layout_seed, "layout", episode_index)`
    /// stream; otherwise this borrows `self`.
    pub fn episode_layout(&self, layout_seed: u64, episode_index: u64) -> Cow<'_, WorldConfig> {
        if !self.randomize_layout || self.servers.is_empty() {
            return Cow::Borrowed(self);
        }
        let mut rng = RngStream::new(layout_seed, labels::LAYOUT, episode_index);
        let mut cfg = self.clone();
        for s in &mut cfg.servers {
            s.position = Vec2::new(
                rng.uniform_range(0.0, self.arena_size),
                rng.uniform_range(0.0, self.arena_size),
            );
        }
        cfg.randomize_layout = false;
        Cow::Owned(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let fail = |msg: String| Err(ConfigError::Invalid(msg));
        if !(self.arena_size.is_finite() && self.arena_size > 0.0) {
            return fail(format!("arena_size must be > 0 (got {})", self.arena_size));
        }
        if !(self.v_max.is_finite() && self.v_max > 0.0) {
            return fail(format!("v_max must be > 0 (got {})", self.v_max));
        }
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return fail(format!("dt must be > 0 (got {})", self.dt));
        }
        if !(self.sigma_drift.is_finite() && self.sigma_drift >= 0.0) {
            return fail(format!("sigma_drift must be >= 0 (got {})", self.sigma_drift));
        }
        if !(self.goal_radius.is_finite() && self.goal_radius > 0.0) {
            return fail(format!("goal_radius must be > 0 (got {})", self.goal_radius));
        }
        if !(self.initial_energy.is_finite() && self.initial_energy > 0.0) {
            return fail(format!(
                "initial_energy must be > 0 (got {})",
                self.initial_energy
            ));
        }
        if self.max_steps == 0 {
            return fail("max_steps must be >= 1".into());
        }
        if !self.contains(self.start_pos) {
            return fail("arena must contain start_pos".into());
        }
        if !self.contains(self.goal_pos) {
            return fail("arena must contain goal_pos".into());
        }
        for (i, s) in self.servers.iter().enumerate() {
            if s.index != i {
                return fail(format!(
                    "servers[{i}].index is {} but must equal its list position",
                    s.index
                ));
            }
            if !self.contains(s.position) {
                return fail(format!("arena must contain servers[{i}].position"));
            }
            if !(s.range.is_finite() && s.range > 0.0) {
                return fail(format!("servers[{i}].range must be > 0 (got {})", s.range));
            }
            if s.validity_horizon < 1 {
                return fail(format!("servers[{i}].validity_horizon must be >= 1"));
            }
        }
        let min_standard = self
            .servers
            .iter()
            .filter(|s| s.kind == ToolKind::Standard)
            .map(|s| s.validity_horizon)
            .min();
        let max_semantic = self
            .servers
            .iter()
            .filter(|s| s.kind == ToolKind::Semantic)
            .map(|s| s.validity_horizon)
            .max();
        if let (Some(std_h), Some(sem_h)) = (min_standard, max_semantic) {
            if std_h <= sem_h {
                return fail(format!(
                    "every standard validity_horizon must exceed every semantic one \
                     (standard {std_h} <= semantic {sem_h})"
                ));
            }
        }
        self.energy_params
            .validate(self.initial_energy, &self.servers)
            .map_err(ConfigError::Invalid)?;
        self.reward_params.validate().map_err(ConfigError::Invalid)?;
        Ok(())
    }
}

/// Default arena with `n_standard` then `n_semantic` servers placed
/// uniformly at random. A pure function of its arguments.
pub fn random_scenario(seed: u64, n_standard: usize, n_semantic: usize) -> WorldConfig {
    let mut cfg = WorldConfig::empty_arena();
    cfg.seed = seed;
    let mut rng = RngStream::new(seed, labels::SCENARIO, 0);
    let kinds = std::iter::repeat_n(ToolKind::Standard, n_standard)
        .chain(std::iter::repeat_n(ToolKind::Semantic, n_semantic));
    for (i, kind) in kinds.enumerate() {
        let p = Vec2::new(
            rng.uniform_range(0.0, cfg.arena_size),
            rng.uniform_range(0.0, cfg.arena_size),
        );
        cfg.servers.push(ToolServer::new(i, kind, p));
    }
    debug_assert!(cfg.validate().is_ok());
    cfg
}
