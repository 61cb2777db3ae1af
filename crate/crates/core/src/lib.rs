//! Simulator and teacher-shielded PPO for a UAV that learns when to spend
//! energy on ground navigation tools.
//!
//! The crate is layered bottom-up: [`world`] (scenario and random streams),
//! [`dynamics`] (belief/truth motion), [`energy`] (costs and ledger),
//! [`shield`] (the teacher), [`env`] (the decision process and scripted
//! baselines), [`learner`] (MLP, GAE, PPO), [`eval`] (evaluation protocol
//! and statistics) and [`harness`] (file formats, figures, experiment
//! orchestration behind the CLI).

pub mod dynamics;
pub mod energy;
pub mod env;
pub mod eval;
pub mod geometry;
pub mod harness;
pub mod learner;
pub mod shield;
pub mod world;

pub use dynamics::{Action, UavState};
pub use env::{Episode, Observation, TerminationCause, Transition};
pub use geometry::Vec2;
pub use world::{ToolKind, ToolServer, WorldConfig};
