//! Desk-scale laboratory for UAV-UGV coalition path planning.
//!
//! The crate is organized around one pipeline:
//!
//! 1. [`zoning`] groups targets into circular zones with a densest-first
//!    mean-shift heuristic.
//! 2. [`world`] simulates a deterministic 2D particle arena with danger-zone
//!    collision bookkeeping, and [`reward`] shapes the per-agent learning
//!    signal on top of it.
//! 3. [`maddpg`] and [`mappo`] train vehicle policies on [`train_env`]
//!    scenarios, backed by the hand-rolled MLP substrate in [`neural`].
//! 4. [`mission`] dispatches trained coalitions zone by zone and [`evaluation`]
//!    aggregates the episode records into the comparison metrics.

pub mod artifacts;
pub mod evaluation;
pub mod geom;
pub mod maddpg;
pub mod mappo;
pub mod mission;
pub mod neural;
pub mod reward;
pub mod rng;
pub mod train_env;
pub mod world;
pub mod zoning;

pub use geom::Vec2;
