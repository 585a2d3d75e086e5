//! Deterministic simulator of an online-to-offline food-delivery ecosystem
//! whose rider agents carry a PAD emotional state and decide through a
//! self-explaining decision loop with memory.

pub mod cognition;
pub mod config;
pub mod corpus;
pub mod emotion;
pub mod geometry;
pub mod harness;
pub mod metrics;
pub mod seeding;
pub mod types;
pub mod world;

pub use config::{validate_config, ConfigError, SimConfig, ValidConfig};
pub use geometry::{manhattan_distance, GridPos};
pub use types::{clamp_unit, DiligenceLevel, EmotionLabel, FrameworkVariant, PadState};
