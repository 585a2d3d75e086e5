//! Simulation configuration: schema, presets, validation and overrides.
//!
//! The TOML file mirrors [`SimConfig`] field for field. Every scalar field can
//! also be overridden through an environment variable named
//! `DSIM_<FIELD_NAME_UPPERCASE>` (e.g. `DSIM_N_RIDERS=12`).

use std::ops::Deref;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::types::{DiligenceLevel, FrameworkVariant};

pub const ENV_PREFIX: &str = "DSIM_";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("invalid config: {field}: {constraint}")]
    Invalid {
        field: &'static str,
        constraint: String,
    },
    #[error("unknown config field `{0}`")]
    UnknownField(String),
    #[error("field `{field}` is not a scalar and cannot be overridden")]
    NotScalar { field: String },
    #[error("cannot parse `{value}` for field `{field}`: {reason}")]
    BadOverride {
        field: String,
        value: String,
        reason: String,
    },
    #[error("unknown preset `{0}` (expected paper-main or paper-appendix)")]
    UnknownPreset(String),
    #[error("failed to read config {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("failed to parse config TOML: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("failed to serialize config: {0}")]
    Serialize(String),
}

/// One demand peak: expected orders per day contributed by a Gaussian bump
/// centred on `step_of_day`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrderPeak {
    pub step_of_day: u32,
    pub intensity: f64,
}

/// Scripted scenario-manager interventions, applied at the start of `at_step`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case")]
pub enum ScenarioDirective {
    PauseSpawning { at_step: u32 },
    ResumeSpawning { at_step: u32 },
    ScaleDemand { at_step: u32, factor: f64 },
}

impl ScenarioDirective {
    pub fn at_step(&self) -> u32 {
        match *self {
            ScenarioDirective::PauseSpawning { at_step }
            | ScenarioDirective::ResumeSpawning { at_step }
            | ScenarioDirective::ScaleDemand { at_step, .. } => at_step,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub map_width: u32,
    pub map_height: u32,
    pub n_riders: u32,
    pub steps_per_day: u32,
    pub total_steps: u32,
    pub max_held_orders: u32,
    pub move_units_per_step: u32,
    pub initial_speed: f64,
    pub rng_seed: u64,
    pub framework_variant: FrameworkVariant,
    /// Pleasure gain per currency unit earned.
    pub k_pleasure: f64,
    /// Arousal gain per stamina unit gained. Negative values make activity
    /// (stamina loss) raise arousal.
    pub k_arousal: f64,
    /// Fraction of pleasure/arousal that fades each tick.
    pub pad_decay: f64,
    /// Memory lifetime in steps; records older than this are evicted.
    pub memory_ttl: u32,
    /// Clusters per emotion sub-corpus.
    pub cluster_k: u32,
    /// Speed multiplier at zero stamina.
    pub speed_floor: f64,
    /// Stamina lost per cell moved at zero speed.
    pub stamina_per_cell: f64,
    /// Extra stamina cost per cell scaled by speed / initial_speed.
    pub stamina_speed_factor: f64,
    /// Step of day at which riders stop taking orders and head home.
    pub rest_start: u32,
    /// Steps an unassigned order waits before it expires.
    pub order_expiry_steps: u32,
    /// Delivery deadline shown to riders, in steps after creation.
    pub delivery_deadline_steps: u32,
    /// Assignment weight of the leaderboard term.
    pub rank_weight: f64,
    /// Assignment weight of the proximity term.
    pub distance_weight: f64,
    pub order_base_value: f64,
    pub order_value_per_cell: f64,
    /// Half-width of the uniform additive jitter on order value.
    pub order_value_jitter: f64,
    /// Standard deviation of each demand peak, in steps.
    pub peak_width: f64,
    /// Maximum L1 radius of a random wander target.
    pub wander_radius: u32,
    /// Write a world snapshot every N steps (0 disables).
    pub snapshot_interval: u32,
    pub order_peaks: Vec<OrderPeak>,
    /// Diligence levels handed out round-robin by rider id.
    pub diligence_mix: Vec<DiligenceLevel>,
    #[serde(default)]
    pub scenario: Vec<ScenarioDirective>,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self::paper_appendix()
    }
}

impl SimConfig {
    /// Six riders over twenty working days.
    pub fn paper_main() -> Self {
        Self {
            n_riders: 6,
            total_steps: 20 * 120,
            order_peaks: vec![
                OrderPeak { step_of_day: 25, intensity: 12.0 },
                OrderPeak { step_of_day: 55, intensity: 9.0 },
                OrderPeak { step_of_day: 85, intensity: 15.0 },
            ],
            ..Self::paper_appendix()
        }
    }

    /// One hundred riders over thirty days of 120 steps on a 200x200 map.
    pub fn paper_appendix() -> Self {
        Self {
            map_width: 200,
            map_height: 200,
            n_riders: 100,
            steps_per_day: 120,
            total_steps: 3600,
            max_held_orders: 3,
            move_units_per_step: 30,
            initial_speed: 80.0,
            rng_seed: 7,
            framework_variant: FrameworkVariant::EmotionAligned,
            k_pleasure: 0.05,
            k_arousal: 0.02,
            pad_decay: 0.05,
            memory_ttl: 240,
            cluster_k: 3,
            speed_floor: 0.3,
            stamina_per_cell: 0.05,
            stamina_speed_factor: 0.5,
            rest_start: 100,
            order_expiry_steps: 5,
            delivery_deadline_steps: 60,
            rank_weight: 1.0,
            distance_weight: 1.0,
            order_base_value: 8.0,
            order_value_per_cell: 0.12,
            order_value_jitter: 2.0,
            peak_width: 8.0,
            wander_radius: 20,
            snapshot_interval: 0,
            order_peaks: vec![
                OrderPeak { step_of_day: 25, intensity: 200.0 },
                OrderPeak { step_of_day: 55, intensity: 150.0 },
                OrderPeak { step_of_day: 85, intensity: 250.0 },
            ],
            diligence_mix: vec![
                DiligenceLevel::Lazy,
                DiligenceLevel::Lazy,
                DiligenceLevel::Average,
                DiligenceLevel::Average,
                DiligenceLevel::VeryDiligent,
                DiligenceLevel::VeryDiligent,
            ],
            scenario: Vec::new(),
        }
    }

    pub fn preset(name: &str) -> Result<Self, ConfigError> {
        match name {
            "paper-main" => Ok(Self::paper_main()),
            "paper-appendix" => Ok(Self::paper_appendix()),
            other => Err(ConfigError::UnknownPreset(other.to_string())),
        }
    }

    pub fn from_toml_str(s: &str) -> Result<Self, ConfigError> {
        Ok(toml::from_str(s)?)
    }

    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String, ConfigError> {
        toml::to_string(self).map_err(|e| ConfigError::Serialize(e.to_string()))
    }

    /// Hex SHA-256 of the serialized TOML.
    pub fn hash(&self) -> Result<String, ConfigError> {
        Ok(sha256_hex(self.to_toml_string()?.as_bytes()))
    }

    pub fn diligence_of(&self, rider: u32) -> DiligenceLevel {
        self.diligence_mix[rider as usize % self.diligence_mix.len()]
    }

    pub fn days(&self) -> u32 {
        self.total_steps / self.steps_per_day
    }

    /// Expected orders per day summed over all peaks.
    pub fn daily_order_total(&self) -> f64 {
        self.order_peaks.iter().map(|p| p.intensity).sum()
    }

    /// Sets one scalar field from its textual value.
    pub fn set_field(&mut self, field: &str, value: &str) -> Result<(), ConfigError> {
        let mut table = self.to_table()?;
        let current = table
            .get(field)
            .ok_or_else(|| ConfigError::UnknownField(field.to_string()))?;
        let parsed = parse_like(current, field, value)?;
        table.insert(field.to_string(), parsed);
        *self = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| ConfigError::BadOverride {
                field: field.to_string(),
                value: value.to_string(),
                reason: e.to_string(),
            })?;
        Ok(())
    }

    /// Applies `DSIM_*` overrides read through `lookup` (normally `std::env::var`).
    pub fn apply_env_overrides_with<F>(&mut self, lookup: F) -> Result<Vec<String>, ConfigError>
    where
        F: Fn(&str) -> Option<String>,
    {
        let mut applied = Vec::new();
        for field in Self::scalar_fields()? {
            let var = format!("{ENV_PREFIX}{}", field.to_ascii_uppercase());
            if let Some(value) = lookup(&var) {
                self.set_field(&field, &value)?;
                applied.push(field);
            }
        }
        Ok(applied)
    }

    pub fn apply_env_overrides(&mut self) -> Result<Vec<String>, ConfigError> {
        self.apply_env_overrides_with(|k| std::env::var(k).ok())
    }

    /// Names of every field that takes a single value.
    pub fn scalar_fields() -> Result<Vec<String>, ConfigError> {
        let table = Self::default().to_table()?;
        Ok(table
            .iter()
            .filter(|(_, v)| !matches!(v, toml::Value::Array(_) | toml::Value::Table(_)))
            .map(|(k, _)| k.clone())
            .collect())
    }

    fn to_table(&self) -> Result<toml::Table, ConfigError> {
        match toml::Value::try_from(self) {
            Ok(toml::Value::Table(t)) => Ok(t),
            Ok(_) => Err(ConfigError::Serialize("config is not a table".into())),
            Err(e) => Err(ConfigError::Serialize(e.to_string())),
        }
    }
}

fn parse_like(current: &toml::Value, field: &str, value: &str) -> Result<toml::Value, ConfigError> {
    let bad = |reason: &str| ConfigError::BadOverride {
        field: field.to_string(),
        value: value.to_string(),
        reason: reason.to_string(),
    };
    let v = value.trim();
    Ok(match current {
        toml::Value::Integer(_) => toml::Value::Integer(v.parse().map_err(|_| bad("expected an integer"))?),
        toml::Value::Float(_) => toml::Value::Float(v.parse().map_err(|_| bad("expected a number"))?),
        toml::Value::Boolean(_) => toml::Value::Boolean(v.parse().map_err(|_| bad("expected true or false"))?),
        toml::Value::String(_) => {
            // Enum-valued fields accept the kebab-case slugs too.
            if field == "framework_variant" {
                let variant: FrameworkVariant = v.parse().map_err(|_| bad("unknown framework variant"))?;
                toml::Value::try_from(variant).map_err(|e| bad(&e.to_string()))?
            } else {
                toml::Value::String(v.to_string())
            }
        }
        _ => {
            return Err(ConfigError::NotScalar {
                field: field.to_string(),
            })
        }
    })
}

pub(crate) fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// A configuration that passed [`validate_config`]. Read-only from here on.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct ValidConfig(SimConfig);

impl ValidConfig {
    pub fn into_inner(self) -> SimConfig {
        self.0
    }
}

impl Deref for ValidConfig {
    type Target = SimConfig;

    fn deref(&self) -> &SimConfig {
        &self.0
    }
}

impl<'de> Deserialize<'de> for ValidConfig {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let cfg = SimConfig::deserialize(d)?;
        validate_config(cfg).map_err(serde::de::Error::custom)
    }
}

fn invalid(field: &'static str, constraint: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        field,
        constraint: constraint.into(),
    }
}

fn check(ok: bool, field: &'static str, constraint: impl Into<String>) -> Result<(), ConfigError> {
    if ok {
        Ok(())
    } else {
        Err(invalid(field, constraint))
    }
}

fn finite(v: f64) -> bool {
    v.is_finite()
}

/// Checks every invariant and returns the first violation.
pub fn validate_config(cfg: SimConfig) -> Result<ValidConfig, ConfigError> {
    check(cfg.map_width >= 1, "map_width", "must be at least 1")?;
    check(cfg.map_height >= 1, "map_height", "must be at least 1")?;
    check(cfg.n_riders >= 1, "n_riders", "must be at least 1")?;
    check(cfg.steps_per_day >= 1, "steps_per_day", "must be at least 1")?;
    check(cfg.total_steps >= 1, "total_steps", "must be positive")?;
    check(
        cfg.total_steps.is_multiple_of(cfg.steps_per_day),
        "total_steps",
        format!(
            "total_steps not multiple of steps_per_day ({} % {} != 0)",
            cfg.total_steps, cfg.steps_per_day
        ),
    )?;
    check(cfg.max_held_orders >= 1, "max_held_orders", "must be at least 1")?;
    check(cfg.move_units_per_step >= 1, "move_units_per_step", "must be at least 1")?;
    check(
        finite(cfg.initial_speed) && cfg.initial_speed > 0.0,
        "initial_speed",
        "must be positive and finite",
    )?;
    check(finite(cfg.k_pleasure), "k_pleasure", "must be finite")?;
    check(finite(cfg.k_arousal), "k_arousal", "must be finite")?;
    check(
        (0.0..=1.0).contains(&cfg.pad_decay),
        "pad_decay",
        "must lie in [0, 1]",
    )?;
    check(cfg.cluster_k >= 1, "cluster_k", "must be at least 1")?;
    check(
        cfg.speed_floor > 0.0 && cfg.speed_floor <= 1.0,
        "speed_floor",
        "must lie in (0, 1]",
    )?;
    check(
        finite(cfg.stamina_per_cell) && cfg.stamina_per_cell >= 0.0,
        "stamina_per_cell",
        "must be non-negative",
    )?;
    check(
        finite(cfg.stamina_speed_factor) && cfg.stamina_speed_factor >= 0.0,
        "stamina_speed_factor",
        "must be non-negative",
    )?;
    check(
        cfg.rest_start <= cfg.steps_per_day,
        "rest_start",
        "must not exceed steps_per_day",
    )?;
    check(cfg.order_expiry_steps >= 1, "order_expiry_steps", "must be at least 1")?;
    check(
        finite(cfg.rank_weight) && finite(cfg.distance_weight),
        "rank_weight",
        "assignment weights must be finite",
    )?;
    check(
        finite(cfg.order_base_value) && cfg.order_base_value >= 0.0,
        "order_base_value",
        "must be non-negative",
    )?;
    check(
        finite(cfg.order_value_per_cell) && cfg.order_value_per_cell >= 0.0,
        "order_value_per_cell",
        "must be non-negative",
    )?;
    check(
        finite(cfg.order_value_jitter) && cfg.order_value_jitter >= 0.0,
        "order_value_jitter",
        "must be non-negative",
    )?;
    check(
        finite(cfg.peak_width) && cfg.peak_width > 0.0,
        "peak_width",
        "must be positive",
    )?;
    for peak in &cfg.order_peaks {
        check(
            peak.step_of_day < cfg.steps_per_day,
            "order_peaks",
            format!("peak step {} outside the day", peak.step_of_day),
        )?;
        check(
            finite(peak.intensity) && peak.intensity >= 0.0,
            "order_peaks",
            "intensity must be non-negative",
        )?;
    }
    check(!cfg.diligence_mix.is_empty(), "diligence_mix", "must not be empty")?;
    for d in &cfg.scenario {
        check(
            d.at_step() < cfg.total_steps,
            "scenario",
            format!("directive at step {} is after the run ends", d.at_step()),
        )?;
        if let ScenarioDirective::ScaleDemand { factor, .. } = d {
            check(
                finite(*factor) && *factor >= 0.0,
                "scenario",
                "demand factor must be non-negative",
            )?;
        }
    }
    Ok(ValidConfig(cfg))
}

/// One-line descriptions of every field, used by the CLI help.
pub const FIELD_DOCS: &[(&str, &str)] = &[
    ("map_width", "grid width in cells"),
    ("map_height", "grid height in cells"),
    ("n_riders", "number of rider agents"),
    ("steps_per_day", "simulation steps per day"),
    ("total_steps", "run length; a positive multiple of steps_per_day"),
    ("max_held_orders", "orders a rider may hold at once"),
    ("move_units_per_step", "cells moved per step at full speed"),
    ("initial_speed", "rider speed at full stamina"),
    ("rng_seed", "master seed for every random stream"),
    ("framework_variant", "traditional | emotion-perceived | emotion-aligned"),
    ("k_pleasure", "pleasure gain per currency unit earned"),
    ("k_arousal", "arousal gain per stamina unit gained (negative: activity raises arousal)"),
    ("pad_decay", "per-tick fade of pleasure and arousal, in [0, 1]"),
    ("memory_ttl", "steps a decision memory stays valid"),
    ("cluster_k", "clusters per emotion sub-corpus"),
    ("speed_floor", "speed multiplier at zero stamina"),
    ("stamina_per_cell", "stamina cost per cell moved"),
    ("stamina_speed_factor", "extra per-cell cost scaled by relative speed"),
    ("rest_start", "step of day when work stops"),
    ("order_expiry_steps", "steps before an unassigned order expires"),
    ("delivery_deadline_steps", "deadline shown to riders, steps after creation"),
    ("rank_weight", "assignment weight of leaderboard rank"),
    ("distance_weight", "assignment weight of proximity to the pickup"),
    ("order_base_value", "fixed part of an order's value"),
    ("order_value_per_cell", "value per cell of pickup-to-dropoff distance"),
    ("order_value_jitter", "half-width of uniform value jitter"),
    ("peak_width", "standard deviation of each demand peak, in steps"),
    ("wander_radius", "max L1 radius of a wander move"),
    ("snapshot_interval", "write a world snapshot every N steps (0 = off)"),
    ("order_peaks", "list of {step_of_day, intensity}; intensity = orders per day"),
    ("diligence_mix", "diligence levels assigned round-robin by rider id"),
    ("scenario", "scripted interventions: pause_spawning / resume_spawning / scale_demand"),
];
