//! Run directories: single simulation runs, the three-variant ablation and
//! corpus index builds.
//!
//! A run directory holds everything needed to analyse it later:
//! `manifest.json`, `config.toml`, `events.jsonl`, `metrics.jsonl` and
//! `decisions.jsonl`, plus `llm_requests.jsonl` and `snapshots/` when used.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;
use tracing::{info, warn};

use crate::cognition::{BackendError, DecisionBackend, LlmBackend, LlmConfig, RoleLibrary, RuleBackend};
use crate::config::{sha256_hex, validate_config, ConfigError, SimConfig, ValidConfig};
use crate::corpus::{build_index, load_corpus, ClusterOptions, CorpusError, CorpusIndex, EmbedderSpec};
use crate::metrics::{
    self, frames_from_events, read_events, rejection_rate, Heatmap, MetricsError, MetricsFrame,
    ReportOptions,
};
use crate::types::FrameworkVariant;
use crate::world::{Event, EventRecord, World, WorldError};

/// Files every completed run directory contains.
pub const RUN_FILES: [&str; 5] = [
    "manifest.json",
    "config.toml",
    "events.jsonl",
    "metrics.jsonl",
    "decisions.jsonl",
];

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    World(#[from] WorldError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("variant {variant} saw a different order stream ({got} vs {expected})")]
    OrderStreamMismatch {
        variant: FrameworkVariant,
        expected: String,
        got: String,
    },
}

impl HarnessError {
    /// Process exit code: 1 bad input, 2 simulation invariant, 3 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) | HarnessError::Corpus(_) | HarnessError::Backend(_) => 1,
            HarnessError::World(_) | HarnessError::OrderStreamMismatch { .. } => 2,
            HarnessError::Metrics(MetricsError::TooFewRiders(_)) => 1,
            HarnessError::Metrics(_) | HarnessError::Io { .. } => 3,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io {
        path: path.display().to_string(),
        source,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum BackendChoice {
    Rule,
    Llm(LlmConfig),
}

pub struct RunOptions<'a> {
    /// Prefix of the run id, usually the preset name.
    pub label: String,
    pub backend: BackendChoice,
    pub library: Option<&'a RoleLibrary>,
    /// Path recorded in the manifest when a corpus index is in use.
    pub corpus_index: Option<PathBuf>,
}

impl Default for RunOptions<'_> {
    fn default() -> Self {
        Self {
            label: "custom".into(),
            backend: BackendChoice::Rule,
            library: None,
            corpus_index: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Running,
    Completed,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub run_id: String,
    pub status: RunStatus,
    /// SHA-256 of `config.toml` exactly as written.
    pub config_sha256: String,
    pub seed: u64,
    pub framework_variant: FrameworkVariant,
    pub backend_id: String,
    pub corpus_index: Option<String>,
    pub started_at: String,
    pub finished_at: Option<String>,
    pub total_steps: u32,
    pub steps_completed: u32,
    pub events_sha256: Option<String>,
    /// Hash of the spawned-order stream; equal across ablation variants.
    pub orders_sha256: Option<String>,
    pub error: Option<String>,
    pub config: SimConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub dir: PathBuf,
    pub manifest: RunManifest,
}

pub fn run_id(label: &str, cfg: &SimConfig, config_sha256: &str) -> String {
    format!(
        "{label}-{}-s{}-{}",
        cfg.framework_variant.slug(),
        cfg.rng_seed,
        &config_sha256[..8]
    )
}

fn build_backend(choice: &BackendChoice, dir: &Path) -> Result<Box<dyn DecisionBackend>, HarnessError> {
    Ok(match choice {
        BackendChoice::Rule => Box::new(RuleBackend),
        BackendChoice::Llm(cfg) => {
            let mut cfg = cfg.clone();
            if cfg.request_log.is_none() {
                cfg.request_log = Some(dir.join("llm_requests.jsonl"));
            }
            Box::new(LlmBackend::new(cfg)?)
        }
    })
}

struct HashingWriter {
    inner: BufWriter<File>,
    hasher: Sha256,
}

impl HashingWriter {
    fn create(path: &Path) -> Result<Self, HarnessError> {
        Ok(Self {
            inner: BufWriter::new(File::create(path).map_err(io_err(path))?),
            hasher: Sha256::new(),
        })
    }

    fn line<T: Serialize>(&mut self, value: &T) -> std::io::Result<()> {
        let mut s = serde_json::to_string(value).expect("log record serializes");
        s.push('\n');
        self.hasher.update(s.as_bytes());
        self.inner.write_all(s.as_bytes())
    }

    fn finish(mut self) -> std::io::Result<String> {
        self.inner.flush()?;
        Ok(hex::encode(self.hasher.finalize()))
    }
}

/// Digest of the `OrderSpawned` events, in order.
#[derive(Default)]
pub struct OrderStreamHasher(Sha256);

impl OrderStreamHasher {
    pub fn update(&mut self, records: &[EventRecord]) {
        for r in records {
            if matches!(r.event, Event::OrderSpawned { .. }) {
                self.0.update(serde_json::to_string(r).expect("event serializes").as_bytes());
                self.0.update(b"\n");
            }
        }
    }

    pub fn finish(self) -> String {
        hex::encode(self.0.finalize())
    }
}

fn write_manifest(dir: &Path, m: &RunManifest) -> Result<(), HarnessError> {
    let path = dir.join("manifest.json");
    let mut text = serde_json::to_string_pretty(m).expect("manifest serializes");
    text.push('\n');
    fs::write(&path, text).map_err(io_err(&path))
}

fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

/// Runs a simulation to completion, streaming every log into `dir`.
///
/// On an invariant violation the logs written so far are kept and the
/// manifest is marked failed before the error is returned.
pub fn run_simulation(cfg: ValidConfig, dir: &Path, opts: &RunOptions<'_>) -> Result<RunOutcome, HarnessError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let config_text = cfg.to_toml_string()?;
    let config_path = dir.join("config.toml");
    fs::write(&config_path, &config_text).map_err(io_err(&config_path))?;
    let config_sha256 = sha256_hex(config_text.as_bytes());

    let mut backend = build_backend(&opts.backend, dir)?;
    if cfg.framework_variant == FrameworkVariant::EmotionAligned && opts.library.is_none() {
        warn!("no corpus index given; emotion-aligned riders decide without role examples");
    }
    let mut manifest = RunManifest {
        run_id: run_id(&opts.label, &cfg, &config_sha256),
        status: RunStatus::Running,
        config_sha256,
        seed: cfg.rng_seed,
        framework_variant: cfg.framework_variant,
        backend_id: backend.backend_id(),
        corpus_index: opts.corpus_index.as_ref().map(|p| p.display().to_string()),
        started_at: now(),
        finished_at: None,
        total_steps: cfg.total_steps,
        steps_completed: 0,
        events_sha256: None,
        orders_sha256: None,
        error: None,
        config: (*cfg).clone(),
    };
    write_manifest(dir, &manifest)?;
    info!(run_id = %manifest.run_id, dir = %dir.display(), "run started");

    let snapshot_interval = cfg.snapshot_interval;
    let mut events = HashingWriter::create(&dir.join("events.jsonl"))?;
    let mut frames = HashingWriter::create(&dir.join("metrics.jsonl"))?;
    let mut decisions = HashingWriter::create(&dir.join("decisions.jsonl"))?;
    let mut orders = OrderStreamHasher::default();
    let mut world = World::new(cfg);

    let result = (|| -> Result<(), HarnessError> {
        while !world.is_finished() {
            let out = world.tick(backend.as_mut(), opts.library)?;
            let log_err = io_err(dir);
            let mut write = || -> std::io::Result<()> {
                for e in &out.events {
                    events.line(e)?;
                }
                for d in &out.decisions {
                    decisions.line(d)?;
                }
                frames.line(&metrics::observe(&world, &out))
            };
            write().map_err(log_err)?;
            orders.update(&out.events);
            if snapshot_interval > 0 && world.step().is_multiple_of(snapshot_interval) {
                let snap_dir = dir.join("snapshots");
                fs::create_dir_all(&snap_dir).map_err(io_err(&snap_dir))?;
                let path = snap_dir.join(format!("step-{:06}.json", world.step()));
                fs::write(&path, world.to_snapshot_json()).map_err(io_err(&path))?;
            }
        }
        Ok(())
    })();

    manifest.steps_completed = world.step();
    manifest.finished_at = Some(now());
    let events_sha = events.finish().map_err(io_err(dir))?;
    frames.finish().map_err(io_err(dir))?;
    decisions.finish().map_err(io_err(dir))?;
    match result {
        Ok(()) => {
            manifest.status = RunStatus::Completed;
            manifest.events_sha256 = Some(events_sha);
            manifest.orders_sha256 = Some(orders.finish());
            write_manifest(dir, &manifest)?;
            info!(run_id = %manifest.run_id, "run completed");
            Ok(RunOutcome {
                dir: dir.to_path_buf(),
                manifest,
            })
        }
        Err(e) => {
            manifest.status = RunStatus::Failed;
            manifest.error = Some(e.to_string());
            write_manifest(dir, &manifest)?;
            Err(e)
        }
    }
}

/// Everything an in-memory run produced.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MemoryRun {
    pub events: Vec<EventRecord>,
    pub frames: Vec<MetricsFrame>,
    pub decisions: usize,
}

/// Runs a whole simulation without touching the filesystem.
pub fn simulate(
    cfg: ValidConfig,
    backend: &mut dyn DecisionBackend,
    library: Option<&RoleLibrary>,
) -> Result<MemoryRun, WorldError> {
    let mut world = World::new(cfg);
    let mut run = MemoryRun::default();
    while !world.is_finished() {
        let out = world.tick(backend, library)?;
        run.frames.push(metrics::observe(&world, &out));
        run.decisions += out.decisions.len();
        run.events.extend(out.events);
    }
    Ok(run)
}

/// One row of `comparison.csv`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonRow {
    pub variant: FrameworkVariant,
    pub day: u32,
    /// At the last step of the day.
    pub involution: Option<f64>,
    /// Genuine decisions made during the day.
    pub rejection_rate: Option<f64>,
    /// Over all movement up to the end of the day.
    pub aggregation_index: f64,
}

/// Per-day comparison rows for one run's events.
pub fn daily_rows(variant: FrameworkVariant, events: &[EventRecord], cfg: &SimConfig) -> Vec<ComparisonRow> {
    let frames = frames_from_events(events, cfg.n_riders, cfg.total_steps);
    let mut heat = Heatmap::new(cfg.map_width, cfg.map_height, 1);
    let mut rows = Vec::new();
    let mut i = 0;
    for day in 0..cfg.days() {
        let end = (day + 1) * cfg.steps_per_day;
        let start = i;
        while i < events.len() && events[i].step < end {
            if let Event::RiderMoved { position, .. } = events[i].event {
                heat.record(position.x, position.y);
            }
            i += 1;
        }
        rows.push(ComparisonRow {
            variant,
            day,
            involution: frames.get(end as usize - 1).and_then(|f| f.involution),
            rejection_rate: rejection_rate(&events[start..i], false).global.rate(),
            aggregation_index: metrics::aggregation_index(&heat),
        });
    }
    rows
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationOutcome {
    pub runs: Vec<RunOutcome>,
    pub rows: Vec<ComparisonRow>,
    pub orders_sha256: String,
}

/// Runs all three framework variants on the same seed and order stream and
/// writes `comparison.csv` next to the three run directories.
pub fn run_ablation(cfg: SimConfig, dir: &Path, opts: &RunOptions<'_>) -> Result<AblationOutcome, HarnessError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut runs = Vec::new();
    let mut rows = Vec::new();
    let mut expected: Option<String> = None;
    for variant in FrameworkVariant::ALL {
        let cfg = validate_config(SimConfig {
            framework_variant: variant,
            ..cfg.clone()
        })?;
        let run_dir = dir.join(variant.slug());
        let outcome = run_simulation(cfg.clone(), &run_dir, opts)?;
        let got = outcome.manifest.orders_sha256.clone().unwrap_or_default();
        match &expected {
            None => expected = Some(got),
            Some(exp) if *exp != got => {
                return Err(HarnessError::OrderStreamMismatch {
                    variant,
                    expected: exp.clone(),
                    got,
                })
            }
            Some(_) => {}
        }
        metrics::write_report(&run_dir, &ReportOptions::default())?;
        let events = read_events(&run_dir.join("events.jsonl"))?;
        rows.extend(daily_rows(variant, &events, &cfg));
        runs.push(outcome);
    }
    let path = dir.join("comparison.csv");
    let csv_err = |e: csv::Error| HarnessError::Io {
        path: path.display().to_string(),
        source: std::io::Error::other(e.to_string()),
    };
    let mut w = csv::Writer::from_path(&path).map_err(csv_err)?;
    w.write_record(["variant", "day", "involution", "rejection_rate", "aggregation_index"])
        .map_err(csv_err)?;
    for r in &rows {
        w.write_record([
            r.variant.slug().to_string(),
            r.day.to_string(),
            r.involution.map(|v| v.to_string()).unwrap_or_default(),
            r.rejection_rate.map(|v| v.to_string()).unwrap_or_default(),
            r.aggregation_index.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(io_err(&path))?;
    Ok(AblationOutcome {
        runs,
        rows,
        orders_sha256: expected.unwrap_or_default(),
    })
}

/// Builds a corpus index from a JSONL corpus and writes it to `out`.
pub fn build_index_file(
    corpus: &Path,
    k: usize,
    seed: u64,
    spec: &EmbedderSpec,
    opts: &ClusterOptions,
    out: &Path,
) -> Result<CorpusIndex, HarnessError> {
    let report = load_corpus(corpus)?;
    let embedder = spec.build().map_err(CorpusError::from)?;
    let index = build_index(&report.records, k, seed, spec, embedder.as_ref(), opts)?;
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(io_err(parent))?;
    }
    index.write(out)?;
    info!(
        records = report.records.len(),
        dropped = report.dropped(),
        sections = index.sections.len(),
        "corpus index written"
    );
    Ok(index)
}

/// Loads a corpus index and rebuilds its embedder.
pub fn load_library(path: &Path) -> Result<RoleLibrary, HarnessError> {
    let index = CorpusIndex::read(path)?;
    Ok(RoleLibrary::from_index(index).map_err(CorpusError::from)?)
}
