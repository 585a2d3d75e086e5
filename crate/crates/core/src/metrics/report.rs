use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{
    aggregation_index, emotion_distribution, frames_from_events, rejection_rate, trajectory_heatmap,
    EmotionFilter, EmotionHistogram, MetricsError,
};
use crate::config::{sha256_hex, SimConfig};
use crate::types::FrameworkVariant;
use crate::world::{Event, EventRecord, EVENT_SCHEMA_VERSION};

/// Files produced by [`write_report`].
pub const REPORT_FILES: [&str; 5] = [
    "involution.csv",
    "rejection.csv",
    "emotions.csv",
    "heatmap.csv",
    "summary.json",
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReportOptions {
    pub filter: EmotionFilter,
    pub include_incidents: bool,
    pub downsample: u32,
}

impl Default for ReportOptions {
    fn default() -> Self {
        Self {
            filter: EmotionFilter::AtAcceptance,
            include_incidents: false,
            downsample: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportSummary {
    pub run_id: String,
    pub config_sha256: String,
    pub seed: u64,
    pub framework_variant: FrameworkVariant,
    pub riders: u32,
    pub steps: u32,
    pub final_income_mean: f64,
    pub final_involution: Option<f64>,
    pub rejection_rate: Option<f64>,
    pub accepts: u64,
    pub rejects: u64,
    pub incidents: u64,
    pub incidents_included: bool,
    pub orders_spawned: u64,
    pub orders_delivered: u64,
    pub orders_expired: u64,
    /// Still in flight when the run ended.
    pub orders_open: u64,
    pub aggregation_index: f64,
    pub heatmap_downsample: u32,
    pub emotion_filter: EmotionFilter,
    pub emotion_histogram: EmotionHistogram,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> MetricsError + '_ {
    move |source| MetricsError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Loads `events.jsonl`, naming the file and line of the first bad record.
pub fn read_events(path: &Path) -> Result<Vec<EventRecord>, MetricsError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let corrupt = |reason: String| MetricsError::Corrupt {
            path: path.display().to_string(),
            line: i + 1,
            reason,
        };
        let rec: EventRecord = serde_json::from_str(line).map_err(|e| corrupt(e.to_string()))?;
        if rec.v != EVENT_SCHEMA_VERSION {
            return Err(corrupt(format!("event schema v{} (expected v{EVENT_SCHEMA_VERSION})", rec.v)));
        }
        if out.last().is_some_and(|prev: &EventRecord| prev.step > rec.step) {
            return Err(corrupt("events out of step order".into()));
        }
        out.push(rec);
    }
    Ok(out)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn write_csv(path: &Path, header: &[&str], rows: Vec<Vec<String>>) -> Result<(), MetricsError> {
    let out_err = |e: csv::Error| MetricsError::Output {
        path: path.display().to_string(),
        reason: e.to_string(),
    };
    let mut w = csv::Writer::from_path(path).map_err(out_err)?;
    w.write_record(header).map_err(out_err)?;
    for r in rows {
        w.write_record(&r).map_err(out_err)?;
    }
    w.flush().map_err(io_err(path))
}

#[derive(Deserialize)]
struct ManifestView {
    run_id: String,
    steps_completed: Option<u32>,
}

/// Reads a run directory and writes the five report files into it.
///
/// Needs `config.toml` and `events.jsonl`; `manifest.json` is optional and
/// supplies the run id and, for interrupted runs, the number of steps run.
pub fn write_report(run_dir: &Path, opts: &ReportOptions) -> Result<ReportSummary, MetricsError> {
    if !run_dir.is_dir() {
        return Err(MetricsError::Input {
            path: run_dir.display().to_string(),
            reason: "not a run directory".into(),
        });
    }
    let cfg_path = run_dir.join("config.toml");
    let cfg_text = fs::read_to_string(&cfg_path).map_err(io_err(&cfg_path))?;
    let cfg = SimConfig::from_toml_str(&cfg_text).map_err(|e| MetricsError::Input {
        path: cfg_path.display().to_string(),
        reason: e.to_string(),
    })?;
    let events = read_events(&run_dir.join("events.jsonl"))?;

    let manifest_path = run_dir.join("manifest.json");
    let manifest: Option<ManifestView> = match fs::read_to_string(&manifest_path) {
        Ok(text) => Some(serde_json::from_str(&text).map_err(|e| MetricsError::Input {
            path: manifest_path.display().to_string(),
            reason: e.to_string(),
        })?),
        Err(_) => None,
    };
    let run_id = manifest.as_ref().map_or_else(
        || run_dir.file_name().map_or_else(String::new, |n| n.to_string_lossy().into_owned()),
        |m| m.run_id.clone(),
    );
    let steps = manifest
        .as_ref()
        .and_then(|m| m.steps_completed)
        .unwrap_or(cfg.total_steps);

    let frames = frames_from_events(&events, cfg.n_riders, steps);
    let rates = rejection_rate(&events, opts.include_incidents);
    let hist = emotion_distribution(&events, opts.filter);
    let heat = trajectory_heatmap(&events, cfg.map_width, cfg.map_height, opts.downsample);

    write_csv(
        &run_dir.join("involution.csv"),
        &["step", "income_mean", "income_std", "involution"],
        frames
            .iter()
            .map(|f| {
                vec![
                    f.step.to_string(),
                    f.income_mean.to_string(),
                    f.income_std.to_string(),
                    fmt_opt(f.involution),
                ]
            })
            .collect(),
    )?;

    let mut rows = vec![vec![
        "global".to_string(),
        String::new(),
        rates.global.accepts.to_string(),
        rates.global.rejects.to_string(),
        fmt_opt(rates.global.rate()),
    ]];
    for (rider, t) in &rates.per_rider {
        rows.push(vec![
            "rider".into(),
            rider.to_string(),
            t.accepts.to_string(),
            t.rejects.to_string(),
            fmt_opt(t.rate()),
        ]);
    }
    write_csv(
        &run_dir.join("rejection.csv"),
        &["scope", "rider", "accepts", "rejects", "rate"],
        rows,
    )?;

    write_csv(
        &run_dir.join("emotions.csv"),
        &["filter", "emotion", "count"],
        hist.iter()
            .map(|(e, c)| vec![opts.filter.as_str().to_string(), e.to_string(), c.to_string()])
            .collect(),
    )?;

    let heat_path = run_dir.join("heatmap.csv");
    fs::write(&heat_path, heat.to_csv()).map_err(io_err(&heat_path))?;

    let mut spawned = 0;
    let mut delivered = 0;
    let mut expired = 0;
    for e in &events {
        match e.event {
            Event::OrderSpawned { .. } => spawned += 1,
            Event::OrderDelivered { .. } => delivered += 1,
            Event::OrderExpired { .. } => expired += 1,
            _ => {}
        }
    }
    let last = frames.last();
    let summary = ReportSummary {
        run_id,
        config_sha256: sha256_hex(cfg_text.as_bytes()),
        seed: cfg.rng_seed,
        framework_variant: cfg.framework_variant,
        riders: cfg.n_riders,
        steps,
        final_income_mean: last.map_or(0.0, |f| f.income_mean),
        final_involution: last.and_then(|f| f.involution),
        rejection_rate: rates.global.rate(),
        accepts: rates.global.accepts,
        rejects: rates.global.rejects,
        incidents: frames.iter().map(|f| f.incidents).sum(),
        incidents_included: opts.include_incidents,
        orders_spawned: spawned,
        orders_delivered: delivered,
        orders_expired: expired,
        orders_open: spawned - delivered - expired,
        aggregation_index: aggregation_index(&heat),
        heatmap_downsample: heat.downsample,
        emotion_filter: opts.filter,
        emotion_histogram: hist,
    };
    let summary_path = run_dir.join("summary.json");
    let mut text = serde_json::to_string_pretty(&summary).expect("summary serializes");
    text.push('\n');
    fs::write(&summary_path, text).map_err(io_err(&summary_path))?;
    Ok(summary)
}
