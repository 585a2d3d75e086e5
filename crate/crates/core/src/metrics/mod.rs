//! Involution, rejection rates, emotion distributions and trajectory
//! heatmaps, computed either while a run streams or afterwards from its
//! event log.
//!
//! Involution is mean income over the population standard deviation of
//! income. It is undefined (`None`) when every rider earns the same.

mod report;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::types::EmotionLabel;
use crate::world::{Event, EventRecord, TickOutput, World};

pub use report::{read_events, write_report, ReportOptions, ReportSummary, REPORT_FILES};

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("involution needs at least 2 riders, got {0}")]
    TooFewRiders(usize),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {reason}")]
    Corrupt {
        path: String,
        line: usize,
        reason: String,
    },
    #[error("{path}: {reason}")]
    Input { path: String, reason: String },
    #[error("writing {path}: {reason}")]
    Output { path: String, reason: String },
}

/// Counts per emotion; always carries all seven labels.
pub type EmotionHistogram = BTreeMap<EmotionLabel, u64>;

pub fn empty_histogram() -> EmotionHistogram {
    EmotionLabel::ALL.iter().map(|&e| (e, 0)).collect()
}

/// Population mean and standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

fn ratio(mean: f64, std: f64) -> Option<f64> {
    // Equal incomes can leave a rounding-level spread; treat it as zero.
    if std <= 4.0 * f64::EPSILON * mean.abs() || std == 0.0 {
        None
    } else {
        Some(mean / std)
    }
}

pub fn involution(incomes: &[f64]) -> Result<Option<f64>, MetricsError> {
    if incomes.len() < 2 {
        return Err(MetricsError::TooFewRiders(incomes.len()));
    }
    let (mean, std) = mean_std(incomes);
    Ok(ratio(mean, std))
}

/// Metrics for one completed tick.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsFrame {
    pub step: u32,
    pub income_mean: f64,
    pub income_std: f64,
    pub involution: Option<f64>,
    /// Accepted offers this tick.
    pub accepts: u64,
    /// Genuine rejections this tick.
    pub rejects: u64,
    /// Fallback rejections this tick.
    pub incidents: u64,
    /// Riders' emotions at the end of the tick.
    pub emotion_histogram: EmotionHistogram,
}

fn decision_counts(events: &[EventRecord]) -> (u64, u64, u64) {
    let (mut a, mut r, mut i) = (0, 0, 0);
    for e in events {
        match e.event {
            Event::OrderAccepted { .. } => a += 1,
            Event::OrderRejected { incident: true, .. } => i += 1,
            Event::OrderRejected { incident: false, .. } => r += 1,
            _ => {}
        }
    }
    (a, r, i)
}

fn frame(step: u32, incomes: &[f64], emotions: impl Iterator<Item = EmotionLabel>, counts: (u64, u64, u64)) -> MetricsFrame {
    let (income_mean, income_std) = mean_std(incomes);
    let mut emotion_histogram = empty_histogram();
    for e in emotions {
        *emotion_histogram.entry(e).or_default() += 1;
    }
    MetricsFrame {
        step,
        income_mean,
        income_std,
        involution: if incomes.len() >= 2 { ratio(income_mean, income_std) } else { None },
        accepts: counts.0,
        rejects: counts.1,
        incidents: counts.2,
        emotion_histogram,
    }
}

/// Builds the frame for a tick from the live world state.
pub fn observe(world: &World, out: &TickOutput) -> MetricsFrame {
    let incomes: Vec<f64> = world.riders().iter().map(|r| r.income).collect();
    frame(
        out.step,
        &incomes,
        world.riders().iter().map(|r| r.emotion),
        decision_counts(&out.events),
    )
}

/// Recomputes every tick's frame from an event log alone.
pub fn frames_from_events(events: &[EventRecord], n_riders: u32, steps: u32) -> Vec<MetricsFrame> {
    let mut incomes = vec![0.0; n_riders as usize];
    let mut emotions = vec![EmotionLabel::Neutral; n_riders as usize];
    let mut frames = Vec::with_capacity(steps as usize);
    let mut i = 0;
    for step in 0..steps {
        let start = i;
        while i < events.len() && events[i].step == step {
            match events[i].event {
                Event::OrderDelivered { rider, value, .. } => incomes[rider as usize] += value,
                Event::RiderEmotion { rider, emotion, .. } => emotions[rider as usize] = emotion,
                _ => {}
            }
            i += 1;
        }
        frames.push(frame(
            step,
            &incomes,
            emotions.iter().copied(),
            decision_counts(&events[start..i]),
        ));
    }
    frames
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecisionTally {
    pub accepts: u64,
    pub rejects: u64,
}

impl DecisionTally {
    /// `None` when there were no decisions.
    pub fn rate(&self) -> Option<f64> {
        let total = self.accepts + self.rejects;
        (total > 0).then(|| self.rejects as f64 / total as f64)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RejectionRates {
    pub global: DecisionTally,
    pub per_rider: BTreeMap<u32, DecisionTally>,
}

/// Tallies accept/reject decisions. Fallback rejections are skipped unless
/// `include_incidents` is set.
pub fn rejection_rate(events: &[EventRecord], include_incidents: bool) -> RejectionRates {
    let mut out = RejectionRates::default();
    for e in events {
        let (rider, accepted) = match e.event {
            Event::OrderAccepted { rider, .. } => (rider, true),
            Event::OrderRejected { rider, incident, .. } if include_incidents || !incident => (rider, false),
            _ => continue,
        };
        let t = out.per_rider.entry(rider).or_default();
        if accepted {
            t.accepts += 1;
            out.global.accepts += 1;
        } else {
            t.rejects += 1;
            out.global.rejects += 1;
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EmotionFilter {
    AtAcceptance,
    AtRejection,
    AllTicks,
}

impl std::str::FromStr for EmotionFilter {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "at-acceptance" => Ok(EmotionFilter::AtAcceptance),
            "at-rejection" => Ok(EmotionFilter::AtRejection),
            "all-ticks" => Ok(EmotionFilter::AllTicks),
            other => Err(format!(
                "unknown filter `{other}` (expected at-acceptance, at-rejection or all-ticks)"
            )),
        }
    }
}

impl EmotionFilter {
    pub fn as_str(self) -> &'static str {
        match self {
            EmotionFilter::AtAcceptance => "at-acceptance",
            EmotionFilter::AtRejection => "at-rejection",
            EmotionFilter::AllTicks => "all-ticks",
        }
    }
}

/// Histogram of rider emotions at the filtered events.
///
/// `AtRejection` counts genuine rejections only. `AllTicks` counts every
/// known rider once per step from the first to the last logged step,
/// carrying each rider's last `RiderEmotion` forward.
pub fn emotion_distribution(events: &[EventRecord], filter: EmotionFilter) -> EmotionHistogram {
    let mut hist = empty_histogram();
    match filter {
        EmotionFilter::AtAcceptance | EmotionFilter::AtRejection => {
            for e in events {
                let label = match (&e.event, filter) {
                    (Event::OrderAccepted { emotion, .. }, EmotionFilter::AtAcceptance) => *emotion,
                    (Event::OrderRejected { emotion, incident: false, .. }, EmotionFilter::AtRejection) => *emotion,
                    _ => continue,
                };
                *hist.entry(label).or_default() += 1;
            }
        }
        EmotionFilter::AllTicks => {
            let Some(last) = events.last().map(|e| e.step) else {
                return hist;
            };
            let mut current: BTreeMap<u32, EmotionLabel> = BTreeMap::new();
            let mut i = 0;
            for step in events[0].step..=last {
                while i < events.len() && events[i].step == step {
                    if let Event::RiderEmotion { rider, emotion, .. } = events[i].event {
                        current.insert(rider, emotion);
                    }
                    i += 1;
                }
                for e in current.values() {
                    *hist.entry(*e).or_default() += 1;
                }
            }
        }
    }
    hist
}

/// Visit counts over the (possibly downsampled) map, row-major by `y`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Heatmap {
    pub width: u32,
    pub height: u32,
    pub downsample: u32,
    pub counts: Vec<u64>,
}

impl Heatmap {
    pub fn new(map_width: u32, map_height: u32, downsample: u32) -> Self {
        let f = downsample.max(1);
        let width = map_width.div_ceil(f);
        let height = map_height.div_ceil(f);
        Self {
            width,
            height,
            downsample: f,
            counts: vec![0; (width * height) as usize],
        }
    }

    pub fn record(&mut self, x: u32, y: u32) {
        let (cx, cy) = (x / self.downsample, y / self.downsample);
        if cx < self.width && cy < self.height {
            self.counts[(cy * self.width + cx) as usize] += 1;
        }
    }

    pub fn get(&self, cx: u32, cy: u32) -> u64 {
        self.counts[(cy * self.width + cx) as usize]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// One CSV row per map row, no header.
    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        for row in self.counts.chunks(self.width as usize) {
            let line: Vec<String> = row.iter().map(u64::to_string).collect();
            s.push_str(&line.join(","));
            s.push('\n');
        }
        s
    }
}

/// Counts the end position of every `RiderMoved` event.
pub fn trajectory_heatmap(events: &[EventRecord], map_width: u32, map_height: u32, downsample: u32) -> Heatmap {
    let mut h = Heatmap::new(map_width, map_height, downsample);
    for e in events {
        if let Event::RiderMoved { position, .. } = e.event {
            h.record(position.x, position.y);
        }
    }
    h
}

/// Gini coefficient of the heatmap's cell counts: 0 for a uniform spread,
/// `(N-1)/N` when everything sits in one of N cells. An empty heatmap
/// scores 0.
pub fn aggregation_index(heatmap: &Heatmap) -> f64 {
    let mut xs = heatmap.counts.clone();
    let n = xs.len() as f64;
    let total: u64 = xs.iter().sum();
    if total == 0 || xs.is_empty() {
        return 0.0;
    }
    xs.sort_unstable();
    let weighted: f64 = xs
        .iter()
        .enumerate()
        .map(|(i, &x)| (2.0 * (i as f64 + 1.0) - n - 1.0) * x as f64)
        .sum();
    weighted / (n * total as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::GridPos;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn ev(step: u32, event: Event) -> EventRecord {
        EventRecord::new(step, event)
    }

    fn accepted(rider: u32, emotion: EmotionLabel) -> Event {
        Event::OrderAccepted { order: 0, rider, emotion }
    }

    fn rejected(rider: u32, incident: bool) -> Event {
        Event::OrderRejected {
            order: 0,
            rider,
            emotion: EmotionLabel::Neutral,
            incident,
        }
    }

    fn moved(x: u32, y: u32) -> Event {
        Event::RiderMoved {
            rider: 0,
            position: GridPos::new(x, y),
            cells: 1,
        }
    }

    #[test]
    fn involution_hand_value() {
        // mean 200, population std sqrt(20000/3) = 81.6497
        let v = involution(&[100.0, 200.0, 300.0]).unwrap().unwrap();
        assert_abs_diff_eq!(v, 200.0 / (20000.0f64 / 3.0).sqrt(), epsilon = 1e-12);
        assert_abs_diff_eq!(v, 2.4495, epsilon = 1e-4);
    }

    #[test]
    fn involution_undefined_and_errors() {
        assert_eq!(involution(&[50.0, 50.0, 50.0]).unwrap(), None);
        assert!(matches!(involution(&[1.0]), Err(MetricsError::TooFewRiders(1))));
    }

    proptest! {
        #[test]
        fn involution_is_scale_invariant(xs in prop::collection::vec(0.0f64..1000.0, 2..20), c in 0.001f64..1000.0) {
            let a = involution(&xs).unwrap();
            let scaled: Vec<f64> = xs.iter().map(|x| x * c).collect();
            let b = involution(&scaled).unwrap();
            match (a, b) {
                (Some(a), Some(b)) => prop_assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0)),
                (None, None) => {}
                other => prop_assert!(false, "{other:?}"),
            }
        }

        #[test]
        fn gini_ignores_cell_order(mut counts in prop::collection::vec(0u64..50, 1..60), seed in any::<u64>()) {
            let h = Heatmap { width: counts.len() as u32, height: 1, downsample: 1, counts: counts.clone() };
            let before = aggregation_index(&h);
            let k = (seed as usize) % counts.len();
            counts.rotate_left(k);
            counts.reverse();
            let after = aggregation_index(&Heatmap { counts, ..h });
            prop_assert!((before - after).abs() < 1e-12);
            prop_assert!((0.0..1.0).contains(&before));
        }
    }

    #[test]
    fn rejection_rate_cases() {
        let log = vec![
            ev(0, accepted(0, EmotionLabel::Happiness)),
            ev(0, accepted(1, EmotionLabel::Happiness)),
            ev(1, accepted(0, EmotionLabel::Happiness)),
            ev(1, rejected(1, false)),
            ev(2, rejected(1, true)),
        ];
        let r = rejection_rate(&log, false);
        assert_eq!(r.global.rate(), Some(0.25));
        assert_eq!(r.per_rider[&0].rate(), Some(0.0));
        assert_eq!(r.per_rider[&1].rate(), Some(0.5));
        assert_eq!(rejection_rate(&log, true).global.rate(), Some(0.4));
        let only_incidents = vec![ev(0, rejected(0, true))];
        assert_eq!(rejection_rate(&only_incidents, false).global.rate(), None);
    }

    #[test]
    fn emotion_distribution_counts() {
        assert!(emotion_distribution(&[], EmotionFilter::AllTicks).values().all(|&c| c == 0));
        let log = vec![
            ev(0, accepted(0, EmotionLabel::Happiness)),
            ev(1, accepted(1, EmotionLabel::Happiness)),
            ev(1, accepted(1, EmotionLabel::Neutral)),
            ev(2, rejected(1, false)),
        ];
        let h = emotion_distribution(&log, EmotionFilter::AtAcceptance);
        assert_eq!(h[&EmotionLabel::Happiness], 2);
        assert_eq!(h[&EmotionLabel::Neutral], 1);
        assert_eq!(h.values().sum::<u64>(), 3);
        assert_eq!(emotion_distribution(&log, EmotionFilter::AtRejection).values().sum::<u64>(), 1);
    }

    #[test]
    fn all_ticks_carries_forward() {
        let pad = crate::types::PadState::NEUTRAL;
        let log = vec![
            ev(0, Event::RiderEmotion { rider: 0, emotion: EmotionLabel::Neutral, pad }),
            ev(0, Event::RiderEmotion { rider: 1, emotion: EmotionLabel::Neutral, pad }),
            ev(2, Event::RiderEmotion { rider: 1, emotion: EmotionLabel::Fear, pad }),
            ev(3, Event::OrderExpired { order: 1 }),
        ];
        let h = emotion_distribution(&log, EmotionFilter::AllTicks);
        assert_eq!(h[&EmotionLabel::Neutral], 6);
        assert_eq!(h[&EmotionLabel::Fear], 2);
    }

    #[test]
    fn heatmap_conservation() {
        let log: Vec<_> = (0..10).map(|s| ev(s, moved(3, 4))).collect();
        let h = trajectory_heatmap(&log, 200, 200, 1);
        assert_eq!(h.get(3, 4), 10);
        assert_eq!(h.total(), 10);

        let spread: Vec<_> = (0..500).map(|i| ev(i, moved(i % 200, (i * 7) % 200))).collect();
        let full = trajectory_heatmap(&spread, 200, 200, 1);
        let half = trajectory_heatmap(&spread, 200, 200, 2);
        assert_eq!((half.width, half.height), (100, 100));
        assert_eq!(full.total(), half.total());
        assert_eq!(full.total(), 500);
    }

    #[test]
    fn gini_closed_forms() {
        let uniform = Heatmap { width: 4, height: 1, downsample: 1, counts: vec![5; 4] };
        assert_abs_diff_eq!(aggregation_index(&uniform), 0.0, epsilon = 1e-15);
        let mut counts = vec![0; 25];
        counts[7] = 13;
        let point = Heatmap { width: 5, height: 5, downsample: 1, counts };
        assert_abs_diff_eq!(aggregation_index(&point), 24.0 / 25.0, epsilon = 1e-12);
    }

    #[test]
    fn heatmap_csv_shape() {
        let mut h = Heatmap::new(3, 2, 1);
        h.record(2, 1);
        assert_eq!(h.to_csv(), "0,0,0\n0,0,1\n");
    }
}
