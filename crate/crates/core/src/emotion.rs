//! Emotional evolution: PAD updates driven by income, stamina and
//! leaderboard rank, and nearest-anchor classification into the seven
//! discrete emotions.

use thiserror::Error;

use crate::config::SimConfig;
use crate::types::{clamp_unit, EmotionLabel, PadState, ValueError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EmotionError {
    #[error("rank {rank} outside 1..={n_riders}")]
    RankOutOfRange { rank: u32, n_riders: u32 },
    #[error(transparent)]
    Value(#[from] ValueError),
}

/// Dominance levels indexed by leaderboard band, best band first.
pub const DOMINANCE_CRITERIA: [f64; 7] = [0.5, 0.3, 0.1, 0.0, -0.1, -0.3, -0.4];

/// PAD coordinates of each emotion, in [`EmotionLabel::ALL`] order.
pub const PAD_ANCHORS: [(EmotionLabel, PadState); 7] = [
    (EmotionLabel::Anger, pad(-0.51, 0.59, 0.25)),
    (EmotionLabel::Disgust, pad(-0.60, 0.35, 0.11)),
    (EmotionLabel::Fear, pad(-0.62, 0.82, -0.43)),
    (EmotionLabel::Happiness, pad(0.81, 0.51, 0.46)),
    (EmotionLabel::Neutral, pad(0.00, 0.00, 0.00)),
    (EmotionLabel::Sadness, pad(-0.63, -0.27, -0.33)),
    (EmotionLabel::Surprise, pad(0.40, 0.67, -0.13)),
];

const fn pad(pleasure: f64, arousal: f64, dominance: f64) -> PadState {
    PadState {
        pleasure,
        arousal,
        dominance,
    }
}

pub fn anchor(label: EmotionLabel) -> PadState {
    PAD_ANCHORS[label.index()].1
}

/// Inputs to one emotion update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmotionStimulus {
    pub delta_income: f64,
    /// Signed; negative when stamina was spent.
    pub delta_stamina: f64,
    /// 1-based leaderboard position.
    pub rank: u32,
    pub n_riders: u32,
}

pub fn pleasure_delta(delta_income: f64, k_pleasure: f64) -> f64 {
    k_pleasure * delta_income
}

pub fn arousal_delta(delta_stamina: f64, k_arousal: f64) -> f64 {
    k_arousal * delta_stamina
}

/// Maps a leaderboard rank onto [`DOMINANCE_CRITERIA`].
///
/// The band index is `round(rank * 7 / n) - 1` with halves rounded away from
/// zero, clamped into `0..=6` so top ranks in large fleets still land in the
/// best band.
pub fn dominance_from_rank(rank: u32, n_riders: u32) -> Result<f64, EmotionError> {
    if n_riders == 0 || rank == 0 || rank > n_riders {
        return Err(EmotionError::RankOutOfRange { rank, n_riders });
    }
    // round(p / q) for positive p, q, halves away from zero.
    let p = u64::from(rank) * 7;
    let q = u64::from(n_riders);
    let rounded = (2 * p + q) / (2 * q);
    let index = (rounded as i64 - 1).clamp(0, 6) as usize;
    Ok(DOMINANCE_CRITERIA[index])
}

/// Advances the emotional state by one evaluation.
///
/// Pleasure and arousal fade by `pad_decay` and then accumulate their deltas;
/// dominance is reassigned from the current rank.
pub fn apply_stimulus(
    state: PadState,
    stim: &EmotionStimulus,
    cfg: &SimConfig,
) -> Result<PadState, EmotionError> {
    let keep = 1.0 - cfg.pad_decay;
    Ok(PadState {
        pleasure: clamp_unit(keep * state.pleasure + pleasure_delta(stim.delta_income, cfg.k_pleasure))?,
        arousal: clamp_unit(keep * state.arousal + arousal_delta(stim.delta_stamina, cfg.k_arousal))?,
        dominance: dominance_from_rank(stim.rank, stim.n_riders)?,
    })
}

/// The emotion whose anchor is nearest in Euclidean distance; ties go to
/// the label that comes first in [`EmotionLabel::ALL`].
pub fn classify_emotion(state: &PadState) -> EmotionLabel {
    let mut best = PAD_ANCHORS[0].0;
    let mut best_dist = f64::INFINITY;
    for (label, anchor) in PAD_ANCHORS {
        let d = state.distance(&anchor);
        if d < best_dist {
            best = label;
            best_dist = d;
        }
    }
    best
}

/// The anchor table as CSV, the same bytes as the shipped `pad_anchors.csv`.
pub fn anchor_table_csv() -> String {
    let mut out = String::from("emotion,pleasure,arousal,dominance\n");
    for (label, a) in PAD_ANCHORS {
        out.push_str(&format!(
            "{},{:.2},{:.2},{:.2}\n",
            label, a.pleasure, a.arousal, a.dominance
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn cfg(decay: f64) -> SimConfig {
        SimConfig {
            pad_decay: decay,
            k_pleasure: 0.05,
            k_arousal: 0.02,
            ..SimConfig::paper_main()
        }
    }

    #[test]
    fn pleasure_examples() {
        assert_eq!(pleasure_delta(0.0, 0.3), 0.0);
        assert_abs_diff_eq!(pleasure_delta(10.0, 0.05), 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(pleasure_delta(-10.0, 0.05), -0.5, epsilon = 1e-12);
    }

    #[test]
    fn arousal_examples() {
        assert_eq!(arousal_delta(0.0, 0.7), 0.0);
        assert_abs_diff_eq!(arousal_delta(-20.0, -0.02), 0.4, epsilon = 1e-12);
        assert_abs_diff_eq!(arousal_delta(-20.0, 0.02), -0.4, epsilon = 1e-12);
    }

    #[test]
    fn dominance_examples() {
        assert_eq!(dominance_from_rank(1, 6).unwrap(), 0.5);
        assert_eq!(dominance_from_rank(6, 6).unwrap(), -0.4);
        assert_eq!(dominance_from_rank(1, 100).unwrap(), 0.5);
        assert!(dominance_from_rank(0, 6).is_err());
        assert!(dominance_from_rank(7, 6).is_err());
        assert!(dominance_from_rank(1, 0).is_err());
    }

    #[test]
    fn dominance_rounds_halves_away_from_zero() {
        // 1 * 7 / 14 = 0.5 -> 1 -> index 0; 3 * 7 / 14 = 1.5 -> 2 -> index 1.
        assert_eq!(dominance_from_rank(1, 14).unwrap(), 0.5);
        assert_eq!(dominance_from_rank(3, 14).unwrap(), 0.3);
        // 5 * 7 / 14 = 2.5 -> 3 -> index 2.
        assert_eq!(dominance_from_rank(5, 14).unwrap(), 0.1);
    }

    #[test]
    fn dominance_sweep_is_monotone_and_in_codomain() {
        for n in 1..=200u32 {
            let mut prev = f64::INFINITY;
            for rank in 1..=n {
                let d = dominance_from_rank(rank, n).unwrap();
                assert!(DOMINANCE_CRITERIA.contains(&d));
                assert!(d <= prev, "rank {rank} of {n}");
                prev = d;
            }
        }
    }

    #[test]
    fn stimulus_fixed_point_at_neutral() {
        let stim = EmotionStimulus {
            delta_income: 0.0,
            delta_stamina: 0.0,
            rank: 4,
            n_riders: 7,
        };
        let out = apply_stimulus(PadState::NEUTRAL, &stim, &cfg(0.1)).unwrap();
        assert_eq!(out, PadState::NEUTRAL);
    }

    #[test]
    fn stimulus_componentwise() {
        let stim = EmotionStimulus {
            delta_income: 20.0,
            delta_stamina: 0.0,
            rank: 1,
            n_riders: 6,
        };
        let out = apply_stimulus(PadState::new(0.5, 0.0, 0.0).unwrap(), &stim, &cfg(0.0)).unwrap();
        assert_eq!(out, PadState::new(1.0, 0.0, 0.5).unwrap());

        let stim = EmotionStimulus {
            delta_income: -10.0,
            delta_stamina: 0.0,
            rank: 1,
            n_riders: 6,
        };
        let out = apply_stimulus(PadState::new(-0.9, 0.0, 0.0).unwrap(), &stim, &cfg(0.0)).unwrap();
        assert_eq!(out.pleasure, -1.0);
    }

    #[test]
    fn zero_stimulus_decays_geometrically() {
        let stim = EmotionStimulus {
            delta_income: 0.0,
            delta_stamina: 0.0,
            rank: 1,
            n_riders: 1,
        };
        let c = cfg(0.2);
        let mut s = PadState::new(0.9, -0.7, 0.0).unwrap();
        for i in 1..=60 {
            s = apply_stimulus(s, &stim, &c).unwrap();
            let expected = 0.8f64.powi(i);
            assert_abs_diff_eq!(s.pleasure, 0.9 * expected, epsilon = 1e-12);
            assert_abs_diff_eq!(s.arousal, -0.7 * expected, epsilon = 1e-12);
        }
        assert!(s.pleasure.abs() < 1e-5);
    }

    #[test]
    fn classification_examples_and_round_trip() {
        assert_eq!(classify_emotion(&PadState::NEUTRAL), EmotionLabel::Neutral);
        assert_eq!(classify_emotion(&pad(0.81, 0.51, 0.46)), EmotionLabel::Happiness);
        assert_eq!(classify_emotion(&pad(0.40, 0.67, -0.13)), EmotionLabel::Surprise);
        for label in EmotionLabel::ALL {
            assert_eq!(classify_emotion(&anchor(label)), label);
        }
    }

    #[test]
    fn anchor_table_matches_label_order() {
        for (i, (label, _)) in PAD_ANCHORS.iter().enumerate() {
            assert_eq!(label.index(), i);
        }
    }

    #[test]
    fn shipped_csv_matches_constants() {
        let shipped = include_str!("../data/pad_anchors.csv");
        assert_eq!(shipped, anchor_table_csv());
    }

    proptest! {
        #[test]
        fn stimulus_output_is_always_in_range(
            p in -1.0f64..=1.0, a in -1.0f64..=1.0, d in -1.0f64..=1.0,
            income in -1e4f64..1e4, stamina in -100.0f64..100.0,
            decay in 0.0f64..=1.0, n in 1u32..300, r in 0u32..300,
        ) {
            let rank = 1 + r % n;
            let c = SimConfig { pad_decay: decay, ..SimConfig::paper_main() };
            let stim = EmotionStimulus { delta_income: income, delta_stamina: stamina, rank, n_riders: n };
            let out = apply_stimulus(PadState { pleasure: p, arousal: a, dominance: d }, &stim, &c).unwrap();
            prop_assert!(out.is_in_range());
        }
    }
}
