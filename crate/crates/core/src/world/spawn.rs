use rand::Rng;
use rand_distr::{Distribution, Poisson};

use super::agent::{Order, OrderState};
use crate::config::SimConfig;
use crate::geometry::{manhattan_distance, GridPos};

/// Expected orders spawned at `step_of_day`.
///
/// Each peak is a Gaussian bump normalised over the day's steps, so one day
/// of rates sums to the configured daily total.
pub fn spawn_rate(step_of_day: u32, cfg: &SimConfig) -> f64 {
    let two_var = 2.0 * cfg.peak_width * cfg.peak_width;
    let bump = |s: u32, peak: u32| {
        let d = f64::from(s) - f64::from(peak);
        (-d * d / two_var).exp()
    };
    cfg.order_peaks
        .iter()
        .filter(|p| p.intensity > 0.0)
        .map(|p| {
            let norm: f64 = (0..cfg.steps_per_day).map(|s| bump(s, p.step_of_day)).sum();
            p.intensity * bump(step_of_day, p.step_of_day) / norm
        })
        .sum()
}

fn random_cell<R: Rng>(rng: &mut R, cfg: &SimConfig) -> GridPos {
    GridPos::new(rng.random_range(0..cfg.map_width), rng.random_range(0..cfg.map_height))
}

/// Draws this step's new orders. Ids start at `next_id`.
pub fn spawn_orders<R: Rng>(step: u32, cfg: &SimConfig, scale: f64, next_id: u64, rng: &mut R) -> Vec<Order> {
    let rate = spawn_rate(step % cfg.steps_per_day, cfg) * scale;
    let count = if rate > 0.0 {
        Poisson::new(rate).map_or(0, |p| p.sample(rng) as u64)
    } else {
        0
    };
    (0..count)
        .map(|i| {
            let maker_pos = random_cell(rng, cfg);
            let booker_pos = random_cell(rng, cfg);
            let jitter = if cfg.order_value_jitter > 0.0 {
                rng.random_range(-cfg.order_value_jitter..=cfg.order_value_jitter)
            } else {
                0.0
            };
            let value = (cfg.order_base_value
                + cfg.order_value_per_cell * f64::from(manhattan_distance(maker_pos, booker_pos))
                + jitter)
                .max(1.0);
            Order {
                id: next_id + i,
                maker_pos,
                booker_pos,
                value,
                created_step: step,
                state: OrderState::Pending,
                assigned_rider: None,
                rejected_by: Vec::new(),
            }
        })
        .collect()
}
