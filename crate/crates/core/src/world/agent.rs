use serde::{Deserialize, Serialize};

use super::WorldError;
use crate::cognition::{AgentSnapshot, MemoryStore};
use crate::config::SimConfig;
use crate::geometry::{manhattan_distance, step_along_l_path, GridPos};
use crate::types::{DiligenceLevel, EmotionLabel, PadState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    ToWork,
    Waiting,
    Wandering,
    PickingUp,
    Delivering,
    ReturningHome,
    Resting,
}

impl Phase {
    /// Phases in which the platform may offer an order.
    pub fn is_available(self) -> bool {
        matches!(
            self,
            Phase::Waiting | Phase::Wandering | Phase::PickingUp | Phase::Delivering
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiderAgent {
    pub id: u32,
    pub position: GridPos,
    pub birth_point: GridPos,
    pub workplace: GridPos,
    pub wander_target: Option<GridPos>,
    pub speed: f64,
    pub stamina: f64,
    pub income: f64,
    pub diligence: DiligenceLevel,
    /// Order ids in the order they were accepted.
    pub held: Vec<u64>,
    pub phase: Phase,
    pub pad: PadState,
    pub emotion: EmotionLabel,
    pub memory: MemoryStore,
}

impl RiderAgent {
    pub fn new(id: u32, birth_point: GridPos, workplace: GridPos, cfg: &SimConfig) -> Self {
        Self {
            id,
            position: birth_point,
            birth_point,
            workplace,
            wander_target: None,
            speed: cfg.initial_speed,
            stamina: 100.0,
            income: 0.0,
            diligence: cfg.diligence_of(id),
            held: Vec::new(),
            phase: Phase::ToWork,
            pad: PadState::NEUTRAL,
            emotion: EmotionLabel::Neutral,
            memory: MemoryStore::new(),
        }
    }

    pub fn has_capacity(&self, cfg: &SimConfig) -> bool {
        (self.held.len() as u32) < cfg.max_held_orders
    }

    pub fn snapshot(&self, rank: u32, cfg: &SimConfig) -> AgentSnapshot {
        AgentSnapshot {
            rider_id: self.id,
            stamina: self.stamina,
            income: self.income,
            held: self.held.len() as u32,
            max_held: cfg.max_held_orders,
            emotion: Some(self.emotion),
            pad: Some(self.pad),
            diligence: self.diligence,
            rank,
            n_riders: cfg.n_riders,
        }
    }
}

/// Cells the rider may cover this step at its current speed.
pub fn travel_budget(rider: &RiderAgent, cfg: &SimConfig) -> u32 {
    let ratio = rider.speed / cfg.initial_speed;
    let cells = (f64::from(cfg.move_units_per_step) * ratio + 1e-9).floor();
    (cells.max(0.0) as u32).min(cfg.move_units_per_step)
}

/// Deducts the stamina cost of moving `cells` at the rider's current speed.
pub fn spend_stamina(rider: &mut RiderAgent, cells: u32, cfg: &SimConfig) {
    if cells == 0 {
        return;
    }
    let cost = cfg.stamina_per_cell
        * f64::from(cells)
        * (1.0 + cfg.stamina_speed_factor * rider.speed / cfg.initial_speed);
    rider.stamina = (rider.stamina - cost).max(0.0);
}

/// Moves one leg towards `target` within this step's budget and pays the
/// stamina. Returns the cells covered.
pub fn move_rider(rider: &mut RiderAgent, target: GridPos, cfg: &SimConfig) -> u32 {
    debug_assert!(target.in_bounds(cfg.map_width, cfg.map_height));
    let (pos, cells) = step_along_l_path(rider.position, target, travel_budget(rider, cfg));
    rider.position = pos;
    spend_stamina(rider, cells, cfg);
    cells
}

pub fn update_speed(rider: &mut RiderAgent, cfg: &SimConfig) {
    rider.speed = cfg.initial_speed * (cfg.speed_floor + (1.0 - cfg.speed_floor) * rider.stamina / 100.0);
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OrderState {
    Pending,
    Assigned,
    Accepted,
    PickedUp,
    Delivered,
    Rejected,
    Expired,
}

impl OrderState {
    pub fn is_terminal(self) -> bool {
        matches!(self, OrderState::Delivered | OrderState::Expired)
    }

    fn may_become(self, next: OrderState) -> bool {
        use OrderState::*;
        matches!(
            (self, next),
            (Pending, Assigned)
                | (Pending, Expired)
                | (Assigned, Accepted)
                | (Assigned, Rejected)
                | (Rejected, Pending)
                | (Accepted, PickedUp)
                | (PickedUp, Delivered)
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Order {
    pub id: u64,
    pub maker_pos: GridPos,
    pub booker_pos: GridPos,
    pub value: f64,
    pub created_step: u32,
    pub state: OrderState,
    pub assigned_rider: Option<u32>,
    /// Riders who already turned this order down; it is not offered to them again.
    pub rejected_by: Vec<u32>,
}

impl Order {
    pub fn transition(&mut self, next: OrderState) -> Result<(), WorldError> {
        if !self.state.may_become(next) {
            return Err(WorldError::IllegalTransition {
                order: self.id,
                from: self.state,
                to: next,
            });
        }
        self.state = next;
        Ok(())
    }

    pub fn trip_length(&self) -> u32 {
        manhattan_distance(self.maker_pos, self.booker_pos)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn rider() -> RiderAgent {
        RiderAgent::new(0, GridPos::new(0, 0), GridPos::new(150, 150), &SimConfig::default())
    }

    #[test]
    fn no_move_costs_nothing() {
        let cfg = SimConfig::default();
        let mut r = rider();
        assert_eq!(move_rider(&mut r, GridPos::new(0, 0), &cfg), 0);
        assert_eq!(r.stamina, 100.0);
    }

    #[test]
    fn full_speed_covers_thirty_cells() {
        let cfg = SimConfig::default();
        let mut r = rider();
        assert_eq!(move_rider(&mut r, GridPos::new(100, 0), &cfg), 30);
        assert_eq!(r.position, GridPos::new(30, 0));
        // 0.05 * 30 * (1 + 0.5 * 1)
        assert_abs_diff_eq!(r.stamina, 100.0 - 2.25, epsilon = 1e-12);
    }

    #[test]
    fn speed_follows_stamina() {
        let cfg = SimConfig::default();
        let mut r = rider();
        for (stamina, factor) in [(100.0, 1.0), (0.0, 0.3), (50.0, 0.65)] {
            r.stamina = stamina;
            update_speed(&mut r, &cfg);
            assert_abs_diff_eq!(r.speed, factor * cfg.initial_speed, epsilon = 1e-9);
        }
    }

    #[test]
    fn exhausted_rider_still_crawls() {
        let cfg = SimConfig::default();
        let mut r = rider();
        r.stamina = 0.0;
        update_speed(&mut r, &cfg);
        assert_eq!(move_rider(&mut r, GridPos::new(100, 0), &cfg), 9);
        assert_eq!(r.stamina, 0.0);
    }

    #[test]
    fn illegal_transitions_are_refused() {
        let mut o = Order {
            id: 1,
            maker_pos: GridPos::new(0, 0),
            booker_pos: GridPos::new(1, 1),
            value: 5.0,
            created_step: 0,
            state: OrderState::Pending,
            assigned_rider: None,
            rejected_by: Vec::new(),
        };
        assert!(o.transition(OrderState::Delivered).is_err());
        o.transition(OrderState::Assigned).unwrap();
        o.transition(OrderState::Rejected).unwrap();
        o.transition(OrderState::Pending).unwrap();
        o.transition(OrderState::Expired).unwrap();
        assert!(o.transition(OrderState::Pending).is_err());
    }
}
