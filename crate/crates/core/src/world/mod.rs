//! The delivery world: map, orders, platform assignment, rider phases,
//! stamina and per-tick emotion updates.
//!
//! Every tick runs the same fixed sequence: scenario directives, order
//! expiry and spawning, leaderboard, offers and decisions, movement and
//! delivery, rest transitions, emotion updates, invariant checks.

mod agent;
mod events;
mod spawn;

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cognition::{
    decide, Answer, DecisionBackend, DecisionContext, DecisionQuestion, DecisionTrace, OrderSummary,
    RoleLibrary,
};
use crate::config::{ScenarioDirective, SimConfig, ValidConfig};
use crate::emotion::{apply_stimulus, classify_emotion, EmotionError, EmotionStimulus};
use crate::geometry::{manhattan_distance, step_along_l_path, GridPos};
use crate::seeding::{self, SimRng};

pub use agent::{move_rider, spend_stamina, travel_budget, update_speed, Order, OrderState, Phase, RiderAgent};
pub use events::{Event, EventRecord, RestState, EVENT_SCHEMA_VERSION};
pub use spawn::{spawn_orders, spawn_rate};

#[derive(Debug, Error)]
pub enum WorldError {
    #[error("step {step}: invariant violated: {detail}")]
    Invariant { step: u32, detail: String },
    #[error("order {order}: illegal transition {from:?} -> {to:?}")]
    IllegalTransition {
        order: u64,
        from: OrderState,
        to: OrderState,
    },
    #[error("run already finished after {0} steps")]
    Finished(u32),
    #[error(transparent)]
    Emotion(#[from] EmotionError),
    #[error("snapshot: {0}")]
    Snapshot(String),
}

/// Everything one tick produced.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TickOutput {
    pub step: u32,
    pub events: Vec<EventRecord>,
    pub decisions: Vec<DecisionTrace>,
}

/// Picks the rider the platform offers `order` to.
///
/// Candidates are riders in a working phase with spare capacity who have not
/// already turned the order down. The score adds a rank term (1 for the
/// leader, 0 for last place) and a negative distance-to-pickup term
/// normalised by the map's L1 diameter. Ties go to the lowest id.
pub fn assign_order(order: &Order, riders: &[RiderAgent], ranks: &[u32], cfg: &SimConfig) -> Option<u32> {
    let n = riders.len() as f64;
    let diameter = f64::from((cfg.map_width - 1) + (cfg.map_height - 1)).max(1.0);
    let mut best: Option<(u32, f64)> = None;
    for r in riders {
        if !r.phase.is_available() || !r.has_capacity(cfg) || order.rejected_by.contains(&r.id) {
            continue;
        }
        let rank = f64::from(ranks[r.id as usize]);
        let rank_term = if n > 1.0 { (n - rank) / (n - 1.0) } else { 1.0 };
        let dist = f64::from(manhattan_distance(r.position, order.maker_pos));
        let score = cfg.rank_weight * rank_term - cfg.distance_weight * dist / diameter;
        if best.is_none_or(|(_, s)| score > s) {
            best = Some((r.id, score));
        }
    }
    best.map(|(id, _)| id)
}

/// Rider ids sorted by income, highest first, ties by id.
pub fn leaderboard(riders: &[RiderAgent]) -> Vec<u32> {
    let mut ids: Vec<u32> = riders.iter().map(|r| r.id).collect();
    ids.sort_by(|&a, &b| {
        riders[b as usize]
            .income
            .total_cmp(&riders[a as usize].income)
            .then(a.cmp(&b))
    });
    ids
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct World {
    cfg: SimConfig,
    step: u32,
    riders: Vec<RiderAgent>,
    orders: BTreeMap<u64, Order>,
    pending: BTreeSet<u64>,
    next_order_id: u64,
    leaderboard: Vec<u32>,
    spawning_paused: bool,
    demand_scale: f64,
    order_rng: SimRng,
    wander_rng: SimRng,
}

impl World {
    pub fn new(cfg: ValidConfig) -> Self {
        let cfg = cfg.into_inner();
        let mut setup = seeding::stream(cfg.rng_seed, seeding::SETUP);
        let cell = |rng: &mut SimRng| {
            GridPos::new(rng.random_range(0..cfg.map_width), rng.random_range(0..cfg.map_height))
        };
        let riders: Vec<RiderAgent> = (0..cfg.n_riders)
            .map(|id| {
                let birth = cell(&mut setup);
                let work = cell(&mut setup);
                RiderAgent::new(id, birth, work, &cfg)
            })
            .collect();
        let wander_label = format!("{}/{}", seeding::WANDER, cfg.framework_variant.slug());
        Self {
            order_rng: seeding::stream(cfg.rng_seed, seeding::ORDERS),
            wander_rng: seeding::stream(cfg.rng_seed, &wander_label),
            leaderboard: leaderboard(&riders),
            riders,
            orders: BTreeMap::new(),
            pending: BTreeSet::new(),
            next_order_id: 0,
            spawning_paused: false,
            demand_scale: 1.0,
            step: 0,
            cfg,
        }
    }

    pub fn cfg(&self) -> &SimConfig {
        &self.cfg
    }

    /// The next step to run.
    pub fn step(&self) -> u32 {
        self.step
    }

    pub fn is_finished(&self) -> bool {
        self.step >= self.cfg.total_steps
    }

    pub fn riders(&self) -> &[RiderAgent] {
        &self.riders
    }

    pub fn orders(&self) -> &BTreeMap<u64, Order> {
        &self.orders
    }

    pub fn leaderboard(&self) -> &[u32] {
        &self.leaderboard
    }

    pub fn to_snapshot_json(&self) -> String {
        serde_json::to_string(self).expect("world serializes")
    }

    pub fn from_snapshot_json(text: &str) -> Result<Self, WorldError> {
        let world: World = serde_json::from_str(text).map_err(|e| WorldError::Snapshot(e.to_string()))?;
        crate::config::validate_config(world.cfg.clone()).map_err(|e| WorldError::Snapshot(e.to_string()))?;
        Ok(world)
    }

    fn ranks(&self) -> Vec<u32> {
        let mut ranks = vec![0; self.riders.len()];
        for (pos, &id) in self.leaderboard.iter().enumerate() {
            ranks[id as usize] = pos as u32 + 1;
        }
        ranks
    }

    fn order_mut(&mut self, id: u64) -> &mut Order {
        self.orders.get_mut(&id).expect("known order id")
    }

    fn pick_wander_target(&mut self, from: GridPos) -> GridPos {
        let r = i64::from(self.cfg.wander_radius);
        let coord = |c: u32, max: u32, rng: &mut SimRng| {
            let off = rng.random_range(-r..=r);
            (i64::from(c) + off).clamp(0, i64::from(max) - 1) as u32
        };
        let x = coord(from.x, self.cfg.map_width, &mut self.wander_rng);
        let y = coord(from.y, self.cfg.map_height, &mut self.wander_rng);
        GridPos::new(x, y)
    }

    /// Advances the world by one step.
    pub fn tick(
        &mut self,
        backend: &mut dyn DecisionBackend,
        library: Option<&RoleLibrary>,
    ) -> Result<TickOutput, WorldError> {
        if self.is_finished() {
            return Err(WorldError::Finished(self.step));
        }
        let now = self.step;
        let step_of_day = now % self.cfg.steps_per_day;
        let working = step_of_day < self.cfg.rest_start;
        let mut out = TickOutput {
            step: now,
            ..TickOutput::default()
        };
        let emit = |out: &mut TickOutput, e: Event| out.events.push(EventRecord::new(now, e));

        if now == 0 {
            for r in &self.riders {
                emit(&mut out, Event::RiderEmotion {
                    rider: r.id,
                    emotion: r.emotion,
                    pad: r.pad,
                });
            }
        }

        for d in self.cfg.scenario.clone() {
            if d.at_step() != now {
                continue;
            }
            match d {
                ScenarioDirective::PauseSpawning { .. } => self.spawning_paused = true,
                ScenarioDirective::ResumeSpawning { .. } => self.spawning_paused = false,
                ScenarioDirective::ScaleDemand { factor, .. } => self.demand_scale = factor,
            }
        }

        // Expire stale pending orders, then spawn.
        let expired: Vec<u64> = self
            .pending
            .iter()
            .copied()
            .filter(|id| now - self.orders[id].created_step >= self.cfg.order_expiry_steps)
            .collect();
        for id in expired {
            self.order_mut(id).transition(OrderState::Expired)?;
            self.pending.remove(&id);
            emit(&mut out, Event::OrderExpired { order: id });
        }
        // The order stream is drawn even while paused so pausing does not
        // shift later orders.
        let fresh = spawn_orders(now, &self.cfg, self.demand_scale, self.next_order_id, &mut self.order_rng);
        if !self.spawning_paused {
            for o in fresh {
                self.next_order_id = o.id + 1;
                emit(&mut out, Event::OrderSpawned {
                    order: o.id,
                    maker: o.maker_pos,
                    booker: o.booker_pos,
                    value: o.value,
                });
                self.pending.insert(o.id);
                self.orders.insert(o.id, o);
            }
        }

        self.leaderboard = leaderboard(&self.riders);
        let ranks = self.ranks();
        let income_before: Vec<f64> = self.riders.iter().map(|r| r.income).collect();
        let stamina_before: Vec<f64> = self.riders.iter().map(|r| r.stamina).collect();
        let start_pos: Vec<GridPos> = self.riders.iter().map(|r| r.position).collect();

        if working {
            let offers: Vec<u64> = self.pending.iter().copied().collect();
            for id in offers {
                let Some(rid) = assign_order(&self.orders[&id], &self.riders, &ranks, &self.cfg) else {
                    continue;
                };
                self.offer(id, rid, ranks[rid as usize], backend, library, &mut out)?;
            }
        }

        for i in 0..self.riders.len() {
            self.advance_rider(i, &mut out)?;
        }

        for i in 0..self.riders.len() {
            let r = &mut self.riders[i];
            if !working && matches!(r.phase, Phase::ToWork | Phase::Waiting | Phase::Wandering) {
                r.phase = Phase::ReturningHome;
                r.wander_target = None;
                emit(&mut out, Event::RiderRest {
                    rider: r.id,
                    state: RestState::ReturningHome,
                });
            }
            if r.phase == Phase::Resting {
                r.stamina = 100.0;
                update_speed(r, &self.cfg);
                if working {
                    r.phase = Phase::ToWork;
                    emit(&mut out, Event::RiderRest {
                        rider: r.id,
                        state: RestState::BackToWork,
                    });
                }
            }
        }

        for (i, r) in self.riders.iter_mut().enumerate() {
            let stim = EmotionStimulus {
                delta_income: r.income - income_before[i],
                delta_stamina: r.stamina - stamina_before[i],
                rank: ranks[i],
                n_riders: self.cfg.n_riders,
            };
            r.pad = apply_stimulus(r.pad, &stim, &self.cfg)?;
            let label = classify_emotion(&r.pad);
            if label != r.emotion {
                r.emotion = label;
                emit(&mut out, Event::RiderEmotion {
                    rider: r.id,
                    emotion: label,
                    pad: r.pad,
                });
            }
        }

        self.check_invariants(&start_pos)?;
        self.step += 1;
        Ok(out)
    }

    fn offer(
        &mut self,
        order_id: u64,
        rider_id: u32,
        rank: u32,
        backend: &mut dyn DecisionBackend,
        library: Option<&RoleLibrary>,
        out: &mut TickOutput,
    ) -> Result<(), WorldError> {
        let now = self.step;
        let cfg = &self.cfg;
        let order = self.orders.get_mut(&order_id).expect("pending order exists");
        order.transition(OrderState::Assigned)?;
        order.assigned_rider = Some(rider_id);
        out.events.push(EventRecord::new(now, Event::OrderAssigned {
            order: order_id,
            rider: rider_id,
        }));

        let rider = &mut self.riders[rider_id as usize];
        let summary = OrderSummary {
            order_id,
            value: order.value,
            pickup_distance: manhattan_distance(rider.position, order.maker_pos),
            delivery_distance: order.trip_length(),
            deadline_step: order.created_step + cfg.delivery_deadline_steps,
        };
        let question = DecisionQuestion::new(summary, rider.snapshot(rank, cfg), now);
        let outcome = decide(
            question,
            DecisionContext {
                variant: cfg.framework_variant,
                backend,
                library,
                memory: &mut rider.memory,
                memory_ttl: cfg.memory_ttl,
                now,
            },
        );
        if let Some(kind) = outcome.incident {
            out.events.push(EventRecord::new(now, Event::Incident {
                rider: rider_id,
                order: order_id,
                kind,
            }));
        }
        out.decisions.push(outcome.trace);

        match outcome.response.answer {
            Answer::Accept => {
                order.transition(OrderState::Accepted)?;
                rider.held.push(order_id);
                if matches!(rider.phase, Phase::Waiting | Phase::Wandering) {
                    rider.phase = Phase::PickingUp;
                    rider.wander_target = None;
                }
                self.pending.remove(&order_id);
                out.events.push(EventRecord::new(now, Event::OrderAccepted {
                    order: order_id,
                    rider: rider_id,
                    emotion: rider.emotion,
                }));
            }
            Answer::Reject => {
                order.transition(OrderState::Rejected)?;
                order.transition(OrderState::Pending)?;
                order.assigned_rider = None;
                order.rejected_by.push(rider_id);
                out.events.push(EventRecord::new(now, Event::OrderRejected {
                    order: order_id,
                    rider: rider_id,
                    emotion: rider.emotion,
                    incident: outcome.incident.is_some(),
                }));
                if rider.held.is_empty() {
                    rider.phase = Phase::Wandering;
                    let from = rider.position;
                    let target = self.pick_wander_target(from);
                    self.riders[rider_id as usize].wander_target = Some(target);
                }
            }
        }
        Ok(())
    }

    fn advance_rider(&mut self, i: usize, out: &mut TickOutput) -> Result<(), WorldError> {
        let now = self.step;
        let cfg = &self.cfg;
        let rider = &mut self.riders[i];
        let mut budget = travel_budget(rider, cfg);
        let mut cells = 0;
        let mut leg = |rider: &mut RiderAgent, target: GridPos, budget: &mut u32| {
            let (pos, moved) = step_along_l_path(rider.position, target, *budget);
            rider.position = pos;
            *budget -= moved;
            cells += moved;
            pos == target
        };

        match rider.phase {
            Phase::Waiting | Phase::Resting => {}
            Phase::ToWork => {
                if leg(rider, rider.workplace, &mut budget) {
                    rider.phase = Phase::Waiting;
                }
            }
            Phase::Wandering => match rider.wander_target {
                Some(t) => {
                    if leg(rider, t, &mut budget) {
                        rider.phase = Phase::Waiting;
                        rider.wander_target = None;
                    }
                }
                None => rider.phase = Phase::Waiting,
            },
            Phase::ReturningHome => {
                if leg(rider, rider.birth_point, &mut budget) {
                    rider.phase = Phase::Resting;
                    out.events.push(EventRecord::new(now, Event::RiderRest {
                        rider: rider.id,
                        state: RestState::Resting,
                    }));
                }
            }
            Phase::PickingUp | Phase::Delivering => {
                while let Some(&oid) = rider.held.first() {
                    let order = self.orders.get_mut(&oid).expect("held order exists");
                    match order.state {
                        OrderState::Accepted => {
                            rider.phase = Phase::PickingUp;
                            if !leg(rider, order.maker_pos, &mut budget) {
                                break;
                            }
                            order.transition(OrderState::PickedUp)?;
                            out.events.push(EventRecord::new(now, Event::OrderPickedUp {
                                order: oid,
                                rider: rider.id,
                            }));
                        }
                        OrderState::PickedUp => {
                            rider.phase = Phase::Delivering;
                            if !leg(rider, order.booker_pos, &mut budget) {
                                break;
                            }
                            order.transition(OrderState::Delivered)?;
                            rider.income += order.value;
                            rider.held.remove(0);
                            out.events.push(EventRecord::new(now, Event::OrderDelivered {
                                order: oid,
                                rider: rider.id,
                                value: order.value,
                            }));
                        }
                        other => {
                            return Err(WorldError::Invariant {
                                step: now,
                                detail: format!("rider {} holds order {oid} in state {other:?}", rider.id),
                            })
                        }
                    }
                }
                if rider.held.is_empty() {
                    rider.phase = Phase::Waiting;
                }
            }
        }

        spend_stamina(rider, cells, cfg);
        update_speed(rider, cfg);
        if cells > 0 {
            out.events.push(EventRecord::new(now, Event::RiderMoved {
                rider: rider.id,
                position: rider.position,
                cells,
            }));
        }
        Ok(())
    }

    fn check_invariants(&self, start_pos: &[GridPos]) -> Result<(), WorldError> {
        let cfg = &self.cfg;
        let fail = |detail: String| Err(WorldError::Invariant { step: self.step, detail });
        let mut holders: BTreeMap<u64, u32> = BTreeMap::new();
        for (r, &start) in self.riders.iter().zip(start_pos) {
            if r.held.len() as u32 > cfg.max_held_orders {
                return fail(format!("rider {} holds {} orders", r.id, r.held.len()));
            }
            if !(0.0..=100.0).contains(&r.stamina) {
                return fail(format!("rider {} stamina {}", r.id, r.stamina));
            }
            if !r.position.in_bounds(cfg.map_width, cfg.map_height) {
                return fail(format!("rider {} out of bounds at {:?}", r.id, r.position));
            }
            let moved = manhattan_distance(start, r.position);
            if moved > cfg.move_units_per_step {
                return fail(format!("rider {} moved {moved} cells", r.id));
            }
            if r.emotion != classify_emotion(&r.pad) || !r.pad.is_in_range() {
                return fail(format!("rider {} emotion out of sync with PAD", r.id));
            }
            for &oid in &r.held {
                if let Some(other) = holders.insert(oid, r.id) {
                    return fail(format!("order {oid} held by riders {other} and {}", r.id));
                }
                let o = &self.orders[&oid];
                if o.assigned_rider != Some(r.id) || !matches!(o.state, OrderState::Accepted | OrderState::PickedUp) {
                    return fail(format!("rider {} holds order {oid} in state {:?}", r.id, o.state));
                }
            }
        }
        let mut board = self.leaderboard.clone();
        board.sort_unstable();
        if board != (0..cfg.n_riders).collect::<Vec<_>>() {
            return fail("leaderboard is not a permutation of rider ids".into());
        }
        for &id in &self.pending {
            if self.orders[&id].state != OrderState::Pending {
                return fail(format!("order {id} listed pending but is {:?}", self.orders[&id].state));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cognition::{RuleBackend, ScriptedBackend};
    use crate::config::{validate_config, OrderPeak};
    use crate::types::FrameworkVariant;

    fn small(variant: FrameworkVariant) -> SimConfig {
        SimConfig {
            map_width: 40,
            map_height: 40,
            n_riders: 4,
            total_steps: 240,
            framework_variant: variant,
            order_peaks: vec![OrderPeak { step_of_day: 50, intensity: 40.0 }],
            ..SimConfig::default()
        }
    }

    fn world(cfg: SimConfig) -> World {
        World::new(validate_config(cfg).unwrap())
    }

    fn rider_at(id: u32, pos: GridPos, income: f64) -> RiderAgent {
        let mut r = RiderAgent::new(id, pos, pos, &SimConfig::default());
        r.phase = Phase::Waiting;
        r.income = income;
        r
    }

    fn order_at(pos: GridPos) -> Order {
        Order {
            id: 0,
            maker_pos: pos,
            booker_pos: pos,
            value: 10.0,
            created_step: 0,
            state: OrderState::Pending,
            assigned_rider: None,
            rejected_by: Vec::new(),
        }
    }

    #[test]
    fn single_candidate_gets_the_order() {
        let cfg = SimConfig::default();
        let riders = vec![rider_at(0, GridPos::new(5, 5), 0.0)];
        assert_eq!(assign_order(&order_at(GridPos::new(0, 0)), &riders, &[1], &cfg), Some(0));
    }

    #[test]
    fn better_rank_wins_at_equal_distance() {
        let cfg = SimConfig::default();
        let riders: Vec<_> = (0..5).map(|i| rider_at(i, GridPos::new(10, 10), 0.0)).collect();
        // Rider 4 leads, rider 0 is last.
        let ranks = [5, 4, 3, 2, 1];
        assert_eq!(assign_order(&order_at(GridPos::new(0, 0)), &riders, &ranks, &cfg), Some(4));
    }

    #[test]
    fn full_riders_are_skipped() {
        let cfg = SimConfig::default();
        let mut r = rider_at(0, GridPos::new(1, 1), 0.0);
        r.held = vec![1, 2, 3];
        r.phase = Phase::Delivering;
        assert_eq!(assign_order(&order_at(GridPos::new(0, 0)), &[r], &[1], &cfg), None);
    }

    #[test]
    fn leaderboard_sorts_by_income_then_id() {
        let riders = vec![
            rider_at(0, GridPos::new(0, 0), 5.0),
            rider_at(1, GridPos::new(0, 0), 9.0),
            rider_at(2, GridPos::new(0, 0), 5.0),
        ];
        assert_eq!(leaderboard(&riders), [1, 0, 2]);
    }

    #[test]
    fn idle_world_only_emits_startup_events() {
        let mut cfg = small(FrameworkVariant::Traditional);
        cfg.order_peaks.clear();
        let mut w = world(cfg);
        let mut b = RuleBackend;
        let first = w.tick(&mut b, None).unwrap();
        assert!(first.decisions.is_empty());
        assert!(first
            .events
            .iter()
            .all(|e| matches!(e.event, Event::RiderEmotion { .. } | Event::RiderMoved { .. })));
    }

    #[test]
    fn rejecting_with_empty_hands_starts_wandering() {
        let mut w = world(small(FrameworkVariant::Traditional));
        let mut b = ScriptedBackend::new(std::iter::repeat_with(|| Ok("ANSWER: Reject".to_string())).take(10_000));
        let mut saw = false;
        while !w.is_finished() && !saw {
            let out = w.tick(&mut b, None).unwrap();
            for e in &out.events {
                if let Event::OrderRejected { rider, .. } = e.event {
                    let r = &w.riders()[rider as usize];
                    assert!(r.held.is_empty());
                    assert!(matches!(r.phase, Phase::Wandering | Phase::Waiting | Phase::ReturningHome));
                    saw = true;
                }
            }
        }
        assert!(saw);
        assert!(w.riders().iter().all(|r| r.income == 0.0));
    }

    #[test]
    fn full_run_conserves_orders_and_income() {
        let mut w = world(small(FrameworkVariant::EmotionAligned));
        let mut b = RuleBackend;
        let mut events = Vec::new();
        while !w.is_finished() {
            events.extend(w.tick(&mut b, None).unwrap().events);
        }
        let mut paid = [0.0; 4];
        let mut spawned = BTreeSet::new();
        let mut closed = BTreeSet::new();
        for e in &events {
            match e.event {
                Event::OrderSpawned { order, .. } => assert!(spawned.insert(order)),
                Event::OrderDelivered { order, rider, value } => {
                    paid[rider as usize] += value;
                    assert!(closed.insert(order));
                }
                Event::OrderExpired { order } => assert!(closed.insert(order)),
                Event::OrderAccepted { .. } => {
                    assert!(e.step % 120 < 100, "accepted during rest at step {}", e.step);
                }
                _ => {}
            }
        }
        assert!(closed.is_subset(&spawned));
        assert!(!closed.is_empty());
        for o in w.orders().values() {
            assert_eq!(o.state.is_terminal(), closed.contains(&o.id));
        }
        for r in w.riders() {
            assert_eq!(r.income, paid[r.id as usize]);
        }
    }

    #[test]
    fn riders_rest_and_return() {
        let mut w = world(small(FrameworkVariant::Traditional));
        let mut b = RuleBackend;
        let mut rested = BTreeSet::new();
        let mut back = BTreeSet::new();
        while !w.is_finished() {
            for e in w.tick(&mut b, None).unwrap().events {
                if let Event::RiderRest { rider, state } = e.event {
                    match state {
                        RestState::Resting => {
                            rested.insert(rider);
                            assert_eq!(w.riders()[rider as usize].position, w.riders()[rider as usize].birth_point);
                        }
                        RestState::BackToWork => {
                            back.insert(rider);
                        }
                        RestState::ReturningHome => {}
                    }
                }
            }
        }
        assert_eq!(rested.len(), 4);
        assert_eq!(back.len(), 4);
    }

    #[test]
    fn snapshot_resume_matches_uninterrupted_run() {
        let cfg = small(FrameworkVariant::EmotionAligned);
        let mut a = world(cfg.clone());
        let mut b = RuleBackend;
        let mut straight = Vec::new();
        while !a.is_finished() {
            straight.extend(a.tick(&mut b, None).unwrap().events);
        }

        let mut w = world(cfg);
        let mut resumed = Vec::new();
        for _ in 0..130 {
            resumed.extend(w.tick(&mut b, None).unwrap().events);
        }
        let mut w = World::from_snapshot_json(&w.to_snapshot_json()).unwrap();
        while !w.is_finished() {
            resumed.extend(w.tick(&mut b, None).unwrap().events);
        }
        assert_eq!(straight, resumed);
        assert_eq!(a, w);
    }

    #[test]
    fn order_stream_is_shared_across_variants() {
        let spawned = |v| {
            let mut w = world(small(v));
            let mut b = RuleBackend;
            let mut ids = Vec::new();
            while !w.is_finished() {
                for e in w.tick(&mut b, None).unwrap().events {
                    if let Event::OrderSpawned { .. } = e.event {
                        ids.push(e);
                    }
                }
            }
            ids
        };
        let t = spawned(FrameworkVariant::Traditional);
        assert_eq!(t, spawned(FrameworkVariant::EmotionPerceived));
        assert_eq!(t, spawned(FrameworkVariant::EmotionAligned));
    }

    #[test]
    fn ticking_past_the_end_is_an_error() {
        let mut cfg = small(FrameworkVariant::Traditional);
        cfg.total_steps = 120;
        let mut w = world(cfg);
        let mut b = RuleBackend;
        for _ in 0..120 {
            w.tick(&mut b, None).unwrap();
        }
        assert!(matches!(w.tick(&mut b, None), Err(WorldError::Finished(120))));
    }
}
