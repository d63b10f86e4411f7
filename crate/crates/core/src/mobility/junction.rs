//! Synthetic signalized four-arm junction.
//!
//! Arms point east, north, west and south from the origin. Each arm carries
//! one inbound and one outbound lane (right-hand traffic); turns through the
//! junction box follow quadratic Bézier curves. Vehicles keep a gap to the
//! vehicle ahead on their lane and brake to a stop at the stop line on red.
//! Acceleration is piecewise constant: cruise, brake, or accelerate back to
//! the vehicle's desired speed. A building block sits on every corner.

use std::f64::consts::FRAC_PI_2;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::geometry::{BuildingMap, Footprint, Polygon, Route, Vec2};

use super::{Role, TraceFrame, VehicleId, VehicleInfo, VehicleState};

const ARM_LABELS: [&str; 4] = ["E", "N", "W", "S"];
const TURN_SEGMENTS: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Movement {
    Straight,
    Left,
    Right,
}

impl Movement {
    fn destination(self, src: usize) -> usize {
        match self {
            Movement::Straight => (src + 2) % 4,
            Movement::Right => (src + 1) % 4,
            Movement::Left => (src + 3) % 4,
        }
    }
}

/// Junction layout, traffic mix and signal timing.
///
/// Geometry defaults (200 m arms, 20 m junction box, 3.5 m lanes, corner
/// blocks starting 12 m from the road axes) are assumptions; the traffic
/// counts default to 26 transmitters and 21 receivers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JunctionConfig {
    pub n_tx: usize,
    pub n_rx: usize,
    pub arm_length: f64,
    pub box_half: f64,
    pub lane_width: f64,
    /// Distance from the road axes to the near corner of each building block.
    pub building_offset: f64,
    pub building_size: f64,
    /// Full signal cycle in seconds; east-west is green for the first half.
    pub signal_period: Option<f64>,
    pub min_speed: f64,
    pub max_speed: f64,
    pub accel: f64,
    pub decel: f64,
    pub min_gap: f64,
    pub duration: f64,
    pub slot: f64,
    pub quality_levels: usize,
    pub movements: Vec<Movement>,
    /// Replace vehicles that leave the map with fresh ones.
    pub respawn: bool,
}

impl Default for JunctionConfig {
    fn default() -> Self {
        JunctionConfig {
            n_tx: 26,
            n_rx: 21,
            arm_length: 200.0,
            box_half: 10.0,
            lane_width: 3.5,
            building_offset: 12.0,
            building_size: 60.0,
            signal_period: Some(20.0),
            min_speed: 8.0,
            max_speed: 14.0,
            accel: 2.0,
            decel: 3.0,
            min_gap: 2.0,
            duration: 30.0,
            slot: 2e-3,
            quality_levels: 4,
            movements: vec![Movement::Straight, Movement::Straight, Movement::Left, Movement::Right],
            respawn: true,
        }
    }
}

impl JunctionConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(SimError::Config(m.to_string()));
        if !(self.arm_length > self.box_half && self.box_half > self.lane_width && self.lane_width > 0.0) {
            return bad("need arm_length > box_half > lane_width > 0");
        }
        if !(self.building_offset >= self.lane_width && self.building_size > 0.0) {
            return bad("buildings must stay off the road");
        }
        if !(self.min_speed > 0.0 && self.max_speed >= self.min_speed) {
            return bad("need 0 < min_speed <= max_speed");
        }
        if !(self.accel > 0.0 && self.decel > 0.0 && self.min_gap >= 0.0) {
            return bad("need accel > 0, decel > 0, min_gap >= 0");
        }
        if !(self.duration >= 0.0 && self.slot > 0.0) {
            return bad("need duration >= 0 and slot > 0");
        }
        if self.quality_levels == 0 || self.movements.is_empty() {
            return bad("need at least one quality level and one movement");
        }
        if matches!(self.signal_period, Some(p) if !(p > 0.0)) {
            return bad("signal period must be > 0");
        }
        // every vehicle needs room on one of the eight lanes
        let per_vehicle = VEHICLE_TYPES.iter().map(|t| t.1).fold(f64::INFINITY, f64::min) + self.min_gap;
        let room = 8.0 * (self.arm_length - self.box_half);
        if (self.n_tx + self.n_rx) as f64 * per_vehicle > room {
            return Err(SimError::Config(format!(
                "infeasible spawn density: {} vehicles on {room} m of lanes",
                self.n_tx + self.n_rx
            )));
        }
        Ok(())
    }

    fn inbound_len(&self) -> f64 {
        self.arm_length - self.box_half
    }

    pub fn buildings(&self) -> BuildingMap {
        let (g, s) = (self.building_offset, self.building_size);
        let polys = [(1.0, 1.0), (-1.0, 1.0), (-1.0, -1.0), (1.0, -1.0)]
            .iter()
            .map(|&(sx, sy): &(f64, f64)| {
                let (x0, x1) = (sx * g, sx * (g + s));
                let (y0, y1) = (sy * g, sy * (g + s));
                Polygon::rect(x0.min(x1), y0.min(y1), x0.max(x1), y0.max(y1)).expect("valid rectangle")
            })
            .collect();
        BuildingMap::new(polys)
    }

    /// Full route from the far end of `src` through the junction to the far
    /// end of `dst`, plus the arc positions where the turn starts and ends.
    pub fn route(&self, src: usize, dst: usize) -> (Route, f64, f64) {
        let half = 0.5 * self.lane_width;
        let arm = |i: usize| Vec2::from_angle(i as f64 * FRAC_PI_2);
        let left = |i: usize| Vec2::from_angle(i as f64 * FRAC_PI_2 + FRAC_PI_2);
        let (us, ns) = (arm(src), left(src));
        let (ud, nd) = (arm(dst), left(dst));
        let far_in = us * self.arm_length + ns * half;
        let stop = us * self.box_half + ns * half;
        let exit = ud * self.box_half - nd * half;
        let far_out = ud * self.arm_length - nd * half;

        let dir_in = -us;
        let denom = dir_in.cross(ud);
        let ctrl = if denom.abs() < 1e-9 {
            stop.lerp(exit, 0.5)
        } else {
            stop + dir_in * ((exit - stop).cross(ud) / denom)
        };
        let mut pts = vec![far_in, stop];
        for i in 1..TURN_SEGMENTS {
            let t = i as f64 / TURN_SEGMENTS as f64;
            let a = stop.lerp(ctrl, t);
            let b = ctrl.lerp(exit, t);
            pts.push(a.lerp(b, t));
        }
        pts.push(exit);
        pts.push(far_out);
        let route = Route::new(pts);
        let arcs = route.arc_lengths();
        let turn_start = arcs[1];
        let turn_end = arcs[arcs.len() - 2];
        (route, turn_start, turn_end)
    }

    fn green(&self, arm: usize, t: f64) -> bool {
        match self.signal_period {
            None => true,
            Some(p) => {
                let ew_green = (t % p) < 0.5 * p;
                (arm % 2 == 0) == ew_green
            }
        }
    }
}

/// (length, width, probability) for car, truck and bus.
const VEHICLE_TYPES: [(&str, f64, f64, f64); 3] = [
    ("car", 4.5, 1.8, 0.7),
    ("truck", 8.5, 2.5, 0.2),
    ("bus", 12.0, 2.55, 0.1),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Lane {
    In(usize),
    Box,
    Out(usize),
}

#[derive(Debug, Clone)]
struct Agent {
    info: Arc<VehicleInfo>,
    src: usize,
    dst: usize,
    turn_start: f64,
    turn_end: f64,
    s: f64,
    v: f64,
    v0: f64,
}

impl Agent {
    fn lane(&self) -> (Lane, f64) {
        if self.s < self.turn_start {
            (Lane::In(self.src), self.s)
        } else if self.s < self.turn_end {
            (Lane::Box, self.s - self.turn_start)
        } else {
            (Lane::Out(self.dst), self.s - self.turn_end)
        }
    }

    fn state(&self) -> VehicleState {
        let route = &self.info.route;
        VehicleState {
            footprint: Footprint::new(route.point_at(self.s), route.heading_at(self.s), self.info.length, self.info.width),
            speed: self.v,
            info: self.info.clone(),
        }
    }
}

#[derive(Debug)]
struct Seat {
    role: Role,
    index: usize,
    generation: usize,
    agent: Option<Agent>,
    pending: Option<Pending>,
}

#[derive(Debug, Clone, Copy)]
struct Pending {
    at: f64,
    src: usize,
    movement: Movement,
    kind: usize,
    quality: usize,
    v0: f64,
}

struct Generator<'a> {
    cfg: &'a JunctionConfig,
    rng: ChaCha8Rng,
}

impl Generator<'_> {
    fn pick_kind(&mut self) -> usize {
        let u: f64 = self.rng.random();
        let mut acc = 0.0;
        for (i, t) in VEHICLE_TYPES.iter().enumerate() {
            acc += t.3;
            if u < acc {
                return i;
            }
        }
        VEHICLE_TYPES.len() - 1
    }

    fn draw(&mut self, at: f64) -> Pending {
        let src = self.rng.random_range(0..4);
        let movement = self.cfg.movements[self.rng.random_range(0..self.cfg.movements.len())];
        let kind = self.pick_kind();
        let quality = self.rng.random_range(1..=self.cfg.quality_levels);
        let v0 = if self.cfg.max_speed > self.cfg.min_speed {
            self.rng.random_range(self.cfg.min_speed..self.cfg.max_speed)
        } else {
            self.cfg.min_speed
        };
        Pending {
            at,
            src,
            movement,
            kind,
            quality,
            v0,
        }
    }

    fn make_agent(&self, seat: &Seat, p: &Pending, s: f64) -> Agent {
        let dst = p.movement.destination(p.src);
        let (route, turn_start, turn_end) = self.cfg.route(p.src, dst);
        let (_, length, width, _) = VEHICLE_TYPES[p.kind];
        let prefix = seat.role.as_str();
        let id = if seat.generation == 0 {
            format!("{prefix}{:02}", seat.index)
        } else {
            format!("{prefix}{:02}.{}", seat.index, seat.generation)
        };
        let info = VehicleInfo {
            id: VehicleId::new(&id),
            role: seat.role,
            length,
            width,
            quality: p.quality,
            route,
            src: ARM_LABELS[p.src].to_string(),
            dst: ARM_LABELS[dst].to_string(),
        };
        Agent {
            info: Arc::new(info),
            src: p.src,
            dst,
            turn_start,
            turn_end,
            s,
            v: p.v0,
            v0: p.v0,
        }
    }
}

fn overlaps(agents: &[&Agent], cand: &Agent, gap: f64) -> bool {
    let (lane, pos) = cand.lane();
    agents.iter().any(|a| {
        let (l, p) = a.lane();
        l == lane && (p - pos).abs() < 0.5 * (a.info.length + cand.info.length) + gap
    })
}

/// Free distance ahead of each agent: gap to its leader and, on red, to the
/// stop line.
fn free_distance(cfg: &JunctionConfig, agents: &[&Agent], i: usize, t: f64) -> f64 {
    let me = agents[i];
    let (lane, pos) = me.lane();
    let front = pos + 0.5 * me.info.length;
    let mut avail = f64::INFINITY;
    for (j, other) in agents.iter().enumerate() {
        if j == i {
            continue;
        }
        let (l, p) = other.lane();
        if l == lane && p > pos {
            avail = avail.min(p - 0.5 * other.info.length - front - cfg.min_gap);
        }
    }
    if let Lane::In(arm) = lane {
        if !cfg.green(arm, t) {
            let to_line = cfg.inbound_len() - 0.5 - front;
            // too close to stop comfortably: carry on through
            let hard_stop = me.v * me.v / (4.0 * cfg.decel);
            if to_line >= 0.0 && to_line >= hard_stop {
                avail = avail.min(to_line);
            }
        }
    }
    avail
}

fn next_speed(cfg: &JunctionConfig, v: f64, v0: f64, avail: f64, dt: f64) -> f64 {
    let safe = (2.0 * cfg.decel * avail.max(0.0)).sqrt();
    let target = v0.min(safe);
    let mut nv = if target > v {
        target.min(v + cfg.accel * dt)
    } else {
        target
    };
    if avail.is_finite() {
        nv = nv.min(avail.max(0.0) / dt);
    }
    nv.max(0.0)
}

/// Generates a deterministic junction scenario for `seed`.
pub fn synth_junction(cfg: &JunctionConfig, seed: u64) -> Result<(Vec<TraceFrame>, BuildingMap)> {
    cfg.validate()?;
    let mut gen = Generator {
        cfg,
        rng: ChaCha8Rng::seed_from_u64(seed),
    };
    let mut seats: Vec<Seat> = (0..cfg.n_tx)
        .map(|i| (Role::Transmitter, i))
        .chain((0..cfg.n_rx).map(|i| (Role::Receiver, i)))
        .map(|(role, index)| Seat {
            role,
            index,
            generation: 0,
            agent: None,
            pending: None,
        })
        .collect();

    // initial placement on the straight lane sections
    for k in 0..seats.len() {
        let mut placed = None;
        for _ in 0..500 {
            let p = gen.draw(0.0);
            let probe = gen.make_agent(&seats[k], &p, 0.0);
            let len = probe.info.length;
            let total = probe.info.route.length();
            let lo = 0.5 * len;
            let hi = total - 0.5 * len - cfg.box_half;
            let s = gen.rng.random_range(lo..hi);
            if s > probe.turn_start - 0.5 * len - cfg.min_gap && s < probe.turn_end + 0.5 * len {
                continue;
            }
            let cand = Agent { s, ..probe };
            let others: Vec<&Agent> = seats.iter().filter_map(|s| s.agent.as_ref()).collect();
            if !overlaps(&others, &cand, cfg.min_gap) {
                placed = Some(cand);
                break;
            }
        }
        match placed {
            Some(a) => seats[k].agent = Some(a),
            None => {
                return Err(SimError::Config(format!(
                    "infeasible spawn density: could not place vehicle {} of {}",
                    k + 1,
                    seats.len()
                )))
            }
        }
    }
    // start no faster than is safe
    {
        let agents: Vec<&Agent> = seats.iter().filter_map(|s| s.agent.as_ref()).collect();
        let speeds: Vec<f64> = (0..agents.len())
            .map(|i| {
                let avail = free_distance(cfg, &agents, i, 0.0);
                agents[i].v0.min((2.0 * cfg.decel * avail.max(0.0)).sqrt())
            })
            .collect();
        let mut it = speeds.into_iter();
        for seat in seats.iter_mut() {
            if let Some(a) = seat.agent.as_mut() {
                a.v = it.next().unwrap();
            }
        }
    }

    let dt = cfg.slot;
    let steps = (cfg.duration / dt).round() as usize;
    let mut frames = Vec::with_capacity(steps + 1);
    for k in 0..=steps {
        let t = k as f64 * dt;
        let mut states: Vec<VehicleState> = seats.iter().filter_map(|s| s.agent.as_ref().map(Agent::state)).collect();
        states.sort_by(|a, b| a.info.id.cmp(&b.info.id));
        frames.push(TraceFrame { time: t, states });
        if k == steps {
            break;
        }

        // kinematics from the current snapshot
        let speeds: Vec<f64> = {
            let agents: Vec<&Agent> = seats.iter().filter_map(|s| s.agent.as_ref()).collect();
            (0..agents.len())
                .map(|i| next_speed(cfg, agents[i].v, agents[i].v0, free_distance(cfg, &agents, i, t), dt))
                .collect()
        };
        let mut it = speeds.into_iter();
        for seat in seats.iter_mut() {
            if let Some(a) = seat.agent.as_mut() {
                a.v = it.next().unwrap();
                a.s += a.v * dt;
            }
        }

        let t_next = t + dt;
        for idx in 0..seats.len() {
            let exited = seats[idx]
                .agent
                .as_ref()
                .is_some_and(|a| a.s >= a.info.route.length());
            if exited {
                seats[idx].agent = None;
                if cfg.respawn {
                    let wait = gen.rng.random_range(0.5..3.0);
                    let p = gen.draw(t_next + wait);
                    seats[idx].pending = Some(p);
                }
            }
            if let Some(p) = seats[idx].pending {
                if seats[idx].agent.is_none() && t_next >= p.at {
                    seats[idx].generation += 1;
                    let len = VEHICLE_TYPES[p.kind].1;
                    let cand = gen.make_agent(&seats[idx], &p, 0.5 * len);
                    let others: Vec<&Agent> = seats.iter().filter_map(|s| s.agent.as_ref()).collect();
                    if overlaps(&others, &cand, cfg.min_gap + 5.0) {
                        seats[idx].generation -= 1;
                    } else {
                        seats[idx].agent = Some(cand);
                        seats[idx].pending = None;
                    }
                }
            }
        }
    }
    Ok((frames, cfg.buildings()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_straight_vehicle_moves_at_constant_speed() {
        let cfg = JunctionConfig {
            n_tx: 1,
            n_rx: 0,
            signal_period: None,
            movements: vec![Movement::Straight],
            duration: 2.0,
            ..Default::default()
        };
        let (frames, _) = synth_junction(&cfg, 5).unwrap();
        assert_eq!(frames.len(), 1001);
        let first = &frames[0].states[0];
        let dir = Vec2::from_angle(first.heading());
        let mut prev = first.position();
        for f in frames.iter().skip(1).filter(|f| !f.states.is_empty()) {
            let s = &f.states[0];
            assert_eq!(s.id(), first.id());
            assert!((s.speed - first.speed).abs() < 1e-12);
            let step = s.position() - prev;
            assert!((step.norm() - first.speed * cfg.slot).abs() < 1e-9);
            assert!(step.cross(dir).abs() < 1e-9);
            prev = s.position();
        }
    }

    #[test]
    fn same_seed_same_frames() {
        let cfg = JunctionConfig {
            duration: 3.0,
            ..Default::default()
        };
        let (a, ba) = synth_junction(&cfg, 42).unwrap();
        let (b, bb) = synth_junction(&cfg, 42).unwrap();
        assert_eq!(a, b);
        assert_eq!(ba, bb);
        let (c, _) = synth_junction(&cfg, 43).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn vehicles_stay_on_their_lanes() {
        let cfg = JunctionConfig::default();
        let (frames, map) = synth_junction(&cfg, 1).unwrap();
        assert_eq!(frames.len(), 15001);
        assert_eq!(map.polygons.len(), 4);
        let mut ids = std::collections::BTreeSet::new();
        for f in &frames {
            assert!(f.states.len() <= cfg.n_tx + cfg.n_rx);
            for s in &f.states {
                // independent check against the raw lane polyline
                assert!(s.info.route.distance_to(s.position()) <= 0.1);
                assert!(!map.contains(s.position()));
                ids.insert(s.id().clone());
            }
        }
        assert!(ids.len() > cfg.n_tx + cfg.n_rx, "respawns expected over 30 s");
    }

    #[test]
    fn red_light_stops_traffic() {
        let cfg = JunctionConfig::default();
        let (frames, _) = synth_junction(&cfg, 3).unwrap();
        let stopped = frames.iter().flat_map(|f| &f.states).filter(|s| s.speed < 1e-6).count();
        assert!(stopped > 0);
    }

    #[test]
    fn crowded_config_rejected() {
        let cfg = JunctionConfig {
            n_tx: 400,
            n_rx: 400,
            ..Default::default()
        };
        assert!(matches!(synth_junction(&cfg, 1), Err(SimError::Config(_))));
    }

    #[test]
    fn turn_routes_connect_lanes() {
        let cfg = JunctionConfig::default();
        for src in 0..4 {
            for m in [Movement::Straight, Movement::Left, Movement::Right] {
                let dst = m.destination(src);
                let (r, a, b) = cfg.route(src, dst);
                assert!(a < b && b < r.length());
                assert!((a - cfg.inbound_len()).abs() < 1e-9);
                assert!((r.length() - b - cfg.inbound_len()).abs() < 1e-9);
            }
        }
    }
}
