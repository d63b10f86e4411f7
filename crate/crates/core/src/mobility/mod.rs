//! Time-indexed vehicle states on the transmission-slot grid, plus the
//! past traces and planned routes used for timeliness.

mod junction;
mod trace;

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::geometry::{BuildingMap, Footprint, Route, Vec2};

pub use junction::{synth_junction, JunctionConfig, Movement};
pub use trace::{load_traces, parse_routes, parse_traces, routes_to_csv, traces_to_csv, RouteEntry};

/// Opaque vehicle identifier; cheap to clone and ordered for tie-breaking.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct VehicleId(Arc<str>);

impl VehicleId {
    pub fn new(id: &str) -> Self {
        VehicleId(Arc::from(id))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl From<&str> for VehicleId {
    fn from(s: &str) -> Self {
        VehicleId::new(s)
    }
}

impl fmt::Display for VehicleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Transmitter,
    Receiver,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::Transmitter => "tx",
            Role::Receiver => "rx",
        }
    }

    pub fn parse(s: &str) -> Option<Role> {
        match s.trim().to_ascii_lowercase().as_str() {
            "tx" | "vtx" | "transmitter" => Some(Role::Transmitter),
            "rx" | "vrx" | "receiver" => Some(Role::Receiver),
            _ => None,
        }
    }
}

/// Per-vehicle attributes that do not change while the vehicle exists.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VehicleInfo {
    pub id: VehicleId,
    pub role: Role,
    pub length: f64,
    pub width: f64,
    /// Sensing quality level, 1-based.
    pub quality: usize,
    /// Planned route; empty when unknown.
    pub route: Route,
    pub src: String,
    pub dst: String,
}

/// One vehicle at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct VehicleState {
    pub info: Arc<VehicleInfo>,
    pub footprint: Footprint,
    pub speed: f64,
}

impl VehicleState {
    pub fn id(&self) -> &VehicleId {
        &self.info.id
    }

    pub fn position(&self) -> Vec2 {
        self.footprint.center
    }

    pub fn heading(&self) -> f64 {
        self.footprint.heading
    }
}

/// Vehicles present at one time, sorted by id.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceFrame {
    pub time: f64,
    pub states: Vec<VehicleState>,
}

impl TraceFrame {
    pub fn get(&self, id: &VehicleId) -> Option<&VehicleState> {
        self.states
            .binary_search_by(|s| s.info.id.cmp(id))
            .ok()
            .map(|i| &self.states[i])
    }
}

#[derive(Debug, Clone)]
struct Track {
    first_frame: usize,
    positions: Vec<Vec2>,
}

/// Frames on a uniform slot grid together with the building map.
#[derive(Debug, Clone)]
pub struct Scenario {
    frames: Vec<TraceFrame>,
    buildings: BuildingMap,
    slot: f64,
    tracks: HashMap<VehicleId, Track>,
}

impl Scenario {
    /// Validates frame spacing against `slot` and indexes vehicle tracks.
    pub fn new(mut frames: Vec<TraceFrame>, buildings: BuildingMap, slot: f64) -> Result<Self> {
        if !(slot > 0.0) {
            return Err(SimError::Config(format!("slot must be > 0, got {slot}")));
        }
        for w in frames.windows(2) {
            let dt = w[1].time - w[0].time;
            if (dt - slot).abs() > 1e-9 {
                return Err(SimError::Config(format!(
                    "frame spacing {dt} s at t = {} s does not match slot {slot} s",
                    w[0].time
                )));
            }
        }
        let mut tracks: HashMap<VehicleId, Track> = HashMap::new();
        for (k, frame) in frames.iter_mut().enumerate() {
            frame.states.sort_by(|a, b| a.info.id.cmp(&b.info.id));
            for s in &frame.states {
                let track = tracks.entry(s.info.id.clone()).or_insert_with(|| Track {
                    first_frame: k,
                    positions: Vec::new(),
                });
                if track.first_frame + track.positions.len() != k {
                    return Err(SimError::Config(format!(
                        "vehicle `{}` reappears at t = {} s after leaving",
                        s.info.id, frame.time
                    )));
                }
                track.positions.push(s.footprint.center);
            }
        }
        Ok(Scenario {
            frames,
            buildings,
            slot,
            tracks,
        })
    }

    pub fn frames(&self) -> &[TraceFrame] {
        &self.frames
    }

    pub fn buildings(&self) -> &BuildingMap {
        &self.buildings
    }

    pub fn slot(&self) -> f64 {
        self.slot
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// Index of the frame at time `t`, if within range.
    pub fn frame_index(&self, t: f64) -> Option<usize> {
        let t0 = self.frames.first()?.time;
        let k = ((t - t0) / self.slot).round();
        if k < 0.0 || (t - t0 - k * self.slot).abs() > 1e-6 * self.slot.max(1.0) {
            return None;
        }
        let k = k as usize;
        (k < self.frames.len()).then_some(k)
    }

    fn lookup(&self, id: &VehicleId, t: f64) -> Result<(usize, &Track)> {
        let absent = || SimError::Lookup {
            id: id.to_string(),
            time: t,
        };
        let k = self.frame_index(t).ok_or_else(absent)?;
        let track = self.tracks.get(id).ok_or_else(absent)?;
        if k < track.first_frame || k >= track.first_frame + track.positions.len() {
            return Err(absent());
        }
        Ok((k, track))
    }

    /// Positions over the most recent `window` meters of travel, oldest first.
    /// Consecutive kept points are at least `resolution` apart.
    pub fn past_trace_with(&self, id: &VehicleId, t: f64, window: f64, resolution: f64) -> Result<Route> {
        let (k, track) = self.lookup(id, t)?;
        let upto = k - track.first_frame;
        let mut pts = vec![track.positions[upto]];
        let mut travelled = 0.0;
        let mut last_kept = track.positions[upto];
        let mut prev = track.positions[upto];
        for &p in track.positions[..upto].iter().rev() {
            let step = prev.distance(p);
            if travelled + step >= window {
                let f = (window - travelled) / step;
                pts.push(prev.lerp(p, f));
                travelled = window;
                break;
            }
            travelled += step;
            prev = p;
            if p.distance(last_kept) >= resolution {
                pts.push(p);
                last_kept = p;
            }
        }
        if travelled < window && *pts.last().unwrap() != prev {
            pts.push(prev);
        }
        pts.reverse();
        Ok(Route::new(pts))
    }

    /// Positions over the most recent `window` meters of travel (1 m resolution).
    pub fn past_trace(&self, id: &VehicleId, t: f64, window: f64) -> Result<Route> {
        self.past_trace_with(id, t, window, 1.0)
    }

    /// Planned route ahead of the vehicle's position at `t`, up to `horizon` meters.
    pub fn future_route(&self, id: &VehicleId, t: f64, horizon: f64) -> Result<Route> {
        let (k, _) = self.lookup(id, t)?;
        let state = self.frames[k].get(id).expect("indexed vehicle is in its frame");
        let route = &state.info.route;
        if route.is_empty() {
            return Ok(Route::default());
        }
        let here = route.project(state.position());
        Ok(route.slice(here, here + horizon))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn info(id: &str, route: Route) -> Arc<VehicleInfo> {
        Arc::new(VehicleInfo {
            id: VehicleId::new(id),
            role: Role::Transmitter,
            length: 4.5,
            width: 1.8,
            quality: 1,
            route,
            src: "W".into(),
            dst: "E".into(),
        })
    }

    /// Vehicle following `path` at 10 m/s sampled every 0.1 s.
    fn mover(path: &Route, secs: f64) -> Scenario {
        let inf = info("v", path.clone());
        let dt = 0.1;
        let n = (secs / dt).round() as usize;
        let frames = (0..=n)
            .map(|k| {
                let s = 10.0 * k as f64 * dt;
                TraceFrame {
                    time: k as f64 * dt,
                    states: vec![VehicleState {
                        info: inf.clone(),
                        footprint: Footprint::new(path.point_at(s), path.heading_at(s), 4.5, 1.8),
                        speed: 10.0,
                    }],
                }
            })
            .collect();
        Scenario::new(frames, BuildingMap::default(), dt).unwrap()
    }

    #[test]
    fn past_trace_of_new_vehicle_is_single_point() {
        let path = Route::new([Vec2::new(0.0, 0.0), Vec2::new(500.0, 0.0)]);
        let sc = mover(&path, 10.0);
        let r = sc.past_trace(&VehicleId::new("v"), 0.0, 50.0).unwrap();
        assert_eq!(r.points().len(), 1);
    }

    #[test]
    fn past_trace_straight() {
        let path = Route::new([Vec2::new(0.0, 0.0), Vec2::new(500.0, 0.0)]);
        let sc = mover(&path, 10.0);
        let r = sc.past_trace(&VehicleId::new("v"), 8.0, 50.0).unwrap();
        assert!((r.length() - 50.0).abs() < 1e-9);
        assert!(r.points()[0].distance(Vec2::new(30.0, 0.0)) < 1e-9);
        assert!(r.points().last().unwrap().distance(Vec2::new(80.0, 0.0)) < 1e-9);
    }

    #[test]
    fn past_trace_turning_keeps_window() {
        // quarter circle of radius 20 followed by a straight leg
        let mut pts: Vec<Vec2> = (0..=64)
            .map(|i| {
                let a = -std::f64::consts::FRAC_PI_2 + i as f64 / 64.0 * std::f64::consts::FRAC_PI_2;
                Vec2::new(20.0 * a.cos(), 20.0 + 20.0 * a.sin())
            })
            .collect();
        pts.push(Vec2::new(20.0, 200.0));
        let path = Route::new(pts);
        let sc = mover(&path, 6.0);
        let r = sc.past_trace(&VehicleId::new("v"), 5.0, 40.0).unwrap();
        // one slot of travel is 1 m here
        assert!((r.length() - 40.0).abs() <= 1.0, "{}", r.length());
        for p in r.points() {
            assert!(path.distance_to(*p) < 0.1);
        }
    }

    #[test]
    fn future_route_mirrors_past() {
        let path = Route::new([Vec2::new(0.0, 0.0), Vec2::new(500.0, 0.0)]);
        let sc = mover(&path, 10.0);
        let id = VehicleId::new("v");
        let r = sc.future_route(&id, 2.0, 50.0).unwrap();
        assert!((r.length() - 50.0).abs() < 1e-9);
        assert!(r.points()[0].distance(Vec2::new(20.0, 0.0)) < 1e-9);
        let tail = sc.future_route(&id, 10.0, 1000.0).unwrap();
        assert!((tail.length() - 400.0).abs() < 1e-9);
    }

    #[test]
    fn absent_vehicle_is_lookup_error() {
        let path = Route::new([Vec2::new(0.0, 0.0), Vec2::new(500.0, 0.0)]);
        let sc = mover(&path, 1.0);
        assert!(matches!(
            sc.past_trace(&VehicleId::new("ghost"), 0.5, 10.0),
            Err(SimError::Lookup { .. })
        ));
        assert!(sc.future_route(&VehicleId::new("v"), 7.0, 10.0).is_err());
    }

    #[test]
    fn mismatched_spacing_rejected() {
        let frames = vec![
            TraceFrame { time: 0.0, states: vec![] },
            TraceFrame { time: 0.003, states: vec![] },
        ];
        assert!(matches!(
            Scenario::new(frames, BuildingMap::default(), 0.002),
            Err(SimError::Config(_))
        ));
    }
}
