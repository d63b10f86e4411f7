//! CSV trace and route ingestion.
//!
//! Trace rows: `time_s,vehicle_id,role,x_m,y_m,heading_rad,speed_mps,length_m,width_m,quality`
//! under a `#trace v1` header. Route rows: `vehicle_id,src_label,dst_label,x1,y1;x2,y2;...`
//! under `#routes v1`.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

use crate::error::{Result, SimError};
use crate::geometry::{format_polyline, parse_polyline, wrap_angle, BuildingMap, Footprint, Route, Vec2};

use super::{Role, Scenario, TraceFrame, VehicleId, VehicleInfo, VehicleState};

const TRACE_HEADER: &str = "#trace v1";
const ROUTES_HEADER: &str = "#routes v1";

#[derive(Debug, Clone, Copy, PartialEq)]
struct Sample {
    time: f64,
    pos: Vec2,
    heading: f64,
    speed: f64,
}

#[derive(Debug, Clone)]
struct RawVehicle {
    role: Role,
    length: f64,
    width: f64,
    quality: usize,
    samples: Vec<Sample>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RouteEntry {
    pub src: String,
    pub dst: String,
    pub route: Route,
}

fn data_lines<'a>(text: &'a str, header: &str, source: &str) -> Result<Vec<(usize, &'a str)>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        None => return Ok(Vec::new()),
        Some((_, h)) if h.trim() == header => {}
        Some(_) => return Err(SimError::parse(source, 1, format!("expected header `{header}`"))),
    }
    Ok(lines
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
        .collect())
}

fn num(field: &str, name: &str, source: &str, line: usize) -> Result<f64> {
    let v: f64 = field
        .trim()
        .parse()
        .map_err(|_| SimError::parse(source, line, format!("bad {name} `{field}`")))?;
    if !v.is_finite() {
        return Err(SimError::parse(source, line, format!("non-finite {name}")));
    }
    Ok(v)
}

fn parse_raw(text: &str, source: &str, quality_levels: usize) -> Result<BTreeMap<VehicleId, RawVehicle>> {
    let mut vehicles: BTreeMap<VehicleId, RawVehicle> = BTreeMap::new();
    for (line, row) in data_lines(text, TRACE_HEADER, source)? {
        let f: Vec<&str> = row.split(',').collect();
        if f.len() != 10 {
            return Err(SimError::parse(source, line, format!("expected 10 fields, got {}", f.len())));
        }
        let time = num(f[0], "time", source, line)?;
        let id = f[1].trim();
        if id.is_empty() {
            return Err(SimError::parse(source, line, "empty vehicle id"));
        }
        let role = Role::parse(f[2]).ok_or_else(|| SimError::parse(source, line, format!("bad role `{}`", f[2])))?;
        let pos = Vec2::new(num(f[3], "x", source, line)?, num(f[4], "y", source, line)?);
        let heading = num(f[5], "heading", source, line)?;
        let speed = num(f[6], "speed", source, line)?;
        let length = num(f[7], "length", source, line)?;
        let width = num(f[8], "width", source, line)?;
        let quality: usize = f[9]
            .trim()
            .parse()
            .map_err(|_| SimError::parse(source, line, format!("bad quality `{}`", f[9])))?;
        if !(length > 0.0 && width > 0.0) {
            return Err(SimError::parse(source, line, "vehicle dimensions must be > 0"));
        }
        if quality == 0 || quality > quality_levels {
            return Err(SimError::parse(
                source,
                line,
                format!("quality {quality} outside 1..={quality_levels}"),
            ));
        }
        let entry = vehicles.entry(VehicleId::new(id)).or_insert_with(|| RawVehicle {
            role,
            length,
            width,
            quality,
            samples: Vec::new(),
        });
        if entry.role != role {
            return Err(SimError::parse(source, line, format!("vehicle `{id}` changes role")));
        }
        if let Some(last) = entry.samples.last() {
            if time <= last.time {
                return Err(SimError::parse(
                    source,
                    line,
                    format!("times for `{id}` must be strictly increasing"),
                ));
            }
        }
        entry.samples.push(Sample {
            time,
            pos,
            heading,
            speed,
        });
    }
    Ok(vehicles)
}

/// Parses a route file into per-vehicle entries.
pub fn parse_routes(text: &str, source: &str) -> Result<HashMap<VehicleId, RouteEntry>> {
    let mut out = HashMap::new();
    for (line, row) in data_lines(text, ROUTES_HEADER, source)? {
        let f: Vec<&str> = row.splitn(4, ',').collect();
        if f.len() != 4 {
            return Err(SimError::parse(source, line, "expected `id,src,dst,polyline`"));
        }
        let pts = parse_polyline(f[3]).map_err(|m| SimError::parse(source, line, m))?;
        let id = VehicleId::new(f[0].trim());
        let entry = RouteEntry {
            src: f[1].trim().to_string(),
            dst: f[2].trim().to_string(),
            route: Route::new(pts),
        };
        if out.insert(id.clone(), entry).is_some() {
            return Err(SimError::parse(source, line, format!("duplicate route for `{id}`")));
        }
    }
    Ok(out)
}

fn interpolate(samples: &[Sample], t: f64) -> Sample {
    let i = samples.partition_point(|s| s.time <= t);
    if i == 0 {
        return samples[0];
    }
    let a = samples[i - 1];
    if a.time == t || i == samples.len() {
        return a;
    }
    let b = samples[i];
    let f = (t - a.time) / (b.time - a.time);
    Sample {
        time: t,
        pos: a.pos.lerp(b.pos, f),
        heading: wrap_angle(a.heading + wrap_angle(b.heading - a.heading) * f),
        speed: a.speed + (b.speed - a.speed) * f,
    }
}

/// Parses trace and route text and resamples onto the `slot` grid.
pub fn parse_traces(
    trace_text: &str,
    route_text: Option<&str>,
    slot: f64,
    quality_levels: usize,
) -> Result<Vec<TraceFrame>> {
    if !(slot > 0.0) {
        return Err(SimError::Config(format!("slot must be > 0, got {slot}")));
    }
    let raw = parse_raw(trace_text, "trace", quality_levels)?;
    let mut routes = match route_text {
        Some(t) => parse_routes(t, "routes")?,
        None => HashMap::new(),
    };
    if let Some(unknown) = routes.keys().filter(|id| !raw.contains_key(*id)).min() {
        return Err(SimError::Reference(format!("route file names unknown vehicle `{unknown}`")));
    }
    if raw.is_empty() {
        return Ok(Vec::new());
    }

    let t0 = raw.values().map(|v| v.samples[0].time).fold(f64::INFINITY, f64::min);
    let t1 = raw
        .values()
        .map(|v| v.samples.last().unwrap().time)
        .fold(f64::NEG_INFINITY, f64::max);
    let n = ((t1 - t0) / slot + 1e-9).floor() as usize + 1;
    let tol = 1e-9 * slot.max(1.0);

    let infos: Vec<(Arc<VehicleInfo>, &RawVehicle)> = raw
        .iter()
        .map(|(id, v)| {
            let entry = routes.remove(id);
            let info = VehicleInfo {
                id: id.clone(),
                role: v.role,
                length: v.length,
                width: v.width,
                quality: v.quality,
                route: entry.as_ref().map(|e| e.route.clone()).unwrap_or_default(),
                src: entry.as_ref().map(|e| e.src.clone()).unwrap_or_default(),
                dst: entry.map(|e| e.dst).unwrap_or_default(),
            };
            (Arc::new(info), v)
        })
        .collect();

    let frames = (0..n)
        .map(|k| {
            let time = t0 + k as f64 * slot;
            let states = infos
                .iter()
                .filter(|(_, v)| {
                    v.samples[0].time - tol <= time && time <= v.samples.last().unwrap().time + tol
                })
                .map(|(info, v)| {
                    let s = interpolate(&v.samples, time.clamp(v.samples[0].time, v.samples.last().unwrap().time));
                    VehicleState {
                        info: info.clone(),
                        footprint: Footprint::new(s.pos, s.heading, v.length, v.width),
                        speed: s.speed,
                    }
                })
                .collect();
            TraceFrame { time, states }
        })
        .collect();
    Ok(frames)
}

/// Loads trace, optional route and optional buildings files into a scenario
/// resampled to `slot`.
pub fn load_traces(
    trace_path: &Path,
    route_path: Option<&Path>,
    buildings_path: Option<&Path>,
    slot: f64,
    quality_levels: usize,
) -> Result<Scenario> {
    let trace_text = std::fs::read_to_string(trace_path)?;
    let route_text = route_path.map(std::fs::read_to_string).transpose()?;
    let frames = parse_traces(&trace_text, route_text.as_deref(), slot, quality_levels).map_err(|e| match e {
        SimError::Parse { source_name, line, message } => SimError::Parse {
            source_name: match source_name.as_str() {
                "trace" => trace_path.display().to_string(),
                "routes" => route_path.map(|p| p.display().to_string()).unwrap_or(source_name),
                _ => source_name,
            },
            line,
            message,
        },
        other => other,
    })?;
    let buildings = match buildings_path {
        Some(p) => BuildingMap::load(p)?,
        None => BuildingMap::default(),
    };
    Scenario::new(frames, buildings, slot)
}

/// Serializes frames in the trace CSV format.
pub fn traces_to_csv(frames: &[TraceFrame]) -> String {
    let mut out = format!("{TRACE_HEADER}\n");
    for f in frames {
        for s in &f.states {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{}",
                f.time,
                s.info.id,
                s.info.role.as_str(),
                s.footprint.center.x,
                s.footprint.center.y,
                s.footprint.heading,
                s.speed,
                s.info.length,
                s.info.width,
                s.info.quality
            );
        }
    }
    out
}

/// Serializes the distinct vehicles' routes in the route CSV format.
pub fn routes_to_csv(frames: &[TraceFrame]) -> String {
    let mut seen: BTreeMap<&VehicleId, &VehicleInfo> = BTreeMap::new();
    for f in frames {
        for s in &f.states {
            seen.entry(&s.info.id).or_insert(&s.info);
        }
    }
    let mut out = format!("{ROUTES_HEADER}\n");
    for (id, info) in seen {
        if info.route.is_empty() {
            continue;
        }
        let _ = writeln!(out, "{},{},{},{}", id, info.src, info.dst, format_polyline(info.route.points()));
    }
    out
}
