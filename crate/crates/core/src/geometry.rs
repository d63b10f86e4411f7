//! Planar geometry: vehicle footprints, building polygons, sensing-area
//! rasterization and route polylines.

use std::f64::consts::PI;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};

const EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Vec2 { x, y }
    }

    /// Unit vector pointing at `angle` radians from the +x axis.
    pub fn from_angle(angle: f64) -> Self {
        Vec2::new(angle.cos(), angle.sin())
    }

    pub fn dot(self, other: Vec2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    /// z-component of the 3-D cross product.
    pub fn cross(self, other: Vec2) -> f64 {
        self.x * other.y - self.y * other.x
    }

    pub fn norm(self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn norm_sq(self) -> f64 {
        self.dot(self)
    }

    pub fn distance(self, other: Vec2) -> f64 {
        (self - other).norm()
    }

    /// Direction of the vector in radians, in (-π, π].
    pub fn angle(self) -> f64 {
        self.y.atan2(self.x)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn lerp(self, other: Vec2, t: f64) -> Vec2 {
        self + (other - self) * t
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, k: f64) -> Vec2 {
        Vec2::new(self.x * k, self.y * k)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

impl fmt::Display for Vec2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

/// Wraps an angle to (-π, π].
pub fn wrap_angle(a: f64) -> f64 {
    let mut r = a % (2.0 * PI);
    if r > PI {
        r -= 2.0 * PI;
    } else if r <= -PI {
        r += 2.0 * PI;
    }
    r
}

/// Oriented rectangle occupied by a vehicle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Footprint {
    pub center: Vec2,
    /// Radians, direction of travel.
    pub heading: f64,
    pub length: f64,
    pub width: f64,
}

impl Footprint {
    pub fn new(center: Vec2, heading: f64, length: f64, width: f64) -> Self {
        debug_assert!(length > 0.0 && width > 0.0);
        Footprint {
            center,
            heading,
            length,
            width,
        }
    }

    fn to_local(&self, p: Vec2) -> Vec2 {
        let d = p - self.center;
        let (s, c) = self.heading.sin_cos();
        Vec2::new(d.x * c + d.y * s, -d.x * s + d.y * c)
    }

    pub fn contains(&self, p: Vec2) -> bool {
        let l = self.to_local(p);
        l.x.abs() <= 0.5 * self.length && l.y.abs() <= 0.5 * self.width
    }

    /// Radius of the circumscribed circle.
    pub fn bounding_radius(&self) -> f64 {
        0.5 * (self.length * self.length + self.width * self.width).sqrt()
    }

    pub fn corners(&self) -> [Vec2; 4] {
        let u = Vec2::from_angle(self.heading) * (0.5 * self.length);
        let v = Vec2::from_angle(self.heading + 0.5 * PI) * (0.5 * self.width);
        let c = self.center;
        [c + u + v, c - u + v, c - u - v, c + u - v]
    }

    /// Whether the closed segment `a`–`b` touches the rectangle.
    pub fn intersects_segment(&self, a: Vec2, b: Vec2) -> bool {
        // cheap reject against the circumscribed circle
        let r_sq = 0.25 * (self.length * self.length + self.width * self.width);
        if point_segment_distance_sq(self.center, a, b) > r_sq {
            return false;
        }
        let p = self.to_local(a);
        let q = self.to_local(b);
        let d = q - p;
        let hx = 0.5 * self.length;
        let hy = 0.5 * self.width;
        let mut t0 = 0.0_f64;
        let mut t1 = 1.0_f64;
        // Liang-Barsky clipping against the four slabs
        for (pk, qk) in [
            (-d.x, p.x + hx),
            (d.x, hx - p.x),
            (-d.y, p.y + hy),
            (d.y, hy - p.y),
        ] {
            if pk.abs() < EPS {
                if qk < 0.0 {
                    return false;
                }
            } else {
                let r = qk / pk;
                if pk < 0.0 {
                    t0 = t0.max(r);
                } else {
                    t1 = t1.min(r);
                }
                if t0 > t1 {
                    return false;
                }
            }
        }
        true
    }
}

/// Simple polygon, stored counter-clockwise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polygon {
    vertices: Vec<Vec2>,
    min: Vec2,
    max: Vec2,
}

impl Polygon {
    /// Builds a polygon, normalizing orientation to counter-clockwise.
    pub fn new(mut vertices: Vec<Vec2>) -> Result<Self> {
        if vertices.len() >= 2 && vertices.first() == vertices.last() {
            vertices.pop();
        }
        if vertices.len() < 3 {
            return Err(SimError::Config(format!(
                "polygon needs at least 3 vertices, got {}",
                vertices.len()
            )));
        }
        if vertices.iter().any(|v| !v.is_finite()) {
            return Err(SimError::Config("polygon has non-finite vertex".into()));
        }
        let area = signed_area(&vertices);
        if area.abs() < EPS {
            return Err(SimError::Config("polygon has zero area".into()));
        }
        if area < 0.0 {
            vertices.reverse();
        }
        let n = vertices.len();
        for i in 0..n {
            for j in (i + 1)..n {
                // adjacent edges share a vertex
                if j == i + 1 || (i == 0 && j == n - 1) {
                    continue;
                }
                let (a, b) = (vertices[i], vertices[(i + 1) % n]);
                let (c, d) = (vertices[j], vertices[(j + 1) % n]);
                if segments_intersect(a, b, c, d) {
                    return Err(SimError::Config(format!(
                        "polygon is self-intersecting (edges {i} and {j})"
                    )));
                }
            }
        }
        let mut min = vertices[0];
        let mut max = vertices[0];
        for v in &vertices {
            min.x = min.x.min(v.x);
            min.y = min.y.min(v.y);
            max.x = max.x.max(v.x);
            max.y = max.y.max(v.y);
        }
        Ok(Polygon { vertices, min, max })
    }

    /// Axis-aligned rectangle `[x0,x1]×[y0,y1]`.
    pub fn rect(x0: f64, y0: f64, x1: f64, y1: f64) -> Result<Self> {
        Polygon::new(vec![
            Vec2::new(x0, y0),
            Vec2::new(x1, y0),
            Vec2::new(x1, y1),
            Vec2::new(x0, y1),
        ])
    }

    pub fn vertices(&self) -> &[Vec2] {
        &self.vertices
    }

    pub fn area(&self) -> f64 {
        signed_area(&self.vertices)
    }

    fn edges(&self) -> impl Iterator<Item = (Vec2, Vec2)> + '_ {
        let n = self.vertices.len();
        (0..n).map(move |i| (self.vertices[i], self.vertices[(i + 1) % n]))
    }

    fn bbox_contains(&self, p: Vec2) -> bool {
        p.x >= self.min.x && p.x <= self.max.x && p.y >= self.min.y && p.y <= self.max.y
    }

    /// Point-in-polygon by ray crossing; boundary points count as inside.
    pub fn contains(&self, p: Vec2) -> bool {
        if !self.bbox_contains(p) {
            return false;
        }
        let mut inside = false;
        for (a, b) in self.edges() {
            if point_segment_distance(p, a, b) <= EPS {
                return true;
            }
            if (a.y > p.y) != (b.y > p.y) {
                let x = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
                if p.x < x {
                    inside = !inside;
                }
            }
        }
        inside
    }

    pub fn intersects_segment(&self, a: Vec2, b: Vec2) -> bool {
        let seg_min = Vec2::new(a.x.min(b.x), a.y.min(b.y));
        let seg_max = Vec2::new(a.x.max(b.x), a.y.max(b.y));
        if seg_max.x < self.min.x
            || seg_min.x > self.max.x
            || seg_max.y < self.min.y
            || seg_min.y > self.max.y
        {
            return false;
        }
        self.edges().any(|(c, d)| segments_intersect(a, b, c, d)) || self.contains(a.lerp(b, 0.5))
    }
}

fn signed_area(v: &[Vec2]) -> f64 {
    let n = v.len();
    0.5 * (0..n).map(|i| v[i].cross(v[(i + 1) % n])).sum::<f64>()
}

fn orient(a: Vec2, b: Vec2, c: Vec2) -> f64 {
    (b - a).cross(c - a)
}

fn on_segment(p: Vec2, a: Vec2, b: Vec2) -> bool {
    p.x >= a.x.min(b.x) - EPS
        && p.x <= a.x.max(b.x) + EPS
        && p.y >= a.y.min(b.y) - EPS
        && p.y <= a.y.max(b.y) + EPS
}

/// Closed segment intersection, collinear overlaps included.
pub fn segments_intersect(a: Vec2, b: Vec2, c: Vec2, d: Vec2) -> bool {
    let d1 = orient(c, d, a);
    let d2 = orient(c, d, b);
    let d3 = orient(a, b, c);
    let d4 = orient(a, b, d);
    if ((d1 > EPS && d2 < -EPS) || (d1 < -EPS && d2 > EPS))
        && ((d3 > EPS && d4 < -EPS) || (d3 < -EPS && d4 > EPS))
    {
        return true;
    }
    (d1.abs() <= EPS && on_segment(a, c, d))
        || (d2.abs() <= EPS && on_segment(b, c, d))
        || (d3.abs() <= EPS && on_segment(c, a, b))
        || (d4.abs() <= EPS && on_segment(d, a, b))
}

pub fn point_segment_distance(p: Vec2, a: Vec2, b: Vec2) -> f64 {
    point_segment_distance_sq(p, a, b).sqrt()
}

fn point_segment_distance_sq(p: Vec2, a: Vec2, b: Vec2) -> f64 {
    let ab = b - a;
    let len_sq = ab.norm_sq();
    if len_sq <= 0.0 {
        return (p - a).norm_sq();
    }
    let t = ((p - a).dot(ab) / len_sq).clamp(0.0, 1.0);
    (p - (a + ab * t)).norm_sq()
}

/// Building footprints lacking contextual information.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BuildingMap {
    pub polygons: Vec<Polygon>,
}

impl BuildingMap {
    pub fn new(polygons: Vec<Polygon>) -> Self {
        BuildingMap { polygons }
    }

    pub fn is_empty(&self) -> bool {
        self.polygons.is_empty()
    }

    pub fn contains(&self, p: Vec2) -> bool {
        self.polygons.iter().any(|poly| poly.contains(p))
    }

    /// Parses the `#buildings v1` text format: one polygon per line,
    /// vertices as `x,y` separated by `;`.
    pub fn parse(text: &str, source_name: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, h)) if h.trim() == "#buildings v1" => {}
            Some(_) => return Err(SimError::parse(source_name, 1, "expected header `#buildings v1`")),
            None => return Ok(BuildingMap::default()),
        }
        let mut polygons = Vec::new();
        for (idx, raw) in lines {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let lineno = idx + 1;
            let vertices = parse_polyline(line).map_err(|m| SimError::parse(source_name, lineno, m))?;
            let poly = Polygon::new(vertices)
                .map_err(|e| SimError::parse(source_name, lineno, e.to_string()))?;
            polygons.push(poly);
        }
        Ok(BuildingMap { polygons })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn to_text(&self) -> String {
        let mut out = String::from("#buildings v1\n");
        for poly in &self.polygons {
            out.push_str(&format_polyline(poly.vertices()));
            out.push('\n');
        }
        out
    }
}

/// Parses `x1,y1;x2,y2;...`.
pub(crate) fn parse_polyline(s: &str) -> std::result::Result<Vec<Vec2>, String> {
    s.split(';')
        .filter(|p| !p.trim().is_empty())
        .map(|pair| {
            let mut it = pair.split(',');
            let (Some(x), Some(y), None) = (it.next(), it.next(), it.next()) else {
                return Err(format!("bad vertex `{pair}`"));
            };
            let x: f64 = x.trim().parse().map_err(|_| format!("bad x in `{pair}`"))?;
            let y: f64 = y.trim().parse().map_err(|_| format!("bad y in `{pair}`"))?;
            let v = Vec2::new(x, y);
            if !v.is_finite() {
                return Err(format!("non-finite vertex `{pair}`"));
            }
            Ok(v)
        })
        .collect()
}

pub(crate) fn format_polyline(points: &[Vec2]) -> String {
    points
        .iter()
        .map(|p| format!("{},{}", p.x, p.y))
        .collect::<Vec<_>>()
        .join(";")
}

/// True iff the segment `a`–`b` crosses or touches any building.
pub fn segment_blocked_by_building(a: Vec2, b: Vec2, map: &BuildingMap) -> bool {
    map.polygons.iter().any(|p| p.intersects_segment(a, b))
}

/// Number of footprints intersecting segment `a`–`b`. Callers exclude the
/// endpoint vehicles.
pub fn count_blockers<'a, I>(a: Vec2, b: Vec2, others: I) -> usize
where
    I: IntoIterator<Item = &'a Footprint>,
{
    others
        .into_iter()
        .filter(|f| f.intersects_segment(a, b))
        .count()
}

/// Rasterized sensing disk of one transmitter with building cells removed.
///
/// Cell centers lie on a square lattice of side `cell` anchored at the disk's
/// bounding box corner. Only cells whose center falls inside the disk and
/// outside every building are kept, so the extension offered to any receiver
/// reduces to counting kept cells outside the receiver disk.
#[derive(Debug, Clone)]
pub struct SensingGrid {
    center: Vec2,
    radius: f64,
    disk_cells: usize,
    free: Vec<Vec2>,
}

impl SensingGrid {
    pub fn new(center: Vec2, radius: f64, map: &BuildingMap, cell: f64) -> Result<Self> {
        if !(cell > 0.0) || !cell.is_finite() {
            return Err(SimError::Config(format!("grid cell must be > 0, got {cell}")));
        }
        if !(radius > 0.0) {
            return Err(SimError::Config(format!("sensing radius must be > 0, got {radius}")));
        }
        let n = (2.0 * radius / cell).ceil() as usize;
        let origin = center - Vec2::new(radius, radius);
        let r_sq = radius * radius;
        // only polygons whose bbox meets the disk matter
        let nearby: Vec<&Polygon> = map
            .polygons
            .iter()
            .filter(|p| {
                p.max.x >= center.x - radius
                    && p.min.x <= center.x + radius
                    && p.max.y >= center.y - radius
                    && p.min.y <= center.y + radius
            })
            .collect();
        let mut disk_cells = 0;
        let mut free = Vec::new();
        for i in 0..n {
            for j in 0..n {
                let p = origin + Vec2::new((i as f64 + 0.5) * cell, (j as f64 + 0.5) * cell);
                if (p - center).norm_sq() > r_sq {
                    continue;
                }
                disk_cells += 1;
                if nearby.iter().any(|poly| poly.contains(p)) {
                    continue;
                }
                free.push(p);
            }
        }
        Ok(SensingGrid {
            center,
            radius,
            disk_cells,
            free,
        })
    }

    /// Fraction of the disk not covered by buildings.
    pub fn free_fraction(&self) -> f64 {
        if self.disk_cells == 0 {
            return 0.0;
        }
        self.free.len() as f64 / self.disk_cells as f64
    }

    /// Normalized extension offered to a receiver sensing a disk of radius
    /// `rx_radius` around `rx_center`.
    pub fn extension(&self, rx_center: Vec2, rx_radius: f64) -> f64 {
        if self.disk_cells == 0 {
            return 0.0;
        }
        if rx_radius <= 0.0 || self.center.distance(rx_center) >= self.radius + rx_radius {
            return self.free_fraction();
        }
        let rr = rx_radius * rx_radius;
        let kept = self
            .free
            .iter()
            .filter(|p| (**p - rx_center).norm_sq() > rr)
            .count();
        (kept as f64 / self.disk_cells as f64).clamp(0.0, 1.0)
    }
}

/// Normalized sensing range extension of a transmitter disk over a receiver
/// disk and the building map, on a grid of side `cell`.
pub fn sensing_extension(
    tx_center: Vec2,
    tx_radius: f64,
    rx_center: Vec2,
    rx_radius: f64,
    map: &BuildingMap,
    cell: f64,
) -> Result<f64> {
    Ok(SensingGrid::new(tx_center, tx_radius, map, cell)?.extension(rx_center, rx_radius))
}

/// Polyline with cumulative arc length per waypoint.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Route {
    points: Vec<Vec2>,
    arc: Vec<f64>,
}

impl Route {
    /// Builds a route, dropping repeated consecutive waypoints so arc length
    /// is strictly increasing.
    pub fn new(points: impl IntoIterator<Item = Vec2>) -> Self {
        let mut pts: Vec<Vec2> = Vec::new();
        let mut arc = Vec::new();
        for p in points {
            match pts.last() {
                None => {
                    pts.push(p);
                    arc.push(0.0);
                }
                Some(&last) => {
                    let d = last.distance(p);
                    if d > 1e-9 {
                        pts.push(p);
                        arc.push(arc.last().copied().unwrap_or(0.0) + d);
                    }
                }
            }
        }
        Route { points: pts, arc }
    }

    pub fn points(&self) -> &[Vec2] {
        &self.points
    }

    pub fn arc_lengths(&self) -> &[f64] {
        &self.arc
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn length(&self) -> f64 {
        self.arc.last().copied().unwrap_or(0.0)
    }

    /// Segment index containing arc position `s` (clamped).
    fn segment_at(&self, s: f64) -> usize {
        let idx = self.arc.partition_point(|&a| a <= s);
        idx.saturating_sub(1).min(self.points.len().saturating_sub(2))
    }

    /// Point at arc length `s`, clamped to the route ends.
    pub fn point_at(&self, s: f64) -> Vec2 {
        match self.points.len() {
            0 => Vec2::ZERO,
            1 => self.points[0],
            _ => {
                let s = s.clamp(0.0, self.length());
                let i = self.segment_at(s);
                let t = (s - self.arc[i]) / (self.arc[i + 1] - self.arc[i]);
                self.points[i].lerp(self.points[i + 1], t.clamp(0.0, 1.0))
            }
        }
    }

    /// Tangent direction at arc length `s` in radians.
    pub fn heading_at(&self, s: f64) -> f64 {
        if self.points.len() < 2 {
            return 0.0;
        }
        let i = self.segment_at(s.clamp(0.0, self.length()));
        (self.points[i + 1] - self.points[i]).angle()
    }

    pub fn distance_to(&self, p: Vec2) -> f64 {
        match self.points.len() {
            0 => f64::INFINITY,
            1 => p.distance(self.points[0]),
            _ => self
                .points
                .windows(2)
                .map(|w| point_segment_distance(p, w[0], w[1]))
                .fold(f64::INFINITY, f64::min),
        }
    }

    /// Whether some point of the route lies within `r` of `p`.
    pub fn is_within(&self, p: Vec2, r: f64) -> bool {
        let r_sq = r * r;
        match self.points.len() {
            0 => false,
            1 => (p - self.points[0]).norm_sq() <= r_sq,
            _ => self
                .points
                .windows(2)
                .any(|w| point_segment_distance_sq(p, w[0], w[1]) <= r_sq),
        }
    }

    /// Arc length of the closest point on the route to `p`.
    pub fn project(&self, p: Vec2) -> f64 {
        if self.points.len() < 2 {
            return 0.0;
        }
        let mut best = (f64::INFINITY, 0.0);
        for (i, w) in self.points.windows(2).enumerate() {
            let ab = w[1] - w[0];
            let t = ((p - w[0]).dot(ab) / ab.norm_sq()).clamp(0.0, 1.0);
            let d = p.distance(w[0] + ab * t);
            if d < best.0 {
                best = (d, self.arc[i] + t * (self.arc[i + 1] - self.arc[i]));
            }
        }
        best.1
    }

    /// Sub-route between arc positions `from` and `to` (clamped, `from ≤ to`).
    pub fn slice(&self, from: f64, to: f64) -> Route {
        if self.points.len() < 2 {
            return self.clone();
        }
        let from = from.clamp(0.0, self.length());
        let to = to.clamp(from, self.length());
        let mut pts = vec![self.point_at(from)];
        for (p, &a) in self.points.iter().zip(&self.arc) {
            if a > from && a < to {
                pts.push(*p);
            }
        }
        pts.push(self.point_at(to));
        Route::new(pts)
    }
}

/// Sampling parameters for route similarity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimelinessParams {
    /// Max distance from the transmitter trace for a sample to count, meters.
    pub corridor: f64,
    /// Sample spacing along the receiver route, meters.
    pub step: f64,
    /// Longest stretch of receiver route considered, meters.
    pub horizon: f64,
}

impl Default for TimelinessParams {
    fn default() -> Self {
        TimelinessParams {
            corridor: 5.0,
            step: 2.0,
            horizon: 100.0,
        }
    }
}

/// Fraction of the receiver's upcoming route that runs within the corridor
/// around the transmitter's past trace.
pub fn route_timeliness(tx_past: &Route, rx_future: &Route, params: &TimelinessParams) -> f64 {
    if rx_future.is_empty() || tx_past.points().len() < 2 {
        return 0.0;
    }
    // samples outside the padded bounding box of the trace cannot hit
    let pad = Vec2::new(params.corridor, params.corridor);
    let (lo, hi) = tx_past.points().iter().fold((tx_past.points()[0], tx_past.points()[0]), |(lo, hi), q| {
        (Vec2::new(lo.x.min(q.x), lo.y.min(q.y)), Vec2::new(hi.x.max(q.x), hi.y.max(q.y)))
    });
    let (lo, hi) = (lo - pad, hi + pad);
    let horizon = rx_future.length().min(params.horizon);
    let samples = (horizon / params.step + 1e-9).floor() as usize + 1;
    let hits = (0..samples)
        .filter(|&i| {
            let p = rx_future.point_at(i as f64 * params.step);
            p.x >= lo.x && p.y >= lo.y && p.x <= hi.x && p.y <= hi.y && tx_past.is_within(p, params.corridor)
        })
        .count();
    hits as f64 / samples as f64
}
