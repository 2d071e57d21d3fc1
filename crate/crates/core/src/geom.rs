//! Planar geometry in a local east/north frame (meters).
//!
//! Headings follow the compass convention: 0° is north, angles grow
//! clockwise, values live in `[0, 360)`.

use core::ops::{Add, Mul, Sub};

use crate::error::Error;

/// Mean Earth radius used by the local projection.
pub const EARTH_RADIUS_M: f64 = 6_371_008.8;

/// Largest coordinate magnitude accepted in the local frame.
pub const MAX_LOCAL_COORD: f64 = 1e7;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PointXY {
    /// Meters east of the local origin.
    pub x: f64,
    /// Meters north of the local origin.
    pub y: f64,
}

impl PointXY {
    pub const fn new(x: f64, y: f64) -> Self {
        PointXY { x, y }
    }

    pub fn is_valid(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.x.abs() < MAX_LOCAL_COORD && self.y.abs() < MAX_LOCAL_COORD
    }

    pub fn dot(self, other: PointXY) -> f64 {
        self.x * other.x + self.y * other.y
    }

    pub fn norm(self) -> f64 {
        libm::hypot(self.x, self.y)
    }

    pub fn distance(self, other: PointXY) -> f64 {
        (self - other).norm()
    }

    /// Unit vector pointing along a compass heading.
    pub fn from_heading(heading_deg: f64) -> PointXY {
        let r = heading_deg.to_radians();
        PointXY::new(libm::sin(r), libm::cos(r))
    }
}

impl Add for PointXY {
    type Output = PointXY;
    fn add(self, o: PointXY) -> PointXY {
        PointXY::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for PointXY {
    type Output = PointXY;
    fn sub(self, o: PointXY) -> PointXY {
        PointXY::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for PointXY {
    type Output = PointXY;
    fn mul(self, s: f64) -> PointXY {
        PointXY::new(self.x * s, self.y * s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub position: PointXY,
    /// Compass heading in degrees, `[0, 360)`.
    pub heading: f64,
}

impl Pose {
    pub fn new(position: PointXY, heading: f64) -> Self {
        Pose { position, heading: normalize_heading(heading) }
    }

    /// Maps a vehicle-frame point (x forward, y left) into the local frame.
    pub fn to_world(&self, local: PointXY) -> PointXY {
        let fwd = PointXY::from_heading(self.heading);
        let left = PointXY::new(-fwd.y, fwd.x);
        self.position + fwd * local.x + left * local.y
    }

    /// Inverse of [`Pose::to_world`].
    pub fn to_vehicle(&self, world: PointXY) -> PointXY {
        let fwd = PointXY::from_heading(self.heading);
        let left = PointXY::new(-fwd.y, fwd.x);
        let d = world - self.position;
        PointXY::new(d.dot(fwd), d.dot(left))
    }
}

pub fn normalize_heading(deg: f64) -> f64 {
    let h = deg % 360.0;
    let h = if h < 0.0 { h + 360.0 } else { h };
    // -1e-18 % 360 + 360 rounds to 360.0
    if h >= 360.0 {
        0.0
    } else {
        h
    }
}

/// Included angle between two headings, in `[0, 180]`.
pub fn heading_diff(a: f64, b: f64) -> f64 {
    let d = libm::fabs(a - b) % 360.0;
    d.min(360.0 - d)
}

/// Compass bearing of the vector `from -> to`.
pub fn bearing(from: PointXY, to: PointXY) -> f64 {
    let d = to - from;
    normalize_heading(libm::atan2(d.x, d.y).to_degrees())
}

/// Local equirectangular projection around `origin = (lat, lon)`.
pub fn project_wgs84(lat: f64, lon: f64, origin: (f64, f64)) -> Result<PointXY, Error> {
    let (lat0, lon0) = origin;
    let valid = |la: f64, lo: f64| la.is_finite() && lo.is_finite() && la.abs() <= 90.0 && lo.abs() <= 180.0;
    if !valid(lat, lon) {
        return Err(Error::InvalidCoordinate { lat, lon });
    }
    if !valid(lat0, lon0) {
        return Err(Error::InvalidCoordinate { lat: lat0, lon: lon0 });
    }
    if (lat - lat0).abs() > 1.0 || (lon - lon0).abs() > 1.0 {
        return Err(Error::InvalidCoordinate { lat, lon });
    }
    let k = EARTH_RADIUS_M * core::f64::consts::PI / 180.0;
    Ok(PointXY::new((lon - lon0) * libm::cos(lat0.to_radians()) * k, (lat - lat0) * k))
}

/// Inverse of [`project_wgs84`]; returns `(lat, lon)`.
pub fn unproject_wgs84(p: PointXY, origin: (f64, f64)) -> (f64, f64) {
    let (lat0, lon0) = origin;
    let k = EARTH_RADIUS_M * core::f64::consts::PI / 180.0;
    (lat0 + p.y / k, lon0 + p.x / (libm::cos(lat0.to_radians()) * k))
}

/// Nearest point of a polyline to a query point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection {
    pub distance: f64,
    pub point: PointXY,
    /// Bearing of the segment holding `point`.
    pub road_heading: f64,
    /// False when the nearest point is a polyline endpoint reached from
    /// beyond the end (no perpendicular foot exists).
    pub on_segment: bool,
    /// Arc length from the first vertex to `point`.
    pub arc_offset: f64,
    pub segment: usize,
}

/// Parameter of the perpendicular foot of `p` on the line through `a`, `b`
/// (unclamped) and the squared segment length.
fn foot_param(a: PointXY, b: PointXY, p: PointXY) -> (f64, f64) {
    let ab = b - a;
    let len2 = ab.dot(ab);
    if len2 == 0.0 {
        return (0.0, 0.0);
    }
    ((p - a).dot(ab) / len2, len2)
}

pub fn point_segment_distance(a: PointXY, b: PointXY, p: PointXY) -> f64 {
    let (t, _) = foot_param(a, b, p);
    let t = t.clamp(0.0, 1.0);
    p.distance(a + (b - a) * t)
}

/// Projects `p` onto `line`, which must hold at least two points.
pub fn project_onto_polyline(line: &[PointXY], p: PointXY) -> Projection {
    debug_assert!(line.len() >= 2);
    let last = line.len() - 2;
    let mut best: Option<Projection> = None;
    let mut arc = 0.0;
    for (i, w) in line.windows(2).enumerate() {
        let (a, b) = (w[0], w[1]);
        let seg_len = a.distance(b);
        let (raw, _) = foot_param(a, b, p);
        let t = raw.clamp(0.0, 1.0);
        let foot = if t >= 1.0 { b } else { a + (b - a) * t };
        let d = p.distance(foot);
        if best.as_ref().is_none_or(|bp| d < bp.distance) {
            let off_start = i == 0 && raw < 0.0;
            let off_end = i == last && raw > 1.0;
            best = Some(Projection {
                distance: d,
                point: foot,
                road_heading: bearing(a, b),
                on_segment: !(off_start || off_end),
                arc_offset: arc + t * seg_len,
                segment: i,
            });
        }
        arc += seg_len;
    }
    best.expect("polyline with at least one segment")
}

pub fn polyline_length(line: &[PointXY]) -> f64 {
    line.windows(2).map(|w| w[0].distance(w[1])).sum()
}

/// Offsets a polyline sideways; positive `offset` moves it to the left of
/// the direction of travel. Interior vertices use the averaged normal.
pub fn offset_polyline(line: &[PointXY], offset: f64) -> alloc::vec::Vec<PointXY> {
    let n = line.len();
    let normal = |a: PointXY, b: PointXY| {
        let d = b - a;
        let len = d.norm();
        PointXY::new(-d.y / len, d.x / len)
    };
    (0..n)
        .map(|i| {
            let nrm = if i == 0 {
                normal(line[0], line[1])
            } else if i == n - 1 {
                normal(line[n - 2], line[n - 1])
            } else {
                let n1 = normal(line[i - 1], line[i]);
                let n2 = normal(line[i], line[i + 1]);
                let m = n1 + n2;
                let cos_half = m.norm() / 2.0;
                // miter: scale so that the offset distance holds on both sides
                m * (1.0 / (m.norm() * cos_half.max(0.2)))
            };
            line[i] + nrm * offset
        })
        .collect()
}
