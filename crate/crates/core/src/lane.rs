//! Lane-marking sampling and association of markings with SD roads.
//!
//! Each marking's sample points are fed through the HMM matcher as if they
//! were a trajectory. The normalized lattice gives, per sample point, a
//! distribution over candidate roads; a marking's association with a road
//! is the maximum of that road's per-point probabilities.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use crate::error::Error;
use crate::geom::{bearing, heading_diff, PointXY, Pose};
use crate::graph::{RoadGraph, RoadId};
use crate::grid::PointGrid;
use crate::hmm::{EmissionParams, HmmParams, MatcherState, TransitionParams};

pub const MIN_SAMPLE_SPACING_M: f64 = 0.2;
pub const MAX_SAMPLE_SPACING_M: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum LaneType {
    Solid,
    Dashed,
}

impl LaneType {
    pub fn as_str(self) -> &'static str {
        match self {
            LaneType::Solid => "solid",
            LaneType::Dashed => "dashed",
        }
    }

    pub fn parse(s: &str) -> Option<LaneType> {
        match s {
            "solid" => Some(LaneType::Solid),
            "dashed" => Some(LaneType::Dashed),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LaneSource {
    BSpline,
    Polyline,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LanePoint {
    pub position: PointXY,
    pub heading: f64,
    pub kind: LaneType,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LaneMarking {
    pub id: i64,
    points: Vec<LanePoint>,
    pub source: LaneSource,
}

impl LaneMarking {
    pub fn new(id: i64, points: Vec<LanePoint>, source: LaneSource) -> Result<Self, Error> {
        if points.len() < 2 {
            return Err(Error::InvalidLane { id, reason: "needs at least 2 points" });
        }
        if points.iter().any(|p| !p.position.is_valid() || !p.heading.is_finite()) {
            return Err(Error::InvalidLane { id, reason: "non-finite point" });
        }
        for w in points.windows(2) {
            let gap = w[0].position.distance(w[1].position);
            // small slack for spacing produced by rounding in files
            if !(MIN_SAMPLE_SPACING_M - 1e-6..=MAX_SAMPLE_SPACING_M + 1e-6).contains(&gap) {
                return Err(Error::InvalidLane { id, reason: "sample spacing outside [0.2, 5] m" });
            }
            if heading_diff(w[0].heading, bearing(w[0].position, w[1].position)) >= 90.0 {
                return Err(Error::InvalidLane { id, reason: "heading against point order" });
            }
        }
        Ok(LaneMarking { id, points, source })
    }

    /// Resamples a polyline at `interval` and attaches forward headings.
    pub fn from_polyline(id: i64, line: &[PointXY], kind: LaneType, interval: f64) -> Result<Self, Error> {
        let samples = resample_polyline(line, interval).ok_or(Error::InvalidLane { id, reason: "polyline too short to sample" })?;
        let points = samples.into_iter().map(|(position, heading)| LanePoint { position, heading, kind }).collect();
        LaneMarking::new(id, points, LaneSource::Polyline)
    }

    pub fn from_bspline(id: i64, control: &[PointXY], kind: LaneType, interval: f64) -> Result<Self, Error> {
        let points =
            sample_bspline(control, interval)?.into_iter().map(|(position, heading)| LanePoint { position, heading, kind }).collect();
        LaneMarking::new(id, points, LaneSource::BSpline)
    }

    pub fn points(&self) -> &[LanePoint] {
        &self.points
    }

    pub fn positions(&self) -> Vec<PointXY> {
        self.points.iter().map(|p| p.position).collect()
    }
}

/// Arc-length resampling of a dense polyline; headings are the bearing of
/// the dense segment holding each sample.
pub fn resample_polyline(line: &[PointXY], interval: f64) -> Option<Vec<(PointXY, f64)>> {
    let line: Vec<PointXY> = line.iter().copied().fold(Vec::new(), |mut acc: Vec<PointXY>, p| {
        if acc.last().is_none_or(|q| q.distance(p) > 1e-9) {
            acc.push(p);
        }
        acc
    });
    if line.len() < 2 {
        return None;
    }
    let mut cum = Vec::with_capacity(line.len());
    cum.push(0.0);
    for w in line.windows(2) {
        cum.push(cum.last().unwrap() + w[0].distance(w[1]));
    }
    let total = *cum.last().unwrap();
    if total < MIN_SAMPLE_SPACING_M {
        return None;
    }
    let at = |s: f64| -> (PointXY, f64) {
        let i = cum.partition_point(|&c| c <= s).clamp(1, line.len() - 1) - 1;
        let seg = cum[i + 1] - cum[i];
        let t = ((s - cum[i]) / seg).clamp(0.0, 1.0);
        let (a, b) = (line[i], line[i + 1]);
        (a + (b - a) * t, bearing(a, b))
    };
    let n = libm::floor(total / interval + 1e-9) as usize;
    let mut out: Vec<(PointXY, f64)> = (0..=n).map(|k| at(k as f64 * interval)).collect();
    let tail = total - n as f64 * interval;
    if tail >= MIN_SAMPLE_SPACING_M {
        out.push(at(total));
    }
    Some(out)
}

/// Samples a clamped uniform cubic B-spline at roughly `interval` meters
/// of arc length.
pub fn sample_bspline(control: &[PointXY], interval: f64) -> Result<Vec<(PointXY, f64)>, Error> {
    if control.len() < 4 {
        return Err(Error::InvalidSpline { control_points: control.len() });
    }
    if !(MIN_SAMPLE_SPACING_M..=MAX_SAMPLE_SPACING_M).contains(&interval) {
        return Err(Error::InvalidParams("sampling interval must lie in [0.2, 5] m"));
    }
    let spans = control.len() - 3;
    let knots = clamped_knots(control.len());
    const PER_SPAN: usize = 64;
    let dense: Vec<PointXY> = (0..=spans * PER_SPAN).map(|i| de_boor(control, &knots, i as f64 / PER_SPAN as f64)).collect();
    resample_polyline(&dense, interval).ok_or(Error::InvalidSpline { control_points: control.len() })
}

fn clamped_knots(n: usize) -> Vec<f64> {
    let spans = n - 3;
    let mut k = Vec::with_capacity(n + 4);
    k.extend([0.0; 3]);
    k.extend((0..=spans).map(|i| i as f64));
    k.extend([spans as f64; 3]);
    k
}

fn de_boor(control: &[PointXY], knots: &[f64], u: f64) -> PointXY {
    const P: usize = 3;
    let n = control.len();
    // span index s with knots[s] <= u < knots[s + 1], clamped at the end
    let s = (P..n).rev().find(|&s| knots[s] <= u).unwrap_or(P);
    let mut d: [PointXY; P + 1] = core::array::from_fn(|j| control[j + s - P]);
    for r in 1..=P {
        for j in (r..=P).rev() {
            let i = j + s - P;
            let denom = knots[i + P + 1 - r] - knots[i];
            let alpha = if denom == 0.0 { 0.0 } else { (u - knots[i]) / denom };
            d[j] = d[j - 1] * (1.0 - alpha) + d[j] * alpha;
        }
    }
    d[P]
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AssociationParams {
    pub hmm: HmmParams,
    /// Associations with probability at or below this are dropped.
    pub association_floor: f64,
}

impl Default for AssociationParams {
    fn default() -> Self {
        AssociationParams {
            hmm: HmmParams {
                emission: EmissionParams { sigma: 3.0, ..EmissionParams::default() },
                transition: TransitionParams::default(),
            },
            association_floor: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LaneAssociation {
    pub lane: i64,
    pub road: RoadId,
    /// Maximum of `per_point` probabilities.
    pub probability: f64,
    /// `(sample index, probability)` for every sample that had the road as
    /// a candidate.
    pub per_point: Vec<(usize, f64)>,
}

/// Full per-point distributions next to the thresholded associations.
#[derive(Debug, Clone, PartialEq)]
pub struct AssociationReport {
    pub associations: Vec<LaneAssociation>,
    /// Per sample: candidate road probabilities (empty when off-map).
    pub per_point: Vec<Vec<(RoadId, f64)>>,
}

pub fn associate_lane_report(graph: &RoadGraph, lane: &LaneMarking, params: &AssociationParams) -> AssociationReport {
    let mut state = MatcherState::new();
    for p in lane.points() {
        state.viterbi_step(graph, &Pose::new(p.position, p.heading), &params.hmm, |_| 0.0);
    }
    let per_point: Vec<Vec<(RoadId, f64)>> = state.steps().iter().map(|s| s.probabilities().collect()).collect();
    let mut by_road: BTreeMap<RoadId, Vec<(usize, f64)>> = BTreeMap::new();
    for (k, dist) in per_point.iter().enumerate() {
        for &(road, p) in dist {
            by_road.entry(road).or_default().push((k, p));
        }
    }
    let associations = by_road
        .into_iter()
        .map(|(road, per_point)| LaneAssociation {
            lane: lane.id,
            road,
            probability: per_point.iter().map(|&(_, p)| p).fold(0.0, f64::max),
            per_point,
        })
        .filter(|a| a.probability > params.association_floor)
        .collect();
    AssociationReport { associations, per_point }
}

/// Associations of one marking with the roads of `graph`, ordered by road id.
pub fn associate_lane(graph: &RoadGraph, lane: &LaneMarking, params: &AssociationParams) -> Vec<LaneAssociation> {
    associate_lane_report(graph, lane, params).associations
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CloudPoint {
    pub position: PointXY,
    pub kind: LaneType,
    pub lane: i64,
}

/// Cell size of the lane-point grid.
const CLOUD_CELL_M: f64 = 4.0;

/// SD map enriched with associated lane markings.
#[derive(Debug, Clone)]
pub struct EnrichedMap {
    pub graph: RoadGraph,
    lanes: BTreeMap<i64, LaneMarking>,
    associations: Vec<LaneAssociation>,
    lookup: BTreeMap<(i64, RoadId), f64>,
    cloud: Vec<CloudPoint>,
    grid: PointGrid,
}

impl EnrichedMap {
    /// Assembles a map from already computed associations.
    pub fn from_parts(graph: RoadGraph, lanes: Vec<LaneMarking>, associations: Vec<LaneAssociation>) -> Result<EnrichedMap, Error> {
        let mut by_id = BTreeMap::new();
        for lane in lanes {
            let id = lane.id;
            if by_id.insert(id, lane).is_some() {
                return Err(Error::DuplicateLane(id));
            }
        }
        let mut lookup = BTreeMap::new();
        for a in &associations {
            if !by_id.contains_key(&a.lane) {
                return Err(Error::InvalidLane { id: a.lane, reason: "association references unknown lane" });
            }
            graph.road(a.road)?;
            lookup.insert((a.lane, a.road), a.probability);
        }
        let cloud: Vec<CloudPoint> =
            by_id.values().flat_map(|l| l.points().iter().map(|p| CloudPoint { position: p.position, kind: p.kind, lane: l.id })).collect();
        let grid = PointGrid::build(cloud.iter().map(|c| c.position), CLOUD_CELL_M);
        Ok(EnrichedMap { graph, lanes: by_id, associations, lookup, cloud, grid })
    }

    pub fn lanes(&self) -> impl Iterator<Item = &LaneMarking> {
        self.lanes.values()
    }

    pub fn lane(&self, id: i64) -> Option<&LaneMarking> {
        self.lanes.get(&id)
    }

    pub fn associations(&self) -> &[LaneAssociation] {
        &self.associations
    }

    /// Association probability of `lane` with `road`, zero when absent.
    pub fn association(&self, lane: i64, road: RoadId) -> f64 {
        self.lookup.get(&(lane, road)).copied().unwrap_or(0.0)
    }

    pub fn cloud(&self) -> &[CloudPoint] {
        &self.cloud
    }

    pub(crate) fn visit_cloud_near(&self, p: PointXY, r: f64, visit: impl FnMut(usize)) {
        self.grid.visit_near(p, r, visit)
    }
}

/// Associates every marking and assembles the enriched map.
pub fn build_enriched_map(graph: RoadGraph, lanes: Vec<LaneMarking>, params: &AssociationParams) -> Result<EnrichedMap, Error> {
    let mut seen = alloc::collections::BTreeSet::new();
    for l in &lanes {
        if !seen.insert(l.id) {
            return Err(Error::DuplicateLane(l.id));
        }
    }
    let associations = lanes.iter().flat_map(|l| associate_lane(&graph, l, params)).collect();
    EnrichedMap::from_parts(graph, lanes, associations)
}
