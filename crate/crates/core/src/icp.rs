//! Type-aware 2D ICP against the enriched lane cloud, and the lane-marking
//! emission factor computed from the corrected pose.

use alloc::collections::BTreeSet;
use alloc::vec::Vec;

use crate::error::Error;
use crate::geom::{heading_diff, normalize_heading, project_onto_polyline, PointXY, Pose};
use crate::graph::RoadId;
use crate::hmm::{emission_distance, emission_heading};
use crate::lane::{EnrichedMap, LaneType, MAX_SAMPLE_SPACING_M};

/// Minimum number of detection points handed to registration.
pub const MIN_DETECTIONS: usize = 6;
/// Minimum number of surviving correspondences per iteration.
pub const MIN_CORRESPONDENCES: usize = 3;
/// Floor of the normalized lane factor.
pub const LANE_FACTOR_FLOOR: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TypedPoint {
    pub position: PointXY,
    pub kind: LaneType,
}

impl TypedPoint {
    pub fn new(x: f64, y: f64, kind: LaneType) -> Self {
        TypedPoint { position: PointXY::new(x, y), kind }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IcpParams {
    /// Penalty (meters-equivalent) for a solid/dashed mismatch.
    pub f_type: f64,
    pub max_iterations: usize,
    /// Stop once an iteration moves the pose by less than this.
    pub convergence_tol: f64,
    /// Pairs costing more than this are discarded.
    pub max_correspondence: f64,
    /// Bound on the accumulated rotation of one run, degrees.
    pub max_rotation: f64,
    pub translation_only: bool,
}

impl Default for IcpParams {
    fn default() -> Self {
        IcpParams {
            f_type: 2.0,
            max_iterations: 30,
            convergence_tol: 0.01,
            max_correspondence: 3.0,
            max_rotation: 10.0,
            translation_only: false,
        }
    }
}

impl IcpParams {
    pub fn validate(&self) -> Result<(), Error> {
        if !(self.f_type >= 0.0) {
            return Err(Error::InvalidParams("f_type must be non-negative"));
        }
        if self.max_iterations < 1 {
            return Err(Error::InvalidParams("max_iterations must be at least 1"));
        }
        if !(self.convergence_tol > 0.0) {
            return Err(Error::InvalidParams("convergence_tol must be positive"));
        }
        if !(self.max_correspondence > 0.0) {
            return Err(Error::InvalidParams("max_correspondence must be positive"));
        }
        if !(self.max_rotation >= 0.0) {
            return Err(Error::InvalidParams("max_rotation must be non-negative"));
        }
        Ok(())
    }
}

/// `p -> R(rotation) p + translation`, rotation counterclockwise in the
/// east/north frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidTransform2D {
    /// Degrees in `(-180, 180]`.
    pub rotation: f64,
    pub translation: PointXY,
}

impl Default for RigidTransform2D {
    fn default() -> Self {
        RigidTransform2D::IDENTITY
    }
}

fn wrap_signed(deg: f64) -> f64 {
    let h = normalize_heading(deg);
    if h > 180.0 {
        h - 360.0
    } else {
        h
    }
}

impl RigidTransform2D {
    pub const IDENTITY: RigidTransform2D = RigidTransform2D { rotation: 0.0, translation: PointXY::new(0.0, 0.0) };

    pub fn new(rotation: f64, translation: PointXY) -> Self {
        RigidTransform2D { rotation: wrap_signed(rotation), translation }
    }

    pub fn apply(&self, p: PointXY) -> PointXY {
        let (s, c) = libm::sincos(self.rotation.to_radians());
        PointXY::new(c * p.x - s * p.y, s * p.x + c * p.y) + self.translation
    }

    /// `self ∘ other`: apply `other` first.
    pub fn compose(&self, other: &RigidTransform2D) -> RigidTransform2D {
        RigidTransform2D::new(self.rotation + other.rotation, self.apply(other.translation))
    }

    pub fn inverse(&self) -> RigidTransform2D {
        let r = RigidTransform2D::new(-self.rotation, PointXY::new(0.0, 0.0));
        let t = r.apply(self.translation);
        RigidTransform2D::new(-self.rotation, t * -1.0)
    }

    /// Moves a pose; compass headings turn clockwise, hence the sign flip.
    pub fn apply_pose(&self, pose: &Pose) -> Pose {
        Pose::new(self.apply(pose.position), pose.heading - self.rotation)
    }
}

pub fn type_loss(t_v: LaneType, t_m: LaneType, f_type: f64) -> f64 {
    if t_v == t_m {
        0.0
    } else {
        f_type
    }
}

/// Registration cost of pairing a detection point with a map point.
pub fn correspondence_cost(p_v: &TypedPoint, p_m: &TypedPoint, f_type: f64) -> f64 {
    let d = p_v.position - p_m.position;
    let lt = type_loss(p_v.kind, p_m.kind, f_type);
    libm::sqrt(d.x * d.x + d.y * d.y + lt * lt)
}

/// Mean squared planar distance of the kept pairs before and after the
/// alignment substep of one iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationStat {
    pub correspondences: usize,
    pub before: f64,
    pub after: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IcpOutcome {
    /// Correction in the map frame, mapping the initial detection placement
    /// onto the lane cloud.
    pub transform: RigidTransform2D,
    /// Mean correspondence cost after the final iteration.
    pub residual: f64,
    pub inliers: usize,
    pub iterations: Vec<IterationStat>,
}

impl IcpOutcome {
    pub fn corrected_pose(&self, init: &Pose) -> Pose {
        self.transform.apply_pose(init)
    }
}

struct Pair {
    src: PointXY,
    dst: PointXY,
    cost: f64,
}

/// Pairs each point with the closest location on the sampled marking
/// polylines (segments between consecutive samples of one lane), so the
/// sample spacing does not create spurious minima.
fn correspond(points: &[TypedPoint], enriched: &EnrichedMap, params: &IcpParams) -> Vec<Pair> {
    let cloud = enriched.cloud();
    let reach = params.max_correspondence + MAX_SAMPLE_SPACING_M;
    points
        .iter()
        .filter_map(|p| {
            let mut best: Option<(f64, usize, PointXY)> = None;
            let mut consider = |i: usize, q: PointXY| {
                let m = TypedPoint { position: q, kind: cloud[i].kind };
                let c = correspondence_cost(p, &m, params.f_type);
                if c <= params.max_correspondence && best.is_none_or(|(bc, bi, _)| c < bc || (c == bc && i < bi)) {
                    best = Some((c, i, q));
                }
            };
            enriched.visit_cloud_near(p.position, reach, |i| {
                let a = cloud[i].position;
                match cloud.get(i + 1).filter(|n| n.lane == cloud[i].lane) {
                    Some(n) => consider(i, closest_on_segment(a, n.position, p.position)),
                    None => consider(i, a),
                }
            });
            best.map(|(cost, _, q)| Pair { src: p.position, dst: q, cost })
        })
        .collect()
}

fn closest_on_segment(a: PointXY, b: PointXY, p: PointXY) -> PointXY {
    let ab = b - a;
    let len2 = ab.dot(ab);
    if len2 == 0.0 {
        return a;
    }
    let t = ((p - a).dot(ab) / len2).clamp(0.0, 1.0);
    a + ab * t
}

fn mean_sq(pairs: &[Pair], t: &RigidTransform2D) -> f64 {
    pairs
        .iter()
        .map(|p| {
            let d = t.apply(p.src) - p.dst;
            d.dot(d)
        })
        .sum::<f64>()
        / pairs.len() as f64
}

/// Least-squares rigid alignment of `src` onto `dst`, with the rotation
/// clamped to `[rot_lo, rot_hi]` degrees.
fn align(pairs: &[Pair], translation_only: bool, rot_lo: f64, rot_hi: f64) -> RigidTransform2D {
    let n = pairs.len() as f64;
    let cs = pairs.iter().fold(PointXY::default(), |a, p| a + p.src) * (1.0 / n);
    let cd = pairs.iter().fold(PointXY::default(), |a, p| a + p.dst) * (1.0 / n);
    let rotation = if translation_only {
        0.0
    } else {
        let (mut sin_sum, mut cos_sum) = (0.0, 0.0);
        for p in pairs {
            let a = p.src - cs;
            let b = p.dst - cd;
            cos_sum += a.dot(b);
            sin_sum += a.x * b.y - a.y * b.x;
        }
        libm::atan2(sin_sum, cos_sum).to_degrees().clamp(rot_lo, rot_hi)
    };
    let r = RigidTransform2D::new(rotation, PointXY::default());
    RigidTransform2D { rotation: r.rotation, translation: cd - r.apply(cs) }
}

/// Registers vehicle-frame detections against the lane cloud, starting
/// from `init_pose`.
pub fn icp_register(detections: &[TypedPoint], enriched: &EnrichedMap, init_pose: &Pose, params: &IcpParams) -> Result<IcpOutcome, Error> {
    if detections.len() < MIN_DETECTIONS {
        return Err(Error::RegistrationDegenerate { correspondences: 0 });
    }
    let world: Vec<TypedPoint> = detections.iter().map(|d| TypedPoint { position: init_pose.to_world(d.position), kind: d.kind }).collect();
    let mut total = RigidTransform2D::IDENTITY;
    let mut iterations = Vec::new();
    let mut moved: Vec<TypedPoint> = world.clone();
    for _ in 0..params.max_iterations {
        let pairs = correspond(&moved, enriched, params);
        if pairs.len() < MIN_CORRESPONDENCES {
            return Err(Error::RegistrationDegenerate { correspondences: pairs.len() });
        }
        let step = align(&pairs, params.translation_only, -params.max_rotation - total.rotation, params.max_rotation - total.rotation);
        iterations.push(IterationStat {
            correspondences: pairs.len(),
            before: mean_sq(&pairs, &RigidTransform2D::IDENTITY),
            after: mean_sq(&pairs, &step),
        });
        let pose_now = total.apply(init_pose.position);
        let change = step.apply(pose_now).distance(pose_now);
        total = step.compose(&total);
        for (m, w) in moved.iter_mut().zip(&world) {
            m.position = total.apply(w.position);
        }
        if change < params.convergence_tol {
            break;
        }
    }
    let pairs = correspond(&moved, enriched, params);
    if pairs.len() < MIN_CORRESPONDENCES {
        return Err(Error::RegistrationDegenerate { correspondences: pairs.len() });
    }
    let residual = pairs.iter().map(|p| p.cost).sum::<f64>() / pairs.len() as f64;
    Ok(IcpOutcome { transform: total, residual, inliers: pairs.len(), iterations })
}

/// Multi-start search around the initial pose for large positioning errors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelocalizationParams {
    /// Lateral half-width of the seed fan, meters. Zero runs a single start.
    pub lateral_range: f64,
    pub lateral_step: f64,
    /// Required share of detections with a correspondence.
    pub min_inlier_ratio: f64,
}

impl Default for RelocalizationParams {
    fn default() -> Self {
        RelocalizationParams { lateral_range: 15.0, lateral_step: 1.75, min_inlier_ratio: 0.6 }
    }
}

/// Runs [`icp_register`] from seeds spread across the heading's normal and
/// keeps the run with most inliers, then lowest residual, then the seed
/// closest to the initial pose.
pub fn relocalize(
    detections: &[TypedPoint],
    enriched: &EnrichedMap,
    init_pose: &Pose,
    params: &IcpParams,
    search: &RelocalizationParams,
) -> Result<IcpOutcome, Error> {
    let fwd = PointXY::from_heading(init_pose.heading);
    let left = PointXY::new(-fwd.y, fwd.x);
    let steps = if search.lateral_range > 0.0 && search.lateral_step > 0.0 {
        libm::floor(search.lateral_range / search.lateral_step) as i64
    } else {
        0
    };
    let mut offsets: Vec<i64> = (-steps..=steps).collect();
    offsets.sort_by_key(|k| (k.abs(), *k));
    let mut best: Option<(IcpOutcome, f64)> = None;
    let mut last_err = Error::RegistrationDegenerate { correspondences: 0 };
    for k in offsets {
        let shift = left * (k as f64 * search.lateral_step);
        let seed = Pose::new(init_pose.position + shift, init_pose.heading);
        match icp_register(detections, enriched, &seed, params) {
            Ok(mut out) => {
                out.transform = out.transform.compose(&RigidTransform2D::new(0.0, shift));
                let moved = out.transform.apply(init_pose.position).distance(init_pose.position);
                let better = match &best {
                    None => true,
                    Some((b, bm)) => {
                        out.inliers > b.inliers
                            || (out.inliers == b.inliers
                                && (out.residual < b.residual - 1e-3 || (out.residual <= b.residual + 1e-3 && moved < bm - 1e-6)))
                    }
                };
                if better {
                    best = Some((out, moved));
                }
            }
            Err(e) => last_err = e,
        }
    }
    match best {
        Some((out, _)) if out.inliers as f64 >= search.min_inlier_ratio * detections.len() as f64 => Ok(out),
        Some((out, _)) => Err(Error::RegistrationDegenerate { correspondences: out.inliers }),
        None => Err(last_err),
    }
}

/// One nearby lane marking as seen from the vehicle pose.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LaneContext {
    pub lane: i64,
    pub distance: f64,
    pub delta_theta: f64,
}

/// Lane markings whose polyline lies within `radius` of the pose.
pub fn lane_context(pose: &Pose, enriched: &EnrichedMap, radius: f64) -> Vec<LaneContext> {
    let mut ids = BTreeSet::new();
    let cloud = enriched.cloud();
    enriched.visit_cloud_near(pose.position, radius + MAX_SAMPLE_SPACING_M, |i| {
        ids.insert(cloud[i].lane);
    });
    ids.into_iter()
        .filter_map(|id| {
            let lane = enriched.lane(id)?;
            let pr = project_onto_polyline(&lane.positions(), pose.position);
            (pr.distance <= radius).then(|| LaneContext {
                lane: id,
                distance: pr.distance,
                delta_theta: heading_diff(pr.road_heading, pose.heading),
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LaneFactorParams {
    pub sigma: f64,
    pub eps_heading: f64,
    pub context_radius: f64,
}

impl Default for LaneFactorParams {
    fn default() -> Self {
        LaneFactorParams { sigma: 3.0, eps_heading: 1e-4, context_radius: 10.0 }
    }
}

/// Log lane factor per candidate (same order as `candidates`), normalized
/// over the candidates. All zeros when no lane marking is nearby.
pub fn lane_emission_factor(pose: &Pose, enriched: &EnrichedMap, candidates: &[RoadId], params: &LaneFactorParams) -> Vec<f64> {
    let context = lane_context(pose, enriched, params.context_radius);
    lane_factor_from_context(&context, |lane, road| enriched.association(lane, road), candidates, params)
}

/// Same as [`lane_emission_factor`] for an explicit context and
/// association table.
pub fn lane_factor_from_context(
    context: &[LaneContext],
    association: impl Fn(i64, RoadId) -> f64,
    candidates: &[RoadId],
    params: &LaneFactorParams,
) -> Vec<f64> {
    let weights: Vec<f64> = context
        .iter()
        .map(|c| libm::exp(emission_distance(c.distance, params.sigma) + emission_heading(c.delta_theta, params.eps_heading)))
        .collect();
    let mass: Vec<f64> = candidates.iter().map(|&r| context.iter().zip(&weights).map(|(c, w)| association(c.lane, r) * w).sum()).collect();
    let total: f64 = mass.iter().sum();
    if !(total > 0.0) {
        return alloc::vec![0.0; candidates.len()];
    }
    mass.iter().map(|m| libm::log((m / total).max(LANE_FACTOR_FLOOR))).collect()
}
