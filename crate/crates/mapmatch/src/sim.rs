//! Seeded synthetic multilevel network, drives, lane detections and
//! scenario streams.
//!
//! The network is an east-west avenue split into blocks, crossed by
//! north-south streets, with an elevated expressway running exactly above
//! the avenue. Ramps leave and join the expressway at a small angle on the
//! south side, run parallel for a while, then merge with the other deck.

use mapmatch_core::geom::{bearing, offset_polyline, polyline_length, PointXY, Pose};
use mapmatch_core::graph::{RoadClass, RoadGraph, RoadId, RoadSpec};
use mapmatch_core::icp::TypedPoint;
use mapmatch_core::lane::{LaneMarking, LaneType};
use mapmatch_core::metrics::GroundTruth;
use mapmatch_core::pipeline::Observation;
use mapmatch_core::scenario::ScenarioProbs;
use mapmatch_core::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

/// Origin of the local frame of generated maps (WGS84 lat, lon).
pub const SIM_ORIGIN: (f64, f64) = (31.23, 121.47);
const LANE_SAMPLE_M: f64 = 1.0;
const CROSS_STREET_M: f64 = 150.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkConfig {
    pub n_blocks: usize,
    pub block_length: f64,
    /// Number of blocks covered by the expressway, from the west end.
    pub elevated_span: usize,
    pub ramp_spacing: f64,
    pub ramp_length: f64,
    /// Lateral distance between a ramp and the main carriageway.
    pub ramp_offset: f64,
    /// Length over which a ramp diverges from or merges into a deck.
    pub ramp_taper: f64,
    /// Marking polylines per road, centered on the centerline.
    pub lane_count: usize,
    pub lane_width: f64,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        NetworkConfig {
            n_blocks: 8,
            block_length: 200.0,
            elevated_span: 8,
            ramp_spacing: 400.0,
            ramp_length: 160.0,
            ramp_offset: 8.0,
            ramp_taper: 40.0,
            lane_count: 2,
            lane_width: 3.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseConfig {
    /// White position noise per axis, meters.
    pub gnss_sigma: f64,
    /// Random-walk bias increment per axis, meters per sqrt(second).
    pub bias_walk: f64,
    pub heading_sigma: f64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        NoiseConfig { gnss_sigma: 10.0, bias_walk: 1.0, heading_sigma: 2.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectionConfig {
    /// Probability that a frame has no detections.
    pub dropout: f64,
    pub point_noise: f64,
    pub spacing: f64,
    pub min_range: f64,
    pub max_range: f64,
    pub lateral: f64,
}

impl Default for DetectionConfig {
    fn default() -> Self {
        DetectionConfig { dropout: 0.05, point_noise: 0.2, spacing: 2.0, min_range: 3.0, max_range: 30.0, lateral: 6.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RouteKind {
    /// Expressway, off-ramp, avenue, on-ramp, expressway.
    Mixed,
    /// Expressway end to end.
    Elevated,
    /// Avenue end to end.
    Surface,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub seed: u64,
    pub network: NetworkConfig,
    pub noise: NoiseConfig,
    pub scenario_accuracy: f64,
    /// Probability mass the classifier puts on the class it reports.
    pub scenario_confidence: f64,
    pub detection: DetectionConfig,
    pub speed: f64,
    pub route: RouteKind,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            seed: 0,
            network: NetworkConfig::default(),
            noise: NoiseConfig::default(),
            scenario_accuracy: 0.9,
            scenario_confidence: 0.8,
            detection: DetectionConfig::default(),
            speed: 15.0,
            route: RouteKind::Mixed,
        }
    }
}

fn check(ok: bool, msg: &'static str) -> Result<(), Error> {
    if ok {
        Ok(())
    } else {
        Err(Error::InvalidParams(msg))
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), Error> {
        let n = &self.network;
        check(n.n_blocks >= 1, "n_blocks must be at least 1")?;
        check(n.elevated_span <= n.n_blocks, "elevated_span exceeds n_blocks")?;
        for v in [n.block_length, n.ramp_spacing, n.ramp_length, n.ramp_offset, n.ramp_taper, n.lane_width, self.speed] {
            check(v > 0.0 && v.is_finite(), "lengths and speed must be positive")?;
        }
        check(2.0 * n.ramp_taper < n.ramp_length, "ramp_length must exceed twice the taper")?;
        check(n.ramp_length < n.ramp_spacing, "ramp_length must be below ramp_spacing")?;
        check(n.lane_count >= 1, "lane_count must be at least 1")?;
        let d = &self.detection;
        for v in [self.noise.gnss_sigma, self.noise.bias_walk, self.noise.heading_sigma, d.point_noise] {
            check(v >= 0.0 && v.is_finite(), "noise levels must be non-negative")?;
        }
        for v in [self.scenario_accuracy, self.scenario_confidence, d.dropout] {
            check((0.0..=1.0).contains(&v), "rates must lie in [0, 1]")?;
        }
        check(d.spacing > 0.0 && d.max_range > d.min_range && d.lateral > 0.0, "invalid detection window")?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Deck {
    Surface,
    Elevated,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RoadKind {
    Avenue,
    CrossStreet,
    Expressway,
    OffRamp,
    OnRamp,
}

struct Proto {
    id: i64,
    line: Vec<PointXY>,
    class: RoadClass,
    level: i32,
    from: Deck,
    to: Deck,
    kind: RoadKind,
    /// Part of the centerline that carries lane markings.
    marked: Vec<PointXY>,
}

/// A generated network with its lane markings.
#[derive(Debug, Clone)]
pub struct Network {
    pub graph: RoadGraph,
    pub lanes: Vec<LaneMarking>,
    /// Generating road of every lane, by lane id.
    pub lane_roads: Vec<(i64, RoadId)>,
    pub kinds: Vec<(RoadId, RoadKind)>,
}

impl Network {
    pub fn kind(&self, id: RoadId) -> Option<RoadKind> {
        self.kinds.iter().find(|(r, _)| *r == id).map(|(_, k)| *k)
    }

    pub fn roads_of(&self, kind: RoadKind) -> Vec<RoadId> {
        self.kinds.iter().filter(|(_, k)| *k == kind).map(|(r, _)| *r).collect()
    }
}

fn p(x: f64, y: f64) -> PointXY {
    PointXY::new(x, y)
}

fn sorted_cuts(mut xs: Vec<f64>) -> Vec<f64> {
    xs.sort_by(f64::total_cmp);
    xs.dedup_by(|a, b| (*a - *b).abs() < 1e-6);
    xs
}

/// Marking polylines of one road: outer markings solid, inner dashed.
fn markings(line: &[PointXY], count: usize, width: f64) -> Vec<(Vec<PointXY>, LaneType)> {
    (0..count)
        .map(|j| {
            let offset = (j as f64 - (count as f64 - 1.0) / 2.0) * width;
            let kind = if j == 0 || j + 1 == count { LaneType::Solid } else { LaneType::Dashed };
            (offset_polyline(line, offset), kind)
        })
        .collect()
}

pub fn generate_network(cfg: &NetworkConfig) -> Result<Network, Error> {
    let b = cfg.block_length;
    let ave_end = cfg.n_blocks as f64 * b;
    let exp_end = cfg.elevated_span as f64 * b;
    let (len, taper, off) = (cfg.ramp_length, cfg.ramp_taper, cfg.ramp_offset);

    // ramp sites alternate off / on along the expressway
    let mut ramps = Vec::new();
    let mut k = 1;
    while k as f64 * cfg.ramp_spacing + len <= exp_end + 1e-9 {
        let s = k as f64 * cfg.ramp_spacing;
        ramps.push((s, if k % 2 == 1 { RoadKind::OffRamp } else { RoadKind::OnRamp }));
        k += 1;
    }

    let mut ave_cuts: Vec<f64> = (0..=cfg.n_blocks).map(|i| i as f64 * b).collect();
    let mut exp_cuts = vec![0.0, exp_end];
    for &(s, kind) in &ramps {
        match kind {
            RoadKind::OffRamp => {
                exp_cuts.push(s);
                ave_cuts.push(s + len);
            }
            _ => {
                ave_cuts.push(s);
                exp_cuts.push(s + len);
            }
        }
    }
    let ave_cuts = sorted_cuts(ave_cuts);
    let exp_cuts = if cfg.elevated_span > 0 { sorted_cuts(exp_cuts) } else { vec![] };

    let mut protos: Vec<Proto> = Vec::new();
    for (i, w) in ave_cuts.windows(2).enumerate() {
        let line = vec![p(w[0], 0.0), p(w[1], 0.0)];
        protos.push(Proto {
            id: 1 + i as i64,
            marked: line.clone(),
            line,
            class: RoadClass::Ordinary,
            level: 0,
            from: Deck::Surface,
            to: Deck::Surface,
            kind: RoadKind::Avenue,
        });
    }
    for i in 1..cfg.n_blocks {
        let x = i as f64 * b;
        for (j, line) in [vec![p(x, -CROSS_STREET_M), p(x, 0.0)], vec![p(x, 0.0), p(x, CROSS_STREET_M)]].into_iter().enumerate() {
            protos.push(Proto {
                id: 1000 + 2 * i as i64 + j as i64,
                marked: line.clone(),
                line,
                class: RoadClass::Ordinary,
                level: 0,
                from: Deck::Surface,
                to: Deck::Surface,
                kind: RoadKind::CrossStreet,
            });
        }
    }
    for (i, w) in exp_cuts.windows(2).enumerate() {
        let line = vec![p(w[0], 0.0), p(w[1], 0.0)];
        protos.push(Proto {
            id: 2001 + i as i64,
            marked: line.clone(),
            line,
            class: RoadClass::Expressway,
            level: 1,
            from: Deck::Elevated,
            to: Deck::Elevated,
            kind: RoadKind::Expressway,
        });
    }
    for (i, &(s, kind)) in ramps.iter().enumerate() {
        let line = vec![p(s, 0.0), p(s + taper, -off), p(s + len - taper, -off), p(s + len, 0.0)];
        let (from, to) = if kind == RoadKind::OffRamp { (Deck::Elevated, Deck::Surface) } else { (Deck::Surface, Deck::Elevated) };
        protos.push(Proto {
            id: 3001 + i as i64,
            marked: vec![p(s + taper, -off), p(s + len - taper, -off)],
            line,
            class: RoadClass::Expressway,
            level: 1,
            from,
            to,
            kind,
        });
    }
    let _ = ave_end;

    let specs: Vec<RoadSpec> = protos
        .iter()
        .map(|r| {
            let end = *r.line.last().unwrap();
            let successors =
                protos.iter().filter(|s| s.id != r.id && s.from == r.to && s.line[0].distance(end) < 1e-6).map(|s| RoadId(s.id)).collect();
            RoadSpec { id: RoadId(r.id), polyline: r.line.clone(), class: r.class, level: r.level, successors: Some(successors) }
        })
        .collect();
    let graph = RoadGraph::new(specs, SIM_ORIGIN)?;

    let mut lanes = Vec::new();
    let mut lane_roads = Vec::new();
    for r in &protos {
        let ramp = matches!(r.kind, RoadKind::OffRamp | RoadKind::OnRamp);
        let full = markings(&r.line, cfg.lane_count, cfg.lane_width);
        for (j, (line, kind)) in markings(&r.marked, cfg.lane_count, cfg.lane_width).into_iter().enumerate() {
            // a ramp's edge facing the main carriageway is dashed and starts at
            // the gore; its outer edges run on through the tapers
            let inner = j + 1 == cfg.lane_count;
            let kind = if ramp && inner { LaneType::Dashed } else { kind };
            let line = if ramp && !inner { full[j].0.clone() } else { line };
            let id = lanes.len() as i64 + 1;
            lanes.push(LaneMarking::from_polyline(id, &line, kind, LANE_SAMPLE_M)?);
            lane_roads.push((id, RoadId(r.id)));
        }
    }
    let kinds = protos.iter().map(|r| (RoadId(r.id), r.kind)).collect();
    Ok(Network { graph, lanes, lane_roads, kinds })
}

/// Road sequence of a route through the generated network.
pub fn plan_route(net: &Network, kind: RouteKind) -> Result<Vec<RoadId>, Error> {
    let start = match kind {
        RouteKind::Surface => net.roads_of(RoadKind::Avenue).first().copied(),
        _ => net.roads_of(RoadKind::Expressway).first().copied(),
    }
    .ok_or(Error::InvalidParams("network has no road to start the route on"))?;
    let mut route = vec![start];
    let (mut took_off, mut took_on) = (false, false);
    loop {
        let cur = net.graph.road(*route.last().unwrap())?;
        let rank = |r: &RoadId| -> Option<u8> {
            let k = net.kind(*r)?;
            match (kind, k) {
                (_, RoadKind::CrossStreet) => None,
                (RouteKind::Mixed, RoadKind::OffRamp) if !took_off => Some(0),
                (RouteKind::Mixed, RoadKind::OnRamp) if took_off && !took_on => Some(0),
                (_, RoadKind::OffRamp | RoadKind::OnRamp) => None,
                _ => Some(1),
            }
        };
        let next = cur.successors.iter().filter_map(|r| rank(r).map(|k| (k, *r))).min();
        match next {
            Some((_, r)) => {
                match net.kind(r) {
                    Some(RoadKind::OffRamp) => took_off = true,
                    Some(RoadKind::OnRamp) => took_on = true,
                    _ => {}
                }
                route.push(r);
            }
            None => break,
        }
    }
    Ok(route)
}

/// One simulated drive.
#[derive(Debug, Clone)]
pub struct Drive {
    pub observations: Vec<Observation>,
    pub truth: GroundTruth,
    pub true_poses: Vec<Pose>,
    pub scenario: Vec<ScenarioProbs>,
}

fn normal(sigma: f64) -> Normal<f64> {
    Normal::new(0.0, sigma).expect("validated sigma")
}

/// Points along every marking, `spacing` apart from a common phase,
/// inside the forward detection window of `pose`, in vehicle frame.
fn render_detections(lanes: &[LaneMarking], pose: &Pose, cfg: &DetectionConfig, phase: f64, rng: &mut ChaCha8Rng) -> Vec<TypedPoint> {
    let reach = cfg.max_range.hypot(cfg.lateral);
    let noise = normal(cfg.point_noise);
    let mut out = Vec::new();
    for lane in lanes {
        let pts = lane.points();
        let kind = pts[0].kind;
        let mut arc = 0.0;
        for w in pts.windows(2) {
            let (a, b) = (w[0].position, w[1].position);
            let seg = a.distance(b);
            let near = pose.position.distance(a).min(pose.position.distance(b)) <= reach + seg;
            if near && seg > 0.0 {
                let first = ((arc - phase) / cfg.spacing).ceil();
                let mut s = phase + first * cfg.spacing;
                while s < arc + seg {
                    let q = a + (b - a) * ((s - arc) / seg);
                    let v = pose.to_vehicle(q);
                    if v.x >= cfg.min_range && v.x <= cfg.max_range && v.y.abs() <= cfg.lateral {
                        let jitter = p(noise.sample(rng), noise.sample(rng));
                        out.push(TypedPoint { position: v + jitter, kind });
                    }
                    s += cfg.spacing;
                }
            }
            arc += seg;
        }
    }
    out
}

fn class_scenario(t: f64, class: RoadClass, cfg: &SimConfig, rng: &mut ChaCha8Rng) -> ScenarioProbs {
    const CLASSES: [RoadClass; 3] = [RoadClass::Ordinary, RoadClass::Expressway, RoadClass::Tunnel];
    let reported = if rng.random::<f64>() < cfg.scenario_accuracy {
        class
    } else {
        let wrong: Vec<RoadClass> = CLASSES.iter().copied().filter(|c| *c != class).collect();
        wrong[rng.random_range(0..wrong.len())]
    };
    let rest = (1.0 - cfg.scenario_confidence) / 2.0;
    let mass = |c: RoadClass| if c == reported { cfg.scenario_confidence } else { rest };
    ScenarioProbs::new(t, mass(RoadClass::Ordinary), mass(RoadClass::Expressway), mass(RoadClass::Tunnel))
        .unwrap_or_else(|_| ScenarioProbs::uniform(t))
}

/// Drives `route` at constant speed, sampling at 1 Hz.
pub fn simulate_drive(net: &Network, route: &[RoadId], cfg: &SimConfig) -> Result<Drive, Error> {
    cfg.validate()?;
    if route.is_empty() {
        return Err(Error::InvalidParams("empty route"));
    }
    for w in route.windows(2) {
        if !net.graph.road(w[0])?.successors.contains(&w[1]) {
            return Err(Error::InvalidParams("route is not connected"));
        }
    }
    // independent streams, so that map geometry (which changes how many
    // detection draws a frame takes) never shifts the positioning noise
    let stream = |n: u64| {
        let mut r = ChaCha8Rng::seed_from_u64(cfg.seed);
        r.set_stream(n);
        r
    };
    let (mut rng, mut det_rng, mut scen_rng) = (stream(0), stream(1), stream(2));
    // concatenated route geometry with the road owning each vertex run
    let mut pieces: Vec<(RoadId, f64, f64)> = Vec::new();
    let mut line: Vec<PointXY> = Vec::new();
    let mut total = 0.0;
    for &r in route {
        let road = net.graph.road(r)?;
        let l = road.length();
        pieces.push((r, total, total + l));
        if line.is_empty() {
            line.extend_from_slice(&road.polyline);
        } else {
            line.extend_from_slice(&road.polyline[1..]);
        }
        total += l;
    }
    debug_assert!((polyline_length(&line) - total).abs() < 1e-6);

    let gnss = normal(cfg.noise.gnss_sigma);
    let walk = normal(cfg.noise.bias_walk);
    let head = normal(cfg.noise.heading_sigma);
    let mut bias = p(0.0, 0.0);
    let mut drive = Drive {
        observations: Vec::new(),
        truth: GroundTruth { t: Vec::new(), roads: Vec::new() },
        true_poses: Vec::new(),
        scenario: Vec::new(),
    };
    let mut k = 0usize;
    loop {
        let s = 1.0 + cfg.speed * k as f64;
        if s > total - 1.0 {
            break;
        }
        let t = k as f64;
        let (pos, heading) = point_at(&line, s);
        let &(road, _, _) = pieces.iter().find(|(_, a, b)| s >= *a && s < *b).unwrap_or(pieces.last().unwrap());
        let truth_pose = Pose::new(pos, heading);
        bias = bias + p(walk.sample(&mut rng), walk.sample(&mut rng));
        let observed = Pose::new(pos + bias + p(gnss.sample(&mut rng), gnss.sample(&mut rng)), heading + head.sample(&mut rng));
        let dropped = det_rng.random::<f64>() < cfg.detection.dropout;
        let phase = det_rng.random_range(0.0..cfg.detection.spacing);
        let det = render_detections(&net.lanes, &truth_pose, &cfg.detection, phase, &mut det_rng);
        let class = net.graph.road(road)?.class;
        let scenario = class_scenario(t, class, cfg, &mut scen_rng);
        drive.observations.push(Observation { t, pose: observed, detections: if dropped { None } else { Some(det) }, scenario: None });
        drive.scenario.push(scenario);
        drive.truth.t.push(t);
        drive.truth.roads.push(road);
        drive.true_poses.push(truth_pose);
        k += 1;
    }
    Ok(drive)
}

/// Position and heading at arc length `s` along `line`.
fn point_at(line: &[PointXY], s: f64) -> (PointXY, f64) {
    let mut acc = 0.0;
    for w in line.windows(2) {
        let l = w[0].distance(w[1]);
        if s <= acc + l && l > 0.0 {
            return (w[0] + (w[1] - w[0]) * ((s - acc) / l), bearing(w[0], w[1]));
        }
        acc += l;
    }
    let n = line.len();
    (line[n - 1], bearing(line[n - 2], line[n - 1]))
}

/// Generated network, route and drive for one configuration.
#[derive(Debug, Clone)]
pub struct SimBundle {
    pub network: Network,
    pub route: Vec<RoadId>,
    pub drive: Drive,
}

pub fn simulate(cfg: &SimConfig) -> Result<SimBundle, Error> {
    cfg.validate()?;
    let network = generate_network(&cfg.network)?;
    let route = plan_route(&network, cfg.route)?;
    let drive = simulate_drive(&network, &route, cfg)?;
    Ok(SimBundle { network, route, drive })
}

/// Parameters of the road-split fixture: a main road with a ramp that
/// leaves at a small angle and runs parallel to it, and a GNSS drift
/// pulling the ramp trajectory towards the main road.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitConfig {
    pub seed: u64,
    pub ramp_offset: f64,
    pub drift: f64,
    pub gnss_sigma: f64,
    pub detection: DetectionConfig,
    pub speed: f64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        SplitConfig {
            seed: 0,
            ramp_offset: 6.0,
            drift: 3.5,
            gnss_sigma: 0.5,
            detection: DetectionConfig { dropout: 0.0, ..DetectionConfig::default() },
            speed: 15.0,
        }
    }
}

pub const SPLIT_MAIN_BEFORE: RoadId = RoadId(1);
pub const SPLIT_MAIN_AFTER: RoadId = RoadId(2);
pub const SPLIT_RAMP: RoadId = RoadId(3);

/// Road-split fixture; the vehicle drives onto the ramp.
pub fn split_fixture(cfg: &SplitConfig) -> Result<SimBundle, Error> {
    let off = cfg.ramp_offset;
    let mk = |id: i64, line: Vec<PointXY>, class| RoadSpec { id: RoadId(id), polyline: line, class, level: 0, successors: None };
    let graph = RoadGraph::new(
        vec![
            mk(1, vec![p(0.0, 0.0), p(200.0, 0.0)], RoadClass::Ordinary),
            mk(2, vec![p(200.0, 0.0), p(600.0, 0.0)], RoadClass::Ordinary),
            mk(3, vec![p(200.0, 0.0), p(240.0, -off), p(600.0, -off)], RoadClass::Ordinary),
        ],
        SIM_ORIGIN,
    )?;
    let marked = [
        (RoadId(1), vec![p(0.0, 0.0), p(200.0, 0.0)]),
        (RoadId(2), vec![p(200.0, 0.0), p(600.0, 0.0)]),
        (RoadId(3), vec![p(240.0, -off), p(600.0, -off)]),
    ];
    let mut lanes = Vec::new();
    let mut lane_roads = Vec::new();
    for (road, line) in &marked {
        for (j, (l, kind)) in markings(line, 2, 3.5).into_iter().enumerate() {
            // the ramp's left edge is dashed where it runs beside the main road
            let kind = if *road == SPLIT_RAMP && j == 1 { LaneType::Dashed } else { kind };
            let id = lanes.len() as i64 + 1;
            lanes.push(LaneMarking::from_polyline(id, &l, kind, LANE_SAMPLE_M)?);
            lane_roads.push((id, *road));
        }
    }
    let kinds = vec![(RoadId(1), RoadKind::Avenue), (RoadId(2), RoadKind::Avenue), (RoadId(3), RoadKind::OffRamp)];
    let network = Network { graph, lanes, lane_roads, kinds };
    let route = vec![SPLIT_MAIN_BEFORE, SPLIT_RAMP];
    let sim = SimConfig {
        seed: cfg.seed,
        noise: NoiseConfig { gnss_sigma: cfg.gnss_sigma, bias_walk: 0.0, heading_sigma: 1.0 },
        detection: cfg.detection.clone(),
        speed: cfg.speed,
        scenario_accuracy: 1.0,
        ..SimConfig::default()
    };
    let mut drive = simulate_drive(&network, &route, &sim)?;
    // planted drift towards the main road, growing over the taper
    for (o, tp) in drive.observations.iter_mut().zip(&drive.true_poses) {
        let depth = (-tp.position.y / off).clamp(0.0, 1.0);
        o.pose.position = o.pose.position + p(0.0, cfg.drift * depth);
    }
    Ok(SimBundle { network, route, drive })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn marking_offsets() {
        let m = markings(&[p(0.0, 0.0), p(100.0, 0.0)], 2, 3.5);
        assert_eq!(m[0].0[0], p(0.0, -1.75));
        assert_eq!(m[1].0[0], p(0.0, 1.75));
        assert!(m.iter().all(|(_, k)| *k == LaneType::Solid));
        let m = markings(&[p(0.0, 0.0), p(100.0, 0.0)], 3, 3.5);
        assert_eq!(m[1].1, LaneType::Dashed);
    }

    #[test]
    fn network_shape() {
        let net = generate_network(&NetworkConfig::default()).unwrap();
        let ave = net.roads_of(RoadKind::Avenue);
        let exp = net.roads_of(RoadKind::Expressway);
        assert!(!exp.is_empty() && !ave.is_empty());
        assert!(exp.iter().min() > ave.iter().max());
        // the expressway runs exactly above the avenue
        for e in &exp {
            for q in &net.graph.road(*e).unwrap().polyline {
                assert!(q.y.abs() < 1.0);
            }
        }
        // no deck change without a ramp
        for e in &exp {
            for s in &net.graph.road(*e).unwrap().successors {
                assert_ne!(net.kind(*s), Some(RoadKind::Avenue));
            }
        }
        assert_eq!(net.roads_of(RoadKind::OffRamp).len(), 2);
        assert_eq!(net.roads_of(RoadKind::OnRamp).len(), 1);
    }

    #[test]
    fn mixed_route_changes_deck_twice() {
        let net = generate_network(&NetworkConfig::default()).unwrap();
        let route = plan_route(&net, RouteKind::Mixed).unwrap();
        let kinds: Vec<RoadKind> = route.iter().map(|r| net.kind(*r).unwrap()).collect();
        assert_eq!(kinds.first(), Some(&RoadKind::Expressway));
        assert_eq!(kinds.iter().filter(|k| **k == RoadKind::OffRamp).count(), 1);
        assert_eq!(kinds.iter().filter(|k| **k == RoadKind::OnRamp).count(), 1);
        assert_eq!(kinds.last(), Some(&RoadKind::Expressway));
    }

    #[test]
    fn drive_is_seeded_and_on_network() {
        let cfg = SimConfig::default();
        let a = simulate(&cfg).unwrap();
        let b = simulate(&cfg).unwrap();
        assert_eq!(a.drive.observations, b.drive.observations);
        assert_eq!(a.drive.truth, b.drive.truth);
        for (r, tp) in a.drive.truth.roads.iter().zip(&a.drive.true_poses) {
            assert!(a.network.graph.road(*r).unwrap().project(tp.position).distance < 1e-6);
        }
        let c = simulate(&SimConfig { seed: 1, ..cfg }).unwrap();
        assert_ne!(a.drive.observations, c.drive.observations);
    }

    #[test]
    fn full_dropout_empties_detections() {
        let cfg = SimConfig { detection: DetectionConfig { dropout: 1.0, ..Default::default() }, ..Default::default() };
        let s = simulate(&cfg).unwrap();
        assert!(s.drive.observations.iter().all(|o| o.detections.is_none()));
    }

    #[test]
    fn detections_sit_on_markings_without_noise() {
        let cfg = SimConfig {
            noise: NoiseConfig { gnss_sigma: 0.0, bias_walk: 0.0, heading_sigma: 0.0 },
            detection: DetectionConfig { point_noise: 0.0, dropout: 0.0, ..Default::default() },
            ..Default::default()
        };
        let s = simulate(&cfg).unwrap();
        let o = &s.drive.observations[10];
        let det = o.detections.as_ref().unwrap();
        assert!(det.len() > 10);
        for d in det {
            let w = o.pose.to_world(d.position);
            let best = s
                .network
                .lanes
                .iter()
                .map(|l| mapmatch_core::geom::project_onto_polyline(&l.positions(), w).distance)
                .fold(f64::INFINITY, f64::min);
            assert!(best < 1e-6);
        }
    }
}
