//! On-disk formats: the GeoJSON road map, JSONL streams (lanes,
//! detections, scenario, trajectory, ground truth, match records), the
//! enriched map document and the match overlay.
//!
//! Every writer is canonical: reading a written file and writing it again
//! reproduces the same bytes.

use std::io::Write;
use std::path::Path;

use mapmatch_core::geom::{project_wgs84, unproject_wgs84, PointXY, Pose};
use mapmatch_core::graph::{RoadClass, RoadGraph, RoadId, RoadSpec};
use mapmatch_core::icp::TypedPoint;
use mapmatch_core::lane::{EnrichedMap, LaneAssociation, LaneMarking, LanePoint, LaneSource, LaneType};
use mapmatch_core::metrics::GroundTruth;
use mapmatch_core::pipeline::{derive_headings, MatchRecord, Observation, Registration};
use mapmatch_core::scenario::ScenarioProbs;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

/// Spacing used to sample lanes given as B-spline control points.
pub const BSPLINE_SAMPLE_M: f64 = 1.0;
pub const ENRICHED_FORMAT: &str = "enriched-sd/1";
/// Decimals kept for per-point association probabilities.
const PER_POINT_DECIMALS: i32 = 6;
/// Timestamps of different streams closer than this are the same frame.
const TIME_MATCH_S: f64 = 1e-6;

pub fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    let mut f = std::fs::File::create(path).map_err(|e| CliError::io(path, e))?;
    f.write_all(text.as_bytes()).map_err(|e| CliError::io(path, e))
}

fn parse_json<T: DeserializeOwned>(path: &Path, text: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|e| CliError::parse(path, e.line(), e))
}

/// Parses one value per non-blank line.
fn parse_jsonl<T: DeserializeOwned>(path: &Path, text: &str) -> Result<Vec<(usize, T)>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map(|v| (i + 1, v)).map_err(|e| CliError::parse(path, i + 1, e)))
        .collect()
}

fn to_jsonl<T: Serialize>(items: impl IntoIterator<Item = T>) -> String {
    let mut out = String::new();
    for item in items {
        out.push_str(&serde_json::to_string(&item).expect("plain data serializes"));
        out.push('\n');
    }
    out
}

fn lane_type(path: &Path, line: usize, s: &str) -> Result<LaneType> {
    LaneType::parse(s).ok_or_else(|| CliError::parse(path, line, format!("unknown marking type `{s}`")))
}

// ---------------------------------------------------------------- map

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LineString {
    #[serde(rename = "type")]
    pub kind: String,
    /// `[lon, lat]` pairs.
    pub coordinates: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoadProperties {
    pub road_id: i64,
    pub class: String,
    pub level: i32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub successors: Option<Vec<i64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oneway: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoadFeature {
    #[serde(rename = "type")]
    pub kind: String,
    pub properties: RoadProperties,
    pub geometry: LineString,
}

/// Road map as a GeoJSON FeatureCollection of LineStrings. The optional
/// `origin` member (`[lat, lon]`) fixes the local metric frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapDoc {
    #[serde(rename = "type")]
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub origin: Option<[f64; 2]>,
    pub features: Vec<RoadFeature>,
}

impl MapDoc {
    /// Local frame origin: the `origin` member, else the first vertex of
    /// the road with the lowest id.
    pub fn origin(&self) -> Option<(f64, f64)> {
        if let Some([lat, lon]) = self.origin {
            return Some((lat, lon));
        }
        let f = self.features.iter().min_by_key(|f| f.properties.road_id)?;
        f.geometry.coordinates.first().map(|&[lon, lat]| (lat, lon))
    }

    pub fn check(&self, path: &Path) -> Result<()> {
        if self.kind != "FeatureCollection" {
            return Err(CliError::parse(path, 0, "map must be a FeatureCollection"));
        }
        for f in &self.features {
            let id = f.properties.road_id;
            if f.kind != "Feature" || f.geometry.kind != "LineString" {
                return Err(CliError::parse(path, 0, format!("road {id}: features must be LineString Features")));
            }
            if RoadClass::parse(&f.properties.class).is_none() {
                return Err(CliError::parse(path, 0, format!("road {id}: unknown class `{}`", f.properties.class)));
            }
        }
        Ok(())
    }

    /// Builds the road graph. A feature with `oneway: false` also yields
    /// a reversed twin with id `-(id + 1)` whose successors are derived.
    pub fn to_graph(&self) -> Result<RoadGraph> {
        let origin = self.origin().unwrap_or((0.0, 0.0));
        let mut specs = Vec::new();
        for f in &self.features {
            let p = &f.properties;
            let id = RoadId(p.road_id);
            let class = RoadClass::parse(&p.class).ok_or(mapmatch_core::Error::InvalidRoad { id, reason: "unknown class" })?;
            let polyline =
                f.geometry.coordinates.iter().map(|&[lon, lat]| project_wgs84(lat, lon, origin)).collect::<Result<Vec<_>, _>>()?;
            if p.oneway == Some(false) {
                specs.push(RoadSpec {
                    id: RoadId(-(p.road_id + 1)),
                    polyline: polyline.iter().rev().copied().collect(),
                    class,
                    level: p.level,
                    successors: None,
                });
            }
            specs.push(RoadSpec {
                id,
                polyline,
                class,
                level: p.level,
                successors: p.successors.as_ref().map(|s| s.iter().copied().map(RoadId).collect()),
            });
        }
        Ok(RoadGraph::new(specs, origin)?)
    }

    /// Map document of `graph` with explicit successors and origin.
    pub fn from_graph(graph: &RoadGraph) -> MapDoc {
        let features = graph
            .roads()
            .map(|r| RoadFeature {
                kind: "Feature".into(),
                properties: RoadProperties {
                    road_id: r.id.0,
                    class: r.class.as_str().into(),
                    level: r.level,
                    successors: Some(r.successors.iter().map(|s| s.0).collect()),
                    oneway: None,
                },
                geometry: LineString { kind: "LineString".into(), coordinates: lon_lat(&r.polyline, graph.origin) },
            })
            .collect();
        MapDoc { kind: "FeatureCollection".into(), origin: Some([graph.origin.0, graph.origin.1]), features }
    }
}

fn lon_lat(line: &[PointXY], origin: (f64, f64)) -> Vec<[f64; 2]> {
    line.iter()
        .map(|&p| {
            let (lat, lon) = unproject_wgs84(p, origin);
            [lon, lat]
        })
        .collect()
}

pub fn parse_map(path: &Path, text: &str) -> Result<MapDoc> {
    let doc: MapDoc = parse_json(path, text)?;
    doc.check(path)?;
    Ok(doc)
}

pub fn read_map(path: &Path) -> Result<MapDoc> {
    parse_map(path, &read_text(path)?)
}

pub fn map_to_string(doc: &MapDoc) -> String {
    serde_json::to_string(doc).expect("plain data serializes") + "\n"
}

// -------------------------------------------------------------- lanes

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LanePointRow {
    Typed(f64, f64, f64, String),
    Plain(f64, f64, f64),
}

/// One lane per line: sampled points (`[x, y, heading, type?]`) or
/// B-spline control points (`[x, y]`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LaneLine {
    pub lane_id: i64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub type_default: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points: Option<Vec<LanePointRow>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bspline: Option<Vec<[f64; 2]>>,
}

impl LaneLine {
    pub fn from_lane(lane: &LaneMarking) -> LaneLine {
        let default = lane.points()[0].kind;
        let points = lane
            .points()
            .iter()
            .map(|p| {
                let (x, y, h) = (p.position.x, p.position.y, p.heading);
                if p.kind == default {
                    LanePointRow::Plain(x, y, h)
                } else {
                    LanePointRow::Typed(x, y, h, p.kind.as_str().into())
                }
            })
            .collect();
        LaneLine { lane_id: lane.id, type_default: Some(default.as_str().into()), points: Some(points), bspline: None }
    }

    pub fn to_lane(&self, path: &Path, line: usize) -> Result<LaneMarking> {
        let default = match &self.type_default {
            Some(s) => lane_type(path, line, s)?,
            None => LaneType::Solid,
        };
        let lane = match (&self.points, &self.bspline) {
            (Some(rows), None) => {
                let points = rows
                    .iter()
                    .map(|row| {
                        let (x, y, heading, kind) = match row {
                            LanePointRow::Plain(x, y, h) => (*x, *y, *h, default),
                            LanePointRow::Typed(x, y, h, k) => (*x, *y, *h, lane_type(path, line, k)?),
                        };
                        Ok(LanePoint { position: PointXY::new(x, y), heading, kind })
                    })
                    .collect::<Result<Vec<_>>>()?;
                LaneMarking::new(self.lane_id, points, LaneSource::Polyline)
            }
            (None, Some(control)) => {
                let control: Vec<PointXY> = control.iter().map(|&[x, y]| PointXY::new(x, y)).collect();
                LaneMarking::from_bspline(self.lane_id, &control, default, BSPLINE_SAMPLE_M)
            }
            _ => return Err(CliError::parse(path, line, "lane needs exactly one of `points` or `bspline`")),
        };
        lane.map_err(|e| CliError::parse(path, line, e))
    }
}

pub fn parse_lanes(path: &Path, text: &str) -> Result<Vec<LaneMarking>> {
    parse_jsonl::<LaneLine>(path, text)?.into_iter().map(|(n, l)| l.to_lane(path, n)).collect()
}

pub fn lanes_to_string(lanes: &[LaneMarking]) -> String {
    to_jsonl(lanes.iter().map(LaneLine::from_lane))
}

// --------------------------------------------------------- detections

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectionLine {
    pub t: f64,
    /// `[x, y, type]` in the vehicle frame, x forward and y left.
    pub points: Vec<(f64, f64, String)>,
}

pub fn parse_detections(path: &Path, text: &str) -> Result<Vec<(f64, Vec<TypedPoint>)>> {
    parse_jsonl::<DetectionLine>(path, text)?
        .into_iter()
        .map(|(n, d)| {
            let pts = d.points.iter().map(|(x, y, k)| Ok(TypedPoint::new(*x, *y, lane_type(path, n, k)?))).collect::<Result<Vec<_>>>()?;
            Ok((d.t, pts))
        })
        .collect()
}

pub fn detections_to_string(frames: &[(f64, Vec<TypedPoint>)]) -> String {
    to_jsonl(frames.iter().map(|(t, pts)| DetectionLine {
        t: *t,
        points: pts.iter().map(|p| (p.position.x, p.position.y, p.kind.as_str().to_string())).collect(),
    }))
}

// ----------------------------------------------------------- scenario

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioLine {
    pub t: f64,
    pub ordinary: f64,
    pub express: f64,
    pub tunnel: f64,
}

pub fn parse_scenario(path: &Path, text: &str) -> Result<Vec<ScenarioProbs>> {
    parse_jsonl::<ScenarioLine>(path, text)?
        .into_iter()
        .map(|(n, s)| ScenarioProbs::new(s.t, s.ordinary, s.express, s.tunnel).map_err(|e| CliError::parse(path, n, e)))
        .collect()
}

pub fn scenario_to_string(records: &[ScenarioProbs]) -> String {
    to_jsonl(records.iter().map(|s| ScenarioLine { t: s.t, ordinary: s.p_ordinary, express: s.p_express, tunnel: s.p_tunnel }))
}

// --------------------------------------------------------- trajectory

/// A trajectory sample, either WGS84 or in the map's local frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectoryLine {
    pub t: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lat: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub heading: Option<f64>,
}

/// Observations in the local frame of `origin`. Missing headings are
/// derived from consecutive positions.
pub fn parse_trajectory(path: &Path, text: &str, origin: (f64, f64)) -> Result<Vec<Observation>> {
    let rows = parse_jsonl::<TrajectoryLine>(path, text)?;
    let mut positions = Vec::with_capacity(rows.len());
    for (n, r) in &rows {
        let p = match (r.lat, r.lon, r.x, r.y) {
            (Some(lat), Some(lon), None, None) => project_wgs84(lat, lon, origin).map_err(|e| CliError::parse(path, *n, e))?,
            (None, None, Some(x), Some(y)) => PointXY::new(x, y),
            _ => return Err(CliError::parse(path, *n, "expected either lat/lon or x/y")),
        };
        if !p.is_valid() || !r.t.is_finite() {
            return Err(CliError::parse(path, *n, "non-finite sample"));
        }
        positions.push(p);
    }
    let derived = derive_headings(&positions);
    Ok(rows
        .iter()
        .zip(positions)
        .zip(derived)
        .map(|(((_, r), p), h)| Observation::new(r.t, Pose::new(p, r.heading.unwrap_or(h))))
        .collect())
}

pub fn trajectory_to_string(observations: &[Observation]) -> String {
    to_jsonl(observations.iter().map(|o| TrajectoryLine {
        t: o.t,
        lat: None,
        lon: None,
        x: Some(o.pose.position.x),
        y: Some(o.pose.position.y),
        heading: Some(o.pose.heading),
    }))
}

/// Attaches detection frames to the observation with the same timestamp.
pub fn attach_detections(path: &Path, observations: &mut [Observation], frames: Vec<(f64, Vec<TypedPoint>)>) -> Result<()> {
    for (t, pts) in frames {
        let k = observations
            .binary_search_by(|o| o.t.total_cmp(&t))
            .or_else(|k| {
                // tolerate formatting noise in timestamps
                [k.wrapping_sub(1), k].into_iter().find(|&i| observations.get(i).is_some_and(|o| (o.t - t).abs() <= TIME_MATCH_S)).ok_or(())
            })
            .map_err(|_| CliError::parse(path, 0, format!("detection frame at t={t} has no trajectory sample")))?;
        observations[k].detections = Some(pts);
    }
    Ok(())
}

// -------------------------------------------------------------- truth

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruthLine {
    pub t: f64,
    pub road_id: i64,
}

pub fn parse_truth(path: &Path, text: &str) -> Result<GroundTruth> {
    let rows = parse_jsonl::<TruthLine>(path, text)?;
    Ok(GroundTruth::new(rows.iter().map(|(_, r)| r.t).collect(), rows.iter().map(|(_, r)| RoadId(r.road_id)).collect())?)
}

pub fn truth_to_string(truth: &GroundTruth) -> String {
    to_jsonl(truth.t.iter().zip(&truth.roads).map(|(&t, r)| TruthLine { t, road_id: r.0 }))
}

// ------------------------------------------------------- match output

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecordLine {
    pub t: f64,
    pub road_id: Option<i64>,
    /// Pose used for matching (corrected when registration succeeded).
    pub x: f64,
    pub y: f64,
    pub heading: f64,
    pub probabilities: Vec<(i64, f64)>,
    pub restart: bool,
    pub registration: String,
    pub lane_factor_uniform: bool,
    pub scenario_uniform: bool,
}

/// Road sequence after the final backtrack, one entry per record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FinalizedLine {
    pub finalized: Vec<Option<i64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OutputLine {
    Record(RecordLine),
    Finalized(FinalizedLine),
}

fn registration_str(r: Registration) -> &'static str {
    match r {
        Registration::NotAttempted => "not_attempted",
        Registration::Corrected => "corrected",
        Registration::Failed => "failed",
    }
}

impl RecordLine {
    pub fn from_record(r: &MatchRecord) -> RecordLine {
        RecordLine {
            t: r.t,
            road_id: r.road.map(|id| id.0),
            x: r.pose.position.x,
            y: r.pose.position.y,
            heading: r.pose.heading,
            probabilities: r.probabilities.iter().map(|(id, p)| (id.0, *p)).collect(),
            restart: r.restart,
            registration: registration_str(r.registration).into(),
            lane_factor_uniform: r.lane_factor_uniform,
            scenario_uniform: r.scenario_uniform,
        }
    }
}

/// Online records followed by the finalized summary line.
pub fn match_output_to_string(online: &[MatchRecord], finalized: &[MatchRecord]) -> String {
    let mut lines: Vec<OutputLine> = online.iter().map(|r| OutputLine::Record(RecordLine::from_record(r))).collect();
    lines.push(OutputLine::Finalized(FinalizedLine { finalized: finalized.iter().map(|r| r.road.map(|id| id.0)).collect() }));
    to_jsonl(lines)
}

/// Parsed match output.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchOutput {
    pub records: Vec<RecordLine>,
    pub finalized: Option<Vec<Option<i64>>>,
}

impl MatchOutput {
    /// Finalized roads when present, else the online ones.
    pub fn roads(&self) -> Vec<Option<RoadId>> {
        match &self.finalized {
            Some(f) => f.iter().map(|r| r.map(RoadId)).collect(),
            None => self.records.iter().map(|r| r.road_id.map(RoadId)).collect(),
        }
    }

    pub fn positions(&self) -> Vec<PointXY> {
        self.records.iter().map(|r| PointXY::new(r.x, r.y)).collect()
    }

    pub fn times(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.t).collect()
    }
}

pub fn parse_match_output(path: &Path, text: &str) -> Result<MatchOutput> {
    let mut out = MatchOutput { records: Vec::new(), finalized: None };
    for (n, line) in parse_jsonl::<OutputLine>(path, text)? {
        match line {
            OutputLine::Record(r) if out.finalized.is_none() => out.records.push(r),
            OutputLine::Finalized(f) if out.finalized.is_none() => {
                if f.finalized.len() != out.records.len() {
                    return Err(CliError::parse(path, n, "finalized block length differs from the record count"));
                }
                out.finalized = Some(f.finalized);
            }
            _ => return Err(CliError::parse(path, n, "nothing may follow the finalized block")),
        }
    }
    Ok(out)
}

// ------------------------------------------------------- enriched map

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AssociationDoc {
    pub lane_id: i64,
    pub road_id: i64,
    pub probability: f64,
    /// `(sample index, probability)` pairs.
    pub per_point: Vec<(usize, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnrichedDoc {
    pub format: String,
    pub map: MapDoc,
    pub lanes: Vec<LaneLine>,
    pub associations: Vec<AssociationDoc>,
}

fn round_to(v: f64, decimals: i32) -> f64 {
    let k = 10f64.powi(decimals);
    (v * k).round() / k
}

impl EnrichedDoc {
    /// Per-point probabilities are rounded and the association
    /// probability is re-taken as the maximum of the rounded values.
    pub fn new(map: MapDoc, enriched: &EnrichedMap) -> EnrichedDoc {
        let associations = enriched
            .associations()
            .iter()
            .map(|a| {
                let per_point: Vec<(usize, f64)> = a.per_point.iter().map(|&(k, p)| (k, round_to(p, PER_POINT_DECIMALS))).collect();
                AssociationDoc {
                    lane_id: a.lane,
                    road_id: a.road.0,
                    probability: per_point.iter().map(|&(_, p)| p).fold(0.0, f64::max),
                    per_point,
                }
            })
            .collect();
        EnrichedDoc { format: ENRICHED_FORMAT.into(), map, lanes: enriched.lanes().map(LaneLine::from_lane).collect(), associations }
    }

    pub fn to_enriched(&self, path: &Path) -> Result<EnrichedMap> {
        if self.format != ENRICHED_FORMAT {
            return Err(CliError::parse(path, 0, format!("unsupported format `{}`", self.format)));
        }
        self.map.check(path)?;
        let graph = self.map.to_graph()?;
        let lanes = self.lanes.iter().map(|l| l.to_lane(path, 0)).collect::<Result<Vec<_>>>()?;
        let associations = self
            .associations
            .iter()
            .map(|a| LaneAssociation {
                lane: a.lane_id,
                road: RoadId(a.road_id),
                probability: a.probability,
                per_point: a.per_point.clone(),
            })
            .collect();
        Ok(EnrichedMap::from_parts(graph, lanes, associations)?)
    }
}

pub fn parse_enriched(path: &Path, text: &str) -> Result<EnrichedDoc> {
    parse_json(path, text)
}

pub fn enriched_to_string(doc: &EnrichedDoc) -> String {
    serde_json::to_string(doc).expect("plain data serializes") + "\n"
}

// ----------------------------------------------------------- overlay

/// GeoJSON overlay of a match: matched roads as LineStrings (with the
/// number of steps matched to each) and every trajectory sample as a
/// Point carrying its matched road.
pub fn overlay_geojson(graph: &RoadGraph, online: &[MatchRecord], finalized: &[MatchRecord]) -> String {
    use serde_json::{json, Value};
    let origin = graph.origin;
    let mut counts: std::collections::BTreeMap<RoadId, usize> = Default::default();
    for r in finalized.iter().filter_map(|r| r.road) {
        *counts.entry(r).or_default() += 1;
    }
    let mut features: Vec<Value> = counts
        .iter()
        .filter_map(|(id, n)| graph.road(*id).ok().map(|road| (road, n)))
        .map(|(road, n)| {
            json!({
                "type": "Feature",
                "properties": {"kind": "matched_road", "road_id": road.id.0, "steps": n},
                "geometry": {"type": "LineString", "coordinates": lon_lat(&road.polyline, origin)},
            })
        })
        .collect();
    for (on, fin) in online.iter().zip(finalized) {
        let [c] = lon_lat(&[on.pose.position], origin)[..] else { unreachable!() };
        features.push(json!({
            "type": "Feature",
            "properties": {
                "kind": "sample",
                "t": on.t,
                "road_id": fin.road.map(|r| r.0),
                "online_road_id": on.road.map(|r| r.0),
                "registration": registration_str(on.registration),
            },
            "geometry": {"type": "Point", "coordinates": c},
        }));
    }
    serde_json::to_string(&json!({"type": "FeatureCollection", "features": features})).expect("json value") + "\n"
}
