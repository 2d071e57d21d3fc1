//! Directed SD road network with a static segment index.

use alloc::collections::{BTreeMap, BTreeSet, BinaryHeap};
use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::error::Error;
use crate::geom::{polyline_length, project_onto_polyline, PointXY, Projection};

/// Endpoint distance under which roads are considered connected when a
/// road carries no explicit successor list.
pub const SNAP_TOLERANCE_M: f64 = 0.5;

/// Default search cap for connected distances.
pub const DEFAULT_PATH_CAP_M: f64 = 300.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RoadId(pub i64);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum RoadClass {
    Ordinary,
    /// Elevated roads and expressways.
    Expressway,
    Tunnel,
}

impl RoadClass {
    pub fn as_str(self) -> &'static str {
        match self {
            RoadClass::Ordinary => "ordinary",
            RoadClass::Expressway => "expressway",
            RoadClass::Tunnel => "tunnel",
        }
    }

    pub fn parse(s: &str) -> Option<RoadClass> {
        match s {
            "ordinary" => Some(RoadClass::Ordinary),
            "expressway" => Some(RoadClass::Expressway),
            "tunnel" => Some(RoadClass::Tunnel),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Road {
    pub id: RoadId,
    /// Vertices in direction of travel.
    pub polyline: Vec<PointXY>,
    pub class: RoadClass,
    /// 0 = surface, 1 = elevated.
    pub level: i32,
    pub successors: Vec<RoadId>,
    length: f64,
}

impl Road {
    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn project(&self, p: PointXY) -> Projection {
        project_onto_polyline(&self.polyline, p)
    }
}

/// Input description of a road; `successors: None` asks the graph to derive
/// connectivity from shared endpoints.
#[derive(Debug, Clone, PartialEq)]
pub struct RoadSpec {
    pub id: RoadId,
    pub polyline: Vec<PointXY>,
    pub class: RoadClass,
    pub level: i32,
    pub successors: Option<Vec<RoadId>>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BBox {
    pub min: PointXY,
    pub max: PointXY,
}

impl BBox {
    fn of_segment(a: PointXY, b: PointXY) -> BBox {
        BBox { min: PointXY::new(a.x.min(b.x), a.y.min(b.y)), max: PointXY::new(a.x.max(b.x), a.y.max(b.y)) }
    }

    pub fn around(p: PointXY, r: f64) -> BBox {
        BBox { min: PointXY::new(p.x - r, p.y - r), max: PointXY::new(p.x + r, p.y + r) }
    }

    fn union(&self, o: &BBox) -> BBox {
        BBox {
            min: PointXY::new(self.min.x.min(o.min.x), self.min.y.min(o.min.y)),
            max: PointXY::new(self.max.x.max(o.max.x), self.max.y.max(o.max.y)),
        }
    }

    fn intersects(&self, o: &BBox) -> bool {
        self.min.x <= o.max.x && o.min.x <= self.max.x && self.min.y <= o.max.y && o.min.y <= self.max.y
    }

    fn center(&self) -> PointXY {
        PointXY::new((self.min.x + self.max.x) * 0.5, (self.min.y + self.max.y) * 0.5)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegmentEntry {
    pub bbox: BBox,
    pub road: RoadId,
    pub segment: usize,
}

#[derive(Debug, Clone, Copy)]
struct Node {
    bbox: BBox,
    start: usize,
    end: usize,
}

const NODE_CAPACITY: usize = 16;

/// Sort-tile-recursive packed R-tree over road segments. Built once.
#[derive(Debug, Clone)]
pub struct SegmentIndex {
    entries: Vec<SegmentEntry>,
    /// `levels[0]` groups entries, `levels[k]` groups nodes of `levels[k - 1]`.
    levels: Vec<Vec<Node>>,
}

fn str_order(boxes: &[BBox]) -> Vec<usize> {
    let n = boxes.len();
    let mut idx: Vec<usize> = (0..n).collect();
    let leaves = n.div_ceil(NODE_CAPACITY);
    let slices = libm::ceil(libm::sqrt(leaves as f64)).max(1.0) as usize;
    let slice_len = slices * NODE_CAPACITY;
    idx.sort_by(|&a, &b| boxes[a].center().x.total_cmp(&boxes[b].center().x).then(a.cmp(&b)));
    for chunk in idx.chunks_mut(slice_len) {
        chunk.sort_by(|&a, &b| boxes[a].center().y.total_cmp(&boxes[b].center().y).then(a.cmp(&b)));
    }
    idx
}

fn pack(boxes: &[BBox]) -> (Vec<usize>, Vec<Node>) {
    let order = str_order(boxes);
    let nodes = order
        .chunks(NODE_CAPACITY)
        .enumerate()
        .map(|(i, chunk)| {
            let bbox = chunk[1..].iter().fold(boxes[chunk[0]], |acc, &j| acc.union(&boxes[j]));
            let start = i * NODE_CAPACITY;
            Node { bbox, start, end: start + chunk.len() }
        })
        .collect();
    (order, nodes)
}

impl SegmentIndex {
    pub fn build(entries: Vec<SegmentEntry>) -> SegmentIndex {
        if entries.is_empty() {
            return SegmentIndex { entries, levels: Vec::new() };
        }
        let boxes: Vec<BBox> = entries.iter().map(|e| e.bbox).collect();
        let (order, mut level) = pack(&boxes);
        let entries: Vec<SegmentEntry> = order.iter().map(|&i| entries[i]).collect();
        let mut levels = Vec::new();
        while level.len() > 1 {
            let boxes: Vec<BBox> = level.iter().map(|n| n.bbox).collect();
            let (order, parents) = pack(&boxes);
            levels.push(order.iter().map(|&i| level[i]).collect());
            level = parents;
        }
        levels.push(level);
        SegmentIndex { entries, levels }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[SegmentEntry] {
        &self.entries
    }

    /// Calls `visit` for every entry whose box intersects `query`.
    pub fn query(&self, query: &BBox, mut visit: impl FnMut(&SegmentEntry)) {
        let Some(top) = self.levels.len().checked_sub(1) else {
            return;
        };
        let mut stack: Vec<(usize, usize)> = (0..self.levels[top].len()).map(|i| (top, i)).collect();
        while let Some((lvl, i)) = stack.pop() {
            let node = &self.levels[lvl][i];
            if !node.bbox.intersects(query) {
                continue;
            }
            if lvl == 0 {
                for e in &self.entries[node.start..node.end] {
                    if e.bbox.intersects(query) {
                        visit(e);
                    }
                }
            } else {
                stack.extend((node.start..node.end).map(|c| (lvl - 1, c)));
            }
        }
    }
}

/// A candidate road together with the projection of the query point on it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Candidate {
    pub road: RoadId,
    pub projection: Projection,
}

#[derive(Debug, Clone)]
pub struct RoadGraph {
    roads: BTreeMap<RoadId, Road>,
    /// WGS84 anchor `(lat, lon)` of the local frame.
    pub origin: (f64, f64),
    index: SegmentIndex,
}

impl RoadGraph {
    pub fn new(specs: Vec<RoadSpec>, origin: (f64, f64)) -> Result<RoadGraph, Error> {
        let mut roads = BTreeMap::new();
        let mut derive = BTreeSet::new();
        for spec in specs {
            validate_polyline(spec.id, &spec.polyline)?;
            if spec.successors.is_none() {
                derive.insert(spec.id);
            }
            let road = Road {
                id: spec.id,
                length: polyline_length(&spec.polyline),
                polyline: spec.polyline,
                class: spec.class,
                level: spec.level,
                successors: spec.successors.unwrap_or_default(),
            };
            if roads.insert(spec.id, road).is_some() {
                return Err(Error::DuplicateRoad(spec.id));
            }
        }
        for id in &derive {
            let end = *roads[id].polyline.last().expect("validated");
            let succ: Vec<RoadId> =
                roads.values().filter(|r| r.id != *id && r.polyline[0].distance(end) <= SNAP_TOLERANCE_M).map(|r| r.id).collect();
            roads.get_mut(id).expect("present").successors = succ;
        }
        for road in roads.values_mut() {
            road.successors.sort();
            road.successors.dedup();
        }
        for road in roads.values() {
            if let Some(missing) = road.successors.iter().find(|s| !roads.contains_key(s)) {
                return Err(Error::UnknownRoad(*missing));
            }
        }
        let entries = roads
            .values()
            .flat_map(|r| {
                r.polyline.windows(2).enumerate().map(|(i, w)| SegmentEntry { bbox: BBox::of_segment(w[0], w[1]), road: r.id, segment: i })
            })
            .collect();
        Ok(RoadGraph { roads, origin, index: SegmentIndex::build(entries) })
    }

    pub fn road(&self, id: RoadId) -> Result<&Road, Error> {
        self.roads.get(&id).ok_or(Error::UnknownRoad(id))
    }

    pub fn roads(&self) -> impl Iterator<Item = &Road> {
        self.roads.values()
    }

    pub fn len(&self) -> usize {
        self.roads.len()
    }

    pub fn is_empty(&self) -> bool {
        self.roads.is_empty()
    }

    pub fn index(&self) -> &SegmentIndex {
        &self.index
    }

    /// Roads whose projection distance is at most `radius`, ordered by id.
    pub fn candidates(&self, p: PointXY, radius: f64) -> Vec<Candidate> {
        let mut ids = BTreeSet::new();
        self.index.query(&BBox::around(p, radius), |e| {
            ids.insert(e.road);
        });
        ids.into_iter()
            .filter_map(|id| {
                let projection = self.roads[&id].project(p);
                (projection.distance <= radius).then_some(Candidate { road: id, projection })
            })
            .collect()
    }

    /// Exhaustive variant of [`RoadGraph::candidates`] without the index.
    pub fn candidates_linear(&self, p: PointXY, radius: f64) -> Vec<Candidate> {
        self.roads
            .values()
            .filter_map(|r| {
                let projection = r.project(p);
                (projection.distance <= radius).then_some(Candidate { road: r.id, projection })
            })
            .collect()
    }

    /// Length of the shortest directed path `from -> .. -> to`, counting
    /// only the roads strictly between the two. `Some(0)` for `from == to`
    /// and for direct successors; `None` when no path fits under `cap`.
    pub fn min_connected_distance(&self, from: RoadId, to: RoadId, cap: f64) -> Result<Option<f64>, Error> {
        let start = self.road(from)?;
        self.road(to)?;
        if from == to || start.successors.contains(&to) {
            return Ok(Some(0.0));
        }
        let mut settled = BTreeSet::new();
        let mut heap: BinaryHeap<Frontier> = start.successors.iter().map(|&road| Frontier { cost: 0.0, road }).collect();
        while let Some(Frontier { cost, road }) = heap.pop() {
            if road == to {
                return Ok(Some(cost));
            }
            if !settled.insert(road) {
                continue;
            }
            let r = &self.roads[&road];
            let next = cost + r.length;
            if next > cap {
                continue;
            }
            for &s in &r.successors {
                if !settled.contains(&s) {
                    heap.push(Frontier { cost: next, road: s });
                }
            }
        }
        Ok(None)
    }
}

fn validate_polyline(id: RoadId, line: &[PointXY]) -> Result<(), Error> {
    if line.len() < 2 {
        return Err(Error::InvalidRoad { id, reason: "polyline needs at least 2 points" });
    }
    if !line.iter().all(PointXY::is_valid) {
        return Err(Error::InvalidRoad { id, reason: "non-finite or out-of-range coordinate" });
    }
    if line.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::InvalidRoad { id, reason: "consecutive duplicate points" });
    }
    Ok(())
}

/// Min-heap entry for the connected-distance search.
#[derive(Debug, Clone, Copy)]
struct Frontier {
    cost: f64,
    road: RoadId,
}

impl PartialEq for Frontier {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Frontier {}

impl PartialOrd for Frontier {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Frontier {
    fn cmp(&self, other: &Self) -> Ordering {
        other.cost.total_cmp(&self.cost).then_with(|| other.road.cmp(&self.road))
    }
}
