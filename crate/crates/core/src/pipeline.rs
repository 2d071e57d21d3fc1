//! Online fused matcher: candidates, ICP pose correction, lane and scenario
//! factors, then one Viterbi step per observation.

use alloc::vec::Vec;

use crate::error::Error;
use crate::geom::{bearing, Pose};
use crate::graph::{RoadGraph, RoadId};
use crate::hmm::{pose_emission, transition, Emission, HmmParams, MatcherState};
use crate::icp::{lane_emission_factor, relocalize, IcpParams, LaneFactorParams, RelocalizationParams, TypedPoint};
use crate::lane::EnrichedMap;
use crate::scenario::{scenario_emission, ScenarioProbs, ScenarioStream};

#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub t: f64,
    pub pose: Pose,
    pub detections: Option<Vec<TypedPoint>>,
    pub scenario: Option<ScenarioProbs>,
}

impl Observation {
    pub fn new(t: f64, pose: Pose) -> Self {
        Observation { t, pose, detections: None, scenario: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchConfig {
    pub hmm: HmmParams,
    pub icp: IcpParams,
    pub relocalization: RelocalizationParams,
    pub lane_factor: LaneFactorParams,
    pub enable_lane_factor: bool,
    pub enable_scenario: bool,
    /// Feed the ICP-corrected position into the distance emission.
    pub pose_correction: bool,
}

impl Default for MatchConfig {
    fn default() -> Self {
        MatchConfig {
            hmm: HmmParams::default(),
            icp: IcpParams::default(),
            relocalization: RelocalizationParams::default(),
            lane_factor: LaneFactorParams::default(),
            enable_lane_factor: true,
            enable_scenario: true,
            pose_correction: true,
        }
    }
}

impl MatchConfig {
    /// Distance, heading and connectivity factors only.
    pub fn baseline() -> Self {
        MatchConfig { enable_lane_factor: false, enable_scenario: false, pose_correction: false, ..Self::default() }
    }

    pub fn validate(&self) -> Result<(), Error> {
        self.hmm.validate()?;
        self.icp.validate()?;
        if !(self.lane_factor.sigma > 0.0) {
            return Err(Error::InvalidParams("lane sigma must be positive"));
        }
        if !(self.lane_factor.context_radius >= 0.0) {
            return Err(Error::InvalidParams("lane_context_radius must be non-negative"));
        }
        if !(self.relocalization.lateral_range >= 0.0) || !(self.relocalization.lateral_step >= 0.0) {
            return Err(Error::InvalidParams("relocalization range and step must be non-negative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Registration {
    NotAttempted,
    Corrected,
    /// Registration was degenerate; the raw pose was kept.
    Failed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatchRecord {
    pub t: f64,
    pub road: Option<RoadId>,
    pub pose: Pose,
    /// Normalized probability per candidate, by road id.
    pub probabilities: Vec<(RoadId, f64)>,
    pub restart: bool,
    pub registration: Registration,
    pub lane_factor_uniform: bool,
    pub scenario_uniform: bool,
}

pub struct Session<'a> {
    graph: &'a RoadGraph,
    enriched: Option<&'a EnrichedMap>,
    scenario: Option<&'a ScenarioStream>,
    config: MatchConfig,
    state: MatcherState,
    records: Vec<MatchRecord>,
}

/// Adds `extra` to `acc`, unless it is the same for every candidate: a
/// constant shift cannot change the outcome, and skipping it keeps the
/// output bit-identical to the run without the factor.
fn add_if_informative(acc: &mut [f64], extra: &[f64]) -> bool {
    let informative = extra.windows(2).any(|w| w[0] != w[1]);
    if informative {
        acc.iter_mut().zip(extra).for_each(|(a, e)| *a += e);
    }
    informative
}

impl<'a> Session<'a> {
    pub fn new(graph: &'a RoadGraph, config: MatchConfig) -> Result<Self, Error> {
        config.validate()?;
        Ok(Session { graph, enriched: None, scenario: None, config, state: MatcherState::new(), records: Vec::new() })
    }

    /// Session over an enriched map; its road graph is used for matching.
    pub fn with_enriched(enriched: &'a EnrichedMap, config: MatchConfig) -> Result<Self, Error> {
        let mut s = Session::new(&enriched.graph, config)?;
        s.enriched = Some(enriched);
        Ok(s)
    }

    /// Scenario records looked up by timestamp for observations that do not
    /// carry their own.
    pub fn set_scenario_stream(&mut self, stream: &'a ScenarioStream) {
        self.scenario = Some(stream);
    }

    pub fn config(&self) -> &MatchConfig {
        &self.config
    }

    pub fn state(&self) -> &MatcherState {
        &self.state
    }

    pub fn records(&self) -> &[MatchRecord] {
        &self.records
    }

    /// Processes one observation. Fails only on a timestamp that does not
    /// advance.
    pub fn match_step(&mut self, obs: &Observation) -> Result<MatchRecord, Error> {
        if let Some(last) = self.records.last() {
            if !(obs.t > last.t) {
                return Err(Error::InvalidParams("observation timestamps must be strictly increasing"));
            }
        }
        let cfg = &self.config;
        let candidates = self.graph.candidates(obs.pose.position, cfg.hmm.emission.candidate_radius);

        let mut registration = Registration::NotAttempted;
        let mut corrected = obs.pose;
        let lanes = self.enriched.filter(|_| cfg.enable_lane_factor || cfg.pose_correction);
        if let (Some(enriched), Some(det)) = (lanes, obs.detections.as_ref()) {
            match relocalize(det, enriched, &obs.pose, &cfg.icp, &cfg.relocalization) {
                Ok(out) => {
                    corrected = out.corrected_pose(&obs.pose);
                    registration = Registration::Corrected;
                }
                Err(_) => registration = Registration::Failed,
            }
        }
        let emission_pose = if cfg.pose_correction { corrected } else { obs.pose };

        let ids: Vec<RoadId> = candidates.iter().map(|c| c.road).collect();
        let mut logs: Vec<f64> = Vec::with_capacity(candidates.len());
        let mut projections = Vec::with_capacity(candidates.len());
        for c in &candidates {
            let proj = if cfg.pose_correction && registration == Registration::Corrected {
                self.graph.road(c.road)?.project(emission_pose.position)
            } else {
                c.projection
            };
            logs.push(pose_emission(&emission_pose, &proj, &cfg.hmm.emission));
            projections.push(proj);
        }

        let mut lane_factor_uniform = true;
        if cfg.enable_lane_factor && registration == Registration::Corrected {
            if let Some(enriched) = self.enriched {
                let pl = lane_emission_factor(&corrected, enriched, &ids, &cfg.lane_factor);
                lane_factor_uniform = !add_if_informative(&mut logs, &pl);
            }
        }

        let mut scenario_uniform = true;
        if cfg.enable_scenario {
            let probs = obs.scenario.or_else(|| self.scenario.map(|s| s.lookup(obs.t)));
            if let Some(p) = probs {
                let ps: Vec<f64> =
                    candidates.iter().map(|c| self.graph.road(c.road).map(|r| scenario_emission(&p, r.class))).collect::<Result<_, _>>()?;
                scenario_uniform = !add_if_informative(&mut logs, &ps);
            }
        }

        let emissions: Vec<Emission> = ids
            .iter()
            .zip(&logs)
            .zip(&projections)
            .map(|((&road, &log_factor), &p)| Emission { road, log_factor, projection: Some(p) })
            .collect();
        let graph = self.graph;
        let tp = cfg.hmm.transition;
        let eps = libm::log(tp.eps_transition);
        self.state.advance(&emissions, |from, to| transition(graph, from, to, &tp).unwrap_or(eps));

        let step = self.state.steps().last().ok_or(Error::EmptyLattice)?;
        let record = MatchRecord {
            t: obs.t,
            road: step.best().map(|n| n.road),
            pose: corrected,
            probabilities: step.probabilities().collect(),
            restart: step.is_restart(),
            registration,
            lane_factor_uniform,
            scenario_uniform,
        };
        self.records.push(record.clone());
        Ok(record)
    }

    /// Records with roads replaced by the full backtrack. Steps without
    /// candidates stay unmatched.
    pub fn finalize(&self) -> Result<Vec<MatchRecord>, Error> {
        let path = self.state.backtrack()?;
        Ok(self.records.iter().zip(path).map(|(r, road)| MatchRecord { road, ..r.clone() }).collect())
    }
}

/// Headings from consecutive positions: each point looks at the next one,
/// the last repeats its predecessor, and stationary points keep the
/// previous heading.
pub fn derive_headings(positions: &[crate::geom::PointXY]) -> Vec<f64> {
    const MIN_MOVE_M: f64 = 1e-6;
    let n = positions.len();
    let mut raw: Vec<Option<f64>> = (0..n)
        .map(|i| {
            let (a, b) = if i + 1 < n {
                (positions[i], positions[i + 1])
            } else if i > 0 {
                (positions[i - 1], positions[i])
            } else {
                return None;
            };
            (a.distance(b) > MIN_MOVE_M).then(|| bearing(a, b))
        })
        .collect();
    let first = raw.iter().flatten().next().copied().unwrap_or(0.0);
    let mut last = first;
    raw.iter_mut()
        .map(|h| {
            let v = h.take().unwrap_or(last);
            last = v;
            v
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::PointXY;
    use crate::graph::{RoadClass, RoadSpec};
    use alloc::vec;

    fn spec(id: i64, pts: &[(f64, f64)], class: RoadClass, level: i32) -> RoadSpec {
        RoadSpec { id: RoadId(id), polyline: pts.iter().map(|&(x, y)| PointXY::new(x, y)).collect(), class, level, successors: None }
    }

    /// Surface road along y = 0 and an expressway 5 m north of it.
    fn stacked() -> RoadGraph {
        RoadGraph::new(
            vec![
                spec(1, &[(0.0, 0.0), (400.0, 0.0)], RoadClass::Ordinary, 0),
                spec(2, &[(0.0, 5.0), (400.0, 5.0)], RoadClass::Expressway, 1),
            ],
            (0.0, 0.0),
        )
        .unwrap()
    }

    fn drive(n: usize, y: f64) -> Vec<Observation> {
        (0..n).map(|k| Observation::new(k as f64, Pose::new(PointXY::new(10.0 + 15.0 * k as f64, y), 90.0))).collect()
    }

    #[test]
    fn baseline_equals_plain_hmm() {
        let g = stacked();
        let obs = drive(8, 1.0);
        let mut s = Session::new(&g, MatchConfig::default()).unwrap();
        let mut plain = MatcherState::new();
        let params = HmmParams::default();
        for o in &obs {
            let rec = s.match_step(o).unwrap();
            plain.viterbi_step(&g, &o.pose, &params, |_| 0.0);
            let step = plain.steps().last().unwrap();
            assert_eq!(rec.road, step.best().map(|n| n.road));
            assert_eq!(rec.probabilities, step.probabilities().collect::<Vec<_>>());
        }
        assert_eq!(s.state().steps(), plain.steps());
    }

    #[test]
    fn uniform_scenario_is_bit_identical() {
        let g = stacked();
        let obs = drive(6, 2.0);
        let mut base = Session::new(&g, MatchConfig::baseline()).unwrap();
        let mut full = Session::new(&g, MatchConfig::default()).unwrap();
        for o in &obs {
            let mut with = o.clone();
            with.scenario = Some(ScenarioProbs::uniform(o.t));
            let a = base.match_step(o).unwrap();
            let b = full.match_step(&with).unwrap();
            assert_eq!(a, b);
        }
        assert_eq!(base.finalize().unwrap(), full.finalize().unwrap());
    }

    #[test]
    fn scenario_overrides_small_distance_gap() {
        let g = stacked();
        // closed form: class ratio 9:1 against exp(25/800) from the distances
        let sigma = 20.0;
        let dist_gap = 25.0 / (2.0 * sigma * sigma);
        assert!(libm::log(9.0) > dist_gap);
        let obs = drive(5, 0.0);
        let mut base = Session::new(&g, MatchConfig::baseline()).unwrap();
        let mut full = Session::new(&g, MatchConfig::default()).unwrap();
        for o in &obs {
            let mut with = o.clone();
            with.scenario = Some(ScenarioProbs::new(o.t, 0.1, 0.9, 0.0).unwrap());
            assert_eq!(base.match_step(o).unwrap().road, Some(RoadId(1)));
            let rec = full.match_step(&with).unwrap();
            assert_eq!(rec.road, Some(RoadId(2)));
            assert!(!rec.scenario_uniform);
        }
        assert!(full.finalize().unwrap().iter().all(|r| r.road == Some(RoadId(2))));
    }

    #[test]
    fn scenario_stream_lookup_and_staleness() {
        let g = stacked();
        let stream = ScenarioStream::new(vec![ScenarioProbs::new(0.0, 0.1, 0.9, 0.0).unwrap()], 2.0).unwrap();
        let mut s = Session::new(&g, MatchConfig::default()).unwrap();
        s.set_scenario_stream(&stream);
        let recs: Vec<MatchRecord> = drive(5, 0.0).iter().map(|o| s.match_step(o).unwrap()).collect();
        assert_eq!(recs.iter().map(|r| r.scenario_uniform).collect::<Vec<_>>(), vec![false, false, false, true, true]);
    }

    #[test]
    fn finalize_length_and_off_map() {
        let g = stacked();
        let mut s = Session::new(&g, MatchConfig::default()).unwrap();
        assert_eq!(s.finalize(), Err(Error::EmptyLattice));
        let far: Vec<Observation> = drive(4, 500.0);
        for o in &far {
            let r = s.match_step(o).unwrap();
            assert!(r.restart && r.road.is_none() && r.probabilities.is_empty());
        }
        let fin = s.finalize().unwrap();
        assert_eq!(fin.len(), 4);
        assert!(fin.iter().all(|r| r.road.is_none()));
    }

    #[test]
    fn single_step_finalize_matches_online() {
        let g = stacked();
        let mut s = Session::new(&g, MatchConfig::default()).unwrap();
        let r = s.match_step(&drive(1, 1.0)[0]).unwrap();
        assert_eq!(s.finalize().unwrap(), vec![r]);
    }

    #[test]
    fn rejects_non_increasing_time() {
        let g = stacked();
        let mut s = Session::new(&g, MatchConfig::default()).unwrap();
        let o = drive(1, 1.0).remove(0);
        s.match_step(&o).unwrap();
        assert!(s.match_step(&o).is_err());
        assert_eq!(s.records().len(), 1);
    }

    /// Main road east, a ramp leaving its end at a small angle, and the main
    /// road continuing. Observations sit between the two branches.
    fn split() -> RoadGraph {
        RoadGraph::new(
            vec![
                spec(1, &[(0.0, 0.0), (100.0, 0.0)], RoadClass::Ordinary, 0),
                spec(2, &[(100.0, 0.0), (300.0, 0.0)], RoadClass::Ordinary, 0),
                spec(3, &[(100.0, 0.0), (300.0, 25.0)], RoadClass::Expressway, 0),
            ],
            (0.0, 0.0),
        )
        .unwrap()
    }

    #[test]
    fn finalized_path_is_connected_and_optimal() {
        let g = split();
        let ys = [0.0, 0.5, 2.0, 3.2, 3.0, 5.0, 6.5, 8.0];
        let obs: Vec<Observation> = ys
            .iter()
            .enumerate()
            .map(|(k, &y)| Observation::new(k as f64, Pose::new(PointXY::new(60.0 + 25.0 * k as f64, y), 85.0)))
            .collect();
        let mut s = Session::new(&g, MatchConfig::baseline()).unwrap();
        for o in &obs {
            s.match_step(o).unwrap();
        }
        let fin: Vec<RoadId> = s.finalize().unwrap().iter().map(|r| r.road.unwrap()).collect();
        let tp = HmmParams::default().transition;
        for w in fin.windows(2) {
            assert!(transition(&g, w[0], w[1], &tp).unwrap() > libm::log(tp.eps_transition));
        }
        // enumeration oracle over every road sequence
        let params = HmmParams::default();
        let emit = |k: usize, r: RoadId| -> Option<f64> {
            let p = g.road(r).unwrap().project(obs[k].pose.position);
            (p.distance <= params.emission.candidate_radius).then(|| pose_emission(&obs[k].pose, &p, &params.emission))
        };
        let roads = [RoadId(1), RoadId(2), RoadId(3)];
        let mut best = (f64::NEG_INFINITY, vec![]);
        let n = obs.len();
        for code in 0..3usize.pow(n as u32) {
            let seq: Vec<RoadId> = (0..n).map(|k| roads[(code / 3usize.pow(k as u32)) % 3]).collect();
            let mut total = 0.0;
            let mut ok = true;
            for k in 0..n {
                match emit(k, seq[k]) {
                    Some(e) => total += e,
                    None => ok = false,
                }
                if k > 0 {
                    total += transition(&g, seq[k - 1], seq[k], &tp).unwrap();
                }
            }
            if ok && total > best.0 + 1e-12 {
                best = (total, seq);
            }
        }
        assert_eq!(fin, best.1);
    }

    #[test]
    fn headings_from_positions() {
        let pts = [PointXY::new(0.0, 0.0), PointXY::new(0.0, 10.0), PointXY::new(0.0, 10.0), PointXY::new(10.0, 10.0)];
        assert_eq!(derive_headings(&pts), vec![0.0, 0.0, 90.0, 90.0]);
        assert_eq!(derive_headings(&[PointXY::new(1.0, 1.0)]), vec![0.0]);
        assert!(derive_headings(&[]).is_empty());
    }
}
