//! Runs drives through the matcher and scores them.

use mapmatch_core::geom::PointXY;
use mapmatch_core::graph::RoadId;
use mapmatch_core::lane::{build_enriched_map, AssociationParams, EnrichedMap};
use mapmatch_core::metrics::{evaluate, EvalReport, GroundTruth};
use mapmatch_core::pipeline::{MatchConfig, MatchRecord, Observation, Session};
use mapmatch_core::scenario::{ScenarioProbs, ScenarioStream, DEFAULT_STALE_WINDOW_S};
use mapmatch_core::Error;
use serde::Serialize;

use crate::sim::{Network, SimBundle};

/// The four rows of the ablation table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Variant {
    Baseline,
    Scenario,
    Lane,
    Full,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::Baseline, Variant::Scenario, Variant::Lane, Variant::Full];

    pub fn label(self) -> &'static str {
        match self {
            Variant::Baseline => "baseline",
            Variant::Scenario => "baseline+ps",
            Variant::Lane => "baseline+pl",
            Variant::Full => "full",
        }
    }

    /// Applies the variant's switches on top of `base`.
    pub fn config(self, base: &MatchConfig) -> MatchConfig {
        let (pl, ps) = match self {
            Variant::Baseline => (false, false),
            Variant::Scenario => (false, true),
            Variant::Lane => (true, false),
            Variant::Full => (true, true),
        };
        MatchConfig { enable_lane_factor: pl, enable_scenario: ps, pose_correction: pl && base.pose_correction, ..*base }
    }
}

/// Online and finalized records of one session.
#[derive(Debug, Clone)]
pub struct SessionOutput {
    pub online: Vec<MatchRecord>,
    pub finalized: Vec<MatchRecord>,
}

pub fn run_session(
    enriched: &EnrichedMap,
    observations: &[Observation],
    scenario: Option<&ScenarioStream>,
    config: &MatchConfig,
) -> Result<SessionOutput, Error> {
    let mut session = Session::with_enriched(enriched, *config)?;
    if let Some(s) = scenario {
        session.set_scenario_stream(s);
    }
    let online = observations.iter().map(|o| session.match_step(o)).collect::<Result<Vec<_>, _>>()?;
    let finalized = session.finalize()?;
    Ok(SessionOutput { online, finalized })
}

pub fn enrich_network(net: &Network, params: &AssociationParams) -> Result<EnrichedMap, Error> {
    build_enriched_map(net.graph.clone(), net.lanes.clone(), params)
}

pub fn score(records: &[MatchRecord], truth: &GroundTruth, enriched: &EnrichedMap) -> Result<EvalReport, Error> {
    let pred: Vec<Option<RoadId>> = records.iter().map(|r| r.road).collect();
    let positions: Vec<PointXY> = records.iter().map(|r| r.pose.position).collect();
    evaluate(&pred, truth, &positions, &enriched.graph)
}

pub fn scenario_stream(records: &[ScenarioProbs]) -> Result<ScenarioStream, Error> {
    ScenarioStream::new(records.to_vec(), DEFAULT_STALE_WINDOW_S)
}

/// Scores every variant on one simulated bundle against a shared enriched map.
pub fn ablate(bundle: &SimBundle, enriched: &EnrichedMap, base: &MatchConfig) -> Result<Vec<(Variant, EvalReport)>, Error> {
    let stream = scenario_stream(&bundle.drive.scenario)?;
    Variant::ALL
        .iter()
        .map(|&v| {
            let out = run_session(enriched, &bundle.drive.observations, Some(&stream), &v.config(base))?;
            Ok((v, score(&out.finalized, &bundle.drive.truth, enriched)?))
        })
        .collect()
}
