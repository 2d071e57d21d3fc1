//! Implementations behind the `mapmatch` subcommands.

use std::path::{Path, PathBuf};

use mapmatch_core::lane::{build_enriched_map, EnrichedMap};
use mapmatch_core::metrics::{evaluate, EvalReport};
use mapmatch_core::pipeline::MatchConfig;
use mapmatch_core::scenario::ScenarioStream;
use mapmatch_core::Error as CoreError;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::RunConfig;
use crate::error::{CliError, Result};
use crate::eval::{ablate, enrich_network, run_session, SessionOutput, Variant};
use crate::formats::*;
use crate::sim::{generate_network, simulate, SimBundle, SimConfig};

/// Reads the map and lanes and writes the enriched map document.
pub fn enrich(map: &Path, lanes: &Path, config: &RunConfig, out: &Path) -> Result<()> {
    let doc = read_map(map)?;
    let graph = doc.to_graph()?;
    let lanes = parse_lanes(lanes, &read_text(lanes)?)?;
    let enriched = build_enriched_map(graph, lanes, &config.association_params())?;
    write_text(out, &enriched_to_string(&EnrichedDoc::new(doc, &enriched)))
}

/// Road network source for `match` and `eval`.
#[derive(Debug, Clone)]
pub enum MapSource {
    Plain(PathBuf),
    Enriched(PathBuf),
}

impl MapSource {
    pub fn load(&self) -> Result<EnrichedMap> {
        match self {
            MapSource::Plain(p) => Ok(EnrichedMap::from_parts(read_map(p)?.to_graph()?, vec![], vec![])?),
            MapSource::Enriched(p) => parse_enriched(p, &read_text(p)?)?.to_enriched(p),
        }
    }
}

#[derive(Debug, Clone)]
pub struct MatchArgs {
    pub map: MapSource,
    pub trajectory: PathBuf,
    pub detections: Option<PathBuf>,
    pub scenario: Option<PathBuf>,
    pub out: PathBuf,
    pub geojson: Option<PathBuf>,
}

/// Runs the matcher over a trajectory. Writes nothing and fails with an
/// empty-lattice error when no step could be matched.
pub fn match_trajectory(args: &MatchArgs, config: &RunConfig) -> Result<SessionOutput> {
    let enriched = args.map.load()?;
    let text = read_text(&args.trajectory)?;
    let mut observations = parse_trajectory(&args.trajectory, &text, enriched.graph.origin)?;
    if let Some(p) = &args.detections {
        attach_detections(p, &mut observations, parse_detections(p, &read_text(p)?)?)?;
    }
    let stream = match &args.scenario {
        Some(p) => Some(ScenarioStream::new(parse_scenario(p, &read_text(p)?)?, config.stale_window)?),
        None => None,
    };
    let out = run_session(&enriched, &observations, stream.as_ref(), &config.match_config())?;
    if out.finalized.iter().all(|r| r.road.is_none()) {
        return Err(CoreError::EmptyLattice.into());
    }
    write_text(&args.out, &match_output_to_string(&out.online, &out.finalized))?;
    if let Some(p) = &args.geojson {
        write_text(p, &overlay_geojson(&enriched.graph, &out.online, &out.finalized))?;
    }
    Ok(out)
}

/// Scores a match output against ground truth. Sequences must have the
/// same length and timestamps.
pub fn eval(pred: &Path, truth: &Path, map: &MapSource) -> Result<EvalReport> {
    let enriched = map.load()?;
    let out = parse_match_output(pred, &read_text(pred)?)?;
    let truth = parse_truth(truth, &read_text(truth)?)?;
    let roads = out.roads();
    if roads.len() != truth.len() {
        return Err(CoreError::LengthMismatch { predicted: roads.len(), truth: truth.len() }.into());
    }
    if let Some(k) = out.times().iter().zip(&truth.t).position(|(a, b)| (a - b).abs() > 1e-6) {
        return Err(CliError::Mismatch(format!("timestamps differ at step {k}")));
    }
    Ok(evaluate(&roads, &truth, &out.positions(), &enriched.graph)?)
}

#[derive(Serialize)]
struct ReportDoc {
    match_rate: f64,
    precision: f64,
    recall: f64,
    f1: f64,
    n_correct: usize,
    n_all: usize,
    l_correct: f64,
    l_mm: f64,
    l_gt: f64,
}

pub fn report_to_string(r: &EvalReport) -> String {
    let doc = ReportDoc {
        match_rate: r.match_rate,
        precision: r.precision,
        recall: r.recall,
        f1: r.f1,
        n_correct: r.n_correct,
        n_all: r.n_all,
        l_correct: r.l_correct,
        l_mm: r.l_mm,
        l_gt: r.l_gt,
    };
    serde_json::to_string_pretty(&doc).expect("plain data serializes") + "\n"
}

/// Writes one simulated bundle in the pipeline's input formats.
pub fn write_bundle(bundle: &SimBundle, cfg: &SimConfig, dir: &Path) -> Result<()> {
    let net = &bundle.network;
    let drive = &bundle.drive;
    write_text(&dir.join("map.geojson"), &map_to_string(&MapDoc::from_graph(&net.graph)))?;
    write_text(&dir.join("lanes.jsonl"), &lanes_to_string(&net.lanes))?;
    write_text(&dir.join("trajectory.jsonl"), &trajectory_to_string(&drive.observations))?;
    let frames: Vec<_> = drive.observations.iter().filter_map(|o| o.detections.clone().map(|d| (o.t, d))).collect();
    write_text(&dir.join("detections.jsonl"), &detections_to_string(&frames))?;
    write_text(&dir.join("scenario.jsonl"), &scenario_to_string(&drive.scenario))?;
    write_text(&dir.join("truth.jsonl"), &truth_to_string(&drive.truth))?;
    write_text(&dir.join("sim.toml"), &crate::config::dump(cfg)?)
}

/// Inclusive-exclusive seed range `a..b`, or a single seed.
pub fn parse_seeds(s: &str) -> Result<Vec<u64>> {
    let bad = || CliError::Usage(format!("invalid seed range `{s}`, expected a..b"));
    match s.split_once("..") {
        Some((a, b)) => {
            let (a, b): (u64, u64) = (a.parse().map_err(|_| bad())?, b.parse().map_err(|_| bad())?);
            if a >= b {
                return Err(bad());
            }
            Ok((a..b).collect())
        }
        None => Ok(vec![s.parse().map_err(|_| bad())?]),
    }
}

/// Per-seed ablation rows plus the median row of each variant.
pub fn ablation_csv(rows: &[(u64, Vec<(Variant, EvalReport)>)]) -> String {
    let mut out = String::from("seed,variant,match_rate,precision,recall,f1\n");
    for (seed, reports) in rows {
        for (v, r) in reports {
            out.push_str(&format!("{seed},{},{:.6},{:.6},{:.6},{:.6}\n", v.label(), r.match_rate, r.precision, r.recall, r.f1));
        }
    }
    for (i, v) in Variant::ALL.iter().enumerate() {
        let col = |f: fn(&EvalReport) -> f64| median(rows.iter().map(|(_, r)| f(&r[i].1)).collect());
        out.push_str(&format!(
            "median,{},{:.6},{:.6},{:.6},{:.6}\n",
            v.label(),
            col(|r| r.match_rate),
            col(|r| r.precision),
            col(|r| r.recall),
            col(|r| r.f1)
        ));
    }
    out
}

pub fn median(mut xs: Vec<f64>) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

/// Generates one bundle per seed. With several seeds each lands in its
/// own `seed-N` directory. `ablate_with` additionally scores the four
/// ablation variants and writes `ablation.csv`.
pub fn sim(cfg: &SimConfig, seeds: &[u64], out: &Path, ablate_with: Option<&RunConfig>) -> Result<()> {
    cfg.validate()?;
    let sharded = seeds.len() > 1;
    let enriched = match ablate_with {
        Some(rc) => Some(enrich_network(&generate_network(&cfg.network)?, &rc.association_params())?),
        None => None,
    };
    let base: MatchConfig = ablate_with.map(RunConfig::match_config).unwrap_or_default();
    let rows = seeds
        .par_iter()
        .map(|&seed| {
            let cfg = SimConfig { seed, ..cfg.clone() };
            let bundle = simulate(&cfg)?;
            let dir = if sharded { out.join(format!("seed-{seed}")) } else { out.to_path_buf() };
            write_bundle(&bundle, &cfg, &dir)?;
            match &enriched {
                Some(e) => Ok(Some((seed, ablate(&bundle, e, &base)?))),
                None => Ok(None),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    if enriched.is_some() {
        let rows: Vec<_> = rows.into_iter().flatten().collect();
        write_text(&out.join("ablation.csv"), &ablation_csv(&rows))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeds() {
        assert_eq!(parse_seeds("3").unwrap(), vec![3]);
        assert_eq!(parse_seeds("0..4").unwrap(), vec![0, 1, 2, 3]);
        assert!(parse_seeds("4..4").is_err());
        assert!(parse_seeds("a..4").is_err());
    }

    #[test]
    fn median_of_odd_and_even_counts() {
        assert_eq!(median(vec![3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(vec![4.0, 1.0, 2.0, 3.0]), 2.5);
        assert!(median(vec![]).is_nan());
    }
}
