//! Acceptance criteria. Runs as a plain binary so that every criterion
//! prints one PASS/FAIL line; exits non-zero if any fails.

use std::collections::BTreeMap;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use mapmatch::commands::median;
use mapmatch::eval::{ablate, enrich_network, run_session, scenario_stream, Variant};
use mapmatch::sim::*;
use mapmatch_core::geom::{heading_diff, PointXY, Pose};
use mapmatch_core::graph::{RoadClass, RoadGraph, RoadId, RoadSpec};
use mapmatch_core::hmm::{emission_heading, transition, Emission, MatcherState, TransitionParams};
use mapmatch_core::icp::{correspondence_cost, icp_register, IcpParams, TypedPoint};
use mapmatch_core::lane::{associate_lane_report, AssociationParams, EnrichedMap, LaneMarking, LaneType};
use mapmatch_core::metrics::{evaluate, match_rate, prf_from_lengths};
use mapmatch_core::pipeline::MatchConfig;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use sha2::{Digest, Sha256};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn within(elapsed: Duration, limit_s: f64) -> bool {
    elapsed.as_secs_f64() < limit_s
}

// ------------------------------------------------------------ viterbi

struct Instance {
    /// Candidate roads and their log emission per step.
    emissions: Vec<Vec<(usize, f64)>>,
    trans: [[f64; 5]; 5],
}

fn random_instance(rng: &mut ChaCha8Rng) -> Instance {
    let roads = rng.random_range(1..=5usize);
    let steps = rng.random_range(1..=8usize);
    let mut trans = [[0.0; 5]; 5];
    for row in trans.iter_mut().take(roads) {
        for v in row.iter_mut().take(roads) {
            *v = -rng.random_range(0.0..6.0);
        }
    }
    let emissions = (0..steps)
        .map(|_| {
            let mut set = Vec::new();
            for r in 0..roads {
                if rng.random_bool(0.75) {
                    set.push((r, -rng.random_range(0.0..6.0)));
                }
            }
            if set.is_empty() {
                let r = rng.random_range(0..roads);
                set.push((r, -rng.random_range(0.0..6.0)));
            }
            set
        })
        .collect();
    Instance { emissions, trans }
}

/// Visits every road sequence; records the best full sequence and the
/// best score of every prefix ending in each road.
fn enumerate(inst: &Instance) -> (Vec<usize>, Vec<BTreeMap<usize, f64>>) {
    fn rec(
        inst: &Instance,
        k: usize,
        prev: Option<usize>,
        score: f64,
        path: &mut Vec<usize>,
        best: &mut (f64, Vec<usize>),
        prefix: &mut Vec<BTreeMap<usize, f64>>,
    ) {
        if k == inst.emissions.len() {
            if score > best.0 {
                *best = (score, path.clone());
            }
            return;
        }
        for &(r, e) in &inst.emissions[k] {
            let s = score + e + prev.map_or(0.0, |p| inst.trans[p][r]);
            let slot = prefix[k].entry(r).or_insert(f64::NEG_INFINITY);
            *slot = slot.max(s);
            path.push(r);
            rec(inst, k + 1, Some(r), s, path, best, prefix);
            path.pop();
        }
    }
    let mut best = (f64::NEG_INFINITY, Vec::new());
    let mut prefix = vec![BTreeMap::new(); inst.emissions.len()];
    rec(inst, 0, None, 0.0, &mut Vec::new(), &mut best, &mut prefix);
    (best.1, prefix)
}

fn viterbi_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let n = 200;
    let mut worst = 0.0f64;
    for i in 0..n {
        let inst = random_instance(&mut rng);
        let mut state = MatcherState::new();
        for step in &inst.emissions {
            let em: Vec<Emission> =
                step.iter().map(|&(r, e)| Emission { road: RoadId(r as i64), log_factor: e, projection: None }).collect();
            state.advance(&em, |a, b| inst.trans[a.0 as usize][b.0 as usize]);
        }
        let (best, prefix) = enumerate(&inst);
        let decoded: Vec<usize> = state.backtrack().map_err(|e| e.to_string())?.iter().map(|r| r.unwrap().0 as usize).collect();
        if decoded != best {
            return Err(format!("instance {i}: decoded {decoded:?}, enumeration {best:?}"));
        }
        for (k, roads) in prefix.iter().enumerate() {
            for (&r, &v) in roads {
                let got = state.unnormalized_log_joint(k, RoadId(r as i64)).ok_or("missing lattice node")?;
                worst = worst.max((got - v).abs());
            }
        }
    }
    let t = start.elapsed();
    ensure(worst < 1e-9 && within(t, 10.0), format!("{n} instances, max |Δ log joint| = {worst:.2e}, {t:.2?}"))
}

// ---------------------------------------------------- factor values

fn factor_values() -> Outcome {
    let h45 = emission_heading(45.0, 1e-4);
    let h120 = emission_heading(120.0, 1e-4);
    let mk = |id: i64, a: f64, b: f64, succ: &[i64]| RoadSpec {
        id: RoadId(id),
        polyline: vec![PointXY::new(a, 0.0), PointXY::new(b, 0.0)],
        class: RoadClass::Ordinary,
        level: 0,
        successors: Some(succ.iter().map(|&s| RoadId(s)).collect()),
    };
    let g = RoadGraph::new(vec![mk(1, 0.0, 50.0, &[2]), mk(2, 50.0, 80.0, &[3]), mk(3, 80.0, 100.0, &[])], (0.0, 0.0))
        .map_err(|e| e.to_string())?;
    let tr = transition(&g, RoadId(1), RoadId(3), &TransitionParams::default()).map_err(|e| e.to_string())?;
    let cost = correspondence_cost(&TypedPoint::new(0.0, 0.0, LaneType::Solid), &TypedPoint::new(3.0, 4.0, LaneType::Dashed), 2.0);
    let errs = [(h45 - 0.5f64.ln()).abs(), (h120 - 1e-4f64.ln()).abs(), (tr + 0.6).abs(), (cost - 29f64.sqrt()).abs()];
    ensure(
        errs.iter().all(|e| *e <= 1e-12),
        format!(
            "heading(45)={h45}, heading(120)={h120}, transition={tr}, cost={cost}; max error {:.1e}",
            errs.iter().fold(0.0f64, |a, b| a.max(*b))
        ),
    )
}

// -------------------------------------------------------------- icp

/// Solid marking along the road and a dashed one crossing it 15 m ahead.
fn junction() -> EnrichedMap {
    let g = RoadGraph::new(
        vec![RoadSpec {
            id: RoadId(1),
            polyline: vec![PointXY::new(0.0, -50.0), PointXY::new(0.0, 50.0)],
            class: RoadClass::Ordinary,
            level: 0,
            successors: None,
        }],
        (0.0, 0.0),
    )
    .unwrap();
    let a = [PointXY::new(1.75, -50.0), PointXY::new(1.75, 50.0)];
    let b = [PointXY::new(-40.0, 15.0), PointXY::new(40.0, 15.0)];
    let lanes = vec![
        LaneMarking::from_polyline(1, &a, LaneType::Solid, 0.5).unwrap(),
        LaneMarking::from_polyline(2, &b, LaneType::Dashed, 0.5).unwrap(),
    ];
    EnrichedMap::from_parts(g, lanes, vec![]).unwrap()
}

/// Share of seeds whose recovered pose is within the tolerances.
fn icp_trials(map: &EnrichedMap, noise: f64, tol_m: f64, tol_deg: f64) -> (usize, usize, f64, f64) {
    let truth = Pose::new(PointXY::new(0.0, 0.0), 0.0);
    let params = IcpParams::default();
    let (mut ok, mut worst_t, mut worst_r) = (0, 0.0f64, 0.0f64);
    let n = 100;
    for seed in 0..n as u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let det: Vec<TypedPoint> = map
            .cloud()
            .iter()
            .step_by(4)
            .filter_map(|c| {
                let v = truth.to_vehicle(c.position);
                (v.x >= 0.0 && v.x <= 30.0 && v.y.abs() <= 15.0).then_some((v, c.kind))
            })
            .map(|(v, kind)| {
                let (nx, ny): (f64, f64) = (rng.sample(StandardNormal), rng.sample(StandardNormal));
                TypedPoint { position: v + PointXY::new(nx * noise, ny * noise), kind }
            })
            .collect();
        let ang: f64 = rng.random_range(0.0..std::f64::consts::TAU);
        let mag = 3.0 * rng.random::<f64>().sqrt();
        let rot: f64 = rng.random_range(-5.0..5.0);
        let init = Pose::new(PointXY::new(mag * ang.cos(), mag * ang.sin()), rot);
        if let Ok(out) = icp_register(&det, map, &init, &params) {
            let c = out.corrected_pose(&init);
            let (et, er) = (c.position.distance(truth.position), heading_diff(c.heading, truth.heading));
            worst_t = worst_t.max(et);
            worst_r = worst_r.max(er);
            ok += (et < tol_m && er < tol_deg) as usize;
        } else {
            worst_t = f64::INFINITY;
        }
    }
    (ok, n, worst_t, worst_r)
}

fn icp_recovery() -> Outcome {
    let start = Instant::now();
    let map = junction();
    let (clean, n, ct, cr) = icp_trials(&map, 0.0, 0.05, 0.1);
    let (noisy, _, nt, nr) = icp_trials(&map, 0.1, 0.2, 0.5);
    let t = start.elapsed();
    ensure(
        clean == n && noisy * 100 >= 95 * n && within(t, 5.0),
        format!("noise-free {clean}/{n} (worst {ct:.1e} m, {cr:.1e}°), 0.1 m noise {noisy}/{n} (worst {nt:.3} m, {nr:.3}°), {t:.2?}"),
    )
}

// ---------------------------------------------------- associations

fn association_contract() -> Outcome {
    let params = AssociationParams::default();
    let mut fixtures = vec![generate_network(&NetworkConfig::default()).map_err(|e| e.to_string())?];
    fixtures.push(split_fixture(&SplitConfig::default()).map_err(|e| e.to_string())?.network);
    let (mut lanes, mut assocs, mut worst) = (0, 0, 0.0f64);
    for net in &fixtures {
        for lane in &net.lanes {
            lanes += 1;
            let report = associate_lane_report(&net.graph, lane, &params);
            for a in &report.associations {
                assocs += 1;
                let max = a.per_point.iter().map(|p| p.1).fold(0.0, f64::max);
                if a.probability.to_bits() != max.to_bits() {
                    return Err(format!("lane {} road {}: {} != max {}", lane.id, a.road.0, a.probability, max));
                }
            }
            for dist in report.per_point.iter().filter(|d| !d.is_empty()) {
                worst = worst.max((dist.iter().map(|p| p.1).sum::<f64>() - 1.0).abs());
            }
        }
    }
    ensure(worst <= 1e-9, format!("{lanes} lanes, {assocs} associations equal their per-point max; max |Σp − 1| = {worst:.1e}"))
}

// ------------------------------------------------------- benchmark

fn table_three() -> Outcome {
    let start = Instant::now();
    let cfg = SimConfig::default();
    if cfg.noise.gnss_sigma != 10.0 || cfg.scenario_accuracy != 0.9 || cfg.detection.point_noise != 0.2 {
        return Err("benchmark defaults differ from the stated setting".into());
    }
    let net = generate_network(&cfg.network).map_err(|e| e.to_string())?;
    let enriched = enrich_network(&net, &AssociationParams::default()).map_err(|e| e.to_string())?;
    let runs: Vec<Vec<f64>> = (0..20u64)
        .into_par_iter()
        .map(|seed| {
            let b = simulate(&SimConfig { seed, ..cfg.clone() }).map_err(|e| e.to_string())?;
            let res = ablate(&b, &enriched, &MatchConfig::default()).map_err(|e| e.to_string())?;
            Ok(res.iter().map(|(_, r)| r.f1).collect())
        })
        .collect::<Result<_, String>>()?;
    let med: Vec<f64> = (0..4).map(|i| median(runs.iter().map(|r| r[i]).collect())).collect();
    let (base, ps, pl, full) = (med[0], med[1], med[2], med[3]);
    let t = start.elapsed();
    let labels: Vec<String> = Variant::ALL.iter().zip(&med).map(|(v, m)| format!("{} {m:.3}", v.label())).collect();
    ensure(
        base < ps && base < pl && full >= ps.max(pl) && full >= 0.90 && base <= 0.80 && within(t, 120.0),
        format!("median F1 over 20 seeds: {}, {t:.2?}", labels.join(", ")),
    )
}

fn road_split() -> Outcome {
    let (mut pl_ramp, mut base_main) = (0, 0);
    for seed in 0..20u64 {
        let b = split_fixture(&SplitConfig { seed, ..SplitConfig::default() }).map_err(|e| e.to_string())?;
        let en = enrich_network(&b.network, &AssociationParams::default()).map_err(|e| e.to_string())?;
        let end = |v: Variant| -> Result<Option<RoadId>, String> {
            let out = run_session(&en, &b.drive.observations, None, &v.config(&MatchConfig::default())).map_err(|e| e.to_string())?;
            Ok(out.finalized.last().and_then(|r| r.road))
        };
        pl_ramp += (end(Variant::Lane)? == Some(SPLIT_RAMP)) as usize;
        base_main += (end(Variant::Baseline)? == Some(SPLIT_MAIN_AFTER)) as usize;
    }
    ensure(pl_ramp >= 18 && base_main >= 10, format!("with P_L on the ramp {pl_ramp}/20, baseline on the main road {base_main}/20"))
}

fn elevated_surface() -> Outcome {
    let cfg = SimConfig { route: RouteKind::Elevated, ..SimConfig::default() };
    let net = generate_network(&cfg.network).map_err(|e| e.to_string())?;
    let enriched = enrich_network(&net, &AssociationParams::default()).map_err(|e| e.to_string())?;
    let rates: Vec<(f64, f64)> = (0..20u64)
        .into_par_iter()
        .map(|seed| {
            let b = simulate(&SimConfig { seed, ..cfg.clone() }).map_err(|e| e.to_string())?;
            let stream = scenario_stream(&b.drive.scenario).map_err(|e| e.to_string())?;
            let rate = |v: Variant| -> Result<f64, String> {
                let out = run_session(&enriched, &b.drive.observations, Some(&stream), &v.config(&MatchConfig::default()))
                    .map_err(|e| e.to_string())?;
                let pred: Vec<_> = out.finalized.iter().map(|r| r.road).collect();
                match_rate(&pred, &b.drive.truth.roads).map_err(|e| e.to_string())
            };
            Ok((rate(Variant::Baseline)?, rate(Variant::Scenario)?))
        })
        .collect::<Result<_, String>>()?;
    let base = median(rates.iter().map(|r| r.0).collect());
    let ps = median(rates.iter().map(|r| r.1).collect());
    ensure(ps >= 0.95 && base <= 0.70, format!("elevated route match rate medians: with P_S {ps:.3}, baseline {base:.3}"))
}

// --------------------------------------------------------- metrics

fn metrics_exactness() -> Outcome {
    let r6 = |v: f64| (v * 1e6).round() / 1e6;
    let (p, r, f) = prf_from_lengths(80.0, 100.0, 90.0).map_err(|e| e.to_string())?;
    let b = simulate(&SimConfig::default()).map_err(|e| e.to_string())?;
    let pred: Vec<_> = b.drive.truth.roads.iter().copied().map(Some).collect();
    let positions: Vec<PointXY> = b.drive.true_poses.iter().map(|p| p.position).collect();
    let id = evaluate(&pred, &b.drive.truth, &positions, &b.network.graph).map_err(|e| e.to_string())?;
    ensure(
        (r6(p), r6(r), r6(f)) == (0.8, 0.888889, 0.842105) && [id.match_rate, id.precision, id.recall, id.f1] == [1.0; 4],
        format!("(80, 100, 90) -> ({p:.6}, {r:.6}, {f:.6}); identity -> ({}, {}, {}, {})", id.match_rate, id.precision, id.recall, id.f1),
    )
}

// ----------------------------------------------------- determinism

fn hash_tree(dir: &Path) -> BTreeMap<String, String> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let digest = Sha256::digest(std::fs::read(&p).unwrap());
                let key = p.strip_prefix(dir).unwrap().display().to_string();
                out.insert(key, digest.iter().map(|b| format!("{b:02x}")).collect());
            }
        }
    }
    out
}

/// Runs every subcommand into `dir`; stdout of each goes to a file.
fn cli_session(dir: &Path) -> Result<(), String> {
    let bin = env!("CARGO_BIN_EXE_mapmatch");
    let s = |p: &str| dir.join(p).display().to_string();
    let runs: Vec<(&str, Vec<String>)> = vec![
        ("sim", vec!["sim".into(), "--out".into(), s("one"), "--seed".into(), "4".into()]),
        ("sims", vec!["sim".into(), "--out".into(), s("many"), "--seeds".into(), "0..2".into(), "--ablate".into()]),
        (
            "enrich",
            vec![
                "enrich".into(),
                "--map".into(),
                s("one/map.geojson"),
                "--lanes".into(),
                s("one/lanes.jsonl"),
                "--out".into(),
                s("enriched.json"),
            ],
        ),
        (
            "match",
            vec![
                "match".into(),
                "--enriched".into(),
                s("enriched.json"),
                "--traj".into(),
                s("one/trajectory.jsonl"),
                "--lanes".into(),
                s("one/detections.jsonl"),
                "--scenario".into(),
                s("one/scenario.jsonl"),
                "--out".into(),
                s("match.jsonl"),
                "--emit-geojson".into(),
                s("overlay.geojson"),
            ],
        ),
        (
            "match-baseline",
            vec![
                "match".into(),
                "--map".into(),
                s("one/map.geojson"),
                "--traj".into(),
                s("one/trajectory.jsonl"),
                "--disable-pl".into(),
                "--disable-ps".into(),
                "--no-pose-correction".into(),
                "--out".into(),
                s("baseline.jsonl"),
            ],
        ),
        (
            "eval",
            vec![
                "eval".into(),
                "--map".into(),
                s("one/map.geojson"),
                "--pred".into(),
                s("match.jsonl"),
                "--truth".into(),
                s("one/truth.jsonl"),
            ],
        ),
        ("config", vec!["config".into(), "--dump".into()]),
        ("config-sim", vec!["config".into(), "--dump".into(), "--sim".into()]),
    ];
    for (name, args) in runs {
        let out = Command::new(bin).args(&args).output().map_err(|e| e.to_string())?;
        if !out.status.success() {
            return Err(format!("{name} failed: {}", String::from_utf8_lossy(&out.stderr)));
        }
        std::fs::write(dir.join(format!("{name}.stdout")), &out.stdout).map_err(|e| e.to_string())?;
    }
    Ok(())
}

fn determinism() -> Outcome {
    let (a, b) = (tempfile::tempdir().map_err(|e| e.to_string())?, tempfile::tempdir().map_err(|e| e.to_string())?);
    cli_session(a.path())?;
    cli_session(b.path())?;
    let (ha, hb) = (hash_tree(a.path()), hash_tree(b.path()));
    let differing: Vec<&String> = ha.iter().filter(|(k, v)| hb.get(*k) != Some(*v)).map(|(k, _)| k).collect();
    ensure(
        ha.len() == hb.len() && differing.is_empty(),
        format!("{} files hashed across two runs of every subcommand, differing: {differing:?}", ha.len()),
    )
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("viterbi matches exhaustive enumeration", viterbi_oracle),
        ("factor unit values", factor_values),
        ("icp recovery", icp_recovery),
        ("association equals per-point maximum", association_contract),
        ("ablation ordering on the multilevel benchmark", table_three),
        ("road split", road_split),
        ("elevated vs surface", elevated_surface),
        ("metrics exactness", metrics_exactness),
        ("cli determinism", determinism),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let outcome = std::panic::catch_unwind(check).unwrap_or_else(|e| {
            Err(e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default())
        });
        match outcome {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL  {name}: {detail}");
            }
        }
    }
    println!("{} of {} acceptance criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
