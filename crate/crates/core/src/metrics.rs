//! Match rate and length-based precision/recall/F1 against ground truth.

use alloc::vec::Vec;

use crate::error::Error;
use crate::geom::PointXY;
use crate::graph::{RoadGraph, RoadId};

/// True road per timestamp.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub t: Vec<f64>,
    pub roads: Vec<RoadId>,
}

impl GroundTruth {
    pub fn new(t: Vec<f64>, roads: Vec<RoadId>) -> Result<Self, Error> {
        if t.len() != roads.len() {
            return Err(Error::LengthMismatch { predicted: roads.len(), truth: t.len() });
        }
        Ok(GroundTruth { t, roads })
    }

    pub fn len(&self) -> usize {
        self.roads.len()
    }

    pub fn is_empty(&self) -> bool {
        self.roads.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EvalReport {
    pub match_rate: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub n_correct: usize,
    pub n_all: usize,
    pub l_correct: f64,
    pub l_mm: f64,
    pub l_gt: f64,
}

fn check_len(pred: usize, truth: usize) -> Result<(), Error> {
    if pred != truth {
        return Err(Error::LengthMismatch { predicted: pred, truth });
    }
    Ok(())
}

/// Returns `(N_correct, N_all)`. Unmatched steps are incorrect.
pub fn match_counts(pred: &[Option<RoadId>], truth: &[RoadId]) -> Result<(usize, usize), Error> {
    check_len(pred.len(), truth.len())?;
    let n = pred.iter().zip(truth).filter(|(p, t)| **p == Some(**t)).count();
    Ok((n, truth.len()))
}

pub fn match_rate(pred: &[Option<RoadId>], truth: &[RoadId]) -> Result<f64, Error> {
    let (n, all) = match_counts(pred, truth)?;
    if all == 0 {
        return Err(Error::DegenerateEval);
    }
    Ok(n as f64 / all as f64)
}

/// `(precision, recall, f1)` from the three lengths.
pub fn prf_from_lengths(l_correct: f64, l_mm: f64, l_gt: f64) -> Result<(f64, f64, f64), Error> {
    if !(l_mm > 0.0) || !(l_gt > 0.0) {
        return Err(Error::DegenerateEval);
    }
    let p = l_correct / l_mm;
    let r = l_correct / l_gt;
    let f1 = if p + r > 0.0 { 2.0 * p * r / (p + r) } else { 0.0 };
    Ok((p, r, f1))
}

/// Length travelled on the matched road at each step. Step 0 and steps
/// after an unmatched step contribute nothing. Along one road this is the
/// forward arc progress; into a direct successor it is the rest of the
/// previous road plus the progress on the new one; any other switch counts
/// the planar distance between the two projections.
pub fn traversal_lengths(roads: &[Option<RoadId>], positions: &[PointXY], graph: &RoadGraph) -> Result<Vec<f64>, Error> {
    check_len(roads.len(), positions.len())?;
    let mut out = Vec::with_capacity(roads.len());
    let mut prev: Option<(RoadId, f64, PointXY)> = None;
    for (r, p) in roads.iter().zip(positions) {
        let cur = match r {
            Some(id) => {
                let pr = graph.road(*id)?.project(*p);
                Some((*id, pr.arc_offset, pr.point))
            }
            None => None,
        };
        let step = match (prev, cur) {
            (Some((pr, pa, _)), Some((cr, ca, _))) if pr == cr => (ca - pa).max(0.0),
            (Some((pr, pa, pp)), Some((cr, ca, cp))) => {
                let prev_road = graph.road(pr)?;
                if prev_road.successors.contains(&cr) {
                    (prev_road.length() - pa).max(0.0) + ca
                } else {
                    pp.distance(cp)
                }
            }
            _ => 0.0,
        };
        out.push(step);
        prev = cur;
    }
    Ok(out)
}

/// Full evaluation of a predicted road sequence. `positions` are the
/// observed positions, used to measure progress for both sequences.
pub fn evaluate(pred: &[Option<RoadId>], truth: &GroundTruth, positions: &[PointXY], graph: &RoadGraph) -> Result<EvalReport, Error> {
    let (n_correct, n_all) = match_counts(pred, &truth.roads)?;
    if n_all == 0 {
        return Err(Error::DegenerateEval);
    }
    let truth_opt: Vec<Option<RoadId>> = truth.roads.iter().copied().map(Some).collect();
    let mm = traversal_lengths(pred, positions, graph)?;
    let gt = traversal_lengths(&truth_opt, positions, graph)?;
    let l_mm: f64 = mm.iter().sum();
    let l_gt: f64 = gt.iter().sum();
    let l_correct: f64 =
        pred.iter().zip(&truth.roads).zip(mm.iter().zip(&gt)).filter(|((p, t), _)| **p == Some(**t)).map(|(_, (a, b))| a.min(*b)).sum();
    let (precision, recall, f1) = prf_from_lengths(l_correct, l_mm, l_gt)?;
    Ok(EvalReport { match_rate: n_correct as f64 / n_all as f64, precision, recall, f1, n_correct, n_all, l_correct, l_mm, l_gt })
}
