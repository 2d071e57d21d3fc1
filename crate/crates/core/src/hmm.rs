//! Baseline HMM matcher: pose emission factors, connectivity transitions and
//! an online Viterbi lattice kept in the log domain.

use alloc::vec::Vec;

use crate::error::Error;
use crate::geom::{heading_diff, Pose, Projection};
use crate::graph::{Candidate, RoadGraph, RoadId, DEFAULT_PATH_CAP_M};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmissionParams {
    /// Standard deviation of the distance emission, meters.
    pub sigma: f64,
    /// Floor of the heading factor (U-turns, reverse driving).
    pub eps_heading: f64,
    pub candidate_radius: f64,
}

impl Default for EmissionParams {
    fn default() -> Self {
        EmissionParams { sigma: 20.0, eps_heading: 1e-4, candidate_radius: 50.0 }
    }
}

impl EmissionParams {
    pub fn validate(&self) -> Result<(), Error> {
        if !(self.sigma > 0.0) {
            return Err(Error::InvalidParams("sigma must be positive"));
        }
        if !(self.eps_heading > 0.0 && self.eps_heading < 1.0) {
            return Err(Error::InvalidParams("eps_heading must be in (0, 1)"));
        }
        if !(self.candidate_radius > 0.0) {
            return Err(Error::InvalidParams("candidate_radius must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransitionParams {
    /// Attenuation length of connected transitions, meters.
    pub gamma: f64,
    /// Floor for transitions between unconnected roads.
    pub eps_transition: f64,
    pub path_cap: f64,
}

impl Default for TransitionParams {
    fn default() -> Self {
        TransitionParams { gamma: 50.0, eps_transition: 1e-4, path_cap: DEFAULT_PATH_CAP_M }
    }
}

impl TransitionParams {
    pub fn validate(&self) -> Result<(), Error> {
        if !(self.gamma > 0.0) {
            return Err(Error::InvalidParams("gamma must be positive"));
        }
        if !(self.eps_transition > 0.0 && self.eps_transition < 1.0) {
            return Err(Error::InvalidParams("eps_transition must be in (0, 1)"));
        }
        if !(self.path_cap > 0.0) {
            return Err(Error::InvalidParams("path_cap must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct HmmParams {
    pub emission: EmissionParams,
    pub transition: TransitionParams,
}

impl HmmParams {
    pub fn validate(&self) -> Result<(), Error> {
        self.emission.validate()?;
        self.transition.validate()
    }
}

/// Log of the zero-mean Gaussian density at `d`.
pub fn emission_distance(d: f64, sigma: f64) -> f64 {
    let z = d / sigma;
    -0.5 * z * z - libm::log(sigma * libm::sqrt(2.0 * core::f64::consts::PI))
}

/// Log heading factor. The cosine branch is floored at `eps1` so the factor
/// stays finite and continuous into the U-turn regime.
pub fn emission_heading(delta_theta: f64, eps1: f64) -> f64 {
    if delta_theta < 90.0 {
        let v = (1.0 + libm::cos((2.0 * delta_theta).to_radians())) / 2.0;
        libm::log(v.max(eps1))
    } else {
        libm::log(eps1)
    }
}

/// Log transition factor from `from` to `to`.
pub fn transition(graph: &RoadGraph, from: RoadId, to: RoadId, params: &TransitionParams) -> Result<f64, Error> {
    Ok(match graph.min_connected_distance(from, to, params.path_cap)? {
        // no -0.0 for a same-road step
        Some(0.0) => 0.0,
        Some(d) => -d / params.gamma,
        None => libm::log(params.eps_transition),
    })
}

pub fn log_sum_exp(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = values.clone().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + libm::log(values.map(|v| libm::exp(v - max)).sum::<f64>())
}

#[derive(Debug, Clone, PartialEq)]
pub struct LatticeNode {
    pub road: RoadId,
    pub log_joint: f64,
    /// Best predecessor; `None` at the first step of a segment.
    pub backpointer: Option<RoadId>,
    pub projection: Option<Projection>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct LatticeStep {
    /// Sorted by road id.
    pub nodes: Vec<LatticeNode>,
    /// Amount subtracted from every raw score during normalization.
    pub log_norm: f64,
}

impl LatticeStep {
    /// An empty step marks a restart boundary.
    pub fn is_restart(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node(&self, road: RoadId) -> Option<&LatticeNode> {
        self.nodes.binary_search_by_key(&road, |n| n.road).ok().map(|i| &self.nodes[i])
    }

    /// Highest log joint; ties go to the smallest road id.
    pub fn best(&self) -> Option<&LatticeNode> {
        self.nodes.iter().fold(None, |best: Option<&LatticeNode>, n| match best {
            Some(b) if b.log_joint >= n.log_joint => Some(b),
            _ => Some(n),
        })
    }

    /// `exp(log_joint)` per node; sums to one on normalized lattices.
    pub fn probabilities(&self) -> impl Iterator<Item = (RoadId, f64)> + '_ {
        self.nodes.iter().map(|n| (n.road, libm::exp(n.log_joint)))
    }
}

/// One emission entry handed to [`MatcherState::advance`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Emission {
    pub road: RoadId,
    pub log_factor: f64,
    pub projection: Option<Projection>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatcherState {
    steps: Vec<LatticeStep>,
    normalize: bool,
}

impl Default for MatcherState {
    fn default() -> Self {
        MatcherState::new()
    }
}

impl MatcherState {
    pub fn new() -> Self {
        MatcherState { steps: Vec::new(), normalize: true }
    }

    /// Lattice that keeps raw scores. Only useful for checking that
    /// normalization leaves decoding unchanged.
    pub fn unnormalized() -> Self {
        MatcherState { steps: Vec::new(), normalize: false }
    }

    pub fn steps(&self) -> &[LatticeStep] {
        &self.steps
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Generic Viterbi recursion. `emissions` must hold distinct roads;
    /// `transition(from, to)` returns a log factor.
    pub fn advance(&mut self, emissions: &[Emission], mut transition: impl FnMut(RoadId, RoadId) -> f64) {
        let mut sorted: Vec<Emission> = emissions.to_vec();
        sorted.sort_by_key(|e| e.road);
        let prev = self.steps.last().filter(|s| !s.is_restart());
        let mut nodes: Vec<LatticeNode> = sorted
            .iter()
            .map(|e| {
                let (best, backpointer) = match prev {
                    None => (0.0, None),
                    Some(prev) => {
                        let mut best = f64::NEG_INFINITY;
                        let mut arg = None;
                        for p in &prev.nodes {
                            let s = p.log_joint + transition(p.road, e.road);
                            if arg.is_none() || s > best {
                                best = s;
                                arg = Some(p.road);
                            }
                        }
                        (best, arg)
                    }
                };
                LatticeNode { road: e.road, log_joint: best + e.log_factor, backpointer, projection: e.projection }
            })
            .collect();
        let log_norm = if self.normalize && !nodes.is_empty() {
            let lse = log_sum_exp(nodes.iter().map(|n| n.log_joint));
            for n in &mut nodes {
                n.log_joint -= lse;
            }
            lse
        } else {
            0.0
        };
        self.steps.push(LatticeStep { nodes, log_norm });
    }

    /// Advances the lattice with one pose. `extra` supplies the additional
    /// per-candidate log factors (zero for the baseline matcher).
    pub fn viterbi_step(
        &mut self,
        graph: &RoadGraph,
        pose: &Pose,
        params: &HmmParams,
        mut extra: impl FnMut(&Candidate) -> f64,
    ) -> Vec<Candidate> {
        let candidates = graph.candidates(pose.position, params.emission.candidate_radius);
        let emissions: Vec<Emission> = candidates
            .iter()
            .map(|c| Emission {
                road: c.road,
                log_factor: pose_emission(pose, &c.projection, &params.emission) + extra(c),
                projection: Some(c.projection),
            })
            .collect();
        let eps = libm::log(params.transition.eps_transition);
        self.advance(&emissions, |from, to| transition(graph, from, to, &params.transition).unwrap_or(eps));
        candidates
    }

    pub fn best_road(&self) -> Result<RoadId, Error> {
        self.steps.last().and_then(LatticeStep::best).map(|n| n.road).ok_or(Error::EmptyLattice)
    }

    /// Maximum-likelihood road per step; `None` on restart boundaries.
    pub fn backtrack(&self) -> Result<Vec<Option<RoadId>>, Error> {
        if self.steps.is_empty() {
            return Err(Error::EmptyLattice);
        }
        let mut out = Vec::with_capacity(self.steps.len());
        let mut current: Option<RoadId> = None;
        for step in self.steps.iter().rev() {
            if step.is_restart() {
                current = None;
                out.push(None);
                continue;
            }
            let road = match current {
                Some(r) => r,
                None => step.best().expect("non-empty step").road,
            };
            out.push(Some(road));
            current = step.node(road).and_then(|n| n.backpointer);
        }
        out.reverse();
        Ok(out)
    }

    /// Raw (pre-normalization) log joint of `road` at step `k`.
    pub fn unnormalized_log_joint(&self, k: usize, road: RoadId) -> Option<f64> {
        let node = self.steps.get(k)?.node(road)?;
        let mut offset = 0.0;
        for step in self.steps[..=k].iter().rev() {
            if step.is_restart() {
                break;
            }
            offset += step.log_norm;
        }
        Some(node.log_joint + offset)
    }
}

/// Distance and heading emission for one candidate projection.
pub fn pose_emission(pose: &Pose, projection: &Projection, params: &EmissionParams) -> f64 {
    emission_distance(projection.distance, params.sigma)
        + emission_heading(heading_diff(pose.heading, projection.road_heading), params.eps_heading)
}
