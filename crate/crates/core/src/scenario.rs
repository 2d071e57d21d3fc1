//! Driving-scenario probabilities turned into a per-road-class emission.

use alloc::vec::Vec;

use crate::error::Error;
use crate::graph::RoadClass;

/// Floor applied to scenario probabilities before taking logs.
pub const SCENARIO_FLOOR: f64 = 1e-4;

pub const DEFAULT_STALE_WINDOW_S: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScenarioProbs {
    pub t: f64,
    pub p_ordinary: f64,
    pub p_express: f64,
    pub p_tunnel: f64,
}

impl ScenarioProbs {
    /// Builds a record, renormalizing the three probabilities to sum to one.
    pub fn new(t: f64, p_ordinary: f64, p_express: f64, p_tunnel: f64) -> Result<Self, Error> {
        let ps = [p_ordinary, p_express, p_tunnel];
        if !t.is_finite() || ps.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::InvalidParams("scenario probabilities must be finite and non-negative"));
        }
        let sum: f64 = ps.iter().sum();
        if sum <= 0.0 {
            return Err(Error::InvalidParams("scenario probabilities sum to zero"));
        }
        Ok(ScenarioProbs { t, p_ordinary: p_ordinary / sum, p_express: p_express / sum, p_tunnel: p_tunnel / sum })
    }

    pub fn uniform(t: f64) -> Self {
        ScenarioProbs { t, p_ordinary: 1.0 / 3.0, p_express: 1.0 / 3.0, p_tunnel: 1.0 / 3.0 }
    }

    pub fn for_class(&self, class: RoadClass) -> f64 {
        match class {
            RoadClass::Ordinary => self.p_ordinary,
            RoadClass::Expressway => self.p_express,
            RoadClass::Tunnel => self.p_tunnel,
        }
    }
}

/// Log scenario factor of a road of class `class`.
pub fn scenario_emission(probs: &ScenarioProbs, class: RoadClass) -> f64 {
    libm::log(probs.for_class(class).max(SCENARIO_FLOOR))
}

/// Time-indexed scenario records with nearest-timestamp lookup.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioStream {
    records: Vec<ScenarioProbs>,
    pub stale_window: f64,
}

impl ScenarioStream {
    pub fn new(records: Vec<ScenarioProbs>, stale_window: f64) -> Result<Self, Error> {
        if records.windows(2).any(|w| !(w[1].t > w[0].t)) {
            return Err(Error::InvalidParams("scenario timestamps must be strictly increasing"));
        }
        if !(stale_window >= 0.0) {
            return Err(Error::InvalidParams("stale_window must be non-negative"));
        }
        Ok(ScenarioStream { records, stale_window })
    }

    pub fn records(&self) -> &[ScenarioProbs] {
        &self.records
    }

    /// Record closest in time to `t` (the earlier one on exact ties), or a
    /// uniform record when the nearest one is older/newer than the stale
    /// window.
    pub fn lookup(&self, t: f64) -> ScenarioProbs {
        let i = self.records.partition_point(|r| r.t < t);
        let before = i.checked_sub(1).map(|j| &self.records[j]);
        let after = self.records.get(i);
        let nearest = match (before, after) {
            (Some(b), Some(a)) => {
                if (t - b.t) <= (a.t - t) {
                    b
                } else {
                    a
                }
            }
            (Some(b), None) => b,
            (None, Some(a)) => a,
            (None, None) => return ScenarioProbs::uniform(t),
        };
        if (nearest.t - t).abs() > self.stale_window {
            ScenarioProbs::uniform(t)
        } else {
            *nearest
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    const CLASSES: [RoadClass; 3] = [RoadClass::Ordinary, RoadClass::Expressway, RoadClass::Tunnel];

    #[test]
    fn emission_examples() {
        let p = ScenarioProbs::new(0.0, 1.0, 0.0, 0.0).unwrap();
        assert_eq!(scenario_emission(&p, RoadClass::Ordinary), 0.0);
        assert_eq!(scenario_emission(&p, RoadClass::Tunnel), libm::log(1e-4));
        let p = ScenarioProbs::new(0.0, 0.1, 0.85, 0.05).unwrap();
        assert!((scenario_emission(&p, RoadClass::Expressway) - libm::log(0.85)).abs() < 1e-12);
        let u = ScenarioProbs::uniform(0.0);
        let v: Vec<f64> = CLASSES.iter().map(|&c| scenario_emission(&u, c)).collect();
        assert!(v.iter().all(|x| *x == v[0]));
    }

    #[test]
    fn renormalizes_on_construction() {
        let p = ScenarioProbs::new(0.0, 2.0, 1.0, 1.0).unwrap();
        assert!((p.p_ordinary - 0.5).abs() < 1e-15);
        assert!(ScenarioProbs::new(0.0, 0.0, 0.0, 0.0).is_err());
        assert!(ScenarioProbs::new(0.0, -0.1, 1.0, 0.0).is_err());
    }

    fn stream() -> ScenarioStream {
        ScenarioStream::new(
            vec![ScenarioProbs::new(1.0, 0.9, 0.1, 0.0).unwrap(), ScenarioProbs::new(2.0, 0.1, 0.9, 0.0).unwrap()],
            DEFAULT_STALE_WINDOW_S,
        )
        .unwrap()
    }

    #[test]
    fn nearest_lookup() {
        let s = stream();
        assert_eq!(s.lookup(2.0).t, 2.0);
        assert_eq!(s.lookup(1.4).t, 1.0);
        assert_eq!(s.lookup(1.6).t, 2.0);
        assert_eq!(s.lookup(3.9).t, 2.0);
        assert_eq!(s.lookup(12.0), ScenarioProbs::uniform(12.0));
        assert_eq!(s.lookup(-5.0), ScenarioProbs::uniform(-5.0));
    }

    #[test]
    fn rejects_unordered_timestamps() {
        let r = ScenarioProbs::uniform(1.0);
        assert!(ScenarioStream::new(vec![r, r], 2.0).is_err());
    }

    proptest! {
        #[test]
        fn factor_mass_bounded(a in 0.0f64..1.0, b in 0.0f64..1.0, c in 0.0f64..1.0) {
            prop_assume!(a + b + c > 1e-9);
            let p = ScenarioProbs::new(0.0, a, b, c).unwrap();
            let mass: f64 = CLASSES.iter().map(|&k| libm::exp(scenario_emission(&p, k))).sum();
            prop_assert!(mass <= 1.0 + 3.0 * 1e-4 + 1e-12);
        }
    }
}
