//! Flat TOML run configuration with `key=value` overrides.

use std::path::Path;

use mapmatch_core::hmm::{EmissionParams, HmmParams, TransitionParams};
use mapmatch_core::icp::{IcpParams, LaneFactorParams, RelocalizationParams};
use mapmatch_core::lane::AssociationParams;
use mapmatch_core::pipeline::MatchConfig;
use mapmatch_core::scenario::DEFAULT_STALE_WINDOW_S;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

/// Every matcher tunable in one flat table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Distance emission standard deviation, meters.
    pub sigma: f64,
    /// Heading factor floor.
    pub eps_heading: f64,
    pub candidate_radius: f64,
    pub gamma: f64,
    /// Transition floor for unconnected roads.
    pub eps_transition: f64,
    pub path_cap: f64,
    /// Distance emission sigma used when associating lane markings.
    pub association_sigma: f64,
    pub association_floor: f64,
    pub f_type: f64,
    pub icp_max_iterations: usize,
    pub icp_convergence_tol: f64,
    pub icp_max_correspondence: f64,
    pub icp_max_rotation: f64,
    pub icp_translation_only: bool,
    pub reloc_lateral_range: f64,
    pub reloc_lateral_step: f64,
    pub reloc_min_inlier_ratio: f64,
    pub lane_sigma: f64,
    pub lane_eps_heading: f64,
    pub lane_context_radius: f64,
    /// Scenario records older than this (seconds) are ignored.
    pub stale_window: f64,
    pub enable_lane_factor: bool,
    pub enable_scenario: bool,
    pub pose_correction: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        let m = MatchConfig::default();
        let a = AssociationParams::default();
        RunConfig {
            sigma: m.hmm.emission.sigma,
            eps_heading: m.hmm.emission.eps_heading,
            candidate_radius: m.hmm.emission.candidate_radius,
            gamma: m.hmm.transition.gamma,
            eps_transition: m.hmm.transition.eps_transition,
            path_cap: m.hmm.transition.path_cap,
            association_sigma: a.hmm.emission.sigma,
            association_floor: a.association_floor,
            f_type: m.icp.f_type,
            icp_max_iterations: m.icp.max_iterations,
            icp_convergence_tol: m.icp.convergence_tol,
            icp_max_correspondence: m.icp.max_correspondence,
            icp_max_rotation: m.icp.max_rotation,
            icp_translation_only: m.icp.translation_only,
            reloc_lateral_range: m.relocalization.lateral_range,
            reloc_lateral_step: m.relocalization.lateral_step,
            reloc_min_inlier_ratio: m.relocalization.min_inlier_ratio,
            lane_sigma: m.lane_factor.sigma,
            lane_eps_heading: m.lane_factor.eps_heading,
            lane_context_radius: m.lane_factor.context_radius,
            stale_window: DEFAULT_STALE_WINDOW_S,
            enable_lane_factor: m.enable_lane_factor,
            enable_scenario: m.enable_scenario,
            pose_correction: m.pose_correction,
        }
    }
}

impl RunConfig {
    fn hmm(&self, sigma: f64) -> HmmParams {
        HmmParams {
            emission: EmissionParams { sigma, eps_heading: self.eps_heading, candidate_radius: self.candidate_radius },
            transition: TransitionParams { gamma: self.gamma, eps_transition: self.eps_transition, path_cap: self.path_cap },
        }
    }

    pub fn match_config(&self) -> MatchConfig {
        MatchConfig {
            hmm: self.hmm(self.sigma),
            icp: IcpParams {
                f_type: self.f_type,
                max_iterations: self.icp_max_iterations,
                convergence_tol: self.icp_convergence_tol,
                max_correspondence: self.icp_max_correspondence,
                max_rotation: self.icp_max_rotation,
                translation_only: self.icp_translation_only,
            },
            relocalization: RelocalizationParams {
                lateral_range: self.reloc_lateral_range,
                lateral_step: self.reloc_lateral_step,
                min_inlier_ratio: self.reloc_min_inlier_ratio,
            },
            lane_factor: LaneFactorParams {
                sigma: self.lane_sigma,
                eps_heading: self.lane_eps_heading,
                context_radius: self.lane_context_radius,
            },
            enable_lane_factor: self.enable_lane_factor,
            enable_scenario: self.enable_scenario,
            pose_correction: self.pose_correction,
        }
    }

    pub fn association_params(&self) -> AssociationParams {
        AssociationParams { hmm: self.hmm(self.association_sigma), association_floor: self.association_floor }
    }

    pub fn validate(&self) -> Result<()> {
        self.match_config().validate()?;
        self.association_params().hmm.validate()?;
        if !(0.0..1.0).contains(&self.association_floor) {
            return Err(CliError::Config("association_floor must be in [0, 1)".into()));
        }
        if self.stale_window.is_nan() || self.stale_window <= 0.0 {
            return Err(CliError::Config("stale_window must be positive".into()));
        }
        Ok(())
    }
}

/// Parses the right-hand side of an override as a TOML value, falling
/// back to a bare string (`route=mixed`).
fn override_value(raw: &str) -> toml::Value {
    toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

/// Applies `key=value` overrides; dotted keys address nested tables.
pub fn apply_overrides(table: &mut toml::Table, sets: &[String]) -> Result<()> {
    for set in sets {
        let (key, raw) = set.split_once('=').ok_or_else(|| CliError::Config(format!("override `{set}` is not key=value")))?;
        let mut path: Vec<&str> = key.trim().split('.').collect();
        let leaf = path.pop().filter(|k| !k.is_empty()).ok_or_else(|| CliError::Config(format!("empty key in `{set}`")))?;
        let mut cur = &mut *table;
        for part in path {
            let entry = cur.entry(part.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
            cur = entry.as_table_mut().ok_or_else(|| CliError::Config(format!("`{part}` in `{key}` is not a table")))?;
        }
        cur.insert(leaf.to_string(), override_value(raw.trim()));
    }
    Ok(())
}

/// Reads an optional TOML file, applies overrides, and deserializes.
/// Unknown keys are rejected by the target type.
pub fn load<T: DeserializeOwned>(path: Option<&Path>, sets: &[String]) -> Result<T> {
    let mut table = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| CliError::io(p, e))?;
            text.parse::<toml::Table>().map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?
        }
        None => toml::Table::new(),
    };
    apply_overrides(&mut table, sets)?;
    T::deserialize(toml::Value::Table(table)).map_err(|e| CliError::Config(e.to_string()))
}

pub fn dump<T: Serialize>(value: &T) -> Result<String> {
    toml::to_string(value).map_err(|e| CliError::Config(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::SimConfig;

    #[test]
    fn defaults_mirror_core() {
        let c = RunConfig::default();
        assert_eq!(c.match_config(), MatchConfig::default());
        assert_eq!(c.association_params(), AssociationParams::default());
        c.validate().unwrap();
    }

    #[test]
    fn dump_loads_back() {
        let text = dump(&RunConfig::default()).unwrap();
        let back: RunConfig = toml::from_str(&text).unwrap();
        assert_eq!(back, RunConfig::default());
    }

    #[test]
    fn overrides_and_unknown_keys() {
        let c: RunConfig = load(None, &["gamma=80".into(), "enable_scenario=false".into()]).unwrap();
        assert_eq!(c.gamma, 80.0);
        assert!(!c.enable_scenario);
        assert!(load::<RunConfig>(None, &["gama=80".into()]).is_err());
        assert!(load::<RunConfig>(None, &["gamma".into()]).is_err());
        let s: SimConfig = load(None, &["network.ramp_offset=7.5".into(), "route=elevated".into(), "seed=3".into()]).unwrap();
        assert_eq!(s.network.ramp_offset, 7.5);
        assert_eq!(s.seed, 3);
        assert_eq!(s.route, crate::sim::RouteKind::Elevated);
    }

    #[test]
    fn integer_override_for_float_key() {
        // TOML integers are accepted where floats are expected
        let c: RunConfig = load(None, &["sigma=25".into()]).unwrap();
        assert_eq!(c.sigma, 25.0);
    }
}
