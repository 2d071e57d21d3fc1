use core::fmt;

use crate::graph::RoadId;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    InvalidCoordinate {
        lat: f64,
        lon: f64,
    },
    InvalidRoad {
        id: RoadId,
        reason: &'static str,
    },
    DuplicateRoad(RoadId),
    UnknownRoad(RoadId),
    InvalidParams(&'static str),
    EmptyLattice,
    InvalidSpline {
        control_points: usize,
    },
    InvalidLane {
        id: i64,
        reason: &'static str,
    },
    DuplicateLane(i64),
    /// Fewer surviving correspondences (or input points) than registration needs.
    RegistrationDegenerate {
        correspondences: usize,
    },
    LengthMismatch {
        predicted: usize,
        truth: usize,
    },
    DegenerateEval,
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidCoordinate { lat, lon } => {
                write!(f, "invalid coordinate (lat {lat}, lon {lon})")
            }
            Error::InvalidRoad { id, reason } => write!(f, "invalid road {}: {reason}", id.0),
            Error::DuplicateRoad(id) => write!(f, "duplicate road id {}", id.0),
            Error::UnknownRoad(id) => write!(f, "unknown road id {}", id.0),
            Error::InvalidParams(what) => write!(f, "invalid parameters: {what}"),
            Error::EmptyLattice => f.write_str("lattice has no matched step"),
            Error::InvalidSpline { control_points } => {
                write!(f, "B-spline needs at least 4 control points, got {control_points}")
            }
            Error::InvalidLane { id, reason } => write!(f, "invalid lane {id}: {reason}"),
            Error::DuplicateLane(id) => write!(f, "duplicate lane id {id}"),
            Error::RegistrationDegenerate { correspondences } => {
                write!(f, "registration degenerate ({correspondences} correspondences)")
            }
            Error::LengthMismatch { predicted, truth } => {
                write!(f, "sequence length mismatch: predicted {predicted}, truth {truth}")
            }
            Error::DegenerateEval => f.write_str("zero matched or ground-truth length"),
        }
    }
}

impl core::error::Error for Error {}
