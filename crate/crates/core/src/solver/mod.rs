//! Normal states as minimizers of convex programs.
//!
//! For every winding vector `z` the loop amplitudes `l` of the flow
//! `f = f0 + C l` minimize a strictly convex objective on the box
//! `|f_e| <= K_e`. An interior minimizer is a normal fixed point with winding
//! vector `z`; a boundary minimizer is a fixed point only if the multiplier of
//! every saturated line vanishes.

mod newton;
pub(crate) mod objective;
mod phases;
mod states;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::feasibility::FeasibilityCertificate;

pub use newton::{NewtonSettings, MULTIPLIER_TOLERANCE};
pub use objective::{clamped_arcsin, realpower_objective, WindingProblem, ARCSIN_CLAMP};
pub use phases::{
    cycle_residuals, recover_phases, stability_check, winding_of, Gauge, StabilityReport,
};
pub use states::{
    enumerate_windings, find_all_normal_states, reference_flow, solve_base, solve_winding,
    winding_count, NormalStates, DEFAULT_ENUMERATION_CAP,
};

/// Integer winding number per basis cycle.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct WindingVector(pub Vec<i64>);

impl WindingVector {
    pub fn zeros(len: usize) -> Self {
        Self(vec![0; len])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&z| z == 0)
    }

    pub fn as_slice(&self) -> &[i64] {
        &self.0
    }
}

impl From<Vec<i64>> for WindingVector {
    fn from(v: Vec<i64>) -> Self {
        Self(v)
    }
}

impl fmt::Display for WindingVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("(")?;
        for (i, z) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{z}")?;
        }
        f.write_str(")")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Classification {
    /// Minimizer with `|f_e| < K_e` everywhere: a normal fixed point.
    InteriorSolution,
    /// Minimizer on the boundary with a positive multiplier: no fixed point
    /// with this winding vector.
    BoundaryNoSolution,
    /// Minimizer on the boundary with vanishing multipliers: a marginal fixed
    /// point.
    BifurcationSolution,
    /// No KCL solution within line limits exists.
    Infeasible,
}

impl Classification {
    /// Interior and bifurcation outcomes are fixed points.
    pub fn is_fixed_point(self) -> bool {
        matches!(self, Self::InteriorSolution | Self::BifurcationSolution)
    }
}

impl fmt::Display for Classification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::InteriorSolution => "interior",
            Self::BoundaryNoSolution => "boundary",
            Self::BifurcationSolution => "bifurcation",
            Self::Infeasible => "infeasible",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveOutcome {
    pub classification: Classification,
    pub flows: Option<Vec<f64>>,
    /// Zero-mean phases, for fixed points.
    pub phases: Option<Vec<f64>>,
    pub winding: WindingVector,
    pub loop_amplitudes: Option<Vec<f64>>,
    /// Multipliers of `f_e <= K_e`.
    pub upper_multipliers: Vec<f64>,
    /// Multipliers of `-f_e <= K_e`.
    pub lower_multipliers: Vec<f64>,
    /// Node multipliers of the flow-space program; equal to the phases.
    pub node_multipliers: Option<Vec<f64>>,
    pub iterations: usize,
    /// Infinity norm of the gradient restricted to the free directions.
    pub gradient_norm: f64,
    pub certificate: Option<FeasibilityCertificate>,
}

impl SolveOutcome {
    pub(crate) fn infeasible(
        edges: usize,
        winding: WindingVector,
        cert: FeasibilityCertificate,
    ) -> Self {
        Self {
            classification: Classification::Infeasible,
            flows: None,
            phases: None,
            winding,
            loop_amplitudes: None,
            upper_multipliers: vec![0.0; edges],
            lower_multipliers: vec![0.0; edges],
            node_multipliers: None,
            iterations: 0,
            gradient_norm: f64::NAN,
            certificate: Some(cert),
        }
    }

    pub fn is_fixed_point(&self) -> bool {
        self.classification.is_fixed_point()
    }
}
