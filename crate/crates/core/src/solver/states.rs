use std::collections::BTreeMap;

use log::{debug, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::feasibility::{max_flow_feasible, FeasibilityCertificate};
use crate::graph::{cycle_basis, BasisKind, CycleBasis};
use crate::linear::solve_linear;
use crate::network::Network;
use crate::solver::newton::{minimize, NewtonSettings};
use crate::solver::phases::CYCLE_CONDITION_TOLERANCE;
use crate::solver::{
    recover_phases, winding_of, Classification, Gauge, SolveOutcome, WindingProblem, WindingVector,
};

pub const DEFAULT_ENUMERATION_CAP: u64 = 1_000_000;

/// `prod_a (2 floor(|C_a| / 4) + 1)`, saturating.
pub fn winding_count(basis: &CycleBasis) -> u128 {
    basis
        .winding_bounds()
        .iter()
        .fold(1u128, |acc, &b| acc.saturating_mul(2 * b as u128 + 1))
}

/// All admissible winding vectors in lexicographic order.
pub fn enumerate_windings(basis: &CycleBasis, cap: u64) -> Result<Vec<WindingVector>> {
    let count = winding_count(basis);
    if count > u128::from(cap) {
        return Err(Error::EnumerationCap {
            count: if count == u128::MAX {
                "more than 2^128".into()
            } else {
                count.to_string()
            },
            cap,
        });
    }
    let bounds = basis.winding_bounds();
    let mut z: Vec<i64> = bounds.iter().map(|b| -b).collect();
    let mut out = Vec::with_capacity(count as usize);
    loop {
        out.push(WindingVector(z.clone()));
        // odometer, last position fastest
        let mut i = z.len();
        loop {
            if i == 0 {
                return Ok(out);
            }
            i -= 1;
            if z[i] < bounds[i] {
                z[i] += 1;
                break;
            }
            z[i] = -bounds[i];
        }
    }
}

/// A KCL solution within line limits: the linear flow when it is strictly
/// inside the limits, otherwise the max-flow point.
pub fn reference_flow(net: &Network) -> Result<Vec<f64>> {
    let cert = max_flow_feasible(net);
    if !cert.feasible {
        return Err(Error::Infeasible(Box::new(cert)));
    }
    reference_from(net, cert)
}

fn reference_from(net: &Network, cert: FeasibilityCertificate) -> Result<Vec<f64>> {
    let lin = solve_linear(net)?;
    let interior = lin
        .flows
        .iter()
        .zip(net.edges())
        .all(|(f, e)| f.abs() < e.coupling);
    if interior {
        Ok(lin.flows)
    } else {
        debug!("linear flow violates a line limit, starting from the max-flow point");
        Ok(cert.flows.expect("feasible certificate carries flows"))
    }
}

pub fn solve_winding(
    net: &Network,
    basis: &CycleBasis,
    reference: &[f64],
    winding: &WindingVector,
) -> Result<SolveOutcome> {
    let prob = WindingProblem::new(net, basis, reference.to_vec(), winding.clone())?;
    solve_problem(&prob, &NewtonSettings::default())
}

pub(crate) fn solve_problem(
    prob: &WindingProblem<'_>,
    settings: &NewtonSettings,
) -> Result<SolveOutcome> {
    let net = prob.network();
    let min = minimize(prob, settings)?;
    let phases = match min.classification {
        Classification::InteriorSolution => Some(recover_phases(net, &min.flows, Gauge::ZeroMean)?),
        Classification::BifurcationSolution => {
            recover_phases(net, &min.flows, Gauge::ZeroMean).ok()
        }
        _ => None,
    };
    if min.classification.is_fixed_point() {
        let (found, off) = winding_of(net, prob.basis(), &min.flows);
        if &found != prob.winding() || off > CYCLE_CONDITION_TOLERANCE {
            return Err(Error::Numeric(format!(
                "state solved for winding {} reads back as {found} (cycle residual {off:e})",
                prob.winding()
            )));
        }
    }
    Ok(SolveOutcome {
        classification: min.classification,
        flows: Some(min.flows),
        phases,
        winding: prob.winding().clone(),
        loop_amplitudes: Some(min.amplitudes),
        upper_multipliers: min.upper,
        lower_multipliers: min.lower,
        node_multipliers: None,
        iterations: min.iterations,
        gradient_norm: min.gradient_norm,
        certificate: None,
    })
}

/// The normal state with winding vector zero, if any.
pub fn solve_base(net: &Network) -> Result<SolveOutcome> {
    let basis = cycle_basis(net, BasisKind::Fundamental);
    let zero = WindingVector::zeros(basis.len());
    let cert = max_flow_feasible(net);
    if !cert.feasible {
        return Ok(SolveOutcome::infeasible(net.edge_count(), zero, cert));
    }
    let reference = reference_from(net, cert)?;
    let mut out = solve_winding(net, &basis, &reference, &zero)?;
    out.node_multipliers = out.phases.clone();
    Ok(out)
}

/// Outcomes of every admissible winding vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalStates {
    pub basis: BasisKind,
    pub outcomes: BTreeMap<WindingVector, SolveOutcome>,
    /// Present when no KCL solution within line limits exists.
    pub certificate: Option<FeasibilityCertificate>,
}

impl NormalStates {
    /// Interior and bifurcation outcomes.
    pub fn fixed_points(&self) -> impl Iterator<Item = (&WindingVector, &SolveOutcome)> {
        self.outcomes.iter().filter(|(_, o)| o.is_fixed_point())
    }

    pub fn count(&self) -> usize {
        self.fixed_points().count()
    }
}

pub fn find_all_normal_states(net: &Network, basis: &CycleBasis, cap: u64) -> Result<NormalStates> {
    let cert = max_flow_feasible(net);
    if !cert.feasible {
        return Ok(NormalStates {
            basis: basis.kind(),
            outcomes: BTreeMap::new(),
            certificate: Some(cert),
        });
    }
    let windings = enumerate_windings(basis, cap)?;
    let reference = reference_from(net, cert)?;
    let solved: Vec<(WindingVector, SolveOutcome)> = windings
        .into_par_iter()
        .map(|z| solve_winding(net, basis, &reference, &z).map(|o| (z, o)))
        .collect::<Result<_>>()?;
    for (z, o) in &solved {
        if o.classification == Classification::BifurcationSolution {
            warn!("winding {z}: minimizer on the boundary with vanishing multipliers");
        }
    }
    Ok(NormalStates {
        basis: basis.kind(),
        outcomes: solved.into_iter().collect(),
        certificate: None,
    })
}
