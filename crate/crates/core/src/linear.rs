//! Linear (DC) power flow: `theta = L^+ p`, `f = K E^T theta`.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::graph::LaplacianSolver;
use crate::network::Network;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearSolution {
    /// Zero-mean node phases.
    pub phases: Vec<f64>,
    pub flows: Vec<f64>,
}

pub fn solve_linear(net: &Network) -> Result<LinearSolution> {
    let solver = LaplacianSolver::new(net)?;
    Ok(solve_linear_with(net, &solver))
}

pub(crate) fn solve_linear_with(net: &Network, solver: &LaplacianSolver) -> LinearSolution {
    let phases = solver.apply(net.injections());
    let flows = net
        .edge_differences(&phases)
        .into_iter()
        .zip(net.edges())
        .map(|(d, e)| e.coupling * d)
        .collect();
    LinearSolution { phases, flows }
}

/// `sum_e f_e^2 / (2 K_e)`.
pub fn linear_objective(net: &Network, flows: &[f64]) -> f64 {
    net.edges()
        .iter()
        .zip(flows)
        .map(|(e, f)| f * f / (2.0 * e.coupling))
        .sum()
}
