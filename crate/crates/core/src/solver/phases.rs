use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::CycleBasis;
use crate::network::Network;
use crate::solver::objective::check_domain;
use crate::solver::{clamped_arcsin, WindingVector};

/// Largest distance of a chord residual from `2 pi Z` accepted by
/// [`recover_phases`].
pub const CYCLE_CONDITION_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Gauge {
    #[default]
    ZeroMean,
    /// Phase of the given node set to zero.
    Slack(usize),
}

/// Node phases with `theta_tail - theta_head = asin(f_e / K_e)` on every
/// edge of a BFS spanning tree rooted at node 0.
pub fn recover_phases(net: &Network, flows: &[f64], gauge: Gauge) -> Result<Vec<f64>> {
    check_domain(net, flows)?;
    if let Gauge::Slack(node) = gauge {
        if node >= net.node_count() {
            return Err(Error::NoSuchNode {
                node,
                count: net.node_count(),
            });
        }
    }
    let (parent, order) = net.bfs_tree(0);
    let edges = net.edges();
    let mut theta = vec![0.0; net.node_count()];
    for &u in &order {
        if let Some(e) = parent[u] {
            let edge = edges[e];
            let d = clamped_arcsin(flows[e] / edge.coupling);
            theta[u] = if edge.head == u {
                theta[edge.tail] - d
            } else {
                theta[edge.head] + d
            };
        }
    }
    let is_tree_edge: Vec<bool> = {
        let mut t = vec![false; net.edge_count()];
        parent.iter().flatten().for_each(|&e| t[e] = true);
        t
    };
    for (e, edge) in edges.iter().enumerate() {
        if is_tree_edge[e] {
            continue;
        }
        let r = clamped_arcsin(flows[e] / edge.coupling) - (theta[edge.tail] - theta[edge.head]);
        let off = (r - 2.0 * PI * (r / (2.0 * PI)).round()).abs();
        if !(off <= CYCLE_CONDITION_TOLERANCE) {
            return Err(Error::CycleConditionViolated {
                edge: e,
                residual: off,
            });
        }
    }
    let shift = match gauge {
        Gauge::ZeroMean => theta.iter().sum::<f64>() / theta.len() as f64,
        Gauge::Slack(node) => theta[node],
    };
    theta.iter_mut().for_each(|t| *t -= shift);
    Ok(theta)
}

/// `C^T asin(f/K) / (2 pi)` per basis cycle.
pub fn cycle_residuals(net: &Network, basis: &CycleBasis, flows: &[f64]) -> Vec<f64> {
    let angles: Vec<f64> = net
        .edges()
        .iter()
        .zip(flows)
        .map(|(e, f)| clamped_arcsin(f / e.coupling))
        .collect();
    basis
        .cycle_sums(&angles)
        .into_iter()
        .map(|s| s / (2.0 * PI))
        .collect()
}

/// Winding vector of a normal flow, with the largest distance of any cycle
/// sum from `2 pi Z` (in radians).
pub fn winding_of(net: &Network, basis: &CycleBasis, flows: &[f64]) -> (WindingVector, f64) {
    let residuals = cycle_residuals(net, basis, flows);
    let z: Vec<i64> = residuals.iter().map(|r| r.round() as i64).collect();
    let off = residuals
        .iter()
        .zip(&z)
        .map(|(r, &k)| 2.0 * PI * (r - k as f64).abs())
        .fold(0.0, f64::max);
    (WindingVector(z), off)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    /// `cos(theta_n - theta_m) > 0` on every edge.
    pub is_normal: bool,
    /// Eigenvalues of the cosine-weighted Laplacian, ascending.
    pub eigenvalues: Vec<f64>,
}

impl StabilityReport {
    /// One eigenvalue in `[-tol, tol]` and all others above `tol`.
    pub fn is_linearly_stable(&self, tol: f64) -> bool {
        let mut it = self.eigenvalues.iter();
        matches!(it.next(), Some(v) if v.abs() <= tol) && it.all(|&v| v > tol)
    }
}

/// Spectrum of the Jacobian `L_nm = -K_nm cos(theta_n - theta_m)`,
/// `L_nn = sum_m K_nm cos(theta_n - theta_m)`.
pub fn stability_check(net: &Network, phases: &[f64]) -> Result<StabilityReport> {
    net.check_node_len(phases)?;
    let n = net.node_count();
    let mut l = DMatrix::<f64>::zeros(n, n);
    let mut is_normal = true;
    for e in net.edges() {
        let w = e.coupling * (phases[e.tail] - phases[e.head]).cos();
        is_normal &= w > 0.0;
        l[(e.tail, e.tail)] += w;
        l[(e.head, e.head)] += w;
        l[(e.tail, e.head)] -= w;
        l[(e.head, e.tail)] -= w;
    }
    let mut eigenvalues: Vec<f64> = SymmetricEigen::new(l).eigenvalues.iter().copied().collect();
    eigenvalues.sort_by(f64::total_cmp);
    Ok(StabilityReport {
        is_normal,
        eigenvalues,
    })
}
