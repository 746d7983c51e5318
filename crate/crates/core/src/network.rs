//! Oriented, weighted network with nodal power injections.
//!
//! Nodes are indexed `0..N`, edges `0..M` in insertion order. Each edge has a
//! fixed orientation (tail to head); a positive flow runs from tail to head.
//! Parallel edges are allowed and keep distinct indices.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance on `|sum p|` against `sum |p|`.
pub const BALANCE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub tail: usize,
    pub head: usize,
    /// Line capacity `K_e > 0` (per unit).
    pub coupling: f64,
}

impl Edge {
    pub fn new(tail: usize, head: usize, coupling: f64) -> Self {
        Self {
            tail,
            head,
            coupling,
        }
    }

    /// The endpoint opposite to `node`.
    pub fn other(&self, node: usize) -> usize {
        if node == self.tail {
            self.head
        } else {
            self.tail
        }
    }
}

/// Connected, balanced network. Immutable once constructed.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    labels: Vec<String>,
    edges: Vec<Edge>,
    injections: Vec<f64>,
    /// `adjacency[n]` lists `(edge, neighbour)` in edge-index order.
    adjacency: Vec<Vec<(usize, usize)>>,
}

impl Network {
    pub fn new(labels: Vec<String>, edges: Vec<Edge>, injections: Vec<f64>) -> Result<Self> {
        let n = injections.len();
        if n < 2 {
            return Err(Error::InvalidNetwork(format!(
                "need at least 2 nodes, got {n}"
            )));
        }
        if labels.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: labels.len(),
            });
        }
        for (i, e) in edges.iter().enumerate() {
            if e.tail >= n || e.head >= n {
                return Err(Error::InvalidNetwork(format!(
                    "edge {i} references node outside 0..{n}"
                )));
            }
            if e.tail == e.head {
                return Err(Error::InvalidNetwork(format!("edge {i} is a self-loop")));
            }
            if !(e.coupling > 0.0 && e.coupling.is_finite()) {
                return Err(Error::InvalidNetwork(format!(
                    "edge {i} has coupling {} (must be positive and finite)",
                    e.coupling
                )));
            }
        }
        if let Some(i) = injections.iter().position(|p| !p.is_finite()) {
            return Err(Error::InvalidNetwork(format!(
                "injection at node {i} is not finite"
            )));
        }
        check_balance(&injections)?;

        let mut adjacency = vec![Vec::new(); n];
        for (i, e) in edges.iter().enumerate() {
            adjacency[e.tail].push((i, e.head));
            adjacency[e.head].push((i, e.tail));
        }
        let net = Self {
            labels,
            edges,
            injections,
            adjacency,
        };
        if !net.is_connected() {
            return Err(Error::Disconnected);
        }
        Ok(net)
    }

    /// Network with labels `"0"`, `"1"`, ...
    pub fn unlabeled(edges: &[(usize, usize, f64)], injections: Vec<f64>) -> Result<Self> {
        let labels = (0..injections.len()).map(|i| i.to_string()).collect();
        let edges = edges.iter().map(|&(t, h, k)| Edge::new(t, h, k)).collect();
        Self::new(labels, edges, injections)
    }

    /// Ring `0 -> 1 -> ... -> n-1 -> 0` with uniform coupling.
    pub fn ring(n: usize, coupling: f64, injections: Vec<f64>) -> Result<Self> {
        if injections.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: injections.len(),
            });
        }
        let edges: Vec<_> = (0..n).map(|i| (i, (i + 1) % n, coupling)).collect();
        Self::unlabeled(&edges, injections)
    }

    /// Same topology and couplings, new injections.
    pub fn with_injections(&self, injections: Vec<f64>) -> Result<Self> {
        Self::new(self.labels.clone(), self.edges.clone(), injections)
    }

    pub fn node_count(&self) -> usize {
        self.injections.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Dimension of the cycle space, `M - N + 1`.
    pub fn cycle_rank(&self) -> usize {
        self.edge_count() + 1 - self.node_count()
    }

    pub fn is_tree(&self) -> bool {
        self.cycle_rank() == 0
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge(&self, e: usize) -> Result<&Edge> {
        self.edges.get(e).ok_or(Error::NoSuchEdge {
            edge: e,
            count: self.edges.len(),
        })
    }

    pub fn couplings(&self) -> Vec<f64> {
        self.edges.iter().map(|e| e.coupling).collect()
    }

    pub fn injections(&self) -> &[f64] {
        &self.injections
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn adjacency(&self, node: usize) -> &[(usize, usize)] {
        &self.adjacency[node]
    }

    /// `E f`, the nodal balance of an edge flow.
    pub fn divergence(&self, flows: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.node_count()];
        for (e, f) in self.edges.iter().zip(flows) {
            out[e.tail] += f;
            out[e.head] -= f;
        }
        out
    }

    /// `max_n |(E f)_n - p_n|`.
    pub fn kcl_residual(&self, flows: &[f64]) -> f64 {
        self.divergence(flows)
            .iter()
            .zip(&self.injections)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// `E^T theta`, the phase difference across every edge.
    pub fn edge_differences(&self, phases: &[f64]) -> Vec<f64> {
        self.edges
            .iter()
            .map(|e| phases[e.tail] - phases[e.head])
            .collect()
    }

    pub(crate) fn check_flow_len(&self, flows: &[f64]) -> Result<()> {
        if flows.len() != self.edge_count() {
            return Err(Error::DimensionMismatch {
                expected: self.edge_count(),
                found: flows.len(),
            });
        }
        Ok(())
    }

    pub(crate) fn check_node_len(&self, v: &[f64]) -> Result<()> {
        if v.len() != self.node_count() {
            return Err(Error::DimensionMismatch {
                expected: self.node_count(),
                found: v.len(),
            });
        }
        Ok(())
    }

    /// BFS spanning tree from `root`. Returns the parent edge of every node
    /// (`None` for the root) and the visiting order.
    pub fn bfs_tree(&self, root: usize) -> (Vec<Option<usize>>, Vec<usize>) {
        let n = self.node_count();
        let mut parent = vec![None; n];
        let mut seen = vec![false; n];
        let mut order = Vec::with_capacity(n);
        let mut queue = VecDeque::from([root]);
        seen[root] = true;
        while let Some(u) = queue.pop_front() {
            order.push(u);
            for &(e, v) in &self.adjacency[u] {
                if !seen[v] {
                    seen[v] = true;
                    parent[v] = Some(e);
                    queue.push_back(v);
                }
            }
        }
        (parent, order)
    }

    fn is_connected(&self) -> bool {
        self.bfs_tree(0).1.len() == self.node_count()
    }
}

fn check_balance(p: &[f64]) -> Result<()> {
    let sum: f64 = p.iter().sum();
    let scale: f64 = p.iter().map(|x| x.abs()).sum();
    let tolerance = BALANCE_TOLERANCE * scale;
    if sum.abs() > tolerance {
        return Err(Error::Unbalanced { sum, tolerance });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(
            Network::unlabeled(&[(0, 0, 1.0)], vec![0.0, 0.0]),
            Err(Error::InvalidNetwork(_))
        ));
        assert!(matches!(
            Network::unlabeled(&[(0, 1, 0.0)], vec![0.0, 0.0]),
            Err(Error::InvalidNetwork(_))
        ));
        assert!(matches!(
            Network::unlabeled(&[(0, 1, 1.0)], vec![0.0, 0.0, 0.0]),
            Err(Error::Disconnected)
        ));
        assert!(matches!(
            Network::unlabeled(&[(0, 1, 1.0)], vec![1.0, 0.0]),
            Err(Error::Unbalanced { .. })
        ));
        assert!(Network::unlabeled(&[(0, 1, 1.0)], vec![0.0]).is_err());
    }

    #[test]
    fn tiny_imbalance_is_accepted() {
        let net = Network::unlabeled(&[(0, 1, 1.0)], vec![0.3 + 1e-17, -0.3]).unwrap();
        assert_eq!(net.node_count(), 2);
    }

    #[test]
    fn parallel_edges_are_distinct() {
        let net = Network::unlabeled(&[(0, 1, 1.0), (0, 1, 2.0)], vec![0.0, 0.0]).unwrap();
        assert_eq!(net.edge_count(), 2);
        assert_eq!(net.cycle_rank(), 1);
    }

    #[test]
    fn divergence_of_path() {
        let net = Network::unlabeled(&[(0, 1, 1.0), (1, 2, 1.0)], vec![1.0, 0.0, -1.0]).unwrap();
        assert_eq!(net.divergence(&[1.0, 1.0]), vec![1.0, 0.0, -1.0]);
        assert_eq!(net.kcl_residual(&[1.0, 1.0]), 0.0);
    }
}
