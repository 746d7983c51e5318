use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::network::Network;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BasisKind {
    /// Chords of a BFS spanning tree rooted at node 0.
    #[default]
    Fundamental,
    /// Minimum total edge count (Horton's candidate set).
    Minimal,
}

impl FromStr for BasisKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "fundamental" | "fundamental-bfs" => Ok(Self::Fundamental),
            "minimal" => Ok(Self::Minimal),
            other => Err(format!(
                "unknown basis kind `{other}` (expected fundamental or minimal)"
            )),
        }
    }
}

impl fmt::Display for BasisKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Fundamental => "fundamental",
            Self::Minimal => "minimal",
        })
    }
}

/// A simple cycle as a closed walk: `(edge, sign)` pairs in traversal order,
/// where `sign` is `+1` if the walk follows the edge orientation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cycle {
    edges: Vec<(usize, i32)>,
}

impl Cycle {
    pub fn edges(&self) -> &[(usize, i32)] {
        &self.edges
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    /// `floor(|C| / 4)`, the largest admissible winding number magnitude.
    pub fn winding_bound(&self) -> i64 {
        (self.edges.len() / 4) as i64
    }
}

/// A basis of the cycle space together with its `M x (M-N+1)` cycle-edge
/// incidence matrix `C`.
#[derive(Debug, Clone)]
pub struct CycleBasis {
    kind: BasisKind,
    cycles: Vec<Cycle>,
    matrix: DMatrix<i32>,
}

impl CycleBasis {
    fn from_cycles(kind: BasisKind, edge_count: usize, cycles: Vec<Cycle>) -> Self {
        let mut matrix = DMatrix::zeros(edge_count, cycles.len());
        for (j, c) in cycles.iter().enumerate() {
            for &(e, s) in &c.edges {
                matrix[(e, j)] = s;
            }
        }
        Self {
            kind,
            cycles,
            matrix,
        }
    }

    pub fn kind(&self) -> BasisKind {
        self.kind
    }

    pub fn cycles(&self) -> &[Cycle] {
        &self.cycles
    }

    /// Number of basis cycles.
    pub fn len(&self) -> usize {
        self.cycles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cycles.is_empty()
    }

    pub fn edge_count(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<i32> {
        &self.matrix
    }

    pub fn matrix_f64(&self) -> DMatrix<f64> {
        self.matrix.map(f64::from)
    }

    pub fn winding_bounds(&self) -> Vec<i64> {
        self.cycles.iter().map(Cycle::winding_bound).collect()
    }

    /// `C l`: edge flows of the loop amplitudes `l`.
    pub fn loop_flows(&self, amplitudes: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.edge_count()];
        for (c, a) in self.cycles.iter().zip(amplitudes) {
            for &(e, s) in &c.edges {
                out[e] += f64::from(s) * a;
            }
        }
        out
    }

    /// `C^T v`: signed sums of an edge vector around every basis cycle.
    pub fn cycle_sums(&self, v: &[f64]) -> Vec<f64> {
        self.cycles
            .iter()
            .map(|c| c.edges.iter().map(|&(e, s)| f64::from(s) * v[e]).sum())
            .collect()
    }
}

pub fn cycle_basis(net: &Network, kind: BasisKind) -> CycleBasis {
    let cycles = match kind {
        BasisKind::Fundamental => fundamental_cycles(net),
        BasisKind::Minimal => horton_cycles(net),
    };
    debug_assert_eq!(cycles.len(), net.cycle_rank());
    CycleBasis::from_cycles(kind, net.edge_count(), cycles)
}

struct Tree {
    parent_edge: Vec<Option<usize>>,
    depth: Vec<usize>,
}

impl Tree {
    fn bfs(net: &Network, root: usize) -> Self {
        let (parent_edge, order) = net.bfs_tree(root);
        let mut depth = vec![0; net.node_count()];
        for &u in &order {
            if let Some(e) = parent_edge[u] {
                depth[u] = depth[net.edges()[e].other(u)] + 1;
            }
        }
        Self { parent_edge, depth }
    }

    fn parent(&self, net: &Network, u: usize) -> Option<(usize, usize)> {
        self.parent_edge[u].map(|e| (e, net.edges()[e].other(u)))
    }

    /// Edges walked from `u` up to `ancestor`, with traversal signs.
    fn climb(&self, net: &Network, mut u: usize, ancestor: usize) -> Vec<(usize, i32)> {
        let mut out = Vec::new();
        while u != ancestor {
            let (e, p) = self.parent(net, u).expect("ancestor lies on the root path");
            out.push((e, sign(net, e, u)));
            u = p;
        }
        out
    }

    fn lca(&self, net: &Network, mut a: usize, mut b: usize) -> usize {
        while self.depth[a] > self.depth[b] {
            a = self.parent(net, a).unwrap().1;
        }
        while self.depth[b] > self.depth[a] {
            b = self.parent(net, b).unwrap().1;
        }
        while a != b {
            a = self.parent(net, a).unwrap().1;
            b = self.parent(net, b).unwrap().1;
        }
        a
    }

    /// Closed walk `ancestor -> ... -> x`, edge `e` from `x` to `y`,
    /// `y -> ... -> ancestor`.
    fn close(&self, net: &Network, e: usize, x: usize, y: usize, ancestor: usize) -> Cycle {
        let down: Vec<_> = self
            .climb(net, x, ancestor)
            .into_iter()
            .rev()
            .map(|(edge, s)| (edge, -s))
            .collect();
        let mut edges = down;
        edges.push((e, sign(net, e, x)));
        edges.extend(self.climb(net, y, ancestor));
        Cycle { edges }
    }
}

fn sign(net: &Network, e: usize, from: usize) -> i32 {
    if net.edges()[e].tail == from {
        1
    } else {
        -1
    }
}

fn fundamental_cycles(net: &Network) -> Vec<Cycle> {
    let tree = Tree::bfs(net, 0);
    let is_tree_edge: HashSet<usize> = tree.parent_edge.iter().flatten().copied().collect();
    net.edges()
        .iter()
        .enumerate()
        .filter(|(e, _)| !is_tree_edge.contains(e))
        .map(|(e, edge)| {
            let (u, v) = (edge.tail, edge.head);
            let top = tree.lca(net, u, v);
            // chord u -> v first, then back to u through the tree
            let mut edges = vec![(e, 1)];
            edges.extend(tree.climb(net, v, top));
            edges.extend(
                tree.climb(net, u, top)
                    .into_iter()
                    .rev()
                    .map(|(edge, s)| (edge, -s)),
            );
            Cycle { edges }
        })
        .collect()
}

fn horton_cycles(net: &Network) -> Vec<Cycle> {
    let m = net.edge_count();
    let rank = net.cycle_rank();
    if rank == 0 {
        return Vec::new();
    }
    let words = m.div_ceil(64);
    // keyed by (length, edge bitset) so the greedy pass is deterministic
    let mut candidates: BTreeMap<(usize, Vec<u64>), Cycle> = BTreeMap::new();
    for root in 0..net.node_count() {
        let tree = Tree::bfs(net, root);
        for (e, edge) in net.edges().iter().enumerate() {
            let (x, y) = (edge.tail, edge.head);
            if tree.parent_edge[x] == Some(e) || tree.parent_edge[y] == Some(e) {
                continue;
            }
            if tree.lca(net, x, y) != root {
                continue;
            }
            let cycle = tree.close(net, e, x, y, root);
            let mut bits = vec![0u64; words];
            for &(ce, _) in &cycle.edges {
                bits[ce / 64] |= 1 << (ce % 64);
            }
            candidates.entry((cycle.len(), bits)).or_insert(cycle);
        }
    }

    let mut pivots: BTreeMap<usize, Vec<u64>> = BTreeMap::new();
    let mut basis = Vec::with_capacity(rank);
    for ((_, bits), cycle) in candidates {
        let mut v = bits.clone();
        let independent = loop {
            match highest_bit(&v) {
                None => break false,
                Some(h) => match pivots.get(&h) {
                    Some(row) => v.iter_mut().zip(row).for_each(|(a, b)| *a ^= b),
                    None => {
                        pivots.insert(h, v);
                        break true;
                    }
                },
            }
        };
        if independent {
            basis.push(cycle);
            if basis.len() == rank {
                break;
            }
        }
    }
    basis
}

fn highest_bit(v: &[u64]) -> Option<usize> {
    v.iter()
        .enumerate()
        .rev()
        .find(|(_, w)| **w != 0)
        .map(|(i, w)| i * 64 + 63 - w.leading_zeros() as usize)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::build_incidence;

    fn assert_cycle_space(net: &Network, basis: &CycleBasis) {
        let e = build_incidence(net);
        let ec = e.matrix() * basis.matrix();
        assert!(ec.iter().all(|&v| v == 0), "E C != 0");
        assert_eq!(basis.len(), net.cycle_rank());
        let rank = basis.matrix_f64().rank(1e-9);
        assert_eq!(rank, basis.len());
    }

    fn two_squares() -> Network {
        // two squares sharing edge 1-4: 0-1-4-3-0 and 1-2-5-4-1
        Network::unlabeled(
            &[
                (0, 1, 1.0),
                (1, 2, 1.0),
                (2, 5, 1.0),
                (5, 4, 1.0),
                (4, 3, 1.0),
                (3, 0, 1.0),
                (1, 4, 1.0),
            ],
            vec![0.0; 6],
        )
        .unwrap()
    }

    #[test]
    fn tree_has_empty_basis() {
        let net =
            Network::unlabeled(&[(0, 1, 1.0), (1, 2, 1.0), (1, 3, 1.0)], vec![0.0; 4]).unwrap();
        for kind in [BasisKind::Fundamental, BasisKind::Minimal] {
            let b = cycle_basis(&net, kind);
            assert!(b.is_empty());
            assert_eq!(b.matrix().ncols(), 0);
        }
    }

    #[test]
    fn triangle_single_cycle() {
        let net =
            Network::unlabeled(&[(0, 1, 1.0), (1, 2, 1.0), (2, 0, 1.0)], vec![0.0; 3]).unwrap();
        let b = cycle_basis(&net, BasisKind::Fundamental);
        assert_cycle_space(&net, &b);
        assert_eq!(b.cycles()[0].len(), 3);
        assert!(b.matrix().iter().all(|v| v.abs() == 1));
    }

    #[test]
    fn ring_single_cycle_of_full_length() {
        let net = Network::ring(7, 1.0, vec![0.0; 7]).unwrap();
        for kind in [BasisKind::Fundamental, BasisKind::Minimal] {
            let b = cycle_basis(&net, kind);
            assert_cycle_space(&net, &b);
            assert_eq!(b.cycles()[0].len(), 7);
            assert_eq!(b.winding_bounds(), vec![1]);
        }
    }

    #[test]
    fn parallel_edges_give_two_cycles() {
        let net =
            Network::unlabeled(&[(0, 1, 1.0), (0, 1, 2.0), (1, 2, 1.0)], vec![0.0; 3]).unwrap();
        let b = cycle_basis(&net, BasisKind::Fundamental);
        assert_cycle_space(&net, &b);
        assert_eq!(b.cycles()[0].len(), 2);
        assert_eq!(b.winding_bounds(), vec![0]);
        let m = cycle_basis(&net, BasisKind::Minimal);
        assert_cycle_space(&net, &m);
    }

    #[test]
    fn minimal_basis_uses_faces() {
        let net = two_squares();
        let m = cycle_basis(&net, BasisKind::Minimal);
        assert_cycle_space(&net, &m);
        let lens: Vec<_> = m.cycles().iter().map(Cycle::len).collect();
        assert_eq!(lens, vec![4, 4]);
    }

    #[test]
    fn fundamental_chord_is_unique_to_its_column() {
        let net = two_squares();
        let b = cycle_basis(&net, BasisKind::Fundamental);
        assert_cycle_space(&net, &b);
        for (j, c) in b.cycles().iter().enumerate() {
            let (chord, s) = c.edges()[0];
            assert_eq!(s, 1);
            for k in 0..b.len() {
                if k != j {
                    assert_eq!(b.matrix()[(chord, k)], 0);
                }
            }
        }
    }

    #[test]
    fn walks_are_closed() {
        let net = two_squares();
        for kind in [BasisKind::Fundamental, BasisKind::Minimal] {
            for c in cycle_basis(&net, kind).cycles() {
                let edges = net.edges();
                let (e0, s0) = c.edges()[0];
                let start = if s0 > 0 {
                    edges[e0].tail
                } else {
                    edges[e0].head
                };
                let mut at = start;
                for &(e, s) in c.edges() {
                    let (from, to) = if s > 0 {
                        (edges[e].tail, edges[e].head)
                    } else {
                        (edges[e].head, edges[e].tail)
                    };
                    assert_eq!(from, at);
                    at = to;
                }
                assert_eq!(at, start);
            }
        }
    }

    #[test]
    fn loop_flows_and_cycle_sums_are_adjoint() {
        let net = two_squares();
        let b = cycle_basis(&net, BasisKind::Minimal);
        let l = [0.3, -1.2];
        let v: Vec<f64> = (0..net.edge_count())
            .map(|i| i as f64 * 0.7 - 2.0)
            .collect();
        let lhs: f64 = b.loop_flows(&l).iter().zip(&v).map(|(a, b)| a * b).sum();
        let rhs: f64 = b.cycle_sums(&v).iter().zip(&l).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-12);
    }

    #[test]
    fn basis_kind_parses() {
        assert_eq!("minimal".parse::<BasisKind>().unwrap(), BasisKind::Minimal);
        assert_eq!(
            "fundamental".parse::<BasisKind>().unwrap(),
            BasisKind::Fundamental
        );
        assert!("spanning".parse::<BasisKind>().is_err());
    }
}
