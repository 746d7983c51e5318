//! Existence of KCL solutions under line limits: `E f = p`, `|f_e| <= K_e`.
//!
//! The exact test is a maximum s-t flow on the network extended by a super
//! source and super sink. The partition test is a sufficient condition that
//! enumerates all node bipartitions of small networks.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::Network;

/// Slack on `max_flow >= p_s`, relative to `max(1, p_s)`.
pub const FEASIBILITY_TOLERANCE: f64 = 1e-9;

/// Default largest network handled by [`partition_check`].
pub const PARTITION_LIMIT: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArcKind {
    /// Original line, usable in both directions up to its capacity.
    Line(usize),
    Source,
    Sink,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExtendedEdge {
    pub from: usize,
    pub to: usize,
    pub capacity: f64,
    pub kind: ArcKind,
}

/// The network plus super source `s = N` and super sink `t = N + 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtendedNetwork {
    pub node_count: usize,
    pub source: usize,
    pub sink: usize,
    pub edges: Vec<ExtendedEdge>,
    /// `p_s`, the total injection of all sources.
    pub total_source_power: f64,
}

impl ExtendedNetwork {
    pub fn source_degree(&self) -> usize {
        self.edges
            .iter()
            .filter(|e| e.kind == ArcKind::Source)
            .count()
    }

    pub fn sink_degree(&self) -> usize {
        self.edges
            .iter()
            .filter(|e| e.kind == ArcKind::Sink)
            .count()
    }
}

pub fn extended_graph(net: &Network) -> ExtendedNetwork {
    let n = net.node_count();
    let (source, sink) = (n, n + 1);
    let mut edges: Vec<ExtendedEdge> = net
        .edges()
        .iter()
        .enumerate()
        .map(|(i, e)| ExtendedEdge {
            from: e.tail,
            to: e.head,
            capacity: e.coupling,
            kind: ArcKind::Line(i),
        })
        .collect();
    let mut total = 0.0;
    for (node, &p) in net.injections().iter().enumerate() {
        if p > 0.0 {
            total += p;
            edges.push(ExtendedEdge {
                from: source,
                to: node,
                capacity: p,
                kind: ArcKind::Source,
            });
        } else if p < 0.0 {
            edges.push(ExtendedEdge {
                from: node,
                to: sink,
                capacity: -p,
                kind: ArcKind::Sink,
            });
        }
    }
    ExtendedNetwork {
        node_count: n + 2,
        source,
        sink,
        edges,
        total_source_power: total,
    }
}

/// A node bipartition `(V1, V2)` with `p1 = sum_{V1} p_n` and the total
/// capacity `K12` of the lines crossing it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cut {
    pub side: Vec<usize>,
    pub injection: f64,
    pub capacity: f64,
}

impl Cut {
    fn of(net: &Network, in_side: &[bool]) -> Self {
        let side = (0..net.node_count()).filter(|&n| in_side[n]).collect();
        let injection = net
            .injections()
            .iter()
            .zip(in_side)
            .filter(|(_, &s)| s)
            .map(|(p, _)| p)
            .sum();
        let capacity = net
            .edges()
            .iter()
            .filter(|e| in_side[e.tail] != in_side[e.head])
            .map(|e| e.coupling)
            .sum();
        Self {
            side,
            injection,
            capacity,
        }
    }

    /// `K12 - |p1|`; negative means the cut cannot carry the imbalance.
    pub fn margin(&self) -> f64 {
        self.capacity - self.injection.abs()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityCertificate {
    pub feasible: bool,
    pub max_flow_value: f64,
    pub total_source_power: f64,
    /// A KCL solution within line limits, when feasible.
    pub flows: Option<Vec<f64>>,
    /// A cut with `|p1| > K12`, when infeasible.
    pub cut: Option<Cut>,
}

pub fn max_flow_feasible(net: &Network) -> FeasibilityCertificate {
    let ext = extended_graph(net);
    let p_s = ext.total_source_power;
    let eps = 1e-12 * p_s.max(1.0);
    let mut g = FlowGraph::new(ext.node_count);
    let mut line_arcs = vec![(0, 0); net.edge_count()];
    for e in &ext.edges {
        match e.kind {
            ArcKind::Line(i) => {
                let fwd = g.add_arc(e.from, e.to, e.capacity);
                let bwd = g.add_arc(e.to, e.from, e.capacity);
                line_arcs[i] = (fwd, bwd);
            }
            ArcKind::Source | ArcKind::Sink => {
                g.add_arc(e.from, e.to, e.capacity);
            }
        }
    }
    let value = g.max_flow(ext.source, ext.sink, eps);
    let feasible = value >= p_s - FEASIBILITY_TOLERANCE * p_s.max(1.0);
    if feasible {
        let flows = line_arcs
            .iter()
            .map(|&(fwd, bwd)| g.flow(fwd) - g.flow(bwd))
            .collect();
        FeasibilityCertificate {
            feasible,
            max_flow_value: value,
            total_source_power: p_s,
            flows: Some(flows),
            cut: None,
        }
    } else {
        let reach = g.reachable(ext.source, eps);
        let cut = Cut::of(net, &reach[..net.node_count()]);
        FeasibilityCertificate {
            feasible,
            max_flow_value: value,
            total_source_power: p_s,
            flows: None,
            cut: Some(cut),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionReport {
    /// Every bipartition satisfies `|p1| <= K12`.
    pub ok: bool,
    pub worst: Cut,
    pub margin: f64,
}

/// Checks `|p1| <= K12` over all `2^(N-1) - 1` bipartitions.
pub fn partition_check(net: &Network, limit: usize) -> Result<PartitionReport> {
    let n = net.node_count();
    if n > limit || n > 30 {
        return Err(Error::SizeLimit {
            nodes: n,
            limit: limit.min(30),
        });
    }
    // the last node always lies in V2
    let free = n - 1;
    let mut best_mask = 1u32;
    let mut best_margin = f64::INFINITY;
    let p = net.injections();
    for mask in 1u32..(1u32 << free) {
        let in1 = |v: usize| v < free && mask >> v & 1 == 1;
        let p1: f64 = (0..free).filter(|&v| in1(v)).map(|v| p[v]).sum();
        let k12: f64 = net
            .edges()
            .iter()
            .filter(|e| in1(e.tail) != in1(e.head))
            .map(|e| e.coupling)
            .sum();
        let margin = k12 - p1.abs();
        if margin < best_margin {
            best_margin = margin;
            best_mask = mask;
        }
    }
    let side: Vec<bool> = (0..n)
        .map(|v| v < free && best_mask >> v & 1 == 1)
        .collect();
    let worst = Cut::of(net, &side);
    let scale = p.iter().map(|x| x.abs()).sum::<f64>().max(1.0);
    Ok(PartitionReport {
        ok: best_margin >= -1e-12 * scale,
        margin: best_margin,
        worst,
    })
}

/// Residual graph for highest-label push-relabel. Arc `a ^ 1` is the reverse
/// of arc `a`.
struct FlowGraph {
    adj: Vec<Vec<usize>>,
    to: Vec<usize>,
    capacity: Vec<f64>,
    residual: Vec<f64>,
}

impl FlowGraph {
    fn new(n: usize) -> Self {
        Self {
            adj: vec![Vec::new(); n],
            to: Vec::new(),
            capacity: Vec::new(),
            residual: Vec::new(),
        }
    }

    fn add_arc(&mut self, u: usize, v: usize, cap: f64) -> usize {
        let a = self.to.len();
        self.adj[u].push(a);
        self.to.push(v);
        self.capacity.push(cap);
        self.residual.push(cap);
        self.adj[v].push(a + 1);
        self.to.push(u);
        self.capacity.push(0.0);
        self.residual.push(0.0);
        a
    }

    fn flow(&self, a: usize) -> f64 {
        self.capacity[a] - self.residual[a]
    }

    fn reachable(&self, s: usize, eps: f64) -> Vec<bool> {
        let mut seen = vec![false; self.adj.len()];
        seen[s] = true;
        let mut queue = VecDeque::from([s]);
        while let Some(u) = queue.pop_front() {
            for &a in &self.adj[u] {
                let v = self.to[a];
                if !seen[v] && self.residual[a] > eps {
                    seen[v] = true;
                    queue.push_back(v);
                }
            }
        }
        seen
    }

    /// Exact distance-to-sink labels in the residual graph.
    fn global_relabel(&self, t: usize, eps: f64) -> Vec<usize> {
        let n = self.adj.len();
        let mut height = vec![2 * n; n];
        height[t] = 0;
        let mut queue = VecDeque::from([t]);
        while let Some(v) = queue.pop_front() {
            for &a in &self.adj[v] {
                let u = self.to[a];
                if height[u] == 2 * n && self.residual[a ^ 1] > eps {
                    height[u] = height[v] + 1;
                    queue.push_back(u);
                }
            }
        }
        height
    }

    fn max_flow(&mut self, s: usize, t: usize, eps: f64) -> f64 {
        let n = self.adj.len();
        let mut height = self.global_relabel(t, eps);
        height[s] = n;
        for h in height.iter_mut() {
            if *h == 2 * n {
                *h = n + 1;
            }
        }
        height[s] = n;
        let mut excess = vec![0.0; n];
        let mut current = vec![0usize; n];
        let mut buckets: Vec<Vec<usize>> = vec![Vec::new(); 2 * n + 1];
        let mut active = vec![false; n];

        for i in 0..self.adj[s].len() {
            let a = self.adj[s][i];
            let delta = self.residual[a];
            if delta > 0.0 {
                let v = self.to[a];
                self.residual[a] = 0.0;
                self.residual[a ^ 1] += delta;
                excess[v] += delta;
                excess[s] -= delta;
                if v != t && !active[v] && excess[v] > eps {
                    active[v] = true;
                    buckets[height[v]].push(v);
                }
            }
        }

        let mut top = 2 * n;
        loop {
            while top > 0 && buckets[top].is_empty() {
                top -= 1;
            }
            let Some(u) = buckets[top].pop() else { break };
            active[u] = false;
            // discharge
            while excess[u] > eps {
                if current[u] == self.adj[u].len() {
                    let mut min_h = usize::MAX;
                    for &a in &self.adj[u] {
                        if self.residual[a] > eps {
                            min_h = min_h.min(height[self.to[a]]);
                        }
                    }
                    if min_h == usize::MAX || min_h + 1 > 2 * n {
                        break;
                    }
                    height[u] = min_h + 1;
                    current[u] = 0;
                    continue;
                }
                let a = self.adj[u][current[u]];
                let v = self.to[a];
                if self.residual[a] > eps && height[u] == height[v] + 1 {
                    let delta = excess[u].min(self.residual[a]);
                    self.residual[a] -= delta;
                    self.residual[a ^ 1] += delta;
                    excess[u] -= delta;
                    excess[v] += delta;
                    if v != s && v != t && !active[v] && excess[v] > eps {
                        active[v] = true;
                        buckets[height[v]].push(v);
                        top = top.max(height[v]);
                    }
                } else {
                    current[u] += 1;
                }
            }
        }
        excess[t]
    }
}
