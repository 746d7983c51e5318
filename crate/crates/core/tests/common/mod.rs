//! Random instances and reference implementations shared by the
//! integration tests. Nothing here calls the solver under test.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use syncflow::solver::{solve_base, Classification};
use syncflow::Network;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random spanning tree plus `extra` random non-loop edges, couplings in
/// `[0.5, 2]`, random orientations. Parallel edges may occur.
pub fn random_connected(rng: &mut ChaCha8Rng, n: usize, extra: usize) -> Vec<(usize, usize, f64)> {
    let mut edges = Vec::with_capacity(n - 1 + extra);
    for v in 1..n {
        let u = rng.random_range(0..v);
        edges.push(orient(rng, u, v));
    }
    for _ in 0..extra {
        let u = rng.random_range(0..n);
        let mut v = rng.random_range(0..n - 1);
        if v >= u {
            v += 1;
        }
        edges.push(orient(rng, u, v));
    }
    edges
}

fn orient(rng: &mut ChaCha8Rng, u: usize, v: usize) -> (usize, usize, f64) {
    let k = rng.random_range(0.5..2.0);
    if rng.random_bool(0.5) {
        (u, v, k)
    } else {
        (v, u, k)
    }
}

pub fn random_injections(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<f64> {
    let mut p: Vec<f64> = (0..n).map(|_| rng.random_range(-scale..scale)).collect();
    let mean = p.iter().sum::<f64>() / n as f64;
    p.iter_mut().for_each(|v| *v -= mean);
    p
}

/// Random connected network with `2..=max_n` nodes and up to `n` extra edges.
pub fn random_network(rng: &mut ChaCha8Rng, max_n: usize, scale: f64) -> Network {
    let n = rng.random_range(2..=max_n);
    let extra = rng.random_range(0..=n);
    let edges = random_connected(rng, n, extra);
    let p = random_injections(rng, n, scale);
    Network::unlabeled(&edges, p).unwrap()
}

pub fn random_tree(rng: &mut ChaCha8Rng, max_n: usize, scale: f64) -> Network {
    let n = rng.random_range(2..=max_n);
    let edges = random_connected(rng, n, 0);
    let p = random_injections(rng, n, scale);
    Network::unlabeled(&edges, p).unwrap()
}

/// A random network whose winding-zero state is an interior solution, with
/// its flows. Draws until one is found.
pub fn random_interior(rng: &mut ChaCha8Rng, max_n: usize, scale: f64) -> (Network, Vec<f64>) {
    loop {
        let net = random_network(rng, max_n, scale);
        let out = solve_base(&net).unwrap();
        if out.classification == Classification::InteriorSolution {
            return (net, out.flows.unwrap());
        }
    }
}

/// Laplacian assembled edge by edge.
pub fn dense_laplacian(net: &Network) -> DMatrix<f64> {
    let n = net.node_count();
    let mut l = DMatrix::zeros(n, n);
    for e in net.edges() {
        l[(e.tail, e.tail)] += e.coupling;
        l[(e.head, e.head)] += e.coupling;
        l[(e.tail, e.head)] -= e.coupling;
        l[(e.head, e.tail)] -= e.coupling;
    }
    l
}

/// `L^+` from a full eigendecomposition.
pub fn dense_pinv(net: &Network) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(dense_laplacian(net));
    let top = eig.eigenvalues.amax();
    let inv = eig
        .eigenvalues
        .map(|v| if v > 1e-9 * top { 1.0 / v } else { 0.0 });
    &eig.eigenvectors * DMatrix::from_diagonal(&inv) * eig.eigenvectors.transpose()
}

/// `M x N` matrix with `+1` at the tail and `-1` at the head of every edge.
pub fn dense_incidence_t(net: &Network) -> DMatrix<f64> {
    let mut et = DMatrix::zeros(net.edge_count(), net.node_count());
    for (i, e) in net.edges().iter().enumerate() {
        et[(i, e.tail)] = 1.0;
        et[(i, e.head)] = -1.0;
    }
    et
}

/// `p_n - sum_m K_nm sin(theta_n - theta_m)`.
pub fn phase_residual(net: &Network, theta: &[f64]) -> Vec<f64> {
    let mut r = net.injections().to_vec();
    for e in net.edges() {
        let f = e.coupling * (theta[e.tail] - theta[e.head]).sin();
        r[e.tail] -= f;
        r[e.head] += f;
    }
    r
}

/// Damped Newton on the phase equations with node 0 grounded, started at
/// the linear phases. Returns zero-mean phases on convergence.
pub fn phase_newton(net: &Network) -> Option<Vec<f64>> {
    let n = net.node_count();
    let p = DVector::from_column_slice(net.injections());
    let mut theta: Vec<f64> = (dense_pinv(net) * p).iter().copied().collect();
    let shift = theta[0];
    theta.iter_mut().for_each(|t| *t -= shift);
    let norm = |r: &[f64]| r.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut res = phase_residual(net, &theta);
    for _ in 0..100 {
        if norm(&res) < 1e-13 {
            let mean = theta.iter().sum::<f64>() / n as f64;
            return Some(theta.iter().map(|t| t - mean).collect());
        }
        let mut jac = DMatrix::zeros(n, n);
        for e in net.edges() {
            let w = e.coupling * (theta[e.tail] - theta[e.head]).cos();
            jac[(e.tail, e.tail)] += w;
            jac[(e.head, e.head)] += w;
            jac[(e.tail, e.head)] -= w;
            jac[(e.head, e.tail)] -= w;
        }
        let reduced = jac.view((1, 1), (n - 1, n - 1)).into_owned();
        let rhs = DVector::from_iterator(n - 1, res[1..].iter().copied());
        let step = reduced.lu().solve(&rhs)?;
        let mut alpha = 1.0;
        loop {
            let mut trial = theta.clone();
            for i in 1..n {
                trial[i] += alpha * step[i - 1];
            }
            let r = phase_residual(net, &trial);
            if norm(&r) < (1.0 - 1e-4 * alpha) * norm(&res) {
                theta = trial;
                res = r;
                break;
            }
            alpha *= 0.5;
            if alpha < 1e-12 {
                return None;
            }
        }
    }
    None
}

pub fn phase_flows(net: &Network, theta: &[f64]) -> Vec<f64> {
    net.edges()
        .iter()
        .map(|e| e.coupling * (theta[e.tail] - theta[e.head]).sin())
        .collect()
}

/// Exhaustive `max over bipartitions of |p1| - K12`.
pub fn worst_cut_excess(net: &Network) -> f64 {
    let n = net.node_count();
    let p = net.injections();
    let mut worst = f64::NEG_INFINITY;
    for mask in 1u32..(1 << (n - 1)) {
        let inside = |v: usize| v < n - 1 && mask & (1 << v) != 0;
        let p1: f64 = (0..n).filter(|&v| inside(v)).map(|v| p[v]).sum();
        let k12: f64 = net
            .edges()
            .iter()
            .filter(|e| inside(e.tail) != inside(e.head))
            .map(|e| e.coupling)
            .sum();
        worst = worst.max(p1.abs() - k12);
    }
    worst
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}
