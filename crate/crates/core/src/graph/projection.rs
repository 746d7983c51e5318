use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::graph::{bridges, build_incidence, k_inner, LaplacianSolver};
use crate::network::Network;

/// Tolerance on `|sum_n (E f)_n|` and `max_n |(E f)_n|` for conservation checks.
pub const CONSERVATION_TOLERANCE: f64 = 1e-9;

/// `Pi_dir = K E^T L^+ E` and `Pi_cycle = I - Pi_dir`, both `M x M`.
#[derive(Debug, Clone)]
pub struct Projectors {
    pub directed: DMatrix<f64>,
    pub cycle: DMatrix<f64>,
}

impl Projectors {
    pub fn apply_directed(&self, v: &[f64]) -> Vec<f64> {
        (&self.directed * DVector::from_column_slice(v))
            .iter()
            .copied()
            .collect()
    }

    pub fn apply_cycle(&self, v: &[f64]) -> Vec<f64> {
        (&self.cycle * DVector::from_column_slice(v))
            .iter()
            .copied()
            .collect()
    }
}

pub fn projectors(net: &Network) -> Result<Projectors> {
    let solver = LaplacianSolver::new(net)?;
    let e = build_incidence(net).to_f64();
    let pinv = solver.pseudoinverse();
    let mut directed = e.transpose() * pinv * &e;
    for (mut row, edge) in directed.row_iter_mut().zip(net.edges()) {
        row *= edge.coupling;
    }
    let m = net.edge_count();
    let cycle = DMatrix::identity(m, m) - &directed;
    Ok(Projectors { directed, cycle })
}

/// `Pi_dir f` through one pseudoinverse application: `K E^T L^+ (E f)`.
pub(crate) fn directed_part(net: &Network, solver: &LaplacianSolver, f: &[f64]) -> Vec<f64> {
    let potentials = solver.apply(&net.divergence(f));
    net.edge_differences(&potentials)
        .into_iter()
        .zip(net.edges())
        .map(|(d, e)| e.coupling * d)
        .collect()
}

/// `Pi_cycle f = f - Pi_dir f`.
pub(crate) fn cycle_part(net: &Network, solver: &LaplacianSolver, f: &[f64]) -> Vec<f64> {
    f.iter()
        .zip(directed_part(net, solver, f))
        .map(|(a, b)| a - b)
        .collect()
}

/// Effective resistance between the endpoints of edge `a` when every edge
/// is a resistor of conductance `K_e`.
pub fn resistance_distance(net: &Network, a: usize) -> Result<f64> {
    let edge = *net.edge(a)?;
    let solver = LaplacianSolver::new(net)?;
    let mut w = vec![0.0; net.node_count()];
    w[edge.tail] = 1.0;
    w[edge.head] = -1.0;
    let x = solver.apply(&w);
    Ok(x[edge.tail] - x[edge.head])
}

#[derive(Debug, Clone, PartialEq)]
pub struct Helmholtz {
    pub directed: Vec<f64>,
    pub cycle: Vec<f64>,
}

/// Splits an energy-conserving flow into a potential part and a cycle part,
/// orthogonal under `<., .>_K`.
pub fn helmholtz_decompose(net: &Network, f: &[f64]) -> Result<Helmholtz> {
    net.check_flow_len(f)?;
    let residual: f64 = net.divergence(f).iter().sum();
    if !(residual.abs() <= CONSERVATION_TOLERANCE) {
        return Err(Error::NotConserving { residual });
    }
    let solver = LaplacianSolver::new(net)?;
    let directed = directed_part(net, &solver, f);
    let cycle = f.iter().zip(&directed).map(|(a, b)| a - b).collect();
    Ok(Helmholtz { directed, cycle })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CycleNormBound {
    /// `||f_c||_K^2`.
    pub lhs: f64,
    /// `f_{c,a}^2 / (K_a (1 - K_a Omega_a))`, or 0 on a bridge.
    pub rhs: f64,
    pub holds: bool,
}

/// Lower bound on the K-norm of a cycle flow by its value on a single edge.
pub fn cycle_norm_bound_check(net: &Network, f_c: &[f64], a: usize) -> Result<CycleNormBound> {
    net.check_flow_len(f_c)?;
    let k_a = net.edge(a)?.coupling;
    let scale = f_c.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
    let residual = net
        .divergence(f_c)
        .iter()
        .fold(0.0_f64, |m, v| m.max(v.abs()));
    if !(residual <= CONSERVATION_TOLERANCE * scale) {
        return Err(Error::NotACycleFlow { residual });
    }
    let lhs = k_inner(net, f_c, f_c);
    let rhs = if !bridges(net)[a] {
        let omega = resistance_distance(net, a)?;
        f_c[a] * f_c[a] / (k_a * (1.0 - k_a * omega))
    } else {
        0.0
    };
    let holds = lhs >= rhs - 1e-10 * rhs.max(1.0);
    Ok(CycleNormBound { lhs, rhs, holds })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::k_norm;

    fn triangle() -> Network {
        Network::unlabeled(&[(0, 1, 1.0), (1, 2, 1.0), (2, 0, 1.0)], vec![0.0; 3]).unwrap()
    }

    #[test]
    fn tree_has_zero_cycle_projector() {
        let net =
            Network::unlabeled(&[(0, 1, 2.0), (1, 2, 0.5), (1, 3, 1.0)], vec![0.0; 4]).unwrap();
        let p = projectors(&net).unwrap();
        assert!(p.cycle.amax() < 1e-14);
    }

    #[test]
    fn triangle_cycle_projector_entries() {
        let p = projectors(&triangle()).unwrap();
        // the cycle 0->1->2->0 follows every edge orientation
        for i in 0..3 {
            for j in 0..3 {
                assert!((p.cycle[(i, j)] - 1.0 / 3.0).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn projectors_are_idempotent() {
        let net = Network::unlabeled(
            &[
                (0, 1, 2.0),
                (1, 2, 0.5),
                (2, 0, 1.5),
                (2, 3, 3.0),
                (3, 1, 1.0),
            ],
            vec![0.0; 4],
        )
        .unwrap();
        let p = projectors(&net).unwrap();
        assert!((&p.cycle * &p.cycle - &p.cycle).amax() < 1e-12);
        assert!((&p.directed * &p.directed - &p.directed).amax() < 1e-12);
    }

    #[test]
    fn resistance_distances() {
        let bridge = Network::unlabeled(&[(0, 1, 4.0)], vec![0.0; 2]).unwrap();
        assert!((resistance_distance(&bridge, 0).unwrap() - 0.25).abs() < 1e-15);
        let tri = triangle();
        for a in 0..3 {
            assert!((resistance_distance(&tri, a).unwrap() - 2.0 / 3.0).abs() < 1e-14);
        }
        let ring = Network::ring(6, 1.0, vec![0.0; 6]).unwrap();
        assert!((resistance_distance(&ring, 2).unwrap() - 5.0 / 6.0).abs() < 1e-14);
        assert!(resistance_distance(&ring, 6).is_err());
    }

    #[test]
    fn decomposition_of_potential_flow() {
        let net = triangle();
        let theta = [0.3, -0.1, 0.5];
        let f: Vec<f64> = net.edge_differences(&theta);
        let h = helmholtz_decompose(&net, &f).unwrap();
        assert!(h.cycle.iter().all(|v| v.abs() < 1e-14));
    }

    #[test]
    fn decomposition_of_single_edge_flow() {
        let h = helmholtz_decompose(&triangle(), &[1.0, 0.0, 0.0]).unwrap();
        for v in &h.cycle {
            assert!((v - 1.0 / 3.0).abs() < 1e-14);
        }
        let expected = [2.0 / 3.0, -1.0 / 3.0, -1.0 / 3.0];
        for (a, b) in h.directed.iter().zip(expected) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn nonfinite_flow_is_rejected() {
        assert!(matches!(
            helmholtz_decompose(&triangle(), &[f64::NAN, 0.0, 0.0]),
            Err(Error::NotConserving { .. })
        ));
    }

    #[test]
    fn single_cycle_saturates_bound() {
        let net = triangle();
        let b = cycle_norm_bound_check(&net, &[1.0, 1.0, 1.0], 0).unwrap();
        assert!((b.lhs - 3.0).abs() < 1e-14);
        assert!((b.rhs - 3.0).abs() < 1e-12);
        assert!(b.holds);
        let z = cycle_norm_bound_check(&net, &[0.0; 3], 1).unwrap();
        assert_eq!((z.lhs, z.rhs, z.holds), (0.0, 0.0, true));
        assert!(k_norm(&net, &[1.0, 1.0, 1.0]) > 0.0);
    }

    #[test]
    fn bridge_gives_zero_rhs() {
        // triangle with a pendant edge 2-3
        let net = Network::unlabeled(
            &[(0, 1, 1.0), (1, 2, 1.0), (2, 0, 1.0), (2, 3, 1.0)],
            vec![0.0; 4],
        )
        .unwrap();
        let b = cycle_norm_bound_check(&net, &[1.0, 1.0, 1.0, 0.0], 3).unwrap();
        assert_eq!(b.rhs, 0.0);
        assert!(b.holds);
    }

    #[test]
    fn non_cycle_flow_is_rejected() {
        assert!(matches!(
            cycle_norm_bound_check(&triangle(), &[1.0, 0.0, 0.0], 0),
            Err(Error::NotACycleFlow { .. })
        ));
    }
}
