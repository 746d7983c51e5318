//! Algebraic graph machinery: incidence and Laplacian matrices, the
//! Laplacian pseudoinverse action, cycle bases, the K-weighted inner product
//! and the directed/cycle projectors.

mod cycles;
mod laplacian;
pub(crate) mod projection;

pub use cycles::{cycle_basis, BasisKind, Cycle, CycleBasis};
pub use laplacian::{laplacian_pinv_apply, LaplacianSolver};
pub use projection::{
    cycle_norm_bound_check, helmholtz_decompose, projectors, resistance_distance, CycleNormBound,
    Helmholtz, Projectors,
};

use nalgebra::DMatrix;

use crate::network::Network;

/// Node-edge incidence matrix: `+1` at the tail, `-1` at the head.
#[derive(Debug, Clone, PartialEq)]
pub struct IncidenceMatrix(DMatrix<i32>);

impl IncidenceMatrix {
    pub fn matrix(&self) -> &DMatrix<i32> {
        &self.0
    }

    pub fn to_f64(&self) -> DMatrix<f64> {
        self.0.map(f64::from)
    }
}

pub fn build_incidence(net: &Network) -> IncidenceMatrix {
    let mut m = DMatrix::zeros(net.node_count(), net.edge_count());
    for (e, edge) in net.edges().iter().enumerate() {
        m[(edge.tail, e)] = 1;
        m[(edge.head, e)] = -1;
    }
    IncidenceMatrix(m)
}

/// `L = E K E^T`.
pub fn build_laplacian(net: &Network) -> DMatrix<f64> {
    let n = net.node_count();
    let mut l = DMatrix::zeros(n, n);
    for edge in net.edges() {
        let (a, b, k) = (edge.tail, edge.head, edge.coupling);
        l[(a, a)] += k;
        l[(b, b)] += k;
        l[(a, b)] -= k;
        l[(b, a)] -= k;
    }
    l
}

/// `true` for every edge that lies on no cycle.
pub fn bridges(net: &Network) -> Vec<bool> {
    let basis = cycle_basis(net, BasisKind::Fundamental);
    (0..net.edge_count())
        .map(|e| basis.matrix().row(e).iter().all(|&c| c == 0))
        .collect()
}

/// `<xi, zeta>_K = sum_e xi_e zeta_e / K_e`.
pub fn k_inner(net: &Network, xi: &[f64], zeta: &[f64]) -> f64 {
    net.edges()
        .iter()
        .zip(xi.iter().zip(zeta))
        .map(|(e, (a, b))| a * b / e.coupling)
        .sum()
}

pub fn k_norm(net: &Network, xi: &[f64]) -> f64 {
    k_inner(net, xi, xi).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn triangle(p: Vec<f64>) -> Network {
        Network::unlabeled(&[(0, 1, 1.0), (1, 2, 1.0), (2, 0, 1.0)], p).unwrap()
    }

    #[test]
    fn incidence_of_single_edge() {
        let net = Network::unlabeled(&[(0, 1, 1.0)], vec![0.0, 0.0]).unwrap();
        let e = build_incidence(&net);
        assert_eq!(e.matrix().as_slice(), &[1, -1]);
    }

    #[test]
    fn incidence_of_path() {
        let net = Network::unlabeled(&[(0, 1, 1.0), (1, 2, 1.0)], vec![0.0; 3]).unwrap();
        let e = build_incidence(&net);
        let expected = DMatrix::from_row_slice(3, 2, &[1, 0, -1, 1, 0, -1]);
        assert_eq!(e.matrix(), &expected);
    }

    #[test]
    fn incidence_columns_sum_to_zero() {
        let e = build_incidence(&triangle(vec![0.0; 3]));
        for col in e.matrix().column_iter() {
            assert_eq!(col.iter().sum::<i32>(), 0);
            assert_eq!(col.iter().filter(|&&v| v == 1).count(), 1);
            assert_eq!(col.iter().filter(|&&v| v == -1).count(), 1);
        }
    }

    #[test]
    fn laplacian_of_triangle() {
        let l = build_laplacian(&triangle(vec![0.0; 3]));
        let expected =
            DMatrix::from_row_slice(3, 3, &[2.0, -1.0, -1.0, -1.0, 2.0, -1.0, -1.0, -1.0, 2.0]);
        assert_eq!(l, expected);
    }

    #[test]
    fn laplacian_of_bridge() {
        let net = Network::unlabeled(&[(0, 1, 5.0)], vec![0.0, 0.0]).unwrap();
        let l = build_laplacian(&net);
        assert_eq!(l, DMatrix::from_row_slice(2, 2, &[5.0, -5.0, -5.0, 5.0]));
    }

    #[test]
    fn laplacian_matches_incidence_product() {
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
        let e = build_incidence(&net).to_f64();
        let k = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(net.couplings()));
        let l = build_laplacian(&net);
        assert!((&e * k * e.transpose() - &l).amax() < 1e-15);
        for row in l.row_iter() {
            assert!(row.sum().abs() < 1e-15);
        }
    }

    #[test]
    fn bridges_of_lollipop() {
        let net = Network::unlabeled(
            &[(0, 1, 1.0), (1, 2, 1.0), (2, 0, 1.0), (2, 3, 1.0)],
            vec![0.0; 4],
        )
        .unwrap();
        assert_eq!(bridges(&net), vec![false, false, false, true]);
    }

    #[test]
    fn inner_product_values() {
        let net = Network::unlabeled(&[(0, 1, 4.0)], vec![0.0, 0.0]).unwrap();
        assert_eq!(k_inner(&net, &[0.0], &[0.0]), 0.0);
        assert_eq!(k_inner(&net, &[2.0], &[2.0]), 1.0);
        assert_eq!(k_norm(&net, &[2.0]), 1.0);
    }
}
