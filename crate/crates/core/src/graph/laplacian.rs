use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};
use crate::graph::build_laplacian;
use crate::network::Network;

/// Applies the Moore-Penrose pseudoinverse `L^+` of a connected network's
/// Laplacian without forming it.
///
/// The input is deflated to zero mean, the Laplacian grounded at node 0 is
/// solved by a dense Cholesky factorization, and the result is shifted back
/// to zero mean.
#[derive(Debug, Clone)]
pub struct LaplacianSolver {
    n: usize,
    factor: Cholesky<f64, Dyn>,
}

impl LaplacianSolver {
    pub fn new(net: &Network) -> Result<Self> {
        let n = net.node_count();
        let l = build_laplacian(net);
        let grounded = l.view((1, 1), (n - 1, n - 1)).into_owned();
        let factor = Cholesky::new(grounded)
            .ok_or_else(|| Error::Numeric("grounded Laplacian is not positive definite".into()))?;
        Ok(Self { n, factor })
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.n, "vector length must equal node count");
        let mean = v.iter().sum::<f64>() / self.n as f64;
        let rhs = DVector::from_iterator(self.n - 1, v[1..].iter().map(|x| x - mean));
        let sol = self.factor.solve(&rhs);
        let mut x = Vec::with_capacity(self.n);
        x.push(0.0);
        x.extend(sol.iter().copied());
        let shift = x.iter().sum::<f64>() / self.n as f64;
        x.iter_mut().for_each(|xi| *xi -= shift);
        x
    }

    /// Dense `L^+`, column by column.
    pub fn pseudoinverse(&self) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.n, self.n);
        let mut unit = vec![0.0; self.n];
        for j in 0..self.n {
            unit[j] = 1.0;
            let col = self.apply(&unit);
            out.column_mut(j).copy_from_slice(&col);
            unit[j] = 0.0;
        }
        out
    }
}

/// `L^+ v` for a single vector.
pub fn laplacian_pinv_apply(net: &Network, v: &[f64]) -> Result<Vec<f64>> {
    net.check_node_len(v)?;
    Ok(LaplacianSolver::new(net)?.apply(v))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_vector_maps_to_zero() {
        let net =
            Network::unlabeled(&[(0, 1, 1.0), (1, 2, 2.0), (2, 0, 3.0)], vec![0.0; 3]).unwrap();
        let x = laplacian_pinv_apply(&net, &[1.0, 1.0, 1.0]).unwrap();
        assert!(x.iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn eigenvector_of_triangle() {
        // (1,-1,0) is an eigenvector of the unit triangle Laplacian with eigenvalue 3
        let net =
            Network::unlabeled(&[(0, 1, 1.0), (1, 2, 1.0), (2, 0, 1.0)], vec![0.0; 3]).unwrap();
        let x = laplacian_pinv_apply(&net, &[1.0, -1.0, 0.0]).unwrap();
        let expected = [1.0 / 3.0, -1.0 / 3.0, 0.0];
        for (a, b) in x.iter().zip(expected) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn output_has_zero_mean() {
        let net = Network::unlabeled(&[(0, 1, 1.0), (1, 2, 2.0)], vec![0.0; 3]).unwrap();
        let x = laplacian_pinv_apply(&net, &[3.0, 0.5, -1.0]).unwrap();
        assert!(x.iter().sum::<f64>().abs() < 1e-14);
    }

    #[test]
    fn wrong_length_is_rejected() {
        let net = Network::unlabeled(&[(0, 1, 1.0)], vec![0.0; 2]).unwrap();
        assert!(laplacian_pinv_apply(&net, &[1.0]).is_err());
    }
}
