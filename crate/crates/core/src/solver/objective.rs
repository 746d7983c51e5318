use std::f64::consts::PI;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::graph::CycleBasis;
use crate::network::Network;
use crate::solver::WindingVector;

/// Arcsine arguments are clamped to `[-ARCSIN_CLAMP, ARCSIN_CLAMP]`.
pub const ARCSIN_CLAMP: f64 = 1.0 - 1e-15;

/// Relative slack on `|f_e| <= K_e` before a flow is rejected.
pub(crate) const DOMAIN_SLACK: f64 = 1e-9;

/// Relative slack on `E f0 = p` for reference flows.
pub(crate) const KCL_TOLERANCE: f64 = 1e-9;

pub fn clamped_arcsin(x: f64) -> f64 {
    x.clamp(-ARCSIN_CLAMP, ARCSIN_CLAMP).asin()
}

/// `f asin(f/K) + sqrt(K^2 - f^2) - K` for `|f| <= K`.
pub(crate) fn edge_term(coupling: f64, flow: f64) -> f64 {
    let x = (flow / coupling).clamp(-1.0, 1.0);
    coupling * (x * x.asin() + (1.0 - x * x).max(0.0).sqrt() - 1.0)
}

pub(crate) fn check_domain(net: &Network, flows: &[f64]) -> Result<()> {
    net.check_flow_len(flows)?;
    for (i, (e, &f)) in net.edges().iter().zip(flows).enumerate() {
        if !(f.abs() <= e.coupling * (1.0 + DOMAIN_SLACK)) {
            return Err(Error::DomainViolation {
                edge: i,
                flow: f,
                coupling: e.coupling,
            });
        }
    }
    Ok(())
}

/// Objective of the flow-space program, `sum_e f asin(f/K) + sqrt(K^2 - f^2) - K`.
pub fn realpower_objective(net: &Network, flows: &[f64]) -> Result<f64> {
    check_domain(net, flows)?;
    Ok(net
        .edges()
        .iter()
        .zip(flows)
        .map(|(e, &f)| edge_term(e.coupling, f))
        .sum())
}

/// The program for one winding vector: minimize
/// `F_rp(f0 + C l) - 2 pi z^T l` over the loop amplitudes `l`.
#[derive(Debug, Clone)]
pub struct WindingProblem<'a> {
    net: &'a Network,
    basis: &'a CycleBasis,
    reference: Vec<f64>,
    winding: WindingVector,
}

impl<'a> WindingProblem<'a> {
    pub fn new(
        net: &'a Network,
        basis: &'a CycleBasis,
        reference: Vec<f64>,
        winding: WindingVector,
    ) -> Result<Self> {
        check_domain(net, &reference)?;
        if basis.edge_count() != net.edge_count() {
            return Err(Error::DimensionMismatch {
                expected: net.edge_count(),
                found: basis.edge_count(),
            });
        }
        let scale = net.injections().iter().fold(1.0_f64, |m, p| m.max(p.abs()));
        let residual = net.kcl_residual(&reference);
        if !(residual <= KCL_TOLERANCE * scale) {
            return Err(Error::KclViolation { residual });
        }
        if winding.len() != basis.len() {
            return Err(Error::WindingLength {
                expected: basis.len(),
                found: winding.len(),
            });
        }
        for (cycle, (&value, bound)) in winding.0.iter().zip(basis.winding_bounds()).enumerate() {
            if value.abs() > bound {
                return Err(Error::WindingOutOfBounds {
                    cycle,
                    value,
                    bound,
                });
            }
        }
        Ok(Self {
            net,
            basis,
            reference,
            winding,
        })
    }

    pub fn network(&self) -> &Network {
        self.net
    }

    pub fn basis(&self) -> &CycleBasis {
        self.basis
    }

    pub fn reference(&self) -> &[f64] {
        &self.reference
    }

    pub fn winding(&self) -> &WindingVector {
        &self.winding
    }

    pub fn dimension(&self) -> usize {
        self.basis.len()
    }

    /// `f0 + C l`.
    pub fn flows(&self, amplitudes: &[f64]) -> Vec<f64> {
        self.basis
            .loop_flows(amplitudes)
            .into_iter()
            .zip(&self.reference)
            .map(|(a, b)| a + b)
            .collect()
    }

    /// Whether `|f_e| <= K_e` holds for every line.
    pub fn is_feasible(&self, amplitudes: &[f64]) -> bool {
        self.flows(amplitudes)
            .iter()
            .zip(self.net.edges())
            .all(|(f, e)| f.abs() <= e.coupling)
    }

    pub fn objective(&self, amplitudes: &[f64]) -> f64 {
        self.objective_at(&self.flows(amplitudes), amplitudes)
    }

    pub(crate) fn objective_at(&self, flows: &[f64], amplitudes: &[f64]) -> f64 {
        let rp: f64 = self
            .net
            .edges()
            .iter()
            .zip(flows)
            .map(|(e, &f)| edge_term(e.coupling, f))
            .sum();
        let twist: f64 = self
            .winding
            .0
            .iter()
            .zip(amplitudes)
            .map(|(&z, l)| z as f64 * l)
            .sum();
        rp - 2.0 * PI * twist
    }

    /// `C^T asin(f/K) - 2 pi z`.
    pub fn gradient(&self, amplitudes: &[f64]) -> Vec<f64> {
        let angles = self.angles(&self.flows(amplitudes));
        self.gradient_from_angles(&angles)
    }

    pub(crate) fn angles(&self, flows: &[f64]) -> Vec<f64> {
        self.net
            .edges()
            .iter()
            .zip(flows)
            .map(|(e, f)| clamped_arcsin(f / e.coupling))
            .collect()
    }

    pub(crate) fn gradient_from_angles(&self, angles: &[f64]) -> Vec<f64> {
        self.basis
            .cycle_sums(angles)
            .into_iter()
            .zip(&self.winding.0)
            .map(|(s, &z)| s - 2.0 * PI * z as f64)
            .collect()
    }

    /// `C^T diag((K^2 - f^2)^(-1/2)) C`.
    pub fn hessian(&self, amplitudes: &[f64]) -> DMatrix<f64> {
        let flows = self.flows(amplitudes);
        let weights: Vec<f64> = self
            .net
            .edges()
            .iter()
            .zip(&flows)
            .map(|(e, &f)| curvature(e.coupling, f))
            .collect();
        weighted_gram(self.basis, &weights)
    }
}

/// `(K^2 - f^2)^(-1/2)` with the ratio clamped like the arcsine.
pub(crate) fn curvature(coupling: f64, flow: f64) -> f64 {
    let x = (flow / coupling).clamp(-ARCSIN_CLAMP, ARCSIN_CLAMP);
    1.0 / (coupling * (1.0 - x * x).sqrt())
}

/// `C^T diag(w) C`.
pub(crate) fn weighted_gram(basis: &CycleBasis, weights: &[f64]) -> DMatrix<f64> {
    let c = basis.matrix_f64();
    let mut wc = c.clone();
    for (mut row, &w) in wc.row_iter_mut().zip(weights) {
        row *= w;
    }
    c.transpose() * wc
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{cycle_basis, BasisKind};

    #[test]
    fn objective_values() {
        let net = Network::unlabeled(&[(0, 1, 1.0)], vec![0.0; 2]).unwrap();
        assert_eq!(realpower_objective(&net, &[0.0]).unwrap(), 0.0);
        let v = realpower_objective(&net, &[0.5]).unwrap();
        let expected = 0.5 * (0.5f64).asin() + 0.75f64.sqrt() - 1.0;
        assert!((v - expected).abs() < 1e-15);
        assert!((v - 0.127825).abs() < 1e-6);
        assert!(realpower_objective(&net, &[1.1]).is_err());
    }

    #[test]
    fn saturated_objective() {
        let net = Network::unlabeled(&[(0, 1, 2.0), (1, 2, 3.0)], vec![0.0; 3]).unwrap();
        let v = realpower_objective(&net, &[2.0, -3.0]).unwrap();
        assert!((v - 5.0 * (PI / 2.0 - 1.0)).abs() < 1e-14);
    }

    #[test]
    fn winding_bounds_are_enforced() {
        let ring = Network::ring(3, 1.0, vec![0.0; 3]).unwrap();
        let basis = cycle_basis(&ring, BasisKind::Fundamental);
        assert!(matches!(
            WindingProblem::new(&ring, &basis, vec![0.0; 3], vec![1].into()),
            Err(Error::WindingOutOfBounds { .. })
        ));
        assert!(matches!(
            WindingProblem::new(&ring, &basis, vec![0.0; 3], vec![0, 0].into()),
            Err(Error::WindingLength { .. })
        ));
        assert!(WindingProblem::new(&ring, &basis, vec![0.0; 3], vec![0].into()).is_ok());
    }

    #[test]
    fn reference_must_satisfy_kcl_and_limits() {
        let ring = Network::ring(4, 1.0, vec![0.0; 4]).unwrap();
        let basis = cycle_basis(&ring, BasisKind::Fundamental);
        assert!(matches!(
            WindingProblem::new(&ring, &basis, vec![0.5, 0.0, 0.0, 0.0], vec![0].into()),
            Err(Error::KclViolation { .. })
        ));
        assert!(matches!(
            WindingProblem::new(&ring, &basis, vec![1.5; 4], vec![0].into()),
            Err(Error::DomainViolation { .. })
        ));
    }

    #[test]
    fn ring_gradient_in_closed_form() {
        let ring = Network::ring(5, 1.0, vec![0.0; 5]).unwrap();
        let basis = cycle_basis(&ring, BasisKind::Fundamental);
        let prob = WindingProblem::new(&ring, &basis, vec![0.0; 5], vec![1].into()).unwrap();
        // the single cycle runs along or against every edge
        let l = 0.3;
        let g = prob.gradient(&[l])[0];
        let sign = basis.matrix()[(0, 0)] as f64;
        assert!((g - (5.0 * sign * (sign * l).asin() - 2.0 * PI)).abs() < 1e-14);
        let h = prob.hessian(&[l])[(0, 0)];
        assert!((h - 5.0 / (1.0 - l * l).sqrt()).abs() < 1e-12);
    }
}
