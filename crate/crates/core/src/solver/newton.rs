//! Active-set damped Newton method for the winding programs.
//!
//! Iterates stay inside the box `|f_e| <= K_e`. A line whose slack drops
//! below `pin_tolerance * K_e` is pinned to its limit and subsequent steps
//! move in the null space of the pinned rows of `C`. At a stationary point of
//! the reduced problem the multipliers of the pinned lines are recovered by
//! least squares; a pinned line with a negative multiplier is released.

use std::f64::consts::FRAC_PI_2;

use log::debug;
use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::solver::objective::{curvature, weighted_gram, WindingProblem};
use crate::solver::{clamped_arcsin, Classification};

/// Multipliers at or below this value count as vanishing.
pub const MULTIPLIER_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonSettings {
    pub max_iterations: usize,
    /// Stop when the free part of the gradient has infinity norm below this.
    pub gradient_tolerance: f64,
    /// Fraction-to-boundary factor.
    pub boundary_fraction: f64,
    /// Armijo sufficient-decrease constant.
    pub armijo: f64,
    /// Relative slack `(K_e - |f_e|) / K_e` at which a line is pinned.
    pub pin_tolerance: f64,
}

impl Default for NewtonSettings {
    fn default() -> Self {
        Self {
            max_iterations: 200,
            gradient_tolerance: 1e-10,
            boundary_fraction: 0.999999,
            armijo: 1e-4,
            pin_tolerance: 1e-13,
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Minimum {
    pub classification: Classification,
    pub amplitudes: Vec<f64>,
    /// Flows with pinned lines set exactly to `+-K_e`.
    pub flows: Vec<f64>,
    pub upper: Vec<f64>,
    pub lower: Vec<f64>,
    pub iterations: usize,
    pub gradient_norm: f64,
}

pub(crate) fn minimize(prob: &WindingProblem<'_>, settings: &NewtonSettings) -> Result<Minimum> {
    let net = prob.network();
    let basis = prob.basis();
    let couplings = net.couplings();
    let m = net.edge_count();
    let cmat = basis.matrix_f64();

    let mut amplitudes = vec![0.0; prob.dimension()];
    let mut flows = prob.flows(&amplitudes);
    let mut pinned = vec![0i8; m];
    pin(&flows, &couplings, &mut pinned, settings.pin_tolerance);

    let mut stalled = false;
    let mut iteration = 0;
    let mut last = None;
    while iteration <= settings.max_iterations {
        let angles: Vec<f64> = flows
            .iter()
            .zip(&couplings)
            .zip(&pinned)
            .map(|((f, k), &s)| match s {
                0 => clamped_arcsin(f / k),
                s => f64::from(s) * FRAC_PI_2,
            })
            .collect();
        let gradient = prob.gradient_from_angles(&angles);
        let active: Vec<usize> = (0..m).filter(|&e| pinned[e] != 0).collect();
        let null = null_space(&cmat, &active);
        let g = DVector::from_column_slice(&gradient);
        let reduced = null.transpose() * &g;
        let reduced_norm = if reduced.is_empty() {
            0.0
        } else {
            reduced.amax()
        };
        last = Some((gradient.clone(), active.clone(), reduced_norm));

        if reduced_norm <= settings.gradient_tolerance {
            let s = multipliers(&cmat, &active, &gradient)?;
            let worst = active
                .iter()
                .zip(&s)
                .map(|(&e, v)| (e, f64::from(pinned[e]) * v))
                .min_by(|a, b| a.1.total_cmp(&b.1));
            if let Some((e, value)) = worst {
                if value < -MULTIPLIER_TOLERANCE && iteration < settings.max_iterations {
                    debug!("releasing line {e} with multiplier {value:e}");
                    pinned[e] = 0;
                    iteration += 1;
                    continue;
                }
            }
            return Ok(finish(
                amplitudes,
                flows,
                &couplings,
                &pinned,
                &active,
                &s,
                iteration,
                reduced_norm,
            ));
        }
        if iteration == settings.max_iterations || stalled {
            break;
        }

        // Newton step on the free subspace
        let weights: Vec<f64> = flows
            .iter()
            .zip(&couplings)
            .zip(&pinned)
            .map(|((&f, &k), &s)| if s == 0 { curvature(k, f) } else { 0.0 })
            .collect();
        let hessian = weighted_gram(basis, &weights);
        let reduced_hessian = null.transpose() * &hessian * &null;
        let step_reduced = solve_spd(reduced_hessian, -&reduced)?;
        let step: Vec<f64> = (&null * step_reduced).iter().copied().collect();
        let flow_step = basis.loop_flows(&step);

        let mut alpha_max = f64::INFINITY;
        for e in 0..m {
            if pinned[e] != 0 || flow_step[e] == 0.0 {
                continue;
            }
            let limit = couplings[e] * flow_step[e].signum();
            alpha_max = alpha_max.min(((limit - flows[e]) / flow_step[e]).max(0.0));
        }
        let mut alpha = (settings.boundary_fraction * alpha_max).min(1.0);

        let current = prob.objective_at(&flows, &amplitudes);
        let slope: f64 = gradient.iter().zip(&step).map(|(a, b)| a * b).sum();
        let mut accepted = false;
        for _ in 0..60 {
            let trial: Vec<f64> = amplitudes
                .iter()
                .zip(&step)
                .map(|(l, d)| l + alpha * d)
                .collect();
            let trial_flows = prob.flows(&trial);
            let value = prob.objective_at(&trial_flows, &trial);
            let negligible = (alpha * slope).abs() < 1e-12 * (1.0 + current.abs());
            if negligible || value <= current + settings.armijo * alpha * slope {
                amplitudes = trial;
                flows = trial_flows;
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if !accepted {
            debug!("line search stalled at iteration {iteration}");
            stalled = true;
        }
        pin(&flows, &couplings, &mut pinned, settings.pin_tolerance);
        iteration += 1;
    }

    // no stationary point within the iteration budget
    let (gradient, active, reduced_norm) = last.expect("at least one iteration");
    let near_boundary = flows
        .iter()
        .zip(&couplings)
        .any(|(f, k)| k - f.abs() <= 1e-8 * k);
    if !active.is_empty() || near_boundary {
        let s = multipliers(&cmat, &active, &gradient)?;
        let mut out = finish(
            amplitudes,
            flows,
            &couplings,
            &pinned,
            &active,
            &s,
            iteration.min(settings.max_iterations),
            reduced_norm,
        );
        out.classification = Classification::BoundaryNoSolution;
        return Ok(out);
    }
    if reduced_norm <= 1e-8 {
        let s = Vec::new();
        return Ok(finish(
            amplitudes,
            flows,
            &couplings,
            &pinned,
            &active,
            &s,
            iteration,
            reduced_norm,
        ));
    }
    Err(Error::Numeric(format!(
        "Newton iteration did not converge: free gradient norm {reduced_norm:e} after {iteration} iterations"
    )))
}

fn pin(flows: &[f64], couplings: &[f64], pinned: &mut [i8], tolerance: f64) {
    for ((f, k), p) in flows.iter().zip(couplings).zip(pinned.iter_mut()) {
        if *p == 0 && k - f.abs() <= tolerance * k {
            *p = if *f > 0.0 { 1 } else { -1 };
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn finish(
    amplitudes: Vec<f64>,
    mut flows: Vec<f64>,
    couplings: &[f64],
    pinned: &[i8],
    active: &[usize],
    s: &[f64],
    iterations: usize,
    gradient_norm: f64,
) -> Minimum {
    let m = flows.len();
    let mut upper = vec![0.0; m];
    let mut lower = vec![0.0; m];
    let mut largest = 0.0_f64;
    for (&e, &v) in active.iter().zip(s) {
        flows[e] = f64::from(pinned[e]) * couplings[e];
        let value = (f64::from(pinned[e]) * v).max(0.0);
        largest = largest.max(value);
        if pinned[e] > 0 {
            upper[e] = value;
        } else {
            lower[e] = value;
        }
    }
    let classification = if active.is_empty() {
        Classification::InteriorSolution
    } else if largest <= MULTIPLIER_TOLERANCE {
        Classification::BifurcationSolution
    } else {
        Classification::BoundaryNoSolution
    };
    Minimum {
        classification,
        amplitudes,
        flows,
        upper,
        lower,
        iterations,
        gradient_norm,
    }
}

/// Orthonormal basis of `{ d : C_A d = 0 }`, as columns.
fn null_space(cmat: &DMatrix<f64>, active: &[usize]) -> DMatrix<f64> {
    let c = cmat.ncols();
    if active.is_empty() {
        return DMatrix::identity(c, c);
    }
    let rows = cmat.select_rows(active);
    let gram = rows.transpose() * &rows;
    let eig = SymmetricEigen::new(gram);
    let scale = eig.eigenvalues.amax().max(1.0);
    let keep: Vec<usize> = (0..c)
        .filter(|&i| eig.eigenvalues[i] <= 1e-9 * scale)
        .collect();
    eig.eigenvectors.select_columns(&keep)
}

/// Minimum-norm least-squares solution of `C_A^T s = -g`.
fn multipliers(cmat: &DMatrix<f64>, active: &[usize], gradient: &[f64]) -> Result<Vec<f64>> {
    if active.is_empty() {
        return Ok(Vec::new());
    }
    let lhs = cmat.select_rows(active).transpose();
    let rhs = -DVector::from_column_slice(gradient);
    let svd = lhs.svd(true, true);
    let s = svd
        .solve(&rhs, 1e-10)
        .map_err(|e| Error::Numeric(format!("multiplier recovery failed: {e}")))?;
    Ok(s.iter().copied().collect())
}

fn solve_spd(matrix: DMatrix<f64>, rhs: DVector<f64>) -> Result<DVector<f64>> {
    if matrix.nrows() == 0 {
        return Ok(rhs);
    }
    if let Some(ch) = matrix.clone().cholesky() {
        return Ok(ch.solve(&rhs));
    }
    matrix
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Numeric("reduced Hessian is singular".into()))
}
