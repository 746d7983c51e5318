//! Approximations to the nonlinear flow built on the linear flow, and bounds
//! on the error of the linear flow.

use std::f64::consts::PI;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::projection::cycle_part;
use crate::graph::{bridges, k_norm, projectors, CycleBasis, LaplacianSolver};
use crate::linear::solve_linear;
use crate::network::Network;
use crate::solver::objective::{check_domain, curvature, edge_term, weighted_gram};
use crate::solver::{clamped_arcsin, solve_base, Classification};

fn check_edge(coupling: f64, flow: f64) -> Result<()> {
    if !(flow.abs() <= coupling * (1.0 + 1e-9)) {
        return Err(Error::DomainViolation {
            edge: 0,
            flow,
            coupling,
        });
    }
    Ok(())
}

fn check_interior(net: &Network, flows: &[f64]) -> Result<()> {
    net.check_flow_len(flows)?;
    for (i, (e, &f)) in net.edges().iter().zip(flows).enumerate() {
        if !(f.abs() < e.coupling) {
            return Err(Error::DomainViolation {
                edge: i,
                flow: f,
                coupling: e.coupling,
            });
        }
    }
    Ok(())
}

/// `G_e(f) = f asin(f/K) + sqrt(K^2 - f^2) - K - f^2 / (2K)`.
pub fn g_function(coupling: f64, flow: f64) -> Result<f64> {
    check_edge(coupling, flow)?;
    Ok(g_unchecked(coupling, flow))
}

fn g_unchecked(coupling: f64, flow: f64) -> f64 {
    edge_term(coupling, flow) - flow * flow / (2.0 * coupling)
}

/// `G'_e(f) = asin(f/K) - f/K`.
pub fn g_prime(coupling: f64, flow: f64) -> Result<f64> {
    check_edge(coupling, flow)?;
    Ok(clamped_arcsin(flow / coupling) - flow / coupling)
}

/// `G_e(f) / G_e(K)`, rising from 0 at `f = 0` to 1 at `|f| = K`.
pub fn loading_indicator(coupling: f64, flow: f64) -> Result<f64> {
    check_edge(coupling, flow)?;
    let full = (PI - 3.0) * coupling / 2.0;
    Ok(g_unchecked(coupling, flow) / full)
}

/// One Newton step on the loop amplitudes from the linear flow, ignoring the
/// line limits: `f_lin - C (C^T K_red C)^-1 C^T asin(f_lin / K)`.
pub fn improved_approximation(
    net: &Network,
    basis: &CycleBasis,
    f_lin: &[f64],
) -> Result<Vec<f64>> {
    check_interior(net, f_lin)?;
    if basis.is_empty() {
        return Ok(f_lin.to_vec());
    }
    let reduced: Vec<f64> = net
        .edges()
        .iter()
        .zip(f_lin)
        .map(|(e, &f)| curvature(e.coupling, f))
        .collect();
    let gram = weighted_gram(basis, &reduced);
    let angles: Vec<f64> = net
        .edges()
        .iter()
        .zip(f_lin)
        .map(|(e, f)| clamped_arcsin(f / e.coupling))
        .collect();
    let rhs = DVector::from_vec(basis.cycle_sums(&angles));
    let chol = gram
        .cholesky()
        .ok_or_else(|| Error::Numeric("cycle Gram matrix is not positive definite".into()))?;
    let amplitudes: Vec<f64> = chol.solve(&rhs).iter().map(|v| -v).collect();
    Ok(f_lin
        .iter()
        .zip(basis.loop_flows(&amplitudes))
        .map(|(a, b)| a + b)
        .collect())
}

/// `K asin(f / K)` per edge, the gradient of the flow-space objective with
/// respect to `<., .>_K`.
fn objective_gradient(net: &Network, flows: &[f64]) -> Vec<f64> {
    net.edges()
        .iter()
        .zip(flows)
        .map(|(e, f)| e.coupling * clamped_arcsin(f / e.coupling))
        .collect()
}

/// `Pi_cycle K asin(f / K)`, zero exactly when `f` satisfies the cycle
/// condition with winding vector zero.
pub fn projected_gradient(net: &Network, flows: &[f64]) -> Result<Vec<f64>> {
    check_domain(net, flows)?;
    let solver = LaplacianSolver::new(net)?;
    Ok(cycle_part(net, &solver, &objective_gradient(net, flows)))
}

/// `f - gamma Pi_cycle K asin(f / K)`.
pub fn gradient_step(net: &Network, flows: &[f64], gamma: f64) -> Result<Vec<f64>> {
    let g = projected_gradient(net, flows)?;
    Ok(flows.iter().zip(g).map(|(f, d)| f - gamma * d).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectionHeuristic {
    /// `+1` predicts `f_rp < f_lin` on that edge, `-1` the opposite, `0` no
    /// prediction.
    pub signs: Vec<i8>,
    /// Fraction of predicting edges whose actual deviation has the predicted
    /// sign, when the nonlinear flow is supplied.
    pub agreement: Option<f64>,
}

/// Sign of `Pi_cycle K asin(f_lin / K)` as a guess of where the nonlinear flow
/// lies. A heuristic, not a guarantee.
pub fn descent_direction_heuristic(
    net: &Network,
    f_lin: &[f64],
    f_rp: Option<&[f64]>,
) -> Result<DirectionHeuristic> {
    check_interior(net, f_lin)?;
    let g = projected_gradient(net, f_lin)?;
    let signs: Vec<i8> = g
        .iter()
        .zip(net.edges())
        .map(|(v, e)| {
            if v.abs() <= 1e-12 * e.coupling {
                0
            } else if *v > 0.0 {
                1
            } else {
                -1
            }
        })
        .collect();
    let agreement = match f_rp {
        None => None,
        Some(rp) => {
            net.check_flow_len(rp)?;
            let predicted: Vec<bool> = signs
                .iter()
                .zip(f_lin.iter().zip(rp))
                .filter(|(s, _)| **s != 0)
                .map(|(&s, (l, r))| f64::from(s) * (l - r) > 0.0)
                .collect();
            if predicted.is_empty() {
                None
            } else {
                let hits = predicted.iter().filter(|&&b| b).count();
                Some(hits as f64 / predicted.len() as f64)
            }
        }
    };
    Ok(DirectionHeuristic { signs, agreement })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBounds {
    /// `zeta_e = K_e G'_e(f_lin,e)`.
    pub zeta: Vec<f64>,
    /// `||zeta||_K`.
    pub simple: f64,
    /// `||Pi_cycle zeta||_K`.
    pub projected: f64,
}

/// Upper bounds on `||f_rp - f_lin||_K`.
pub fn error_bounds(net: &Network, f_lin: &[f64]) -> Result<ErrorBounds> {
    check_interior(net, f_lin)?;
    let solver = LaplacianSolver::new(net)?;
    Ok(error_bounds_with(net, &solver, f_lin))
}

fn error_bounds_with(net: &Network, solver: &LaplacianSolver, f_lin: &[f64]) -> ErrorBounds {
    let zeta: Vec<f64> = net
        .edges()
        .iter()
        .zip(f_lin)
        .map(|(e, &f)| e.coupling * (clamped_arcsin(f / e.coupling) - f / e.coupling))
        .collect();
    let projected = k_norm(net, &cycle_part(net, solver, &zeta));
    ErrorBounds {
        simple: k_norm(net, &zeta),
        projected,
        zeta,
    }
}

/// `sqrt(K_a (1 - K_a Omega_a)) ||Pi_cycle zeta||_K`, a bound on
/// `|f_rp,a - f_lin,a|`. Zero on bridges.
pub fn per_line_bound(net: &Network, f_lin: &[f64], a: usize) -> Result<f64> {
    net.edge(a)?;
    Ok(per_line_bounds(net, f_lin)?[a])
}

/// [`per_line_bound`] for every edge.
pub fn per_line_bounds(net: &Network, f_lin: &[f64]) -> Result<Vec<f64>> {
    let bounds = error_bounds(net, f_lin)?;
    let proj = projectors(net)?;
    Ok(per_line_from(net, &proj.cycle, bounds.projected))
}

fn per_line_from(net: &Network, cycle: &nalgebra::DMatrix<f64>, projected: f64) -> Vec<f64> {
    let is_bridge = bridges(net);
    net.edges()
        .iter()
        .enumerate()
        .map(|(a, e)| {
            if is_bridge[a] {
                0.0
            } else {
                // 1 - K_a Omega_a is the diagonal of Pi_cycle
                (e.coupling * cycle[(a, a)].max(0.0)).sqrt() * projected
            }
        })
        .collect()
}

/// `(sum_e K_e Ghat_e(f_rp,e), sum_e K_e Ghat_e(f_lin,e))`.
pub fn heavy_load_sums(net: &Network, f_rp: &[f64], f_lin: &[f64]) -> Result<(f64, f64)> {
    let sum = |flows: &[f64]| -> Result<f64> {
        check_domain(net, flows)?;
        net.edges()
            .iter()
            .zip(flows)
            .map(|(e, &f)| Ok(e.coupling * loading_indicator(e.coupling, f)?))
            .sum()
    };
    Ok((sum(f_rp)?, sum(f_lin)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Flavor {
    /// Nonlinear flow, loadings compared through the arcsine.
    Rp,
    /// Linear flow, loadings compared directly.
    Lin,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CycleHomogeneity {
    pub cycle: usize,
    /// Most and second most heavily loaded edges.
    pub top: usize,
    pub second: usize,
    pub lhs: f64,
    /// `(|C| - 1)` times the second loading measure.
    pub rhs: f64,
    pub holds: bool,
    /// Every edge of the cycle carries zero flow.
    pub zero_flow: bool,
}

/// Within every basis cycle, the heaviest loading is at most `|C| - 1` times
/// the second heaviest.
pub fn cycle_homogeneity_check(
    net: &Network,
    basis: &CycleBasis,
    flows: &[f64],
    flavor: Flavor,
) -> Result<Vec<CycleHomogeneity>> {
    match flavor {
        Flavor::Rp => check_domain(net, flows)?,
        Flavor::Lin => net.check_flow_len(flows)?,
    }
    let measure = |e: usize| {
        let x = (flows[e] / net.edges()[e].coupling).abs();
        match flavor {
            Flavor::Rp => clamped_arcsin(x),
            Flavor::Lin => x,
        }
    };
    Ok(basis
        .cycles()
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let mut members: Vec<usize> = c.edges().iter().map(|&(e, _)| e).collect();
            members.sort_by(|&a, &b| measure(b).total_cmp(&measure(a)).then(a.cmp(&b)));
            let (top, second) = (members[0], members[1]);
            let lhs = measure(top);
            let rhs = (members.len() - 1) as f64 * measure(second);
            CycleHomogeneity {
                cycle: i,
                top,
                second,
                lhs,
                rhs,
                holds: lhs <= rhs + 1e-10,
                zero_flow: lhs == 0.0,
            }
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaxLoading {
    pub max_rp: f64,
    pub max_lin: f64,
    /// `max_rp > max_lin (1 + 1e-6)`.
    pub underestimated: bool,
}

/// Relative slack on the maximum loading comparison.
pub const UNDERESTIMATION_THRESHOLD: f64 = 1e-6;

pub fn max_loading_comparison(net: &Network) -> Result<MaxLoading> {
    let base = solve_base(net)?;
    let f_rp = base_flows(&base)?;
    let f_lin = solve_linear(net)?.flows;
    Ok(compare_max_loading(net, &f_rp, &f_lin))
}

pub(crate) fn base_flows(base: &crate::solver::SolveOutcome) -> Result<Vec<f64>> {
    match base.classification {
        Classification::Infeasible => Err(Error::Infeasible(Box::new(
            base.certificate
                .clone()
                .expect("infeasible outcome has a certificate"),
        ))),
        Classification::BoundaryNoSolution => Err(Error::NoNormalState),
        _ => Ok(base.flows.clone().expect("fixed point has flows")),
    }
}

pub(crate) fn compare_max_loading(net: &Network, f_rp: &[f64], f_lin: &[f64]) -> MaxLoading {
    let max_load = |f: &[f64]| {
        f.iter()
            .zip(net.edges())
            .map(|(v, e)| v.abs() / e.coupling)
            .fold(0.0, f64::max)
    };
    let max_rp = max_load(f_rp);
    let max_lin = max_load(f_lin);
    MaxLoading {
        max_rp,
        max_lin,
        underestimated: max_rp > max_lin * (1.0 + UNDERESTIMATION_THRESHOLD),
    }
}

/// Everything about the linear flow of one instance and how it compares to
/// the nonlinear flow with winding vector zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApproxReport {
    pub f_lin: Vec<f64>,
    pub f_approx: Vec<f64>,
    pub f_rp: Vec<f64>,
    pub zeta: Vec<f64>,
    pub bound_simple: f64,
    pub bound_projected: f64,
    /// `||f_rp - f_lin||_K`.
    pub xi_norm: f64,
    pub per_line: Vec<f64>,
}

pub fn approx_report(net: &Network, basis: &CycleBasis) -> Result<ApproxReport> {
    let base = solve_base(net)?;
    approx_report_with(net, basis, base_flows(&base)?)
}

/// [`approx_report`] around an already computed nonlinear flow.
pub fn approx_report_with(
    net: &Network,
    basis: &CycleBasis,
    f_rp: Vec<f64>,
) -> Result<ApproxReport> {
    net.check_flow_len(&f_rp)?;
    let solver = LaplacianSolver::new(net)?;
    let f_lin = crate::linear::solve_linear_with(net, &solver).flows;
    check_interior(net, &f_lin)?;
    let f_approx = improved_approximation(net, basis, &f_lin)?;
    let bounds = error_bounds_with(net, &solver, &f_lin);
    let xi: Vec<f64> = f_rp.iter().zip(&f_lin).map(|(a, b)| a - b).collect();
    let proj = projectors(net)?;
    Ok(ApproxReport {
        per_line: per_line_from(net, &proj.cycle, bounds.projected),
        xi_norm: k_norm(net, &xi),
        bound_simple: bounds.simple,
        bound_projected: bounds.projected,
        zeta: bounds.zeta,
        f_lin,
        f_approx,
        f_rp,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepSearch {
    pub gamma: f64,
    /// `||f' - f_rp||_K` at `gamma`.
    pub error: f64,
    /// `||f - f_rp||_K` before the step.
    pub initial_error: f64,
}

/// Golden-section search for the step size in `[lo, hi]` that minimizes the
/// K-norm distance of one gradient step from `target`.
pub fn optimal_step(
    net: &Network,
    flows: &[f64],
    target: &[f64],
    lo: f64,
    hi: f64,
) -> Result<StepSearch> {
    net.check_flow_len(target)?;
    let g = projected_gradient(net, flows)?;
    let error = |gamma: f64| {
        let d: Vec<f64> = flows
            .iter()
            .zip(&g)
            .zip(target)
            .map(|((f, d), t)| f - gamma * d - t)
            .collect();
        k_norm(net, &d)
    };
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo, hi);
    let mut c = b - ratio * (b - a);
    let mut d = a + ratio * (b - a);
    let (mut fc, mut fd) = (error(c), error(d));
    while b - a > 1e-12 * (1.0 + a.abs() + b.abs()) {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - ratio * (b - a);
            fc = error(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + ratio * (b - a);
            fd = error(d);
        }
    }
    let gamma = 0.5 * (a + b);
    Ok(StepSearch {
        gamma,
        error: error(gamma),
        initial_error: error(0.0),
    })
}
