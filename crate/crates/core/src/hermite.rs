//! Curvature recovery from endpoint poses: given both endpoint positions,
//! both tangent angles, and the arc length, find the curvature polynomial
//! whose curve matches them (G1 Hermite interpolation).
//!
//! The three terminal mismatches (x, y, theta) are driven to zero by a
//! Levenberg–Marquardt iteration over the curvature coefficients; the base
//! pose holds by construction and the base angle is read from the boundary,
//! not optimized. Position mismatches are normalized by the arc length so
//! the three residuals are commensurate and dimensionless.

use crate::error::{Error, Result};
use crate::quadrature::QuadratureConfig;
use crate::spiral::{wrap_angle, CurvaturePolynomial, Pose, ShapeRep, MAX_CURVATURE_ORDER};
use nalgebra::{DMatrix, DVector};
use std::f64::consts::TAU;

/// Relative slack on the chord-vs-length feasibility check; absorbs rounding
/// in externally integrated endpoints.
const CHORD_SLACK: f64 = 1e-9;

/// Tight relative tolerance for recognizing the degenerate straight-line
/// boundary, which is returned without iterating.
const STRAIGHT_TOL: f64 = 1e-12;

/// Endpoint data for the interpolation: base pose (angle = theta0), tip pose
/// (angle = theta1), and the arc length between them.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryData {
    p0: Pose,
    p1: Pose,
    length: f64,
}

impl BoundaryData {
    pub fn new(p0: Pose, p1: Pose, length: f64) -> Result<Self> {
        for v in [p0.x, p0.y, p0.theta, p1.x, p1.y, p1.theta] {
            if !v.is_finite() {
                return Err(Error::invalid_params("boundary poses must be finite"));
            }
        }
        if !(length.is_finite() && length > 0.0) {
            return Err(Error::invalid_params(format!(
                "boundary arc length must be positive, got {length}"
            )));
        }
        let chord = p0.position_distance(&p1);
        if chord > length * (1.0 + CHORD_SLACK) {
            return Err(Error::InfeasibleBoundary { chord, length });
        }
        Ok(Self { p0, p1, length })
    }

    /// Forward-generate the boundary of a shape based at `base` (tip obtained
    /// by evaluating the shape at its full length).
    pub fn from_shape(shape: &ShapeRep, base: Pose, quad: &QuadratureConfig) -> Result<Self> {
        let tip_local = shape.eval_pose(shape.length(), quad)?;
        // The shape frame has theta0 already folded in; offset positions only.
        let tip = Pose::new(base.x + tip_local.x, base.y + tip_local.y, tip_local.theta);
        Self::new(
            Pose::new(base.x, base.y, shape.theta0()),
            tip,
            shape.length(),
        )
    }

    pub fn p0(&self) -> &Pose {
        &self.p0
    }

    pub fn p1(&self) -> &Pose {
        &self.p1
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn chord(&self) -> f64 {
        self.p0.position_distance(&self.p1)
    }
}

/// Levenberg–Marquardt controls.
#[derive(Debug, Clone)]
pub struct SolverOptions {
    /// Stop when the weighted residual norm drops below this.
    pub residual_tolerance: f64,
    /// Stop when an accepted step's norm drops below this.
    pub step_tolerance: f64,
    pub max_iterations: usize,
    pub lambda_init: f64,
    pub quadrature: QuadratureConfig,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            residual_tolerance: 1e-10,
            step_tolerance: 1e-12,
            max_iterations: 200,
            lambda_init: 1e-3,
            quadrature: QuadratureConfig::default(),
        }
    }
}

/// Solution summary: recovered coefficients, the weighted terminal residual
/// at the solution, iteration count, and whether the residual tolerance was
/// met. `residual_history` holds the residual norm at the start and after
/// each accepted step (non-increasing by construction).
#[derive(Debug, Clone)]
pub struct SolveReport {
    pub kappa: CurvaturePolynomial,
    pub residual: [f64; 3],
    pub iterations: usize,
    pub converged: bool,
    pub residual_history: Vec<f64>,
}

impl SolveReport {
    pub fn residual_norm(&self) -> f64 {
        self.residual.iter().map(|r| r * r).sum::<f64>().sqrt()
    }
}

/// Weighted terminal mismatch of `kappa` against the boundary:
/// `[(x(L)-x1)/L, (y(L)-y1)/L, wrap(theta(L)-theta1)]`, the angle taken as
/// the wrapped difference nearest the unwrapped prediction.
pub fn residual(
    kappa: &CurvaturePolynomial,
    boundary: &BoundaryData,
    quad: &QuadratureConfig,
) -> Result<[f64; 3]> {
    let raw = residual_toward(kappa, boundary, boundary.p1.theta, quad)?;
    Ok([raw[0], raw[1], wrap_angle(raw[2])])
}

/// Residual against an explicit (already branch-adjusted) target angle; the
/// angle component is the raw difference, which keeps the objective smooth
/// inside the solver loop.
fn residual_toward(
    kappa: &CurvaturePolynomial,
    boundary: &BoundaryData,
    theta1_target: f64,
    quad: &QuadratureConfig,
) -> Result<[f64; 3]> {
    let shape = ShapeRep::new(kappa.clone(), boundary.p0.theta, boundary.length)?;
    let tip = shape.eval_pose(boundary.length, quad)?;
    let inv_l = 1.0 / boundary.length;
    Ok([
        (boundary.p0.x + tip.x - boundary.p1.x) * inv_l,
        (boundary.p0.y + tip.y - boundary.p1.y) * inv_l,
        tip.theta - theta1_target,
    ])
}

/// Constant-curvature starting point: the arc whose net tangent rotation
/// matches the boundary, `c0 = (theta1 - theta0)/L`, higher terms zero.
pub fn initial_guess(boundary: &BoundaryData, order: usize) -> Result<CurvaturePolynomial> {
    if order > MAX_CURVATURE_ORDER {
        return Err(Error::invalid_params(format!(
            "order {order} exceeds the maximum {MAX_CURVATURE_ORDER}"
        )));
    }
    let mut coeffs = vec![0.0; order + 1];
    coeffs[0] = (boundary.p1.theta - boundary.p0.theta) / boundary.length;
    CurvaturePolynomial::new(coeffs)
}

/// Solve the G1 Hermite interpolation by Levenberg–Marquardt on the weighted
/// terminal residual, starting from the constant-curvature guess.
///
/// With `order >= 2` a feasible boundary is matched to the residual
/// tolerance; for lower orders the returned coefficients are the
/// least-squares optimum of the (over-determined) three-residual system and
/// `converged` reports whether the tolerance was nevertheless met. The tip
/// angle is re-expressed in the 2-pi class nearest the initial guess's
/// predicted terminal angle, pinning the physically relevant branch.
pub fn solve_g1(
    boundary: &BoundaryData,
    order: usize,
    options: &SolverOptions,
) -> Result<SolveReport> {
    let quad = &options.quadrature;

    // Degenerate fully stretched boundary: the only curve is the straight
    // line; return it without iterating.
    if let Some(report) = straight_line_shortcut(boundary, order, quad)? {
        return Ok(report);
    }

    let guess = initial_guess(boundary, order)?;
    let theta_predicted = boundary.p0.theta + guess.tangent_increment(boundary.length);
    let branch_shift = ((theta_predicted - boundary.p1.theta) / TAU).round();
    let theta1_target = boundary.p1.theta + TAU * branch_shift;

    let n = order + 1;
    let mut kappa = guess;
    let mut res = residual_toward(&kappa, boundary, theta1_target, quad)?;
    let mut cost = res.iter().map(|r| r * r).sum::<f64>();
    let mut history = vec![cost.sqrt()];
    let mut lambda = options.lambda_init;
    let mut converged = cost.sqrt() < options.residual_tolerance;
    let mut iterations = 0;

    while !converged && iterations < options.max_iterations {
        iterations += 1;

        let shape = ShapeRep::new(kappa.clone(), boundary.p0.theta, boundary.length)?;
        let mut jac = shape.endpoint_jacobian(quad)?;
        // Same weighting as the residual: position rows by 1/L.
        let inv_l = 1.0 / boundary.length;
        for col in 0..n {
            jac[(0, col)] *= inv_l;
            jac[(1, col)] *= inv_l;
        }
        let r_vec = DVector::from_row_slice(&res);
        let normal = jac.transpose() * &jac;
        let gradient = jac.transpose() * r_vec;

        // Marquardt scaling keeps the damping meaningful across coefficient
        // columns whose magnitudes differ by powers of L.
        let mut damped = normal.clone();
        for d in 0..n {
            damped[(d, d)] += lambda * normal[(d, d)].max(1e-30);
        }
        let step = match solve_linear(&damped, &gradient) {
            Some(step) => step,
            None => {
                lambda *= 10.0;
                if lambda > 1e14 {
                    break;
                }
                continue;
            }
        };

        let mut trial_coeffs = kappa.coeffs().to_vec();
        for (c, delta) in trial_coeffs.iter_mut().zip(step.iter()) {
            *c -= delta;
        }
        let trial = CurvaturePolynomial::new(trial_coeffs)?;
        let trial_res = residual_toward(&trial, boundary, theta1_target, quad)?;
        let trial_cost = trial_res.iter().map(|r| r * r).sum::<f64>();

        if trial_cost.is_finite() && trial_cost <= cost {
            kappa = trial;
            res = trial_res;
            cost = trial_cost;
            history.push(cost.sqrt());
            lambda = (lambda / 10.0).max(1e-15);
            if cost.sqrt() < options.residual_tolerance {
                converged = true;
                break;
            }
            if step.norm() < options.step_tolerance {
                break;
            }
        } else {
            lambda *= 10.0;
            if lambda > 1e14 {
                // Damping has shrunk trial steps to nothing: stationary point
                // of the least-squares objective.
                break;
            }
        }
    }

    if !converged && iterations >= options.max_iterations && order >= 2 {
        return Err(Error::NoConvergence {
            iterations,
            residual: cost.sqrt(),
        });
    }

    Ok(SolveReport {
        kappa,
        residual: res,
        iterations,
        converged,
        residual_history: history,
    })
}

fn straight_line_shortcut(
    boundary: &BoundaryData,
    order: usize,
    quad: &QuadratureConfig,
) -> Result<Option<SolveReport>> {
    let chord = boundary.chord();
    if (chord - boundary.length).abs() > STRAIGHT_TOL * boundary.length {
        return Ok(None);
    }
    let chord_angle = (boundary.p1.y - boundary.p0.y).atan2(boundary.p1.x - boundary.p0.x);
    let d0 = wrap_angle(boundary.p0.theta - chord_angle).abs();
    let d1 = wrap_angle(boundary.p1.theta - chord_angle).abs();
    if d0 > STRAIGHT_TOL || d1 > STRAIGHT_TOL {
        return Ok(None);
    }
    let kappa = CurvaturePolynomial::zero(order)?;
    let res = residual(&kappa, boundary, quad)?;
    let norm = res.iter().map(|r| r * r).sum::<f64>().sqrt();
    Ok(Some(SolveReport {
        kappa,
        residual: res,
        iterations: 0,
        converged: true,
        residual_history: vec![norm],
    }))
}

fn solve_linear(a: &DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
    a.clone()
        .cholesky()
        .map(|ch| ch.solve(b))
        .or_else(|| a.clone().lu().solve(b))
}
