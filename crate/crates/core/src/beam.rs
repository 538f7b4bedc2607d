//! Large-deflection Euler–Bernoulli equilibrium of a pressurized cantilever
//! under tip loads; the synthetic ground-truth oracle.
//!
//! Inflation enters as a uniform actuation moment `c_p * P` along the arc
//! (constant curvature at zero load); tip loads are dead loads with a fixed
//! world direction. Equilibrium couples geometry and loading, so it is found
//! by under-relaxed fixed-point iteration: integrate the pose from the
//! current curvature samples, recompute bending moments from the deformed
//! geometry, update `kappa = (c_p P + M_ext)/EI`, repeat.

use crate::error::{Error, Result};
use crate::spiral::{CurvaturePolynomial, Pose};
use nalgebra::{Cholesky, DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::Write;

/// Standard gravity used for gram-to-newton conversion (m/s^2).
pub const STANDARD_GRAVITY: f64 = 9.81;

/// Measured actuator mass in grams, recorded for optional distributed-load
/// experiments (the default self-weight is zero).
pub const ACTUATOR_MASS_G: f64 = 25.86;

/// Physical description of the actuator-as-cantilever.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeamParams {
    /// Arc length L (m).
    pub length: f64,
    /// Flexural rigidity EI (N m^2).
    pub flexural_rigidity: f64,
    /// Uniform actuation moment per unit pressure, c_p (N m / kPa).
    pub pressure_gain: f64,
    /// Distributed self-weight w (N/m); 0 disables it.
    pub self_weight: f64,
    /// Station count of the arc-length discretization.
    pub nodes: usize,
}

impl BeamParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.length.is_finite() && self.length > 0.0) {
            return Err(Error::invalid_params("beam length must be positive"));
        }
        if !(self.flexural_rigidity.is_finite() && self.flexural_rigidity > 0.0) {
            return Err(Error::invalid_params("flexural rigidity must be positive"));
        }
        if !(self.pressure_gain.is_finite() && self.pressure_gain >= 0.0) {
            return Err(Error::invalid_params("pressure gain must be nonnegative"));
        }
        if !(self.self_weight.is_finite() && self.self_weight >= 0.0) {
            return Err(Error::invalid_params("self weight must be nonnegative"));
        }
        if self.nodes < 51 {
            return Err(Error::invalid_params(format!(
                "beam discretization needs at least 51 nodes, got {}",
                self.nodes
            )));
        }
        Ok(())
    }

    /// Self-weight density (N/m) if the recorded actuator mass is spread
    /// uniformly along the arc.
    pub fn uniform_self_weight(&self) -> f64 {
        ACTUATOR_MASS_G * 1e-3 * STANDARD_GRAVITY / self.length
    }
}

impl Default for BeamParams {
    /// Calibrated so 100 kPa at no load bends the arm to a quarter circle
    /// (tip angle pi/2), and a 25 g payload at 20 kPa deflects it visibly
    /// without reversing the base curvature.
    fn default() -> Self {
        let flexural_rigidity = 0.02;
        Self {
            length: 0.15,
            flexural_rigidity,
            pressure_gain: flexural_rigidity * std::f64::consts::PI / 30.0,
            self_weight: 0.0,
            nodes: 241,
        }
    }
}

/// Tip load kinds: a payload hangs in world -y; a contact force has a fixed
/// world direction chosen at construction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LoadKind {
    Payload,
    Contact,
}

impl LoadKind {
    pub fn name(self) -> &'static str {
        match self {
            LoadKind::Payload => "payload",
            LoadKind::Contact => "contact",
        }
    }
}

/// A dead tip load: fixed world direction, magnitude in newtons.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoadCase {
    kind: LoadKind,
    magnitude: f64,
    direction: [f64; 2],
}

impl LoadCase {
    /// Hanging payload: gravity direction (0, -1).
    pub fn payload(newtons: f64) -> Result<Self> {
        Self::checked(LoadKind::Payload, newtons, [0.0, -1.0])
    }

    /// Contact force along the given world direction (normalized here).
    pub fn contact(newtons: f64, direction: [f64; 2]) -> Result<Self> {
        let norm = direction[0].hypot(direction[1]);
        if !norm.is_finite() || norm == 0.0 {
            return Err(Error::invalid_params(
                "contact direction must be a nonzero finite vector",
            ));
        }
        Self::checked(
            LoadKind::Contact,
            newtons,
            [direction[0] / norm, direction[1] / norm],
        )
    }

    fn checked(kind: LoadKind, magnitude: f64, direction: [f64; 2]) -> Result<Self> {
        if !(magnitude.is_finite() && magnitude >= 0.0) {
            return Err(Error::invalid_params(format!(
                "load magnitude must be nonnegative, got {magnitude}"
            )));
        }
        Ok(Self {
            kind,
            magnitude,
            direction,
        })
    }

    pub fn kind(&self) -> LoadKind {
        self.kind
    }

    pub fn magnitude(&self) -> f64 {
        self.magnitude
    }

    pub fn direction(&self) -> [f64; 2] {
        self.direction
    }

    /// Force vector (N).
    pub fn force(&self) -> [f64; 2] {
        [
            self.magnitude * self.direction[0],
            self.magnitude * self.direction[1],
        ]
    }
}

/// Fixed-point iteration controls.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixedPointOptions {
    pub relaxation: f64,
    /// Convergence when the applied curvature change is below this at every
    /// station (1/m).
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for FixedPointOptions {
    fn default() -> Self {
        Self {
            relaxation: 0.5,
            tolerance: 1e-10,
            max_iterations: 500,
        }
    }
}

/// Converged equilibrium: curvature samples and poses on the station grid.
#[derive(Debug, Clone)]
pub struct EquilibriumResult {
    pub stations: Vec<f64>,
    pub curvature: Vec<f64>,
    pub poses: Vec<Pose>,
    pub iterations: usize,
    pub converged: bool,
}

impl EquilibriumResult {
    pub fn tip(&self) -> &Pose {
        self.poses.last().expect("station grid is non-empty")
    }

    /// Pose at an arbitrary arc length, linearly interpolated between
    /// stations (exact at stations).
    pub fn pose_at(&self, s: f64) -> Result<Pose> {
        let length = *self.stations.last().expect("station grid is non-empty");
        if !s.is_finite() || s < -1e-12 * length || s > length * (1.0 + 1e-12) {
            return Err(Error::ArcOutOfRange { s, length });
        }
        let h = length / (self.stations.len() - 1) as f64;
        let pos = (s / h).clamp(0.0, (self.stations.len() - 1) as f64);
        let i = (pos.floor() as usize).min(self.stations.len() - 2);
        let t = pos - i as f64;
        let (a, b) = (&self.poses[i], &self.poses[i + 1]);
        Ok(Pose::new(
            a.x + t * (b.x - a.x),
            a.y + t * (b.y - a.y),
            a.theta + t * (b.theta - a.theta),
        ))
    }
}

/// Poses from curvature samples on a uniform grid: cumulative trapezoid for
/// the tangent angle, then for the position integrals. Clamped base.
fn poses_from_curvature(curvature: &[f64], h: f64) -> Vec<Pose> {
    let n = curvature.len();
    let mut poses = Vec::with_capacity(n);
    let mut theta = 0.0;
    let (mut x, mut y) = (0.0, 0.0);
    let (mut prev_cos, mut prev_sin) = (1.0, 0.0);
    poses.push(Pose::new(0.0, 0.0, 0.0));
    for i in 1..n {
        theta += 0.5 * h * (curvature[i - 1] + curvature[i]);
        let (sin_t, cos_t) = theta.sin_cos();
        x += 0.5 * h * (prev_cos + cos_t);
        y += 0.5 * h * (prev_sin + sin_t);
        prev_cos = cos_t;
        prev_sin = sin_t;
        poses.push(Pose::new(x, y, theta));
    }
    poses
}

/// Bending moment at each station from the tip force and (optionally) the
/// distributed self-weight, given the current deformed geometry.
fn external_moments(poses: &[Pose], force: [f64; 2], self_weight: f64, h: f64) -> Vec<f64> {
    let n = poses.len();
    let tip = poses[n - 1];
    let mut moments = vec![0.0; n];
    for (m, p) in moments.iter_mut().zip(poses) {
        *m = (tip.x - p.x) * force[1] - (tip.y - p.y) * force[0];
    }
    if self_weight > 0.0 {
        // Suffix trapezoid of x over [s_i, L]; each arc element carries
        // weight w*ds in -y, so M_sw(s_i) = -w * int (x(t) - x_i) dt.
        let mut suffix = vec![0.0; n];
        for i in (0..n - 1).rev() {
            suffix[i] = suffix[i + 1] + 0.5 * h * (poses[i].x + poses[i + 1].x);
        }
        let length = h * (n - 1) as f64;
        for i in 0..n {
            let remaining = length - h * i as f64;
            moments[i] -= self_weight * (suffix[i] - poses[i].x * remaining);
        }
    }
    moments
}

/// Find the equilibrium under `pressure_kpa` and the tip load.
pub fn simulate_equilibrium(
    params: &BeamParams,
    pressure_kpa: f64,
    load: &LoadCase,
    opts: &FixedPointOptions,
) -> Result<EquilibriumResult> {
    params.validate()?;
    if !(pressure_kpa.is_finite() && pressure_kpa >= 0.0) {
        return Err(Error::invalid_params(format!(
            "pressure must be nonnegative, got {pressure_kpa}"
        )));
    }
    if !(opts.relaxation > 0.0 && opts.relaxation <= 1.0) {
        return Err(Error::invalid_params(
            "relaxation factor must lie in (0, 1]",
        ));
    }

    let n = params.nodes;
    let h = params.length / (n - 1) as f64;
    let actuation = params.pressure_gain * pressure_kpa;
    let force = load.force();

    let mut curvature = vec![actuation / params.flexural_rigidity; n];
    for iteration in 1..=opts.max_iterations {
        let poses = poses_from_curvature(&curvature, h);
        let moments = external_moments(&poses, force, params.self_weight, h);
        let mut max_change = 0.0_f64;
        for (kappa, moment) in curvature.iter_mut().zip(&moments) {
            let target = (actuation + moment) / params.flexural_rigidity;
            let change = opts.relaxation * (target - *kappa);
            max_change = max_change.max(change.abs());
            *kappa += change;
        }
        if max_change < opts.tolerance {
            let poses = poses_from_curvature(&curvature, h);
            let stations = (0..n).map(|i| h * i as f64).collect();
            return Ok(EquilibriumResult {
                stations,
                curvature,
                poses,
                iterations: iteration,
                converged: true,
            });
        }
    }
    Err(Error::NoConvergence {
        iterations: opts.max_iterations,
        residual: f64::NAN,
    })
}

/// Ordinary least-squares polynomial fit of the curvature profile and its
/// coefficient of determination. Fitting runs in the scaled abscissa s/L for
/// conditioning; coefficients are reported in physical units.
pub fn fit_curvature_polynomial(
    result: &EquilibriumResult,
    degree: usize,
) -> Result<(CurvaturePolynomial, f64)> {
    if degree > 2 {
        return Err(Error::invalid_config(format!(
            "curvature fits support degrees 0..=2, got {degree}"
        )));
    }
    if !result.converged {
        return Err(Error::invalid_params(
            "cannot fit an unconverged equilibrium",
        ));
    }
    let n = result.stations.len();
    if n < degree + 1 {
        return Err(Error::DegenerateFit(format!(
            "{n} stations cannot determine a degree-{degree} polynomial"
        )));
    }
    let length = *result.stations.last().expect("non-empty grid");
    let cols = degree + 1;
    let mut design = DMatrix::zeros(n, cols);
    for (i, &s) in result.stations.iter().enumerate() {
        let u = s / length;
        let mut p = 1.0;
        for j in 0..cols {
            design[(i, j)] = p;
            p *= u;
        }
    }
    let rhs = DVector::from_column_slice(&result.curvature);
    let normal = design.transpose() * &design;
    let moment = design.transpose() * &rhs;
    let scaled_coeffs = Cholesky::new(normal)
        .map(|ch| ch.solve(&moment))
        .ok_or_else(|| Error::DegenerateFit("normal equations are singular".into()))?;

    let fitted = &design * &scaled_coeffs;
    let ss_res: f64 = (&rhs - &fitted).iter().map(|r| r * r).sum();
    let mean = rhs.iter().sum::<f64>() / n as f64;
    let ss_tot: f64 = rhs.iter().map(|k| (k - mean) * (k - mean)).sum();

    // Constant profiles have no variance to explain: R^2 = 1 when the fit is
    // exact, 0 otherwise.
    let floor = 1e-20 * rhs.iter().map(|k| k * k).sum::<f64>().max(1.0);
    let r_squared = if ss_tot <= floor {
        if ss_res <= floor {
            1.0
        } else {
            0.0
        }
    } else {
        1.0 - ss_res / ss_tot
    };

    let mut coeffs = Vec::with_capacity(cols);
    let mut scale = 1.0;
    for j in 0..cols {
        coeffs.push(scaled_coeffs[j] / scale);
        scale *= length;
    }
    Ok((CurvaturePolynomial::new(coeffs)?, r_squared))
}

/// Load template for a study: the magnitude is filled per grid cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LoadTemplate {
    Payload,
    Contact { direction: [f64; 2] },
}

impl LoadTemplate {
    pub fn kind(&self) -> LoadKind {
        match self {
            LoadTemplate::Payload => LoadKind::Payload,
            LoadTemplate::Contact { .. } => LoadKind::Contact,
        }
    }

    fn instantiate(&self, newtons: f64) -> Result<LoadCase> {
        match self {
            LoadTemplate::Payload => LoadCase::payload(newtons),
            LoadTemplate::Contact { direction } => LoadCase::contact(newtons, *direction),
        }
    }
}

/// One fitted cell of a regression study.
#[derive(Debug, Clone, PartialEq)]
pub struct StudyCell {
    pub kind: LoadKind,
    pub degree: usize,
    pub pressure_kpa: f64,
    pub load_n: f64,
    pub r_squared: f64,
}

/// A cell whose simulation or fit failed, with the reason.
#[derive(Debug, Clone)]
pub struct StudyFailure {
    pub kind: LoadKind,
    pub pressure_kpa: f64,
    pub load_n: f64,
    pub reason: String,
}

/// Per-(kind, degree) aggregate of the study.
#[derive(Debug, Clone, PartialEq)]
pub struct StudySummary {
    pub kind: LoadKind,
    pub degree: usize,
    pub mean_r2: f64,
    pub std_r2: f64,
}

#[derive(Debug, Clone, Default)]
pub struct StudyTable {
    pub cells: Vec<StudyCell>,
    pub failures: Vec<StudyFailure>,
}

impl StudyTable {
    /// Mean and sample standard deviation of R^2 per (kind, degree), in
    /// (kind, degree) order.
    pub fn summaries(&self) -> Vec<StudySummary> {
        let mut out = Vec::new();
        for kind in [LoadKind::Payload, LoadKind::Contact] {
            for degree in [1, 2] {
                let values: Vec<f64> = self
                    .cells
                    .iter()
                    .filter(|c| c.kind == kind && c.degree == degree)
                    .map(|c| c.r_squared)
                    .collect();
                if values.is_empty() {
                    continue;
                }
                let mean = values.iter().sum::<f64>() / values.len() as f64;
                let var = if values.len() > 1 {
                    values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>()
                        / (values.len() - 1) as f64
                } else {
                    0.0
                };
                out.push(StudySummary {
                    kind,
                    degree,
                    mean_r2: mean,
                    std_r2: var.sqrt(),
                });
            }
        }
        out
    }
}

/// Simulate every (pressure, load, kind) cell and fit its curvature profile
/// with linear and quadratic polynomials. Failed cells are recorded, not
/// fatal. Cells evaluate in parallel; output order is canonical
/// (kind-major, then pressure, then load).
pub fn run_validation_study(
    params: &BeamParams,
    pressures_kpa: &[f64],
    loads_n: &[f64],
    kinds: &[LoadTemplate],
    opts: &FixedPointOptions,
) -> Result<StudyTable> {
    params.validate()?;
    if pressures_kpa.is_empty() || loads_n.is_empty() || kinds.is_empty() {
        return Err(Error::invalid_config("study grids must be non-empty"));
    }

    let mut grid = Vec::new();
    for template in kinds {
        for &p in pressures_kpa {
            for &w in loads_n {
                grid.push((*template, p, w));
            }
        }
    }

    let outcomes: Vec<_> = grid
        .par_iter()
        .map(|&(template, pressure, load_n)| {
            let cell = (|| -> Result<[StudyCell; 2]> {
                let load = template.instantiate(load_n)?;
                let eq = simulate_equilibrium(params, pressure, &load, opts)?;
                let (_, r2_lin) = fit_curvature_polynomial(&eq, 1)?;
                let (_, r2_quad) = fit_curvature_polynomial(&eq, 2)?;
                Ok([
                    StudyCell {
                        kind: template.kind(),
                        degree: 1,
                        pressure_kpa: pressure,
                        load_n,
                        r_squared: r2_lin,
                    },
                    StudyCell {
                        kind: template.kind(),
                        degree: 2,
                        pressure_kpa: pressure,
                        load_n,
                        r_squared: r2_quad,
                    },
                ])
            })();
            (template.kind(), pressure, load_n, cell)
        })
        .collect();

    let mut table = StudyTable::default();
    for (kind, pressure, load_n, outcome) in outcomes {
        match outcome {
            Ok(cells) => table.cells.extend(cells),
            Err(err) => table.failures.push(StudyFailure {
                kind,
                pressure_kpa: pressure,
                load_n,
                reason: err.to_string(),
            }),
        }
    }
    Ok(table)
}

/// CSV rows `kind,degree,pressure_kPa,load_N,r_squared`.
pub fn write_study_csv<W: Write>(out: &mut W, table: &StudyTable) -> Result<()> {
    writeln!(out, "kind,degree,pressure_kPa,load_N,r_squared")?;
    for cell in &table.cells {
        writeln!(
            out,
            "{},{},{},{},{}",
            cell.kind.name(),
            cell.degree,
            cell.pressure_kpa,
            cell.load_n,
            crate::spiral::fmt_full(cell.r_squared)
        )?;
    }
    Ok(())
}

/// CSV rows `kind,degree,mean_r2,std_r2`.
pub fn write_study_summary_csv<W: Write>(out: &mut W, summaries: &[StudySummary]) -> Result<()> {
    writeln!(out, "kind,degree,mean_r2,std_r2")?;
    for s in summaries {
        writeln!(
            out,
            "{},{},{},{}",
            s.kind.name(),
            s.degree,
            crate::spiral::fmt_full(s.mean_r2),
            crate::spiral::fmt_full(s.std_r2)
        )?;
    }
    Ok(())
}

/// CSV rows `s,x,y,theta,kappa` for a simulated equilibrium.
pub fn write_equilibrium_csv<W: Write>(out: &mut W, eq: &EquilibriumResult) -> Result<()> {
    writeln!(out, "s,x,y,theta,kappa")?;
    for ((s, pose), kappa) in eq.stations.iter().zip(&eq.poses).zip(&eq.curvature) {
        writeln!(
            out,
            "{},{},{},{},{}",
            crate::spiral::fmt_full(*s),
            crate::spiral::fmt_full(pose.x),
            crate::spiral::fmt_full(pose.y),
            crate::spiral::fmt_full(pose.theta),
            crate::spiral::fmt_full(*kappa)
        )?;
    }
    Ok(())
}
