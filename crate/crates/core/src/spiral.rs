//! Planar curves whose curvature is a polynomial in arc length.
//!
//! A shape is `(kappa(s), theta0, L)` with the base pinned at the origin:
//! the tangent angle is the closed-form antiderivative of the curvature
//! polynomial, and positions follow by composite Gauss–Legendre quadrature
//! of `(cos theta, sin theta)`.

use crate::error::{Error, Result};
use crate::quadrature::QuadratureConfig;
use nalgebra::{DMatrix, Matrix3, Vector3};
use serde::de::{SeqAccess, Visitor};
use serde::ser::SerializeTuple;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::f64::consts::{PI, TAU};
use std::io::Write;

/// Highest supported curvature-polynomial order; higher orders invite
/// ill-conditioning in the recovery solve.
pub const MAX_CURVATURE_ORDER: usize = 4;

/// Relative slack accepted on `s` at the ends of `[0, L]` before a domain
/// error; absorbs rounding in externally computed station values.
const ARC_RANGE_SLACK: f64 = 1e-12;

/// Curvature as a polynomial in arc length: `kappa(s) = sum_k c_k s^k`.
/// The coefficient `c_k` carries units of 1/length^(k+1).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CurvaturePolynomial {
    coeffs: Vec<f64>,
}

impl CurvaturePolynomial {
    pub fn new(coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::invalid_params(
                "curvature polynomial needs at least the constant coefficient",
            ));
        }
        if coeffs.len() > MAX_CURVATURE_ORDER + 1 {
            return Err(Error::invalid_params(format!(
                "curvature order {} exceeds the maximum {}",
                coeffs.len() - 1,
                MAX_CURVATURE_ORDER
            )));
        }
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::invalid_params(
                "curvature coefficients must be finite",
            ));
        }
        Ok(Self { coeffs })
    }

    /// Constant-curvature polynomial (a circular arc, or a line for 0).
    pub fn constant(kappa0: f64) -> Self {
        Self {
            coeffs: vec![kappa0],
        }
    }

    /// All-zero polynomial of the given order.
    pub fn zero(order: usize) -> Result<Self> {
        Self::new(vec![0.0; order + 1])
    }

    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// Evaluate `kappa(s)` by Horner's rule.
    pub fn evaluate(&self, s: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, c| acc * s + c)
    }

    /// The antiderivative `sum_k c_k s^(k+1) / (k+1)`: the tangent rotation
    /// accumulated over `[0, s]`.
    pub fn tangent_increment(&self, s: f64) -> f64 {
        let inner = self
            .coeffs
            .iter()
            .enumerate()
            .rev()
            .fold(0.0, |acc, (k, c)| acc * s + c / (k as f64 + 1.0));
        s * inner
    }
}

/// Planar pose: position in meters, tangent angle in radians.
///
/// Angles are stored unwrapped so that `theta(s)` is continuous in `s`;
/// wrap only when comparing against external angle inputs.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

impl Pose {
    pub fn new(x: f64, y: f64, theta: f64) -> Self {
        Self { x, y, theta }
    }

    /// Euclidean distance between the two positions (angles ignored).
    pub fn position_distance(&self, other: &Pose) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

// Wire form is the compact triple `[x, y, theta]`.
impl Serialize for Pose {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut tup = serializer.serialize_tuple(3)?;
        tup.serialize_element(&self.x)?;
        tup.serialize_element(&self.y)?;
        tup.serialize_element(&self.theta)?;
        tup.end()
    }
}

impl<'de> Deserialize<'de> for Pose {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        struct PoseVisitor;
        impl<'de> Visitor<'de> for PoseVisitor {
            type Value = Pose;

            fn expecting(&self, f: &mut std::fmt::Formatter) -> std::fmt::Result {
                f.write_str("a [x, y, theta] triple")
            }

            fn visit_seq<A: SeqAccess<'de>>(
                self,
                mut seq: A,
            ) -> std::result::Result<Pose, A::Error> {
                let x = seq
                    .next_element()?
                    .ok_or_else(|| serde::de::Error::invalid_length(0, &self))?;
                let y = seq
                    .next_element()?
                    .ok_or_else(|| serde::de::Error::invalid_length(1, &self))?;
                let theta = seq
                    .next_element()?
                    .ok_or_else(|| serde::de::Error::invalid_length(2, &self))?;
                Ok(Pose::new(x, y, theta))
            }
        }
        deserializer.deserialize_tuple(3, PoseVisitor)
    }
}

/// Map an angle to its representative in `(-pi, pi]`.
pub fn wrap_angle(angle: f64) -> f64 {
    let r = angle.rem_euclid(TAU);
    if r > PI {
        r - TAU
    } else {
        r
    }
}

/// Complete planar shape descriptor: curvature polynomial, base tangent
/// angle, and arc length. The base point is fixed at the origin.
#[derive(Debug, Clone, PartialEq)]
pub struct ShapeRep {
    kappa: CurvaturePolynomial,
    theta0: f64,
    length: f64,
}

impl ShapeRep {
    pub fn new(kappa: CurvaturePolynomial, theta0: f64, length: f64) -> Result<Self> {
        if !(length.is_finite() && length > 0.0) {
            return Err(Error::invalid_params(format!(
                "arc length must be positive and finite, got {length}"
            )));
        }
        if !theta0.is_finite() {
            return Err(Error::invalid_params("theta0 must be finite"));
        }
        Ok(Self {
            kappa,
            theta0,
            length,
        })
    }

    pub fn kappa(&self) -> &CurvaturePolynomial {
        &self.kappa
    }

    pub fn theta0(&self) -> f64 {
        self.theta0
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    fn checked_arc(&self, s: f64) -> Result<f64> {
        let slack = ARC_RANGE_SLACK * self.length;
        if !s.is_finite() || s < -slack || s > self.length + slack {
            return Err(Error::ArcOutOfRange {
                s,
                length: self.length,
            });
        }
        Ok(s.clamp(0.0, self.length))
    }

    /// Tangent angle at `s`, by the closed-form antiderivative of the
    /// curvature polynomial (no quadrature involved).
    pub fn eval_theta(&self, s: f64) -> Result<f64> {
        let s = self.checked_arc(s)?;
        Ok(self.theta0 + self.kappa.tangent_increment(s))
    }

    fn theta_unchecked(&self, s: f64) -> f64 {
        self.theta0 + self.kappa.tangent_increment(s)
    }

    /// Pose at `s`: position by composite Gauss–Legendre quadrature of
    /// `(cos theta, sin theta)`, angle in closed form.
    pub fn eval_pose(&self, s: f64, quad: &QuadratureConfig) -> Result<Pose> {
        let s = self.checked_arc(s)?;
        let panels = quad.panels_for(s / self.length);
        let mut xy = [0.0; 2];
        quad.rule()
            .integrate_into(0.0, s, panels, &mut xy, |t, out| {
                let (sin_t, cos_t) = self.theta_unchecked(t).sin_cos();
                out[0] = cos_t;
                out[1] = sin_t;
            });
        Ok(Pose::new(xy[0], xy[1], self.theta_unchecked(s)))
    }

    /// Poses at `stations` equally spaced arc lengths from base to tip,
    /// accumulated segment by segment with the same panel policy.
    pub fn sample(&self, stations: usize, quad: &QuadratureConfig) -> Result<Vec<Pose>> {
        if stations < 2 {
            return Err(Error::invalid_config(format!(
                "sampling needs at least 2 stations, got {stations}"
            )));
        }
        let mut poses = Vec::with_capacity(stations);
        poses.push(Pose::new(0.0, 0.0, self.theta0));
        let denom = (stations - 1) as f64;
        let seg_fraction = 1.0 / denom;
        let mut x = 0.0;
        let mut y = 0.0;
        let mut xy = [0.0; 2];
        for i in 1..stations {
            let lo = self.length * (i - 1) as f64 / denom;
            let hi = self.length * i as f64 / denom;
            let panels = quad.panels_for(seg_fraction);
            quad.rule()
                .integrate_into(lo, hi, panels, &mut xy, |t, out| {
                    let (sin_t, cos_t) = self.theta_unchecked(t).sin_cos();
                    out[0] = cos_t;
                    out[1] = sin_t;
                });
            x += xy[0];
            y += xy[1];
            poses.push(Pose::new(x, y, self.theta_unchecked(hi)));
        }
        Ok(poses)
    }

    /// Rigid frame at `s`: rotation about +z by `theta(s)`, translation
    /// `[x(s), y(s), 0]`.
    pub fn frame_at(&self, s: f64, quad: &QuadratureConfig) -> Result<FrameTransform> {
        let pose = self.eval_pose(s, quad)?;
        Ok(FrameTransform::planar(&pose))
    }

    /// Sensitivity of the endpoint `(x(L), y(L), theta(L))` to the curvature
    /// coefficients, rows in that order, columns `c_0..c_N`:
    ///
    ///   d x(L)/d c_k = -int_0^L sin(theta(t)) t^(k+1)/(k+1) dt
    ///   d y(L)/d c_k = +int_0^L cos(theta(t)) t^(k+1)/(k+1) dt
    ///   d theta(L)/d c_k = L^(k+1)/(k+1)
    pub fn endpoint_jacobian(&self, quad: &QuadratureConfig) -> Result<DMatrix<f64>> {
        let n = self.kappa.order() + 1;
        let mut integrals = vec![0.0; 2 * n];
        let panels = quad.panels_for(1.0);
        quad.rule()
            .integrate_into(0.0, self.length, panels, &mut integrals, |t, out| {
                let (sin_t, cos_t) = self.theta_unchecked(t).sin_cos();
                let mut power = t;
                for k in 0..n {
                    let basis = power / (k as f64 + 1.0);
                    out[k] = -sin_t * basis;
                    out[n + k] = cos_t * basis;
                    power *= t;
                }
            });
        let mut jac = DMatrix::zeros(3, n);
        let mut length_power = self.length;
        for k in 0..n {
            jac[(0, k)] = integrals[k];
            jac[(1, k)] = integrals[n + k];
            jac[(2, k)] = length_power / (k as f64 + 1.0);
            length_power *= self.length;
        }
        Ok(jac)
    }
}

/// Homogeneous transform of the moving frame: a member of SO(3) about +z
/// plus a translation with zero z-component (planar bending).
#[derive(Debug, Clone, PartialEq)]
pub struct FrameTransform {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

impl FrameTransform {
    fn planar(pose: &Pose) -> Self {
        let (s, c) = pose.theta.sin_cos();
        Self {
            rotation: Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0),
            translation: Vector3::new(pose.x, pose.y, 0.0),
        }
    }

    /// 4x4 homogeneous matrix `[R p; 0 1]`.
    pub fn homogeneous(&self) -> nalgebra::Matrix4<f64> {
        let mut t = nalgebra::Matrix4::identity();
        t.fixed_view_mut::<3, 3>(0, 0).copy_from(&self.rotation);
        t.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.translation);
        t
    }
}

/// Write `s,x,y,theta` rows (meters/radians, 17 significant digits) for the
/// shape sampled at `stations` points.
pub fn write_shape_csv<W: Write>(
    out: &mut W,
    shape: &ShapeRep,
    stations: usize,
    quad: &QuadratureConfig,
) -> Result<()> {
    let poses = shape.sample(stations, quad)?;
    writeln!(out, "s,x,y,theta")?;
    for (i, pose) in poses.iter().enumerate() {
        let s = shape.length() * i as f64 / (stations - 1) as f64;
        writeln!(
            out,
            "{},{},{},{}",
            fmt_full(s),
            fmt_full(pose.x),
            fmt_full(pose.y),
            fmt_full(pose.theta)
        )?;
    }
    Ok(())
}

/// Render a float with 17 significant digits (lossless for f64).
pub fn fmt_full(v: f64) -> String {
    format!("{v:.16e}")
}
