//! Composite Gauss–Legendre quadrature for smooth integrands.

use crate::error::{Error, Result};

/// Nodes and weights of an n-point Gauss–Legendre rule on `[-1, 1]`.
///
/// Nodes are the roots of the Legendre polynomial P_n, found by Newton
/// iteration on the three-term recurrence; stored in ascending order.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::invalid_config(format!(
                "Gauss-Legendre rule needs at least 2 nodes, got {n}"
            )));
        }
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        for i in 0..n.div_ceil(2) {
            // Tricomi initial guess for the i-th root counted from +1.
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut deriv = 0.0;
            for _ in 0..100 {
                let (p, dp) = legendre_with_derivative(n, x);
                deriv = dp;
                let dx = -p / dp;
                x += dx;
                if dx.abs() <= 1e-16 * x.abs().max(1.0) {
                    break;
                }
            }
            let w = 2.0 / ((1.0 - x * x) * deriv * deriv);
            nodes[n - 1 - i] = x;
            weights[n - 1 - i] = w;
            nodes[i] = -x;
            weights[i] = w;
        }
        Ok(Self { nodes, weights })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Integrate `f` over `[a, b]` split into `panels` equal panels.
    pub fn integrate<F: Fn(f64) -> f64>(&self, a: f64, b: f64, panels: usize, f: F) -> f64 {
        let mut out = [0.0];
        self.integrate_into(a, b, panels, &mut out, |t, dst| dst[0] = f(t));
        out[0]
    }

    /// Integrate a vector-valued integrand over `[a, b]`; `f` writes the
    /// integrand at `t` into the scratch slice, and `out` accumulates one
    /// integral per component.
    pub fn integrate_into<F: Fn(f64, &mut [f64])>(
        &self,
        a: f64,
        b: f64,
        panels: usize,
        out: &mut [f64],
        f: F,
    ) {
        out.fill(0.0);
        if panels == 0 || a == b {
            return;
        }
        let width = (b - a) / panels as f64;
        let half = 0.5 * width;
        let mut scratch = vec![0.0; out.len()];
        for p in 0..panels {
            let mid = a + (p as f64 + 0.5) * width;
            for (x, w) in self.nodes.iter().zip(&self.weights) {
                f(mid + half * x, &mut scratch);
                for (acc, v) in out.iter_mut().zip(&scratch) {
                    *acc += w * half * v;
                }
            }
        }
    }
}

/// Legendre polynomial P_n and its derivative at `x`, for interior `|x| < 1`.
fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p_prev = 1.0;
    let mut p = x;
    for k in 2..=n {
        let kf = k as f64;
        let p_next = ((2.0 * kf - 1.0) * x * p - (kf - 1.0) * p_prev) / kf;
        p_prev = p;
        p = p_next;
    }
    let dp = n as f64 * (x * p - p_prev) / (x * x - 1.0);
    (p, dp)
}

/// Panelization policy for integrals along a shape of arc length L:
/// `panels_per_length` panels cover the full length, and integrating to an
/// interior `s` uses proportionally fewer panels (at least one).
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureConfig {
    rule: GaussLegendre,
    nodes_per_panel: usize,
    panels_per_length: usize,
}

impl QuadratureConfig {
    pub fn new(nodes_per_panel: usize, panels_per_length: usize) -> Result<Self> {
        if panels_per_length == 0 {
            return Err(Error::invalid_config(
                "quadrature needs at least one panel per unit length",
            ));
        }
        Ok(Self {
            rule: GaussLegendre::new(nodes_per_panel)?,
            nodes_per_panel,
            panels_per_length,
        })
    }

    pub fn rule(&self) -> &GaussLegendre {
        &self.rule
    }

    pub fn nodes_per_panel(&self) -> usize {
        self.nodes_per_panel
    }

    pub fn panels_per_length(&self) -> usize {
        self.panels_per_length
    }

    /// Panel count for integrating over a span that is `fraction` of the
    /// shape length (clamped to `[0, 1]`).
    pub fn panels_for(&self, fraction: f64) -> usize {
        let fraction = fraction.clamp(0.0, 1.0);
        ((fraction * self.panels_per_length as f64).ceil() as usize).max(1)
    }
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        // 8 nodes per panel, 64 panels across the shape; spectral accuracy per
        // panel for trig-of-polynomial integrands.
        Self::new(8, 64).expect("static parameters are valid")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    // Abramowitz & Stegun table 25.4, 8-point rule.
    #[allow(clippy::excessive_precision)]
    const NODES_8: [f64; 4] = [
        0.1834346424956498,
        0.5255324099163290,
        0.7966664774136267,
        0.9602898564975362,
    ];
    #[allow(clippy::excessive_precision)]
    const WEIGHTS_8: [f64; 4] = [
        0.3626837833783620,
        0.3137066458778873,
        0.2223810344533745,
        0.1012285362903763,
    ];

    #[test]
    fn eight_point_rule_matches_reference_table() {
        let rule = GaussLegendre::new(8).unwrap();
        for (i, (&x, &w)) in NODES_8.iter().zip(&WEIGHTS_8).enumerate() {
            assert_abs_diff_eq!(rule.nodes()[4 + i], x, epsilon = 1e-15);
            assert_abs_diff_eq!(rule.nodes()[3 - i], -x, epsilon = 1e-15);
            assert_abs_diff_eq!(rule.weights()[4 + i], w, epsilon = 1e-15);
            assert_abs_diff_eq!(rule.weights()[3 - i], w, epsilon = 1e-15);
        }
    }

    #[test]
    fn weights_sum_to_two() {
        for n in 2..=16 {
            let rule = GaussLegendre::new(n).unwrap();
            let sum: f64 = rule.weights().iter().sum();
            assert_abs_diff_eq!(sum, 2.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn exact_for_polynomials_up_to_degree_2n_minus_1() {
        let rule = GaussLegendre::new(4).unwrap();
        // degree 7 on [0, 2]: integral of x^7 = 2^8/8 = 32
        let got = rule.integrate(0.0, 2.0, 1, |x| x.powi(7));
        assert_abs_diff_eq!(got, 32.0, epsilon = 1e-12);
    }

    #[test]
    fn composite_integrates_trig() {
        let quad = QuadratureConfig::default();
        let got = quad
            .rule()
            .integrate(0.0, std::f64::consts::PI, quad.panels_for(1.0), f64::sin);
        assert_abs_diff_eq!(got, 2.0, epsilon = 1e-14);
    }

    #[test]
    fn rejects_single_node() {
        assert!(GaussLegendre::new(1).is_err());
        assert!(QuadratureConfig::new(1, 64).is_err());
        assert!(QuadratureConfig::new(8, 0).is_err());
    }

    #[test]
    fn panel_count_scales_with_fraction() {
        let quad = QuadratureConfig::default();
        assert_eq!(quad.panels_for(1.0), 64);
        assert_eq!(quad.panels_for(0.5), 32);
        assert_eq!(quad.panels_for(1e-9), 1);
        assert_eq!(quad.panels_for(0.0), 1);
    }
}
