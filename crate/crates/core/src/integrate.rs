//! Composite Gauss–Legendre quadrature on rectangles.

use crate::error::{Error, Result};

/// Nodes and weights of an n-point Gauss–Legendre rule on [-1, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    /// Roots of P_n by Newton iteration from the Chebyshev-like guess.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Legendre order must be positive");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let nf = n as f64;
        for i in 0..n.div_ceil(2) {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, dp) = legendre_with_derivative(n, x);
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        Self { nodes, weights }
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Composite rule over `panels` equal sub-intervals of [a, b].
    pub fn integrate_1d<F: Fn(f64) -> f64>(&self, f: F, a: f64, b: f64, panels: usize) -> f64 {
        let h = (b - a) / panels as f64;
        (0..panels)
            .map(|k| {
                let lo = a + k as f64 * h;
                let mid = lo + 0.5 * h;
                let s: f64 = self
                    .nodes
                    .iter()
                    .zip(&self.weights)
                    .map(|(x, w)| w * f(mid + 0.5 * h * x))
                    .sum();
                0.5 * h * s
            })
            .sum()
    }

    /// Tensor-product composite rule with `panels` sub-intervals per axis.
    pub fn integrate_2d<F: Fn(f64, f64) -> f64>(
        &self,
        f: F,
        x: (f64, f64),
        y: (f64, f64),
        panels: usize,
    ) -> f64 {
        self.integrate_1d(|u| self.integrate_1d(|v| f(u, v), y.0, y.1, panels), x.0, x.1, panels)
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integral {
    pub value: f64,
    /// Panels per axis at which the estimate settled.
    pub panels: usize,
}

/// Adaptive driver: doubles panels per axis until successive estimates agree
/// to the relative tolerance.
#[derive(Debug, Clone, PartialEq)]
pub struct Quadrature2d {
    rule: GaussLegendre,
    pub rel_tol: f64,
    pub max_panels: usize,
}

impl Default for Quadrature2d {
    fn default() -> Self {
        Self::new(12, 1e-9, 256)
    }
}

impl Quadrature2d {
    pub fn new(order: usize, rel_tol: f64, max_panels: usize) -> Self {
        Self {
            rule: GaussLegendre::new(order),
            rel_tol,
            max_panels,
        }
    }

    pub fn rule(&self) -> &GaussLegendre {
        &self.rule
    }

    pub fn integrate<F: Fn(f64, f64) -> f64>(
        &self,
        f: F,
        x: (f64, f64),
        y: (f64, f64),
    ) -> Result<Integral> {
        let mut panels = 1;
        let mut prev = self.rule.integrate_2d(&f, x, y, panels);
        while panels < self.max_panels {
            panels *= 2;
            let next = self.rule.integrate_2d(&f, x, y, panels);
            if (next - prev).abs() <= self.rel_tol * next.abs() || next == prev {
                return Ok(Integral {
                    value: next,
                    panels,
                });
            }
            prev = next;
        }
        Err(Error::IntegrationDidNotConverge {
            tolerance: self.rel_tol,
            panels,
        })
    }
}
