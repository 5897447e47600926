//! Gauss–Legendre quadrature: fixed rules, panelled composite rules and an
//! adaptive bisection driver.

use std::sync::OnceLock;

use crate::error::{LabError, Result};

/// Nodes and weights of an `n`-point Gauss–Legendre rule on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    /// Builds the rule by Newton iteration on the Legendre polynomial `P_n`.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Legendre rule needs at least one node");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let nf = n as f64;
        for i in 0..n.div_ceil(2) {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() <= 1e-16 * x.abs().max(1.0) {
                    let (_, d) = legendre_with_derivative(n, x);
                    dp = d;
                    break;
                }
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
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

    /// Integrates `f` over `[a, b]` with a single application of the rule.
    pub fn integrate<F: FnMut(f64) -> f64>(&self, mut f: F, a: f64, b: f64) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (b + a);
        let mut acc = 0.0;
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            acc += w * f(mid + half * x);
        }
        acc * half
    }

    /// Composite rule over `panels` equal sub-intervals of `[a, b]`.
    pub fn integrate_panels<F: FnMut(f64) -> f64>(
        &self,
        mut f: F,
        a: f64,
        b: f64,
        panels: usize,
    ) -> f64 {
        let panels = panels.max(1);
        let width = (b - a) / panels as f64;
        (0..panels)
            .map(|k| {
                let lo = a + width * k as f64;
                let hi = if k + 1 == panels { b } else { lo + width };
                self.integrate(&mut f, lo, hi)
            })
            .sum()
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
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

/// Shared 32-node rule used for spectral integrals.
pub fn gl32() -> &'static GaussLegendre {
    static RULE: OnceLock<GaussLegendre> = OnceLock::new();
    RULE.get_or_init(|| GaussLegendre::new(32))
}

/// Shared 64-node rule used for the snr integral.
pub fn gl64() -> &'static GaussLegendre {
    static RULE: OnceLock<GaussLegendre> = OnceLock::new();
    RULE.get_or_init(|| GaussLegendre::new(64))
}

/// Adaptive bisection on 32-node panels.
///
/// A panel is accepted when its estimate agrees with the sum over its two
/// halves to within `max(abs_tol, rel_tol * |whole|)` scaled by the panel's
/// share of the interval.
pub fn adaptive<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
) -> Result<f64> {
    const MAX_DEPTH: u32 = 60;
    const MAX_PANELS: usize = 100_000;
    let rule = gl32();
    let total = b - a;
    if total == 0.0 {
        return Ok(0.0);
    }
    let whole = rule.integrate(&mut f, a, b);
    let mut stack = vec![(a, b, whole, 0u32)];
    let mut acc = 0.0;
    let mut panels = 0usize;
    while let Some((lo, hi, est, depth)) = stack.pop() {
        panels += 1;
        if panels > MAX_PANELS {
            return Err(LabError::QuadratureFailure(format!(
                "more than {MAX_PANELS} panels on [{a}, {b}]"
            )));
        }
        let mid = 0.5 * (lo + hi);
        let left = rule.integrate(&mut f, lo, mid);
        let right = rule.integrate(&mut f, mid, hi);
        let refined = left + right;
        if !refined.is_finite() {
            return Err(LabError::QuadratureFailure(format!(
                "non-finite integrand on [{lo}, {hi}]"
            )));
        }
        let share = ((hi - lo) / total).abs();
        let tol = abs_tol.max(rel_tol * whole.abs()) * share;
        if (refined - est).abs() <= tol || depth >= MAX_DEPTH {
            if depth >= MAX_DEPTH && (refined - est).abs() > tol {
                return Err(LabError::QuadratureFailure(format!(
                    "maximum depth reached near [{lo}, {hi}]"
                )));
            }
            acc += refined;
        } else {
            stack.push((mid, hi, right, depth + 1));
            stack.push((lo, mid, left, depth + 1));
        }
    }
    Ok(acc)
}
