//! Derivative-free Nelder-Mead simplex minimization.
//!
//! The chi-square objectives of this crate are non-smooth at radicand
//! zeros, so a gradient-free method is used throughout. This is the
//! standard downhill-simplex algorithm with reflection, expansion,
//! contraction, and shrink steps.

use alloc::vec;
use alloc::vec::Vec;

use crate::math;

/// Nelder-Mead coefficients and stopping rules.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimplexConfig {
    /// Maximum number of iterations (one reflection cycle each).
    pub max_iterations: usize,
    /// Convergence threshold on the simplex value spread.
    pub tolerance: f64,
    /// Convergence threshold on the simplex diameter; both must hold
    /// (a value spread alone is fooled by a simplex symmetric about the
    /// minimum).
    pub x_tolerance: f64,
    /// Reflection coefficient (`alpha`, conventionally 1).
    pub reflection: f64,
    /// Expansion coefficient (`gamma`, conventionally 2).
    pub expansion: f64,
    /// Contraction coefficient (`rho`, conventionally 1/2).
    pub contraction: f64,
    /// Shrink coefficient (`sigma`, conventionally 1/2).
    pub shrink: f64,
}

impl Default for SimplexConfig {
    fn default() -> Self {
        Self {
            max_iterations: 2000,
            tolerance: 1e-12,
            x_tolerance: 1e-8,
            reflection: 1.0,
            expansion: 2.0,
            contraction: 0.5,
            shrink: 0.5,
        }
    }
}

/// Result of one simplex minimization.
#[derive(Debug, Clone, PartialEq)]
pub struct SimplexResult {
    /// Best point found.
    pub x: Vec<f64>,
    /// Objective value at the best point.
    pub value: f64,
    /// Iterations actually performed.
    pub iterations: usize,
    /// Whether the value spread fell below the tolerance.
    pub converged: bool,
}

/// Minimizes `f` starting from `x0` with an initial simplex spanned by
/// per-coordinate steps. A zero step is replaced by a small absolute one
/// so the simplex is never degenerate.
pub fn nelder_mead<F: FnMut(&[f64]) -> f64>(
    mut f: F,
    x0: &[f64],
    steps: &[f64],
    config: &SimplexConfig,
) -> SimplexResult {
    let n = x0.len();
    assert_eq!(steps.len(), n, "one initial step per coordinate");
    assert!(n > 0, "empty parameter vector");

    // vertices[k] is a point, values[k] its objective value
    let mut vertices: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    vertices.push(x0.to_vec());
    for i in 0..n {
        let mut v = x0.to_vec();
        let s = if math::abs(steps[i]) > 0.0 {
            steps[i]
        } else {
            2.5e-2
        };
        v[i] += s;
        vertices.push(v);
    }
    let mut values: Vec<f64> = vertices.iter().map(|v| f(v)).collect();

    let mut iterations = 0;
    let mut converged = false;
    while iterations < config.max_iterations {
        iterations += 1;
        // order the simplex: best first, worst last
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap_or(core::cmp::Ordering::Equal));
        let best = order[0];
        let worst = order[n];
        let second_worst = order[n - 1];
        let diameter = vertices
            .iter()
            .flat_map(|v| v.iter().zip(&vertices[best]).map(|(&a, &b)| math::abs(a - b)))
            .fold(0.0f64, f64::max);
        if math::abs(values[worst] - values[best]) <= config.tolerance
            && diameter <= config.x_tolerance
        {
            converged = true;
            break;
        }

        // centroid of all vertices but the worst
        let mut centroid = vec![0.0f64; n];
        for (k, v) in vertices.iter().enumerate() {
            if k == worst {
                continue;
            }
            for (c, &vi) in centroid.iter_mut().zip(v) {
                *c += vi;
            }
        }
        for c in centroid.iter_mut() {
            *c /= n as f64;
        }

        let blend = |a: f64, from: &[f64], to: &[f64]| -> Vec<f64> {
            from.iter()
                .zip(to)
                .map(|(&p, &q)| p + a * (q - p))
                .collect()
        };

        // reflection: centroid + alpha * (centroid - worst)
        let reflected = blend(-config.reflection, &centroid, &vertices[worst]);
        let fr = f(&reflected);
        if fr < values[best] {
            // expansion
            let expanded = blend(-config.expansion, &centroid, &vertices[worst]);
            let fe = f(&expanded);
            if fe < fr {
                vertices[worst] = expanded;
                values[worst] = fe;
            } else {
                vertices[worst] = reflected;
                values[worst] = fr;
            }
            continue;
        }
        if fr < values[second_worst] {
            vertices[worst] = reflected;
            values[worst] = fr;
            continue;
        }
        // contraction, outside or inside of the worst vertex
        let contracted = if fr < values[worst] {
            blend(-config.contraction, &centroid, &vertices[worst])
        } else {
            blend(config.contraction, &centroid, &vertices[worst])
        };
        let fc = f(&contracted);
        if fc < values[worst].min(fr) {
            vertices[worst] = contracted;
            values[worst] = fc;
            continue;
        }
        // shrink every vertex toward the best
        let anchor = vertices[best].clone();
        for (k, v) in vertices.iter_mut().enumerate() {
            if k == best {
                continue;
            }
            *v = anchor
                .iter()
                .zip(v.iter())
                .map(|(&b, &p)| b + config.shrink * (p - b))
                .collect();
            values[k] = f(v);
        }
    }

    let mut best = 0;
    for k in 1..=n {
        if values[k] < values[best] {
            best = k;
        }
    }
    SimplexResult {
        x: vertices.swap_remove(best),
        value: values[best],
        iterations,
        converged,
    }
}
