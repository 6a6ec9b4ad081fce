//! Central-cut ellipsoid method for convex minimization over a convex set.
//!
//! The ellipsoid is `{x : (x − c)ᵀ P⁻¹ (x − c) ≤ 1}`. Each step asks the
//! oracle about the center: a feasibility cut returns the gradient of a
//! violated constraint, an objective cut returns `f(c)` and a subgradient.
//! Objective cuts also yield the lower bound `f(c) − √(gᵀPg)`, which
//! certifies the gap of the best feasible center.

use nalgebra::{DMatrix, DVector};

pub(crate) enum Cut {
    /// Keep the half-space `{x : gᵀ(x − c) ≤ 0}`; the center is infeasible.
    Feasibility(Vec<f64>),
    Objective { value: f64, subgradient: Vec<f64> },
}

#[derive(Debug, Clone)]
pub(crate) struct EllipsoidRun {
    pub best: Option<Vec<f64>>,
    pub best_value: f64,
    pub lower_bound: f64,
    pub iterations: usize,
}

impl EllipsoidRun {
    pub fn gap(&self) -> f64 {
        self.best_value - self.lower_bound
    }
}

pub(crate) fn minimize<F>(
    center: &[f64],
    radius: f64,
    tol: f64,
    max_iter: usize,
    mut oracle: F,
) -> EllipsoidRun
where
    F: FnMut(&[f64]) -> Cut,
{
    let n = center.len();
    let mut c = DVector::from_column_slice(center);
    let mut p = DMatrix::<f64>::identity(n, n) * (radius * radius);
    let mut run = EllipsoidRun {
        best: None,
        best_value: f64::INFINITY,
        lower_bound: f64::NEG_INFINITY,
        iterations: 0,
    };
    let nf = n as f64;
    while run.iterations < max_iter {
        run.iterations += 1;
        let g = match oracle(c.as_slice()) {
            Cut::Feasibility(g) => DVector::from_vec(g),
            Cut::Objective { value, subgradient } => {
                let g = DVector::from_vec(subgradient);
                let width = (g.dot(&(&p * &g))).max(0.0).sqrt();
                if value < run.best_value {
                    run.best_value = value;
                    run.best = Some(c.as_slice().to_vec());
                }
                run.lower_bound = run.lower_bound.max(value - width);
                if run.gap() <= tol || width == 0.0 {
                    if width == 0.0 {
                        run.lower_bound = run.lower_bound.max(value);
                    }
                    break;
                }
                g
            }
        };
        let pg = &p * &g;
        let gpg = g.dot(&pg);
        if !(gpg > 0.0) || !gpg.is_finite() {
            break;
        }
        let q = pg / gpg.sqrt();
        if n == 1 {
            c -= &q * 0.5;
            p *= 0.25;
        } else {
            c -= &q * (1.0 / (nf + 1.0));
            let scale = nf * nf / (nf * nf - 1.0);
            p = (&p - (&q * q.transpose()) * (2.0 / (nf + 1.0))) * scale;
            p = (&p + p.transpose()) * 0.5;
        }
    }
    run
}
