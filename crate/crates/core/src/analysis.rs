//! Reading structure out of regressed expressions and comparing force curves.

use crate::datasets::{PriorKind, PriorSpec, Source};
use crate::exprtree::expand::{expand, power_law_terms, Monomial};
use crate::exprtree::{evaluate, ExprNode};

/// `n` evenly spaced points on `[lo, hi]`, both ends included.
pub fn evaluation_grid(n: usize, lo: f64, hi: f64) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect(),
    }
}

/// The default reporting grid: 331 separations on [0.07, 0.4].
pub fn default_grid() -> Vec<f64> {
    evaluation_grid(331, 0.07, 0.4)
}

/// MSE after clipping both series to [-1, 1]. Reporting only; never a fitness term.
///
/// # Panics
/// If the lengths differ or both are empty.
pub fn clipped_mse(values: &[f64], reference: &[f64]) -> f64 {
    assert_eq!(values.len(), reference.len(), "clipped_mse needs equal lengths");
    assert!(!values.is_empty(), "clipped_mse needs at least one value");
    let clip = |v: f64| v.clamp(-1.0, 1.0);
    values.iter().zip(reference).map(|(&a, &b)| (clip(a) - clip(b)).powi(2)).sum::<f64>() / values.len() as f64
}

/// `(coefficient, exponent)` of both terms when the expression in `var` expands
/// to exactly two power-law terms, sorted by exponent.
pub fn two_term_power_law(expr: &ExprNode, params: &[f64], var: usize) -> Option<[(f64, f64); 2]> {
    match power_law_terms(expr, params, var)?.as_slice() {
        &[a, b] => Some([a, b]),
        _ => None,
    }
}

/// Zero crossings of a one-variable expression on `[lo, hi]`, located by a
/// scan over `n_scan` intervals followed by bisection.
pub fn roots(expr: &ExprNode, params: &[f64], lo: f64, hi: f64, n_scan: usize) -> Vec<f64> {
    let f = |x: f64| evaluate(expr, params, &[x]).ok();
    let grid = evaluation_grid(n_scan + 1, lo, hi);
    let mut out = Vec::new();
    for w in grid.windows(2) {
        let (Some(fa), Some(fb)) = (f(w[0]), f(w[1])) else { continue };
        if fa == 0.0 {
            out.push(w[0]);
            continue;
        }
        if fa.signum() == fb.signum() || fb == 0.0 {
            continue;
        }
        let (mut a, mut b, mut sa) = (w[0], w[1], fa.signum());
        for _ in 0..100 {
            let m = 0.5 * (a + b);
            match f(m) {
                Some(v) if v.signum() == sa => {
                    a = m;
                    sa = v.signum();
                }
                Some(_) => b = m,
                None => break,
            }
        }
        out.push(0.5 * (a + b));
    }
    out
}

/// Which of the three boids interaction terms appear in an expression for the
/// first message component.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct BoidsSignatures {
    /// A positive term along the unit position vector.
    pub cohesion: bool,
    /// A negative term along the position vector scaled by an inverse square of its length.
    pub separation: bool,
    /// A positive term along the relative velocity.
    pub alignment: bool,
}

impl BoidsSignatures {
    pub fn all(&self) -> bool {
        self.cohesion && self.separation && self.alignment
    }
}

fn classify(m: &Monomial, spec: &PriorSpec, out: &mut BoidsSignatures) {
    let defs = spec.defs();
    let mut vector: Option<(Source, usize)> = None;
    let mut n_vector = 0;
    let mut x_length = 0.0;
    for (&var, &e) in &m.powers {
        let Some(def) = defs.get(var) else { return };
        let kind = def.kind;
        if let Some(axis) = kind.axis() {
            if e != 1.0 {
                return;
            }
            n_vector += 1;
            vector = Some((kind.source(), axis));
        }
        if kind.source() == Source::Position {
            x_length += f64::from(kind.length_power()) * e;
        }
        if matches!(kind, PriorKind::Magnitude(Source::Velocity) | PriorKind::InverseMagnitude(Source::Velocity)) {
            return;
        }
    }
    let close = |v: f64, t: f64| (v - t).abs() < 0.25;
    match (n_vector, vector) {
        (1, Some((Source::Position, 0))) => {
            if m.coef > 0.0 && close(x_length, 0.0) {
                out.cohesion = true;
            }
            if m.coef < 0.0 && close(x_length, -1.0) {
                out.separation = true;
            }
        }
        (1, Some((Source::Velocity, 0))) if m.coef > 0.0 && close(x_length, 0.0) => out.alignment = true,
        _ => {}
    }
}

/// Expands the expression and classifies each monomial. Feature indices refer to `spec`.
pub fn boids_signatures(expr: &ExprNode, params: &[f64], spec: &PriorSpec) -> BoidsSignatures {
    let mut out = BoidsSignatures::default();
    if let Some(terms) = expand(expr, params) {
        for m in &terms {
            classify(m, spec, &mut out);
        }
    }
    out
}
