//! Composite Simpson weights on uniform grids.

use crate::error::{Error, Result};

/// Quadrature weights for a uniform grid with spacing `h`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    weights: Vec<f64>,
    spacing: f64,
}

impl QuadratureRule {
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Length of the integration interval, `(len - 1) · h`.
    pub fn span(&self) -> f64 {
        (self.weights.len() - 1) as f64 * self.spacing
    }
}

/// Composite Simpson 1/3 weights for `sample_count` points spaced `h` apart.
///
/// With an even number of points the last interval is closed with the
/// trapezoid rule, so the stencil is still total over arbitrary data.
pub fn simpson_weights(sample_count: usize, h: f64) -> Result<QuadratureRule> {
    if sample_count < 3 {
        return Err(Error::Argument(format!(
            "Simpson's rule needs at least 3 samples, got {sample_count}"
        )));
    }
    if !(h.is_finite() && h > 0.0) {
        return Err(Error::Argument(format!("grid spacing must be positive, got {h}")));
    }
    let simpson_len = if sample_count % 2 == 1 {
        sample_count
    } else {
        sample_count - 1
    };
    let mut weights = vec![0.0; sample_count];
    let third = h / 3.0;
    for (k, w) in weights.iter_mut().take(simpson_len).enumerate() {
        *w = if k == 0 || k == simpson_len - 1 {
            third
        } else if k % 2 == 1 {
            4.0 * third
        } else {
            2.0 * third
        };
    }
    if simpson_len < sample_count {
        weights[sample_count - 2] += 0.5 * h;
        weights[sample_count - 1] += 0.5 * h;
    }
    Ok(QuadratureRule { weights, spacing: h })
}

/// `Σₖ weights[k] · values[k]`.
pub fn integrate_sampled(values: &[f64], rule: &QuadratureRule) -> Result<f64> {
    check_len(values.len(), rule)?;
    Ok(values.iter().zip(&rule.weights).map(|(v, w)| v * w).sum())
}

/// Component-wise integration of vector-valued samples.
pub fn integrate_sampled_vectors<V: AsRef<[f64]>>(values: &[V], rule: &QuadratureRule) -> Result<Vec<f64>> {
    check_len(values.len(), rule)?;
    let dim = values.first().map_or(0, |v| v.as_ref().len());
    let mut acc = vec![0.0; dim];
    for (k, (v, w)) in values.iter().zip(&rule.weights).enumerate() {
        let v = v.as_ref();
        if v.len() != dim {
            return Err(Error::Argument(format!(
                "sample {k} has dimension {} but sample 0 has {dim}",
                v.len()
            )));
        }
        for (a, x) in acc.iter_mut().zip(v) {
            *a += w * x;
        }
    }
    Ok(acc)
}

fn check_len(len: usize, rule: &QuadratureRule) -> Result<()> {
    if len != rule.len() {
        return Err(Error::Argument(format!(
            "{len} samples supplied to a {}-point rule",
            rule.len()
        )));
    }
    Ok(())
}
