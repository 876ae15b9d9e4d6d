//! Exponential dot-product kernels.
//!
//! The scalar kernel `k(x, y) = exp(xᵀy / μ)` spans the drift-side space of
//! kernel differences. The vector-valued space of control occupation kernels
//! uses a diagonal operator-valued kernel whose `j`-th diagonal entry is the
//! scalar kernel with parameter `mu_v[j]`, one channel for the drift and one
//! per control input.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest admissible `|xᵀy| / μ`. `exp(709.8)` is the last finite double.
pub const EXPONENT_LIMIT: f64 = 700.0;

/// Kernel parameters for the scalar space (`mu_d`) and the diagonal
/// vector-valued kernel operator (`mu_v`, length `m + 1`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelConfig {
    mu_d: f64,
    mu_v: Vec<f64>,
}

impl KernelConfig {
    pub fn new(mu_d: f64, mu_v: Vec<f64>) -> Result<Self> {
        if !(mu_d.is_finite() && mu_d > 0.0) {
            return Err(Error::config("kernel.mu_d", format!("must be positive, got {mu_d}")));
        }
        if mu_v.is_empty() {
            return Err(Error::config("kernel.mu_v", "needs at least one channel"));
        }
        if let Some((j, bad)) = mu_v
            .iter()
            .enumerate()
            .find(|(_, &p)| !(p.is_finite() && p > 0.0))
        {
            return Err(Error::config(
                format!("kernel.mu_v[{j}]"),
                format!("must be positive, got {bad}"),
            ));
        }
        Ok(Self { mu_d, mu_v })
    }

    /// One parameter shared by all `m + 1` channels.
    pub fn shared(mu_d: f64, mu_v: f64, control_dim: usize) -> Result<Self> {
        Self::new(mu_d, vec![mu_v; control_dim + 1])
    }

    pub fn mu_d(&self) -> f64 {
        self.mu_d
    }

    pub fn mu_v(&self) -> &[f64] {
        &self.mu_v
    }

    /// Number of channels `m + 1`.
    pub fn channels(&self) -> usize {
        self.mu_v.len()
    }

    /// Control dimension `m`.
    pub fn control_dim(&self) -> usize {
        self.mu_v.len() - 1
    }

    pub(crate) fn check_channels(&self, m: usize) -> Result<()> {
        if self.channels() != m + 1 {
            return Err(Error::Argument(format!(
                "kernel has {} channels but the data has m = {m} controls (expected {})",
                self.channels(),
                m + 1
            )));
        }
        Ok(())
    }
}

#[inline]
pub(crate) fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

#[inline]
pub(crate) fn guarded_exp(exponent: f64) -> Result<f64> {
    if exponent.abs() > EXPONENT_LIMIT || exponent.is_nan() {
        return Err(Error::KernelOverflow {
            exponent,
            limit: EXPONENT_LIMIT,
        });
    }
    Ok(exponent.exp())
}

/// `exp(xᵀy / mu)`.
pub fn scalar_kernel(x: &[f64], y: &[f64], mu: f64) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::Argument(format!(
            "kernel arguments differ in dimension ({} vs {})",
            x.len(),
            y.len()
        )));
    }
    if mu.is_nan() || mu <= 0.0 {
        return Err(Error::Argument(format!("kernel parameter must be positive, got {mu}")));
    }
    guarded_exp(dot(x, y) / mu)
}

/// Row `vᵀ K(y, x)` of the diagonal kernel operator: entry `j` is
/// `v[j] · exp(yᵀx / mu_v[j])`.
pub fn weighted_kernel_row(v: &[f64], y: &[f64], x: &[f64], cfg: &KernelConfig) -> Result<Vec<f64>> {
    let mut out = vec![0.0; cfg.channels()];
    weighted_kernel_row_into(v, y, x, cfg, &mut out)?;
    Ok(out)
}

pub(crate) fn weighted_kernel_row_into(
    v: &[f64],
    y: &[f64],
    x: &[f64],
    cfg: &KernelConfig,
    out: &mut [f64],
) -> Result<()> {
    check_weight_dims(v, cfg)?;
    check_point_dims(y, x)?;
    let yx = dot(y, x);
    for ((o, &w), &mu) in out.iter_mut().zip(v).zip(cfg.mu_v()) {
        *o = w * guarded_exp(yx / mu)?;
    }
    Ok(())
}

/// `v_leftᵀ K(y, x) v_right = Σⱼ v_left[j] v_right[j] exp(yᵀx / mu_v[j])`.
pub fn kernel_quadratic_form(
    v_left: &[f64],
    v_right: &[f64],
    y: &[f64],
    x: &[f64],
    cfg: &KernelConfig,
) -> Result<f64> {
    check_weight_dims(v_left, cfg)?;
    check_weight_dims(v_right, cfg)?;
    check_point_dims(y, x)?;
    quadratic_form_unchecked(v_left, v_right, dot(y, x), cfg.mu_v())
}

/// Hot path for Gram assembly. Dimensions are validated by the caller.
#[inline]
pub(crate) fn quadratic_form_unchecked(
    v_left: &[f64],
    v_right: &[f64],
    yx: f64,
    mu_v: &[f64],
) -> Result<f64> {
    let mut acc = 0.0;
    for ((&a, &b), &mu) in v_left.iter().zip(v_right).zip(mu_v) {
        acc += a * b * guarded_exp(yx / mu)?;
    }
    Ok(acc)
}

fn check_weight_dims(v: &[f64], cfg: &KernelConfig) -> Result<()> {
    if v.len() != cfg.channels() {
        return Err(Error::Argument(format!(
            "weight vector has length {} but the kernel has {} channels",
            v.len(),
            cfg.channels()
        )));
    }
    Ok(())
}

fn check_point_dims(y: &[f64], x: &[f64]) -> Result<()> {
    if y.len() != x.len() {
        return Err(Error::Argument(format!(
            "kernel arguments differ in dimension ({} vs {})",
            y.len(),
            x.len()
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::DMatrix;
    use proptest::prelude::*;

    #[test]
    fn scalar_kernel_examples() {
        assert_eq!(scalar_kernel(&[0.0, 0.0], &[3.0, -1.0], 11.0).unwrap(), 1.0);
        assert_relative_eq!(
            scalar_kernel(&[1.0, 1.0], &[1.0, 1.0], 1.0).unwrap(),
            7.389_056_098_930_65,
            max_relative = 1e-15
        );
        // exp(1/11), 30-digit reference
        assert_relative_eq!(
            scalar_kernel(&[1.0, 2.0], &[3.0, -1.0], 11.0).unwrap(),
            1.095_169_439_874_664_3,
            max_relative = 1e-15
        );
    }

    #[test]
    fn overflow_guard_names_exponent() {
        let err = scalar_kernel(&[30.0], &[30.0], 1.0).unwrap_err();
        assert!(matches!(err, Error::KernelOverflow { exponent, .. } if exponent == 900.0));
        assert!(err.to_string().contains("9.000000e2"));
        // just inside the guard
        assert!(scalar_kernel(&[700.0], &[1.0], 1.0).unwrap().is_finite());
        assert!(scalar_kernel(&[-701.0], &[1.0], 1.0).is_err());
    }

    #[test]
    fn config_validation() {
        assert!(KernelConfig::new(0.0, vec![1.0]).is_err());
        assert!(KernelConfig::new(1.0, vec![]).is_err());
        let err = KernelConfig::new(1.0, vec![1.0, -2.0]).unwrap_err();
        assert!(err.to_string().contains("mu_v[1]"));
        let cfg = KernelConfig::shared(11.0, 10.0, 1).unwrap();
        assert_eq!(cfg.mu_v(), &[10.0, 10.0]);
        assert_eq!(cfg.control_dim(), 1);
    }

    #[test]
    fn weighted_row_examples() {
        let cfg = KernelConfig::new(11.0, vec![10.0, 7.0]).unwrap();
        let row = weighted_kernel_row(&[1.0, 0.0], &[0.3, -2.0], &[1.5, 0.25], &cfg).unwrap();
        assert_eq!(row[0], ((0.45 - 0.5) / 10.0f64).exp());
        assert_eq!(row[1], 0.0);

        let row = weighted_kernel_row(&[1.0, 1.0], &[0.0, 0.0], &[5.0, 5.0], &cfg).unwrap();
        assert_eq!(row, vec![1.0, 1.0]);

        let cfg = KernelConfig::shared(11.0, 10.0, 1).unwrap();
        let row = weighted_kernel_row(&[1.0, 2.0], &[1.0, 0.0], &[1.0, 0.0], &cfg).unwrap();
        assert_relative_eq!(row[0], 1.105_170_918_075_647_6, max_relative = 1e-15);
        assert_relative_eq!(row[1], 2.210_341_836_151_295_3, max_relative = 1e-15);
    }

    #[test]
    fn dimension_mismatch_is_an_argument_error() {
        let cfg = KernelConfig::shared(11.0, 10.0, 1).unwrap();
        assert!(matches!(
            weighted_kernel_row(&[1.0], &[0.0], &[0.0], &cfg),
            Err(Error::Argument(_))
        ));
        assert!(matches!(
            kernel_quadratic_form(&[1.0, 0.0], &[1.0, 0.0], &[0.0], &[0.0, 1.0], &cfg),
            Err(Error::Argument(_))
        ));
    }

    #[test]
    fn quadratic_form_examples() {
        let cfg = KernelConfig::shared(11.0, 10.0, 1).unwrap();
        let q = kernel_quadratic_form(&[1.0, 0.0], &[1.0, 0.0], &[1.0, 0.0], &[0.0, 1.0], &cfg).unwrap();
        assert_eq!(q, 1.0);

        let x0 = [0.7, -1.2];
        let c = 0.4;
        let q = kernel_quadratic_form(&[1.0, c], &[1.0, c], &x0, &x0, &cfg).unwrap();
        let expected = (1.0 + c * c) * (dot(&x0, &x0) / 10.0).exp();
        assert_relative_eq!(q, expected, max_relative = 1e-15);
    }

    /// Smallest eigenvalue of the scalar kernel matrix on up to ten distinct points.
    fn min_max_eig(points: &[Vec<f64>], mu: f64) -> (f64, f64) {
        let n = points.len();
        let k = DMatrix::from_fn(n, n, |i, j| scalar_kernel(&points[i], &points[j], mu).unwrap());
        let eig = k.symmetric_eigen();
        (eig.eigenvalues.min(), eig.eigenvalues.max())
    }

    fn point() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-3.0f64..3.0, 2)
    }

    proptest! {
        #[test]
        fn scalar_kernel_is_symmetric(x in point(), y in point(), mu in 0.5f64..20.0) {
            let a = scalar_kernel(&x, &y, mu).unwrap();
            let b = scalar_kernel(&y, &x, mu).unwrap();
            prop_assert!((a - b).abs() <= f64::EPSILON * a.abs());
            prop_assert!(a > 0.0);
        }

        #[test]
        fn kernel_matrix_is_positive_semidefinite(pts in prop::collection::vec(point(), 2..=10), mu in 1.0f64..20.0) {
            let (lo, hi) = min_max_eig(&pts, mu);
            prop_assert!(lo > -1e-10 * hi, "lo = {lo}, hi = {hi}");
        }

        #[test]
        fn weighted_row_is_linear(
            v in prop::collection::vec(-2.0f64..2.0, 3),
            w in prop::collection::vec(-2.0f64..2.0, 3),
            a in -2.0f64..2.0, b in -2.0f64..2.0,
            x in point(), y in point(),
        ) {
            let cfg = KernelConfig::new(11.0, vec![10.0, 9.0, 12.0]).unwrap();
            let combo: Vec<f64> = v.iter().zip(&w).map(|(p, q)| a * p + b * q).collect();
            let lhs = weighted_kernel_row(&combo, &y, &x, &cfg).unwrap();
            let rv = weighted_kernel_row(&v, &y, &x, &cfg).unwrap();
            let rw = weighted_kernel_row(&w, &y, &x, &cfg).unwrap();
            for j in 0..3 {
                let rhs = a * rv[j] + b * rw[j];
                prop_assert!((lhs[j] - rhs).abs() <= 1e-13 * (1.0 + rhs.abs()));
            }
        }

        #[test]
        fn quadratic_form_swap_symmetry(
            vl in prop::collection::vec(-2.0f64..2.0, 2),
            vr in prop::collection::vec(-2.0f64..2.0, 2),
            x in point(), y in point(),
        ) {
            let cfg = KernelConfig::new(11.0, vec![10.0, 4.0]).unwrap();
            let a = kernel_quadratic_form(&vl, &vr, &y, &x, &cfg).unwrap();
            let b = kernel_quadratic_form(&vr, &vl, &x, &y, &cfg).unwrap();
            prop_assert!((a - b).abs() <= 1e-14 * (1.0 + a.abs()));
        }
    }
}
