//! Singular decomposition of the finite-rank control Liouville operator.
//!
//! `G_β` is symmetric positive semidefinite, so its pseudoinverse is obtained
//! from a truncated symmetric eigendecomposition `G_β = U Λ Uᵀ`: the singular
//! values of `G_β⁺` are `1/λ` for the retained eigenvalues and both singular
//! vector sets coincide with the eigenvectors.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::gram::quadrature_rules;
use crate::kernels::{scalar_kernel, KernelConfig};
use crate::model::beta_row_of;
use crate::quadrature::QuadratureRule;

/// Default relative eigenvalue cutoff for the pseudoinverse.
pub const DEFAULT_REL_TOL: f64 = 1e-14;

/// `G_β⁺ = W · diag(σ) · Vᵀ` with `σ` non-increasing and exactly zero past `rank`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PseudoInverse {
    pub w: DMatrix<f64>,
    pub sigma: DVector<f64>,
    pub v: DMatrix<f64>,
    pub rank: usize,
}

impl PseudoInverse {
    pub fn size(&self) -> usize {
        self.sigma.len()
    }

    /// Dense `V · diag(σ) · Wᵀ`.
    pub fn matrix(&self) -> DMatrix<f64> {
        let mut scaled = self.v.clone();
        for (j, mut col) in scaled.column_iter_mut().enumerate() {
            col *= self.sigma[j];
        }
        scaled * self.w.transpose()
    }

    /// Keep at most `modes` singular triplets.
    pub fn truncated(mut self, modes: usize) -> Self {
        for s in self.sigma.iter_mut().skip(modes) {
            *s = 0.0;
        }
        self.rank = self.rank.min(modes);
        self
    }
}

/// Truncated pseudoinverse factors of a symmetric PSD matrix.
///
/// Eigenvalues `λ ≤ rel_tol · λ_max` are discarded. Retained directions are
/// ordered by descending `σ = 1/λ`, ties in the eigensolver's order. Each
/// eigenvector is signed so that its largest-magnitude entry (first on ties)
/// is positive.
pub fn pseudo_svd(g_beta: &DMatrix<f64>, rel_tol: f64) -> Result<PseudoInverse> {
    if !g_beta.is_square() {
        return Err(Error::Argument(format!("Gram matrix is {}×{}", g_beta.nrows(), g_beta.ncols())));
    }
    if !(rel_tol.is_finite() && rel_tol > 0.0) {
        return Err(Error::Argument(format!("pseudoinverse tolerance must be positive, got {rel_tol}")));
    }
    if g_beta.iter().any(|v| !v.is_finite()) {
        return Err(Error::Degenerate("Gram matrix has non-finite entries".into()));
    }
    let size = g_beta.nrows();
    let eig = g_beta.clone().symmetric_eigen();
    let lambda_max = eig.eigenvalues.max();
    if size == 0 || lambda_max.is_nan() || lambda_max <= 0.0 {
        return Err(Error::Degenerate(format!(
            "Gram matrix has no positive eigenvalue (λ_max = {lambda_max})"
        )));
    }
    let cutoff = rel_tol * lambda_max;
    let mut retained: Vec<usize> = (0..size).filter(|&k| eig.eigenvalues[k] > cutoff).collect();
    let mut dropped: Vec<usize> = (0..size).filter(|&k| eig.eigenvalues[k] <= cutoff).collect();
    // stable sorts keep the solver's order on ties
    retained.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    dropped.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let rank = retained.len();

    let order: Vec<usize> = retained.iter().chain(&dropped).copied().collect();
    let mut v = DMatrix::zeros(size, size);
    let mut sigma = DVector::zeros(size);
    for (dst, &src) in order.iter().enumerate() {
        let mut col = eig.eigenvectors.column(src).clone_owned();
        let lead = col
            .iter()
            .enumerate()
            .fold((0, 0.0f64), |best, (i, &x)| if x.abs() > best.1 { (i, x.abs()) } else { best })
            .0;
        if col[lead] < 0.0 {
            col.neg_mut();
        }
        v.set_column(dst, &col);
        if dst < rank {
            sigma[dst] = 1.0 / eig.eigenvalues[src];
        }
    }
    Ok(PseudoInverse {
        w: v.clone(),
        sigma,
        v,
        rank,
    })
}

/// Modes `ξ = D · V`.
pub fn compute_modes(d_matrix: &DMatrix<f64>, v: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if d_matrix.ncols() != v.nrows() {
        return Err(Error::Argument(format!(
            "D is {}×{} but V has {} rows",
            d_matrix.nrows(),
            d_matrix.ncols(),
            v.nrows()
        )));
    }
    Ok(d_matrix * v)
}

/// Singular triplets of `G_β⁺` together with the modes `ξ`.
#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition {
    pub pinv: PseudoInverse,
    pub xi: DMatrix<f64>,
}

impl Decomposition {
    pub fn new(g_beta: &DMatrix<f64>, d_matrix: &DMatrix<f64>, rel_tol: f64, max_modes: Option<usize>) -> Result<Self> {
        let mut pinv = pseudo_svd(g_beta, rel_tol)?;
        if let Some(r) = max_modes {
            pinv = pinv.truncated(r);
        }
        let xi = compute_modes(d_matrix, &pinv.v)?;
        Ok(Self { pinv, xi })
    }

    pub fn rank(&self) -> usize {
        self.pinv.rank
    }

    /// `ξ · diag(σ) · Wᵀ`, equal to `D · G_β⁺`.
    pub fn reconstruction(&self) -> DMatrix<f64> {
        let mut scaled = self.xi.clone();
        for (j, mut col) in scaled.column_iter_mut().enumerate() {
            col *= self.pinv.sigma[j];
        }
        scaled * self.pinv.w.transpose()
    }

    /// Left singular function `φⱼ` (0-based `j`), a combination of kernel differences.
    pub fn left_function<'a>(&self, j: usize, ds: &'a Dataset, mu_d: f64) -> Result<LeftSingularFunction<'a>> {
        check_index(j, self.pinv.size())?;
        LeftSingularFunction::new(j, self.pinv.v.column(j).iter().copied().collect(), ds, mu_d)
    }

    /// Right singular function `ψⱼ` (0-based `j`), a combination of control occupation kernels.
    pub fn right_function<'a>(&self, j: usize, ds: &'a Dataset, cfg: &'a KernelConfig) -> Result<RightSingularFunction<'a>> {
        check_index(j, self.pinv.size())?;
        RightSingularFunction::new(j, self.pinv.w.column(j).iter().copied().collect(), ds, cfg)
    }
}

fn check_index(j: usize, size: usize) -> Result<()> {
    if j >= size {
        return Err(Error::Argument(format!("singular index {j} out of range for M = {size}")));
    }
    Ok(())
}

/// `φⱼ(x) = Σᵢ cᵢ (k(x, γᵢ(Tᵢ)) − k(x, γᵢ(0)))`.
#[derive(Debug, Clone)]
pub struct LeftSingularFunction<'a> {
    pub index: usize,
    coefficients: Vec<f64>,
    dataset: &'a Dataset,
    mu_d: f64,
}

impl<'a> LeftSingularFunction<'a> {
    pub fn new(index: usize, coefficients: Vec<f64>, dataset: &'a Dataset, mu_d: f64) -> Result<Self> {
        if coefficients.len() != dataset.len() {
            return Err(Error::Argument(format!(
                "{} coefficients for {} trajectories",
                coefficients.len(),
                dataset.len()
            )));
        }
        Ok(Self {
            index,
            coefficients,
            dataset,
            mu_d,
        })
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        let mut acc = 0.0;
        for (c, t) in self.coefficients.iter().zip(self.dataset.trajectories()) {
            acc += c * (scalar_kernel(x, t.final_state(), self.mu_d)? - scalar_kernel(x, t.initial_state(), self.mu_d)?);
        }
        Ok(acc)
    }
}

/// `ψⱼ(x) = Σᵢ cᵢ Γᵢ(x)`, a row vector in `ℝ^{m+1}`.
#[derive(Debug, Clone)]
pub struct RightSingularFunction<'a> {
    pub index: usize,
    coefficients: Vec<f64>,
    dataset: &'a Dataset,
    cfg: &'a KernelConfig,
    rules: Vec<QuadratureRule>,
}

impl<'a> RightSingularFunction<'a> {
    pub fn new(index: usize, coefficients: Vec<f64>, dataset: &'a Dataset, cfg: &'a KernelConfig) -> Result<Self> {
        if coefficients.len() != dataset.len() {
            return Err(Error::Argument(format!(
                "{} coefficients for {} trajectories",
                coefficients.len(),
                dataset.len()
            )));
        }
        cfg.check_channels(dataset.control_dim())?;
        Ok(Self {
            index,
            coefficients,
            dataset,
            cfg,
            rules: quadrature_rules(dataset)?,
        })
    }

    pub fn eval(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut acc = vec![0.0; self.cfg.channels()];
        for ((c, t), rule) in self.coefficients.iter().zip(self.dataset.trajectories()).zip(&self.rules) {
            let row = beta_row_of(t, rule, x, self.cfg)?;
            for (a, r) in acc.iter_mut().zip(row) {
                *a += c * r;
            }
        }
        Ok(acc)
    }
}
