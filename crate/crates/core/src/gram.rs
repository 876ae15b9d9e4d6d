//! Gram matrices of control occupation kernels and kernel differences, and
//! the endpoint-difference matrix.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::data::{fmt_f64, Dataset, SampledTrajectory};
use crate::error::{Error, Result};
use crate::kernels::{self, KernelConfig};
use crate::quadrature::{simpson_weights, QuadratureRule};

/// `G_β` (occupation-kernel Gram), `G_d` (kernel-difference Gram) and the
/// `n × M` endpoint-difference matrix `D`.
#[derive(Debug, Clone, PartialEq)]
pub struct GramSystem {
    pub g_beta: DMatrix<f64>,
    pub g_d: DMatrix<f64>,
    pub d_matrix: DMatrix<f64>,
}

impl GramSystem {
    pub fn assemble(ds: &Dataset, cfg: &KernelConfig) -> Result<Self> {
        let rules = quadrature_rules(ds)?;
        Ok(Self {
            g_beta: occupation_gram_with_rules(ds, cfg, &rules)?,
            g_d: difference_gram(ds, cfg.mu_d())?,
            d_matrix: endpoint_matrix(ds),
        })
    }
}

/// One Simpson rule per trajectory, on that trajectory's own grid.
pub fn quadrature_rules(ds: &Dataset) -> Result<Vec<QuadratureRule>> {
    ds.trajectories()
        .iter()
        .map(|t| simpson_weights(t.len(), t.spacing()))
        .collect()
}

/// `(G + Gᵀ) / 2`.
pub(crate) fn symmetrize(g: &mut DMatrix<f64>) {
    let n = g.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let s = 0.5 * (g[(i, j)] + g[(j, i)]);
            g[(i, j)] = s;
            g[(j, i)] = s;
        }
    }
}

/// Occupation-kernel Gram matrix `G_β`.
///
/// Entry `(i, j)` approximates
/// `∫₀^{Tⱼ} ∫₀^{Tᵢ} [1 uᵢ(τ)ᵀ] K(γⱼ(t), γᵢ(τ)) [1; uⱼ(t)] dτ dt`
/// with a tensor-product Simpson rule built from the two trajectories' grids.
pub fn occupation_gram(ds: &Dataset, cfg: &KernelConfig) -> Result<DMatrix<f64>> {
    occupation_gram_with_rules(ds, cfg, &quadrature_rules(ds)?)
}

pub(crate) fn occupation_gram_with_rules(
    ds: &Dataset,
    cfg: &KernelConfig,
    rules: &[QuadratureRule],
) -> Result<DMatrix<f64>> {
    cfg.check_channels(ds.control_dim())?;
    let m_count = ds.len();
    let weights: Vec<Vec<f64>> = ds.trajectories().iter().map(augmented_controls).collect();
    let rows: Vec<Vec<f64>> = (0..m_count)
        .into_par_iter()
        .map(|i| {
            (0..m_count)
                .map(|j| {
                    occupation_entry(ds.trajectory(i), &rules[i], &weights[i], ds.trajectory(j), &rules[j], &weights[j], cfg)
                        .map_err(|e| Error::GramEntry {
                            i,
                            j,
                            source: Box::new(e),
                        })
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;
    let mut g = DMatrix::from_fn(m_count, m_count, |i, j| rows[i][j]);
    symmetrize(&mut g);
    Ok(g)
}

/// Row-major `(1, u(tₖ))` per sample.
pub(crate) fn augmented_controls(t: &SampledTrajectory) -> Vec<f64> {
    let m = t.control_dim();
    let mut out = Vec::with_capacity(t.len() * (m + 1));
    for k in 0..t.len() {
        out.push(1.0);
        out.extend_from_slice(t.control(k));
    }
    out
}

/// Fixed summation order: outer over `t` (trajectory `j`), inner over `τ`
/// (trajectory `i`).
fn occupation_entry(
    ti: &SampledTrajectory,
    ri: &QuadratureRule,
    vi: &[f64],
    tj: &SampledTrajectory,
    rj: &QuadratureRule,
    vj: &[f64],
    cfg: &KernelConfig,
) -> Result<f64> {
    let c = cfg.channels();
    let mu_v = cfg.mu_v();
    let mut outer = 0.0;
    for (t, &wt) in rj.weights().iter().enumerate() {
        let y = tj.state(t);
        let v_right = &vj[t * c..(t + 1) * c];
        let mut inner = 0.0;
        for (tau, &wtau) in ri.weights().iter().enumerate() {
            let x = ti.state(tau);
            let v_left = &vi[tau * c..(tau + 1) * c];
            inner += wtau * kernels::quadratic_form_unchecked(v_left, v_right, kernels::dot(y, x), mu_v)?;
        }
        outer += wt * inner;
    }
    Ok(outer)
}

/// Kernel-difference Gram `G_d`, entries
/// `k(aᵢ,aⱼ) − k(aᵢ,bⱼ) − k(bᵢ,aⱼ) + k(bᵢ,bⱼ)` with `aᵢ = γᵢ(Tᵢ)`, `bᵢ = γᵢ(0)`.
pub fn difference_gram(ds: &Dataset, mu_d: f64) -> Result<DMatrix<f64>> {
    let m_count = ds.len();
    let mut g = DMatrix::zeros(m_count, m_count);
    for i in 0..m_count {
        let (ai, bi) = (ds.trajectory(i).final_state(), ds.trajectory(i).initial_state());
        for j in 0..m_count {
            let (aj, bj) = (ds.trajectory(j).final_state(), ds.trajectory(j).initial_state());
            let k = |x: &[f64], y: &[f64]| kernels::scalar_kernel(x, y, mu_d);
            let entry = (|| Ok(k(ai, aj)? - k(ai, bj)? - k(bi, aj)? + k(bi, bj)?))().map_err(|e| Error::GramEntry {
                i,
                j,
                source: Box::new(e),
            })?;
            g[(i, j)] = entry;
        }
    }
    symmetrize(&mut g);
    Ok(g)
}

/// `D`, column `j` equal to `γⱼ(Tⱼ) − γⱼ(0)`.
pub fn endpoint_matrix(ds: &Dataset) -> DMatrix<f64> {
    let n = ds.state_dim();
    DMatrix::from_fn(n, ds.len(), |r, j| {
        let t = ds.trajectory(j);
        t.final_state()[r] - t.initial_state()[r]
    })
}

/// Dense row-major CSV dump, one matrix row per line.
pub fn write_matrix_csv(mat: &DMatrix<f64>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let io = |e| Error::io(path, e);
    let mut w = BufWriter::new(File::create(path).map_err(io)?);
    for r in 0..mat.nrows() {
        let line: Vec<String> = mat.row(r).iter().map(|v| fmt_f64(*v)).collect();
        writeln!(w, "{}", line.join(",")).map_err(io)?;
    }
    w.flush().map_err(io)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::integrate_sampled;
    use approx::assert_relative_eq;

    fn constant_traj(x0: &[f64], c: &[f64], len: usize, big_t: f64) -> SampledTrajectory {
        let times = (0..len).map(|k| k as f64 * big_t / (len - 1) as f64).collect();
        let states = vec![x0.to_vec(); len];
        let controls = vec![c.to_vec(); len];
        SampledTrajectory::new(times, &states, &controls).unwrap()
    }

    fn wavy_traj(phase: f64, len: usize) -> SampledTrajectory {
        let h = 1.0 / (len - 1) as f64;
        let times: Vec<f64> = (0..len).map(|k| k as f64 * h).collect();
        let states: Vec<Vec<f64>> = times
            .iter()
            .map(|&t| vec![(t + phase).cos() * 1.5, (2.0 * t - phase).sin()])
            .collect();
        let controls: Vec<Vec<f64>> = times.iter().map(|&t| vec![(3.0 * t + phase).sin()]).collect();
        SampledTrajectory::new(times, &states, &controls).unwrap()
    }

    #[test]
    fn constant_trajectory_entry_is_closed_form() {
        let x0 = [0.8, -1.1];
        let c = [0.6];
        let big_t = 1.5;
        let ds = Dataset::new(vec![constant_traj(&x0, &c, 11, big_t)]).unwrap();
        let cfg = KernelConfig::shared(11.0, 10.0, 1).unwrap();
        let g = occupation_gram(&ds, &cfg).unwrap();
        let expected = big_t * big_t * (1.0 + c[0] * c[0]) * (kernels::dot(&x0, &x0) / 10.0).exp();
        assert_relative_eq!(g[(0, 0)], expected, max_relative = 1e-12);
    }

    #[test]
    fn gram_is_symmetric_and_psd() {
        let ds = Dataset::new((0..6).map(|i| wavy_traj(0.4 * i as f64, 21)).collect()).unwrap();
        let cfg = KernelConfig::new(11.0, vec![10.0, 6.0]).unwrap();
        let sys = GramSystem::assemble(&ds, &cfg).unwrap();
        for g in [&sys.g_beta, &sys.g_d] {
            assert_eq!(g, &g.transpose());
            let eig = g.clone().symmetric_eigen();
            assert!(eig.eigenvalues.min() >= -1e-8 * eig.eigenvalues.max());
        }
    }

    #[test]
    fn closed_trajectory_has_zero_difference_row() {
        let mut ts: Vec<SampledTrajectory> = (0..3).map(|i| wavy_traj(0.3 * i as f64, 11)).collect();
        let h = 0.1;
        let times: Vec<f64> = (0..11).map(|k| k as f64 * h).collect();
        let states: Vec<Vec<f64>> = times
            .iter()
            .map(|&t| {
                let a = 2.0 * std::f64::consts::PI * t;
                vec![a.cos(), a.sin()]
            })
            .collect();
        let mut closed_states = states.clone();
        closed_states[10] = closed_states[0].clone();
        ts.push(SampledTrajectory::new(times, &closed_states, &vec![vec![0.1]; 11]).unwrap());
        let ds = Dataset::new(ts).unwrap();
        let g = difference_gram(&ds, 11.0).unwrap();
        for k in 0..4 {
            assert_eq!(g[(3, k)], 0.0);
            assert_eq!(g[(k, 3)], 0.0);
        }
        let d = endpoint_matrix(&ds);
        assert_eq!(d.column(3).iter().copied().collect::<Vec<_>>(), vec![0.0, 0.0]);
    }

    #[test]
    fn difference_gram_matches_direct_expansion() {
        let endpoints = [([0.5, -0.2], [1.2, 0.3]), ([-1.0, 0.7], [0.1, -0.9])];
        let ts: Vec<SampledTrajectory> = endpoints
            .iter()
            .map(|(b, a)| {
                let mid = [(a[0] + b[0]) / 2.0, (a[1] + b[1]) / 2.0];
                SampledTrajectory::new(vec![0.0, 0.5, 1.0], &[b.to_vec(), mid.to_vec(), a.to_vec()], &vec![vec![0.0]; 3])
                    .unwrap()
            })
            .collect();
        let ds = Dataset::new(ts).unwrap();
        let mu = 11.0;
        let g = difference_gram(&ds, mu).unwrap();
        let k = |x: &[f64; 2], y: &[f64; 2]| ((x[0] * y[0] + x[1] * y[1]) / mu).exp();
        for i in 0..2 {
            for j in 0..2 {
                let (bi, ai) = &endpoints[i];
                let (bj, aj) = &endpoints[j];
                let direct = k(ai, aj) - k(ai, bj) - k(bi, aj) + k(bi, bj);
                assert_relative_eq!(g[(i, j)], direct, max_relative = 1e-13);
            }
            assert!(g[(i, i)] >= 0.0);
        }
    }

    #[test]
    fn endpoint_column_definition() {
        let t = SampledTrajectory::new(
            vec![0.0, 0.5, 1.0],
            &[vec![0.0, 0.0], vec![0.4, -1.0], vec![1.0, -2.0]],
            &vec![vec![0.0]; 3],
        )
        .unwrap();
        let ds = Dataset::new(vec![t]).unwrap();
        let d = endpoint_matrix(&ds);
        assert_eq!(d.shape(), (2, 1));
        assert_eq!(d[(0, 0)], 1.0);
        assert_eq!(d[(1, 0)], -2.0);
    }

    #[test]
    fn gram_agrees_with_beta_row_quadrature() {
        let ds = Dataset::new(vec![wavy_traj(0.2, 21)]).unwrap();
        let cfg = KernelConfig::new(11.0, vec![10.0, 5.0]).unwrap();
        let g = occupation_gram(&ds, &cfg).unwrap();
        let t = ds.trajectory(0);
        let rule = simpson_weights(t.len(), t.spacing()).unwrap();
        let integrand: Vec<f64> = (0..t.len())
            .map(|k| {
                let beta = crate::model::beta_row_of(t, &rule, t.state(k), &cfg).unwrap();
                beta[0] + beta[1] * t.control(k)[0]
            })
            .collect();
        let norm_sq = integrate_sampled(&integrand, &rule).unwrap();
        assert_relative_eq!(g[(0, 0)], norm_sq, max_relative = 1e-10);
    }

    #[test]
    fn permutation_conjugates_all_matrices() {
        let ds = Dataset::new((0..4).map(|i| wavy_traj(0.5 * i as f64, 11)).collect()).unwrap();
        let cfg = KernelConfig::shared(11.0, 10.0, 1).unwrap();
        let perm = [2, 0, 3, 1];
        let a = GramSystem::assemble(&ds, &cfg).unwrap();
        let b = GramSystem::assemble(&ds.permuted(&perm).unwrap(), &cfg).unwrap();
        for p in 0..4 {
            for q in 0..4 {
                assert_relative_eq!(b.g_beta[(p, q)], a.g_beta[(perm[p], perm[q])], max_relative = 1e-14);
                assert_relative_eq!(b.g_d[(p, q)], a.g_d[(perm[p], perm[q])], max_relative = 1e-14, epsilon = 1e-15);
            }
            for r in 0..2 {
                assert_eq!(b.d_matrix[(r, p)], a.d_matrix[(r, perm[p])]);
            }
        }
    }

    #[test]
    fn overflow_reports_indices() {
        let ds = Dataset::new(vec![wavy_traj(0.0, 5), constant_traj(&[200.0, 200.0], &[0.0], 5, 1.0)]).unwrap();
        let cfg = KernelConfig::shared(11.0, 10.0, 1).unwrap();
        match occupation_gram(&ds, &cfg) {
            Err(Error::GramEntry { i, j, source }) => {
                assert!(i == 1 || j == 1);
                assert!(matches!(*source, Error::KernelOverflow { .. }));
            }
            other => panic!("expected overflow, got {other:?}"),
        }
    }

    #[test]
    fn channel_mismatch_rejected() {
        let ds = Dataset::new(vec![wavy_traj(0.0, 5)]).unwrap();
        let cfg = KernelConfig::shared(11.0, 10.0, 2).unwrap();
        assert!(matches!(occupation_gram(&ds, &cfg), Err(Error::Argument(_))));
    }
}
