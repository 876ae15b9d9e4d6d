//! The identified control-affine model `ẋ ≈ D G_β⁺ β(x) (1, u)`.
//!
//! `β(x)` stacks the control occupation kernels of the training trajectories
//! evaluated at `x`, so the model keeps its training data: a model file is
//! self-contained.

use std::fs;
use std::io::Write;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, SampledTrajectory};
use crate::decomposition::{Decomposition, PseudoInverse, DEFAULT_REL_TOL};
use crate::error::{Error, Result};
use crate::gram::{quadrature_rules, GramSystem};
use crate::kernels::{weighted_kernel_row_into, KernelConfig};
use crate::ode;
use crate::quadrature::QuadratureRule;
use crate::signal::ControlSignal;

/// First line of every model file.
pub const MODEL_MAGIC: &str = "SCLDMD1";
pub const MODEL_VERSION: u32 = 1;

/// Any vector field of the form `F(x) = [f(x) | g(x)]`, an `n × (m+1)` matrix.
pub trait ControlAffineField {
    fn state_dim(&self) -> usize;
    fn control_dim(&self) -> usize;
    fn field(&self, x: &[f64]) -> Result<DMatrix<f64>>;
}

fn apply_field(f: &DMatrix<f64>, u: &[f64], out: &mut [f64]) {
    for (r, o) in out.iter_mut().enumerate() {
        *o = f[(r, 0)] + u.iter().enumerate().map(|(j, uj)| f[(r, j + 1)] * uj).sum::<f64>();
    }
}

/// RK4 on `ẋ = F(x) (1, u(t))`, with `u` evaluated at the stage times.
pub fn simulate_field<F: ControlAffineField + ?Sized>(
    field: &F,
    x0: &[f64],
    u: &dyn ControlSignal,
    horizon: f64,
    dt: f64,
) -> Result<SampledTrajectory> {
    if x0.len() != field.state_dim() {
        return Err(Error::Argument(format!(
            "initial state has dimension {} but the model has n = {}",
            x0.len(),
            field.state_dim()
        )));
    }
    if u.dim() != field.control_dim() {
        return Err(Error::Argument(format!(
            "input has {} channels but the model has m = {}",
            u.dim(),
            field.control_dim()
        )));
    }
    ode::rk4(
        |x, uu, dx| {
            apply_field(&field.field(x)?, uu, dx);
            Ok(())
        },
        x0,
        u,
        horizon,
        dt,
    )
}

/// Control occupation kernel of order `order` evaluated at `x`:
/// `1/(s−1)! ∫₀ᵀ (T−t)^{s−1} [1 u(t)ᵀ] K_{γ(t)}(x) dt`, via the given rule.
pub fn occupation_kernel_eval(
    traj: &SampledTrajectory,
    rule: &QuadratureRule,
    x: &[f64],
    cfg: &KernelConfig,
    order: u32,
) -> Result<Vec<f64>> {
    if order == 0 {
        return Err(Error::Argument("occupation kernel order starts at 1".into()));
    }
    if rule.len() != traj.len() {
        return Err(Error::Argument(format!(
            "{}-point rule for a {}-sample trajectory",
            rule.len(),
            traj.len()
        )));
    }
    if x.len() != traj.state_dim() {
        return Err(Error::Argument(format!(
            "point has dimension {} but the trajectory has n = {}",
            x.len(),
            traj.state_dim()
        )));
    }
    cfg.check_channels(traj.control_dim())?;
    let c = cfg.channels();
    let mut acc = vec![0.0; c];
    let mut weights = vec![1.0; c];
    let mut row = vec![0.0; c];
    let t_end = traj.times()[traj.len() - 1];
    let factorial: f64 = (1..order).map(f64::from).product();
    for (k, &w) in rule.weights().iter().enumerate() {
        weights[1..].copy_from_slice(traj.control(k));
        weighted_kernel_row_into(&weights, traj.state(k), x, cfg, &mut row)?;
        let w = if order == 1 {
            w
        } else {
            w * (t_end - traj.times()[k]).powi(order as i32 - 1) / factorial
        };
        for (a, r) in acc.iter_mut().zip(&row) {
            *a += w * r;
        }
    }
    Ok(acc)
}

/// `Γ(x) = ∫₀ᵀ [1 u(t)ᵀ] K_{γ(t)}(x) dt` for one trajectory.
pub fn beta_row_of(traj: &SampledTrajectory, rule: &QuadratureRule, x: &[f64], cfg: &KernelConfig) -> Result<Vec<f64>> {
    occupation_kernel_eval(traj, rule, x, cfg, 1)
}

/// Options for [`IdentifiedModel::identify`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdentifyOptions {
    pub rel_tol: f64,
    pub max_modes: Option<usize>,
}

impl Default for IdentifyOptions {
    fn default() -> Self {
        Self {
            rel_tol: DEFAULT_REL_TOL,
            max_modes: None,
        }
    }
}

/// Model plus the intermediate matrices of the identification.
#[derive(Debug, Clone)]
pub struct Identification {
    pub model: IdentifiedModel,
    pub gram: GramSystem,
    pub decomposition: Decomposition,
}

#[derive(Debug, Clone)]
pub struct IdentifiedModel {
    cfg: KernelConfig,
    d_matrix: DMatrix<f64>,
    pinv: PseudoInverse,
    training: Dataset,
    rel_tol: f64,
    rules: Vec<QuadratureRule>,
    // D · V · diag(σ) · Wᵀ
    operator: DMatrix<f64>,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    version: u32,
    n: usize,
    m: usize,
    rel_tol: f64,
    kernel: KernelConfig,
    d_matrix: DMatrix<f64>,
    pinv: PseudoInverse,
    training: Dataset,
}

impl IdentifiedModel {
    /// Assemble the Gram system, decompose `G_β⁺`, and build the model.
    pub fn identify(ds: Dataset, cfg: KernelConfig, opts: IdentifyOptions) -> Result<Identification> {
        cfg.check_channels(ds.control_dim())?;
        let gram = GramSystem::assemble(&ds, &cfg).map_err(|e| e.in_stage("gram assembly"))?;
        let decomposition = Decomposition::new(&gram.g_beta, &gram.d_matrix, opts.rel_tol, opts.max_modes)
            .map_err(|e| e.in_stage("decomposition"))?;
        let model = Self::from_parts(cfg, gram.d_matrix.clone(), decomposition.pinv.clone(), ds, opts.rel_tol)?;
        Ok(Identification {
            model,
            gram,
            decomposition,
        })
    }

    pub fn from_parts(
        cfg: KernelConfig,
        d_matrix: DMatrix<f64>,
        pinv: PseudoInverse,
        training: Dataset,
        rel_tol: f64,
    ) -> Result<Self> {
        let (n, m, big_m) = (training.state_dim(), training.control_dim(), training.len());
        cfg.check_channels(m)?;
        if d_matrix.shape() != (n, big_m)
            || pinv.w.shape() != (big_m, big_m)
            || pinv.v.shape() != (big_m, big_m)
            || pinv.sigma.len() != big_m
            || pinv.rank > big_m
        {
            return Err(Error::format(format!(
                "inconsistent model dimensions: D {:?}, W {:?}, V {:?}, σ {}, M = {big_m}",
                d_matrix.shape(),
                pinv.w.shape(),
                pinv.v.shape(),
                pinv.sigma.len()
            )));
        }
        let rules = quadrature_rules(&training)?;
        let operator = &d_matrix * pinv.matrix();
        Ok(Self {
            cfg,
            d_matrix,
            pinv,
            training,
            rel_tol,
            rules,
            operator,
        })
    }

    pub fn kernel(&self) -> &KernelConfig {
        &self.cfg
    }

    pub fn d_matrix(&self) -> &DMatrix<f64> {
        &self.d_matrix
    }

    pub fn pseudo_inverse(&self) -> &PseudoInverse {
        &self.pinv
    }

    pub fn training(&self) -> &Dataset {
        &self.training
    }

    pub fn rank(&self) -> usize {
        self.pinv.rank
    }

    pub fn rel_tol(&self) -> f64 {
        self.rel_tol
    }

    /// Number of training trajectories `M`.
    pub fn size(&self) -> usize {
        self.training.len()
    }

    /// `Γᵢ(x)` for training trajectory `i`.
    pub fn beta_row(&self, x: &[f64], i: usize) -> Result<Vec<f64>> {
        if i >= self.size() {
            return Err(Error::Argument(format!("trajectory index {i} out of range for M = {}", self.size())));
        }
        beta_row_of(self.training.trajectory(i), &self.rules[i], x, &self.cfg)
    }

    /// `β(x)`, an `M × (m+1)` matrix with row `i` equal to `Γᵢ(x)`.
    pub fn beta(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        let c = self.cfg.channels();
        let mut out = DMatrix::zeros(self.size(), c);
        for i in 0..self.size() {
            let row = self.beta_row(x, i)?;
            for (j, v) in row.into_iter().enumerate() {
                out[(i, j)] = v;
            }
        }
        Ok(out)
    }

    /// `D G_β⁺ β(x)`: column 0 is `f̂(x)`, columns `1..=m` are `ĝ(x)`.
    pub fn vector_field(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        Ok(&self.operator * self.beta(x)?)
    }

    pub fn drift(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.vector_field(x)?.column(0).iter().copied().collect())
    }

    /// `ĝ(x)`, `n × m`.
    pub fn control_effectiveness(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        let f = self.vector_field(x)?;
        Ok(f.columns(1, f.ncols() - 1).into_owned())
    }

    /// `F̂(x, u) = f̂(x) + ĝ(x) u`.
    pub fn rhs(&self, x: &[f64], u: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.training.state_dim()];
        self.rhs_into(x, u, &mut out)?;
        Ok(out)
    }

    fn rhs_into(&self, x: &[f64], u: &[f64], out: &mut [f64]) -> Result<()> {
        if u.len() != self.training.control_dim() {
            return Err(Error::Argument(format!(
                "control has dimension {} but the model has m = {}",
                u.len(),
                self.training.control_dim()
            )));
        }
        apply_field(&self.vector_field(x)?, u, out);
        Ok(())
    }

    /// RK4 simulation of the identified model under the control `u`.
    pub fn predict(&self, x0: &[f64], u: &dyn ControlSignal, horizon: f64, dt: f64) -> Result<SampledTrajectory> {
        simulate_field(self, x0, u, horizon, dt)
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        let file = ModelFile {
            version: MODEL_VERSION,
            n: self.training.state_dim(),
            m: self.training.control_dim(),
            rel_tol: self.rel_tol,
            kernel: self.cfg.clone(),
            d_matrix: self.d_matrix.clone(),
            pinv: self.pinv.clone(),
            training: self.training.clone(),
        };
        let io = |e| Error::format(format!("cannot write model: {e}"));
        writeln!(w, "{MODEL_MAGIC}").map_err(io)?;
        serde_json::to_writer(&mut w, &file).map_err(|e| Error::format(format!("cannot write model: {e}")))?;
        writeln!(w).map_err(io)?;
        Ok(())
    }

    pub fn read_from(text: &str) -> Result<Self> {
        let (magic, body) = text.split_once('\n').unwrap_or((text, ""));
        if magic.trim_end_matches('\r') != MODEL_MAGIC {
            return Err(Error::format_at(1, format!("not a model file (expected magic {MODEL_MAGIC:?})")));
        }
        let file: ModelFile =
            serde_json::from_str(body).map_err(|e| Error::format(format!("corrupted model body: {e}")))?;
        if file.version != MODEL_VERSION {
            return Err(Error::format(format!(
                "model version {} is not supported (expected {MODEL_VERSION})",
                file.version
            )));
        }
        if file.n != file.training.state_dim() || file.m != file.training.control_dim() {
            return Err(Error::format("model header dimensions disagree with its training data"));
        }
        Self::from_parts(file.kernel, file.d_matrix, file.pinv, file.training, file.rel_tol)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut buf = Vec::new();
        self.write_to(&mut buf)?;
        fs::write(path, buf).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::read_from(&text).map_err(|e| e.with_path(path))
    }
}

impl ControlAffineField for IdentifiedModel {
    fn state_dim(&self) -> usize {
        self.training.state_dim()
    }

    fn control_dim(&self) -> usize {
        self.training.control_dim()
    }

    fn field(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        self.vector_field(x)
    }
}

pub fn save_model(model: &IdentifiedModel, path: impl AsRef<Path>) -> Result<()> {
    model.save(path)
}

pub fn load_model(path: impl AsRef<Path>) -> Result<IdentifiedModel> {
    IdentifiedModel::load(path)
}
