//! Duffing benchmark: training-data generation, end-to-end identification,
//! and trajectory / vector-field error metrics.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{fmt_f64, save_dataset, Dataset, SampledTrajectory};
use crate::decomposition::DEFAULT_REL_TOL;
use crate::error::{Error, Result};
use crate::kernels::KernelConfig;
use crate::model::{ControlAffineField, Identification, IdentifiedModel, IdentifyOptions};
use crate::ode;
use crate::signal::{ControlSignal, SinusoidTerm, SinusoidalInput};

pub use crate::signal::SumOfSinusoids;

/// `ẋ = (x₂, x₁ − x₁³) + (0, 2 + sin x₁) u`.
pub fn duffing_rhs(x: [f64; 2], u: f64) -> [f64; 2] {
    [x[1], x[0] - x[0].powi(3) + (2.0 + x[0].sin()) * u]
}

/// Systems with a known control-affine vector field.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrueSystem {
    /// The Duffing oscillator above (n = 2, m = 1).
    Duffing,
    /// `ẋ = −x + u` (n = 1, m = 1).
    Linear,
}

impl TrueSystem {
    pub fn name(&self) -> &'static str {
        match self {
            TrueSystem::Duffing => "duffing",
            TrueSystem::Linear => "linear",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "duffing" => Ok(TrueSystem::Duffing),
            "linear" => Ok(TrueSystem::Linear),
            other => Err(Error::Argument(format!("unknown system {other:?} (expected duffing or linear)"))),
        }
    }

    pub fn rhs(&self, x: &[f64], u: &[f64], dx: &mut [f64]) {
        match self {
            TrueSystem::Duffing => dx.copy_from_slice(&duffing_rhs([x[0], x[1]], u[0])),
            TrueSystem::Linear => dx[0] = -x[0] + u[0],
        }
    }
}

impl ControlAffineField for TrueSystem {
    fn state_dim(&self) -> usize {
        match self {
            TrueSystem::Duffing => 2,
            TrueSystem::Linear => 1,
        }
    }

    fn control_dim(&self) -> usize {
        1
    }

    fn field(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        if x.len() != self.state_dim() {
            return Err(Error::Argument(format!(
                "{} system expects n = {}, got {}",
                self.name(),
                self.state_dim(),
                x.len()
            )));
        }
        Ok(match self {
            TrueSystem::Duffing => {
                DMatrix::from_row_slice(2, 2, &[x[1], 0.0, x[0] - x[0].powi(3), 2.0 + x[0].sin()])
            }
            TrueSystem::Linear => DMatrix::from_row_slice(1, 2, &[-x[0], 1.0]),
        })
    }
}

/// Tensor grid with `counts[i]` equally spaced points on `[lower[i], upper[i]]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub counts: Vec<usize>,
}

impl GridSpec {
    pub fn square(lo: f64, hi: f64, count: usize, dim: usize) -> Self {
        Self {
            lower: vec![lo; dim],
            upper: vec![hi; dim],
            counts: vec![count; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.counts.len()
    }

    pub fn len(&self) -> usize {
        self.counts.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn validate(&self, field: &str) -> Result<()> {
        if self.lower.len() != self.counts.len() || self.upper.len() != self.counts.len() || self.counts.is_empty() {
            return Err(Error::config(field, "lower, upper and counts must have the same nonzero length"));
        }
        for i in 0..self.dim() {
            if !(self.lower[i].is_finite() && self.upper[i].is_finite()) {
                return Err(Error::config(format!("{field}.lower[{i}]"), "bounds must be finite"));
            }
            if self.lower[i] > self.upper[i] {
                return Err(Error::config(
                    format!("{field}.lower[{i}]"),
                    format!("lower bound {} exceeds upper bound {}", self.lower[i], self.upper[i]),
                ));
            }
            if self.counts[i] == 0 {
                return Err(Error::config(format!("{field}.counts[{i}]"), "must be at least 1"));
            }
        }
        Ok(())
    }

    fn axis(&self, i: usize) -> Vec<f64> {
        let c = self.counts[i];
        if c == 1 {
            return vec![self.lower[i]];
        }
        let step = (self.upper[i] - self.lower[i]) / (c - 1) as f64;
        (0..c)
            .map(|k| if k == c - 1 { self.upper[i] } else { self.lower[i] + k as f64 * step })
            .collect()
    }

    /// All grid points, the first coordinate varying slowest.
    pub fn points(&self) -> Vec<Vec<f64>> {
        let axes: Vec<Vec<f64>> = (0..self.dim()).map(|i| self.axis(i)).collect();
        let mut out = vec![Vec::new()];
        for axis in &axes {
            out = out
                .into_iter()
                .flat_map(|prefix| {
                    axis.iter().map(move |&v| {
                        let mut p = prefix.clone();
                        p.push(v);
                        p
                    })
                })
                .collect();
        }
        out
    }
}

/// Random sum-of-sinusoids control generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlGenerator {
    pub terms: usize,
    /// rad/s
    pub frequency: [f64; 2],
    /// rad
    pub phase: [f64; 2],
    pub amplitude: [f64; 2],
    /// One control signal for every trajectory instead of independent draws.
    #[serde(default)]
    pub shared: bool,
}

impl Default for ControlGenerator {
    fn default() -> Self {
        Self {
            terms: 15,
            frequency: [1.0, 3.0],
            phase: [-1.0, 1.0],
            amplitude: [-1.0, 1.0],
            shared: false,
        }
    }
}

impl ControlGenerator {
    pub fn validate(&self, field: &str) -> Result<()> {
        for (name, r) in [("frequency", self.frequency), ("phase", self.phase), ("amplitude", self.amplitude)] {
            if !(r[0].is_finite() && r[1].is_finite()) || r[0] > r[1] {
                return Err(Error::config(format!("{field}.{name}"), format!("invalid range [{}, {}]", r[0], r[1])));
            }
        }
        Ok(())
    }
}

/// One sum of sinusoids per trajectory.
///
/// Trajectory `i` draws from ChaCha8 seeded with `seed` on stream `i` (stream
/// 0 for every trajectory when `shared`), so each signal depends only on the
/// seed and its index. Per term the draw order is amplitude, frequency, phase.
pub fn generate_controls(gen: &ControlGenerator, count: usize, seed: u64) -> Vec<SumOfSinusoids> {
    (0..count)
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(if gen.shared { 0 } else { i as u64 });
            let terms = (0..gen.terms)
                .map(|_| {
                    let amplitude = draw(&mut rng, gen.amplitude);
                    let frequency = draw(&mut rng, gen.frequency);
                    let phase = draw(&mut rng, gen.phase);
                    SinusoidTerm::sin(amplitude, frequency, phase)
                })
                .collect();
            SumOfSinusoids::new(terms)
        })
        .collect()
}

fn draw(rng: &mut ChaCha8Rng, range: [f64; 2]) -> f64 {
    if range[0] == range[1] {
        range[0]
    } else {
        rng.random_range(range[0]..=range[1])
    }
}

/// RK4 on the true system at step `dt` with the control evaluated analytically
/// at the stage times.
pub fn simulate_true(
    rhs: impl FnMut(&[f64], &[f64], &mut [f64]),
    x0: &[f64],
    u: &dyn ControlSignal,
    duration: f64,
    dt: f64,
) -> Result<SampledTrajectory> {
    let mut rhs = rhs;
    ode::rk4(
        |x, u, dx| {
            rhs(x, u, dx);
            Ok(())
        },
        x0,
        u,
        duration,
        dt,
    )
}

/// Prediction experiment: initial state, input, horizon and step.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionSpec {
    pub x0: Vec<f64>,
    pub input: SinusoidalInput,
    pub horizon: f64,
    pub dt: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub system: TrueSystem,
    pub grid: GridSpec,
    pub dt: f64,
    pub duration: f64,
    pub controls: ControlGenerator,
    pub seed: u64,
    pub kernel: KernelConfig,
    pub rel_tol: f64,
    pub max_modes: Option<usize>,
    pub prediction: PredictionSpec,
    pub evaluation: GridSpec,
}

/// Seed used by the bundled configurations.
pub const DEFAULT_SEED: u64 = 2024;

impl ExperimentConfig {
    /// Duffing protocol: 15×15 initial conditions on [−3, 3]², 1 s at 0.05 s,
    /// 15-term random sinusoid controls, μ = 11, μ_v = 10; prediction from
    /// (2, −2) under sin t + cos 2t for 10 s; errors on a 9×9 grid over [−2, 2]².
    pub fn duffing() -> Self {
        Self {
            system: TrueSystem::Duffing,
            grid: GridSpec::square(-3.0, 3.0, 15, 2),
            dt: 0.05,
            duration: 1.0,
            controls: ControlGenerator::default(),
            seed: DEFAULT_SEED,
            kernel: KernelConfig::shared(11.0, 10.0, 1).expect("valid constants"),
            rel_tol: DEFAULT_REL_TOL,
            max_modes: None,
            prediction: PredictionSpec {
                x0: vec![2.0, -2.0],
                input: SinusoidalInput::new(vec![SumOfSinusoids::new(vec![
                    SinusoidTerm::sin(1.0, 1.0, 0.0),
                    SinusoidTerm::cos(1.0, 2.0, 0.0),
                ])]),
                horizon: 10.0,
                dt: 0.05,
            },
            evaluation: GridSpec::square(-2.0, 2.0, 9, 2),
        }
    }

    /// `ẋ = −x + u` from 25 initial conditions on [−1, 1].
    pub fn linear() -> Self {
        Self {
            system: TrueSystem::Linear,
            grid: GridSpec::square(-1.0, 1.0, 25, 1),
            prediction: PredictionSpec {
                x0: vec![0.5],
                input: SinusoidalInput::new(vec![SumOfSinusoids::new(vec![SinusoidTerm::sin(1.0, 1.0, 0.0)])]),
                horizon: 5.0,
                dt: 0.05,
            },
            evaluation: GridSpec::square(-1.0, 1.0, 41, 1),
            ..Self::duffing()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.system.state_dim();
        let m = self.system.control_dim();
        self.grid.validate("data.grid")?;
        if self.grid.dim() != n {
            return Err(Error::config("data.grid", format!("has {} coordinates but the system has n = {n}", self.grid.dim())));
        }
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::config("data.dt", "must be positive"));
        }
        if !(self.duration.is_finite() && self.duration > 0.0) {
            return Err(Error::config("data.duration", "must be positive"));
        }
        let steps = ode::step_count(self.duration, self.dt).map_err(|e| Error::config("data.duration", e.to_string()))?;
        if steps < 2 {
            return Err(Error::config("data.duration", "must cover at least two steps of dt"));
        }
        self.controls.validate("data.controls")?;
        if self.kernel.channels() != m + 1 {
            return Err(Error::config("kernel.mu_v", format!("needs m + 1 = {} entries", m + 1)));
        }
        if !(self.rel_tol.is_finite() && self.rel_tol > 0.0) {
            return Err(Error::config("decomposition.rel_tol", "must be positive"));
        }
        let p = &self.prediction;
        if p.x0.len() != n || p.x0.iter().any(|v| !v.is_finite()) {
            return Err(Error::config("prediction.x0", format!("needs {n} finite entries")));
        }
        if p.input.dim() != m {
            return Err(Error::config("prediction.input", format!("needs {m} channel(s)")));
        }
        ode::step_count(p.horizon, p.dt).map_err(|e| Error::config("prediction.horizon", e.to_string()))?;
        self.evaluation.validate("evaluation")?;
        if self.evaluation.dim() != n {
            return Err(Error::config("evaluation", format!("has {} coordinates but n = {n}", self.evaluation.dim())));
        }
        Ok(())
    }
}

/// Simulate one trajectory per grid point under independently drawn controls.
pub fn generate_dataset(cfg: &ExperimentConfig) -> Result<Dataset> {
    cfg.validate()?;
    let starts = cfg.grid.points();
    let controls = generate_controls(&cfg.controls, starts.len(), cfg.seed);
    let system = cfg.system;
    let trajectories = starts
        .par_iter()
        .zip(controls.par_iter())
        .map(|(x0, u)| simulate_true(|x, u, dx| system.rhs(x, u, dx), x0, u, cfg.duration, cfg.dt))
        .collect::<Result<Vec<_>>>()?;
    Dataset::new(trajectories)
}

/// Pointwise `‖f − f̂‖₂` and `‖g − ĝ‖_F` over a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorSurface {
    pub points: Vec<Vec<f64>>,
    pub f_error: Vec<f64>,
    pub g_error: Vec<f64>,
}

impl ErrorSurface {
    pub fn max_f(&self) -> f64 {
        self.f_error.iter().copied().fold(0.0, f64::max)
    }

    pub fn max_g(&self) -> f64 {
        self.g_error.iter().copied().fold(0.0, f64::max)
    }
}

pub fn vector_field_errors<A, B>(model: &A, truth: &B, grid: &GridSpec) -> Result<ErrorSurface>
where
    A: ControlAffineField + ?Sized,
    B: ControlAffineField + ?Sized,
{
    if model.state_dim() != truth.state_dim() || model.control_dim() != truth.control_dim() {
        return Err(Error::Argument(format!(
            "model has n = {}, m = {} but the reference has n = {}, m = {}",
            model.state_dim(),
            model.control_dim(),
            truth.state_dim(),
            truth.control_dim()
        )));
    }
    if grid.dim() != model.state_dim() {
        return Err(Error::Argument(format!(
            "grid has {} coordinates but n = {}",
            grid.dim(),
            model.state_dim()
        )));
    }
    let points = grid.points();
    let mut f_error = Vec::with_capacity(points.len());
    let mut g_error = Vec::with_capacity(points.len());
    for p in &points {
        let diff = model.field(p)? - truth.field(p)?;
        f_error.push(diff.column(0).norm());
        g_error.push(diff.columns(1, diff.ncols() - 1).norm());
    }
    Ok(ErrorSurface {
        points,
        f_error,
        g_error,
    })
}

/// Summary numbers written to `metrics.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub system: String,
    pub seed: u64,
    pub trajectories: usize,
    pub rel_tol: f64,
    pub rank: usize,
    pub sigma_max: f64,
    pub sigma_min_retained: f64,
    pub sigma_top: Vec<f64>,
    pub max_state_error: Vec<f64>,
    pub max_f_error: f64,
    pub max_g_error: f64,
}

#[derive(Debug, Clone)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub dataset: Dataset,
    pub identification: Identification,
    pub truth: SampledTrajectory,
    pub predicted: SampledTrajectory,
    pub surface: ErrorSurface,
    pub metrics: Metrics,
}

/// Per-state `max_t |x̂ᵢ(t) − xᵢ(t)|` for two trajectories on the same grid.
pub fn max_state_error(truth: &SampledTrajectory, predicted: &SampledTrajectory) -> Result<Vec<f64>> {
    if truth.len() != predicted.len() || truth.state_dim() != predicted.state_dim() {
        return Err(Error::Argument("trajectories are not on the same grid".into()));
    }
    let n = truth.state_dim();
    let mut err = vec![0.0f64; n];
    for k in 0..truth.len() {
        for (i, e) in err.iter_mut().enumerate() {
            *e = e.max((truth.state(k)[i] - predicted.state(k)[i]).abs());
        }
    }
    Ok(err)
}

/// Generate data, identify, predict, and measure errors.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let dataset = generate_dataset(cfg).map_err(|e| e.in_stage("data generation"))?;
    let opts = IdentifyOptions {
        rel_tol: cfg.rel_tol,
        max_modes: cfg.max_modes,
    };
    let identification =
        IdentifiedModel::identify(dataset.clone(), cfg.kernel.clone(), opts).map_err(|e| e.in_stage("identification"))?;
    let model = &identification.model;
    let p = &cfg.prediction;
    let system = cfg.system;
    let truth = simulate_true(|x, u, dx| system.rhs(x, u, dx), &p.x0, &p.input, p.horizon, p.dt)
        .map_err(|e| e.in_stage("true-system simulation"))?;
    let predicted = model
        .predict(&p.x0, &p.input, p.horizon, p.dt)
        .map_err(|e| e.in_stage("prediction"))?;
    let surface = vector_field_errors(model, &cfg.system, &cfg.evaluation).map_err(|e| e.in_stage("evaluation"))?;

    let sigma = &identification.decomposition.pinv.sigma;
    let rank = identification.decomposition.rank();
    let metrics = Metrics {
        system: cfg.system.name().to_string(),
        seed: cfg.seed,
        trajectories: dataset.len(),
        rel_tol: cfg.rel_tol,
        rank,
        sigma_max: sigma[0],
        sigma_min_retained: if rank > 0 { sigma[rank - 1] } else { 0.0 },
        sigma_top: sigma.iter().take(5.min(rank)).copied().collect(),
        max_state_error: max_state_error(&truth, &predicted)?,
        max_f_error: surface.max_f(),
        max_g_error: surface.max_g(),
    };
    Ok(ExperimentReport {
        config: cfg.clone(),
        dataset,
        identification,
        truth,
        predicted,
        surface,
        metrics,
    })
}

impl ExperimentReport {
    /// Write `dataset.csv`, `model.scldmd`, `prediction.csv`,
    /// `vf_error_f.csv`, `vf_error_g.csv` and `metrics.json` into `dir`.
    pub fn write_to_dir(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        save_dataset(&self.dataset, dir.join("dataset.csv"))?;
        self.identification.model.save(dir.join("model.scldmd"))?;
        write_prediction_csv(&self.truth, &self.predicted, dir.join("prediction.csv"))?;
        write_surface_csv(&self.surface.points, &self.surface.f_error, dir.join("vf_error_f.csv"))?;
        write_surface_csv(&self.surface.points, &self.surface.g_error, dir.join("vf_error_g.csv"))?;
        let path = dir.join("metrics.json");
        let json = serde_json::to_string_pretty(&self.metrics).map_err(|e| Error::format(e.to_string()))?;
        fs::write(&path, json + "\n").map_err(|e| Error::io(&path, e))
    }
}

/// `t, x1_true, ..., xn_true, x1_hat, ..., xn_hat`.
pub fn write_prediction_csv(truth: &SampledTrajectory, predicted: &SampledTrajectory, path: impl AsRef<Path>) -> Result<()> {
    if truth.len() != predicted.len() || truth.state_dim() != predicted.state_dim() {
        return Err(Error::Argument("trajectories are not on the same grid".into()));
    }
    let n = truth.state_dim();
    let mut header = vec!["t".to_string()];
    header.extend((1..=n).map(|i| format!("x{i}_true")));
    header.extend((1..=n).map(|i| format!("x{i}_hat")));
    let rows = (0..truth.len()).map(|k| {
        std::iter::once(truth.times()[k])
            .chain(truth.state(k).iter().copied())
            .chain(predicted.state(k).iter().copied())
            .collect::<Vec<_>>()
    });
    write_csv(path.as_ref(), &header, rows)
}

/// `x1, ..., xn, error`.
pub fn write_surface_csv(points: &[Vec<f64>], values: &[f64], path: impl AsRef<Path>) -> Result<()> {
    let n = points.first().map_or(0, Vec::len);
    let mut header: Vec<String> = (1..=n).map(|i| format!("x{i}")).collect();
    header.push("error".into());
    let rows = points.iter().zip(values).map(|(p, v)| {
        let mut r = p.clone();
        r.push(*v);
        r
    });
    write_csv(path.as_ref(), &header, rows)
}

fn write_csv(path: &Path, header: &[String], rows: impl Iterator<Item = Vec<f64>>) -> Result<()> {
    let io = |e| Error::io(path, e);
    let mut w = BufWriter::new(File::create(path).map_err(io)?);
    writeln!(w, "{}", header.join(",")).map_err(io)?;
    for r in rows {
        let line: Vec<String> = r.iter().map(|v| fmt_f64(*v)).collect();
        writeln!(w, "{}", line.join(",")).map_err(io)?;
    }
    w.flush().map_err(io)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::ZeroSignal;

    #[test]
    fn duffing_rhs_examples() {
        assert_eq!(duffing_rhs([0.0, 0.0], 0.0), [0.0, 0.0]);
        assert_eq!(duffing_rhs([1.0, 0.0], 0.0), [0.0, 0.0]);
        assert_eq!(duffing_rhs([0.0, 0.0], 1.0), [0.0, 2.0]);
    }

    #[test]
    fn field_matches_rhs() {
        let x = [0.7, -1.3];
        let u = 0.4;
        let f = TrueSystem::Duffing.field(&x).unwrap();
        let r = duffing_rhs(x, u);
        for i in 0..2 {
            assert!((f[(i, 0)] + f[(i, 1)] * u - r[i]).abs() < 1e-15);
        }
    }

    #[test]
    fn controls_are_deterministic_and_in_range() {
        let gen = ControlGenerator::default();
        let a = generate_controls(&gen, 20, 7);
        assert_eq!(a, generate_controls(&gen, 20, 7));
        assert_ne!(a, generate_controls(&gen, 20, 8));
        assert_ne!(a[0], a[1]);
        let many = generate_controls(&ControlGenerator { terms: 500, ..gen.clone() }, 20, 1);
        let freqs: Vec<f64> = many.iter().flat_map(|s| s.terms.iter().map(|t| t.frequency)).collect();
        assert_eq!(freqs.len(), 10_000);
        assert!(freqs.iter().all(|&f| (1.0..=3.0).contains(&f)));
        let phases = many.iter().flat_map(|s| s.terms.iter().map(|t| t.phase));
        assert!(phases.into_iter().all(|p| (-1.0..=1.0).contains(&p)));
    }

    #[test]
    fn amplitudes_are_roughly_uniform() {
        let gen = ControlGenerator {
            terms: 1000,
            ..ControlGenerator::default()
        };
        let mut bins = [0usize; 10];
        for s in generate_controls(&gen, 10, 99) {
            for t in s.terms {
                let b = (((t.amplitude + 1.0) / 2.0) * 10.0).floor().min(9.0) as usize;
                bins[b] += 1;
            }
        }
        for c in bins {
            assert!((800..=1200).contains(&c), "{bins:?}");
        }
    }

    #[test]
    fn shared_switch_reuses_one_signal() {
        let gen = ControlGenerator {
            shared: true,
            ..ControlGenerator::default()
        };
        let c = generate_controls(&gen, 3, 5);
        assert_eq!(c[0], c[1]);
        assert_eq!(c[1], c[2]);
    }

    #[test]
    fn equilibrium_stays_put() {
        let t = simulate_true(|x, u, dx| TrueSystem::Duffing.rhs(x, u, dx), &[1.0, 0.0], &ZeroSignal(1), 1.0, 0.05).unwrap();
        for k in 0..t.len() {
            assert_eq!(t.state(k), &[1.0, 0.0]);
        }
    }

    #[test]
    fn linear_decay_matches_exponential() {
        let t = simulate_true(|x, _u, dx| dx[0] = -x[0], &[1.0], &ZeroSignal(0), 1.0, 0.01).unwrap();
        assert!((t.final_state()[0] - (-1f64).exp()).abs() < 1e-8);
    }

    #[test]
    fn grid_points_cover_bounds() {
        let g = GridSpec::square(-3.0, 3.0, 15, 2);
        let pts = g.points();
        assert_eq!(pts.len(), 225);
        assert_eq!(pts[0], vec![-3.0, -3.0]);
        assert_eq!(pts[1][0], -3.0);
        assert_eq!(pts[224], vec![3.0, 3.0]);
        let bad = GridSpec {
            lower: vec![1.0],
            upper: vec![0.0],
            counts: vec![3],
        };
        let err = bad.validate("data.grid").unwrap_err();
        assert!(err.to_string().contains("data.grid.lower[0]"), "{err}");
    }

    #[test]
    fn small_dataset_generation() {
        let cfg = ExperimentConfig {
            grid: GridSpec::square(-1.0, 1.0, 2, 2),
            ..ExperimentConfig::duffing()
        };
        let ds = generate_dataset(&cfg).unwrap();
        assert_eq!(ds.len(), 4);
        assert_eq!(ds.trajectory(0).len(), 21);
        assert_eq!(ds.trajectory(3).initial_state(), &[1.0, 1.0]);
        // controls stored as the analytic signal at the grid times
        let u = &generate_controls(&cfg.controls, 4, cfg.seed)[2];
        let t = ds.trajectory(2);
        for k in 0..t.len() {
            assert_eq!(t.control(k)[0], u.eval(t.times()[k]));
        }
    }

    #[test]
    fn single_trajectory_experiment_runs() {
        let cfg = ExperimentConfig {
            grid: GridSpec::square(0.5, 0.5, 1, 2),
            prediction: PredictionSpec {
                horizon: 1.0,
                ..ExperimentConfig::duffing().prediction
            },
            ..ExperimentConfig::duffing()
        };
        let report = run_experiment(&cfg).unwrap();
        assert_eq!(report.metrics.trajectories, 1);
        assert!(report.metrics.rank <= 1);
        assert!(report.metrics.max_state_error.iter().all(|e| e.is_finite()));
        assert!(report.surface.max_f().is_finite());
    }

    #[test]
    fn error_surface_dimension_mismatch() {
        let grid = GridSpec::square(-1.0, 1.0, 3, 2);
        assert!(vector_field_errors(&TrueSystem::Linear, &TrueSystem::Duffing, &grid).is_err());
        let s = vector_field_errors(&TrueSystem::Duffing, &TrueSystem::Duffing, &grid).unwrap();
        assert_eq!(s.max_f(), 0.0);
        assert_eq!(s.max_g(), 0.0);
    }

    #[test]
    fn config_validation_names_fields() {
        let mut cfg = ExperimentConfig::duffing();
        cfg.prediction.x0 = vec![1.0];
        assert!(cfg.validate().unwrap_err().to_string().contains("prediction.x0"));
        let mut cfg = ExperimentConfig::duffing();
        cfg.controls.frequency = [3.0, 1.0];
        assert!(cfg.validate().unwrap_err().to_string().contains("data.controls.frequency"));
        let mut cfg = ExperimentConfig::duffing();
        cfg.duration = 1.01;
        assert!(cfg.validate().is_err());
    }
}
