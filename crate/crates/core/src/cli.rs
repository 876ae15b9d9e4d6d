//! Command-line interface.
//!
//! Exit codes: 0 success, 2 usage or configuration error, 3 data or file
//! format error, 4 numerical failure.

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::benchmark::{self, vector_field_errors, write_surface_csv, GridSpec, TrueSystem};
use crate::config::RunConfig;
use crate::data::{fmt_f64, load_dataset, save_dataset, write_dataset, Dataset};
use crate::error::{Error, ErrorKind, Result};
use crate::gram::write_matrix_csv;
use crate::model::{ControlAffineField, IdentifiedModel, IdentifyOptions};
use crate::signal::{ControlSignal, SampledSignal, SinusoidalInput};

#[derive(Debug, Parser)]
#[command(name = "scldmd", version, about = "Control-affine system identification from trajectory data")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a benchmark system and write a training dataset CSV.
    Generate(GenerateArgs),
    /// Fit a model to a dataset CSV and write the model file.
    Identify(IdentifyArgs),
    /// Integrate a fitted model from an initial state under an input.
    Predict(PredictArgs),
    /// Compare a model's vector field with a reference on a grid.
    Evaluate(EvaluateArgs),
    /// List the singular values of a fitted model.
    Spectrum(SpectrumArgs),
    /// Run generation, identification, prediction and evaluation end to end.
    Experiment(ExperimentArgs),
}

#[derive(Debug, Args)]
pub struct Common {
    /// TOML configuration file; flags override its values.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    #[arg(long, value_name = "N")]
    pub seed: Option<u64>,
    /// Relative eigenvalue cutoff for the pseudoinverse.
    #[arg(long, value_name = "REAL")]
    pub tol: Option<f64>,
}

impl Common {
    fn load(&self) -> Result<RunConfig> {
        let mut cfg = RunConfig::load_or_default(self.config.as_deref())?;
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(tol) = self.tol {
            cfg.decomposition.rel_tol = tol;
        }
        Ok(cfg)
    }
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[command(flatten)]
    pub common: Common,
    /// Output dataset CSV.
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
    /// `duffing` or `linear`.
    #[arg(long)]
    pub system: Option<String>,
    /// Initial-condition grid counts per state coordinate, e.g. `15,15`.
    #[arg(long, value_name = "N,..")]
    pub counts: Option<String>,
}

#[derive(Debug, Args)]
pub struct IdentifyArgs {
    #[command(flatten)]
    pub common: Common,
    /// Training dataset CSV.
    #[arg(long, value_name = "PATH")]
    pub data: Option<PathBuf>,
    /// Output model file.
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
    /// Keep at most this many singular triplets.
    #[arg(long, value_name = "K")]
    pub max_modes: Option<usize>,
    /// Also write g_beta.csv, g_d.csv and d.csv into this directory.
    #[arg(long, value_name = "DIR")]
    pub dump_gram: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, value_name = "PATH")]
    pub model: Option<PathBuf>,
    /// Initial state, e.g. `2,-2`.
    #[arg(long, value_name = "X,..", allow_hyphen_values = true)]
    pub x0: Option<String>,
    /// Sinusoidal input, e.g. `sin(1,1)+cos(1,2)`; channels separated by `;`.
    #[arg(long, value_name = "SPEC", conflicts_with = "input_csv")]
    pub input: Option<String>,
    /// Sampled input CSV with header `t,u1,..,um`, linearly interpolated.
    #[arg(long, value_name = "PATH")]
    pub input_csv: Option<PathBuf>,
    #[arg(long)]
    pub horizon: Option<f64>,
    #[arg(long)]
    pub dt: Option<f64>,
    /// Output CSV (dataset format); standard output when omitted.
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, value_name = "PATH")]
    pub model: Option<PathBuf>,
    /// `duffing`, `linear`, or `model:PATH`.
    #[arg(long, default_value = "duffing")]
    pub truth: String,
    /// Evaluation grid as `LO:HI:COUNT` per coordinate, comma separated.
    #[arg(long, value_name = "LO:HI:N,..", allow_hyphen_values = true)]
    pub grid: Option<String>,
    /// Directory for vf_error_f.csv and vf_error_g.csv.
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SpectrumArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, value_name = "PATH")]
    pub model: Option<PathBuf>,
    /// Output CSV `index,sigma,retained`; standard output when omitted.
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    #[command(flatten)]
    pub common: Common,
    /// Report directory.
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
}

impl From<ErrorKind> for ExitCode {
    fn from(kind: ErrorKind) -> Self {
        ExitCode::from(match kind {
            ErrorKind::Usage => 2,
            ErrorKind::Data => 3,
            ErrorKind::Numerical => 4,
        })
    }
}

/// Parse `args`, run the command, and map the outcome to an exit code.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            e.kind().into()
        }
    }
}

pub fn run(command: Command) -> Result<()> {
    match command {
        Command::Generate(a) => generate(a),
        Command::Identify(a) => identify(a),
        Command::Predict(a) => predict(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Spectrum(a) => spectrum(a),
        Command::Experiment(a) => experiment(a),
    }
}

fn required(flag: Option<PathBuf>, fallback: Option<&PathBuf>, name: &str) -> Result<PathBuf> {
    flag.or_else(|| fallback.cloned())
        .ok_or_else(|| Error::Argument(format!("--{name} is required (or set it under [paths])")))
}

fn parse_list<T: std::str::FromStr>(text: &str, flag: &str) -> Result<Vec<T>> {
    text.split(',')
        .map(|s| {
            s.trim()
                .parse()
                .map_err(|_| Error::Argument(format!("--{flag}: {s:?} is not a valid number")))
        })
        .collect()
}

fn generate(a: GenerateArgs) -> Result<()> {
    let mut cfg = a.common.load()?;
    if let Some(s) = &a.system {
        let system = TrueSystem::from_name(s)?;
        if system != cfg.data.system {
            cfg = RunConfig {
                seed: cfg.seed,
                decomposition: cfg.decomposition,
                paths: cfg.paths,
                ..RunConfig::preset(system)
            };
        }
    }
    if let Some(c) = &a.counts {
        let counts: Vec<usize> = parse_list(c, "counts")?;
        if counts.len() != cfg.data.grid.dim() {
            return Err(Error::Argument(format!(
                "--counts needs {} entries for this system",
                cfg.data.grid.dim()
            )));
        }
        cfg.data.grid.counts = counts;
    }
    let out = required(a.out, cfg.paths.dataset.as_ref(), "out")?;
    let exp = cfg.experiment()?;
    let ds = benchmark::generate_dataset(&exp)?;
    save_dataset(&ds, &out)?;
    println!(
        "wrote {} trajectories of {} samples ({} system, seed {}) to {}",
        ds.len(),
        ds.trajectory(0).len(),
        exp.system.name(),
        exp.seed,
        out.display()
    );
    Ok(())
}

fn identify(a: IdentifyArgs) -> Result<()> {
    let cfg = a.common.load()?;
    let data = required(a.data, cfg.paths.dataset.as_ref(), "data")?;
    let out = required(a.out, cfg.paths.model.as_ref(), "out")?;
    let ds = load_dataset(&data)?;
    let kernel = cfg.kernel.build(ds.control_dim())?;
    let opts = IdentifyOptions {
        rel_tol: cfg.decomposition.rel_tol,
        max_modes: a.max_modes.or(cfg.decomposition.max_modes),
    };
    let id = IdentifiedModel::identify(ds, kernel, opts)?;
    if let Some(dir) = &a.dump_gram {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        write_matrix_csv(&id.gram.g_beta, dir.join("g_beta.csv"))?;
        write_matrix_csv(&id.gram.g_d, dir.join("g_d.csv"))?;
        write_matrix_csv(&id.gram.d_matrix, dir.join("d.csv"))?;
    }
    id.model.save(&out)?;
    let sigma = &id.decomposition.pinv.sigma;
    let top: Vec<String> = sigma.iter().take(5.min(id.model.rank())).map(|s| format!("{s:.6e}")).collect();
    println!("trajectories: {}", id.model.size());
    println!("rank: {}", id.model.rank());
    println!("top singular values: {}", top.join(" "));
    println!("model written to {}", out.display());
    Ok(())
}

fn load_model_arg(flag: Option<PathBuf>, cfg: &RunConfig) -> Result<IdentifiedModel> {
    IdentifiedModel::load(required(flag, cfg.paths.model.as_ref(), "model")?)
}

fn predict(a: PredictArgs) -> Result<()> {
    let cfg = a.common.load()?;
    let model = load_model_arg(a.model, &cfg)?;
    let x0 = match &a.x0 {
        Some(s) => parse_list(s, "x0")?,
        None => cfg.prediction.x0.clone(),
    };
    if x0.len() != model.state_dim() {
        return Err(Error::Argument(format!(
            "--x0 has {} entries but the model has n = {}",
            x0.len(),
            model.state_dim()
        )));
    }
    let input: Box<dyn ControlSignal> = match (&a.input, &a.input_csv) {
        (_, Some(path)) => {
            let file = File::open(path).map_err(|e| Error::io(path, e))?;
            Box::new(SampledSignal::from_csv(file).map_err(|e| e.with_path(path))?)
        }
        (Some(spec), None) => Box::new(SinusoidalInput::parse(spec)?),
        (None, None) => Box::new(SinusoidalInput::parse(&cfg.prediction.input)?),
    };
    if input.dim() != model.control_dim() {
        return Err(Error::Argument(format!(
            "input has {} channel(s) but the model has m = {}",
            input.dim(),
            model.control_dim()
        )));
    }
    let horizon = a.horizon.unwrap_or(cfg.prediction.horizon);
    let dt = a.dt.unwrap_or(cfg.prediction.dt);
    let traj = model.predict(&x0, input.as_ref(), horizon, dt)?;
    let ds = Dataset::new(vec![traj])?;
    match &a.out {
        Some(path) => {
            save_dataset(&ds, path)?;
            println!("prediction of {} steps written to {}", ds.trajectory(0).len() - 1, path.display());
        }
        None => write_dataset(&ds, io::stdout().lock()).map_err(|e| Error::io("<stdout>", e))?,
    }
    Ok(())
}

fn parse_grid(text: &str) -> Result<GridSpec> {
    let mut grid = GridSpec {
        lower: Vec::new(),
        upper: Vec::new(),
        counts: Vec::new(),
    };
    for axis in text.split(',') {
        let parts: Vec<&str> = axis.split(':').map(str::trim).collect();
        let bad = || Error::Argument(format!("--grid: {axis:?} is not LO:HI:COUNT"));
        if parts.len() != 3 {
            return Err(bad());
        }
        grid.lower.push(parts[0].parse().map_err(|_| bad())?);
        grid.upper.push(parts[1].parse().map_err(|_| bad())?);
        grid.counts.push(parts[2].parse().map_err(|_| bad())?);
    }
    grid.validate("--grid").map_err(|e| Error::Argument(e.to_string()))?;
    Ok(grid)
}

fn evaluate(a: EvaluateArgs) -> Result<()> {
    let cfg = a.common.load()?;
    let model = load_model_arg(a.model, &cfg)?;
    let truth: Box<dyn ControlAffineField> = match a.truth.strip_prefix("model:") {
        Some(path) => Box::new(IdentifiedModel::load(path)?),
        None => Box::new(TrueSystem::from_name(&a.truth)?),
    };
    let grid = match &a.grid {
        Some(text) => parse_grid(text)?,
        None => cfg.evaluation.clone(),
    };
    let surface = vector_field_errors(&model, truth.as_ref(), &grid)?;
    println!("grid points: {}", surface.points.len());
    println!("max |f - f_hat|: {:.6e}", surface.max_f());
    println!("max |g - g_hat|: {:.6e}", surface.max_g());
    if let Some(dir) = &a.out {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        write_surface_csv(&surface.points, &surface.f_error, dir.join("vf_error_f.csv"))?;
        write_surface_csv(&surface.points, &surface.g_error, dir.join("vf_error_g.csv"))?;
    }
    Ok(())
}

fn spectrum(a: SpectrumArgs) -> Result<()> {
    let cfg = a.common.load()?;
    let model = load_model_arg(a.model, &cfg)?;
    let pinv = model.pseudo_inverse();
    let write = |w: &mut dyn Write| -> io::Result<()> {
        writeln!(w, "index,sigma,retained")?;
        for (k, s) in pinv.sigma.iter().enumerate() {
            writeln!(w, "{k},{},{}", fmt_f64(*s), u8::from(k < pinv.rank))?;
        }
        w.flush()
    };
    match &a.out {
        Some(path) => {
            let file = File::create(path).map_err(|e| Error::io(path, e))?;
            write(&mut BufWriter::new(file)).map_err(|e| Error::io(path, e))?;
            println!("rank {} of {}; spectrum written to {}", pinv.rank, pinv.size(), path.display());
        }
        None => {
            write(&mut io::stdout().lock()).map_err(|e| Error::io("<stdout>", e))?;
            eprintln!("rank {} of {}", pinv.rank, pinv.size());
        }
    }
    Ok(())
}

fn experiment(a: ExperimentArgs) -> Result<()> {
    let cfg = a.common.load()?;
    let exp = cfg.experiment()?;
    let report = benchmark::run_experiment(&exp)?;
    let m = &report.metrics;
    let fmt = |v: &[f64]| v.iter().map(|e| format!("{e:.3e}")).collect::<Vec<_>>().join(" ");
    println!("system: {}  seed: {}  trajectories: {}", m.system, m.seed, m.trajectories);
    println!("rel_tol: {:e}  rank: {}", m.rel_tol, m.rank);
    println!("top singular values: {}", fmt(&m.sigma_top));
    println!("max trajectory error per state: {}", fmt(&m.max_state_error));
    println!("max |f - f_hat|: {:.3e}  max |g - g_hat|: {:.3e}", m.max_f_error, m.max_g_error);
    if let Some(dir) = a.out.as_ref().or(cfg.paths.out.as_ref()) {
        report.write_to_dir(dir)?;
        println!("report written to {}", dir.display());
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_flag_parsing() {
        let g = parse_grid("-2:2:9,-1:1:3").unwrap();
        assert_eq!(g.lower, vec![-2.0, -1.0]);
        assert_eq!(g.counts, vec![9, 3]);
        assert!(parse_grid("-2:2").is_err());
        assert!(parse_grid("2:-2:3").is_err());
    }

    #[test]
    fn flags_override_config() {
        let cli = Cli::try_parse_from(["scldmd", "experiment", "--seed", "5", "--tol", "1e-8"]).unwrap();
        let Command::Experiment(a) = cli.command else { panic!() };
        let cfg = a.common.load().unwrap();
        assert_eq!(cfg.seed, 5);
        assert_eq!(cfg.decomposition.rel_tol, 1e-8);
    }

    #[test]
    fn negative_initial_state_parses() {
        let cli = Cli::try_parse_from(["scldmd", "predict", "--x0", "-1,2"]).unwrap();
        let Command::Predict(a) = cli.command else { panic!() };
        assert_eq!(parse_list::<f64>(a.x0.as_deref().unwrap(), "x0").unwrap(), vec![-1.0, 2.0]);
    }

    #[test]
    fn missing_required_path_is_usage_error() {
        let err = run(Command::Spectrum(SpectrumArgs {
            common: Common {
                config: None,
                seed: None,
                tol: None,
            },
            model: None,
            out: None,
        }))
        .unwrap_err();
        assert_eq!(err.kind(), ErrorKind::Usage);
    }
}
