//! C ABI over the `scldmd` library.
//!
//! Objects cross the boundary as opaque handles that the caller releases with
//! the matching `*_free` function. Every fallible call returns a
//! [`ScldmdStatus`]; on failure, [`scldmd_last_error`] describes the most
//! recent error on the calling thread. Matrices are dense row-major `double`
//! arrays.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;
use std::slice;

use scldmd::signal::{SampledSignal, SinusoidTerm, SinusoidalInput, SumOfSinusoids, Waveform};
use scldmd::{
    ControlAffineField, ControlSignal, Dataset, Error, ErrorKind, IdentifiedModel, IdentifyOptions, KernelConfig,
    SampledTrajectory,
};

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScldmdStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullPointer = 1,
    /// Invalid argument or configuration.
    Argument = 2,
    /// Unreadable, malformed or inconsistent data or file.
    Format = 3,
    /// Numerical failure: kernel overflow, degenerate Gram matrix, divergence.
    Numerical = 4,
    /// An internal panic was caught at the boundary.
    Panic = 5,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScldmdWaveform {
    Sin = 0,
    Cos = 1,
}

/// `amplitude · wave(frequency · t + phase)` added to control `channel`.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct ScldmdSinusoid {
    pub channel: usize,
    pub amplitude: f64,
    pub frequency: f64,
    pub phase: f64,
    pub waveform: ScldmdWaveform,
}

/// Opaque trajectory handle.
pub struct ScldmdTrajectory(SampledTrajectory);

/// Opaque dataset handle.
pub struct ScldmdDataset(Dataset);

/// Opaque identified-model handle.
pub struct ScldmdModel(IdentifiedModel);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

/// Message for the most recent failure on this thread, or null if none.
/// The pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn scldmd_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

enum Failure {
    Null(&'static str),
    Lib(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

fn status_of(e: &Error) -> ScldmdStatus {
    match e.kind() {
        ErrorKind::Usage => ScldmdStatus::Argument,
        ErrorKind::Data => ScldmdStatus::Format,
        ErrorKind::Numerical => ScldmdStatus::Numerical,
    }
}

fn guard(body: impl FnOnce() -> Result<(), Failure>) -> ScldmdStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => ScldmdStatus::Ok,
        Ok(Err(Failure::Null(name))) => {
            set_last_error(format!("{name} must not be null"));
            ScldmdStatus::NullPointer
        }
        Ok(Err(Failure::Lib(e))) => {
            set_last_error(e.to_string());
            status_of(&e)
        }
        Err(panic) => {
            let msg = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(format!("internal panic: {msg}"));
            ScldmdStatus::Panic
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, name: &'static str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or(Failure::Null(name))
}

unsafe fn array<'a>(p: *const f64, len: usize, name: &'static str) -> Result<&'a [f64], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Failure::Null(name));
    }
    Ok(slice::from_raw_parts(p, len))
}

unsafe fn array_mut<'a>(p: *mut f64, len: usize, name: &'static str) -> Result<&'a mut [f64], Failure> {
    if len == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(Failure::Null(name));
    }
    Ok(slice::from_raw_parts_mut(p, len))
}

unsafe fn path_arg(p: *const c_char) -> Result<PathBuf, Failure> {
    if p.is_null() {
        return Err(Failure::Null("path"));
    }
    let s = CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Error::Argument("path is not valid UTF-8".into()))?;
    Ok(PathBuf::from(s))
}

unsafe fn write_out<T>(out: *mut *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(Failure::Null("out"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

fn check_len(name: &str, got: usize, want: usize) -> Result<(), Failure> {
    if got != want {
        return Err(Error::Argument(format!("{name} has length {got}, expected {want}")).into());
    }
    Ok(())
}

// ---------------------------------------------------------------- trajectories

/// Build a trajectory from `len` samples: `times[len]`, `states[len·n]` and
/// `controls[len·m]`, both row-major.
#[no_mangle]
pub unsafe extern "C" fn scldmd_trajectory_new(
    len: usize,
    n: usize,
    m: usize,
    times: *const f64,
    states: *const f64,
    controls: *const f64,
    out: *mut *mut ScldmdTrajectory,
) -> ScldmdStatus {
    guard(|| {
        let t = array(times, len, "times")?.to_vec();
        let x = array(states, len * n, "states")?.to_vec();
        let u = array(controls, len * m, "controls")?.to_vec();
        write_out(out, ScldmdTrajectory(SampledTrajectory::from_flat(t, x, u, n, m)?))
    })
}

#[no_mangle]
pub unsafe extern "C" fn scldmd_trajectory_free(traj: *mut ScldmdTrajectory) {
    if !traj.is_null() {
        drop(Box::from_raw(traj));
    }
}

/// Sample count, state dimension and control dimension; any output may be null.
#[no_mangle]
pub unsafe extern "C" fn scldmd_trajectory_dims(
    traj: *const ScldmdTrajectory,
    len: *mut usize,
    n: *mut usize,
    m: *mut usize,
) -> ScldmdStatus {
    guard(|| {
        let t = &deref(traj, "traj")?.0;
        for (p, v) in [(len, t.len()), (n, t.state_dim()), (m, t.control_dim())] {
            if !p.is_null() {
                *p = v;
            }
        }
        Ok(())
    })
}

/// Borrowed pointer to the `len` sample times; valid until the trajectory is freed.
#[no_mangle]
pub unsafe extern "C" fn scldmd_trajectory_times(traj: *const ScldmdTrajectory) -> *const f64 {
    traj.as_ref().map_or(ptr::null(), |t| t.0.times().as_ptr())
}

/// Borrowed pointer to the `len·n` row-major states.
#[no_mangle]
pub unsafe extern "C" fn scldmd_trajectory_states(traj: *const ScldmdTrajectory) -> *const f64 {
    traj.as_ref().map_or(ptr::null(), |t| t.0.states_flat().as_ptr())
}

/// Borrowed pointer to the `len·m` row-major controls.
#[no_mangle]
pub unsafe extern "C" fn scldmd_trajectory_controls(traj: *const ScldmdTrajectory) -> *const f64 {
    traj.as_ref().map_or(ptr::null(), |t| t.0.controls_flat().as_ptr())
}

// -------------------------------------------------------------------- datasets

/// Read a dataset CSV (`traj_id,t,x1..xn,u1..um`).
#[no_mangle]
pub unsafe extern "C" fn scldmd_dataset_load(path: *const c_char, out: *mut *mut ScldmdDataset) -> ScldmdStatus {
    guard(|| {
        let ds = scldmd::load_dataset(path_arg(path)?)?;
        write_out(out, ScldmdDataset(ds))
    })
}

/// Collect `count` trajectories (copied) into a dataset.
#[no_mangle]
pub unsafe extern "C" fn scldmd_dataset_new(
    trajectories: *const *const ScldmdTrajectory,
    count: usize,
    out: *mut *mut ScldmdDataset,
) -> ScldmdStatus {
    guard(|| {
        if trajectories.is_null() && count > 0 {
            return Err(Failure::Null("trajectories"));
        }
        let handles = if count == 0 {
            &[][..]
        } else {
            slice::from_raw_parts(trajectories, count)
        };
        let trajs = handles
            .iter()
            .map(|&h| deref(h, "trajectories[i]").map(|t| t.0.clone()))
            .collect::<Result<Vec<_>, _>>()?;
        write_out(out, ScldmdDataset(Dataset::new(trajs)?))
    })
}

#[no_mangle]
pub unsafe extern "C" fn scldmd_dataset_save(ds: *const ScldmdDataset, path: *const c_char) -> ScldmdStatus {
    guard(|| {
        let ds = deref(ds, "dataset")?;
        scldmd::save_dataset(&ds.0, path_arg(path)?)?;
        Ok(())
    })
}

/// Trajectory count, state dimension and control dimension; any output may be null.
#[no_mangle]
pub unsafe extern "C" fn scldmd_dataset_dims(
    ds: *const ScldmdDataset,
    count: *mut usize,
    n: *mut usize,
    m: *mut usize,
) -> ScldmdStatus {
    guard(|| {
        let d = &deref(ds, "dataset")?.0;
        for (p, v) in [(count, d.len()), (n, d.state_dim()), (m, d.control_dim())] {
            if !p.is_null() {
                *p = v;
            }
        }
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn scldmd_dataset_free(ds: *mut ScldmdDataset) {
    if !ds.is_null() {
        drop(Box::from_raw(ds));
    }
}

// ---------------------------------------------------------------------- models

/// Identify a model. `mu_v` holds one scale per channel (`m + 1` values) or a
/// single shared scale. A negative `max_modes` keeps every retained mode.
#[no_mangle]
pub unsafe extern "C" fn scldmd_identify(
    ds: *const ScldmdDataset,
    mu_d: f64,
    mu_v: *const f64,
    mu_v_len: usize,
    rel_tol: f64,
    max_modes: i64,
    out: *mut *mut ScldmdModel,
) -> ScldmdStatus {
    guard(|| {
        let ds = &deref(ds, "dataset")?.0;
        let scales = array(mu_v, mu_v_len, "mu_v")?;
        let m = ds.control_dim();
        let kernel = match scales.len() {
            1 => KernelConfig::shared(mu_d, scales[0], m)?,
            _ => KernelConfig::new(mu_d, scales.to_vec())?,
        };
        let opts = IdentifyOptions {
            rel_tol,
            max_modes: usize::try_from(max_modes).ok(),
        };
        let id = IdentifiedModel::identify(ds.clone(), kernel, opts)?;
        write_out(out, ScldmdModel(id.model))
    })
}

#[no_mangle]
pub unsafe extern "C" fn scldmd_model_load(path: *const c_char, out: *mut *mut ScldmdModel) -> ScldmdStatus {
    guard(|| write_out(out, ScldmdModel(IdentifiedModel::load(path_arg(path)?)?)))
}

#[no_mangle]
pub unsafe extern "C" fn scldmd_model_save(model: *const ScldmdModel, path: *const c_char) -> ScldmdStatus {
    guard(|| {
        deref(model, "model")?.0.save(path_arg(path)?)?;
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn scldmd_model_free(model: *mut ScldmdModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// State dimension, control dimension, rank and training-trajectory count;
/// any output may be null.
#[no_mangle]
pub unsafe extern "C" fn scldmd_model_dims(
    model: *const ScldmdModel,
    n: *mut usize,
    m: *mut usize,
    rank: *mut usize,
    size: *mut usize,
) -> ScldmdStatus {
    guard(|| {
        let md = &deref(model, "model")?.0;
        for (p, v) in [(n, md.state_dim()), (m, md.control_dim()), (rank, md.rank()), (size, md.size())] {
            if !p.is_null() {
                *p = v;
            }
        }
        Ok(())
    })
}

/// Write `[f̂(x) ĝ(x)]` (`n × (m+1)`, row-major) into `out[out_len]`.
#[no_mangle]
pub unsafe extern "C" fn scldmd_model_vector_field(
    model: *const ScldmdModel,
    x: *const f64,
    x_len: usize,
    out: *mut f64,
    out_len: usize,
) -> ScldmdStatus {
    guard(|| {
        let md = &deref(model, "model")?.0;
        let (n, m) = (md.state_dim(), md.control_dim());
        check_len("x", x_len, n)?;
        check_len("out", out_len, n * (m + 1))?;
        let x = array(x, x_len, "x")?;
        let out = array_mut(out, out_len, "out")?;
        let field = md.field(x)?;
        for i in 0..n {
            for j in 0..=m {
                out[i * (m + 1) + j] = field[(i, j)];
            }
        }
        Ok(())
    })
}

/// Write the singular values (non-increasing, zero past the rank) into
/// `out[out_len]`, where `out_len` is the training-trajectory count.
#[no_mangle]
pub unsafe extern "C" fn scldmd_model_spectrum(model: *const ScldmdModel, out: *mut f64, out_len: usize) -> ScldmdStatus {
    guard(|| {
        let md = &deref(model, "model")?.0;
        let sigma = &md.pseudo_inverse().sigma;
        check_len("out", out_len, sigma.len())?;
        array_mut(out, out_len, "out")?.copy_from_slice(sigma.as_slice());
        Ok(())
    })
}

fn predict_with(
    model: &IdentifiedModel,
    x0: &[f64],
    input: &dyn ControlSignal,
    horizon: f64,
    dt: f64,
    out: *mut *mut ScldmdTrajectory,
) -> Result<(), Failure> {
    check_len("x0", x0.len(), model.state_dim())?;
    if input.dim() != model.control_dim() {
        return Err(Error::Argument(format!(
            "input has {} channel(s) but the model has m = {}",
            input.dim(),
            model.control_dim()
        ))
        .into());
    }
    let traj = model.predict(x0, input, horizon, dt)?;
    unsafe { write_out(out, ScldmdTrajectory(traj)) }
}

/// Predict under a sum of sinusoids; channels without terms are zero.
#[no_mangle]
pub unsafe extern "C" fn scldmd_model_predict_sinusoids(
    model: *const ScldmdModel,
    x0: *const f64,
    x0_len: usize,
    terms: *const ScldmdSinusoid,
    term_count: usize,
    horizon: f64,
    dt: f64,
    out: *mut *mut ScldmdTrajectory,
) -> ScldmdStatus {
    guard(|| {
        let md = &deref(model, "model")?.0;
        let x0 = array(x0, x0_len, "x0")?;
        if terms.is_null() && term_count > 0 {
            return Err(Failure::Null("terms"));
        }
        let terms = if term_count == 0 {
            &[][..]
        } else {
            slice::from_raw_parts(terms, term_count)
        };
        let mut channels = vec![SumOfSinusoids::default(); md.control_dim()];
        for t in terms {
            let chan = channels.get_mut(t.channel).ok_or_else(|| {
                Error::Argument(format!("sinusoid channel {} out of range for m = {}", t.channel, md.control_dim()))
            })?;
            chan.terms.push(SinusoidTerm {
                amplitude: t.amplitude,
                frequency: t.frequency,
                phase: t.phase,
                waveform: match t.waveform {
                    ScldmdWaveform::Sin => Waveform::Sin,
                    ScldmdWaveform::Cos => Waveform::Cos,
                },
            });
        }
        predict_with(md, x0, &SinusoidalInput::new(channels), horizon, dt, out)
    })
}

/// Predict under a sampled input: `times[count]` strictly increasing,
/// `values[count·m]` row-major, linearly interpolated and held at the ends.
#[no_mangle]
pub unsafe extern "C" fn scldmd_model_predict_sampled(
    model: *const ScldmdModel,
    x0: *const f64,
    x0_len: usize,
    times: *const f64,
    values: *const f64,
    count: usize,
    horizon: f64,
    dt: f64,
    out: *mut *mut ScldmdTrajectory,
) -> ScldmdStatus {
    guard(|| {
        let md = &deref(model, "model")?.0;
        let x0 = array(x0, x0_len, "x0")?;
        let m = md.control_dim();
        let t = array(times, count, "times")?.to_vec();
        let v = array(values, count * m, "values")?.to_vec();
        let signal = SampledSignal::new(t, v, m)?;
        predict_with(md, x0, &signal, horizon, dt, out)
    })
}
