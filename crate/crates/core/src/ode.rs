//! Fixed-step classical Runge–Kutta integration of controlled systems.

use crate::data::SampledTrajectory;
use crate::error::{Error, Result};
use crate::signal::ControlSignal;

/// Number of steps for `horizon` at step `dt`; the horizon must be a whole
/// number of steps to within 1e-9 relative.
pub fn step_count(horizon: f64, dt: f64) -> Result<usize> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::Argument(format!("time step must be positive, got {dt}")));
    }
    if !(horizon.is_finite() && horizon >= dt) {
        return Err(Error::Argument(format!("horizon {horizon} must be at least one step ({dt})")));
    }
    let steps = (horizon / dt).round();
    if (steps * dt - horizon).abs() > 1e-9 * horizon {
        return Err(Error::Argument(format!("horizon {horizon} is not a multiple of dt = {dt}")));
    }
    Ok(steps as usize)
}

/// Integrate `ẋ = rhs(x, u(t))` from `x0` with RK4, evaluating the control at
/// the stage times. Returns the sampled path with `u(tₖ)` on the grid.
///
/// Kernel overflow inside `rhs` and non-finite states are both reported as
/// divergence at the start time of the failing step.
pub fn rk4<F>(mut rhs: F, x0: &[f64], u: &dyn ControlSignal, horizon: f64, dt: f64) -> Result<SampledTrajectory>
where
    F: FnMut(&[f64], &[f64], &mut [f64]) -> Result<()>,
{
    let steps = step_count(horizon, dt)?;
    let n = x0.len();
    let m = u.dim();
    if x0.iter().any(|v| !v.is_finite()) {
        return Err(Error::Argument("initial state is not finite".into()));
    }

    let mut times = Vec::with_capacity(steps + 1);
    let mut states = Vec::with_capacity((steps + 1) * n);
    let mut controls = Vec::with_capacity((steps + 1) * m);

    let mut x = x0.to_vec();
    let mut ubuf = vec![0.0; m];
    let (mut k1, mut k2, mut k3, mut k4) = (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    let mut tmp = vec![0.0; n];

    for step in 0..=steps {
        let t = step as f64 * dt;
        times.push(t);
        states.extend_from_slice(&x);
        u.eval_into(t, &mut ubuf);
        controls.extend_from_slice(&ubuf);
        if step == steps {
            break;
        }
        let diverged = |e: Error| match e {
            Error::KernelOverflow { .. } => Error::Divergence { time: t },
            other => other,
        };

        rhs(&x, &ubuf, &mut k1).map_err(diverged)?;
        u.eval_into(t + 0.5 * dt, &mut ubuf);
        for i in 0..n {
            tmp[i] = x[i] + 0.5 * dt * k1[i];
        }
        rhs(&tmp, &ubuf, &mut k2).map_err(diverged)?;
        for i in 0..n {
            tmp[i] = x[i] + 0.5 * dt * k2[i];
        }
        rhs(&tmp, &ubuf, &mut k3).map_err(diverged)?;
        u.eval_into(t + dt, &mut ubuf);
        for i in 0..n {
            tmp[i] = x[i] + dt * k3[i];
        }
        rhs(&tmp, &ubuf, &mut k4).map_err(diverged)?;
        for i in 0..n {
            x[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Divergence { time: t + dt });
        }
    }
    SampledTrajectory::from_flat(times, states, controls, n, m)
}
