//! Control signals evaluated at arbitrary times.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A control input `t ↦ u(t) ∈ ℝᵐ`.
pub trait ControlSignal: Sync {
    fn dim(&self) -> usize;

    fn eval_into(&self, t: f64, out: &mut [f64]);

    fn eval(&self, t: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.eval_into(t, &mut out);
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Waveform {
    #[default]
    Sin,
    Cos,
}

/// `amplitude · wave(frequency · t + phase)`, frequency in rad/s.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SinusoidTerm {
    pub amplitude: f64,
    pub frequency: f64,
    #[serde(default)]
    pub phase: f64,
    #[serde(default)]
    pub waveform: Waveform,
}

impl SinusoidTerm {
    pub fn sin(amplitude: f64, frequency: f64, phase: f64) -> Self {
        Self {
            amplitude,
            frequency,
            phase,
            waveform: Waveform::Sin,
        }
    }

    pub fn cos(amplitude: f64, frequency: f64, phase: f64) -> Self {
        Self {
            amplitude,
            frequency,
            phase,
            waveform: Waveform::Cos,
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        let arg = self.frequency * t + self.phase;
        self.amplitude
            * match self.waveform {
                Waveform::Sin => arg.sin(),
                Waveform::Cos => arg.cos(),
            }
    }
}

/// Scalar sum of sinusoids `Σₖ aₖ sin(ωₖ t + φₖ)`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SumOfSinusoids {
    pub terms: Vec<SinusoidTerm>,
}

impl SumOfSinusoids {
    pub fn new(terms: Vec<SinusoidTerm>) -> Self {
        Self { terms }
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.terms.iter().map(|term| term.eval(t)).sum()
    }
}

impl ControlSignal for SumOfSinusoids {
    fn dim(&self) -> usize {
        1
    }

    fn eval_into(&self, t: f64, out: &mut [f64]) {
        out[0] = self.eval(t);
    }
}

/// One sum of sinusoids per control channel.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SinusoidalInput {
    pub channels: Vec<SumOfSinusoids>,
}

impl SinusoidalInput {
    pub fn new(channels: Vec<SumOfSinusoids>) -> Self {
        Self { channels }
    }

    /// Parse `sin(a,w,p)+cos(a,w,p);...`, channels separated by `;`.
    ///
    /// Each term is `sin(...)` or `cos(...)` with amplitude, frequency (rad/s)
    /// and an optional phase. An empty channel (`0`) is the zero signal.
    pub fn parse(spec: &str) -> Result<Self> {
        let bad = |msg: String| Error::Argument(format!("input spec {spec:?}: {msg}"));
        let mut channels = Vec::new();
        for chan in spec.split(';') {
            let chan: String = chan.chars().filter(|c| !c.is_whitespace()).collect();
            if chan.is_empty() {
                return Err(bad("empty channel".into()));
            }
            if chan == "0" {
                channels.push(SumOfSinusoids::default());
                continue;
            }
            let mut terms = Vec::new();
            for term in chan.split('+') {
                let (waveform, rest) = if let Some(r) = term.strip_prefix("sin(") {
                    (Waveform::Sin, r)
                } else if let Some(r) = term.strip_prefix("cos(") {
                    (Waveform::Cos, r)
                } else {
                    return Err(bad(format!("term {term:?} must start with sin( or cos(")));
                };
                let args = rest
                    .strip_suffix(')')
                    .ok_or_else(|| bad(format!("term {term:?} is missing ')'")))?;
                let nums: Vec<f64> = args
                    .split(',')
                    .map(|a| a.parse::<f64>().map_err(|_| bad(format!("{a:?} is not a number"))))
                    .collect::<Result<_>>()?;
                if !(2..=3).contains(&nums.len()) || nums.iter().any(|v| !v.is_finite()) {
                    return Err(bad(format!("term {term:?} needs amplitude,frequency[,phase]")));
                }
                terms.push(SinusoidTerm {
                    amplitude: nums[0],
                    frequency: nums[1],
                    phase: nums.get(2).copied().unwrap_or(0.0),
                    waveform,
                });
            }
            channels.push(SumOfSinusoids::new(terms));
        }
        Ok(Self { channels })
    }
}

impl ControlSignal for SinusoidalInput {
    fn dim(&self) -> usize {
        self.channels.len()
    }

    fn eval_into(&self, t: f64, out: &mut [f64]) {
        for (o, c) in out.iter_mut().zip(&self.channels) {
            *o = c.eval(t);
        }
    }
}

/// Linearly interpolated samples, held constant outside the sampled range.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledSignal {
    times: Vec<f64>,
    values: Vec<f64>,
    dim: usize,
}

impl SampledSignal {
    /// `values` is row-major, one row of length `dim` per time.
    pub fn new(times: Vec<f64>, values: Vec<f64>, dim: usize) -> Result<Self> {
        if times.is_empty() || values.len() != times.len() * dim {
            return Err(Error::Argument(format!(
                "{} samples of dimension {dim} do not match {} values",
                times.len(),
                values.len()
            )));
        }
        if times.iter().chain(&values).any(|v| !v.is_finite()) {
            return Err(Error::Argument("sampled signal contains non-finite values".into()));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Argument("sample times must be strictly increasing".into()));
        }
        Ok(Self { times, values, dim })
    }

    /// Read `t,u1,...,um` rows (header required).
    pub fn from_csv<R: std::io::Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(reader);
        let headers = rdr.headers().map_err(|e| Error::format_at(1, e.to_string()))?.clone();
        if headers.is_empty() || headers[0].trim() != "t" {
            return Err(Error::format_at(1, "sampled signal header must start with t"));
        }
        let dim = headers.len() - 1;
        let mut times = Vec::new();
        let mut values = Vec::new();
        for (row, rec) in rdr.records().enumerate() {
            let line = row + 2;
            let rec = rec.map_err(|e| Error::format_at(line, e.to_string()))?;
            for (c, f) in rec.iter().enumerate() {
                let v: f64 = f
                    .trim()
                    .parse()
                    .map_err(|_| Error::format_at(line, format!("{f:?} is not a number")))?;
                if c == 0 {
                    times.push(v);
                } else {
                    values.push(v);
                }
            }
        }
        Self::new(times, values, dim).map_err(|e| Error::format(e.to_string()))
    }
}

impl ControlSignal for SampledSignal {
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval_into(&self, t: f64, out: &mut [f64]) {
        let d = self.dim;
        let last = self.times.len() - 1;
        let row = |k: usize| &self.values[k * d..(k + 1) * d];
        if t <= self.times[0] {
            out.copy_from_slice(row(0));
            return;
        }
        if t >= self.times[last] {
            out.copy_from_slice(row(last));
            return;
        }
        let k = self.times.partition_point(|&s| s <= t) - 1;
        let (t0, t1) = (self.times[k], self.times[k + 1]);
        let a = (t - t0) / (t1 - t0);
        for ((o, lo), hi) in out.iter_mut().zip(row(k)).zip(row(k + 1)) {
            *o = lo + a * (hi - lo);
        }
    }
}

/// `u ≡ 0` in `ℝᵐ`.
#[derive(Debug, Clone, Copy)]
pub struct ZeroSignal(pub usize);

impl ControlSignal for ZeroSignal {
    fn dim(&self) -> usize {
        self.0
    }

    fn eval_into(&self, _t: f64, out: &mut [f64]) {
        out.fill(0.0);
    }
}
