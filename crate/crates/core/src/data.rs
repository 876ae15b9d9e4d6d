//! Sampled controlled trajectories and the dataset CSV format.
//!
//! A dataset file has the header `traj_id,t,x1,...,xn,u1,...,um` followed by
//! rows grouped by `traj_id`, ascending in `t` within each group. Numbers are
//! written with 17 significant digits so that a save/load cycle reproduces
//! every stored double exactly.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance on the spacing of a uniform time grid.
pub const GRID_TOLERANCE: f64 = 1e-9;

/// A uniformly sampled state trajectory with aligned control samples.
///
/// States and controls are stored row-major: sample `k` occupies
/// `states[k * n..(k + 1) * n]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TrajectoryRepr", into = "TrajectoryRepr")]
pub struct SampledTrajectory {
    times: Vec<f64>,
    states: Vec<f64>,
    controls: Vec<f64>,
    n: usize,
    m: usize,
}

#[derive(Serialize, Deserialize)]
struct TrajectoryRepr {
    n: usize,
    m: usize,
    times: Vec<f64>,
    states: Vec<f64>,
    controls: Vec<f64>,
}

impl TryFrom<TrajectoryRepr> for SampledTrajectory {
    type Error = Error;

    fn try_from(r: TrajectoryRepr) -> Result<Self> {
        SampledTrajectory::from_flat(r.times, r.states, r.controls, r.n, r.m)
    }
}

impl From<SampledTrajectory> for TrajectoryRepr {
    fn from(t: SampledTrajectory) -> Self {
        TrajectoryRepr {
            n: t.n,
            m: t.m,
            times: t.times,
            states: t.states,
            controls: t.controls,
        }
    }
}

impl SampledTrajectory {
    /// Build from one row per sample.
    pub fn new(times: Vec<f64>, states: &[Vec<f64>], controls: &[Vec<f64>]) -> Result<Self> {
        let n = states.first().map_or(0, Vec::len);
        let m = controls.first().map_or(0, Vec::len);
        if states.len() != times.len() || controls.len() != times.len() {
            return Err(Error::Argument(format!(
                "{} times, {} states and {} controls do not align",
                times.len(),
                states.len(),
                controls.len()
            )));
        }
        for (k, (s, u)) in states.iter().zip(controls).enumerate() {
            if s.len() != n || u.len() != m {
                return Err(Error::Argument(format!(
                    "sample {k} has state/control dimension {}/{} instead of {n}/{m}",
                    s.len(),
                    u.len()
                )));
            }
        }
        Self::from_flat(times, states.concat(), controls.concat(), n, m)
    }

    /// Build from row-major flat buffers.
    pub fn from_flat(times: Vec<f64>, states: Vec<f64>, controls: Vec<f64>, n: usize, m: usize) -> Result<Self> {
        let len = times.len();
        if n == 0 {
            return Err(Error::Argument("state dimension must be at least 1".into()));
        }
        if len < 3 {
            return Err(Error::Argument(format!(
                "a trajectory needs at least 3 samples (N >= 2), got {len}"
            )));
        }
        if states.len() != len * n || controls.len() != len * m {
            return Err(Error::Argument(format!(
                "buffer sizes {}/{} do not match {len} samples of n = {n}, m = {m}",
                states.len(),
                controls.len()
            )));
        }
        if let Some(k) = times.iter().position(|t| !t.is_finite()) {
            return Err(Error::Argument(format!("non-finite time at sample {k}")));
        }
        if let Some(idx) = states.iter().position(|v| !v.is_finite()) {
            return Err(Error::Argument(format!("non-finite state at sample {}", idx / n)));
        }
        if let Some(idx) = controls.iter().position(|v| !v.is_finite()) {
            return Err(Error::Argument(format!("non-finite control at sample {}", idx / m.max(1))));
        }
        if let Some(k) = first_nonuniform_step(&times) {
            return Err(Error::Argument(format!(
                "time grid is not uniform at sample {k} (relative tolerance {GRID_TOLERANCE})"
            )));
        }
        Ok(Self {
            times,
            states,
            controls,
            n,
            m,
        })
    }

    pub fn state_dim(&self) -> usize {
        self.n
    }

    pub fn control_dim(&self) -> usize {
        self.m
    }

    /// Number of samples `N + 1`.
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn states_flat(&self) -> &[f64] {
        &self.states
    }

    pub fn controls_flat(&self) -> &[f64] {
        &self.controls
    }

    pub fn state(&self, k: usize) -> &[f64] {
        &self.states[k * self.n..(k + 1) * self.n]
    }

    pub fn control(&self, k: usize) -> &[f64] {
        &self.controls[k * self.m..(k + 1) * self.m]
    }

    pub fn initial_state(&self) -> &[f64] {
        self.state(0)
    }

    pub fn final_state(&self) -> &[f64] {
        self.state(self.len() - 1)
    }

    /// Uniform spacing `h = T / N`.
    pub fn spacing(&self) -> f64 {
        self.duration() / (self.len() - 1) as f64
    }

    /// `T = t_N - t_0`.
    pub fn duration(&self) -> f64 {
        self.times[self.len() - 1] - self.times[0]
    }
}

/// Index of the first sample whose preceding step deviates from the mean
/// spacing by more than [`GRID_TOLERANCE`], or whose step is not positive.
fn first_nonuniform_step(times: &[f64]) -> Option<usize> {
    let steps = times.len() - 1;
    let h = (times[steps] - times[0]) / steps as f64;
    if h.is_nan() || h <= 0.0 {
        return Some(1);
    }
    times
        .windows(2)
        .position(|w| ((w[1] - w[0]) - h).abs() > GRID_TOLERANCE * h)
        .map(|k| k + 1)
}

/// An ordered collection of trajectories sharing state and control dimensions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DatasetRepr", into = "DatasetRepr")]
pub struct Dataset {
    trajectories: Vec<SampledTrajectory>,
    ids: Vec<String>,
    n: usize,
    m: usize,
}

#[derive(Serialize, Deserialize)]
struct DatasetRepr {
    ids: Vec<String>,
    trajectories: Vec<SampledTrajectory>,
}

impl TryFrom<DatasetRepr> for Dataset {
    type Error = Error;

    fn try_from(r: DatasetRepr) -> Result<Self> {
        Dataset::with_ids(r.trajectories, r.ids)
    }
}

impl From<Dataset> for DatasetRepr {
    fn from(d: Dataset) -> Self {
        DatasetRepr {
            ids: d.ids,
            trajectories: d.trajectories,
        }
    }
}

impl Dataset {
    /// Trajectories are labelled `0..M` in order.
    pub fn new(trajectories: Vec<SampledTrajectory>) -> Result<Self> {
        let ids = (0..trajectories.len()).map(|i| i.to_string()).collect();
        Self::with_ids(trajectories, ids)
    }

    pub fn with_ids(trajectories: Vec<SampledTrajectory>, ids: Vec<String>) -> Result<Self> {
        let first = trajectories
            .first()
            .ok_or_else(|| Error::format("a dataset needs at least one trajectory"))?;
        let (n, m) = (first.state_dim(), first.control_dim());
        if ids.len() != trajectories.len() {
            return Err(Error::Argument(format!(
                "{} ids for {} trajectories",
                ids.len(),
                trajectories.len()
            )));
        }
        for (i, t) in trajectories.iter().enumerate() {
            if t.state_dim() != n || t.control_dim() != m {
                return Err(Error::format(format!(
                    "trajectory {} has n = {}, m = {} but trajectory {} has n = {n}, m = {m}",
                    ids[i],
                    t.state_dim(),
                    t.control_dim(),
                    ids[0]
                )));
            }
        }
        for (i, id) in ids.iter().enumerate() {
            if id.is_empty() || id.contains([',', '\n', '\r']) {
                return Err(Error::format(format!("invalid trajectory id {id:?}")));
            }
            if ids[..i].contains(id) {
                return Err(Error::format(format!("duplicate trajectory id {id:?}")));
            }
        }
        Ok(Self {
            trajectories,
            ids,
            n,
            m,
        })
    }

    pub fn trajectories(&self) -> &[SampledTrajectory] {
        &self.trajectories
    }

    pub fn trajectory(&self, i: usize) -> &SampledTrajectory {
        &self.trajectories[i]
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    /// Number of trajectories `M`.
    pub fn len(&self) -> usize {
        self.trajectories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trajectories.is_empty()
    }

    pub fn state_dim(&self) -> usize {
        self.n
    }

    pub fn control_dim(&self) -> usize {
        self.m
    }

    /// Reorder trajectories so that new position `k` holds old trajectory `perm[k]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        let mut seen = vec![false; self.len()];
        if perm.len() != self.len() || perm.iter().any(|&p| p >= self.len() || std::mem::replace(&mut seen[p], true)) {
            return Err(Error::Argument("not a permutation of the trajectory indices".into()));
        }
        Self::with_ids(
            perm.iter().map(|&p| self.trajectories[p].clone()).collect(),
            perm.iter().map(|&p| self.ids[p].clone()).collect(),
        )
    }

    /// The trajectories at `indices`, in that order, keeping their ids.
    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        if let Some(&bad) = indices.iter().find(|&&i| i >= self.len()) {
            return Err(Error::Argument(format!("trajectory index {bad} out of range for M = {}", self.len())));
        }
        Self::with_ids(
            indices.iter().map(|&i| self.trajectories[i].clone()).collect(),
            indices.iter().map(|&i| self.ids[i].clone()).collect(),
        )
    }
}

/// Format a double with 17 significant digits.
pub(crate) fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// CSV header for a dataset of the given dimensions.
pub fn csv_header(n: usize, m: usize) -> String {
    let mut cols = vec!["traj_id".to_string(), "t".to_string()];
    cols.extend((1..=n).map(|i| format!("x{i}")));
    cols.extend((1..=m).map(|j| format!("u{j}")));
    cols.join(",")
}

pub fn write_dataset<W: Write>(ds: &Dataset, mut w: W) -> std::io::Result<()> {
    writeln!(w, "{}", csv_header(ds.state_dim(), ds.control_dim()))?;
    let mut line = String::new();
    for (id, traj) in ds.ids.iter().zip(&ds.trajectories) {
        for k in 0..traj.len() {
            line.clear();
            line.push_str(id);
            line.push(',');
            line.push_str(&fmt_f64(traj.times[k]));
            for v in traj.state(k).iter().chain(traj.control(k)) {
                line.push(',');
                line.push_str(&fmt_f64(*v));
            }
            line.push('\n');
            w.write_all(line.as_bytes())?;
        }
    }
    w.flush()
}

pub fn save_dataset(ds: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_dataset(ds, BufWriter::new(file)).map_err(|e| Error::io(path, e))
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_dataset(file).map_err(|e| e.with_path(path))
}

/// Parse the dataset CSV contract.
pub fn read_dataset<R: std::io::Read>(reader: R) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| Error::format_at(1, format!("unreadable header: {e}")))?
        .clone();
    let (n, m) = parse_header(&headers)?;

    struct Group {
        id: String,
        times: Vec<f64>,
        states: Vec<f64>,
        controls: Vec<f64>,
        first_line: usize,
    }
    let mut groups: Vec<Group> = Vec::new();
    for (row, record) in rdr.records().enumerate() {
        let line = row + 2;
        let record = record.map_err(|e| Error::format_at(line, e.to_string()))?;
        if record.len() != 2 + n + m {
            return Err(Error::format_at(
                line,
                format!("expected {} fields, found {}", 2 + n + m, record.len()),
            ));
        }
        let id = record[0].trim();
        let mut values = Vec::with_capacity(1 + n + m);
        for (c, field) in record.iter().enumerate().skip(1) {
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|_| Error::format_at(line, format!("column {}: {field:?} is not a number", headers[c].trim())))?;
            if !v.is_finite() {
                return Err(Error::format_at(line, format!("column {}: non-finite value", headers[c].trim())));
            }
            values.push(v);
        }
        let starts_new = groups.last().is_none_or(|g| g.id != id);
        if starts_new {
            if let Some(g) = groups.iter().find(|g| g.id == id) {
                return Err(Error::format_at(
                    line,
                    format!("rows of trajectory {id:?} are not contiguous (group began on line {})", g.first_line),
                ));
            }
            groups.push(Group {
                id: id.to_string(),
                times: Vec::new(),
                states: Vec::new(),
                controls: Vec::new(),
                first_line: line,
            });
        }
        let g = groups.last_mut().expect("group pushed above");
        g.times.push(values[0]);
        g.states.extend_from_slice(&values[1..=n]);
        g.controls.extend_from_slice(&values[1 + n..]);
    }

    let mut ids = Vec::with_capacity(groups.len());
    let mut trajectories = Vec::with_capacity(groups.len());
    for g in groups {
        if g.times.len() < 3 {
            return Err(Error::format_at(
                g.first_line,
                format!("trajectory {:?} has {} samples; at least 3 are required", g.id, g.times.len()),
            ));
        }
        if let Some(k) = first_nonuniform_step(&g.times) {
            return Err(Error::format_at(
                g.first_line + k,
                format!("time grid of trajectory {:?} is not uniform", g.id),
            ));
        }
        let traj = SampledTrajectory::from_flat(g.times, g.states, g.controls, n, m)
            .map_err(|e| Error::format_at(g.first_line, e.to_string()))?;
        ids.push(g.id);
        trajectories.push(traj);
    }
    Dataset::with_ids(trajectories, ids)
}

fn parse_header(headers: &csv::StringRecord) -> Result<(usize, usize)> {
    let cols: Vec<&str> = headers.iter().map(str::trim).collect();
    if cols.len() < 3 || cols[0] != "traj_id" || cols[1] != "t" {
        return Err(Error::format_at(1, "header must start with traj_id,t"));
    }
    let n = cols[2..]
        .iter()
        .enumerate()
        .take_while(|(i, c)| **c == format!("x{}", i + 1))
        .count();
    let m = cols.len() - 2 - n;
    if n == 0 {
        return Err(Error::format_at(1, "header has no state columns x1..xn"));
    }
    for (j, c) in cols[2 + n..].iter().enumerate() {
        if *c != format!("u{}", j + 1) {
            return Err(Error::format_at(1, format!("unexpected column {c:?}; expected u{}", j + 1)));
        }
    }
    Ok((n, m))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn small_traj(x0: f64, n: usize) -> SampledTrajectory {
        let times = vec![0.0, 0.5, 1.0];
        let states: Vec<Vec<f64>> = (0..3).map(|k| vec![x0 + k as f64; n]).collect();
        let controls: Vec<Vec<f64>> = (0..3).map(|k| vec![k as f64 * 0.1]).collect();
        SampledTrajectory::new(times, &states, &controls).unwrap()
    }

    #[test]
    fn loads_minimal_file() {
        let csv = "traj_id,t,x1,x2,u1\n7,0,0,0,1\n7,0.5,1,1,1\n7,1,2,2,1\n";
        let ds = read_dataset(csv.as_bytes()).unwrap();
        assert_eq!(ds.len(), 1);
        assert_eq!(ds.state_dim(), 2);
        assert_eq!(ds.control_dim(), 1);
        assert_eq!(ds.trajectory(0).len(), 3);
        assert_eq!(ds.ids(), &["7".to_string()]);
        assert_eq!(ds.trajectory(0).final_state(), &[2.0, 2.0]);
    }

    #[test]
    fn keeps_first_appearance_order() {
        let csv = "traj_id,t,x1,u1\nb,0,0,0\nb,1,0,0\nb,2,0,0\na,0,1,0\na,1,1,0\na,2,1,0\n";
        let ds = read_dataset(csv.as_bytes()).unwrap();
        assert_eq!(ds.ids(), &["b".to_string(), "a".to_string()]);
        assert_eq!(ds.trajectory(1).initial_state(), &[1.0]);
    }

    #[test]
    fn rejects_contract_violations() {
        // differing n across rows
        let csv = "traj_id,t,x1,x2,u1\n0,0,0,0,1\n0,0.5,1,1\n0,1,2,2,1\n";
        assert!(matches!(read_dataset(csv.as_bytes()), Err(Error::Format { line: Some(3), .. })));
        // non-uniform grid, offending row reported
        let csv = "traj_id,t,x1,u1\n0,0,0,0\n0,0.5,0,0\n0,1.2,0,0\n0,1.5,0,0\n";
        let err = read_dataset(csv.as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Format { line: Some(4), .. }), "{err}");
        // non-finite value
        let csv = "traj_id,t,x1,u1\n0,0,NaN,0\n0,1,0,0\n0,2,0,0\n";
        assert!(matches!(read_dataset(csv.as_bytes()), Err(Error::Format { line: Some(2), .. })));
        // interleaved groups
        let csv = "traj_id,t,x1,u1\n0,0,0,0\n1,0,0,0\n0,1,0,0\n";
        assert!(read_dataset(csv.as_bytes()).is_err());
        // too short
        let csv = "traj_id,t,x1,u1\n0,0,0,0\n0,1,0,0\n";
        assert!(read_dataset(csv.as_bytes()).is_err());
        // bad header
        assert!(read_dataset("id,t,x1\n".as_bytes()).is_err());
        assert!(read_dataset("traj_id,t,x1,v1\n".as_bytes()).is_err());
        // empty
        assert!(read_dataset("traj_id,t,x1,u1\n".as_bytes()).is_err());
    }

    #[test]
    fn construction_invariants() {
        assert!(Dataset::new(vec![]).is_err());
        assert!(SampledTrajectory::new(vec![0.0, 1.0], &[vec![0.0], vec![0.0]], &[vec![], vec![]]).is_err());
        let err = Dataset::new(vec![small_traj(0.0, 1), small_traj(0.0, 2)]).unwrap_err();
        assert!(matches!(err, Error::Format { .. }));
        assert!(SampledTrajectory::new(
            vec![0.0, 1.0, 2.0],
            &[vec![0.0], vec![f64::INFINITY], vec![0.0]],
            &[vec![], vec![], vec![]]
        )
        .is_err());
    }

    #[test]
    fn header_is_fixed() {
        let ds = Dataset::new(vec![small_traj(0.0, 2)]).unwrap();
        let mut buf = Vec::new();
        write_dataset(&ds, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("traj_id,t,x1,x2,u1\n"));
        assert!(!text.contains('\r'));
        assert_eq!(text.lines().count(), 4);
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ds.csv");
        let ds = Dataset::new(vec![small_traj(0.25, 2), small_traj(-1.0 / 3.0, 2)]).unwrap();
        save_dataset(&ds, &path).unwrap();
        assert_eq!(load_dataset(&path).unwrap(), ds);
        assert!(matches!(load_dataset(dir.path().join("missing.csv")), Err(Error::Io { .. })));
    }

    #[test]
    fn permutation() {
        let ds = Dataset::new(vec![small_traj(0.0, 1), small_traj(1.0, 1), small_traj(2.0, 1)]).unwrap();
        let p = ds.permuted(&[2, 0, 1]).unwrap();
        assert_eq!(p.trajectory(0), ds.trajectory(2));
        assert_eq!(p.ids()[0], "2");
        assert!(ds.permuted(&[0, 0, 1]).is_err());
    }

    fn arb_dataset() -> impl Strategy<Value = Dataset> {
        (1usize..4, 0usize..3, 1usize..4).prop_flat_map(|(n, m, count)| {
            let traj = (3usize..8, 1e-3f64..2.0, -10.0f64..10.0).prop_flat_map(move |(len, h, t0)| {
                (
                    prop::collection::vec(any::<f64>().prop_filter("finite", |v| v.is_finite()), len * n),
                    prop::collection::vec(-1e6f64..1e6, len * m),
                )
                    .prop_map(move |(s, u)| {
                        let times = (0..len).map(|k| t0 + k as f64 * h).collect();
                        SampledTrajectory::from_flat(times, s, u, n, m).unwrap()
                    })
            });
            prop::collection::vec(traj, count).prop_map(|ts| Dataset::new(ts).unwrap())
        })
    }

    proptest! {
        #[test]
        fn save_then_load_is_identity(ds in arb_dataset()) {
            let mut buf = Vec::new();
            write_dataset(&ds, &mut buf).unwrap();
            let back = read_dataset(buf.as_slice()).unwrap();
            for (a, b) in ds.trajectories().iter().zip(back.trajectories()) {
                prop_assert_eq!(a.times().iter().map(|v| v.to_bits()).collect::<Vec<_>>(), b.times().iter().map(|v| v.to_bits()).collect::<Vec<_>>());
                prop_assert_eq!(a.states_flat().iter().map(|v| v.to_bits()).collect::<Vec<_>>(), b.states_flat().iter().map(|v| v.to_bits()).collect::<Vec<_>>());
                prop_assert_eq!(a.controls_flat().iter().map(|v| v.to_bits()).collect::<Vec<_>>(), b.controls_flat().iter().map(|v| v.to_bits()).collect::<Vec<_>>());
            }
        }

        #[test]
        fn grid_perturbations_are_rejected(k in 1usize..9, rel in 2e-9f64..1e-2, sign in prop::bool::ANY) {
            let h = 0.05;
            let mut times: Vec<f64> = (0..10).map(|i| i as f64 * h).collect();
            // moving an interior sample (or the last one) breaks uniformity
            times[k] += if sign { rel * h } else { -rel * h } * 2.0;
            let s = vec![0.0; 10];
            prop_assert!(SampledTrajectory::from_flat(times, s, vec![], 1, 0).is_err());
        }
    }
}
