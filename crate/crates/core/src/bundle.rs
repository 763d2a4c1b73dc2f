//! Bundle files: one record per (seed, stored time), seed-major, as JSON
//! lines or CSV, plus a `<path>.meta.json` sidecar with the run settings.
//!
//! JSONL records look like
//! `{"seed":0,"t":0.0,"q":[…],"omega":[…],"speed":…}` on S² and carry
//! `"R"` (nine entries, row-major) instead of `"q"` on SO(3). CSV columns are
//! `seed,t,q1,q2,q3,w1,w2,w3,speed` or `seed,t,R11,…,R33,w1,w2,w3,speed`.
//! Floats are written in shortest round-trip form, so re-importing a bundle
//! reproduces every state bit for bit.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{model_to_config, Config, ConfigError};
use crate::geom::{GeomError, Mat3, Rotation, TangentStateS2, TangentStateSO3, UnitVector, Vec3};
use crate::integrators::step_count;
use crate::manifold::{grid, speed, ManifoldBundle, SeedFailure, SeedTrajectory};
use crate::models::{EquilibriumId, Model, ModelError, ModelKind, State};

pub const S2_CSV_HEADER: [&str; 9] = ["seed", "t", "q1", "q2", "q3", "w1", "w2", "w3", "speed"];
pub const SO3_CSV_HEADER: [&str; 15] = [
    "seed", "t", "R11", "R12", "R13", "R21", "R22", "R23", "R31", "R32", "R33", "w1", "w2", "w3", "speed",
];

#[derive(Debug, Error)]
pub enum BundleError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("record {record}: {message}")]
    Record { record: usize, message: String },
    #[error("metadata: {0}")]
    Meta(String),
    #[error("unknown bundle format `{0}` (expected jsonl or csv)")]
    UnknownFormat(String),
    #[error("bundle does not match its metadata: {0}")]
    Inconsistent(String),
    #[error("invalid state for seed {seed} at t = {t}: {source}")]
    InvalidState {
        seed: usize,
        t: f64,
        #[source]
        source: GeomError,
    },
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BundleFormat {
    Jsonl,
    Csv,
}

impl BundleFormat {
    /// `.csv` means CSV; anything else is JSON lines.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("csv") => BundleFormat::Csv,
            _ => BundleFormat::Jsonl,
        }
    }
}

impl FromStr for BundleFormat {
    type Err = BundleError;

    fn from_str(s: &str) -> Result<Self, BundleError> {
        match s {
            "jsonl" => Ok(BundleFormat::Jsonl),
            "csv" => Ok(BundleFormat::Csv),
            other => Err(BundleError::UnknownFormat(other.to_string())),
        }
    }
}

impl fmt::Display for BundleFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BundleFormat::Jsonl => "jsonl",
            BundleFormat::Csv => "csv",
        })
    }
}

/// One stored state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Record {
    pub seed: usize,
    pub t: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<[f64; 3]>,
    #[serde(rename = "R", default, skip_serializing_if = "Option::is_none")]
    pub r: Option<[f64; 9]>,
    pub omega: [f64; 3],
    pub speed: f64,
}

impl Record {
    fn from_state(seed: usize, t: f64, state: &State) -> Self {
        let (q, r, omega) = match state {
            State::S2(s) => (Some((*s.q.as_vec()).into()), None, s.omega),
            State::SO3(s) => {
                let mut rows = [0.0; 9];
                for (k, x) in s.r.matrix().transpose().iter().enumerate() {
                    rows[k] = *x;
                }
                (None, Some(rows), s.omega)
            }
        };
        Record { seed, t, q, r, omega: omega.into(), speed: speed(state) }
    }

    fn to_state(&self, kind: ModelKind) -> Result<State, GeomError> {
        let omega = Vec3::from(self.omega);
        match (kind, self.q, self.r) {
            (ModelKind::S2, Some(q), None) => Ok(State::S2(TangentStateS2::new(UnitVector::new(Vec3::from(q))?, omega)?)),
            (ModelKind::SO3, None, Some(r)) => {
                Ok(State::SO3(TangentStateSO3::new(Rotation::new(Mat3::from_row_slice(&r))?, omega)?))
            }
            _ => Err(GeomError::NonFinite),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FailureMeta {
    pub seed: usize,
    pub step: usize,
    pub error: String,
}

/// Contents of the `.meta.json` sidecar.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BundleMeta {
    pub model: String,
    pub equilibrium: String,
    pub delta: f64,
    pub h: f64,
    #[serde(rename = "T")]
    pub duration: f64,
    pub stride: usize,
    pub points: usize,
    /// Model parameters as configuration keys.
    pub params: BTreeMap<String, String>,
    #[serde(default)]
    pub failures: Vec<FailureMeta>,
}

impl BundleMeta {
    pub fn from_bundle(bundle: &ManifoldBundle) -> Self {
        BundleMeta {
            model: bundle.model.kind().to_string(),
            equilibrium: bundle.equilibrium.to_string(),
            delta: bundle.delta,
            h: bundle.h,
            duration: bundle.duration,
            stride: bundle.stride,
            points: bundle.trajectories.len(),
            params: model_to_config(&bundle.model).entries().iter().cloned().collect(),
            failures: bundle
                .failures()
                .map(|(seed, f)| FailureMeta { seed, step: f.step, error: f.message.clone() })
                .collect(),
        }
    }

    pub fn parse(text: &str) -> Result<Self, BundleError> {
        serde_json::from_str(text).map_err(|e| BundleError::Meta(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("metadata serializes");
        s.push('\n');
        s
    }

    pub fn kind(&self) -> Result<ModelKind, BundleError> {
        Ok(self.model.parse()?)
    }

    pub fn build_model(&self) -> Result<Model, BundleError> {
        let kind = self.kind()?;
        let mut config = Config::default();
        for (k, v) in &self.params {
            config.set(k, v)?;
        }
        Ok(config.build_model(Some(kind))?)
    }

    pub fn equilibrium_id(&self) -> Result<EquilibriumId, BundleError> {
        Ok(self.equilibrium.parse()?)
    }

    /// Stored time grid implied by `T`, `h` and `stride`.
    pub fn grid(&self) -> Result<Vec<f64>, BundleError> {
        if self.stride == 0 {
            return Err(BundleError::Meta("stride must be positive".into()));
        }
        let n = step_count(self.duration, self.h).map_err(|e| BundleError::Meta(e.to_string()))?;
        // guards against absurd grids from corrupted files
        if n / self.stride > 100_000_000 {
            return Err(BundleError::Meta(format!("{n} steps is too many")));
        }
        Ok(grid(n, self.stride, self.h))
    }
}

/// Sidecar path for a bundle file.
pub fn meta_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".meta.json");
    PathBuf::from(s)
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> BundleError + '_ {
    move |source| BundleError::Io { path: path.to_path_buf(), source }
}

fn records(bundle: &ManifoldBundle) -> impl Iterator<Item = Record> + '_ {
    bundle.trajectories.iter().enumerate().flat_map(move |(seed, traj)| {
        traj.states.iter().zip(&bundle.times).map(move |(s, &t)| Record::from_state(seed, t, s))
    })
}

fn check_states(bundle: &ManifoldBundle) -> Result<(), BundleError> {
    for (seed, traj) in bundle.trajectories.iter().enumerate() {
        for (state, &t) in traj.states.iter().zip(&bundle.times) {
            let checked = match state {
                State::S2(s) => UnitVector::new(*s.q.as_vec()).and_then(|q| TangentStateS2::new(q, s.omega)).map(|_| ()),
                State::SO3(s) => Rotation::new(*s.r.matrix()).map(|_| ()),
            };
            checked.map_err(|source| BundleError::InvalidState { seed, t, source })?;
        }
    }
    Ok(())
}

/// Writes the bundle in `format` to any writer.
pub fn write_records<W: Write>(bundle: &ManifoldBundle, format: BundleFormat, out: W) -> Result<(), std::io::Error> {
    write_record_stream(bundle.model.kind(), records(bundle), format, out)
}

/// Writes one trajectory as seed 0, in the same record layout as a bundle.
pub fn write_states<W: Write>(
    kind: ModelKind,
    times: &[f64],
    states: &[State],
    format: BundleFormat,
    out: W,
) -> Result<(), std::io::Error> {
    let records = times.iter().zip(states).map(|(&t, s)| Record::from_state(0, t, s));
    write_record_stream(kind, records, format, out)
}

fn write_record_stream<W: Write>(
    kind: ModelKind,
    records: impl Iterator<Item = Record>,
    format: BundleFormat,
    out: W,
) -> Result<(), std::io::Error> {
    match format {
        BundleFormat::Jsonl => {
            let mut out = BufWriter::new(out);
            for record in records {
                serde_json::to_writer(&mut out, &record)?;
                out.write_all(b"\n")?;
            }
            out.flush()
        }
        BundleFormat::Csv => {
            let mut w = csv::Writer::from_writer(out);
            match kind {
                ModelKind::S2 => w.write_record(S2_CSV_HEADER)?,
                ModelKind::SO3 => w.write_record(SO3_CSV_HEADER)?,
            }
            for record in records {
                let mut row = vec![record.seed.to_string(), fmt_f64(record.t)];
                row.extend(record.q.iter().flatten().chain(record.r.iter().flatten()).map(|x| fmt_f64(*x)));
                row.extend(record.omega.iter().map(|x| fmt_f64(*x)));
                row.push(fmt_f64(record.speed));
                w.write_record(&row)?;
            }
            w.flush()
        }
    }
}

/// Shortest decimal that parses back to the same `f64`.
fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}

/// Writes the bundle and its sidecar. States are validated first.
pub fn export_bundle(bundle: &ManifoldBundle, path: &Path, format: BundleFormat) -> Result<(), BundleError> {
    check_states(bundle)?;
    let file = fs::File::create(path).map_err(io_err(path))?;
    write_records(bundle, format, file).map_err(io_err(path))?;
    let meta = meta_path(path);
    fs::write(&meta, BundleMeta::from_bundle(bundle).to_json()).map_err(io_err(&meta))
}

pub fn parse_jsonl_records<R: BufRead>(input: R) -> Result<Vec<Record>, BundleError> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line.map_err(|e| BundleError::Record { record: i + 1, message: e.to_string() })?;
        if line.trim().is_empty() {
            continue;
        }
        let record: Record =
            serde_json::from_str(&line).map_err(|e| BundleError::Record { record: i + 1, message: e.to_string() })?;
        out.push(record);
    }
    Ok(out)
}

pub fn parse_csv_records<R: std::io::Read>(input: R) -> Result<Vec<Record>, BundleError> {
    let mut reader = csv::Reader::from_reader(input);
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| BundleError::Record { record: 0, message: e.to_string() })?
        .iter()
        .map(str::to_string)
        .collect();
    let kind = if header == S2_CSV_HEADER {
        ModelKind::S2
    } else if header == SO3_CSV_HEADER {
        ModelKind::SO3
    } else {
        return Err(BundleError::Record { record: 0, message: format!("unexpected header {header:?}") });
    };
    let mut out = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let record_no = i + 1;
        let row = row.map_err(|e| BundleError::Record { record: record_no, message: e.to_string() })?;
        let bad = |message: String| BundleError::Record { record: record_no, message };
        if row.len() != header.len() {
            return Err(bad(format!("expected {} fields, got {}", header.len(), row.len())));
        }
        let seed: usize = row[0].trim().parse().map_err(|_| bad(format!("bad seed `{}`", &row[0])))?;
        let nums: Vec<f64> = row
            .iter()
            .skip(1)
            .map(|f| f.trim().parse::<f64>().map_err(|_| bad(format!("bad number `{f}`"))))
            .collect::<Result<_, _>>()?;
        let n = nums.len();
        let omega = [nums[n - 4], nums[n - 3], nums[n - 2]];
        let (q, r) = match kind {
            ModelKind::S2 => (Some([nums[1], nums[2], nums[3]]), None),
            ModelKind::SO3 => {
                let mut m = [0.0; 9];
                m.copy_from_slice(&nums[1..10]);
                (None, Some(m))
            }
        };
        out.push(Record { seed, t: nums[0], q, r, omega, speed: nums[n - 1] });
    }
    Ok(out)
}

/// Rebuilds a bundle from its metadata and records.
pub fn assemble(meta: &BundleMeta, records: &[Record]) -> Result<ManifoldBundle, BundleError> {
    let model = meta.build_model()?;
    let kind = model.kind();
    let equilibrium = meta.equilibrium_id()?;
    equilibrium.check_model(kind)?;
    let times = meta.grid()?;
    if meta.points > records.len() {
        return Err(BundleError::Inconsistent(format!("{} seeds but only {} records", meta.points, records.len())));
    }
    let mut trajectories: Vec<SeedTrajectory> =
        (0..meta.points).map(|_| SeedTrajectory { states: Vec::new(), failure: None }).collect();
    for f in &meta.failures {
        let traj = trajectories
            .get_mut(f.seed)
            .ok_or_else(|| BundleError::Inconsistent(format!("failure listed for missing seed {}", f.seed)))?;
        traj.failure = Some(SeedFailure { step: f.step, message: f.error.clone() });
    }
    let mut expected_seed = 0;
    for (i, record) in records.iter().enumerate() {
        let bad = |message: String| BundleError::Record { record: i + 1, message };
        if record.seed >= meta.points {
            return Err(bad(format!("seed {} out of range", record.seed)));
        }
        if record.seed < expected_seed {
            return Err(bad("records are not in seed order".into()));
        }
        expected_seed = record.seed;
        let traj = &mut trajectories[record.seed];
        let k = traj.states.len();
        match times.get(k) {
            Some(&t) if t.to_bits() == record.t.to_bits() => {}
            _ => return Err(bad(format!("unexpected time {} for seed {}", record.t, record.seed))),
        }
        let state = record
            .to_state(kind)
            .map_err(|source| BundleError::InvalidState { seed: record.seed, t: record.t, source })?;
        traj.states.push(state);
    }
    for (seed, traj) in trajectories.iter().enumerate() {
        let complete = traj.states.len() == times.len();
        if complete == traj.failure.is_some() || traj.states.is_empty() {
            return Err(BundleError::Inconsistent(format!(
                "seed {seed} has {} of {} states and {} failure record",
                traj.states.len(),
                times.len(),
                if traj.failure.is_some() { "a" } else { "no" }
            )));
        }
    }
    Ok(ManifoldBundle {
        model,
        equilibrium,
        delta: meta.delta,
        h: meta.h,
        duration: meta.duration,
        stride: meta.stride,
        times,
        trajectories,
    })
}

/// Reads a bundle and its sidecar; the format follows the file extension.
pub fn import_bundle(path: &Path) -> Result<ManifoldBundle, BundleError> {
    let meta_file = meta_path(path);
    let meta = BundleMeta::parse(&fs::read_to_string(&meta_file).map_err(io_err(&meta_file))?)?;
    let file = fs::File::open(path).map_err(io_err(path))?;
    let records = match BundleFormat::from_path(path) {
        BundleFormat::Jsonl => parse_jsonl_records(BufReader::new(file))?,
        BundleFormat::Csv => parse_csv_records(BufReader::new(file))?,
    };
    assemble(&meta, &records)
}
