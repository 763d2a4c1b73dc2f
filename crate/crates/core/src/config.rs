//! Flat `key = value` parameter files and initial-state specs.
//!
//! ```text
//! # 3D pendulum with a tilted target
//! model = so3
//! J1 = 3
//! kR = 2
//! Rd = 0,0,1,0.5      # axis, angle
//! ```
//!
//! Lines are `key = value` pairs; `#` starts a comment. Later values override
//! earlier ones. Unknown keys, and keys that do not belong to the selected
//! model, are errors.

use std::fmt::Write as _;

use thiserror::Error;

use crate::geom::{exp_rot, GeomError, Mat3, PositiveDiagonal, Rotation, TangentStateS2, TangentStateSO3, UnitVector, Vec3};
use crate::models::{Model, ModelError, ModelKind, S2Params, SO3Params, State};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("no model selected (set `model = s2` or `model = so3`)")]
    MissingModel,
    #[error("key `{key}` does not apply to model {model}")]
    WrongModel { key: String, model: ModelKind },
    #[error("bad value `{value}` for `{key}`: {reason}")]
    BadValue { key: String, value: String, reason: String },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Geom(#[from] GeomError),
}

const SHARED_KEYS: &[&str] = &["model", "m", "g", "komega", "kOmega"];
const S2_KEYS: &[&str] = &["l", "kq", "qd"];
const SO3_KEYS: &[&str] = &["kR", "J1", "J2", "J3", "G1", "G2", "G3", "rho1", "rho2", "rho3", "Rd"];

/// Ordered `key = value` entries.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Config {
    entries: Vec<(String, String)>,
}

impl Config {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut config = Config::default();
        for (index, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(ConfigError::Syntax { line: index + 1, message: format!("expected `key = value`, got `{line}`") });
            };
            let (key, value) = (key.trim(), value.trim());
            if key.is_empty() {
                return Err(ConfigError::Syntax { line: index + 1, message: "empty key".into() });
            }
            config.set(key, value)?;
        }
        Ok(config)
    }

    /// Parses a single `key=value` override.
    pub fn parse_pair(pair: &str) -> Result<(String, String), ConfigError> {
        match pair.split_once('=') {
            Some((k, v)) if !k.trim().is_empty() => Ok((k.trim().to_string(), v.trim().to_string())),
            _ => Err(ConfigError::Syntax { line: 0, message: format!("expected key=value, got `{pair}`") }),
        }
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        if !is_known(key) {
            return Err(ConfigError::UnknownKey(key.to_string()));
        }
        let key = canonical(key);
        self.entries.retain(|(k, _)| k != key);
        self.entries.push((key.to_string(), value.to_string()));
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        let key = canonical(key);
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn entries(&self) -> &[(String, String)] {
        &self.entries
    }

    /// Overlays `other` on `self`.
    pub fn merge(&mut self, other: &Config) {
        for (k, v) in &other.entries {
            self.entries.retain(|(key, _)| key != k);
            self.entries.push((k.clone(), v.clone()));
        }
    }

    pub fn model_kind(&self) -> Result<Option<ModelKind>, ConfigError> {
        self.get("model").map(|v| v.parse::<ModelKind>().map_err(ConfigError::from)).transpose()
    }

    /// Builds parameters for `kind` (or the `model` key) on top of the defaults.
    pub fn build_model(&self, kind: Option<ModelKind>) -> Result<Model, ConfigError> {
        let kind = match (kind, self.model_kind()?) {
            (Some(k), _) | (None, Some(k)) => k,
            (None, None) => return Err(ConfigError::MissingModel),
        };
        for (key, _) in &self.entries {
            let foreign = match kind {
                ModelKind::S2 => SO3_KEYS.contains(&key.as_str()),
                ModelKind::SO3 => S2_KEYS.contains(&key.as_str()),
            };
            if foreign {
                return Err(ConfigError::WrongModel { key: key.clone(), model: kind });
            }
        }
        match kind {
            ModelKind::S2 => self.build_s2().map(Model::S2),
            ModelKind::SO3 => self.build_so3().map(Model::SO3),
        }
    }

    fn scalar(&self, key: &str, default: f64) -> Result<f64, ConfigError> {
        match self.get(key) {
            Some(v) => parse_f64(key, v),
            None => Ok(default),
        }
    }

    fn build_s2(&self) -> Result<S2Params, ConfigError> {
        let d = S2Params::default();
        let q_d = match self.get("qd") {
            Some(v) => {
                let x = parse_vec3("qd", v)?;
                // keep an already-unit vector bit for bit so written configs read back exactly
                UnitVector::new(x)
                    .or_else(|_| UnitVector::normalize(x))
                    .map_err(|e| bad("qd", v, &e.to_string()))?
            }
            None => d.q_d,
        };
        Ok(S2Params::new(
            self.scalar("m", d.m)?,
            self.scalar("l", d.l)?,
            self.scalar("g", d.g)?,
            self.scalar("kq", d.k_q)?,
            self.scalar("komega", d.k_omega)?,
            q_d,
        )?)
    }

    fn build_so3(&self) -> Result<SO3Params, ConfigError> {
        let d = SO3Params::default();
        let j = d.inertia.diag();
        let g = d.weights.diag();
        let inertia = PositiveDiagonal::new([
            self.scalar("J1", j[0])?,
            self.scalar("J2", j[1])?,
            self.scalar("J3", j[2])?,
        ])?;
        let weights = PositiveDiagonal::new([
            self.scalar("G1", g[0])?,
            self.scalar("G2", g[1])?,
            self.scalar("G3", g[2])?,
        ])?;
        let rho = Vec3::new(
            self.scalar("rho1", d.rho[0])?,
            self.scalar("rho2", d.rho[1])?,
            self.scalar("rho3", d.rho[2])?,
        );
        let r_d = match self.get("Rd") {
            Some(v) => parse_rotation("Rd", v)?,
            None => d.r_d,
        };
        Ok(SO3Params::new(
            inertia,
            rho,
            self.scalar("m", d.m)?,
            self.scalar("g", d.g)?,
            weights,
            self.scalar("kR", d.k_r)?,
            self.scalar("komega", d.k_omega)?,
            r_d,
        )?)
    }
}

fn is_known(key: &str) -> bool {
    SHARED_KEYS.contains(&key) || S2_KEYS.contains(&key) || SO3_KEYS.contains(&key)
}

/// `kOmega` and `komega` name the same damping gain.
fn canonical(key: &str) -> &str {
    if key == "kOmega" {
        "komega"
    } else {
        key
    }
}

fn bad(key: &str, value: &str, reason: &str) -> ConfigError {
    ConfigError::BadValue { key: key.into(), value: value.into(), reason: reason.into() }
}

fn parse_f64(key: &str, value: &str) -> Result<f64, ConfigError> {
    let x: f64 = value.trim().parse().map_err(|_| bad(key, value, "not a number"))?;
    if !x.is_finite() {
        return Err(bad(key, value, "not finite"));
    }
    Ok(x)
}

fn parse_list(key: &str, value: &str) -> Result<Vec<f64>, ConfigError> {
    value.split(',').map(|s| parse_f64(key, s)).collect()
}

fn parse_vec3(key: &str, value: &str) -> Result<Vec3, ConfigError> {
    let xs = parse_list(key, value)?;
    if xs.len() != 3 {
        return Err(bad(key, value, "expected 3 comma-separated numbers"));
    }
    Ok(Vec3::new(xs[0], xs[1], xs[2]))
}

/// Rotation vector (3 numbers), axis and angle (4), or a row-major matrix (9).
pub fn parse_rotation(key: &str, value: &str) -> Result<Rotation, ConfigError> {
    let xs = parse_list(key, value)?;
    match xs.len() {
        3 => Ok(exp_rot(&Vec3::new(xs[0], xs[1], xs[2]))),
        4 => {
            let axis = UnitVector::normalize(Vec3::new(xs[0], xs[1], xs[2])).map_err(|e| bad(key, value, &e.to_string()))?;
            Ok(exp_rot(&(xs[3] * axis.as_vec())))
        }
        9 => Ok(Rotation::new(Mat3::from_row_slice(&xs))?),
        _ => Err(bad(key, value, "expected 3, 4 or 9 comma-separated numbers")),
    }
}

fn join(xs: impl IntoIterator<Item = f64>) -> String {
    let mut out = String::new();
    for (i, x) in xs.into_iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        write!(out, "{x:?}").unwrap();
    }
    out
}

/// Parameters as `key = value` entries that [`Config::build_model`] maps back
/// to the same values bit for bit.
pub fn model_to_config(model: &Model) -> Config {
    let mut entries = vec![("model".to_string(), model.kind().to_string())];
    let mut push = |k: &str, v: String| entries.push((k.to_string(), v));
    match model {
        Model::S2(p) => {
            push("m", join([p.m]));
            push("l", join([p.l]));
            push("g", join([p.g]));
            push("kq", join([p.k_q]));
            push("komega", join([p.k_omega]));
            push("qd", join(p.q_d.as_vec().iter().copied()));
        }
        Model::SO3(p) => {
            push("m", join([p.m]));
            push("g", join([p.g]));
            push("kR", join([p.k_r]));
            push("komega", join([p.k_omega]));
            for (i, x) in p.inertia.diag().into_iter().enumerate() {
                push(&format!("J{}", i + 1), join([x]));
            }
            for (i, x) in p.weights.diag().into_iter().enumerate() {
                push(&format!("G{}", i + 1), join([x]));
            }
            for (i, x) in p.rho.iter().enumerate() {
                push(&format!("rho{}", i + 1), join([*x]));
            }
            push("Rd", join(p.r_d.matrix().transpose().iter().copied()));
        }
    }
    Config { entries }
}

impl std::fmt::Display for Config {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for (k, v) in &self.entries {
            writeln!(f, "{k} = {v}")?;
        }
        Ok(())
    }
}

/// Parses `x,y,z:wx,wy,wz`. On S² the first part is a direction (normalized)
/// and the velocity must be tangent; on SO(3) it is a rotation vector and
/// the velocity is the body angular velocity. A missing `:…` means at rest.
pub fn parse_state(kind: ModelKind, spec: &str) -> Result<State, ConfigError> {
    let (config, velocity) = match spec.split_once(':') {
        Some((c, v)) => (c, Some(v)),
        None => (spec, None),
    };
    let omega = match velocity {
        Some(v) => parse_vec3("state velocity", v)?,
        None => Vec3::zeros(),
    };
    match kind {
        ModelKind::S2 => {
            let q = UnitVector::normalize(parse_vec3("state direction", config)?)
                .map_err(|e| bad("state direction", config, &e.to_string()))?;
            Ok(State::S2(TangentStateS2::new(q, omega)?))
        }
        ModelKind::SO3 => {
            let r = parse_rotation("state attitude", config)?;
            Ok(State::SO3(TangentStateSO3::new(r, omega)?))
        }
    }
}
