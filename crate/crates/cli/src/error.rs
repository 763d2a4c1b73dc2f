use std::fmt;

use attitude_manifolds::bundle::BundleError;
use attitude_manifolds::config::ConfigError;
use attitude_manifolds::integrators::IntegratorError;
use attitude_manifolds::manifold::ManifoldError;
use attitude_manifolds::models::ModelError;
use attitude_manifolds::spectral::SpectralError;

/// Exit code 2: bad arguments, parameters or input files.
pub const USAGE: u8 = 2;
/// Exit code 1: a computation failed.
pub const NUMERIC: u8 = 1;

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        CliError { code: USAGE, message: message.into() }
    }

    pub fn numeric(message: impl Into<String>) -> Self {
        CliError { code: NUMERIC, message: message.into() }
    }

    /// Prefixes the message, e.g. with the flag or file involved.
    pub fn context(mut self, prefix: impl fmt::Display) -> Self {
        self.message = format!("{prefix}: {}", self.message);
        self
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::usage(e.to_string())
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        CliError::usage(e.to_string())
    }
}

impl From<SpectralError> for CliError {
    fn from(e: SpectralError) -> Self {
        CliError::numeric(e.to_string())
    }
}

impl From<IntegratorError> for CliError {
    fn from(e: IntegratorError) -> Self {
        match e {
            IntegratorError::InvalidStep(_) | IntegratorError::NotMultiple { .. } | IntegratorError::StepTooLarge(_) => {
                CliError::usage(e.to_string())
            }
            IntegratorError::NewtonDiverged { .. } | IntegratorError::AtStep { .. } => CliError::numeric(e.to_string()),
        }
    }
}

impl From<ManifoldError> for CliError {
    fn from(e: ManifoldError) -> Self {
        match e {
            ManifoldError::Integrator(inner) => inner.into(),
            ManifoldError::Spectral(_) | ManifoldError::Scaling(_) | ManifoldError::SeedFailed { .. } => {
                CliError::numeric(e.to_string())
            }
            _ => CliError::usage(e.to_string()),
        }
    }
}

impl From<BundleError> for CliError {
    fn from(e: BundleError) -> Self {
        match e {
            BundleError::InvalidState { .. } => CliError::numeric(e.to_string()),
            _ => CliError::usage(e.to_string()),
        }
    }
}
