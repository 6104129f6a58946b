//! Config file. Values here are the lowest-precedence layer: a flag beats
//! its environment variable, which beats the file.

use std::path::{Path, PathBuf};

use blockbot_core::auth::HashParams;
use blockbot_core::autonomy::AutonomyConfig;
use blockbot_core::kinematics::MotionConfig;
use serde::Deserialize;

use crate::exit::Failure;

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub serve: ServeSection,
    pub robot: RobotSection,
    pub client: ClientSection,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServeSection {
    pub bind: Option<String>,
    pub data: Option<PathBuf>,
    pub console: Option<PathBuf>,
    pub session_ttl_ms: Option<u64>,
    pub fsync: Option<bool>,
    pub password_hash: Option<HashParams>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RobotSection {
    pub service: Option<String>,
    pub key: Option<String>,
    pub driver: Option<String>,
    pub pose: Option<[f64; 3]>,
    pub journal: Option<PathBuf>,
    pub telemetry: Option<String>,
    pub mirror: Option<PathBuf>,
    pub retry_base_ms: Option<u64>,
    pub retry_budget: Option<u32>,
    pub poll_timeout_ms: Option<u64>,
    pub motion: Option<MotionConfig>,
    pub autonomy: Option<AutonomyConfig>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClientSection {
    pub service: Option<String>,
    pub email: Option<String>,
    pub password: Option<String>,
    pub token: Option<String>,
    pub robot: Option<String>,
}

impl FileConfig {
    /// A missing `path` means no file layer at all.
    pub fn load(path: Option<&Path>) -> Result<FileConfig, Failure> {
        let Some(path) = path else { return Ok(FileConfig::default()) };
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::Usage(format!("cannot read config {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| Failure::Usage(format!("config {}: {e}", path.display())))
    }
}
