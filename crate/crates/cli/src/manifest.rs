use serde::{Deserialize, Serialize};

/// Record of one run, enough to reproduce it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    /// SHA-256 over the descriptors and every flag that affects the output.
    pub inputs_hash: String,
    pub inputs: serde_json::Value,
    pub precision_bits: u32,
    /// Coefficients per cusp, in the order of the cusp list.
    pub truncation_lengths: Vec<usize>,
    pub method: Option<String>,
    pub values: Vec<[String; 2]>,
    pub error_estimates: Vec<f64>,
    pub wall_time_s: f64,
    pub cache: Vec<CacheEvent>,
    pub jobs: usize,
    pub parallel: bool,
    pub version: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheEvent {
    pub key: String,
    pub hit: bool,
}
