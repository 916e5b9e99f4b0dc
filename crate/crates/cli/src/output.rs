//! Output files and the run manifest.

use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

pub const MANIFEST: &str = "manifest.json";

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut s = String::with_capacity(64);
    for b in digest {
        let _ = write!(s, "{b:02x}");
    }
    s
}

#[derive(Debug, Clone, Serialize)]
pub struct Tolerances {
    pub limit_tol: f64,
    pub eps_l_rel: f64,
    pub eps_im: f64,
    pub eps_tau: f64,
    pub structure_tol: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct NuScheduleInfo {
    pub nu0: f64,
    pub ratio: f64,
    pub count: usize,
    pub nodes: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct NScheduleInfo {
    pub n_min: usize,
    pub n_max: usize,
    pub rule: &'static str,
}

/// Everything that determines the outputs of a run.
#[derive(Debug, Clone, Serialize)]
pub struct RunInputs {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub arguments: Vec<String>,
    pub config_sha256: String,
    pub seed: u64,
    pub tolerances: Tolerances,
    pub nu_schedule: NuScheduleInfo,
    pub n_schedule: NScheduleInfo,
}

impl RunInputs {
    /// Hash of the canonical JSON of the inputs; wall time and the list of
    /// produced files are not part of it.
    pub fn hash(&self) -> String {
        sha256_hex(&serde_json::to_vec(self).expect("inputs serialize"))
    }
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    manifest_hash: &'a str,
    #[serde(flatten)]
    inputs: &'a RunInputs,
    exit_code: u8,
    outputs: Vec<&'a str>,
    wall_time_s: f64,
}

/// Files collected in memory and written once the command has finished.
#[derive(Debug, Default)]
pub struct Outputs {
    files: Vec<(String, Vec<u8>)>,
}

impl Outputs {
    pub fn add(&mut self, name: impl Into<String>, bytes: Vec<u8>) {
        self.files.push((name.into(), bytes));
    }

    /// Pretty JSON with the manifest hash inserted as the first key.
    pub fn add_json<T: Serialize>(&mut self, name: &str, hash: &str, value: &T) {
        let body = serde_json::to_value(value).expect("outputs serialize");
        let mut obj = serde_json::Map::new();
        obj.insert("manifest_hash".into(), Value::String(hash.to_string()));
        match body {
            Value::Object(fields) => obj.extend(fields),
            other => {
                obj.insert("data".into(), other);
            }
        }
        let mut bytes = serde_json::to_vec_pretty(&Value::Object(obj)).expect("outputs serialize");
        bytes.push(b'\n');
        self.add(name, bytes);
    }

    pub fn add_csv(&mut self, name: &str, csv: Csv) {
        self.add(name, csv.finish().into_bytes());
    }

    pub fn write(&self, dir: &Path, inputs: &RunInputs, hash: &str, exit_code: u8, wall_time_s: f64) -> std::io::Result<()> {
        std::fs::create_dir_all(dir)?;
        for (name, bytes) in &self.files {
            std::fs::write(dir.join(name), bytes)?;
        }
        let manifest =
            Manifest { manifest_hash: hash, inputs, exit_code, outputs: self.files.iter().map(|(n, _)| n.as_str()).collect(), wall_time_s };
        let mut bytes = serde_json::to_vec_pretty(&manifest).expect("manifest serializes");
        bytes.push(b'\n');
        std::fs::write(dir.join(MANIFEST), bytes)
    }
}

/// CSV text with a leading `# manifest_hash=` comment line.
pub struct Csv {
    text: String,
}

impl Csv {
    pub fn new(hash: &str, header: &str) -> Self {
        Self { text: format!("# manifest_hash={hash}\n{header}\n") }
    }

    pub fn row(&mut self, cells: &[String]) {
        self.text.push_str(&cells.join(","));
        self.text.push('\n');
    }

    fn finish(self) -> String {
        self.text
    }
}

/// Shortest round-trip form, switching to exponent notation for very small
/// or large magnitudes; non-finite values print as `NaN`, `inf`, `-inf`.
pub fn num(x: f64) -> String {
    match serde_json::Number::from_f64(x) {
        Some(n) => n.to_string(),
        None if x.is_nan() => "NaN".into(),
        None => if x > 0.0 { "inf" } else { "-inf" }.into(),
    }
}

pub fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}
