use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use serde_json::Value;

#[derive(Clone, Debug, Serialize)]
pub struct InputFile {
    pub role: String,
    pub path: String,
    pub bytes: u64,
    /// Embedded for small text inputs so the run can be rebuilt without them.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub content: Option<String>,
}

impl InputFile {
    const EMBED_LIMIT: u64 = 64 * 1024;

    pub fn record(role: &str, path: &Path) -> anyhow::Result<Self> {
        let bytes = std::fs::metadata(path)?.len();
        let content = if bytes <= Self::EMBED_LIMIT { std::fs::read_to_string(path).ok() } else { None };
        Ok(InputFile { role: role.into(), path: path.display().to_string(), bytes, content })
    }
}

/// Everything needed to rerun a command. The CSV header line carries the
/// same object without timestamps so repeated runs give identical files.
#[derive(Clone, Debug, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub argv: Vec<String>,
    pub inputs: Vec<InputFile>,
    pub config: Value,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub started_unix: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub finished_unix: Option<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

fn now() -> f64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0)
}

impl RunManifest {
    pub fn start(command: &str) -> Self {
        RunManifest {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command: command.into(),
            argv: std::env::args().collect(),
            inputs: Vec::new(),
            config: Value::Null,
            started_unix: Some(now()),
            finished_unix: None,
            notes: Vec::new(),
        }
    }

    /// Single-line form for the CSV header: no timestamps, no argv (output
    /// paths would differ between otherwise identical runs).
    pub fn header_line(&self) -> String {
        let mut m = self.clone();
        m.started_unix = None;
        m.finished_unix = None;
        m.argv.clear();
        for i in &mut m.inputs {
            i.content = None;
        }
        serde_json::to_string(&m).expect("manifest serializes")
    }

    pub fn finish(mut self, path: Option<&Path>) -> anyhow::Result<()> {
        self.finished_unix = Some(now());
        if let Some(p) = path {
            std::fs::write(p, serde_json::to_string_pretty(&self)? + "\n")?;
        }
        Ok(())
    }
}
