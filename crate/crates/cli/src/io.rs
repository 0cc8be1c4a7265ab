use std::fmt;
use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

pub const TOOL: &str = "dampwave";

/// Failure classes mapped onto process exit codes.
#[derive(Debug)]
pub enum CliError {
    Validation(String),
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Validation(m) => write!(f, "validation error: {m}"),
            CliError::Numerical(m) => write!(f, "numerical failure: {m}"),
        }
    }
}

impl From<dampwave::Error> for CliError {
    fn from(e: dampwave::Error) -> Self {
        if e.is_validation() {
            CliError::Validation(e.to_string())
        } else {
            CliError::Numerical(e.to_string())
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

/// Parameter echo and config hash attached to every output file.
#[derive(Debug, Clone, Serialize)]
pub struct Provenance {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub seed: u64,
    pub params: Value,
    pub config_hash: String,
}

impl Provenance {
    pub fn new(command: &str, seed: u64, params: Value) -> Self {
        let canonical = json!({ "command": command, "seed": seed, "params": params });
        let digest = Sha256::digest(canonical.to_string().as_bytes());
        Self {
            tool: TOOL,
            version: env!("CARGO_PKG_VERSION"),
            command: command.to_string(),
            seed,
            params,
            config_hash: hex::encode(digest),
        }
    }

    /// `# key: value` lines for CSV headers.
    pub fn comment_lines(&self) -> String {
        format!(
            "# tool: {} {}\n# command: {}\n# seed: {}\n# params: {}\n# config_hash: {}\n",
            self.tool, self.version, self.command, self.seed, self.params, self.config_hash
        )
    }
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Validation(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))
}

/// Reads a file written by this tool, dropping its `provenance` block first.
pub fn read_json_stripped<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    let mut v: Value = read_json(path)?;
    if let Value::Object(map) = &mut v {
        map.remove("provenance");
    }
    serde_json::from_value(v).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))
}

/// Writes `body` with a leading `provenance` object.
pub fn write_json<T: Serialize>(path: &Path, prov: &Provenance, body: &T) -> CliResult<()> {
    let mut out = serde_json::Map::new();
    out.insert("provenance".into(), to_value(prov)?);
    match to_value(body)? {
        Value::Object(map) => out.extend(map),
        other => {
            out.insert("data".into(), other);
        }
    }
    let text = serde_json::to_string_pretty(&Value::Object(out))
        .map_err(|e| CliError::Numerical(format!("cannot serialize {}: {e}", path.display())))?;
    write_text(path, &(text + "\n"))
}

pub fn write_text(path: &Path, text: &str) -> CliResult<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)
            .map_err(|e| CliError::Validation(format!("cannot create {}: {e}", dir.display())))?;
    }
    fs::write(path, text).map_err(|e| CliError::Validation(format!("cannot write {}: {e}", path.display())))
}

/// CSV with provenance comments above the header row.
pub fn write_csv(path: &Path, prov: &Provenance, header: &[&str], rows: &[Vec<String>]) -> CliResult<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let fail = |e: csv::Error| CliError::Numerical(format!("csv: {e}"));
    w.write_record(header).map_err(fail)?;
    for r in rows {
        w.write_record(r).map_err(fail)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| CliError::Numerical(format!("csv: {e}")))?;
    let body = String::from_utf8(bytes).map_err(|e| CliError::Numerical(e.to_string()))?;
    write_text(path, &(prov.comment_lines() + &body))
}

pub fn to_value<T: Serialize>(v: &T) -> CliResult<Value> {
    serde_json::to_value(v).map_err(|e| CliError::Numerical(format!("cannot serialize: {e}")))
}
