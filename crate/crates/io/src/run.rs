//! `run.json`: what a CLI invocation did and how to repeat it.
//!
//! ```json
//! {
//!   "tool": "helmholtz",
//!   "version": "0.1.0",
//!   "core_version": "0.1.0",
//!   "command": "gen-dataset",
//!   "args": { ... every resolved option, seeds included ... },
//!   "config": { ... the loaded problem config, if any ... },
//!   "result": { ... command output ... },
//!   "exit_code": 0,
//!   "error": null,
//!   "started_unix": 1760000000,
//!   "finished_unix": 1760000003
//! }
//! ```
//!
//! Only the two `*_unix` fields depend on when the command ran; output
//! locations are not recorded, so identical runs into different directories
//! produce identical files apart from those fields.

use std::fs;
use std::path::Path;

use serde::Serialize;
use serde_json::Value;

pub const RUN_FILE: &str = "run.json";

#[derive(Debug, Clone, Serialize)]
pub struct RunRecord {
    pub tool: &'static str,
    pub version: &'static str,
    pub core_version: &'static str,
    pub command: String,
    pub args: Value,
    pub config: Option<Value>,
    pub result: Value,
    pub exit_code: i32,
    pub error: Option<String>,
    pub started_unix: u64,
    pub finished_unix: u64,
}

impl RunRecord {
    pub fn new(command: &str, args: Value, started_unix: u64) -> Self {
        Self {
            tool: "helmholtz",
            version: env!("CARGO_PKG_VERSION"),
            core_version: helmholtz_core::VERSION,
            command: command.to_string(),
            args,
            config: None,
            result: Value::Null,
            exit_code: 0,
            error: None,
            started_unix,
            finished_unix: started_unix,
        }
    }

    pub fn write(&self, dir: &Path) -> std::io::Result<()> {
        fs::create_dir_all(dir)?;
        let text = serde_json::to_string_pretty(self).expect("run record serializes");
        fs::write(dir.join(RUN_FILE), text + "\n")
    }
}
