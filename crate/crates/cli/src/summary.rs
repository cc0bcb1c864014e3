use std::fs;
use std::path::Path;

use anyhow::Context;
use serde::Serialize;

pub const SUMMARY_FILE: &str = "run_summary.json";

#[derive(Debug, Serialize)]
pub struct ErrorEntry {
    /// What the error applies to, e.g. a selector or `n`.
    pub context: String,
    pub message: String,
    pub fatal: bool,
}

/// Machine-readable record of one command run.
#[derive(Debug, Serialize)]
pub struct RunSummary {
    pub command: String,
    pub inputs: Vec<String>,
    pub flags: serde_json::Value,
    pub outputs: Vec<String>,
    pub errors: Vec<ErrorEntry>,
    pub warnings: Vec<String>,
    pub wall_time_ms: u128,
}

impl RunSummary {
    pub fn new(command: &str, flags: serde_json::Value) -> Self {
        Self {
            command: command.to_string(),
            inputs: vec![],
            flags,
            outputs: vec![],
            errors: vec![],
            warnings: vec![],
            wall_time_ms: 0,
        }
    }

    pub fn input(&mut self, path: &Path) {
        self.inputs.push(path.display().to_string());
    }

    pub fn output(&mut self, path: &Path) {
        self.outputs.push(path.display().to_string());
    }

    pub fn error(&mut self, context: impl Into<String>, message: impl ToString) {
        let entry = ErrorEntry {
            context: context.into(),
            message: message.to_string(),
            fatal: false,
        };
        log::warn!("{}: {}", entry.context, entry.message);
        self.errors.push(entry);
    }

    pub fn fatal(&mut self, message: &str) {
        self.errors.push(ErrorEntry {
            context: self.command.clone(),
            message: message.to_string(),
            fatal: true,
        });
    }

    pub fn warn(&mut self, message: String) {
        log::warn!("{message}");
        self.warnings.push(message);
    }

    pub fn write(&self, dir: &Path) -> anyhow::Result<()> {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let path = dir.join(SUMMARY_FILE);
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        fs::write(&path, text).with_context(|| format!("writing {}", path.display()))
    }
}
