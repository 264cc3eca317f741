use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::{Deserialize, Serialize};

/// Written next to every report so the run can be repeated with `replay`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    /// Arguments after the program name.
    pub command_line: Vec<String>,
    pub config: serde_json::Value,
    pub seed: u64,
    pub versions: serde_json::Value,
    pub outputs: Vec<PathBuf>,
}

impl RunManifest {
    pub fn new(
        argv: &[String],
        config: serde_json::Value,
        seed: u64,
        outputs: Vec<PathBuf>,
    ) -> Self {
        RunManifest {
            command_line: argv.to_vec(),
            config,
            seed,
            versions: serde_json::json!({
                "doping": env!("CARGO_PKG_VERSION"),
                "core": doping_core::VERSION,
            }),
            outputs,
        }
    }

    /// `<dir>/<report stem>.manifest.json`.
    pub fn path_for(report: &Path) -> PathBuf {
        let stem = report.file_stem().and_then(|s| s.to_str()).unwrap_or("run");
        report.with_file_name(format!("{stem}.manifest.json"))
    }

    pub fn write(&self, report: &Path) -> anyhow::Result<PathBuf> {
        let path = Self::path_for(report);
        let text = serde_json::to_string_pretty(self)? + "\n";
        std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text =
            std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    /// The recorded arguments with `--out-dir` replaced by `out_dir` when given.
    pub fn replay_argv(&self, out_dir: Option<&Path>) -> Vec<String> {
        let Some(dir) = out_dir else {
            return self.command_line.clone();
        };
        let mut argv = Vec::new();
        let mut it = self.command_line.iter();
        while let Some(a) = it.next() {
            if a == "--out-dir" {
                it.next();
            } else if !a.starts_with("--out-dir=") {
                argv.push(a.clone());
            }
        }
        argv.push("--out-dir".into());
        argv.push(dir.display().to_string());
        argv
    }
}
