//! Output directory handling: atomic file writes, a lock file and the run
//! manifest.

use std::fs::{self, File, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use chrono::{DateTime, SecondsFormat, Utc};
use serde::Serialize;

use crate::config::RunConfig;
use crate::CliError;

const LOCK_NAME: &str = ".sirlab.lock";
pub const MANIFEST_NAME: &str = "manifest.json";

/// An output directory held exclusively for the duration of one invocation.
pub struct OutputDir {
    dir: PathBuf,
    files: Vec<String>,
    started: DateTime<Utc>,
}

impl OutputDir {
    pub fn open(dir: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
        let lock = dir.join(LOCK_NAME);
        match OpenOptions::new().write(true).create_new(true).open(&lock) {
            Ok(_) => {}
            Err(e) if e.kind() == io::ErrorKind::AlreadyExists => {
                return Err(CliError::Config(format!(
                    "{} is in use by another run (remove {} if that run is gone)",
                    dir.display(),
                    lock.display()
                )))
            }
            Err(e) => return Err(io_error(&lock, e)),
        }
        Ok(OutputDir {
            dir: dir.to_path_buf(),
            files: Vec::new(),
            started: Utc::now(),
        })
    }

    /// Writes `name` through a temporary sibling and renames it into place.
    pub fn write(
        &mut self,
        name: &str,
        render: impl FnOnce(&mut dyn Write) -> io::Result<()>,
    ) -> Result<(), CliError> {
        let target = self.dir.join(name);
        let tmp = self.dir.join(format!(".{name}.tmp"));
        let result = (|| {
            let mut w = io::BufWriter::new(File::create(&tmp)?);
            render(&mut w)?;
            w.into_inner().map_err(|e| e.into_error())?.sync_all()?;
            fs::rename(&tmp, &target)
        })();
        if let Err(e) = result {
            let _ = fs::remove_file(&tmp);
            return Err(io_error(&target, e));
        }
        if !self.files.iter().any(|f| f == name) {
            self.files.push(name.to_string());
        }
        Ok(())
    }

    pub fn write_str(&mut self, name: &str, text: &str) -> Result<(), CliError> {
        self.write(name, |w| w.write_all(text.as_bytes()))
    }

    /// Writes `manifest.json` and releases the directory.
    pub fn finish(
        mut self,
        command: &str,
        config: &RunConfig,
        outcome: &Result<(), CliError>,
    ) -> Result<(), CliError> {
        let manifest = RunManifest {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command,
            config,
            started: self.started.to_rfc3339_opts(SecondsFormat::Millis, true),
            finished: Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true),
            status: match outcome {
                Ok(()) => "ok".to_string(),
                Err(e) => format!("error (exit {}): {e}", e.exit_code()),
            },
            files: self.files.clone(),
        };
        let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n";
        self.write_str(MANIFEST_NAME, &text)
    }
}

impl Drop for OutputDir {
    fn drop(&mut self) {
        let _ = fs::remove_file(self.dir.join(LOCK_NAME));
    }
}

#[derive(Serialize)]
struct RunManifest<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'a str,
    config: &'a RunConfig,
    started: String,
    finished: String,
    status: String,
    files: Vec<String>,
}

fn io_error(path: &Path, e: io::Error) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}
