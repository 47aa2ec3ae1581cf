//! On-disk layout:
//!
//! ```text
//! <root>/datasets/<dataset id>/data.csv      uploaded bytes
//! <root>/datasets/<dataset id>/config.json   IngestConfig
//! <root>/sessions/<session id>.jsonl         header line, then one event per line
//! ```
//!
//! Session files are only ever appended to.

use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use faircompass_core::session::{SessionEvent, SessionHeader};
use faircompass_core::{Error as CoreError, IngestConfig, SessionRecord};

use crate::error::ServiceError;

#[derive(Debug, Clone)]
pub struct Store {
    root: PathBuf,
}

/// Session and dataset ids double as file names.
pub fn valid_id(id: &str) -> bool {
    !id.is_empty()
        && id.len() <= 64
        && id
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_')
}

impl Store {
    pub fn open(root: impl Into<PathBuf>) -> Result<Self, ServiceError> {
        let root = root.into();
        fs::create_dir_all(root.join("datasets"))?;
        fs::create_dir_all(root.join("sessions"))?;
        Ok(Self { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn dataset_dir(&self, id: &str) -> PathBuf {
        self.root.join("datasets").join(id)
    }

    fn session_file(&self, id: &str) -> PathBuf {
        self.root.join("sessions").join(format!("{id}.jsonl"))
    }

    /// Store an upload unless one with the same id exists.
    pub fn save_dataset(&self, id: &str, csv: &str, config: &IngestConfig) -> Result<(), ServiceError> {
        let dir = self.dataset_dir(id);
        if dir.join("config.json").exists() {
            return Ok(());
        }
        fs::create_dir_all(&dir)?;
        fs::write(dir.join("data.csv"), csv)?;
        let config = serde_json::to_vec_pretty(config).expect("config serializes");
        // Written last: its presence marks a complete entry.
        fs::write(dir.join("config.json"), config)?;
        Ok(())
    }

    pub fn load_dataset(&self, id: &str) -> Result<Option<(String, IngestConfig)>, ServiceError> {
        if !valid_id(id) {
            return Ok(None);
        }
        let dir = self.dataset_dir(id);
        let Ok(config) = fs::read(dir.join("config.json")) else {
            return Ok(None);
        };
        let config: IngestConfig = serde_json::from_slice(&config)
            .map_err(|e| ServiceError::Storage(format!("dataset {id}: {e}")))?;
        let csv = fs::read_to_string(dir.join("data.csv"))?;
        Ok(Some((csv, config)))
    }

    pub fn create_session(&self, header: &SessionHeader) -> Result<(), ServiceError> {
        let mut file = OpenOptions::new()
            .write(true)
            .create_new(true)
            .open(self.session_file(&header.id))
            .map_err(|e| match e.kind() {
                std::io::ErrorKind::AlreadyExists => ServiceError::SessionExists(header.id.clone()),
                _ => e.into(),
            })?;
        writeln!(
            file,
            "{}",
            serde_json::to_string(header).expect("header serializes")
        )?;
        file.sync_data()?;
        Ok(())
    }

    pub fn append_events(&self, session_id: &str, events: &[SessionEvent]) -> Result<(), ServiceError> {
        if events.is_empty() {
            return Ok(());
        }
        let mut file = OpenOptions::new()
            .append(true)
            .open(self.session_file(session_id))?;
        let mut buf = String::new();
        for e in events {
            buf.push_str(&serde_json::to_string(e).expect("event serializes"));
            buf.push('\n');
        }
        file.write_all(buf.as_bytes())?;
        file.sync_data()?;
        Ok(())
    }

    pub fn load_session(&self, path: &Path) -> Result<SessionRecord, ServiceError> {
        let corrupt = |line: usize, msg: String| {
            ServiceError::Core(CoreError::CorruptRecord(format!(
                "{}:{line}: {msg}",
                path.display()
            )))
        };
        let reader = BufReader::new(File::open(path)?);
        let mut header = None;
        let mut events = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            if header.is_none() {
                header = Some(serde_json::from_str(&line).map_err(|e| corrupt(i + 1, e.to_string()))?);
            } else {
                events.push(serde_json::from_str(&line).map_err(|e| corrupt(i + 1, e.to_string()))?);
            }
        }
        let header = header.ok_or_else(|| corrupt(0, "empty session file".into()))?;
        Ok(SessionRecord { header, events })
    }

    /// Every stored session, ordered by id.
    pub fn load_sessions(&self) -> Result<Vec<SessionRecord>, ServiceError> {
        let mut paths: Vec<PathBuf> = fs::read_dir(self.root.join("sessions"))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "jsonl"))
            .collect();
        paths.sort();
        paths.iter().map(|p| self.load_session(p)).collect()
    }
}
