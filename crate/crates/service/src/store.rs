//! Durable event storage: an append-only JSON-lines log plus an optional state snapshot.

use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::events::EventRecord;
use crate::state::PlatformState;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("corrupt log line {line}: {message}")]
    Corrupt { line: usize, message: String },
    #[error("serialization: {0}")]
    Json(#[from] serde_json::Error),
}

pub trait EventStore: Send {
    /// Appends a batch; either all records are durable or the call fails.
    fn append(&mut self, records: &[EventRecord]) -> Result<(), StoreError>;
    /// Every record ever appended, in order.
    fn load(&self) -> Result<Vec<EventRecord>, StoreError>;
    fn save_snapshot(&mut self, state: &PlatformState) -> Result<(), StoreError>;
    fn load_snapshot(&self) -> Result<Option<PlatformState>, StoreError>;
}

#[derive(Debug, Default)]
pub struct MemoryStore {
    records: Vec<EventRecord>,
    snapshot: Option<PlatformState>,
}

impl MemoryStore {
    pub fn new() -> Self {
        Self::default()
    }
}

impl EventStore for MemoryStore {
    fn append(&mut self, records: &[EventRecord]) -> Result<(), StoreError> {
        self.records.extend_from_slice(records);
        Ok(())
    }

    fn load(&self) -> Result<Vec<EventRecord>, StoreError> {
        Ok(self.records.clone())
    }

    fn save_snapshot(&mut self, state: &PlatformState) -> Result<(), StoreError> {
        self.snapshot = Some(state.clone());
        Ok(())
    }

    fn load_snapshot(&self) -> Result<Option<PlatformState>, StoreError> {
        Ok(self.snapshot.clone())
    }
}

/// `events.jsonl` and `snapshot.json` inside a data directory.
#[derive(Debug)]
pub struct JsonlStore {
    dir: PathBuf,
    log: File,
}

impl JsonlStore {
    pub const LOG_FILE: &'static str = "events.jsonl";
    pub const SNAPSHOT_FILE: &'static str = "snapshot.json";

    pub fn open(dir: impl AsRef<Path>) -> Result<Self, StoreError> {
        let dir = dir.as_ref().to_path_buf();
        fs::create_dir_all(&dir)?;
        let log = OpenOptions::new()
            .create(true)
            .append(true)
            .open(dir.join(Self::LOG_FILE))?;
        Ok(Self { dir, log })
    }

    pub fn log_path(&self) -> PathBuf {
        self.dir.join(Self::LOG_FILE)
    }
}

impl EventStore for JsonlStore {
    fn append(&mut self, records: &[EventRecord]) -> Result<(), StoreError> {
        let mut buf = Vec::new();
        for r in records {
            serde_json::to_writer(&mut buf, r)?;
            buf.push(b'\n');
        }
        // one write per batch so a batch is never split by another writer
        self.log.write_all(&buf)?;
        self.log.sync_data()?;
        Ok(())
    }

    fn load(&self) -> Result<Vec<EventRecord>, StoreError> {
        let reader = BufReader::new(File::open(self.log_path())?);
        let mut out = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let record = serde_json::from_str(&line).map_err(|e| StoreError::Corrupt {
                line: i + 1,
                message: e.to_string(),
            })?;
            out.push(record);
        }
        Ok(out)
    }

    fn save_snapshot(&mut self, state: &PlatformState) -> Result<(), StoreError> {
        let tmp = self.dir.join("snapshot.json.tmp");
        fs::write(&tmp, serde_json::to_vec(state)?)?;
        fs::rename(tmp, self.dir.join(Self::SNAPSHOT_FILE))?;
        Ok(())
    }

    fn load_snapshot(&self) -> Result<Option<PlatformState>, StoreError> {
        match fs::read(self.dir.join(Self::SNAPSHOT_FILE)) {
            Ok(bytes) => Ok(Some(serde_json::from_slice(&bytes)?)),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(e.into()),
        }
    }
}
