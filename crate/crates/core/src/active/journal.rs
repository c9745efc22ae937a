use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::config::SessionConfig;
use super::session::{IterationRecord, Phase, Session};
use crate::data::{BinaryDataset, Label};
use crate::eval::RelevanceLabels;
use crate::sda2e::Sda2eConfig;
use crate::{Error, Result};

pub const JOURNAL_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JournalHeader {
    pub version: u32,
    pub dataset_checksum: String,
    pub dataset_rows: usize,
    pub session_config: SessionConfig,
    pub model_config: Sda2eConfig,
}

/// One line of a session journal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum JournalEntry {
    Header(JournalHeader),
    Label { iteration: usize, id: String, label: Label },
    Iteration { record: IterationRecord },
}

/// Append-only JSON-lines log of a session, optionally mirrored to a file.
#[derive(Debug, Clone, Default)]
pub struct Journal {
    path: Option<PathBuf>,
    entries: Vec<JournalEntry>,
}

impl Journal {
    pub fn in_memory() -> Self {
        Self::default()
    }

    /// Journal that also appends each entry to `path`, truncating it first.
    pub fn create(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        File::create(&path).map_err(|e| Error::io(&path, e))?;
        Ok(Self {
            path: Some(path),
            entries: Vec::new(),
        })
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    pub fn entries(&self) -> &[JournalEntry] {
        &self.entries
    }

    pub fn append(&mut self, entry: JournalEntry) -> Result<()> {
        if let Some(path) = &self.path {
            let mut line = serde_json::to_string(&entry)?;
            line.push('\n');
            OpenOptions::new()
                .append(true)
                .open(path)
                .and_then(|mut f| f.write_all(line.as_bytes()))
                .map_err(|e| Error::io(path, e))?;
        }
        self.entries.push(entry);
        Ok(())
    }

    pub fn to_jsonl(&self) -> String {
        self.entries
            .iter()
            .map(|e| serde_json::to_string(e).expect("journal entries serialise") + "\n")
            .collect()
    }

    pub fn parse(text: &str) -> Result<Vec<JournalEntry>> {
        Self::read(text.as_bytes())
    }

    pub fn read(reader: impl std::io::Read) -> Result<Vec<JournalEntry>> {
        let mut out = Vec::new();
        for (i, line) in BufReader::new(reader).lines().enumerate() {
            let line = line.map_err(|e| Error::Session(format!("journal line {}: {e}", i + 1)))?;
            if line.trim().is_empty() {
                continue;
            }
            out.push(serde_json::from_str(&line).map_err(|e| Error::Parse {
                line: i as u64 + 1,
                column: e.column(),
                message: e.to_string(),
            })?);
        }
        Ok(out)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Vec<JournalEntry>> {
        let path = path.as_ref();
        Self::read(File::open(path).map_err(|e| Error::io(path, e))?)
    }
}

/// Rebuilds a session from journal entries, re-running every step and
/// checking each recomputed iteration record against the journaled one. A
/// journal cut off mid-iteration yields a session awaiting the remaining
/// labels.
pub fn replay(
    entries: &[JournalEntry],
    dataset: Arc<BinaryDataset>,
    relevance: Option<RelevanceLabels>,
    journal: Journal,
) -> Result<Session> {
    let header = match entries.first() {
        Some(JournalEntry::Header(h)) => h,
        _ => return Err(Error::Session("journal does not start with a header".into())),
    };
    if header.version != JOURNAL_VERSION {
        return Err(Error::Session(format!("unsupported journal version {}", header.version)));
    }
    if header.dataset_rows != dataset.len() || header.dataset_checksum != dataset.checksum() {
        return Err(Error::Session("journal was written for a different dataset".into()));
    }
    let mut session = Session::start(
        dataset,
        relevance,
        header.session_config.clone(),
        header.model_config.clone(),
        journal,
    )?;
    for entry in &entries[1..] {
        match entry {
            JournalEntry::Header(_) => return Err(Error::Session("second header in journal".into())),
            JournalEntry::Label { iteration, id, label } => {
                if *iteration != session.current_iteration() {
                    return Err(Error::Session(format!(
                        "label for {id:?} belongs to iteration {iteration}, session is at {}",
                        session.current_iteration()
                    )));
                }
                session.submit_id(id, *label)?;
                if session.ready_to_advance() {
                    session.advance()?;
                }
            }
            JournalEntry::Iteration { record } => match session.records().get(record.iteration) {
                Some(r) if r == record => {}
                _ => {
                    return Err(Error::Session(format!(
                        "replay diverges from journal at iteration {}",
                        record.iteration
                    )))
                }
            },
        }
    }
    debug_assert!(session.phase() != Phase::Training);
    Ok(session)
}
