use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, RwLock};

use sda2e_core::active::{Phase, Session};
use sda2e_core::data::{BinaryDataset, LabelMap};

use crate::ServiceOptions;

#[derive(Debug, Clone)]
pub struct DatasetEntry {
    pub name: String,
    pub dataset: Arc<BinaryDataset>,
    pub labels: Option<LabelMap>,
}

/// One hosted session. `session` is the last consistent state; while a
/// training step runs off the request path, `busy` holds the phase shown to
/// readers and label submissions are refused.
#[derive(Debug, Default)]
pub struct Slot {
    pub session: Option<Session>,
    pub busy: Option<Phase>,
    pub failure: Option<String>,
}

impl Slot {
    pub fn phase(&self) -> Option<Phase> {
        self.busy.or_else(|| self.session.as_ref().map(Session::phase))
    }
}

#[derive(Debug)]
pub struct SessionEntry {
    pub id: String,
    pub dataset: String,
    pub slot: Mutex<Slot>,
}

#[derive(Debug)]
pub struct AppState {
    pub options: ServiceOptions,
    pub datasets: RwLock<HashMap<String, DatasetEntry>>,
    pub sessions: RwLock<HashMap<String, Arc<SessionEntry>>>,
    next_id: AtomicU64,
}

impl AppState {
    pub fn new(options: ServiceOptions) -> Self {
        Self {
            options,
            datasets: RwLock::default(),
            sessions: RwLock::default(),
            next_id: AtomicU64::new(1),
        }
    }

    pub fn next_session_id(&self) -> String {
        format!("s{}", self.next_id.fetch_add(1, Ordering::Relaxed))
    }

    pub fn journal_path(&self, id: &str) -> Option<PathBuf> {
        self.options.journal_dir.as_ref().map(|d| d.join(format!("{id}.jsonl")))
    }
}
