//! Similarity-guided active learning.
//!
//! A [`Session`] alternates between scoring rows with an SDA²E model, asking
//! an oracle about the highest-scoring unlabeled rows, and applying one of
//! four strategies to the answers:
//!
//! - `s1`: grow the training pool with rows similar to confirmed normals and
//!   retrain;
//! - `s2`: move confirmed anomalies and rows similar to them to the top of the
//!   ranking;
//! - `hybrid`: both;
//! - `passive`: record answers only.
//!
//! Sessions are step-wise so that the same state machine serves synchronous
//! simulated oracles and a human answering through the service.

mod config;
mod journal;
mod oracle;
mod select;
mod session;
mod sets;

pub use config::{RetrainPolicy, SessionConfig, Strategy};
pub use journal::{replay, Journal, JournalEntry, JournalHeader, JOURNAL_VERSION};
pub use oracle::{Oracle, SimulatedOracle};
pub use select::{
    build_ranking, select_candidates, strategy1_expand, strategy2_prioritize, AnchorThreshold, Expansion,
    Prioritization, Selection,
};
pub use session::{
    combined_report, run_session, run_strategies, IterationRecord, Phase, QueryAnswer, Session, SessionOutcome,
};
pub use sets::{LabeledSets, RowState};
