use serde::{Deserialize, Serialize};

use crate::data::Label;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RowState {
    Unlabeled,
    Normal,
    Anomaly,
}

impl RowState {
    /// The oracle answer, if any.
    pub fn label(self) -> Option<Label> {
        match self {
            RowState::Unlabeled => None,
            RowState::Normal => Some(Label::Normal),
            RowState::Anomaly => Some(Label::Anomaly),
        }
    }
}

/// Oracle knowledge and the training pool, by row index.
///
/// `A_normal` and `A_anomaly` hold oracle answers; every other row is
/// unlabeled. The training pool `X_l` overlays this: it holds cold-start and
/// expanded rows (still unlabeled, so still queryable) plus confirmed normals,
/// and never a confirmed anomaly.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledSets {
    state: Vec<RowState>,
    in_pool: Vec<bool>,
}

impl LabeledSets {
    pub fn new(n: usize) -> Self {
        Self {
            state: vec![RowState::Unlabeled; n],
            in_pool: vec![false; n],
        }
    }

    pub fn len(&self) -> usize {
        self.state.len()
    }

    pub fn is_empty(&self) -> bool {
        self.state.is_empty()
    }

    pub fn state(&self, row: usize) -> RowState {
        self.state[row]
    }

    pub fn in_pool(&self, row: usize) -> bool {
        self.in_pool[row]
    }

    /// Adds an unlabeled or normal row to `X_l`; confirmed anomalies are refused.
    pub fn add_to_pool(&mut self, row: usize) -> bool {
        if self.state[row] == RowState::Anomaly || self.in_pool[row] {
            return false;
        }
        self.in_pool[row] = true;
        true
    }

    /// Records an oracle answer. Labels are final.
    pub fn record(&mut self, row: usize, label: Label) -> Result<()> {
        if self.state[row] != RowState::Unlabeled {
            return Err(Error::Session(format!("row {row} is already labeled")));
        }
        match label {
            Label::Normal => {
                self.state[row] = RowState::Normal;
                self.in_pool[row] = true;
            }
            Label::Anomaly => {
                self.state[row] = RowState::Anomaly;
                self.in_pool[row] = false;
            }
        }
        Ok(())
    }

    fn rows_in(&self, s: RowState) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.state[i] == s).collect()
    }

    pub fn unlabeled(&self) -> Vec<usize> {
        self.rows_in(RowState::Unlabeled)
    }

    pub fn normals(&self) -> Vec<usize> {
        self.rows_in(RowState::Normal)
    }

    pub fn anomalies(&self) -> Vec<usize> {
        self.rows_in(RowState::Anomaly)
    }

    pub fn pool(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.in_pool[i]).collect()
    }

    pub fn labeled_count(&self) -> usize {
        self.state.iter().filter(|&&s| s != RowState::Unlabeled).count()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn anomaly_leaves_pool_and_labels_are_final() {
        let mut s = LabeledSets::new(4);
        assert!(s.add_to_pool(1));
        assert!(!s.add_to_pool(1));
        s.record(1, Label::Anomaly).unwrap();
        assert!(!s.in_pool(1));
        assert!(!s.add_to_pool(1));
        assert!(s.record(1, Label::Normal).is_err());
        s.record(2, Label::Normal).unwrap();
        assert_eq!(s.pool(), vec![2]);
        assert_eq!(s.unlabeled(), vec![0, 3]);
        assert_eq!((s.normals(), s.anomalies()), (vec![2], vec![1]));
    }
}
