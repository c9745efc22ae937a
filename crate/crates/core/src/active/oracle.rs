use std::collections::HashMap;

use crate::data::{Label, LabelMap};
use crate::{Error, Result};

/// Source of ground-truth answers for queried rows.
pub trait Oracle {
    fn label(&mut self, row: usize) -> Result<Label>;
}

/// Answers from a label file. Answers are cached, so re-queries agree.
#[derive(Debug, Clone)]
pub struct SimulatedOracle {
    labels: LabelMap,
    cache: HashMap<usize, Label>,
    calls: usize,
}

impl SimulatedOracle {
    pub fn new(labels: LabelMap) -> Self {
        Self {
            labels,
            cache: HashMap::new(),
            calls: 0,
        }
    }

    /// Total number of `label` calls, repeats included.
    pub fn calls(&self) -> usize {
        self.calls
    }
}

impl Oracle for SimulatedOracle {
    fn label(&mut self, row: usize) -> Result<Label> {
        if row >= self.labels.len() {
            return Err(Error::InvalidArgument(format!("oracle asked about unknown row {row}")));
        }
        self.calls += 1;
        let truth = self.labels.get(row);
        Ok(*self.cache.entry(row).or_insert(truth))
    }
}

impl<F: FnMut(usize) -> Result<Label>> Oracle for F {
    fn label(&mut self, row: usize) -> Result<Label> {
        self(row)
    }
}
