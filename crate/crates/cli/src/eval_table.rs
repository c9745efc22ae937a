use std::collections::BTreeMap;
use std::fmt::Write as _;

use sda2e_core::eval::{average_ranks, RunReport};

use crate::CliError;

/// Median nDCG per (method, dataset), the per-dataset winner and average ranks.
#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub datasets: Vec<String>,
    pub methods: Vec<String>,
    /// `cells[m][j]`: median nDCG of method `m` on dataset `j`.
    pub cells: Vec<Vec<f64>>,
    /// Winning methods per dataset (several on ties).
    pub winners: Vec<Vec<String>>,
    pub average_ranks: Vec<f64>,
}

pub fn compare_reports(reports: &[RunReport]) -> Result<Comparison, CliError> {
    let mut checksums: BTreeMap<String, String> = BTreeMap::new();
    let mut cells: BTreeMap<(String, String), f64> = BTreeMap::new();
    let mut datasets = Vec::new();
    let mut methods = Vec::new();
    for report in reports {
        let name = &report.dataset.name;
        match checksums.get(name) {
            Some(c) if *c != report.dataset.checksum => {
                return Err(CliError::data(format!(
                    "inconsistent datasets: reports named {name:?} have different checksums"
                )))
            }
            Some(_) => {}
            None => {
                checksums.insert(name.clone(), report.dataset.checksum.clone());
                datasets.push(name.clone());
            }
        }
        for run in &report.runs {
            let series = run
                .series()
                .ok_or_else(|| CliError::data(format!("{name}/{}: run has iterations without nDCG", run.strategy)))?;
            let median = series.median()?;
            if cells.insert((run.strategy.clone(), name.clone()), median).is_some() {
                return Err(CliError::data(format!("{name}/{}: run appears twice", run.strategy)));
            }
            if !methods.contains(&run.strategy) {
                methods.push(run.strategy.clone());
            }
        }
    }
    if methods.is_empty() {
        return Err(CliError::data("no runs in the given reports"));
    }
    let mut table = Vec::with_capacity(methods.len());
    for m in &methods {
        let mut row = Vec::with_capacity(datasets.len());
        for d in &datasets {
            let v = cells
                .get(&(m.clone(), d.clone()))
                .ok_or_else(|| CliError::data(format!("inconsistent datasets: {m} has no run on {d}")))?;
            row.push(*v);
        }
        table.push(row);
    }
    let winners = (0..datasets.len())
        .map(|j| {
            let best = table.iter().map(|r| r[j]).fold(f64::NEG_INFINITY, f64::max);
            methods
                .iter()
                .zip(&table)
                .filter(|(_, r)| r[j] == best)
                .map(|(m, _)| m.clone())
                .collect()
        })
        .collect();
    let average_ranks = average_ranks(&table)?;
    Ok(Comparison {
        datasets,
        methods,
        cells: table,
        winners,
        average_ranks,
    })
}

impl Comparison {
    /// CSV-style table; a trailing `*` marks each dataset's winner.
    pub fn to_table(&self) -> String {
        let mut out = format!("method,{},avg_rank\n", self.datasets.join(","));
        for (m, method) in self.methods.iter().enumerate() {
            let _ = write!(out, "{method}");
            for (j, v) in self.cells[m].iter().enumerate() {
                let mark = if self.winners[j].contains(method) { "*" } else { "" };
                let _ = write!(out, ",{v:.6}{mark}");
            }
            let _ = writeln!(out, ",{:.4}", self.average_ranks[m]);
        }
        let winners: Vec<String> = self.winners.iter().map(|w| w.join("|")).collect();
        let _ = writeln!(out, "winner,{},", winners.join(","));
        out
    }
}
