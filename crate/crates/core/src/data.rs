//! Dataset abstraction and tabular ingestion.
//!
//! Rows with missing cells in any used column are dropped (listwise deletion
//! on used columns only) and counted. Unit ids are opaque strings and are
//! never parsed as numbers, so identifiers like zero-padded FIPS codes
//! survive a round trip.

use std::collections::{HashMap, HashSet};
use std::path::Path;

use ndarray::Array1;

use crate::error::{Error, Result};
use crate::graph::AdjacencyGraph;

/// Names of the columns each role is read from. The four groups must be
/// pairwise disjoint and at least one treatment column is required.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct ColumnSpec {
    pub id_col: String,
    pub outcome_col: String,
    pub treatment_cols: Vec<String>,
    pub confounder_cols: Vec<String>,
}

impl ColumnSpec {
    pub fn validate(&self) -> Result<()> {
        if self.treatment_cols.is_empty() {
            return Err(Error::Config(
                "at least one treatment column is required".to_string(),
            ));
        }
        let mut seen = HashSet::new();
        for name in std::iter::once(&self.id_col)
            .chain(std::iter::once(&self.outcome_col))
            .chain(self.treatment_cols.iter())
            .chain(self.confounder_cols.iter())
        {
            if !seen.insert(name.as_str()) {
                return Err(Error::Config(format!(
                    "column '{name}' is assigned to more than one role"
                )));
            }
        }
        Ok(())
    }
}

/// Immutable unit-level dataset. All vectors share length `n`; column order
/// follows the ColumnSpec, not the file.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub unit_ids: Vec<String>,
    pub outcome: Array1<f64>,
    pub treatments: Vec<(String, Array1<f64>)>,
    pub confounders: Vec<(String, Array1<f64>)>,
}

/// Ingestion result: the dataset plus the count of dropped incomplete rows.
#[derive(Debug, Clone)]
pub struct LoadedDataset {
    pub dataset: Dataset,
    pub dropped_rows: usize,
}

impl Dataset {
    pub fn n(&self) -> usize {
        self.unit_ids.len()
    }

    pub fn treatment(&self, name: &str) -> Result<&Array1<f64>> {
        self.treatments
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| v)
            .ok_or_else(|| Error::Config(format!("unknown treatment column '{name}'")))
    }

    pub fn treatment_names(&self) -> Vec<&str> {
        self.treatments.iter().map(|(n, _)| n.as_str()).collect()
    }

    pub fn confounder_names(&self) -> Vec<&str> {
        self.confounders.iter().map(|(n, _)| n.as_str()).collect()
    }

    fn validate(&self) -> Result<()> {
        let n = self.n();
        if n < 3 {
            return Err(Error::InsufficientData(format!(
                "need at least 3 complete rows, found {n}"
            )));
        }
        for (name, v) in self
            .treatments
            .iter()
            .chain(self.confounders.iter())
        {
            if v.len() != n {
                return Err(Error::Data(format!(
                    "column '{name}' has length {} but {} unit ids",
                    v.len(),
                    n
                )));
            }
        }
        if self.outcome.len() != n {
            return Err(Error::Data("outcome length mismatch".to_string()));
        }
        let mut seen = HashSet::new();
        for id in &self.unit_ids {
            if !seen.insert(id.as_str()) {
                return Err(Error::Data(format!("duplicate unit id '{id}'")));
            }
        }
        Ok(())
    }
}

/// Load a dataset from a CSV file (UTF-8, comma separated, header row,
/// `.` decimal point, empty string = missing).
pub fn load_dataset(path: &Path, spec: &ColumnSpec) -> Result<LoadedDataset> {
    spec.validate()?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| Error::Data(format!("cannot open {}: {e}", path.display())))?;
    let headers = reader.headers()?.clone();
    let col_index: HashMap<&str, usize> = headers
        .iter()
        .enumerate()
        .map(|(i, h)| (h, i))
        .collect();

    let find = |name: &str| -> Result<usize> {
        col_index.get(name).copied().ok_or_else(|| {
            Error::Config(format!(
                "column '{name}' not found in {}",
                path.display()
            ))
        })
    };

    let id_idx = find(&spec.id_col)?;
    let outcome_idx = find(&spec.outcome_col)?;
    let treat_idx: Vec<usize> = spec
        .treatment_cols
        .iter()
        .map(|c| find(c))
        .collect::<Result<_>>()?;
    let conf_idx: Vec<usize> = spec
        .confounder_cols
        .iter()
        .map(|c| find(c))
        .collect::<Result<_>>()?;

    let mut unit_ids = Vec::new();
    let mut outcome = Vec::new();
    let mut treatments: Vec<Vec<f64>> = vec![Vec::new(); treat_idx.len()];
    let mut confounders: Vec<Vec<f64>> = vec![Vec::new(); conf_idx.len()];
    let mut dropped = 0usize;

    for (row_pos, record) in reader.records().enumerate() {
        let record = record?;
        // 1-based file row counting the header
        let file_row = row_pos + 2;
        let cell = |idx: usize| record.get(idx).unwrap_or("").trim();

        let used: Vec<usize> = std::iter::once(outcome_idx)
            .chain(treat_idx.iter().copied())
            .chain(conf_idx.iter().copied())
            .collect();
        if cell(id_idx).is_empty() || used.iter().any(|&i| cell(i).is_empty()) {
            dropped += 1;
            continue;
        }

        let parse = |idx: usize| -> Result<f64> {
            let raw = cell(idx);
            raw.parse::<f64>().map_err(|_| Error::Parse {
                row: file_row,
                message: format!(
                    "non-numeric value '{raw}' in column '{}'",
                    headers.get(idx).unwrap_or("?")
                ),
            })
        };

        unit_ids.push(cell(id_idx).to_string());
        outcome.push(parse(outcome_idx)?);
        for (slot, &idx) in treatments.iter_mut().zip(&treat_idx) {
            slot.push(parse(idx)?);
        }
        for (slot, &idx) in confounders.iter_mut().zip(&conf_idx) {
            slot.push(parse(idx)?);
        }
    }

    if dropped > 0 {
        log::warn!(
            "dropped {dropped} row(s) with missing cells while loading {}",
            path.display()
        );
    }

    let dataset = Dataset {
        unit_ids,
        outcome: Array1::from_vec(outcome),
        treatments: spec
            .treatment_cols
            .iter()
            .cloned()
            .zip(treatments.into_iter().map(Array1::from_vec))
            .collect(),
        confounders: spec
            .confounder_cols
            .iter()
            .cloned()
            .zip(confounders.into_iter().map(Array1::from_vec))
            .collect(),
    };
    dataset.validate()?;
    Ok(LoadedDataset {
        dataset,
        dropped_rows: dropped,
    })
}

/// Write a dataset back in the standard CSV layout (id, outcome, treatments,
/// confounders in ColumnSpec order). Finite values round-trip bit for bit.
pub fn write_dataset_csv(path: &Path, dataset: &Dataset, spec: &ColumnSpec) -> Result<()> {
    let mut out = String::new();
    out.push_str(&spec.id_col);
    out.push(',');
    out.push_str(&spec.outcome_col);
    for (name, _) in &dataset.treatments {
        out.push(',');
        out.push_str(name);
    }
    for (name, _) in &dataset.confounders {
        out.push(',');
        out.push_str(name);
    }
    out.push('\n');
    for i in 0..dataset.n() {
        out.push_str(&dataset.unit_ids[i]);
        out.push(',');
        out.push_str(&format_f64(dataset.outcome[i]));
        for (_, v) in &dataset.treatments {
            out.push(',');
            out.push_str(&format_f64(v[i]));
        }
        for (_, v) in &dataset.confounders {
            out.push(',');
            out.push_str(&format_f64(v[i]));
        }
        out.push('\n');
    }
    crate::cli::write_atomic(path, out.as_bytes())
}

/// Shortest decimal representation that parses back to the same f64.
fn format_f64(v: f64) -> String {
    format!("{v}")
}

/// Align a graph over `graph_ids` to the dataset's row order. Graph nodes
/// absent from the dataset are removed (induced subgraph); every dataset id
/// must be present in the graph. Returns the aligned graph and the mapping
/// from dataset row to original graph index.
pub fn align_graph(
    dataset: &Dataset,
    graph: &AdjacencyGraph,
    graph_ids: &[String],
) -> Result<(AdjacencyGraph, Vec<usize>)> {
    if graph_ids.len() != graph.n() {
        return Err(Error::Parameter(format!(
            "graph has {} nodes but {} ids were supplied",
            graph.n(),
            graph_ids.len()
        )));
    }
    let index: HashMap<&str, usize> = graph_ids
        .iter()
        .enumerate()
        .map(|(i, id)| (id.as_str(), i))
        .collect();
    let mut mapping = Vec::with_capacity(dataset.n());
    let mut missing = Vec::new();
    for id in &dataset.unit_ids {
        match index.get(id.as_str()) {
            Some(&k) => mapping.push(k),
            None => missing.push(id.clone()),
        }
    }
    if !missing.is_empty() {
        return Err(Error::Data(format!(
            "{} dataset unit id(s) absent from the graph: {}",
            missing.len(),
            missing.join(", ")
        )));
    }
    let aligned = graph.induced_subgraph(&mapping)?;
    Ok((aligned, mapping))
}
