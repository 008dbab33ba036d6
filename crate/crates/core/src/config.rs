//! Run configuration: a single JSON document, with CLI flags overriding file
//! values. The config hash covers exactly the semantically meaningful fields,
//! so reruns can be matched to their settings.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::basis::BasisFamily;
use crate::data::ColumnSpec;
use crate::error::{Error, Result};
use crate::estimator::EstimateConfig;
use crate::gps::MarginalMode;
use crate::lasso::CvConfig;

/// Basis family choice; `Both` is valid for the sweep only.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FamilyChoice {
    Icar,
    Mem,
    Both,
}

impl FamilyChoice {
    pub fn families(self) -> Vec<BasisFamily> {
        match self {
            FamilyChoice::Icar => vec![BasisFamily::Icar],
            FamilyChoice::Mem => vec![BasisFamily::Mem],
            FamilyChoice::Both => vec![BasisFamily::Mem, BasisFamily::Icar],
        }
    }
}

impl std::str::FromStr for FamilyChoice {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "icar" => Ok(FamilyChoice::Icar),
            "mem" => Ok(FamilyChoice::Mem),
            "both" => Ok(FamilyChoice::Both),
            other => Err(Error::Config(format!(
                "unknown basis family '{other}' (expected icar, mem, or both)"
            ))),
        }
    }
}

impl std::fmt::Display for FamilyChoice {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            FamilyChoice::Icar => write!(f, "icar"),
            FamilyChoice::Mem => write!(f, "mem"),
            FamilyChoice::Both => write!(f, "both"),
        }
    }
}

fn default_id_col() -> String {
    "id".to_string()
}
fn default_outcome_col() -> String {
    "outcome".to_string()
}
fn default_family() -> FamilyChoice {
    FamilyChoice::Icar
}
fn default_k() -> usize {
    350
}
fn default_k_grid() -> Vec<usize> {
    (1..=10).map(|i| 50 * i).collect()
}
fn default_folds() -> usize {
    10
}
fn default_cv_folds() -> usize {
    5
}
fn default_lambda_grid_size() -> usize {
    100
}
fn default_lambda_min_ratio() -> f64 {
    1e-4
}
fn default_marginal() -> MarginalMode {
    MarginalMode::Normal
}
fn default_alpha() -> f64 {
    0.05
}
fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub data_path: Option<PathBuf>,
    pub edge_list_path: Option<PathBuf>,
    pub id_col: String,
    pub outcome_col: String,
    pub treatment_cols: Vec<String>,
    pub confounder_cols: Vec<String>,
    pub family: FamilyChoice,
    pub k: usize,
    pub k_grid: Vec<usize>,
    pub folds: usize,
    pub seed: u64,
    pub cv_folds: usize,
    pub lambda_grid_size: usize,
    pub lambda_min_ratio: f64,
    pub marginal_density: MarginalMode,
    pub truncation: Option<(f64, f64)>,
    pub alpha: f64,
    pub threads: Option<usize>,
    pub output_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            data_path: None,
            edge_list_path: None,
            id_col: default_id_col(),
            outcome_col: default_outcome_col(),
            treatment_cols: Vec::new(),
            confounder_cols: Vec::new(),
            family: default_family(),
            k: default_k(),
            k_grid: default_k_grid(),
            folds: default_folds(),
            seed: 0,
            cv_folds: default_cv_folds(),
            lambda_grid_size: default_lambda_grid_size(),
            lambda_min_ratio: default_lambda_min_ratio(),
            marginal_density: default_marginal(),
            truncation: None,
            alpha: default_alpha(),
            threads: None,
            output_dir: default_output_dir(),
        }
    }
}

/// The fields the config hash covers. Thread count and output directory do
/// not change any computed value, so they are excluded.
#[derive(Serialize)]
struct SemanticView<'a> {
    data_path: &'a Option<PathBuf>,
    edge_list_path: &'a Option<PathBuf>,
    id_col: &'a str,
    outcome_col: &'a str,
    treatment_cols: &'a [String],
    confounder_cols: &'a [String],
    family: FamilyChoice,
    k: usize,
    k_grid: &'a [usize],
    folds: usize,
    seed: u64,
    cv_folds: usize,
    lambda_grid_size: usize,
    lambda_min_ratio: f64,
    marginal_density: MarginalMode,
    truncation: Option<(f64, f64)>,
    alpha: f64,
}

impl RunConfig {
    pub fn from_file(path: &std::path::Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("invalid config {}: {e}", path.display())))
    }

    pub fn column_spec(&self) -> ColumnSpec {
        ColumnSpec {
            id_col: self.id_col.clone(),
            outcome_col: self.outcome_col.clone(),
            treatment_cols: self.treatment_cols.clone(),
            confounder_cols: self.confounder_cols.clone(),
        }
    }

    pub fn cv_config(&self) -> CvConfig {
        CvConfig {
            folds: self.cv_folds,
            grid_size: self.lambda_grid_size,
            lambda_min_ratio: self.lambda_min_ratio,
            seed: self.seed,
        }
    }

    pub fn estimate_config(&self) -> EstimateConfig {
        EstimateConfig {
            folds: self.folds,
            seed: self.seed,
            cv: self.cv_config(),
            marginal: self.marginal_density,
            truncation: self.truncation,
        }
    }

    /// SHA-256 over the canonical serialization of the semantic fields.
    pub fn config_hash(&self) -> String {
        let view = SemanticView {
            data_path: &self.data_path,
            edge_list_path: &self.edge_list_path,
            id_col: &self.id_col,
            outcome_col: &self.outcome_col,
            treatment_cols: &self.treatment_cols,
            confounder_cols: &self.confounder_cols,
            family: self.family,
            k: self.k,
            k_grid: &self.k_grid,
            folds: self.folds,
            seed: self.seed,
            cv_folds: self.cv_folds,
            lambda_grid_size: self.lambda_grid_size,
            lambda_min_ratio: self.lambda_min_ratio,
            marginal_density: self.marginal_density,
            truncation: self.truncation,
            alpha: self.alpha,
        };
        let bytes = serde_json::to_vec(&view).expect("config serializes");
        let digest = Sha256::digest(&bytes);
        let mut hex = String::with_capacity(64);
        for b in digest {
            hex.push_str(&format!("{b:02x}"));
        }
        hex
    }

    pub fn validate_for_run(&self) -> Result<()> {
        if self.data_path.is_none() {
            return Err(Error::Config("no data file configured".to_string()));
        }
        if self.edge_list_path.is_none() {
            return Err(Error::Config("no edge list configured".to_string()));
        }
        if self.treatment_cols.is_empty() {
            return Err(Error::Config("no treatment columns configured".to_string()));
        }
        if !(0.0 < self.alpha && self.alpha < 1.0) {
            return Err(Error::Config(format!(
                "alpha must lie in (0, 1), got {}",
                self.alpha
            )));
        }
        if self.k_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("k_grid must be strictly ascending".to_string()));
        }
        Ok(())
    }
}
