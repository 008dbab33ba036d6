//! Batch pipeline commands behind the binary: simulate, sweep, estimate.
//! Stdout carries the human summary; all machine-readable output goes to
//! files, written atomically (temp file + rename) so interrupted runs never
//! leave partial output.

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use rayon::prelude::*;
use serde::Serialize;

use crate::basis::{basis_for_family, BasisFamily};
use crate::config::{FamilyChoice, RunConfig};
use crate::data::{align_graph, load_dataset, write_dataset_csv, ColumnSpec, Dataset};
use crate::diagnostics::{basis_sweep, write_sweep_csv, FamilySweep, SweepConfig};
use crate::error::{Error, Result};
use crate::estimator::{run_treatment, write_influence_csv, DrResult};
use crate::gps::{balance_table, write_balance_csv};
use crate::graph::{read_edge_list_csv, write_edge_list_csv, AdjacencyGraph};
use crate::synthetic::{generate, DgpSpec, GENERATOR_NAME};

/// Write a file atomically: temp file in the same directory, then rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    if let Some(dir) = dir {
        std::fs::create_dir_all(dir)?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

fn load_inputs(config: &RunConfig) -> Result<(Dataset, AdjacencyGraph, usize)> {
    config.validate_for_run()?;
    let spec: ColumnSpec = config.column_spec();
    let data_path = config.data_path.as_ref().unwrap();
    let loaded = load_dataset(data_path, &spec)?;
    let edges_path = config.edge_list_path.as_ref().unwrap();
    let pairs = read_edge_list_csv(edges_path)?;
    // graph ids: every id appearing in the edge list plus all dataset ids,
    // so isolated dataset units stay representable
    let mut graph_ids: Vec<String> = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for id in loaded
        .dataset
        .unit_ids
        .iter()
        .cloned()
        .chain(pairs.iter().flat_map(|(a, b)| [a.clone(), b.clone()]))
    {
        if seen.insert(id.clone()) {
            graph_ids.push(id);
        }
    }
    let graph = AdjacencyGraph::from_edge_list(&pairs, &graph_ids)?.graph;
    let (aligned, _) = align_graph(&loaded.dataset, &graph, &graph_ids)?;
    Ok((loaded.dataset, aligned, loaded.dropped_rows))
}

pub struct SimulateOutputs {
    pub data_path: PathBuf,
    pub edges_path: PathBuf,
    pub truth_path: PathBuf,
}

/// Write a synthetic dataset in the standard CSV formats plus the truth
/// record, so end-to-end runs consume it through the public interface.
pub fn cmd_simulate(spec: &DgpSpec, out_dir: &Path) -> Result<SimulateOutputs> {
    let (dataset, graph, truth) = generate(spec)?;
    std::fs::create_dir_all(out_dir)?;
    let data_path = out_dir.join("data.csv");
    let column_spec = ColumnSpec {
        id_col: "id".to_string(),
        outcome_col: "outcome".to_string(),
        treatment_cols: vec!["treatment".to_string()],
        confounder_cols: dataset
            .confounder_names()
            .iter()
            .map(|s| s.to_string())
            .collect(),
    };
    write_dataset_csv(&data_path, &dataset, &column_spec)?;
    let edges_path = out_dir.join("edges.csv");
    write_edge_list_csv(&edges_path, &graph, &dataset.unit_ids)?;
    let truth_path = out_dir.join("truth.json");
    let mut doc = serde_json::to_string_pretty(&truth)?;
    doc.push('\n');
    write_atomic(&truth_path, doc.as_bytes())?;
    println!(
        "simulated {} units on a {}x{} lattice ({} edges) with effect {} -> {}",
        truth.n,
        spec.grid_side,
        spec.grid_side,
        graph.edge_count(),
        truth.tau,
        out_dir.display()
    );
    Ok(SimulateOutputs {
        data_path,
        edges_path,
        truth_path,
    })
}

pub struct SweepOutcome {
    pub sweeps: Vec<FamilySweep>,
    pub csv_path: PathBuf,
}

/// Basis-dimension sweep: one table row per (K, family), the smallest K
/// passing the residual Moran rule printed per family.
pub fn cmd_sweep(config: &RunConfig) -> Result<SweepOutcome> {
    let (dataset, graph, dropped) = load_inputs(config)?;
    if dropped > 0 {
        println!("note: dropped {dropped} incomplete row(s) during ingestion");
    }
    let treatment = &config.treatment_cols[0];
    let families: Vec<BasisFamily> = config.family.families();
    let sweep_config = SweepConfig {
        outer_folds: config.folds,
        cv: config.cv_config(),
        alpha: config.alpha,
        seed: config.seed,
    };
    let sweeps = basis_sweep(
        &dataset,
        treatment,
        &graph,
        &families,
        &config.k_grid,
        &sweep_config,
    )?;
    let csv_path = config.output_dir.join("sweep.csv");
    write_sweep_csv(&csv_path, &sweeps)?;
    for sweep in &sweeps {
        if sweep.selection.no_pass {
            println!(
                "{}: no candidate K passed the Moran rule at alpha = {}; largest K = {} reported (no-pass)",
                sweep.family, config.alpha, sweep.selection.selected
            );
        } else {
            println!(
                "{}: selected K = {} (smallest K with residual Moran p > {})",
                sweep.family, sweep.selection.selected, config.alpha
            );
        }
    }
    println!("sweep table written to {}", csv_path.display());
    Ok(SweepOutcome { sweeps, csv_path })
}

#[derive(Serialize)]
struct CoefficientEntry {
    name: String,
    value: f64,
}

#[derive(Serialize)]
struct TreatmentReport {
    treatment: String,
    effect: f64,
    se: f64,
    lower95: f64,
    upper95: f64,
    beta_hat: f64,
    correction: f64,
    moran_i: f64,
    moran_p: f64,
    weight_min: f64,
    weight_mean: f64,
    weight_max: f64,
    sigma2_gps: f64,
    lambda_gps_full: f64,
    lambda_outcome_full: f64,
    active_bases_outcome: usize,
    lambda_gps_folds: Vec<f64>,
    lambda_outcome_folds: Vec<f64>,
    confounder_coefficients: Vec<CoefficientEntry>,
}

#[derive(Serialize)]
struct ResultsDoc {
    version: String,
    timestamp: u64,
    rng: String,
    seed: u64,
    config_hash: String,
    family: String,
    k: usize,
    folds: usize,
    marginal_density: String,
    truncation: Option<(f64, f64)>,
    n_units: usize,
    dropped_rows: usize,
    results: Vec<TreatmentReport>,
}

pub struct EstimateOutcome {
    pub results: Vec<DrResult>,
    pub json_path: PathBuf,
}

/// Per-treatment doubly robust estimation at the configured K, with balance
/// and influence exports per treatment and one results JSON for the run.
pub fn cmd_estimate(config: &RunConfig) -> Result<EstimateOutcome> {
    let (dataset, graph, dropped) = load_inputs(config)?;
    let family = match config.family {
        FamilyChoice::Both => {
            return Err(Error::Config(
                "estimate needs a single basis family (icar or mem)".to_string(),
            ))
        }
        FamilyChoice::Icar => BasisFamily::Icar,
        FamilyChoice::Mem => BasisFamily::Mem,
    };
    let basis = basis_for_family(&graph, family, config.k)?;
    let est_config = config.estimate_config();

    let results: Result<Vec<DrResult>> = config
        .treatment_cols
        .par_iter()
        .map(|t| run_treatment(&dataset, &graph, t, &basis, &est_config))
        .collect();
    let results = results?;

    std::fs::create_dir_all(&config.output_dir)?;
    let mut reports = Vec::with_capacity(results.len());
    for res in &results {
        let balance = balance_table(
            &dataset,
            &res.treatment_name,
            &res.weights,
            Some((&basis, res.gps_active_basis.as_slice())),
        )?;
        write_balance_csv(
            &config.output_dir.join(format!("balance_{}.csv", res.treatment_name)),
            &balance,
        )?;
        write_influence_csv(
            &config.output_dir.join(format!("influence_{}.csv", res.treatment_name)),
            &dataset.unit_ids,
            &res.influence,
        )?;
        reports.push(TreatmentReport {
            treatment: res.treatment_name.clone(),
            effect: res.tau_hat,
            se: res.se,
            lower95: res.ci_low,
            upper95: res.ci_high,
            beta_hat: res.beta_hat,
            correction: res.correction,
            moran_i: res.moran_i,
            moran_p: res.moran_p,
            weight_min: res.weight_summary.min,
            weight_mean: res.weight_summary.mean,
            weight_max: res.weight_summary.max,
            sigma2_gps: res.sigma2,
            lambda_gps_full: res.lambda_gps_full,
            lambda_outcome_full: res.lambda_outcome_full,
            active_bases_outcome: res.outcome_active_bases,
            lambda_gps_folds: res.fold_records.iter().map(|f| f.lambda_gps).collect(),
            lambda_outcome_folds: res
                .fold_records
                .iter()
                .map(|f| f.lambda_outcome)
                .collect(),
            confounder_coefficients: res
                .confounder_coefficients
                .iter()
                .map(|(name, value)| CoefficientEntry {
                    name: name.clone(),
                    value: *value,
                })
                .collect(),
        });
    }

    let doc = ResultsDoc {
        version: env!("CARGO_PKG_VERSION").to_string(),
        timestamp: SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
        rng: GENERATOR_NAME.to_string(),
        seed: config.seed,
        config_hash: config.config_hash(),
        family: config.family.to_string(),
        k: config.k,
        folds: config.folds,
        marginal_density: match config.marginal_density {
            crate::gps::MarginalMode::Normal => "normal".to_string(),
            crate::gps::MarginalMode::Kde => "kde".to_string(),
        },
        truncation: config.truncation,
        n_units: dataset.n(),
        dropped_rows: dropped,
        results: reports,
    };
    let json_path = config.output_dir.join("results.json");
    let mut text = serde_json::to_string_pretty(&doc)?;
    text.push('\n');
    write_atomic(&json_path, text.as_bytes())?;

    for res in &results {
        println!(
            "{}: effect {:.6} (se {:.6}, 95% CI [{:.6}, {:.6}]), residual Moran p = {:.3}",
            res.treatment_name, res.tau_hat, res.se, res.ci_low, res.ci_high, res.moran_p
        );
    }
    println!("results written to {}", json_path.display());
    Ok(EstimateOutcome { results, json_path })
}
