//! Moran's I spatial autocorrelation test, fit-quality metrics, and the
//! basis-dimension sweep report.

use ndarray::{Array1, ArrayView1};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::basis::{basis_for_family, select_k, BasisFamily, KSelection, ResidualReport};
use crate::crossfit::{derive_seed, CrossFitPlan};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::estimator::outcome_design;
use crate::graph::AdjacencyGraph;
use crate::lasso::{cv_lambda_auto, fit_lasso, select_vals, CvConfig};

/// How the Moran p-value is computed.
#[derive(Debug, Clone, Copy)]
pub enum MoranMethod {
    /// Normal approximation with the analytic normality-assumption variance.
    Analytic,
    /// Seed-deterministic permutation test.
    Permutation { permutations: usize, seed: u64 },
}

/// Alternative hypothesis. Residual screening tests for positive
/// autocorrelation (`Greater`), which is what the basis sweep transitions on;
/// `TwoSided` is available for general use.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MoranAlternative {
    Greater,
    TwoSided,
}

#[derive(Debug, Clone, Copy)]
pub struct MoranConfig {
    pub method: MoranMethod,
    pub alternative: MoranAlternative,
}

impl Default for MoranConfig {
    fn default() -> Self {
        MoranConfig {
            method: MoranMethod::Analytic,
            alternative: MoranAlternative::Greater,
        }
    }
}

#[derive(Debug, Clone)]
pub struct MoranResult {
    pub i: f64,
    pub expected: f64,
    /// Analytic variance under the normality assumption.
    pub variance: f64,
    pub z: f64,
    pub p_value: f64,
    pub method: &'static str,
    pub permutations: Option<usize>,
}

fn moran_statistic(e: &[f64], graph: &AdjacencyGraph, sse: f64) -> f64 {
    let n = e.len() as f64;
    let s0 = graph.weight_total();
    let cross: f64 = graph
        .edges()
        .iter()
        .map(|&(i, j)| e[i] * e[j])
        .sum::<f64>()
        * 2.0;
    (n / s0) * cross / sse
}

/// Moran's I with either the analytic normal-approximation p-value or a
/// permutation p-value. The statistic is computed on centered values.
pub fn morans_i(
    values: ArrayView1<f64>,
    graph: &AdjacencyGraph,
    config: &MoranConfig,
) -> Result<MoranResult> {
    let n = values.len();
    if n != graph.n() {
        return Err(Error::Parameter(format!(
            "value vector has length {n} but graph has {} nodes",
            graph.n()
        )));
    }
    if graph.edge_count() == 0 {
        return Err(Error::Degenerate(
            "Moran's I undefined on an edgeless graph (S0 = 0)".to_string(),
        ));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Data("non-finite value passed to Moran's I".to_string()));
    }
    let nf = n as f64;
    let mean = values.sum() / nf;
    let e: Vec<f64> = values.iter().map(|v| v - mean).collect();
    let sse: f64 = e.iter().map(|v| v * v).sum();
    if sse <= 1e-300 {
        return Err(Error::Degenerate(
            "Moran's I undefined for zero-variance values".to_string(),
        ));
    }

    let i_obs = moran_statistic(&e, graph, sse);
    let expected = -1.0 / (nf - 1.0);

    // normality-assumption moments for the binary symmetric weight matrix:
    // S0 = 2m, S1 = 4m, S2 = sum_i (2 deg_i)^2
    let s0 = graph.weight_total();
    let s1 = 2.0 * s0;
    let s2: f64 = graph
        .degree()
        .iter()
        .map(|&d| {
            let t = 2.0 * d as f64;
            t * t
        })
        .sum();
    let variance = (nf * nf * s1 - nf * s2 + 3.0 * s0 * s0)
        / ((nf * nf - 1.0) * s0 * s0)
        - expected * expected;
    let z = (i_obs - expected) / variance.sqrt();

    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    match config.method {
        MoranMethod::Analytic => {
            let p_value = match config.alternative {
                MoranAlternative::Greater => 1.0 - normal.cdf(z),
                MoranAlternative::TwoSided => 2.0 * (1.0 - normal.cdf(z.abs())),
            };
            Ok(MoranResult {
                i: i_obs,
                expected,
                variance,
                z,
                p_value,
                method: "analytic",
                permutations: None,
            })
        }
        MoranMethod::Permutation { permutations, seed } => {
            if permutations == 0 {
                return Err(Error::Parameter(
                    "permutation count must be positive".to_string(),
                ));
            }
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let mut exceed = 0usize;
            let mut perm = e.clone();
            for b in 0..permutations {
                let mut rng =
                    rand_chacha::ChaCha8Rng::seed_from_u64(derive_seed(seed, b as u64));
                perm.shuffle(&mut rng);
                let i_b = moran_statistic(&perm, graph, sse);
                let extreme = match config.alternative {
                    MoranAlternative::Greater => i_b >= i_obs,
                    MoranAlternative::TwoSided => {
                        (i_b - expected).abs() >= (i_obs - expected).abs()
                    }
                };
                if extreme {
                    exceed += 1;
                }
            }
            let p_value = (1 + exceed) as f64 / (permutations + 1) as f64;
            Ok(MoranResult {
                i: i_obs,
                expected,
                variance,
                z,
                p_value,
                method: "permutation",
                permutations: Some(permutations),
            })
        }
    }
}

/// Prediction-quality metrics for one fitted model.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct FitMetrics {
    pub rmse: f64,
    pub mae: f64,
    pub r2: f64,
    pub active_bases: usize,
}

pub fn fit_metrics(
    y: ArrayView1<f64>,
    y_hat: ArrayView1<f64>,
    active_bases: usize,
) -> Result<FitMetrics> {
    if y.len() != y_hat.len() {
        return Err(Error::Parameter(
            "fit_metrics inputs must share one length".to_string(),
        ));
    }
    let n = y.len() as f64;
    let mean = y.sum() / n;
    let sst: f64 = y.iter().map(|v| (v - mean) * (v - mean)).sum();
    if sst <= 0.0 {
        return Err(Error::Degenerate(
            "R^2 undefined for a zero-variance response".to_string(),
        ));
    }
    let mut sse = 0.0;
    let mut abs = 0.0;
    for (a, b) in y.iter().zip(y_hat.iter()) {
        let d = a - b;
        sse += d * d;
        abs += d.abs();
    }
    Ok(FitMetrics {
        rmse: (sse / n).sqrt(),
        mae: abs / n,
        r2: 1.0 - sse / sst,
        active_bases,
    })
}

/// Sweep settings: outer folds for the held-out predictions, the inner
/// lambda CV, and the Moran significance level.
#[derive(Debug, Clone)]
pub struct SweepConfig {
    pub outer_folds: usize,
    pub cv: CvConfig,
    pub alpha: f64,
    pub seed: u64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            outer_folds: 10,
            cv: CvConfig::default(),
            alpha: 0.05,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct FamilySweep {
    pub family: BasisFamily,
    pub selection: KSelection,
}

/// For each K in the grid and each family: lambda chosen by CV on the full
/// data, held-out predictions from an outer fold split refit at that lambda,
/// metrics and a residual Moran test on those predictions, and the smallest
/// passing K per the selection rule.
pub fn basis_sweep(
    dataset: &Dataset,
    treatment_name: &str,
    graph: &AdjacencyGraph,
    families: &[BasisFamily],
    k_grid: &[usize],
    config: &SweepConfig,
) -> Result<Vec<FamilySweep>> {
    if families.is_empty() {
        return Err(Error::Parameter("no basis family selected".to_string()));
    }
    if k_grid.is_empty() {
        return Err(Error::Parameter("K grid is empty".to_string()));
    }
    let a = dataset.treatment(treatment_name)?;
    let y = &dataset.outcome;
    let n = dataset.n();
    let nf = n as f64;
    let y_mean = y.sum() / nf;
    let total_ss: f64 = y.iter().map(|v| (v - y_mean) * (v - y_mean)).sum();
    let max_k = *k_grid.last().unwrap();
    let plan = CrossFitPlan::new(n, config.outer_folds, derive_seed(config.seed, 0x5eed))?;

    let mut out = Vec::with_capacity(families.len());
    for &family in families {
        let basis_full = basis_for_family(graph, family, max_k)?;
        let provider = |k: usize| -> Result<ResidualReport> {
            let basis_k = basis_full.prefix(k);
            let (x, spec) = outcome_design(dataset, a.view(), None, Some(&basis_k));
            let mut cv = config.cv.clone();
            cv.seed = derive_seed(config.seed, k as u64);
            let full_fit = cv_lambda_auto(x.view(), y.view(), &spec, &cv)?;
            let lambda = full_fit.lambda;
            let mut y_hat = Array1::zeros(n);
            for fold in 0..config.outer_folds {
                let (train, test) = plan.split(fold);
                let (xt, spec_t) =
                    outcome_design(dataset, a.view(), Some(&train), Some(&basis_k));
                let yt = select_vals(y.view(), &train);
                let fit = if spec_t.penalized.is_empty() || lambda == 0.0 {
                    fit_lasso(xt.view(), yt.view(), &spec_t, 0.0)?
                } else {
                    fit_lasso(xt.view(), yt.view(), &spec_t, lambda)?
                };
                let (xv, _) = outcome_design(dataset, a.view(), Some(&test), Some(&basis_k));
                let pred = fit.predict(xv.view());
                for (pos, &unit) in test.iter().enumerate() {
                    y_hat[unit] = pred[pos];
                }
            }
            Ok(ResidualReport {
                residuals: y - &y_hat,
                total_ss,
                active_bases: full_fit.active_count,
            })
        };
        let selection = select_k(k_grid, provider, graph, config.alpha)?;
        out.push(FamilySweep { family, selection });
    }
    Ok(out)
}

/// Sweep CSV mirroring the report table: K, family, rmse, mae, r2,
/// active_bases, moran_p.
pub fn write_sweep_csv(path: &std::path::Path, sweeps: &[FamilySweep]) -> Result<()> {
    let mut out = String::from("K,family,rmse,mae,r2,active_bases,moran_p\n");
    // rows interleaved by K, families in given order, mirroring the report shape
    let all_ks: Vec<usize> = sweeps
        .first()
        .map(|s| s.selection.rows.iter().map(|r| r.k).collect())
        .unwrap_or_default();
    for &k in &all_ks {
        for sweep in sweeps {
            if let Some(row) = sweep.selection.rows.iter().find(|r| r.k == k) {
                out.push_str(&format!(
                    "{},{},{},{},{},{},{}\n",
                    row.k, sweep.family, row.rmse, row.mae, row.r2, row.active_bases, row.moran_p
                ));
            }
        }
    }
    crate::cli::write_atomic(path, out.as_bytes())
}
