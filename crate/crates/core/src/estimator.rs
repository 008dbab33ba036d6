//! Cross-fitted doubly robust estimation: out-of-fold nuisance predictions
//! for the treatment mean and the outcome, stabilized-weight correction of
//! the full-sample treatment coefficient, and influence-function standard
//! errors.

use ndarray::{Array1, Array2, ArrayView1};
use rayon::prelude::*;

use crate::basis::BasisMatrix;
use crate::crossfit::{derive_seed, CrossFitPlan};
use crate::data::Dataset;
use crate::diagnostics::{morans_i, MoranConfig};
use crate::error::{Error, Result};
use crate::gps::{fit_gps, gps_design, stabilized_weights, MarginalMode, WeightVector};
use crate::graph::AdjacencyGraph;
use crate::lasso::{cv_lambda_auto, select_vals, CvConfig, DesignSpec};

const SALT_FULL_GPS: u64 = 1_000_003;
const SALT_FULL_OUTCOME: u64 = 1_000_033;

/// Settings for one treatment run.
#[derive(Debug, Clone)]
pub struct EstimateConfig {
    pub folds: usize,
    pub seed: u64,
    pub cv: CvConfig,
    pub marginal: MarginalMode,
    pub truncation: Option<(f64, f64)>,
}

impl Default for EstimateConfig {
    fn default() -> Self {
        EstimateConfig {
            folds: 10,
            seed: 0,
            cv: CvConfig::default(),
            marginal: MarginalMode::Normal,
            truncation: None,
        }
    }
}

/// Per-fold lambda selections and active-set sizes, kept for the run report.
#[derive(Debug, Clone, serde::Serialize)]
pub struct FoldRecord {
    pub fold: usize,
    pub lambda_gps: f64,
    pub lambda_outcome: f64,
    pub gps_active: usize,
    pub outcome_active: usize,
}

/// Cross-fitted per-unit predictions from both nuisance models.
#[derive(Debug, Clone)]
pub struct NuisanceEstimates {
    pub mu_hat: Array1<f64>,
    pub g_hat: Array1<f64>,
    pub fold_records: Vec<FoldRecord>,
}

/// Outcome-model design: [intercept | treatment | confounders | basis];
/// everything but the basis block is unpenalized. The treatment coefficient
/// sits at column 1.
pub(crate) fn outcome_design(
    dataset: &Dataset,
    treatment: ArrayView1<f64>,
    rows: Option<&[usize]>,
    basis: Option<&BasisMatrix>,
) -> (Array2<f64>, DesignSpec) {
    let all_rows: Vec<usize>;
    let rows = match rows {
        Some(r) => r,
        None => {
            all_rows = (0..dataset.n()).collect();
            &all_rows
        }
    };
    let q = dataset.confounders.len();
    let k = basis.map_or(0, BasisMatrix::k);
    let mut x = Array2::zeros((rows.len(), 2 + q + k));
    for (r, &i) in rows.iter().enumerate() {
        x[[r, 0]] = 1.0;
        x[[r, 1]] = treatment[i];
        for (c, (_, v)) in dataset.confounders.iter().enumerate() {
            x[[r, 2 + c]] = v[i];
        }
        if let Some(b) = basis {
            for c in 0..k {
                x[[r, 2 + q + c]] = b.z[[i, c]];
            }
        }
    }
    let spec = DesignSpec::new((0..2 + q).collect(), (2 + q..2 + q + k).collect());
    (x, spec)
}

/// Fit both nuisance models per fold on the training complement and predict
/// the held-out fold, so every unit's predictions come from models that never
/// saw its fold. Penalties are CV-selected inside each training set.
pub fn crossfit_nuisances(
    dataset: &Dataset,
    treatment_name: &str,
    gps_basis: Option<&BasisMatrix>,
    outcome_basis: Option<&BasisMatrix>,
    plan: &CrossFitPlan,
    cv: &CvConfig,
) -> Result<NuisanceEstimates> {
    if plan.n != dataset.n() {
        return Err(Error::Parameter(format!(
            "plan covers {} units but dataset has {}",
            plan.n,
            dataset.n()
        )));
    }
    let a = dataset.treatment(treatment_name)?;
    let y = &dataset.outcome;

    struct FoldOut {
        fold: usize,
        test: Vec<usize>,
        mu: Array1<f64>,
        g: Array1<f64>,
        record: FoldRecord,
    }

    let fold_results: Result<Vec<FoldOut>> = (0..plan.folds)
        .into_par_iter()
        .map(|k| -> Result<FoldOut> {
            let run = || -> Result<FoldOut> {
                let (train, test) = plan.split(k);
                // GPS mean model on the training complement
                let (xg, spec_g) = gps_design(dataset, Some(&train), gps_basis);
                let at = select_vals(a.view(), &train);
                let mut cv_g = cv.clone();
                cv_g.seed = derive_seed(cv.seed, 2 * k as u64);
                let gps_fit = cv_lambda_auto(xg.view(), at.view(), &spec_g, &cv_g)?;
                let (xg_test, _) = gps_design(dataset, Some(&test), gps_basis);
                let mu = gps_fit.predict(xg_test.view());

                // outcome model on the training complement
                let (xo, spec_o) = outcome_design(dataset, a.view(), Some(&train), outcome_basis);
                let yt = select_vals(y.view(), &train);
                let mut cv_o = cv.clone();
                cv_o.seed = derive_seed(cv.seed, 2 * k as u64 + 1);
                let out_fit = cv_lambda_auto(xo.view(), yt.view(), &spec_o, &cv_o)?;
                let (xo_test, _) = outcome_design(dataset, a.view(), Some(&test), outcome_basis);
                let g = out_fit.predict(xo_test.view());

                Ok(FoldOut {
                    fold: k,
                    test,
                    mu,
                    g,
                    record: FoldRecord {
                        fold: k,
                        lambda_gps: gps_fit.lambda,
                        lambda_outcome: out_fit.lambda,
                        gps_active: gps_fit.active_count,
                        outcome_active: out_fit.active_count,
                    },
                })
            };
            run().map_err(|e| Error::Numerical(format!("nuisance fit failed in fold {k}: {e}")))
        })
        .collect();

    let mut fold_results = fold_results?;
    fold_results.sort_by_key(|f| f.fold);

    let n = dataset.n();
    let mut mu_hat = Array1::zeros(n);
    let mut g_hat = Array1::zeros(n);
    let mut fold_records = Vec::with_capacity(plan.folds);
    for fr in fold_results {
        for (pos, &unit) in fr.test.iter().enumerate() {
            mu_hat[unit] = fr.mu[pos];
            g_hat[unit] = fr.g[pos];
        }
        fold_records.push(fr.record);
    }
    Ok(NuisanceEstimates {
        mu_hat,
        g_hat,
        fold_records,
    })
}

/// The DR estimate proper, before diagnostics are attached.
#[derive(Debug, Clone)]
pub struct DrEstimate {
    pub tau_hat: f64,
    pub correction: f64,
    pub se: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub influence: Array1<f64>,
    pub denominator: f64,
}

/// tau_hat = beta_hat + [ (1/n) sum w (a - mu)(y - g) ] / [ (1/n) sum (a - mu) a ],
/// with the influence function
/// phi_j = w_j (a_j - mu_j)(y_j - g_j)/D + ((a_j - mu_j) a_j / D)(beta_hat - tau_hat)
/// and SE = sqrt(sum phi^2) / n.
pub fn dr_estimate(
    a: ArrayView1<f64>,
    y: ArrayView1<f64>,
    mu_hat: ArrayView1<f64>,
    g_hat: ArrayView1<f64>,
    weights: ArrayView1<f64>,
    beta_hat: f64,
) -> Result<DrEstimate> {
    let n = a.len();
    if [y.len(), mu_hat.len(), g_hat.len(), weights.len()]
        .iter()
        .any(|&l| l != n)
    {
        return Err(Error::Parameter(
            "dr_estimate inputs must share one length".to_string(),
        ));
    }
    let nf = n as f64;
    let a_mean = a.sum() / nf;
    let var_a = a.iter().map(|v| (v - a_mean) * (v - a_mean)).sum::<f64>() / nf;

    let mut d = 0.0;
    for j in 0..n {
        d += (a[j] - mu_hat[j]) * a[j];
    }
    d /= nf;
    if d.abs() < 1e-12 * var_a {
        return Err(Error::Numerical(format!(
            "near-singular DR denominator {d:.3e}: the fitted treatment mean \
             nearly interpolates the treatment"
        )));
    }

    let mut num = 0.0;
    for j in 0..n {
        num += weights[j] * (a[j] - mu_hat[j]) * (y[j] - g_hat[j]);
    }
    num /= nf;
    let correction = num / d;
    let tau_hat = beta_hat + correction;

    let mut influence = Array1::zeros(n);
    let mut sum_sq = 0.0;
    for j in 0..n {
        let adjustment = weights[j] * (a[j] - mu_hat[j]) * (y[j] - g_hat[j]) / d;
        let baseline = (a[j] - mu_hat[j]) * a[j] / d * (beta_hat - tau_hat);
        let phi = adjustment + baseline;
        influence[j] = phi;
        sum_sq += phi * phi;
    }
    let se = sum_sq.sqrt() / nf;

    Ok(DrEstimate {
        tau_hat,
        correction,
        se,
        ci_low: tau_hat - 1.96 * se,
        ci_high: tau_hat + 1.96 * se,
        influence,
        denominator: d,
    })
}

/// Summary statistics of the weight vector carried into reports.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct WeightSummary {
    pub min: f64,
    pub mean: f64,
    pub max: f64,
}

/// Complete per-treatment result.
#[derive(Debug, Clone)]
pub struct DrResult {
    pub treatment_name: String,
    pub tau_hat: f64,
    pub beta_hat: f64,
    pub correction: f64,
    pub se: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub influence: Array1<f64>,
    pub weights: WeightVector,
    pub weight_summary: WeightSummary,
    pub moran_i: f64,
    pub moran_p: f64,
    pub fold_records: Vec<FoldRecord>,
    pub lambda_gps_full: f64,
    pub lambda_outcome_full: f64,
    pub outcome_active_bases: usize,
    pub sigma2: f64,
    pub marginal_mode: String,
    pub confounder_coefficients: Vec<(String, f64)>,
    /// Basis columns active in the full-sample GPS mean model (indices into
    /// the basis matrix), the directions the weights balance on.
    pub gps_active_basis: Vec<usize>,
}

/// Full pipeline for one treatment with separately chosen GPS and outcome
/// bases (the double-robustness checks withhold one side at a time).
pub fn run_treatment_with_bases(
    dataset: &Dataset,
    graph: &AdjacencyGraph,
    treatment_name: &str,
    gps_basis: Option<&BasisMatrix>,
    outcome_basis: Option<&BasisMatrix>,
    config: &EstimateConfig,
) -> Result<DrResult> {
    let n = dataset.n();
    let a = dataset.treatment(treatment_name)?;
    let y = &dataset.outcome;
    if graph.n() != n {
        return Err(Error::Parameter(format!(
            "graph has {} nodes but dataset has {n} units",
            graph.n()
        )));
    }

    let plan = CrossFitPlan::new(n, config.folds, config.seed)?;
    let mut cv = config.cv.clone();
    cv.seed = config.seed;
    let nuisances = crossfit_nuisances(
        dataset,
        treatment_name,
        gps_basis,
        outcome_basis,
        &plan,
        &cv,
    )?;

    // full-sample GPS: residual variance and marginal density for the weights
    let mut cv_gps = cv.clone();
    cv_gps.seed = derive_seed(config.seed, SALT_FULL_GPS);
    let gps_model = fit_gps(dataset, treatment_name, gps_basis, &cv_gps, config.marginal)?;
    let weights = stabilized_weights(
        gps_model.sigma2,
        &gps_model.marginal,
        a.view(),
        nuisances.mu_hat.view(),
        config.truncation,
    )?;

    // full-sample outcome fit: the unpenalized treatment coefficient
    let (xo, spec_o) = outcome_design(dataset, a.view(), None, outcome_basis);
    let mut cv_out = cv.clone();
    cv_out.seed = derive_seed(config.seed, SALT_FULL_OUTCOME);
    let outcome_fit = cv_lambda_auto(xo.view(), y.view(), &spec_o, &cv_out)?;
    let beta_hat = outcome_fit.coefficients[1];

    let estimate = dr_estimate(
        a.view(),
        y.view(),
        nuisances.mu_hat.view(),
        nuisances.g_hat.view(),
        weights.w.view(),
        beta_hat,
    )?;

    let residuals = y - &nuisances.g_hat;
    let moran = morans_i(residuals.view(), graph, &MoranConfig::default())?;

    let (w_min, w_mean, w_max) = weights.summary();
    let confounder_coefficients = dataset
        .confounders
        .iter()
        .enumerate()
        .map(|(c, (name, _))| (name.clone(), outcome_fit.coefficients[2 + c]))
        .collect();
    let q = dataset.confounders.len();
    let gps_active_basis: Vec<usize> = (0..gps_basis.map_or(0, BasisMatrix::k))
        .filter(|&c| gps_model.mean_fit.coefficients[1 + q + c] != 0.0)
        .collect();

    Ok(DrResult {
        treatment_name: treatment_name.to_string(),
        tau_hat: estimate.tau_hat,
        beta_hat,
        correction: estimate.correction,
        se: estimate.se,
        ci_low: estimate.ci_low,
        ci_high: estimate.ci_high,
        influence: estimate.influence,
        weights,
        weight_summary: WeightSummary {
            min: w_min,
            mean: w_mean,
            max: w_max,
        },
        moran_i: moran.i,
        moran_p: moran.p_value,
        fold_records: nuisances.fold_records,
        lambda_gps_full: gps_model.mean_fit.lambda,
        lambda_outcome_full: outcome_fit.lambda,
        outcome_active_bases: outcome_fit.active_count,
        sigma2: gps_model.sigma2,
        marginal_mode: gps_model.marginal.mode_name().to_string(),
        confounder_coefficients,
        gps_active_basis,
    })
}

/// Standard run: the same basis enters both nuisance models.
pub fn run_treatment(
    dataset: &Dataset,
    graph: &AdjacencyGraph,
    treatment_name: &str,
    basis: &BasisMatrix,
    config: &EstimateConfig,
) -> Result<DrResult> {
    run_treatment_with_bases(
        dataset,
        graph,
        treatment_name,
        Some(basis),
        Some(basis),
        config,
    )
}

/// Write the per-unit influence values as CSV.
pub fn write_influence_csv(
    path: &std::path::Path,
    unit_ids: &[String],
    influence: &Array1<f64>,
) -> Result<()> {
    let mut out = String::from("unit_id,influence\n");
    for (id, phi) in unit_ids.iter().zip(influence.iter()) {
        out.push_str(&format!("{id},{phi}\n"));
    }
    crate::cli::write_atomic(path, out.as_bytes())
}
